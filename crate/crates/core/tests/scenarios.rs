// SPDX-License-Identifier: Apache-2.0

use noc_qos::metrics::service_deficit_jitter;
use noc_qos::model::{Arrival, InitiatorConfig, Kind, QosLevel, Scheme, ThreadQos, TrafficConfig};
use noc_qos::presets::{preset, saturated, Topology};
use noc_qos::traffic::{write_trace, TraceRecord};
use noc_qos::{run_scenario, SimError, Simulation};

fn finished(cfg: noc_qos::ScenarioConfig) -> Simulation {
    let mut sim = Simulation::new(cfg).unwrap();
    while !sim.is_finished() {
        sim.step();
    }
    sim
}

#[test]
fn single_saturating_initiator_gets_full_bandwidth() {
    for scheme in [Scheme::FixedPriority, Scheme::RoundRobin, Scheme::Tdma, Scheme::FixedWeight, Scheme::Qos] {
        for words in [1, 4, 8] {
            let report = run_scenario(&saturated(scheme, &[1], words, Topology::Flat)).unwrap();
            assert_eq!(report.delivered_mbps("I0"), 1600.0, "{scheme} {words} words");
        }
    }
}

#[test]
fn open_loop_rates_and_mixes_match_their_parameters() {
    let mut cfg = preset("priority-low").unwrap();
    let word_bytes = u64::from(cfg.word_bytes);
    cfg.initiators[0].enabled = false;
    cfg.warmup_cycles = 0;
    let mut sim = Simulation::new(cfg).unwrap().record_emissions();
    while !sim.is_finished() {
        sim.step();
    }
    let trace = sim.emitted().unwrap();
    let seconds = 1e6 / 200e6;
    for (name, rate, read_fraction) in [("MPEG", 800.0, 2.0 / 3.0), ("VID", 200.0, 1.0), ("GEN", 100.0, 0.5)] {
        let mine: Vec<&TraceRecord> = trace.iter().filter(|r| r.initiator == name).collect();
        let bytes: u64 = mine.iter().map(|r| u64::from(r.words) * word_bytes).sum();
        let mbps = bytes as f64 / seconds / 1e6;
        assert!((mbps - rate).abs() <= 0.01 * rate, "{name}: {mbps} MB/s");
        let reads = mine.iter().filter(|r| r.kind == Kind::Read).count() as f64 / mine.len() as f64;
        assert!((reads - read_fraction).abs() <= 0.02 * read_fraction, "{name}: read share {reads}");
    }
    let vid: Vec<u64> = trace.iter().filter(|r| r.initiator == "VID").map(|r| r.cycle).collect();
    // 8 words at 1 byte per cycle.
    let period = 8 * word_bytes;
    assert!(vid.windows(2).all(|w| w[1] - w[0] == period));
}

#[test]
fn cpu_think_time_and_write_ratio() {
    for name in ["qos-high", "qos-low"] {
        let report = run_scenario(&preset(name).unwrap()).unwrap();
        let cpu = report.cpu().unwrap();
        let configured = match &preset(name).unwrap().initiators[0].traffic {
            TrafficConfig::Cpu { mean_think_cycles, .. } => *mean_think_cycles,
            _ => unreachable!(),
        };
        let measured = cpu.mean_think_cycles.unwrap();
        assert!((measured - configured).abs() <= 0.02 * configured, "{name}: think {measured}");
    }
    let mut cfg = preset("qos-high").unwrap();
    cfg.sim_cycles = 400_000;
    let mut sim = Simulation::new(cfg).unwrap().record_emissions();
    while !sim.is_finished() {
        sim.step();
    }
    let cpu: Vec<&TraceRecord> = sim.emitted().unwrap().iter().filter(|r| r.initiator == "CPU").collect();
    let reads = cpu.iter().filter(|r| r.kind == Kind::Read).count() as f64;
    let ratio = reads / (cpu.len() as f64 - reads);
    assert!((ratio - 4.0).abs() <= 0.08, "RD:WR {ratio}");
}

#[test]
fn over_allocated_priority_thread_cannot_starve_a_bandwidth_thread() {
    // A greedy priority thread holding 30% against a 50% bandwidth stream.
    let mut cfg = saturated(Scheme::Qos, &[2, 2], 4, Topology::Flat);
    cfg.initiators[0].qos = ThreadQos {
        level: QosLevel::Priority,
        allocation_mbps: 480.0,
        epoch_size: 2,
        pos_limit: None,
        neg_limit: None,
    };
    cfg.initiators[1].traffic = TrafficConfig::Stream {
        rate_mbps: 800.0,
        min_words: 4,
        max_words: 4,
        read_fraction: 1.0,
        arrival: Arrival::Regular,
    };
    cfg.initiators[1].qos.level = QosLevel::Bandwidth;
    cfg.initiators[1].qos.allocation_mbps = 800.0;
    cfg.sim_cycles = 400_000;
    let report = run_scenario(&cfg).unwrap();
    assert!(report.delivered_mbps("I1") >= 800.0 * 0.999, "{}", report.summary_text());
    // The priority thread takes the leftover, well above its allocation.
    assert!(report.delivered_mbps("I0") > 480.0);
}

#[test]
fn bandwidth_thread_deficit_does_not_grow_with_the_horizon() {
    let mut deficits = Vec::new();
    for cycles in [100_000, 400_000] {
        let mut cfg = preset("qos-high").unwrap();
        cfg.sim_cycles = cycles;
        let sim = finished(cfg);
        let (start, end) = sim.ledger().window();
        // VID offers 1 B/cycle, within its 1.2 B/cycle allocation.
        deficits.push(service_deficit_jitter(sim.ledger().beats(2), 1.0, start, end));
    }
    assert!(deficits[1] <= deficits[0] * 1.5 + 64.0, "{deficits:?}");
}

#[test]
fn conservation_holds_mid_run_and_at_the_end() {
    let mut sim = Simulation::new(preset("tdma-high").unwrap()).unwrap();
    for _ in 0..5 {
        for _ in 0..10_007 {
            sim.step();
        }
        assert_eq!(sim.requests_generated(), sim.requests_serviced() + sim.requests_in_flight());
    }
}

#[test]
fn replaying_an_emission_trace_reproduces_the_run() {
    let mut cfg = preset("qos-low").unwrap();
    cfg.sim_cycles = 50_000;
    cfg.initiators[0].enabled = false;
    let mut original = Simulation::new(cfg.clone()).unwrap().record_emissions();
    while !original.is_finished() {
        original.step();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    write_trace(&path, original.emitted().unwrap()).unwrap();

    let mut replay = cfg.clone();
    for init in &mut replay.initiators[1..] {
        init.traffic = TrafficConfig::Trace { path: path.display().to_string() };
    }
    let replayed = run_scenario(&replay).unwrap();
    let first = original.report();
    assert_eq!(replayed.windows_csv(), first.windows_csv());
    for name in ["MPEG", "VID", "GEN"] {
        assert_eq!(replayed.delivered_mbps(name), first.delivered_mbps(name));
    }
}

#[test]
fn missing_trace_and_invalid_config_are_reported() {
    let mut cfg = preset("qos-low").unwrap();
    cfg.initiators[3].traffic = TrafficConfig::Trace { path: "/nonexistent/trace.csv".into() };
    assert!(matches!(Simulation::new(cfg), Err(SimError::Trace(_))));

    let mut cfg = preset("qos-low").unwrap();
    cfg.initiators.push(InitiatorConfig {
        name: "EXTRA".into(),
        enabled: true,
        seed: None,
        traffic: TrafficConfig::Idle,
        qos: ThreadQos { level: QosLevel::Bandwidth, allocation_mbps: 100.0, epoch_size: 1, pos_limit: None, neg_limit: None },
    });
    let Err(SimError::Invalid(v)) = Simulation::new(cfg) else { panic!("expected violations") };
    let text: Vec<String> = v.iter().map(ToString::to_string).collect();
    assert!(text.iter().any(|t| t.starts_with("allocation sum > 1")), "{text:?}");
}

#[test]
fn sideband_delay_keeps_protection() {
    let mut cfg = preset("qos-high").unwrap();
    cfg.sideband_delay = 4;
    cfg.sim_cycles = 300_000;
    let report = run_scenario(&cfg).unwrap();
    assert!((report.delivered_mbps("VID") - 200.0).abs() <= 4.0);
    assert!(report.delivered_mbps("MPEG") >= 780.0);
}
