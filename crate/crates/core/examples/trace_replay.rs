// SPDX-License-Identifier: Apache-2.0

//! Records the requests the stream generators emit in one run, writes them
//! as a CSV trace, and feeds the trace back in place of the generators.
//!
//!     cargo run --release --example trace_replay

use noc_qos::model::TrafficConfig;
use noc_qos::traffic::write_trace;
use noc_qos::{preset, run_scenario, Simulation};

fn main() {
    let mut cfg = preset("qos-low").expect("known preset");
    cfg.sim_cycles = 100_000;
    let mut sim = Simulation::new(cfg.clone()).expect("valid preset").record_emissions();
    while !sim.is_finished() {
        sim.step();
    }
    let trace = sim.emitted().expect("recording enabled");
    let path = std::env::temp_dir().join("noc-qos-trace.csv");
    write_trace(&path, trace).expect("writable temp dir");
    println!("{} requests written to {}", trace.len(), path.display());

    // The CPU stays closed-loop; the open-loop streams come from the file.
    for init in cfg.initiators.iter_mut().filter(|i| i.name != "CPU") {
        init.traffic = TrafficConfig::Trace { path: path.display().to_string() };
    }
    let replayed = run_scenario(&cfg).expect("trace is readable");
    let original = sim.report();
    for name in ["MPEG", "VID", "GEN"] {
        println!(
            "{name}: generated {:.1} MB/s, replayed {:.1} MB/s",
            original.delivered_mbps(name),
            replayed.delivered_mbps(name)
        );
    }
}
