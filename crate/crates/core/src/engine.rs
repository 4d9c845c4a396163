// SPDX-License-Identifier: Apache-2.0

//! The cycle loop. Each call to [`Simulation::step`] runs these phases in
//! order, and the order is part of the model:
//!
//! 1. deliver responses that are due
//! 2. generators emit, markers are stamped, sources feed leaf FIFOs
//! 3. credit counters tick
//! 4. the edge grants the target (and debits credits)
//! 5. arbitration nodes forward, root first
//! 6. epoch advance at every arbitration point
//! 7. metrics sampling

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::arbiters::{fixed_priority_pick, BranchView, FixedWeight, RoundRobin, TdmaWheel};
use crate::fabric::{Fabric, Transfer};
use crate::metrics::{
    mips, service_deficit_jitter, window_bandwidth, CpuReport, InitiatorReport, LatencyStats, MetricsLedger,
    MetricsReport, ThreadReport, WindowRow,
};
use crate::model::{Cycle, Kind, QosLevel, Request, ScenarioConfig, Scheme, ThreadConfig, TrafficConfig, Violation};
use crate::qos_edge::{EdgeState, Sideband};
use crate::target::{occupancy, TargetModel};
use crate::traffic::{read_trace, stream_seed, Generator, TraceError, TraceRecord};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// A burst in progress at the target under beat-slotted (TDMA) service.
#[derive(Debug, Clone)]
struct Active {
    req: Request,
    grant_cycle: Cycle,
    beats_total: u32,
    beats_done: u32,
}

#[derive(Debug, Clone)]
enum EdgeArbitration {
    FixedPriority(Vec<usize>),
    RoundRobin(RoundRobin),
    FixedWeight(FixedWeight),
    Tdma { wheel: TdmaWheel, active: Vec<Option<Active>> },
    Qos(EdgeState),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Pending {
    due: Cycle,
    order: u64,
    initiator: usize,
    kind: Kind,
    issue_cycle: Cycle,
    grant_cycle: Cycle,
    edge_arrival: Cycle,
}

/// One grant at the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub cycle: Cycle,
    pub thread: usize,
    pub seq_no: u64,
    pub beats: u32,
}

/// A single deterministic run of a scenario.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    threads: Vec<ThreadConfig>,
    cycle: Cycle,
    end: Cycle,
    generators: Vec<Generator>,
    enabled: Vec<bool>,
    fabric: Fabric,
    edge: EdgeArbitration,
    target: TargetModel,
    sideband: Sideband,
    responses: BinaryHeap<Reverse<Pending>>,
    response_order: u64,
    ledger: MetricsLedger,
    generated: u64,
    serviced: u64,
    emitted: Option<Vec<TraceRecord>>,
    grant_log: Option<Vec<Grant>>,
    transfer_log: Option<Vec<(Cycle, Transfer)>>,
    scratch: Vec<Request>,
}

impl Simulation {
    /// Validates the scenario and builds every component. Trace files are
    /// read here, before the first cycle.
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        let violations = config.validate();
        if !violations.is_empty() {
            return Err(SimError::Invalid(violations));
        }
        let threads = config.thread_configs();
        let mut generators = Vec::with_capacity(config.initiators.len());
        for (i, init) in config.initiators.iter().enumerate() {
            let trace = match &init.traffic {
                TrafficConfig::Trace { path } => Some(read_trace(path)?),
                _ => None,
            };
            let seed = init.seed.unwrap_or_else(|| stream_seed(config.rng_seed, &init.name));
            generators.push(Generator::from_config(
                i,
                &init.name,
                &init.traffic,
                config.word_bytes,
                config.target.clock_mhz,
                seed,
                trace.as_deref(),
            ));
        }
        let index = |name: &String| config.initiator_index(name).expect("validated name");
        let edge = match config.scheme {
            Scheme::FixedPriority => EdgeArbitration::FixedPriority(config.priority_order.iter().map(index).collect()),
            Scheme::RoundRobin => EdgeArbitration::RoundRobin(RoundRobin::new()),
            Scheme::FixedWeight => EdgeArbitration::FixedWeight(FixedWeight::new(
                config.initiators.iter().map(|i| config.weights.get(&i.name).copied().unwrap_or(1)).collect(),
            )),
            Scheme::Tdma => EdgeArbitration::Tdma {
                wheel: TdmaWheel::new(config.tdma_wheel.iter().map(index).collect()).expect("validated wheel"),
                active: vec![None; threads.len()],
            },
            Scheme::Qos => EdgeArbitration::Qos(EdgeState::new(&threads)),
        };
        let levels = threads.iter().map(|t| t.level).collect();
        let end = config.warmup_cycles + config.sim_cycles;
        Ok(Self {
            fabric: Fabric::from_config(&config),
            target: TargetModel::new(&config.target),
            sideband: Sideband::new(config.sideband_delay, levels),
            ledger: MetricsLedger::new(threads.len(), config.warmup_cycles, end),
            enabled: config.initiators.iter().map(|i| i.enabled).collect(),
            threads,
            cycle: 0,
            end,
            generators,
            edge,
            responses: BinaryHeap::new(),
            response_order: 0,
            generated: 0,
            serviced: 0,
            emitted: None,
            grant_log: None,
            transfer_log: None,
            scratch: Vec::new(),
            config,
        })
    }

    /// Keeps every generated request as a trace record.
    pub fn record_emissions(mut self) -> Self {
        self.emitted = Some(Vec::new());
        self
    }

    /// Keeps every grant at the target and every fabric transfer.
    pub fn record_grants(mut self) -> Self {
        self.grant_log = Some(Vec::new());
        self.transfer_log = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn cycle(&self) -> Cycle {
        self.cycle
    }

    pub fn is_finished(&self) -> bool {
        self.cycle >= self.end
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn ledger(&self) -> &MetricsLedger {
        &self.ledger
    }

    pub fn edge_state(&self) -> Option<&EdgeState> {
        match &self.edge {
            EdgeArbitration::Qos(e) => Some(e),
            _ => None,
        }
    }

    pub fn emitted(&self) -> Option<&[TraceRecord]> {
        self.emitted.as_deref()
    }

    pub fn grants(&self) -> Option<&[Grant]> {
        self.grant_log.as_deref()
    }

    pub fn transfers(&self) -> Option<&[(Cycle, Transfer)]> {
        self.transfer_log.as_deref()
    }

    pub fn requests_generated(&self) -> u64 {
        self.generated
    }

    pub fn requests_serviced(&self) -> u64 {
        self.serviced
    }

    /// Requests generated but not yet completed.
    pub fn requests_in_flight(&self) -> u64 {
        let active = match &self.edge {
            EdgeArbitration::Tdma { active, .. } => active.iter().flatten().count(),
            _ => 0,
        };
        (self.fabric.in_flight() + active + self.responses.len()) as u64
    }

    pub fn step(&mut self) {
        let cycle = self.cycle;
        self.deliver(cycle);
        self.generate(cycle);
        if let EdgeArbitration::Qos(e) = &mut self.edge {
            e.tick();
        }
        self.grant(cycle);
        self.sideband.publish(self.levels());
        let levels = self.sideband.observed().to_vec();
        let transfers = self.fabric.step(cycle, &levels);
        if let Some(log) = &mut self.transfer_log {
            log.extend(transfers.into_iter().map(|t| (cycle, t)));
        }
        self.fabric.advance(&levels);
        if let EdgeArbitration::Qos(e) = &mut self.edge {
            e.advance(&self.fabric.edge_heads());
        }
        self.sample(cycle);
        self.cycle += 1;
    }

    fn levels(&self) -> Vec<QosLevel> {
        match &self.edge {
            EdgeArbitration::Qos(e) => e.effective_levels(),
            _ => self.threads.iter().map(|t| t.level).collect(),
        }
    }

    fn deliver(&mut self, cycle: Cycle) {
        while self.responses.peek().is_some_and(|Reverse(p)| p.due <= cycle) {
            let Reverse(p) = self.responses.pop().expect("peeked");
            self.serviced += 1;
            let timing = (p.kind == Kind::Read)
                .then(|| (p.due - p.issue_cycle + 1, p.due - p.grant_cycle + 1, p.grant_cycle - p.edge_arrival));
            self.ledger.record_completion(p.initiator, p.due, timing);
            if self.generators[p.initiator].on_complete(p.kind, p.due) {
                self.ledger.record_miss(p.initiator, p.due);
            }
        }
    }

    fn generate(&mut self, cycle: Cycle) {
        let word_bytes = u64::from(self.config.word_bytes);
        for (i, generator) in self.generators.iter_mut().enumerate() {
            if !self.enabled[i] {
                continue;
            }
            self.scratch.clear();
            generator.step(cycle, self.fabric.source_backlog(i), &mut self.scratch);
            for req in self.scratch.drain(..) {
                self.generated += 1;
                self.ledger.record_generated(i, cycle, u64::from(req.burst_words) * word_bytes);
                if let Some(trace) = &mut self.emitted {
                    trace.push(TraceRecord {
                        cycle,
                        initiator: self.config.initiators[i].name.clone(),
                        kind: req.kind,
                        words: req.burst_words,
                    });
                }
                self.fabric.inject(req);
            }
        }
        self.fabric.admit();
    }

    fn grant(&mut self, cycle: Cycle) {
        if matches!(self.edge, EdgeArbitration::Tdma { .. }) {
            self.grant_beat_slot(cycle);
            return;
        }
        if !self.target.is_idle(cycle) {
            return;
        }
        let heads = self.fabric.edge_heads();
        let views: Vec<BranchView> = heads
            .iter()
            .map(|h| match h {
                Some(marked) => BranchView::pending(*marked),
                None => BranchView::IDLE,
            })
            .collect();
        let winner = match &mut self.edge {
            EdgeArbitration::FixedPriority(order) => {
                fixed_priority_pick(&views, order).expect("validated priority order")
            }
            EdgeArbitration::RoundRobin(rr) => rr.pick(&views),
            EdgeArbitration::FixedWeight(fw) => fw.pick(&views),
            EdgeArbitration::Qos(e) => e.pick(&heads),
            EdgeArbitration::Tdma { .. } => unreachable!("handled above"),
        };
        let Some(thread) = winner else { return };
        let req = self.fabric.pop_edge(thread).expect("winner has a head request");
        let schedule = self.target.service(req.kind, req.burst_words, self.config.word_bytes, cycle);
        if let EdgeArbitration::Qos(e) = &mut self.edge {
            e.debit(thread, schedule.occupancy);
        }
        self.ledger.record_grant(req.initiator, cycle);
        if let Some(log) = &mut self.grant_log {
            log.push(Grant { cycle, thread, seq_no: req.seq_no, beats: schedule.occupancy });
        }
        let total = u64::from(req.burst_words) * u64::from(self.config.word_bytes);
        let beat_bytes = u64::from(self.target.beat_bytes());
        for beat in 0..u64::from(schedule.occupancy) {
            let bytes = (total - (beat * beat_bytes).min(total)).min(beat_bytes);
            self.ledger.record_beat(req.initiator, cycle + beat, bytes);
        }
        self.schedule_response(req, cycle, schedule.completion_cycle);
    }

    /// TDMA: the slot owner moves one beat of its current burst, starting
    /// its next queued burst if none is in progress.
    fn grant_beat_slot(&mut self, cycle: Cycle) {
        let EdgeArbitration::Tdma { wheel, active } = &mut self.edge else { return };
        let heads = self.fabric.edge_heads();
        let views: Vec<BranchView> = (0..active.len())
            .map(|t| {
                if active[t].is_some() || heads[t].is_some() {
                    BranchView::pending(false)
                } else {
                    BranchView::IDLE
                }
            })
            .collect();
        let Some(thread) = wheel.pick(&views) else { return };
        if active[thread].is_none() {
            let req = self.fabric.pop_edge(thread).expect("pending slot owner");
            let beats = occupancy(req.burst_words, self.config.word_bytes, self.target.beat_bytes());
            self.ledger.record_grant(req.initiator, cycle);
            if let Some(log) = &mut self.grant_log {
                log.push(Grant { cycle, thread, seq_no: req.seq_no, beats });
            }
            active[thread] = Some(Active { req, grant_cycle: cycle, beats_total: beats, beats_done: 0 });
        }
        let a = active[thread].as_mut().expect("active burst");
        let total = u64::from(a.req.burst_words) * u64::from(self.config.word_bytes);
        let beat_bytes = u64::from(self.target.beat_bytes());
        let sent = u64::from(a.beats_done) * beat_bytes;
        self.ledger.record_beat(a.req.initiator, cycle, (total - sent.min(total)).min(beat_bytes));
        a.beats_done += 1;
        if a.beats_done == a.beats_total {
            let done = active[thread].take().expect("active burst");
            let completion = self.target.completion_of_beat(done.req.kind, cycle);
            self.schedule_response(done.req, done.grant_cycle, completion);
        }
    }

    fn schedule_response(&mut self, req: Request, grant_cycle: Cycle, due: Cycle) {
        self.response_order += 1;
        self.responses.push(Reverse(Pending {
            due,
            order: self.response_order,
            initiator: req.initiator,
            kind: req.kind,
            issue_cycle: req.issue_cycle,
            grant_cycle,
            edge_arrival: req.edge_arrival.unwrap_or(grant_cycle),
        }));
    }

    fn sample(&mut self, cycle: Cycle) {
        if let EdgeArbitration::Qos(e) = &self.edge {
            for t in 0..e.thread_count() {
                if let Some(c) = e.counter(t) {
                    self.ledger.sample_credit(t, cycle, c.count().to_f64());
                }
            }
        }
    }

    /// Runs to the end of the measurement window and finalizes the report.
    pub fn run(mut self) -> MetricsReport {
        while !self.is_finished() {
            self.step();
        }
        self.report()
    }

    /// Report over the activity recorded so far.
    pub fn report(&self) -> MetricsReport {
        let cfg = &self.config;
        let (start, end) = self.ledger.window();
        let measured = self.cycle.min(end).saturating_sub(start);
        let clock_hz = cfg.target.clock_mhz * 1e6;
        let seconds = measured as f64 / clock_hz;
        let per_sec = |bytes: u64| if measured == 0 { 0.0 } else { bytes as f64 * clock_hz / measured as f64 / 1e6 };
        let window_end = start + measured;

        let mut initiators = Vec::new();
        let mut windows = Vec::new();
        let mut cpus = Vec::new();
        for (i, init) in cfg.initiators.iter().enumerate() {
            let beats = self.ledger.beats(i);
            let delivered: u64 = beats.iter().map(|(_, b)| b).sum();
            let jitter_rate_mbps = match &init.traffic {
                TrafficConfig::Stream { rate_mbps, .. } => Some(*rate_mbps),
                _ if init.qos.allocation_mbps > 0.0 => Some(init.qos.allocation_mbps),
                _ => None,
            }
            .filter(|_| init.enabled);
            let jitter_bytes = jitter_rate_mbps.map_or(0.0, |r| {
                service_deficit_jitter(beats, r / cfg.target.clock_mhz, start, window_end)
            });
            initiators.push(InitiatorReport {
                name: init.name.clone(),
                enabled: init.enabled,
                requests_generated: self.ledger.generated(i),
                requests_completed: self.ledger.completed(i),
                offered_bytes: self.ledger.offered_bytes(i),
                delivered_bytes: delivered,
                offered_mbps: per_sec(self.ledger.offered_bytes(i)),
                delivered_mbps: per_sec(delivered),
                read_latency: LatencyStats::from_samples(self.ledger.read_latencies(i)),
                target_latency: LatencyStats::from_samples(self.ledger.target_latencies(i)),
                edge_delay: LatencyStats::from_samples(self.ledger.edge_delays(i)),
                jitter_rate_mbps,
                jitter_bytes,
            });
            if measured > 0 {
                for w in window_bandwidth(beats, start, window_end, cfg.window_cycles) {
                    let mbps = w.bytes_per_sec(clock_hz) / 1e6;
                    windows.push(WindowRow { initiator: init.name.clone(), window: w, mbps });
                }
            }
            if let Generator::Cpu(cpu) = &self.generators[i] {
                let ipm = cpu.params().instr_per_miss();
                let est = mips(self.ledger.misses(i), ipm, seconds);
                cpus.push(CpuReport {
                    name: init.name.clone(),
                    misses_serviced: self.ledger.misses(i),
                    instr_per_miss: ipm,
                    mips: est.mips,
                    diagnostic: est.diagnostic,
                    mean_think_cycles: cpu.mean_think(),
                });
            }
        }

        let threads = self
            .threads
            .iter()
            .map(|t| {
                let (demoted_fraction, credit_min, credit_mean, credit_max) =
                    self.ledger.credit_summary(t.thread_id).unwrap_or((0.0, 0.0, 0.0, 0.0));
                ThreadReport {
                    name: cfg.initiators[t.thread_id].name.clone(),
                    level: t.level,
                    allocation_mbps: cfg.initiators[t.thread_id].qos.allocation_mbps,
                    demoted_fraction,
                    credit_min,
                    credit_mean,
                    credit_max,
                }
            })
            .collect();

        MetricsReport {
            scenario: cfg.name.clone(),
            scheme: cfg.scheme.to_string(),
            seed: cfg.rng_seed,
            warmup_cycles: cfg.warmup_cycles,
            measure_cycles: measured,
            clock_mhz: cfg.target.clock_mhz,
            peak_mbps: cfg.target.peak_bytes_per_sec() / 1e6,
            initiators,
            threads,
            cpus,
            windows,
            requests_generated: self.generated,
            requests_serviced: self.serviced,
            requests_in_flight: self.requests_in_flight(),
        }
    }
}

/// Validates, runs warmup plus measurement, and returns the report.
pub fn run_scenario(config: &ScenarioConfig) -> Result<MetricsReport, SimError> {
    Ok(Simulation::new(config.clone())?.run())
}
