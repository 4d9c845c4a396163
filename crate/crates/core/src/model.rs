// SPDX-License-Identifier: Apache-2.0

//! Shared vocabulary: clock, requests, QoS levels and the scenario
//! configuration that every other module consumes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// One interconnect clock tick.
pub type Cycle = u64;

/// Tolerance used when summing floating point allocations.
const ALLOCATION_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Read,
    Write,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Read => f.write_str("read"),
            Kind::Write => f.write_str("write"),
        }
    }
}

/// A whole-burst transaction travelling through the request network.
///
/// Each initiator owns one thread end-to-end, so `thread` equals
/// `initiator` in every topology built by this crate; the fields are kept
/// apart because arbitration points reason about threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub initiator: usize,
    pub thread: usize,
    pub kind: Kind,
    pub burst_words: u32,
    pub epoch_marker: bool,
    pub seq_no: u64,
    pub issue_cycle: Cycle,
    /// Cycle the request entered the per-thread queue in front of the target.
    pub edge_arrival: Option<Cycle>,
    /// Number of arbitration nodes traversed so far.
    pub hops: u32,
}

impl Request {
    pub fn new(initiator: usize, kind: Kind, burst_words: u32, issue_cycle: Cycle) -> Self {
        Self {
            initiator,
            thread: initiator,
            kind,
            burst_words,
            epoch_marker: false,
            seq_no: 0,
            issue_cycle,
            edge_arrival: None,
            hops: 0,
        }
    }
}

/// Quality-of-service level of a thread. Variants are declared lowest first
/// so the derived `Ord` gives `Priority > Bandwidth > BestEffort`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QosLevel {
    BestEffort,
    Bandwidth,
    Priority,
}

impl QosLevel {
    pub const ALL: [QosLevel; 3] = [QosLevel::BestEffort, QosLevel::Bandwidth, QosLevel::Priority];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for QosLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QosLevel::Priority => f.write_str("priority"),
            QosLevel::Bandwidth => f.write_str("bandwidth"),
            QosLevel::BestEffort => f.write_str("best_effort"),
        }
    }
}

/// Per-thread QoS parameters in the units arbitration works with.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreadConfig {
    pub thread_id: usize,
    pub level: QosLevel,
    /// Fraction of peak target bandwidth, which is also beats per cycle.
    pub allocation_fraction: f64,
    pub epoch_size: u64,
    /// Saturation limits in beats.
    pub pos_limit: f64,
    pub neg_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    FixedPriority,
    RoundRobin,
    Tdma,
    FixedWeight,
    Qos,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::FixedPriority => "fixed_priority",
            Scheme::RoundRobin => "round_robin",
            Scheme::Tdma => "tdma",
            Scheme::FixedWeight => "fixed_weight",
            Scheme::Qos => "qos",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub beat_bytes: u32,
    pub latency_cycles: u32,
    pub clock_mhz: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self { beat_bytes: 8, latency_cycles: 1, clock_mhz: 200.0 }
    }
}

impl TargetConfig {
    pub fn peak_bytes_per_sec(&self) -> f64 {
        f64::from(self.beat_bytes) * self.clock_mhz * 1e6
    }
}

/// How a closed-loop CPU treats the write half of its traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WriteMode {
    /// A writeback is posted right behind a read miss; only reads stall.
    Posted,
    /// Every burst (read or write) stalls the core until it completes.
    Blocking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrival {
    /// Geometric inter-burst gaps.
    Bursty,
    /// Fixed period, fractional periods carried forward.
    Regular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrafficConfig {
    Cpu {
        core_mhz: f64,
        cpi: f64,
        loadstore_fraction: f64,
        miss_rate: f64,
        burst_words: u32,
        /// Probability that a miss carries a write (posted) or that a burst is a write (blocking).
        write_fraction: f64,
        mean_think_cycles: f64,
        write_mode: WriteMode,
    },
    Stream {
        rate_mbps: f64,
        min_words: u32,
        max_words: u32,
        read_fraction: f64,
        arrival: Arrival,
    },
    /// Keeps its source queue non-empty at all times.
    Greedy { burst_words: u32, read_fraction: f64 },
    /// Replays `cycle,initiator,kind,words` records from a CSV file.
    Trace { path: String },
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreadQos {
    pub level: QosLevel,
    #[serde(default)]
    pub allocation_mbps: f64,
    pub epoch_size: u64,
    /// Beats. Defaults to twice the initiator's largest burst.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_limit: Option<f64>,
    /// Beats. Defaults to the negated positive limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg_limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitiatorConfig {
    pub name: String,
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Overrides the seed derived from the scenario seed and the name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub traffic: TrafficConfig,
    pub qos: ThreadQos,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub name: String,
    /// Initiator or node names feeding this arbitration point.
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub scheme: Scheme,
    #[serde(default = "default_word_bytes")]
    pub word_bytes: u32,
    pub sim_cycles: u64,
    #[serde(default = "default_warmup")]
    pub warmup_cycles: u64,
    pub rng_seed: u64,
    #[serde(default = "default_queue_depth")]
    pub queue_depth: usize,
    #[serde(default)]
    pub sideband_delay: u32,
    #[serde(default = "default_window")]
    pub window_cycles: u64,
    #[serde(default)]
    pub target: TargetConfig,
    /// Highest priority first; used by the fixed-priority scheme.
    #[serde(default)]
    pub priority_order: Vec<String>,
    /// Slot owners of the TDMA wheel, one entry per cycle.
    #[serde(default)]
    pub tdma_wheel: Vec<String>,
    /// Grants per turn for the fixed-weight scheme.
    #[serde(default)]
    pub weights: BTreeMap<String, u32>,
    pub nodes: Vec<NodeConfig>,
    pub initiators: Vec<InitiatorConfig>,
}

fn default_word_bytes() -> u32 {
    4
}
fn default_warmup() -> u64 {
    10_000
}
fn default_queue_depth() -> usize {
    4
}
fn default_window() -> u64 {
    10_000
}

/// One broken rule in a scenario configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    AllocationSum(f64),
    EpochSize(String),
    BestEffortAllocation(String),
    NegativeAllocation(String),
    Limits(String),
    EmptyWheel,
    UnknownName { field: &'static str, name: String },
    PriorityOrderIncomplete(String),
    MissingWeight(String),
    DuplicateName(String),
    Topology(String),
    Traffic { initiator: String, reason: String },
    Parameter(&'static str),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AllocationSum(s) => write!(f, "allocation sum > 1 ({s:.4} of peak bandwidth)"),
            Violation::EpochSize(n) => write!(f, "epoch size must be ≥ 1 (initiator {n})"),
            Violation::BestEffortAllocation(n) => {
                write!(f, "best-effort thread {n} must have zero allocation")
            }
            Violation::NegativeAllocation(n) => write!(f, "allocation of {n} must be non-negative"),
            Violation::Limits(n) => {
                write!(f, "credit limits of {n} must satisfy neg_limit ≤ 0 ≤ pos_limit")
            }
            Violation::EmptyWheel => f.write_str("tdma wheel must have at least one slot"),
            Violation::UnknownName { field, name } => write!(f, "unknown name {name:?} in {field}"),
            Violation::PriorityOrderIncomplete(n) => {
                write!(f, "priority order does not mention initiator {n}")
            }
            Violation::MissingWeight(n) => write!(f, "initiator {n} needs a weight ≥ 1"),
            Violation::DuplicateName(n) => write!(f, "duplicate name {n:?}"),
            Violation::Topology(msg) => write!(f, "topology: {msg}"),
            Violation::Traffic { initiator, reason } => write!(f, "traffic of {initiator}: {reason}"),
            Violation::Parameter(msg) => f.write_str(msg),
        }
    }
}

impl ScenarioConfig {
    pub fn initiator_index(&self, name: &str) -> Option<usize> {
        self.initiators.iter().position(|i| i.name == name)
    }

    pub fn peak_bytes_per_cycle(&self) -> f64 {
        f64::from(self.target.beat_bytes)
    }

    /// Largest burst of an initiator, in target beats.
    pub fn max_burst_beats(&self, initiator: &InitiatorConfig) -> u32 {
        let words = match &initiator.traffic {
            TrafficConfig::Cpu { burst_words, .. } => *burst_words,
            TrafficConfig::Stream { max_words, .. } => *max_words,
            TrafficConfig::Greedy { burst_words, .. } => *burst_words,
            TrafficConfig::Trace { .. } | TrafficConfig::Idle => 8,
        };
        crate::target::occupancy(words, self.word_bytes, self.target.beat_bytes)
    }

    /// Resolves the per-thread QoS parameters, applying default limits.
    pub fn thread_configs(&self) -> Vec<ThreadConfig> {
        let peak = self.target.peak_bytes_per_sec();
        self.initiators
            .iter()
            .enumerate()
            .map(|(id, init)| {
                let default_pos = 2.0 * f64::from(self.max_burst_beats(init));
                let pos_limit = init.qos.pos_limit.unwrap_or(default_pos);
                let neg_limit = init.qos.neg_limit.unwrap_or(-pos_limit);
                ThreadConfig {
                    thread_id: id,
                    level: init.qos.level,
                    allocation_fraction: init.qos.allocation_mbps * 1e6 / peak,
                    epoch_size: init.qos.epoch_size,
                    pos_limit,
                    neg_limit,
                }
            })
            .collect()
    }

    /// Every violated invariant; an empty list means the scenario may run.
    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }
}

/// Checks a scenario. Violations are the return value, never a panic.
pub fn validate(config: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();

    if config.word_bytes == 0 {
        out.push(Violation::Parameter("word_bytes must be ≥ 1"));
    }
    if config.target.beat_bytes == 0 {
        out.push(Violation::Parameter("target beat_bytes must be ≥ 1"));
    }
    if config.target.clock_mhz.is_nan() || config.target.clock_mhz <= 0.0 {
        out.push(Violation::Parameter("target clock_mhz must be > 0"));
    }
    if config.queue_depth == 0 {
        out.push(Violation::Parameter("queue_depth must be ≥ 1"));
    }
    if config.window_cycles == 0 {
        out.push(Violation::Parameter("window_cycles must be ≥ 1"));
    }
    if config.initiators.is_empty() {
        out.push(Violation::Parameter("at least one initiator is required"));
    }

    let mut names = HashSet::new();
    for name in config.initiators.iter().map(|i| &i.name).chain(config.nodes.iter().map(|n| &n.name)) {
        if !names.insert(name.as_str()) {
            out.push(Violation::DuplicateName(name.clone()));
        }
    }

    let mut allocated = 0.0;
    if config.target.beat_bytes > 0 && config.target.clock_mhz > 0.0 {
        for thread in config.thread_configs() {
            let name = &config.initiators[thread.thread_id].name;
            if thread.epoch_size == 0 {
                out.push(Violation::EpochSize(name.clone()));
            }
            if thread.allocation_fraction < 0.0 || thread.allocation_fraction.is_nan() {
                out.push(Violation::NegativeAllocation(name.clone()));
            }
            match thread.level {
                QosLevel::BestEffort if thread.allocation_fraction != 0.0 => {
                    out.push(Violation::BestEffortAllocation(name.clone()));
                }
                QosLevel::BestEffort => {}
                _ => allocated += thread.allocation_fraction.max(0.0),
            }
            if !(thread.neg_limit <= 0.0 && thread.pos_limit >= 0.0) {
                out.push(Violation::Limits(name.clone()));
            }
        }
    }
    if allocated > 1.0 + ALLOCATION_EPSILON {
        out.push(Violation::AllocationSum(allocated));
    }

    for init in &config.initiators {
        if let Err(reason) = check_traffic(config, init) {
            out.push(Violation::Traffic { initiator: init.name.clone(), reason });
        }
    }

    match config.scheme {
        Scheme::Tdma => {
            if config.tdma_wheel.is_empty() {
                out.push(Violation::EmptyWheel);
            }
            for name in &config.tdma_wheel {
                if config.initiator_index(name).is_none() {
                    out.push(Violation::UnknownName { field: "tdma_wheel", name: name.clone() });
                }
            }
        }
        Scheme::FixedPriority => {
            for name in &config.priority_order {
                if config.initiator_index(name).is_none() {
                    out.push(Violation::UnknownName { field: "priority_order", name: name.clone() });
                }
            }
            for init in &config.initiators {
                if !config.priority_order.contains(&init.name) {
                    out.push(Violation::PriorityOrderIncomplete(init.name.clone()));
                }
            }
        }
        Scheme::FixedWeight => {
            for name in config.weights.keys() {
                if config.initiator_index(name).is_none() {
                    out.push(Violation::UnknownName { field: "weights", name: name.clone() });
                }
            }
            for init in &config.initiators {
                if config.weights.get(&init.name).copied().unwrap_or(0) == 0 {
                    out.push(Violation::MissingWeight(init.name.clone()));
                }
            }
        }
        Scheme::RoundRobin | Scheme::Qos => {}
    }

    out.extend(check_topology(config));
    out
}

fn check_traffic(config: &ScenarioConfig, init: &InitiatorConfig) -> Result<(), String> {
    let unit = |p: f64| (0.0..=1.0).contains(&p);
    match &init.traffic {
        TrafficConfig::Cpu {
            core_mhz,
            cpi,
            loadstore_fraction,
            miss_rate,
            burst_words,
            write_fraction,
            mean_think_cycles,
            ..
        } => {
            if *core_mhz <= 0.0 || *cpi <= 0.0 {
                return Err("core_mhz and cpi must be > 0".into());
            }
            if !(*loadstore_fraction > 0.0 && *loadstore_fraction <= 1.0) {
                return Err("loadstore_fraction must be in (0, 1]".into());
            }
            if !(*miss_rate > 0.0 && *miss_rate <= 1.0) {
                return Err("miss_rate must be in (0, 1]".into());
            }
            if *burst_words == 0 {
                return Err("burst_words must be ≥ 1".into());
            }
            if !unit(*write_fraction) {
                return Err("write_fraction must be in [0, 1]".into());
            }
            if mean_think_cycles.is_nan() || *mean_think_cycles < 0.0 {
                return Err("mean_think_cycles must be ≥ 0".into());
            }
        }
        TrafficConfig::Stream { rate_mbps, min_words, max_words, read_fraction, .. } => {
            if *min_words == 0 || min_words > max_words {
                return Err("need 1 ≤ min_words ≤ max_words".into());
            }
            if rate_mbps.is_nan() || *rate_mbps <= 0.0 {
                return Err("rate_mbps must be > 0".into());
            }
            if !unit(*read_fraction) {
                return Err("read_fraction must be in [0, 1]".into());
            }
            let mean_bytes = f64::from(min_words + max_words) / 2.0 * f64::from(config.word_bytes);
            let bytes_per_cycle = rate_mbps / config.target.clock_mhz;
            if config.word_bytes > 0 && mean_bytes / bytes_per_cycle < 1.0 {
                return Err("rate needs more than one burst per cycle".into());
            }
        }
        TrafficConfig::Greedy { burst_words, read_fraction } => {
            if *burst_words == 0 {
                return Err("burst_words must be ≥ 1".into());
            }
            if !unit(*read_fraction) {
                return Err("read_fraction must be in [0, 1]".into());
            }
        }
        TrafficConfig::Trace { path } => {
            if path.is_empty() {
                return Err("trace path is empty".into());
            }
        }
        TrafficConfig::Idle => {}
    }
    Ok(())
}

fn check_topology(config: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    if config.nodes.is_empty() {
        out.push(Violation::Topology("at least one arbitration node is required".into()));
        return out;
    }
    let node_idx: HashMap<&str, usize> =
        config.nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
    let mut fed_by = HashMap::<&str, usize>::new();
    for node in &config.nodes {
        for input in &node.inputs {
            if config.initiator_index(input).is_none() && !node_idx.contains_key(input.as_str()) {
                out.push(Violation::UnknownName { field: "nodes.inputs", name: input.clone() });
            }
            *fed_by.entry(input.as_str()).or_default() += 1;
        }
    }
    for init in &config.initiators {
        match fed_by.get(init.name.as_str()).copied().unwrap_or(0) {
            1 => {}
            0 => out.push(Violation::Topology(format!("initiator {} is not attached", init.name))),
            _ => out.push(Violation::Topology(format!("initiator {} has more than one path", init.name))),
        }
    }
    let roots: Vec<&str> =
        config.nodes.iter().map(|n| n.name.as_str()).filter(|n| !fed_by.contains_key(n)).collect();
    if roots.len() != 1 {
        out.push(Violation::Topology(format!("expected exactly one root node, found {}", roots.len())));
    }
    for (name, count) in &fed_by {
        if node_idx.contains_key(name) && *count > 1 {
            out.push(Violation::Topology(format!("node {name} feeds more than one parent")));
        }
    }
    // Cycle check: walk parents from every node.
    let parent: HashMap<&str, &str> = config
        .nodes
        .iter()
        .flat_map(|n| n.inputs.iter().map(move |i| (i.as_str(), n.name.as_str())))
        .collect();
    for node in &config.nodes {
        let mut cur = node.name.as_str();
        let mut steps = 0;
        while let Some(p) = parent.get(cur) {
            cur = p;
            steps += 1;
            if steps > config.nodes.len() {
                out.push(Violation::Topology(format!("node {} is part of a cycle", node.name)));
                break;
            }
        }
    }
    out
}
