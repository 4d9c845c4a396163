// SPDX-License-Identifier: Apache-2.0

//! The six reference scenarios: {priority, tdma, qos} × {low, high} CPU miss
//! rate, all on the same four-initiator, two-node topology.

use std::collections::BTreeMap;

use crate::model::{
    Arrival, InitiatorConfig, NodeConfig, QosLevel, ScenarioConfig, Scheme, TargetConfig, ThreadQos, TrafficConfig,
};
use crate::traffic::CpuParams;

pub const PRESET_NAMES: [&str; 6] = ["priority-low", "priority-high", "tdma-low", "tdma-high", "qos-low", "qos-high"];

/// Bytes per word in the reference scenarios: bursts of 8 words fill four
/// target beats, so the stream rates line up with the wheel shares.
pub const PRESET_WORD_BYTES: u32 = 8;

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let (scheme, high) = match name {
        "priority-low" => (Scheme::FixedPriority, false),
        "priority-high" => (Scheme::FixedPriority, true),
        "tdma-low" => (Scheme::Tdma, false),
        "tdma-high" => (Scheme::Tdma, true),
        "qos-low" => (Scheme::Qos, false),
        "qos-high" => (Scheme::Qos, true),
        _ => return None,
    };
    Some(build(name, scheme, if high { CpuParams::high_miss() } else { CpuParams::low_miss() }))
}

pub fn all_presets() -> Vec<ScenarioConfig> {
    PRESET_NAMES.iter().filter_map(|n| preset(n)).collect()
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn build(name: &str, scheme: Scheme, cpu: CpuParams) -> ScenarioConfig {
    let qos = |level, allocation_mbps, epoch_size| ThreadQos {
        level,
        allocation_mbps,
        epoch_size,
        pos_limit: None,
        neg_limit: None,
    };
    let initiators = vec![
        InitiatorConfig {
            name: "CPU".into(),
            enabled: true,
            seed: None,
            traffic: TrafficConfig::Cpu {
                core_mhz: cpu.core_mhz,
                cpi: cpu.cpi,
                loadstore_fraction: cpu.loadstore_fraction,
                miss_rate: cpu.miss_rate,
                burst_words: cpu.burst_words,
                write_fraction: cpu.write_fraction,
                mean_think_cycles: cpu.mean_think_cycles,
                write_mode: cpu.write_mode,
            },
            qos: qos(QosLevel::Priority, 560.0, 4),
        },
        InitiatorConfig {
            name: "MPEG".into(),
            enabled: true,
            seed: None,
            traffic: TrafficConfig::Stream {
                rate_mbps: 800.0,
                min_words: 1,
                max_words: 8,
                read_fraction: 2.0 / 3.0,
                arrival: Arrival::Bursty,
            },
            qos: qos(QosLevel::Bandwidth, 800.0, 8),
        },
        InitiatorConfig {
            name: "VID".into(),
            enabled: true,
            seed: None,
            traffic: TrafficConfig::Stream {
                rate_mbps: 200.0,
                min_words: 8,
                max_words: 8,
                read_fraction: 1.0,
                arrival: Arrival::Regular,
            },
            qos: qos(QosLevel::Bandwidth, 240.0, 2),
        },
        InitiatorConfig {
            name: "GEN".into(),
            enabled: true,
            seed: None,
            traffic: TrafficConfig::Stream {
                rate_mbps: 100.0,
                min_words: 1,
                max_words: 8,
                read_fraction: 0.5,
                arrival: Arrival::Bursty,
            },
            qos: qos(QosLevel::BestEffort, 0.0, 1),
        },
    ];
    ScenarioConfig {
        name: name.into(),
        scheme,
        word_bytes: PRESET_WORD_BYTES,
        sim_cycles: 1_000_000,
        warmup_cycles: 10_000,
        rng_seed: 1,
        queue_depth: 4,
        sideband_delay: 0,
        window_cycles: 10_000,
        target: TargetConfig::default(),
        priority_order: names(&["CPU", "MPEG", "VID", "GEN"]),
        tdma_wheel: names(&["MPEG", "CPU", "MPEG", "VID", "MPEG", "CPU", "MPEG", "GEN"]),
        weights: BTreeMap::new(),
        nodes: vec![
            NodeConfig { name: "node1".into(), inputs: names(&["VID", "GEN"]) },
            NodeConfig { name: "node2".into(), inputs: names(&["CPU", "MPEG", "node1"]) },
        ],
        initiators,
    }
}

/// How a synthetic scenario's initiators reach the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Every initiator feeds one node.
    Flat,
    /// The first two initiators meet at an inner node whose output joins
    /// the rest at the root.
    Tree,
}

/// Initiators `I0..` that always have a request waiting, all best effort
/// with the given epoch sizes. Priority order is by index, the TDMA wheel
/// gives each initiator one slot and every weight is 1.
pub fn saturated(scheme: Scheme, epochs: &[u64], burst_words: u32, topology: Topology) -> ScenarioConfig {
    let ids: Vec<String> = (0..epochs.len()).map(|i| format!("I{i}")).collect();
    let nodes = match topology {
        Topology::Tree if ids.len() >= 2 => {
            let mut root = vec!["inner".to_string()];
            root.extend(ids[2..].iter().cloned());
            vec![NodeConfig { name: "inner".into(), inputs: ids[..2].to_vec() }, NodeConfig { name: "root".into(), inputs: root }]
        }
        _ => vec![NodeConfig { name: "root".into(), inputs: ids.clone() }],
    };
    ScenarioConfig {
        name: "saturated".into(),
        scheme,
        word_bytes: PRESET_WORD_BYTES,
        sim_cycles: 100_000,
        warmup_cycles: 1_000,
        rng_seed: 1,
        queue_depth: 4,
        sideband_delay: 0,
        window_cycles: 10_000,
        target: TargetConfig::default(),
        priority_order: ids.clone(),
        tdma_wheel: ids.clone(),
        weights: ids.iter().map(|n| (n.clone(), 1)).collect(),
        nodes,
        initiators: ids
            .iter()
            .zip(epochs)
            .map(|(name, &epoch_size)| InitiatorConfig {
                name: name.clone(),
                enabled: true,
                seed: None,
                traffic: TrafficConfig::Greedy { burst_words, read_fraction: 1.0 },
                qos: ThreadQos { level: QosLevel::BestEffort, allocation_mbps: 0.0, epoch_size, pos_limit: None, neg_limit: None },
            })
            .collect(),
    }
}
