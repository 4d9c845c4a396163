// SPDX-License-Identifier: Apache-2.0

//! The four baseline arbiters on three initiators that always have a
//! 4-word request waiting.
//!
//!     cargo run --release --example baselines

use noc_qos::presets::{saturated, Topology};
use noc_qos::{run_scenario, Scheme};

fn main() {
    for scheme in [Scheme::FixedPriority, Scheme::RoundRobin, Scheme::Tdma, Scheme::FixedWeight] {
        let mut cfg = saturated(scheme, &[1, 1, 1], 4, Topology::Flat);
        cfg.tdma_wheel = ["I0", "I1", "I0", "I2"].map(String::from).to_vec();
        cfg.weights = [("I0", 3), ("I1", 1), ("I2", 2)].iter().map(|(n, w)| (n.to_string(), *w)).collect();
        let report = run_scenario(&cfg).expect("valid scenario");
        let shares: Vec<String> =
            ["I0", "I1", "I2"].iter().map(|n| format!("{n} {:>6.1}", report.delivered_mbps(n))).collect();
        println!("{:<15} {}  MB/s", scheme.to_string(), shares.join("  "));
    }
}
