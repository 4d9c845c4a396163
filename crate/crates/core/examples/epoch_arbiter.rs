// SPDX-License-Identifier: Apache-2.0

//! Epoch arbitration on its own: branches with epoch sizes 1, 2 and 5 that
//! always have a request waiting share grants 1:2:5. The same holds when two
//! of them first meet at an inner node.
//!
//!     cargo run --release --example epoch_arbiter

use noc_qos::arbiters::{BranchView, EpochArbiter};
use noc_qos::presets::{saturated, Topology};
use noc_qos::{Scheme, Simulation};

fn main() {
    let sizes = [1u64, 2, 5];
    let mut arb = EpochArbiter::new(sizes.len());
    let mut seq = [0u64; 3];
    print!("first 16 grants:");
    for _ in 0..16 {
        let views: Vec<BranchView> =
            (0..3).map(|b| BranchView::pending(seq[b] > 0 && seq[b].is_multiple_of(sizes[b]))).collect();
        let w = arb.pick(&views).expect("someone is always pending");
        seq[w] += 1;
        print!(" {w}");
    }
    println!(" (epoch {})", arb.current_epoch());

    for topology in [Topology::Flat, Topology::Tree] {
        let mut sim = Simulation::new(saturated(Scheme::Qos, &sizes, 1, topology)).expect("valid scenario");
        while !sim.is_finished() {
            sim.step();
        }
        let grants = sim.ledger().grants();
        let total: u64 = grants.iter().sum();
        let shares: Vec<String> = grants.iter().map(|&g| format!("{:.4}", g as f64 / total as f64)).collect();
        println!("{topology:?}: {total} grants, shares {}", shares.join(" : "));
    }
    println!("ideal: {:.4} : {:.4} : {:.4}", 1.0 / 8.0, 2.0 / 8.0, 5.0 / 8.0);
}
