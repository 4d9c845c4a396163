// SPDX-License-Identifier: Apache-2.0

//! A 25% credit counter: it earns one beat every four cycles, is demoted when
//! a 4-beat burst overdraws it, and is promoted again once the debt is repaid.
//!
//!     cargo run --example credit_counter

use noc_qos::qos_edge::{effective_level, CreditCounter, Credits};
use noc_qos::QosLevel;

fn main() {
    let mut c = CreditCounter::new(Credits::from_f64(0.25), Credits::from_beats(8), Credits::from_beats(-8));
    for cycle in 0..36 {
        c.tick();
        // Two bursts in quick succession overdraw the thread.
        if cycle == 3 || cycle == 5 {
            c.debit(4);
        }
        println!(
            "cycle {cycle:>2}: count {:>6.2} beats, level {}",
            c.count().to_f64(),
            effective_level(QosLevel::Bandwidth, Some(&c))
        );
    }
}
