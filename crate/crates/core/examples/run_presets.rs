// SPDX-License-Identifier: Apache-2.0

//! Runs every reference scenario and prints its summary.
//!
//!     cargo run --release --example run_presets [-- <seed>]

use noc_qos::{preset, run_scenario, PRESET_NAMES};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok());
    for name in PRESET_NAMES {
        let mut cfg = preset(name).expect("known preset");
        if let Some(seed) = seed {
            cfg.rng_seed = seed;
        }
        let report = run_scenario(&cfg).expect("presets are valid");
        println!("{}", report.summary_text());
    }
}
