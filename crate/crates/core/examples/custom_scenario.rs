// SPDX-License-Identifier: Apache-2.0

//! Building a scenario from a TOML document, checking it, adjusting it with
//! `key=value` overrides and writing the CSV reports.
//!
//!     cargo run --release --example custom_scenario [-- <out-dir>]

use noc_qos::cli::{apply_overrides, parse_config};
use noc_qos::run_scenario;

const SCENARIO: &str = r#"
name = "two-streams"
scheme = "qos"
word_bytes = 8
sim_cycles = 200000
rng_seed = 7

[[nodes]]
name = "root"
inputs = ["CAM", "DMA"]

[[initiators]]
name = "CAM"
traffic = { kind = "stream", rate_mbps = 600.0, min_words = 8, max_words = 8, read_fraction = 0.5, arrival = "regular" }
qos = { level = "bandwidth", allocation_mbps = 640.0, epoch_size = 2 }

[[initiators]]
name = "DMA"
traffic = { kind = "greedy", burst_words = 8, read_fraction = 0.5 }
qos = { level = "best_effort", epoch_size = 1 }
"#;

fn main() {
    let mut cfg = parse_config(SCENARIO).expect("well-formed scenario");
    let problems = cfg.validate();
    assert!(problems.is_empty(), "{problems:?}");

    // Over-allocating is caught before running.
    let mut broken = cfg.clone();
    broken.initiators[0].qos.allocation_mbps = 1800.0;
    for v in broken.validate() {
        println!("rejected: {v}");
    }

    apply_overrides(&mut cfg, &["initiators.CAM.qos.epoch_size=4".into(), "sideband_delay=1".into()])
        .expect("known keys");
    let report = run_scenario(&cfg).expect("valid scenario");
    print!("{}", report.summary_text());
    if let Some(dir) = std::env::args().nth(1) {
        report.write_dir(dir.as_ref()).expect("writable output directory");
        println!("wrote {dir}/summary.csv and {dir}/windows.csv");
    }
}
