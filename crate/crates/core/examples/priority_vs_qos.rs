// SPDX-License-Identifier: Apache-2.0

//! Side by side: the high-miss CPU under fixed priority, TDMA and the
//! credit-based scheme. Priority starves the video stream, TDMA starves the
//! CPU, the credit scheme protects both streams while keeping the CPU fast.
//!
//!     cargo run --release --example priority_vs_qos

use noc_qos::{preset, run_scenario};

fn main() {
    println!("{:<14} {:>8} {:>8} {:>8} {:>8} {:>12}", "scenario", "MIPS", "MPEG", "VID", "GEN", "CPU lat.p95");
    for name in ["priority-high", "tdma-high", "qos-high"] {
        let r = run_scenario(&preset(name).expect("known preset")).expect("valid preset");
        println!(
            "{name:<14} {:>8.1} {:>8.1} {:>8.1} {:>8.1} {:>12}",
            r.cpu_mips(),
            r.delivered_mbps("MPEG"),
            r.delivered_mbps("VID"),
            r.delivered_mbps("GEN"),
            r.initiator("CPU").map_or(0, |c| c.read_latency.p95)
        );
    }
}
