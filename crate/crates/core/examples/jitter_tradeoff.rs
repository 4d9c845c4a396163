// SPDX-License-Identifier: Apache-2.0

//! Sweeps the CPU's positive credit limit in the qos-high scenario and shows
//! how bandwidth-thread jitter grows as the priority thread may bank more
//! credit. Jitter is averaged over several seeds.
//!
//!     cargo run --release --example jitter_tradeoff [-- <seeds>]

use noc_qos::{preset, run_scenario};

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let base = preset("qos-high").expect("known preset");
    let burst = f64::from(base.max_burst_beats(&base.initiators[0]));
    println!("{:>10} {:>12} {:>12} {:>10}", "pos_limit", "MPEG jitter", "VID jitter", "CPU MIPS");
    for multiple in [1.0, 2.0, 8.0, 32.0] {
        let runs: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = (1..=seeds)
                .map(|seed| {
                    let mut cfg = base.clone();
                    cfg.rng_seed = seed;
                    cfg.initiators[0].qos.pos_limit = Some(multiple * burst);
                    s.spawn(move || run_scenario(&cfg).expect("valid scenario"))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mean = |f: &dyn Fn(&noc_qos::MetricsReport) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
        println!(
            "{:>9}x {:>12.0} {:>12.1} {:>10.1}",
            multiple,
            mean(&|r| r.initiator("MPEG").unwrap().jitter_bytes),
            mean(&|r| r.initiator("VID").unwrap().jitter_bytes),
            mean(&|r| r.cpu_mips()),
        );
    }
}
