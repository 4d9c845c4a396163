// SPDX-License-Identifier: Apache-2.0

//! Measurement: delivered bandwidth, latency, service-deficit jitter and
//! CPU MIPS, plus the CSV and text renderings of a finished run.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::model::{Cycle, QosLevel};

/// Result of a MIPS computation. A CPU that never finished a miss reports
/// zero together with a diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct MipsEstimate {
    pub mips: f64,
    pub diagnostic: Option<String>,
}

pub fn mips(misses_serviced: u64, instr_per_miss: f64, elapsed_seconds: f64) -> MipsEstimate {
    if elapsed_seconds <= 0.0 {
        return MipsEstimate { mips: 0.0, diagnostic: Some("empty measurement window".into()) };
    }
    if misses_serviced == 0 {
        return MipsEstimate { mips: 0.0, diagnostic: Some("no misses serviced during measurement".into()) };
    }
    MipsEstimate { mips: misses_serviced as f64 * instr_per_miss / elapsed_seconds / 1e6, diagnostic: None }
}

/// Largest shortfall of service against a constant rate over any interval.
///
/// `events` are `(cycle, bytes)` deliveries sorted by cycle inside
/// `[start, end)`. With `S(t)` the bytes delivered in `[start, t)`, the
/// result is the maximum over `start ≤ t1 ≤ t2 ≤ end` of
/// `rate·(t2 − t1) − (S(t2) − S(t1))`. Single pass over the events.
pub fn service_deficit_jitter(events: &[(Cycle, u64)], rate: f64, start: Cycle, end: Cycle) -> f64 {
    if rate <= 0.0 || end <= start {
        return 0.0;
    }
    let mut served = 0.0;
    let mut min_d = 0.0f64;
    let mut best = 0.0f64;
    let mut i = 0;
    while i < events.len() {
        let c = events[i].0;
        let mut bytes = 0u64;
        while i < events.len() && events[i].0 == c {
            bytes += events[i].1;
            i += 1;
        }
        if c < start || c >= end {
            continue;
        }
        let before = rate * (c - start) as f64 - served;
        best = best.max(before - min_d);
        served += bytes as f64;
        let after = rate * (c + 1 - start) as f64 - served;
        min_d = min_d.min(after);
    }
    let at_end = rate * (end - start) as f64 - served;
    best.max(at_end - min_d)
}

/// Delivered bytes in one tumbling window.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub index: u64,
    pub start_cycle: Cycle,
    pub end_cycle: Cycle,
    pub bytes: u64,
}

impl Window {
    pub fn bytes_per_sec(&self, clock_hz: f64) -> f64 {
        let len = (self.end_cycle - self.start_cycle) as f64;
        if len == 0.0 {
            0.0
        } else {
            self.bytes as f64 * clock_hz / len
        }
    }
}

/// Splits `[start, end)` into windows of `window_cycles` (the last one may
/// be shorter) and sums the deliveries falling in each.
pub fn window_bandwidth(events: &[(Cycle, u64)], start: Cycle, end: Cycle, window_cycles: u64) -> Vec<Window> {
    assert!(window_cycles >= 1, "window must be at least one cycle");
    let mut windows = Vec::new();
    let mut s = start;
    while s < end {
        let e = (s + window_cycles).min(end);
        windows.push(Window { index: windows.len() as u64, start_cycle: s, end_cycle: e, bytes: 0 });
        s = e;
    }
    for &(c, b) in events {
        if c >= start && c < end {
            windows[((c - start) / window_cycles) as usize].bytes += b;
        }
    }
    windows
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatencyStats {
    pub count: usize,
    pub min: u64,
    pub mean: f64,
    pub p95: u64,
    pub max: u64,
}

impl LatencyStats {
    /// Nearest-rank statistics; all zero for an empty sample.
    pub fn from_samples(samples: &[u64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Self {
            count: n,
            min: sorted[0],
            mean: sorted.iter().sum::<u64>() as f64 / n as f64,
            p95: sorted[rank - 1],
            max: sorted[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitiatorReport {
    pub name: String,
    pub enabled: bool,
    pub requests_generated: u64,
    pub requests_completed: u64,
    pub offered_bytes: u64,
    pub delivered_bytes: u64,
    pub offered_mbps: f64,
    pub delivered_mbps: f64,
    /// Emission to last data beat, reads only.
    pub read_latency: LatencyStats,
    /// Grant to last data beat at the target, reads only.
    pub target_latency: LatencyStats,
    /// Edge arrival to grant, reads only.
    pub edge_delay: LatencyStats,
    /// Reference rate for the deficit measurement, if any.
    pub jitter_rate_mbps: Option<f64>,
    pub jitter_bytes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreadReport {
    pub name: String,
    pub level: QosLevel,
    pub allocation_mbps: f64,
    /// Share of measured cycles spent with a negative credit count.
    pub demoted_fraction: f64,
    pub credit_min: f64,
    pub credit_mean: f64,
    pub credit_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpuReport {
    pub name: String,
    pub misses_serviced: u64,
    pub instr_per_miss: f64,
    pub mips: f64,
    pub diagnostic: Option<String>,
    pub mean_think_cycles: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRow {
    pub initiator: String,
    pub window: Window,
    pub mbps: f64,
}

/// Finalized, immutable result of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scenario: String,
    pub scheme: String,
    pub seed: u64,
    pub warmup_cycles: u64,
    pub measure_cycles: u64,
    pub clock_mhz: f64,
    pub peak_mbps: f64,
    pub initiators: Vec<InitiatorReport>,
    pub threads: Vec<ThreadReport>,
    pub cpus: Vec<CpuReport>,
    pub windows: Vec<WindowRow>,
    pub requests_generated: u64,
    pub requests_serviced: u64,
    pub requests_in_flight: u64,
}

impl MetricsReport {
    pub fn initiator(&self, name: &str) -> Option<&InitiatorReport> {
        self.initiators.iter().find(|i| i.name == name)
    }

    pub fn thread(&self, name: &str) -> Option<&ThreadReport> {
        self.threads.iter().find(|t| t.name == name)
    }

    pub fn cpu(&self) -> Option<&CpuReport> {
        self.cpus.first()
    }

    pub fn cpu_mips(&self) -> f64 {
        self.cpu().map_or(0.0, |c| c.mips)
    }

    pub fn delivered_mbps(&self, name: &str) -> f64 {
        self.initiator(name).map_or(0.0, |i| i.delivered_mbps)
    }

    pub fn total_delivered_mbps(&self) -> f64 {
        self.initiators.iter().map(|i| i.delivered_mbps).sum()
    }

    /// `initiator,window,start_cycle,end_cycle,bytes,mb_per_s`
    pub fn windows_csv(&self) -> String {
        let mut s = String::from("initiator,window,start_cycle,end_cycle,bytes,mb_per_s\n");
        for row in &self.windows {
            let w = &row.window;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.3}",
                row.initiator, w.index, w.start_cycle, w.end_cycle, w.bytes, row.mbps
            );
        }
        s
    }

    /// One row per initiator with whole-run figures.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "initiator,requests,completed,offered_mb_per_s,delivered_mb_per_s,\
             read_lat_min,read_lat_mean,read_lat_p95,read_lat_max,edge_delay_p95,jitter_bytes,\
             level,allocation_mb_per_s,demoted_fraction,mips\n",
        );
        for init in &self.initiators {
            let thread = self.thread(&init.name);
            let mips = self.cpus.iter().find(|c| c.name == init.name).map(|c| format!("{:.3}", c.mips));
            let _ = writeln!(
                s,
                "{},{},{},{:.3},{:.3},{},{:.3},{},{},{},{:.1},{},{:.3},{:.6},{}",
                init.name,
                init.requests_generated,
                init.requests_completed,
                init.offered_mbps,
                init.delivered_mbps,
                init.read_latency.min,
                init.read_latency.mean,
                init.read_latency.p95,
                init.read_latency.max,
                init.edge_delay.p95,
                init.jitter_bytes,
                thread.map_or(String::new(), |t| t.level.to_string()),
                thread.map_or(0.0, |t| t.allocation_mbps),
                thread.map_or(0.0, |t| t.demoted_fraction),
                mips.unwrap_or_default(),
            );
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "scenario {} ({}), seed {}, {} measured cycles after {} warmup",
            self.scenario, self.scheme, self.seed, self.measure_cycles, self.warmup_cycles
        );
        for cpu in &self.cpus {
            let _ = write!(s, "{}: {:.1} MIPS ({} misses)", cpu.name, cpu.mips, cpu.misses_serviced);
            if let Some(d) = &cpu.diagnostic {
                let _ = write!(s, " [{d}]");
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>9} {:>8} {:>10} {:>11}",
            "init", "offered", "delivered", "lat.mean", "lat.p95", "jitter(B)", "demoted"
        );
        for init in &self.initiators {
            let demoted = self.thread(&init.name).map_or(0.0, |t| t.demoted_fraction);
            let _ = writeln!(
                s,
                "{:<8} {:>10.1} {:>10.1} {:>9.2} {:>8} {:>10.0} {:>10.2}%",
                init.name,
                init.offered_mbps,
                init.delivered_mbps,
                init.read_latency.mean,
                init.read_latency.p95,
                init.jitter_bytes,
                demoted * 100.0
            );
        }
        let _ = writeln!(s, "total delivered {:.1} of {:.1} MB/s", self.total_delivered_mbps(), self.peak_mbps);
        s
    }

    /// Writes `summary.txt`, `summary.csv` and `windows.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.txt"), self.summary_text())?;
        fs::write(dir.join("summary.csv"), self.summary_csv())?;
        fs::write(dir.join("windows.csv"), self.windows_csv())
    }
}

/// Per-thread accumulation of credit counter samples.
#[derive(Debug, Clone, Default)]
struct CreditSamples {
    cycles: u64,
    demoted: u64,
    sum: f64,
    min: f64,
    max: f64,
}

/// Accumulators owned by a run. Only activity inside the measurement
/// window `[start, end)` is counted.
#[derive(Debug, Clone)]
pub struct MetricsLedger {
    start: Cycle,
    end: Cycle,
    offered: Vec<u64>,
    generated: Vec<u64>,
    completed: Vec<u64>,
    beats: Vec<Vec<(Cycle, u64)>>,
    read_latency: Vec<Vec<u64>>,
    target_latency: Vec<Vec<u64>>,
    edge_delay: Vec<Vec<u64>>,
    grants: Vec<u64>,
    misses: Vec<u64>,
    credits: Vec<CreditSamples>,
}

impl MetricsLedger {
    pub fn new(initiators: usize, start: Cycle, end: Cycle) -> Self {
        Self {
            start,
            end,
            offered: vec![0; initiators],
            generated: vec![0; initiators],
            completed: vec![0; initiators],
            beats: vec![Vec::new(); initiators],
            read_latency: vec![Vec::new(); initiators],
            target_latency: vec![Vec::new(); initiators],
            edge_delay: vec![Vec::new(); initiators],
            grants: vec![0; initiators],
            misses: vec![0; initiators],
            credits: vec![CreditSamples { min: f64::INFINITY, max: f64::NEG_INFINITY, ..Default::default() }; initiators],
        }
    }

    pub fn in_window(&self, cycle: Cycle) -> bool {
        cycle >= self.start && cycle < self.end
    }

    pub fn window(&self) -> (Cycle, Cycle) {
        (self.start, self.end)
    }

    pub fn record_generated(&mut self, initiator: usize, cycle: Cycle, bytes: u64) {
        if self.in_window(cycle) {
            self.generated[initiator] += 1;
            self.offered[initiator] += bytes;
        }
    }

    pub fn record_grant(&mut self, initiator: usize, cycle: Cycle) {
        if self.in_window(cycle) {
            self.grants[initiator] += 1;
        }
    }

    pub fn record_beat(&mut self, initiator: usize, cycle: Cycle, bytes: u64) {
        if self.in_window(cycle) {
            self.beats[initiator].push((cycle, bytes));
        }
    }

    /// `edge_delay` and `target_latency` are only known for reads.
    pub fn record_completion(
        &mut self,
        initiator: usize,
        cycle: Cycle,
        read_timing: Option<(u64, u64, u64)>,
    ) {
        if !self.in_window(cycle) {
            return;
        }
        self.completed[initiator] += 1;
        if let Some((latency, at_target, edge)) = read_timing {
            self.read_latency[initiator].push(latency);
            self.target_latency[initiator].push(at_target);
            self.edge_delay[initiator].push(edge);
        }
    }

    pub fn record_miss(&mut self, initiator: usize, cycle: Cycle) {
        if self.in_window(cycle) {
            self.misses[initiator] += 1;
        }
    }

    pub fn sample_credit(&mut self, thread: usize, cycle: Cycle, count: f64) {
        if !self.in_window(cycle) {
            return;
        }
        let s = &mut self.credits[thread];
        s.cycles += 1;
        s.demoted += u64::from(count < 0.0);
        s.sum += count;
        s.min = s.min.min(count);
        s.max = s.max.max(count);
    }

    pub fn grants(&self) -> &[u64] {
        &self.grants
    }

    pub fn misses(&self, initiator: usize) -> u64 {
        self.misses[initiator]
    }

    pub fn beats(&self, initiator: usize) -> &[(Cycle, u64)] {
        &self.beats[initiator]
    }

    pub fn generated(&self, initiator: usize) -> u64 {
        self.generated[initiator]
    }

    pub fn offered_bytes(&self, initiator: usize) -> u64 {
        self.offered[initiator]
    }

    pub fn completed(&self, initiator: usize) -> u64 {
        self.completed[initiator]
    }

    pub fn read_latencies(&self, initiator: usize) -> &[u64] {
        &self.read_latency[initiator]
    }

    pub fn target_latencies(&self, initiator: usize) -> &[u64] {
        &self.target_latency[initiator]
    }

    pub fn edge_delays(&self, initiator: usize) -> &[u64] {
        &self.edge_delay[initiator]
    }

    /// `(demoted fraction, min, mean, max)` of a thread's credit count.
    pub fn credit_summary(&self, thread: usize) -> Option<(f64, f64, f64, f64)> {
        let s = &self.credits[thread];
        (s.cycles > 0).then(|| {
            let n = s.cycles as f64;
            (s.demoted as f64 / n, s.min, s.sum / n, s.max)
        })
    }
}
