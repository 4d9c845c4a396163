// SPDX-License-Identifier: Apache-2.0

//! Initiator workload models.
//!
//! The CPU is closed-loop: after the data of a miss returns it thinks for a
//! geometric number of cycles and then misses again. Streams are open-loop
//! and emit bursts at a configured byte rate regardless of service.

use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Arrival, Cycle, Kind, Request, TrafficConfig, WriteMode};

/// Seed of an initiator's private random stream. Derived from the scenario
/// seed and the initiator name so that editing one initiator leaves the
/// other streams untouched.
pub fn stream_seed(run_seed: u64, name: &str) -> u64 {
    // FNV-1a, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = run_seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpuParams {
    pub core_mhz: f64,
    pub cpi: f64,
    pub loadstore_fraction: f64,
    pub miss_rate: f64,
    pub burst_words: u32,
    pub write_fraction: f64,
    pub mean_think_cycles: f64,
    pub write_mode: WriteMode,
}

impl CpuParams {
    pub const HIGH_MISS_RATE: f64 = 0.25;
    pub const LOW_MISS_RATE: f64 = 0.0285;

    fn with_miss_rate(miss_rate: f64, mean_think_cycles: f64) -> Self {
        Self {
            core_mhz: 800.0,
            cpi: 1.0,
            loadstore_fraction: 0.25,
            miss_rate,
            burst_words: 4,
            write_fraction: 0.25,
            mean_think_cycles,
            write_mode: WriteMode::Posted,
        }
    }

    pub fn high_miss() -> Self {
        Self::with_miss_rate(Self::HIGH_MISS_RATE, 4.0)
    }

    pub fn low_miss() -> Self {
        Self::with_miss_rate(Self::LOW_MISS_RATE, 35.0)
    }

    /// Instructions executed between consecutive misses.
    pub fn instr_per_miss(&self) -> f64 {
        1.0 / (self.loadstore_fraction * self.miss_rate)
    }

    /// Think time implied by the instruction count at `bus_mhz`.
    pub fn implied_think_cycles(&self, bus_mhz: f64) -> f64 {
        self.instr_per_miss() * self.cpi / (self.core_mhz / bus_mhz)
    }

    /// MIPS with zero interconnect delay.
    pub fn peak_mips(&self) -> f64 {
        self.core_mhz / self.cpi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CpuState {
    Thinking { issue_at: Cycle },
    Stalled,
}

#[derive(Debug, Clone)]
pub struct CpuGenerator {
    initiator: usize,
    params: CpuParams,
    rng: ChaCha8Rng,
    think: Geometric,
    state: CpuState,
    think_total: u64,
    think_count: u64,
}

impl CpuGenerator {
    pub fn new(initiator: usize, params: CpuParams, seed: u64) -> Self {
        let p = 1.0 / (params.mean_think_cycles + 1.0);
        let think = Geometric::new(p).expect("think probability in (0, 1]");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = think.sample(&mut rng);
        Self {
            initiator,
            params,
            rng,
            think,
            state: CpuState::Thinking { issue_at: first },
            think_total: 0,
            think_count: 0,
        }
    }

    pub fn params(&self) -> &CpuParams {
        &self.params
    }

    pub fn is_stalled(&self) -> bool {
        self.state == CpuState::Stalled
    }

    /// Mean of the think times drawn after responses.
    pub fn mean_think(&self) -> Option<f64> {
        (self.think_count > 0).then(|| self.think_total as f64 / self.think_count as f64)
    }

    pub fn step(&mut self, cycle: Cycle, out: &mut Vec<Request>) {
        let CpuState::Thinking { issue_at } = self.state else { return };
        if cycle < issue_at {
            return;
        }
        let words = self.params.burst_words;
        match self.params.write_mode {
            WriteMode::Posted => {
                out.push(Request::new(self.initiator, Kind::Read, words, cycle));
                if self.rng.random_bool(self.params.write_fraction) {
                    out.push(Request::new(self.initiator, Kind::Write, words, cycle));
                }
            }
            WriteMode::Blocking => {
                let kind =
                    if self.rng.random_bool(self.params.write_fraction) { Kind::Write } else { Kind::Read };
                out.push(Request::new(self.initiator, kind, words, cycle));
            }
        }
        self.state = CpuState::Stalled;
    }

    /// Informs the core that a request finished at `cycle`. Returns whether
    /// the completion ended a stall (i.e. counted as a serviced miss).
    pub fn on_complete(&mut self, kind: Kind, cycle: Cycle) -> bool {
        let unstalls = match self.params.write_mode {
            WriteMode::Posted => kind == Kind::Read,
            WriteMode::Blocking => true,
        };
        if !unstalls || self.state != CpuState::Stalled {
            return false;
        }
        let k = self.think.sample(&mut self.rng);
        self.think_total += k;
        self.think_count += 1;
        self.state = CpuState::Thinking { issue_at: cycle + k };
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamParams {
    pub bytes_per_cycle: f64,
    pub min_words: u32,
    pub max_words: u32,
    pub read_fraction: f64,
    pub arrival: Arrival,
    pub word_bytes: u32,
}

impl StreamParams {
    pub fn mean_burst_bytes(&self) -> f64 {
        f64::from(self.min_words + self.max_words) / 2.0 * f64::from(self.word_bytes)
    }

    /// Mean cycles between burst emissions.
    pub fn mean_gap(&self) -> f64 {
        self.mean_burst_bytes() / self.bytes_per_cycle
    }
}

#[derive(Debug, Clone)]
pub struct StreamGenerator {
    initiator: usize,
    params: StreamParams,
    rng: ChaCha8Rng,
    gap: Option<Geometric>,
    next_emit: f64,
}

impl StreamGenerator {
    pub fn new(initiator: usize, params: StreamParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gap, next_emit) = match params.arrival {
            Arrival::Bursty => {
                let g = Geometric::new(1.0 / params.mean_gap()).expect("mean gap ≥ 1");
                let first = (g.sample(&mut rng) + 1) as f64;
                (Some(g), first)
            }
            Arrival::Regular => (None, 0.0),
        };
        Self { initiator, params, rng, gap, next_emit }
    }

    pub fn params(&self) -> &StreamParams {
        &self.params
    }

    pub fn step(&mut self, cycle: Cycle, out: &mut Vec<Request>) {
        while cycle as f64 >= self.next_emit {
            let words = self.rng.random_range(self.params.min_words..=self.params.max_words);
            let kind = if self.rng.random_bool(self.params.read_fraction) { Kind::Read } else { Kind::Write };
            out.push(Request::new(self.initiator, kind, words, cycle));
            self.next_emit += match &self.gap {
                Some(g) => (g.sample(&mut self.rng) + 1) as f64,
                None => self.params.mean_gap(),
            };
        }
    }
}

/// Always has a request waiting at the fabric boundary.
#[derive(Debug, Clone)]
pub struct GreedyGenerator {
    initiator: usize,
    burst_words: u32,
    read_fraction: f64,
    rng: ChaCha8Rng,
}

impl GreedyGenerator {
    pub fn new(initiator: usize, burst_words: u32, read_fraction: f64, seed: u64) -> Self {
        Self { initiator, burst_words, read_fraction, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn step(&mut self, cycle: Cycle, backlog: usize, out: &mut Vec<Request>) {
        if backlog == 0 {
            let kind = if self.rng.random_bool(self.read_fraction) { Kind::Read } else { Kind::Write };
            out.push(Request::new(self.initiator, kind, self.burst_words, cycle));
        }
    }
}

/// One line of a request trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub cycle: Cycle,
    pub initiator: String,
    pub kind: Kind,
    pub words: u32,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("trace {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("trace {path}: records must be sorted by cycle (line {line})")]
    Unsorted { path: String, line: usize },
    #[error("trace {path}: burst of zero words (line {line})")]
    ZeroWords { path: String, line: usize },
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>, TraceError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|source| TraceError::Csv { path: name.clone(), source })?;
    let mut records = Vec::new();
    for (i, rec) in reader.deserialize::<TraceRecord>().enumerate() {
        let rec = rec.map_err(|source| TraceError::Csv { path: name.clone(), source })?;
        let line = i + 2;
        if rec.words == 0 {
            return Err(TraceError::ZeroWords { path: name, line });
        }
        if records.last().is_some_and(|prev: &TraceRecord| prev.cycle > rec.cycle) {
            return Err(TraceError::Unsorted { path: name, line });
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn write_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<(), TraceError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|source| TraceError::Csv { path: name.clone(), source })?;
    for r in records {
        w.serialize(r).map_err(|source| TraceError::Csv { path: name.clone(), source })?;
    }
    w.flush().map_err(|source| TraceError::Io { path: name, source })
}

#[derive(Debug, Clone)]
pub struct TraceGenerator {
    initiator: usize,
    records: Vec<(Cycle, Kind, u32)>,
    next: usize,
}

impl TraceGenerator {
    /// Keeps the records that belong to `name`, in file order.
    pub fn new(initiator: usize, name: &str, records: &[TraceRecord]) -> Self {
        let records =
            records.iter().filter(|r| r.initiator == name).map(|r| (r.cycle, r.kind, r.words)).collect();
        Self { initiator, records, next: 0 }
    }

    pub fn step(&mut self, cycle: Cycle, out: &mut Vec<Request>) {
        while let Some(&(at, kind, words)) = self.records.get(self.next) {
            if at > cycle {
                break;
            }
            out.push(Request::new(self.initiator, kind, words, cycle));
            self.next += 1;
        }
    }
}

/// A workload model bound to one initiator.
#[derive(Debug, Clone)]
pub enum Generator {
    Cpu(CpuGenerator),
    Stream(StreamGenerator),
    Greedy(GreedyGenerator),
    Trace(TraceGenerator),
    Idle,
}

impl Generator {
    /// Builds the generator for an initiator. Trace records are supplied by
    /// the caller so that file IO stays outside the cycle loop.
    pub fn from_config(
        initiator: usize,
        name: &str,
        traffic: &TrafficConfig,
        word_bytes: u32,
        bus_mhz: f64,
        seed: u64,
        trace: Option<&[TraceRecord]>,
    ) -> Self {
        match traffic {
            TrafficConfig::Cpu {
                core_mhz,
                cpi,
                loadstore_fraction,
                miss_rate,
                burst_words,
                write_fraction,
                mean_think_cycles,
                write_mode,
            } => Generator::Cpu(CpuGenerator::new(
                initiator,
                CpuParams {
                    core_mhz: *core_mhz,
                    cpi: *cpi,
                    loadstore_fraction: *loadstore_fraction,
                    miss_rate: *miss_rate,
                    burst_words: *burst_words,
                    write_fraction: *write_fraction,
                    mean_think_cycles: *mean_think_cycles,
                    write_mode: *write_mode,
                },
                seed,
            )),
            TrafficConfig::Stream { rate_mbps, min_words, max_words, read_fraction, arrival } => {
                Generator::Stream(StreamGenerator::new(
                    initiator,
                    StreamParams {
                        bytes_per_cycle: rate_mbps / bus_mhz,
                        min_words: *min_words,
                        max_words: *max_words,
                        read_fraction: *read_fraction,
                        arrival: *arrival,
                        word_bytes,
                    },
                    seed,
                ))
            }
            TrafficConfig::Greedy { burst_words, read_fraction } => {
                Generator::Greedy(GreedyGenerator::new(initiator, *burst_words, *read_fraction, seed))
            }
            TrafficConfig::Trace { .. } => Generator::Trace(TraceGenerator::new(initiator, name, trace.unwrap_or(&[]))),
            TrafficConfig::Idle => Generator::Idle,
        }
    }

    pub fn step(&mut self, cycle: Cycle, backlog: usize, out: &mut Vec<Request>) {
        match self {
            Generator::Cpu(g) => g.step(cycle, out),
            Generator::Stream(g) => g.step(cycle, out),
            Generator::Greedy(g) => g.step(cycle, backlog, out),
            Generator::Trace(g) => g.step(cycle, out),
            Generator::Idle => {}
        }
    }

    /// Returns whether the completion serviced a CPU miss.
    pub fn on_complete(&mut self, kind: Kind, cycle: Cycle) -> bool {
        match self {
            Generator::Cpu(g) => g.on_complete(kind, cycle),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instructions_per_miss() {
        assert_eq!(CpuParams::high_miss().instr_per_miss(), 16.0);
        let low = CpuParams::low_miss().instr_per_miss();
        assert!((low - 140.350_877).abs() < 1e-5, "{low}");
        assert_eq!(CpuParams::high_miss().implied_think_cycles(200.0), 4.0);
        assert!((CpuParams::low_miss().implied_think_cycles(200.0) - 35.0877).abs() < 1e-3);
    }

    #[test]
    fn stream_gap_arithmetic() {
        let vid = StreamParams {
            bytes_per_cycle: 200.0 / 200.0,
            min_words: 8,
            max_words: 8,
            read_fraction: 1.0,
            arrival: Arrival::Regular,
            word_bytes: 4,
        };
        assert_eq!(vid.mean_gap(), 32.0);
        let mpeg = StreamParams {
            bytes_per_cycle: 800.0 / 200.0,
            min_words: 1,
            max_words: 8,
            read_fraction: 2.0 / 3.0,
            arrival: Arrival::Bursty,
            word_bytes: 4,
        };
        assert_eq!(mpeg.mean_burst_bytes(), 18.0);
        assert_eq!(mpeg.mean_gap(), 4.5);
    }

    #[test]
    fn regular_stream_is_periodic() {
        let params = StreamParams {
            bytes_per_cycle: 1.0,
            min_words: 8,
            max_words: 8,
            read_fraction: 1.0,
            arrival: Arrival::Regular,
            word_bytes: 4,
        };
        let mut g = StreamGenerator::new(0, params, 1);
        let mut out = Vec::new();
        let mut cycles = Vec::new();
        for c in 0..200 {
            let before = out.len();
            g.step(c, &mut out);
            if out.len() > before {
                cycles.push(c);
            }
        }
        assert_eq!(cycles, vec![0, 32, 64, 96, 128, 160, 192]);
        assert!(out.iter().all(|r| r.kind == Kind::Read && r.burst_words == 8));
    }

    #[test]
    fn cpu_stalls_until_read_returns() {
        let mut params = CpuParams::high_miss();
        params.mean_think_cycles = 0.0;
        params.write_fraction = 1.0;
        let mut cpu = CpuGenerator::new(0, params, 3);
        let mut out = Vec::new();
        cpu.step(0, &mut out);
        assert_eq!(out.iter().map(|r| r.kind).collect::<Vec<_>>(), vec![Kind::Read, Kind::Write]);
        cpu.step(1, &mut out);
        assert_eq!(out.len(), 2);
        assert!(!cpu.on_complete(Kind::Write, 5));
        assert!(cpu.is_stalled());
        assert!(cpu.on_complete(Kind::Read, 6));
        cpu.step(6, &mut out);
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn trace_generator_replays_in_order() {
        let recs = vec![
            TraceRecord { cycle: 2, initiator: "A".into(), kind: Kind::Read, words: 4 },
            TraceRecord { cycle: 2, initiator: "B".into(), kind: Kind::Write, words: 1 },
            TraceRecord { cycle: 5, initiator: "A".into(), kind: Kind::Write, words: 8 },
        ];
        let mut g = TraceGenerator::new(0, "A", &recs);
        let mut out = Vec::new();
        for c in 0..10 {
            g.step(c, &mut out);
        }
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].issue_cycle, out[0].burst_words), (2, 4));
        assert_eq!((out[1].issue_cycle, out[1].kind), (5, Kind::Write));
    }

    #[test]
    fn trace_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let recs = vec![
            TraceRecord { cycle: 0, initiator: "CPU".into(), kind: Kind::Read, words: 4 },
            TraceRecord { cycle: 7, initiator: "GEN".into(), kind: Kind::Write, words: 3 },
        ];
        write_trace(&path, &recs).unwrap();
        assert_eq!(read_trace(&path).unwrap(), recs);
    }

    #[test]
    fn unsorted_trace_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "cycle,initiator,kind,words\n5,A,read,1\n3,A,read,1\n").unwrap();
        assert!(matches!(read_trace(&path), Err(TraceError::Unsorted { line: 3, .. })));
    }

    #[test]
    fn seeds_differ_by_name() {
        assert_ne!(stream_seed(1, "CPU"), stream_seed(1, "GEN"));
        assert_eq!(stream_seed(9, "VID"), stream_seed(9, "VID"));
    }
}
