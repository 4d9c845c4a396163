// SPDX-License-Identifier: Apache-2.0

//! Bandwidth enforcement next to the target: saturating per-thread credit
//! counters, demotion of threads that run ahead of their allocation, and the
//! final level-then-epoch arbitration between threads.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::arbiters::{BranchView, LeveledEpochArbiter};
use crate::model::{QosLevel, ThreadConfig};

const FRAC_BITS: u32 = 32;
const ONE: i64 = 1 << FRAC_BITS;

/// Signed fixed-point credit amount, 32 fractional bits, in target beats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Credits(i64);

impl Credits {
    pub const ZERO: Credits = Credits(0);

    pub fn from_beats(beats: i64) -> Self {
        Credits(beats * ONE)
    }

    /// Rounds to the nearest representable amount.
    pub fn from_f64(beats: f64) -> Self {
        Credits((beats * ONE as f64).round() as i64)
    }

    pub fn from_raw(raw: i64) -> Self {
        Credits(raw)
    }

    pub fn raw(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / ONE as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for Credits {
    type Output = Credits;
    fn add(self, rhs: Credits) -> Credits {
        Credits(self.0.saturating_add(rhs.0))
    }
}

impl Sub for Credits {
    type Output = Credits;
    fn sub(self, rhs: Credits) -> Credits {
        Credits(self.0.saturating_sub(rhs.0))
    }
}

impl Neg for Credits {
    type Output = Credits;
    fn neg(self) -> Credits {
        Credits(-self.0)
    }
}

impl fmt::Display for Credits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.to_f64())
    }
}

/// Saturating credit counter. Starts at zero, earns its allocation every
/// cycle and pays one credit per serviced beat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreditCounter {
    count: Credits,
    allocation_per_cycle: Credits,
    pos_limit: Credits,
    neg_limit: Credits,
}

impl CreditCounter {
    pub fn new(allocation_per_cycle: Credits, pos_limit: Credits, neg_limit: Credits) -> Self {
        assert!(neg_limit <= Credits::ZERO && Credits::ZERO <= pos_limit, "limits must bracket zero");
        Self { count: Credits::ZERO, allocation_per_cycle, pos_limit, neg_limit }
    }

    pub fn from_thread(thread: &ThreadConfig) -> Self {
        Self::new(
            Credits::from_f64(thread.allocation_fraction),
            Credits::from_f64(thread.pos_limit),
            Credits::from_f64(thread.neg_limit),
        )
    }

    pub fn count(&self) -> Credits {
        self.count
    }

    pub fn allocation_per_cycle(&self) -> Credits {
        self.allocation_per_cycle
    }

    pub fn pos_limit(&self) -> Credits {
        self.pos_limit
    }

    pub fn neg_limit(&self) -> Credits {
        self.neg_limit
    }

    /// Test hook: places the counter at an arbitrary point inside its limits.
    pub fn with_count(mut self, count: Credits) -> Self {
        self.count = count.clamp(self.neg_limit, self.pos_limit);
        self
    }

    pub fn tick(&mut self) {
        self.count = (self.count + self.allocation_per_cycle).min(self.pos_limit);
    }

    pub fn debit(&mut self, beats: u32) {
        self.count = (self.count - Credits::from_beats(i64::from(beats))).max(self.neg_limit);
    }

    pub fn is_demoted(&self) -> bool {
        self.count.is_negative()
    }
}

/// Level a thread is arbitrated at: its configured level, or best effort
/// while its counter is negative.
pub fn effective_level(configured: QosLevel, counter: Option<&CreditCounter>) -> QosLevel {
    match (configured, counter) {
        (QosLevel::BestEffort, _) => QosLevel::BestEffort,
        (level, Some(c)) if !c.is_demoted() => level,
        (_, Some(_)) => QosLevel::BestEffort,
        (level, None) => level,
    }
}

#[derive(Debug, Clone)]
struct EdgeThread {
    configured: QosLevel,
    counter: Option<CreditCounter>,
}

/// Per-thread enforcement state plus the final arbiter in front of the target.
#[derive(Debug, Clone)]
pub struct EdgeState {
    threads: Vec<EdgeThread>,
    arbiter: LeveledEpochArbiter,
}

impl EdgeState {
    pub fn new(threads: &[ThreadConfig]) -> Self {
        let threads: Vec<_> = threads
            .iter()
            .map(|t| EdgeThread {
                configured: t.level,
                counter: (t.level != QosLevel::BestEffort).then(|| CreditCounter::from_thread(t)),
            })
            .collect();
        let arbiter = LeveledEpochArbiter::new(threads.len());
        Self { threads, arbiter }
    }

    pub fn thread_count(&self) -> usize {
        self.threads.len()
    }

    pub fn counter(&self, thread: usize) -> Option<&CreditCounter> {
        self.threads[thread].counter.as_ref()
    }

    pub fn counter_mut(&mut self, thread: usize) -> Option<&mut CreditCounter> {
        self.threads[thread].counter.as_mut()
    }

    pub fn arbiter_mut(&mut self) -> &mut LeveledEpochArbiter {
        &mut self.arbiter
    }

    pub fn configured_level(&self, thread: usize) -> QosLevel {
        self.threads[thread].configured
    }

    pub fn effective_level(&self, thread: usize) -> QosLevel {
        let t = &self.threads[thread];
        effective_level(t.configured, t.counter.as_ref())
    }

    pub fn effective_levels(&self) -> Vec<QosLevel> {
        (0..self.threads.len()).map(|t| self.effective_level(t)).collect()
    }

    /// One credit interval for every counter.
    pub fn tick(&mut self) {
        for c in self.threads.iter_mut().filter_map(|t| t.counter.as_mut()) {
            c.tick();
        }
    }

    pub fn debit(&mut self, thread: usize, beats: u32) {
        if let Some(c) = self.threads[thread].counter.as_mut() {
            c.debit(beats);
        }
    }

    fn views(&self, heads: &[Option<bool>]) -> Vec<BranchView> {
        heads
            .iter()
            .enumerate()
            .map(|(t, head)| match head {
                Some(marked) => BranchView::pending(*marked).with_level(self.effective_level(t)),
                None => BranchView::IDLE,
            })
            .collect()
    }

    /// Chooses the thread to service. `heads[t]` is `Some(marked)` when
    /// thread `t` has a head-of-line request waiting at the edge.
    pub fn pick(&mut self, heads: &[Option<bool>]) -> Option<usize> {
        let views = self.views(heads);
        self.arbiter.pick(&views)
    }

    pub fn advance(&mut self, heads: &[Option<bool>]) {
        let views = self.views(heads);
        self.arbiter.advance(&views);
    }
}

/// Delay line carrying effective thread levels from the edge back to the
/// interior arbitration points.
#[derive(Debug, Clone)]
pub struct Sideband {
    delay: usize,
    history: VecDeque<Vec<QosLevel>>,
}

impl Sideband {
    pub fn new(delay: u32, initial: Vec<QosLevel>) -> Self {
        let delay = delay as usize;
        Self { delay, history: std::iter::repeat_n(initial, delay + 1).collect() }
    }

    /// Pushes this cycle's levels; the oldest entry drops off.
    pub fn publish(&mut self, levels: Vec<QosLevel>) {
        self.history.push_back(levels);
        while self.history.len() > self.delay + 1 {
            self.history.pop_front();
        }
    }

    /// Levels as seen by interior nodes this cycle.
    pub fn observed(&self) -> &[QosLevel] {
        self.history.front().expect("sideband history is never empty")
    }
}
