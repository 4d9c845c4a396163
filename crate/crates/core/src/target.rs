// SPDX-License-Identifier: Apache-2.0

//! SRAM-like shared target: one beat per cycle, fixed access latency.

use crate::model::{Cycle, Kind, TargetConfig};

/// Target beats needed to move `words` words; at least one.
pub fn occupancy(words: u32, word_bytes: u32, beat_bytes: u32) -> u32 {
    let bytes = u64::from(words) * u64::from(word_bytes);
    bytes.div_ceil(u64::from(beat_bytes.max(1))).max(1) as u32
}

/// Timing of one whole-burst grant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceSchedule {
    pub grant_cycle: Cycle,
    pub occupancy: u32,
    /// Cycle of the final data beat: the last read response beat, or the
    /// last accepted write beat.
    pub completion_cycle: Cycle,
}

#[derive(Debug, Clone)]
pub struct TargetModel {
    beat_bytes: u32,
    latency_cycles: u32,
    /// First cycle at which a new burst may be granted.
    free_at: Cycle,
}

impl TargetModel {
    pub fn new(config: &TargetConfig) -> Self {
        Self { beat_bytes: config.beat_bytes, latency_cycles: config.latency_cycles, free_at: 0 }
    }

    pub fn beat_bytes(&self) -> u32 {
        self.beat_bytes
    }

    pub fn latency_cycles(&self) -> u32 {
        self.latency_cycles
    }

    pub fn is_idle(&self, cycle: Cycle) -> bool {
        cycle >= self.free_at
    }

    /// Grants a burst at `cycle`; the target is occupied until the last beat
    /// has transferred.
    pub fn service(&mut self, kind: Kind, words: u32, word_bytes: u32, cycle: Cycle) -> ServiceSchedule {
        debug_assert!(self.is_idle(cycle), "target granted while busy");
        let occ = occupancy(words, word_bytes, self.beat_bytes);
        self.free_at = cycle + u64::from(occ);
        ServiceSchedule {
            grant_cycle: cycle,
            occupancy: occ,
            completion_cycle: self.completion_of_beat(kind, cycle + u64::from(occ) - 1),
        }
    }

    /// Cycle at which a beat transferred at `transfer_cycle` is complete
    /// from the initiator's point of view.
    pub fn completion_of_beat(&self, kind: Kind, transfer_cycle: Cycle) -> Cycle {
        match kind {
            Kind::Read => transfer_cycle + u64::from(self.latency_cycles),
            Kind::Write => transfer_cycle,
        }
    }
}
