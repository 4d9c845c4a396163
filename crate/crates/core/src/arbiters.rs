// SPDX-License-Identifier: Apache-2.0

//! Arbitration decisions for a single arbitration point.
//!
//! Every arbiter sees the branches of its arbitration point as a slice of
//! [`BranchView`]s indexed by branch id, and returns the winning branch id
//! (if any). State lives in the arbiter value itself; given the same state
//! and the same views, a pick is always the same.

use thiserror::Error;

use crate::model::QosLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchView {
    pub has_pending: bool,
    /// Head-of-line request opens the branch's next epoch.
    pub head_marked: bool,
    /// Level of the head request's thread after demotion.
    pub level: QosLevel,
}

impl BranchView {
    pub const IDLE: BranchView =
        BranchView { has_pending: false, head_marked: false, level: QosLevel::BestEffort };

    pub fn pending(head_marked: bool) -> Self {
        Self { has_pending: true, head_marked, level: QosLevel::BestEffort }
    }

    pub fn with_level(mut self, level: QosLevel) -> Self {
        self.level = level;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArbiterError {
    #[error("branch {0} is not covered by the priority order")]
    UncoveredBranch(usize),
    #[error("priority order names unknown branch {0}")]
    UnknownBranch(usize),
}

/// Returns the highest-ordered pending branch. `order` lists branch ids,
/// highest priority first, and must cover every branch.
pub fn fixed_priority_pick(branches: &[BranchView], order: &[usize]) -> Result<Option<usize>, ArbiterError> {
    if let Some(&bad) = order.iter().find(|&&b| b >= branches.len()) {
        return Err(ArbiterError::UnknownBranch(bad));
    }
    if let Some(missing) = (0..branches.len()).find(|b| !order.contains(b)) {
        return Err(ArbiterError::UncoveredBranch(missing));
    }
    Ok(order.iter().copied().find(|&b| branches[b].has_pending))
}

/// Round-robin: the previous winner gets the lowest priority.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundRobin {
    pub last_winner: Option<usize>,
}

impl RoundRobin {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pick(&mut self, branches: &[BranchView]) -> Option<usize> {
        let winner = next_pending_after(branches, self.last_winner)?;
        self.last_winner = Some(winner);
        Some(winner)
    }
}

/// First pending branch strictly after `after` in cyclic order (the branch
/// itself comes last). With no previous branch the scan starts at 0.
fn next_pending_after(branches: &[BranchView], after: Option<usize>) -> Option<usize> {
    let n = branches.len();
    let start = after.map_or(0, |a| a + 1);
    (0..n).map(|i| (start + i) % n).find(|&b| branches[b].has_pending)
}

/// Strict time-division wheel. The index advances every call, whether or
/// not the slot was used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TdmaWheel {
    slots: Vec<usize>,
    index: usize,
}

impl TdmaWheel {
    /// Returns `None` for an empty slot list.
    pub fn new(slots: Vec<usize>) -> Option<Self> {
        if slots.is_empty() {
            None
        } else {
            Some(Self { slots, index: 0 })
        }
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn current_owner(&self) -> usize {
        self.slots[self.index]
    }

    /// Number of slots owned by `branch` in one revolution.
    pub fn share(&self, branch: usize) -> usize {
        self.slots.iter().filter(|&&s| s == branch).count()
    }

    pub fn pick(&mut self, branches: &[BranchView]) -> Option<usize> {
        let owner = self.current_owner();
        self.index = (self.index + 1) % self.slots.len();
        branches.get(owner).filter(|v| v.has_pending).map(|_| owner)
    }
}

/// Fixed-weight arbitration: the holder keeps the grant for up to its
/// weight in consecutive requests, then the turn moves round-robin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedWeight {
    weights: Vec<u32>,
    grants_remaining: u32,
    holder: Option<usize>,
}

impl FixedWeight {
    /// Weights below 1 are raised to 1.
    pub fn new(weights: Vec<u32>) -> Self {
        Self { weights: weights.into_iter().map(|w| w.max(1)).collect(), grants_remaining: 0, holder: None }
    }

    pub fn holder(&self) -> Option<usize> {
        self.holder
    }

    pub fn grants_remaining(&self) -> u32 {
        self.grants_remaining
    }

    pub fn pick(&mut self, branches: &[BranchView]) -> Option<usize> {
        if let Some(h) = self.holder {
            if self.grants_remaining > 0 && branches.get(h).is_some_and(|v| v.has_pending) {
                self.grants_remaining -= 1;
                return Some(h);
            }
        }
        let winner = next_pending_after(branches, self.holder)?;
        self.holder = Some(winner);
        self.grants_remaining = self.weights.get(winner).copied().unwrap_or(1) - 1;
        Some(winner)
    }
}

/// Epoch arbitration with a least-recently-served tie-break.
///
/// A branch whose head carries a marker belongs to the next epoch and is
/// held back until every other branch has either reached its own marker or
/// gone idle. At that point the epoch advances and the held-back heads are
/// admitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochArbiter {
    current_epoch: u64,
    /// Branch whose marked head has been admitted into the current epoch.
    admitted: Vec<bool>,
    /// Least recently served first.
    lrs_order: Vec<usize>,
}

impl EpochArbiter {
    pub fn new(branches: usize) -> Self {
        Self { current_epoch: 0, admitted: vec![false; branches], lrs_order: (0..branches).collect() }
    }

    pub fn current_epoch(&self) -> u64 {
        self.current_epoch
    }

    pub fn lrs_order(&self) -> &[usize] {
        &self.lrs_order
    }

    /// Overrides the least-recently-served order. `order` must be a
    /// permutation of the branch ids.
    pub fn set_lrs_order(&mut self, order: Vec<usize>) {
        debug_assert_eq!(order.len(), self.lrs_order.len());
        self.lrs_order = order;
    }

    /// Branches whose marked head is held back from the current epoch.
    pub fn closed(&self, branches: &[BranchView]) -> Vec<usize> {
        (0..branches.len()).filter(|&b| self.is_closed(branches, b)).collect()
    }

    fn is_closed(&self, branches: &[BranchView], b: usize) -> bool {
        let v = &branches[b];
        v.has_pending && v.head_marked && !self.admitted[b]
    }

    fn is_eligible(&self, branches: &[BranchView], b: usize) -> bool {
        branches[b].has_pending && !self.is_closed(branches, b)
    }

    pub fn pick(&mut self, branches: &[BranchView]) -> Option<usize> {
        debug_assert_eq!(branches.len(), self.admitted.len());
        let mut winner = self.lrs_order.iter().copied().find(|&b| self.is_eligible(branches, b));
        if winner.is_none() && self.advance(branches) {
            winner = self.lrs_order.iter().copied().find(|&b| self.is_eligible(branches, b));
        }
        let w = winner?;
        self.admitted[w] = false;
        let pos = self.lrs_order.iter().position(|&b| b == w).expect("lrs_order is a permutation");
        self.lrs_order.remove(pos);
        self.lrs_order.push(w);
        Some(w)
    }

    /// Moves to the next epoch when every branch is either idle or waiting
    /// on a marked head (and at least one is waiting). Returns whether the
    /// epoch advanced.
    pub fn advance(&mut self, branches: &[BranchView]) -> bool {
        let mut any_closed = false;
        for b in 0..branches.len() {
            if self.is_closed(branches, b) {
                any_closed = true;
            } else if branches[b].has_pending {
                return false;
            }
        }
        if !any_closed {
            return false;
        }
        self.current_epoch += 1;
        for b in 0..branches.len() {
            if self.is_closed(branches, b) {
                self.admitted[b] = true;
            }
        }
        true
    }
}

/// Strict priority across QoS levels with an epoch arbiter per level.
///
/// Used both at interior arbitration points (levels from the sideband) and
/// at the target edge (levels from the credit counters).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeveledEpochArbiter {
    per_level: [EpochArbiter; 3],
}

impl LeveledEpochArbiter {
    pub fn new(branches: usize) -> Self {
        Self { per_level: std::array::from_fn(|_| EpochArbiter::new(branches)) }
    }

    pub fn level(&self, level: QosLevel) -> &EpochArbiter {
        &self.per_level[level.index()]
    }

    pub fn level_mut(&mut self, level: QosLevel) -> &mut EpochArbiter {
        &mut self.per_level[level.index()]
    }

    fn restricted(branches: &[BranchView], level: QosLevel) -> Vec<BranchView> {
        branches
            .iter()
            .map(|v| if v.has_pending && v.level == level { *v } else { BranchView::IDLE })
            .collect()
    }

    pub fn pick(&mut self, branches: &[BranchView]) -> Option<usize> {
        let top = branches.iter().filter(|v| v.has_pending).map(|v| v.level).max()?;
        let views = Self::restricted(branches, top);
        self.per_level[top.index()].pick(&views)
    }

    pub fn advance(&mut self, branches: &[BranchView]) {
        for level in QosLevel::ALL {
            let views = Self::restricted(branches, level);
            self.per_level[level.index()].advance(&views);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: BranchView = BranchView { has_pending: true, head_marked: false, level: QosLevel::BestEffort };
    const I: BranchView = BranchView::IDLE;

    #[test]
    fn fixed_priority_examples() {
        // CPU=0, MPEG=1, VID=2, GEN=3
        let order = [0, 1, 2, 3];
        assert_eq!(fixed_priority_pick(&[P, I, P, I], &order), Ok(Some(0)));
        assert_eq!(fixed_priority_pick(&[I, I, I, I], &order), Ok(None));
        assert_eq!(fixed_priority_pick(&[I, I, I, P], &[2, 1, 3, 0]), Ok(Some(3)));
        assert_eq!(fixed_priority_pick(&[P, P], &[0, 5]), Err(ArbiterError::UnknownBranch(5)));
        assert_eq!(fixed_priority_pick(&[P, P], &[1]), Err(ArbiterError::UncoveredBranch(0)));
    }

    #[test]
    fn round_robin_examples() {
        let mut rr = RoundRobin { last_winner: Some(1) };
        assert_eq!(rr.pick(&[P; 4]), Some(2));

        let mut rr = RoundRobin { last_winner: Some(0) };
        assert_eq!(rr.pick(&[P, I, I, I]), Some(0));

        let mut rr = RoundRobin::new();
        let mut counts = [0; 4];
        for _ in 0..4 * 25 {
            counts[rr.pick(&[P; 4]).unwrap()] += 1;
        }
        assert_eq!(counts, [25; 4]);

        let mut rr = RoundRobin { last_winner: Some(2) };
        assert_eq!(rr.pick(&[I; 4]), None);
        assert_eq!(rr.last_winner, Some(2), "state only changes on a grant");
    }

    #[test]
    fn tdma_examples() {
        // M=1, C=0, V=2, G=3
        let mut wheel = TdmaWheel::new(vec![1, 0, 1, 2, 1, 0, 1, 3]).unwrap();
        assert_eq!(wheel.pick(&[I, P, I, I]), Some(1));
        assert_eq!(wheel.index(), 1);
        // Slot 1 belongs to CPU, which is idle: wasted even though others wait.
        assert_eq!(wheel.pick(&[I, P, P, P]), None);
        assert_eq!(wheel.index(), 2);
        assert_eq!(wheel.pick(&[I; 4]), None);
        assert_eq!(wheel.index(), 3);
        assert!(TdmaWheel::new(vec![]).is_none());
    }

    #[test]
    fn fixed_weight_sole_contender_rotates_to_itself() {
        let mut fw = FixedWeight::new(vec![2, 1]);
        let picks: Vec<_> = (0..5).map(|_| fw.pick(&[P, I])).collect();
        assert_eq!(picks, vec![Some(0); 5]);
    }

    #[test]
    fn fixed_weight_ratio_brute_force() {
        let mut fw = FixedWeight::new(vec![3, 1]);
        let mut counts = [0u32; 2];
        for _ in 0..1000 {
            counts[fw.pick(&[P, P]).unwrap()] += 1;
        }
        assert_eq!(counts, [750, 250]);
    }

    #[test]
    fn epoch_single_branch_never_blocks() {
        let mut arb = EpochArbiter::new(1);
        for i in 0..10 {
            let marked = i > 0;
            assert_eq!(arb.pick(&[BranchView::pending(marked)]), Some(0));
            arb.advance(&[BranchView::pending(true)]);
        }
    }

    #[test]
    fn epoch_lrs_tie_break() {
        let mut arb = EpochArbiter::new(2);
        arb.set_lrs_order(vec![1, 0]);
        assert_eq!(arb.pick(&[P, P]), Some(1));
        assert_eq!(arb.lrs_order(), &[0, 1]);
    }

    #[test]
    fn epoch_marked_head_is_held_back() {
        let mut arb = EpochArbiter::new(2);
        let views = [BranchView::pending(true), P];
        assert_eq!(arb.closed(&views), vec![0]);
        assert_eq!(arb.pick(&views), Some(1));
        assert!(!arb.advance(&views), "B still has current-epoch work");
        assert_eq!(arb.current_epoch(), 0);
    }

    #[test]
    fn epoch_advance_examples() {
        let mut arb = EpochArbiter::new(2);
        assert!(arb.advance(&[BranchView::pending(true), I]));
        assert_eq!(arb.current_epoch(), 1);
        assert!(arb.closed(&[BranchView::pending(true), I]).is_empty());

        let mut empty = EpochArbiter::new(0);
        assert!(!empty.advance(&[]));
        assert_eq!(empty.pick(&[]), None);
    }

    #[test]
    fn leveled_prefers_higher_level() {
        let mut arb = LeveledEpochArbiter::new(3);
        let views = [
            P.with_level(QosLevel::BestEffort),
            P.with_level(QosLevel::Bandwidth),
            P.with_level(QosLevel::BestEffort),
        ];
        assert_eq!(arb.pick(&views), Some(1));
        let views = [P, I, P];
        assert_eq!(arb.pick(&views), Some(0));
        assert_eq!(arb.pick(&views), Some(2));
    }
}
