// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use noc_qos::arbiters::{fixed_priority_pick, BranchView, EpochArbiter, FixedWeight, RoundRobin, TdmaWheel};
use noc_qos::cli::{parse_config, to_toml};
use noc_qos::model::{QosLevel, Scheme};
use noc_qos::presets::{preset, saturated, Topology, PRESET_NAMES};
use noc_qos::qos_edge::{CreditCounter, Credits};
use noc_qos::Simulation;
use proptest::prelude::*;

fn views(pending: &[bool]) -> Vec<BranchView> {
    pending.iter().map(|&p| if p { BranchView::pending(false) } else { BranchView::IDLE }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn level_sort_is_total(mut levels in prop::collection::vec(0usize..3, 0..20)) {
        let mut as_levels: Vec<QosLevel> = levels.iter().map(|&i| QosLevel::ALL[i]).collect();
        as_levels.sort();
        levels.sort();
        prop_assert_eq!(as_levels.iter().map(|l| l.index()).collect::<Vec<_>>(), levels);
    }

    #[test]
    fn fixed_priority_returns_first_pending_in_order(
        pending in prop::collection::vec(any::<bool>(), 1..6),
        seed in any::<u64>(),
    ) {
        let n = pending.len();
        let mut order: Vec<usize> = (0..n).collect();
        // Deterministic shuffle from the seed.
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let pick = fixed_priority_pick(&views(&pending), &order).unwrap();
        prop_assert_eq!(pick, order.iter().copied().find(|&b| pending[b]));
    }

    #[test]
    fn round_robin_counts_differ_by_at_most_one(k in 1usize..6, len in 1usize..200) {
        let mut rr = RoundRobin::new();
        let mut counts = vec![0i64; k];
        for _ in 0..len {
            counts[rr.pick(&views(&vec![true; k])).unwrap()] += 1;
        }
        prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }

    #[test]
    fn tdma_shares_are_exact(slots in prop::collection::vec(0usize..4, 1..12), revolutions in 1usize..20) {
        let mut wheel = TdmaWheel::new(slots.clone()).unwrap();
        let mut counts = [0usize; 4];
        for _ in 0..revolutions * slots.len() {
            counts[wheel.pick(&views(&[true; 4])).unwrap()] += 1;
        }
        for (b, count) in counts.iter().enumerate() {
            prop_assert_eq!(*count, revolutions * wheel.share(b));
        }
    }

    #[test]
    fn fixed_weight_turns_hold_the_weights(weights in prop::collection::vec(1u32..6, 1..5), turns in 1usize..10) {
        let total: u32 = weights.iter().sum();
        let mut fw = FixedWeight::new(weights.clone());
        let mut counts = vec![0u32; weights.len()];
        for _ in 0..turns as u32 * total {
            counts[fw.pick(&views(&vec![true; weights.len()])).unwrap()] += 1;
        }
        for (c, w) in counts.iter().zip(&weights) {
            prop_assert_eq!(*c, turns as u32 * w);
        }
    }

    /// Drives an epoch arbiter with per-branch sequence numbers and random
    /// idleness; no global epoch may contain more than n_i grants of branch i,
    /// and greedy branches get exactly n_i.
    #[test]
    fn epoch_grants_per_epoch_bounded(
        sizes in prop::collection::vec(1u64..6, 1..5),
        idle in prop::collection::vec(prop::collection::vec(any::<bool>(), 1..5), 1..300),
        greedy in any::<bool>(),
    ) {
        let k = sizes.len();
        let mut arb = EpochArbiter::new(k);
        let mut seq = vec![0u64; k];
        let mut per_epoch: HashMap<(u64, usize), u64> = HashMap::new();
        let mut last_epoch = 0;
        let view = |seq: &[u64], row: &[bool]| -> Vec<BranchView> {
            (0..k)
                .map(|b| {
                    if greedy || !row.get(b).copied().unwrap_or(false) {
                        BranchView::pending(seq[b] > 0 && seq[b].is_multiple_of(sizes[b]))
                    } else {
                        BranchView::IDLE
                    }
                })
                .collect()
        };
        for row in &idle {
            let v = view(&seq, row);
            let before = arb.clone();
            let w = arb.pick(&v);
            let mut again = before;
            prop_assert_eq!(again.pick(&v), w, "pick is not a pure function of state and views");
            if let Some(w) = w {
                *per_epoch.entry((arb.current_epoch(), w)).or_default() += 1;
                seq[w] += 1;
            }
            arb.advance(&view(&seq, row));
            prop_assert!(arb.current_epoch() >= last_epoch);
            last_epoch = arb.current_epoch();
        }
        for (&(epoch, b), &n) in &per_epoch {
            prop_assert!(n <= sizes[b], "epoch {} branch {} got {} > {}", epoch, b, n, sizes[b]);
            if greedy && epoch < last_epoch {
                prop_assert_eq!(n, sizes[b]);
            }
        }
    }

    #[test]
    fn credit_count_stays_within_limits(
        pos in 0i64..64,
        neg in -64i64..=0,
        alloc in 0.0f64..1.0,
        ops in prop::collection::vec(prop::option::of(1u32..9), 0..400),
    ) {
        let mut c = CreditCounter::new(Credits::from_f64(alloc), Credits::from_beats(pos), Credits::from_beats(neg));
        for op in ops {
            match op {
                None => c.tick(),
                Some(beats) => c.debit(beats),
            }
            prop_assert!(c.count() >= c.neg_limit() && c.count() <= c.pos_limit());
            prop_assert_eq!(c.is_demoted(), c.count().is_negative());
        }
    }

    #[test]
    fn scenario_round_trips_through_toml(
        which in 0usize..6,
        seed in any::<u64>(),
        cycles in 1u64..10_000_000,
        epochs in prop::collection::vec(1u64..16, 4),
        pos in prop::option::of(1.0f64..256.0),
        enabled in prop::collection::vec(any::<bool>(), 4),
        delay in 0u32..5,
    ) {
        let mut cfg = preset(PRESET_NAMES[which]).unwrap();
        cfg.rng_seed = seed;
        cfg.sim_cycles = cycles;
        cfg.sideband_delay = delay;
        for (i, init) in cfg.initiators.iter_mut().enumerate() {
            init.qos.epoch_size = epochs[i];
            init.enabled = enabled[i];
        }
        cfg.initiators[0].qos.pos_limit = pos;
        prop_assert!(cfg.validate().is_empty());
        prop_assert_eq!(parse_config(&to_toml(&cfg)).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Conservation, per-thread ordering and the one-beat-per-cycle target
    /// limit on short runs of arbitrary schemes and epoch sizes.
    #[test]
    fn engine_invariants(
        scheme in prop::sample::select(vec![Scheme::FixedPriority, Scheme::RoundRobin, Scheme::Tdma, Scheme::FixedWeight, Scheme::Qos]),
        which in 0usize..6,
        seed in any::<u64>(),
        epochs in prop::collection::vec(1u64..9, 4),
        depth in 1usize..5,
        delay in 0u32..3,
    ) {
        let mut cfg = preset(PRESET_NAMES[which]).unwrap();
        cfg.scheme = scheme;
        cfg.rng_seed = seed;
        cfg.queue_depth = depth;
        cfg.sideband_delay = delay;
        cfg.warmup_cycles = 0;
        cfg.sim_cycles = 5_000;
        cfg.window_cycles = 1_000;
        cfg.weights = [("CPU", 2), ("MPEG", 4), ("VID", 1), ("GEN", 1)].iter().map(|(n, w)| (n.to_string(), *w)).collect();
        for (init, e) in cfg.initiators.iter_mut().zip(&epochs) {
            init.qos.epoch_size = *e;
        }
        let peak_window = cfg.target.peak_bytes_per_sec() * cfg.window_cycles as f64 / (cfg.target.clock_mhz * 1e6);
        let mut sim = Simulation::new(cfg).unwrap().record_grants();
        while !sim.is_finished() {
            sim.step();
        }
        prop_assert_eq!(sim.requests_generated(), sim.requests_serviced() + sim.requests_in_flight());

        let mut last_seq: HashMap<usize, u64> = HashMap::new();
        for g in sim.grants().unwrap() {
            if let Some(prev) = last_seq.insert(g.thread, g.seq_no) {
                prop_assert!(g.seq_no > prev, "thread {} out of order", g.thread);
            }
        }

        let mut beat_cycles: Vec<u64> = (0..4).flat_map(|i| sim.ledger().beats(i).iter().map(|b| b.0)).collect();
        let n = beat_cycles.len();
        beat_cycles.sort_unstable();
        beat_cycles.dedup();
        prop_assert_eq!(beat_cycles.len(), n, "two beats in one cycle");

        let report = sim.report();
        let mut per_window: HashMap<u64, u64> = HashMap::new();
        for w in &report.windows {
            *per_window.entry(w.window.index).or_default() += w.window.bytes;
        }
        for bytes in per_window.values() {
            prop_assert!(*bytes as f64 <= peak_window);
        }
    }

    #[test]
    fn flat_and_tree_grant_identically_shaped_shares(epochs in prop::collection::vec(1u64..6, 2..5)) {
        let shares = |topology| {
            let mut cfg = saturated(Scheme::Qos, &epochs, 1, topology);
            cfg.sim_cycles = 20_000;
            let mut sim = Simulation::new(cfg).unwrap();
            while !sim.is_finished() {
                sim.step();
            }
            let g = sim.ledger().grants().to_vec();
            let total: u64 = g.iter().sum();
            g.into_iter().map(|x| x as f64 / total as f64).collect::<Vec<_>>()
        };
        let (flat, tree) = (shares(Topology::Flat), shares(Topology::Tree));
        for (f, t) in flat.iter().zip(&tree) {
            prop_assert!((f - t).abs() <= 0.02 * f);
        }
    }
}
