// SPDX-License-Identifier: Apache-2.0

//! Request network: epoch marker insertion at the boundary, arbitration
//! nodes with per-thread FIFOs, and the per-thread queues in front of the
//! target edge.

use std::collections::{HashMap, VecDeque};

use crate::arbiters::{fixed_priority_pick, BranchView, FixedWeight, LeveledEpochArbiter, RoundRobin};
use crate::model::{Cycle, QosLevel, Request, ScenarioConfig, Scheme};

/// Whether request `seq_no` of an initiator with epoch size `epoch_size`
/// opens a new epoch. Epoch 0 holds requests `0..epoch_size`.
pub fn insert_marker(seq_no: u64, epoch_size: u64) -> bool {
    seq_no > 0 && seq_no.is_multiple_of(epoch_size.max(1))
}

/// Numbers an initiator's requests and stamps epoch markers on them.
#[derive(Debug, Clone)]
pub struct MarkerInserter {
    epoch_size: u64,
    next_seq: u64,
}

impl MarkerInserter {
    pub fn new(epoch_size: u64) -> Self {
        Self { epoch_size: epoch_size.max(1), next_seq: 0 }
    }

    pub fn stamp(&mut self, req: &mut Request) {
        req.seq_no = self.next_seq;
        req.epoch_marker = insert_marker(self.next_seq, self.epoch_size);
        self.next_seq += 1;
    }
}

#[derive(Debug, Clone)]
pub enum NodePolicy {
    /// Branch ids, highest priority first.
    FixedPriority(Vec<usize>),
    RoundRobin(RoundRobin),
    FixedWeight(FixedWeight),
    Leveled(LeveledEpochArbiter),
}

impl NodePolicy {
    fn pick(&mut self, views: &[BranchView]) -> Option<usize> {
        match self {
            NodePolicy::FixedPriority(order) => {
                fixed_priority_pick(views, order).expect("node priority order covers its branches")
            }
            NodePolicy::RoundRobin(rr) => rr.pick(views),
            NodePolicy::FixedWeight(fw) => fw.pick(views),
            NodePolicy::Leveled(arb) => arb.pick(views),
        }
    }

    fn advance(&mut self, views: &[BranchView]) {
        if let NodePolicy::Leveled(arb) = self {
            arb.advance(views);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Downstream {
    Node(usize),
    Edge,
}

/// An arbitration point. Branch `b` is the FIFO of thread `threads[b]`.
#[derive(Debug, Clone)]
pub struct FabricNode {
    pub name: String,
    threads: Vec<usize>,
    queues: Vec<VecDeque<Request>>,
    policy: NodePolicy,
    parent: Downstream,
}

impl FabricNode {
    pub fn threads(&self) -> &[usize] {
        &self.threads
    }

    pub fn parent(&self) -> Downstream {
        self.parent
    }

    pub fn queue(&self, branch: usize) -> &VecDeque<Request> {
        &self.queues[branch]
    }

    pub fn branch_of(&self, thread: usize) -> Option<usize> {
        self.threads.iter().position(|&t| t == thread)
    }

    pub fn occupancy(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }
}

/// One request moved by one node during a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transfer {
    pub node: usize,
    pub thread: usize,
    pub seq_no: u64,
    pub to: Downstream,
}

#[derive(Debug, Clone)]
pub struct Fabric {
    nodes: Vec<FabricNode>,
    /// Root first, then breadth-first towards the leaves.
    order: Vec<usize>,
    /// Leaf node of each thread.
    leaf_of: Vec<usize>,
    sources: Vec<VecDeque<Request>>,
    edge: Vec<VecDeque<Request>>,
    markers: Vec<MarkerInserter>,
    queue_depth: usize,
}

impl Fabric {
    /// Builds the tree described by a validated scenario.
    pub fn from_config(config: &ScenarioConfig) -> Self {
        let n_threads = config.initiators.len();
        let node_idx: HashMap<&str, usize> =
            config.nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();

        let mut parent = vec![Downstream::Edge; config.nodes.len()];
        let mut leaf_of = vec![usize::MAX; n_threads];
        for (i, node) in config.nodes.iter().enumerate() {
            for input in &node.inputs {
                if let Some(&child) = node_idx.get(input.as_str()) {
                    parent[child] = Downstream::Node(i);
                } else if let Some(t) = config.initiator_index(input) {
                    leaf_of[t] = i;
                }
            }
        }

        let mut threads: Vec<Vec<usize>> = vec![Vec::new(); config.nodes.len()];
        for (t, &leaf) in leaf_of.iter().enumerate() {
            let mut cur = Downstream::Node(leaf);
            while let Downstream::Node(n) = cur {
                threads[n].push(t);
                cur = parent[n];
            }
        }
        for ts in &mut threads {
            ts.sort_unstable();
        }

        let priority: Vec<usize> =
            config.priority_order.iter().filter_map(|name| config.initiator_index(name)).collect();
        let nodes = config
            .nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                let ts = threads[i].clone();
                let policy = match config.scheme {
                    Scheme::FixedPriority => NodePolicy::FixedPriority(
                        priority.iter().filter_map(|t| ts.iter().position(|x| x == t)).collect(),
                    ),
                    Scheme::RoundRobin | Scheme::Tdma => NodePolicy::RoundRobin(RoundRobin::new()),
                    Scheme::FixedWeight => NodePolicy::FixedWeight(FixedWeight::new(
                        ts.iter()
                            .map(|&t| config.weights.get(&config.initiators[t].name).copied().unwrap_or(1))
                            .collect(),
                    )),
                    Scheme::Qos => NodePolicy::Leveled(LeveledEpochArbiter::new(ts.len())),
                };
                FabricNode {
                    name: node.name.clone(),
                    queues: vec![VecDeque::new(); ts.len()],
                    threads: ts,
                    policy,
                    parent: parent[i],
                }
            })
            .collect();

        let root = parent.iter().position(|p| *p == Downstream::Edge).expect("validated: one root");
        let mut order = vec![root];
        let mut i = 0;
        while i < order.len() {
            let n = order[i];
            for (c, p) in parent.iter().enumerate() {
                if *p == Downstream::Node(n) {
                    order.push(c);
                }
            }
            i += 1;
        }

        Self {
            nodes,
            order,
            leaf_of,
            sources: vec![VecDeque::new(); n_threads],
            edge: vec![VecDeque::new(); n_threads],
            markers: config.initiators.iter().map(|i| MarkerInserter::new(i.qos.epoch_size)).collect(),
            queue_depth: config.queue_depth,
        }
    }

    pub fn nodes(&self) -> &[FabricNode] {
        &self.nodes
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Arbitration nodes between an initiator and the edge, leaf first.
    pub fn path(&self, thread: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = Downstream::Node(self.leaf_of[thread]);
        while let Downstream::Node(n) = cur {
            out.push(n);
            cur = self.nodes[n].parent;
        }
        out
    }

    /// Accepts a freshly generated request at the boundary, stamping its
    /// sequence number and epoch marker.
    pub fn inject(&mut self, mut req: Request) {
        self.markers[req.initiator].stamp(&mut req);
        self.sources[req.thread].push_back(req);
    }

    /// Requests generated but not yet accepted by their leaf node.
    pub fn source_backlog(&self, thread: usize) -> usize {
        self.sources[thread].len()
    }

    /// Moves requests from the unbounded source queues into leaf FIFOs.
    pub fn admit(&mut self) {
        for t in 0..self.sources.len() {
            let leaf = self.leaf_of[t];
            let branch = self.nodes[leaf].branch_of(t).expect("leaf carries its thread");
            while self.nodes[leaf].queues[branch].len() < self.queue_depth {
                match self.sources[t].pop_front() {
                    Some(req) => self.nodes[leaf].queues[branch].push_back(req),
                    None => break,
                }
            }
        }
    }

    pub fn edge_queue(&self, thread: usize) -> &VecDeque<Request> {
        &self.edge[thread]
    }

    /// `Some(marked)` for threads with a request waiting at the edge.
    pub fn edge_heads(&self) -> Vec<Option<bool>> {
        self.edge.iter().map(|q| q.front().map(|r| r.epoch_marker)).collect()
    }

    pub fn pop_edge(&mut self, thread: usize) -> Option<Request> {
        self.edge[thread].pop_front()
    }

    fn has_space(&self, to: Downstream, thread: usize) -> bool {
        match to {
            Downstream::Edge => self.edge[thread].len() < self.queue_depth,
            Downstream::Node(p) => {
                let b = self.nodes[p].branch_of(thread).expect("parent carries child's threads");
                self.nodes[p].queues[b].len() < self.queue_depth
            }
        }
    }

    fn views(&self, node: usize, levels: &[QosLevel]) -> Vec<BranchView> {
        let n = &self.nodes[node];
        n.threads
            .iter()
            .zip(&n.queues)
            .map(|(&t, q)| match q.front() {
                Some(head) if self.has_space(n.parent, t) => BranchView {
                    has_pending: true,
                    head_marked: head.epoch_marker,
                    level: levels.get(t).copied().unwrap_or(QosLevel::BestEffort),
                },
                _ => BranchView::IDLE,
            })
            .collect()
    }

    /// One arbitration decision at one node; forwards at most one request.
    pub fn node_step(&mut self, node: usize, cycle: Cycle, levels: &[QosLevel]) -> Option<Transfer> {
        let views = self.views(node, levels);
        let branch = self.nodes[node].policy.pick(&views)?;
        let to = self.nodes[node].parent;
        let mut req = self.nodes[node].queues[branch].pop_front().expect("picked branch is pending");
        req.hops += 1;
        let transfer = Transfer { node, thread: req.thread, seq_no: req.seq_no, to };
        match to {
            Downstream::Edge => {
                req.edge_arrival = Some(cycle);
                self.edge[req.thread].push_back(req);
            }
            Downstream::Node(p) => {
                let b = self.nodes[p].branch_of(req.thread).expect("parent carries child's threads");
                self.nodes[p].queues[b].push_back(req);
            }
        }
        Some(transfer)
    }

    /// Steps every node root first, so space freed near the root is visible
    /// to its children in the same cycle while a request still needs one
    /// cycle per hop.
    pub fn step(&mut self, cycle: Cycle, levels: &[QosLevel]) -> Vec<Transfer> {
        let order = self.order.clone();
        order.into_iter().filter_map(|n| self.node_step(n, cycle, levels)).collect()
    }

    /// Runs the epoch-advance check at every node.
    pub fn advance(&mut self, levels: &[QosLevel]) {
        for n in 0..self.nodes.len() {
            let views = self.views(n, levels);
            self.nodes[n].policy.advance(&views);
        }
    }

    /// Requests inside the fabric, including source and edge queues.
    pub fn in_flight(&self) -> usize {
        self.sources.iter().map(VecDeque::len).sum::<usize>()
            + self.nodes.iter().map(FabricNode::occupancy).sum::<usize>()
            + self.edge.iter().map(VecDeque::len).sum::<usize>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Kind;
    use crate::presets;

    #[test]
    fn marker_rule() {
        let marked: Vec<u64> = (0..7).filter(|&s| insert_marker(s, 3)).collect();
        assert_eq!(marked, vec![3, 6]);
        assert!((1..20).all(|s| insert_marker(s, 1)));
        assert!(!insert_marker(0, 1));
        assert!((0..10_000).all(|s| !insert_marker(s, 1_000_000)));
    }

    #[test]
    fn preset_topology_paths() {
        let cfg = presets::preset("qos-low").unwrap();
        let fabric = Fabric::from_config(&cfg);
        let cpu = cfg.initiator_index("CPU").unwrap();
        let vid = cfg.initiator_index("VID").unwrap();
        let node1 = fabric.node_index("node1").unwrap();
        let node2 = fabric.node_index("node2").unwrap();
        assert_eq!(fabric.path(cpu), vec![node2]);
        assert_eq!(fabric.path(vid), vec![node1, node2]);
        assert_eq!(fabric.nodes()[node2].threads().len(), 4);
    }

    fn drive(fabric: &mut Fabric, thread: usize, cycles: u64) -> Vec<(Cycle, Transfer)> {
        let levels = vec![QosLevel::BestEffort; 4];
        let mut log = Vec::new();
        fabric.inject(Request::new(thread, Kind::Read, 4, 0));
        fabric.admit();
        for c in 0..cycles {
            for t in fabric.step(c, &levels) {
                log.push((c, t));
            }
            fabric.advance(&levels);
        }
        log
    }

    #[test]
    fn hop_latency_follows_the_tree() {
        let cfg = presets::preset("qos-low").unwrap();
        let cpu = cfg.initiator_index("CPU").unwrap();
        let vid = cfg.initiator_index("VID").unwrap();

        let mut fabric = Fabric::from_config(&cfg);
        let log = drive(&mut fabric, cpu, 5);
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].0, 0);
        assert_eq!(log[0].1.to, Downstream::Edge);
        assert_eq!(fabric.edge_queue(cpu)[0].hops, 1);

        let mut fabric = Fabric::from_config(&cfg);
        let log = drive(&mut fabric, vid, 5);
        assert_eq!(log.iter().map(|(c, _)| *c).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(fabric.edge_queue(vid)[0].hops, 2);
        assert_eq!(fabric.edge_queue(vid)[0].edge_arrival, Some(1));
    }

    #[test]
    fn full_downstream_blocks_forwarding() {
        let mut cfg = presets::preset("qos-low").unwrap();
        cfg.queue_depth = 1;
        let cpu = cfg.initiator_index("CPU").unwrap();
        let mut fabric = Fabric::from_config(&cfg);
        let levels = vec![QosLevel::BestEffort; 4];
        fabric.inject(Request::new(cpu, Kind::Read, 4, 0));
        fabric.inject(Request::new(cpu, Kind::Read, 4, 0));
        fabric.admit();
        assert_eq!(fabric.step(0, &levels).len(), 1);
        fabric.admit();
        assert!(fabric.step(1, &levels).is_empty(), "edge queue of depth 1 is full");
        assert_eq!(fabric.in_flight(), 2);
        fabric.pop_edge(cpu);
        assert_eq!(fabric.step(2, &levels).len(), 1);
    }

    #[test]
    fn interior_node_prefers_higher_sideband_level() {
        let cfg = presets::preset("qos-low").unwrap();
        let vid = cfg.initiator_index("VID").unwrap();
        let gen = cfg.initiator_index("GEN").unwrap();
        let mut fabric = Fabric::from_config(&cfg);
        fabric.inject(Request::new(gen, Kind::Read, 4, 0));
        fabric.inject(Request::new(vid, Kind::Read, 8, 0));
        fabric.admit();
        let mut levels = vec![QosLevel::BestEffort; 4];
        levels[vid] = QosLevel::Bandwidth;
        let node1 = fabric.node_index("node1").unwrap();
        let t = fabric.node_step(node1, 0, &levels).unwrap();
        assert_eq!(t.thread, vid);
    }
}
