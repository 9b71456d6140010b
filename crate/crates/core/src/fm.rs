//! Two-phase placement solver: a DFS-ordered greedy packing pass followed by
//! Fiduccia-Mattheyses style refinement.
//!
//! Refinement runs in passes. Within a pass every node may move once
//! (locking); candidate moves live in a max-heap keyed by gain, the drop in
//! crossing traffic the move would cause right now. The pass tentatively
//! applies the best feasible move until nothing is left, then commits the
//! prefix of the move sequence with the highest cumulative gain and rolls the
//! rest back. Passes repeat while they commit positive gain.
//!
//! Traffic is symmetrized (c_ij + c_ji) for gain purposes, which makes the
//! gain of a move equal to the exact cost delta of applying it.

use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::placement::{
    attachment, complete_with_restarts, is_feasible, move_feasible, FillRule, Placement,
    ServerPool, PLACEMENT_SEARCH_BUDGET,
};
use crate::sfc::InstanceGraph;

/// Gains this close to zero do not justify another pass.
pub const GAIN_EPS: f64 = 1e-9;

/// Shuffled-order retries the deployment spends after its own visit order
/// dead-ends within budget.
pub const DEPLOY_RESTARTS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("node {node} fits no server within the port limit {port_limit}")]
    Infeasible { node: usize, port_limit: usize },
    #[error("node {node} is not placed")]
    Unplaced { node: usize },
    #[error("node {node} already sits on server {server}")]
    SameServer { node: usize, server: usize },
}

/// Candidate move in the pass heap. `stamp` implements lazy invalidation:
/// when a node's neighborhood changes its generation is bumped and fresh
/// entries are pushed; stale pops are discarded.
#[derive(Debug, Clone)]
pub struct GainEntry {
    pub gain: f64,
    pub node: usize,
    pub target: usize,
    pub stamp: u64,
}

impl PartialEq for GainEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for GainEntry {}

impl Ord for GainEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
            .then_with(|| other.target.cmp(&self.target))
            .then_with(|| self.stamp.cmp(&other.stamp))
    }
}

impl PartialOrd for GainEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// One tentative move inside a pass; `seq` is 1-based within the pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MoveRecord {
    pub seq: usize,
    pub node: usize,
    pub from: usize,
    pub to: usize,
    pub gain: f64,
}

/// One traced move with its pass number and whether it survived the commit.
#[derive(Debug, Clone, PartialEq)]
pub struct MoveTrace {
    pub pass: u32,
    pub seq: usize,
    pub node: usize,
    pub from: usize,
    pub to: usize,
    pub gain: f64,
    pub committed: bool,
}

/// Result of one refinement pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PassOutcome {
    /// Best cumulative prefix gain (0 when no tentative move was possible).
    pub gain: f64,
    /// Length of the committed prefix; 0 means the pass changed nothing.
    pub committed: usize,
    /// The whole tentative sequence, committed prefix first.
    pub tentative: Vec<MoveRecord>,
}

impl PassOutcome {
    pub fn committed_moves(&self) -> &[MoveRecord] {
        &self.tentative[..self.committed]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Iterations including the greedy deployment; 1 means refinement found
    /// nothing to improve.
    pub iterations: u32,
    /// Committed gain of each improving pass, in order.
    pub pass_gains: Vec<f64>,
    /// Committed move count of each improving pass.
    pub pass_moves: Vec<usize>,
    pub wall: Duration,
}

/// Deterministic node visit order: preorder DFS from every node with external
/// ingress (ascending id), successors ascending, then any unreached node
/// ascending. Keeps chain neighbors adjacent so the greedy packer co-locates
/// them when capacity allows.
pub fn dfs_order(ig: &InstanceGraph) -> Vec<usize> {
    let n = ig.node_count();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = Vec::new();
    let mut visit_from = |root: usize, visited: &mut Vec<bool>, order: &mut Vec<usize>| {
        if visited[root] {
            return;
        }
        stack.push(root);
        while let Some(u) = stack.pop() {
            if visited[u] {
                continue;
            }
            visited[u] = true;
            order.push(u);
            for &(v, _) in ig.out_neighbors(u).iter().rev() {
                if !visited[v] {
                    stack.push(v);
                }
            }
        }
    };
    for root in (0..n).filter(|&i| ig.ingress(i) > 0.0) {
        visit_from(root, &mut visited, &mut order);
    }
    for root in 0..n {
        visit_from(root, &mut visited, &mut order);
    }
    order
}

/// Greedy first phase: place nodes in DFS order, each on the feasible open
/// server with the least remaining compute (ties to the earliest-opened);
/// open a new server only when nothing fits and ports remain.
pub fn initial_deployment(
    ig: &InstanceGraph,
    pool: &ServerPool,
) -> Result<Placement, SolveError> {
    // The greedy rule (fullest feasible server, FCFS ties, fresh when none
    // qualifies) is the search's first branch, so it decides the placement
    // whenever it can finish. Heavily loaded nodes can dead-end the greedy
    // even though co-locating completions exist; the bounded backtracking
    // and order restarts then find one instead of reporting a false
    // infeasibility.
    complete_with_restarts(
        ig,
        pool,
        &dfs_order(ig),
        FillRule::MostLoaded,
        PLACEMENT_SEARCH_BUDGET,
        DEPLOY_RESTARTS,
    )
    .map_err(|r| SolveError::Infeasible { node: r.node, port_limit: pool.port_limit })
}

/// Gain of moving `node` to `target`: symmetrized traffic toward the target's
/// residents minus traffic toward co-located nodes. Applying the move drops
/// the cost objective by exactly this amount (times the unit link cost).
/// `target == server_count()` rates a fresh server.
pub fn move_gain(
    node: usize,
    target: usize,
    placement: &Placement,
    ig: &InstanceGraph,
) -> Result<f64, SolveError> {
    let cur = placement.server_of(node).ok_or(SolveError::Unplaced { node })?;
    if target == cur {
        return Err(SolveError::SameServer { node, server: cur });
    }
    assert!(target <= placement.server_count(), "server {target} is not open");
    let att = attachment(placement, ig, node);
    let external = if target < placement.server_count() { att.per_server[target] } else { 0.0 };
    Ok(external - att.per_server[cur])
}

fn push_candidates(
    heap: &mut BinaryHeap<GainEntry>,
    placement: &Placement,
    ig: &InstanceGraph,
    pool: &ServerPool,
    node: usize,
    stamp: u64,
) {
    let cur = placement.server_of(node).expect("pass runs on complete placements");
    let att = attachment(placement, ig, node);
    let internal = att.per_server[cur];
    for target in 0..placement.server_count() {
        if target != cur {
            heap.push(GainEntry { gain: att.per_server[target] - internal, node, target, stamp });
        }
    }
    // A fresh server is a candidate only while every open server is occupied
    // (an empty one already offers the same gain) and ports remain.
    if placement.server_count() < pool.port_limit
        && (0..placement.server_count()).all(|s| placement.occupancy(s) > 0)
    {
        heap.push(GainEntry { gain: -internal, node, target: placement.server_count(), stamp });
    }
}

/// One refinement pass over a complete feasible placement. Returns the best
/// prefix gain and leaves the placement at that prefix; with no positive
/// prefix the placement is restored bit-for-bit.
pub fn refine_pass(
    placement: &mut Placement,
    ig: &InstanceGraph,
    pool: &ServerPool,
) -> PassOutcome {
    let n = ig.node_count();
    let snapshot = placement.clone();
    let mut locked = vec![false; n];
    let mut generation = vec![0u64; n];
    let mut heap: BinaryHeap<GainEntry> = BinaryHeap::new();
    let mut tentative: Vec<MoveRecord> = Vec::new();

    for node in 0..n {
        push_candidates(&mut heap, placement, ig, pool, node, 0);
    }

    loop {
        let mut stash: Vec<GainEntry> = Vec::new();
        let mut chosen: Option<GainEntry> = None;
        while let Some(e) = heap.pop() {
            if locked[e.node] || e.stamp != generation[e.node] {
                continue;
            }
            if move_feasible(placement, ig, pool, e.node, e.target) {
                chosen = Some(e);
                break;
            }
            // Currently blocked; later moves may free the target.
            stash.push(e);
        }
        heap.extend(stash);
        let Some(e) = chosen else { break };

        let from = placement.server_of(e.node).unwrap();
        let had_servers = placement.server_count();
        placement.relocate(e.node, e.target, ig);
        locked[e.node] = true;
        tentative.push(MoveRecord {
            seq: tentative.len() + 1,
            node: e.node,
            from,
            to: e.target,
            gain: e.gain,
        });

        for &(nb, _) in ig.sym_neighbors(e.node) {
            if !locked[nb] {
                generation[nb] += 1;
                push_candidates(&mut heap, placement, ig, pool, nb, generation[nb]);
            }
        }
        // Opening a server may enable a further fresh candidate for everyone.
        if placement.server_count() > had_servers
            && placement.server_count() < pool.port_limit
            && (0..placement.server_count()).all(|s| placement.occupancy(s) > 0)
        {
            for x in 0..n {
                if !locked[x] {
                    let att = attachment(placement, ig, x);
                    let internal = att.per_server[placement.server_of(x).unwrap()];
                    heap.push(GainEntry {
                        gain: -internal,
                        node: x,
                        target: placement.server_count(),
                        stamp: generation[x],
                    });
                }
            }
        }
    }

    let mut best_gain = 0.0;
    let mut best_len = 0;
    let mut acc = 0.0;
    let mut best_any = f64::NEG_INFINITY;
    for (i, mv) in tentative.iter().enumerate() {
        acc += mv.gain;
        best_any = best_any.max(acc);
        if acc > best_gain + GAIN_EPS {
            best_gain = acc;
            best_len = i + 1;
        }
    }

    *placement = snapshot;
    if best_len > 0 {
        for mv in &tentative[..best_len] {
            placement.relocate(mv.node, mv.to, ig);
        }
        PassOutcome { gain: best_gain, committed: best_len, tentative }
    } else {
        let gain = if tentative.is_empty() { 0.0 } else { best_any };
        PassOutcome { gain, committed: 0, tentative }
    }
}

/// Full solve: greedy deployment, then refinement passes until one stops
/// improving. `iterations` counts the deployment as 1.
pub fn solve(ig: &InstanceGraph, pool: &ServerPool) -> Result<(Placement, SolveStats), SolveError> {
    solve_traced(ig, pool).map(|(p, s, _)| (p, s))
}

/// [`solve`] plus the complete move trace of every pass, including moves that
/// were tried and rolled back.
pub fn solve_traced(
    ig: &InstanceGraph,
    pool: &ServerPool,
) -> Result<(Placement, SolveStats, Vec<MoveTrace>), SolveError> {
    let start = Instant::now();
    let mut placement = initial_deployment(ig, pool)?;
    let mut stats = SolveStats { iterations: 1, ..SolveStats::default() };
    let mut traces = Vec::new();
    for pass in 1..=10_000u32 {
        let outcome = refine_pass(&mut placement, ig, pool);
        traces.extend(outcome.tentative.iter().map(|mv| MoveTrace {
            pass,
            seq: mv.seq,
            node: mv.node,
            from: mv.from,
            to: mv.to,
            gain: mv.gain,
            committed: mv.seq <= outcome.committed,
        }));
        if outcome.committed == 0 || outcome.gain <= GAIN_EPS {
            break;
        }
        stats.iterations += 1;
        stats.pass_gains.push(outcome.gain);
        stats.pass_moves.push(outcome.committed);
    }
    stats.wall = start.elapsed();
    debug_assert!(is_feasible(&placement, ig, pool).feasible);
    Ok((placement, stats, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::evaluate_cost;
    use crate::sfc::{Instance, InstanceGraph};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    /// Line chain over distinct NFs with one instance each.
    fn chain(weights: &[f64], demands: &[f64], ingress: f64) -> InstanceGraph {
        let n = demands.len();
        assert_eq!(weights.len() + 1, n);
        let nodes =
            demands.iter().enumerate().map(|(i, &d)| Instance { nf: i as u32 + 1, demand: d });
        let mut traffic = BTreeMap::new();
        let mut nf_edges = BTreeMap::new();
        for (i, &w) in weights.iter().enumerate() {
            traffic.insert((i, i + 1), w);
            nf_edges.insert((i as u32 + 1, i as u32 + 2), w);
        }
        let mut ins = vec![0.0; n];
        ins[0] = ingress;
        InstanceGraph::from_parts(nodes.collect(), traffic, nf_edges, ins, vec![0.0; n])
    }

    fn pool(compute: f64, ports: usize) -> ServerPool {
        ServerPool::new(compute, 1000.0, ports)
    }

    #[test]
    fn deployment_splits_when_nothing_fits_together() {
        let ig = chain(&[10.0, 10.0], &[600.0, 600.0, 600.0], 1.0);
        let p = initial_deployment(&ig, &pool(1000.0, 3)).unwrap();
        assert_eq!(p.used_servers(), 3);
        for s in 0..3 {
            assert_eq!(p.occupancy(s), 1);
        }
    }

    #[test]
    fn deployment_packs_one_server_when_possible() {
        let ig = chain(&[10.0, 10.0], &[300.0, 300.0, 300.0], 1.0);
        let p = initial_deployment(&ig, &pool(1000.0, 3)).unwrap();
        assert_eq!(p.used_servers(), 1);
        assert_eq!(p.compute_used(0), 900.0);
    }

    #[test]
    fn deployment_single_node() {
        let ig = chain(&[], &[500.0], 1.0);
        let p = initial_deployment(&ig, &pool(1000.0, 1)).unwrap();
        assert_eq!(p.server_of(0), Some(0));
    }

    #[test]
    fn deployment_fails_when_ports_exhausted() {
        let ig = chain(&[10.0], &[600.0, 600.0], 1.0);
        let err = initial_deployment(&ig, &pool(1000.0, 1)).unwrap_err();
        assert_eq!(err, SolveError::Infeasible { node: 1, port_limit: 1 });
    }

    #[test]
    fn gain_measures_crossing_difference() {
        let ig = chain(&[10.0, 30.0], &[100.0; 3], 0.0);
        let p = Placement::from_assignment(&[0, 0, 1], &ig);
        assert_eq!(move_gain(1, 1, &p, &ig).unwrap(), 20.0);
        assert_eq!(
            move_gain(1, 0, &p, &ig),
            Err(SolveError::SameServer { node: 1, server: 0 })
        );
    }

    #[test]
    fn gain_zero_for_isolated_node() {
        let nodes = vec![Instance { nf: 1, demand: 10.0 }, Instance { nf: 2, demand: 10.0 }];
        let ig = InstanceGraph::from_parts(
            nodes,
            BTreeMap::new(),
            BTreeMap::new(),
            vec![0.0; 2],
            vec![0.0; 2],
        );
        let p = Placement::from_assignment(&[0, 1], &ig);
        assert_eq!(move_gain(0, 1, &p, &ig).unwrap(), 0.0);
        assert_eq!(move_gain(0, 2, &p, &ig).unwrap(), 0.0);
    }

    #[test]
    fn gain_negative_when_leaving_only_neighbor() {
        let ig = chain(&[40.0], &[100.0, 100.0], 0.0);
        let mut p = Placement::from_assignment(&[0, 0], &ig);
        p.open_server();
        assert_eq!(move_gain(0, 1, &p, &ig).unwrap(), -40.0);
        assert_eq!(move_gain(0, 2, &p, &ig).unwrap(), -40.0);
    }

    #[test]
    fn pass_colocates_light_chain() {
        let ig = chain(&[10.0, 30.0], &[100.0; 3], 0.0);
        let mut p = Placement::from_assignment(&[0, 0, 1], &ig);
        let before = evaluate_cost(&p, &ig, &pool(1000.0, 3)).unwrap().total_cost;
        assert_eq!(before, 30.0);
        let outcome = refine_pass(&mut p, &ig, &pool(1000.0, 3));
        let after = evaluate_cost(&p, &ig, &pool(1000.0, 3)).unwrap().total_cost;
        assert!(outcome.gain >= 20.0, "gain {}", outcome.gain);
        assert!(after <= 10.0, "cost {after}");
        assert!((before - after - outcome.gain).abs() < 1e-9);
    }

    #[test]
    fn pass_fixpoint_on_optimal() {
        let ig = chain(&[10.0, 30.0], &[100.0; 3], 0.0);
        let mut p = Placement::from_assignment(&[0, 0, 0], &ig);
        let outcome = refine_pass(&mut p, &ig, &pool(1000.0, 3));
        assert_eq!(outcome.committed, 0);
        assert!(outcome.gain <= 0.0);
        assert_eq!(p, Placement::from_assignment(&[0, 0, 0], &ig));
    }

    /// Two triangles bridged by a weight-1 edge, one server each.
    fn bridged_cliques(demands: [f64; 6]) -> InstanceGraph {
        let nodes: Vec<Instance> =
            (0..6).map(|i| Instance { nf: i as u32 + 1, demand: demands[i] }).collect();
        let mut traffic = BTreeMap::new();
        let mut nf_edges = BTreeMap::new();
        for (a, b) in [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)] {
            traffic.insert((a, b), 100.0);
            nf_edges.insert((a as u32 + 1, b as u32 + 1), 100.0);
        }
        traffic.insert((2, 3), 1.0);
        nf_edges.insert((3, 4), 1.0);
        InstanceGraph::from_parts(nodes, traffic, nf_edges, vec![0.0; 6], vec![0.0; 6])
    }

    #[test]
    fn pass_rolls_back_when_capacity_blocks_everything() {
        let ig = bridged_cliques([333.0, 333.0, 334.0, 333.0, 333.0, 334.0]);
        let tight = pool(1000.0, 2);
        let mut p = Placement::from_assignment(&[0, 0, 0, 1, 1, 1], &ig);
        let snapshot = p.clone();
        let outcome = refine_pass(&mut p, &ig, &tight);
        assert_eq!(outcome.committed, 0);
        assert!(outcome.gain <= 0.0);
        assert!(outcome.tentative.is_empty());
        assert_eq!(p, snapshot);
    }

    #[test]
    fn pass_rolls_back_negative_tentative_moves() {
        let ig = bridged_cliques([333.0, 333.0, 334.0, 333.0, 333.0, 334.0]);
        let roomy = pool(1400.0, 2);
        let mut p = Placement::from_assignment(&[0, 0, 0, 1, 1, 1], &ig);
        let snapshot = p.clone();
        let outcome = refine_pass(&mut p, &ig, &roomy);
        assert_eq!(outcome.committed, 0);
        assert!(!outcome.tentative.is_empty(), "some moves are feasible here");
        assert!(outcome.gain <= 0.0, "no prefix wins traffic back");
        assert_eq!(p, snapshot);
    }

    #[test]
    fn solve_reaches_zero_on_single_server_instance() {
        let ig = chain(&[10.0, 30.0], &[100.0; 3], 5.0);
        let (p, stats) = solve(&ig, &pool(1000.0, 3)).unwrap();
        assert_eq!(evaluate_cost(&p, &ig, &pool(1000.0, 3)).unwrap().total_cost, 0.0);
        assert!(stats.iterations <= 2, "iterations {}", stats.iterations);
    }

    #[test]
    fn solve_empty_graph() {
        let ig = InstanceGraph::from_parts(
            Vec::new(),
            BTreeMap::new(),
            BTreeMap::new(),
            Vec::new(),
            Vec::new(),
        );
        let (p, stats) = solve(&ig, &pool(1000.0, 1)).unwrap();
        assert_eq!(p.node_count(), 0);
        assert_eq!(stats.iterations, 1);
        assert_eq!(evaluate_cost(&p, &ig, &pool(1000.0, 1)).unwrap().total_cost, 0.0);
    }

    #[test]
    fn dfs_follows_chain_from_ingress() {
        let ig = chain(&[10.0, 10.0, 10.0], &[100.0; 4], 7.0);
        assert_eq!(dfs_order(&ig), vec![0, 1, 2, 3]);
    }

    #[test]
    fn trace_marks_committed_prefix() {
        let ig = chain(&[10.0, 30.0], &[100.0; 3], 0.0);
        // force a suboptimal start by solving a spread-out placement manually
        let mut p = Placement::from_assignment(&[0, 0, 1], &ig);
        let outcome = refine_pass(&mut p, &ig, &pool(1000.0, 3));
        assert!(outcome.committed >= 1);
        for mv in outcome.committed_moves() {
            assert!(mv.seq <= outcome.committed);
        }
        let nodes: Vec<usize> = outcome.tentative.iter().map(|m| m.node).collect();
        let mut dedup = nodes.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), nodes.len(), "a pass moves each node at most once");
    }

    fn random_graph() -> impl Strategy<Value = InstanceGraph> {
        (2..12usize, proptest::collection::vec(1..400u32, 30), 0..3u8).prop_map(
            |(n, weights, _)| {
                let nodes: Vec<Instance> =
                    (0..n).map(|i| Instance { nf: i as u32 + 1, demand: 100.0 }).collect();
                let mut traffic = BTreeMap::new();
                let mut nf_edges = BTreeMap::new();
                let mut wi = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let w = weights[(wi) % weights.len()] as f64;
                        wi += 1;
                        if w as u32 % 3 == 0 {
                            continue; // leave some pairs unconnected
                        }
                        traffic.insert((i, j), w);
                        nf_edges.insert((i as u32 + 1, j as u32 + 1), w);
                    }
                }
                InstanceGraph::from_parts(nodes, traffic, nf_edges, vec![0.0; n], vec![0.0; n])
            },
        )
    }

    proptest! {
        #[test]
        fn gain_equals_cost_delta(
            ig in random_graph(),
            assign_seed in proptest::collection::vec(0..4usize, 12),
            node_pick in 0..12usize,
            target_pick in 0..5usize,
        ) {
            let n = ig.node_count();
            let assign: Vec<usize> = (0..n).map(|i| assign_seed[i % assign_seed.len()]).collect();
            let p = Placement::from_assignment(&assign, &ig);
            let open = ServerPool::new(1e9, 1e9, 64);
            let node = node_pick % n;
            let target = target_pick.min(p.server_count());
            if p.server_of(node) == Some(target) {
                return Ok(());
            }
            let gain = move_gain(node, target, &p, &ig).unwrap();
            let before = evaluate_cost(&p, &ig, &open).unwrap().total_cost;
            let mut moved = p.clone();
            moved.relocate(node, target, &ig);
            let after = evaluate_cost(&moved, &ig, &open).unwrap().total_cost;
            prop_assert!(
                ((before - after) - gain).abs() <= 1e-9 * before.max(1.0),
                "delta {} vs gain {}", before - after, gain
            );
        }

        #[test]
        fn pass_commit_matches_reported_gain(ig in random_graph()) {
            let open = ServerPool::new(450.0, 1e9, 64);
            let mut p = initial_deployment(&ig, &open).unwrap();
            let before = evaluate_cost(&p, &ig, &open).unwrap().total_cost;
            let snapshot = p.clone();
            let outcome = refine_pass(&mut p, &ig, &open);
            let after = evaluate_cost(&p, &ig, &open).unwrap().total_cost;
            if outcome.committed == 0 {
                prop_assert_eq!(&p, &snapshot);
                prop_assert!(outcome.gain <= GAIN_EPS);
            } else {
                prop_assert!(outcome.gain > 0.0);
                prop_assert!(
                    ((before - after) - outcome.gain).abs() <= 1e-9 * before.max(1.0)
                );
            }
            prop_assert!(is_feasible(&p, &ig, &open).feasible);
        }

        #[test]
        fn solve_never_worsens_deployment(ig in random_graph()) {
            let open = ServerPool::new(450.0, 1e9, 64);
            let greedy = initial_deployment(&ig, &open).unwrap();
            let start = evaluate_cost(&greedy, &ig, &open).unwrap().total_cost;
            let (p, stats) = solve(&ig, &open).unwrap();
            let end = evaluate_cost(&p, &ig, &open).unwrap().total_cost;
            prop_assert!(end <= start + 1e-9);
            prop_assert!(stats.iterations >= 1);
            prop_assert_eq!(stats.pass_gains.len() + 1, stats.iterations as usize);
            for g in &stats.pass_gains {
                prop_assert!(*g > 0.0);
            }
        }
    }
}
