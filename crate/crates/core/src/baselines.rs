//! Comparison baselines: a first-fit packing heuristic and an exhaustive
//! optimum for small instances.
//!
//! The exact solver enumerates set partitions of the nodes (servers are
//! homogeneous, so labeled assignments would only recount the same
//! placements) truncated at `port_limit` blocks, keeping the cheapest
//! feasible one. Bell-number growth caps this at roughly ten nodes.

use thiserror::Error;

use crate::fm::{dfs_order, SolveError};
use crate::placement::{
    complete_with_restarts, FillRule, Placement, ServerPool, PLACEMENT_SEARCH_BUDGET,
};
use crate::sfc::InstanceGraph;
use crate::FEAS_EPS;

/// Node count above which exact enumeration is refused by default.
pub const DEFAULT_EXACT_LIMIT: usize = 10;

/// Visit order for [`first_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstFitOrder {
    /// Ascending node id (the default).
    #[default]
    AscendingId,
    /// Same DFS order the two-phase solver uses; for sensitivity checks.
    Dfs,
}

/// Greedy first fit: each node lands on the lowest-indexed open server that
/// keeps every constraint satisfied; a new server opens when none does and
/// ports remain.
pub fn first_fit(ig: &InstanceGraph, pool: &ServerPool) -> Result<Placement, SolveError> {
    first_fit_ordered(ig, pool, FirstFitOrder::AscendingId)
}

pub fn first_fit_ordered(
    ig: &InstanceGraph,
    pool: &ServerPool,
    order: FirstFitOrder,
) -> Result<Placement, SolveError> {
    let order: Vec<usize> = match order {
        FirstFitOrder::AscendingId => (0..ig.node_count()).collect(),
        FirstFitOrder::Dfs => dfs_order(ig),
    };
    // First fit proper is the first branch; the backtracking and order
    // restarts below it only engage when the plain rule dead-ends on a
    // placeable instance.
    complete_with_restarts(
        ig,
        pool,
        &order,
        FillRule::LowestIndex,
        PLACEMENT_SEARCH_BUDGET,
        crate::fm::DEPLOY_RESTARTS,
    )
    .map_err(|r| SolveError::Infeasible { node: r.node, port_limit: pool.port_limit })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("instance has {nodes} nodes, above the enumeration limit {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("no feasible partition within {port_limit} servers")]
    Infeasible { port_limit: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub placement: Placement,
    pub cost: f64,
    /// Set partitions enumerated (all of them, feasible or not).
    pub partitions_enumerated: u64,
    pub feasible_count: u64,
}

/// Brute-force optimum by set-partition enumeration (restricted-growth
/// order, at most `pool.port_limit` blocks). Ties in cost go to fewer
/// servers, then to the first partition in enumeration order.
pub fn exact_solve(
    ig: &InstanceGraph,
    pool: &ServerPool,
    node_limit: usize,
) -> Result<ExactResult, ExactError> {
    let n = ig.node_count();
    if n > node_limit {
        return Err(ExactError::TooLarge { nodes: n, limit: node_limit });
    }
    if n == 0 {
        return Ok(ExactResult {
            placement: Placement::empty(0),
            cost: 0.0,
            partitions_enumerated: 1,
            feasible_count: 1,
        });
    }

    // Symmetrized adjacency once; the scan below dominates the runtime.
    let edges: Vec<(usize, usize, f64)> =
        ig.traffic().filter(|&(i, j, _)| i != j).collect();
    let demand: Vec<f64> = (0..n).map(|i| ig.demand(i)).collect();
    let external: Vec<f64> = (0..n).map(|i| ig.external(i)).collect();
    let ceps = FEAS_EPS * pool.compute_capacity.max(1.0);
    let beps = FEAS_EPS * pool.link_bandwidth.max(1.0);

    let mut blocks = vec![0usize; n];
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    let mut enumerated = 0u64;
    let mut feasible = 0u64;

    // Depth-first over restricted growth strings: blocks[i] ≤ max(prefix)+1,
    // capped so the block count never exceeds the port limit.
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)]; // (position, next block to try)
    let mut max_used = vec![0usize; n + 1]; // highest block index used by prefix
    loop {
        let Some(&(pos, next)) = stack.last() else { break };
        if pos == n {
            enumerated += 1;
            evaluate_partition(
                &blocks,
                max_used[n],
                &demand,
                &external,
                &edges,
                pool,
                ceps,
                beps,
                &mut feasible,
                &mut best,
            );
            stack.pop();
            continue;
        }
        let cap = (max_used[pos] + 1).min(pool.port_limit - 1);
        let limit = if pos == 0 { 0 } else { cap };
        if next > limit {
            stack.pop();
            continue;
        }
        stack.last_mut().unwrap().1 += 1;
        blocks[pos] = next;
        max_used[pos + 1] = max_used[pos].max(next);
        stack.push((pos + 1, 0));
    }

    match best {
        Some((cost, _, assignment)) => {
            let placement = Placement::from_assignment(&assignment, ig);
            Ok(ExactResult {
                placement,
                cost,
                partitions_enumerated: enumerated,
                feasible_count: feasible,
            })
        }
        None => Err(ExactError::Infeasible { port_limit: pool.port_limit }),
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate_partition(
    blocks: &[usize],
    max_block: usize,
    demand: &[f64],
    external: &[f64],
    edges: &[(usize, usize, f64)],
    pool: &ServerPool,
    ceps: f64,
    beps: f64,
    feasible: &mut u64,
    best: &mut Option<(f64, usize, Vec<usize>)>,
) {
    let k = max_block + 1;
    let mut compute = vec![0.0; k];
    let mut link = vec![0.0; k];
    for (i, &b) in blocks.iter().enumerate() {
        compute[b] += demand[i];
        link[b] += external[i];
    }
    let mut cost = 0.0;
    for &(i, j, w) in edges {
        let (a, b) = (blocks[i], blocks[j]);
        if a != b {
            cost += w;
            link[a] += w;
            link[b] += w;
        }
    }
    if compute.iter().any(|&c| c > pool.compute_capacity + ceps)
        || link.iter().any(|&l| l > pool.link_bandwidth + beps)
    {
        return;
    }
    *feasible += 1;
    let cost = cost * pool.unit_link_cost;
    let better = match best {
        None => true,
        Some((bc, bk, _)) => {
            cost < *bc - FEAS_EPS * bc.max(1.0)
                || ((cost - *bc).abs() <= FEAS_EPS * bc.max(1.0) && k < *bk)
        }
    };
    if better {
        *best = Some((cost, k, blocks.to_vec()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{evaluate_cost, is_feasible};
    use crate::sfc::Instance;
    use std::collections::BTreeMap;

    fn chain(weights: &[f64], demands: &[f64]) -> InstanceGraph {
        let n = demands.len();
        let nodes =
            demands.iter().enumerate().map(|(i, &d)| Instance { nf: i as u32 + 1, demand: d });
        let mut traffic = BTreeMap::new();
        let mut nf_edges = BTreeMap::new();
        for (i, &w) in weights.iter().enumerate() {
            traffic.insert((i, i + 1), w);
            nf_edges.insert((i as u32 + 1, i as u32 + 2), w);
        }
        InstanceGraph::from_parts(nodes.collect(), traffic, nf_edges, vec![0.0; n], vec![0.0; n])
    }

    fn pool(ports: usize) -> ServerPool {
        ServerPool::new(1000.0, 1000.0, ports)
    }

    #[test]
    fn first_fit_splits_heavy_nodes() {
        let ig = chain(&[10.0, 10.0], &[600.0, 600.0, 600.0]);
        let p = first_fit(&ig, &pool(3)).unwrap();
        assert_eq!(
            (0..3).map(|i| p.server_of(i).unwrap()).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn first_fit_keeps_filling_first_server() {
        let ig = chain(&[10.0, 10.0], &[300.0, 300.0, 300.0]);
        let p = first_fit(&ig, &pool(3)).unwrap();
        assert_eq!(p.used_servers(), 1);
    }

    #[test]
    fn first_fit_single_node() {
        let ig = chain(&[], &[500.0]);
        let p = first_fit(&ig, &pool(1)).unwrap();
        assert_eq!(p.server_of(0), Some(0));
    }

    #[test]
    fn first_fit_reports_port_exhaustion() {
        let ig = chain(&[10.0], &[600.0, 600.0]);
        assert_eq!(
            first_fit(&ig, &pool(1)).unwrap_err(),
            SolveError::Infeasible { node: 1, port_limit: 1 }
        );
    }

    #[test]
    fn exact_forces_singletons_when_pairs_overflow() {
        let ig = chain(&[100.0, 200.0], &[600.0, 600.0, 600.0]);
        let r = exact_solve(&ig, &pool(3), DEFAULT_EXACT_LIMIT).unwrap();
        assert_eq!(r.cost, 300.0);
        assert_eq!(r.placement.used_servers(), 3);
        assert_eq!(r.partitions_enumerated, 5);
    }

    #[test]
    fn exact_internalizes_heavier_edge() {
        let ig = chain(&[100.0, 200.0], &[400.0, 400.0, 400.0]);
        let r = exact_solve(&ig, &pool(3), DEFAULT_EXACT_LIMIT).unwrap();
        assert_eq!(r.cost, 100.0);
        assert_eq!(r.placement.server_of(1), r.placement.server_of(2));
        assert_ne!(r.placement.server_of(0), r.placement.server_of(1));
    }

    #[test]
    fn exact_prefers_single_block_when_it_fits() {
        let ig = chain(&[100.0, 200.0], &[300.0, 300.0, 300.0]);
        let r = exact_solve(&ig, &pool(3), DEFAULT_EXACT_LIMIT).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.placement.used_servers(), 1);
    }

    #[test]
    fn exact_enumerates_bell_counts() {
        let ig = chain(&[1.0, 1.0, 1.0, 1.0], &[10.0; 5]);
        let r = exact_solve(&ig, &pool(5), DEFAULT_EXACT_LIMIT).unwrap();
        assert_eq!(r.partitions_enumerated, 52); // Bell(5)
        let r = exact_solve(&ig, &pool(2), DEFAULT_EXACT_LIMIT).unwrap();
        assert_eq!(r.partitions_enumerated, 16); // partitions of 5 into ≤ 2 blocks
    }

    #[test]
    fn exact_enforces_node_limit() {
        let ig = chain(&[1.0; 10], &[10.0; 11]);
        assert_eq!(
            exact_solve(&ig, &pool(11), DEFAULT_EXACT_LIMIT).unwrap_err(),
            ExactError::TooLarge { nodes: 11, limit: 10 }
        );
    }

    #[test]
    fn exact_reports_infeasible_pools() {
        let ig = chain(&[1.0], &[600.0, 600.0]);
        assert_eq!(
            exact_solve(&ig, &pool(1), DEFAULT_EXACT_LIMIT).unwrap_err(),
            ExactError::Infeasible { port_limit: 1 }
        );
    }

    #[test]
    fn exact_empty_graph() {
        let ig = chain(&[], &[]);
        let r = exact_solve(&ig, &pool(1), DEFAULT_EXACT_LIMIT).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.partitions_enumerated, 1);
    }

    #[test]
    fn exact_result_is_audit_clean() {
        let ig = chain(&[50.0, 120.0, 80.0], &[400.0, 500.0, 300.0, 200.0]);
        let r = exact_solve(&ig, &pool(4), DEFAULT_EXACT_LIMIT).unwrap();
        assert!(is_feasible(&r.placement, &ig, &pool(4)).feasible);
        let report = evaluate_cost(&r.placement, &ig, &pool(4)).unwrap();
        assert!((report.total_cost - r.cost).abs() < 1e-9);
    }

    mod properties {
        use super::*;
        use crate::fm::solve;
        use proptest::prelude::*;

        fn small_graph() -> impl Strategy<Value = InstanceGraph> {
            (2usize..7)
                .prop_flat_map(|n| {
                    (
                        proptest::collection::vec(50.0..400.0f64, n),
                        proptest::collection::vec(0.0..150.0f64, n * n),
                    )
                })
                .prop_map(|(demands, weights)| {
                    let n = demands.len();
                    let nodes = demands
                        .iter()
                        .enumerate()
                        .map(|(i, &d)| Instance { nf: i as u32 + 1, demand: d })
                        .collect();
                    let mut traffic = BTreeMap::new();
                    let mut nf_edges = BTreeMap::new();
                    for i in 0..n {
                        for j in i + 1..n {
                            let w = weights[i * n + j];
                            if w > 1.0 {
                                traffic.insert((i, j), w);
                                nf_edges.insert((i as u32 + 1, j as u32 + 1), w);
                            }
                        }
                    }
                    InstanceGraph::from_parts(
                        nodes,
                        traffic,
                        nf_edges,
                        vec![0.0; n],
                        vec![0.0; n],
                    )
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn exact_lower_bounds_the_heuristics(ig in small_graph()) {
                let pool = ServerPool::new(1000.0, 4000.0, ig.node_count());
                let opt = exact_solve(&ig, &pool, DEFAULT_EXACT_LIMIT).unwrap();
                let slack = 1e-9 * opt.cost.max(1.0);
                let (refined, _) = solve(&ig, &pool).unwrap();
                let refined_cost = evaluate_cost(&refined, &ig, &pool).unwrap().total_cost;
                prop_assert!(opt.cost <= refined_cost + slack);
                let greedy = first_fit(&ig, &pool).unwrap();
                let greedy_cost = evaluate_cost(&greedy, &ig, &pool).unwrap().total_cost;
                prop_assert!(opt.cost <= greedy_cost + slack);
            }

            #[test]
            fn exact_optimum_is_order_invariant(ig in small_graph(), seed in any::<u64>()) {
                use rand::SeedableRng;
                use rand::seq::SliceRandom;
                let pool = ServerPool::new(1000.0, 4000.0, ig.node_count());
                let opt = exact_solve(&ig, &pool, DEFAULT_EXACT_LIMIT).unwrap();

                // Relabel the nodes and re-solve; the optimal cost must not move.
                let n = ig.node_count();
                let mut perm: Vec<usize> = (0..n).collect();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                perm.shuffle(&mut rng);
                let nodes = (0..n).map(|i| *ig.node(perm[i])).collect();
                let mut traffic = BTreeMap::new();
                let mut inv = vec![0usize; n];
                for (new, &old) in perm.iter().enumerate() {
                    inv[old] = new;
                }
                for (i, j, w) in ig.traffic() {
                    *traffic.entry((inv[i], inv[j])).or_insert(0.0) += w;
                }
                let relabeled = InstanceGraph::from_parts(
                    nodes,
                    traffic,
                    ig.nf_edges().map(|(u, v, w)| ((u, v), w)).collect(),
                    vec![0.0; n],
                    vec![0.0; n],
                );
                let opt2 = exact_solve(&relabeled, &pool, DEFAULT_EXACT_LIMIT).unwrap();
                prop_assert!((opt.cost - opt2.cost).abs() < 1e-6 * opt.cost.max(1.0));
            }
        }
    }
}
