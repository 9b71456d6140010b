//! Chain requests, the merged NF-level graph, and its expansion to network
//! function instances carrying an explicit inter-instance traffic matrix.
//!
//! Requests are ordered walks over NF types. Merging produces one DAG vertex
//! per type with aggregated demand ([`build_nf_graph`]); expansion splits each
//! type into instances and each type-level edge into a bipartite traffic block
//! ([`expand_instances`]); [`sparsify_traffic`] then thins every block to at
//! most `rows + cols - 1` flows without disturbing per-instance totals.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Network function type identifier.
pub type NfId = u32;

/// One service chain request: an ordered walk over distinct NF types with a
/// bandwidth requirement and the compute demand it adds to every NF visited.
#[derive(Debug, Clone, PartialEq)]
pub struct SfcRequest {
    pub id: u32,
    pub chain: Vec<NfId>,
    pub bandwidth: f64,
    pub nf_demand: f64,
}

impl SfcRequest {
    pub fn new(id: u32, chain: Vec<NfId>, bandwidth: f64, nf_demand: f64) -> Self {
        SfcRequest { id, chain, bandwidth, nf_demand }
    }

    pub fn validate(&self) -> Result<(), BuildError> {
        if self.chain.is_empty() {
            return Err(BuildError::EmptyChain { request: self.id });
        }
        let mut seen = self.chain.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(BuildError::RepeatedNf { request: self.id, nf: w[0] });
        }
        if !(self.bandwidth > 0.0 && self.nf_demand > 0.0) {
            return Err(BuildError::NonPositive { request: self.id });
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("request {request}: chain is empty")]
    EmptyChain { request: u32 },
    #[error("request {request}: NF {nf} repeats within the chain")]
    RepeatedNf { request: u32, nf: NfId },
    #[error("request {request}: bandwidth and demand must be positive")]
    NonPositive { request: u32 },
    #[error("request id {id} appears more than once")]
    DuplicateId { id: u32 },
    #[error("merged chains form a directed cycle through NFs {nfs:?}")]
    Cycle { nfs: Vec<NfId> },
}

/// Vertex of the merged graph: one NF type with its aggregate load.
#[derive(Debug, Clone, PartialEq)]
pub struct NfVertex {
    pub nf: NfId,
    /// Total compute demand of all requests routed through the type.
    pub demand: f64,
    /// Bandwidth entering the pool at this type (chains starting here).
    pub external_in: f64,
    /// Bandwidth leaving the pool at this type (chains ending here).
    pub external_out: f64,
}

/// Merged DAG of NF types. An edge (u, v) carries the summed bandwidth of
/// every chain routing u directly into v.
#[derive(Debug, Clone, PartialEq)]
pub struct NfGraph {
    vertices: BTreeMap<NfId, NfVertex>,
    edges: BTreeMap<(NfId, NfId), f64>,
    contributors: BTreeMap<(NfId, NfId), Vec<u32>>,
}

impl NfGraph {
    pub fn vertex(&self, nf: NfId) -> Option<&NfVertex> {
        self.vertices.get(&nf)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &NfVertex> {
        self.vertices.values()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_weight(&self, u: NfId, v: NfId) -> f64 {
        self.edges.get(&(u, v)).copied().unwrap_or(0.0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (NfId, NfId, f64)> + '_ {
        self.edges.iter().map(|(&(u, v), &w)| (u, v, w))
    }

    /// Requests contributing to edge (u, v), ascending by id.
    pub fn contributors(&self, u: NfId, v: NfId) -> &[u32] {
        self.contributors.get(&(u, v)).map_or(&[], Vec::as_slice)
    }

    pub fn total_edge_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    /// Kahn topological order; `None` when a cycle is present.
    pub fn topo_order(&self) -> Option<Vec<NfId>> {
        let mut indeg: BTreeMap<NfId, usize> = self.vertices.keys().map(|&v| (v, 0)).collect();
        for &(_, v) in self.edges.keys() {
            *indeg.get_mut(&v).unwrap() += 1;
        }
        let mut ready: Vec<NfId> =
            indeg.iter().filter(|&(_, &d)| d == 0).map(|(&v, _)| v).collect();
        let mut order = Vec::with_capacity(self.vertices.len());
        while let Some(u) = ready.pop() {
            order.push(u);
            for (&(a, b), _) in self.edges.range((u, NfId::MIN)..=(u, NfId::MAX)) {
                debug_assert_eq!(a, u);
                let d = indeg.get_mut(&b).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(b);
                }
            }
        }
        (order.len() == self.vertices.len()).then_some(order)
    }
}

/// Merges chain requests into the NF-level graph. Vertex demand sums the
/// per-request demands; edge weight sums the bandwidths of chains using the
/// edge; chain heads and tails accumulate external in/out bandwidth.
pub fn build_nf_graph(requests: &[SfcRequest]) -> Result<NfGraph, BuildError> {
    let mut ids = Vec::with_capacity(requests.len());
    for r in requests {
        r.validate()?;
        ids.push(r.id);
    }
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(BuildError::DuplicateId { id: w[0] });
    }

    let mut vertices: BTreeMap<NfId, NfVertex> = BTreeMap::new();
    let mut edges: BTreeMap<(NfId, NfId), f64> = BTreeMap::new();
    let mut contributors: BTreeMap<(NfId, NfId), Vec<u32>> = BTreeMap::new();
    for r in requests {
        for &nf in &r.chain {
            let v = vertices.entry(nf).or_insert(NfVertex {
                nf,
                demand: 0.0,
                external_in: 0.0,
                external_out: 0.0,
            });
            v.demand += r.nf_demand;
        }
        vertices.get_mut(r.chain.first().unwrap()).unwrap().external_in += r.bandwidth;
        vertices.get_mut(r.chain.last().unwrap()).unwrap().external_out += r.bandwidth;
        for hop in r.chain.windows(2) {
            let key = (hop[0], hop[1]);
            *edges.entry(key).or_insert(0.0) += r.bandwidth;
            contributors.entry(key).or_default().push(r.id);
        }
    }
    for c in contributors.values_mut() {
        c.sort_unstable();
    }

    let graph = NfGraph { vertices, edges, contributors };
    match graph.topo_order() {
        Some(_) => Ok(graph),
        None => {
            let order: Vec<NfId> = graph.topo_order_partial();
            let mut nfs: Vec<NfId> =
                graph.vertices.keys().filter(|v| !order.contains(v)).copied().collect();
            nfs.sort_unstable();
            Err(BuildError::Cycle { nfs })
        }
    }
}

impl NfGraph {
    /// Nodes Kahn manages to order; the complement lies on or behind a cycle.
    fn topo_order_partial(&self) -> Vec<NfId> {
        let mut indeg: BTreeMap<NfId, usize> = self.vertices.keys().map(|&v| (v, 0)).collect();
        for &(_, v) in self.edges.keys() {
            *indeg.get_mut(&v).unwrap() += 1;
        }
        let mut ready: Vec<NfId> =
            indeg.iter().filter(|&(_, &d)| d == 0).map(|(&v, _)| v).collect();
        let mut order = Vec::new();
        while let Some(u) = ready.pop() {
            order.push(u);
            for (&(_, b), _) in self.edges.range((u, NfId::MIN)..=(u, NfId::MAX)) {
                let d = indeg.get_mut(&b).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(b);
                }
            }
        }
        order
    }
}

/// One deployed network function instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instance {
    pub nf: NfId,
    pub demand: f64,
}

/// Instance-level placement input: all NF instances plus the directed
/// inter-instance traffic matrix, kept sparse.
///
/// `nf_edges` pins the per-type edge totals; the traffic matrix sums back to
/// them blockwise (flow conservation). Adjacency lists and per-node strengths
/// are derived on construction and excluded from equality.
#[derive(Debug, Clone)]
pub struct InstanceGraph {
    nodes: Vec<Instance>,
    traffic: BTreeMap<(usize, usize), f64>,
    nf_edges: BTreeMap<(NfId, NfId), f64>,
    ingress: Vec<f64>,
    egress: Vec<f64>,
    instances_of: BTreeMap<NfId, Vec<usize>>,
    sym_adj: Vec<Vec<(usize, f64)>>,
    out_adj: Vec<Vec<(usize, f64)>>,
    sym_strength: Vec<f64>,
}

impl PartialEq for InstanceGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.traffic == other.traffic
            && self.nf_edges == other.nf_edges
            && self.ingress == other.ingress
            && self.egress == other.egress
    }
}

impl InstanceGraph {
    pub fn from_parts(
        nodes: Vec<Instance>,
        traffic: BTreeMap<(usize, usize), f64>,
        nf_edges: BTreeMap<(NfId, NfId), f64>,
        ingress: Vec<f64>,
        egress: Vec<f64>,
    ) -> Self {
        let n = nodes.len();
        assert_eq!(ingress.len(), n);
        assert_eq!(egress.len(), n);
        assert!(
            traffic.keys().all(|&(i, j)| i < n && j < n),
            "traffic references a node outside 0..{n}"
        );
        let mut instances_of: BTreeMap<NfId, Vec<usize>> = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            instances_of.entry(node.nf).or_default().push(i);
        }
        let mut sym: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &w) in &traffic {
            if i == j || w <= 0.0 {
                continue;
            }
            *sym[i].entry(j).or_insert(0.0) += w;
            *sym[j].entry(i).or_insert(0.0) += w;
            out[i].push((j, w));
        }
        let sym_adj: Vec<Vec<(usize, f64)>> =
            sym.into_iter().map(|m| m.into_iter().collect()).collect();
        let sym_strength = sym_adj.iter().map(|a| a.iter().map(|&(_, w)| w).sum()).collect();
        InstanceGraph {
            nodes,
            traffic,
            nf_edges,
            ingress,
            egress,
            instances_of,
            sym_adj,
            out_adj: out,
            sym_strength,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> &Instance {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[Instance] {
        &self.nodes
    }

    pub fn demand(&self, i: usize) -> f64 {
        self.nodes[i].demand
    }

    pub fn traffic(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.traffic.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    pub fn traffic_between(&self, i: usize, j: usize) -> f64 {
        self.traffic.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn traffic_edge_count(&self) -> usize {
        self.traffic.len()
    }

    pub fn nf_edges(&self) -> impl Iterator<Item = (NfId, NfId, f64)> + '_ {
        self.nf_edges.iter().map(|(&(u, v), &w)| (u, v, w))
    }

    pub fn instances_of(&self, nf: NfId) -> &[usize] {
        self.instances_of.get(&nf).map_or(&[], Vec::as_slice)
    }

    pub fn nf_ids(&self) -> impl Iterator<Item = NfId> + '_ {
        self.instances_of.keys().copied()
    }

    pub fn ingress(&self, i: usize) -> f64 {
        self.ingress[i]
    }

    pub fn egress(&self, i: usize) -> f64 {
        self.egress[i]
    }

    /// External (placement-invariant) link load of node i.
    pub fn external(&self, i: usize) -> f64 {
        self.ingress[i] + self.egress[i]
    }

    /// Undirected neighbors of i with symmetrized weights c_ij + c_ji.
    pub fn sym_neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.sym_adj[i]
    }

    pub fn out_neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.out_adj[i]
    }

    /// Total symmetrized edge weight incident to i.
    pub fn sym_strength(&self, i: usize) -> f64 {
        self.sym_strength[i]
    }

    pub fn total_traffic(&self) -> f64 {
        self.traffic.values().sum()
    }

    pub fn total_demand(&self) -> f64 {
        self.nodes.iter().map(|x| x.demand).sum()
    }

    /// Kahn topological order over the traffic matrix (self-loops ignored);
    /// `None` when a cycle is present.
    pub fn topo_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for (&(i, j), _) in &self.traffic {
            if i != j && i < n && j < n {
                indeg[j] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = ready.pop() {
            order.push(u);
            for &(v, _) in &self.out_adj[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.push(v);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Instances needed for a demand under the capacity rule.
fn instance_count(demand: f64, capacity: f64) -> usize {
    ((demand / capacity).ceil() as usize).max(1)
}

/// Expands the NF graph to instance granularity. Each type gets
/// `ceil(demand / instance_capacity)` instances (at least one) sharing its
/// demand equally; every type-level edge becomes a full bipartite block with
/// the bandwidth split equally over instance pairs; external in/out bandwidth
/// splits equally over the head/tail type's instances.
pub fn expand_instances(graph: &NfGraph, instance_capacity: f64) -> InstanceGraph {
    assert!(instance_capacity > 0.0, "instance capacity must be positive");
    let counts: BTreeMap<NfId, usize> = graph
        .vertices()
        .map(|v| (v.nf, instance_count(v.demand, instance_capacity)))
        .collect();
    expand_with_counts(graph, &counts)
}

/// Expansion with explicit per-type instance counts (each ≥ 1).
pub fn expand_with_counts(graph: &NfGraph, counts: &BTreeMap<NfId, usize>) -> InstanceGraph {
    let mut nodes = Vec::new();
    let mut ingress = Vec::new();
    let mut egress = Vec::new();
    let mut index_of: BTreeMap<NfId, Vec<usize>> = BTreeMap::new();
    for v in graph.vertices() {
        let n = *counts.get(&v.nf).expect("instance count missing for NF");
        assert!(n >= 1, "every NF needs at least one instance");
        let share = v.demand / n as f64;
        let in_share = v.external_in / n as f64;
        let out_share = v.external_out / n as f64;
        let ids = index_of.entry(v.nf).or_default();
        for _ in 0..n {
            ids.push(nodes.len());
            nodes.push(Instance { nf: v.nf, demand: share });
            ingress.push(in_share);
            egress.push(out_share);
        }
    }

    let mut traffic: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut nf_edges: BTreeMap<(NfId, NfId), f64> = BTreeMap::new();
    for (u, v, b) in graph.edges() {
        nf_edges.insert((u, v), b);
        let us = &index_of[&u];
        let vs = &index_of[&v];
        let w = b / (us.len() * vs.len()) as f64;
        for &i in us {
            for &j in vs {
                *traffic.entry((i, j)).or_insert(0.0) += w;
            }
        }
    }
    InstanceGraph::from_parts(nodes, traffic, nf_edges, ingress, egress)
}

/// Rebuilds every bipartite traffic block with a northwest-corner sequential
/// fill: upstream outputs are matched to downstream inputs in index order, so
/// each block keeps its per-instance row and column totals while shrinking to
/// at most `rows + cols - 1` nonzero flows.
pub fn sparsify_traffic(ig: &InstanceGraph) -> InstanceGraph {
    let mut traffic: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let nf_edges: BTreeMap<(NfId, NfId), f64> =
        ig.nf_edges().map(|(u, v, w)| ((u, v), w)).collect();

    // Entries outside every declared block pass through untouched.
    for (i, j, w) in ig.traffic() {
        let key = (ig.node(i).nf, ig.node(j).nf);
        if !nf_edges.contains_key(&key) {
            traffic.insert((i, j), w);
        }
    }

    for &(u, v) in nf_edges.keys() {
        let rows = ig.instances_of(u);
        let cols = ig.instances_of(v);
        let mut row_rem: Vec<f64> = rows
            .iter()
            .map(|&i| cols.iter().map(|&j| ig.traffic_between(i, j)).sum())
            .collect();
        let mut col_rem: Vec<f64> = cols
            .iter()
            .map(|&j| rows.iter().map(|&i| ig.traffic_between(i, j)).sum())
            .collect();
        // Residues below `snap` are rounding dust from inexact splits; drop
        // them so the fill cannot emit spurious near-zero flows.
        let snap = 1e-12 * row_rem.iter().sum::<f64>().max(1.0);
        let (mut r, mut c) = (0, 0);
        while r < rows.len() && c < cols.len() {
            let take = row_rem[r].min(col_rem[c]);
            if take > snap {
                traffic.insert((rows[r], cols[c]), take);
            }
            row_rem[r] -= take;
            col_rem[c] -= take;
            if row_rem[r] <= snap {
                r += 1;
            } else {
                c += 1;
            }
        }
    }

    InstanceGraph::from_parts(
        ig.nodes().to_vec(),
        traffic,
        nf_edges,
        (0..ig.node_count()).map(|i| ig.ingress(i)).collect(),
        (0..ig.node_count()).map(|i| ig.egress(i)).collect(),
    )
}

/// A single violated instance-graph invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    SelfLoop { node: usize },
    NegativeTraffic { from: usize, to: usize, weight: f64 },
    NegativeDemand { node: usize, demand: f64 },
    NegativeExternal { node: usize, value: f64 },
    StrayTraffic { from: usize, to: usize },
    ConservationMismatch { from_nf: NfId, to_nf: NfId, expected: f64, actual: f64 },
    Cycle { nodes: Vec<usize> },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::SelfLoop { node } => write!(f, "node {node} carries a self-loop"),
            Diagnostic::NegativeTraffic { from, to, weight } => {
                write!(f, "traffic {from}->{to} is negative ({weight})")
            }
            Diagnostic::NegativeDemand { node, demand } => {
                write!(f, "node {node} has negative demand ({demand})")
            }
            Diagnostic::NegativeExternal { node, value } => {
                write!(f, "node {node} has negative external bandwidth ({value})")
            }
            Diagnostic::StrayTraffic { from, to } => {
                write!(f, "traffic {from}->{to} belongs to no declared NF edge")
            }
            Diagnostic::ConservationMismatch { from_nf, to_nf, expected, actual } => write!(
                f,
                "NF edge {from_nf}->{to_nf} carries {actual}, expected {expected}"
            ),
            Diagnostic::Cycle { nodes } => {
                write!(f, "traffic matrix has a directed cycle through nodes {nodes:?}")
            }
        }
    }
}

/// Checks every instance-graph invariant, returning one diagnostic per
/// violation (empty iff the graph is valid).
pub fn validate_instance_graph(ig: &InstanceGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (i, node) in ig.nodes().iter().enumerate() {
        if node.demand < 0.0 {
            out.push(Diagnostic::NegativeDemand { node: i, demand: node.demand });
        }
        if ig.ingress(i) < 0.0 {
            out.push(Diagnostic::NegativeExternal { node: i, value: ig.ingress(i) });
        }
        if ig.egress(i) < 0.0 {
            out.push(Diagnostic::NegativeExternal { node: i, value: ig.egress(i) });
        }
    }

    let nf_edges: BTreeMap<(NfId, NfId), f64> =
        ig.nf_edges().map(|(u, v, w)| ((u, v), w)).collect();
    for (i, j, w) in ig.traffic() {
        if i == j {
            out.push(Diagnostic::SelfLoop { node: i });
            continue;
        }
        if w < 0.0 {
            out.push(Diagnostic::NegativeTraffic { from: i, to: j, weight: w });
        }
        if !nf_edges.contains_key(&(ig.node(i).nf, ig.node(j).nf)) {
            out.push(Diagnostic::StrayTraffic { from: i, to: j });
        }
    }

    for (&(u, v), &expected) in &nf_edges {
        let actual: f64 = ig
            .instances_of(u)
            .iter()
            .map(|&i| {
                ig.instances_of(v).iter().map(|&j| ig.traffic_between(i, j)).sum::<f64>()
            })
            .sum();
        let tol = 1e-6 * expected.abs().max(1.0);
        if (actual - expected).abs() > tol {
            out.push(Diagnostic::ConservationMismatch { from_nf: u, to_nf: v, expected, actual });
        }
    }

    if ig.topo_order().is_none() {
        let n = ig.node_count();
        let mut indeg = vec![0usize; n];
        for (i, j, _) in ig.traffic() {
            if i != j && i < n && j < n {
                indeg[j] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = vec![false; n];
        while let Some(u) = ready.pop() {
            seen[u] = true;
            for &(v, _) in ig.out_neighbors(u) {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.push(v);
                }
            }
        }
        let nodes: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
        out.push(Diagnostic::Cycle { nodes });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req(id: u32, chain: &[NfId], bw: f64, demand: f64) -> SfcRequest {
        SfcRequest::new(id, chain.to_vec(), bw, demand)
    }

    #[test]
    fn merge_shares_common_nf() {
        let g = build_nf_graph(&[req(0, &[1, 2], 5.0, 10.0), req(1, &[2, 3], 10.0, 10.0)])
            .unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.edge_weight(1, 2), 5.0);
        assert_eq!(g.edge_weight(2, 3), 10.0);
        assert_eq!(g.vertex(2).unwrap().demand, 20.0);
    }

    #[test]
    fn merge_single_nf_chain() {
        let g = build_nf_graph(&[req(0, &[4], 7.0, 100.0)]).unwrap();
        assert_eq!(g.vertex_count(), 1);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.vertex(4).unwrap().external_in, 7.0);
        assert_eq!(g.vertex(4).unwrap().external_out, 7.0);
    }

    #[test]
    fn merge_sums_parallel_bandwidth() {
        let g = build_nf_graph(&[req(0, &[1, 2], 3.0, 1.0), req(1, &[1, 2], 4.0, 1.0)])
            .unwrap();
        assert_eq!(g.edge_weight(1, 2), 7.0);
        assert_eq!(g.contributors(1, 2), &[0, 1]);
    }

    #[test]
    fn merge_rejects_cycle() {
        let err = build_nf_graph(&[req(0, &[1, 2], 1.0, 1.0), req(1, &[2, 1], 1.0, 1.0)])
            .unwrap_err();
        assert_eq!(err, BuildError::Cycle { nfs: vec![1, 2] });
    }

    #[test]
    fn merge_rejects_repeat_and_empty() {
        assert_eq!(
            build_nf_graph(&[req(3, &[1, 2, 1], 1.0, 1.0)]).unwrap_err(),
            BuildError::RepeatedNf { request: 3, nf: 1 }
        );
        assert_eq!(
            build_nf_graph(&[req(9, &[], 1.0, 1.0)]).unwrap_err(),
            BuildError::EmptyChain { request: 9 }
        );
        assert_eq!(
            build_nf_graph(&[req(1, &[1], 1.0, 1.0), req(1, &[2], 1.0, 1.0)]).unwrap_err(),
            BuildError::DuplicateId { id: 1 }
        );
    }

    #[test]
    fn expand_below_capacity_keeps_one_instance() {
        let g = build_nf_graph(&[req(0, &[1], 10.0, 500.0)]).unwrap();
        let ig = expand_instances(&g, 600.0);
        assert_eq!(ig.node_count(), 1);
        assert_eq!(ig.demand(0), 500.0);
    }

    #[test]
    fn expand_splits_demand_equally() {
        let g = build_nf_graph(&[req(0, &[1], 10.0, 900.0)]).unwrap();
        let ig = expand_instances(&g, 600.0);
        assert_eq!(ig.node_count(), 2);
        assert_eq!(ig.demand(0), 450.0);
        assert_eq!(ig.demand(1), 450.0);
    }

    #[test]
    fn expand_splits_edges_over_pairs() {
        let g = build_nf_graph(&[req(0, &[1, 2], 120.0, 100.0)]).unwrap();
        let counts = BTreeMap::from([(1, 2), (2, 3)]);
        let ig = expand_with_counts(&g, &counts);
        assert_eq!(ig.node_count(), 5);
        assert_eq!(ig.traffic_edge_count(), 6);
        for (_, _, w) in ig.traffic() {
            assert_eq!(w, 20.0);
        }
        assert!((ig.total_traffic() - 120.0).abs() < 1e-9);
    }

    #[test]
    fn sparsify_aligns_equal_quotas() {
        let g = build_nf_graph(&[req(0, &[1, 2], 120.0, 100.0)]).unwrap();
        let counts = BTreeMap::from([(1, 2), (2, 2)]);
        let ig = sparsify_traffic(&expand_with_counts(&g, &counts));
        let flows: Vec<_> = ig.traffic().collect();
        assert_eq!(flows, vec![(0, 2, 60.0), (1, 3, 60.0)]);
    }

    #[test]
    fn sparsify_keeps_single_edge() {
        let g = build_nf_graph(&[req(0, &[1, 2], 120.0, 100.0)]).unwrap();
        let counts = BTreeMap::from([(1, 1), (2, 1)]);
        let ig = expand_with_counts(&g, &counts);
        assert_eq!(sparsify_traffic(&ig), ig);
    }

    #[test]
    fn sparsify_staircase_fill() {
        let g = build_nf_graph(&[req(0, &[1, 2], 120.0, 100.0)]).unwrap();
        let counts = BTreeMap::from([(1, 2), (2, 3)]);
        let ig = sparsify_traffic(&expand_with_counts(&g, &counts));
        let flows: Vec<_> = ig.traffic().collect();
        assert_eq!(
            flows,
            vec![(0, 2, 40.0), (0, 3, 20.0), (1, 3, 20.0), (1, 4, 40.0)]
        );
        for j in [2, 3, 4] {
            let col: f64 = (0..2).map(|i| ig.traffic_between(i, j)).sum();
            assert!((col - 40.0).abs() < 1e-9);
        }
    }

    #[test]
    fn validate_flags_self_loop() {
        let nodes = vec![Instance { nf: 1, demand: 1.0 }];
        let traffic = BTreeMap::from([((0, 0), 1.0)]);
        let ig = InstanceGraph::from_parts(nodes, traffic, BTreeMap::new(), vec![0.0], vec![0.0]);
        assert_eq!(validate_instance_graph(&ig), vec![Diagnostic::SelfLoop { node: 0 }]);
    }

    #[test]
    fn validate_flags_conservation_breach() {
        let nodes = vec![Instance { nf: 1, demand: 1.0 }, Instance { nf: 2, demand: 1.0 }];
        let traffic = BTreeMap::from([((0, 1), 119.0)]);
        let nf_edges = BTreeMap::from([((1, 2), 120.0)]);
        let ig =
            InstanceGraph::from_parts(nodes, traffic, nf_edges, vec![0.0; 2], vec![0.0; 2]);
        let diags = validate_instance_graph(&ig);
        assert_eq!(diags.len(), 1);
        assert!(matches!(
            diags[0],
            Diagnostic::ConservationMismatch { from_nf: 1, to_nf: 2, expected, actual }
                if expected == 120.0 && actual == 119.0
        ));
    }

    #[test]
    fn validate_accepts_expansion_output() {
        let g = build_nf_graph(&[
            req(0, &[1, 2, 3], 250.0, 400.0),
            req(1, &[2, 4], 180.0, 300.0),
        ])
        .unwrap();
        let ig = expand_instances(&g, 600.0);
        assert!(validate_instance_graph(&ig).is_empty());
        assert!(validate_instance_graph(&sparsify_traffic(&ig)).is_empty());
    }

    /// Random request sets over a fixed type order; ascending chains keep the
    /// merged graph acyclic by construction.
    fn requests_strategy() -> impl Strategy<Value = Vec<SfcRequest>> {
        let chain = proptest::sample::subsequence(vec![1u32, 2, 3, 4, 5, 6], 1..=6);
        let request = (chain, 1..600u32, 1..600u32);
        proptest::collection::vec(request, 1..6).prop_map(|rs| {
            rs.into_iter()
                .enumerate()
                .map(|(i, (chain, bw, d))| {
                    SfcRequest::new(i as u32, chain, bw as f64, d as f64)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn merge_is_idempotent(reqs in requests_strategy()) {
            let a = build_nf_graph(&reqs).unwrap();
            let b = build_nf_graph(&reqs).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn traffic_is_conserved_through_expansion(reqs in requests_strategy()) {
            let g = build_nf_graph(&reqs).unwrap();
            let total = g.total_edge_weight();
            let ig = expand_instances(&g, 250.0);
            let tol = 1e-9 * total.max(1.0);
            prop_assert!((ig.total_traffic() - total).abs() <= tol);
            let sparse = sparsify_traffic(&ig);
            prop_assert!((sparse.total_traffic() - total).abs() <= tol);
            prop_assert!(validate_instance_graph(&sparse).is_empty());
        }

        #[test]
        fn sparsify_preserves_node_throughput(reqs in requests_strategy()) {
            let g = build_nf_graph(&reqs).unwrap();
            let ig = expand_instances(&g, 400.0);
            let sparse = sparsify_traffic(&ig);
            prop_assert!(sparse.traffic_edge_count() <= ig.traffic_edge_count());
            for i in 0..ig.node_count() {
                let out_before: f64 = ig.out_neighbors(i).iter().map(|&(_, w)| w).sum();
                let out_after: f64 = sparse.out_neighbors(i).iter().map(|&(_, w)| w).sum();
                prop_assert!((out_before - out_after).abs() <= 1e-9 * out_before.max(1.0));
                let in_before: f64 =
                    (0..ig.node_count()).map(|k| ig.traffic_between(k, i)).sum();
                let in_after: f64 =
                    (0..ig.node_count()).map(|k| sparse.traffic_between(k, i)).sum();
                prop_assert!((in_before - in_after).abs() <= 1e-9 * in_before.max(1.0));
            }
        }

        #[test]
        fn sparsify_is_idempotent(reqs in requests_strategy()) {
            let g = build_nf_graph(&reqs).unwrap();
            let once = sparsify_traffic(&expand_instances(&g, 400.0));
            let twice = sparsify_traffic(&once);
            let a: Vec<_> = once.traffic().collect();
            let b: Vec<_> = twice.traffic().collect();
            prop_assert_eq!(a.len(), b.len());
            for (&(i1, j1, w1), &(i2, j2, w2)) in a.iter().zip(&b) {
                prop_assert_eq!((i1, j1), (i2, j2));
                prop_assert!((w1 - w2).abs() <= 1e-9 * w1.max(1.0));
            }
        }

        #[test]
        fn expansion_stays_acyclic(reqs in requests_strategy()) {
            let g = build_nf_graph(&reqs).unwrap();
            prop_assert!(g.topo_order().is_some());
            let ig = expand_instances(&g, 300.0);
            prop_assert!(ig.topo_order().is_some());
            prop_assert!(sparsify_traffic(&ig).topo_order().is_some());
        }
    }
}
