//! Seeded random problem instances and their on-disk format.
//!
//! Generation is a pure function of the parameter struct. Every random draw
//! comes from a keyed ChaCha8 stream, one stream per pipeline stage (chains,
//! instance counts, traffic weights, demands), so adding draws to one stage
//! never shifts the values another produces. All draws use explicit integer
//! rejection sampling on the raw word stream; floats enter only as exact
//! conversions of small integers, which keeps instances identical across
//! platforms.
//!
//! Instance files are TOML with a `format_version` gate, a `params` header
//! that makes every file self-describing, and `requests`, `graph`, `igraph`
//! sections. The graph section is derived data; loading rebuilds it from the
//! requests and refuses files where the two disagree.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::placement::ServerPool;
use crate::sfc::{
    build_nf_graph, expand_with_counts, sparsify_traffic, validate_instance_graph, BuildError,
    Diagnostic, Instance, InstanceGraph, NfGraph, NfId, SfcRequest,
};

/// On-disk format generation; bump on any incompatible layout change.
pub const FORMAT_VERSION: i64 = 1;

/// Chain redraws before accepting a duplicate of an earlier chain.
const DISTINCT_CHAIN_CAP: usize = 64;
/// Count-vector redraws per attempt while chasing a node-count target.
const REJECTION_CAP: usize = 20_000;
/// Fresh chain sets tried while chasing a node-count target.
const MAX_TARGET_ATTEMPTS: u32 = 64;

const CHAINS_STREAM: u32 = 1;
const COUNTS_STREAM: u32 = 2;
const TRAFFIC_STREAM: u32 = 3;
const DEMANDS_STREAM: u32 = 4;

/// Generator knobs. The defaults reproduce the evaluation setup: six NF
/// types, chains of one to six distinct types, one to five instances per
/// type, traffic and demand uniform over the integers in [100, 600], and
/// servers offering 1000 units each of compute and link bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadParams {
    pub nf_type_count: u32,
    pub chain_length_range: (usize, usize),
    pub instances_per_nf_range: (usize, usize),
    pub traffic_range: (u32, u32),
    pub demand_range: (u32, u32),
    pub server_compute: f64,
    pub server_bandwidth: f64,
    /// Servers available to the pool; `None` means one per instance node.
    pub port_limit: Option<usize>,
    pub sfc_count: usize,
    /// RNG seed. Stored in files as a bit-preserving i64, since TOML has no
    /// unsigned integers; seeds above `i64::MAX` appear negative on disk.
    #[serde(with = "seed_repr")]
    pub seed: u64,
    /// Resample chains and counts until the instance graph has exactly this
    /// many nodes (bounded retries, then the nearest size reached).
    pub target_nodes: Option<usize>,
    /// Size instance counts by aggregate demand instead of random draws.
    pub load_based_counts: bool,
    /// Per-instance compute budget for the load-based sizing rule.
    pub instance_capacity: f64,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        WorkloadParams {
            nf_type_count: 6,
            chain_length_range: (1, 6),
            instances_per_nf_range: (1, 5),
            traffic_range: (100, 600),
            demand_range: (100, 600),
            server_compute: 1000.0,
            server_bandwidth: 1000.0,
            port_limit: None,
            sfc_count: 4,
            seed: 0,
            target_nodes: None,
            load_based_counts: false,
            instance_capacity: 600.0,
        }
    }
}

mod seed_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i64(*v as i64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        Ok(i64::deserialize(d)? as u64)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ParamError(pub String);

impl WorkloadParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        fn range_ok(name: &str, lo: usize, hi: usize) -> Result<(), ParamError> {
            if lo == 0 || lo > hi {
                return Err(ParamError(format!("{name} must satisfy 1 <= lo <= hi, got [{lo}, {hi}]")));
            }
            Ok(())
        }
        range_ok("chain_length_range", self.chain_length_range.0, self.chain_length_range.1)?;
        range_ok(
            "instances_per_nf_range",
            self.instances_per_nf_range.0,
            self.instances_per_nf_range.1,
        )?;
        range_ok("traffic_range", self.traffic_range.0 as usize, self.traffic_range.1 as usize)?;
        range_ok("demand_range", self.demand_range.0 as usize, self.demand_range.1 as usize)?;
        if self.nf_type_count == 0 {
            return Err(ParamError("nf_type_count must be positive".into()));
        }
        if self.chain_length_range.1 > self.nf_type_count as usize {
            return Err(ParamError(format!(
                "chains use distinct types, so chain_length_range hi {} cannot exceed nf_type_count {}",
                self.chain_length_range.1, self.nf_type_count
            )));
        }
        if self.sfc_count == 0 {
            return Err(ParamError("sfc_count must be positive".into()));
        }
        if self.server_compute <= 0.0 || self.server_bandwidth <= 0.0 {
            return Err(ParamError("server capacities must be positive".into()));
        }
        if self.instance_capacity <= 0.0 {
            return Err(ParamError("instance_capacity must be positive".into()));
        }
        if self.port_limit == Some(0) {
            return Err(ParamError("port_limit must be positive when given".into()));
        }
        if self.target_nodes == Some(0) {
            return Err(ParamError("target_nodes must be positive when given".into()));
        }
        Ok(())
    }
}

/// One generated problem: the drawn requests, both graph levels, and the
/// parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub params: WorkloadParams,
    pub requests: Vec<SfcRequest>,
    pub graph: NfGraph,
    pub igraph: InstanceGraph,
}

impl ProblemInstance {
    /// The server pool the instance is meant to be placed on.
    pub fn pool(&self) -> ServerPool {
        let ports = self.params.port_limit.unwrap_or_else(|| self.igraph.node_count().max(1));
        ServerPool::new(self.params.server_compute, self.params.server_bandwidth, ports)
    }
}

/// One keyed sub-stream: seed, resample attempt, and pipeline stage are
/// packed into the ChaCha key, so every (seed, attempt, stage) triple is an
/// independent deterministic stream.
fn sub_rng(seed: u64, attempt: u32, stream: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&attempt.to_le_bytes());
    key[12..16].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Unbiased uniform draw from [lo, hi] by rejection below the largest
/// multiple of the span. Pure integer arithmetic on the raw word stream.
fn uniform_u32(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> u32 {
    debug_assert!(lo <= hi);
    let span = (hi - lo + 1) as u64;
    let cap = (1u64 << 32) / span * span;
    loop {
        let x = rng.next_u32() as u64;
        if x < cap {
            return lo + (x % span) as u32;
        }
    }
}

/// Draws one chain: uniform length, then a uniform subset of distinct types
/// via partial Fisher-Yates, sorted ascending. Ascending chains make every
/// merged edge point from a lower type to a higher one, so the NF graph is
/// acyclic by construction.
fn draw_chain(rng: &mut ChaCha8Rng, params: &WorkloadParams) -> Vec<NfId> {
    let (lo, hi) = params.chain_length_range;
    let len = uniform_u32(rng, lo as u32, hi as u32) as usize;
    let mut types: Vec<NfId> = (1..=params.nf_type_count).collect();
    for i in 0..len {
        let j = uniform_u32(rng, i as u32, types.len() as u32 - 1) as usize;
        types.swap(i, j);
    }
    let mut chain = types[..len].to_vec();
    chain.sort_unstable();
    chain
}

/// Draws the request list. Exact duplicates of an earlier chain are redrawn
/// (bounded), so degenerate settings such as length-1 chains still yield
/// `sfc_count` separate chains whenever the type space allows it.
fn draw_requests(params: &WorkloadParams, attempt: u32) -> Vec<SfcRequest> {
    let mut rng = sub_rng(params.seed, attempt, CHAINS_STREAM);
    let mut requests: Vec<SfcRequest> = Vec::with_capacity(params.sfc_count);
    for k in 0..params.sfc_count {
        let mut chain = draw_chain(&mut rng, params);
        let mut redraws = 0;
        while requests.iter().any(|r| r.chain == chain) && redraws < DISTINCT_CHAIN_CAP {
            chain = draw_chain(&mut rng, params);
            redraws += 1;
        }
        let bandwidth = uniform_u32(&mut rng, params.traffic_range.0, params.traffic_range.1);
        let demand = uniform_u32(&mut rng, params.demand_range.0, params.demand_range.1);
        requests.push(SfcRequest::new(k as u32 + 1, chain, bandwidth as f64, demand as f64));
    }
    requests
}

/// Picks instance counts per NF type and reports how far the node total
/// lands from the target (0 when there is none or it was hit).
fn draw_counts(
    params: &WorkloadParams,
    attempt: u32,
    graph: &NfGraph,
) -> (BTreeMap<NfId, usize>, usize) {
    if params.load_based_counts {
        let counts: BTreeMap<NfId, usize> = graph
            .vertices()
            .map(|v| (v.nf, ((v.demand / params.instance_capacity).ceil() as usize).max(1)))
            .collect();
        let total: usize = counts.values().sum();
        return (counts, params.target_nodes.map_or(0, |t| total.abs_diff(t)));
    }

    let nfs: Vec<NfId> = graph.vertices().map(|v| v.nf).collect();
    let (lo, hi) = params.instances_per_nf_range;
    if let Some(t) = params.target_nodes {
        // Targets outside the achievable sum range have a unique nearest
        // point; no sampling needed.
        if t <= nfs.len() * lo {
            return (nfs.iter().map(|&nf| (nf, lo)).collect(), (nfs.len() * lo).abs_diff(t));
        }
        if t >= nfs.len() * hi {
            return (nfs.iter().map(|&nf| (nf, hi)).collect(), (nfs.len() * hi).abs_diff(t));
        }
    }

    let mut rng = sub_rng(params.seed, attempt, COUNTS_STREAM);
    let mut best: Option<(usize, BTreeMap<NfId, usize>)> = None;
    for _ in 0..REJECTION_CAP {
        let counts: BTreeMap<NfId, usize> = nfs
            .iter()
            .map(|&nf| (nf, uniform_u32(&mut rng, lo as u32, hi as u32) as usize))
            .collect();
        let total: usize = counts.values().sum();
        let gap = params.target_nodes.map_or(0, |t| total.abs_diff(t));
        if gap == 0 {
            return (counts, 0);
        }
        if best.as_ref().map_or(true, |(g, _)| gap < *g) {
            best = Some((gap, counts));
        }
    }
    let (gap, counts) = best.expect("count sampling runs at least once");
    (counts, gap)
}

/// Replaces the equal-split expansion weights with fresh uniform draws on
/// the sparsified structure, in ascending edge order. The NF-edge summary is
/// rebuilt as the new block sums, which is what keeps per-edge flow
/// conservation intact, and per-instance demands are redrawn uniformly.
fn redraw_weights(params: &WorkloadParams, attempt: u32, ig: &InstanceGraph) -> InstanceGraph {
    let mut rng = sub_rng(params.seed, attempt, TRAFFIC_STREAM);
    let (tlo, thi) = params.traffic_range;
    // Traffic is distributed per NF pair, so the override draws one weight
    // per NF edge and rescales that block's instance edges proportionally.
    // Flow conservation (block sums equal the NF edge weight) survives, and
    // per-node load stays bounded by the adjacent block weights instead of
    // growing with the number of split edges.
    let mut old_sums: BTreeMap<(NfId, NfId), f64> = BTreeMap::new();
    for (i, j, w) in ig.traffic() {
        *old_sums.entry((ig.node(i).nf, ig.node(j).nf)).or_insert(0.0) += w;
    }
    let mut blocks: BTreeMap<(NfId, NfId), f64> = BTreeMap::new();
    for &pair in old_sums.keys() {
        blocks.insert(pair, uniform_u32(&mut rng, tlo, thi) as f64);
    }
    let mut traffic = BTreeMap::new();
    for (i, j, w) in ig.traffic() {
        let pair = (ig.node(i).nf, ig.node(j).nf);
        traffic.insert((i, j), w * blocks[&pair] / old_sums[&pair]);
    }

    let mut rng = sub_rng(params.seed, attempt, DEMANDS_STREAM);
    let (dlo, dhi) = params.demand_range;
    let nodes: Vec<Instance> = ig
        .nodes()
        .iter()
        .map(|node| Instance {
            nf: node.nf,
            demand: uniform_u32(&mut rng, dlo, dhi) as f64,
        })
        .collect();

    let n = ig.node_count();
    InstanceGraph::from_parts(
        nodes,
        traffic,
        blocks,
        (0..n).map(|i| ig.ingress(i)).collect(),
        (0..n).map(|i| ig.egress(i)).collect(),
    )
}

fn assemble(
    params: &WorkloadParams,
    attempt: u32,
    requests: Vec<SfcRequest>,
    graph: NfGraph,
    counts: &BTreeMap<NfId, usize>,
) -> ProblemInstance {
    let expanded = expand_with_counts(&graph, counts);
    let thinned = sparsify_traffic(&expanded);
    let igraph = redraw_weights(params, attempt, &thinned);
    debug_assert!(validate_instance_graph(&igraph).is_empty());
    ProblemInstance { params: params.clone(), requests, graph, igraph }
}

/// Generates one problem instance. Identical params produce identical
/// instances, byte for byte, on every platform.
pub fn generate_instance(params: &WorkloadParams) -> Result<ProblemInstance, ParamError> {
    params.validate()?;
    let attempts = if params.target_nodes.is_some() { MAX_TARGET_ATTEMPTS } else { 1 };
    let mut fallback: Option<(usize, u32, Vec<SfcRequest>, NfGraph, BTreeMap<NfId, usize>)> = None;
    for attempt in 0..attempts {
        let requests = draw_requests(params, attempt);
        let graph =
            build_nf_graph(&requests).expect("ascending distinct chains cannot merge into a cycle");
        let (counts, gap) = draw_counts(params, attempt, &graph);
        if gap == 0 {
            return Ok(assemble(params, attempt, requests, graph, &counts));
        }
        if fallback.as_ref().map_or(true, |(g, ..)| gap < *g) {
            fallback = Some((gap, attempt, requests, graph, counts));
        }
    }
    let (_, attempt, requests, graph, counts) =
        fallback.expect("at least one generation attempt runs");
    Ok(assemble(params, attempt, requests, graph, &counts))
}

#[derive(Debug, Error)]
pub enum FileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line} column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported format version {found:?}, this build reads version {FORMAT_VERSION}")]
    VersionMismatch { found: Option<i64> },
    #[error("params are invalid: {0}")]
    Params(#[from] ParamError),
    #[error("requests are malformed: {0}")]
    Requests(#[from] BuildError),
    #[error("instance sections disagree: {0}")]
    Inconsistent(String),
    #[error("instance failed validation with {} issue(s), first: {}", .0.len(), .0[0])]
    Invalid(Vec<Diagnostic>),
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    format_version: i64,
    params: WorkloadParams,
    requests: Vec<RequestDto>,
    graph: GraphDto,
    igraph: IgraphDto,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct RequestDto {
    id: u32,
    chain: Vec<NfId>,
    bandwidth: f64,
    nf_demand: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct GraphDto {
    vertices: Vec<VertexDto>,
    edges: Vec<GraphEdgeDto>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct VertexDto {
    nf: NfId,
    demand: f64,
    external_in: f64,
    external_out: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct GraphEdgeDto {
    from: NfId,
    to: NfId,
    weight: f64,
    contributors: Vec<u32>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct IgraphDto {
    ingress: Vec<f64>,
    egress: Vec<f64>,
    nodes: Vec<NodeDto>,
    traffic: Vec<TrafficDto>,
    nf_edges: Vec<NfEdgeDto>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct NodeDto {
    nf: NfId,
    demand: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct TrafficDto {
    from: usize,
    to: usize,
    weight: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct NfEdgeDto {
    from: NfId,
    to: NfId,
    weight: f64,
}

fn graph_to_dto(graph: &NfGraph) -> GraphDto {
    GraphDto {
        vertices: graph
            .vertices()
            .map(|v| VertexDto {
                nf: v.nf,
                demand: v.demand,
                external_in: v.external_in,
                external_out: v.external_out,
            })
            .collect(),
        edges: graph
            .edges()
            .map(|(u, v, w)| GraphEdgeDto {
                from: u,
                to: v,
                weight: w,
                contributors: graph.contributors(u, v).to_vec(),
            })
            .collect(),
    }
}

fn instance_to_doc(inst: &ProblemInstance) -> InstanceDoc {
    let ig = &inst.igraph;
    let n = ig.node_count();
    InstanceDoc {
        format_version: FORMAT_VERSION,
        params: inst.params.clone(),
        requests: inst
            .requests
            .iter()
            .map(|r| RequestDto {
                id: r.id,
                chain: r.chain.clone(),
                bandwidth: r.bandwidth,
                nf_demand: r.nf_demand,
            })
            .collect(),
        graph: graph_to_dto(&inst.graph),
        igraph: IgraphDto {
            ingress: (0..n).map(|i| ig.ingress(i)).collect(),
            egress: (0..n).map(|i| ig.egress(i)).collect(),
            nodes: ig.nodes().iter().map(|x| NodeDto { nf: x.nf, demand: x.demand }).collect(),
            traffic: ig
                .traffic()
                .map(|(i, j, w)| TrafficDto { from: i, to: j, weight: w })
                .collect(),
            nf_edges: ig
                .nf_edges()
                .map(|(u, v, w)| NfEdgeDto { from: u, to: v, weight: w })
                .collect(),
        },
    }
}

fn doc_to_instance(doc: InstanceDoc) -> Result<ProblemInstance, FileError> {
    doc.params.validate()?;
    let requests: Vec<SfcRequest> = doc
        .requests
        .iter()
        .map(|r| SfcRequest::new(r.id, r.chain.clone(), r.bandwidth, r.nf_demand))
        .collect();
    let graph = build_nf_graph(&requests)?;
    if graph_to_dto(&graph) != doc.graph {
        return Err(FileError::Inconsistent(
            "graph section does not match the graph merged from the requests".into(),
        ));
    }

    let ig = &doc.igraph;
    let n = ig.nodes.len();
    if ig.ingress.len() != n || ig.egress.len() != n {
        return Err(FileError::Inconsistent(format!(
            "igraph has {n} nodes but {} ingress and {} egress entries",
            ig.ingress.len(),
            ig.egress.len()
        )));
    }
    if let Some(t) = ig.traffic.iter().find(|t| t.from >= n || t.to >= n) {
        return Err(FileError::Inconsistent(format!(
            "traffic entry {} -> {} references a missing node",
            t.from, t.to
        )));
    }
    let mut traffic = BTreeMap::new();
    for t in &ig.traffic {
        if traffic.insert((t.from, t.to), t.weight).is_some() {
            return Err(FileError::Inconsistent(format!(
                "duplicate traffic entry {} -> {}",
                t.from, t.to
            )));
        }
    }
    let mut nf_edges = BTreeMap::new();
    for e in &ig.nf_edges {
        if nf_edges.insert((e.from, e.to), e.weight).is_some() {
            return Err(FileError::Inconsistent(format!(
                "duplicate NF edge entry {} -> {}",
                e.from, e.to
            )));
        }
    }
    let igraph = InstanceGraph::from_parts(
        ig.nodes.iter().map(|x| Instance { nf: x.nf, demand: x.demand }).collect(),
        traffic,
        nf_edges,
        ig.ingress.clone(),
        ig.egress.clone(),
    );
    let diagnostics = validate_instance_graph(&igraph);
    if !diagnostics.is_empty() {
        return Err(FileError::Invalid(diagnostics));
    }
    Ok(ProblemInstance { params: doc.params, requests, graph, igraph })
}

fn parse_error(text: &str, err: toml::de::Error) -> FileError {
    let (line, column) = match err.span() {
        Some(span) => {
            let at = span.start.min(text.len());
            let line = text[..at].bytes().filter(|&b| b == b'\n').count() + 1;
            let col = at - text[..at].rfind('\n').map_or(0, |p| p + 1) + 1;
            (line, col)
        }
        None => (0, 0),
    };
    FileError::Parse { line, column, message: err.message().to_string() }
}

/// Serializes an instance to the TOML interchange format.
pub fn instance_to_string(inst: &ProblemInstance) -> String {
    let doc = instance_to_doc(inst);
    toml::to_string_pretty(&doc).expect("instance documents always serialize")
}

/// Parses the TOML interchange format. The version gate runs before the
/// typed parse so files from a future layout fail with `VersionMismatch`
/// rather than a confusing field error.
pub fn parse_instance(text: &str) -> Result<ProblemInstance, FileError> {
    let table: toml::Table = text.parse().map_err(|e| parse_error(text, e))?;
    match table.get("format_version") {
        Some(toml::Value::Integer(v)) if *v == FORMAT_VERSION => {}
        Some(toml::Value::Integer(v)) => return Err(FileError::VersionMismatch { found: Some(*v) }),
        _ => return Err(FileError::VersionMismatch { found: None }),
    }
    let doc: InstanceDoc = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    doc_to_instance(doc)
}

pub fn save_instance(path: &Path, inst: &ProblemInstance) -> Result<(), FileError> {
    fs::write(path, instance_to_string(inst)).map_err(FileError::Io)
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance, FileError> {
    let text = fs::read_to_string(path).map_err(FileError::Io)?;
    parse_instance(&text)
}
