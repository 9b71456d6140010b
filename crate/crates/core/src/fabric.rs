//! Slot-based crossbar fabric simulator.
//!
//! A placement turns each chain request into a flow path: cells enter at the
//! flow's linecard port, visit the servers of one sampled instance per chain
//! NF, and leave through the same linecard. Consecutive instances on one
//! server cost no fabric traversal, so tighter placements offer the crossbar
//! less work.
//!
//! The switch is the standard input-queued abstraction: fixed-size cells,
//! one cell per port per slot, per-(input, output) virtual output queues,
//! and an iterative request/grant/accept round-robin matcher. The grant
//! pointer follows the FIRM rule: it parks on the granted input when the
//! grant goes unaccepted, and advances past it when accepted. Pointers only
//! move in the first iteration. Server processing takes zero time; a
//! transferred cell is eligible again the following slot.

use std::collections::{BTreeMap, VecDeque};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::placement::Placement;
use crate::sfc::{InstanceGraph, NfId, SfcRequest};

pub const DEFAULT_WARMUP_SLOTS: usize = 10_000;
pub const DEFAULT_MEASURE_SLOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FabricConfig {
    /// Crossbar size; servers attach at ports `0..server_count`, flow
    /// linecards above them.
    pub port_count: usize,
    /// Bernoulli arrival probability per ingress port per slot.
    pub arrival_prob: f64,
    pub warmup_slots: usize,
    pub measure_slots: usize,
    pub seed: u64,
    /// Matcher iterations per slot.
    pub iterations: usize,
}

impl FabricConfig {
    pub fn new(port_count: usize, arrival_prob: f64, seed: u64) -> Self {
        assert!(port_count >= 1, "a crossbar needs at least one port");
        assert!((0.0..=1.0).contains(&arrival_prob), "arrival probability must lie in [0, 1]");
        FabricConfig {
            port_count,
            arrival_prob,
            warmup_slots: DEFAULT_WARMUP_SLOTS,
            measure_slots: DEFAULT_MEASURE_SLOTS,
            seed,
            iterations: 1,
        }
    }

    pub fn with_slots(mut self, warmup: usize, measure: usize) -> Self {
        assert!(measure >= 1, "measurement needs at least one slot");
        self.warmup_slots = warmup;
        self.measure_slots = measure;
        self
    }
}

/// One chain request mapped onto fabric traversals.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    pub sfc: u32,
    /// (source port, destination port) per traversal; consecutive hops
    /// chain, the destination of one being the source of the next.
    pub hops: Vec<(usize, usize)>,
    /// Relative rate share among flows ingressing at the same port.
    pub weight: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("instance node {node} is not assigned to any server")]
    Unassigned { node: usize },
    #[error("chain references NF type {nf} with no instances in the graph")]
    NoInstances { nf: NfId },
}

/// Stream constant for route sampling; mixed with the request id so every
/// request draws its own reproducible route.
const ROUTE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Maps each request to its flow path under a placement. A chain names NF
/// types, not instances, so the concrete route is sampled through the
/// instance-level flow split: the instance of each next NF is drawn with
/// probability proportional to the traffic it receives from the current one,
/// which makes a batch of flows load instances the way the expansion quotas
/// say they are loaded. The draw is seeded by the request alone, so the same
/// request follows the same instances under every placement and paired
/// comparisons stay paired. The flow enters at a per-flow linecard port
/// above the server ports, hops between servers only where consecutive
/// instances sit apart, and exits through its linecard. An empty chain
/// degenerates to a single ingress-to-egress traversal.
pub fn derive_paths(
    placement: &Placement,
    ig: &InstanceGraph,
    requests: &[SfcRequest],
) -> Result<Vec<FlowPath>, PathError> {
    let server_ports = placement.server_count().max(1);
    let mut paths = Vec::with_capacity(requests.len());
    for (f, request) in requests.iter().enumerate() {
        let linecard = server_ports + f;
        let mut rng = ChaCha8Rng::seed_from_u64(ROUTE_STREAM ^ request.id as u64);
        let mut servers = Vec::with_capacity(request.chain.len());
        let mut at: Option<usize> = None;
        for &nf in &request.chain {
            let candidates = ig.instances_of(nf);
            if candidates.is_empty() {
                return Err(PathError::NoInstances { nf });
            }
            let node = sample_instance(ig, at, candidates, &mut rng);
            let server = placement.server_of(node).ok_or(PathError::Unassigned { node })?;
            servers.push(server);
            at = Some(node);
        }
        let mut hops = Vec::with_capacity(servers.len() + 2);
        match (servers.first(), servers.last()) {
            (Some(&first), Some(&last)) => {
                hops.push((linecard, first));
                for w in servers.windows(2) {
                    if w[0] != w[1] {
                        hops.push((w[0], w[1]));
                    }
                }
                hops.push((last, linecard));
            }
            _ => hops.push((linecard, linecard)),
        }
        paths.push(FlowPath { sfc: request.id, hops, weight: request.bandwidth });
    }
    Ok(paths)
}

/// Draws one instance from `candidates`, weighted by the traffic flowing to
/// it from `from` (by instance demand for the chain's first NF). A zero
/// weight row falls back to the demand split so the walk cannot strand.
fn sample_instance(
    ig: &InstanceGraph,
    from: Option<usize>,
    candidates: &[usize],
    rng: &mut ChaCha8Rng,
) -> usize {
    if candidates.len() == 1 {
        return candidates[0];
    }
    let traffic_weights: Option<Vec<f64>> = from.map(|prev| {
        candidates.iter().map(|&j| ig.traffic_between(prev, j)).collect()
    });
    let weights = match traffic_weights {
        Some(w) if w.iter().sum::<f64>() > 0.0 => w,
        _ => candidates.iter().map(|&j| ig.demand(j).max(0.0)).collect(),
    };
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return candidates[0];
    }
    let x = rng.next_u32() as f64 / 4_294_967_296.0 * total;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if acc > x {
            return candidates[k];
        }
    }
    *candidates.last().expect("candidates are nonempty")
}

/// Smallest crossbar that fits every traversal of the paths.
pub fn required_ports(paths: &[FlowPath]) -> usize {
    paths
        .iter()
        .flat_map(|p| p.hops.iter())
        .map(|&(s, d)| s.max(d) + 1)
        .max()
        .unwrap_or(1)
}

/// Total traversal work a set of paths puts on the fabric, weighted by the
/// flows' relative rates.
pub fn weighted_traversals(paths: &[FlowPath]) -> f64 {
    paths.iter().map(|p| p.hops.len() as f64 * p.weight).sum()
}

/// Iterative request/grant/accept round-robin matcher with the FIRM grant
/// pointer rule. State is public so tests can pose exact pointer scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRobinMatcher {
    /// Per-output pointer into the inputs.
    pub grant_ptr: Vec<usize>,
    /// Per-input pointer into the outputs.
    pub accept_ptr: Vec<usize>,
    pub iterations: usize,
}

impl RoundRobinMatcher {
    pub fn new(ports: usize, iterations: usize) -> Self {
        assert!(iterations >= 1);
        RoundRobinMatcher {
            grant_ptr: vec![0; ports],
            accept_ptr: vec![0; ports],
            iterations,
        }
    }

    pub fn ports(&self) -> usize {
        self.grant_ptr.len()
    }

    /// Computes one slot's conflict-free configuration over the occupied
    /// VOQs. Each unmatched output grants the nearest requesting input at or
    /// after its pointer; each input accepts the nearest granting output at
    /// or after its own. Pointers move only in the first iteration: the
    /// grant pointer to just past the input on acceptance and onto it
    /// otherwise, the accept pointer to just past the accepted output.
    pub fn match_slot<F: Fn(usize, usize) -> bool>(&mut self, occupied: F) -> Vec<(usize, usize)> {
        let n = self.ports();
        let mut in_matched = vec![false; n];
        let mut out_matched = vec![false; n];
        let mut pairs = Vec::new();
        for iter in 0..self.iterations {
            let mut grants: Vec<Option<usize>> = vec![None; n];
            for o in 0..n {
                if out_matched[o] {
                    continue;
                }
                for k in 0..n {
                    let i = (self.grant_ptr[o] + k) % n;
                    if !in_matched[i] && occupied(i, o) {
                        grants[o] = Some(i);
                        break;
                    }
                }
            }
            let mut accepted: Vec<Option<usize>> = vec![None; n];
            for i in 0..n {
                if in_matched[i] {
                    continue;
                }
                for k in 0..n {
                    let o = (self.accept_ptr[i] + k) % n;
                    if grants[o] == Some(i) {
                        accepted[i] = Some(o);
                        break;
                    }
                }
            }
            for i in 0..n {
                if let Some(o) = accepted[i] {
                    in_matched[i] = true;
                    out_matched[o] = true;
                    pairs.push((i, o));
                }
            }
            if iter == 0 {
                for o in 0..n {
                    if let Some(g) = grants[o] {
                        self.grant_ptr[o] = if accepted[g] == Some(o) { (g + 1) % n } else { g };
                    }
                }
                for i in 0..n {
                    if let Some(o) = accepted[i] {
                        self.accept_ptr[i] = (o + 1) % n;
                    }
                }
            }
            if pairs.len() == n {
                break;
            }
        }
        pairs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Measured arrival rate, cells per slot per port.
    pub offered_load: f64,
    /// Delivered cells per slot per port, counting only cells that arrived
    /// after warmup; never exceeds `offered_load`.
    pub throughput: f64,
    /// Mean slots from arrival to final delivery for those cells.
    pub mean_delay: f64,
    /// Delivered cell count per flow, in path order.
    pub completions: Vec<u64>,
    /// All cells admitted, warmup included.
    pub arrivals: u64,
    /// All cells that left the fabric, warmup included.
    pub departures: u64,
    /// Cells still queued when the run ended.
    pub backlog: u64,
    /// Delivered cells among those that arrived after warmup.
    pub delivered: u64,
}

struct Cell {
    flow: usize,
    hop: usize,
    born: usize,
    measured: bool,
}

/// Runs one deterministic simulation of the paths over the configured
/// crossbar. Each slot admits Bernoulli arrivals at every ingress port
/// (a cell goes to one of the port's flows with probability proportional to
/// weight), computes one matching, and advances each matched cell one
/// traversal; cells on their last traversal depart.
pub fn simulate(config: &FabricConfig, paths: &[FlowPath]) -> SimResult {
    let n = config.port_count;
    assert!((0.0..=1.0).contains(&config.arrival_prob));
    assert!(config.measure_slots >= 1);
    for p in paths {
        assert!(!p.hops.is_empty(), "flow {} has an empty path", p.sfc);
        assert!(
            p.hops.iter().all(|&(s, d)| s < n && d < n),
            "flow {} uses a port outside the {n}-port crossbar",
            p.sfc
        );
        assert!(p.weight > 0.0, "flow {} needs a positive weight", p.sfc);
    }

    // Flows grouped by ingress port, with cumulative weights for selection.
    let mut by_ingress: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (f, p) in paths.iter().enumerate() {
        by_ingress.entry(p.hops[0].0).or_default().push(f);
    }
    let cumulative: BTreeMap<usize, Vec<f64>> = by_ingress
        .iter()
        .map(|(&port, flows)| {
            let mut acc = 0.0;
            (port, flows.iter().map(|&f| {
                acc += paths[f].weight;
                acc
            }).collect())
        })
        .collect();

    let mut queues: Vec<Vec<VecDeque<Cell>>> =
        (0..n).map(|_| (0..n).map(|_| VecDeque::new()).collect()).collect();
    let mut matcher = RoundRobinMatcher::new(n, config.iterations);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let threshold = (config.arrival_prob * 4_294_967_296.0) as u64;

    let mut arrivals = 0u64;
    let mut measured_arrivals = 0u64;
    let mut departures = 0u64;
    let mut delivered = 0u64;
    let mut delay_sum = 0u64;
    let mut completions = vec![0u64; paths.len()];
    let mut queued = 0u64;

    for slot in 0..config.warmup_slots + config.measure_slots {
        let measuring = slot >= config.warmup_slots;

        for (&port, flows) in &by_ingress {
            if (rng.next_u32() as u64) < threshold {
                let flow = if flows.len() == 1 {
                    flows[0]
                } else {
                    let cum = &cumulative[&port];
                    let total = *cum.last().unwrap();
                    let x = rng.next_u32() as f64 / 4_294_967_296.0 * total;
                    flows[cum.iter().position(|&c| c > x).unwrap_or(flows.len() - 1)]
                };
                let (src, dst) = paths[flow].hops[0];
                queues[src][dst].push_back(Cell { flow, hop: 0, born: slot, measured: measuring });
                arrivals += 1;
                queued += 1;
                if measuring {
                    measured_arrivals += 1;
                }
            }
        }

        let matches = matcher.match_slot(|i, o| !queues[i][o].is_empty());
        debug_assert!(matching_is_legal(&matches, n));

        let mut moved = Vec::with_capacity(matches.len());
        for &(i, o) in &matches {
            moved.push(queues[i][o].pop_front().expect("matcher only matches occupied queues"));
        }
        for mut cell in moved {
            cell.hop += 1;
            let path = &paths[cell.flow];
            if cell.hop == path.hops.len() {
                departures += 1;
                queued -= 1;
                if cell.measured {
                    delivered += 1;
                    completions[cell.flow] += 1;
                    delay_sum += (slot - cell.born + 1) as u64;
                }
            } else {
                let (src, dst) = path.hops[cell.hop];
                queues[src][dst].push_back(cell);
            }
        }

        debug_assert_eq!(arrivals, departures + queued);
    }

    let norm = (config.measure_slots * n) as f64;
    SimResult {
        offered_load: measured_arrivals as f64 / norm,
        throughput: delivered as f64 / norm,
        mean_delay: if delivered == 0 { 0.0 } else { delay_sum as f64 / delivered as f64 },
        completions,
        arrivals,
        departures,
        backlog: queued,
        delivered,
    }
}

fn matching_is_legal(pairs: &[(usize, usize)], n: usize) -> bool {
    let mut ins = vec![false; n];
    let mut outs = vec![false; n];
    pairs.iter().all(|&(i, o)| {
        i < n && o < n && !std::mem::replace(&mut ins[i], true) && !std::mem::replace(&mut outs[o], true)
    })
}
