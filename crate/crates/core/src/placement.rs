//! Placement state shared by every solver: the node-to-server assignment with
//! cached per-server usage, the cost objective, and the feasibility
//! predicates (compute capacity, link bandwidth, port limit).
//!
//! Conventions fixed here and relied on throughout:
//! - a crossing edge is charged once in the cost objective but loads the link
//!   of both endpoint servers in the bandwidth check;
//! - external ingress/egress bandwidth loads links but never the cost (it is
//!   the same for every placement);
//! - per-server "link load" is the sum of crossing traffic incident to the
//!   server plus the external bandwidth of its residents.

use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::sfc::InstanceGraph;
use crate::FEAS_EPS;

/// Homogeneous server pool: every server offers the same compute capacity and
/// link bandwidth; at most `port_limit` servers may be used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerPool {
    pub compute_capacity: f64,
    pub link_bandwidth: f64,
    pub port_limit: usize,
    /// Cost per unit of crossing traffic; uniform over links.
    pub unit_link_cost: f64,
}

impl ServerPool {
    pub fn new(compute_capacity: f64, link_bandwidth: f64, port_limit: usize) -> Self {
        assert!(compute_capacity > 0.0, "compute capacity must be positive");
        assert!(link_bandwidth > 0.0, "link bandwidth must be positive");
        assert!(port_limit >= 1, "at least one port is required");
        ServerPool { compute_capacity, link_bandwidth, port_limit, unit_link_cost: 1.0 }
    }

    pub fn with_unit_cost(mut self, unit_link_cost: f64) -> Self {
        assert!(unit_link_cost >= 0.0);
        self.unit_link_cost = unit_link_cost;
        self
    }
}

/// Comparison slack: real violations overshoot by whole traffic units, float
/// drift by something twelve orders of magnitude smaller.
fn slack(capacity: f64) -> f64 {
    FEAS_EPS * capacity.max(1.0)
}

/// Assignment of instance-graph nodes to servers, with per-server usage
/// caches maintained incrementally under [`Placement::assign`] and
/// [`Placement::relocate`]. Caches always equal a from-scratch recomputation;
/// see [`Placement::recompute`].
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    assignment: Vec<Option<usize>>,
    compute_used: Vec<f64>,
    link_used: Vec<f64>,
    occupancy: Vec<usize>,
}

impl Placement {
    pub fn empty(node_count: usize) -> Self {
        Placement {
            assignment: vec![None; node_count],
            compute_used: Vec::new(),
            link_used: Vec::new(),
            occupancy: Vec::new(),
        }
    }

    /// Builds a complete placement from one server index per node.
    pub fn from_assignment(assignment: &[usize], ig: &InstanceGraph) -> Self {
        assert_eq!(assignment.len(), ig.node_count());
        let servers = assignment.iter().map(|&s| s + 1).max().unwrap_or(0);
        let mut p = Placement {
            assignment: vec![None; assignment.len()],
            compute_used: vec![0.0; servers],
            link_used: vec![0.0; servers],
            occupancy: vec![0; servers],
        };
        for (node, &s) in assignment.iter().enumerate() {
            p.assign(node, s, ig);
        }
        p
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    /// Servers opened so far (some may have emptied out again).
    pub fn server_count(&self) -> usize {
        self.occupancy.len()
    }

    /// Servers currently hosting at least one node.
    pub fn used_servers(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o > 0).count()
    }

    pub fn server_of(&self, node: usize) -> Option<usize> {
        self.assignment[node]
    }

    pub fn occupancy(&self, server: usize) -> usize {
        self.occupancy[server]
    }

    pub fn compute_used(&self, server: usize) -> f64 {
        self.compute_used[server]
    }

    pub fn link_used(&self, server: usize) -> f64 {
        self.link_used[server]
    }

    pub fn is_complete(&self) -> bool {
        self.assignment.iter().all(Option::is_some)
    }

    pub fn nodes_on(&self, server: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == Some(server)).collect()
    }

    pub fn open_server(&mut self) -> usize {
        self.compute_used.push(0.0);
        self.link_used.push(0.0);
        self.occupancy.push(0);
        self.occupancy.len() - 1
    }

    /// Places an unassigned node. Crossing edges to already-placed neighbors
    /// load both endpoint servers; edges to unplaced neighbors load nothing
    /// yet (they are accounted when the neighbor lands).
    pub fn assign(&mut self, node: usize, server: usize, ig: &InstanceGraph) {
        assert!(self.assignment[node].is_none(), "node {node} is already placed");
        assert!(server < self.server_count(), "server {server} is not open");
        self.assignment[node] = Some(server);
        self.compute_used[server] += ig.demand(node);
        self.link_used[server] += ig.external(node);
        self.occupancy[server] += 1;
        for &(nb, w) in ig.sym_neighbors(node) {
            match self.assignment[nb] {
                Some(s) if s != server => {
                    self.link_used[server] += w;
                    self.link_used[s] += w;
                }
                _ => {}
            }
        }
    }

    /// Removes a placed node, the exact inverse of `assign`.
    pub fn unassign(&mut self, node: usize, ig: &InstanceGraph) {
        let server = self.assignment[node].expect("node is not placed");
        self.assignment[node] = None;
        self.compute_used[server] -= ig.demand(node);
        self.link_used[server] -= ig.external(node);
        self.occupancy[server] -= 1;
        for &(nb, w) in ig.sym_neighbors(node) {
            match self.assignment[nb] {
                Some(s) if s != server => {
                    self.link_used[server] -= w;
                    self.link_used[s] -= w;
                }
                _ => {}
            }
        }
    }

    /// Closes empty servers at the top of the index range, undoing
    /// `open_server` calls whose servers emptied out again.
    pub fn pop_empty_trailing(&mut self) {
        while self.occupancy.last() == Some(&0) {
            self.occupancy.pop();
            self.compute_used.pop();
            self.link_used.pop();
        }
    }

    /// Moves an assigned node to another server; `to == server_count()` opens
    /// a fresh server first.
    pub fn relocate(&mut self, node: usize, to: usize, ig: &InstanceGraph) {
        let from = self.assignment[node].expect("node is not placed");
        let to = if to == self.server_count() { self.open_server() } else { to };
        assert!(to < self.server_count(), "server {to} is not open");
        if from == to {
            return;
        }
        let d = ig.demand(node);
        let ext = ig.external(node);
        self.compute_used[from] -= d;
        self.compute_used[to] += d;
        self.link_used[from] -= ext;
        self.link_used[to] += ext;
        self.occupancy[from] -= 1;
        self.occupancy[to] += 1;
        self.assignment[node] = Some(to);
        for &(nb, w) in ig.sym_neighbors(node) {
            match self.assignment[nb] {
                Some(s) if s == from => {
                    // was internal, now crosses between from and to
                    self.link_used[from] += w;
                    self.link_used[to] += w;
                }
                Some(s) if s == to && nb != node => {
                    // was crossing, now internal
                    self.link_used[from] -= w;
                    self.link_used[to] -= w;
                }
                Some(s) if s != to => {
                    self.link_used[from] -= w;
                    self.link_used[to] += w;
                }
                _ => {}
            }
        }
    }

    /// From-scratch usage recomputation: (compute, link, occupancy).
    pub fn recompute(&self, ig: &InstanceGraph) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
        let servers = self.server_count();
        let mut compute = vec![0.0; servers];
        let mut link = vec![0.0; servers];
        let mut occ = vec![0usize; servers];
        for node in 0..self.node_count() {
            if let Some(s) = self.assignment[node] {
                compute[s] += ig.demand(node);
                link[s] += ig.external(node);
                occ[s] += 1;
            }
        }
        for (i, j, w) in ig.traffic() {
            if i == j {
                continue;
            }
            if let (Some(a), Some(b)) = (self.assignment[i], self.assignment[j]) {
                if a != b {
                    link[a] += w;
                    link[b] += w;
                }
            }
        }
        (compute, link, occ)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("node {node} is not placed on any server")]
    Unassigned { node: usize },
}

/// Cost breakdown for a complete placement.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    /// Total crossing traffic weighted by the unit link cost.
    pub total_cost: f64,
    /// Crossing traffic charged to each server (ingress side of each edge).
    pub per_server: Vec<f64>,
    /// Crossing edges (from node, to node, weight), ascending.
    pub crossing: Vec<(usize, usize, f64)>,
}

/// Sums the traffic on edges whose endpoints sit on different servers. Each
/// crossing edge counts once; external bandwidth is excluded (it does not
/// depend on the placement).
pub fn evaluate_cost(
    placement: &Placement,
    ig: &InstanceGraph,
    pool: &ServerPool,
) -> Result<CostReport, CostError> {
    for node in 0..ig.node_count() {
        if placement.server_of(node).is_none() {
            return Err(CostError::Unassigned { node });
        }
    }
    let mut per_server = vec![0.0; placement.server_count()];
    let mut crossing = Vec::new();
    let mut total = 0.0;
    for (i, j, w) in ig.traffic() {
        if i == j {
            continue;
        }
        let (a, b) = (placement.server_of(i).unwrap(), placement.server_of(j).unwrap());
        if a != b {
            total += w;
            per_server[b] += w;
            crossing.push((i, j, w));
        }
    }
    for s in &mut per_server {
        *s *= pool.unit_link_cost;
    }
    Ok(CostReport { total_cost: total * pool.unit_link_cost, per_server, crossing })
}

/// CSV rows `server,crossing_traffic,link_load` for a cost report.
pub fn cost_csv(report: &CostReport, placement: &Placement) -> String {
    let mut out = String::from("server,crossing_traffic,link_load\n");
    for s in 0..placement.server_count() {
        out.push_str(&format!(
            "{s},{},{}\n",
            report.per_server[s],
            placement.link_used(s)
        ));
    }
    out
}

/// Per-server compute check: used ≤ capacity.
pub fn check_capacity(placement: &Placement, ig: &InstanceGraph, pool: &ServerPool) -> Vec<bool> {
    let (compute, _, _) = placement.recompute(ig);
    let eps = slack(pool.compute_capacity);
    compute.iter().map(|&u| u <= pool.compute_capacity + eps).collect()
}

/// Per-server link check: crossing plus external load ≤ bandwidth.
pub fn check_bandwidth(placement: &Placement, ig: &InstanceGraph, pool: &ServerPool) -> Vec<bool> {
    let (_, link, _) = placement.recompute(ig);
    let eps = slack(pool.link_bandwidth);
    link.iter().map(|&u| u <= pool.link_bandwidth + eps).collect()
}

/// Used-server count against the port limit.
pub fn check_port_limit(placement: &Placement, pool: &ServerPool) -> bool {
    placement.used_servers() <= pool.port_limit
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Unassigned { node: usize },
    Compute { server: usize, used: f64, capacity: f64 },
    Bandwidth { server: usize, used: f64, capacity: f64 },
    Ports { used: usize, limit: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unassigned { node } => write!(f, "node {node} is not placed"),
            Violation::Compute { server, used, capacity } => {
                write!(f, "server {server} compute {used} exceeds {capacity}")
            }
            Violation::Bandwidth { server, used, capacity } => {
                write!(f, "server {server} link load {used} exceeds {capacity}")
            }
            Violation::Ports { used, limit } => {
                write!(f, "{used} servers in use, port limit is {limit}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Audits a placement against every constraint from scratch (caches are not
/// trusted here). Partial placements fail with one violation per missing
/// node; loads then cover the placed subset only.
pub fn is_feasible(
    placement: &Placement,
    ig: &InstanceGraph,
    pool: &ServerPool,
) -> FeasibilityReport {
    let mut violations = Vec::new();
    for node in 0..ig.node_count() {
        if placement.server_of(node).is_none() {
            violations.push(Violation::Unassigned { node });
        }
    }
    let (compute, link, _) = placement.recompute(ig);
    let ceps = slack(pool.compute_capacity);
    let beps = slack(pool.link_bandwidth);
    for (s, &u) in compute.iter().enumerate() {
        if u > pool.compute_capacity + ceps {
            violations.push(Violation::Compute { server: s, used: u, capacity: pool.compute_capacity });
        }
    }
    for (s, &u) in link.iter().enumerate() {
        if u > pool.link_bandwidth + beps {
            violations.push(Violation::Bandwidth { server: s, used: u, capacity: pool.link_bandwidth });
        }
    }
    if !check_port_limit(placement, pool) {
        violations.push(Violation::Ports { used: placement.used_servers(), limit: pool.port_limit });
    }
    FeasibilityReport { feasible: violations.is_empty(), violations }
}

/// Edge weight from `node` to each open server, over placed neighbors only.
/// `per_server[k]` is the symmetrized traffic between `node` and the nodes on
/// server k; at the node's own server this is its internal (co-located)
/// traffic.
pub struct Attachment {
    pub per_server: Vec<f64>,
}

impl Attachment {
    /// Total symmetrized traffic between the node and placed neighbors.
    pub fn placed_strength(&self) -> f64 {
        self.per_server.iter().sum()
    }
}

pub fn attachment(placement: &Placement, ig: &InstanceGraph, node: usize) -> Attachment {
    let mut per_server = vec![0.0; placement.server_count()];
    for &(nb, w) in ig.sym_neighbors(node) {
        if let Some(s) = placement.server_of(nb) {
            per_server[s] += w;
        }
    }
    Attachment { per_server }
}

/// Whether placing the unassigned `node` on `server` keeps every constraint
/// satisfied. `server == server_count()` stands for a fresh server. Checks
/// the target's capacity and bandwidth, the bandwidth of every server gaining
/// a crossing edge, and the port limit.
pub fn assign_feasible(
    placement: &Placement,
    ig: &InstanceGraph,
    pool: &ServerPool,
    node: usize,
    server: usize,
) -> bool {
    debug_assert!(placement.server_of(node).is_none());
    let fresh = server == placement.server_count();
    assert!(server <= placement.server_count(), "server {server} is not open");
    let (occ, compute, link) = if fresh {
        (0, 0.0, 0.0)
    } else {
        (placement.occupancy(server), placement.compute_used(server), placement.link_used(server))
    };

    let used_after = placement.used_servers() + usize::from(occ == 0);
    if used_after > pool.port_limit {
        return false;
    }
    let ceps = slack(pool.compute_capacity);
    if compute + ig.demand(node) > pool.compute_capacity + ceps {
        return false;
    }

    let att = attachment(placement, ig, node);
    let here = if fresh { 0.0 } else { att.per_server[server] };
    let beps = slack(pool.link_bandwidth);
    let target_load = link + ig.external(node) + (att.placed_strength() - here);
    if target_load > pool.link_bandwidth + beps {
        return false;
    }
    for (k, &e) in att.per_server.iter().enumerate() {
        if (fresh || k != server) && e > 0.0 && placement.link_used(k) + e > pool.link_bandwidth + beps
        {
            return false;
        }
    }
    true
}

/// Whether relocating the placed `node` to `to` keeps every constraint
/// satisfied. `to == server_count()` stands for a fresh server. Checks the
/// destination's capacity and bandwidth, the source's bandwidth (its load
/// rises when the node leaves co-located neighbors behind), and the port
/// limit; other servers' loads cannot increase.
pub fn move_feasible(
    placement: &Placement,
    ig: &InstanceGraph,
    pool: &ServerPool,
    node: usize,
    to: usize,
) -> bool {
    let from = placement.server_of(node).expect("node is not placed");
    let fresh = to == placement.server_count();
    assert!(to <= placement.server_count(), "server {to} is not open");
    if !fresh && to == from {
        return false;
    }

    let (to_occ, to_compute, to_link) = if fresh {
        (0, 0.0, 0.0)
    } else {
        (placement.occupancy(to), placement.compute_used(to), placement.link_used(to))
    };
    let used_after = placement.used_servers() - usize::from(placement.occupancy(from) == 1)
        + usize::from(to_occ == 0);
    if used_after > pool.port_limit {
        return false;
    }
    let ceps = slack(pool.compute_capacity);
    if to_compute + ig.demand(node) > pool.compute_capacity + ceps {
        return false;
    }

    let att = attachment(placement, ig, node);
    let strength = att.placed_strength();
    let internal = att.per_server[from];
    let e_to = if fresh { 0.0 } else { att.per_server[to] };
    let ext = ig.external(node);
    let beps = slack(pool.link_bandwidth);
    if to_link + strength + ext - 2.0 * e_to > pool.link_bandwidth + beps {
        return false;
    }
    if placement.link_used(from) + 2.0 * internal - strength - ext > pool.link_bandwidth + beps {
        return false;
    }
    true
}

/// A cheap witness that no feasible placement exists: a node whose demand
/// exceeds server compute, or whose link load stays above the bandwidth cap
/// even with the most valuable neighbors co-located. Internalizable traffic
/// is bounded by a fractional knapsack over neighbor demands fitting in the
/// compute budget left beside the node, so a `Some` answer is conclusive
/// while `None` promises nothing.
pub fn infeasibility_certificate(ig: &InstanceGraph, pool: &ServerPool) -> Option<usize> {
    let beps = slack(pool.link_bandwidth);
    let ceps = slack(pool.compute_capacity);
    for v in 0..ig.node_count() {
        if ig.demand(v) > pool.compute_capacity + ceps {
            return Some(v);
        }
        let solo = ig.sym_strength(v) + ig.external(v);
        if solo <= pool.link_bandwidth + beps {
            continue;
        }
        let budget = pool.compute_capacity + ceps - ig.demand(v);
        let mut internal = 0.0;
        if budget > 0.0 {
            let mut edges: Vec<(f64, f64)> =
                ig.sym_neighbors(v).iter().map(|&(nb, w)| (w, ig.demand(nb))).collect();
            edges.sort_by(|a, b| {
                let ra = a.0 / a.1.max(f64::MIN_POSITIVE);
                let rb = b.0 / b.1.max(f64::MIN_POSITIVE);
                rb.partial_cmp(&ra).unwrap()
            });
            let mut left = budget;
            for (w, d) in edges {
                if d <= left {
                    internal += w;
                    left -= d;
                } else {
                    internal += w * left / d;
                    break;
                }
            }
        }
        if solo - internal > pool.link_bandwidth + beps {
            return Some(v);
        }
    }
    None
}

/// How `complete_placement` ranks candidate servers for a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillRule {
    /// Fullest feasible server first (minimum remaining compute), ties to
    /// the earliest opened. The first branch reproduces the min-RRC greedy.
    MostLoaded,
    /// Lowest server index first. The first branch reproduces first fit.
    LowestIndex,
}

/// Tentative node placements a completion search may spend before giving up.
pub const PLACEMENT_SEARCH_BUDGET: usize = 200_000;

/// Why a completion search came back empty-handed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchRefusal {
    /// First node that had no feasible candidate under the search order.
    pub node: usize,
    /// True when the budget ran out before the tree was fully explored.
    /// False means the refusal is a proof: partial loads only grow as nodes
    /// are placed, so every prefix of a feasible placement is feasible, the
    /// pruned tree covers all partitions within the port limit, and an
    /// exhausted tree rules out every order, not just this one.
    pub truncated: bool,
}

/// Places every node of `order`, trying candidate servers per `rule` and
/// backtracking on dead ends. The first branch is exactly the greedy rule
/// (open servers in preference order, then a fresh one), so instances the
/// greedy handles come back unchanged; tighter instances get a bounded
/// search that opens fresh servers as genuine alternatives. Refuses with the
/// first dead-end node; see [`SearchRefusal`] for when that is conclusive.
pub fn complete_placement(
    ig: &InstanceGraph,
    pool: &ServerPool,
    order: &[usize],
    rule: FillRule,
    budget: usize,
) -> Result<Placement, SearchRefusal> {
    assert_eq!(order.len(), ig.node_count(), "order must cover every node");
    if let Some(node) = infeasibility_certificate(ig, pool) {
        return Err(SearchRefusal { node, truncated: false });
    }
    let mut p = Placement::empty(ig.node_count());
    if order.is_empty() {
        return Ok(p);
    }
    const FRESH: usize = usize::MAX;
    // One frame per placed depth: untried candidates, reversed so pop()
    // yields the next preference.
    let mut frames: Vec<Vec<usize>> = Vec::with_capacity(order.len());
    let mut spent = 0usize;
    let mut wedge: Option<usize> = None;
    loop {
        if frames.len() == order.len() {
            return Ok(p);
        }
        let v = order[frames.len()];
        let mut cands: Vec<usize> =
            (0..p.server_count()).filter(|&s| assign_feasible(&p, ig, pool, v, s)).collect();
        if let FillRule::MostLoaded = rule {
            cands.sort_by(|&a, &b| {
                p.compute_used(b).partial_cmp(&p.compute_used(a)).unwrap().then(a.cmp(&b))
            });
        }
        if assign_feasible(&p, ig, pool, v, p.server_count()) {
            cands.push(FRESH);
        }
        if cands.is_empty() && wedge.is_none() {
            wedge = Some(v);
        }
        cands.reverse();
        frames.push(cands);
        // Descend on the next untried candidate, unwinding while none is left.
        loop {
            match frames.last_mut().and_then(Vec::pop) {
                Some(c) => {
                    let v = order[frames.len() - 1];
                    if spent >= budget {
                        return Err(SearchRefusal { node: wedge.unwrap_or(v), truncated: true });
                    }
                    spent += 1;
                    let s = if c == FRESH { p.open_server() } else { c };
                    p.assign(v, s, ig);
                    break;
                }
                None => {
                    frames.pop();
                    match frames.len().checked_sub(1) {
                        Some(d) => {
                            p.unassign(order[d], ig);
                            p.pop_empty_trailing();
                        }
                        None => {
                            let node = wedge.expect("exhausted search saw a dead end");
                            return Err(SearchRefusal { node, truncated: false });
                        }
                    }
                }
            }
        }
    }
}

/// `complete_placement` with a deterministic escape hatch: when the caller's
/// preferred order hits the budget without an answer, a few seeded shuffles
/// of it get half a budget each. Visit order decides which completions a
/// bounded search reaches first, so restarts convert order-specific misses
/// into answers while staying reproducible. Conclusive refusals (tree
/// exhausted, no placement exists) skip the restarts; the error always keeps
/// the preferred order's dead-end node.
pub fn complete_with_restarts(
    ig: &InstanceGraph,
    pool: &ServerPool,
    order: &[usize],
    rule: FillRule,
    budget: usize,
    restarts: usize,
) -> Result<Placement, SearchRefusal> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let refusal = match complete_placement(ig, pool, order, rule, budget) {
        Ok(p) => return Ok(p),
        Err(r) if !r.truncated => return Err(r),
        Err(r) => r,
    };
    let mut shuffled = order.to_vec();
    for round in 0..restarts as u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x517c_c1b7_2722_0a95 ^ round);
        shuffled.shuffle(&mut rng);
        match complete_placement(ig, pool, &shuffled, rule, budget / 2) {
            Ok(p) => return Ok(p),
            Err(r) if !r.truncated => return Err(SearchRefusal { truncated: false, ..refusal }),
            Err(_) => {}
        }
    }
    Err(refusal)
}

#[derive(Debug, Error)]
pub enum PlacementFileError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Writes `instance <name>` followed by one `node server` pair per line.
pub fn write_placement(
    w: &mut impl Write,
    instance: &str,
    placement: &Placement,
) -> io::Result<()> {
    writeln!(w, "instance {instance}")?;
    for node in 0..placement.node_count() {
        match placement.server_of(node) {
            Some(s) => writeln!(w, "{node} {s}")?,
            None => return Err(io::Error::other(format!("node {node} is not placed"))),
        }
    }
    Ok(())
}

/// Reads the format of [`write_placement`]: the instance name and the
/// node-to-server pairs in file order.
pub fn read_placement(
    r: &mut impl BufRead,
) -> Result<(String, Vec<(usize, usize)>), PlacementFileError> {
    let mut name = None;
    let mut pairs = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if name.is_none() {
            match line.strip_prefix("instance ") {
                Some(rest) => name = Some(rest.trim().to_string()),
                None => {
                    return Err(PlacementFileError::Parse {
                        line: idx + 1,
                        message: "expected `instance <name>` header".into(),
                    })
                }
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>, what: &str| {
            tok.ok_or_else(|| PlacementFileError::Parse {
                line: idx + 1,
                message: format!("missing {what}"),
            })?
            .parse::<usize>()
            .map_err(|e| PlacementFileError::Parse {
                line: idx + 1,
                message: format!("bad {what}: {e}"),
            })
        };
        let node = parse(it.next(), "node id")?;
        let server = parse(it.next(), "server index")?;
        if it.next().is_some() {
            return Err(PlacementFileError::Parse {
                line: idx + 1,
                message: "trailing tokens".into(),
            });
        }
        pairs.push((node, server));
    }
    match name {
        Some(name) => Ok((name, pairs)),
        None => Err(PlacementFileError::Parse { line: 0, message: "missing header".into() }),
    }
}

/// Rebuilds a placement from `(node, server)` pairs for `ig`.
pub fn placement_from_pairs(
    pairs: &[(usize, usize)],
    ig: &InstanceGraph,
) -> Result<Placement, PlacementFileError> {
    let mut assignment = vec![None; ig.node_count()];
    for &(node, server) in pairs {
        if node >= ig.node_count() {
            return Err(PlacementFileError::Parse {
                line: 0,
                message: format!("node {node} outside instance graph"),
            });
        }
        if assignment[node].replace(server).is_some() {
            return Err(PlacementFileError::Parse {
                line: 0,
                message: format!("node {node} placed twice"),
            });
        }
    }
    let full: Option<Vec<usize>> = assignment.into_iter().collect();
    match full {
        Some(a) => Ok(Placement::from_assignment(&a, ig)),
        None => Err(PlacementFileError::Parse { line: 0, message: "placement is incomplete".into() }),
    }
}
