//! Node-disjoint path discovery and security-cost based selection.
//!
//! Disjointness is interior-node disjointness: endpoints are shared by
//! necessity, everything strictly between must differ. The maximum set of
//! such paths is found with unit-capacity max-flow on the vertex-split
//! graph (each node becomes an in/out pair joined by a capacity-one arc),
//! which by Menger's theorem is maximal. The security cost of a path is the
//! probability that at least one interior node is compromised, and the
//! dispatch set is the `m` cheapest paths under that cost.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::topology::{NodeId, Topology};

/// An s-t path as the full node sequence, endpoints included.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Path {
    nodes: Vec<NodeId>,
}

impl Path {
    /// Wrap a node sequence. The caller is responsible for it being a real
    /// path of the topology.
    pub fn new(nodes: Vec<NodeId>) -> Self {
        assert!(nodes.len() >= 2, "a path has at least two nodes");
        Self { nodes }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Nodes strictly between the endpoints.
    pub fn interior(&self) -> &[NodeId] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    pub fn source(&self) -> &NodeId {
        &self.nodes[0]
    }

    pub fn destination(&self) -> &NodeId {
        self.nodes.last().unwrap()
    }

    /// Consecutive node pairs.
    pub fn hops(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> {
        self.nodes.windows(2).map(|w| (&w[0], &w[1]))
    }
}

/// An ordered collection of s-t paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSet {
    pub paths: Vec<Path>,
    /// True when interiors are pairwise node-disjoint.
    pub disjoint: bool,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RoutingError {
    #[error("no path from {src} to {dst}")]
    NoPath { src: NodeId, dst: NodeId },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("source and destination must differ")]
    SameEndpoints,
    #[error("no compromise probability for {0}")]
    MissingProbability(NodeId),
}

/// Find up to `k_max` pairwise interior-disjoint paths from `s` to `t`.
///
/// The returned count is `min(k_max, maximum achievable)`. Interior nodes
/// must have `relay_allowed`; a direct link is a path with empty interior.
/// Ties between augmenting choices resolve toward the lexicographically
/// smallest next node id, so results are deterministic.
pub fn max_disjoint_paths(
    topo: &Topology,
    s: &NodeId,
    t: &NodeId,
    k_max: usize,
) -> Result<PathSet, RoutingError> {
    assert!(k_max >= 1, "k_max must be at least 1");
    for id in [s, t] {
        if !topo.contains(id) {
            return Err(RoutingError::UnknownNode(id.clone()));
        }
    }
    if s == t {
        return Err(RoutingError::SameEndpoints);
    }

    // Vertex splitting: node i becomes in-vertex 2i and out-vertex 2i+1
    // joined by a unit arc; links become unit arcs out(u) -> in(v) both
    // ways. Flow runs from out(s) to in(t), so endpoint node arcs get
    // capacity zero (paths may not pass through an endpoint).
    let ids: Vec<&NodeId> = topo.nodes().iter().map(|n| &n.id).collect();
    let index: BTreeMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let vin = |i: usize| 2 * i;
    let vout = |i: usize| 2 * i + 1;

    let mut graph = FlowGraph::new(2 * ids.len());
    for (i, node) in topo.nodes().iter().enumerate() {
        let passable = node.relay_allowed && node.id != *s && node.id != *t;
        graph.add_edge(vin(i), vout(i), passable as u32);
    }
    // Arcs per node in ascending neighbor order, so breadth-first search
    // discovers the smallest next id first.
    for (i, id) in ids.iter().enumerate() {
        for neighbor in topo.neighbors(id).expect("node exists") {
            let j = index[&neighbor];
            graph.add_edge(vout(i), vin(j), 1);
        }
    }

    let source = vout(index[s]);
    let sink = vin(index[t]);
    let found = graph.max_flow(source, sink, k_max);
    if found == 0 {
        return Err(RoutingError::NoPath {
            src: s.clone(),
            dst: t.clone(),
        });
    }

    // Decompose the integral flow into node sequences. Each unit leaving
    // out(s) walks forward over flow-carrying arcs until in(t); unit node
    // capacities make the continuation unique past the first hop.
    let mut paths = Vec::with_capacity(found);
    for _ in 0..found {
        let mut nodes = vec![s.clone()];
        let mut at = source;
        while at != sink {
            let edge = graph.take_flow_edge(at);
            let to = graph.head(edge);
            if to.is_multiple_of(2) {
                nodes.push(ids[to / 2].clone());
            }
            at = to;
        }
        paths.push(Path::new(nodes));
    }

    Ok(PathSet {
        paths,
        disjoint: true,
    })
}

/// Probability that at least one interior node of `path` is compromised:
/// `1 - prod(1 - p_v)`. A path with empty interior costs exactly zero.
pub fn security_cost(
    path: &Path,
    probs: &BTreeMap<NodeId, f64>,
) -> Result<f64, RoutingError> {
    let mut survive = 1.0;
    for node in path.interior() {
        let p = probs
            .get(node)
            .ok_or_else(|| RoutingError::MissingProbability(node.clone()))?;
        survive *= 1.0 - p;
    }
    Ok(1.0 - survive)
}

/// Keep the `m` cheapest paths, ordered by ascending cost with ties broken
/// by lexicographic node sequence.
pub fn select_paths(
    ps: &PathSet,
    m: usize,
    probs: &BTreeMap<NodeId, f64>,
) -> Result<PathSet, RoutingError> {
    assert!(m >= 1, "selection size must be at least 1");
    let mut ranked: Vec<(f64, &Path)> = ps
        .paths
        .iter()
        .map(|p| Ok((security_cost(p, probs)?, p)))
        .collect::<Result<_, RoutingError>>()?;
    ranked.sort_by(|(ca, pa), (cb, pb)| ca.total_cmp(cb).then_with(|| pa.cmp(pb)));
    Ok(PathSet {
        paths: ranked
            .into_iter()
            .take(m)
            .map(|(_, p)| p.clone())
            .collect(),
        disjoint: ps.disjoint,
    })
}

// ---------------------------------------------------------------------------
// Unit-capacity max flow (Edmonds-Karp)
// ---------------------------------------------------------------------------

struct FlowGraph {
    adj: Vec<Vec<usize>>,
    head: Vec<usize>,
    cap: Vec<u32>,
    forward: Vec<bool>,
    initial_cap: Vec<u32>,
}

impl FlowGraph {
    fn new(vertices: usize) -> Self {
        Self {
            adj: vec![Vec::new(); vertices],
            head: Vec::new(),
            cap: Vec::new(),
            forward: Vec::new(),
            initial_cap: Vec::new(),
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: u32) {
        self.adj[from].push(self.head.len());
        self.head.push(to);
        self.cap.push(cap);
        self.forward.push(true);
        self.initial_cap.push(cap);

        self.adj[to].push(self.head.len());
        self.head.push(from);
        self.cap.push(0);
        self.forward.push(false);
        self.initial_cap.push(0);
    }

    fn head(&self, edge: usize) -> usize {
        self.head[edge]
    }

    fn max_flow(&mut self, source: usize, sink: usize, limit: usize) -> usize {
        let mut total = 0;
        while total < limit && self.augment(source, sink) {
            total += 1;
        }
        total
    }

    /// One breadth-first augmentation of a single unit. Adjacency lists are
    /// visited in insertion order, which the caller arranged to be node-id
    /// order.
    fn augment(&mut self, source: usize, sink: usize) -> bool {
        const NONE: usize = usize::MAX;
        let mut parent_edge = vec![NONE; self.adj.len()];
        let mut queue = std::collections::VecDeque::from([source]);
        parent_edge[source] = usize::MAX - 1;
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for &e in &self.adj[u] {
                let v = self.head[e];
                if self.cap[e] > 0 && parent_edge[v] == NONE {
                    parent_edge[v] = e;
                    queue.push_back(v);
                }
            }
        }
        if parent_edge[sink] == NONE {
            return false;
        }
        let mut v = sink;
        while v != source {
            let e = parent_edge[v];
            self.cap[e] -= 1;
            self.cap[e ^ 1] += 1;
            v = self.head[e ^ 1];
        }
        true
    }

    /// Net flow on a forward edge after the run.
    fn carries_flow(&self, edge: usize) -> bool {
        self.forward[edge] && self.cap[edge] < self.initial_cap[edge]
    }

    /// Pop the first outgoing flow-carrying arc of `from`, consuming it.
    fn take_flow_edge(&mut self, from: usize) -> usize {
        for i in 0..self.adj[from].len() {
            let e = self.adj[from][i];
            if self.carries_flow(e) {
                self.cap[e] = self.initial_cap[e];
                return e;
            }
        }
        unreachable!("flow conservation guarantees a continuation");
    }
}
