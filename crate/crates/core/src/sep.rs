//! m-separation and back-door adjustment over mixed graphs.
//!
//! Separation queries run as a reachability search over (node, arrival-mark)
//! states, so each query is linear in the number of edges. Bidirected edges
//! carry arrowheads at both ends; undirected edges are rejected.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::graph::{Edge, EdgeKind, GraphError, MixedGraph, NodeId, NodeSet};

/// Largest candidate set [`enumerate_adjustment_sets`] will scan.
pub const MAX_CANDIDATES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SepError {
    #[error("graph has undirected edges; cluster or project them first")]
    UndirectedEdgePresent,
    #[error("query sets overlap")]
    OverlappingSets,
    #[error("query set `{0}` is empty")]
    EmptySet(&'static str),
    #[error("{0} adjustment candidates exceed the limit of {MAX_CANDIDATES}")]
    TooManyCandidates(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SepQuery {
    pub x: NodeSet,
    pub y: NodeSet,
    pub z: NodeSet,
}

impl SepQuery {
    pub fn new(x: NodeSet, y: NodeSet, z: NodeSet) -> Result<Self, SepError> {
        if x.is_empty() {
            return Err(SepError::EmptySet("x"));
        }
        if y.is_empty() {
            return Err(SepError::EmptySet("y"));
        }
        if !x.is_disjoint(&y) || !x.is_disjoint(&z) || !y.is_disjoint(&z) {
            return Err(SepError::OverlappingSets);
        }
        Ok(SepQuery { x, y, z })
    }

    /// Builds a query from node names.
    pub fn named(g: &MixedGraph, x: &[&str], y: &[&str], z: &[&str]) -> Result<Self, SepError> {
        Self::new(g.ids(x.iter().copied())?, g.ids(y.iter().copied())?, g.ids(z.iter().copied())?)
    }
}

/// A path given as its node sequence and the edges between consecutive
/// nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<Edge>,
}

impl Path {
    pub fn render(&self, g: &MixedGraph) -> String {
        let mut out = g.name(self.nodes[0]).to_string();
        for (i, e) in self.edges.iter().enumerate() {
            let from = self.nodes[i];
            let to = self.nodes[i + 1];
            let token = match e.kind {
                EdgeKind::Directed if e.tail == from => "->",
                EdgeKind::Directed => "<-",
                other => other.token(),
            };
            out.push_str(&format!(" {} {}", token, g.name(to)));
        }
        out
    }

    pub fn kinds(&self) -> Vec<EdgeKind> {
        self.edges.iter().map(|e| e.kind).collect()
    }
}

fn require_no_undirected(g: &MixedGraph) -> Result<(), SepError> {
    if g.has_kind(EdgeKind::Undirected) {
        Err(SepError::UndirectedEdgePresent)
    } else {
        Ok(())
    }
}

/// Whether `v` lets a path through, given the marks of the two path edges at
/// `v`.
fn passes(v: NodeId, head_in: bool, head_out: bool, z: &NodeSet, an_z: &NodeSet) -> bool {
    if head_in && head_out {
        an_z.contains(&v)
    } else {
        !z.contains(&v)
    }
}

/// True iff every path between `q.x` and `q.y` is blocked by `q.z`.
pub fn d_separated(g: &MixedGraph, q: &SepQuery) -> Result<bool, SepError> {
    require_no_undirected(g)?;
    let an_z = g.ancestors(&q.z);
    let n = g.node_count();
    // visited[v][mark]: v reached through an edge with (1) or without (0) an
    // arrowhead at v
    let mut visited = vec![[false; 2]; n];
    let mut queue = VecDeque::new();
    for &x in &q.x {
        for e in g.incident(x) {
            let w = e.other(x).expect("incident");
            let mark = e.arrowhead_at(w);
            if !visited[w.0][mark as usize] {
                visited[w.0][mark as usize] = true;
                queue.push_back((w, mark));
            }
        }
    }
    while let Some((v, head_in)) = queue.pop_front() {
        if q.y.contains(&v) {
            return Ok(false);
        }
        if q.x.contains(&v) {
            continue;
        }
        for e in g.incident(v) {
            if !passes(v, head_in, e.arrowhead_at(v), &q.z, &an_z) {
                continue;
            }
            let w = e.other(v).expect("incident");
            let mark = e.arrowhead_at(w);
            if !visited[w.0][mark as usize] {
                visited[w.0][mark as usize] = true;
                queue.push_back((w, mark));
            }
        }
    }
    Ok(true)
}

/// Shortest open path from `x` to `y` given `z`, found by breadth-first
/// search in node-index order. The first edge must satisfy `first_edge`.
pub fn open_path_where<F>(
    g: &MixedGraph,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
    first_edge: F,
) -> Result<Option<Path>, SepError>
where
    F: Fn(NodeId, &Edge) -> bool,
{
    require_no_undirected(g)?;
    let an_z = g.ancestors(z);
    let mut queue: VecDeque<Path> = VecDeque::new();
    for &s in x {
        for e in g.incident(s).filter(|e| first_edge(s, e)) {
            let w = e.other(s).expect("incident");
            if x.contains(&w) {
                continue;
            }
            queue.push_back(Path { nodes: vec![s, w], edges: vec![*e] });
        }
    }
    while let Some(path) = queue.pop_front() {
        let v = *path.nodes.last().expect("non-empty");
        if y.contains(&v) {
            return Ok(Some(path));
        }
        let head_in = path.edges.last().expect("non-empty").arrowhead_at(v);
        let on_path: BTreeSet<NodeId> = path.nodes.iter().copied().collect();
        for e in g.incident(v) {
            let w = e.other(v).expect("incident");
            if on_path.contains(&w) || x.contains(&w) {
                continue;
            }
            if !passes(v, head_in, e.arrowhead_at(v), z, &an_z) {
                continue;
            }
            let mut next = path.clone();
            next.nodes.push(w);
            next.edges.push(*e);
            queue.push_back(next);
        }
    }
    Ok(None)
}

/// Shortest open path between the query sets, if any.
pub fn open_path(g: &MixedGraph, q: &SepQuery) -> Result<Option<Path>, SepError> {
    open_path_where(g, &q.x, &q.y, &q.z, |_, _| true)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// A back-door path left open by the adjustment set.
    OpenPath(Path),
    /// An adjustment variable downstream of the treatment, with the directed
    /// path that reaches it.
    DescendantOfTreatment { node: NodeId, path: Path },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjustmentVerdict {
    pub valid: bool,
    pub witness: Option<Witness>,
}

impl AdjustmentVerdict {
    pub fn describe(&self, g: &MixedGraph) -> String {
        match &self.witness {
            None => "valid".to_string(),
            Some(Witness::OpenPath(p)) => format!("invalid: open back-door path {}", p.render(g)),
            Some(Witness::DescendantOfTreatment { node, path }) => {
                format!("invalid: {} is a descendant of the treatment ({})", g.name(*node), path.render(g))
            }
        }
    }
}

fn directed_path(g: &MixedGraph, from: NodeId, to: NodeId) -> Option<Path> {
    let mut prev: Vec<Option<Edge>> = vec![None; g.node_count()];
    let mut seen = vec![false; g.node_count()];
    seen[from.0] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut nodes = vec![to];
            let mut edges = Vec::new();
            let mut cur = to;
            while let Some(e) = prev[cur.0] {
                edges.push(e);
                cur = e.tail;
                nodes.push(cur);
            }
            nodes.reverse();
            edges.reverse();
            return Some(Path { nodes, edges });
        }
        for e in g.incident(v).filter(|e| e.kind == EdgeKind::Directed && e.tail == v) {
            if !seen[e.head.0] {
                seen[e.head.0] = true;
                prev[e.head.0] = Some(*e);
                queue.push_back(e.head);
            }
        }
    }
    None
}

/// Back-door criterion for the effect of `a` on `y`: no member of `z`
/// descends from `a`, and `z` blocks every path from `a` to `y` that starts
/// with an arrowhead into `a`.
pub fn is_valid_backdoor(g: &MixedGraph, a: NodeId, y: NodeId, z: &NodeSet) -> Result<AdjustmentVerdict, SepError> {
    require_no_undirected(g)?;
    if a == y || z.contains(&a) || z.contains(&y) {
        return Err(SepError::OverlappingSets);
    }
    let de_a = g.descendants(&NodeSet::from([a]));
    if let Some(&bad) = z.iter().find(|v| de_a.contains(v)) {
        let path = directed_path(g, a, bad).expect("descendant reachable");
        return Ok(AdjustmentVerdict {
            valid: false,
            witness: Some(Witness::DescendantOfTreatment { node: bad, path }),
        });
    }
    let witness = open_path_where(g, &NodeSet::from([a]), &NodeSet::from([y]), z, |s, e| e.arrowhead_at(s))?;
    Ok(AdjustmentVerdict { valid: witness.is_none(), witness: witness.map(Witness::OpenPath) })
}

/// Every subset of `candidates` that satisfies the back-door criterion,
/// ordered by size and then lexicographically by node index.
pub fn enumerate_adjustment_sets(
    g: &MixedGraph,
    a: NodeId,
    y: NodeId,
    candidates: &NodeSet,
) -> Result<Vec<NodeSet>, SepError> {
    if candidates.len() > MAX_CANDIDATES {
        return Err(SepError::TooManyCandidates(candidates.len()));
    }
    let pool: Vec<NodeId> = candidates.iter().copied().collect();
    let mut subsets: Vec<Vec<NodeId>> = (0u32..(1 << pool.len()))
        .map(|mask| pool.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &v)| v).collect())
        .collect();
    subsets.sort_by(|p, q| p.len().cmp(&q.len()).then_with(|| p.cmp(q)));
    let mut out = Vec::new();
    for s in subsets {
        let z: NodeSet = s.into_iter().collect();
        if is_valid_backdoor(g, a, y, &z)?.valid {
            out.push(z);
        }
    }
    Ok(out)
}
