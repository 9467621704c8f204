//! Mixed graphs with directed, bidirected and undirected edges.
//!
//! A [`MixedGraph`] is the single graph representation used throughout the
//! crate: plain DAGs, acyclic directed mixed graphs (ADMGs) obtained by
//! latent projection, and graphs with cycles or undirected blocks that have
//! to be clustered before any separation query makes sense.
//!
//! Graphs are built once (through [`MixedGraph::add_node`] /
//! [`MixedGraph::add_edge`] or the DSL parser) and every structural operation
//! returns a fresh graph.

mod dsl;

pub use dsl::{parse_graph, parse_graph_strict, render_graph};

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Stable handle of a node inside one graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

pub type NodeSet = BTreeSet<NodeId>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Directed,
    Bidirected,
    Undirected,
}

impl EdgeKind {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, EdgeKind::Directed)
    }

    pub fn token(self) -> &'static str {
        match self {
            EdgeKind::Directed => "->",
            EdgeKind::Bidirected => "<->",
            EdgeKind::Undirected => "--",
        }
    }
}

/// An edge. Symmetric kinds are stored with `tail < head`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    pub kind: EdgeKind,
}

impl Edge {
    fn normalized(tail: NodeId, head: NodeId, kind: EdgeKind) -> Self {
        if kind.is_symmetric() && head < tail {
            Edge { tail: head, head: tail, kind }
        } else {
            Edge { tail, head, kind }
        }
    }

    /// The endpoint opposite to `v`, if `v` is an endpoint.
    pub fn other(&self, v: NodeId) -> Option<NodeId> {
        if self.tail == v {
            Some(self.head)
        } else if self.head == v {
            Some(self.tail)
        } else {
            None
        }
    }

    /// Whether the edge carries an arrowhead at endpoint `v`.
    pub fn arrowhead_at(&self, v: NodeId) -> bool {
        match self.kind {
            EdgeKind::Directed => self.head == v,
            EdgeKind::Bidirected => self.tail == v || self.head == v,
            EdgeKind::Undirected => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub latent: bool,
    pub deterministic: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("syntax error at line {line}, column {col}: expected {expected}")]
    SyntaxError { line: usize, col: usize, expected: String },
    #[error("duplicate {kind:?} edge between {a} and {b}")]
    DuplicateEdge { a: String, b: String, kind: EdgeKind },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("latent `{0}` is not exogenous (it has parents or non-directed edges)")]
    NonExogenousLatent(String),
    #[error("cluster has no members")]
    EmptyCluster,
    #[error("cluster label `{0}` collides with a node outside the cluster")]
    LabelCollision(String),
    #[error("directed cycle through `{0}`")]
    CycleDetected(String),
}

#[derive(Debug, Clone, Default)]
pub struct MixedGraph {
    nodes: Vec<Node>,
    index: BTreeMap<String, NodeId>,
    edges: BTreeSet<Edge>,
}

impl MixedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str) -> Result<NodeId, GraphError> {
        if self.index.contains_key(name) {
            return Err(GraphError::DuplicateNode(name.to_string()));
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { name: name.to_string(), latent: false, deterministic: false });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Returns the existing node called `name`, creating it if needed.
    pub fn ensure_node(&mut self, name: &str) -> NodeId {
        match self.index.get(name) {
            Some(&id) => id,
            None => self.add_node(name).expect("checked absent"),
        }
    }

    pub fn set_latent(&mut self, v: NodeId, latent: bool) {
        self.nodes[v.0].latent = latent;
    }

    pub fn set_deterministic(&mut self, v: NodeId, deterministic: bool) {
        self.nodes[v.0].deterministic = deterministic;
    }

    pub fn add_edge(&mut self, tail: NodeId, head: NodeId, kind: EdgeKind) -> Result<(), GraphError> {
        if tail == head {
            return Err(GraphError::SelfLoop(self.name(tail).to_string()));
        }
        let e = Edge::normalized(tail, head, kind);
        if !self.edges.insert(e) {
            return Err(GraphError::DuplicateEdge {
                a: self.name(e.tail).to_string(),
                b: self.name(e.head).to_string(),
                kind,
            });
        }
        Ok(())
    }

    /// Builder shorthand: adds an edge between named nodes, creating them.
    pub fn with_edge(mut self, tail: &str, head: &str, kind: EdgeKind) -> Result<Self, GraphError> {
        let t = self.ensure_node(tail);
        let h = self.ensure_node(head);
        self.add_edge(t, h, kind)?;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn all_nodes(&self) -> NodeSet {
        self.node_ids().collect()
    }

    pub fn node(&self, v: NodeId) -> &Node {
        &self.nodes[v.0]
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.nodes[v.0].name
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<NodeId, GraphError> {
        self.id(name).ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn ids<'a, I>(&self, names: I) -> Result<NodeSet, GraphError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        names.into_iter().map(|n| self.require(n)).collect()
    }

    pub fn names(&self, set: &NodeSet) -> Vec<String> {
        set.iter().map(|&v| self.name(v).to_string()).collect()
    }

    pub fn is_latent(&self, v: NodeId) -> bool {
        self.nodes[v.0].latent
    }

    pub fn is_deterministic(&self, v: NodeId) -> bool {
        self.nodes[v.0].deterministic
    }

    pub fn latents(&self) -> NodeSet {
        self.node_ids().filter(|&v| self.is_latent(v)).collect()
    }

    pub fn observed(&self) -> NodeSet {
        self.node_ids().filter(|&v| !self.is_latent(v)).collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, tail: NodeId, head: NodeId, kind: EdgeKind) -> bool {
        self.edges.contains(&Edge::normalized(tail, head, kind))
    }

    /// Edges incident to `v`, in edge order.
    pub fn incident(&self, v: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.tail == v || e.head == v)
    }

    pub fn parents(&self, v: NodeId) -> NodeSet {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Directed && e.head == v).map(|e| e.tail).collect()
    }

    pub fn children(&self, v: NodeId) -> NodeSet {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Directed && e.tail == v).map(|e| e.head).collect()
    }

    pub fn spouses(&self, v: NodeId) -> NodeSet {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Bidirected).filter_map(|e| e.other(v)).collect()
    }

    pub fn has_kind(&self, kind: EdgeKind) -> bool {
        self.edges.iter().any(|e| e.kind == kind)
    }

    fn directed_acyclic(&self) -> bool {
        self.topological_order().is_ok()
    }

    /// Acyclic directed part and no bidirected or undirected edges.
    pub fn is_dag(&self) -> bool {
        self.directed_acyclic() && !self.has_kind(EdgeKind::Bidirected) && !self.has_kind(EdgeKind::Undirected)
    }

    /// Acyclic directed part and only directed/bidirected edges.
    pub fn is_admg(&self) -> bool {
        self.directed_acyclic() && !self.has_kind(EdgeKind::Undirected)
    }

    /// Ancestors of `set` along directed edges, including `set` itself.
    pub fn ancestors(&self, set: &NodeSet) -> NodeSet {
        self.closure(set, |v| self.parents(v))
    }

    /// Descendants of `set` along directed edges, including `set` itself.
    pub fn descendants(&self, set: &NodeSet) -> NodeSet {
        self.closure(set, |v| self.children(v))
    }

    fn closure<F: Fn(NodeId) -> NodeSet>(&self, set: &NodeSet, step: F) -> NodeSet {
        let mut seen = set.clone();
        let mut queue: VecDeque<NodeId> = set.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            for w in step(v) {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Topological order of the directed part; ties broken by node index.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, GraphError> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        for e in self.edges.iter().filter(|e| e.kind == EdgeKind::Directed) {
            indegree[e.head.0] += 1;
        }
        let mut ready: BinaryHeap<Reverse<NodeId>> =
            self.node_ids().filter(|v| indegree[v.0] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for w in self.children(v) {
                indegree[w.0] -= 1;
                if indegree[w.0] == 0 {
                    ready.push(Reverse(w));
                }
            }
        }
        if order.len() < n {
            let stuck = self.node_ids().find(|v| indegree[v.0] > 0).expect("some node left");
            return Err(GraphError::CycleDetected(self.name(stuck).to_string()));
        }
        Ok(order)
    }

    /// Subgraph induced by `keep`; node order and flags are preserved.
    pub fn induced(&self, keep: &NodeSet) -> MixedGraph {
        let mut out = MixedGraph::new();
        let mut map = BTreeMap::new();
        for v in self.node_ids().filter(|v| keep.contains(v)) {
            let id = out.add_node(self.name(v)).expect("names unique");
            out.nodes[id.0].latent = self.is_latent(v);
            out.nodes[id.0].deterministic = self.is_deterministic(v);
            map.insert(v, id);
        }
        for e in &self.edges {
            if let (Some(&t), Some(&h)) = (map.get(&e.tail), map.get(&e.head)) {
                out.edges.insert(Edge::normalized(t, h, e.kind));
            }
        }
        out
    }

    /// Replaces exogenous latent nodes by bidirected edges between every pair
    /// of their children.
    pub fn latent_project(&self, latents: &NodeSet) -> Result<MixedGraph, GraphError> {
        for &u in latents {
            let exogenous = self.incident(u).all(|e| e.kind == EdgeKind::Directed && e.tail == u);
            if !exogenous {
                return Err(GraphError::NonExogenousLatent(self.name(u).to_string()));
            }
        }
        let keep: NodeSet = self.all_nodes().difference(latents).copied().collect();
        let mut out = self.induced(&keep);
        for &u in latents {
            let kids: Vec<NodeId> = self.children(u).into_iter().collect();
            for (i, &a) in kids.iter().enumerate() {
                for &b in &kids[i + 1..] {
                    let a2 = out.require(self.name(a))?;
                    let b2 = out.require(self.name(b))?;
                    out.edges.insert(Edge::normalized(a2, b2, EdgeKind::Bidirected));
                }
            }
        }
        Ok(out)
    }

    /// Projects out every node flagged latent.
    pub fn project_declared_latents(&self) -> Result<MixedGraph, GraphError> {
        self.latent_project(&self.latents())
    }

    /// Collapses `members` into one node called `label`.
    ///
    /// Edges between a member and an outside node are redirected to the new
    /// node with their kind and orientation kept; edges inside the cluster
    /// disappear. The cluster node takes the position of its first member.
    pub fn cluster_nodes(&self, members: &NodeSet, label: &str) -> Result<MixedGraph, GraphError> {
        if members.is_empty() {
            return Err(GraphError::EmptyCluster);
        }
        if let Some(existing) = self.id(label) {
            if !members.contains(&existing) {
                return Err(GraphError::LabelCollision(label.to_string()));
            }
        }
        let first = *members.iter().next().expect("non-empty");
        let mut out = MixedGraph::new();
        let mut map = BTreeMap::new();
        for v in self.node_ids() {
            if v == first {
                let id = out.add_node(label)?;
                out.nodes[id.0].latent = members.iter().all(|&m| self.is_latent(m));
                out.nodes[id.0].deterministic = members.iter().all(|&m| self.is_deterministic(m));
                for &m in members {
                    map.insert(m, id);
                }
            } else if !members.contains(&v) {
                let id = out.add_node(self.name(v))?;
                out.nodes[id.0].latent = self.is_latent(v);
                out.nodes[id.0].deterministic = self.is_deterministic(v);
                map.insert(v, id);
            }
        }
        for e in &self.edges {
            let inside = (members.contains(&e.tail), members.contains(&e.head));
            if inside == (true, true) {
                continue;
            }
            out.edges.insert(Edge::normalized(map[&e.tail], map[&e.head], e.kind));
        }
        Ok(out)
    }

    /// Structural equality up to node indices: same named nodes, flags and
    /// edges.
    pub fn same_structure(&self, other: &MixedGraph) -> bool {
        render_graph(self) == render_graph(other)
    }

    pub fn describe_edge(&self, e: &Edge) -> String {
        format!("{} {} {}", self.name(e.tail), e.kind.token(), self.name(e.head))
    }
}

impl fmt::Display for MixedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_graph(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(g: &MixedGraph, names: &[&str]) -> NodeSet {
        g.ids(names.iter().copied()).unwrap()
    }

    #[test]
    fn ancestors_of_outcome_in_backdoor_graph() {
        let g = parse_graph("A -> Y; C -> A; C -> Y;").unwrap();
        let an = g.ancestors(&set(&g, &["Y"]));
        assert_eq!(an, set(&g, &["A", "C", "Y"]));
    }

    #[test]
    fn descendants_in_trapdoor_graph() {
        let g = parse_graph("latent U1; latent U2; U1 -> C1; U1 -> A; U2 -> C1; U2 -> Y; C1 -> C2; C2 -> A; A -> Y;")
            .unwrap();
        let de = g.descendants(&set(&g, &["C1"]));
        assert_eq!(de, set(&g, &["C1", "C2", "A", "Y"]));
    }

    #[test]
    fn two_cycle_has_no_topological_order() {
        let g = parse_graph("A -> Y; Y -> A;").unwrap();
        assert!(matches!(g.topological_order(), Err(GraphError::CycleDetected(_))));
        assert!(!g.is_dag());
    }

    #[test]
    fn mbias_projection() {
        let g = parse_graph("latent U1; latent U2; U1 -> A; U1 -> C2; U2 -> C2; U2 -> Y; A -> Y;").unwrap();
        let p = g.project_declared_latents().unwrap();
        let expected = parse_graph("A -> Y; A <-> C2; C2 <-> Y;").unwrap();
        assert!(p.same_structure(&expected), "{p}");
        assert!(p.is_admg());
    }

    #[test]
    fn complex_frontdoor_projection() {
        let g = parse_graph(
            "latent U1; latent U2; latent U3; latent U4;
             C3 -> A; A -> Z; Z -> Y; C1 -> C2; C2 -> C3;
             U1 -> C1; U1 -> Z; U2 -> C2; U2 -> C1; U3 -> C3; U3 -> A; U4 -> A; U4 -> Y;",
        )
        .unwrap();
        let p = g.project_declared_latents().unwrap();
        let expected =
            parse_graph("C3 -> A; A -> Z; Z -> Y; C1 -> C2; C2 -> C3; C1 <-> Z; C1 <-> C2; C3 <-> A; A <-> Y;")
                .unwrap();
        assert!(p.same_structure(&expected), "{p}");
    }

    #[test]
    fn projection_without_latents_is_identity() {
        let g = parse_graph("A -> Y; C -> A; C -> Y;").unwrap();
        let p = g.latent_project(&NodeSet::new()).unwrap();
        assert!(p.same_structure(&g));
    }

    #[test]
    fn projecting_a_non_exogenous_node_fails() {
        let g = parse_graph("A -> M; M -> Y;").unwrap();
        let err = g.latent_project(&set(&g, &["M"])).unwrap_err();
        assert_eq!(err, GraphError::NonExogenousLatent("M".into()));
    }

    #[test]
    fn clustering_undirected_block() {
        let g =
            parse_graph("C1 -- C2; C1 -- C3; C2 -- C4; C3 -- C4; C1 -> A; C2 -> A; C1 -> Y; C2 -> Y; A -> Y;").unwrap();
        assert!(!g.is_dag());
        let c = g.cluster_nodes(&set(&g, &["C1", "C2", "C3", "C4"]), "C").unwrap();
        let expected = parse_graph("C -> A; C -> Y; A -> Y;").unwrap();
        assert!(c.same_structure(&expected), "{c}");
        assert!(c.is_dag());
    }

    #[test]
    fn clustering_cycle() {
        let g = parse_graph("C1 -> C2; C2 -> C1; C1 -> A; C2 -> A; C1 -> Y; C2 -> Y; A -> Y;").unwrap();
        assert!(!g.is_dag());
        let c = g.cluster_nodes(&set(&g, &["C1", "C2"]), "C").unwrap();
        assert!(c.same_structure(&parse_graph("C -> A; C -> Y; A -> Y;").unwrap()));
        assert!(c.is_dag());
    }

    #[test]
    fn singleton_cluster_relabels() {
        let g = parse_graph("A -> Y; C -> A; C -> Y;").unwrap();
        let c = g.cluster_nodes(&set(&g, &["C"]), "W").unwrap();
        assert!(c.same_structure(&parse_graph("A -> Y; W -> A; W -> Y;").unwrap()));
        assert_eq!(c.edge_count(), g.edge_count());
    }

    #[test]
    fn cluster_errors() {
        let g = parse_graph("A -> Y; C -> A;").unwrap();
        assert_eq!(g.cluster_nodes(&NodeSet::new(), "X").unwrap_err(), GraphError::EmptyCluster);
        assert_eq!(g.cluster_nodes(&set(&g, &["C"]), "A").unwrap_err(), GraphError::LabelCollision("A".into()));
    }

    #[test]
    fn parallel_edges_of_different_kinds() {
        let g = parse_graph("A -> Y; A <-> Y;").unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(g.is_admg());
        assert!(!g.is_dag());
    }
}
