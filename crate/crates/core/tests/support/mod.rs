//! Test-only oracles and generators shared by the integration tests.
#![allow(dead_code)]

use causalkit::expr::{JointTable, ProbExpr, Variable};
use causalkit::graph::{EdgeKind, MixedGraph, NodeId};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Edge list copy of a graph: `(a, b, bidirected)`, directed edges point
/// from `a` to `b`.
pub struct Edges {
    pub n: usize,
    pub list: Vec<(usize, usize, bool)>,
}

impl Edges {
    pub fn of(g: &MixedGraph) -> Self {
        let list = g
            .edges()
            .map(|e| {
                assert_ne!(e.kind, EdgeKind::Undirected);
                (e.tail.0, e.head.0, e.kind == EdgeKind::Bidirected)
            })
            .collect();
        Edges { n: g.node_count(), list }
    }

    fn arrow_at(&self, edge: usize, v: usize) -> bool {
        let (a, b, bi) = self.list[edge];
        if bi {
            true
        } else {
            v == b && a != b
        }
    }

    fn other(&self, edge: usize, v: usize) -> usize {
        let (a, b, _) = self.list[edge];
        if a == v {
            b
        } else {
            a
        }
    }

    /// `v` together with everything reachable from it along directed edges.
    fn descendants(&self, v: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(u) = stack.pop() {
            for &(a, b, bi) in &self.list {
                if !bi && a == u && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen
    }

    fn path_open(&self, nodes: &[usize], edges: &[usize], z: &[usize]) -> bool {
        for k in 1..nodes.len() - 1 {
            let v = nodes[k];
            let collider = self.arrow_at(edges[k - 1], v) && self.arrow_at(edges[k], v);
            if collider {
                let de = self.descendants(v);
                if !z.iter().any(|&w| de[w]) {
                    return false;
                }
            } else if z.contains(&v) {
                return false;
            }
        }
        true
    }

    /// Enumerates every simple path from `x` to `y` and checks each one
    /// against the blocking rules, node by node.
    pub fn separated(&self, x: &[usize], y: &[usize], z: &[usize]) -> bool {
        for &s in x {
            let mut nodes = vec![s];
            let mut edges = Vec::new();
            if self.open_from(&mut nodes, &mut edges, y, z) {
                return false;
            }
        }
        true
    }

    fn open_from(&self, nodes: &mut Vec<usize>, edges: &mut Vec<usize>, y: &[usize], z: &[usize]) -> bool {
        let v = *nodes.last().unwrap();
        if nodes.len() > 1 && y.contains(&v) {
            return self.path_open(nodes, edges, z);
        }
        for e in 0..self.list.len() {
            let (a, b, _) = self.list[e];
            if a != v && b != v {
                continue;
            }
            let w = self.other(e, v);
            if nodes.contains(&w) {
                continue;
            }
            nodes.push(w);
            edges.push(e);
            let open = self.open_from(nodes, edges, y, z);
            nodes.pop();
            edges.pop();
            if open {
                return true;
            }
        }
        false
    }
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("V{i}")).collect()
}

fn empty_graph(n: usize) -> MixedGraph {
    let mut g = MixedGraph::new();
    for name in names(n) {
        g.add_node(&name).unwrap();
    }
    g
}

fn acyclic(n: usize, arcs: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0; n];
    for &(_, b) in arcs {
        indeg[b] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for &(a, b) in arcs {
            if a == v {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    stack.push(b);
                }
            }
        }
    }
    seen == n
}

/// Every labelled DAG on `n` nodes.
pub fn all_dags(n: usize) -> Vec<MixedGraph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut arcs = Vec::new();
        for &(i, j) in &pairs {
            match c % 3 {
                1 => arcs.push((i, j)),
                2 => arcs.push((j, i)),
                _ => {}
            }
            c /= 3;
        }
        if !acyclic(n, &arcs) {
            continue;
        }
        let mut g = empty_graph(n);
        for (a, b) in arcs {
            g.add_edge(NodeId(a), NodeId(b), EdgeKind::Directed).unwrap();
        }
        out.push(g);
    }
    out
}

/// Random ADMG: directed edges follow a random order, bidirected edges are
/// independent of them (so a pair may carry both).
pub fn random_admg(rng: &mut ChaCha8Rng, n: usize, p_dir: f64, p_bi: f64) -> MixedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut g = empty_graph(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p_dir) {
                g.add_edge(NodeId(order[i]), NodeId(order[j]), EdgeKind::Directed).unwrap();
            }
            if rng.random_bool(p_bi) {
                g.add_edge(NodeId(order[i]), NodeId(order[j]), EdgeKind::Bidirected).unwrap();
            }
        }
    }
    g
}

/// Random disjoint `(x, y, z)` with non-empty `x` and `y`.
pub fn random_query(rng: &mut ChaCha8Rng, n: usize) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut pool: Vec<usize> = (0..n).collect();
    pool.shuffle(rng);
    let nx = rng.random_range(1..n);
    let ny = rng.random_range(1..=n - nx);
    let nz = rng.random_range(0..=n - nx - ny);
    let x = pool[..nx].to_vec();
    let y = pool[nx..nx + ny].to_vec();
    let z = pool[nx + ny..nx + ny + nz].to_vec();
    (x, y, z)
}

pub fn ids(v: &[usize]) -> std::collections::BTreeSet<NodeId> {
    v.iter().map(|&i| NodeId(i)).collect()
}

/// Random table over `V0..V{k-1}` with cardinalities 2 or 3 and strictly
/// positive cells.
pub fn random_table(rng: &mut ChaCha8Rng, k: usize) -> JointTable {
    let vars: Vec<Variable> = names(k).iter().map(|n| Variable::new(n, rng.random_range(2..=3))).collect();
    let size: usize = vars.iter().map(|v| v.card).product();
    let w: Vec<f64> = (0..size).map(|_| 0.05 + rng.random::<f64>()).collect();
    JointTable::from_weights(vars, w).unwrap()
}

fn random_subset(rng: &mut ChaCha8Rng, pool: &[String], max: usize) -> Vec<String> {
    let mut p = pool.to_vec();
    p.shuffle(rng);
    let k = rng.random_range(0..=max.min(p.len()));
    p.truncate(k);
    p
}

/// Random expression over `vars`. Denominators are built from atoms, sums
/// and products only, so they stay positive on positive tables.
pub fn random_expr(rng: &mut ChaCha8Rng, vars: &[String], depth: u32, positive: bool) -> ProbExpr {
    let leaf = depth == 0 || rng.random_bool(0.3);
    if leaf {
        if !positive && rng.random_bool(0.1) {
            return ProbExpr::Indicator {
                var: vars[rng.random_range(0..vars.len())].clone(),
                value: rng.random_range(0..2),
            };
        }
        if rng.random_bool(0.05) {
            return ProbExpr::Constant(rng.random_range(0.5..2.0));
        }
        let mut target = random_subset(rng, vars, 2);
        if target.is_empty() {
            target.push(vars[rng.random_range(0..vars.len())].clone());
        }
        let rest: Vec<String> = vars.iter().filter(|v| !target.contains(v)).cloned().collect();
        let given = random_subset(rng, &rest, 2);
        return ProbExpr::atom(target, given);
    }
    match rng.random_range(0..3) {
        0 => {
            let k = rng.random_range(1..=3);
            ProbExpr::product((0..k).map(|_| random_expr(rng, vars, depth - 1, positive)).collect())
        }
        1 if !positive => {
            ProbExpr::quotient(random_expr(rng, vars, depth - 1, false), random_expr(rng, vars, depth - 1, true))
        }
        _ => {
            let mut over = random_subset(rng, vars, 2);
            if over.is_empty() {
                over.push(vars[0].clone());
            }
            ProbExpr::sum_owned(over, random_expr(rng, vars, depth - 1, positive))
        }
    }
}
