//! Reference implementations used by the harness: separation by explicit
//! path enumeration, and generators for random graphs and expressions.

use causalkit::expr::{JointTable, ProbExpr, Variable};
use causalkit::graph::{EdgeKind, MixedGraph, NodeId};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `(from, to, bidirected)` copy of the edges of a graph without
/// undirected edges.
pub struct PathOracle {
    n: usize,
    edges: Vec<(usize, usize, bool)>,
}

impl PathOracle {
    pub fn new(g: &MixedGraph) -> Self {
        let edges = g.edges().map(|e| (e.tail.0, e.head.0, e.kind == EdgeKind::Bidirected)).collect();
        PathOracle { n: g.node_count(), edges }
    }

    fn arrow_at(&self, e: usize, v: usize) -> bool {
        let (_, to, bi) = self.edges[e];
        bi || to == v
    }

    fn has_descendant_in(&self, v: usize, z: &[usize]) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(u) = stack.pop() {
            if z.contains(&u) {
                return true;
            }
            for &(a, b, bi) in &self.edges {
                if !bi && a == u && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        false
    }

    fn open(&self, nodes: &[usize], via: &[usize], z: &[usize]) -> bool {
        (1..nodes.len() - 1).all(|k| {
            let v = nodes[k];
            if self.arrow_at(via[k - 1], v) && self.arrow_at(via[k], v) {
                self.has_descendant_in(v, z)
            } else {
                !z.contains(&v)
            }
        })
    }

    fn search(&self, nodes: &mut Vec<usize>, via: &mut Vec<usize>, y: &[usize], z: &[usize]) -> bool {
        let v = *nodes.last().expect("path starts somewhere");
        if nodes.len() > 1 && y.contains(&v) {
            return self.open(nodes, via, z);
        }
        for (e, &(a, b, _)) in self.edges.iter().enumerate() {
            let w = match (a == v, b == v) {
                (true, _) => b,
                (_, true) => a,
                _ => continue,
            };
            if nodes.contains(&w) {
                continue;
            }
            nodes.push(w);
            via.push(e);
            let found = self.search(nodes, via, y, z);
            nodes.pop();
            via.pop();
            if found {
                return true;
            }
        }
        false
    }

    /// True when no simple path between `x` and `y` is open given `z`.
    pub fn separated(&self, x: &[usize], y: &[usize], z: &[usize]) -> bool {
        x.iter().all(|&s| !self.search(&mut vec![s], &mut Vec::new(), y, z))
    }
}

fn blank(n: usize) -> MixedGraph {
    let mut g = MixedGraph::new();
    for i in 0..n {
        g.add_node(&format!("V{i}")).expect("fresh names");
    }
    g
}

/// Every labelled DAG on `n` nodes, by orienting or omitting each pair and
/// discarding cyclic results.
pub fn all_dags(n: usize) -> Vec<MixedGraph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    for code in 0..3usize.pow(pairs.len() as u32) {
        let mut g = blank(n);
        let mut c = code;
        for &(i, j) in &pairs {
            let (a, b) = match c % 3 {
                0 => (None, None),
                1 => (Some(i), Some(j)),
                _ => (Some(j), Some(i)),
            };
            c /= 3;
            if let (Some(a), Some(b)) = (a, b) {
                g.add_edge(NodeId(a), NodeId(b), EdgeKind::Directed).expect("distinct pair");
            }
        }
        if g.is_dag() {
            out.push(g);
        }
    }
    out
}

pub fn random_admg(rng: &mut ChaCha8Rng, n: usize) -> MixedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut g = blank(n);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (NodeId(order[i]), NodeId(order[j]));
            if rng.random_bool(0.4) {
                g.add_edge(a, b, EdgeKind::Directed).expect("new edge");
            }
            if rng.random_bool(0.25) {
                g.add_edge(a, b, EdgeKind::Bidirected).expect("new edge");
            }
        }
    }
    g
}

pub fn random_query(rng: &mut ChaCha8Rng, n: usize) -> [Vec<usize>; 3] {
    let mut pool: Vec<usize> = (0..n).collect();
    pool.shuffle(rng);
    let nx = rng.random_range(1..n);
    let ny = rng.random_range(1..=n - nx);
    let nz = rng.random_range(0..=n - nx - ny);
    [pool[..nx].to_vec(), pool[nx..nx + ny].to_vec(), pool[nx + ny..nx + ny + nz].to_vec()]
}

pub fn random_table(rng: &mut ChaCha8Rng, k: usize) -> JointTable {
    let vars: Vec<Variable> = (0..k).map(|i| Variable::new(&format!("V{i}"), rng.random_range(2..=3))).collect();
    let size: usize = vars.iter().map(|v| v.card).product();
    let w: Vec<f64> = (0..size).map(|_| 0.05 + rng.random::<f64>()).collect();
    JointTable::from_weights(vars, w).expect("positive weights")
}

fn pick(rng: &mut ChaCha8Rng, pool: &[String], max: usize) -> Vec<String> {
    let mut p = pool.to_vec();
    p.shuffle(rng);
    p.truncate(rng.random_range(0..=max.min(p.len())));
    p
}

/// Random expression; `positive` excludes indicators and quotients so the
/// result can serve as a denominator.
pub fn random_expr(rng: &mut ChaCha8Rng, vars: &[String], depth: u32, positive: bool) -> ProbExpr {
    if depth == 0 || rng.random_bool(0.3) {
        if !positive && rng.random_bool(0.1) {
            let var = vars[rng.random_range(0..vars.len())].clone();
            return ProbExpr::Indicator { var, value: rng.random_range(0..2) };
        }
        let mut target = pick(rng, vars, 2);
        if target.is_empty() {
            target.push(vars[rng.random_range(0..vars.len())].clone());
        }
        let rest: Vec<String> = vars.iter().filter(|v| !target.contains(v)).cloned().collect();
        let given = pick(rng, &rest, 2);
        return ProbExpr::atom(target, given);
    }
    match rng.random_range(0..3) {
        0 => ProbExpr::product(
            (0..rng.random_range(1..=3)).map(|_| random_expr(rng, vars, depth - 1, positive)).collect(),
        ),
        1 if !positive => {
            ProbExpr::quotient(random_expr(rng, vars, depth - 1, false), random_expr(rng, vars, depth - 1, true))
        }
        _ => {
            let mut over = pick(rng, vars, 2);
            if over.is_empty() {
                over.push(vars[0].clone());
            }
            ProbExpr::sum_owned(over, random_expr(rng, vars, depth - 1, positive))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use causalkit::graph::parse_graph;

    #[test]
    fn collider_rules() {
        let g = parse_graph("X -> C; Y -> C; C -> D").unwrap();
        let o = PathOracle::new(&g);
        let (x, y, c, d) = (0, 2, 1, 3);
        assert!(o.separated(&[x], &[y], &[]));
        assert!(!o.separated(&[x], &[y], &[c]));
        assert!(!o.separated(&[x], &[y], &[d]));
    }

    #[test]
    fn dag_counts() {
        assert_eq!(all_dags(3).len(), 25);
        assert_eq!(all_dags(4).len(), 543);
    }
}
