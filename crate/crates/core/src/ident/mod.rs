//! Identification of interventional distributions in ADMGs.
//!
//! [`identify`] runs the recursive c-component (ID) algorithm and returns
//! either a [`ProbExpr`] over the observed joint or the pair of districts at
//! which the recursion failed. The closed-form trapdoor and nested
//! front-door formulas live in [`formulas`] and serve as independent
//! references for the same quantities.

pub mod formulas;

pub use formulas::{complex_frontdoor_formula, complex_frontdoor_parts, trapdoor_formula, FrontdoorVars};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::expr::ProbExpr;
use crate::graph::{EdgeKind, GraphError, MixedGraph, NodeId, NodeSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentError {
    #[error("graph is not an ADMG: {0}")]
    NotADMG(String),
    #[error("treatment or outcome set is empty")]
    EmptyQuery,
    #[error("treatments and outcomes overlap")]
    OverlappingQuery,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdentResult {
    Identified {
        expr: ProbExpr,
        outcomes: Vec<String>,
        treatments: Vec<String>,
        /// Free variables of `expr` besides outcomes and treatments; their
        /// values may be fixed arbitrarily (trapdoor variables).
        context: Vec<String>,
    },
    NotIdentified {
        /// The single district the recursion was working in.
        district: Vec<String>,
        /// The district of the graph without treatments that could not be
        /// separated from it.
        subset: Vec<String>,
    },
}

impl IdentResult {
    pub fn expr(&self) -> Option<&ProbExpr> {
        match self {
            IdentResult::Identified { expr, .. } => Some(expr),
            IdentResult::NotIdentified { .. } => None,
        }
    }

    pub fn is_identified(&self) -> bool {
        matches!(self, IdentResult::Identified { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Identification {
    pub result: IdentResult,
    /// One line per recursion step, indented by depth.
    pub trace: Vec<String>,
}

/// Current distribution inside the recursion.
#[derive(Debug, Clone)]
enum Dist {
    /// Observational marginal over the current variables.
    Observed,
    /// Chain-rule factors in topological order, one per current variable.
    Factors(Vec<(NodeId, ProbExpr)>),
    /// Arbitrary joint over the current variables.
    Joint(ProbExpr),
}

struct Failure {
    district: NodeSet,
    subset: NodeSet,
}

struct Recursion<'a> {
    g: &'a MixedGraph,
    order: Vec<NodeId>,
    trace: Vec<String>,
}

impl<'a> Recursion<'a> {
    fn names(&self, set: &NodeSet) -> Vec<String> {
        self.sorted(set).into_iter().map(|v| self.g.name(v).to_string()).collect()
    }

    fn fmt_set(&self, set: &NodeSet) -> String {
        format!("{{{}}}", self.names(set).join(","))
    }

    /// `set` in topological order.
    fn sorted(&self, set: &NodeSet) -> Vec<NodeId> {
        self.order.iter().copied().filter(|v| set.contains(v)).collect()
    }

    fn log(&mut self, depth: usize, line: String) {
        self.trace.push(format!("{}{}", "  ".repeat(depth), line));
    }

    fn var_names(&self, set: &NodeSet) -> Vec<String> {
        self.names(set)
    }

    /// Ancestors of `y` inside `within`, ignoring edges into `cut`.
    fn ancestors(&self, y: &NodeSet, within: &NodeSet, cut: &NodeSet) -> NodeSet {
        let mut seen: NodeSet = y.iter().copied().filter(|v| within.contains(v)).collect();
        let mut stack: Vec<NodeId> = seen.iter().copied().collect();
        while let Some(v) = stack.pop() {
            if cut.contains(&v) {
                continue;
            }
            for p in self.g.parents(v) {
                if within.contains(&p) && seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// Bidirected components of the subgraph induced by `within`, ordered by
    /// their earliest member in topological order.
    fn districts(&self, within: &NodeSet) -> Vec<NodeSet> {
        let mut out: Vec<NodeSet> = Vec::new();
        let mut assigned = NodeSet::new();
        for v in self.sorted(within) {
            if assigned.contains(&v) {
                continue;
            }
            let mut comp = NodeSet::from([v]);
            let mut stack = vec![v];
            while let Some(u) = stack.pop() {
                for e in self.g.incident(u).filter(|e| e.kind == EdgeKind::Bidirected) {
                    let w = e.other(u).expect("incident");
                    if within.contains(&w) && comp.insert(w) {
                        stack.push(w);
                    }
                }
            }
            assigned.extend(comp.iter().copied());
            out.push(comp);
        }
        out
    }

    fn joint_expr(&self, dist: &Dist, vars: &NodeSet) -> ProbExpr {
        match dist {
            Dist::Observed => ProbExpr::atom(self.var_names(vars), Vec::new()),
            Dist::Factors(fs) => ProbExpr::product(fs.iter().map(|(_, f)| f.clone()).collect()),
            Dist::Joint(q) => q.clone(),
        }
    }

    fn marginal(&self, dist: &Dist, vars: &NodeSet, keep: &NodeSet) -> ProbExpr {
        if let Dist::Observed = dist {
            return ProbExpr::atom(self.var_names(keep), Vec::new());
        }
        let drop: NodeSet = vars.difference(keep).copied().collect();
        let joint = self.joint_expr(dist, vars);
        if drop.is_empty() {
            joint
        } else {
            ProbExpr::sum_owned(self.var_names(&drop), joint)
        }
    }

    /// Conditional of `v` given every earlier current variable.
    fn conditional(&self, dist: &Dist, vars: &NodeSet, v: NodeId) -> ProbExpr {
        let ordered = self.sorted(vars);
        let pos = ordered.iter().position(|&u| u == v).expect("v in vars");
        let before: NodeSet = ordered[..pos].iter().copied().collect();
        match dist {
            Dist::Observed => ProbExpr::atom(vec![self.g.name(v).to_string()], self.var_names(&before)),
            Dist::Factors(fs) => {
                fs.iter().find(|(u, _)| *u == v).map(|(_, f)| f.clone()).expect("factor for every variable")
            }
            Dist::Joint(_) => {
                let upto: NodeSet = ordered[..=pos].iter().copied().collect();
                let num = self.marginal(dist, vars, &upto);
                let den = self.marginal(dist, vars, &before);
                ProbExpr::quotient(num, den)
            }
        }
    }

    fn id(&mut self, y: &NodeSet, x: &NodeSet, dist: &Dist, vars: &NodeSet, depth: usize) -> Result<ProbExpr, Failure> {
        self.log(depth, format!("ID(y={}, x={}) over {}", self.fmt_set(y), self.fmt_set(x), self.fmt_set(vars)));

        // 1: no intervention left
        if x.is_empty() {
            self.log(depth, format!("line 1: marginal of {}", self.fmt_set(y)));
            return Ok(self.marginal(dist, vars, y));
        }

        // 2: drop non-ancestors of y
        let an_y = self.ancestors(y, vars, &NodeSet::new());
        if an_y != *vars {
            let dropped: NodeSet = vars.difference(&an_y).copied().collect();
            self.log(depth, format!("line 2: sum out non-ancestors {}", self.fmt_set(&dropped)));
            let next = match dist {
                Dist::Observed => Dist::Observed,
                _ => Dist::Joint(self.marginal(dist, vars, &an_y)),
            };
            let x2: NodeSet = x.intersection(&an_y).copied().collect();
            return self.id(y, &x2, &next, &an_y, depth + 1);
        }

        // 3: intervene on everything that cannot affect y once x is fixed
        let an_cut = self.ancestors(y, vars, x);
        let w: NodeSet = vars.iter().copied().filter(|v| !x.contains(v) && !an_cut.contains(v)).collect();
        if !w.is_empty() {
            self.log(depth, format!("line 3: also intervene on {}", self.fmt_set(&w)));
            let x2: NodeSet = x.union(&w).copied().collect();
            return self.id(y, &x2, dist, vars, depth + 1);
        }

        let rest: NodeSet = vars.difference(x).copied().collect();
        let parts = self.districts(&rest);

        // 4: factorize over districts of G \ X
        if parts.len() > 1 {
            self.log(
                depth,
                format!("line 4: districts {}", parts.iter().map(|s| self.fmt_set(s)).collect::<Vec<_>>().join(" ")),
            );
            let mut factors = Vec::new();
            for s in &parts {
                let others: NodeSet = vars.difference(s).copied().collect();
                factors.push(self.id(s, &others, dist, vars, depth + 1)?);
            }
            let bound: NodeSet = vars.iter().copied().filter(|v| !y.contains(v) && !x.contains(v)).collect();
            let body = ProbExpr::product(factors);
            return Ok(if bound.is_empty() { body } else { ProbExpr::sum_owned(self.var_names(&bound), body) });
        }

        let s = parts.into_iter().next().expect("rest is non-empty");
        let whole = self.districts(vars);

        // 5: hedge
        if whole.len() == 1 {
            self.log(depth, format!("line 5: fail, district {} vs {}", self.fmt_set(vars), self.fmt_set(&s)));
            return Err(Failure { district: vars.clone(), subset: s });
        }

        // 6: s is itself a district of G
        if whole.contains(&s) {
            self.log(depth, format!("line 6: {} is a district", self.fmt_set(&s)));
            let factors: Vec<ProbExpr> = self.sorted(&s).into_iter().map(|v| self.conditional(dist, vars, v)).collect();
            let bound: NodeSet = s.difference(y).copied().collect();
            let body = ProbExpr::product(factors);
            return Ok(if bound.is_empty() { body } else { ProbExpr::sum_owned(self.var_names(&bound), body) });
        }

        // 7: recurse into the district of G containing s
        let bigger = whole.into_iter().find(|d| s.is_subset(d)).expect("districts of G \\ X refine districts of G");
        self.log(depth, format!("line 7: restrict to district {}", self.fmt_set(&bigger)));
        let factors: Vec<(NodeId, ProbExpr)> =
            self.sorted(&bigger).into_iter().map(|v| (v, self.conditional(dist, vars, v))).collect();
        let x2: NodeSet = x.intersection(&bigger).copied().collect();
        self.id(y, &x2, &Dist::Factors(factors), &bigger, depth + 1)
    }
}

/// Identifies P(outcomes | do(treatments)) in `g`.
///
/// Nodes flagged latent are projected out first. The returned expression is
/// not simplified; pass it through [`crate::expr::simplify`] for display.
pub fn identify(g: &MixedGraph, treatments: &[&str], outcomes: &[&str]) -> Result<Identification, IdentError> {
    if treatments.is_empty() || outcomes.is_empty() {
        return Err(IdentError::EmptyQuery);
    }
    let g = if g.latents().is_empty() { g.clone() } else { g.project_declared_latents()? };
    if g.has_kind(EdgeKind::Undirected) {
        return Err(IdentError::NotADMG("undirected edges present".into()));
    }
    let order = g.topological_order().map_err(|e| IdentError::NotADMG(e.to_string()))?;
    let x = g.ids(treatments.iter().copied())?;
    let y = g.ids(outcomes.iter().copied())?;
    if !x.is_disjoint(&y) {
        return Err(IdentError::OverlappingQuery);
    }

    let mut rec = Recursion { g: &g, order, trace: Vec::new() };
    let all = g.all_nodes();
    let outcome = rec.id(&y, &x, &Dist::Observed, &all, 0);
    let result = match outcome {
        Ok(expr) => {
            let named: BTreeSet<String> = x.union(&y).map(|&v| g.name(v).to_string()).collect();
            let context = expr.free_variables().into_iter().filter(|v| !named.contains(v)).collect();
            IdentResult::Identified { expr, outcomes: rec.names(&y), treatments: rec.names(&x), context }
        }
        Err(f) => IdentResult::NotIdentified { district: rec.names(&f.district), subset: rec.names(&f.subset) },
    };
    Ok(Identification { result, trace: rec.trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::simplify;
    use crate::graph::parse_graph;

    #[test]
    fn bow_is_not_identified() {
        let g = parse_graph("A -> Y; A <-> Y;").unwrap();
        let id = identify(&g, &["A"], &["Y"]).unwrap();
        match id.result {
            IdentResult::NotIdentified { district, subset } => {
                assert_eq!(district, vec!["A", "Y"]);
                assert_eq!(subset, vec!["Y"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backdoor_graph_gives_adjustment_formula() {
        let g = parse_graph("A -> Y; C -> A; C -> Y;").unwrap();
        let id = identify(&g, &["A"], &["Y"]).unwrap();
        let e = simplify(id.result.expr().unwrap());
        assert_eq!(e.to_text(), "Σ_{c} P(c) P(y|a,c)");
    }

    #[test]
    fn frontdoor_is_identified() {
        let g = parse_graph("latent U; U -> A; U -> Y; A -> Z; Z -> Y;").unwrap();
        let id = identify(&g, &["A"], &["Y"]).unwrap();
        assert!(id.result.is_identified());
        assert!(!id.trace.is_empty());
    }

    #[test]
    fn trapdoor_context_variable() {
        let g = parse_graph("C1 -> C2; C2 -> A; A -> Y; A <-> C1; C1 <-> Y;").unwrap();
        let id = identify(&g, &["A"], &["Y"]).unwrap();
        match &id.result {
            IdentResult::Identified { context, .. } => assert_eq!(context, &vec!["C2".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
        let e = simplify(id.result.expr().unwrap());
        assert_eq!(e.to_text(), "(Σ_{c1} P(a|c1,c2) P(c1) P(y|a,c1,c2)) / (Σ_{c1} P(a|c1,c2) P(c1))");
    }

    #[test]
    fn query_errors() {
        let g = parse_graph("A -> Y; C -- A;").unwrap();
        assert!(matches!(identify(&g, &["A"], &["Y"]), Err(IdentError::NotADMG(_))));
        let g = parse_graph("A -> Y; Y -> A;").unwrap();
        assert!(matches!(identify(&g, &["A"], &["Y"]), Err(IdentError::NotADMG(_))));
        let g = parse_graph("A -> Y").unwrap();
        assert_eq!(identify(&g, &[], &["Y"]), Err(IdentError::EmptyQuery));
        assert_eq!(identify(&g, &["A"], &["A"]), Err(IdentError::OverlappingQuery));
        assert!(matches!(identify(&g, &["B"], &["Y"]), Err(IdentError::Graph(_))));
    }

    #[test]
    fn deterministic_output() {
        let g = parse_graph("C3 -> A; A -> Z; Z -> Y; C1 -> C2; C2 -> C3; C1 <-> Z; C1 <-> C2; C3 <-> A; A <-> Y;")
            .unwrap();
        let a = identify(&g, &["A"], &["Y"]).unwrap();
        let b = identify(&g, &["A"], &["Y"]).unwrap();
        assert_eq!(a.result.expr().unwrap().to_text(), b.result.expr().unwrap().to_text());
        assert_eq!(a.trace, b.trace);
    }
}
