//! The six worked examples and the reference graphs they live on.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Effect, Formula, Mechanism, Scm, ScmBuilder, ScmError};
use crate::graph::{parse_graph, EdgeKind, MixedGraph, NodeSet};

/// Reference graphs in the graph DSL, keyed by figure name.
pub const FIGURES: &[(&str, &str)] = &[
    ("fig1a", "C1 -- C2; C1 -- C3; C2 -- C4; C3 -- C4\nC1 -> A; C2 -> A; C1 -> Y; C2 -> Y\nA -> Y\n"),
    ("fig1b", "C1 -> C2; C2 -> C1\nC1 -> A; C2 -> A; C1 -> Y; C2 -> Y\nA -> Y\n"),
    ("fig1c", "deterministic C1; deterministic C4\nC2 -> C1; C3 -> C1; C2 -> C4; C3 -> C4\nC1 -> A; C4 -> Y\nA -> Y\n"),
    ("fig1d", "C -> A; C -> Y; A -> Y\n"),
    ("fig2a", "latent U1; latent U2\nU1 -> A; U1 -> C2; U2 -> C2; U2 -> Y\nA -> Y\n"),
    ("fig2b", "latent U1; latent U2\nU1 -> C1; U1 -> A; U2 -> C1; U2 -> Y\nC1 -> C2; C2 -> A; A -> Y\n"),
    (
        "fig2c",
        "latent U1; latent U2; latent U3; latent U4\n\
         C1 -> C2; C2 -> C3; C3 -> A; A -> Z; Z -> Y\n\
         U1 -> C1; U1 -> Z; U2 -> C2; U2 -> C1; U3 -> C3; U3 -> A; U4 -> A; U4 -> Y\n",
    ),
    ("fig3a", "C -> A; C -> Y; A -> Y\n"),
    ("fig3b", "latent U\nA -> Z; Z -> Y; U -> A; U -> Y\n"),
    ("fig3c", "latent U\nA -> Z; Z -> Y; U -> A; U -> Y; C -> A; C -> Z\n"),
];

pub fn example_graph(name: &str) -> Option<MixedGraph> {
    FIGURES.iter().find(|(n, _)| *n == name).map(|(_, text)| parse_graph(text).expect("reference graphs parse"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleOptions {
    /// Correlation parameter of example 1.
    pub rho: f64,
    /// Seed for the randomly parameterized examples 5 and 6.
    pub seed: u64,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        ExampleOptions { rho: 0.3, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleMeta {
    pub id: u8,
    pub title: &'static str,
    pub treatment: String,
    pub outcome: String,
    /// A valid adjustment set, when one exists.
    pub adjustment: Option<Vec<String>>,
    pub true_ate: Effect,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct Example {
    pub scm: Scm,
    /// Causal graph with noise terms projected out; confounders that the
    /// example names (U1, U2, ...) stay as latent nodes.
    pub graph: MixedGraph,
    pub meta: ExampleMeta,
}

/// `(√(8ρ² + 1) − 1) / 2`, the off-diagonal that makes the example 1
/// precision matrix vanish at (C1, C4) and (C2, C3).
pub fn a_rho(rho: f64) -> Result<f64, ScmError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(ScmError::BadParameter(format!("rho must lie in (0, 1), got {rho}")));
    }
    Ok(((8.0 * rho * rho + 1.0).sqrt() - 1.0) / 2.0)
}

fn unit_normal() -> Mechanism {
    Mechanism::ExogGaussian { mean: 0.0, variance: 1.0 }
}

fn linear(intercept: f64, parents: &[&str], noise: &str) -> Mechanism {
    Mechanism::LinearEq {
        intercept,
        coefs: parents.iter().map(|p| (p.to_string(), 1.0)).collect(),
        noise: Some(noise.to_string()),
    }
}

/// `A ~ Bern(logistic(Σ parents))` with `Y(0) = 4 + Σ adj + ε0` and
/// `Y(1) = 2 + Σ adj + ε1`.
fn treatment_and_outcome(b: ScmBuilder, treat_on: &[&str], outcome_on: &[&str]) -> ScmBuilder {
    b.latent("E0", unit_normal())
        .latent("E1", unit_normal())
        .node(
            "A",
            Mechanism::LogisticBernoulli {
                intercept: 0.0,
                coefs: treat_on.iter().map(|p| (p.to_string(), 1.0)).collect(),
            },
        )
        .node(
            "Y",
            Mechanism::Switch {
                treatment: "A".into(),
                arms: vec![linear(4.0, outcome_on, "E0"), linear(2.0, outcome_on, "E1")],
            },
        )
        .query("A", "Y")
}

fn project_noise(scm: &Scm, noise: &[&str]) -> Result<MixedGraph, ScmError> {
    let g = scm.graph();
    let set: NodeSet = g.ids(noise.iter().copied())?;
    Ok(g.latent_project(&set)?)
}

fn draw_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    let clamped: Vec<f64> = e.iter().map(|x| (x / total).clamp(0.05, 0.95)).collect();
    let total: f64 = clamped.iter().sum();
    clamped.iter().map(|x| x / total).collect()
}

/// Binary SCM on a DAG: roots are Bernoulli, every other node has a
/// probability table over its parents. Parameters come from a seeded
/// uniform simplex draw clamped to [0.05, 0.95]. Latent flags are kept.
pub fn random_binary_scm(g: &MixedGraph, seed: u64) -> Result<Scm, ScmError> {
    if g.has_kind(EdgeKind::Bidirected) || g.has_kind(EdgeKind::Undirected) {
        return Err(ScmError::BadParameter("random binary models need a DAG".into()));
    }
    let order = g.topological_order()?;
    let rank: BTreeMap<_, _> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Scm::builder();
    for &v in &order {
        let name = g.name(v);
        let mut parents: Vec<_> = g.parents(v).into_iter().collect();
        parents.sort_by_key(|p| rank[p]);
        let mech = if parents.is_empty() {
            Mechanism::ExogBernoulli { p: draw_simplex(&mut rng, 2)[1] }
        } else {
            Mechanism::TableCpd {
                parents: parents.iter().map(|&p| g.name(p).to_string()).collect(),
                rows: (0..1usize << parents.len()).map(|_| draw_simplex(&mut rng, 2)).collect(),
            }
        };
        b = if g.is_latent(v) { b.latent(name, mech) } else { b.node(name, mech) };
    }
    b.build()
}

fn finish(
    id: u8,
    title: &'static str,
    scm: Scm,
    graph: MixedGraph,
    adjustment: Option<&[&str]>,
    params: BTreeMap<String, f64>,
) -> Result<Example, ScmError> {
    let true_ate = scm.true_ate()?;
    let (t, y) = scm.query()?;
    let meta = ExampleMeta {
        id,
        title,
        treatment: t.to_string(),
        outcome: y.to_string(),
        adjustment: adjustment.map(|s| s.iter().map(|v| v.to_string()).collect()),
        true_ate,
        params,
    };
    Ok(Example { scm, graph, meta })
}

/// Builds example `k` (1 to 6).
pub fn build_example(k: u8, opts: &ExampleOptions) -> Result<Example, ScmError> {
    match k {
        1 => {
            let a = a_rho(opts.rho)?;
            let r = opts.rho;
            let cov = vec![vec![1.0, r, r, a], vec![r, 1.0, a, r], vec![r, a, 1.0, r], vec![a, r, r, 1.0]];
            let b =
                Scm::builder().block(&["C1", "C2", "C3", "C4"], Mechanism::MvNormalBlock { mean: vec![0.0; 4], cov });
            let scm = treatment_and_outcome(b, &["C1", "C2"], &["C1", "C2"]).build()?;
            let graph = project_noise(&scm, &["E0", "E1"])?;
            let params = BTreeMap::from([("rho".to_string(), r), ("a_rho".to_string(), a)]);
            finish(1, "undirected covariates", scm, graph, Some(&["C1", "C2", "C3", "C4"]), params)
        }
        2 => {
            let b = Scm::builder().latent("E2", unit_normal()).latent("E3", unit_normal()).block(
                &["C1", "C2"],
                Mechanism::CyclicLinearBlock {
                    b: vec![vec![0.0, 0.1], vec![0.1, 0.0]],
                    intercepts: vec![0.0, 0.0],
                    noise: vec!["E2".into(), "E3".into()],
                },
            );
            let scm = treatment_and_outcome(b, &["C1", "C2"], &["C1", "C2"]).build()?;
            let graph = project_noise(&scm, &["E0", "E1", "E2", "E3"])?;
            finish(2, "cyclic covariates", scm, graph, Some(&["C1", "C2"]), BTreeMap::new())
        }
        3 => {
            let b = Scm::builder()
                .node("C2", unit_normal())
                .node("C3", unit_normal())
                .node("C1", Mechanism::Deterministic { formula: Formula::var("C2") + Formula::var("C3"), card: None })
                .node("C4", Mechanism::Deterministic { formula: Formula::var("C2") - Formula::var("C3"), card: None });
            let scm = treatment_and_outcome(b, &["C1"], &["C4"]).build()?;
            let graph = project_noise(&scm, &["E0", "E1"])?;
            finish(3, "deterministic covariates", scm, graph, Some(&["C2", "C3"]), BTreeMap::new())
        }
        4 => {
            let bern_on = |parent: &str, p0: f64, p1: f64| Mechanism::TableCpd {
                parents: vec![parent.to_string()],
                rows: vec![vec![1.0 - p0, p0], vec![1.0 - p1, p1]],
            };
            let scm = Scm::builder()
                .latent("U1", Mechanism::ExogBernoulli { p: 0.6 })
                .latent("U2", Mechanism::ExogBernoulli { p: 0.4 })
                .node(
                    "C",
                    Mechanism::Deterministic {
                        formula: (Formula::var("U1") + Formula::var("U2")).modulo(2.0),
                        card: Some(2),
                    },
                )
                .node("A", bern_on("U1", 0.1, 0.9))
                .node(
                    "Y",
                    Mechanism::Switch {
                        treatment: "A".into(),
                        arms: vec![bern_on("U2", 0.1, 0.9), bern_on("U2", 0.9, 0.1)],
                    },
                )
                .query("A", "Y")
                .build()?;
            let graph = scm.graph().clone();
            finish(4, "M-bias", scm, graph, Some(&[]), BTreeMap::new())
        }
        5 | 6 => {
            let (fig, title) = if k == 5 { ("fig2b", "trapdoor") } else { ("fig2c", "complex front-door") };
            let g = example_graph(fig).expect("known figure");
            let mut scm = random_binary_scm(&g, opts.seed)?;
            scm.set_query("A", "Y")?;
            let params = BTreeMap::from([("seed".to_string(), opts.seed as f64)]);
            finish(k, title, scm, g, None, params)
        }
        _ => Err(ScmError::BadParameter(format!("no example {k}; choose 1 to 6"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_rho_values() {
        assert!((a_rho(0.3).unwrap() - (1.72f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert!((a_rho(0.5).unwrap() - 0.366_025_403_784_438_6).abs() < 1e-12);
        assert!(a_rho(1e-9).unwrap() < 1e-15);
        assert!(a_rho(0.0).is_err());
        assert!(a_rho(1.0).is_err());
    }

    #[test]
    fn figures_parse() {
        for (name, _) in FIGURES {
            assert!(example_graph(name).is_some(), "{name}");
        }
        assert!(example_graph("fig9").is_none());
    }

    #[test]
    fn example_graphs_match_figures() {
        let o = ExampleOptions::default();
        for (k, fig) in [(1, "fig1a"), (2, "fig1b"), (3, "fig1c")] {
            let ex = build_example(k, &o).unwrap();
            assert!(ex.graph.same_structure(&example_graph(fig).unwrap()), "example {k}:\n{}", ex.graph);
        }
        let ex = build_example(4, &o).unwrap();
        let m =
            parse_graph("latent U1; latent U2; U1 -> A; U1 -> C; U2 -> C; U2 -> Y; A -> Y; deterministic C").unwrap();
        assert!(ex.graph.same_structure(&m), "{}", ex.graph);
    }

    #[test]
    fn unknown_example() {
        assert!(matches!(build_example(7, &ExampleOptions::default()), Err(ScmError::BadParameter(_))));
    }

    #[test]
    fn random_models_are_seeded() {
        let g = example_graph("fig3a").unwrap();
        let a = random_binary_scm(&g, 3).unwrap();
        let b = random_binary_scm(&g, 3).unwrap();
        let c = random_binary_scm(&g, 4).unwrap();
        assert_eq!(a.units(), b.units());
        assert_ne!(a.units(), c.units());
    }
}
