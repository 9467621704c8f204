//! One-shot reproduction of every numeric claim of the six examples.
//!
//! Each check compares a computed value against an independent reference
//! (analytic value, exhaustive enumeration, hand arithmetic or brute-force
//! search). The report holds no timings, so two runs with the same options
//! serialize to identical bytes; timings are returned separately.

use std::time::{Duration, Instant};

use anyhow::{anyhow, Result};
use causalkit::estim::{faithfulness_check, regression_adjustment, stratified_adjustment, EstimError, StratInput};
use causalkit::expr::{simplify, Assignment, JointTable, ProbExpr};
use causalkit::graph::{parse_graph, MixedGraph, NodeSet};
use causalkit::ident::{complex_frontdoor_formula, identify, trapdoor_formula, FrontdoorVars, IdentResult};
use causalkit::scm::{a_rho, build_example, example_graph, random_binary_scm, solve_cyclic, ExampleOptions, Scm};
use causalkit::sep::{d_separated, is_valid_backdoor, SepQuery};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::oracle::{all_dags, random_admg, random_expr, random_query, random_table, PathOracle};

pub const SCHEMA: &str = "repro/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarnessOptions {
    pub quick: bool,
    pub seed: u64,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions { quick: false, seed: 20_240_101 }
    }
}

impl HarnessOptions {
    fn n(&self) -> usize {
        if self.quick {
            10_000
        } else {
            100_000
        }
    }

    /// Absolute tolerance for sampled effect estimates.
    fn ate_tolerance(&self) -> f64 {
        if self.quick {
            0.15
        } else {
            0.05
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Value printed in the source material, when it prints one.
    pub claimed: Option<String>,
    pub computed: Value,
    /// Kind of reference the computed value is compared against.
    pub oracle: &'static str,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section {
    pub id: String,
    pub title: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproReport {
    pub schema: &'static str,
    pub seed: u64,
    pub quick: bool,
    pub n: usize,
    pub examples: Vec<Section>,
    pub general: Vec<Section>,
    pub passed: usize,
    pub failed: usize,
    pub all_pass: bool,
}

impl ReproReport {
    pub fn failures(&self) -> Vec<String> {
        self.examples
            .iter()
            .chain(&self.general)
            .flat_map(|s| s.checks.iter().filter(|c| !c.pass).map(move |c| format!("{}/{}", s.id, c.name)))
            .collect()
    }
}

/// Rounds to 12 significant digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    json!(rounded)
}

struct Builder {
    checks: Vec<Check>,
}

impl Builder {
    fn new() -> Self {
        Builder { checks: Vec::new() }
    }

    fn check(
        &mut self,
        name: &str,
        oracle: &'static str,
        tolerance: Option<f64>,
        pass: bool,
        computed: Value,
    ) -> &mut Check {
        self.checks.push(Check {
            name: name.to_string(),
            claimed: None,
            computed,
            oracle,
            tolerance,
            pass,
            note: None,
        });
        self.checks.last_mut().expect("just pushed")
    }

    fn section(self, id: &str, title: &str) -> Section {
        Section {
            id: id.to_string(),
            title: title.to_string(),
            pass: self.checks.iter().all(|c| c.pass),
            checks: self.checks,
        }
    }
}

/// Runs every check. Returns the report and the wall time of each section.
pub fn run(opts: &HarnessOptions) -> Result<(ReproReport, Vec<(String, Duration)>)> {
    type Job = fn(&HarnessOptions) -> Result<Section>;
    let example_jobs: [Job; 6] = [example1, example2, example3, example4, example5, example6];
    let general_jobs: [Job; 2] = [separation, simplification];
    let mut timings = Vec::new();
    let mut timed = |jobs: &[Job]| -> Result<Vec<Section>> {
        jobs.iter()
            .map(|job| {
                let start = Instant::now();
                let s = job(opts)?;
                timings.push((s.id.clone(), start.elapsed()));
                Ok(s)
            })
            .collect()
    };
    let examples = timed(&example_jobs)?;
    let general = timed(&general_jobs)?;
    let all: Vec<&Check> = examples.iter().chain(&general).flat_map(|s| &s.checks).collect();
    let passed = all.iter().filter(|c| c.pass).count();
    let failed = all.len() - passed;
    let report = ReproReport {
        schema: SCHEMA,
        seed: opts.seed,
        quick: opts.quick,
        n: opts.n(),
        examples,
        general,
        passed,
        failed,
        all_pass: failed == 0,
    };
    Ok((report, timings))
}

fn ate_check(b: &mut Builder, opts: &HarnessOptions, k: u8, set: &[&str]) -> Result<()> {
    let ex = build_example(k, &ExampleOptions::default())?;
    let d = ex.scm.sample(opts.n(), opts.seed + u64::from(k))?;
    let r = regression_adjustment(&d, set)?;
    let truth = ex.meta.true_ate.mean;
    let tol = opts.ate_tolerance();
    b.check(
        "ate-regression-adjustment",
        "analytic",
        Some(tol),
        (r.estimate - truth).abs() < tol,
        json!({ "estimate": num(r.estimate), "se": num(r.se), "truth": num(truth), "covariates": set }),
    );
    Ok(())
}

fn example1(opts: &HarnessOptions) -> Result<Section> {
    let mut b = Builder::new();
    ate_check(&mut b, opts, 1, &["C1", "C2", "C3", "C4"])?;

    let a = a_rho(0.3)?;
    let direct = (1.72f64.sqrt() - 1.0) / 2.0;
    b.check("a-rho", "arithmetic", Some(1e-9), (a - direct).abs() < 1e-9, num(a)).claimed =
        Some("(sqrt(8 rho^2 + 1) - 1)/2".into());

    let (mut psd, mut worst) = (true, 0.0f64);
    for rho in [0.1, 0.3, 0.5, 0.7] {
        let ex = build_example(1, &ExampleOptions { rho, seed: 0 })?;
        let cov = ex.scm.implied_covariance(&["C1", "C2", "C3", "C4"])?;
        psd &= cov.matrix.clone().cholesky().is_some();
        match cov.precision() {
            Some(p) => worst = worst.max(p[(0, 3)].abs()).max(p[(1, 2)].abs()),
            None => worst = f64::INFINITY,
        }
    }
    b.check("covariance-positive-definite", "cholesky", None, psd, json!({ "rho": [0.1, 0.3, 0.5, 0.7] }));
    b.check(
        "precision-zeros",
        "matrix-inverse",
        Some(1e-10),
        worst < 1e-10,
        json!({ "max_abs_entry": num(worst), "entries": ["C1,C4", "C2,C3"] }),
    );
    Ok(b.section("example-1", "undirected covariates"))
}

fn example2(opts: &HarnessOptions) -> Result<Section> {
    let mut b = Builder::new();
    ate_check(&mut b, opts, 2, &["C1", "C2"])?;

    let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 0.0]);
    let e = [0.7, -1.3];
    let sol = solve_cyclic(&m, &[0.0, 0.0], &e)?;
    let hand = [(e[0] + 0.1 * e[1]) / 0.99, (e[1] + 0.1 * e[0]) / 0.99];
    let err = sol.values.iter().zip(hand).map(|(x, h)| (x - h).abs()).fold(0.0, f64::max);
    b.check(
        "cyclic-solve",
        "hand-inverted",
        Some(1e-12),
        err < 1e-12,
        json!({ "max_abs_error": num(err), "condition_number": num(sol.condition) }),
    );

    let ex = build_example(2, &ExampleOptions::default())?;
    let n = opts.n();
    let d = ex.scm.sample(n, opts.seed + 2)?;
    let c1 = d.column("C1")?;
    let mean = c1.iter().sum::<f64>() / n as f64;
    let var = c1.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let truth = 1.01 / (0.99 * 0.99);
    let se = truth * (2.0 / (n as f64 - 1.0)).sqrt();
    b.check(
        "variance-c1",
        "analytic",
        Some(3.0 * se),
        (var - truth).abs() < 3.0 * se,
        json!({ "sampled": num(var), "truth": num(truth), "se": num(se) }),
    );
    Ok(b.section("example-2", "cyclic covariates"))
}

fn example3(opts: &HarnessOptions) -> Result<Section> {
    let mut b = Builder::new();
    ate_check(&mut b, opts, 3, &["C2", "C3"])?;
    let ex = build_example(3, &ExampleOptions::default())?;
    let cov = ex.scm.implied_covariance(&["C1", "C2", "C3", "C4"])?;
    let c14 = cov.get("C1", "C4")?;
    b.check("covariance-c1-c4", "exact", Some(0.0), c14 == 0.0, num(c14));
    let q = SepQuery::named(&ex.graph, &["C1"], &["C4"], &[])?;
    let separated = d_separated(&ex.graph, &q)?;
    b.check("c1-c4-d-connected", "graph", None, !separated, json!({ "d_separated": separated }));
    let v = faithfulness_check(&ex.graph, &cov)?;
    let only = v.len() == 1 && v[0].x == "C1" && v[0].y == "C4" && v[0].given.is_empty();
    b.check("faithfulness-violations", "exact", Some(1e-10), only, serde_json::to_value(&v)?);
    let d = ex.scm.sample(opts.n(), opts.seed + 3)?;
    let rank = regression_adjustment(&d, &["C1", "C2", "C3"]);
    let deficient = matches!(rank, Err(EstimError::RankDeficient { .. }));
    let outcome = match &rank {
        Ok(r) => json!({ "estimate": num(r.estimate) }),
        Err(e) => json!(e.to_string()),
    };
    b.check("collinear-set-rejected", "exact", None, deficient, outcome);
    Ok(b.section("example-3", "deterministic covariates"))
}

fn example4(_: &HarnessOptions) -> Result<Section> {
    let mut b = Builder::new();
    let ex = build_example(4, &ExampleOptions::default())?;
    let truth = ex.meta.true_ate.mean;
    let c = b.check(
        "ate-enumeration",
        "enumeration",
        Some(1e-12),
        (truth.abs() - 0.16).abs() < 1e-12,
        json!({ "value": num(truth), "abs": num(truth.abs()) }),
    );
    c.claimed = Some("-0.16".into());
    c.note = Some("enumeration gives a positive effect; the magnitude is compared".into());

    let t = ex.scm.exact_joint(&["C", "A", "Y"])?;
    let input = StratInput::Table { table: &t, treatment: "A", outcome: "Y" };
    let adjusted = stratified_adjustment(input, &["C"])?.estimate;
    let crude = stratified_adjustment(input, &[])?.estimate;
    let c = b.check(
        "adjusted-on-c",
        "enumeration",
        Some(1e-4),
        (adjusted.abs() - 0.0637).abs() < 1e-4,
        json!({ "value": num(adjusted), "abs": num(adjusted.abs()) }),
    );
    c.claimed = Some("-0.06".into());
    c.note = Some("standardization over C; enumeration gives a positive value".into());
    let gap = (truth - adjusted).abs();
    b.check(
        "adjustment-divergence",
        "enumeration",
        Some(1e-3),
        (gap - 0.096).abs() < 1e-3 && gap > (crude - truth).abs(),
        json!({ "adjusted_gap": num(gap), "unadjusted_gap": num((crude - truth).abs()) }),
    );

    let g = ex.graph.project_declared_latents()?;
    let (a, y) = (g.require("A")?, g.require("Y")?);
    let empty = is_valid_backdoor(&g, a, y, &NodeSet::new())?;
    let with_c = is_valid_backdoor(&g, a, y, &NodeSet::from([g.require("C")?]))?;
    b.check(
        "backdoor-sets",
        "graph",
        None,
        empty.valid && !with_c.valid,
        json!({ "empty": empty.describe(&g), "C": with_c.describe(&g) }),
    );
    Ok(b.section("example-4", "M-bias"))
}

fn bind(pairs: &[(&str, usize)]) -> Assignment {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn observed_table(s: &Scm) -> Result<JointTable> {
    let names = s.observed();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(s.exact_joint(&refs)?)
}

/// P(Y(a) = y) by mechanism replacement.
fn oracle(s: &Scm, a: usize, y: usize) -> Result<f64> {
    Ok(s.intervene(&[("A", a as f64)])?.exact_joint(&["Y"])?.probs()[y])
}

fn identified(g: &MixedGraph) -> Result<ProbExpr> {
    match identify(g, &["A"], &["Y"])?.result {
        IdentResult::Identified { expr, .. } => Ok(expr),
        IdentResult::NotIdentified { .. } => Err(anyhow!("effect of A on Y is not identified")),
    }
}

/// Largest spread over the context value, error against the oracle, gap
/// between formula and the identified expression, and error of the
/// identified expression, over random models on `g`.
fn formula_errors(g: &MixedGraph, formula: &ProbExpr, seeds: std::ops::Range<u64>) -> Result<[f64; 4]> {
    let expr = identified(g)?;
    let mut worst = [0.0f64; 4];
    for seed in seeds {
        let s = random_binary_scm(g, seed)?;
        let t = observed_table(&s)?;
        for a in 0..2 {
            for y in 0..2 {
                let truth = oracle(&s, a, y)?;
                let vals = [0, 1]
                    .map(|c2| formula.eval(&t, &bind(&[("A", a), ("Y", y), ("C2", c2)])))
                    .into_iter()
                    .collect::<Result<Vec<f64>, _>>()?;
                let mut b = bind(&[("A", a), ("Y", y)]);
                for v in expr.free_variables() {
                    b.entry(v).or_insert(0);
                }
                let id = expr.eval(&t, &b)?;
                worst[0] = worst[0].max((vals[0] - vals[1]).abs());
                worst[1] = worst[1].max((vals[0] - truth).abs()).max((vals[1] - truth).abs());
                worst[2] = worst[2].max((vals[0] - id).abs()).max((vals[1] - id).abs());
                worst[3] = worst[3].max((id - truth).abs());
            }
        }
    }
    Ok(worst)
}

const MODELS: u64 = 50;

fn formula_checks(b: &mut Builder, worst: [f64; 4], label: &str) {
    let tol = 1e-10;
    b.check(
        &format!("{label}-invariant-in-c2"),
        "enumeration",
        Some(tol),
        worst[0] < tol,
        json!({ "max_spread": num(worst[0]), "models": MODELS }),
    );
    b.check(
        &format!("{label}-equals-oracle"),
        "enumeration",
        Some(tol),
        worst[1] < tol,
        json!({ "max_abs_error": num(worst[1]), "models": MODELS }),
    );
    b.check(
        &format!("{label}-equals-identify"),
        "enumeration",
        Some(tol),
        worst[2] < tol,
        json!({ "max_abs_gap": num(worst[2]), "models": MODELS }),
    );
    b.check(
        "identify-equals-oracle",
        "enumeration",
        Some(tol),
        worst[3] < tol,
        json!({ "max_abs_error": num(worst[3]), "models": MODELS }),
    );
}

fn example5(opts: &HarnessOptions) -> Result<Section> {
    let mut b = Builder::new();
    let g = example_graph("fig2b").expect("reference graph");
    let f = trapdoor_formula("Y", "A", "C1", "C2");
    formula_checks(&mut b, formula_errors(&g, &f, opts.seed..opts.seed + MODELS)?, "trapdoor-formula");
    Ok(b.section("example-5", "trapdoor"))
}

/// The complex front-door graph with the second child of U2 moved from C2
/// to A.
const FIG2C_U2_ON_A: &str = "latent U1; latent U2; latent U3; latent U4
C1 -> C2; C2 -> C3; C3 -> A; A -> Z; Z -> Y
U1 -> C1; U1 -> Z; U2 -> A; U2 -> C1; U3 -> C3; U3 -> A; U4 -> A; U4 -> Y
";

fn example6(opts: &HarnessOptions) -> Result<Section> {
    let mut b = Builder::new();
    let g = example_graph("fig2c").expect("reference graph");
    let f = complex_frontdoor_formula(FrontdoorVars::default());
    let seeds = opts.seed..opts.seed + MODELS;
    let worst = formula_errors(&g, &f, seeds.clone())?;
    formula_checks(&mut b, worst, "frontdoor-formula");
    if worst[1] >= 1e-10 {
        let variant = formula_errors(&parse_graph(FIG2C_U2_ON_A)?, &f, seeds)?;
        let exact = variant[..3].iter().all(|&e| e < 1e-10);
        let c = b.check(
            "frontdoor-formula-with-u2-on-c1-and-a",
            "enumeration",
            Some(1e-10),
            exact,
            json!({ "max_spread": num(variant[0]), "max_abs_error": num(variant[1]), "models": MODELS }),
        );
        c.note = Some(
            "on the reference graph U1 and U2 collide at C1, so conditioning on C1 inside g1 and g2 leaves a \
             dependence on c2; with U2 pointing into C1 and A the same formula is exact"
                .into(),
        );
    }
    Ok(b.section("example-6", "complex front-door"))
}

fn separation(opts: &HarnessOptions) -> Result<Section> {
    let mut b = Builder::new();
    let max_nodes = if opts.quick { 4 } else { 5 };
    let (mut queries, mut wrong) = (0usize, 0usize);
    let mut graphs = 0usize;
    for n in 2..=max_nodes {
        for g in all_dags(n) {
            graphs += 1;
            let o = PathOracle::new(&g);
            for x in 0..n {
                for y in x + 1..n {
                    let rest: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
                    for mask in 0u32..1 << rest.len() {
                        let z: Vec<usize> =
                            rest.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &v)| v).collect();
                        let q = SepQuery::new(ids(&[x]), ids(&[y]), ids(&z))?;
                        queries += 1;
                        if d_separated(&g, &q)? != o.separated(&[x], &[y], &z) {
                            wrong += 1;
                        }
                    }
                }
            }
        }
    }
    b.check(
        "all-small-dags",
        "path-enumeration",
        Some(0.0),
        wrong == 0,
        json!({ "max_nodes": max_nodes, "graphs": graphs, "queries": queries, "disagreements": wrong }),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let count = if opts.quick { 100 } else { 500 };
    let (mut queries, mut wrong) = (0usize, 0usize);
    for _ in 0..count {
        let n = rng.random_range(2..=6);
        let g = random_admg(&mut rng, n);
        let o = PathOracle::new(&g);
        for _ in 0..10 {
            let [x, y, z] = random_query(&mut rng, n);
            queries += 1;
            if d_separated(&g, &SepQuery::new(ids(&x), ids(&y), ids(&z))?)? != o.separated(&x, &y, &z) {
                wrong += 1;
            }
        }
    }
    b.check(
        "random-admgs",
        "path-enumeration",
        Some(0.0),
        wrong == 0,
        json!({ "graphs": count, "queries": queries, "disagreements": wrong }),
    );
    Ok(b.section("separation", "m-separation"))
}

fn ids(v: &[usize]) -> NodeSet {
    v.iter().map(|&i| causalkit::graph::NodeId(i)).collect()
}

fn simplification(opts: &HarnessOptions) -> Result<Section> {
    let mut b = Builder::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5157);
    let target = if opts.quick { 200 } else { 1000 };
    let (mut evaluated, mut worst) = (0usize, 0.0f64);
    let mut broken = 0usize;
    while evaluated < target {
        let k = rng.random_range(2..=4);
        let t = random_table(&mut rng, k);
        let vars: Vec<String> = (0..k).map(|i| format!("V{i}")).collect();
        let e = random_expr(&mut rng, &vars, 3, false);
        let bind: Assignment = e
            .free_variables()
            .into_iter()
            .map(|v| {
                let card = t.card(&v).expect("generated over the table");
                (v, rng.random_range(0..card))
            })
            .collect();
        let Ok(v) = e.eval(&t, &bind) else { continue };
        evaluated += 1;
        match simplify(&e).eval(&t, &bind) {
            Ok(w) => worst = worst.max((v - w).abs() / v.abs().max(1.0)),
            Err(_) => broken += 1,
        }
    }
    b.check(
        "simplify-preserves-value",
        "evaluation",
        Some(1e-12),
        worst <= 1e-12 && broken == 0,
        json!({ "pairs": evaluated, "max_scaled_error": num(worst), "failed_evaluations": broken }),
    );

    let mut all_one = true;
    for k in 1..=4 {
        let vars: Vec<String> = (0..k).map(|i| format!("V{i}")).collect();
        let refs: Vec<&str> = vars.iter().map(String::as_str).collect();
        let e = ProbExpr::sum(&refs, ProbExpr::p(&refs, &[]));
        let t = random_table(&mut rng, k);
        all_one &= simplify(&e) == ProbExpr::one() && (e.eval(&t, &Assignment::new())? - 1.0).abs() < 1e-12;
    }
    b.check("normalization-to-one", "rewrite", None, all_one, json!({ "max_variables": 4 }));
    Ok(b.section("simplify", "expression rewriting"))
}
