//! Structural causal models.
//!
//! An [`Scm`] is an ordered list of [`Unit`]s. Each unit owns a
//! [`Mechanism`] and writes one or more variables (block mechanisms such as
//! a multivariate normal or a cyclic linear system write several). Units may
//! only read variables written by earlier units, so the unit order is a
//! valid evaluation order.
//!
//! Potential outcomes are expressed with [`Mechanism::Switch`]: one arm per
//! treatment value, and the observed outcome is the arm selected by the
//! realized treatment. Sampling evaluates every arm with the same noise, so
//! the potential-outcome columns and the outcome under intervention agree
//! row by row.

mod enumerate;
mod examples;
mod linear;
mod rng;
mod sample;

pub use enumerate::{Effect, EffectMethod, MAX_STATES};
pub use examples::{
    a_rho, build_example, example_graph, random_binary_scm, Example, ExampleMeta, ExampleOptions, FIGURES,
};
pub use linear::{solve_cyclic, Covariance, CyclicSolution, SINGULAR_TOLERANCE};
pub use rng::RowRng;
pub use sample::Dataset;

use std::collections::BTreeMap;
use std::ops;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::ExprError;
use crate::graph::{EdgeKind, GraphError, MixedGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScmError {
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` is defined twice")]
    DuplicateVariable(String),
    #[error("`{var}` reads `{parent}` before it is defined")]
    OrderViolation { var: String, parent: String },
    #[error("probability row for `{var}` sums to {sum}")]
    NotNormalized { var: String, sum: f64 },
    #[error("cyclic system is singular (smallest singular value {min_singular:e})")]
    CyclicUnsolvable { min_singular: f64 },
    #[error("mechanism of `{0}` is not linear")]
    NonLinearMechanism(String),
    #[error("variable `{0}` does not have a finite domain")]
    NotDiscrete(String),
    #[error("state space of {0} configurations exceeds the enumeration limit")]
    StateSpaceTooLarge(u128),
    #[error("model has no treatment/outcome pair")]
    NoQuery,
    #[error("cannot intervene on `{0}`: it is written by a block mechanism")]
    BlockIntervention(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Arithmetic over earlier variables, used by deterministic mechanisms.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Var(String),
    Const(f64),
    Add(Box<Formula>, Box<Formula>),
    Sub(Box<Formula>, Box<Formula>),
    Mul(Box<Formula>, Box<Formula>),
    /// Euclidean remainder, always non-negative for a positive modulus.
    Mod(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn var(name: &str) -> Self {
        Formula::Var(name.to_string())
    }

    pub fn modulo(self, m: f64) -> Self {
        Formula::Mod(Box::new(self), Box::new(Formula::Const(m)))
    }

    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<String>) {
        match self {
            Formula::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Formula::Const(_) => {}
            Formula::Add(a, b) | Formula::Sub(a, b) | Formula::Mul(a, b) | Formula::Mod(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }
}

impl ops::Add for Formula {
    type Output = Formula;
    fn add(self, rhs: Formula) -> Formula {
        Formula::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Formula {
    type Output = Formula;
    fn sub(self, rhs: Formula) -> Formula {
        Formula::Sub(Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Formula {
    type Output = Formula;
    fn mul(self, rhs: Formula) -> Formula {
        Formula::Mul(Box::new(self), Box::new(rhs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    ExogGaussian {
        mean: f64,
        variance: f64,
    },
    ExogBernoulli {
        p: f64,
    },
    /// Writes every output of its unit jointly.
    MvNormalBlock {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    /// `intercept + Σ coef·parent + noise` (noise enters with coefficient 1).
    LinearEq {
        intercept: f64,
        coefs: Vec<(String, f64)>,
        noise: Option<String>,
    },
    /// Bernoulli with success probability `logistic(intercept + Σ coef·parent)`.
    LogisticBernoulli {
        intercept: f64,
        coefs: Vec<(String, f64)>,
    },
    Deterministic {
        formula: Formula,
        card: Option<usize>,
    },
    /// One probability row per parent configuration, first parent most
    /// significant.
    TableCpd {
        parents: Vec<String>,
        rows: Vec<Vec<f64>>,
    },
    /// Simultaneous system `x = B x + intercepts + noise` over the unit's
    /// outputs.
    CyclicLinearBlock {
        b: Vec<Vec<f64>>,
        intercepts: Vec<f64>,
        noise: Vec<String>,
    },
    /// Outcome selected by the value of `treatment`; arm `k` is the
    /// potential outcome under treatment value `k`.
    Switch {
        treatment: String,
        arms: Vec<Mechanism>,
    },
    /// Point mass, used for interventions.
    PointMass {
        value: f64,
        card: Option<usize>,
    },
}

impl Mechanism {
    /// Variables read by the mechanism.
    pub fn parents(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |v: &String| {
            if !out.contains(v) {
                out.push(v.clone());
            }
        };
        match self {
            Mechanism::ExogGaussian { .. }
            | Mechanism::ExogBernoulli { .. }
            | Mechanism::MvNormalBlock { .. }
            | Mechanism::PointMass { .. } => {}
            Mechanism::LinearEq { coefs, noise, .. } => {
                coefs.iter().for_each(|(v, _)| push(v));
                noise.iter().for_each(&mut push);
            }
            Mechanism::LogisticBernoulli { coefs, .. } => coefs.iter().for_each(|(v, _)| push(v)),
            Mechanism::Deterministic { formula, .. } => formula.variables().iter().for_each(push),
            Mechanism::TableCpd { parents, .. } => parents.iter().for_each(push),
            Mechanism::CyclicLinearBlock { noise, .. } => noise.iter().for_each(push),
            Mechanism::Switch { treatment, arms } => {
                push(treatment);
                for arm in arms {
                    arm.parents().iter().for_each(&mut push);
                }
            }
        }
        out
    }

    fn outputs(&self) -> usize {
        match self {
            Mechanism::MvNormalBlock { mean, .. } => mean.len(),
            Mechanism::CyclicLinearBlock { intercepts, .. } => intercepts.len(),
            _ => 1,
        }
    }

    fn card(&self) -> Option<usize> {
        match self {
            Mechanism::ExogBernoulli { .. } | Mechanism::LogisticBernoulli { .. } => Some(2),
            Mechanism::Deterministic { card, .. } | Mechanism::PointMass { card, .. } => *card,
            Mechanism::TableCpd { rows, .. } => rows.first().map(Vec::len),
            Mechanism::Switch { arms, .. } => {
                arms.iter().map(Mechanism::card).try_fold(0, |acc, c| c.map(|c| acc.max(c)))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub outputs: Vec<String>,
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    pub name: String,
    pub latent: bool,
    pub card: Option<usize>,
}

/// Compiled formula over variable indices.
#[derive(Debug, Clone)]
enum CFormula {
    Var(usize),
    Const(f64),
    Add(Box<CFormula>, Box<CFormula>),
    Sub(Box<CFormula>, Box<CFormula>),
    Mul(Box<CFormula>, Box<CFormula>),
    Mod(Box<CFormula>, Box<CFormula>),
}

impl CFormula {
    fn eval(&self, vals: &[f64]) -> f64 {
        match self {
            CFormula::Var(i) => vals[*i],
            CFormula::Const(c) => *c,
            CFormula::Add(a, b) => a.eval(vals) + b.eval(vals),
            CFormula::Sub(a, b) => a.eval(vals) - b.eval(vals),
            CFormula::Mul(a, b) => a.eval(vals) * b.eval(vals),
            CFormula::Mod(a, b) => a.eval(vals).rem_euclid(b.eval(vals)),
        }
    }
}

/// Compiled mechanism; `slot` counts are fixed per variant so that every
/// unit always consumes the same uniforms of a row's stream.
#[derive(Debug, Clone)]
enum CMech {
    Gauss { mean: f64, sd: f64 },
    Bern { p: f64 },
    MvNormal { mean: Vec<f64>, chol: DMatrix<f64> },
    Linear { intercept: f64, coefs: Vec<(usize, f64)>, noise: Option<usize> },
    Logistic { intercept: f64, coefs: Vec<(usize, f64)> },
    Det(CFormula),
    Table { parents: Vec<usize>, cards: Vec<usize>, rows: Vec<Vec<f64>> },
    Cyclic { inv: DMatrix<f64>, intercepts: Vec<f64>, noise: Vec<usize> },
    Switch { treatment: usize, arms: Vec<CMech> },
    Point(f64),
}

impl CMech {
    fn slots(&self) -> usize {
        match self {
            CMech::Gauss { .. } | CMech::Bern { .. } | CMech::Logistic { .. } | CMech::Table { .. } => 1,
            CMech::MvNormal { mean, .. } => mean.len(),
            CMech::Switch { arms, .. } => arms.iter().map(CMech::slots).sum(),
            CMech::Linear { .. } | CMech::Det(_) | CMech::Cyclic { .. } | CMech::Point(_) => 0,
        }
    }
}

#[derive(Debug, Clone)]
struct CUnit {
    outputs: Vec<usize>,
    mech: CMech,
    slot: usize,
}

#[derive(Debug, Clone)]
pub struct Scm {
    units: Vec<Unit>,
    vars: Vec<VarInfo>,
    index: BTreeMap<String, usize>,
    graph: MixedGraph,
    treatment: Option<String>,
    outcome: Option<String>,
    compiled: Vec<CUnit>,
    slots: usize,
    cyclic_condition: Option<f64>,
}

/// Incremental construction of an [`Scm`] in evaluation order.
#[derive(Debug, Clone, Default)]
pub struct ScmBuilder {
    units: Vec<Unit>,
    latent: Vec<String>,
    query: Option<(String, String)>,
}

impl ScmBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(mut self, name: &str, mechanism: Mechanism) -> Self {
        self.units.push(Unit { outputs: vec![name.to_string()], mechanism });
        self
    }

    pub fn latent(mut self, name: &str, mechanism: Mechanism) -> Self {
        self.latent.push(name.to_string());
        self.node(name, mechanism)
    }

    pub fn block(mut self, names: &[&str], mechanism: Mechanism) -> Self {
        self.units.push(Unit { outputs: names.iter().map(|s| s.to_string()).collect(), mechanism });
        self
    }

    pub fn query(mut self, treatment: &str, outcome: &str) -> Self {
        self.query = Some((treatment.to_string(), outcome.to_string()));
        self
    }

    pub fn build(self) -> Result<Scm, ScmError> {
        Scm::new(self.units, &self.latent, self.query)
    }
}

fn check_prob(what: &str, p: f64) -> Result<(), ScmError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ScmError::BadParameter(format!("{what}: probability {p} outside [0, 1]")))
    }
}

fn to_matrix(rows: &[Vec<f64>], k: usize, what: &str) -> Result<DMatrix<f64>, ScmError> {
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(ScmError::BadParameter(format!("{what}: expected a {k}x{k} matrix")));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

impl Scm {
    pub fn builder() -> ScmBuilder {
        ScmBuilder::new()
    }

    pub fn new(units: Vec<Unit>, latent: &[String], query: Option<(String, String)>) -> Result<Scm, ScmError> {
        let mut vars: Vec<VarInfo> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut compiled = Vec::new();
        let mut slots = 0;
        let mut cyclic_condition = None;

        for unit in &units {
            let name0 = unit.outputs.first().cloned().unwrap_or_default();
            if unit.outputs.is_empty() || unit.outputs.len() != unit.mechanism.outputs() {
                return Err(ScmError::BadParameter(format!(
                    "unit `{name0}` writes {} variables but its mechanism produces {}",
                    unit.outputs.len(),
                    unit.mechanism.outputs()
                )));
            }
            let mech = compile(&unit.mechanism, &name0, &index, &vars)?;
            if let CMech::Cyclic { .. } = mech {
                if let Mechanism::CyclicLinearBlock { b, .. } = &unit.mechanism {
                    let bm = to_matrix(b, unit.outputs.len(), &name0)?;
                    let cond = linear::condition_number(&bm)?;
                    cyclic_condition = Some(cyclic_condition.map_or(cond, |c: f64| c.max(cond)));
                }
            }
            let card = unit.mechanism.card();
            let mut outputs = Vec::new();
            for name in &unit.outputs {
                if index.contains_key(name) {
                    return Err(ScmError::DuplicateVariable(name.clone()));
                }
                index.insert(name.clone(), vars.len());
                outputs.push(vars.len());
                vars.push(VarInfo { name: name.clone(), latent: latent.contains(name), card });
            }
            let n_slots = mech.slots();
            compiled.push(CUnit { outputs, mech, slot: slots });
            slots += n_slots;
        }

        if let Some((a, y)) = &query {
            for v in [a, y] {
                if !index.contains_key(v) {
                    return Err(ScmError::UnknownVariable(v.clone()));
                }
            }
        }

        let graph = build_graph(&units, &vars)?;
        let (treatment, outcome) = match query {
            Some((a, y)) => (Some(a), Some(y)),
            None => (None, None),
        };
        Ok(Scm { units, vars, index, graph, treatment, outcome, compiled, slots, cyclic_condition })
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn variables(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn var(&self, name: &str) -> Result<&VarInfo, ScmError> {
        self.index.get(name).map(|&i| &self.vars[i]).ok_or_else(|| ScmError::UnknownVariable(name.to_string()))
    }

    fn idx(&self, name: &str) -> Result<usize, ScmError> {
        self.index.get(name).copied().ok_or_else(|| ScmError::UnknownVariable(name.to_string()))
    }

    /// Names of non-latent variables in evaluation order.
    pub fn observed(&self) -> Vec<String> {
        self.vars.iter().filter(|v| !v.latent).map(|v| v.name.clone()).collect()
    }

    /// Structural graph: every parent read by a mechanism points to the
    /// variables it writes, multivariate normal blocks are joined by
    /// undirected edges wherever the precision matrix is non-zero, and
    /// deterministic outputs carry the deterministic flag.
    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    pub fn treatment(&self) -> Option<&str> {
        self.treatment.as_deref()
    }

    pub fn outcome(&self) -> Option<&str> {
        self.outcome.as_deref()
    }

    pub fn query(&self) -> Result<(&str, &str), ScmError> {
        match (&self.treatment, &self.outcome) {
            (Some(a), Some(y)) => Ok((a, y)),
            _ => Err(ScmError::NoQuery),
        }
    }

    pub fn set_query(&mut self, treatment: &str, outcome: &str) -> Result<(), ScmError> {
        self.idx(treatment)?;
        self.idx(outcome)?;
        self.treatment = Some(treatment.to_string());
        self.outcome = Some(outcome.to_string());
        Ok(())
    }

    /// Names of the potential-outcome columns, one per treatment value, when
    /// the outcome is written by a [`Mechanism::Switch`].
    pub fn potential_outcomes(&self) -> Option<Vec<String>> {
        let y = self.outcome.as_ref()?;
        let unit = self.units.iter().find(|u| u.outputs[0] == *y)?;
        match &unit.mechanism {
            Mechanism::Switch { arms, .. } => Some((0..arms.len()).map(|k| format!("{y}{k}")).collect()),
            _ => None,
        }
    }

    /// Largest condition number of `I - B` over the cyclic blocks.
    pub fn cyclic_condition(&self) -> Option<f64> {
        self.cyclic_condition
    }

    /// Mechanism replacement: each listed variable becomes a point mass at
    /// the given value, which removes all its incoming edges.
    pub fn intervene(&self, assignments: &[(&str, f64)]) -> Result<Scm, ScmError> {
        let mut units = self.units.clone();
        for &(name, value) in assignments {
            self.idx(name)?;
            let unit =
                units.iter_mut().find(|u| u.outputs.iter().any(|o| o == name)).expect("every variable has a unit");
            if unit.outputs.len() > 1 {
                return Err(ScmError::BlockIntervention(name.to_string()));
            }
            let card = unit.mechanism.card();
            unit.mechanism = Mechanism::PointMass { value, card };
        }
        let latent: Vec<String> = self.vars.iter().filter(|v| v.latent).map(|v| v.name.clone()).collect();
        let query = self.treatment.clone().zip(self.outcome.clone());
        let mut s = Scm::new(units, &latent, query)?;
        // keep the uniform layout so every other unit sees the same noise
        for (new, old) in s.compiled.iter_mut().zip(&self.compiled) {
            new.slot = old.slot;
        }
        s.slots = self.slots;
        Ok(s)
    }
}

fn resolve(name: &str, parent: &str, index: &BTreeMap<String, usize>) -> Result<usize, ScmError> {
    index
        .get(parent)
        .copied()
        .ok_or_else(|| ScmError::OrderViolation { var: name.to_string(), parent: parent.to_string() })
}

fn compile_formula(f: &Formula, name: &str, index: &BTreeMap<String, usize>) -> Result<CFormula, ScmError> {
    let bin = |a: &Formula, b: &Formula| -> Result<(Box<CFormula>, Box<CFormula>), ScmError> {
        Ok((Box::new(compile_formula(a, name, index)?), Box::new(compile_formula(b, name, index)?)))
    };
    Ok(match f {
        Formula::Var(v) => CFormula::Var(resolve(name, v, index)?),
        Formula::Const(c) => CFormula::Const(*c),
        Formula::Add(a, b) => {
            let (a, b) = bin(a, b)?;
            CFormula::Add(a, b)
        }
        Formula::Sub(a, b) => {
            let (a, b) = bin(a, b)?;
            CFormula::Sub(a, b)
        }
        Formula::Mul(a, b) => {
            let (a, b) = bin(a, b)?;
            CFormula::Mul(a, b)
        }
        Formula::Mod(a, b) => {
            let (a, b) = bin(a, b)?;
            CFormula::Mod(a, b)
        }
    })
}

fn compile(m: &Mechanism, name: &str, index: &BTreeMap<String, usize>, vars: &[VarInfo]) -> Result<CMech, ScmError> {
    let coefs_of = |coefs: &[(String, f64)]| -> Result<Vec<(usize, f64)>, ScmError> {
        coefs.iter().map(|(v, c)| Ok((resolve(name, v, index)?, *c))).collect()
    };
    Ok(match m {
        Mechanism::ExogGaussian { mean, variance } => {
            if !(*variance >= 0.0) {
                return Err(ScmError::BadParameter(format!("{name}: negative variance")));
            }
            CMech::Gauss { mean: *mean, sd: variance.sqrt() }
        }
        Mechanism::ExogBernoulli { p } => {
            check_prob(name, *p)?;
            CMech::Bern { p: *p }
        }
        Mechanism::MvNormalBlock { mean, cov } => {
            let k = mean.len();
            let c = to_matrix(cov, k, name)?;
            if (&c - c.transpose()).amax() > 1e-12 {
                return Err(ScmError::BadParameter(format!("{name}: covariance is not symmetric")));
            }
            let chol = c
                .cholesky()
                .ok_or_else(|| ScmError::BadParameter(format!("{name}: covariance is not positive definite")))?;
            CMech::MvNormal { mean: mean.clone(), chol: chol.l() }
        }
        Mechanism::LinearEq { intercept, coefs, noise } => CMech::Linear {
            intercept: *intercept,
            coefs: coefs_of(coefs)?,
            noise: noise.as_deref().map(|v| resolve(name, v, index)).transpose()?,
        },
        Mechanism::LogisticBernoulli { intercept, coefs } => {
            CMech::Logistic { intercept: *intercept, coefs: coefs_of(coefs)? }
        }
        Mechanism::Deterministic { formula, .. } => CMech::Det(compile_formula(formula, name, index)?),
        Mechanism::TableCpd { parents, rows } => {
            let mut idx = Vec::new();
            let mut cards = Vec::new();
            let mut expected = 1usize;
            for p in parents {
                let i = resolve(name, p, index)?;
                let card = vars[i].card.ok_or_else(|| ScmError::NotDiscrete(p.clone()))?;
                expected *= card;
                idx.push(i);
                cards.push(card);
            }
            if rows.len() != expected {
                return Err(ScmError::BadParameter(format!(
                    "{name}: expected {expected} probability rows, got {}",
                    rows.len()
                )));
            }
            let card = rows[0].len();
            for row in rows {
                if row.len() != card || card == 0 {
                    return Err(ScmError::BadParameter(format!("{name}: ragged probability rows")));
                }
                for &p in row {
                    check_prob(name, p)?;
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(ScmError::NotNormalized { var: name.to_string(), sum });
                }
            }
            CMech::Table { parents: idx, cards, rows: rows.clone() }
        }
        Mechanism::CyclicLinearBlock { b, intercepts, noise } => {
            let k = intercepts.len();
            if noise.len() != k {
                return Err(ScmError::BadParameter(format!("{name}: one noise parent per member required")));
            }
            let bm = to_matrix(b, k, name)?;
            let inv = linear::inverse_i_minus(&bm)?;
            CMech::Cyclic {
                inv,
                intercepts: intercepts.clone(),
                noise: noise.iter().map(|v| resolve(name, v, index)).collect::<Result<_, _>>()?,
            }
        }
        Mechanism::Switch { treatment, arms } => {
            let t = resolve(name, treatment, index)?;
            let card = vars[t].card.ok_or_else(|| ScmError::NotDiscrete(treatment.clone()))?;
            if arms.len() != card {
                return Err(ScmError::BadParameter(format!(
                    "{name}: {} arms for a treatment with {card} values",
                    arms.len()
                )));
            }
            let mut compiled = Vec::new();
            for arm in arms {
                if matches!(arm, Mechanism::Switch { .. }) || arm.outputs() != 1 {
                    return Err(ScmError::BadParameter(format!("{name}: arms must be scalar mechanisms")));
                }
                compiled.push(compile(arm, name, index, vars)?);
            }
            CMech::Switch { treatment: t, arms: compiled }
        }
        Mechanism::PointMass { value, .. } => CMech::Point(*value),
    })
}

fn build_graph(units: &[Unit], vars: &[VarInfo]) -> Result<MixedGraph, ScmError> {
    let mut g = MixedGraph::new();
    for v in vars {
        let id = g.add_node(&v.name)?;
        g.set_latent(id, v.latent);
    }
    let add = |g: &mut MixedGraph, a: &str, b: &str, kind: EdgeKind| -> Result<(), ScmError> {
        let (ta, tb) = (g.require(a)?, g.require(b)?);
        if !g.has_edge(ta, tb, kind) {
            g.add_edge(ta, tb, kind)?;
        }
        Ok(())
    };
    for unit in units {
        match &unit.mechanism {
            Mechanism::MvNormalBlock { cov, .. } => {
                let k = unit.outputs.len();
                let c = DMatrix::from_fn(k, k, |i, j| cov[i][j]);
                let prec = c.try_inverse().expect("validated positive definite");
                for i in 0..k {
                    for j in (i + 1)..k {
                        if prec[(i, j)].abs() > 1e-10 {
                            add(&mut g, &unit.outputs[i], &unit.outputs[j], EdgeKind::Undirected)?;
                        }
                    }
                }
            }
            Mechanism::CyclicLinearBlock { b, noise, .. } => {
                for (i, out) in unit.outputs.iter().enumerate() {
                    add(&mut g, &noise[i], out, EdgeKind::Directed)?;
                    for (j, src) in unit.outputs.iter().enumerate() {
                        if b[i][j] != 0.0 {
                            add(&mut g, src, out, EdgeKind::Directed)?;
                        }
                    }
                }
            }
            m => {
                for p in m.parents() {
                    for out in &unit.outputs {
                        add(&mut g, &p, out, EdgeKind::Directed)?;
                    }
                }
                if let Mechanism::Deterministic { .. } = m {
                    for out in &unit.outputs {
                        let id = g.require(out)?;
                        g.set_deterministic(id, true);
                    }
                }
            }
        }
    }
    Ok(g)
}
