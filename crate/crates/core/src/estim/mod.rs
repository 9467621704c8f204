//! Effect estimators and diagnostics.
//!
//! Every estimator returns an [`EstimateReport`]. Estimators are pure
//! functions of their inputs; the only randomness is in [`bootstrap_se`],
//! which draws replicate `r` from its own ChaCha8 stream.

mod faithfulness;
mod propensity;
mod regression;

pub use faithfulness::{faithfulness_check, faithfulness_check_scm, Violation, FAITHFULNESS_TOLERANCE};
pub use propensity::{
    fit_logistic, ipw, positivity_diagnostic, LogisticFit, PositivityOptions, PositivityReport, EXTREME_HIGH,
    EXTREME_LOW, GRADIENT_TOLERANCE, MAX_NEWTON_ITERATIONS,
};
pub use regression::{regression_adjustment, RANK_TOLERANCE};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{ExprError, JointTable};
use crate::graph::GraphError;
use crate::scm::{Dataset, ScmError};
use crate::sep::SepError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimError {
    #[error("treatment arm {0} has no units")]
    EmptyArm(u8),
    #[error("treatment column `{0}` is not coded 0/1")]
    NotBinary(String),
    #[error("design matrix has rank {rank} < {columns}; drop one of: {dependent:?}")]
    RankDeficient { rank: usize, columns: usize, dependent: Vec<String> },
    #[error("logistic fit did not converge after {iterations} iterations (gradient norm {gradient:e}): {hint}")]
    NonConvergence { iterations: usize, gradient: f64, hint: String },
    #[error("stratum {stratum} has no units with treatment {arm}")]
    EmptyStratumArm { stratum: String, arm: u8 },
    #[error("`{0}` takes non-integer values and cannot define strata")]
    NotDiscrete(String),
    #[error("faithfulness check needs a linear-Gaussian model: {0}")]
    NonGaussian(String),
    #[error("{0}")]
    BadInput(String),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Sep(#[from] SepError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Point estimate with its standard error and provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimand: String,
    pub estimate: f64,
    pub se: f64,
    pub n: usize,
    pub seed: Option<u64>,
    pub method: String,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    fn new(method: &str, estimand: String, estimate: f64, se: f64, n: usize, seed: Option<u64>) -> Self {
        EstimateReport {
            estimand,
            estimate,
            se: se.max(0.0),
            n,
            seed,
            method: method.to_string(),
            diagnostics: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }
}

fn ate_label(d: &Dataset) -> String {
    let y = d.outcome.as_deref().unwrap_or("Y");
    format!("E[{y}(1) - {y}(0)]")
}

/// Treatment and outcome columns, with the treatment checked to be 0/1.
fn query_columns(d: &Dataset) -> Result<(&[f64], &[f64]), EstimError> {
    let a = d.treatment_column()?;
    let y = d.outcome_column()?;
    if a.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(EstimError::NotBinary(d.treatment.clone().unwrap_or_default()));
    }
    Ok((a, y))
}

/// Mean and unbiased variance; the variance of a single value is zero.
fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let (n, sum) = xs.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        return (f64::NAN, 0.0, 0);
    }
    let m = sum / n as f64;
    let ss: f64 = xs.map(|x| (x - m) * (x - m)).sum();
    let var = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
    (m, var, n)
}

/// Unadjusted contrast `mean(Y | A=1) − mean(Y | A=0)` with the
/// unpooled two-sample standard error.
pub fn diff_in_means(d: &Dataset) -> Result<EstimateReport, EstimError> {
    let (a, y) = query_columns(d)?;
    let arm = |t: f64| mean_var(a.iter().zip(y).filter(move |(&ai, _)| ai == t).map(|(_, &yi)| yi));
    let (m1, v1, n1) = arm(1.0);
    let (m0, v0, n0) = arm(0.0);
    if n1 == 0 {
        return Err(EstimError::EmptyArm(1));
    }
    if n0 == 0 {
        return Err(EstimError::EmptyArm(0));
    }
    let se = (v1 / n1 as f64 + v0 / n0 as f64).sqrt();
    let mut r = EstimateReport::new("diff-in-means", ate_label(d), m1 - m0, se, d.n(), d.seed);
    r.diagnostics.insert("n_treated".into(), n1.into());
    r.diagnostics.insert("n_control".into(), n0.into());
    Ok(r)
}

/// Input to [`stratified_adjustment`]: an exact joint distribution or a
/// sample.
#[derive(Debug, Clone, Copy)]
pub enum StratInput<'a> {
    Table { table: &'a JointTable, treatment: &'a str, outcome: &'a str },
    Data(&'a Dataset),
}

/// Standardization over the strata variables:
/// `Σ_c [E(Y | A=1, c) − E(Y | A=0, c)] · P(c)`.
///
/// On a joint table the value is exact and the SE is zero. On a dataset the
/// SE treats the stratum weights as fixed. With no strata this is the
/// unadjusted contrast.
pub fn stratified_adjustment(input: StratInput<'_>, strata: &[&str]) -> Result<EstimateReport, EstimError> {
    match input {
        StratInput::Table { table, treatment, outcome } => stratify_table(table, treatment, outcome, strata),
        StratInput::Data(d) => stratify_data(d, strata),
    }
}

fn stratum_label(strata: &[&str], values: &[usize]) -> String {
    if strata.is_empty() {
        return "(all)".to_string();
    }
    let parts: Vec<String> = strata.iter().zip(values).map(|(s, v)| format!("{s}={v}")).collect();
    parts.join(",")
}

fn stratify_table(
    t: &JointTable,
    treatment: &str,
    outcome: &str,
    strata: &[&str],
) -> Result<EstimateReport, EstimError> {
    let card = |name: &str| t.card(name).ok_or_else(|| ExprError::UnknownVariable(name.to_string()));
    if card(treatment)? != 2 {
        return Err(EstimError::NotBinary(treatment.to_string()));
    }
    card(outcome)?;
    let cards: Vec<usize> = strata.iter().map(|s| card(s)).collect::<Result<_, _>>()?;
    let total: usize = cards.iter().product();
    let mut estimate = 0.0;
    let mut values = vec![0usize; strata.len()];
    for cell in 0..total {
        let mut rest = cell;
        for k in (0..strata.len()).rev() {
            values[k] = rest % cards[k];
            rest /= cards[k];
        }
        let mut fixed: Vec<(&str, usize)> = strata.iter().copied().zip(values.iter().copied()).collect();
        let weight = t.prob_named(&fixed)?;
        if weight == 0.0 {
            continue;
        }
        let mut arm_mean = |arm: usize| -> Result<f64, EstimError> {
            fixed.push((treatment, arm));
            let m = t.conditional_mean(outcome, &fixed);
            fixed.pop();
            m.map_err(|_| EstimError::EmptyStratumArm { stratum: stratum_label(strata, &values), arm: arm as u8 })
        };
        let m1 = arm_mean(1)?;
        let m0 = arm_mean(0)?;
        estimate += (m1 - m0) * weight;
    }
    let estimand = format!("E[{outcome}(1) - {outcome}(0)]");
    let mut r = EstimateReport::new("stratified-exact", estimand, estimate, 0.0, 0, None);
    r.diagnostics.insert("strata".into(), serde_json::json!(strata));
    Ok(r)
}

fn stratify_data(d: &Dataset, strata: &[&str]) -> Result<EstimateReport, EstimError> {
    let (a, y) = query_columns(d)?;
    let cols: Vec<&[f64]> = strata.iter().map(|s| d.column(s)).collect::<Result<_, _>>()?;
    for (s, c) in strata.iter().zip(&cols) {
        if c.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(EstimError::NotDiscrete(s.to_string()));
        }
    }
    // stratum key -> per-arm (n, sum, sum of squares)
    let mut cells: BTreeMap<Vec<usize>, [(usize, f64, f64); 2]> = BTreeMap::new();
    for i in 0..d.n() {
        let key: Vec<usize> = cols.iter().map(|c| c[i] as usize).collect();
        let arm = &mut cells.entry(key).or_insert([(0, 0.0, 0.0); 2])[a[i] as usize];
        arm.0 += 1;
        arm.1 += y[i];
        arm.2 += y[i] * y[i];
    }
    let n = d.n() as f64;
    let (mut estimate, mut var) = (0.0, 0.0);
    for (key, arms) in &cells {
        let w = (arms[0].0 + arms[1].0) as f64 / n;
        let mut stats = [(0.0, 0.0); 2];
        for (arm, &(k, s, ss)) in arms.iter().enumerate() {
            if k == 0 {
                return Err(EstimError::EmptyStratumArm { stratum: stratum_label(strata, key), arm: arm as u8 });
            }
            let m = s / k as f64;
            let v = if k > 1 { (ss - k as f64 * m * m).max(0.0) / (k - 1) as f64 } else { 0.0 };
            stats[arm] = (m, v / k as f64);
        }
        estimate += w * (stats[1].0 - stats[0].0);
        var += w * w * (stats[1].1 + stats[0].1);
    }
    let mut r = EstimateReport::new("stratified", ate_label(d), estimate, var.sqrt(), d.n(), d.seed);
    r.diagnostics.insert("strata".into(), serde_json::json!(strata));
    r.diagnostics.insert("n_strata".into(), cells.len().into());
    Ok(r)
}

/// Dataset made of the given rows of `d`, keeping its query.
fn take_rows(d: &Dataset, rows: &[usize]) -> Result<Dataset, EstimError> {
    let columns = d
        .names()
        .iter()
        .map(|name| d.column(name).map(|c| rows.iter().map(|&i| c[i]).collect()))
        .collect::<Result<Vec<Vec<f64>>, _>>()?;
    let mut out = Dataset::new(d.names().to_vec(), columns)?;
    out.treatment = d.treatment.clone();
    out.outcome = d.outcome.clone();
    Ok(out)
}

/// Nonparametric bootstrap standard error of `estimator`. Replicate `r`
/// resamples rows with ChaCha8 stream `r` under `seed`, so the result does
/// not depend on the number of threads.
pub fn bootstrap_se<F>(d: &Dataset, replicates: usize, seed: u64, estimator: F) -> Result<f64, EstimError>
where
    F: Fn(&Dataset) -> Result<EstimateReport, EstimError> + Sync,
{
    if replicates < 2 {
        return Err(EstimError::BadInput("bootstrap needs at least 2 replicates".into()));
    }
    let n = d.n();
    let estimates: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            estimator(&take_rows(d, &rows)?).map(|rep| rep.estimate)
        })
        .collect::<Result<_, _>>()?;
    let (_, var, _) = mean_var(estimates.iter().copied());
    Ok(var.sqrt())
}
