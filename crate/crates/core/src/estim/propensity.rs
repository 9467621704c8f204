//! Propensity models: logistic fit, inverse probability weighting and the
//! positivity diagnostic.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{ate_label, mean_var, query_columns, EstimError, EstimateReport};
use crate::scm::Dataset;

/// Newton stops once the Euclidean norm of the mean score falls below this.
pub const GRADIENT_TOLERANCE: f64 = 1e-10;
pub const MAX_NEWTON_ITERATIONS: usize = 100;
/// Propensities outside `[EXTREME_LOW, EXTREME_HIGH]` trigger a warning.
pub const EXTREME_LOW: f64 = 0.01;
pub const EXTREME_HIGH: f64 = 0.99;

/// A treatment that the fitted model predicts with error below this for
/// every unit is treated as completely separated.
const SEPARATION_GAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// Intercept first, then one coefficient per covariate.
    pub coefficients: Vec<f64>,
    pub propensity: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Every unit's treatment is predicted almost surely.
    pub separated: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn log_likelihood(x: &DMatrix<f64>, a: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(a).map(|(&e, &ai)| ai * e - softplus(e)).sum()
}

/// Maximum-likelihood logistic regression of `A` on an intercept and the
/// covariates by damped Newton iterations. Returns the last iterate even
/// when it did not converge; see [`LogisticFit::converged`].
pub fn fit_logistic(a: &[f64], covariates: &[&[f64]]) -> Result<LogisticFit, EstimError> {
    let n = a.len();
    let k = covariates.len() + 1;
    if n == 0 {
        return Err(EstimError::BadInput("no rows".into()));
    }
    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { covariates[j - 1][i] });
    let mut beta = DVector::zeros(k);
    let mut ll = log_likelihood(&x, a, &beta);
    let mut iterations = 0;
    let mut gradient_norm;
    let mut converged = false;
    let mut p = vec![0.5; n];
    loop {
        let eta = &x * &beta;
        for (pi, e) in p.iter_mut().zip(eta.iter()) {
            *pi = sigmoid(*e);
        }
        let mut g = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        for i in 0..n {
            let r = a[i] - p[i];
            let w = p[i] * (1.0 - p[i]);
            for j in 0..k {
                let xij = x[(i, j)];
                g[j] += xij * r;
                for l in 0..=j {
                    h[(j, l)] += w * xij * x[(i, l)];
                }
            }
        }
        for j in 0..k {
            for l in 0..j {
                h[(l, j)] = h[(j, l)];
            }
        }
        gradient_norm = g.norm() / n as f64;
        if gradient_norm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        if iterations == MAX_NEWTON_ITERATIONS {
            break;
        }
        let Some(step) = h.cholesky().map(|c| c.solve(&g)) else {
            break;
        };
        iterations += 1;
        // halve the step until the likelihood does not decrease
        let mut t = 1.0;
        loop {
            let trial = &beta + &step * t;
            let trial_ll = log_likelihood(&x, a, &trial);
            if trial_ll >= ll || t < 1e-10 {
                beta = trial;
                ll = trial_ll;
                break;
            }
            t /= 2.0;
        }
        if !beta.iter().all(|b| b.is_finite()) {
            break;
        }
    }
    let separated = p.iter().zip(a).all(|(&pi, &ai)| (ai - pi).abs() < SEPARATION_GAP);
    Ok(LogisticFit {
        coefficients: beta.iter().copied().collect(),
        propensity: p,
        iterations,
        gradient_norm,
        converged,
        separated,
    })
}

fn fit_for<'d>(d: &'d Dataset, covariates: &[&str]) -> Result<(LogisticFit, &'d [f64], &'d [f64]), EstimError> {
    let (a, y) = query_columns(d)?;
    let cols: Vec<&[f64]> = covariates.iter().map(|c| d.column(c)).collect::<Result<_, _>>()?;
    Ok((fit_logistic(a, &cols)?, a, y))
}

fn propensity_range(p: &[f64]) -> (f64, f64) {
    p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Horvitz–Thompson contrast `mean(A·Y/e) − mean((1−A)·Y/(1−e))` with
/// propensities `e` from a logistic fit on the covariates. The standard
/// error is the sample standard deviation of the per-unit contributions
/// over √n, treating the fitted propensities as known.
pub fn ipw(d: &Dataset, covariates: &[&str]) -> Result<EstimateReport, EstimError> {
    let (fit, a, y) = fit_for(d, covariates)?;
    if !a.contains(&1.0) {
        return Err(EstimError::EmptyArm(1));
    }
    if !a.contains(&0.0) {
        return Err(EstimError::EmptyArm(0));
    }
    if fit.separated || !fit.converged {
        let hint = if fit.separated {
            "the covariates predict treatment perfectly (complete separation); no weighting estimator exists without \
             dropping or coarsening covariates"
        } else {
            "check for collinear covariates or near-separation"
        };
        return Err(EstimError::NonConvergence {
            iterations: fit.iterations,
            gradient: fit.gradient_norm,
            hint: hint.to_string(),
        });
    }
    let e = &fit.propensity;
    let terms = (0..d.n()).map(|i| a[i] * y[i] / e[i] - (1.0 - a[i]) * y[i] / (1.0 - e[i]));
    let (estimate, var, n) = mean_var(terms);
    let mut rep = EstimateReport::new("ipw", ate_label(d), estimate, (var / n as f64).sqrt(), d.n(), d.seed);
    let (lo, hi) = propensity_range(e);
    if lo < EXTREME_LOW || hi > EXTREME_HIGH {
        rep.warnings.push(format!(
            "ExtremePropensity: fitted propensities span [{lo:.3e}, {hi:.6}], outside [{EXTREME_LOW}, {EXTREME_HIGH}]"
        ));
    }
    rep.diagnostics.insert("covariates".into(), serde_json::json!(covariates));
    rep.diagnostics.insert("min_propensity".into(), lo.into());
    rep.diagnostics.insert("max_propensity".into(), hi.into());
    rep.diagnostics.insert("newton_iterations".into(), fit.iterations.into());
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityOptions {
    pub low: f64,
    pub high: f64,
    /// Covariates with at most this many distinct integer values define
    /// strata directly; otherwise units are grouped by propensity decile.
    pub max_levels: usize,
}

impl Default for PositivityOptions {
    fn default() -> Self {
        PositivityOptions { low: EXTREME_LOW, high: EXTREME_HIGH, max_levels: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub min_propensity: f64,
    pub max_propensity: f64,
    /// Units whose fitted propensity lies outside the thresholds.
    pub n_extreme: usize,
    /// `"covariate"` or `"propensity-decile"`.
    pub strata_kind: &'static str,
    pub n_strata: usize,
    /// Strata occupied by only one treatment arm.
    pub single_arm_strata: usize,
    pub separated: bool,
    pub converged: bool,
    pub flagged: bool,
}

fn is_discrete(col: &[f64], max_levels: usize) -> bool {
    let mut levels = BTreeSet::new();
    for &v in col {
        if v.fract() != 0.0 || !v.is_finite() {
            return false;
        }
        levels.insert(v as i64);
        if levels.len() > max_levels {
            return false;
        }
    }
    true
}

/// Fitted propensity range and single-arm strata.
pub fn positivity_diagnostic(
    d: &Dataset,
    covariates: &[&str],
    opts: &PositivityOptions,
) -> Result<PositivityReport, EstimError> {
    let (fit, a, _) = fit_for(d, covariates)?;
    let e = &fit.propensity;
    let (lo, hi) = propensity_range(e);
    let n_extreme = e.iter().filter(|&&p| p < opts.low || p > opts.high).count();

    let cols: Vec<&[f64]> = covariates.iter().map(|c| d.column(c)).collect::<Result<_, _>>()?;
    let discrete = cols.iter().all(|c| is_discrete(c, opts.max_levels));
    let keys: Vec<Vec<i64>> = if discrete {
        (0..d.n()).map(|i| cols.iter().map(|c| c[i] as i64).collect()).collect()
    } else {
        let mut order: Vec<usize> = (0..d.n()).collect();
        order.sort_by(|&i, &j| e[i].total_cmp(&e[j]).then(i.cmp(&j)));
        let mut keys = vec![Vec::new(); d.n()];
        for (rank, &i) in order.iter().enumerate() {
            keys[i] = vec![(rank * 10 / d.n()) as i64];
        }
        keys
    };
    let mut arms: BTreeMap<Vec<i64>, [bool; 2]> = BTreeMap::new();
    for (key, &ai) in keys.into_iter().zip(a) {
        arms.entry(key).or_default()[ai as usize] = true;
    }
    let single_arm_strata = arms.values().filter(|s| !(s[0] && s[1])).count();
    Ok(PositivityReport {
        min_propensity: lo,
        max_propensity: hi,
        n_extreme,
        strata_kind: if discrete { "covariate" } else { "propensity-decile" },
        n_strata: arms.len(),
        single_arm_strata,
        separated: fit.separated,
        converged: fit.converged,
        flagged: n_extreme > 0 || single_arm_strata > 0 || fit.separated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_recovers_saturated_rates() {
        // binary covariate: the MLE reproduces the observed rates 1/4 and 2/3
        let x = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let a = [1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let fit = fit_logistic(&a, &[&x]).unwrap();
        assert!(fit.converged);
        assert!((fit.propensity[0] - 0.25).abs() < 1e-12);
        assert!((fit.propensity[6] - 2.0 / 3.0).abs() < 1e-12);
        assert!((fit.coefficients[0] - (1.0f64 / 3.0).ln()).abs() < 1e-10);
    }

    #[test]
    fn complete_separation_is_non_convergence() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let a: Vec<f64> = x.iter().map(|&v| f64::from(v >= 10.0)).collect();
        let y = x.clone();
        let d = Dataset::new(vec!["A".into(), "Y".into(), "X".into()], vec![a, y, x])
            .unwrap()
            .with_query("A", "Y")
            .unwrap();
        let err = ipw(&d, &["X"]).unwrap_err();
        assert!(matches!(err, EstimError::NonConvergence { .. }), "{err:?}");
        let pos = positivity_diagnostic(&d, &["X"], &PositivityOptions::default()).unwrap();
        assert!(pos.flagged && pos.separated);
    }
}
