//! Outcome regression on treatment and covariates.

use nalgebra::{DMatrix, DVector};

use super::{ate_label, query_columns, EstimError, EstimateReport};
use crate::scm::Dataset;

/// A pivot of the QR factor counts toward the rank when its magnitude
/// exceeds this fraction of the largest pivot.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Least-squares fit of `Y ~ 1 + A + covariates` via column-pivoted QR.
/// The estimate is the coefficient on `A`, with the classical
/// `σ² (XᵀX)⁻¹` standard error.
///
/// Exactly collinear designs are rejected with
/// [`EstimError::RankDeficient`] rather than regularized.
pub fn regression_adjustment(d: &Dataset, covariates: &[&str]) -> Result<EstimateReport, EstimError> {
    let (a, y) = query_columns(d)?;
    let n = d.n();
    let mut names = vec!["(intercept)".to_string(), d.treatment.clone().unwrap_or_default()];
    let mut cols: Vec<&[f64]> = vec![a];
    for &c in covariates {
        if names.iter().any(|n| n == c) {
            return Err(EstimError::BadInput(format!("covariate `{c}` listed twice or equal to the treatment")));
        }
        cols.push(d.column(c)?);
        names.push(c.to_string());
    }
    let p = names.len();
    if n <= p {
        return Err(EstimError::BadInput(format!("{n} rows cannot fit {p} coefficients")));
    }
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
    let yv = DVector::from_column_slice(y);

    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    // pivot position j holds original column order[j]
    let mut order = DMatrix::from_fn(1, p, |_, j| j as f64);
    qr.p().permute_columns(&mut order);
    let order: Vec<usize> = order.iter().map(|&v| v as usize).collect();

    let top = r[(0, 0)].abs();
    let rank = (0..p).filter(|&j| r[(j, j)].abs() > RANK_TOLERANCE * top).count();
    if rank < p {
        return Err(EstimError::RankDeficient {
            rank,
            columns: p,
            dependent: order[rank..].iter().map(|&j| names[j].clone()).collect(),
        });
    }

    let qty = qr.q().transpose() * &yv;
    let r_inv =
        r.clone().try_inverse().ok_or_else(|| EstimError::RankDeficient { rank, columns: p, dependent: Vec::new() })?;
    let beta_perm = &r_inv * qty;
    let mut beta = DVector::zeros(p);
    for (j, &orig) in order.iter().enumerate() {
        beta[orig] = beta_perm[j];
    }
    let resid = &yv - &x * &beta;
    let sigma2 = resid.norm_squared() / (n - p) as f64;
    let cov_perm = &r_inv * r_inv.transpose();
    let at = order.iter().position(|&j| j == 1).expect("treatment column present");
    let se = (sigma2 * cov_perm[(at, at)]).sqrt();

    let mut rep = EstimateReport::new("regression-adjustment", ate_label(d), beta[1], se, n, d.seed);
    rep.diagnostics.insert("covariates".into(), serde_json::json!(covariates));
    rep.diagnostics.insert("residual_variance".into(), sigma2.into());
    let coefs: serde_json::Map<String, serde_json::Value> =
        names.iter().zip(beta.iter()).map(|(n, &b)| (n.clone(), b.into())).collect();
    rep.diagnostics.insert("coefficients".into(), coefs.into());
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(cols: Vec<(&str, Vec<f64>)>) -> Dataset {
        let (names, columns): (Vec<String>, Vec<Vec<f64>>) = cols.into_iter().map(|(n, c)| (n.to_string(), c)).unzip();
        Dataset::new(names, columns).unwrap().with_query("A", "Y").unwrap()
    }

    #[test]
    fn exact_linear_fit() {
        // Y = 1 + 3A − 2C exactly, so the residual variance is zero
        let a: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        let c: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = a.iter().zip(&c).map(|(a, c)| 1.0 + 3.0 * a - 2.0 * c).collect();
        let r = regression_adjustment(&dataset(vec![("A", a), ("Y", y), ("C", c)]), &["C"]).unwrap();
        assert!((r.estimate - 3.0).abs() < 1e-12);
        assert!(r.se < 1e-6);
        assert!((r.diagnostics["coefficients"]["C"].as_f64().unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations() {
        let n = 50;
        let a: Vec<f64> = (0..n).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
        let c1: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let c2: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).sin() * 4.0).collect();
        let y: Vec<f64> = (0..n).map(|i| a[i] - c1[i] + 0.5 * c2[i] + ((i * 31) % 7) as f64 / 7.0).collect();
        let x = DMatrix::from_fn(n, 4, |i, j| [1.0, a[i], c1[i], c2[i]][j]);
        let xtx = x.transpose() * &x;
        let inv = xtx.try_inverse().unwrap();
        let beta = &inv * x.transpose() * DVector::from_column_slice(&y);
        let resid = DVector::from_column_slice(&y) - &x * &beta;
        let s2 = resid.norm_squared() / (n - 4) as f64;
        let r =
            regression_adjustment(&dataset(vec![("A", a), ("Y", y), ("C1", c1), ("C2", c2)]), &["C2", "C1"]).unwrap();
        assert!((r.estimate - beta[1]).abs() < 1e-10);
        assert!((r.se - (s2 * inv[(1, 1)]).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn collinear_covariates() {
        let a: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let c2: Vec<f64> = (0..10).map(|i| (i as f64).sqrt()).collect();
        let c3: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).cos()).collect();
        let c1: Vec<f64> = c2.iter().zip(&c3).map(|(x, y)| x + y).collect();
        let y = c1.clone();
        let d = dataset(vec![("A", a), ("Y", y), ("C1", c1), ("C2", c2), ("C3", c3)]);
        let err = regression_adjustment(&d, &["C1", "C2", "C3"]).unwrap_err();
        assert!(matches!(err, EstimError::RankDeficient { rank: 4, columns: 5, .. }), "{err:?}");
        assert!(regression_adjustment(&d, &["C2", "C3"]).is_ok());
    }
}
