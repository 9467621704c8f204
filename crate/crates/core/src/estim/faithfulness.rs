//! Independences in a linear-Gaussian covariance that the graph does not
//! imply.

use serde::Serialize;

use super::EstimError;
use crate::graph::MixedGraph;
use crate::scm::{Covariance, Scm, ScmError};
use crate::sep::{d_separated, SepQuery};

/// Partial correlations at or below this magnitude count as zero.
pub const FAITHFULNESS_TOLERANCE: f64 = 1e-10;

/// `x ⫫ y | given` holds in the distribution but the graph connects them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub x: String,
    pub y: String,
    pub given: Vec<String>,
    pub partial_correlation: f64,
}

fn subsets_up_to_two(pool: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    out.extend(pool.iter().map(|&a| vec![a]));
    for (i, &a) in pool.iter().enumerate() {
        out.extend(pool[i + 1..].iter().map(|&b| vec![a, b]));
    }
    out
}

/// Every pair `(x, y)` of covariance variables and conditioning set `Z`
/// with `|Z| ≤ 2` whose partial correlation vanishes while `x` and `y` are
/// d-connected given `Z` in `g`.
///
/// Pairs where `x` or `y` is a deterministic function of `Z` have no
/// partial correlation and are skipped. Output follows the covariance
/// order: pairs first, then conditioning sets by size.
pub fn faithfulness_check(g: &MixedGraph, cov: &Covariance) -> Result<Vec<Violation>, EstimError> {
    let k = cov.names.len();
    for name in &cov.names {
        g.require(name)?;
    }
    let scale = (0..k).map(|i| cov.matrix[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    for x in 0..k {
        for y in x + 1..k {
            let pool: Vec<usize> = (0..k).filter(|&v| v != x && v != y).collect();
            for z in subsets_up_to_two(&pool) {
                let [vx, cxy, vy] = cov.conditional(x, y, &z);
                if vx <= FAITHFULNESS_TOLERANCE * scale || vy <= FAITHFULNESS_TOLERANCE * scale {
                    continue;
                }
                let rho = cxy / (vx * vy).sqrt();
                if rho.abs() > FAITHFULNESS_TOLERANCE {
                    continue;
                }
                let given: Vec<&str> = z.iter().map(|&i| cov.names[i].as_str()).collect();
                let q = SepQuery::named(g, &[&cov.names[x]], &[&cov.names[y]], &given)?;
                if !d_separated(g, &q)? {
                    out.push(Violation {
                        x: cov.names[x].clone(),
                        y: cov.names[y].clone(),
                        given: given.iter().map(|s| s.to_string()).collect(),
                        partial_correlation: rho,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// [`faithfulness_check`] on the named variables of a linear-Gaussian
/// model, against the model's own structural graph with latents projected
/// out.
pub fn faithfulness_check_scm(scm: &Scm, names: &[&str]) -> Result<Vec<Violation>, EstimError> {
    let cov = scm.implied_covariance(names).map_err(|e| match e {
        ScmError::NonLinearMechanism(v) => EstimError::NonGaussian(format!("`{v}` is not linear")),
        other => other.into(),
    })?;
    let g = scm.graph().project_declared_latents()?;
    faithfulness_check(&g, &cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;
    use nalgebra::DMatrix;

    #[test]
    fn independent_variables_on_empty_graph() {
        let g = parse_graph("X; Y; Z").unwrap();
        let cov = Covariance {
            names: vec!["X".into(), "Y".into(), "Z".into()],
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 0.5])),
        };
        assert!(faithfulness_check(&g, &cov).unwrap().is_empty());
    }

    #[test]
    fn cancelling_paths() {
        // X -> Y directly and through M with opposite signs: cov(X, Y) = 0
        let g = parse_graph("X -> M; M -> Y; X -> Y").unwrap();
        let cov = Covariance {
            names: vec!["X".into(), "M".into(), "Y".into()],
            // M = X + e, Y = M − X + f
            matrix: DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]),
        };
        let v = faithfulness_check(&g, &cov).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].x.as_str(), v[0].y.as_str()), ("X", "Y"));
        assert!(v[0].given.is_empty());
    }
}
