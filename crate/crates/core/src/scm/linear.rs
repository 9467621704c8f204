//! Linear-Gaussian algebra: cyclic solves and implied moments.
//!
//! Every linear variable is written as an affine function of independent
//! standard normal sources. Gaussian roots contribute one source each and
//! a multivariate normal block contributes one per member through its
//! Cholesky factor, so covariances are exact inner products of the
//! coefficient rows.

use nalgebra::DMatrix;

use super::{CFormula, CMech, Scm, ScmError};

/// `I - B` counts as singular below this smallest singular value.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicSolution {
    pub values: Vec<f64>,
    /// Ratio of the largest to the smallest singular value of `I - B`.
    pub condition: f64,
}

fn i_minus(b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::identity(b.nrows(), b.ncols()) - b
}

pub(super) fn condition_number(b: &DMatrix<f64>) -> Result<f64, ScmError> {
    let sv = i_minus(b).singular_values();
    let max = sv.max();
    let min = sv.min();
    if min < SINGULAR_TOLERANCE {
        return Err(ScmError::CyclicUnsolvable { min_singular: min });
    }
    Ok(max / min)
}

pub(super) fn inverse_i_minus(b: &DMatrix<f64>) -> Result<DMatrix<f64>, ScmError> {
    condition_number(b)?;
    let m = i_minus(b);
    let min = m.singular_values().min();
    m.try_inverse().ok_or(ScmError::CyclicUnsolvable { min_singular: min })
}

/// Solves `x = B x + intercepts + noise`.
pub fn solve_cyclic(b: &DMatrix<f64>, intercepts: &[f64], noise: &[f64]) -> Result<CyclicSolution, ScmError> {
    let k = b.nrows();
    if b.ncols() != k || intercepts.len() != k || noise.len() != k {
        return Err(ScmError::BadParameter("cyclic system dimensions disagree".into()));
    }
    let condition = condition_number(b)?;
    let rhs = DMatrix::from_fn(k, 1, |i, _| intercepts[i] + noise[i]);
    let x = i_minus(b).lu().solve(&rhs).ok_or(ScmError::CyclicUnsolvable { min_singular: 0.0 })?;
    Ok(CyclicSolution { values: x.iter().copied().collect(), condition })
}

/// Covariance matrix over named variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    pub names: Vec<String>,
    pub matrix: DMatrix<f64>,
}

impl Covariance {
    pub fn index_of(&self, name: &str) -> Result<usize, ScmError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| ScmError::UnknownVariable(name.to_string()))
    }

    pub fn get(&self, a: &str, b: &str) -> Result<f64, ScmError> {
        Ok(self.matrix[(self.index_of(a)?, self.index_of(b)?)])
    }

    pub fn precision(&self) -> Option<DMatrix<f64>> {
        self.matrix.clone().cholesky().map(|c| c.inverse())
    }

    /// Conditional covariance of `(x, y)` given `z`, computed with a
    /// pseudo-inverse so that deterministic relations inside `z` are
    /// handled. Returns `[var x, cov xy, var y]`.
    pub fn conditional(&self, x: usize, y: usize, z: &[usize]) -> [f64; 3] {
        let m = &self.matrix;
        if z.is_empty() {
            return [m[(x, x)], m[(x, y)], m[(y, y)]];
        }
        let k = z.len();
        let szz = DMatrix::from_fn(k, k, |i, j| m[(z[i], z[j])]);
        let pinv = szz.pseudo_inverse(1e-12).expect("non-negative tolerance");
        let col = |a: usize| DMatrix::from_fn(k, 1, |i, _| m[(z[i], a)]);
        let (zx, zy) = (col(x), col(y));
        let adj = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a.transpose() * &pinv * b)[(0, 0)];
        [m[(x, x)] - adj(&zx, &zx), m[(x, y)] - adj(&zx, &zy), m[(y, y)] - adj(&zy, &zy)]
    }
}

/// Affine form `c + w · sources`.
#[derive(Debug, Clone)]
struct Affine {
    c: f64,
    w: Vec<f64>,
}

impl Affine {
    fn constant(c: f64, n: usize) -> Self {
        Affine { c, w: vec![0.0; n] }
    }

    fn is_constant(&self) -> bool {
        self.w.iter().all(|&x| x == 0.0)
    }

    fn axpy(&mut self, k: f64, other: &Affine) {
        self.c += k * other.c;
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            *a += k * b;
        }
    }
}

type Form = Result<Affine, String>;

fn sources(m: &CMech) -> usize {
    match m {
        CMech::Gauss { .. } => 1,
        CMech::MvNormal { mean, .. } => mean.len(),
        CMech::Switch { arms, .. } => arms.iter().map(sources).sum(),
        _ => 0,
    }
}

fn formula_form(f: &CFormula, forms: &[Option<Form>], n: usize, origin: &str) -> Form {
    let get = |i: usize| forms[i].clone().expect("parents precede children");
    match f {
        CFormula::Var(i) => get(*i),
        CFormula::Const(c) => Ok(Affine::constant(*c, n)),
        CFormula::Add(a, b) | CFormula::Sub(a, b) => {
            let mut x = formula_form(a, forms, n, origin)?;
            let y = formula_form(b, forms, n, origin)?;
            x.axpy(if matches!(f, CFormula::Add(..)) { 1.0 } else { -1.0 }, &y);
            Ok(x)
        }
        CFormula::Mul(a, b) => {
            let x = formula_form(a, forms, n, origin)?;
            let y = formula_form(b, forms, n, origin)?;
            let (k, v) = if x.is_constant() {
                (x.c, y)
            } else if y.is_constant() {
                (y.c, x)
            } else {
                return Err(origin.to_string());
            };
            let mut out = Affine::constant(0.0, n);
            out.axpy(k, &v);
            Ok(out)
        }
        CFormula::Mod(a, b) => {
            let x = formula_form(a, forms, n, origin)?;
            let y = formula_form(b, forms, n, origin)?;
            if x.is_constant() && y.is_constant() {
                Ok(Affine::constant(x.c.rem_euclid(y.c), n))
            } else {
                Err(origin.to_string())
            }
        }
    }
}

fn scalar_form(m: &CMech, forms: &[Option<Form>], n: usize, origin: &str, next: &mut usize) -> Form {
    let get = |i: usize| forms[i].clone().expect("parents precede children");
    match m {
        CMech::Gauss { mean, sd } => {
            let mut a = Affine::constant(*mean, n);
            a.w[*next] = *sd;
            *next += 1;
            Ok(a)
        }
        CMech::Linear { intercept, coefs, noise } => {
            let mut a = Affine::constant(*intercept, n);
            for &(i, c) in coefs {
                a.axpy(c, &get(i)?);
            }
            if let Some(i) = noise {
                a.axpy(1.0, &get(*i)?);
            }
            Ok(a)
        }
        CMech::Det(f) => formula_form(f, forms, n, origin),
        CMech::Point(v) => Ok(Affine::constant(*v, n)),
        CMech::Switch { treatment, arms } => {
            let t = get(*treatment)?;
            if !t.is_constant() {
                return Err(origin.to_string());
            }
            let k = t.c as usize;
            let arm = arms.get(k).ok_or_else(|| origin.to_string())?;
            *next += arms[..k].iter().map(sources).sum::<usize>();
            scalar_form(arm, forms, n, origin, next)
        }
        _ => Err(origin.to_string()),
    }
}

impl Scm {
    fn source_count(&self) -> usize {
        self.compiled.iter().map(|u| sources(&u.mech)).sum()
    }

    /// Affine forms of every variable; `Err(name)` marks variables that
    /// depend on the non-linear mechanism of `name`.
    fn affine_forms(&self) -> Vec<Form> {
        let n = self.source_count();
        let mut forms: Vec<Option<Form>> = vec![None; self.vars.len()];
        let mut next = 0;
        for unit in &self.compiled {
            let origin = &self.vars[unit.outputs[0]].name;
            match &unit.mech {
                CMech::MvNormal { mean, chol } => {
                    let k = mean.len();
                    for i in 0..k {
                        let mut a = Affine::constant(mean[i], n);
                        for j in 0..=i {
                            a.w[next + j] = chol[(i, j)];
                        }
                        forms[unit.outputs[i]] = Some(Ok(a));
                    }
                    next += k;
                }
                CMech::Cyclic { inv, intercepts, noise } => {
                    let k = intercepts.len();
                    let rhs: Result<Vec<Affine>, String> = (0..k)
                        .map(|j| {
                            let mut a = forms[noise[j]].clone().expect("parents precede children")?;
                            a.c += intercepts[j];
                            Ok(a)
                        })
                        .collect();
                    for i in 0..k {
                        forms[unit.outputs[i]] = Some(rhs.clone().map(|rhs| {
                            let mut a = Affine::constant(0.0, n);
                            for (j, r) in rhs.iter().enumerate() {
                                a.axpy(inv[(i, j)], r);
                            }
                            a
                        }));
                    }
                }
                m => {
                    let before = next;
                    let f = scalar_form(m, &forms, n, origin, &mut next);
                    // sources of unused switch arms stay reserved
                    next = before + sources(m);
                    forms[unit.outputs[0]] = Some(f);
                }
            }
        }
        forms.into_iter().map(|f| f.expect("every variable is written")).collect()
    }

    fn forms_for(&self, names: &[&str]) -> Result<Vec<Affine>, ScmError> {
        let forms = self.affine_forms();
        names
            .iter()
            .map(|name| {
                let i = self.idx(name)?;
                forms[i].clone().map_err(ScmError::NonLinearMechanism)
            })
            .collect()
    }

    /// Exact covariance of the named variables by linear propagation.
    pub fn implied_covariance(&self, names: &[&str]) -> Result<Covariance, ScmError> {
        let forms = self.forms_for(names)?;
        let k = forms.len();
        let matrix = DMatrix::from_fn(k, k, |i, j| forms[i].w.iter().zip(&forms[j].w).map(|(a, b)| a * b).sum());
        Ok(Covariance { names: names.iter().map(|s| s.to_string()).collect(), matrix })
    }

    /// Exact mean of a linear variable.
    pub fn linear_mean(&self, name: &str) -> Result<f64, ScmError> {
        Ok(self.forms_for(&[name])?[0].c)
    }
}
