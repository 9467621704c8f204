//! Exact enumeration of discrete models and ground-truth effects.

use serde::Serialize;

use super::sample::table_row;
use super::{CMech, Scm, ScmError};
use crate::expr::{JointTable, Variable};

/// Upper bound on the number of enumerated configurations.
pub const MAX_STATES: u128 = 1 << 21;

const MC_DRAWS: usize = 200_000;
const MC_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectMethod {
    ExactEnumeration,
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Effect {
    pub mean: f64,
    /// Zero for exact and analytic values.
    pub se: f64,
    pub method: EffectMethod,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Possible values of a scalar mechanism with their probabilities.
fn branches(m: &CMech, vals: &[f64], name: &str) -> Result<Vec<(f64, f64)>, ScmError> {
    Ok(match m {
        CMech::Bern { p } => vec![(0.0, 1.0 - p), (1.0, *p)],
        CMech::Logistic { intercept, coefs } => {
            let p = logistic(intercept + coefs.iter().map(|&(i, c)| c * vals[i]).sum::<f64>());
            vec![(0.0, 1.0 - p), (1.0, p)]
        }
        CMech::Table { parents, cards, rows } => {
            rows[table_row(parents, cards, vals)].iter().enumerate().map(|(k, &p)| (k as f64, p)).collect()
        }
        CMech::Det(f) => vec![(f.eval(vals), 1.0)],
        CMech::Point(v) => vec![(*v, 1.0)],
        CMech::Linear { intercept, coefs, noise } => vec![(
            intercept + coefs.iter().map(|&(i, c)| c * vals[i]).sum::<f64>() + noise.map_or(0.0, |i| vals[i]),
            1.0,
        )],
        _ => return Err(ScmError::NotDiscrete(name.to_string())),
    })
}

fn width(m: &CMech) -> u128 {
    match m {
        CMech::Bern { .. } | CMech::Logistic { .. } => 2,
        CMech::Table { rows, .. } => rows[0].len() as u128,
        CMech::Switch { arms, .. } => arms.iter().map(width).product(),
        _ => 1,
    }
}

/// Position of a requested variable: a model variable or an arm of the
/// outcome switch.
#[derive(Clone, Copy)]
enum Slot {
    Var(usize),
    Arm(usize),
}

struct Walk<'a> {
    scm: &'a Scm,
    outcome: Option<usize>,
    slots: Vec<(Slot, usize)>,
    strides: Vec<usize>,
    probs: Vec<f64>,
    error: Option<ScmError>,
}

impl Walk<'_> {
    fn leaf(&mut self, w: f64, vals: &[f64], arms: &[f64]) {
        let mut cell = 0;
        for (k, &(slot, card)) in self.slots.iter().enumerate() {
            let (v, name) = match slot {
                Slot::Var(i) => (vals[i], self.scm.vars[i].name.clone()),
                Slot::Arm(a) => (arms[a], format!("arm {a}")),
            };
            if v.fract() != 0.0 || v < 0.0 || v as usize >= card {
                self.error.get_or_insert(ScmError::NotDiscrete(name));
                return;
            }
            cell += v as usize * self.strides[k];
        }
        self.probs[cell] += w;
    }

    fn go(&mut self, unit: usize, w: f64, vals: &mut Vec<f64>, arms: &mut Vec<f64>) -> Result<(), ScmError> {
        if w == 0.0 {
            return Ok(());
        }
        let Some(u) = self.scm.compiled.get(unit) else {
            self.leaf(w, vals, arms);
            return Ok(());
        };
        let out = u.outputs[0];
        let name = &self.scm.vars[out].name;
        match &u.mech {
            CMech::Switch { treatment, arms: ms } => {
                let per_arm: Vec<Vec<(f64, f64)>> =
                    ms.iter().map(|m| branches(m, vals, name)).collect::<Result<_, _>>()?;
                // odometer over the joint arm outcomes
                let mut pick = vec![0usize; ms.len()];
                loop {
                    let values: Vec<f64> = pick.iter().enumerate().map(|(a, &k)| per_arm[a][k].0).collect();
                    let p: f64 = pick.iter().enumerate().map(|(a, &k)| per_arm[a][k].1).product();
                    vals[out] = values[vals[*treatment] as usize];
                    let saved = if Some(out) == self.outcome { Some(std::mem::replace(arms, values)) } else { None };
                    self.go(unit + 1, w * p, vals, arms)?;
                    if let Some(s) = saved {
                        *arms = s;
                    }
                    let mut a = 0;
                    loop {
                        if a == pick.len() {
                            return Ok(());
                        }
                        pick[a] += 1;
                        if pick[a] < per_arm[a].len() {
                            break;
                        }
                        pick[a] = 0;
                        a += 1;
                    }
                }
            }
            CMech::Cyclic { inv, intercepts, noise } => {
                let k = intercepts.len();
                let rhs: Vec<f64> = (0..k).map(|i| intercepts[i] + vals[noise[i]]).collect();
                for i in 0..k {
                    vals[u.outputs[i]] = (0..k).map(|j| inv[(i, j)] * rhs[j]).sum();
                }
                self.go(unit + 1, w, vals, arms)
            }
            m => {
                for (v, p) in branches(m, vals, name)? {
                    vals[out] = v;
                    self.go(unit + 1, w * p, vals, arms)?;
                }
                Ok(())
            }
        }
    }
}

impl Scm {
    /// Joint distribution of the named variables by enumerating every
    /// configuration of the model. Potential-outcome names from
    /// [`Scm::potential_outcomes`] are accepted alongside model variables.
    pub fn exact_joint(&self, names: &[&str]) -> Result<JointTable, ScmError> {
        for u in &self.compiled {
            if matches!(u.mech, CMech::Gauss { .. } | CMech::MvNormal { .. }) {
                return Err(ScmError::NotDiscrete(self.vars[u.outputs[0]].name.clone()));
            }
        }
        let states =
            self.compiled.iter().try_fold(1u128, |acc, u| acc.checked_mul(width(&u.mech))).unwrap_or(u128::MAX);
        if states > MAX_STATES {
            return Err(ScmError::StateSpaceTooLarge(states));
        }

        let po = self.potential_outcomes().unwrap_or_default();
        let mut slots = Vec::new();
        let mut vars = Vec::new();
        for &name in names {
            let (slot, card) = if let Some(a) = po.iter().position(|p| p == name) {
                let y = self.outcome.as_deref().expect("potential outcomes imply an outcome");
                (Slot::Arm(a), self.var(y)?.card)
            } else {
                let i = self.idx(name)?;
                (Slot::Var(i), self.vars[i].card)
            };
            let card = card.ok_or_else(|| ScmError::NotDiscrete(name.to_string()))?;
            slots.push((slot, card));
            vars.push(Variable::new(name, card));
        }
        let mut strides = vec![1usize; slots.len()];
        for k in (0..slots.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * slots[k + 1].1;
        }
        let size = slots.iter().map(|s| s.1).product();

        let mut walk = Walk {
            scm: self,
            outcome: self.outcome.as_ref().and_then(|y| self.index.get(y).copied()),
            slots,
            strides,
            probs: vec![0.0; size],
            error: None,
        };
        let mut vals = vec![0.0; self.vars.len()];
        let mut arms = Vec::new();
        walk.go(0, 1.0, &mut vals, &mut arms)?;
        if let Some(e) = walk.error {
            return Err(e);
        }
        Ok(JointTable::new(vars, walk.probs)?)
    }

    /// E[Y(a)] for the declared treatment and outcome, by exact
    /// enumeration when every mechanism is discrete, by linear propagation
    /// when the intervened model is linear-Gaussian, and by Monte Carlo
    /// otherwise.
    pub fn true_effect(&self, a: f64) -> Result<Effect, ScmError> {
        let (t, y) = self.query()?;
        let s = self.intervene(&[(t, a)])?;
        match s.exact_joint(&[y]) {
            Ok(j) => {
                let mean = j.probs().iter().enumerate().map(|(k, p)| k as f64 * p).sum();
                return Ok(Effect { mean, se: 0.0, method: EffectMethod::ExactEnumeration });
            }
            Err(ScmError::NotDiscrete(_)) => {}
            Err(e) => return Err(e),
        }
        match s.linear_mean(y) {
            Ok(mean) => return Ok(Effect { mean, se: 0.0, method: EffectMethod::Analytic }),
            Err(ScmError::NonLinearMechanism(_)) => {}
            Err(e) => return Err(e),
        }
        let d = s.sample(MC_DRAWS, MC_SEED)?;
        let ys = d.column(y)?;
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Effect { mean, se: (var / n).sqrt(), method: EffectMethod::MonteCarlo })
    }

    /// E[Y(1)] − E[Y(0)].
    pub fn true_ate(&self) -> Result<Effect, ScmError> {
        let e1 = self.true_effect(1.0)?;
        let e0 = self.true_effect(0.0)?;
        let method = if e1.method == EffectMethod::MonteCarlo || e0.method == EffectMethod::MonteCarlo {
            EffectMethod::MonteCarlo
        } else {
            e1.method
        };
        Ok(Effect { mean: e1.mean - e0.mean, se: e1.se.hypot(e0.se), method })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{Formula, Mechanism};

    #[test]
    fn fair_coin() {
        let s = Scm::builder().node("X", Mechanism::ExogBernoulli { p: 0.5 }).build().unwrap();
        let j = s.exact_joint(&["X"]).unwrap();
        assert_eq!(j.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn gaussian_is_not_discrete() {
        let s = Scm::builder().node("X", Mechanism::ExogGaussian { mean: 0.0, variance: 1.0 }).build().unwrap();
        assert!(matches!(s.exact_joint(&["X"]), Err(ScmError::NotDiscrete(_))));
    }

    #[test]
    fn state_space_limit() {
        let mut b = Scm::builder();
        for i in 0..22 {
            b = b.node(&format!("X{i}"), Mechanism::ExogBernoulli { p: 0.5 });
        }
        let s = b.build().unwrap();
        assert_eq!(s.exact_joint(&["X0"]), Err(ScmError::StateSpaceTooLarge(1 << 22)));
    }

    #[test]
    fn deterministic_parity() {
        let s = Scm::builder()
            .node("U1", Mechanism::ExogBernoulli { p: 0.6 })
            .node("U2", Mechanism::ExogBernoulli { p: 0.4 })
            .node(
                "C",
                Mechanism::Deterministic {
                    formula: (Formula::var("U1") + Formula::var("U2")).modulo(2.0),
                    card: Some(2),
                },
            )
            .build()
            .unwrap();
        let j = s.exact_joint(&["C"]).unwrap();
        assert!((j.probs()[1] - 0.52).abs() < 1e-15);
    }

    #[test]
    fn null_intervention_keeps_joint() {
        let s = Scm::builder()
            .node("X", Mechanism::ExogBernoulli { p: 0.3 })
            .node("Y", Mechanism::TableCpd { parents: vec!["X".into()], rows: vec![vec![0.9, 0.1], vec![0.4, 0.6]] })
            .query("X", "Y")
            .build()
            .unwrap();
        let same = s.intervene(&[]).unwrap();
        assert_eq!(same.exact_joint(&["X", "Y"]).unwrap(), s.exact_joint(&["X", "Y"]).unwrap());
        let e = s.true_effect(1.0).unwrap();
        assert!((e.mean - 0.6).abs() < 1e-15);
        assert_eq!(e.method, EffectMethod::ExactEnumeration);
    }
}
