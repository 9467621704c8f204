//! Monte Carlo sampling and the [`Dataset`] container.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use super::rng::{std_normal, RowRng};
use super::{CMech, Scm, ScmError};

/// Column-oriented table of simulated or loaded units.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    potential: Vec<String>,
    pub treatment: Option<String>,
    pub outcome: Option<String>,
    pub seed: Option<u64>,
    /// Free-form generator metadata written to the JSON sidecar.
    pub meta: BTreeMap<String, serde_json::Value>,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(super) fn table_row(parents: &[usize], cards: &[usize], vals: &[f64]) -> usize {
    parents.iter().zip(cards).fold(0, |acc, (&p, &c)| acc * c + vals[p] as usize)
}

fn categorical(row: &[f64], u: f64) -> f64 {
    let mut cum = 0.0;
    for (k, &p) in row.iter().enumerate() {
        cum += p;
        if u < cum {
            return k as f64;
        }
    }
    // rounding left u above the final cumulative sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0) as f64
}

fn eval_scalar(m: &CMech, vals: &[f64], u: &[f64]) -> f64 {
    match m {
        CMech::Gauss { mean, sd } => mean + sd * std_normal(u[0]),
        CMech::Bern { p } => f64::from(u[0] < *p),
        CMech::Linear { intercept, coefs, noise } => {
            intercept + coefs.iter().map(|&(i, c)| c * vals[i]).sum::<f64>() + noise.map_or(0.0, |i| vals[i])
        }
        CMech::Logistic { intercept, coefs } => {
            let eta = intercept + coefs.iter().map(|&(i, c)| c * vals[i]).sum::<f64>();
            f64::from(u[0] < logistic(eta))
        }
        CMech::Det(f) => f.eval(vals),
        CMech::Table { parents, cards, rows } => categorical(&rows[table_row(parents, cards, vals)], u[0]),
        CMech::Point(v) => *v,
        CMech::MvNormal { .. } | CMech::Cyclic { .. } | CMech::Switch { .. } => {
            unreachable!("block and switch mechanisms are evaluated by the caller")
        }
    }
}

impl Scm {
    /// Evaluates one row; returns the arm values of the outcome switch.
    fn eval_row(&self, seed: u64, row: u64, vals: &mut [f64], u: &mut [f64]) -> Vec<f64> {
        RowRng::new(seed, row).fill(u);
        let outcome = self.outcome.as_ref().and_then(|y| self.index.get(y).copied());
        let mut arms_out = Vec::new();
        for unit in &self.compiled {
            let us = &u[unit.slot..unit.slot + unit.mech.slots()];
            match &unit.mech {
                CMech::MvNormal { mean, chol } => {
                    let k = mean.len();
                    let z: Vec<f64> = us.iter().map(|&x| std_normal(x)).collect();
                    for i in 0..k {
                        let mut x = mean[i];
                        for (j, zj) in z.iter().enumerate().take(i + 1) {
                            x += chol[(i, j)] * zj;
                        }
                        vals[unit.outputs[i]] = x;
                    }
                }
                CMech::Cyclic { inv, intercepts, noise } => {
                    let k = intercepts.len();
                    let rhs: Vec<f64> = (0..k).map(|i| intercepts[i] + vals[noise[i]]).collect();
                    for i in 0..k {
                        vals[unit.outputs[i]] = (0..k).map(|j| inv[(i, j)] * rhs[j]).sum();
                    }
                }
                CMech::Switch { treatment, arms } => {
                    let mut offset = 0;
                    let mut values = Vec::with_capacity(arms.len());
                    for arm in arms {
                        let n = arm.slots();
                        values.push(eval_scalar(arm, vals, &us[offset..offset + n]));
                        offset += n;
                    }
                    vals[unit.outputs[0]] = values[vals[*treatment] as usize];
                    if Some(unit.outputs[0]) == outcome {
                        arms_out = values;
                    }
                }
                m => vals[unit.outputs[0]] = eval_scalar(m, vals, us),
            }
        }
        arms_out
    }

    /// Draws `n` independent rows. Row `i` depends only on `(seed, i)`.
    ///
    /// The dataset holds every non-latent variable plus, when the outcome is
    /// a switch, one potential-outcome column per treatment value.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset, ScmError> {
        if n == 0 {
            return Err(ScmError::BadParameter("sample size must be at least 1".into()));
        }
        let observed: Vec<usize> = (0..self.vars.len()).filter(|&i| !self.vars[i].latent).collect();
        let po = self.potential_outcomes().unwrap_or_default();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n as u64)
            .into_par_iter()
            .map_init(
                || (vec![0.0; self.vars.len()], vec![0.0; self.slots]),
                |(vals, u), row| {
                    let arms = self.eval_row(seed, row, vals, u);
                    (observed.iter().map(|&i| vals[i]).collect(), arms)
                },
            )
            .collect();

        let mut names: Vec<String> = observed.iter().map(|&i| self.vars[i].name.clone()).collect();
        let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); names.len() + po.len()];
        for (obs, arms) in &rows {
            for (c, v) in obs.iter().enumerate() {
                columns[c].push(*v);
            }
            for (k, v) in arms.iter().enumerate() {
                columns[observed.len() + k].push(*v);
            }
        }
        names.extend(po.iter().cloned());

        let mut d = Dataset::new(names, columns)?;
        d.potential = po;
        d.treatment = self.treatment.clone();
        d.outcome = self.outcome.clone();
        d.seed = Some(seed);
        d.meta.insert("n".into(), n.into());
        d.meta.insert("seed".into(), seed.into());
        if let Some(c) = self.cyclic_condition() {
            d.meta.insert("cyclic_condition_number".into(), c.into());
        }
        Ok(d)
    }
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Dataset, ScmError> {
        if names.len() != columns.len() {
            return Err(ScmError::Dataset(format!("{} names for {} columns", names.len(), columns.len())));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(ScmError::Dataset("columns differ in length".into()));
            }
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(ScmError::Dataset(format!("duplicate column `{name}`")));
            }
        }
        Ok(Dataset {
            names,
            columns,
            potential: Vec::new(),
            treatment: None,
            outcome: None,
            seed: None,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_query(mut self, treatment: &str, outcome: &str) -> Result<Dataset, ScmError> {
        self.column(treatment)?;
        self.column(outcome)?;
        self.treatment = Some(treatment.to_string());
        self.outcome = Some(outcome.to_string());
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64], ScmError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| ScmError::UnknownVariable(name.to_string()))
    }

    pub fn treatment_column(&self) -> Result<&[f64], ScmError> {
        self.column(self.treatment.as_deref().ok_or(ScmError::NoQuery)?)
    }

    pub fn outcome_column(&self) -> Result<&[f64], ScmError> {
        self.column(self.outcome.as_deref().ok_or(ScmError::NoQuery)?)
    }

    /// Names of the potential-outcome columns (empty for real data).
    pub fn potential_names(&self) -> &[String] {
        &self.potential
    }

    /// Checks `Y = A·Y(1) + (1−A)·Y(0)` exactly on every row.
    pub fn consistency_holds(&self) -> Result<bool, ScmError> {
        if self.potential.len() != 2 {
            return Err(ScmError::Dataset("no binary potential outcomes".into()));
        }
        let a = self.treatment_column()?;
        let y = self.outcome_column()?;
        let y0 = self.column(&self.potential[0])?;
        let y1 = self.column(&self.potential[1])?;
        Ok((0..self.n()).all(|i| y[i] == a[i] * y1[i] + (1.0 - a[i]) * y0[i]))
    }

    /// Writes a header and one row per unit; potential outcomes are left
    /// out unless `include_po` is set.
    pub fn write_csv<W: Write>(&self, out: W, include_po: bool) -> Result<(), ScmError> {
        let keep: Vec<usize> =
            (0..self.names.len()).filter(|&i| include_po || !self.potential.contains(&self.names[i])).collect();
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| ScmError::Dataset(e.to_string());
        w.write_record(keep.iter().map(|&i| self.names[i].as_str())).map_err(err)?;
        for r in 0..self.n() {
            w.write_record(keep.iter().map(|&i| format!("{}", self.columns[i][r]))).map_err(err)?;
        }
        w.flush().map_err(|e| ScmError::Dataset(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Dataset, ScmError> {
        let err = |e: csv::Error| ScmError::Dataset(e.to_string());
        let mut r = csv::Reader::from_reader(input);
        let names: Vec<String> = r.headers().map_err(err)?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(err)?;
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| ScmError::Dataset(format!("row {}: `{field}` is not a number", line + 2)))?;
                columns[c].push(v);
            }
        }
        Dataset::new(names, columns)
    }

    /// Sidecar metadata: seed, size, query and generator fields.
    pub fn metadata_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (k, v) in &self.meta {
            m.insert(k.clone(), v.clone());
        }
        m.insert("n".into(), self.n().into());
        m.insert("seed".into(), self.seed.into());
        m.insert("treatment".into(), self.treatment.clone().into());
        m.insert("outcome".into(), self.outcome.clone().into());
        m.insert("columns".into(), self.names.clone().into());
        m.insert("potential_outcomes".into(), self.potential.clone().into());
        serde_json::Value::Object(m)
    }
}
