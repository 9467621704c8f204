//! Dense joint probability tables over finite-domain variables.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ExprError;

pub const MAX_VARIABLES: usize = 12;
pub const MAX_CARDINALITY: usize = 6;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub card: usize,
}

impl Variable {
    pub fn new(name: &str, card: usize) -> Self {
        Variable { name: name.to_string(), card }
    }

    pub fn binary(name: &str) -> Self {
        Self::new(name, 2)
    }
}

/// Row-major table: the last variable varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    vars: Vec<Variable>,
    probs: Vec<f64>,
    strides: Vec<usize>,
}

fn strides_for(vars: &[Variable]) -> Vec<usize> {
    let mut strides = vec![1; vars.len()];
    for i in (0..vars.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * vars[i + 1].card;
    }
    strides
}

impl JointTable {
    pub fn new(vars: Vec<Variable>, probs: Vec<f64>) -> Result<Self, ExprError> {
        if vars.len() > MAX_VARIABLES {
            return Err(ExprError::TableTooLarge(format!("{} variables (max {MAX_VARIABLES})", vars.len())));
        }
        for (i, v) in vars.iter().enumerate() {
            if v.card == 0 || v.card > MAX_CARDINALITY {
                return Err(ExprError::TableTooLarge(format!(
                    "variable {} has {} values (max {MAX_CARDINALITY})",
                    v.name, v.card
                )));
            }
            if vars[..i].iter().any(|w| w.name == v.name) {
                return Err(ExprError::InvalidTable(format!("duplicate variable {}", v.name)));
            }
        }
        let cells: usize = vars.iter().map(|v| v.card).product();
        if probs.len() != cells {
            return Err(ExprError::InvalidTable(format!("expected {cells} cells, got {}", probs.len())));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(ExprError::InvalidTable(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(ExprError::NotNormalized(total));
        }
        let strides = strides_for(&vars);
        Ok(JointTable { vars, probs, strides })
    }

    /// Uniform distribution over the given variables.
    pub fn uniform(vars: Vec<Variable>) -> Result<Self, ExprError> {
        let cells: usize = vars.iter().map(|v| v.card).product();
        Self::new(vars, vec![1.0 / cells as f64; cells])
    }

    /// Normalizes non-negative weights into a table.
    pub fn from_weights(vars: Vec<Variable>, weights: Vec<f64>) -> Result<Self, ExprError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(ExprError::InvalidTable("weights sum to zero".into()));
        }
        Self::new(vars, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn card(&self, name: &str) -> Option<usize> {
        self.index_of(name).map(|i| self.vars[i].card)
    }

    /// Values of every variable for cell `cell`.
    pub fn config(&self, mut cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.vars.len()];
        for (i, s) in self.strides.iter().enumerate() {
            out[i] = cell / s;
            cell %= s;
        }
        out
    }

    pub fn cell(&self, config: &[usize]) -> usize {
        config.iter().zip(&self.strides).map(|(v, s)| v * s).sum()
    }

    /// Probability of a partial assignment given as (variable index, value).
    pub fn prob(&self, fixed: &[(usize, usize)]) -> f64 {
        // iterate only over the free axes
        let mut base = 0;
        let mut free = Vec::new();
        for i in 0..self.vars.len() {
            match fixed.iter().find(|(j, _)| *j == i) {
                Some(&(_, val)) => {
                    if val >= self.vars[i].card {
                        return 0.0;
                    }
                    base += val * self.strides[i];
                }
                None => free.push(i),
            }
        }
        if fixed.iter().any(|&(i, v)| fixed.iter().any(|&(j, w)| i == j && v != w)) {
            return 0.0;
        }
        let mut total = 0.0;
        let mut counter = vec![0usize; free.len()];
        loop {
            let offset: usize = counter.iter().zip(&free).map(|(c, &i)| c * self.strides[i]).sum();
            total += self.probs[base + offset];
            let mut k = free.len();
            loop {
                if k == 0 {
                    return total;
                }
                k -= 1;
                counter[k] += 1;
                if counter[k] < self.vars[free[k]].card {
                    break;
                }
                counter[k] = 0;
            }
        }
    }

    pub fn prob_named(&self, fixed: &[(&str, usize)]) -> Result<f64, ExprError> {
        let idx = fixed
            .iter()
            .map(|(n, v)| self.index_of(n).map(|i| (i, *v)).ok_or_else(|| ExprError::UnknownVariable(n.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.prob(&idx))
    }

    /// Marginal table over `names`, in the order given.
    pub fn marginal(&self, names: &[&str]) -> Result<JointTable, ExprError> {
        let idx = names
            .iter()
            .map(|n| self.index_of(n).ok_or_else(|| ExprError::UnknownVariable(n.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let vars: Vec<Variable> = idx.iter().map(|&i| self.vars[i].clone()).collect();
        let strides = strides_for(&vars);
        let cells: usize = vars.iter().map(|v| v.card).product();
        let mut probs = vec![0.0; cells];
        for (cell, p) in self.probs.iter().enumerate() {
            let cfg = self.config(cell);
            let target: usize = idx.iter().zip(&strides).map(|(&i, s)| cfg[i] * s).sum();
            probs[target] += p;
        }
        Ok(JointTable { vars, probs, strides })
    }

    /// E[`outcome`] restricted to cells matching `fixed`, divided by their
    /// mass. Values are the integer codes of the outcome.
    pub fn conditional_mean(&self, outcome: &str, fixed: &[(&str, usize)]) -> Result<f64, ExprError> {
        let oi = self.index_of(outcome).ok_or_else(|| ExprError::UnknownVariable(outcome.to_string()))?;
        let mass = self.prob_named(fixed)?;
        if mass <= 0.0 {
            return Err(ExprError::ZeroDenominator(format!("P({fixed:?}) = 0")));
        }
        let mut num = 0.0;
        for y in 1..self.vars[oi].card {
            let mut f = fixed.to_vec();
            f.push((outcome, y));
            num += y as f64 * self.prob_named(&f)?;
        }
        Ok(num / mass)
    }

    /// Writes one row per configuration: variable columns then `prob`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExprError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.vars.iter().map(|v| v.name.as_str()).collect();
        header.push("prob");
        w.write_record(&header).map_err(|e| ExprError::Csv(e.to_string()))?;
        for (cell, p) in self.probs.iter().enumerate() {
            let mut row: Vec<String> = self.config(cell).iter().map(|v| v.to_string()).collect();
            row.push(p.to_string());
            w.write_record(&row).map_err(|e| ExprError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| ExprError::Csv(e.to_string()))?;
        Ok(())
    }

    /// Reads the CSV layout produced by [`JointTable::write_csv`]. Domain sizes
    /// are inferred from the largest value seen per column; configurations
    /// absent from the file get probability zero.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, ExprError> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> =
            r.headers().map_err(|e| ExprError::Csv(e.to_string()))?.iter().map(str::to_string).collect();
        if header.last().map(String::as_str) != Some("prob") {
            return Err(ExprError::Csv("last column must be `prob`".into()));
        }
        let nvars = header.len() - 1;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| ExprError::Csv(e.to_string()))?;
            let mut cfg = Vec::with_capacity(nvars);
            for field in rec.iter().take(nvars) {
                cfg.push(
                    field.trim().parse::<usize>().map_err(|e| ExprError::Csv(format!("bad value `{field}`: {e}")))?,
                );
            }
            let p: f64 = rec
                .get(nvars)
                .ok_or_else(|| ExprError::Csv("missing prob".into()))?
                .trim()
                .parse()
                .map_err(|e| ExprError::Csv(format!("bad probability: {e}")))?;
            rows.push((cfg, p));
        }
        let vars: Vec<Variable> = (0..nvars)
            .map(|i| {
                let card = rows.iter().map(|(c, _)| c[i] + 1).max().unwrap_or(1);
                Variable::new(&header[i], card)
            })
            .collect();
        let cells: usize = vars.iter().map(|v| v.card).product();
        if vars.len() > MAX_VARIABLES || vars.iter().any(|v| v.card > MAX_CARDINALITY) {
            return Err(ExprError::TableTooLarge(format!("{} variables", vars.len())));
        }
        let strides = strides_for(&vars);
        let mut probs = vec![0.0; cells];
        for (cfg, p) in rows {
            let cell: usize = cfg.iter().zip(&strides).map(|(v, s)| v * s).sum();
            probs[cell] += p;
        }
        Self::new(vars, probs)
    }
}
