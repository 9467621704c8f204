//! Symbolic probability expressions and their exact evaluation.
//!
//! Expressions refer to variables by name; the same names index the columns
//! of a [`JointTable`]. Printing lowercases names so that `P(y|a,c1)` reads
//! as a statement about values.

mod simplify;
mod table;

pub use simplify::simplify;
pub use table::{JointTable, Variable, MAX_CARDINALITY, MAX_VARIABLES, NORMALIZATION_TOLERANCE};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("zero denominator in {0} (positivity violation)")]
    ZeroDenominator(String),
    #[error("free variable `{0}` has no value")]
    UnboundVariable(String),
    #[error("variable `{0}` is not in the table")]
    UnknownVariable(String),
    #[error("malformed atom: {0}")]
    InvalidAtom(String),
    #[error("table is not normalized (total {0})")]
    NotNormalized(f64),
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("table too large: {0}")]
    TableTooLarge(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Values of free variables, by name.
pub type Assignment = BTreeMap<String, usize>;

#[derive(Debug, Clone, PartialEq)]
pub enum ProbExpr {
    /// P(target | given)
    Atom {
        target: Vec<String>,
        given: Vec<String>,
    },
    Product(Vec<ProbExpr>),
    Quotient(Box<ProbExpr>, Box<ProbExpr>),
    /// Sum of `body` over every joint value of `over`.
    Sum {
        over: Vec<String>,
        body: Box<ProbExpr>,
    },
    Indicator {
        var: String,
        value: usize,
    },
    Constant(f64),
}

fn strings(vs: &[&str]) -> Vec<String> {
    vs.iter().map(|s| s.to_string()).collect()
}

impl ProbExpr {
    pub fn p(target: &[&str], given: &[&str]) -> Self {
        ProbExpr::Atom { target: strings(target), given: strings(given) }
    }

    pub fn atom(target: Vec<String>, given: Vec<String>) -> Self {
        ProbExpr::Atom { target, given }
    }

    pub fn product(children: Vec<ProbExpr>) -> Self {
        ProbExpr::Product(children)
    }

    pub fn quotient(num: ProbExpr, den: ProbExpr) -> Self {
        ProbExpr::Quotient(Box::new(num), Box::new(den))
    }

    pub fn sum(over: &[&str], body: ProbExpr) -> Self {
        Self::sum_owned(strings(over), body)
    }

    pub fn sum_owned(over: Vec<String>, body: ProbExpr) -> Self {
        ProbExpr::Sum { over, body: Box::new(body) }
    }

    pub fn one() -> Self {
        ProbExpr::Constant(1.0)
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        match self {
            ProbExpr::Atom { target, given } => target.iter().chain(given).cloned().collect(),
            ProbExpr::Product(cs) => cs.iter().flat_map(|c| c.free_variables()).collect(),
            ProbExpr::Quotient(n, d) => {
                let mut s = n.free_variables();
                s.extend(d.free_variables());
                s
            }
            ProbExpr::Sum { over, body } => {
                let mut s = body.free_variables();
                for v in over {
                    s.remove(v);
                }
                s
            }
            ProbExpr::Indicator { var, .. } => BTreeSet::from([var.clone()]),
            ProbExpr::Constant(_) => BTreeSet::new(),
        }
    }

    pub fn mentions(&self, var: &str) -> bool {
        self.free_variables().contains(var)
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            ProbExpr::Product(cs) => 1 + cs.iter().map(ProbExpr::size).sum::<usize>(),
            ProbExpr::Quotient(n, d) => 1 + n.size() + d.size(),
            ProbExpr::Sum { body, .. } => 1 + body.size(),
            _ => 1,
        }
    }

    /// Same expression with atom variables, summation variables and product
    /// factors in sorted order.
    pub fn canonical(&self) -> ProbExpr {
        match self {
            ProbExpr::Atom { target, given } => {
                let mut t = target.clone();
                let mut g = given.clone();
                t.sort();
                g.sort();
                ProbExpr::Atom { target: t, given: g }
            }
            ProbExpr::Product(cs) => {
                let mut keyed: Vec<(String, ProbExpr)> = cs
                    .iter()
                    .map(|c| {
                        let c = c.canonical();
                        (c.text_of_canonical(), c)
                    })
                    .collect();
                keyed.sort_by(|a, b| a.0.cmp(&b.0));
                ProbExpr::Product(keyed.into_iter().map(|(_, c)| c).collect())
            }
            ProbExpr::Quotient(n, d) => ProbExpr::quotient(n.canonical(), d.canonical()),
            ProbExpr::Sum { over, body } => {
                let mut o = over.clone();
                o.sort();
                ProbExpr::sum_owned(o, body.canonical())
            }
            other => other.clone(),
        }
    }

    /// Plain-text rendering in canonical order, e.g.
    /// `Σ_{c1} P(a|c1,c2) P(c1)`.
    pub fn to_text(&self) -> String {
        self.canonical().text_of_canonical()
    }

    fn text_of_canonical(&self) -> String {
        let mut out = String::new();
        write_text(self, &mut out);
        out
    }

    /// LaTeX rendering in canonical order.
    pub fn to_latex(&self) -> String {
        let mut out = String::new();
        write_latex(&self.canonical(), &mut out);
        out
    }

    /// Exact value of the expression under `table`, with free variables
    /// taken from `bind`.
    pub fn eval(&self, table: &JointTable, bind: &Assignment) -> Result<f64, ExprError> {
        let mut env: Vec<(usize, usize)> = Vec::new();
        for (name, &val) in bind {
            if let Some(i) = table.index_of(name) {
                env.push((i, val));
            }
        }
        // unbound checks use names, so validate before descending
        for v in self.free_variables() {
            if !bind.contains_key(&v) {
                return Err(ExprError::UnboundVariable(v));
            }
            if table.index_of(&v).is_none() {
                return Err(ExprError::UnknownVariable(v));
            }
        }
        let mut env_map: Vec<Option<usize>> = vec![None; table.variables().len()];
        for (i, v) in env {
            env_map[i] = Some(v);
        }
        eval_in(self, table, &mut env_map)
    }
}

/// Evaluates `e` under `table` and `bind` (free function form).
pub fn eval_expr(e: &ProbExpr, table: &JointTable, bind: &Assignment) -> Result<f64, ExprError> {
    e.eval(table, bind)
}

fn lookup(table: &JointTable, name: &str) -> Result<usize, ExprError> {
    table.index_of(name).ok_or_else(|| ExprError::UnknownVariable(name.to_string()))
}

fn bound_value(env: &[Option<usize>], table: &JointTable, name: &str) -> Result<(usize, usize), ExprError> {
    let i = lookup(table, name)?;
    env[i].map(|v| (i, v)).ok_or_else(|| ExprError::UnboundVariable(name.to_string()))
}

fn eval_in(e: &ProbExpr, table: &JointTable, env: &mut Vec<Option<usize>>) -> Result<f64, ExprError> {
    match e {
        ProbExpr::Atom { target, given } => {
            if target.is_empty() {
                return Err(ExprError::InvalidAtom("empty target".into()));
            }
            if let Some(v) = target.iter().find(|v| given.contains(v)) {
                return Err(ExprError::InvalidAtom(format!("`{v}` is both target and condition")));
            }
            let cond = given.iter().map(|n| bound_value(env, table, n)).collect::<Result<Vec<_>, _>>()?;
            let mut joint = cond.clone();
            for n in target {
                joint.push(bound_value(env, table, n)?);
            }
            let num = table.prob(&joint);
            if cond.is_empty() {
                return Ok(num);
            }
            let den = table.prob(&cond);
            if den <= 0.0 {
                return Err(ExprError::ZeroDenominator(
                    ProbExpr::Atom { target: target.clone(), given: given.clone() }.to_text(),
                ));
            }
            Ok(num / den)
        }
        ProbExpr::Product(cs) => {
            let mut acc = 1.0;
            for c in cs {
                acc *= eval_in(c, table, env)?;
            }
            Ok(acc)
        }
        ProbExpr::Quotient(n, d) => {
            let den = eval_in(d, table, env)?;
            if den == 0.0 {
                return Err(ExprError::ZeroDenominator(d.to_text()));
            }
            Ok(eval_in(n, table, env)? / den)
        }
        ProbExpr::Sum { over, body } => {
            let idx = over.iter().map(|n| lookup(table, n)).collect::<Result<Vec<_>, _>>()?;
            let saved: Vec<Option<usize>> = idx.iter().map(|&i| env[i]).collect();
            let cards: Vec<usize> = idx.iter().map(|&i| table.variables()[i].card).collect();
            let mut counter = vec![0usize; idx.len()];
            let mut total = 0.0;
            let result = loop {
                for (k, &i) in idx.iter().enumerate() {
                    env[i] = Some(counter[k]);
                }
                match eval_in(body, table, env) {
                    Ok(v) => total += v,
                    Err(err) => break Err(err),
                }
                let mut k = idx.len();
                let done = loop {
                    if k == 0 {
                        break true;
                    }
                    k -= 1;
                    counter[k] += 1;
                    if counter[k] < cards[k] {
                        break false;
                    }
                    counter[k] = 0;
                };
                if done {
                    break Ok(total);
                }
            };
            for (&i, s) in idx.iter().zip(saved) {
                env[i] = s;
            }
            result
        }
        ProbExpr::Indicator { var, value } => {
            let (_, v) = bound_value(env, table, var)?;
            Ok(if v == *value { 1.0 } else { 0.0 })
        }
        ProbExpr::Constant(c) => Ok(*c),
    }
}

fn is_atomic(e: &ProbExpr) -> bool {
    matches!(e, ProbExpr::Atom { .. } | ProbExpr::Indicator { .. } | ProbExpr::Constant(_))
}

fn fmt_constant(c: f64) -> String {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        format!("{}", c as i64)
    } else {
        format!("{c}")
    }
}

fn write_text(e: &ProbExpr, out: &mut String) {
    match e {
        ProbExpr::Atom { target, given } => {
            out.push_str("P(");
            out.push_str(&target.iter().map(|s| s.to_lowercase()).collect::<Vec<_>>().join(","));
            if !given.is_empty() {
                out.push('|');
                out.push_str(&given.iter().map(|s| s.to_lowercase()).collect::<Vec<_>>().join(","));
            }
            out.push(')');
        }
        ProbExpr::Product(cs) => {
            if cs.is_empty() {
                out.push('1');
            }
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                if is_atomic(c) {
                    write_text(c, out);
                } else {
                    out.push('[');
                    write_text(c, out);
                    out.push(']');
                }
            }
        }
        ProbExpr::Quotient(n, d) => {
            for (i, part) in [n, d].into_iter().enumerate() {
                if i == 1 {
                    out.push_str(" / ");
                }
                if is_atomic(part) {
                    write_text(part, out);
                } else {
                    out.push('(');
                    write_text(part, out);
                    out.push(')');
                }
            }
        }
        ProbExpr::Sum { over, body } => {
            out.push_str("Σ_{");
            out.push_str(&over.iter().map(|s| s.to_lowercase()).collect::<Vec<_>>().join(","));
            out.push_str("} ");
            if matches!(**body, ProbExpr::Quotient(..)) {
                out.push('[');
                write_text(body, out);
                out.push(']');
            } else {
                write_text(body, out);
            }
        }
        ProbExpr::Indicator { var, value } => {
            out.push_str(&format!("1[{}={}]", var.to_lowercase(), value));
        }
        ProbExpr::Constant(c) => out.push_str(&fmt_constant(*c)),
    }
}

/// `C12` -> `c_{12}`, `y` -> `y`, `u_1` -> `u_{1}`.
fn latex_var(name: &str) -> String {
    let lower = name.to_lowercase();
    let split = lower.char_indices().find(|(_, c)| c.is_ascii_digit()).map(|(i, _)| i);
    match split {
        Some(i) if i > 0 => {
            let stem = lower[..i].trim_end_matches('_');
            let idx = &lower[i..];
            if idx.len() == 1 {
                format!("{stem}_{idx}")
            } else {
                format!("{stem}_{{{idx}}}")
            }
        }
        _ => lower.replace('_', "\\_"),
    }
}

fn latex_list(vs: &[String]) -> String {
    vs.iter().map(|v| latex_var(v)).collect::<Vec<_>>().join(", ")
}

fn write_latex(e: &ProbExpr, out: &mut String) {
    match e {
        ProbExpr::Atom { target, given } => {
            out.push_str("P(");
            out.push_str(&latex_list(target));
            if !given.is_empty() {
                out.push_str(" \\mid ");
                out.push_str(&latex_list(given));
            }
            out.push(')');
        }
        ProbExpr::Product(cs) => {
            if cs.is_empty() {
                out.push('1');
            }
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                if matches!(c, ProbExpr::Sum { .. } | ProbExpr::Product(_)) {
                    out.push_str("\\left[");
                    write_latex(c, out);
                    out.push_str("\\right]");
                } else {
                    write_latex(c, out);
                }
            }
        }
        ProbExpr::Quotient(n, d) => {
            out.push_str("\\frac{");
            write_latex(n, out);
            out.push_str("}{");
            write_latex(d, out);
            out.push('}');
        }
        ProbExpr::Sum { over, body } => {
            out.push_str("\\sum_{");
            out.push_str(&latex_list(over));
            out.push_str("} ");
            write_latex(body, out);
        }
        ProbExpr::Indicator { var, value } => {
            out.push_str(&format!("\\mathbb{{1}}[{} = {}]", latex_var(var), value));
        }
        ProbExpr::Constant(c) => out.push_str(&fmt_constant(*c)),
    }
}

impl fmt::Display for ProbExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
