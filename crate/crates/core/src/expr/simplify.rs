//! Terminating rewrite system for [`ProbExpr`].
//!
//! Rules, applied bottom-up until nothing changes:
//! - nested products are flattened, unit constants dropped, singleton
//!   products unwrapped;
//! - `Σ_v P(v,T|W) f` becomes `Σ P(T|W) f` when `f` does not mention `v`
//!   (the factor disappears entirely when `T` is empty);
//! - factors not mentioning any summation variable are moved out of the sum;
//!   nested sums over distinct variables are merged; empty sums unwrapped;
//! - structurally identical factors cancel across a quotient.
//!
//! A summation variable that does not occur in the body is kept: dropping it
//! would change the value by the size of its domain.

use super::ProbExpr;

const MAX_PASSES: usize = 64;

pub fn simplify(e: &ProbExpr) -> ProbExpr {
    let mut cur = e.clone();
    for _ in 0..MAX_PASSES {
        let next = pass(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn pass(e: &ProbExpr) -> ProbExpr {
    match e {
        ProbExpr::Product(cs) => product(cs.iter().map(pass).collect()),
        ProbExpr::Quotient(n, d) => quotient(pass(n), pass(d)),
        ProbExpr::Sum { over, body } => sum(over.clone(), pass(body)),
        other => other.clone(),
    }
}

fn factors(e: ProbExpr) -> Vec<ProbExpr> {
    match e {
        ProbExpr::Product(cs) => cs,
        ProbExpr::Constant(c) if c == 1.0 => Vec::new(),
        other => vec![other],
    }
}

fn product(children: Vec<ProbExpr>) -> ProbExpr {
    let mut flat = Vec::new();
    for c in children {
        match c {
            ProbExpr::Product(inner) => flat.extend(inner),
            ProbExpr::Constant(v) if v == 1.0 => {}
            other => flat.push(other),
        }
    }
    match flat.len() {
        0 => ProbExpr::one(),
        1 => flat.pop().expect("one element"),
        _ => ProbExpr::Product(flat),
    }
}

fn quotient(num: ProbExpr, den: ProbExpr) -> ProbExpr {
    let mut top = factors(num);
    let mut bottom = factors(den);
    let mut i = 0;
    while i < top.len() {
        let key = top[i].canonical();
        if let Some(j) = bottom.iter().position(|b| b.canonical() == key) {
            top.remove(i);
            bottom.remove(j);
        } else {
            i += 1;
        }
    }
    let top = product(top);
    if bottom.is_empty() {
        return top;
    }
    ProbExpr::quotient(top, product(bottom))
}

fn sum(mut over: Vec<String>, body: ProbExpr) -> ProbExpr {
    let mut seen = Vec::new();
    over.retain(|v| {
        if seen.contains(v) {
            false
        } else {
            seen.push(v.clone());
            true
        }
    });
    if over.is_empty() {
        return body;
    }

    // merge Σ_u Σ_v f into Σ_{u,v} f when the inner variables are new
    let body = match body {
        ProbExpr::Sum { over: inner, body: inner_body } if inner.iter().all(|v| !over.contains(v)) => {
            over.extend(inner);
            *inner_body
        }
        other => other,
    };

    let mut fs = factors(body);

    // marginalize out summation variables that only appear as a target
    let mut changed = true;
    while changed {
        changed = false;
        for vi in 0..over.len() {
            let v = over[vi].clone();
            let owner = fs.iter().position(|f| match f {
                ProbExpr::Atom { target, given } => target.contains(&v) && !given.contains(&v),
                _ => false,
            });
            let Some(k) = owner else { continue };
            let elsewhere = fs.iter().enumerate().any(|(j, f)| j != k && f.mentions(&v));
            if elsewhere {
                continue;
            }
            if let ProbExpr::Atom { target, given } = &fs[k] {
                if target.len() == 1 {
                    fs.remove(k);
                } else {
                    let target = target.iter().filter(|t| **t != v).cloned().collect();
                    fs[k] = ProbExpr::Atom { target, given: given.clone() };
                }
            }
            over.remove(vi);
            changed = true;
            break;
        }
    }

    // hoist factors that do not depend on the summation variables
    let (outside, inside): (Vec<ProbExpr>, Vec<ProbExpr>) =
        fs.into_iter().partition(|f| over.iter().all(|v| !f.mentions(v)));

    let inner = if over.is_empty() { product(inside) } else { ProbExpr::sum_owned(over, product(inside)) };
    if outside.is_empty() {
        inner
    } else {
        let mut all = outside;
        all.push(inner);
        product(all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Assignment, JointTable, Variable};

    #[test]
    fn normalization_collapses_to_one() {
        let e = ProbExpr::sum(&["V"], ProbExpr::p(&["V"], &[]));
        assert_eq!(simplify(&e), ProbExpr::one());
    }

    #[test]
    fn unrelated_factor_is_summed_out() {
        let e = ProbExpr::sum(&["C1"], ProbExpr::product(vec![ProbExpr::p(&["Y"], &["A"]), ProbExpr::p(&["C1"], &[])]));
        assert_eq!(simplify(&e), ProbExpr::p(&["Y"], &["A"]));
    }

    #[test]
    fn sum_over_absent_variable_is_kept() {
        let e = ProbExpr::sum(&["C"], ProbExpr::p(&["Y"], &[]));
        let s = simplify(&e);
        let t = JointTable::uniform(vec![Variable::new("C", 3), Variable::binary("Y")]).unwrap();
        let bind: Assignment = [("Y".to_string(), 1)].into_iter().collect();
        assert_eq!(s.eval(&t, &bind).unwrap(), e.eval(&t, &bind).unwrap());
        assert!((s.eval(&t, &bind).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn quotient_cancellation() {
        let e = ProbExpr::quotient(
            ProbExpr::product(vec![ProbExpr::p(&["A"], &["C"]), ProbExpr::p(&["C"], &[])]),
            ProbExpr::p(&["C"], &[]),
        );
        assert_eq!(simplify(&e), ProbExpr::p(&["A"], &["C"]));
    }

    #[test]
    fn chain_marginalization() {
        // Σ_{y,c} P(c) P(a|c) P(y|a,c) = Σ_c P(c) P(a|c)
        let e = ProbExpr::sum(
            &["Y", "C"],
            ProbExpr::product(vec![
                ProbExpr::p(&["C"], &[]),
                ProbExpr::p(&["A"], &["C"]),
                ProbExpr::p(&["Y"], &["A", "C"]),
            ]),
        );
        assert_eq!(simplify(&e).to_text(), "Σ_{c} P(a|c) P(c)");
    }

    #[test]
    fn flattening() {
        let e = ProbExpr::product(vec![
            ProbExpr::product(vec![ProbExpr::p(&["A"], &[]), ProbExpr::one()]),
            ProbExpr::product(vec![ProbExpr::p(&["B"], &[])]),
        ]);
        assert_eq!(simplify(&e), ProbExpr::Product(vec![ProbExpr::p(&["A"], &[]), ProbExpr::p(&["B"], &[])]));
    }
}
