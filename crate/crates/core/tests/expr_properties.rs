//! simplify and evaluation checked on random expressions and tables.

mod support;

use std::collections::BTreeMap;

use causalkit::expr::{simplify, Assignment, JointTable, ProbExpr};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{names, random_expr, random_table};

fn bind_free(rng: &mut ChaCha8Rng, e: &ProbExpr, t: &JointTable) -> Assignment {
    e.free_variables()
        .into_iter()
        .map(|v| {
            let card = t.card(&v).unwrap();
            (v, rng.random_range(0..card))
        })
        .collect()
}

#[test]
fn simplify_preserves_value_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51);
    let (mut changed, mut evaluated, mut case) = (0, 0, 0);
    while evaluated < 1000 {
        case += 1;
        let k = rng.random_range(2..=4);
        let t = random_table(&mut rng, k);
        let e = random_expr(&mut rng, &names(k), 3, false);
        let s = simplify(&e);
        if s != e {
            changed += 1;
        }
        let b = bind_free(&mut rng, &e, &t);
        match (e.eval(&t, &b), s.eval(&t, &b)) {
            (Ok(v), Ok(w)) => {
                evaluated += 1;
                assert!(
                    (v - w).abs() <= 1e-12 * v.abs().max(1.0),
                    "case {case}: {v} vs {w}\n{}\n{}",
                    e.to_text(),
                    s.to_text()
                );
            }
            (Err(_), _) => {}
            (Ok(v), Err(err)) => panic!("case {case}: original {v}, simplified failed: {err}"),
        }
    }
    assert!(changed > 200, "{changed}");
    assert!(case < 1500, "{case} draws for 1000 evaluable pairs");
}

#[test]
fn full_normalization_simplifies_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 1..=4 {
        let vars = names(k);
        let refs: Vec<&str> = vars.iter().map(String::as_str).collect();
        let e = ProbExpr::sum(&refs, ProbExpr::p(&refs, &[]));
        assert_eq!(simplify(&e), ProbExpr::one());
        let t = random_table(&mut rng, k);
        assert!((e.eval(&t, &BTreeMap::new()).unwrap() - 1.0).abs() < 1e-12);
    }
}

fn arb_case() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 2usize..=4)
}

proptest! {
    #[test]
    fn conditional_sums_to_one((seed, k) in arb_case(), mask in 1u32..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng, k);
        let vars = names(k);
        let s: Vec<&str> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| vars[i].as_str()).collect();
        prop_assume!(!s.is_empty());
        let rest: Vec<&str> = vars.iter().map(String::as_str).filter(|v| !s.contains(v)).collect();
        let e = ProbExpr::sum(&s, ProbExpr::p(&s, &rest));
        let b: Assignment = rest.iter().map(|v| (v.to_string(), rng.random_range(0..t.card(v).unwrap()))).collect();
        prop_assert!((e.eval(&t, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_order_and_sum_order_do_not_matter((seed, k) in arb_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng, k);
        let vars = names(k);
        let parts: Vec<ProbExpr> = (0..3).map(|_| random_expr(&mut rng, &vars, 2, true)).collect();
        let mut rev = parts.clone();
        rev.reverse();
        let over: Vec<String> = vars.iter().take(2).cloned().collect();
        let mut over_rev = over.clone();
        over_rev.reverse();
        let a = ProbExpr::sum_owned(over, ProbExpr::product(parts));
        let b = ProbExpr::sum_owned(over_rev, ProbExpr::product(rev));
        let bind = bind_free(&mut rng, &a, &t);
        let (va, vb) = (a.eval(&t, &bind).unwrap(), b.eval(&t, &bind).unwrap());
        prop_assert!((va - vb).abs() <= 1e-12 * va.abs().max(1.0));
    }

    #[test]
    fn text_is_deterministic(seed in any::<u64>()) {
        let mut r1 = ChaCha8Rng::seed_from_u64(seed);
        let mut r2 = ChaCha8Rng::seed_from_u64(seed);
        let vars = names(4);
        let a = random_expr(&mut r1, &vars, 3, false);
        let b = random_expr(&mut r2, &vars, 3, false);
        prop_assert_eq!(a.to_text(), b.to_text());
        prop_assert_eq!(simplify(&a).to_text(), simplify(&b).to_text());
    }
}
