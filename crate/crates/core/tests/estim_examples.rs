//! Estimators on the six simulated examples, checked against enumeration
//! and analytic ground truth.

use causalkit::estim::{
    diff_in_means, faithfulness_check, faithfulness_check_scm, ipw, positivity_diagnostic, regression_adjustment,
    stratified_adjustment, EstimError, PositivityOptions, StratInput,
};
use causalkit::expr::{JointTable, Variable};
use causalkit::scm::{
    build_example, example_graph, random_binary_scm, Covariance, Dataset, Example, ExampleOptions, Mechanism, Scm,
};
use nalgebra::DMatrix;

const N: usize = 100_000;

fn example(k: u8) -> Example {
    build_example(k, &ExampleOptions::default()).unwrap()
}

fn sample(k: u8, n: usize, seed: u64) -> Dataset {
    example(k).scm.sample(n, seed).unwrap()
}

#[test]
fn regression_recovers_the_effect_with_valid_adjustment_sets() {
    let sets: [(u8, &[&str]); 3] = [(1, &["C1", "C2", "C3", "C4"]), (2, &["C1", "C2"]), (3, &["C2", "C3"])];
    for (k, set) in sets {
        let d = sample(k, N, 11);
        let r = regression_adjustment(&d, set).unwrap();
        assert!((r.estimate + 2.0).abs() < 0.05, "example {k}: {}", r.estimate);
        assert!(r.se > 0.0 && r.se < 0.02);
    }
}

#[test]
fn collinear_adjustment_set_is_rejected() {
    let d = sample(3, N, 11);
    let err = regression_adjustment(&d, &["C1", "C2", "C3"]).unwrap_err();
    assert!(matches!(err, EstimError::RankDeficient { rank: 4, columns: 5, .. }), "{err:?}");
}

#[test]
fn unadjusted_contrast_is_confounded_in_example1() {
    let d = sample(1, N, 12);
    let r = diff_in_means(&d).unwrap();
    assert!((r.estimate + 2.0).abs() > 5.0 * r.se, "{} ± {}", r.estimate, r.se);
}

#[test]
fn treatment_is_ignorable_given_the_adjustment_set() {
    // neither potential outcome carries treatment signal once the
    // confounders are in the regression
    for (k, set) in [(1u8, vec!["C1", "C2", "C3", "C4"]), (2, vec!["C1", "C2"]), (3, vec!["C2", "C3"])] {
        let d = sample(k, N, 13);
        for po in ["Y0", "Y1"] {
            let mut names = vec!["A".to_string(), po.to_string()];
            let mut cols = vec![d.column("A").unwrap().to_vec(), d.column(po).unwrap().to_vec()];
            for c in &set {
                names.push(c.to_string());
                cols.push(d.column(c).unwrap().to_vec());
            }
            let data = Dataset::new(names, cols).unwrap().with_query("A", po).unwrap();
            let r = regression_adjustment(&data, &set).unwrap();
            assert!(r.estimate.abs() < 3.0 * r.se, "example {k} {po}: {} ± {}", r.estimate, r.se);
        }
    }
}

#[test]
fn adjustment_error_shrinks_with_sample_size() {
    let sets: [(u8, &[&str]); 3] = [(1, &["C1", "C2", "C3", "C4"]), (2, &["C1", "C2"]), (3, &["C2", "C3"])];
    for (k, set) in sets {
        let scm = example(k).scm;
        let mut medians = Vec::new();
        for n in [1_000, 10_000, 100_000] {
            let mut errs: Vec<f64> = (0..20)
                .map(|seed| {
                    (regression_adjustment(&scm.sample(n, 500 + seed).unwrap(), set).unwrap().estimate + 2.0).abs()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            medians.push((errs[9] + errs[10]) / 2.0);
        }
        assert!(medians[0] >= medians[1] && medians[1] >= medians[2], "example {k}: {medians:?}");
    }
}

#[test]
fn ipw_recovers_the_effect_in_example2() {
    let d = sample(2, N, 14);
    let r = ipw(&d, &["C1", "C2"]).unwrap();
    assert!((r.estimate + 2.0).abs() < 0.1, "{} ± {}", r.estimate, r.se);
}

#[test]
fn ipw_and_regression_agree() {
    for (k, set) in [(1u8, vec!["C1", "C2"]), (2, vec!["C1", "C2"])] {
        let d = sample(k, N, 15);
        let w = ipw(&d, &set).unwrap();
        let full: Vec<&str> = if k == 1 { vec!["C1", "C2", "C3", "C4"] } else { set.clone() };
        let r = regression_adjustment(&d, &full).unwrap();
        let joint = w.se.hypot(r.se);
        assert!(
            (w.estimate - r.estimate).abs() < 3.0 * joint,
            "example {k}: {} vs {} ({joint})",
            w.estimate,
            r.estimate
        );
    }
}

/// Treatment assigned by alternating blocks so both arms are half the data.
fn randomized(n: usize) -> Dataset {
    let a: Vec<f64> = (0..n).map(|i| ((i / 3) % 2) as f64).collect();
    let c: Vec<f64> = (0..n).map(|i| ((i * 37) % 101) as f64 / 101.0).collect();
    let y: Vec<f64> = (0..n).map(|i| 1.0 + a[i] + c[i] * c[i] + ((i * 13) % 7) as f64).collect();
    Dataset::new(vec!["A".into(), "Y".into(), "C".into()], vec![a, y, c]).unwrap().with_query("A", "Y").unwrap()
}

#[test]
fn intercept_only_ipw_is_the_difference_in_means() {
    let d = randomized(6000);
    let w = ipw(&d, &[]).unwrap();
    let m = diff_in_means(&d).unwrap();
    assert!(((w.estimate - m.estimate) / m.estimate).abs() < 1e-10, "{} vs {}", w.estimate, m.estimate);
    assert!(w.warnings.is_empty());
}

fn all_treated_stratum() -> Dataset {
    // X = 1 is always treated, X = 0 is mixed
    let n = 400;
    let x: Vec<f64> = (0..n).map(|i| f64::from(i % 4 == 0)).collect();
    let a: Vec<f64> = (0..n).map(|i| if x[i] == 1.0 { 1.0 } else { ((i / 4) % 2) as f64 }).collect();
    let y: Vec<f64> = (0..n).map(|i| a[i] + x[i]).collect();
    Dataset::new(vec!["A".into(), "Y".into(), "X".into()], vec![a, y, x]).unwrap().with_query("A", "Y").unwrap()
}

#[test]
fn all_treated_stratum_warns() {
    let d = all_treated_stratum();
    let w = ipw(&d, &["X"]).unwrap();
    assert!(w.warnings.iter().any(|s| s.starts_with("ExtremePropensity")), "{:?}", w.warnings);
    let p = positivity_diagnostic(&d, &["X"], &PositivityOptions::default()).unwrap();
    assert!(p.flagged);
    assert_eq!(p.strata_kind, "covariate");
    assert_eq!(p.single_arm_strata, 1);
    assert!(p.max_propensity > 0.99);
}

#[test]
fn positivity_in_example1_small_samples() {
    let scm = example(1).scm;
    let opts = PositivityOptions::default();
    let flagged: Vec<usize> = (0..50)
        .map(|seed| {
            let d = scm.sample(1000, 700 + seed).unwrap();
            positivity_diagnostic(&d, &["C1", "C2"], &opts).unwrap().n_extreme
        })
        .collect();
    let total: usize = flagged.iter().sum();
    assert!(total >= 1);
    assert!(flagged.iter().filter(|&&k| k > 0).count() > 25, "{flagged:?}");
}

#[test]
fn randomized_treatment_has_no_positivity_flags() {
    let d = randomized(6000);
    let p = positivity_diagnostic(&d, &["C"], &PositivityOptions::default()).unwrap();
    assert!(!p.flagged, "{p:?}");
    assert_eq!(p.strata_kind, "propensity-decile");
    assert!((p.min_propensity - 0.5).abs() < 0.05);
}

fn example4_table() -> JointTable {
    example(4).scm.exact_joint(&["C", "A", "Y"]).unwrap()
}

#[test]
fn example4_m_bias() {
    let t = example4_table();
    let truth = example(4).meta.true_ate.mean;
    let input = StratInput::Table { table: &t, treatment: "A", outcome: "Y" };
    let adjusted = stratified_adjustment(input, &["C"]).unwrap().estimate;
    let crude = stratified_adjustment(input, &[]).unwrap().estimate;
    assert!((truth.abs() - 0.16).abs() < 1e-12);
    assert!((adjusted.abs() - 0.0637).abs() < 1e-4, "{adjusted}");
    assert!((crude - truth).abs() < 1e-12);
    assert!((adjusted - truth).abs() > (crude - truth).abs());
    assert!(((adjusted - truth).abs() - 0.096).abs() < 1e-3);
}

#[test]
fn example4_sampled_contrast_is_unconfounded() {
    let d = sample(4, N, 16);
    let r = diff_in_means(&d).unwrap();
    let truth = example(4).meta.true_ate.mean;
    assert!((r.estimate - truth).abs() < 3.0 * r.se, "{} ± {} vs {truth}", r.estimate, r.se);
    let s = stratified_adjustment(StratInput::Data(&d), &["C"]).unwrap();
    let exact = {
        let t = example4_table();
        stratified_adjustment(StratInput::Table { table: &t, treatment: "A", outcome: "Y" }, &["C"]).unwrap()
    };
    assert!((s.estimate - exact.estimate).abs() < 4.0 * s.se);
}

#[test]
fn independent_strata_change_nothing() {
    // product of a uniform C with an arbitrary (A, Y) table
    let ay = [0.3, 0.2, 0.1, 0.4];
    let probs: Vec<f64> = [0.25, 0.75].iter().flat_map(|c| ay.iter().map(move |p| c * p)).collect();
    let vars = vec![Variable::binary("C"), Variable::binary("A"), Variable::binary("Y")];
    let t = JointTable::new(vars, probs).unwrap();
    let input = StratInput::Table { table: &t, treatment: "A", outcome: "Y" };
    let a = stratified_adjustment(input, &["C"]).unwrap().estimate;
    let b = stratified_adjustment(input, &[]).unwrap().estimate;
    assert!((a - b).abs() < 1e-15, "{a} vs {b}");
}

#[test]
fn backdoor_stratification_is_exact_on_fig3a() {
    let g = example_graph("fig3a").unwrap();
    for seed in 0..20 {
        let mut s = random_binary_scm(&g, seed).unwrap();
        s.set_query("A", "Y").unwrap();
        let t = s.exact_joint(&["C", "A", "Y"]).unwrap();
        let v = stratified_adjustment(StratInput::Table { table: &t, treatment: "A", outcome: "Y" }, &["C"])
            .unwrap()
            .estimate;
        let truth = s.true_ate().unwrap().mean;
        assert!((v - truth).abs() < 1e-10, "seed {seed}: {v} vs {truth}");
    }
}

#[test]
fn example3_faithfulness_violation() {
    let ex = example(3);
    let cov = ex.scm.implied_covariance(&["C1", "C2", "C3", "C4"]).unwrap();
    let v = faithfulness_check(&ex.graph, &cov).unwrap();
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!((v[0].x.as_str(), v[0].y.as_str()), ("C1", "C4"));
    assert!(v[0].given.is_empty());
}

#[test]
fn generic_linear_fig3a_is_faithful() {
    let noise = || Mechanism::ExogGaussian { mean: 0.0, variance: 1.0 };
    let lin = |coefs: &[(&str, f64)], e: &str| Mechanism::LinearEq {
        intercept: 0.3,
        coefs: coefs.iter().map(|&(n, c)| (n.to_string(), c)).collect(),
        noise: Some(e.to_string()),
    };
    let s = Scm::builder()
        .latent("EA", noise())
        .latent("EY", noise())
        .node("C", Mechanism::ExogGaussian { mean: 1.0, variance: 2.0 })
        .node("A", lin(&[("C", 0.7)], "EA"))
        .node("Y", lin(&[("A", 1.3), ("C", -0.4)], "EY"))
        .build()
        .unwrap();
    assert!(faithfulness_check_scm(&s, &["C", "A", "Y"]).unwrap().is_empty());
    let err = faithfulness_check_scm(&example(1).scm, &["C1", "A"]).unwrap_err();
    assert!(matches!(err, EstimError::NonGaussian(_)), "{err:?}");
}

#[test]
fn diagonal_covariance_is_faithful_to_the_empty_graph() {
    let g = causalkit::graph::parse_graph("P; Q; R; S").unwrap();
    let cov = Covariance {
        names: ["P", "Q", "R", "S"].map(String::from).to_vec(),
        matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0, 0.2, 7.0])),
    };
    assert!(faithfulness_check(&g, &cov).unwrap().is_empty());
}

#[test]
fn estimators_are_deterministic() {
    let d = sample(2, 5000, 3);
    assert_eq!(ipw(&d, &["C1", "C2"]).unwrap(), ipw(&d, &["C1", "C2"]).unwrap());
    assert_eq!(regression_adjustment(&d, &["C1"]).unwrap(), regression_adjustment(&d, &["C1"]).unwrap());
    let json = serde_json::to_value(diff_in_means(&d).unwrap()).unwrap();
    assert_eq!(json["method"], "diff-in-means");
    assert!(json["se"].as_f64().unwrap() >= 0.0);
}
