//! Closed-form identifying expressions for two graphs where the standard
//! adjustment and front-door criteria do not apply.

use crate::expr::ProbExpr;

/// Trapdoor estimand for P(y | do(a)) with `c2` held at an arbitrary value:
///
/// ```text
/// Σ_{c1} P(y|c1,c2,a) P(a|c1,c2) P(c1)
/// ------------------------------------
///      Σ_{c1} P(a|c1,c2) P(c1)
/// ```
pub fn trapdoor_formula(y: &str, a: &str, c1: &str, c2: &str) -> ProbExpr {
    let num = ProbExpr::sum(
        &[c1],
        ProbExpr::product(vec![ProbExpr::p(&[y], &[c1, c2, a]), ProbExpr::p(&[a], &[c1, c2]), ProbExpr::p(&[c1], &[])]),
    );
    let den = ProbExpr::sum(&[c1], ProbExpr::product(vec![ProbExpr::p(&[a], &[c1, c2]), ProbExpr::p(&[c1], &[])]));
    ProbExpr::quotient(num, den)
}

/// Variable names for [`complex_frontdoor_formula`].
#[derive(Debug, Clone, Copy)]
pub struct FrontdoorVars<'a> {
    pub y: &'a str,
    pub a: &'a str,
    pub z: &'a str,
    pub c1: &'a str,
    pub c2: &'a str,
    pub c3: &'a str,
}

impl Default for FrontdoorVars<'static> {
    fn default() -> Self {
        FrontdoorVars { y: "Y", a: "A", z: "Z", c1: "C1", c2: "C2", c3: "C3" }
    }
}

/// The five helper terms g1..g5 of the nested front-door expression, each a
/// sum over `c1`.
pub fn complex_frontdoor_parts(v: FrontdoorVars<'_>) -> [ProbExpr; 5] {
    let FrontdoorVars { y, a, z, c1, c2, c3 } = v;
    let over_c1 = |fs: Vec<ProbExpr>| ProbExpr::sum(&[c1], ProbExpr::product(fs));
    let p_c1 = || ProbExpr::p(&[c1], &[]);
    let p_c3 = || ProbExpr::p(&[c3], &[c1, c2]);
    let p_a2 = || ProbExpr::p(&[a], &[c1, c2]);
    let p_a3 = || ProbExpr::p(&[a], &[c1, c2, c3]);
    let p_z2 = || ProbExpr::p(&[z], &[c1, c2, a]);
    let p_z3 = || ProbExpr::p(&[z], &[c1, c2, c3, a]);
    let p_y = || ProbExpr::p(&[y], &[c1, c2, c3, a, z]);

    let g1 = over_c1(vec![p_a2(), p_c1()]);
    let g2 = over_c1(vec![p_z2(), p_a2(), p_c1()]);
    let g3 = over_c1(vec![p_z3(), p_a3(), p_c3(), p_c1()]);
    let g4 = over_c1(vec![p_a3(), p_c3(), p_c1()]);
    let g5 = over_c1(vec![p_y(), p_z3(), p_a3(), p_c3(), p_c1()]);
    [g1, g2, g3, g4, g5]
}

/// Nested front-door estimand for P(y | do(a)):
///
/// ```text
/// (1/g1) Σ_{z,c3} g2 Σ_a g5 g4 / g3
/// ```
///
/// The inner sum rebinds `a`; outside it `a` is the intervention value.
/// `c2` is free and may be fixed to any value with positive probability.
pub fn complex_frontdoor_formula(v: FrontdoorVars<'_>) -> ProbExpr {
    let [g1, g2, g3, g4, g5] = complex_frontdoor_parts(v);
    let inner = ProbExpr::sum(&[v.a], ProbExpr::quotient(ProbExpr::product(vec![g5, g4]), g3));
    let outer = ProbExpr::sum(&[v.z, v.c3], ProbExpr::product(vec![g2, inner]));
    ProbExpr::product(vec![ProbExpr::quotient(ProbExpr::one(), g1), outer])
}
