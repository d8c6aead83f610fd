//! Indirect utility, occupation choice and the freedom evaluation function
//! `V(w_a, w_b) = E_θ[max{θ·w_a, (1−θ)·w_b}]`.
//!
//! `V` sees the opportunity set only through its two extreme points, the
//! wage pair, since only those are ever chosen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{GaussLegendre, Root};
use crate::preferences::{FrozenDensity, TasteDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    A,
    B,
}

impl Sector {
    pub fn other(self) -> Sector {
        match self {
            Sector::A => Sector::B,
            Sector::B => Sector::A,
        }
    }
}

impl std::fmt::Display for Sector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sector::A => "a",
            Sector::B => "b",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WagePair {
    pub w_a: f64,
    pub w_b: f64,
}

impl WagePair {
    pub fn new(w_a: f64, w_b: f64) -> Result<Self> {
        if !(w_a.is_finite() && w_a >= 0.0 && w_b.is_finite() && w_b >= 0.0) {
            return Err(Error::invalid(format!("wages ({w_a}, {w_b}) must be finite and >= 0")));
        }
        Ok(WagePair { w_a, w_b })
    }

    pub fn swapped(self) -> WagePair {
        WagePair { w_a: self.w_b, w_b: self.w_a }
    }

    pub fn get(self, s: Sector) -> f64 {
        match s {
            Sector::A => self.w_a,
            Sector::B => self.w_b,
        }
    }

    /// Pair with `value` in sector `s` and `other` in the remaining one.
    pub fn with(s: Sector, value: f64, other: f64) -> WagePair {
        match s {
            Sector::A => WagePair { w_a: value, w_b: other },
            Sector::B => WagePair { w_a: other, w_b: value },
        }
    }

    /// Taste level at which both occupations pay the same, `w_b/(w_a+w_b)`.
    pub fn kink(self) -> Option<f64> {
        let s = self.w_a + self.w_b;
        (s > 0.0).then(|| self.w_b / s)
    }

    /// Points `(l_a, l_b)` on the opportunity frontier `l_a/w_a + l_b/w_b = 1`,
    /// from `(0, w_b)` to `(w_a, 0)`.
    pub fn frontier(self, points: usize) -> Vec<(f64, f64)> {
        let n = points.max(2);
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                (self.w_a * s, self.w_b * (1.0 - s))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_per_piece: usize,
    pub split_at_kink: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { nodes_per_piece: 64, split_at_kink: true }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_piece < 2 {
            return Err(Error::invalid(format!(
                "nodes_per_piece = {} must be >= 2",
                self.nodes_per_piece
            )));
        }
        Ok(())
    }
}

/// Grading exponent for the endpoint substitution used with Beta densities.
const ENDPOINT_GRADE: u32 = 4;

/// Default wage-scale tolerance for level-curve inversion.
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;
const MAX_BRACKET: f64 = 1152921504606846976.0; // 2^60

pub fn indirect_utility(w: WagePair, theta: f64) -> f64 {
    (theta * w.w_a).max((1.0 - theta) * w.w_b)
}

/// Occupation chosen once θ is known; ties go to `a`.
pub fn choose_occupation(w: WagePair, theta: f64) -> Sector {
    if theta * w.w_a >= (1.0 - theta) * w.w_b {
        Sector::A
    } else {
        Sector::B
    }
}

/// Expected indirect utility under `d`, by Gauss–Legendre on both sides of
/// the kink.
pub fn freedom_value(w: WagePair, d: &TasteDensity, q: &QuadratureSpec) -> f64 {
    if w.w_a == 0.0 && w.w_b == 0.0 {
        return 0.0;
    }
    let rule = GaussLegendre::cached(q.nodes_per_piece.max(2));
    freedom_value_with(&rule, w, d.at(w), q.split_at_kink)
}

pub(crate) fn freedom_value_with(
    rule: &GaussLegendre,
    w: WagePair,
    density: FrozenDensity,
    split: bool,
) -> f64 {
    let Some(kink) = w.kink() else { return 0.0 };
    let integrate = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| match density {
        FrozenDensity::Flat => rule.integrate(lo, hi, f),
        FrozenDensity::Beta { .. } => rule.integrate_graded(lo, hi, ENDPOINT_GRADE, f),
    };
    if !split {
        return integrate(0.0, 1.0, &|t| indirect_utility(w, t) * density.pdf(t));
    }
    let mut total = 0.0;
    if kink > 0.0 {
        total += w.w_b * integrate(0.0, kink, &|t| (1.0 - t) * density.pdf(t));
    }
    if kink < 1.0 {
        total += w.w_a * integrate(kink, 1.0, &|t| t * density.pdf(t));
    }
    total
}

/// Exact `V` for the uniform density.
pub fn freedom_value_closed_form_uniform(w: WagePair) -> f64 {
    let Some(k) = w.kink() else { return 0.0 };
    w.w_b * (k - 0.5 * k * k) + 0.5 * w.w_a * (1.0 - k * k)
}

/// Lower envelope `max{E[θ]·w_a, E[1−θ]·w_b}` that `V` must dominate.
pub fn lower_envelope(w: WagePair, d: &TasteDensity) -> f64 {
    let m = d.at(w).mean();
    (m * w.w_a).max((1.0 - m) * w.w_b)
}

/// Solves `V(x, fixed_wage) = k` for `x ≥ 0` when `direction` is `a`
/// (`V(fixed_wage, x) = k` for `b`).
pub fn invert_level_curve(
    k: f64,
    fixed_wage: f64,
    direction: Sector,
    d: &TasteDensity,
    q: &QuadratureSpec,
    tol: f64,
) -> Result<f64> {
    LevelCurve::new(fixed_wage, direction, d, q)?
        .solve(k, tol, None)
        .map(|r| r.x)
}

/// Points on the level curve `V⁻¹(k)`: the `b` wage runs over an even grid
/// from 0 to the value where the curve meets the `b` axis, and the `a` wage
/// is solved for. Grid points where `k` is not reachable along `a` are
/// skipped.
pub fn level_curve_points(
    k: f64,
    d: &TasteDensity,
    q: &QuadratureSpec,
    points: usize,
    tol: f64,
) -> Result<Vec<WagePair>> {
    let top = invert_level_curve(k, 0.0, Sector::B, d, q, tol)?;
    let n = points.max(2);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = if i == n - 1 { top } else { top * i as f64 / (n - 1) as f64 };
        match invert_level_curve(k, f, Sector::A, d, q, tol) {
            Ok(x) => out.push(WagePair { w_a: x, w_b: f }),
            Err(Error::InfeasibleLevel { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `V` restricted to a ray along one wage coordinate.
pub struct LevelCurve<'a> {
    fixed_wage: f64,
    direction: Sector,
    density: &'a TasteDensity,
    rule: std::sync::Arc<GaussLegendre>,
    split: bool,
}

impl<'a> LevelCurve<'a> {
    pub fn new(fixed_wage: f64, direction: Sector, d: &'a TasteDensity, q: &QuadratureSpec) -> Result<Self> {
        if !(fixed_wage.is_finite() && fixed_wage >= 0.0) {
            return Err(Error::invalid(format!("fixed wage {fixed_wage} must be >= 0")));
        }
        q.validate()?;
        Ok(LevelCurve {
            fixed_wage,
            direction,
            density: d,
            rule: GaussLegendre::cached(q.nodes_per_piece),
            split: q.split_at_kink,
        })
    }

    pub fn wages(&self, x: f64) -> WagePair {
        WagePair::with(self.direction, x, self.fixed_wage)
    }

    pub fn value(&self, x: f64) -> f64 {
        let w = self.wages(x);
        freedom_value_with(&self.rule, w, self.density.at(w), self.split)
    }

    /// Bisection for `value(x) = k`. `bracket`, when given, must satisfy
    /// `value(lo) <= k <= value(hi)`; otherwise one is grown from
    /// `[0, max(1, 2k)]`.
    pub fn solve(&self, k: f64, tol: f64, bracket: Option<(f64, f64)>) -> Result<Root> {
        if !(k.is_finite() && tol > 0.0) {
            return Err(Error::invalid(format!("level {k} / tolerance {tol} invalid")));
        }
        let (lo, hi) = match bracket {
            Some(b) => b,
            None => {
                let floor = self.value(0.0);
                if (floor - k).abs() <= tol {
                    return Ok(Root { x: 0.0, value: floor, iterations: 0 });
                }
                if k < floor {
                    return Err(Error::InfeasibleLevel { level: k, minimum: floor });
                }
                let mut hi = 1f64.max(2.0 * k);
                while self.value(hi) < k {
                    hi *= 2.0;
                    if hi > MAX_BRACKET {
                        return Err(Error::NoConvergence(format!(
                            "level {k} not bracketed below 2^60"
                        )));
                    }
                }
                (0.0, hi)
            }
        };
        let mut lo = lo;
        let mut hi = hi;
        let mut best = Root { x: hi, value: self.value(hi), iterations: 0 };
        if (best.value - k).abs() <= tol {
            return Ok(best);
        }
        for it in 1..=MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let v = self.value(mid);
            if (v - k).abs() < (best.value - k).abs() {
                best = Root { x: mid, value: v, iterations: it };
            }
            if (v - k).abs() <= tol {
                return Ok(Root { x: mid, value: v, iterations: it });
            }
            if v < k {
                lo = mid;
            } else {
                hi = mid;
            }
            if mid == lo && mid == hi || hi - lo <= f64::EPSILON * hi.abs() {
                // bracket collapsed to adjacent floats
                return Ok(best);
            }
        }
        Err(Error::NoConvergence(format!(
            "level {k}: residual {} after {MAX_BISECTIONS} bisections",
            best.value - k
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(a: f64, b: f64) -> WagePair {
        WagePair::new(a, b).unwrap()
    }

    /// Independent closed form for the Beta family via incomplete Beta
    /// functions: `w_b·E[(1−θ); θ<θ*] + w_a·E[θ; θ>θ*]`.
    fn beta_oracle(w: WagePair, d: &TasteDensity) -> f64 {
        use statrs::function::beta::beta_reg;
        let Some(c) = w.kink() else { return 0.0 };
        let (a, b) = d.shapes(w);
        let lower = if c <= 0.0 { 0.0 } else if c >= 1.0 { 1.0 } else { beta_reg(a, b + 1.0, c) };
        let upper = if c <= 0.0 { 1.0 } else if c >= 1.0 { 0.0 } else { 1.0 - beta_reg(a + 1.0, b, c) };
        w.w_b * b / (a + b) * lower + w.w_a * a / (a + b) * upper
    }

    #[test]
    fn indirect_utility_examples() {
        assert_eq!(indirect_utility(wp(2.0, 1.0), 0.5), 1.0);
        assert_eq!(indirect_utility(wp(1.0, 1.0), 0.0), 1.0);
        assert!((indirect_utility(wp(3.0, 6.0), 2.0 / 3.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn occupation_examples() {
        assert_eq!(choose_occupation(wp(1.0, 1.0), 0.6), Sector::A);
        assert_eq!(choose_occupation(wp(1.0, 1.0), 0.4), Sector::B);
        // exact tie at θ = 1/2
        assert_eq!(choose_occupation(wp(1.0, 1.0), 0.5), Sector::A);
        assert_eq!(choose_occupation(wp(3.0, 6.0), 0.5), Sector::B);
    }

    #[test]
    fn tie_at_two_thirds() {
        // 3θ = 6(1−θ) at θ = 2/3; in floats the two sides may differ by an ulp
        let t = 2.0 / 3.0;
        let w = wp(3.0, 6.0);
        let lhs = t * 3.0;
        let rhs = (1.0 - t) * 6.0;
        let expected = if lhs >= rhs { Sector::A } else { Sector::B };
        assert_eq!(choose_occupation(w, t), expected);
        assert!((lhs - rhs).abs() < 1e-14);
        assert_eq!(choose_occupation(wp(1.0, 1.0), 0.5), Sector::A);
    }

    #[test]
    fn freedom_value_examples() {
        let q = QuadratureSpec::default();
        let u = TasteDensity::uniform();
        assert!((freedom_value(wp(1.0, 1.0), &u, &q) - 0.75).abs() < 1e-14);
        for a in [0.5, 1.0, 7.3] {
            assert!((freedom_value(wp(a, 0.0), &u, &q) - a / 2.0).abs() < 1e-14);
        }
        assert_eq!(freedom_value(wp(0.0, 0.0), &u, &q), 0.0);
        let b = TasteDensity::endogenous_beta(3.0).unwrap();
        assert_eq!(freedom_value(wp(0.0, 0.0), &b, &q), 0.0);
    }

    #[test]
    fn closed_form_examples() {
        assert!((freedom_value_closed_form_uniform(wp(1.0, 1.0)) - 0.75).abs() < 1e-15);
        assert!((freedom_value_closed_form_uniform(wp(1.0, 0.0)) - 0.5).abs() < 1e-15);
        assert!((freedom_value_closed_form_uniform(wp(0.0, 1.0)) - 0.5).abs() < 1e-15);
        assert_eq!(freedom_value_closed_form_uniform(wp(0.0, 0.0)), 0.0);
        // θ* = 1/3: 1·(1/3 − 1/18) + 2·(1 − 1/9)/2 = 5/18 + 8/9 = 7/6
        assert!((freedom_value_closed_form_uniform(wp(2.0, 1.0)) - 7.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn beta_quadrature_matches_incomplete_beta_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let q = QuadratureSpec::default();
        for kappa in [0.5, 1.0, 3.0, 5.0] {
            let d = TasteDensity::endogenous_beta(kappa).unwrap();
            for _ in 0..2000 {
                let w = wp(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
                let got = freedom_value(w, &d, &q);
                let want = beta_oracle(w, &d);
                assert!((got - want).abs() <= 1e-10, "κ={kappa} w={w:?}: {}", got - want);
            }
        }
    }

    #[test]
    fn split_rule_converged_and_unsplit_rule_limited_by_kink() {
        let split_hi = QuadratureSpec { nodes_per_piece: 512, split_at_kink: true };
        let unsplit = |n| QuadratureSpec { nodes_per_piece: n, split_at_kink: false };
        let q = QuadratureSpec::default();
        for d in [TasteDensity::uniform(), TasteDensity::endogenous_beta(2.0).unwrap()] {
            for w in [wp(1.0, 1.0), wp(2.0, 1.0), wp(0.3, 4.0)] {
                let base = freedom_value(w, &d, &q);
                let hi = freedom_value(w, &d, &split_hi);
                assert!((base - hi).abs() < 1e-12, "{w:?}: {}", base - hi);
                // a kink inside a single panel converges only like n^-2
                let e512 = (base - freedom_value(w, &d, &unsplit(512))).abs();
                let e2048 = (base - freedom_value(w, &d, &unsplit(2048))).abs();
                assert!(e2048 < e512 / 8.0 || e2048 < 1e-12, "{w:?}: {e512} {e2048}");
                assert!(e512 < 1e-4 * (w.w_a + w.w_b), "{w:?}: {e512}");
            }
            // no kink inside (0, 1): both routes are smooth
            let w = wp(5.0, 0.0);
            assert!((freedom_value(w, &d, &q) - freedom_value(w, &d, &unsplit(512))).abs() < 1e-12);
        }
    }

    #[test]
    fn value_depends_only_on_wage_pair() {
        let d = TasteDensity::endogenous_beta(2.0).unwrap();
        let q = QuadratureSpec::default();
        let w = wp(1.7, 0.4);
        let v1 = freedom_value(w, &d, &q);
        let v2 = freedom_value(WagePair::with(Sector::B, 0.4, 1.7), &d, &q);
        assert_eq!(v1, v2);
    }

    #[test]
    fn frontier_has_intercepts() {
        let pts = wp(4.0, 4.0).frontier(9);
        assert!(pts.contains(&(0.0, 4.0)));
        assert!(pts.contains(&(4.0, 0.0)));
        for (la, lb) in pts {
            assert!((la / 4.0 + lb / 4.0 - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn inversion_examples() {
        let u = TasteDensity::uniform();
        let q = QuadratureSpec::default();
        let x = invert_level_curve(0.75, 1.0, Sector::A, &u, &q, 1e-12).unwrap();
        assert!((x - 1.0).abs() < 1e-10);
        let x = invert_level_curve(0.5, 0.0, Sector::A, &u, &q, 1e-12).unwrap();
        assert!((x - 1.0).abs() < 1e-10);
        let e = invert_level_curve(0.1, 10.0, Sector::A, &u, &q, 1e-10).unwrap_err();
        assert!(matches!(e, Error::InfeasibleLevel { .. }), "{e}");
        let x = invert_level_curve(0.75, 1.0, Sector::B, &u, &q, 1e-12).unwrap();
        assert!((x - 1.0).abs() < 1e-10);
        // level exactly at the zero-investment point
        let x = invert_level_curve(0.5, 1.0, Sector::A, &u, &q, 1e-12).unwrap();
        assert_eq!(x, 0.0);
    }

    #[test]
    fn inversion_rejects_unreachable_levels() {
        let u = TasteDensity::uniform();
        let q = QuadratureSpec::default();
        let e = invert_level_curve(1e20, 1.0, Sector::A, &u, &q, 1e-10).unwrap_err();
        assert!(matches!(e, Error::NoConvergence(_)), "{e}");
    }

    #[test]
    fn level_curve_through_one_one() {
        let u = TasteDensity::uniform();
        let q = QuadratureSpec::default();
        let pts = level_curve_points(0.75, &u, &q, 41, 1e-12).unwrap();
        assert_eq!(pts.len(), 41);
        for w in &pts {
            assert!((freedom_value(*w, &u, &q) - 0.75).abs() < 1e-10);
        }
        assert!((pts[0].w_a - 1.5).abs() < 1e-9 && pts[0].w_b == 0.0);
        assert!(pts[40].w_a.abs() < 1e-9 && (pts[40].w_b - 1.5).abs() < 1e-9);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(500))]

        #[test]
        fn uniform_matches_closed_form(a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let w = wp(a, b);
            let got = freedom_value(w, &TasteDensity::uniform(), &QuadratureSpec::default());
            proptest::prop_assert!((got - freedom_value_closed_form_uniform(w)).abs() <= 1e-10);
        }

        #[test]
        fn symmetric_in_wages(a in 0.0f64..10.0, b in 0.0f64..10.0, kappa in 0.0f64..6.0) {
            let d = TasteDensity::endogenous_beta(kappa).unwrap();
            let q = QuadratureSpec::default();
            let v = freedom_value(wp(a, b), &d, &q);
            let s = freedom_value(wp(b, a), &d, &q);
            proptest::prop_assert!((v - s).abs() <= 1e-9);
        }

        #[test]
        fn uniform_is_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0, da in 0.0f64..3.0, db in 0.0f64..3.0) {
            let u = TasteDensity::uniform();
            let q = QuadratureSpec::default();
            proptest::prop_assert!(freedom_value(wp(a + da, b + db), &u, &q) >= freedom_value(wp(a, b), &u, &q) - 1e-10);
        }

        #[test]
        fn dominates_lower_envelope(a in 0.0f64..10.0, b in 0.0f64..10.0, kappa in 0.0f64..6.0) {
            let d = TasteDensity::endogenous_beta(kappa).unwrap();
            let w = wp(a, b);
            let v = freedom_value(w, &d, &QuadratureSpec::default());
            proptest::prop_assert!(v >= lower_envelope(w, &d) - 1e-10);
        }

        #[test]
        fn inversion_round_trip(k in 0.05f64..8.0, fixed in 0.0f64..4.0) {
            let u = TasteDensity::uniform();
            let q = QuadratureSpec::default();
            let tol = 1e-10;
            match invert_level_curve(k, fixed, Sector::A, &u, &q, tol) {
                Ok(x) => {
                    let v = freedom_value(wp(x, fixed), &u, &q);
                    proptest::prop_assert!((v - k).abs() <= 2.0 * tol);
                }
                Err(Error::InfeasibleLevel { minimum, .. }) => proptest::prop_assert!(k < minimum),
                Err(e) => proptest::prop_assert!(false, "{}", e),
            }
        }
    }
}
