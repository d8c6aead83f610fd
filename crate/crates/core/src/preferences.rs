//! Taste densities `f(θ; w_a, w_b)` on [0, 1] and validators for the
//! relabeling, symmetry and skew conditions they must satisfy.

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};
use crate::freedom::WagePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Uniform,
    EndogenousBeta,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Family::Uniform),
            "endogenous_beta" => Ok(Family::EndogenousBeta),
            other => Err(Error::invalid(format!(
                "unknown density family {other:?} (expected uniform or endogenous_beta)"
            ))),
        }
    }
}

/// Density of the taste parameter θ given post-education wages.
///
/// `EndogenousBeta` is Beta(α, β) with `α = 1 + κ·w_a/(w_a+w_b)` and
/// `β = 1 + κ·w_b/(w_a+w_b)`; at zero wages both shapes are `1 + κ/2`.
/// `Uniform` is the `κ = 0` member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TasteDensity {
    pub family: Family,
    #[serde(default)]
    pub kappa: f64,
}

/// Anything that can play the role of a wage-dependent taste density.
pub trait TasteModel: Sync {
    fn pdf(&self, theta: f64, w: WagePair) -> Result<f64>;
    fn cdf(&self, theta: f64, w: WagePair) -> Result<f64>;
}

impl TasteDensity {
    pub const UNIFORM: TasteDensity = TasteDensity { family: Family::Uniform, kappa: 0.0 };

    pub fn uniform() -> Self {
        Self::UNIFORM
    }

    pub fn endogenous_beta(kappa: f64) -> Result<Self> {
        let d = TasteDensity { family: Family::EndogenousBeta, kappa };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::invalid(format!("kappa = {} must be >= 0", self.kappa)));
        }
        Ok(())
    }

    /// True when the density is the same for every wage pair.
    pub fn is_exogenous(&self) -> bool {
        self.family == Family::Uniform || self.kappa == 0.0
    }

    /// Beta shape parameters at wages `w`.
    pub fn shapes(&self, w: WagePair) -> (f64, f64) {
        if self.is_exogenous() {
            return (1.0, 1.0);
        }
        let s = w.w_a + w.w_b;
        if s <= 0.0 {
            let h = 1.0 + 0.5 * self.kappa;
            return (h, h);
        }
        (1.0 + self.kappa * w.w_a / s, 1.0 + self.kappa * w.w_b / s)
    }

    /// A density frozen at one wage pair, for repeated evaluation.
    pub fn at(&self, w: WagePair) -> FrozenDensity {
        let (alpha, beta) = self.shapes(w);
        if alpha == 1.0 && beta == 1.0 {
            FrozenDensity::Flat
        } else {
            FrozenDensity::Beta { alpha, beta, ln_norm: ln_beta(alpha, beta) }
        }
    }
}

impl TasteModel for TasteDensity {
    fn pdf(&self, theta: f64, w: WagePair) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.at(w).pdf(theta))
    }

    fn cdf(&self, theta: f64, w: WagePair) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.at(w).cdf(theta))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::invalid(format!("theta = {theta} outside [0, 1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrozenDensity {
    Flat,
    Beta { alpha: f64, beta: f64, ln_norm: f64 },
}

impl FrozenDensity {
    #[inline]
    pub fn pdf(&self, theta: f64) -> f64 {
        match *self {
            FrozenDensity::Flat => 1.0,
            FrozenDensity::Beta { alpha, beta, ln_norm } => {
                let la = if alpha == 1.0 { 0.0 } else { (alpha - 1.0) * theta.ln() };
                let lb = if beta == 1.0 { 0.0 } else { (beta - 1.0) * (1.0 - theta).ln() };
                (la + lb - ln_norm).exp()
            }
        }
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        match *self {
            FrozenDensity::Flat => theta.clamp(0.0, 1.0),
            FrozenDensity::Beta { alpha, beta, .. } => {
                if theta <= 0.0 {
                    0.0
                } else if theta >= 1.0 {
                    1.0
                } else {
                    beta_reg(alpha, beta, theta)
                }
            }
        }
    }

    /// E[θ].
    pub fn mean(&self) -> f64 {
        match *self {
            FrozenDensity::Flat => 0.5,
            FrozenDensity::Beta { alpha, beta, .. } => alpha / (alpha + beta),
        }
    }
}

const RELABEL_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;
const SKEW_TOL: f64 = 1e-10;
const FOSD_TOL: f64 = 1e-10;

/// Per-wage-pair outcome of [`validate_assumption2`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub wages: WagePair,
    /// max |f(θ; w_a, w_b) − f(1−θ; w_b, w_a)|
    pub relabel_gap: f64,
    pub relabel_ok: bool,
    /// `None` when the wages differ and the condition does not apply.
    pub symmetric_gap: Option<f64>,
    pub symmetric_ok: Option<bool>,
    /// Mass to the right of ½.
    pub mass_right: f64,
    pub skew_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks
            .iter()
            .all(|c| c.relabel_ok && c.symmetric_ok.unwrap_or(true) && c.skew_ok)
    }

    pub fn relabel_pass(&self) -> bool {
        self.checks.iter().all(|c| c.relabel_ok)
    }

    pub fn worst_relabel_gap(&self) -> f64 {
        self.checks.iter().map(|c| c.relabel_gap).fold(0.0, f64::max)
    }
}

fn theta_grid(nodes: usize) -> Vec<f64> {
    match nodes {
        0 | 1 => vec![0.5],
        n => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Checks relabeling, symmetry at equal wages and the mass-at-½ skew
/// condition on every wage pair of `grid`.
pub fn validate_assumption2(
    d: &dyn TasteModel,
    grid: &[WagePair],
    theta_nodes: usize,
) -> Result<ValidationReport> {
    if grid.is_empty() {
        return Err(Error::invalid("wage grid is empty"));
    }
    let thetas = theta_grid(theta_nodes);
    let mut checks = Vec::with_capacity(grid.len());
    for &w in grid {
        let mut relabel_gap = 0.0f64;
        for &t in &thetas {
            let lhs = d.pdf(t, w)?;
            let rhs = d.pdf(1.0 - t, w.swapped())?;
            relabel_gap = relabel_gap.max((lhs - rhs).abs());
        }
        let (symmetric_gap, symmetric_ok) = if (w.w_a - w.w_b).abs() <= 1e-12 {
            let mut gap = 0.0f64;
            for &t in &thetas {
                gap = gap.max((d.pdf(t, w)? - d.pdf(1.0 - t, w)?).abs());
            }
            (Some(gap), Some(gap <= SYMMETRY_TOL))
        } else {
            (None, None)
        };
        let left = d.cdf(0.5, w)?;
        let right = 1.0 - left;
        let mut skew_ok = true;
        if w.w_a >= w.w_b {
            skew_ok &= right >= left - SKEW_TOL;
        }
        if w.w_a <= w.w_b {
            skew_ok &= left >= right - SKEW_TOL;
        }
        checks.push(ConditionCheck {
            wages: w,
            relabel_gap,
            relabel_ok: relabel_gap <= RELABEL_TOL,
            symmetric_gap,
            symmetric_ok,
            mass_right: right,
            skew_ok,
        });
    }
    Ok(ValidationReport { checks })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftCheck {
    pub higher_a: WagePair,
    pub higher_b: WagePair,
    /// max over cut points of F(c; higher_a) − F(c; higher_b); ≤ 0 means dominance.
    pub worst_violation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftReport {
    pub checks: Vec<ShiftCheck>,
}

impl ShiftReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// For each `(w, w')` with `w_a ≥ w'_a` and `w_b ≤ w'_b`, checks that
/// `F(c; w) ≤ F(c; w')` at `c_nodes` equally spaced interior cut points.
pub fn validate_fosd_shift(
    d: &dyn TasteModel,
    pairs: &[(WagePair, WagePair)],
    c_nodes: usize,
) -> Result<ShiftReport> {
    let cuts: Vec<f64> = (1..=c_nodes.max(1))
        .map(|i| i as f64 / (c_nodes.max(1) + 1) as f64)
        .collect();
    let mut checks = Vec::with_capacity(pairs.len());
    for &(w, w2) in pairs {
        if !(w.w_a >= w2.w_a && w.w_b <= w2.w_b) {
            return Err(Error::invalid(format!(
                "pair ({}, {}) / ({}, {}) violates w_a >= w_a' and w_b <= w_b'",
                w.w_a, w.w_b, w2.w_a, w2.w_b
            )));
        }
        let mut worst = f64::NEG_INFINITY;
        for &c in &cuts {
            worst = worst.max(d.cdf(c, w)? - d.cdf(c, w2)?);
        }
        checks.push(ShiftCheck {
            higher_a: w,
            higher_b: w2,
            worst_violation: worst,
            passed: worst <= FOSD_TOL,
        });
    }
    Ok(ShiftReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::GaussLegendre;

    fn wp(a: f64, b: f64) -> WagePair {
        WagePair::new(a, b).unwrap()
    }

    /// pdf(θ) = 2θ whatever the wages: fails the relabeling condition.
    struct Tilted;

    impl TasteModel for Tilted {
        fn pdf(&self, theta: f64, _w: WagePair) -> Result<f64> {
            Ok(2.0 * theta)
        }
        fn cdf(&self, theta: f64, _w: WagePair) -> Result<f64> {
            Ok(theta * theta)
        }
    }

    #[test]
    fn pdf_examples() {
        let u = TasteDensity::uniform();
        assert_eq!(u.pdf(0.3, wp(5.0, 1.0)).unwrap(), 1.0);
        let b = TasteDensity::endogenous_beta(2.0).unwrap();
        // Beta(2,2) density 6θ(1−θ)
        assert!((b.pdf(0.5, wp(1.0, 1.0)).unwrap() - 1.5).abs() < 1e-14);
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let l = b.pdf(t, wp(2.0, 1.0)).unwrap();
            let r = b.pdf(1.0 - t, wp(1.0, 2.0)).unwrap();
            assert!((l - r).abs() < 1e-12, "θ={t}");
        }
        assert!(b.pdf(1.2, wp(1.0, 1.0)).is_err());
        assert!(u.cdf(-0.1, wp(1.0, 1.0)).is_err());
    }

    #[test]
    fn zero_wages_use_symmetric_shapes() {
        let b = TasteDensity::endogenous_beta(3.0).unwrap();
        assert_eq!(b.shapes(wp(0.0, 0.0)), (2.5, 2.5));
    }

    #[test]
    fn cdf_examples() {
        let u = TasteDensity::uniform();
        assert_eq!(u.cdf(0.25, wp(3.0, 1.0)).unwrap(), 0.25);
        let b = TasteDensity::endogenous_beta(2.0).unwrap();
        assert!((b.cdf(0.5, wp(1.0, 1.0)).unwrap() - 0.5).abs() < 1e-14);
        // Beta(3,1): ∫₀^½ 3θ² dθ = 1/8
        assert!((b.cdf(0.5, wp(2.0, 0.0)).unwrap() - 0.125).abs() < 1e-14);
        assert_eq!(b.cdf(0.0, wp(2.0, 1.0)).unwrap(), 0.0);
        assert_eq!(b.cdf(1.0, wp(2.0, 1.0)).unwrap(), 1.0);
    }

    /// Independent route: integrate the pdf on a fine composite rule and
    /// compare to the incomplete-Beta cdf.
    #[test]
    fn cdf_matches_pdf_quadrature() {
        let rule = GaussLegendre::new(160);
        let b = TasteDensity::endogenous_beta(5.0).unwrap();
        for w in [wp(2.0, 1.0), wp(0.3, 7.0), wp(1.0, 1.0), wp(4.0, 0.0)] {
            let fz = b.at(w);
            for c in [0.1, 0.37, 0.5, 0.93] {
                let q = rule.integrate_graded(0.0, c, 6, |t| fz.pdf(t));
                assert!((q - fz.cdf(c)).abs() < 1e-12, "w={w:?} c={c}: {}", q - fz.cdf(c));
            }
        }
    }

    #[test]
    fn assumption2_uniform_passes_everywhere() {
        let grid: Vec<_> = [(0.0, 0.0), (1.0, 1.0), (5.0, 1.0), (0.2, 9.0)]
            .iter()
            .map(|&(a, b)| wp(a, b))
            .collect();
        let r = validate_assumption2(&TasteDensity::uniform(), &grid, 101).unwrap();
        assert!(r.all_pass());
        assert_eq!(r.worst_relabel_gap(), 0.0);
    }

    #[test]
    fn assumption2_beta_skews_toward_richer_sector() {
        let b = TasteDensity::endogenous_beta(5.0).unwrap();
        let r = validate_assumption2(&b, &[wp(2.0, 1.0)], 101).unwrap();
        assert!(r.all_pass());
        assert!(r.checks[0].mass_right > 0.5);
        assert!(r.checks[0].relabel_gap <= 1e-12);
        assert_eq!(r.checks[0].symmetric_ok, None);
        let r = validate_assumption2(&b, &[wp(1.5, 1.5)], 101).unwrap();
        assert_eq!(r.checks[0].symmetric_ok, Some(true));
    }

    #[test]
    fn assumption2_flags_broken_family() {
        let r = validate_assumption2(&Tilted, &[wp(1.0, 1.0), wp(3.0, 1.0)], 11).unwrap();
        assert!(!r.relabel_pass());
        assert!(!r.all_pass());
        assert!(validate_assumption2(&Tilted, &[], 11).is_err());
    }

    #[test]
    fn fosd_shift_examples() {
        let u = TasteDensity::uniform();
        let r = validate_fosd_shift(&u, &[(wp(3.0, 1.0), wp(1.0, 4.0))], 99).unwrap();
        assert!(r.all_pass());
        assert_eq!(r.checks[0].worst_violation, 0.0);

        let b = TasteDensity::endogenous_beta(2.0).unwrap();
        let r = validate_fosd_shift(&b, &[(wp(2.0, 1.0), wp(1.0, 2.0))], 1001).unwrap();
        assert!(r.all_pass());
        assert!(r.checks[0].worst_violation < 0.0);

        let e = validate_fosd_shift(&b, &[(wp(1.0, 2.0), wp(2.0, 1.0))], 11).unwrap_err();
        assert!(matches!(e, Error::InvalidArgument(_)));
    }

    #[test]
    fn mass_right_grows_with_kappa() {
        let w = wp(3.0, 1.0);
        let mut last = 0.5;
        for k in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let d = TasteDensity::endogenous_beta(k).unwrap();
            let right = 1.0 - d.cdf(0.5, w).unwrap();
            assert!(right > last, "κ={k}");
            last = right;
        }
    }

    proptest::proptest! {
        #[test]
        fn pdf_integrates_to_one(a in 0.0f64..10.0, b in 0.0f64..10.0, kappa in 0.0f64..8.0) {
            let d = TasteDensity::endogenous_beta(kappa).unwrap();
            let fz = d.at(wp(a, b));
            let mass = GaussLegendre::cached(64).integrate_graded(0.0, 1.0, 4, |t| fz.pdf(t));
            proptest::prop_assert!((mass - 1.0).abs() <= 1e-10, "mass = {}", mass);
        }

        #[test]
        fn cdf_is_nondecreasing(a in 0.0f64..10.0, b in 0.0f64..10.0, kappa in 0.0f64..8.0) {
            let d = TasteDensity::endogenous_beta(kappa).unwrap();
            let w = wp(a, b);
            let mut prev = 0.0;
            for i in 0..=200 {
                let c = d.cdf(i as f64 / 200.0, w).unwrap();
                proptest::prop_assert!(c >= prev - 1e-15);
                prev = c;
            }
        }

        #[test]
        fn relabel_identity_exact(a in 0.0f64..10.0, b in 0.0f64..10.0, kappa in 0.0f64..8.0) {
            let d = TasteDensity::endogenous_beta(kappa).unwrap();
            let r = validate_assumption2(&d, &[wp(a, b)], 51).unwrap();
            proptest::prop_assert!(r.worst_relabel_gap() <= 1e-12);
            proptest::prop_assert!(r.all_pass());
        }
    }
}
