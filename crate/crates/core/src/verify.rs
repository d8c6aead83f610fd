//! Randomized certificates for the structural properties of `V`:
//! symmetry, monotonicity in wages, quasiconvexity, the componentwise-max
//! claim used for quasiconvexity, and the CDF inequality behind it.
//!
//! Each trial draws its inputs from its own ChaCha stream (`seed`, trial
//! index), so certificates are reproducible regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::freedom::{freedom_value, QuadratureSpec, WagePair};
use crate::preferences::{TasteDensity, TasteModel};

pub const SYMMETRY_TOL: f64 = 1e-9;
pub const MONOTONICITY_TOL: f64 = 1e-10;
pub const QUASICONVEXITY_TOL: f64 = 1e-9;
pub const CLAIM_TOL: f64 = 1e-9;
pub const CDF_TOL: f64 = 1e-10;

const WAGE_RANGE: f64 = 10.0;
const STEP_RANGE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Symmetry,
    Monotonicity,
    Quasiconvexity,
    ComponentwiseMaxClaim,
    CdfInequality,
}

impl Property {
    pub const ALL: [Property; 5] = [
        Property::Symmetry,
        Property::Monotonicity,
        Property::Quasiconvexity,
        Property::ComponentwiseMaxClaim,
        Property::CdfInequality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Symmetry => "symmetry",
            Property::Monotonicity => "monotonicity",
            Property::Quasiconvexity => "quasiconvexity",
            Property::ComponentwiseMaxClaim => "componentwise_max_claim",
            Property::CdfInequality => "cdf_inequality",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Property::Symmetry => SYMMETRY_TOL,
            Property::Monotonicity => MONOTONICITY_TOL,
            Property::Quasiconvexity => QUASICONVEXITY_TOL,
            Property::ComponentwiseMaxClaim => CLAIM_TOL,
            Property::CdfInequality => CDF_TOL,
        }
    }
}

/// One evaluated trial: the property asserts `lhs ≥ rhs − tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub trial: usize,
    pub inputs: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl Sample {
    fn new(trial: usize, inputs: Vec<f64>, lhs: f64, rhs: f64) -> Self {
        Sample { trial, inputs, lhs, rhs, slack: lhs - rhs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCertificate {
    pub property: Property,
    pub density: TasteDensity,
    pub seed: u64,
    pub trials: usize,
    /// Trials with no defined test point (e.g. a zero cut-point denominator).
    pub skipped: usize,
    pub violations: Vec<Sample>,
    /// Smallest `lhs − rhs` over evaluated trials.
    pub worst_slack: f64,
    pub passed: bool,
}

fn rng_for(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn random_wages(rng: &mut impl Rng) -> WagePair {
    WagePair { w_a: rng.gen_range(0.0..WAGE_RANGE), w_b: rng.gen_range(0.0..WAGE_RANGE) }
}

/// Orders two draws so the first has the higher `a` wage and the lower `b` wage.
fn crossed_pair(x: WagePair, y: WagePair) -> (WagePair, WagePair) {
    (
        WagePair { w_a: x.w_a.max(y.w_a), w_b: x.w_b.min(y.w_b) },
        WagePair { w_a: x.w_a.min(y.w_a), w_b: x.w_b.max(y.w_b) },
    )
}

fn v(w: WagePair, d: &TasteDensity, q: &QuadratureSpec) -> f64 {
    freedom_value(w, d, q)
}

/// `|V(w) − V(swap w)|` as the slack `0 − gap`.
pub fn symmetry_sample(trial: usize, w: WagePair, d: &TasteDensity, q: &QuadratureSpec) -> Sample {
    let gap = (v(w, d, q) - v(w.swapped(), d, q)).abs();
    Sample::new(trial, vec![w.w_a, w.w_b], 0.0, gap)
}

/// `V(upper) ≥ V(lower)` for `upper ≥ lower` componentwise.
pub fn monotonicity_sample(trial: usize, lower: WagePair, upper: WagePair, d: &TasteDensity, q: &QuadratureSpec) -> Sample {
    Sample::new(trial, vec![lower.w_a, lower.w_b, upper.w_a, upper.w_b], v(upper, d, q), v(lower, d, q))
}

/// `max{V(w), V(w')} ≥ V(λw + (1−λ)w')`.
pub fn quasiconvexity_sample(
    trial: usize,
    w: WagePair,
    w2: WagePair,
    lambda: f64,
    d: &TasteDensity,
    q: &QuadratureSpec,
) -> Sample {
    let mid = WagePair {
        w_a: lambda * w.w_a + (1.0 - lambda) * w2.w_a,
        w_b: lambda * w.w_b + (1.0 - lambda) * w2.w_b,
    };
    Sample::new(
        trial,
        vec![w.w_a, w.w_b, w2.w_a, w2.w_b, lambda],
        v(w, d, q).max(v(w2, d, q)),
        v(mid, d, q),
    )
}

/// `max{V(w), V(w')} ≥ V(max{w_a, w'_a}, max{w_b, w'_b})`.
pub fn claim_sample(trial: usize, w: WagePair, w2: WagePair, d: &TasteDensity, q: &QuadratureSpec) -> Sample {
    let top = WagePair { w_a: w.w_a.max(w2.w_a), w_b: w.w_b.max(w2.w_b) };
    Sample::new(trial, vec![w.w_a, w.w_b, w2.w_a, w2.w_b], v(w, d, q).max(v(w2, d, q)), v(top, d, q))
}

/// `1 − F(c; w) ≥ 1 − F(c; w')` at `c = w'_b/(w_a + w'_b)`, for
/// `w_a ≥ w'_a`, `w_b ≤ w'_b`. `None` when the cut point is undefined.
pub fn cdf_sample(trial: usize, w: WagePair, w2: WagePair, d: &dyn TasteModel) -> Option<Sample> {
    let den = w.w_a + w2.w_b;
    if den <= 0.0 {
        return None;
    }
    let c = (w2.w_b / den).clamp(0.0, 1.0);
    let lhs = 1.0 - d.cdf(c, w).ok()?;
    let rhs = 1.0 - d.cdf(c, w2).ok()?;
    Some(Sample::new(trial, vec![w.w_a, w.w_b, w2.w_a, w2.w_b, c], lhs, rhs))
}

fn draw(property: Property, trial: usize, seed: u64, d: &TasteDensity, q: &QuadratureSpec) -> Option<Sample> {
    let mut rng = rng_for(seed, trial);
    match property {
        Property::Symmetry => Some(symmetry_sample(trial, random_wages(&mut rng), d, q)),
        Property::Monotonicity => {
            let w = random_wages(&mut rng);
            let up = WagePair {
                w_a: w.w_a + rng.gen_range(0.0..STEP_RANGE),
                w_b: w.w_b + rng.gen_range(0.0..STEP_RANGE),
            };
            Some(monotonicity_sample(trial, w, up, d, q))
        }
        Property::Quasiconvexity => {
            let w = random_wages(&mut rng);
            let w2 = random_wages(&mut rng);
            let lambda = rng.gen::<f64>();
            Some(quasiconvexity_sample(trial, w, w2, lambda, d, q))
        }
        Property::ComponentwiseMaxClaim => {
            let (w, w2) = crossed_pair(random_wages(&mut rng), random_wages(&mut rng));
            Some(claim_sample(trial, w, w2, d, q))
        }
        Property::CdfInequality => {
            let (w, w2) = crossed_pair(random_wages(&mut rng), random_wages(&mut rng));
            cdf_sample(trial, w, w2, d)
        }
    }
}

/// Runs `trials` random trials of `property`.
pub fn certify(property: Property, d: &TasteDensity, q: &QuadratureSpec, trials: usize, seed: u64) -> PropertyCertificate {
    let samples: Vec<Option<Sample>> = (0..trials)
        .into_par_iter()
        .map(|t| draw(property, t, seed, d, q))
        .collect();
    let tol = property.tolerance();
    let skipped = samples.iter().filter(|s| s.is_none()).count();
    let evaluated: Vec<Sample> = samples.into_iter().flatten().collect();
    let worst_slack = evaluated.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min);
    let violations: Vec<Sample> = evaluated.into_iter().filter(|s| s.slack < -tol).collect();
    PropertyCertificate {
        property,
        density: *d,
        seed,
        trials,
        skipped,
        passed: violations.is_empty(),
        violations,
        worst_slack: if worst_slack.is_finite() { worst_slack } else { 0.0 },
    }
}

pub fn certify_symmetry(d: &TasteDensity, q: &QuadratureSpec, trials: usize, seed: u64) -> PropertyCertificate {
    certify(Property::Symmetry, d, q, trials, seed)
}

pub fn certify_monotonicity(d: &TasteDensity, q: &QuadratureSpec, trials: usize, seed: u64) -> PropertyCertificate {
    certify(Property::Monotonicity, d, q, trials, seed)
}

pub fn certify_quasiconvexity(d: &TasteDensity, q: &QuadratureSpec, trials: usize, seed: u64) -> PropertyCertificate {
    certify(Property::Quasiconvexity, d, q, trials, seed)
}

pub fn certify_componentwise_max_claim(d: &TasteDensity, q: &QuadratureSpec, trials: usize, seed: u64) -> PropertyCertificate {
    certify(Property::ComponentwiseMaxClaim, d, q, trials, seed)
}

pub fn certify_cdf_inequality(d: &TasteDensity, q: &QuadratureSpec, trials: usize, seed: u64) -> PropertyCertificate {
    certify(Property::CdfInequality, d, q, trials, seed)
}

/// Case-by-case consistency of the quasiconvexity samples with the
/// monotonicity and claim inequalities evaluated on the same points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub density: TasteDensity,
    pub seed: u64,
    /// Componentwise-ordered endpoint pairs.
    pub case_one: usize,
    /// Case I samples where monotonicity held but quasiconvexity did not.
    pub case_one_inconsistent: Vec<usize>,
    /// Crossed endpoint pairs.
    pub case_two: usize,
    /// Case II samples where claim and monotonicity both held.
    pub case_two_premises_hold: usize,
    /// ... of which quasiconvexity failed anyway.
    pub case_two_implication_failures: Vec<usize>,
}

impl CrossCheck {
    pub fn consistent(&self) -> bool {
        self.case_one_inconsistent.is_empty() && self.case_two_implication_failures.is_empty()
    }
}

/// Replays the quasiconvexity draws and checks the proof chain
/// `max{V(w), V(w')} ≥ V(max…) ≥ V(mid)` sample by sample.
pub fn cross_check_quasiconvexity(d: &TasteDensity, q: &QuadratureSpec, trials: usize, seed: u64) -> CrossCheck {
    let rows: Vec<(bool, bool, bool, usize)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, t);
            let w = random_wages(&mut rng);
            let w2 = random_wages(&mut rng);
            let lambda = rng.gen::<f64>();
            let qc = quasiconvexity_sample(t, w, w2, lambda, d, q);
            let qc_ok = qc.slack >= -QUASICONVEXITY_TOL;
            let mid = WagePair { w_a: lambda * w.w_a + (1.0 - lambda) * w2.w_a, w_b: lambda * w.w_b + (1.0 - lambda) * w2.w_b };
            let ordered = (w.w_a >= w2.w_a) == (w.w_b >= w2.w_b);
            if ordered {
                let upper = if w.w_a >= w2.w_a { w } else { w2 };
                let mono = monotonicity_sample(t, mid, upper, d, q);
                (true, mono.slack >= -MONOTONICITY_TOL, qc_ok, t)
            } else {
                let claim = claim_sample(t, w, w2, d, q);
                let top = WagePair { w_a: w.w_a.max(w2.w_a), w_b: w.w_b.max(w2.w_b) };
                let mono = monotonicity_sample(t, mid, top, d, q);
                // the two slacks sum to the quasiconvexity slack
                let premises = claim.slack >= -CLAIM_TOL && mono.slack >= -MONOTONICITY_TOL;
                let qc_chain_ok = qc.slack >= -(CLAIM_TOL + MONOTONICITY_TOL);
                (false, premises, qc_chain_ok, t)
            }
        })
        .collect();
    let mut out = CrossCheck {
        density: *d,
        seed,
        case_one: 0,
        case_one_inconsistent: Vec::new(),
        case_two: 0,
        case_two_premises_hold: 0,
        case_two_implication_failures: Vec::new(),
    };
    for (case_one, premises, qc_ok, t) in rows {
        if case_one {
            out.case_one += 1;
            if premises && !qc_ok {
                out.case_one_inconsistent.push(t);
            }
        } else {
            out.case_two += 1;
            if premises {
                out.case_two_premises_hold += 1;
                if !qc_ok {
                    out.case_two_implication_failures.push(t);
                }
            }
        }
    }
    out
}
