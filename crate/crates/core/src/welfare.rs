//! Social welfare over allocations, structure comparisons and the
//! ex-post Equal-Welfare-for-Equal-Preference diagnostic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freedom::{freedom_value, indirect_utility, QuadratureSpec};
use crate::numeric::compensated_sum;
use crate::policies::{solve, Allocation, Objective, PolicySpec, Structure, Tolerances};
use crate::population::Population;
use crate::preferences::TasteDensity;

/// Margins within this band are ties.
pub const TIE_BAND: f64 = 1e-7;
/// Largest realized-utility gap that still counts as equal welfare.
pub const EWEP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub policy: String,
    pub values: Vec<f64>,
    pub maximin: f64,
    /// Index of the first agent attaining the minimum.
    pub minimizer: usize,
    pub weighted: Option<f64>,
    pub level: f64,
    pub total_cost: f64,
}

/// `Σ λ_i · weight_i · V^i`.
pub fn weighted_welfare(pop: &Population, values: &[f64], lambda: &[f64]) -> Result<f64> {
    if lambda.len() != pop.len() || values.len() != pop.len() {
        return Err(Error::invalid(format!(
            "{} welfare weights for {} agents",
            lambda.len(),
            pop.len()
        )));
    }
    if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::invalid("welfare weights must be finite and >= 0"));
    }
    if lambda.iter().all(|&l| l == 0.0) {
        return Err(Error::invalid("welfare weights are all zero"));
    }
    Ok(compensated_sum(
        pop.agents()
            .iter()
            .zip(values)
            .zip(lambda)
            .map(|((a, v), l)| l * a.weight * v),
    ))
}

pub fn evaluate_welfare(
    pop: &Population,
    alloc: &Allocation,
    d: &TasteDensity,
    q: &QuadratureSpec,
    weights: Option<&[f64]>,
) -> Result<WelfareReport> {
    if alloc.records.len() != pop.len() {
        return Err(Error::invalid(format!(
            "allocation has {} records for {} agents",
            alloc.records.len(),
            pop.len()
        )));
    }
    let values: Vec<f64> = alloc.records.iter().map(|r| freedom_value(r.wages, d, q)).collect();
    let (minimizer, maximin) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    let weighted = weights.map(|l| weighted_welfare(pop, &values, l)).transpose()?;
    Ok(WelfareReport {
        policy: alloc.policy.id(),
        values,
        maximin,
        minimizer,
        weighted,
        level: alloc.level,
        total_cost: alloc.total_cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Dominates,
    Tie,
    Violation,
}

impl Verdict {
    pub fn from_margin(margin: f64) -> Verdict {
        if margin >= TIE_BAND {
            Verdict::Dominates
        } else if margin > -TIE_BAND {
            Verdict::Tie
        } else {
            Verdict::Violation
        }
    }

    /// Two-school weakly better up to the tie band.
    pub fn holds(self) -> bool {
        self != Verdict::Violation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub one_school: Structure,
    pub two_school_value: f64,
    pub one_school_value: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

impl PairVerdict {
    fn new(one_school: Structure, two: f64, one: f64) -> Self {
        let margin = two - one;
        PairVerdict {
            one_school,
            two_school_value: two,
            one_school_value: one,
            margin,
            verdict: Verdict::from_margin(margin),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedVerdict {
    pub weight_set: usize,
    pub pairs: Vec<PairVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureOutcome {
    pub structure: Structure,
    pub allocation: Option<Allocation>,
    pub welfare: Option<WelfareReport>,
    pub error: Option<String>,
    #[serde(skip)]
    pub failure: Option<Error>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    pub objective: Objective,
    pub budget: f64,
    pub outcomes: Vec<StructureOutcome>,
    /// Two-school vs each one-school policy, maximin welfare.
    pub maximin: Vec<PairVerdict>,
    /// Two-school vs each one-school policy under each supplied weight set
    /// (utility equalization only).
    pub weighted: Vec<WeightedVerdict>,
    /// Two-school level vs each one-school level (resource equalization only).
    pub levels: Vec<PairVerdict>,
}

impl ComparisonVerdict {
    pub fn outcome(&self, s: Structure) -> &StructureOutcome {
        self.outcomes
            .iter()
            .find(|o| o.structure == s)
            .expect("every structure has an outcome")
    }

    pub fn failures(&self) -> impl Iterator<Item = &StructureOutcome> {
        self.outcomes.iter().filter(|o| o.failure.is_some())
    }

    pub fn maximin_holds(&self) -> bool {
        self.maximin.iter().all(|p| p.verdict.holds())
    }

    pub fn weighted_holds(&self) -> bool {
        self.weighted.iter().flat_map(|w| &w.pairs).all(|p| p.verdict.holds())
    }
}

/// Solves all three structures under `objective` and compares two-school
/// welfare against each one-school policy. Structures that fail to solve are
/// reported, not compared.
pub fn compare_structures(
    pop: &Population,
    objective: Objective,
    budget: f64,
    d: &TasteDensity,
    q: &QuadratureSpec,
    weight_sets: &[Vec<f64>],
    tol: Tolerances,
) -> Result<ComparisonVerdict> {
    for w in weight_sets {
        if w.len() != pop.len() {
            return Err(Error::invalid(format!("{} welfare weights for {} agents", w.len(), pop.len())));
        }
    }
    let outcomes: Vec<StructureOutcome> = Structure::ALL
        .iter()
        .map(|&structure| {
            let spec = PolicySpec::new(structure, objective, budget)?;
            let solved = solve(pop, &spec, d, q, tol)
                .and_then(|alloc| evaluate_welfare(pop, &alloc, d, q, weight_sets.first().map(|w| w.as_slice())).map(|w| (alloc, w)));
            Ok(match solved {
                Ok((alloc, welfare)) => StructureOutcome {
                    structure,
                    allocation: Some(alloc),
                    welfare: Some(welfare),
                    error: None,
                    failure: None,
                },
                Err(e) => StructureOutcome {
                    structure,
                    allocation: None,
                    welfare: None,
                    error: Some(format!("{}: {e}", structure.name())),
                    failure: Some(e),
                },
            })
        })
        .collect::<Result<_>>()?;

    let get = |s: Structure| outcomes.iter().find(|o| o.structure == s).and_then(|o| o.welfare.as_ref().zip(o.allocation.as_ref()));
    let mut maximin = Vec::new();
    let mut weighted: Vec<WeightedVerdict> = Vec::new();
    let mut levels = Vec::new();
    if let Some((two, two_alloc)) = get(Structure::TwoSchool) {
        for one_s in [Structure::OneSchoolA, Structure::OneSchoolB] {
            let Some((one, one_alloc)) = get(one_s) else { continue };
            maximin.push(PairVerdict::new(one_s, two.maximin, one.maximin));
            if objective == Objective::ResourceEq {
                levels.push(PairVerdict::new(one_s, two_alloc.level, one_alloc.level));
            }
            if objective == Objective::UtilityEq {
                for (i, lambda) in weight_sets.iter().enumerate() {
                    let t = weighted_welfare(pop, &two.values, lambda)?;
                    let o = weighted_welfare(pop, &one.values, lambda)?;
                    match weighted.iter_mut().find(|w| w.weight_set == i) {
                        Some(w) => w.pairs.push(PairVerdict::new(one_s, t, o)),
                        None => weighted.push(WeightedVerdict { weight_set: i, pairs: vec![PairVerdict::new(one_s, t, o)] }),
                    }
                }
            }
        }
    }
    Ok(ComparisonVerdict { objective, budget, outcomes, maximin, weighted, levels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwepSample {
    pub theta: f64,
    pub utilities: Vec<f64>,
    pub gap: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwepReport {
    pub samples: Vec<EwepSample>,
}

impl EwepReport {
    pub fn satisfied_everywhere(&self) -> bool {
        self.samples.iter().all(|s| s.satisfied)
    }
}

/// For each common taste θ, the spread of realized utilities across agents.
pub fn check_ewep(pop: &Population, alloc: &Allocation, theta_samples: &[f64]) -> Result<EwepReport> {
    if theta_samples.is_empty() {
        return Err(Error::invalid("no theta samples"));
    }
    if alloc.records.len() != pop.len() {
        return Err(Error::invalid("allocation does not match population"));
    }
    let samples = theta_samples
        .iter()
        .map(|&theta| {
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::invalid(format!("theta = {theta} outside [0, 1]")));
            }
            let utilities: Vec<f64> = alloc.records.iter().map(|r| indirect_utility(r.wages, theta)).collect();
            let hi = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = utilities.iter().copied().fold(f64::INFINITY, f64::min);
            let gap = hi - lo;
            Ok(EwepSample { theta, utilities, gap, satisfied: gap <= EWEP_TOL })
        })
        .collect::<Result<_>>()?;
    Ok(EwepReport { samples })
}
