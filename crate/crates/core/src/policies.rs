//! The six education policies: {one school in `a`, one school in `b`, two
//! schools} × {resource equalization, expected-utility equalization}, each
//! spending an exact budget.
//!
//! Education only levels up: wages are `talent + expenditure` with
//! expenditure ≥ 0, so every target must weakly exceed what it replaces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freedom::{freedom_value, LevelCurve, QuadratureSpec, Sector, WagePair};
use crate::numeric::{bisect_increasing, compensated_sum};
use crate::population::{Population, TalentProfile};
use crate::preferences::TasteDensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    OneSchoolA,
    OneSchoolB,
    TwoSchool,
}

impl Structure {
    pub const ALL: [Structure; 3] = [Structure::OneSchoolA, Structure::OneSchoolB, Structure::TwoSchool];

    pub fn name(self) -> &'static str {
        match self {
            Structure::OneSchoolA => "one_school_a",
            Structure::OneSchoolB => "one_school_b",
            Structure::TwoSchool => "two_school",
        }
    }

    /// School attended by `agent` under this structure.
    pub fn school_for(self, agent: &TalentProfile) -> Sector {
        match self {
            Structure::OneSchoolA => Sector::A,
            Structure::OneSchoolB => Sector::B,
            Structure::TwoSchool => best_sector(agent),
        }
    }
}

impl std::str::FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Structure::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown policy structure {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    ResourceEq,
    UtilityEq,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::ResourceEq => "resource_eq",
            Objective::UtilityEq => "utility_eq",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resource_eq" => Ok(Objective::ResourceEq),
            "utility_eq" => Ok(Objective::UtilityEq),
            _ => Err(Error::invalid(format!("unknown objective {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub structure: Structure,
    pub objective: Objective,
    pub budget: f64,
}

impl PolicySpec {
    pub fn new(structure: Structure, objective: Objective, budget: f64) -> Result<Self> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::invalid(format!("budget {budget} must be > 0")));
        }
        Ok(PolicySpec { structure, objective, budget })
    }

    pub fn id(&self) -> String {
        format!("{}/{}", self.structure.name(), self.objective.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentAllocation {
    pub agent: usize,
    pub school: Option<Sector>,
    pub expenditure: f64,
    pub wages: WagePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub policy: PolicySpec,
    pub records: Vec<AgentAllocation>,
    /// Equalized wage (resource equalization) or utility level k* (utility equalization).
    pub level: f64,
    pub total_cost: f64,
}

/// Solver tolerances. `level` is budget-relative: the outer search stops
/// once `|cost − budget| ≤ level·(1 + budget)`. `wage` is the inner
/// level-curve tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub level: f64,
    pub wage: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { level: 1e-8, wage: 1e-10 }
    }
}

const MAX_OUTER: usize = 200;

/// Best-talent sector, ties to `a`.
pub fn best_sector(agent: &TalentProfile) -> Sector {
    if agent.t_a >= agent.t_b {
        Sector::A
    } else {
        Sector::B
    }
}

fn talent(agent: &TalentProfile, s: Sector) -> f64 {
    match s {
        Sector::A => agent.t_a,
        Sector::B => agent.t_b,
    }
}

fn talents(agent: &TalentProfile) -> WagePair {
    WagePair { w_a: agent.t_a, w_b: agent.t_b }
}

/// Additive technology: education adds to the taught sector's wage.
pub fn educated_wages(agent: &TalentProfile, school: Sector, expenditure: f64) -> WagePair {
    WagePair::with(school, talent(agent, school) + expenditure, talent(agent, school.other()))
}

fn check_budget(budget: f64, tol: f64) -> Result<()> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::invalid(format!("budget {budget} must be > 0")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be > 0")));
    }
    Ok(())
}

fn cost_of(pop: &Population, records: &[AgentAllocation]) -> f64 {
    compensated_sum(
        pop.agents()
            .iter()
            .zip(records)
            .map(|(a, r)| a.weight * r.expenditure),
    )
}

/// Budget needed just to bring every agent up to the best taught talent.
pub fn resource_threshold(pop: &Population, structure: Structure) -> f64 {
    let taught: Vec<f64> = pop
        .agents()
        .iter()
        .map(|a| talent(a, structure.school_for(a)))
        .collect();
    let top = taught.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    compensated_sum(pop.agents().iter().zip(&taught).map(|(a, t)| a.weight * (top - t)))
}

fn solve_resource(pop: &Population, structure: Structure, budget: f64, tol: f64) -> Result<Allocation> {
    check_budget(budget, tol)?;
    let taught: Vec<f64> = pop
        .agents()
        .iter()
        .map(|a| talent(a, structure.school_for(a)))
        .collect();
    let top = taught.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cost = |level: f64| {
        compensated_sum(pop.agents().iter().zip(&taught).map(|(a, t)| a.weight * (level - t)))
    };
    let threshold = cost(top);
    if budget < threshold {
        return Err(Error::InfeasibleBudget { budget, threshold });
    }
    let hi = top + budget / pop.total_mass();
    let root = bisect_increasing::<Error>(
        |w| Ok(cost(w)),
        budget,
        top,
        hi,
        0.0,
        tol * (1.0 + budget),
        MAX_OUTER,
    )?;
    let level = root.x;
    let records: Vec<AgentAllocation> = pop
        .agents()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let school = structure.school_for(a);
            let e = level - talent(a, school);
            AgentAllocation { agent: i, school: Some(school), expenditure: e, wages: educated_wages(a, school, e) }
        })
        .collect();
    let total_cost = cost_of(pop, &records);
    Ok(Allocation {
        policy: PolicySpec { structure, objective: Objective::ResourceEq, budget },
        records,
        level,
        total_cost,
    })
}

/// Levels every agent's wage in `sector` up to the budget-exhausting `w*`.
pub fn solve_resource_one_school(pop: &Population, sector: Sector, budget: f64, tol: f64) -> Result<Allocation> {
    let structure = match sector {
        Sector::A => Structure::OneSchoolA,
        Sector::B => Structure::OneSchoolB,
    };
    solve_resource(pop, structure, budget, tol)
}

/// Levels every agent's best-sector wage up to the budget-exhausting `w̃`.
pub fn solve_resource_two_school(pop: &Population, budget: f64, tol: f64) -> Result<Allocation> {
    solve_resource(pop, Structure::TwoSchool, budget, tol)
}

/// One agent's position along its education ray, with a cached bracket
/// on the solution from earlier outer iterations.
struct RayState<'a> {
    curve: LevelCurve<'a>,
    start: f64,
    status_quo: f64,
    /// (x, V(x)) with V(x) ≤ k for the current outer bracket's lower end.
    below: (f64, f64),
    /// (x, V(x)) with V(x) ≥ k for the outer bracket's upper end, if known.
    above: Option<(f64, f64)>,
    last: (f64, f64),
}

impl RayState<'_> {
    /// Wage needed in the taught sector to reach `k`; the status quo when
    /// the agent is already there.
    fn target(&mut self, k: f64, tol: f64) -> Result<(f64, f64)> {
        if self.status_quo >= k {
            self.last = (self.start, self.status_quo);
            return Ok(self.last);
        }
        let lo = if self.below.1 <= k { self.below.0 } else { self.start };
        let hi = match self.above {
            Some((x, v)) if v >= k && x >= lo => x,
            _ => {
                let mut hi = (2.0 * k).max(1.0).max(2.0 * lo);
                let mut v = self.curve.value(hi);
                while v < k {
                    hi *= 2.0;
                    if hi > 1152921504606846976.0 {
                        return Err(Error::NoConvergence(format!("level {k} not bracketed below 2^60")));
                    }
                    v = self.curve.value(hi);
                }
                hi
            }
        };
        let root = self.curve.solve(k, tol, Some((lo, hi)))?;
        self.last = (root.x, root.value);
        Ok(self.last)
    }
}

fn solve_utility(
    pop: &Population,
    structure: Structure,
    budget: f64,
    d: &TasteDensity,
    q: &QuadratureSpec,
    tol: Tolerances,
) -> Result<Allocation> {
    check_budget(budget, tol.level)?;
    d.validate()?;
    q.validate()?;
    let schools: Vec<Sector> = pop.agents().iter().map(|a| structure.school_for(a)).collect();
    let mut rays: Vec<RayState> = pop
        .agents()
        .iter()
        .zip(&schools)
        .map(|(a, &s)| {
            let curve = LevelCurve::new(talent(a, s.other()), s, d, q)?;
            let start = talent(a, s);
            let status_quo = freedom_value(talents(a), d, q);
            Ok(RayState {
                curve,
                start,
                status_quo,
                below: (start, status_quo),
                above: None,
                last: (start, status_quo),
            })
        })
        .collect::<Result<_>>()?;

    let weights: Vec<f64> = pop.agents().iter().map(|a| a.weight).collect();
    let cost = |rays: &mut [RayState], k: f64| -> Result<f64> {
        let spent: Vec<f64> = rays
            .par_iter_mut()
            .map(|r| r.target(k, tol.wage).map(|(x, _)| (x - r.start).max(0.0)))
            .collect::<Result<_>>()?;
        Ok(compensated_sum(weights.iter().zip(&spent).map(|(w, e)| w * e)))
    };

    let k_floor = rays.iter().map(|r| r.status_quo).fold(f64::NEG_INFINITY, f64::max);
    let floor_cost = cost(&mut rays, k_floor)?;
    let slack = tol.level * (1.0 + budget);
    if floor_cost > budget + slack {
        return Err(Error::InfeasibleBudget { budget, threshold: floor_cost });
    }
    let remember = |rays: &mut [RayState], upper: bool| {
        for r in rays.iter_mut() {
            if upper {
                r.above = Some(r.last);
            } else {
                r.below = r.last;
            }
        }
    };
    remember(&mut rays, false);

    let (mut k_lo, mut k_hi) = (k_floor, k_floor.abs().max(1e-3) * 2.0);
    let mut cost_hi = cost(&mut rays, k_hi)?;
    let mut grow = 0;
    while cost_hi < budget {
        remember(&mut rays, false);
        k_lo = k_hi;
        k_hi *= 2.0;
        cost_hi = cost(&mut rays, k_hi)?;
        grow += 1;
        if grow > 200 {
            return Err(Error::NoConvergence("utility level not bracketed".into()));
        }
    }
    remember(&mut rays, true);

    let mut best = (k_hi, cost_hi);
    if (floor_cost - budget).abs() <= slack {
        best = (k_floor, floor_cost);
    } else {
        for _ in 0..MAX_OUTER {
            if (best.1 - budget).abs() <= slack {
                break;
            }
            let mid = 0.5 * (k_lo + k_hi);
            if mid <= k_lo || mid >= k_hi {
                break;
            }
            let c = cost(&mut rays, mid)?;
            if (c - budget).abs() < (best.1 - budget).abs() {
                best = (mid, c);
            }
            if c < budget {
                k_lo = mid;
                remember(&mut rays, false);
            } else {
                k_hi = mid;
                remember(&mut rays, true);
            }
        }
    }
    let (level, _) = best;
    if (best.1 - budget).abs() > slack {
        return Err(Error::NoConvergence(format!(
            "utility level search ended with cost {} for budget {budget}",
            best.1
        )));
    }
    // final pass at the chosen level
    let mut records = Vec::with_capacity(pop.len());
    for (i, ((a, r), &s)) in pop.agents().iter().zip(rays.iter_mut()).zip(&schools).enumerate() {
        let (x, _) = r.target(level, tol.wage)?;
        let e = (x - r.start).max(0.0);
        records.push(AgentAllocation { agent: i, school: Some(s), expenditure: e, wages: educated_wages(a, s, e) });
    }
    let total_cost = cost_of(pop, &records);
    Ok(Allocation {
        policy: PolicySpec { structure, objective: Objective::UtilityEq, budget },
        records,
        level,
        total_cost,
    })
}

/// Lifts every agent, by education in `sector` only, to the highest common
/// level curve `V⁻¹(k*)` the budget affords.
pub fn solve_utility_one_school(
    pop: &Population,
    sector: Sector,
    budget: f64,
    d: &TasteDensity,
    q: &QuadratureSpec,
    tol: Tolerances,
) -> Result<Allocation> {
    let structure = match sector {
        Sector::A => Structure::OneSchoolA,
        Sector::B => Structure::OneSchoolB,
    };
    solve_utility(pop, structure, budget, d, q, tol)
}

/// As [`solve_utility_one_school`] but each agent is educated in their
/// best-talent sector.
pub fn solve_utility_two_school(
    pop: &Population,
    budget: f64,
    d: &TasteDensity,
    q: &QuadratureSpec,
    tol: Tolerances,
) -> Result<Allocation> {
    solve_utility(pop, Structure::TwoSchool, budget, d, q, tol)
}

/// Dispatches on `spec`.
pub fn solve(
    pop: &Population,
    spec: &PolicySpec,
    d: &TasteDensity,
    q: &QuadratureSpec,
    tol: Tolerances,
) -> Result<Allocation> {
    match spec.objective {
        Objective::ResourceEq => solve_resource(pop, spec.structure, spec.budget, tol.level),
        Objective::UtilityEq => solve_utility(pop, spec.structure, spec.budget, d, q, tol),
    }
}

/// Minimum budget at which the utility-equalization policy is feasible:
/// the cost of lifting everyone to the best status-quo value.
pub fn utility_threshold(
    pop: &Population,
    structure: Structure,
    d: &TasteDensity,
    q: &QuadratureSpec,
    tol: Tolerances,
) -> Result<f64> {
    let values: Vec<f64> = pop.agents().iter().map(|a| freedom_value(talents(a), d, q)).collect();
    let k = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = Vec::with_capacity(pop.len());
    for (a, &v) in pop.agents().iter().zip(&values) {
        if v >= k {
            total.push(0.0);
            continue;
        }
        let s = structure.school_for(a);
        let curve = LevelCurve::new(talent(a, s.other()), s, d, q)?;
        let start = talent(a, s);
        let mut hi = (2.0 * k).max(1.0).max(2.0 * start);
        while curve.value(hi) < k {
            hi *= 2.0;
            if hi > 1152921504606846976.0 {
                return Err(Error::NoConvergence(format!("level {k} not bracketed below 2^60")));
            }
        }
        let root = curve.solve(k, tol.wage, Some((start, hi)))?;
        total.push(a.weight * (root.x - start).max(0.0));
    }
    Ok(compensated_sum(total))
}

/// Leveling-up threshold of `structure` under `objective`.
pub fn threshold(
    pop: &Population,
    structure: Structure,
    objective: Objective,
    d: &TasteDensity,
    q: &QuadratureSpec,
    tol: Tolerances,
) -> Result<f64> {
    match objective {
        Objective::ResourceEq => Ok(resource_threshold(pop, structure)),
        Objective::UtilityEq => utility_threshold(pop, structure, d, q, tol),
    }
}

/// Σ weight·expenditure of `alloc` over `pop`.
pub fn policy_cost(alloc: &Allocation, pop: &Population) -> Result<f64> {
    if alloc.records.len() != pop.len() {
        return Err(Error::invalid(format!(
            "allocation has {} records for {} agents",
            alloc.records.len(),
            pop.len()
        )));
    }
    Ok(cost_of(pop, &alloc.records))
}
