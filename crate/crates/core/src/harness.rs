//! Randomized dominance harness: pluralistic random populations, feasible
//! random budgets, and the two-school vs one-school comparisons under both
//! objectives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::freedom::QuadratureSpec;
use crate::policies::{threshold, Objective, Structure, Tolerances};
use crate::population::{is_pluralistic, Population, TalentProfile};
use crate::preferences::TasteDensity;
use crate::welfare::{compare_structures, ComparisonVerdict};

/// Lowest accepted two-school minus one-school resource level.
pub const LEVEL_MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub instances: usize,
    pub seed: u64,
    pub max_agents: usize,
    pub densities: Vec<TasteDensity>,
    pub weight_vectors: usize,
    pub budget_multiplier: (f64, f64),
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            instances: 100,
            seed: 1,
            max_agents: 200,
            densities: vec![
                TasteDensity::uniform(),
                TasteDensity { family: crate::Family::EndogenousBeta, kappa: 1.0 },
                TasteDensity { family: crate::Family::EndogenousBeta, kappa: 5.0 },
            ],
            weight_vectors: 10,
            budget_multiplier: (1.05, 3.0),
            quadrature: QuadratureSpec::default(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Talents i.i.d. uniform on [0, 1]², equal weights `1/n`, redrawn until
/// the population is pluralistic.
pub fn random_pluralistic_population(rng: &mut impl Rng, n: usize) -> Population {
    let n = n.max(2);
    loop {
        let agents: Vec<TalentProfile> = (0..n)
            .map(|_| TalentProfile { t_a: rng.gen::<f64>(), t_b: rng.gen::<f64>(), weight: 1.0 / n as f64 })
            .collect();
        let pop = Population::new(agents).expect("generated talents are valid");
        if is_pluralistic(&pop) {
            return pop;
        }
    }
}

/// `count` weight vectors with entries uniform on [0, 1].
pub fn random_weights(rng: &mut impl Rng, count: usize, n: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| loop {
            let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            if w.iter().any(|&x| x > 0.0) {
                break w;
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub index: usize,
    pub agents: usize,
    pub density: TasteDensity,
    /// Leveling-up threshold of the most expensive structure.
    pub threshold: f64,
    pub budget: f64,
    pub resource: ComparisonVerdict,
    pub utility: ComparisonVerdict,
}

impl InstanceOutcome {
    pub fn solved(&self) -> bool {
        self.resource.failures().count() == 0 && self.utility.failures().count() == 0
    }

    pub fn maximin_holds(&self, objective: Objective) -> bool {
        let c = match objective {
            Objective::ResourceEq => &self.resource,
            Objective::UtilityEq => &self.utility,
        };
        c.maximin.len() == 2 && c.maximin_holds()
    }

    pub fn weighted_holds(&self) -> bool {
        !self.utility.weighted.is_empty() && self.utility.weighted_holds()
    }

    pub fn levels_hold(&self) -> bool {
        self.resource.levels.len() == 2 && self.resource.levels.iter().all(|p| p.margin >= -LEVEL_MARGIN_TOL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub config: HarnessConfig,
    pub outcomes: Vec<InstanceOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub passed: usize,
    pub total: usize,
}

impl Tally {
    pub fn all(&self) -> bool {
        self.passed == self.total
    }
}

impl HarnessReport {
    fn tally(&self, f: impl Fn(&InstanceOutcome) -> bool) -> Tally {
        Tally { passed: self.outcomes.iter().filter(|o| f(o)).count(), total: self.outcomes.len() }
    }

    pub fn maximin_tally(&self, objective: Objective) -> Tally {
        self.tally(|o| o.maximin_holds(objective))
    }

    /// One comparison per (instance, weight vector, one-school structure);
    /// comparisons missing because a solve failed count as not passed.
    pub fn weighted_tally(&self) -> Tally {
        let total = self.outcomes.len() * self.config.weight_vectors * 2;
        let passed = self
            .outcomes
            .iter()
            .flat_map(|o| o.utility.weighted.iter().flat_map(|w| &w.pairs))
            .filter(|p| p.verdict.holds())
            .count();
        Tally { passed, total }
    }

    pub fn level_tally(&self) -> Tally {
        self.tally(|o| o.levels_hold())
    }

    pub fn solver_failures(&self) -> Vec<String> {
        self.outcomes
            .iter()
            .flat_map(|o| {
                o.resource
                    .outcomes
                    .iter()
                    .chain(&o.utility.outcomes)
                    .filter_map(move |s| s.error.as_ref().map(|e| format!("instance {} ({:?} κ={}): {e}", o.index, o.density.family, o.density.kappa)))
            })
            .collect()
    }
}

/// Runs one instance: population `index` of the stream, evaluated under `density`.
pub fn run_instance(cfg: &HarnessConfig, index: usize, density: &TasteDensity) -> Result<InstanceOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let n = rng.gen_range(2..=cfg.max_agents.max(2));
    let pop = random_pluralistic_population(&mut rng, n);
    let (lo, hi) = cfg.budget_multiplier;
    let multiplier = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let weights = random_weights(&mut rng, cfg.weight_vectors, pop.len());

    let q = &cfg.quadrature;
    let tol = cfg.tolerances;
    let mut worst = 0.0f64;
    for objective in [Objective::ResourceEq, Objective::UtilityEq] {
        for s in Structure::ALL {
            worst = worst.max(threshold(&pop, s, objective, density, q, tol)?);
        }
    }
    let budget = worst.max(1e-6) * multiplier;
    let resource = compare_structures(&pop, Objective::ResourceEq, budget, density, q, &[], tol)?;
    let utility = compare_structures(&pop, Objective::UtilityEq, budget, density, q, &weights, tol)?;
    Ok(InstanceOutcome { index, agents: pop.len(), density: *density, threshold: worst, budget, resource, utility })
}

/// Every instance under every density, in parallel; results ordered by
/// (density, instance).
pub fn run_harness(cfg: &HarnessConfig) -> Result<HarnessReport> {
    let jobs: Vec<(usize, TasteDensity)> = cfg
        .densities
        .iter()
        .flat_map(|d| (0..cfg.instances).map(move |i| (i, *d)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|(i, d)| run_instance(cfg, *i, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(HarnessReport { config: cfg.clone(), outcomes })
}
