//! Config-driven runs: policy comparisons, certificate batteries, the
//! randomized dominance harness, and figure data.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::Error;
use crate::freedom::{level_curve_points, WagePair};
use crate::harness::{run_harness, HarnessConfig};
use crate::policies::{solve, Allocation, Objective, PolicySpec, Structure};
use crate::population::{is_pluralistic, Population};
use crate::preferences::TasteDensity;
use crate::verify::{certify, cross_check_quasiconvexity, CrossCheck, Property, PropertyCertificate, Sample};
use crate::welfare::{compare_structures, evaluate_welfare, PairVerdict, WeightedVerdict};

pub use config::{ConfigError, Experiment, ExperimentConfig};

pub const REPORT_SCHEMA: &str = "pluralism.run.v1";

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
}

const REPORTED_VIOLATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationSummary {
    pub agents: usize,
    pub total_mass: f64,
    pub pluralistic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySummary {
    pub policy: String,
    pub structure: Structure,
    pub objective: Objective,
    pub budget: f64,
    /// `ok`, `infeasible` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub level: Option<f64>,
    pub total_cost: Option<f64>,
    pub min_expenditure: Option<f64>,
    pub max_expenditure: Option<f64>,
    pub maximin: Option<f64>,
    pub minimizer: Option<usize>,
    pub weighted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub objective: Objective,
    pub budget: f64,
    pub maximin: Vec<PairVerdict>,
    pub weighted: Vec<WeightedVerdict>,
    pub levels: Vec<PairVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub property: Property,
    pub density: TasteDensity,
    pub seed: u64,
    pub trials: usize,
    pub skipped: usize,
    pub violation_count: usize,
    pub worst_slack: f64,
    pub passed: bool,
    /// The first few violations, by trial index.
    pub violations: Vec<Sample>,
}

impl From<&PropertyCertificate> for CertificateSummary {
    fn from(c: &PropertyCertificate) -> Self {
        CertificateSummary {
            property: c.property,
            density: c.density,
            seed: c.seed,
            trials: c.trials,
            skipped: c.skipped,
            violation_count: c.violations.len(),
            worst_slack: c.worst_slack,
            passed: c.passed,
            violations: c.violations.iter().take(REPORTED_VIOLATIONS).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceFailure {
    pub instance: usize,
    pub density: TasteDensity,
    pub check: String,
    pub one_school: Structure,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceSummary {
    pub instances: usize,
    pub densities: Vec<TasteDensity>,
    pub maximin_resource: [usize; 2],
    pub maximin_utility: [usize; 2],
    pub weighted_utility: [usize; 2],
    pub level_dominance: [usize; 2],
    pub failures: Vec<DominanceFailure>,
    pub solver_errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub generated_at_unix: u64,
    pub version: &'static str,
}

/// Run report. Every key is always present; absent values are `null` or `[]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub name: String,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub population: Option<PopulationSummary>,
    pub policies: Vec<PolicySummary>,
    pub comparison: Option<ComparisonSummary>,
    pub certificates: Vec<CertificateSummary>,
    pub cross_checks: Vec<CrossCheck>,
    pub theorems: Option<DominanceSummary>,
    /// `ok`, `infeasible`, `failed` or `violations`.
    pub status: String,
    pub exit_code: i32,
    pub metadata: Metadata,
}

impl RunReport {
    fn new(cfg: &ExperimentConfig) -> Self {
        RunReport {
            schema: REPORT_SCHEMA,
            name: cfg.name.clone(),
            experiment: cfg.experiment,
            config: cfg.clone(),
            population: None,
            policies: Vec::new(),
            comparison: None,
            certificates: Vec::new(),
            cross_checks: Vec::new(),
            theorems: None,
            status: "ok".into(),
            exit_code: exit::OK,
            metadata: Metadata {
                generated_at_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
                version: env!("CARGO_PKG_VERSION"),
            },
        }
    }

    fn finish(&mut self, status: &str, code: i32) {
        self.status = status.into();
        self.exit_code = code;
    }

    /// Serialized report, pretty-printed.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn summarize(
    structure: Structure,
    objective: Objective,
    budget: f64,
    solved: &std::result::Result<Allocation, Error>,
    welfare: Option<&crate::welfare::WelfareReport>,
    weighted: Vec<f64>,
) -> PolicySummary {
    let id = format!("{}/{}", structure.name(), objective.name());
    match solved {
        Ok(a) => {
            let e = a.records.iter().map(|r| r.expenditure);
            PolicySummary {
                policy: id,
                structure,
                objective,
                budget,
                status: "ok".into(),
                error: None,
                level: Some(a.level),
                total_cost: Some(a.total_cost),
                min_expenditure: e.clone().reduce(f64::min),
                max_expenditure: e.reduce(f64::max),
                maximin: welfare.map(|w| w.maximin),
                minimizer: welfare.map(|w| w.minimizer),
                weighted,
            }
        }
        Err(err) => PolicySummary {
            policy: id,
            structure,
            objective,
            budget,
            status: if matches!(err, Error::InfeasibleBudget { .. }) { "infeasible" } else { "failed" }.into(),
            error: Some(err.to_string()),
            level: None,
            total_cost: None,
            min_expenditure: None,
            max_expenditure: None,
            maximin: None,
            minimizer: None,
            weighted: Vec::new(),
        },
    }
}

fn run_compare(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<(), CliError> {
    let pop = cfg.population()?;
    report.population = Some(PopulationSummary {
        agents: pop.len(),
        total_mass: pop.total_mass(),
        pluralistic: is_pluralistic(&pop),
    });
    let d = cfg.density.density();
    let q = cfg.quadrature;
    let tol = cfg.tolerances;
    let objective = cfg.policy.objective;
    let budget = cfg.policy.budget;
    let weights = cfg.weight_sets(pop.len())?;

    let mut solved: Vec<(Structure, std::result::Result<Allocation, Error>)> = Vec::new();
    let full = Structure::ALL.iter().all(|s| cfg.policy.structures.contains(s));
    if full {
        let c = compare_structures(&pop, objective, budget, &d, &q, &weights, tol)?;
        for o in &c.outcomes {
            let r = match (&o.allocation, &o.failure) {
                (Some(a), _) => Ok(a.clone()),
                (None, Some(e)) => Err(e.clone()),
                (None, None) => unreachable!("outcome has neither allocation nor error"),
            };
            solved.push((o.structure, r));
        }
        report.comparison = Some(ComparisonSummary {
            objective,
            budget,
            maximin: c.maximin,
            weighted: c.weighted,
            levels: c.levels,
        });
    } else {
        for &s in &cfg.policy.structures {
            solved.push((s, solve(&pop, &PolicySpec::new(s, objective, budget)?, &d, &q, tol)));
        }
    }

    let mut infeasible = false;
    let mut failed = false;
    for (s, r) in &solved {
        let welfare = match r {
            Ok(a) => Some(evaluate_welfare(&pop, a, &d, &q, None)?),
            Err(Error::InfeasibleBudget { .. }) => {
                infeasible = true;
                None
            }
            Err(_) => {
                failed = true;
                None
            }
        };
        let weighted = match &welfare {
            Some(w) => weights
                .iter()
                .map(|l| crate::welfare::weighted_welfare(&pop, &w.values, l))
                .collect::<Result<_, _>>()?,
            None => Vec::new(),
        };
        report.policies.push(summarize(*s, objective, budget, r, welfare.as_ref(), weighted));
    }
    if failed {
        report.finish("failed", exit::FAILURE);
    } else if infeasible {
        report.finish("infeasible", exit::INFEASIBLE);
    }
    Ok(())
}

/// Uniform plus one Beta density per `kappa`.
fn densities(kappas: &[f64]) -> Vec<TasteDensity> {
    std::iter::once(TasteDensity::uniform())
        .chain(kappas.iter().map(|&k| TasteDensity { family: crate::Family::EndogenousBeta, kappa: k }))
        .collect()
}

fn run_verify(cfg: &ExperimentConfig, report: &mut RunReport) {
    let q = cfg.quadrature;
    for d in densities(&cfg.verify.kappas) {
        for &seed in &cfg.verify.seeds {
            for p in Property::ALL {
                report.certificates.push(CertificateSummary::from(&certify(p, &d, &q, cfg.verify.trials, seed)));
            }
            report.cross_checks.push(cross_check_quasiconvexity(&d, &q, cfg.verify.trials, seed));
        }
    }
    let ok = report.certificates.iter().all(|c| c.passed) && report.cross_checks.iter().all(|c| c.consistent());
    if !ok {
        report.finish("violations", exit::FAILURE);
    }
}

fn run_theorems(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<(), CliError> {
    let t = &cfg.theorems;
    let hc = HarnessConfig {
        instances: t.instances,
        seed: t.seed,
        max_agents: t.max_agents,
        densities: densities(&t.kappas),
        weight_vectors: t.weight_vectors,
        budget_multiplier: (1.05, 3.0),
        quadrature: cfg.quadrature,
        tolerances: cfg.tolerances,
    };
    let r = run_harness(&hc)?;
    let pair = |t: crate::harness::Tally| [t.passed, t.total];
    let mut failures = Vec::new();
    for o in &r.outcomes {
        let mut push = |check: &str, p: &PairVerdict| {
            failures.push(DominanceFailure {
                instance: o.index,
                density: o.density,
                check: check.into(),
                one_school: p.one_school,
                margin: p.margin,
            })
        };
        for p in o.resource.maximin.iter().filter(|p| !p.verdict.holds()) {
            push("maximin_resource", p);
        }
        for p in o.utility.maximin.iter().filter(|p| !p.verdict.holds()) {
            push("maximin_utility", p);
        }
        for p in o.utility.weighted.iter().flat_map(|w| &w.pairs).filter(|p| !p.verdict.holds()) {
            push("weighted_utility", p);
        }
        for p in o.resource.levels.iter().filter(|p| p.margin < -crate::harness::LEVEL_MARGIN_TOL) {
            push("level_dominance", p);
        }
    }
    let summary = DominanceSummary {
        instances: t.instances,
        densities: hc.densities.clone(),
        maximin_resource: pair(r.maximin_tally(Objective::ResourceEq)),
        maximin_utility: pair(r.maximin_tally(Objective::UtilityEq)),
        weighted_utility: pair(r.weighted_tally()),
        level_dominance: pair(r.level_tally()),
        failures,
        solver_errors: r.solver_failures(),
    };
    let ok = summary.failures.is_empty()
        && summary.solver_errors.is_empty()
        && [summary.maximin_resource, summary.maximin_utility, summary.weighted_utility, summary.level_dominance]
            .iter()
            .all(|[p, t]| p == t);
    report.theorems = Some(summary);
    if !ok {
        report.finish("violations", exit::FAILURE);
    }
    Ok(())
}

/// Executes `cfg` and returns the report; nothing is written.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let mut report = RunReport::new(cfg);
    match cfg.experiment {
        Experiment::Compare => run_compare(cfg, &mut report)?,
        Experiment::Verify => run_verify(cfg, &mut report),
        Experiment::Theorems => run_theorems(cfg, &mut report)?,
    }
    Ok(report)
}

/// Executes `cfg` and writes `<name>.json` to the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<(RunReport, PathBuf), CliError> {
    let report = execute(cfg)?;
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let path = dir.join(format!("{}.json", cfg.name));
    fs::write(&path, report.to_json() + "\n").map_err(io_err(&path))?;
    Ok((report, path))
}

/// A row of figure data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRow {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

impl FigureRow {
    fn new(series: impl Into<String>, x: f64, y: f64) -> Self {
        FigureRow { series: series.into(), x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    /// Opportunity frontier `l_a/w_a + l_b/w_b = 1`; x = l_a, y = l_b.
    pub opportunity_sets: Vec<FigureRow>,
    /// Talents and the achieved wages of each resource-equalization policy.
    pub resource_policies: Vec<FigureRow>,
    /// Level curves `V⁻¹(k*)` and achieved wages of each utility-equalization policy.
    pub utility_policies: Vec<FigureRow>,
}

fn wage_rows(series: &str, wages: impl Iterator<Item = WagePair>) -> impl Iterator<Item = FigureRow> {
    let series = series.to_string();
    wages.map(move |w| FigureRow::new(series.clone(), w.w_a, w.w_b))
}

/// Computes the three figure data sets for `cfg`'s population, density and budget.
pub fn figure_data(cfg: &ExperimentConfig) -> Result<FigureData, CliError> {
    let pop: Population = cfg.population()?;
    let d = cfg.density.density();
    let q = cfg.quadrature;
    let tol = cfg.tolerances;
    let budget = cfg.policy.budget;
    let [fa, fb] = cfg.figures.frontier_wages;
    let frontier = WagePair::new(fa, fb)?;
    let opportunity_sets = frontier
        .frontier(cfg.figures.points)
        .into_iter()
        .map(|(la, lb)| FigureRow::new("frontier", la, lb))
        .collect();

    let talents = || pop.agents().iter().map(|a| WagePair { w_a: a.t_a, w_b: a.t_b });
    let mut resource_policies: Vec<FigureRow> = wage_rows("talents", talents()).collect();
    let mut utility_policies: Vec<FigureRow> = wage_rows("talents", talents()).collect();
    for &s in &cfg.policy.structures {
        if let Ok(a) = solve(&pop, &PolicySpec::new(s, Objective::ResourceEq, budget)?, &d, &q, tol) {
            resource_policies.extend(wage_rows(s.name(), a.records.iter().map(|r| r.wages)));
        }
        if let Ok(a) = solve(&pop, &PolicySpec::new(s, Objective::UtilityEq, budget)?, &d, &q, tol) {
            let curve = level_curve_points(a.level, &d, &q, cfg.figures.points, tol.wage)?;
            utility_policies.extend(wage_rows(&format!("level_{}", s.name()), curve.into_iter()));
            utility_policies.extend(wage_rows(&format!("target_{}", s.name()), a.records.iter().map(|r| r.wages)));
        }
    }
    if let Some([a, b]) = cfg.figures.level_through {
        let k = crate::freedom::freedom_value(WagePair::new(a, b)?, &d, &q);
        let curve = level_curve_points(k, &d, &q, cfg.figures.points, tol.wage)?;
        utility_policies.extend(wage_rows("level_through", curve.into_iter()));
    }
    Ok(FigureData { opportunity_sets, resource_policies, utility_policies })
}

fn write_csv(path: &Path, rows: &[FigureRow]) -> Result<(), CliError> {
    let csv_err = |source| CliError::Csv { path: path.display().to_string(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes `<name>_figure{1,2,3}.csv` to the output directory.
pub fn emit_figure_data(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let data = figure_data(cfg)?;
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut written = Vec::new();
    for (i, rows) in [&data.opportunity_sets, &data.resource_policies, &data.utility_policies].into_iter().enumerate() {
        let path = dir.join(format!("{}_figure{}.csv", cfg.name, i + 1));
        write_csv(&path, rows)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn compare_reports_levels() {
        let c = cfg("[population]\nsimplex = 201\n[policy]\nobjective = \"resource_eq\"\nbudget = 0.5\n");
        let r = execute(&c).unwrap();
        assert_eq!(r.exit_code, exit::OK);
        let level = |s: Structure| r.policies.iter().find(|p| p.structure == s).unwrap().level.unwrap();
        assert!((level(Structure::OneSchoolA) - 1.0).abs() < 1e-6);
        assert!((level(Structure::TwoSchool) - 1.25).abs() < 1e-6);
        assert_eq!(r.comparison.as_ref().unwrap().maximin.len(), 2);
    }

    #[test]
    fn infeasible_budget_exit_code() {
        let c = cfg("[population]\nsimplex = 3\n[policy]\nobjective = \"resource_eq\"\nbudget = 0.1\n");
        let r = execute(&c).unwrap();
        assert_eq!(r.exit_code, exit::INFEASIBLE);
        assert_eq!(r.status, "infeasible");
        assert!(r.policies.iter().any(|p| p.status == "infeasible" && p.error.is_some()));
    }

    #[test]
    fn subset_of_structures() {
        let c = cfg("[population]\nsimplex = 11\n[policy]\nstructures = [\"two_school\"]\nobjective = \"utility_eq\"\nbudget = 0.3\n");
        let r = execute(&c).unwrap();
        assert_eq!(r.policies.len(), 1);
        assert!(r.comparison.is_none());
    }

    #[test]
    fn figure_data_examples() {
        let c = cfg("[population]\nsimplex = 101\n[policy]\nobjective = \"resource_eq\"\nbudget = 0.5\n[figures]\nfrontier_wages = [4.0, 4.0]\npoints = 21\nlevel_through = [1.0, 1.0]\n");
        let f = figure_data(&c).unwrap();
        let has = |x: f64, y: f64| f.opportunity_sets.iter().any(|r| r.x == x && r.y == y);
        assert!(has(4.0, 0.0) && has(0.0, 4.0));
        let two: Vec<_> = f.resource_policies.iter().filter(|r| r.series == "two_school").collect();
        assert_eq!(two.len(), 101);
        for r in two {
            assert!((r.x.max(r.y) - 1.25).abs() < 1e-6);
        }
        let u = TasteDensity::uniform();
        let through: Vec<_> = f.utility_policies.iter().filter(|r| r.series == "level_through").collect();
        assert_eq!(through.len(), 21);
        for r in through {
            let v = crate::freedom::freedom_value(WagePair { w_a: r.x, w_b: r.y }, &u, &c.quadrature);
            assert!((v - 0.75).abs() < 1e-8);
        }
    }
}
