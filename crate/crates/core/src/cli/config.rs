//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::freedom::QuadratureSpec;
use crate::policies::{Objective, Structure, Tolerances};
use crate::population::{load_population, simplex_population, Population};
use crate::preferences::{Family, TasteDensity};

/// Overrides `output.dir` when set.
pub const OUTPUT_DIR_ENV: &str = "PLURALISM_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    Compare,
    Verify,
    Theorems,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub population: PopulationSource,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub weights: WeightsSpec,
    #[serde(default)]
    pub figures: FiguresConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub theorems: TheoremsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSource {
    /// Number of agents on the built-in talent simplex.
    pub simplex: Option<usize>,
    /// CSV file of `t_a,t_b,weight` rows, relative to the config file.
    pub file: Option<PathBuf>,
}

impl Default for PopulationSource {
    fn default() -> Self {
        PopulationSource { simplex: Some(1001), file: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub family: Family,
    #[serde(default)]
    pub kappa: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig { family: Family::Uniform, kappa: 0.0 }
    }
}

impl DensityConfig {
    pub fn density(&self) -> TasteDensity {
        TasteDensity { family: self.family, kappa: self.kappa }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default = "all_structures")]
    pub structures: Vec<Structure>,
    pub objective: Objective,
    pub budget: f64,
}

fn all_structures() -> Vec<Structure> {
    Structure::ALL.to_vec()
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { structures: all_structures(), objective: Objective::ResourceEq, budget: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightsSpec {
    #[default]
    None,
    Equal,
    Explicit { values: Vec<f64> },
    Random { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiguresConfig {
    /// Wage pair whose opportunity frontier is drawn.
    #[serde(default = "default_frontier_wages")]
    pub frontier_wages: [f64; 2],
    #[serde(default = "default_points")]
    pub points: usize,
    /// Optional extra level curve through this wage pair.
    #[serde(default)]
    pub level_through: Option<[f64; 2]>,
}

fn default_frontier_wages() -> [f64; 2] {
    [4.0, 4.0]
}

fn default_points() -> usize {
    101
}

impl Default for FiguresConfig {
    fn default() -> Self {
        FiguresConfig { frontier_wages: default_frontier_wages(), points: default_points(), level_through: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Endogeneity strengths checked for the Beta family; Uniform is always checked.
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
}

fn default_trials() -> usize {
    5000
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_kappas() -> Vec<f64> {
    vec![1.0, 5.0]
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { trials: default_trials(), seeds: default_seeds(), kappas: default_kappas() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremsConfig {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_max_agents")]
    pub max_agents: usize,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    #[serde(default = "default_weight_vectors")]
    pub weight_vectors: usize,
}

fn default_instances() -> usize {
    100
}

fn default_seed() -> u64 {
    1
}

fn default_max_agents() -> usize {
    200
}

fn default_weight_vectors() -> usize {
    10
}

impl Default for TheoremsConfig {
    fn default() -> Self {
        TheoremsConfig {
            instances: default_instances(),
            seed: default_seed(),
            max_agents: default_max_agents(),
            kappas: default_kappas(),
            weight_vectors: default_weight_vectors(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("{key}: {msg}")]
    Invalid { key: String, msg: String },
    #[error(transparent)]
    Population(#[from] Error),
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), msg: msg.into() }
}

impl ExperimentConfig {
    /// Reads and validates a config file. Relative population paths are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { msg, .. } => ConfigError::Parse { path: path.display().to_string(), msg },
            other => other,
        })?;
        if let Some(file) = &cfg.population.file {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.population.file = Some(dir.join(file));
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: "<config>".into(), msg: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.population.simplex, &self.population.file) {
            (Some(_), Some(_)) => return Err(invalid("population", "give exactly one of `simplex` or `file`")),
            (None, None) => return Err(invalid("population", "give one of `simplex` or `file`")),
            (Some(n), None) if *n < 2 => return Err(invalid("population.simplex", format!("needs n >= 2, got {n}"))),
            _ => {}
        }
        if !(self.density.kappa.is_finite() && self.density.kappa >= 0.0) {
            return Err(invalid("density.kappa", "must be >= 0"));
        }
        if self.quadrature.nodes_per_piece < 2 {
            return Err(invalid("quadrature.nodes_per_piece", "must be >= 2"));
        }
        if !(self.tolerances.level > 0.0 && self.tolerances.wage > 0.0) {
            return Err(invalid("tolerances", "level and wage tolerances must be > 0"));
        }
        if !(self.policy.budget.is_finite() && self.policy.budget > 0.0) {
            return Err(invalid("policy.budget", format!("must be > 0, got {}", self.policy.budget)));
        }
        if self.policy.structures.is_empty() {
            return Err(invalid("policy.structures", "must not be empty"));
        }
        match &self.weights {
            WeightsSpec::Explicit { values } => {
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || values.iter().all(|v| *v == 0.0) {
                    return Err(invalid("weights.values", "must be nonnegative and not all zero"));
                }
            }
            WeightsSpec::Random { count, .. } if *count == 0 => {
                return Err(invalid("weights.count", "must be >= 1"));
            }
            _ => {}
        }
        if self.figures.points < 2 {
            return Err(invalid("figures.points", "must be >= 2"));
        }
        if self.verify.trials == 0 {
            return Err(invalid("verify.trials", "must be >= 1"));
        }
        if self.verify.seeds.is_empty() {
            return Err(invalid("verify.seeds", "must not be empty"));
        }
        if self.verify.kappas.iter().chain(&self.theorems.kappas).any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(invalid("kappas", "must be >= 0"));
        }
        if self.theorems.max_agents < 2 {
            return Err(invalid("theorems.max_agents", "must be >= 2"));
        }
        Ok(())
    }

    pub fn population(&self) -> Result<Population, ConfigError> {
        match (&self.population.simplex, &self.population.file) {
            (Some(n), None) => Ok(simplex_population(*n)?),
            (None, Some(f)) => Ok(load_population(f)?),
            _ => Err(invalid("population", "give exactly one of `simplex` or `file`")),
        }
    }

    /// Output directory, honoring the environment override.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output.dir.clone())
    }

    /// Weight vectors for `n` agents.
    pub fn weight_sets(&self, n: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
        use rand::SeedableRng;
        Ok(match &self.weights {
            WeightsSpec::None => Vec::new(),
            WeightsSpec::Equal => vec![vec![1.0; n]],
            WeightsSpec::Explicit { values } => {
                if values.len() != n {
                    return Err(invalid("weights.values", format!("{} values for {n} agents", values.len())));
                }
                vec![values.clone()]
            }
            WeightsSpec::Random { count, seed } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                crate::harness::random_weights(&mut rng, *count, n)
            }
        })
    }
}
