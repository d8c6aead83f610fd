//! Finite weighted stand-ins for a continuum of agents.
//!
//! Every per-capita quantity in the model is a weight-average over
//! [`Population::agents`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TalentProfile {
    pub t_a: f64,
    pub t_b: f64,
    pub weight: f64,
}

impl TalentProfile {
    pub fn new(t_a: f64, t_b: f64, weight: f64) -> Result<Self> {
        let p = TalentProfile { t_a, t_b, weight };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.t_a.is_finite() && self.t_a >= 0.0) {
            return Err(Error::invalid(format!("talent t_a = {} must be >= 0", self.t_a)));
        }
        if !(self.t_b.is_finite() && self.t_b >= 0.0) {
            return Err(Error::invalid(format!("talent t_b = {} must be >= 0", self.t_b)));
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(Error::invalid(format!("weight = {} must be > 0", self.weight)));
        }
        Ok(())
    }

    /// The larger of the two talents.
    pub fn best_talent(&self) -> f64 {
        self.t_a.max(self.t_b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Population {
    agents: Vec<TalentProfile>,
    total_mass: f64,
}

impl Population {
    pub fn new(agents: Vec<TalentProfile>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::invalid("empty population"));
        }
        for a in &agents {
            a.check()?;
        }
        let total_mass = compensated_sum(agents.iter().map(|a| a.weight));
        Ok(Population { agents, total_mass })
    }

    /// Builds from `(t_a, t_b, weight)` triples.
    pub fn from_triples(rows: &[(f64, f64, f64)]) -> Result<Self> {
        Population::new(
            rows.iter()
                .map(|&(t_a, t_b, weight)| TalentProfile { t_a, t_b, weight })
                .collect(),
        )
    }

    pub fn agents(&self) -> &[TalentProfile] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Weight-average of `f` over agents.
    pub fn mean_of(&self, f: impl Fn(&TalentProfile) -> f64) -> f64 {
        compensated_sum(self.agents.iter().map(|a| a.weight * f(a))) / self.total_mass
    }

    /// Same agents in a different order. `order` must be a permutation of `0..len`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        for &i in order {
            if i >= self.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid("order is not a permutation"));
            }
        }
        if order.len() != self.len() {
            return Err(Error::invalid("order is not a permutation"));
        }
        Population::new(order.iter().map(|&i| self.agents[i]).collect())
    }
}

/// True iff some agent is strictly better at `a` and another strictly better at `b`.
pub fn is_pluralistic(pop: &Population) -> bool {
    let a_side = pop.agents.iter().any(|p| p.t_a > p.t_b);
    let b_side = pop.agents.iter().any(|p| p.t_b > p.t_a);
    a_side && b_side
}

/// `n` equally spaced agents on the talent simplex `t_a + t_b = 1`, with
/// trapezoid weights normalized to unit mass.
pub fn simplex_population(n: usize) -> Result<Population> {
    if n < 2 {
        return Err(Error::invalid(format!("simplex population needs n >= 2, got {n}")));
    }
    let h = 1.0 / (n - 1) as f64;
    let agents = (0..n)
        .map(|i| {
            let t_a = if i == n - 1 { 1.0 } else { i as f64 * h };
            let weight = if i == 0 || i == n - 1 { 0.5 * h } else { h };
            TalentProfile { t_a, t_b: 1.0 - t_a, weight }
        })
        .collect();
    Population::new(agents)
}

/// Reads a population CSV: rows `t_a,t_b,weight`, optional header, `#` comments.
pub fn load_population(path: impl AsRef<Path>) -> Result<Population> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::PopulationFile {
        path: shown.clone(),
        msg: e.to_string(),
    })?;
    parse_population(&text, &shown)
}

/// Parses CSV text in the population file format. `source` names the input in errors.
pub fn parse_population(text: &str, source: &str) -> Result<Population> {
    let row_err = |row: usize, msg: String| Error::PopulationRow {
        path: source.to_string(),
        row,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut agents = Vec::new();
    let mut data_row = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| Error::PopulationFile {
            path: source.to_string(),
            msg: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        data_row += 1;
        let fields: Vec<&str> = record.iter().collect();
        let first_is_text = fields
            .first()
            .map(|f| f.parse::<f64>().is_err())
            .unwrap_or(false);
        if data_row == 1 && agents.is_empty() && first_is_text {
            // header line
            data_row = 0;
            continue;
        }
        if fields.len() != 3 {
            return Err(row_err(data_row, format!("expected 3 fields, found {}", fields.len())));
        }
        let mut vals = [0.0f64; 3];
        for (slot, (name, raw)) in vals.iter_mut().zip(["t_a", "t_b", "weight"].iter().zip(&fields)) {
            *slot = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| row_err(data_row, format!("{name}: not a decimal number: {raw:?}")))?;
        }
        let [t_a, t_b, weight] = vals;
        if t_a < 0.0 {
            return Err(row_err(data_row, format!("negative talent t_a = {t_a}")));
        }
        if t_b < 0.0 {
            return Err(row_err(data_row, format!("negative talent t_b = {t_b}")));
        }
        if weight <= 0.0 {
            return Err(row_err(data_row, format!("nonpositive weight {weight}")));
        }
        agents.push(TalentProfile { t_a, t_b, weight });
    }
    if agents.is_empty() {
        return Err(Error::PopulationFile {
            path: source.to_string(),
            msg: "empty population".into(),
        });
    }
    Population::new(agents)
}
