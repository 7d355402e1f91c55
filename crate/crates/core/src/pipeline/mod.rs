//! Benchmark construction and similarity-driven model selection: the
//! performance benchmark database (PBD), case dispatch for incoming data,
//! top-3 transfer, baselines and overhead accounting.

mod pbd;
mod run;
pub mod scenario;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use pbd::{
    build_pbd, GridConfig, Pbd, PbdConfig, PbdDataset, PerformanceRecord, RecordTable, PBD_FILE, SCHEMA_VERSION,
};
pub use run::{
    eval_baselines, evaluate_model, evaluate_zoo, patterned_replica, run_pipeline, select, Arrival, BaselineReport,
    Condition, GroupPrediction, ModelMetric, OverheadReport, RunConfig, Selection, SelectionResult, Vote, ZooRun,
};

use crate::error::{Error, Result};
use crate::models::Architecture;
use crate::rng;

pub const RANDOM_DRAWS: usize = 1000;

/// Caps worker threads for PBD construction and similarity sweeps. Only the
/// first call in a process takes effect.
pub fn configure_jobs(jobs: usize) -> Result<()> {
    if jobs == 0 {
        return Err(Error::InvalidSpec("jobs must be positive".into()));
    }
    // a pool that already exists keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    Ok(())
}

/// Direction of the per-model metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Clean accuracy, higher is better.
    Accuracy,
    /// Attack success rate, lower is better.
    Asr,
}

impl Objective {
    /// Strictly better.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Objective::Accuracy => a > b,
            Objective::Asr => a < b,
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" => Ok(Objective::Accuracy),
            "asr" => Ok(Objective::Asr),
            other => Err(Error::InvalidSpec(format!("unknown objective `{other}`"))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Accuracy => "accuracy",
            Objective::Asr => "asr",
        })
    }
}

/// A model's ranking key and F1 tie-breaker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: Architecture,
    pub score: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub models: Vec<ModelScore>,
    /// Fewer than three models were available.
    pub warning: bool,
}

/// Best three models by `score` in the objective's direction; ties by F1
/// descending, then by zoo order.
pub fn top3(rows: &[ModelScore], objective: Objective) -> Result<Ranking> {
    if rows.is_empty() {
        return Err(Error::contract("pipeline", "no model rows to rank"));
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| {
        let primary = match objective {
            Objective::Accuracy => b.score.total_cmp(&a.score),
            Objective::Asr => a.score.total_cmp(&b.score),
        };
        primary.then(b.f1.total_cmp(&a.f1)).then(a.model.cmp(&b.model))
    });
    sorted.truncate(3);
    Ok(Ranking {
        warning: sorted.len() < 3,
        models: sorted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub oracle: f64,
    pub random_mean: f64,
    pub worst: f64,
}

/// Oracle (best), mean of `draws` seeded uniform model picks, and worst.
pub fn baselines(metrics: &[f64], objective: Objective, draws: usize, seed: u64) -> Result<Baselines> {
    if metrics.is_empty() {
        return Err(Error::contract("pipeline", "no zoo metrics for baselines"));
    }
    if draws == 0 {
        return Err(Error::InvalidSpec("random baseline needs at least one draw".into()));
    }
    let mut oracle = metrics[0];
    let mut worst = metrics[0];
    for &m in &metrics[1..] {
        if objective.better(m, oracle) {
            oracle = m;
        }
        if objective.better(worst, m) {
            worst = m;
        }
    }
    let mut r = rng::rng(rng::derive(seed, &[rng::tag("random-baseline")]));
    let mut counts = vec![0usize; metrics.len()];
    for _ in 0..draws {
        counts[r.random_range(0..metrics.len())] += 1;
    }
    // Weighted by pick frequency so a one-model zoo returns its metric exactly.
    let random_mean = counts
        .iter()
        .zip(metrics)
        .map(|(&c, &m)| c as f64 / draws as f64 * m)
        .sum();
    Ok(Baselines {
        oracle,
        random_mean,
        worst,
    })
}

/// `100 (1 - relate / oracle)`.
pub fn overhead_reduction(relate_seconds: f64, oracle_seconds: f64) -> Result<f64> {
    if !(oracle_seconds > 0.0) {
        return Err(Error::contract("pipeline", "oracle time must be positive"));
    }
    Ok(100.0 * (1.0 - relate_seconds / oracle_seconds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Architecture::*;

    fn s(model: Architecture, score: f64, f1: f64) -> ModelScore {
        ModelScore { model, score, f1 }
    }

    #[test]
    fn top3_examples() {
        let rows = [
            s(Linear, 0.9, 0.0),
            s(Mlp, 0.8, 0.0),
            s(FcnS, 0.7, 0.0),
            s(FcnL, 0.6, 0.0),
        ];
        let r = top3(&rows, Objective::Accuracy).unwrap();
        assert_eq!(
            r.models.iter().map(|m| m.model).collect::<Vec<_>>(),
            [Linear, Mlp, FcnS]
        );
        assert!(!r.warning);

        let rows = [
            s(Linear, 0.1, 0.5),
            s(Mlp, 0.2, 0.5),
            s(FcnS, 0.2, 0.9),
            s(FcnL, 0.2, 0.8),
        ];
        let r = top3(&rows, Objective::Asr).unwrap();
        assert_eq!(
            r.models.iter().map(|m| m.model).collect::<Vec<_>>(),
            [Linear, FcnS, FcnL]
        );

        let r = top3(&rows[..2], Objective::Asr).unwrap();
        assert_eq!(r.models.len(), 2);
        assert!(r.warning);
    }

    #[test]
    fn baseline_examples() {
        let b = baselines(&[0.9, 0.8, 0.7], Objective::Accuracy, RANDOM_DRAWS, 3).unwrap();
        assert_eq!((b.oracle, b.worst), (0.9, 0.7));
        assert!((b.random_mean - 0.8).abs() < 0.01);
        let b = baselines(&[0.9, 0.8, 0.7], Objective::Asr, RANDOM_DRAWS, 3).unwrap();
        assert_eq!((b.oracle, b.worst), (0.7, 0.9));
        let b = baselines(&[0.4], Objective::Asr, 10, 0).unwrap();
        assert_eq!((b.oracle, b.random_mean, b.worst), (0.4, 0.4, 0.4));
    }

    #[test]
    fn reduction_examples() {
        assert!((overhead_reduction(2.0, 10.0).unwrap() - 80.0).abs() < 1e-12);
        assert_eq!(overhead_reduction(5.0, 5.0).unwrap(), 0.0);
        assert!(overhead_reduction(1.0, 0.0).is_err());
    }
}
