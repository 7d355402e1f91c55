//! Constructed arrivals: synthetic benchmark datasets, held-out siblings and
//! clean, fully attacked or segment-patterned incoming data.

use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Arrival, Condition, Pbd};
use crate::attacks::{AttackKind, AttackSpec};
use crate::dataset::{generate_synthetic_dataset, read_dataset, write_dataset, Dataset, SynthSpec, PATTERN_SEGMENTS};
use crate::error::{Error, Result};
use crate::models::{train, Architecture, ModelSpec, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATES, DEFAULT_WIDTHS};
use crate::rng;
use crate::scalar::Real;

/// `(classes, channels, length)` of the default benchmark datasets.
pub const DEFAULT_SHAPES: [(usize, usize, usize); 4] = [(4, 3, 128), (3, 2, 128), (5, 4, 128), (4, 2, 96)];
pub const DEFAULT_PER_CLASS: usize = 50;
/// Noise level of the benchmark datasets. It sits well below the default
/// attack budget, as the sensor noise of recorded motion data does; at the
/// generator's default of 0.1 an `eps = 0.1` perturbation is no louder than
/// the noise it hides in.
pub const BENCHMARK_NOISE: f64 = 0.02;

/// Untuned spec for `architecture`: the default width and the smaller
/// default learning rate.
pub fn untuned(architecture: Architecture) -> ModelSpec {
    ModelSpec::new(
        architecture,
        DEFAULT_WIDTHS[0],
        DEFAULT_LEARNING_RATES[1],
        DEFAULT_EPOCHS,
    )
}

pub fn default_zoo() -> Vec<ModelSpec> {
    Architecture::ALL.iter().map(|&a| untuned(a)).collect()
}

/// Generator specs for `count` benchmark datasets named `ds0`, `ds1`, ...
/// Shapes cycle through [`DEFAULT_SHAPES`]; every dataset has its own
/// class layout.
pub fn benchmark_specs(count: usize, seed: u64) -> Vec<SynthSpec> {
    (0..count)
        .map(|i| {
            let (classes, channels, length) = DEFAULT_SHAPES[i % DEFAULT_SHAPES.len()];
            SynthSpec {
                name: format!("ds{i}"),
                classes,
                channels,
                length,
                per_class: DEFAULT_PER_CLASS,
                seed: rng::derive(seed, &[rng::tag("benchmark"), i as u64]),
                variant: i as u64 + 1,
                noise: BENCHMARK_NOISE,
            }
        })
        .collect()
}

pub fn benchmark_datasets<T: Real>(count: usize, seed: u64) -> Result<Vec<Dataset<T>>> {
    benchmark_specs(count, seed)
        .iter()
        .map(generate_synthetic_dataset)
        .collect()
}

/// Same distribution as `spec`, fresh samples.
pub fn sibling(spec: &SynthSpec, seed: u64) -> SynthSpec {
    SynthSpec {
        name: format!("{}-in", spec.name),
        seed: rng::derive(seed, &[rng::tag("sibling"), rng::tag(&spec.name)]),
        ..spec.clone()
    }
}

/// Arrival whose observed split is `dataset.val` under `condition`, attacked
/// through a model of `attacker` trained on the arrival's own train split.
pub fn make_arrival<T: Real>(
    dataset: Dataset<T>,
    condition: Condition,
    attacker: &ModelSpec,
    seed: u64,
) -> Result<Arrival<T>> {
    let observed = match condition {
        Condition::Clean => dataset.val.clone(),
        _ => {
            let model = train(attacker, &dataset, rng::derive(seed, &[rng::tag("attacker")]))?;
            condition.apply(&model, &dataset.val, rng::derive(seed, &[rng::tag("observed")]))?
        }
    };
    Ok(Arrival {
        dataset,
        observed,
        condition,
    })
}

/// Random five-segment pattern with one to four attacked segments, each
/// with a uniformly drawn attack.
pub fn random_pattern(epsilon: f64, seed: u64) -> Vec<Option<AttackSpec>> {
    let mut r = rng::rng(rng::derive(seed, &[rng::tag("pattern")]));
    let attacked = r.random_range(1..PATTERN_SEGMENTS);
    let mut slots: Vec<usize> = (0..PATTERN_SEGMENTS).collect();
    let mut marks = [false; PATTERN_SEGMENTS];
    for _ in 0..attacked {
        let i = r.random_range(0..slots.len());
        marks[slots.swap_remove(i)] = true;
    }
    marks
        .iter()
        .map(|&m| m.then(|| AttackSpec::new(*AttackKind::ALL.choose(&mut r).expect("non-empty"), epsilon)))
        .collect()
}

/// Sidecar describing how an arrival directory was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub condition: Condition,
    pub seed: u64,
    pub source: String,
    pub attacker: ModelSpec,
}

pub const ARRIVAL_FILE: &str = "arrival.json";

/// Writes the arrival in the dataset layout (`val.csv` holds the observed
/// data) plus the [`ARRIVAL_FILE`] sidecar.
pub fn write_arrival<T: Real>(arrival: &Arrival<T>, record: &ArrivalRecord, dir: &Path) -> Result<()> {
    let ds = Dataset {
        val: arrival.observed.clone(),
        ..arrival.dataset.clone()
    };
    write_dataset(&ds, dir)?;
    let p = dir.join(ARRIVAL_FILE);
    fs::write(&p, serde_json::to_string_pretty(record)?).map_err(|e| Error::io(&p, e))
}

/// Reads an arrival directory. Without a sidecar the data is taken as clean
/// and `val.csv` as the observed split.
pub fn read_arrival<T: Real>(dir: &Path) -> Result<Arrival<T>> {
    let dataset = read_dataset::<T>(dir)?;
    let p = dir.join(ARRIVAL_FILE);
    let condition = if p.exists() {
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let rec: ArrivalRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: p.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        rec.condition
    } else {
        Condition::Clean
    };
    condition.check()?;
    Ok(Arrival {
        observed: dataset.val.clone(),
        dataset,
        condition,
    })
}

/// Held-out sibling of the `source`-th benchmark dataset of a PBD built by
/// [`benchmark_datasets`] with the PBD's seed, under `condition`, attacked
/// through the source dataset's reference architecture.
pub fn sibling_arrival<T: Real>(pbd: &Pbd<T>, source: usize, condition: Condition, seed: u64) -> Result<Arrival<T>> {
    let specs = benchmark_specs(pbd.datasets.len(), pbd.seed);
    let spec = specs
        .get(source)
        .ok_or_else(|| Error::InvalidSpec(format!("source index {source} outside the PBD")))?;
    let entry = pbd.dataset(&spec.name)?;
    let attacker = entry.spec(entry.reference).expect("reference was trained").clone();
    let dataset = generate_synthetic_dataset(&sibling(spec, seed))?;
    make_arrival(dataset, condition, &attacker, seed)
}

/// Parses five comma-separated entries, each `clean` or an attack name, such
/// as `fgsm,clean,bim,clean,clean`.
pub fn parse_pattern(s: &str, epsilon: f64) -> Result<Vec<Option<AttackSpec>>> {
    let p: Vec<Option<AttackSpec>> = s
        .split(',')
        .map(|t| match t.trim() {
            "clean" | "c" | "C" => Ok(None),
            other => Ok(Some(AttackSpec::new(other.parse()?, epsilon))),
        })
        .collect::<Result<_>>()?;
    Condition::Pattern(p.clone()).check()?;
    Ok(p)
}
