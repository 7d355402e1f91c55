use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{top3, ModelScore, Objective};
use crate::attacks::{attack_samples, attack_success_rate, AttackKind, AttackSpec, DEFAULT_EPSILON};
use crate::dataset::{read_split, write_dataset, write_split, Dataset, Sample, SplitHeader};
use crate::detection::{DetectorPair, DEFAULT_PERCENTILE};
use crate::error::{Error, Result};
use crate::group::{
    extract_group_features, labeled_vectors, train_group_classifier, BoostConfig, FeatureVector, GroupClassifier,
    LabeledVector,
};
use crate::models::{
    accuracy, f1_macro, tune, Architecture, ModelRecord, ModelSpec, TrainedModel, DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATES, DEFAULT_WIDTHS,
};
use crate::rng;
use crate::scalar::Real;
use crate::similarity::{dataset_embedding, train_encoder, DatasetEmbedding, EmbeddingEncoder, EncoderConfig};

pub const SCHEMA_VERSION: u32 = 1;
pub const PBD_FILE: &str = "pbd.json";

/// One (dataset, model, condition) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub dataset: String,
    pub model: Architecture,
    /// `clean` or `<attack>@<epsilon>`.
    pub condition: String,
    pub attack: Option<AttackKind>,
    pub accuracy: f64,
    pub f1: f64,
    /// Zero on clean rows.
    pub asr: f64,
    /// Tuning plus test evaluation (clean rows) or attack plus evaluation.
    pub seconds: f64,
    /// Set when training diverged for every grid point; metrics are then 0.
    pub failed: Option<String>,
}

impl PerformanceRecord {
    pub fn is_clean(&self) -> bool {
        self.attack.is_none()
    }
}

/// Aligned-column view of PBD rows.
pub struct RecordTable<'a>(pub &'a [PerformanceRecord]);

impl fmt::Display for RecordTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:<14} {:<18} {:>8} {:>8} {:>8} {:>9}",
            "dataset", "model", "condition", "accuracy", "f1", "asr", "seconds"
        )?;
        for r in self.0 {
            write!(
                f,
                "{:<12} {:<14} {:<18} {:>8.4} {:>8.4} {:>8.4} {:>9.3}",
                r.dataset,
                r.model.tag(),
                r.condition,
                r.accuracy,
                r.f1,
                r.asr,
                r.seconds
            )?;
            match &r.failed {
                Some(msg) => writeln!(f, "  failed: {msg}")?,
                None => writeln!(f)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub learning_rates: Vec<f64>,
    pub widths: Vec<usize>,
    pub epochs: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            learning_rates: DEFAULT_LEARNING_RATES.to_vec(),
            widths: DEFAULT_WIDTHS.to_vec(),
            epochs: DEFAULT_EPOCHS,
        }
    }
}

impl GridConfig {
    /// Grid for one architecture, learning-rate major.
    pub fn specs(&self, architecture: Architecture) -> Vec<ModelSpec> {
        self.learning_rates
            .iter()
            .flat_map(|&lr| {
                self.widths
                    .iter()
                    .map(move |&w| ModelSpec::new(architecture, w, lr, self.epochs))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbdConfig {
    pub architectures: Vec<Architecture>,
    pub grid: GridConfig,
    pub attacks: Vec<AttackSpec>,
    pub percentile: f64,
    pub encoder: EncoderConfig,
    pub boost: BoostConfig,
    /// Bootstrap resamples per (dataset, attack) in the group training set.
    pub bootstrap: usize,
}

impl Default for PbdConfig {
    fn default() -> Self {
        Self::with_epsilon(DEFAULT_EPSILON)
    }
}

impl PbdConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            architectures: Architecture::ALL.to_vec(),
            grid: GridConfig::default(),
            attacks: AttackKind::ALL.iter().map(|&k| AttackSpec::new(k, epsilon)).collect(),
            percentile: DEFAULT_PERCENTILE,
            encoder: EncoderConfig::default(),
            boost: BoostConfig::default(),
            bootstrap: 10,
        }
    }

    fn check(&self) -> Result<()> {
        let mut archs = self.architectures.clone();
        archs.sort();
        archs.dedup();
        if archs.len() < 2 || archs.len() != self.architectures.len() {
            return Err(Error::InvalidSpec(
                "a PBD needs at least two distinct architectures".into(),
            ));
        }
        let mut kinds: Vec<AttackKind> = self.attacks.iter().map(|a| a.kind).collect();
        kinds.sort();
        if kinds != AttackKind::ALL {
            return Err(Error::InvalidSpec(
                "a PBD needs each of the seven attacks exactly once".into(),
            ));
        }
        for a in &self.attacks {
            a.validate()?;
        }
        if self.grid.learning_rates.is_empty() || self.grid.widths.is_empty() {
            return Err(Error::InvalidSpec("empty hyperparameter grid".into()));
        }
        if !(self.percentile > 50.0 && self.percentile < 100.0) {
            return Err(Error::InvalidSpec("percentile must lie in (50, 100)".into()));
        }
        Ok(())
    }
}

/// Everything the PBD keeps about one benchmark dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PbdDataset<T> {
    pub name: String,
    pub channels: usize,
    pub length: usize,
    pub classes: usize,
    /// Tuned spec per architecture that trained successfully, in zoo order.
    pub specs: Vec<ModelSpec>,
    /// Best clean model; it generates the validation-split attacks.
    pub reference: Architecture,
    pub detectors: DetectorPair<T>,
    pub encoder: EmbeddingEncoder<T>,
    /// Raw group features of the clean training split.
    pub clean_features: FeatureVector,
    /// Clean validation embedding first, then one per attack.
    pub embeddings: Vec<DatasetEmbedding>,
    #[serde(skip)]
    pub data: Dataset<T>,
    /// Validation split attacked through the reference model.
    #[serde(skip)]
    pub attacked_val: BTreeMap<AttackKind, Vec<Sample<T>>>,
    #[serde(skip)]
    pub models: Vec<TrainedModel<T>>,
}

impl<T: Real> PbdDataset<T> {
    pub fn spec(&self, architecture: Architecture) -> Option<&ModelSpec> {
        self.specs.iter().find(|s| s.architecture == architecture)
    }

    pub fn embedding(&self, condition: &str) -> Option<&DatasetEmbedding> {
        self.embeddings.iter().find(|e| e.condition == condition)
    }

    pub fn attacked(&self, kind: AttackKind) -> Result<&[Sample<T>]> {
        self.attacked_val
            .get(&kind)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::contract("pipeline", format!("{}: no {kind} validation data", self.name)))
    }
}

/// Performance benchmark database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Pbd<T> {
    pub schema_version: u32,
    pub seed: u64,
    /// Seed shared by every encoder, including the one trained at arrival.
    pub encoder_seed: u64,
    pub config: PbdConfig,
    pub datasets: Vec<PbdDataset<T>>,
    pub records: Vec<PerformanceRecord>,
    pub group_classifier: GroupClassifier,
    pub group_training_accuracy: f64,
    /// Labeled group vectors the classifier was trained on.
    pub group_training: Vec<LabeledVector>,
}

fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "dataset name `{name}` is not a valid directory name"
        )))
    }
}

fn failed_row(
    dataset: &str,
    model: Architecture,
    condition: String,
    attack: Option<AttackKind>,
    why: &str,
) -> PerformanceRecord {
    PerformanceRecord {
        dataset: dataset.to_string(),
        model,
        condition,
        attack,
        accuracy: 0.0,
        f1: 0.0,
        asr: 0.0,
        seconds: 0.0,
        failed: Some(why.to_string()),
    }
}

fn clean_rows<'a>(records: &'a [PerformanceRecord], dataset: &'a str) -> impl Iterator<Item = &'a PerformanceRecord> {
    records
        .iter()
        .filter(move |r| r.dataset == dataset && r.is_clean() && r.failed.is_none())
}

/// Builds the benchmark: per dataset, tune and train every architecture,
/// attack the test split with every attack per model, fit both detectors on
/// the clean training split, train the embedding encoder, then attack the
/// validation split through the best clean model for the similarity
/// embeddings and the group-classifier training set.
pub fn build_pbd<T: Real>(datasets: Vec<Dataset<T>>, config: &PbdConfig, seed: u64) -> Result<Pbd<T>> {
    config.check()?;
    if datasets.len() < 2 {
        return Err(Error::InvalidSpec("a PBD needs at least two datasets".into()));
    }
    for (i, ds) in datasets.iter().enumerate() {
        check_name(&ds.name)?;
        ds.validate()?;
        if datasets[..i].iter().any(|d| d.name == ds.name) {
            return Err(Error::InvalidSpec(format!("duplicate dataset name `{}`", ds.name)));
        }
    }

    // Step 1: tune and train every (dataset, architecture).
    let jobs: Vec<(usize, Architecture)> = (0..datasets.len())
        .flat_map(|d| config.architectures.iter().map(move |&a| (d, a)))
        .collect();
    let trained: Vec<(usize, Architecture, Result<TrainedModel<T>>, PerformanceRecord)> = jobs
        .par_iter()
        .map(|&(d, arch)| {
            let ds = &datasets[d];
            let start = Instant::now();
            let task_seed = rng::derive(seed, &[rng::tag(&ds.name), rng::tag(arch.tag())]);
            match tune(&config.grid.specs(arch), ds, task_seed) {
                Ok(t) => {
                    let rec = accuracy(&t.model, &ds.test).and_then(|acc| {
                        Ok(PerformanceRecord {
                            dataset: ds.name.clone(),
                            model: arch,
                            condition: "clean".into(),
                            attack: None,
                            accuracy: acc,
                            f1: f1_macro(&t.model, &ds.test)?,
                            asr: 0.0,
                            seconds: start.elapsed().as_secs_f64(),
                            failed: None,
                        })
                    });
                    match rec {
                        Ok(rec) => (d, arch, Ok(t.model), rec),
                        Err(e) => (
                            d,
                            arch,
                            Err(e),
                            failed_row(&ds.name, arch, "clean".into(), None, "evaluation failed"),
                        ),
                    }
                }
                Err(e @ Error::Divergence { .. }) => {
                    let msg = e.to_string();
                    (d, arch, Err(e), failed_row(&ds.name, arch, "clean".into(), None, &msg))
                }
                Err(e) => (d, arch, Err(e), failed_row(&ds.name, arch, "clean".into(), None, "")),
            }
        })
        .collect();

    let mut records = Vec::new();
    let mut models: Vec<Vec<TrainedModel<T>>> = vec![Vec::new(); datasets.len()];
    for (d, _, model, rec) in trained {
        match model {
            Ok(m) => models[d].push(m),
            Err(Error::Divergence { .. }) => {}
            Err(e) => return Err(e),
        }
        records.push(rec);
    }

    // Step 2: attack the test split with every attack for every model.
    let attack_jobs: Vec<(usize, Architecture, &AttackSpec)> = jobs
        .iter()
        .flat_map(|&(d, a)| config.attacks.iter().map(move |s| (d, a, s)))
        .collect();
    let attacked: Vec<Result<PerformanceRecord>> = attack_jobs
        .par_iter()
        .map(|&(d, arch, spec)| {
            let ds = &datasets[d];
            let Some(model) = models[d].iter().find(|m| m.spec.architecture == arch) else {
                return Ok(failed_row(
                    &ds.name,
                    arch,
                    spec.label(),
                    Some(spec.kind),
                    "model failed to train",
                ));
            };
            let start = Instant::now();
            let task_seed = rng::derive(
                seed,
                &[
                    rng::tag(&ds.name),
                    rng::tag(arch.tag()),
                    rng::tag(spec.kind.tag()),
                    rng::tag("test"),
                ],
            );
            let adv = attack_samples(model, &ds.test, spec, task_seed)?;
            Ok(PerformanceRecord {
                dataset: ds.name.clone(),
                model: arch,
                condition: spec.label(),
                attack: Some(spec.kind),
                accuracy: accuracy(model, &adv)?,
                f1: f1_macro(model, &adv)?,
                asr: attack_success_rate(model, &ds.test, &adv)?,
                seconds: start.elapsed().as_secs_f64(),
                failed: None,
            })
        })
        .collect();
    for r in attacked {
        records.push(r?);
    }

    // Detectors, encoders, reference-model attacks on validation data.
    let encoder_seed = rng::derive(seed, &[rng::tag("encoder")]);
    let per_dataset: Vec<Result<(PbdDataset<T>, Vec<LabeledVector>)>> = datasets
        .into_par_iter()
        .zip(models.into_par_iter())
        .map(|(ds, models)| {
            let rows: Vec<ModelScore> = clean_rows(&records, &ds.name)
                .map(|r| ModelScore {
                    model: r.model,
                    score: r.accuracy,
                    f1: r.f1,
                })
                .collect();
            if rows.is_empty() {
                return Err(Error::contract(
                    "pipeline",
                    format!("{}: every model failed to train", ds.name),
                ));
            }
            let reference = top3(&rows, Objective::Accuracy)?.models[0].model;
            let ref_model = models
                .iter()
                .find(|m| m.spec.architecture == reference)
                .expect("ranked model was trained");
            let detectors = DetectorPair::fit(&ds.train, config.percentile)?;
            let encoder = train_encoder(&ds, &config.encoder, encoder_seed)?;
            let clean_features = extract_group_features(&ds.train)?;
            let mut embeddings = vec![dataset_embedding(&encoder, &ds.val, &ds.name, "clean")?];
            let mut attacked_val = BTreeMap::new();
            let mut vectors = Vec::new();
            let subset = ds.val.len() / crate::detection::SEGMENTS;
            for spec in &config.attacks {
                let s = rng::derive(seed, &[rng::tag(&ds.name), rng::tag(spec.kind.tag()), rng::tag("val")]);
                let adv = attack_samples(ref_model, &ds.val, spec, s)?;
                embeddings.push(dataset_embedding(&encoder, &adv, &ds.name, spec.kind.tag())?);
                vectors.extend(labeled_vectors(
                    &ds.name,
                    spec.kind,
                    &adv,
                    &clean_features,
                    config.bootstrap,
                    subset,
                    s,
                )?);
                attacked_val.insert(spec.kind, adv);
            }
            let entry = PbdDataset {
                name: ds.name.clone(),
                channels: ds.channels,
                length: ds.length,
                classes: ds.classes,
                specs: models.iter().map(|m| m.spec.clone()).collect(),
                reference,
                detectors,
                encoder,
                clean_features,
                embeddings,
                data: ds,
                attacked_val,
                models,
            };
            Ok((entry, vectors))
        })
        .collect();

    let mut entries = Vec::new();
    let mut group_training = Vec::new();
    for r in per_dataset {
        let (e, v) = r?;
        entries.push(e);
        group_training.extend(v);
    }
    for e in &mut entries {
        e.models.sort_by_key(|m| m.spec.architecture);
        e.specs.sort_by_key(|s| s.architecture);
    }
    let group_classifier = train_group_classifier(&group_training, &config.boost)?;
    let group_training_accuracy = crate::group::group_accuracy(&group_classifier, &group_training)?;
    Ok(Pbd {
        schema_version: SCHEMA_VERSION,
        seed,
        encoder_seed,
        config: config.clone(),
        datasets: entries,
        records,
        group_classifier,
        group_training_accuracy,
        group_training,
    })
}

impl<T: Real> Pbd<T> {
    pub fn dataset(&self, name: &str) -> Result<&PbdDataset<T>> {
        self.datasets
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::contract("pipeline", format!("dataset `{name}` is not in the PBD")))
    }

    /// Successful rows for one dataset.
    pub fn rows<'a>(&'a self, dataset: &'a str) -> impl Iterator<Item = &'a PerformanceRecord> {
        self.records
            .iter()
            .filter(move |r| r.dataset == dataset && r.failed.is_none())
    }

    /// Clean accuracy per model, with clean F1 as tie-breaker.
    pub fn clean_scores(&self, dataset: &str) -> Vec<ModelScore> {
        clean_rows(&self.records, dataset)
            .map(|r| ModelScore {
                model: r.model,
                score: r.accuracy,
                f1: r.f1,
            })
            .collect()
    }

    /// Mean ASR (and mean attacked F1) per model over `attacks`.
    pub fn robustness_scores(&self, dataset: &str, attacks: &[AttackKind]) -> Vec<ModelScore> {
        let mut acc: BTreeMap<Architecture, (f64, f64, usize)> = BTreeMap::new();
        for r in self.rows(dataset) {
            if let Some(k) = r.attack {
                if attacks.contains(&k) {
                    let e = acc.entry(r.model).or_insert((0.0, 0.0, 0));
                    e.0 += r.asr;
                    e.1 += r.f1;
                    e.2 += 1;
                }
            }
        }
        acc.into_iter()
            .filter(|(_, (_, _, n))| *n == attacks.len())
            .map(|(model, (asr, f1, n))| ModelScore {
                model,
                score: asr / n as f64,
                f1: f1 / n as f64,
            })
            .collect()
    }

    /// Writes `pbd.json` plus every dataset, attacked validation split and
    /// trained model under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for d in &self.datasets {
            let base = dir.join("datasets").join(&d.name);
            write_dataset(&d.data, &base)?;
            let h = SplitHeader {
                channels: d.channels,
                length: d.length,
                classes: d.classes,
            };
            let adir = base.join("attacked");
            fs::create_dir_all(&adir).map_err(|e| Error::io(&adir, e))?;
            for (k, v) in &d.attacked_val {
                write_split(&adir.join(format!("{}.csv", k.tag())), h, v)?;
            }
            let mdir = base.join("models");
            fs::create_dir_all(&mdir).map_err(|e| Error::io(&mdir, e))?;
            for m in &d.models {
                let p = mdir.join(format!("{}.json", m.spec.id()));
                fs::write(&p, serde_json::to_string(&m.to_record())?).map_err(|e| Error::io(&p, e))?;
            }
        }
        let p = dir.join(PBD_FILE);
        fs::write(&p, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&p, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join(PBD_FILE);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let mut pbd: Pbd<T> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: p.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        if pbd.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse {
                path: p,
                line: 1,
                msg: format!("schema version {} is not {SCHEMA_VERSION}", pbd.schema_version),
            });
        }
        for d in &mut pbd.datasets {
            check_name(&d.name)?;
            let base = dir.join("datasets").join(&d.name);
            let mut data = crate::dataset::read_dataset::<T>(&base)?;
            data.name = d.name.clone();
            d.data = data;
            for spec in &pbd.config.attacks {
                let (_, v) = read_split::<T>(&base.join("attacked").join(format!("{}.csv", spec.kind.tag())))?;
                d.attacked_val.insert(spec.kind, v);
            }
            d.models = d
                .specs
                .iter()
                .map(|s| {
                    let mp = base.join("models").join(format!("{}.json", s.id()));
                    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
                    let rec: ModelRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
                        path: mp.clone(),
                        line: e.line(),
                        msg: e.to_string(),
                    })?;
                    TrainedModel::from_record(&rec)
                })
                .collect::<Result<_>>()?;
        }
        Ok(pbd)
    }
}
