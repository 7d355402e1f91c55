use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{baselines, overhead_reduction, top3, Baselines, ModelScore, Objective, Pbd, PbdDataset, RANDOM_DRAWS};
use crate::attacks::{attack_samples, attack_success_rate, AttackGroup, AttackKind, AttackSpec, DEFAULT_EPSILON};
use crate::dataset::{Dataset, Sample, SegmentPattern, SegmentStatus, PATTERN_SEGMENTS};
use crate::detection::{
    segment_bounds, Case, DetectionReport, DetectorPair, Verdict, DEFAULT_PERCENTILE, DEFAULT_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::group::{extract_group_features, predict_group, FeatureVector};
use crate::models::{accuracy, train, Architecture, Differentiable, ModelSpec, TrainedModel};
use crate::rng;
use crate::scalar::Real;
use crate::similarity::{
    cosine_similarity, dataset_embedding, distance_similarity, majority_vote, most_similar_dataset, train_encoder,
    DatasetEmbedding, EmbeddingEncoder, Metric,
};

/// Ground-truth condition of an arrival, used to build it and to evaluate
/// candidate models on its test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Clean,
    Attack(AttackSpec),
    /// One entry per segment; `None` leaves the segment clean.
    Pattern(Vec<Option<AttackSpec>>),
}

impl Condition {
    pub fn check(&self) -> Result<()> {
        match self {
            Condition::Clean => Ok(()),
            Condition::Attack(s) => s.validate(),
            Condition::Pattern(p) => {
                if p.len() != PATTERN_SEGMENTS {
                    return Err(Error::InvalidSpec(format!(
                        "a pattern has {PATTERN_SEGMENTS} segments, got {}",
                        p.len()
                    )));
                }
                p.iter().flatten().try_for_each(AttackSpec::validate)
            }
        }
    }

    /// Metric used to score models on data under this condition.
    pub fn objective(&self) -> Objective {
        match self {
            Condition::Clean => Objective::Accuracy,
            _ => Objective::Asr,
        }
    }

    /// Group-level view of a pattern condition.
    pub fn pattern(&self) -> Option<SegmentPattern> {
        match self {
            Condition::Pattern(p) => {
                let v: Vec<SegmentStatus> = p
                    .iter()
                    .map(|s| match s {
                        Some(a) => SegmentStatus::Attacked(a.kind.group()),
                        None => SegmentStatus::Clean,
                    })
                    .collect();
                SegmentPattern::try_from(v).ok()
            }
            _ => None,
        }
    }

    /// Applies the condition to `samples` through `model`. Pattern segments
    /// follow [`segment_bounds`].
    pub fn apply<T: Real, M: Differentiable<T>>(
        &self,
        model: &M,
        samples: &[Sample<T>],
        seed: u64,
    ) -> Result<Vec<Sample<T>>> {
        self.check()?;
        match self {
            Condition::Clean => Ok(samples.to_vec()),
            Condition::Attack(spec) => {
                attack_samples(model, samples, spec, rng::derive(seed, &[rng::tag(spec.kind.tag())]))
            }
            Condition::Pattern(p) => {
                if samples.len() < PATTERN_SEGMENTS {
                    return Err(Error::InvalidSpec(format!(
                        "a patterned condition needs at least {PATTERN_SEGMENTS} samples"
                    )));
                }
                let mut out = Vec::with_capacity(samples.len());
                for (i, ((a, b), spec)) in segment_bounds(samples.len(), PATTERN_SEGMENTS)
                    .into_iter()
                    .zip(p)
                    .enumerate()
                {
                    match spec {
                        Some(spec) => {
                            let s = rng::derive(seed, &[i as u64, rng::tag(spec.kind.tag())]);
                            out.extend(attack_samples(model, &samples[a..b], spec, s)?);
                        }
                        None => out.extend_from_slice(&samples[a..b]),
                    }
                }
                Ok(out)
            }
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Clean => f.write_str("clean"),
            Condition::Attack(s) => f.write_str(&s.label()),
            Condition::Pattern(p) => {
                let parts: Vec<String> = p
                    .iter()
                    .map(|s| s.as_ref().map_or_else(|| "clean".to_string(), AttackSpec::label))
                    .collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

/// Incoming data: a clean train split to train on, the validation portion
/// as it arrived (possibly attacked), and a test split for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival<T> {
    pub dataset: Dataset<T>,
    pub observed: Vec<Sample<T>>,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Attack budget for constructed arrivals.
    pub epsilon: f64,
    pub threshold: f64,
    /// Detector calibration percentile for the arrival's detectors.
    pub percentile: f64,
    pub metric: Metric,
    pub random_draws: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epsilon: DEFAULT_EPSILON,
            threshold: DEFAULT_THRESHOLD,
            percentile: DEFAULT_PERCENTILE,
            metric: Metric::Cosine,
            random_draws: RANDOM_DRAWS,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidSpec("epsilon must lie in [0, 1]".into()));
        }
        if !(self.percentile > 50.0 && self.percentile < 100.0) {
            return Err(Error::InvalidSpec("percentile must lie in (50, 100)".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 0.5) {
            return Err(Error::InvalidSpec("threshold must lie in (0, 0.5)".into()));
        }
        if self.random_draws == 0 {
            return Err(Error::InvalidSpec("random baseline needs at least one draw".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupPrediction {
    pub group: AttackGroup,
    pub confidence: f64,
}

/// Per-attack similarity winner in the fully attacked case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub attack: AttackKind,
    pub dataset: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMetric {
    pub model: Architecture,
    pub value: f64,
}

/// Wall-clock accounting. Kept out of the serialized selection so that
/// results are reproducible byte for byte.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    /// Detection, group classification and similarity.
    pub framework_seconds: f64,
    /// Framework plus training and evaluating the top-3 models.
    pub relate_seconds: f64,
    /// Training and evaluating the whole zoo.
    pub oracle_seconds: f64,
    pub reduction_percent: f64,
    /// Framework time as a share of oracle time.
    pub framework_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub detection: DetectionReport,
    pub group: Option<GroupPrediction>,
    /// Case 3: predicted group of each segment marked Attacked.
    pub segment_groups: Option<Vec<Option<AttackGroup>>>,
    pub metric: Metric,
    pub chosen_dataset: String,
    pub similarity: f64,
    pub votes: Vec<Vote>,
    pub objective: Objective,
    /// Top-3 models with their PBD ranking scores.
    pub top3: Vec<ModelScore>,
    pub top3_warning: bool,
    /// Top-3 models evaluated on the incoming test split.
    pub evaluated: Vec<ModelMetric>,
    pub winner: Architecture,
    pub winner_metric: f64,
    /// Every zoo model evaluated on the incoming test split.
    pub zoo: Vec<ModelMetric>,
    pub baselines: Baselines,
    #[serde(skip)]
    pub overhead: OverheadReport,
}

impl SelectionResult {
    pub fn case(&self) -> Case {
        self.detection.case
    }
}

/// Evaluates `model` on `test` after applying `condition` to it: accuracy
/// or attack success rate.
pub fn evaluate_model<T: Real>(
    model: &TrainedModel<T>,
    test: &[Sample<T>],
    condition: &Condition,
    objective: Objective,
    seed: u64,
) -> Result<f64> {
    let data = condition.apply(model, test, seed)?;
    match objective {
        Objective::Accuracy => accuracy(model, &data),
        Objective::Asr => attack_success_rate(model, test, &data),
    }
}

struct Similarity<'a, T> {
    metric: Metric,
    observed: &'a [Sample<T>],
    embedding: Option<DatasetEmbedding>,
}

impl<T: Real> Similarity<'_, T> {
    fn score(
        &self,
        encoder: &EmbeddingEncoder<T>,
        candidate: &[Sample<T>],
        stored: Option<&DatasetEmbedding>,
    ) -> Result<f64> {
        match &self.embedding {
            Some(inc) => {
                let cand = match stored {
                    Some(e) => e.clone(),
                    None => dataset_embedding(encoder, candidate, "", "")?,
                };
                cosine_similarity(&inc.vector, &cand.vector)
            }
            None => distance_similarity(self.metric, self.observed, candidate),
        }
    }

    /// Most similar dataset given a per-dataset candidate builder.
    fn best<F>(&self, pbd: &Pbd<T>, candidate: F) -> Result<(String, f64)>
    where
        F: Fn(&PbdDataset<T>) -> Result<(Vec<Sample<T>>, Option<DatasetEmbedding>)> + Sync,
    {
        let scores: Vec<Result<(String, f64)>> = pbd
            .datasets
            .par_iter()
            .map(|d| {
                let (samples, stored) = candidate(d)?;
                Ok((d.name.clone(), self.score(&d.encoder, &samples, stored.as_ref())?))
            })
            .collect();
        most_similar_dataset(&scores.into_iter().collect::<Result<Vec<_>>>()?)
    }
}

/// Patterned replica of a PBD dataset's validation split: segments marked
/// with a group take the reference-model attack of a seeded random member of
/// that group; other segments are the clean originals.
pub fn patterned_replica<T: Real>(
    d: &PbdDataset<T>,
    groups: &[Option<AttackGroup>],
    seed: u64,
) -> Result<Vec<Sample<T>>> {
    let val = &d.data.val;
    if val.len() < PATTERN_SEGMENTS {
        return Err(Error::contract(
            "pipeline",
            format!("{}: validation split too small for segments", d.name),
        ));
    }
    let mut out = val.clone();
    for (i, ((a, b), g)) in segment_bounds(val.len(), PATTERN_SEGMENTS)
        .into_iter()
        .zip(groups)
        .enumerate()
    {
        if let Some(g) = g {
            let mut r = rng::rng(rng::derive(seed, &[rng::tag(&d.name), i as u64]));
            let kind = *g.attacks().choose(&mut r).expect("groups are non-empty");
            out[a..b].clone_from_slice(&d.attacked(kind)?[a..b]);
        }
    }
    Ok(out)
}

fn group_of<T: Real>(pbd: &Pbd<T>, samples: &[Sample<T>], clean: &FeatureVector) -> Result<GroupPrediction> {
    let (group, confidence) =
        predict_group(&pbd.group_classifier, samples, clean).map_err(|e| e.within("group_classifier"))?;
    Ok(GroupPrediction { group, confidence })
}

/// Module 1-3 outcome for an arrival, before any incoming training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub detection: DetectionReport,
    pub group: Option<GroupPrediction>,
    pub segment_groups: Option<Vec<Option<AttackGroup>>>,
    pub metric: Metric,
    pub chosen_dataset: String,
    pub similarity: f64,
    pub votes: Vec<Vote>,
    pub objective: Objective,
    pub top3: Vec<ModelScore>,
    pub top3_warning: bool,
    #[serde(skip)]
    pub framework_seconds: f64,
}

/// Detects the arrival's condition, picks the most similar PBD dataset for
/// its case and ranks that dataset's models. Uses the arrival's clean train
/// split and its observed data only.
pub fn select<T: Real>(arrival: &Arrival<T>, pbd: &Pbd<T>, config: &RunConfig) -> Result<Selection> {
    config.check()?;
    arrival.dataset.validate()?;
    if pbd.datasets.is_empty() {
        return Err(Error::contract("pipeline", "empty PBD"));
    }
    if arrival.observed.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let framework = Instant::now();
    let detectors = DetectorPair::fit(&arrival.dataset.train, config.percentile).map_err(|e| e.within("detection"))?;
    let detection = detectors
        .report(&arrival.observed, config.threshold)
        .map_err(|e| e.within("detection"))?;

    let embedding = match config.metric {
        Metric::Cosine => {
            let enc = train_encoder(&arrival.dataset, &pbd.config.encoder, pbd.encoder_seed)
                .map_err(|e| e.within("similarity"))?;
            Some(
                dataset_embedding(&enc, &arrival.observed, &arrival.dataset.name, "observed")
                    .map_err(|e| e.within("similarity"))?,
            )
        }
        _ => None,
    };
    let sim = Similarity {
        metric: config.metric,
        observed: &arrival.observed,
        embedding,
    };
    let sim_err = |e: Error| e.within("similarity");
    let clean_features = || extract_group_features(&arrival.dataset.train).map_err(|e| e.within("group_classifier"));

    let mut group = None;
    let mut segment_groups = None;
    let mut votes = Vec::new();
    let (chosen, similarity, objective, ranking_attacks) = match detection.case {
        Case::Case1 => {
            let (name, s) = sim
                .best(pbd, |d| Ok((d.data.val.clone(), d.embedding("clean").cloned())))
                .map_err(sim_err)?;
            (name, s, Objective::Accuracy, Vec::new())
        }
        Case::Case2 => {
            let g = group_of(pbd, &arrival.observed, &clean_features()?)?;
            for kind in g.group.attacks() {
                let (name, score) = sim
                    .best(pbd, |d| {
                        Ok((d.attacked(kind)?.to_vec(), d.embedding(kind.tag()).cloned()))
                    })
                    .map_err(sim_err)?;
                votes.push(Vote {
                    attack: kind,
                    dataset: name,
                    score,
                });
            }
            let pairs: Vec<(String, f64)> = votes.iter().map(|v| (v.dataset.clone(), v.score)).collect();
            let name = majority_vote(&pairs).map_err(sim_err)?;
            let won: Vec<f64> = votes.iter().filter(|v| v.dataset == name).map(|v| v.score).collect();
            let s = won.iter().sum::<f64>() / won.len() as f64;
            group = Some(g);
            (name, s, Objective::Asr, g.group.attacks())
        }
        Case::Case3 => {
            let verdicts = detection.segment_verdicts.clone().expect("case 3 carries verdicts");
            let clean = clean_features()?;
            let bounds = segment_bounds(arrival.observed.len(), PATTERN_SEGMENTS);
            let mut groups = Vec::with_capacity(PATTERN_SEGMENTS);
            for (v, (a, b)) in verdicts.iter().zip(bounds) {
                groups.push(match v {
                    Verdict::Attacked => Some(group_of(pbd, &arrival.observed[a..b], &clean)?.group),
                    Verdict::Clean => None,
                });
            }
            let replica_seed = rng::derive(config.seed, &[rng::tag("replica")]);
            let (name, s) = sim
                .best(pbd, |d| Ok((patterned_replica(d, &groups, replica_seed)?, None)))
                .map_err(sim_err)?;
            let union: BTreeSet<AttackKind> = groups.iter().flatten().flat_map(|g| g.attacks()).collect();
            let attacks = if union.is_empty() {
                AttackKind::ALL.to_vec()
            } else {
                union.into_iter().collect()
            };
            segment_groups = Some(groups);
            (name, s, Objective::Asr, attacks)
        }
    };
    let scores = match objective {
        Objective::Accuracy => pbd.clean_scores(&chosen),
        Objective::Asr => pbd.robustness_scores(&chosen, &ranking_attacks),
    };
    let ranking = top3(&scores, objective)?;
    Ok(Selection {
        detection,
        group,
        segment_groups,
        metric: config.metric,
        chosen_dataset: chosen,
        similarity,
        votes,
        objective,
        top3: ranking.models,
        top3_warning: ranking.warning,
        framework_seconds: framework.elapsed().as_secs_f64(),
    })
}

/// One zoo model trained on the arrival and evaluated on its test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZooRun {
    pub model: Architecture,
    pub value: f64,
    pub seconds: f64,
}

/// Trains every spec on the arrival's train split and evaluates it on the
/// test split under the arrival's condition. Diverged models are skipped.
pub fn evaluate_zoo<T: Real>(
    arrival: &Arrival<T>,
    specs: &[ModelSpec],
    objective: Objective,
    seed: u64,
) -> Result<Vec<ZooRun>> {
    let mut out = Vec::new();
    for spec in specs {
        let arch = spec.architecture;
        let start = Instant::now();
        let model = match train(
            spec,
            &arrival.dataset,
            rng::derive(seed, &[rng::tag("incoming"), rng::tag(arch.tag())]),
        ) {
            Ok(m) => m,
            Err(Error::Divergence { .. }) => continue,
            Err(e) => return Err(e),
        };
        let value = evaluate_model(
            &model,
            &arrival.dataset.test,
            &arrival.condition,
            objective,
            rng::derive(seed, &[rng::tag("evaluate"), rng::tag(arch.tag())]),
        )?;
        out.push(ZooRun {
            model: arch,
            value,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    if out.is_empty() {
        return Err(Error::contract("pipeline", "no zoo model trained on the incoming data"));
    }
    Ok(out)
}

/// Every zoo model on the arrival together with the three baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub objective: Objective,
    pub zoo: Vec<ZooRun>,
    pub baselines: Baselines,
}

pub fn eval_baselines<T: Real>(
    arrival: &Arrival<T>,
    specs: &[ModelSpec],
    objective: Objective,
    draws: usize,
    seed: u64,
) -> Result<BaselineReport> {
    let zoo = evaluate_zoo(arrival, specs, objective, seed)?;
    let metrics: Vec<f64> = zoo.iter().map(|z| z.value).collect();
    let baselines = baselines(&metrics, objective, draws, seed)?;
    Ok(BaselineReport {
        objective,
        zoo,
        baselines,
    })
}

impl fmt::Display for BaselineReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>10} {:>10}", "model", self.objective, "seconds")?;
        for z in &self.zoo {
            writeln!(f, "{:<14} {:>10.4} {:>10.3}", z.model.tag(), z.value, z.seconds)?;
        }
        writeln!(
            f,
            "oracle {:.4}  random {:.4}  worst {:.4}",
            self.baselines.oracle, self.baselines.random_mean, self.baselines.worst
        )
    }
}

/// Algorithm 1 end to end: [`select`], then the chosen dataset's tuned zoo
/// trained and evaluated on the arrival. The top-3 are a subset of those
/// runs; the winner is the best of them, ties to the higher-ranked model.
pub fn run_pipeline<T: Real>(arrival: &Arrival<T>, pbd: &Pbd<T>, config: &RunConfig) -> Result<SelectionResult> {
    arrival.condition.check()?;
    let sel = select(arrival, pbd, config)?;
    let source = pbd.dataset(&sel.chosen_dataset)?;
    let runs = evaluate_zoo(arrival, &source.specs, sel.objective, config.seed)?;
    let zoo: Vec<ModelMetric> = runs
        .iter()
        .map(|r| ModelMetric {
            model: r.model,
            value: r.value,
        })
        .collect();

    let evaluated: Vec<ModelMetric> = sel
        .top3
        .iter()
        .filter_map(|m| zoo.iter().find(|z| z.model == m.model).copied())
        .collect();
    let mut winner = *evaluated
        .first()
        .ok_or_else(|| Error::contract("pipeline", "no top-3 model trained on the incoming data"))?;
    for m in &evaluated[1..] {
        if sel.objective.better(m.value, winner.value) {
            winner = *m;
        }
    }

    let metrics: Vec<f64> = zoo.iter().map(|z| z.value).collect();
    let baselines = baselines(&metrics, sel.objective, config.random_draws, config.seed)?;

    let oracle_seconds: f64 = runs.iter().map(|r| r.seconds).sum();
    let top_seconds: f64 = runs
        .iter()
        .filter(|r| evaluated.iter().any(|m| m.model == r.model))
        .map(|r| r.seconds)
        .sum();
    let relate_seconds = sel.framework_seconds + top_seconds;
    let overhead = OverheadReport {
        framework_seconds: sel.framework_seconds,
        relate_seconds,
        oracle_seconds,
        reduction_percent: overhead_reduction(relate_seconds, oracle_seconds)?,
        framework_percent: 100.0 * sel.framework_seconds / oracle_seconds,
    };

    Ok(SelectionResult {
        detection: sel.detection,
        group: sel.group,
        segment_groups: sel.segment_groups,
        metric: sel.metric,
        chosen_dataset: sel.chosen_dataset,
        similarity: sel.similarity,
        votes: sel.votes,
        objective: sel.objective,
        top3: sel.top3,
        top3_warning: sel.top3_warning,
        evaluated,
        winner: winner.model,
        winner_metric: winner.value,
        zoo,
        baselines,
        overhead,
    })
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.detection)?;
        if let Some(g) = &self.group {
            writeln!(f, "group: {} (confidence {:.4})", g.group, g.confidence)?;
        }
        if let Some(gs) = &self.segment_groups {
            let s: Vec<String> = gs
                .iter()
                .map(|g| g.map_or("-".to_string(), |g| g.to_string()))
                .collect();
            writeln!(f, "segment groups: {}", s.join(" "))?;
        }
        for v in &self.votes {
            writeln!(f, "vote: {:<10} -> {} ({:.4})", v.attack.tag(), v.dataset, v.score)?;
        }
        writeln!(f, "metric: {}", self.metric)?;
        writeln!(
            f,
            "chosen dataset: {} (similarity {:.4})",
            self.chosen_dataset, self.similarity
        )?;
        if self.top3_warning {
            writeln!(f, "warning: fewer than three ranked models")?;
        }
        writeln!(f)?;
        writeln!(f, "{:<14} {:>10} {:>10}", "model", "pbd score", "pbd f1")?;
        for m in &self.top3 {
            writeln!(f, "{:<14} {:>10.4} {:>10.4}", m.model.tag(), m.score, m.f1)?;
        }
        Ok(())
    }
}

impl fmt::Display for SelectionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.detection)?;
        if let Some(g) = &self.group {
            writeln!(f, "group: {} (confidence {:.4})", g.group, g.confidence)?;
        }
        if let Some(gs) = &self.segment_groups {
            let s: Vec<String> = gs
                .iter()
                .map(|g| g.map_or("-".to_string(), |g| g.to_string()))
                .collect();
            writeln!(f, "segment groups: {}", s.join(" "))?;
        }
        for v in &self.votes {
            writeln!(f, "vote: {:<10} -> {} ({:.4})", v.attack.tag(), v.dataset, v.score)?;
        }
        writeln!(f, "metric: {}", self.metric)?;
        writeln!(
            f,
            "chosen dataset: {} (similarity {:.4})",
            self.chosen_dataset, self.similarity
        )?;
        if self.top3_warning {
            writeln!(f, "warning: fewer than three ranked models")?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "{:<14} {:>10} {:>10} {:>10}",
            "model", "pbd score", "pbd f1", self.objective
        )?;
        for m in &self.top3 {
            let eval = self
                .evaluated
                .iter()
                .find(|e| e.model == m.model)
                .map_or("-".to_string(), |e| format!("{:.4}", e.value));
            let mark = if m.model == self.winner { " *" } else { "" };
            writeln!(
                f,
                "{:<14} {:>10.4} {:>10.4} {:>10}{mark}",
                m.model.tag(),
                m.score,
                m.f1,
                eval
            )?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "winner: {} ({} {:.4})",
            self.winner, self.objective, self.winner_metric
        )?;
        writeln!(
            f,
            "oracle {:.4}  random {:.4}  worst {:.4}",
            self.baselines.oracle, self.baselines.random_mean, self.baselines.worst
        )
    }
}

impl fmt::Display for OverheadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "framework_seconds: {:.4}", self.framework_seconds)?;
        writeln!(f, "relate_seconds: {:.4}", self.relate_seconds)?;
        writeln!(f, "oracle_seconds: {:.4}", self.oracle_seconds)?;
        writeln!(f, "reduction_percent: {:.2}", self.reduction_percent)?;
        writeln!(f, "framework_percent: {:.2}", self.framework_percent)
    }
}
