//! Attack-group classification: dataset-level perturbation statistics fed to
//! gradient-boosted decision stumps.

mod features;

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use features::{
    extract_group_features, high_band_ratio, kurtosis, max_mean_ratio, sample_stats, sign_agreement, spectral_flatness,
    wavelet_ratio, FEATURES, FEATURE_NAMES, STATS,
};

use crate::attacks::{attack_samples, AttackGroup, AttackKind, AttackSpec};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::models::Differentiable;
use crate::rng;
use crate::scalar::Real;

pub type FeatureVector = [f64; FEATURES];

const SCALE_FLOOR: f64 = 1e-6;

/// Expresses attacked-data features against the same dataset's clean
/// features: mean statistics become shifts in units of the clean per-sample
/// spread, spread statistics become log ratios to the clean spread.
pub fn relative_features(raw: &FeatureVector, clean: &FeatureVector) -> FeatureVector {
    let mut out = [0.0; FEATURES];
    for j in 0..STATS {
        let sd = clean[STATS + j].max(SCALE_FLOOR);
        out[j] = (raw[j] - clean[j]) / sd;
        out[STATS + j] = ((raw[STATS + j] + SCALE_FLOOR) / sd).ln();
    }
    out
}

/// One training row for the group classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    pub features: FeatureVector,
    pub group: AttackGroup,
    pub dataset: String,
    pub attack: AttackKind,
    /// `None` for the full attacked split, `Some(i)` for the i-th bootstrap.
    pub bootstrap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// Contribution when `x[feature] <= threshold`.
    pub left: f64,
    pub right: f64,
}

impl Stump {
    fn eval(&self, x: &[f64]) -> f64 {
        if x[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Row fraction drawn (without replacement) for each round.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            rounds: 60,
            learning_rate: 0.3,
            lambda: 1.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

/// Boosted stumps on logistic loss. The positive class is Group 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupClassifier {
    pub base_score: f64,
    pub learning_rate: f64,
    pub stumps: Vec<Stump>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn target(g: AttackGroup) -> f64 {
    match g {
        AttackGroup::IterationBased => 0.0,
        AttackGroup::OptimizationDecisionBased => 1.0,
    }
}

impl GroupClassifier {
    /// Raw additive score; leaf weights already include the learning rate.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.stumps.iter().map(|s| s.eval(x)).sum::<f64>()
    }

    /// Probability of Group 2.
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    /// Group and confidence `|2p - 1|`.
    pub fn classify(&self, x: &[f64]) -> Result<(AttackGroup, f64)> {
        if self.stumps.is_empty() {
            return Err(Error::InvalidSpec("group classifier is untrained".into()));
        }
        let p = self.probability(x);
        let group = if p > 0.5 {
            AttackGroup::OptimizationDecisionBased
        } else {
            AttackGroup::IterationBased
        };
        Ok((group, (2.0 * p - 1.0).abs()))
    }
}

fn best_stump(xs: &[&FeatureVector], g: &[f64], h: &[f64], lambda: f64) -> Option<Stump> {
    let (gs, hs): (f64, f64) = (g.iter().sum(), h.iter().sum());
    let parent = gs * gs / (hs + lambda);
    let mut best: Option<(f64, Stump)> = None;
    for f in 0..FEATURES {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]).then(a.cmp(&b)));
        let (mut gl, mut hl) = (0.0, 0.0);
        for w in 0..order.len().saturating_sub(1) {
            let i = order[w];
            gl += g[i];
            hl += h[i];
            let (lo, hi) = (xs[i][f], xs[order[w + 1]][f]);
            if lo == hi {
                continue;
            }
            let (gr, hr) = (gs - gl, hs - hl);
            let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
            if best.as_ref().is_none_or(|(b, _)| gain > *b + 1e-12) {
                best = Some((
                    gain,
                    Stump {
                        feature: f,
                        threshold: lo + (hi - lo) / 2.0,
                        left: -gl / (hl + lambda),
                        right: -gr / (hr + lambda),
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Second-order boosting of depth-1 trees. Deterministic given
/// `config.seed`; with `subsample = 1` the seed has no effect.
pub fn train_group_classifier(data: &[LabeledVector], config: &BoostConfig) -> Result<GroupClassifier> {
    if config.rounds == 0 {
        return Err(Error::InvalidSpec("at least one boosting round is required".into()));
    }
    if !(config.subsample > 0.0 && config.subsample <= 1.0) {
        return Err(Error::InvalidSpec("subsample must lie in (0, 1]".into()));
    }
    let y: Vec<f64> = data.iter().map(|d| target(d.group)).collect();
    let pos = y.iter().filter(|&&v| v > 0.5).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::InvalidSpec(
            "group classifier needs both groups in training".into(),
        ));
    }
    if let Some(d) = data.iter().find(|d| d.features.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidSpec(format!(
            "non-finite group features for {}/{}",
            d.dataset, d.attack
        )));
    }
    let prior = pos as f64 / y.len() as f64;
    let mut model = GroupClassifier {
        base_score: (prior / (1.0 - prior)).ln(),
        learning_rate: config.learning_rate,
        stumps: Vec::with_capacity(config.rounds),
    };
    let mut margin = vec![model.base_score; data.len()];
    let mut rng = rng::rng(rng::derive(config.seed, &[rng::tag("boost")]));
    let take = ((data.len() as f64 * config.subsample).round() as usize).clamp(1, data.len());
    for _ in 0..config.rounds {
        let rows: Vec<usize> = if take == data.len() {
            (0..data.len()).collect()
        } else {
            let mut r = sample_indices(&mut rng, data.len(), take).into_vec();
            r.sort_unstable();
            r
        };
        let xs: Vec<&FeatureVector> = rows.iter().map(|&i| &data[i].features).collect();
        let (g, h): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .map(|&i| {
                let p = sigmoid(margin[i]);
                (p - y[i], (p * (1.0 - p)).max(1e-12))
            })
            .unzip();
        let Some(mut stump) = best_stump(&xs, &g, &h, config.lambda) else {
            break;
        };
        stump.left *= config.learning_rate;
        stump.right *= config.learning_rate;
        for (m, d) in margin.iter_mut().zip(data) {
            *m += stump.eval(&d.features);
        }
        model.stumps.push(stump);
    }
    if model.stumps.is_empty() {
        return Err(Error::InvalidSpec("no split separates the training vectors".into()));
    }
    Ok(model)
}

/// Classifies `samples` against `clean`, the raw features of the same
/// dataset's clean training split.
pub fn predict_group<T: Real>(
    clf: &GroupClassifier,
    samples: &[Sample<T>],
    clean: &FeatureVector,
) -> Result<(AttackGroup, f64)> {
    clf.classify(&relative_features(&extract_group_features(samples)?, clean))
}

/// Training rows for one dataset: each attack applied to `samples` through
/// `model`, then [`labeled_vectors`] on the result. The attack seed is
/// `derive(seed, [tag(dataset), tag(kind)])`.
#[allow(clippy::too_many_arguments)]
pub fn group_training_vectors<T: Real, M: Differentiable<T>>(
    dataset: &str,
    model: &M,
    samples: &[Sample<T>],
    clean: &FeatureVector,
    attacks: &[AttackSpec],
    bootstrap: usize,
    subset: usize,
    seed: u64,
) -> Result<Vec<LabeledVector>> {
    let mut out = Vec::new();
    for spec in attacks {
        let attack_seed = rng::derive(seed, &[rng::tag(dataset), rng::tag(spec.kind.tag())]);
        let adv = attack_samples(model, samples, spec, attack_seed)?;
        out.extend(labeled_vectors(
            dataset,
            spec.kind,
            &adv,
            clean,
            bootstrap,
            subset,
            attack_seed,
        )?);
    }
    Ok(out)
}

/// One vector for the full attacked set plus `bootstrap` vectors from random
/// subsets of `subset` samples drawn with replacement. Features are relative
/// to `clean`.
pub fn labeled_vectors<T: Real>(
    dataset: &str,
    kind: AttackKind,
    attacked: &[Sample<T>],
    clean: &FeatureVector,
    bootstrap: usize,
    subset: usize,
    seed: u64,
) -> Result<Vec<LabeledVector>> {
    let row = |features, bootstrap| LabeledVector {
        features,
        group: kind.group(),
        dataset: dataset.to_string(),
        attack: kind,
        bootstrap,
    };
    let mut out = vec![row(relative_features(&extract_group_features(attacked)?, clean), None)];
    let mut rng = rng::rng(rng::derive(seed, &[rng::tag("bootstrap")]));
    let k = subset.max(2);
    for b in 0..bootstrap {
        let pick: Vec<Sample<T>> = (0..k)
            .map(|_| attacked[rng.random_range(0..attacked.len())].clone())
            .collect();
        out.push(row(relative_features(&extract_group_features(&pick)?, clean), Some(b)));
    }
    Ok(out)
}

/// Fraction of rows whose predicted group matches the label.
pub fn group_accuracy(clf: &GroupClassifier, rows: &[LabeledVector]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut ok = 0usize;
    for r in rows {
        if clf.classify(&r.features)?.0 == r.group {
            ok += 1;
        }
    }
    Ok(ok as f64 / rows.len() as f64)
}
