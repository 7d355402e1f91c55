//! The seven adversarial attacks and the attack-success-rate metric.
//!
//! Group 1 (iteration-based: FGSM, BIM, MIM, AutoPGD) keeps every output in
//! the `l_inf` ball of radius `epsilon` around the input. Group 2
//! (optimization/decision-based: DeepFool, ElasticNet, Boundary) ignores
//! `epsilon`. The boundary attack only sees predicted labels.

mod boundary;
mod deepfool;
mod elastic;
mod gradient;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use boundary::{boundary_attack, BoundaryOutcome};
pub use deepfool::{deepfool, DeepFoolOutcome};
pub use elastic::{elastic_net, soft_threshold, ElasticNetOutcome};
pub use gradient::{auto_pgd, auto_pgd_traced, bim, fgsm, mim, PgdTrace};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::models::{predictions, Classifier, Differentiable};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttackKind {
    #[serde(rename = "fgsm")]
    Fgsm,
    #[serde(rename = "bim")]
    Bim,
    #[serde(rename = "mim")]
    Mim,
    #[serde(rename = "autopgd")]
    AutoPgd,
    #[serde(rename = "deepfool")]
    DeepFool,
    #[serde(rename = "elasticnet")]
    ElasticNet,
    #[serde(rename = "boundary")]
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttackGroup {
    /// FGSM, BIM, MIM, AutoPGD.
    #[serde(rename = "group1")]
    IterationBased,
    /// DeepFool, ElasticNet, Boundary.
    #[serde(rename = "group2")]
    OptimizationDecisionBased,
}

impl AttackKind {
    pub const ALL: [AttackKind; 7] = [
        AttackKind::Fgsm,
        AttackKind::Bim,
        AttackKind::Mim,
        AttackKind::AutoPgd,
        AttackKind::DeepFool,
        AttackKind::ElasticNet,
        AttackKind::Boundary,
    ];

    pub fn group(self) -> AttackGroup {
        match self {
            AttackKind::Fgsm | AttackKind::Bim | AttackKind::Mim | AttackKind::AutoPgd => AttackGroup::IterationBased,
            AttackKind::DeepFool | AttackKind::ElasticNet | AttackKind::Boundary => {
                AttackGroup::OptimizationDecisionBased
            }
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            AttackKind::Fgsm => "fgsm",
            AttackKind::Bim => "bim",
            AttackKind::Mim => "mim",
            AttackKind::AutoPgd => "autopgd",
            AttackKind::DeepFool => "deepfool",
            AttackKind::ElasticNet => "elasticnet",
            AttackKind::Boundary => "boundary",
        }
    }

    /// Whether the attack's budget is the `l_inf` radius `epsilon`.
    pub fn uses_epsilon(self) -> bool {
        self.group() == AttackGroup::IterationBased
    }
}

impl AttackGroup {
    pub const ALL: [AttackGroup; 2] = [AttackGroup::IterationBased, AttackGroup::OptimizationDecisionBased];

    pub fn attacks(self) -> Vec<AttackKind> {
        AttackKind::ALL.into_iter().filter(|a| a.group() == self).collect()
    }

    pub fn tag(self) -> &'static str {
        match self {
            AttackGroup::IterationBased => "group1",
            AttackGroup::OptimizationDecisionBased => "group2",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl fmt::Display for AttackGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackGroup::IterationBased => "Group1 (iteration-based)",
            AttackGroup::OptimizationDecisionBased => "Group2 (optimization/decision-based)",
        })
    }
}

impl FromStr for AttackKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        AttackKind::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown attack `{s}`")))
    }
}

pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// `l_inf` radius for Group 1 attacks; ignored by Group 2.
    pub epsilon: f64,
    pub iterations: usize,
    /// MIM momentum decay.
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    /// ElasticNet L1 weight, applied as the soft-threshold level.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Optional value range for datasets with declared bounds.
    #[serde(default)]
    pub clip: Option<(f64, f64)>,
}

fn default_momentum() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    0.01
}

impl AttackSpec {
    /// Spec with the default iteration budget for `kind`.
    pub fn new(kind: AttackKind, epsilon: f64) -> Self {
        let iterations = match kind {
            AttackKind::Fgsm => 1,
            AttackKind::Bim | AttackKind::Mim | AttackKind::AutoPgd => 10,
            AttackKind::DeepFool => 50,
            AttackKind::ElasticNet => 100,
            AttackKind::Boundary => 500,
        };
        Self {
            kind,
            epsilon,
            iterations,
            momentum: default_momentum(),
            beta: default_beta(),
            clip: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidSpec(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        let min_iters = if self.kind == AttackKind::AutoPgd { 2 } else { 1 };
        if self.iterations < min_iters {
            return Err(Error::InvalidSpec(format!(
                "{} needs at least {min_iters} iterations",
                self.kind
            )));
        }
        if self.momentum < 0.0 {
            return Err(Error::InvalidSpec("momentum must be non-negative".into()));
        }
        if self.kind == AttackKind::ElasticNet && self.beta <= 0.0 {
            return Err(Error::InvalidSpec("elastic-net beta must be positive".into()));
        }
        if let Some((lo, hi)) = self.clip {
            if lo >= hi {
                return Err(Error::InvalidSpec("clip range is empty".into()));
            }
        }
        Ok(())
    }

    /// Short label such as `fgsm@0.1` or `boundary`.
    pub fn label(&self) -> String {
        if self.kind.uses_epsilon() {
            format!("{}@{}", self.kind, self.epsilon)
        } else {
            self.kind.tag().to_string()
        }
    }
}

/// One attacked sample. Per-sample failures are flagged, not raised.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackedSample<T> {
    pub sample: Sample<T>,
    /// The model's prediction differs from the true label.
    pub adversarial: bool,
    pub failure: Option<String>,
}

pub(crate) fn check_shape<T: Real, M: Classifier<T> + ?Sized>(model: &M, x: &Sample<T>) -> Result<()> {
    if x.shape() != model.input_shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", model.input_shape()),
            got: format!("{:?}", x.shape()),
        });
    }
    Ok(())
}

fn clip_values<T: Real>(values: &mut [T], clip: Option<(f64, f64)>) {
    if let Some((lo, hi)) = clip {
        let (lo, hi) = (T::lit(lo), T::lit(hi));
        values.iter_mut().for_each(|v| *v = v.max(lo).min(hi));
    }
}

/// Applies one attack to a single sample.
pub fn attack_sample<T: Real, M: Differentiable<T>>(
    model: &M,
    x: &Sample<T>,
    spec: &AttackSpec,
    seed: u64,
) -> Result<AttackedSample<T>> {
    spec.validate()?;
    check_shape(model, x)?;
    let eps = T::lit(spec.epsilon);
    let label = x.label;
    let (mut out, failure) = match spec.kind {
        AttackKind::Fgsm => (fgsm(model, x, label, eps)?, None),
        AttackKind::Bim => (bim(model, x, label, eps, spec.iterations)?, None),
        AttackKind::Mim => (mim(model, x, label, eps, spec.iterations, T::lit(spec.momentum))?, None),
        AttackKind::AutoPgd => (auto_pgd(model, x, label, eps, spec.iterations)?, None),
        AttackKind::DeepFool => {
            let r = deepfool(model, x, label, spec.iterations)?;
            let f = (!r.adversarial).then(|| "not adversarial".to_string());
            (r.sample, f)
        }
        AttackKind::ElasticNet => {
            let r = elastic_net(model, x, label, spec.iterations, T::lit(spec.beta))?;
            let f = (!r.adversarial).then(|| "not adversarial".to_string());
            (r.sample, f)
        }
        AttackKind::Boundary => match boundary_attack(model, x, label, spec.iterations, seed) {
            Ok(r) => (r.sample, None),
            Err(Error::AttackInit) => (x.clone(), Some(Error::AttackInit.to_string())),
            Err(e) => return Err(e),
        },
    };
    if spec.clip.is_some() {
        let mut v = out.values().to_vec();
        clip_values(&mut v, spec.clip);
        out = out.with_values(v);
    }
    let adversarial = model.predict(out.values()) != label;
    Ok(AttackedSample {
        sample: out,
        adversarial,
        failure,
    })
}

/// Element-wise attack; labels, order and shapes are preserved. Sample `i`
/// draws randomness from `derive(seed, [i])`.
pub fn attack_dataset<T: Real, M: Differentiable<T>>(
    model: &M,
    samples: &[Sample<T>],
    spec: &AttackSpec,
    seed: u64,
) -> Result<Vec<AttackedSample<T>>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| attack_sample(model, s, spec, rng::derive(seed, &[i as u64])))
        .collect()
}

/// Convenience: attacked samples only.
pub fn attack_samples<T: Real, M: Differentiable<T>>(
    model: &M,
    samples: &[Sample<T>],
    spec: &AttackSpec,
    seed: u64,
) -> Result<Vec<Sample<T>>> {
    Ok(attack_dataset(model, samples, spec, seed)?
        .into_iter()
        .map(|a| a.sample)
        .collect())
}

/// Fraction of aligned pairs whose predicted label changes under attack.
pub fn attack_success_rate<T: Real, M: Classifier<T> + ?Sized>(
    model: &M,
    clean: &[Sample<T>],
    attacked: &[Sample<T>],
) -> Result<f64> {
    if clean.len() != attacked.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} attacked samples", clean.len()),
            got: format!("{}", attacked.len()),
        });
    }
    if clean.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(asr_from(&predictions(model, clean), &predictions(model, attacked)))
}

pub fn asr_from(clean_pred: &[usize], attacked_pred: &[usize]) -> f64 {
    let changed = clean_pred.iter().zip(attacked_pred).filter(|(a, b)| a != b).count();
    changed as f64 / clean_pred.len() as f64
}
