//! Desk-scale classifier zoo, SGD training with best-epoch selection, grid
//! tuning, and accuracy / macro-F1.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::nn::{cross_entropy, softmax, Layer, Network, Padding};
use crate::rng;
use crate::scalar::{argmax, Real};

/// Label-only access to a classifier. Decision-based attacks are written
/// against this trait so they cannot observe gradients.
pub trait Classifier<T: Real> {
    fn input_shape(&self) -> (usize, usize);
    fn num_classes(&self) -> usize;
    /// Predicted class for channel-major `values`.
    fn predict(&self, values: &[T]) -> usize;
}

/// White-box access: logits and input-space vector-Jacobian products.
pub trait Differentiable<T: Real>: Classifier<T> {
    fn logits(&self, values: &[T]) -> Vec<T>;

    /// Returns the logits `z` and `J(x)^T c(z)`, the input gradient of the
    /// scalar whose logit-gradient is `cotangent(z)`.
    fn pullback(&self, values: &[T], cotangent: &dyn Fn(&[T]) -> Vec<T>) -> (Vec<T>, Vec<T>);

    /// Cross-entropy loss and its gradient with respect to the input.
    fn loss_and_input_gradient(&self, values: &[T], label: usize) -> (T, Vec<T>) {
        let (z, g) = self.pullback(values, &|z| {
            let mut d = softmax(z);
            // 1 - p_y loses everything below machine epsilon; summing the
            // other probabilities does not.
            d[label] = T::zero();
            d[label] = -d.iter().copied().sum::<T>();
            d
        });
        (cross_entropy(&z, label), g)
    }

    /// Cross-entropy loss and a positive multiple of its input gradient.
    /// On confidently classified inputs the true gradient underflows to
    /// exactly zero; this direction stays representable, which is all that
    /// sign and normalized steps need.
    fn loss_and_ascent_direction(&self, values: &[T], label: usize) -> (T, Vec<T>) {
        let (z, g) = self.pullback(values, &|z| ascent_cotangent(z, label));
        (cross_entropy(&z, label), g)
    }
}

/// `softmax(z) - onehot(label)` divided by the largest non-label
/// probability, computed in log space.
fn ascent_cotangent<T: Real>(z: &[T], label: usize) -> Vec<T> {
    let m = z
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != label)
        .fold(T::neg_infinity(), |a, (_, &b)| a.max(b));
    if !m.is_finite() {
        return vec![T::zero(); z.len()];
    }
    let mut d: Vec<T> = z
        .iter()
        .enumerate()
        .map(|(k, &v)| if k == label { T::zero() } else { (v - m).exp() })
        .collect();
    let others: T = d.iter().copied().sum();
    // Rescaled p_y - 1 = -(sum of other p) / p_max.
    d[label] = -others;
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "mlp")]
    Mlp,
    #[serde(rename = "fcn-s")]
    FcnS,
    #[serde(rename = "fcn-l")]
    FcnL,
    #[serde(rename = "tcn-lite")]
    TcnLite,
    #[serde(rename = "meanpool-mlp")]
    MeanPoolMlp,
}

impl Architecture {
    pub const ALL: [Architecture; 6] = [
        Architecture::Linear,
        Architecture::Mlp,
        Architecture::FcnS,
        Architecture::FcnL,
        Architecture::TcnLite,
        Architecture::MeanPoolMlp,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Architecture::Linear => "linear",
            Architecture::Mlp => "mlp",
            Architecture::FcnS => "fcn-s",
            Architecture::FcnL => "fcn-l",
            Architecture::TcnLite => "tcn-lite",
            Architecture::MeanPoolMlp => "meanpool-mlp",
        }
    }

    fn layers<T: Real>(self, (c, l): (usize, usize), classes: usize, w: usize) -> Vec<Layer<T>> {
        use Padding::{Causal, Same};
        match self {
            Architecture::Linear => vec![Layer::dense(c * l, classes, false)],
            Architecture::Mlp => vec![Layer::dense(c * l, w, true), Layer::dense(w, classes, false)],
            Architecture::FcnS => vec![
                Layer::conv(c, w, 5, 1, Same),
                Layer::conv(w, w, 3, 1, Same),
                Layer::GlobalMaxPool,
                Layer::dense(w, classes, false),
            ],
            Architecture::FcnL => vec![
                Layer::conv(c, w, 7, 1, Same),
                Layer::conv(w, 2 * w, 5, 1, Same),
                Layer::conv(2 * w, w, 3, 1, Same),
                Layer::GlobalMaxPool,
                Layer::dense(w, classes, false),
            ],
            Architecture::TcnLite => vec![
                Layer::conv(c, w, 3, 1, Causal),
                Layer::conv(w, w, 3, 2, Causal),
                Layer::GlobalMeanPool,
                Layer::dense(w, classes, false),
            ],
            Architecture::MeanPoolMlp => vec![
                Layer::GlobalMeanPool,
                Layer::dense(c, w, true),
                Layer::dense(w, classes, false),
            ],
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown architecture `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    /// Hidden units (MLPs) or base filter count (convolutional models).
    pub width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
}

fn default_batch() -> usize {
    16
}

fn default_momentum() -> f64 {
    0.9
}

/// Optimizer schedule shared by zoo models and embedding encoders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
}

pub const DEFAULT_LEARNING_RATES: [f64; 2] = [0.1, 0.01];
pub const DEFAULT_WIDTHS: [usize; 2] = [16, 32];
pub const DEFAULT_EPOCHS: usize = 30;

impl ModelSpec {
    pub fn new(architecture: Architecture, width: usize, learning_rate: f64, epochs: usize) -> Self {
        Self {
            architecture,
            width,
            learning_rate,
            epochs,
            batch_size: default_batch(),
            momentum: default_momentum(),
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            momentum: self.momentum,
        }
    }

    /// Model id used in benchmark records.
    pub fn id(&self) -> &'static str {
        self.architecture.tag()
    }

    pub fn build<T: Real>(&self, input_shape: (usize, usize), classes: usize) -> Network<T> {
        Network::new(input_shape, self.architecture.layers(input_shape, classes, self.width))
    }

    /// Deterministic training-cost proxy: forward MACs times sample-epochs.
    pub fn training_cost(&self, input_shape: (usize, usize), classes: usize, train_size: usize) -> u64 {
        let macs = self.build::<f64>(input_shape, classes).macs() as u64;
        macs * (self.epochs * train_size) as u64
    }

    fn check(&self) -> Result<()> {
        if self.width == 0 || self.batch_size == 0 {
            return Err(Error::InvalidSpec("width and batch size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidSpec("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidSpec("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Learning rate x width grid at the default epoch budget, in grid order.
pub fn default_grid(architecture: Architecture) -> Vec<ModelSpec> {
    DEFAULT_LEARNING_RATES
        .iter()
        .flat_map(|&lr| {
            DEFAULT_WIDTHS
                .iter()
                .map(move |&w| ModelSpec::new(architecture, w, lr, DEFAULT_EPOCHS))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrainedModel<T> {
    pub spec: ModelSpec,
    pub classes: usize,
    pub network: Network<T>,
}

impl<T: Real> TrainedModel<T> {
    /// Freshly initialized (untrained) model.
    pub fn initialized(spec: &ModelSpec, input_shape: (usize, usize), classes: usize, seed: u64) -> Self {
        let mut network = spec.build(input_shape, classes);
        network.init(&mut rng::rng(rng::derive(seed, &[rng::tag("init")])));
        Self {
            spec: spec.clone(),
            classes,
            network,
        }
    }

    fn check_shape(&self, sample: &Sample<T>) -> Result<()> {
        if sample.shape() != self.network.input_shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.network.input_shape),
                got: format!("{:?}", sample.shape()),
            });
        }
        Ok(())
    }

    /// Logits and class probabilities.
    pub fn forward(&self, sample: &Sample<T>) -> Result<(Vec<T>, Vec<T>)> {
        self.check_shape(sample)?;
        let z = self.network.forward(sample.values());
        let p = softmax(&z);
        Ok((z, p))
    }

    pub fn loss_and_gradient(&self, sample: &Sample<T>, label: usize) -> Result<(T, Vec<T>)> {
        self.check_shape(sample)?;
        if label >= self.classes {
            return Err(Error::InvalidSpec(format!("label {label} >= classes {}", self.classes)));
        }
        Ok(self.loss_and_input_gradient(sample.values(), label))
    }

    pub fn predict_sample(&self, sample: &Sample<T>) -> usize {
        self.predict(sample.values())
    }

    pub fn to_record(&self) -> ModelRecord {
        ModelRecord {
            architecture: self.spec.architecture,
            input_shape: self.network.input_shape,
            classes: self.classes,
            spec: self.spec.clone(),
            params: self
                .network
                .layers
                .iter()
                .flat_map(|l| l.params().iter().map(|p| p.as_f64()))
                .collect(),
        }
    }

    pub fn from_record(rec: &ModelRecord) -> Result<Self> {
        let mut network: Network<T> = rec.spec.build(rec.input_shape, rec.classes);
        if network.param_count() != rec.params.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", network.param_count()),
                got: format!("{}", rec.params.len()),
            });
        }
        let mut it = rec.params.iter();
        for layer in &mut network.layers {
            for p in layer.params_mut() {
                *p = T::lit(*it.next().expect("count checked"));
            }
        }
        Ok(Self {
            spec: rec.spec.clone(),
            classes: rec.classes,
            network,
        })
    }
}

/// Flat persisted form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub architecture: Architecture,
    pub input_shape: (usize, usize),
    pub classes: usize,
    pub spec: ModelSpec,
    pub params: Vec<f64>,
}

impl<T: Real> Classifier<T> for TrainedModel<T> {
    fn input_shape(&self) -> (usize, usize) {
        self.network.input_shape
    }

    fn num_classes(&self) -> usize {
        self.classes
    }

    fn predict(&self, values: &[T]) -> usize {
        argmax(&self.network.forward(values))
    }
}

impl<T: Real> Differentiable<T> for TrainedModel<T> {
    fn logits(&self, values: &[T]) -> Vec<T> {
        self.network.forward(values)
    }

    fn pullback(&self, values: &[T], cotangent: &dyn Fn(&[T]) -> Vec<T>) -> (Vec<T>, Vec<T>) {
        let tr = self.network.forward_trace(values, None);
        let d = cotangent(&tr.logits);
        let g = self.network.backward(&tr, &d, None);
        (tr.logits, g)
    }
}

/// Trains a network by minibatch SGD with momentum on `train`, keeping the
/// parameters of the epoch with the best validation accuracy (earliest on
/// ties). With `epochs == 0` the initialized network is returned.
pub fn train_network<T: Real>(
    network: &mut Network<T>,
    train: &[Sample<T>],
    val: &[Sample<T>],
    spec: &Schedule,
    seed: u64,
    use_dropout: bool,
) -> Result<f64> {
    if spec.batch_size == 0 {
        return Err(Error::InvalidSpec("batch size must be positive".into()));
    }
    let mut shuffle_rng = rng::rng(rng::derive(seed, &[rng::tag("shuffle")]));
    let mut dropout_rng = rng::rng(rng::derive(seed, &[rng::tag("dropout")]));
    let eval_set = if val.is_empty() { train } else { val };
    let mut velocity = network.zero_grads();
    let lr = T::lit(spec.learning_rate);
    let mu = T::lit(spec.momentum);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut best_acc: Option<f64> = None;
    let mut best = network.clone();
    for epoch in 0..spec.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(spec.batch_size) {
            let mut grads = network.zero_grads();
            for &i in batch {
                let s = &train[i];
                let tr = network.forward_trace(s.values(), use_dropout.then_some(&mut dropout_rng));
                if !cross_entropy(&tr.logits, s.label).is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                let mut d = softmax(&tr.logits);
                d[s.label] -= T::one();
                network.backward(&tr, &d, Some(&mut grads));
            }
            let scale = T::one() / T::from_count(batch.len());
            for (layer, (v, g)) in network.layers.iter_mut().zip(velocity.iter_mut().zip(&grads)) {
                for ((p, vi), &gi) in layer.params_mut().iter_mut().zip(v.iter_mut()).zip(g) {
                    *vi = mu * *vi + gi * scale;
                    *p -= lr * *vi;
                }
            }
        }
        if !network.params_finite() {
            return Err(Error::Divergence { epoch });
        }
        let acc = eval_set
            .iter()
            .filter(|s| argmax(&network.forward(s.values())) == s.label)
            .count() as f64
            / eval_set.len().max(1) as f64;
        if best_acc.is_none_or(|b| acc > b) {
            best_acc = Some(acc);
            best = network.clone();
        }
    }
    *network = best;
    Ok(best_acc.unwrap_or(0.0))
}

/// Trains `spec` on `dataset.train`, selecting the epoch by `dataset.val`.
pub fn train<T: Real>(spec: &ModelSpec, dataset: &Dataset<T>, seed: u64) -> Result<TrainedModel<T>> {
    spec.check()?;
    dataset.validate()?;
    let mut model = TrainedModel::initialized(spec, dataset.shape(), dataset.classes, seed);
    train_network(
        &mut model.network,
        &dataset.train,
        &dataset.val,
        &spec.schedule(),
        seed,
        false,
    )?;
    Ok(model)
}

#[derive(Debug, Clone)]
pub struct Tuned<T> {
    pub spec: ModelSpec,
    pub model: TrainedModel<T>,
    pub val_accuracy: f64,
}

/// Exhaustive grid search by validation accuracy; ties go to the lower
/// [`ModelSpec::training_cost`], then to the earlier grid entry. Grid points
/// whose training diverges are skipped; if all diverge the last error is
/// returned.
pub fn tune<T: Real>(grid: &[ModelSpec], dataset: &Dataset<T>, seed: u64) -> Result<Tuned<T>> {
    if grid.is_empty() {
        return Err(Error::InvalidSpec("empty hyperparameter grid".into()));
    }
    let mut best: Option<(Tuned<T>, u64)> = None;
    let mut last_err = None;
    for spec in grid {
        let model = match train(spec, dataset, seed) {
            Ok(m) => m,
            Err(e @ Error::Divergence { .. }) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let val = if dataset.val.is_empty() {
            &dataset.train
        } else {
            &dataset.val
        };
        let acc = accuracy(&model, val)?;
        let cost = spec.training_cost(dataset.shape(), dataset.classes, dataset.train.len());
        let better = match &best {
            None => true,
            Some((b, bc)) => acc > b.val_accuracy || (acc == b.val_accuracy && cost < *bc),
        };
        if better {
            best = Some((
                Tuned {
                    spec: spec.clone(),
                    model,
                    val_accuracy: acc,
                },
                cost,
            ));
        }
    }
    best.map(|(t, _)| t).ok_or_else(|| last_err.expect("non-empty grid"))
}

pub fn predictions<T: Real, C: Classifier<T> + ?Sized>(model: &C, samples: &[Sample<T>]) -> Vec<usize> {
    samples.iter().map(|s| model.predict(s.values())).collect()
}

pub fn accuracy<T: Real, C: Classifier<T> + ?Sized>(model: &C, samples: &[Sample<T>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let truth: Vec<usize> = samples.iter().map(|s| s.label).collect();
    Ok(accuracy_from(&truth, &predictions(model, samples)))
}

pub fn f1_macro<T: Real, C: Classifier<T> + ?Sized>(model: &C, samples: &[Sample<T>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let truth: Vec<usize> = samples.iter().map(|s| s.label).collect();
    Ok(f1_macro_from(&truth, &predictions(model, samples)))
}

pub fn accuracy_from(truth: &[usize], pred: &[usize]) -> f64 {
    let hits = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Unweighted mean of per-class F1 over classes present in either `truth`
/// or `pred`; a class with `P + R = 0` contributes 0.
pub fn f1_macro_from(truth: &[usize], pred: &[usize]) -> f64 {
    let classes: BTreeSet<usize> = truth.iter().chain(pred).copied().collect();
    let total: f64 = classes
        .iter()
        .map(|&k| {
            let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == k && p == k).count() as f64;
            let fp = truth.iter().zip(pred).filter(|&(&t, &p)| t != k && p == k).count() as f64;
            let fn_ = truth.iter().zip(pred).filter(|&(&t, &p)| t == k && p != k).count() as f64;
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            }
        })
        .sum();
    total / classes.len() as f64
}
