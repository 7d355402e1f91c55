use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::models::{train_network, Classifier, Differentiable, Schedule};
use crate::nn::{Layer, Network, Padding};
use crate::rng;
use crate::scalar::{argmax, Real};

pub const EMBEDDING_DIM: usize = 128;
const POOL_BINS: usize = 4;
/// Layers up to and including the adaptive pool.
const EMBED_LAYERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub schedule: Schedule,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule {
                learning_rate: 0.01,
                epochs: 3,
                batch_size: 16,
                momentum: 0.9,
            },
            dropout: 0.25,
        }
    }
}

/// conv(C->16, k5) -> conv(16->32, k5) -> adaptive max pool(4) -> dropout ->
/// linear(128 -> K). The embedding is the pooled 128-vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EmbeddingEncoder<T> {
    pub network: Network<T>,
    pub classes: usize,
}

impl<T: Real> EmbeddingEncoder<T> {
    /// Untrained encoder. The initialization stream depends on `seed` only,
    /// so encoders for different datasets start from the same draws.
    pub fn initialized(input_shape: (usize, usize), classes: usize, dropout: f64, seed: u64) -> Self {
        let (c, _) = input_shape;
        let mut network = Network::new(
            input_shape,
            vec![
                Layer::conv(c, 16, 5, 1, Padding::Same),
                Layer::conv(16, 32, 5, 1, Padding::Same),
                Layer::AdaptiveMaxPool { bins: POOL_BINS },
                Layer::Dropout { rate: dropout },
                Layer::dense(32 * POOL_BINS, classes, false),
            ],
        );
        network.init(&mut rng::rng(rng::derive(seed, &[rng::tag("encoder-init")])));
        Self { network, classes }
    }

    pub fn embed(&self, sample: &Sample<T>) -> Result<Vec<T>> {
        if sample.shape() != self.network.input_shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.network.input_shape),
                got: format!("{:?}", sample.shape()),
            });
        }
        Ok(self.network.forward_prefix(sample.values(), EMBED_LAYERS))
    }
}

impl<T: Real> Classifier<T> for EmbeddingEncoder<T> {
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

impl<T: Real> Differentiable<T> for EmbeddingEncoder<T> {
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

/// Classification training on the train split (best validation epoch kept),
/// dropout active only here.
pub fn train_encoder<T: Real>(dataset: &Dataset<T>, config: &EncoderConfig, seed: u64) -> Result<EmbeddingEncoder<T>> {
    dataset.validate()?;
    if !(0.0..1.0).contains(&config.dropout) {
        return Err(Error::InvalidSpec("dropout rate must lie in [0, 1)".into()));
    }
    let mut enc = EmbeddingEncoder::initialized(dataset.shape(), dataset.classes, config.dropout, seed);
    train_network(
        &mut enc.network,
        &dataset.train,
        &dataset.val,
        &config.schedule,
        rng::derive(seed, &[rng::tag("encoder-train")]),
        true,
    )?;
    Ok(enc)
}

/// L2-normalized mean embedding of a sample collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEmbedding {
    pub vector: Vec<f64>,
    pub dataset: String,
    /// `clean`, an attack label, or a segment pattern id.
    pub condition: String,
}

pub fn dataset_embedding<T: Real>(
    encoder: &EmbeddingEncoder<T>,
    samples: &[Sample<T>],
    dataset: &str,
    condition: &str,
) -> Result<DatasetEmbedding> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sum = vec![0.0f64; EMBEDDING_DIM];
    for s in samples {
        for (a, v) in sum.iter_mut().zip(encoder.embed(s)?) {
            *a += v.as_f64();
        }
    }
    let n = samples.len() as f64;
    sum.iter_mut().for_each(|v| *v /= n);
    let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegenerateEmbedding);
    }
    sum.iter_mut().for_each(|v| *v /= norm);
    Ok(DatasetEmbedding {
        vector: sum,
        dataset: dataset.to_string(),
        condition: condition.to_string(),
    })
}
