//! Multivariate time-series containers, stratified 80/20 partitioning,
//! the synthetic stand-in generator and the on-disk text format.

mod io;
mod pattern;
mod synth;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use io::{read_dataset, read_split, write_dataset, write_split, SplitHeader};
pub use pattern::{SegmentPattern, SegmentStatus, PATTERN_SEGMENTS};
pub use synth::{generate_synthetic_dataset, SynthSpec};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// One labeled series, stored channel-major: all of channel 0, then channel 1, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Sample<T> {
    values: Vec<T>,
    channels: usize,
    length: usize,
    pub label: usize,
}

impl<T: Real> Sample<T> {
    pub fn new(values: Vec<T>, channels: usize, length: usize, label: usize) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(Error::InvalidSpec(format!(
                "sample shape {channels}x{length} must be non-empty"
            )));
        }
        if values.len() != channels * length {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", channels * length),
                got: format!("{}", values.len()),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            values,
            channels,
            length,
            label,
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.length)
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.values[c * self.length..(c + 1) * self.length]
    }

    /// Same shape and label, new values. Panics on a length mismatch, which
    /// is always a bug in the caller.
    pub fn with_values(&self, values: Vec<T>) -> Self {
        assert_eq!(values.len(), self.values.len(), "value count must match shape");
        Self {
            values,
            channels: self.channels,
            length: self.length,
            label: self.label,
        }
    }

    pub fn cast<U: Real>(&self) -> Sample<U> {
        Sample {
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
            channels: self.channels,
            length: self.length,
            label: self.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Dataset<T> {
    pub name: String,
    pub classes: usize,
    pub channels: usize,
    pub length: usize,
    pub train: Vec<Sample<T>>,
    pub val: Vec<Sample<T>>,
    pub test: Vec<Sample<T>>,
}

impl<T: Real> Dataset<T> {
    /// Checks shape agreement, label range and that every class occurs in
    /// the training split.
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.length == 0 || self.classes == 0 {
            return Err(Error::InvalidSpec(format!(
                "dataset {}: channels, length and classes must be positive",
                self.name
            )));
        }
        for (split, samples) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for (i, s) in samples.iter().enumerate() {
                if s.shape() != (self.channels, self.length) {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{}x{}", self.channels, self.length),
                        got: format!("{}x{} ({split}[{i}])", s.channels(), s.length()),
                    });
                }
                if s.label >= self.classes {
                    return Err(Error::InvalidSpec(format!(
                        "{split}[{i}] label {} >= classes {}",
                        s.label, self.classes
                    )));
                }
            }
        }
        let mut seen = vec![false; self.classes];
        for s in &self.train {
            seen[s.label] = true;
        }
        if let Some(k) = seen.iter().position(|&b| !b) {
            return Err(Error::InvalidSpec(format!(
                "dataset {}: class {k} missing from train split",
                self.name
            )));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.length)
    }
}

/// `ceil(0.8 * n)` in integer arithmetic.
pub fn train_count(n: usize) -> usize {
    (4 * n).div_ceil(5)
}

/// 80/20 train/validation split.
///
/// The validation size is always `n - ceil(0.8 n)`. When every class has at
/// least five samples the validation quota is spread over classes by largest
/// remainder (ties to the lower class index); otherwise the split is uniform.
/// Both partitions keep the pool's original order.
pub fn split_dataset<T: Real>(pool: &[Sample<T>], seed: u64) -> Result<(Vec<Sample<T>>, Vec<Sample<T>>)> {
    if pool.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = pool.len();
    let n_val = n - train_count(n);
    let mut rng = rng::rng(rng::derive(seed, &[rng::tag("split")]));

    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in pool.iter().enumerate() {
        by_class.entry(s.label).or_default().push(i);
    }
    let stratify = by_class.values().all(|idx| idx.len() >= 5);

    let mut is_val = vec![false; n];
    if stratify {
        let quotas = largest_remainder(&by_class.values().map(Vec::len).collect::<Vec<_>>(), n_val);
        for (idx, quota) in by_class.values().zip(quotas) {
            let mut idx = idx.clone();
            idx.shuffle(&mut rng);
            for &i in &idx[..quota] {
                is_val[i] = true;
            }
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        for &i in &idx[..n_val] {
            is_val[i] = true;
        }
    }

    let (mut train, mut val) = (Vec::with_capacity(n - n_val), Vec::with_capacity(n_val));
    for (s, v) in pool.iter().zip(is_val) {
        if v {
            val.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((train, val))
}

/// Apportions `total` over groups proportionally to `sizes`.
fn largest_remainder(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let mut quotas: Vec<usize> = sizes.iter().map(|&s| s * total / n).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // remainder numerators, larger first, stable on index
    order.sort_by_key(|&i| std::cmp::Reverse((sizes[i] * total) % n));
    let mut left = total - quotas.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if quotas[i] < sizes[i] {
            quotas[i] += 1;
            left -= 1;
        }
    }
    quotas
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(labels: &[usize]) -> Vec<Sample<f64>> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Sample::new(vec![i as f64, 0.5], 1, 2, l).unwrap())
            .collect()
    }

    #[test]
    fn ten_samples_split_eight_two() {
        let p = pool(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        let (tr, va) = split_dataset(&p, 0).unwrap();
        assert_eq!((tr.len(), va.len()), (8, 2));
    }

    #[test]
    fn five_samples_one_class() {
        let (tr, va) = split_dataset(&pool(&[3; 5]), 9).unwrap();
        assert_eq!((tr.len(), va.len()), (4, 1));
    }

    #[test]
    fn empty_pool_errors() {
        let err = split_dataset::<f64>(&[], 0).unwrap_err();
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn split_is_deterministic() {
        let p = pool(&[0, 0, 1, 1, 2, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0]);
        assert_eq!(split_dataset(&p, 4).unwrap(), split_dataset(&p, 4).unwrap());
    }

    #[test]
    fn stratified_quota_follows_class_sizes() {
        // 32 per class, 128 total -> 25 validation: 7,6,6,6
        let labels: Vec<usize> = (0..128).map(|i| i % 4).collect();
        let (_, va) = split_dataset(&pool(&labels), 1).unwrap();
        assert_eq!(va.len(), 25);
        let mut counts = [0; 4];
        for s in &va {
            counts[s.label] += 1;
        }
        assert_eq!(counts, [7, 6, 6, 6]);
    }

    #[test]
    fn sample_rejects_non_finite_and_bad_shape() {
        assert!(Sample::new(vec![1.0, f64::NAN], 1, 2, 0).is_err());
        assert!(Sample::new(vec![1.0; 3], 1, 2, 0).is_err());
        assert!(Sample::<f64>::new(vec![], 0, 0, 0).is_err());
    }

    #[test]
    fn largest_remainder_sums_to_total() {
        assert_eq!(largest_remainder(&[5, 5, 5], 4), vec![2, 1, 1]);
        assert_eq!(largest_remainder(&[10, 1], 11), vec![10, 1]);
    }
}
