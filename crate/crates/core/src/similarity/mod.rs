//! Dataset similarity: per-dataset embedding encoders compared by cosine,
//! with DTW and Wasserstein-1 as alternates, plus the voting rules used to
//! pick the most similar benchmark dataset.

mod encoder;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use encoder::{dataset_embedding, train_encoder, DatasetEmbedding, EmbeddingEncoder, EncoderConfig, EMBEDDING_DIM};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "cosine")]
    Cosine,
    #[serde(rename = "dtw")]
    Dtw,
    #[serde(rename = "wasserstein")]
    Wasserstein,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Dtw => "dtw",
            Metric::Wasserstein => "wasserstein",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Metric::Cosine),
            "dtw" => Ok(Metric::Dtw),
            "wasserstein" => Ok(Metric::Wasserstein),
            other => Err(Error::InvalidSpec(format!("unknown metric `{other}`"))),
        }
    }
}

/// `a . b / (|a| |b|)`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} components", a.len()),
            got: format!("{}", b.len()),
        });
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidSpec("cosine similarity of a zero vector".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

/// Dynamic time warping with absolute-difference cost and unit moves.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = y.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &xi in x {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = (xi - y[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Wasserstein-1 between empirical distributions: the integral of the
/// absolute difference of the two quantile functions. For equal sizes this
/// is the mean absolute difference of the sorted values.
pub fn wasserstein_1d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        return Ok(a.iter().zip(&b).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64);
    }
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0f64;
    let mut total = 0.0;
    while i < n && j < m {
        // next breakpoint of either step quantile function
        let next_a = (i + 1) as f64 / n as f64;
        let next_b = (j + 1) as f64 / m as f64;
        let next = next_a.min(next_b);
        total += (next - u) * (a[i] - b[j]).abs();
        u = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    Ok(total)
}

/// Sample-averaged, channel-averaged series.
pub fn mean_series<T: Real>(samples: &[Sample<T>]) -> Result<Vec<f64>> {
    let first = samples.first().ok_or(Error::EmptyDataset)?;
    let (c, l) = first.shape();
    let mut out = vec![0.0; l];
    for s in samples {
        if s.shape() != (c, l) {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", (c, l)),
                got: format!("{:?}", s.shape()),
            });
        }
        for ch in 0..c {
            for (o, v) in out.iter_mut().zip(s.channel(ch)) {
                *o += v.as_f64();
            }
        }
    }
    let d = (samples.len() * c) as f64;
    out.iter_mut().for_each(|v| *v /= d);
    Ok(out)
}

/// Every value of every sample and channel.
pub fn pooled_values<T: Real>(samples: &[Sample<T>]) -> Vec<f64> {
    samples
        .iter()
        .flat_map(|s| s.values().iter().map(|v| v.as_f64()))
        .collect()
}

/// Similarity of two raw collections under a distance metric, as
/// `1 / (1 + d)` so that larger is more similar.
pub fn distance_similarity<T: Real>(metric: Metric, a: &[Sample<T>], b: &[Sample<T>]) -> Result<f64> {
    let d = match metric {
        Metric::Dtw => dtw_distance(&mean_series(a)?, &mean_series(b)?)?,
        Metric::Wasserstein => {
            if a.is_empty() || b.is_empty() {
                return Err(Error::EmptyDataset);
            }
            wasserstein_1d(&pooled_values(a), &pooled_values(b))?
        }
        Metric::Cosine => {
            return Err(Error::InvalidSpec(
                "cosine similarity compares embeddings, not raw samples".into(),
            ));
        }
    };
    Ok(1.0 / (1.0 + d))
}

/// Highest score; exact ties go to the lexicographically smaller name.
pub fn most_similar_dataset(scores: &[(String, f64)]) -> Result<(String, f64)> {
    let mut best: Option<&(String, f64)> = None;
    for cand in scores {
        best = match best {
            None => Some(cand),
            Some(b) if cand.1 > b.1 || (cand.1 == b.1 && cand.0 < b.0) => Some(cand),
            keep => keep,
        };
    }
    best.cloned().ok_or(Error::EmptyDataset)
}

/// Mode of the per-attack winners. Ties go to the higher mean winning
/// score, then to the lexicographically smaller name.
pub fn majority_vote(winners: &[(String, f64)]) -> Result<String> {
    if winners.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut tally: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for (name, score) in winners {
        let e = tally.entry(name.as_str()).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += score;
    }
    let mut best: Option<(&str, usize, f64)> = None;
    // BTreeMap iterates names in ascending order, so strict comparisons keep
    // the smaller name on a full tie
    for (name, (count, sum)) in tally {
        let mean = sum / count as f64;
        let better = match best {
            None => true,
            Some((_, bc, bm)) => count > bc || (count == bc && mean > bm),
        };
        if better {
            best = Some((name, count, mean));
        }
    }
    Ok(best.expect("non-empty").0.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(v: &[(&str, f64)]) -> Vec<(String, f64)> {
        v.iter().map(|(n, s)| (n.to_string(), *s)).collect()
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.70710678).abs() < 1e-8);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn dtw_and_wasserstein_examples() {
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((wasserstein_1d(&[0.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(dtw_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn most_similar_examples() {
        let s = named(&[("b", 0.9), ("a", 0.3)]);
        assert_eq!(most_similar_dataset(&s).unwrap().0, "b");
        let s = named(&[("b", 0.5), ("a", 0.5)]);
        assert_eq!(most_similar_dataset(&s).unwrap().0, "a");
        assert!(most_similar_dataset(&[]).is_err());
    }

    #[test]
    fn majority_vote_examples() {
        let w = named(&[("A", 0.1), ("A", 0.1), ("B", 0.9), ("C", 0.9)]);
        assert_eq!(majority_vote(&w).unwrap(), "A");
        let w = named(&[("A", 0.8), ("A", 0.8), ("B", 0.6), ("B", 0.6)]);
        assert_eq!(majority_vote(&w).unwrap(), "A");
        let w = named(&[("B", 0.6), ("B", 0.6), ("A", 0.6), ("A", 0.6)]);
        assert_eq!(majority_vote(&w).unwrap(), "A");
        assert_eq!(majority_vote(&named(&[("B", 0.1)])).unwrap(), "B");
        assert!(majority_vote(&[]).is_err());
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("DTW".parse::<Metric>().unwrap(), Metric::Dtw);
        assert!("l2".parse::<Metric>().is_err());
    }
}
