//! Spectral anomaly detection: Fourier band and Haar wavelet features,
//! percentile-calibrated detectors, the fused detection rate, and the
//! clean / fully attacked / partially attacked decision.

mod features;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use features::{fourier_features, wavelet_features, wavelet_levels, FOURIER_BANDS, LOG_FLOOR, WAVELET_LEVELS};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_THRESHOLD: f64 = 0.13;
pub const DEFAULT_PERCENTILE: f64 = 99.0;
pub const SEGMENTS: usize = 5;
pub const SEGMENT_THRESHOLD: f64 = 0.5;
pub const INTENSITY_LEVELS: [u32; 4] = [20, 40, 60, 80];
pub const MIN_FIT_SAMPLES: usize = 10;
const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "fourier")]
    Fourier,
    #[serde(rename = "wavelet")]
    Wavelet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDetector<T> {
    pub kind: DetectorKind,
    pub means: Vec<T>,
    /// Floored at `1e-8`.
    pub stds: Vec<T>,
    pub threshold: T,
    pub percentile: f64,
    /// Wavelet levels actually used (may be fewer than requested for short
    /// series); 16 for the Fourier detector.
    pub levels: usize,
}

impl<T: Real> SpectralDetector<T> {
    pub fn features(&self, sample: &Sample<T>) -> Vec<T> {
        match self.kind {
            DetectorKind::Fourier => fourier_features(sample),
            DetectorKind::Wavelet => wavelet_features(sample, self.levels).0,
        }
    }

    /// `max_j |z_j|` over the feature vector.
    pub fn score(&self, sample: &Sample<T>) -> T {
        self.score_features(&self.features(sample))
    }

    pub fn score_features(&self, f: &[T]) -> T {
        f.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&v, (&m, &s))| ((v - m) / s).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn flags(&self, sample: &Sample<T>) -> bool {
        self.score(sample) > self.threshold
    }
}

/// Linear-interpolation percentile of `values`, `p` in `[0, 100]`.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (rank - lo as f64) * (v[hi] - v[lo])
}

/// Fits feature means and standard deviations on clean samples and sets the
/// threshold to the `p`-th percentile of their own scores.
pub fn fit_detector<T: Real>(kind: DetectorKind, clean: &[Sample<T>], p: f64) -> Result<SpectralDetector<T>> {
    if clean.len() < MIN_FIT_SAMPLES {
        return Err(Error::InvalidSpec(format!(
            "detector needs at least {MIN_FIT_SAMPLES} clean samples, got {}",
            clean.len()
        )));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidSpec(format!("percentile {p} outside [0, 100]")));
    }
    let shape = clean[0].shape();
    if let Some(s) = clean.iter().find(|s| s.shape() != shape) {
        return Err(Error::ShapeMismatch {
            expected: format!("{shape:?}"),
            got: format!("{:?}", s.shape()),
        });
    }
    let levels = match kind {
        DetectorKind::Fourier => FOURIER_BANDS,
        DetectorKind::Wavelet => wavelet_levels(shape.1, WAVELET_LEVELS),
    };
    let mut det = SpectralDetector {
        kind,
        means: Vec::new(),
        stds: Vec::new(),
        threshold: T::zero(),
        percentile: p,
        levels,
    };
    let feats: Vec<Vec<T>> = clean.iter().map(|s| det.features(s)).collect();
    let n = T::from_count(feats.len());
    let dim = feats[0].len();
    det.means = (0..dim).map(|j| feats.iter().map(|f| f[j]).sum::<T>() / n).collect();
    det.stds = (0..dim)
        .map(|j| {
            let m = det.means[j];
            let var = feats.iter().map(|f| (f[j] - m) * (f[j] - m)).sum::<T>() / n;
            var.sqrt().max(T::lit(STD_FLOOR))
        })
        .collect();
    let scores: Vec<f64> = feats.iter().map(|f| det.score_features(f).as_f64()).collect();
    det.threshold = T::lit(percentile(&scores, p));
    Ok(det)
}

/// Fraction of samples whose score exceeds the threshold.
pub fn detection_rate<T: Real>(det: &SpectralDetector<T>, samples: &[Sample<T>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let flagged = samples.iter().filter(|s| det.flags(s)).count();
    Ok(flagged as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Case {
    /// Clean.
    Case1,
    /// Fully attacked.
    Case2,
    /// Partially attacked.
    Case3,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Case1 => "Case1",
            Case::Case2 => "Case2",
            Case::Case3 => "Case3",
        })
    }
}

/// `fused = max(fourier, wavelet)`; Case1 below `t`, Case2 above `1 - t`,
/// Case3 otherwise (both boundaries belong to Case3).
pub fn classify_case(fourier_rate: f64, wavelet_rate: f64, t: f64) -> (Case, f64) {
    let fused = fourier_rate.max(wavelet_rate);
    let case = if fused < t {
        Case::Case1
    } else if fused > 1.0 - t {
        Case::Case2
    } else {
        Case::Case3
    };
    (case, fused)
}

/// Nearest level in {20, 40, 60, 80} percent; exact midpoints go down.
pub fn snap_intensity(fused: f64, t: f64) -> Result<u32> {
    if !(fused >= t && fused <= 1.0 - t) {
        return Err(Error::contract(
            "detection",
            format!("fused rate {fused} is outside the partial band [{t}, {}]", 1.0 - t),
        ));
    }
    let pct = fused * 100.0;
    let mut best = INTENSITY_LEVELS[0];
    for &lvl in &INTENSITY_LEVELS[1..] {
        // strict comparison keeps the lower level on ties; the small slack
        // absorbs rounding in values like 0.5 * 100
        if (pct - lvl as f64).abs() < (pct - best as f64).abs() - 1e-9 {
            best = lvl;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Clean,
    Attacked,
}

/// Contiguous `(start, end)` blocks; the remainder goes to the last block.
pub fn segment_bounds(n: usize, segments: usize) -> Vec<(usize, usize)> {
    let size = n / segments;
    (0..segments)
        .map(|i| (i * size, if i + 1 == segments { n } else { (i + 1) * size }))
        .collect()
}

/// Fourier and Wavelet detectors fitted on the same clean data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorPair<T> {
    pub fourier: SpectralDetector<T>,
    pub wavelet: SpectralDetector<T>,
}

impl<T: Real> DetectorPair<T> {
    pub fn fit(clean: &[Sample<T>], p: f64) -> Result<Self> {
        Ok(Self {
            fourier: fit_detector(DetectorKind::Fourier, clean, p)?,
            wavelet: fit_detector(DetectorKind::Wavelet, clean, p)?,
        })
    }

    /// `(fourier_rate, wavelet_rate)`.
    pub fn rates(&self, samples: &[Sample<T>]) -> Result<(f64, f64)> {
        Ok((
            detection_rate(&self.fourier, samples)?,
            detection_rate(&self.wavelet, samples)?,
        ))
    }

    pub fn fused_rate(&self, samples: &[Sample<T>]) -> Result<f64> {
        let (f, w) = self.rates(samples)?;
        Ok(f.max(w))
    }

    /// Five contiguous segments, each Attacked iff its fused rate is above 0.5.
    pub fn classify_segments(&self, samples: &[Sample<T>]) -> Result<Vec<Verdict>> {
        if samples.len() < SEGMENTS {
            return Err(Error::InvalidSpec(format!(
                "segment classification needs at least {SEGMENTS} samples, got {}",
                samples.len()
            )));
        }
        segment_bounds(samples.len(), SEGMENTS)
            .into_iter()
            .map(|(a, b)| {
                let fused = self.fused_rate(&samples[a..b])?;
                Ok(if fused > SEGMENT_THRESHOLD {
                    Verdict::Attacked
                } else {
                    Verdict::Clean
                })
            })
            .collect()
    }

    /// Full Module-1 report with threshold `t`.
    pub fn report(&self, samples: &[Sample<T>], t: f64) -> Result<DetectionReport> {
        let (fourier_rate, wavelet_rate) = self.rates(samples)?;
        let (case, fused_rate) = classify_case(fourier_rate, wavelet_rate, t);
        let (intensity, segment_verdicts) = if case == Case::Case3 {
            (
                Some(snap_intensity(fused_rate, t)?),
                Some(self.classify_segments(samples)?),
            )
        } else {
            (None, None)
        };
        Ok(DetectionReport {
            fourier_rate,
            wavelet_rate,
            fused_rate,
            case,
            intensity,
            segment_verdicts,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub fourier_rate: f64,
    pub wavelet_rate: f64,
    pub fused_rate: f64,
    pub case: Case,
    /// Present iff `case == Case3`.
    pub intensity: Option<u32>,
    pub segment_verdicts: Option<Vec<Verdict>>,
}

impl fmt::Display for DetectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fourier_rate: {:.4}", self.fourier_rate)?;
        writeln!(f, "wavelet_rate: {:.4}", self.wavelet_rate)?;
        writeln!(f, "fused_rate: {:.4}", self.fused_rate)?;
        writeln!(f, "case: {}", self.case)?;
        match self.intensity {
            Some(i) => writeln!(f, "intensity: {i}")?,
            None => writeln!(f, "intensity: none")?,
        }
        match &self.segment_verdicts {
            Some(v) => {
                let s: Vec<&str> = v
                    .iter()
                    .map(|x| match x {
                        Verdict::Clean => "C",
                        Verdict::Attacked => "A",
                    })
                    .collect();
                writeln!(f, "segments: {}", s.join(","))
            }
            None => writeln!(f, "segments: none"),
        }
    }
}
