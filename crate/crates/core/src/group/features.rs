use crate::dataset::Sample;
use crate::detection::{wavelet_levels, LOG_FLOOR, WAVELET_LEVELS};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::transform::{haar_decompose, power_spectrum};

pub const STATS: usize = 6;
pub const FEATURES: usize = 2 * STATS;

pub const FEATURE_NAMES: [&str; FEATURES] = [
    "high_band_ratio_mean",
    "flatness_mean",
    "diff_kurtosis_mean",
    "diff_max_mean_mean",
    "wavelet_ratio_mean",
    "sign_agreement_mean",
    "high_band_ratio_std",
    "flatness_std",
    "diff_kurtosis_std",
    "diff_max_mean_std",
    "wavelet_ratio_std",
    "sign_agreement_std",
];

fn floor() -> f64 {
    LOG_FLOOR
}

/// Share of non-DC spectral power above a quarter of the sampling rate.
pub fn high_band_ratio(signal: &[f64]) -> f64 {
    let ps = power_spectrum(signal);
    let cut = ps.len() / 2;
    let total: f64 = ps[1..].iter().sum();
    let high: f64 = ps[cut.max(1)..].iter().sum();
    if total <= floor() {
        0.0
    } else {
        high / total
    }
}

/// Geometric over arithmetic mean of the non-DC power spectrum, in [0, 1].
pub fn spectral_flatness(signal: &[f64]) -> f64 {
    let ps = power_spectrum(signal);
    let bins = &ps[1..];
    if bins.is_empty() {
        return 0.0;
    }
    let n = bins.len() as f64;
    let am = bins.iter().sum::<f64>() / n;
    if am <= floor() {
        return 0.0;
    }
    let gm = (bins.iter().map(|p| p.max(floor()).ln()).sum::<f64>() / n).exp();
    (gm / am).clamp(0.0, 1.0)
}

fn diffs(signal: &[f64]) -> Vec<f64> {
    signal.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Fourth standardized moment (not excess) of `v`; 0 for constant input.
pub fn kurtosis(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    if m2 <= floor() * floor() {
        return 0.0;
    }
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2)
}

/// `max |d| / mean |d|` over the first differences `d`.
pub fn max_mean_ratio(d: &[f64]) -> f64 {
    if d.is_empty() {
        return 0.0;
    }
    let mean = d.iter().map(|x| x.abs()).sum::<f64>() / d.len() as f64;
    if mean <= floor() {
        return 0.0;
    }
    d.iter().fold(0.0f64, |a, x| a.max(x.abs())) / mean
}

/// Log of level-1 over coarsest-level Haar detail energy.
pub fn wavelet_ratio(signal: &[f64]) -> f64 {
    let levels = wavelet_levels(signal.len(), WAVELET_LEVELS).max(1);
    let dec = haar_decompose(signal, levels);
    let energy = |d: &[f64]| d.iter().map(|x| x * x).sum::<f64>();
    let e1 = energy(&dec.details[0]);
    let el = energy(&dec.details[dec.details.len() - 1]);
    (e1 + floor()).ln() - (el + floor()).ln()
}

/// Mean over time steps of the fraction of channel pairs whose first
/// differences share a sign. 1 for single-channel samples.
pub fn sign_agreement(channels: &[Vec<f64>]) -> f64 {
    let c = channels.len();
    if c < 2 {
        return 1.0;
    }
    let steps = channels[0].len();
    if steps == 0 {
        return 1.0;
    }
    let pairs = (c * (c - 1) / 2) as f64;
    let mut total = 0.0;
    for t in 0..steps {
        let mut agree = 0usize;
        for a in 0..c {
            for b in a + 1..c {
                if channels[a][t].signum() == channels[b][t].signum() {
                    agree += 1;
                }
            }
        }
        total += agree as f64 / pairs;
    }
    total / steps as f64
}

/// The six per-sample statistics, channel-averaged where per-channel.
pub fn sample_stats<T: Real>(sample: &Sample<T>) -> [f64; STATS] {
    let c = sample.channels();
    let chans: Vec<Vec<f64>> = (0..c)
        .map(|i| sample.channel(i).iter().map(|v| v.as_f64()).collect())
        .collect();
    let d: Vec<Vec<f64>> = chans.iter().map(|x| diffs(x)).collect();
    let avg = |f: &dyn Fn(usize) -> f64| (0..c).map(f).sum::<f64>() / c as f64;
    [
        avg(&|i| high_band_ratio(&chans[i])),
        avg(&|i| spectral_flatness(&chans[i])),
        avg(&|i| kurtosis(&d[i])),
        avg(&|i| max_mean_ratio(&d[i])),
        avg(&|i| wavelet_ratio(&chans[i])),
        sign_agreement(&d),
    ]
}

/// Dataset-level vector: means of the six statistics, then their
/// (population) standard deviations. Invariant to sample order.
pub fn extract_group_features<T: Real>(samples: &[Sample<T>]) -> Result<[f64; FEATURES]> {
    if samples.len() < 2 {
        return Err(Error::InvalidSpec(format!(
            "group features need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mut stats: Vec<[f64; STATS]> = samples.iter().map(sample_stats).collect();
    // order-independent summation
    stats.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let n = stats.len() as f64;
    let mut out = [0.0; FEATURES];
    for j in 0..STATS {
        let m = stats.iter().map(|s| s[j]).sum::<f64>() / n;
        let var = stats.iter().map(|s| (s[j] - m).powi(2)).sum::<f64>() / n;
        out[j] = m;
        out[STATS + j] = var.sqrt();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kurtosis_of_two_point_distribution_is_one() {
        assert!((kurtosis(&[1.0, -1.0, 1.0, -1.0]) - 1.0).abs() < 1e-12);
        assert_eq!(kurtosis(&[2.0, 2.0]), 0.0);
    }

    #[test]
    fn sign_agreement_bounds() {
        let a = vec![1.0, -1.0, 1.0];
        assert_eq!(sign_agreement(&[a.clone(), a.clone()]), 1.0);
        let b: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_eq!(sign_agreement(&[a.clone(), b]), 0.0);
        assert_eq!(sign_agreement(&[a]), 1.0);
    }

    #[test]
    fn white_noise_is_flatter_than_a_sinusoid() {
        let mut rng = crate::rng::rng(3);
        use rand_distr::{Distribution, StandardNormal};
        let noise: Vec<f64> = (0..64).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sine: Vec<f64> = (0..64).map(|t| (t as f64 * 0.3).sin()).collect();
        assert!(spectral_flatness(&noise) > spectral_flatness(&sine));
        assert!((0.0..=1.0).contains(&spectral_flatness(&noise)));
    }
}
