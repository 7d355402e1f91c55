use crate::dataset::Sample;
use crate::scalar::Real;
use crate::transform::{haar_decompose, next_pow2, power_spectrum};

pub const FOURIER_BANDS: usize = 16;
pub const WAVELET_LEVELS: usize = 4;
/// Energies are floored here before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

fn log_energy<T: Real>(e: T) -> T {
    e.max(T::lit(LOG_FLOOR)).ln()
}

/// Band index of spectrum bin `k` out of `bins`.
pub(crate) fn band_of(k: usize, bins: usize) -> usize {
    k * FOURIER_BANDS / bins
}

/// Log of the mean power in each of 16 equal-width frequency bands, averaged
/// over channels. Empty bands (very short series) sit at the log floor.
pub fn fourier_features<T: Real>(sample: &Sample<T>) -> Vec<T> {
    let mut out = vec![T::zero(); FOURIER_BANDS];
    for c in 0..sample.channels() {
        let ps = power_spectrum(sample.channel(c));
        let mut sum = [T::zero(); FOURIER_BANDS];
        let mut count = [0usize; FOURIER_BANDS];
        for (k, &p) in ps.iter().enumerate() {
            let b = band_of(k, ps.len());
            sum[b] += p;
            count[b] += 1;
        }
        for b in 0..FOURIER_BANDS {
            let e = if count[b] > 0 {
                sum[b] / T::from_count(count[b])
            } else {
                T::zero()
            };
            out[b] += log_energy(e);
        }
    }
    let c = T::from_count(sample.channels());
    out.iter_mut().for_each(|v| *v /= c);
    out
}

/// `min(requested, floor(log2 L))`.
pub fn wavelet_levels(length: usize, requested: usize) -> usize {
    let max = (usize::BITS - 1 - length.max(1).leading_zeros()) as usize;
    requested.min(max)
}

/// Log detail energy for levels `1..=levels`, averaged over channels, and
/// the number of levels used.
pub fn wavelet_features<T: Real>(sample: &Sample<T>, levels: usize) -> (Vec<T>, usize) {
    let used = wavelet_levels(sample.length(), levels);
    let mut out = vec![T::zero(); used];
    for c in 0..sample.channels() {
        let dec = haar_decompose(sample.channel(c), used);
        for (lvl, d) in dec.details.iter().enumerate().take(used) {
            let e: T = d.iter().map(|&v| v * v).sum();
            out[lvl] += log_energy(e);
        }
    }
    let c = T::from_count(sample.channels());
    out.iter_mut().for_each(|v| *v /= c);
    debug_assert!(next_pow2(sample.length()) >= 1 << used);
    (out, used)
}
