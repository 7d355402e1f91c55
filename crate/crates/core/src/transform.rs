//! Radix-2 FFT and orthonormal Haar wavelet decomposition.

use num_complex::Complex;

use crate::scalar::Real;

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// In-place iterative radix-2 FFT (forward, unnormalized).
///
/// Panics if the length is not a power of two.
pub fn fft<T: Real>(buf: &mut [Complex<T>]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length {n} is not a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // twiddles computed directly per index: no accumulated rotation error
        let tw: Vec<Complex<T>> = (0..half)
            .map(|k| {
                let ang = -two_pi * T::from_count(k) / T::from_count(len);
                Complex::new(ang.cos(), ang.sin())
            })
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * tw[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Power spectrum `|X_k|^2 / N` for `k = 0..=N/2` of the zero-padded signal.
pub fn power_spectrum<T: Real>(signal: &[T]) -> Vec<T> {
    let n = next_pow2(signal.len());
    let mut buf: Vec<Complex<T>> = signal
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
        .take(n)
        .collect();
    fft(&mut buf);
    let norm = T::from_count(n);
    buf[..=n / 2].iter().map(|c| c.norm_sqr() / norm).collect()
}

/// Multilevel Haar decomposition. `details[0]` is level 1 (finest).
#[derive(Debug, Clone, PartialEq)]
pub struct HaarDecomposition<T> {
    pub approx: Vec<T>,
    pub details: Vec<Vec<T>>,
}

/// Decomposes `signal` (zero-padded to a power of two) into `levels` levels.
/// `levels` is capped at `log2` of the padded length.
pub fn haar_decompose<T: Real>(signal: &[T], levels: usize) -> HaarDecomposition<T> {
    let n = next_pow2(signal.len());
    let mut approx: Vec<T> = signal.to_vec();
    approx.resize(n, T::zero());
    let levels = levels.min(n.trailing_zeros() as usize);
    let s = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let half = approx.len() / 2;
        let mut a = Vec::with_capacity(half);
        let mut d = Vec::with_capacity(half);
        for pair in approx.chunks_exact(2) {
            a.push((pair[0] + pair[1]) * s);
            d.push((pair[0] - pair[1]) * s);
        }
        details.push(d);
        approx = a;
    }
    HaarDecomposition { approx, details }
}

/// Inverse of [`haar_decompose`]; returns the padded-length signal.
pub fn haar_reconstruct<T: Real>(dec: &HaarDecomposition<T>) -> Vec<T> {
    let s = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let mut approx = dec.approx.clone();
    for d in dec.details.iter().rev() {
        let mut next = Vec::with_capacity(approx.len() * 2);
        for (&a, &dd) in approx.iter().zip(d) {
            next.push((a + dd) * s);
            next.push((a - dd) * s);
        }
        approx = next;
    }
    approx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn naive_dft(x: &[f64]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                        Complex::new(v * ang.cos(), v * ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let mut rng = crate::rng::rng(3);
        for &n in &[1usize, 2, 4, 8, 32, 128] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft(&mut buf);
            for (a, b) in buf.iter().zip(naive_dft(&x)) {
                assert!((a - b).norm() < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn parseval_on_random_signals() {
        let mut rng = crate::rng::rng(11);
        for _ in 0..100 {
            let n: usize = 1 << rng.random_range(3..9);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft(&mut buf);
            let time: f64 = x.iter().map(|v| v * v).sum();
            let freq: f64 = buf.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
            assert!(((time - freq) / time).abs() < 1e-9);
        }
    }

    #[test]
    fn haar_round_trip() {
        let mut rng = crate::rng::rng(5);
        for _ in 0..100 {
            let n: usize = 1 << rng.random_range(1..9);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let levels = rng.random_range(1..=n.trailing_zeros() as usize);
            let back = haar_reconstruct(&haar_decompose(&x, levels));
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn haar_details_of_constant_are_zero() {
        let dec = haar_decompose(&[2.5f64; 16], 4);
        assert!(dec.details.iter().flatten().all(|&d| d == 0.0));
    }

    #[test]
    fn haar_spike_level_one() {
        // unit spike at t=4: level-1 detail at index 2 is 1/sqrt(2)
        let mut x = [0.0f64; 16];
        x[4] = 1.0;
        let dec = haar_decompose(&x, 4);
        assert!((dec.details[0][2] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let e1: f64 = dec.details[0].iter().map(|d| d * d).sum();
        let e2: f64 = dec.details[1].iter().map(|d| d * d).sum();
        assert!((e1 - 0.5).abs() < 1e-12 && (e2 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn levels_capped_by_length() {
        let dec = haar_decompose(&[1.0f64, 2.0, 3.0], 5);
        assert_eq!(dec.details.len(), 2);
        assert_eq!(dec.approx.len(), 1);
    }
}
