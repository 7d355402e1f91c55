//! Simplified elastic-net attack: one ISTA loop, no search over the
//! trade-off constant.

use crate::dataset::Sample;
use crate::error::Result;
use crate::models::Differentiable;
use crate::scalar::{argmax, norm_l1, norm_linf, Real};

use super::check_shape;

/// Gradient step length, relative to the largest gradient coordinate.
pub const STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetOutcome<T> {
    pub sample: Sample<T>,
    pub adversarial: bool,
    /// `||d||_2^2 + beta ||d||_1` of the returned perturbation.
    pub cost: T,
}

/// `sign(v) * max(|v| - beta, 0)`.
pub fn soft_threshold<T: Real>(v: T, beta: T) -> T {
    if v > beta {
        v - beta
    } else if v < -beta {
        v + beta
    } else {
        T::zero()
    }
}

fn runner_up<T: Real>(z: &[T], label: usize) -> usize {
    let mut best = None;
    for (k, &v) in z.iter().enumerate() {
        if k != label && best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k).unwrap_or(label)
}

/// While the sample is still classified as `label` the step descends the
/// margin `z_y - max_{k != y} z_k`; once adversarial it descends the L2 term
/// instead. Each step is followed by soft-thresholding at `beta`. The best
/// adversarial iterate by elastic-net cost is returned; if none flips, the
/// last iterate is returned with `adversarial = false`.
pub fn elastic_net<T: Real, M: Differentiable<T>>(
    model: &M,
    x: &Sample<T>,
    label: usize,
    iters: usize,
    beta: T,
) -> Result<ElasticNetOutcome<T>> {
    check_shape(model, x)?;
    let x0 = x.values();
    let step = T::lit(STEP);
    let two = T::lit(2.0);
    let cost = |d: &[T]| d.iter().map(|&v| v * v).sum::<T>() + beta * norm_l1(d);
    let mut delta = vec![T::zero(); x0.len()];
    let mut best: Option<(Vec<T>, T)> = None;
    let mut cur = x0.to_vec();
    for _ in 0..iters {
        let (z, g) = model.pullback(&cur, &|z| {
            let k = runner_up(z, label);
            let mut c = vec![T::zero(); z.len()];
            c[label] = T::one();
            c[k] -= T::one();
            c
        });
        let adversarial = argmax(&z) != label;
        if adversarial {
            let c = cost(&delta);
            if best.as_ref().is_none_or(|(_, b)| c < *b) {
                best = Some((delta.clone(), c));
            }
            for d in delta.iter_mut() {
                *d = soft_threshold(*d - step * two * *d, beta);
            }
        } else {
            let gmax = norm_linf(&g);
            let scale = if gmax > T::zero() { step / gmax } else { T::zero() };
            for (d, gi) in delta.iter_mut().zip(&g) {
                *d = soft_threshold(*d - scale * *gi, beta);
            }
        }
        cur = x0.iter().zip(&delta).map(|(&a, &d)| a + d).collect();
    }
    // the final iterate has not been checked yet
    if model.predict(&cur) != label {
        let c = cost(&delta);
        if best.as_ref().is_none_or(|(_, b)| c < *b) {
            best = Some((delta.clone(), c));
        }
    }
    let (delta, adversarial) = match best {
        Some((d, _)) => (d, true),
        None => (delta, false),
    };
    let out: Vec<T> = x0.iter().zip(&delta).map(|(&a, &d)| a + d).collect();
    Ok(ElasticNetOutcome {
        sample: x.with_values(out),
        adversarial,
        cost: cost(&delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_values() {
        assert!((soft_threshold(0.5, 0.2) - 0.3f64).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.1, 0.2f64), 0.0);
        assert!((soft_threshold(-0.5, 0.2) + 0.3f64).abs() < 1e-15);
    }
}
