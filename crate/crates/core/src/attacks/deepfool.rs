//! Minimal-perturbation attack by iterated linearisation of the decision
//! boundaries.

use crate::dataset::Sample;
use crate::error::Result;
use crate::models::Differentiable;
use crate::scalar::{argmax, dot, Real};

use super::check_shape;

pub const OVERSHOOT: f64 = 1.02;

#[derive(Debug, Clone, PartialEq)]
pub struct DeepFoolOutcome<T> {
    pub sample: Sample<T>,
    /// Linearisation steps taken.
    pub steps: usize,
    pub adversarial: bool,
}

fn logit_gradient<T: Real, M: Differentiable<T>>(model: &M, values: &[T], k: usize, y: usize) -> (Vec<T>, Vec<T>) {
    model.pullback(values, &|z| {
        let mut c = vec![T::zero(); z.len()];
        c[k] = T::one();
        c[y] -= T::one();
        c
    })
}

/// Each step moves to the nearest linearised boundary,
/// `r_i = |f_k| / ||w_k||^2 * w_k` with `f_k = z_k - z_y`, `w_k = grad f_k`.
/// The accumulated perturbation is multiplied by [`OVERSHOOT`] before it is
/// applied. A sample the model already misclassifies is returned unchanged.
pub fn deepfool<T: Real, M: Differentiable<T>>(
    model: &M,
    x: &Sample<T>,
    label: usize,
    max_iter: usize,
) -> Result<DeepFoolOutcome<T>> {
    check_shape(model, x)?;
    let x0 = x.values();
    let overshoot = T::lit(OVERSHOOT);
    let mut r_tot = vec![T::zero(); x0.len()];
    let mut cur = x0.to_vec();
    let mut steps = 0;
    let k_classes = model.num_classes();
    while steps < max_iter {
        let z = model.logits(&cur);
        if argmax(&z) != label {
            break;
        }
        let mut best: Option<(T, Vec<T>, T)> = None;
        for k in (0..k_classes).filter(|&k| k != label) {
            let (_, w) = logit_gradient(model, &cur, k, label);
            let f = z[k] - z[label];
            let wn2 = dot(&w, &w);
            if wn2 <= T::zero() {
                continue;
            }
            let dist = f.abs() / wn2.sqrt();
            if best.as_ref().is_none_or(|(d, _, _)| dist < *d) {
                best = Some((dist, w, f.abs() / wn2));
            }
        }
        let Some((_, w, scale)) = best else { break };
        for (r, wi) in r_tot.iter_mut().zip(&w) {
            *r += scale * *wi;
        }
        cur = x0.iter().zip(&r_tot).map(|(&a, &r)| a + overshoot * r).collect();
        steps += 1;
    }
    let adversarial = model.predict(&cur) != label;
    Ok(DeepFoolOutcome {
        sample: x.with_values(cur),
        steps,
        adversarial,
    })
}
