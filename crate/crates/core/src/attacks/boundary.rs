//! Decision-based attack that only queries predicted labels.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::rng;
use crate::scalar::{dot, mean, norm_l2, Real};

use super::check_shape;

pub const MAX_INIT_DRAWS: usize = 1000;
const INIT_SEARCH_STEPS: usize = 12;
const WINDOW: usize = 10;
/// Starting noise scale relative to the sample's spread is log-uniform on
/// `[0.5, 32]`; large scales drown out the input so every label is reachable.
const INIT_LOG_SCALE: std::ops::Range<f64> = -std::f64::consts::LN_2..5.0 * std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOutcome<T> {
    pub sample: Sample<T>,
    /// Draws needed to find the starting point.
    pub init_draws: usize,
    /// `||x' - x||_2` after initialisation and after every accepted step.
    pub distances: Vec<T>,
    /// Every accepted iterate, starting with the initial point.
    pub accepted: Vec<Vec<T>>,
    pub queries: usize,
}

fn gaussian<T: Real>(rng: &mut rng::Rng, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(z)
        })
        .collect()
}

/// Random starting point: Gaussian blends `x + s * z` with a random
/// log-uniform noise scale, rejected until the label changes, then pulled back toward `x` by a
/// bisection along the segment. Each accepted step takes an orthogonal move on
/// the sphere around `x` followed by a contraction toward it; step sizes adapt
/// to the recent acceptance rate.
pub fn boundary_attack<T: Real, M: Classifier<T> + ?Sized>(
    model: &M,
    x: &Sample<T>,
    label: usize,
    iters: usize,
    seed: u64,
) -> Result<BoundaryOutcome<T>> {
    check_shape(model, x)?;
    let x0 = x.values();
    let n = x0.len();
    let mut rng = rng::rng(seed);
    let mut queries = 0usize;
    let is_adv = |v: &[T], q: &mut usize| {
        *q += 1;
        model.predict(v) != label
    };

    let m = mean(x0);
    let spread = (x0.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::from_count(n)).sqrt();
    let spread = if spread > T::lit(1e-6) { spread } else { T::one() };

    let mut start = None;
    let mut init_draws = 0;
    for draw in 0..MAX_INIT_DRAWS {
        init_draws = draw + 1;
        let scale = spread * T::lit(rng.random_range(INIT_LOG_SCALE).exp());
        let z = gaussian::<T>(&mut rng, n);
        let cand: Vec<T> = x0.iter().zip(&z).map(|(&a, &zi)| a + scale * zi).collect();
        if is_adv(&cand, &mut queries) {
            start = Some(cand);
            break;
        }
    }
    let Some(far) = start else {
        return Err(Error::AttackInit);
    };
    // bisection on the blend weight keeps the label flipped
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..INIT_SEARCH_STEPS {
        let mid = (lo + hi) / T::lit(2.0);
        let cand = blend(x0, &far, mid);
        if is_adv(&cand, &mut queries) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut adv = blend(x0, &far, hi);
    let mut dist = distance(x0, &adv);
    let mut distances = vec![dist];
    let mut accepted = vec![adv.clone()];

    let mut orth_step = T::lit(0.05);
    let mut src_step = T::lit(0.05);
    let (mut orth_tries, mut orth_ok, mut src_tries, mut src_ok) = (0, 0, 0, 0);
    for _ in 0..iters {
        if dist <= T::zero() {
            break;
        }
        let delta: Vec<T> = adv.iter().zip(x0).map(|(&a, &b)| a - b).collect();
        let mut eta = gaussian::<T>(&mut rng, n);
        let proj = dot(&eta, &delta) / (dist * dist);
        eta.iter_mut().zip(&delta).for_each(|(e, d)| *e -= proj * *d);
        let en = norm_l2(&eta);
        if en <= T::zero() {
            continue;
        }
        // orthogonal move, rescaled back onto the sphere of radius `dist`
        let mut moved: Vec<T> = delta
            .iter()
            .zip(&eta)
            .map(|(&d, &e)| d + e * (orth_step * dist / en))
            .collect();
        let mn = norm_l2(&moved);
        moved.iter_mut().for_each(|v| *v = *v * dist / mn);
        let sphere: Vec<T> = x0.iter().zip(&moved).map(|(&a, &d)| a + d).collect();
        orth_tries += 1;
        if is_adv(&sphere, &mut queries) {
            orth_ok += 1;
            let shrink = T::one() - src_step;
            let cand: Vec<T> = x0.iter().zip(&moved).map(|(&a, &d)| a + d * shrink).collect();
            src_tries += 1;
            if is_adv(&cand, &mut queries) {
                src_ok += 1;
                let d = distance(x0, &cand);
                if d <= dist {
                    adv = cand;
                    dist = d;
                    distances.push(dist);
                    accepted.push(adv.clone());
                }
            }
        }
        if orth_tries == WINDOW {
            adapt(&mut orth_step, orth_ok, orth_tries, T::lit(1e-4), T::one());
            orth_tries = 0;
            orth_ok = 0;
        }
        if src_tries == WINDOW {
            adapt(&mut src_step, src_ok, src_tries, T::lit(1e-5), T::lit(0.5));
            src_tries = 0;
            src_ok = 0;
        }
    }
    Ok(BoundaryOutcome {
        sample: x.with_values(adv),
        init_draws,
        distances,
        accepted,
        queries,
    })
}

fn blend<T: Real>(x: &[T], far: &[T], w: T) -> Vec<T> {
    x.iter().zip(far).map(|(&a, &b)| a + w * (b - a)).collect()
}

fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum::<T>().sqrt()
}

fn adapt<T: Real>(step: &mut T, ok: usize, tries: usize, lo: T, hi: T) {
    let rate = ok as f64 / tries as f64;
    if rate > 0.5 {
        *step = (*step * T::lit(1.5)).min(hi);
    } else if rate < 0.2 {
        *step = (*step / T::lit(1.5)).max(lo);
    }
}
