//! Iteration-based attacks. Every output lies in the `l_inf` ball of radius
//! `epsilon` around the input.

use crate::dataset::Sample;
use crate::error::Result;
use crate::models::Differentiable;
use crate::scalar::{norm_l1, sign, Real};

use super::check_shape;

fn project<T: Real>(x: &[T], v: &mut [T], eps: T) {
    for (vi, &xi) in v.iter_mut().zip(x) {
        *vi = vi.max(xi - eps).min(xi + eps);
    }
}

fn signed_step<T: Real>(from: &[T], dir: &[T], step: T) -> Vec<T> {
    from.iter().zip(dir).map(|(&a, &d)| a + step * sign(d)).collect()
}

/// `x + eps * sign(grad_x L(x, y))`.
pub fn fgsm<T: Real, M: Differentiable<T>>(model: &M, x: &Sample<T>, label: usize, eps: T) -> Result<Sample<T>> {
    check_shape(model, x)?;
    let (_, g) = model.loss_and_ascent_direction(x.values(), label);
    Ok(x.with_values(signed_step(x.values(), &g, eps)))
}

/// Iterated FGSM with step `eps / iters`, projected after every step.
pub fn bim<T: Real, M: Differentiable<T>>(
    model: &M,
    x: &Sample<T>,
    label: usize,
    eps: T,
    iters: usize,
) -> Result<Sample<T>> {
    check_shape(model, x)?;
    let alpha = eps / T::from_count(iters.max(1));
    let mut cur = x.values().to_vec();
    for _ in 0..iters {
        let (_, g) = model.loss_and_ascent_direction(&cur, label);
        cur = signed_step(&cur, &g, alpha);
        project(x.values(), &mut cur, eps);
    }
    Ok(x.with_values(cur))
}

/// Momentum iterative attack: `g <- mu * g + grad / ||grad||_1`, then a BIM
/// step along `sign(g)`.
pub fn mim<T: Real, M: Differentiable<T>>(
    model: &M,
    x: &Sample<T>,
    label: usize,
    eps: T,
    iters: usize,
    mu: T,
) -> Result<Sample<T>> {
    check_shape(model, x)?;
    let alpha = eps / T::from_count(iters.max(1));
    let mut cur = x.values().to_vec();
    let mut acc = vec![T::zero(); cur.len()];
    for _ in 0..iters {
        let (_, g) = model.loss_and_ascent_direction(&cur, label);
        let n1 = norm_l1(&g);
        for (a, gi) in acc.iter_mut().zip(&g) {
            *a = mu * *a + if n1 > T::zero() { *gi / n1 } else { T::zero() };
        }
        cur = signed_step(&cur, &acc, alpha);
        project(x.values(), &mut cur, eps);
    }
    Ok(x.with_values(cur))
}

/// Per-iteration record of an AutoPGD run.
#[derive(Debug, Clone, PartialEq)]
pub struct PgdTrace<T> {
    pub best: Sample<T>,
    pub best_loss: T,
    /// Loss of each iterate `x_1 .. x_n`.
    pub losses: Vec<T>,
    /// Step size used to produce each iterate.
    pub steps: Vec<T>,
}

/// AutoPGD returning only the best-loss iterate.
pub fn auto_pgd<T: Real, M: Differentiable<T>>(
    model: &M,
    x: &Sample<T>,
    label: usize,
    eps: T,
    iters: usize,
) -> Result<Sample<T>> {
    Ok(auto_pgd_traced(model, x, label, eps, iters)?.best)
}

/// Signed-gradient ascent starting at step `2 eps`. The step halves
/// after two consecutive iterations without a new best loss, and the search
/// restarts from the best iterate.
pub fn auto_pgd_traced<T: Real, M: Differentiable<T>>(
    model: &M,
    x: &Sample<T>,
    label: usize,
    eps: T,
    iters: usize,
) -> Result<PgdTrace<T>> {
    check_shape(model, x)?;
    let mut step = T::lit(2.0) * eps;
    let (_, mut g) = model.loss_and_ascent_direction(x.values(), label);
    let mut cur = x.values().to_vec();
    let mut best: Option<(Vec<T>, T, Vec<T>)> = None;
    let mut stale = 0;
    let mut losses = Vec::with_capacity(iters);
    let mut steps = Vec::with_capacity(iters);
    for _ in 0..iters {
        let mut next = signed_step(&cur, &g, step);
        project(x.values(), &mut next, eps);
        let (loss, g_next) = model.loss_and_ascent_direction(&next, label);
        losses.push(loss);
        steps.push(step);
        let improved = best.as_ref().is_none_or(|(_, b, _)| loss > *b);
        if improved {
            best = Some((next.clone(), loss, g_next.clone()));
            stale = 0;
            cur = next;
            g = g_next;
        } else {
            stale += 1;
            if stale >= 2 {
                step /= T::lit(2.0);
                stale = 0;
                let (b, _, bg) = best.as_ref().expect("a best iterate exists after one step");
                cur = b.clone();
                g = bg.clone();
            } else {
                cur = next;
                g = g_next;
            }
        }
    }
    let (best, best_loss) = match best {
        Some((b, l, _)) => (x.with_values(b), l),
        None => {
            let (l, _) = model.loss_and_ascent_direction(x.values(), label);
            (x.clone(), l)
        }
    };
    Ok(PgdTrace {
        best,
        best_loss,
        losses,
        steps,
    })
}
