use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{split_dataset, Dataset, Sample};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// Parameters of the synthetic generator.
///
/// `variant` picks the class layout (frequencies, amplitudes, phases) together
/// with `(classes, channels, length)`; `seed` only drives per-sample
/// randomness and the partitioning. Two specs differing only in `seed` are
/// therefore siblings drawn from the same distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub classes: usize,
    pub channels: usize,
    pub length: usize,
    pub per_class: usize,
    pub seed: u64,
    #[serde(default)]
    pub variant: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_noise() -> f64 {
    0.1
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            classes: 4,
            channels: 3,
            length: 64,
            per_class: 40,
            seed: 7,
            variant: 0,
            noise: 0.1,
        }
    }
}

impl SynthSpec {
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.classes < 2 {
            return bad("classes must be >= 2");
        }
        if self.channels < 1 {
            return bad("channels must be >= 1");
        }
        if self.length < 8 {
            return bad("length must be >= 8");
        }
        if self.per_class < 10 {
            return bad("samples per class must be >= 10");
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad("noise must be finite and non-negative");
        }
        Ok(())
    }
}

struct Component {
    freq: f64,
    amp: f64,
    phase: f64,
}

struct ClassLayout {
    // [channel][component]
    channels: Vec<Vec<Component>>,
    offsets: Vec<f64>,
}

fn class_layouts(spec: &SynthSpec) -> Vec<ClassLayout> {
    let mut rng = rng::rng(rng::derive(
        spec.variant,
        &[
            rng::tag("layout"),
            spec.classes as u64,
            spec.channels as u64,
            spec.length as u64,
        ],
    ));
    // Slow components on a quarter-cycle grid, so the fine wavelet scales and
    // upper Fourier bands carry only noise on clean data.
    let steps = ((spec.length / 32).max(4)) as u32;
    let grid: Vec<f64> = (1..=steps).map(|i| 0.25 * f64::from(i)).collect();
    let mut pairs: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| grid[i + 1..].iter().map(move |&b| (a, b)))
        .collect();
    pairs.shuffle(&mut rng);

    (0..spec.classes)
        .map(|k| {
            let (fa, fb) = pairs[k % pairs.len()];
            let channels = (0..spec.channels)
                .map(|_| {
                    [fa, fb]
                        .iter()
                        .map(|&f| Component {
                            freq: f,
                            amp: rng.random_range(0.4..1.0),
                            phase: rng.random_range(0.0..2.0 * PI),
                        })
                        .collect()
                })
                .collect();
            let offsets = (0..spec.channels).map(|_| rng.random_range(-0.04..0.04)).collect();
            ClassLayout { channels, offsets }
        })
        .collect()
}

/// Generates a labeled dataset where each class is a fixed mixture of two
/// sinusoids per channel (class-specific frequency pair, small amplitude and
/// phase jitter per sample) plus Gaussian noise.
///
/// 20% of each class (rounded down, at least one) is held out as the test
/// split; the remainder is partitioned 80/20 by [`split_dataset`].
pub fn generate_synthetic_dataset<T: Real>(spec: &SynthSpec) -> Result<Dataset<T>> {
    spec.check()?;
    let layouts = class_layouts(spec);
    let mut rng = rng::rng(rng::derive(spec.seed, &[rng::tag("samples"), spec.variant]));
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let (c_n, l_n) = (spec.channels, spec.length);

    let mut pool = Vec::new();
    let mut test = Vec::new();
    for (k, layout) in layouts.iter().enumerate() {
        let mut class_samples = Vec::with_capacity(spec.per_class);
        for _ in 0..spec.per_class {
            let mut values = Vec::with_capacity(c_n * l_n);
            let z: f64 = StandardNormal.sample(&mut rng);
            let dc_jitter = 0.05 * z;
            for (c, comps) in layout.channels.iter().enumerate() {
                let jit: Vec<(f64, f64)> = comps
                    .iter()
                    .map(|_| (rng.random_range(0.8..1.2), rng.random_range(-1.0..1.0)))
                    .collect();
                for t in 0..l_n {
                    let tt = t as f64 / l_n as f64;
                    let mut v = layout.offsets[c] + dc_jitter;
                    for (comp, (aj, pj)) in comps.iter().zip(&jit) {
                        v += comp.amp * aj * (2.0 * PI * comp.freq * tt + comp.phase + pj).sin();
                    }
                    v += noise.sample(&mut rng);
                    values.push(T::lit(v));
                }
            }
            class_samples.push(Sample::new(values, c_n, l_n, k)?);
        }
        let n_test = (spec.per_class / 5).max(1);
        let mut order: Vec<usize> = (0..class_samples.len()).collect();
        order.shuffle(&mut rng);
        let mut is_test = vec![false; class_samples.len()];
        for &i in &order[..n_test] {
            is_test[i] = true;
        }
        for (s, t) in class_samples.into_iter().zip(is_test) {
            if t {
                test.push(s);
            } else {
                pool.push(s);
            }
        }
    }

    let (train, val) = split_dataset(&pool, spec.seed)?;
    let ds = Dataset {
        name: spec.name.clone(),
        classes: spec.classes,
        channels: c_n,
        length: l_n,
        train,
        val,
        test,
    };
    ds.validate()?;
    Ok(ds)
}
