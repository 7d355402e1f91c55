//! Small sequential network engine with hand-written backpropagation.
//!
//! Activations are `channels x length` row-major buffers; dense layers treat
//! their input as a flat vector, so flattening is implicit.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::scalar::{argmax, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Padding {
    /// Centered kernel, zero padding, output length equals input length.
    Same,
    /// Output at `t` depends only on inputs at `<= t`.
    Causal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub enum Layer<T> {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        dilation: usize,
        padding: Padding,
        relu: bool,
        /// `[out][in][kernel]` weights followed by `out` biases.
        params: Vec<T>,
    },
    Dense {
        inputs: usize,
        outputs: usize,
        relu: bool,
        /// `[out][in]` weights followed by `out` biases.
        params: Vec<T>,
    },
    GlobalMaxPool,
    GlobalMeanPool,
    /// Max over `bins` adaptive windows per channel.
    AdaptiveMaxPool {
        bins: usize,
    },
    /// Inverted dropout; identity outside training.
    Dropout {
        rate: f64,
    },
}

impl<T: Real> Layer<T> {
    pub fn conv(in_ch: usize, out_ch: usize, kernel: usize, dilation: usize, padding: Padding) -> Self {
        Layer::Conv {
            in_ch,
            out_ch,
            kernel,
            dilation,
            padding,
            relu: true,
            params: vec![T::zero(); out_ch * in_ch * kernel + out_ch],
        }
    }

    pub fn dense(inputs: usize, outputs: usize, relu: bool) -> Self {
        Layer::Dense {
            inputs,
            outputs,
            relu,
            params: vec![T::zero(); inputs * outputs + outputs],
        }
    }

    pub fn params(&self) -> &[T] {
        match self {
            Layer::Conv { params, .. } | Layer::Dense { params, .. } => params,
            _ => &[],
        }
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        match self {
            Layer::Conv { params, .. } | Layer::Dense { params, .. } => params,
            _ => &mut [],
        }
    }

    /// Output shape for an input of `(channels, length)`.
    pub fn output_shape(&self, (c, l): (usize, usize)) -> (usize, usize) {
        match *self {
            Layer::Conv { out_ch, .. } => (out_ch, l),
            Layer::Dense { outputs, .. } => (outputs, 1),
            Layer::GlobalMaxPool | Layer::GlobalMeanPool => (c, 1),
            Layer::AdaptiveMaxPool { bins } => (c, bins),
            Layer::Dropout { .. } => (c, l),
        }
    }

    /// Multiply-accumulates of one forward pass.
    pub fn macs(&self, (_, l): (usize, usize)) -> usize {
        match *self {
            Layer::Conv {
                in_ch, out_ch, kernel, ..
            } => in_ch * out_ch * kernel * l,
            Layer::Dense { inputs, outputs, .. } => inputs * outputs,
            _ => 0,
        }
    }

    /// He-uniform weights for rectified layers, LeCun-uniform otherwise;
    /// zero biases.
    fn init(&mut self, rng: &mut Rng) {
        let (fan_in, n_w, relu) = match self {
            Layer::Conv {
                in_ch,
                out_ch,
                kernel,
                relu,
                ..
            } => (*in_ch * *kernel, *in_ch * *out_ch * *kernel, *relu),
            Layer::Dense {
                inputs, outputs, relu, ..
            } => (*inputs, *inputs * *outputs, *relu),
            _ => return,
        };
        let bound = if relu {
            (6.0 / fan_in as f64).sqrt()
        } else {
            (3.0 / fan_in as f64).sqrt()
        };
        let p = self.params_mut();
        for w in &mut p[..n_w] {
            *w = T::lit(rng.random_range(-bound..bound));
        }
        for b in &mut p[n_w..] {
            *b = T::zero();
        }
    }
}

fn adaptive_window(p: usize, bins: usize, len: usize) -> (usize, usize) {
    let start = p * len / bins;
    let end = ((p + 1) * len).div_ceil(bins);
    (start, end.max(start + 1).min(len))
}

/// Per-layer record needed by the backward pass.
enum Cache<T> {
    /// Post-activation output (ReLU mask) of a conv/dense layer.
    Affine {
        output: Vec<T>,
    },
    Argmax(Vec<usize>),
    Mean,
    Mask(Vec<T>),
    Identity,
}

/// Forward trace: inputs to every layer plus backward caches.
pub struct Trace<T> {
    inputs: Vec<(Vec<T>, (usize, usize))>,
    caches: Vec<Cache<T>>,
    pub logits: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Network<T> {
    pub input_shape: (usize, usize),
    pub layers: Vec<Layer<T>>,
}

impl<T: Real> Network<T> {
    pub fn new(input_shape: (usize, usize), layers: Vec<Layer<T>>) -> Self {
        Self { input_shape, layers }
    }

    pub fn init(&mut self, rng: &mut Rng) {
        for layer in &mut self.layers {
            layer.init(rng);
        }
    }

    pub fn output_len(&self) -> usize {
        let (c, l) = self
            .layers
            .iter()
            .fold(self.input_shape, |s, layer| layer.output_shape(s));
        c * l
    }

    pub fn macs(&self) -> usize {
        let mut shape = self.input_shape;
        let mut total = 0;
        for layer in &self.layers {
            total += layer.macs(shape);
            shape = layer.output_shape(shape);
        }
        total
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params().len()).sum()
    }

    pub fn params_finite(&self) -> bool {
        self.layers.iter().all(|l| l.params().iter().all(|p| p.is_finite()))
    }

    fn layer_forward(layer: &Layer<T>, x: &[T], (c, l): (usize, usize), rng: Option<&mut Rng>) -> (Vec<T>, Cache<T>) {
        match layer {
            Layer::Conv {
                in_ch,
                out_ch,
                kernel,
                dilation,
                padding,
                relu,
                params,
            } => {
                let (in_ch, out_ch, k) = (*in_ch, *out_ch, *kernel);
                debug_assert_eq!(c, in_ch);
                let n_w = out_ch * in_ch * k;
                let (w, b) = params.split_at(n_w);
                let mut out = vec![T::zero(); out_ch * l];
                for o in 0..out_ch {
                    let row = &mut out[o * l..(o + 1) * l];
                    row.iter_mut().for_each(|v| *v = b[o]);
                    for i in 0..in_ch {
                        let xin = &x[i * l..(i + 1) * l];
                        for j in 0..k {
                            let wv = w[(o * in_ch + i) * k + j];
                            let off = tap_offset(j, k, *dilation, *padding);
                            let (t0, t1) = valid_range(off, l);
                            let s0 = (t0 as isize + off) as usize;
                            for (r, &xv) in row[t0..t1].iter_mut().zip(&xin[s0..s0 + (t1 - t0)]) {
                                *r += wv * xv;
                            }
                        }
                    }
                }
                if *relu {
                    out.iter_mut().for_each(|v| *v = v.max(T::zero()));
                }
                let cache = Cache::Affine { output: out.clone() };
                (out, cache)
            }
            Layer::Dense {
                inputs,
                outputs,
                relu,
                params,
            } => {
                debug_assert_eq!(x.len(), *inputs);
                let n_w = inputs * outputs;
                let (w, b) = params.split_at(n_w);
                let mut out: Vec<T> = (0..*outputs)
                    .map(|o| {
                        let row = &w[o * inputs..(o + 1) * inputs];
                        b[o] + row.iter().zip(x).map(|(&a, &v)| a * v).sum::<T>()
                    })
                    .collect();
                if *relu {
                    out.iter_mut().for_each(|v| *v = v.max(T::zero()));
                }
                let cache = Cache::Affine { output: out.clone() };
                (out, cache)
            }
            Layer::GlobalMaxPool => {
                let idx: Vec<usize> = (0..c).map(|ch| ch * l + argmax(&x[ch * l..(ch + 1) * l])).collect();
                (idx.iter().map(|&i| x[i]).collect(), Cache::Argmax(idx))
            }
            Layer::AdaptiveMaxPool { bins } => {
                let mut idx = Vec::with_capacity(c * bins);
                for ch in 0..c {
                    for p in 0..*bins {
                        let (s, e) = adaptive_window(p, *bins, l);
                        idx.push(ch * l + s + argmax(&x[ch * l + s..ch * l + e]));
                    }
                }
                (idx.iter().map(|&i| x[i]).collect(), Cache::Argmax(idx))
            }
            Layer::GlobalMeanPool => {
                let inv = T::one() / T::from_count(l);
                let out = (0..c)
                    .map(|ch| x[ch * l..(ch + 1) * l].iter().copied().sum::<T>() * inv)
                    .collect();
                (out, Cache::Mean)
            }
            Layer::Dropout { rate } => match rng {
                Some(rng) if *rate > 0.0 => {
                    let keep = T::lit(1.0 / (1.0 - rate));
                    let mask: Vec<T> = x
                        .iter()
                        .map(|_| if rng.random::<f64>() < *rate { T::zero() } else { keep })
                        .collect();
                    let out = x.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
                    (out, Cache::Mask(mask))
                }
                _ => (x.to_vec(), Cache::Identity),
            },
        }
    }

    /// Evaluation-mode logits.
    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.forward_prefix(x, self.layers.len())
    }

    /// Output of the first `n` layers in evaluation mode.
    pub fn forward_prefix(&self, x: &[T], n: usize) -> Vec<T> {
        let mut shape = self.input_shape;
        let mut cur = x.to_vec();
        for layer in &self.layers[..n] {
            cur = Self::layer_forward(layer, &cur, shape, None).0;
            shape = layer.output_shape(shape);
        }
        cur
    }

    /// Forward pass keeping what backward needs. Dropout is active only
    /// when `train_rng` is given.
    pub fn forward_trace(&self, x: &[T], mut train_rng: Option<&mut Rng>) -> Trace<T> {
        let mut shape = self.input_shape;
        let mut cur = x.to_vec();
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, cache) = Self::layer_forward(layer, &cur, shape, train_rng.as_deref_mut());
            inputs.push((std::mem::replace(&mut cur, out), shape));
            caches.push(cache);
            shape = layer.output_shape(shape);
        }
        Trace {
            inputs,
            caches,
            logits: cur,
        }
    }

    /// Backpropagates `d_logits` through `trace`, returning the gradient with
    /// respect to the network input. Parameter gradients are accumulated into
    /// `grads` (one buffer per layer, shaped like `Layer::params`) when given.
    pub fn backward(&self, trace: &Trace<T>, d_logits: &[T], mut grads: Option<&mut [Vec<T>]>) -> Vec<T> {
        let mut g = d_logits.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let (x, (c, l)) = &trace.inputs[li];
            let (c, l) = (*c, *l);
            let pg = grads.as_deref_mut().map(|gs| gs[li].as_mut_slice());
            g = match (layer, &trace.caches[li]) {
                (
                    Layer::Conv {
                        in_ch,
                        out_ch,
                        kernel,
                        dilation,
                        padding,
                        relu,
                        params,
                    },
                    Cache::Affine { output },
                ) => {
                    let (in_ch, out_ch, k) = (*in_ch, *out_ch, *kernel);
                    if *relu {
                        relu_mask(&mut g, output);
                    }
                    let n_w = out_ch * in_ch * k;
                    let w = &params[..n_w];
                    let mut dx = vec![T::zero(); in_ch * l];
                    let mut pg = pg;
                    for o in 0..out_ch {
                        let go = &g[o * l..(o + 1) * l];
                        if let Some(pg) = pg.as_deref_mut() {
                            pg[n_w + o] += go.iter().copied().sum::<T>();
                        }
                        for i in 0..in_ch {
                            let xin = &x[i * l..(i + 1) * l];
                            let dxi = &mut dx[i * l..(i + 1) * l];
                            for j in 0..k {
                                let wi = (o * in_ch + i) * k + j;
                                let off = tap_offset(j, k, *dilation, *padding);
                                let (t0, t1) = valid_range(off, l);
                                let wv = w[wi];
                                let s0 = (t0 as isize + off) as usize;
                                let span = t1 - t0;
                                let gw = &go[t0..t1];
                                for (d, &gv) in dxi[s0..s0 + span].iter_mut().zip(gw) {
                                    *d += wv * gv;
                                }
                                if let Some(pg) = pg.as_deref_mut() {
                                    pg[wi] += gw.iter().zip(&xin[s0..s0 + span]).map(|(&a, &b)| a * b).sum::<T>();
                                }
                            }
                        }
                    }
                    dx
                }
                (
                    Layer::Dense {
                        inputs,
                        outputs,
                        relu,
                        params,
                    },
                    Cache::Affine { output },
                ) => {
                    if *relu {
                        relu_mask(&mut g, output);
                    }
                    let n_w = inputs * outputs;
                    let w = &params[..n_w];
                    let mut dx = vec![T::zero(); *inputs];
                    let mut pg = pg;
                    for o in 0..*outputs {
                        let go = g[o];
                        if go == T::zero() {
                            continue;
                        }
                        let row = &w[o * inputs..(o + 1) * inputs];
                        for (d, &wv) in dx.iter_mut().zip(row) {
                            *d += wv * go;
                        }
                        if let Some(pg) = pg.as_deref_mut() {
                            for (p, &xv) in pg[o * inputs..(o + 1) * inputs].iter_mut().zip(x) {
                                *p += go * xv;
                            }
                            pg[n_w + o] += go;
                        }
                    }
                    dx
                }
                (_, Cache::Argmax(idx)) => {
                    let mut dx = vec![T::zero(); c * l];
                    for (&i, &gv) in idx.iter().zip(&g) {
                        dx[i] += gv;
                    }
                    dx
                }
                (_, Cache::Mean) => {
                    let inv = T::one() / T::from_count(l);
                    (0..c * l).map(|i| g[i / l] * inv).collect()
                }
                (_, Cache::Mask(mask)) => g.iter().zip(mask).map(|(&a, &m)| a * m).collect(),
                (_, Cache::Identity) => g,
                _ => unreachable!("cache does not match layer"),
            };
        }
        g
    }

    pub fn zero_grads(&self) -> Vec<Vec<T>> {
        self.layers.iter().map(|l| vec![T::zero(); l.params().len()]).collect()
    }
}

#[inline]
fn relu_mask<T: Real>(g: &mut [T], output: &[T]) {
    for (gv, &o) in g.iter_mut().zip(output) {
        if o <= T::zero() {
            *gv = T::zero();
        }
    }
}

#[inline]
fn tap_offset(j: usize, k: usize, dilation: usize, padding: Padding) -> isize {
    let (j, k, d) = (j as isize, k as isize, dilation as isize);
    match padding {
        Padding::Same => (j - (k - 1) / 2) * d,
        Padding::Causal => -(k - 1 - j) * d,
    }
}

/// Output positions `t` with `0 <= t + off < l`.
#[inline]
fn valid_range(off: isize, l: usize) -> (usize, usize) {
    let l = l as isize;
    let t0 = (-off).clamp(0, l);
    let t1 = (l - off).clamp(0, l);
    (t0 as usize, t1.max(t0) as usize)
}

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let e: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy `-log softmax(logits)[label]`.
pub fn cross_entropy<T: Real>(logits: &[T], label: usize) -> T {
    let m = logits.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let zy = logits[label];
    if zy >= m {
        // ln(1 + sum of the others) keeps tiny losses distinguishable.
        let rest: T = logits
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != label)
            .map(|(_, &z)| (z - zy).exp())
            .sum();
        return rest.ln_1p();
    }
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<T>().ln();
    lse - zy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn fd_check(net: &Network<f64>, x: &[f64], label: usize) {
        let tr = net.forward_trace(x, None);
        let mut d = softmax(&tr.logits);
        d[label] -= 1.0;
        let g = net.backward(&tr, &d, None);
        let h = 1e-5;
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            xp[i] += h;
            let mut xm = x.to_vec();
            xm[i] -= h;
            let fd = (cross_entropy(&net.forward(&xp), label) - cross_entropy(&net.forward(&xm), label)) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                "coord {i}: fd {fd} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn conv_paddings_match_finite_differences() {
        let mut r = rng::rng(1);
        for padding in [Padding::Same, Padding::Causal] {
            let mut net = Network::new(
                (2, 9),
                vec![
                    Layer::conv(2, 3, 3, 2, padding),
                    Layer::GlobalMeanPool,
                    Layer::dense(3, 2, false),
                ],
            );
            net.init(&mut r);
            let x: Vec<f64> = (0..18).map(|_| r.random_range(-1.0..1.0)).collect();
            fd_check(&net, &x, 1);
        }
    }

    #[test]
    fn dense_parameter_gradient() {
        let mut r = rng::rng(2);
        let mut net = Network::new((1, 4), vec![Layer::dense(4, 3, true), Layer::dense(3, 2, false)]);
        net.init(&mut r);
        let x = [0.3, -0.2, 0.9, 0.1];
        let tr = net.forward_trace(&x, None);
        let mut d = softmax(&tr.logits);
        d[0] -= 1.0;
        let mut grads = net.zero_grads();
        net.backward(&tr, &d, Some(&mut grads));
        let h = 1e-6;
        for li in 0..2 {
            for pi in 0..net.layers[li].params().len() {
                let mut plus = net.clone();
                plus.layers[li].params_mut()[pi] += h;
                let mut minus = net.clone();
                minus.layers[li].params_mut()[pi] -= h;
                let fd: f64 = (cross_entropy(&plus.forward(&x), 0) - cross_entropy(&minus.forward(&x), 0)) / (2.0 * h);
                assert!((fd - grads[li][pi]).abs() < 1e-6, "layer {li} param {pi}");
            }
        }
    }

    #[test]
    fn adaptive_windows_cover_input() {
        for len in [4usize, 7, 64, 65] {
            let mut covered = vec![false; len];
            for p in 0..4 {
                let (s, e) = adaptive_window(p, 4, len);
                assert!(s < e && e <= len);
                covered[s..e].iter_mut().for_each(|c| *c = true);
            }
            assert!(covered.into_iter().all(|c| c));
        }
    }

    #[test]
    fn causal_conv_ignores_future() {
        let mut r = rng::rng(3);
        let mut net = Network::new((1, 8), vec![Layer::<f64>::conv(1, 2, 3, 2, Padding::Causal)]);
        net.init(&mut r);
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let mut y = x.clone();
        y[7] = 5.0;
        let (a, b) = (net.forward(&x), net.forward(&y));
        for ch in 0..2 {
            assert_eq!(a[ch * 8..ch * 8 + 7], b[ch * 8..ch * 8 + 7]);
        }
    }

    #[test]
    fn softmax_shift_invariant() {
        let z = [1.0f64, -2.0, 0.5];
        let p = softmax(&z);
        let q = softmax(&[z[0] + 7.0, z[1] + 7.0, z[2] + 7.0]);
        for (a, b) in p.iter().zip(q) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
