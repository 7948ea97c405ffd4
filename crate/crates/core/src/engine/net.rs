//! Forward and backward passes.
//!
//! Activations are stored per sample in height-width-channel order. Conv
//! kernels are `[ky][kx][in][out]`, so the innermost loops run over output
//! channels with unit stride.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::ParameterSet;
use super::scalar::Scalar;
use super::spec::{Activation, ConvPlan, DensePlan, LayerPlan, NetworkSpec, PoolPlan};
use crate::error::{Error, Result};
use crate::rng;

/// Training targets for one batch.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a, T> {
    /// Class labels; softmax cross-entropy on the logits.
    Classes(&'a [u8]),
    /// Regression targets in [0, 1]; sigmoid of the single output, squared error.
    Regression(&'a [T]),
}

#[derive(Debug, Clone)]
struct Step {
    plan: LayerPlan,
    activation: Activation,
    dropout: f64,
    param: Option<usize>,
}

/// A validated network ready to run.
#[derive(Debug, Clone)]
pub struct Net {
    spec: NetworkSpec,
    steps: Vec<Step>,
}

/// Per-sample scratch buffers, reused across calls.
#[derive(Debug, Default)]
pub struct Workspace<T> {
    /// `acts[i]` is the input of step `i`; the last entry holds the outputs.
    acts: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    masks: Vec<Vec<T>>,
    delta: Vec<T>,
    delta_in: Vec<T>,
}

impl Net {
    pub fn new(spec: &NetworkSpec) -> Result<Self> {
        let plans = spec.plan()?;
        let mut param = 0;
        let steps = plans
            .into_iter()
            .zip(&spec.layers)
            .map(|(plan, l)| {
                let p = if l.has_params() {
                    param += 1;
                    Some(param - 1)
                } else {
                    None
                };
                Step {
                    plan,
                    activation: l.activation,
                    dropout: l.dropout_rate,
                    param: p,
                }
            })
            .collect();
        Ok(Net {
            spec: spec.clone(),
            steps,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn input_len(&self) -> usize {
        self.spec.input_len()
    }

    pub fn output_len(&self) -> usize {
        self.spec.num_classes
    }

    pub fn workspace<T: Scalar>(&self) -> Workspace<T> {
        let mut acts = vec![vec![T::zero(); self.input_len()]];
        let mut pre = Vec::new();
        let mut masks = Vec::new();
        let mut widest = self.input_len();
        for s in &self.steps {
            let n = s.plan.out_len();
            widest = widest.max(n);
            acts.push(vec![T::zero(); n]);
            pre.push(vec![T::zero(); n]);
            masks.push(if s.dropout > 0.0 { vec![T::one(); n] } else { Vec::new() });
        }
        Workspace {
            acts,
            pre,
            masks,
            delta: vec![T::zero(); widest],
            delta_in: vec![T::zero(); widest],
        }
    }

    fn check_params<T: Scalar>(&self, params: &ParameterSet<T>) -> Result<()> {
        params.matches(&self.spec)
    }

    fn check_batch<T>(&self, batch: &[T]) -> Result<usize> {
        let d = self.input_len();
        if batch.is_empty() || !batch.len().is_multiple_of(d) {
            return Err(Error::validation(format!(
                "batch of {} values is not a positive multiple of the input size {d}",
                batch.len()
            )));
        }
        Ok(batch.len() / d)
    }

    /// Run one sample. With `dropout` set, masks are drawn (training mode).
    fn forward_sample<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        x: &[T],
        ws: &mut Workspace<T>,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) {
        ws.acts[0].copy_from_slice(x);
        for (i, step) in self.steps.iter().enumerate() {
            let (head, tail) = ws.acts.split_at_mut(i + 1);
            let input = &head[i];
            let z = &mut ws.pre[i];
            match (&step.plan, step.param) {
                (LayerPlan::Conv(c), Some(p)) => conv_forward(c, params.kernel(p), params.bias(p), input, z),
                (LayerPlan::Dense(d), Some(p)) => dense_forward(d, params.kernel(p), params.bias(p), input, z),
                (LayerPlan::Pool(pp), _) => pool_forward(pp, input, z),
                _ => unreachable!("parameterized layers carry an index"),
            }
            let out = &mut tail[0];
            match step.activation {
                Activation::Relu => {
                    for (o, &v) in out.iter_mut().zip(z.iter()) {
                        *o = if v > T::zero() { v } else { T::zero() };
                    }
                }
                Activation::Tanh => {
                    for (o, &v) in out.iter_mut().zip(z.iter()) {
                        *o = v.tanh();
                    }
                }
                Activation::None => out.copy_from_slice(z),
            }
            if step.dropout > 0.0 {
                if let Some(rng) = dropout.as_deref_mut() {
                    let keep = T::of(1.0 / (1.0 - step.dropout));
                    for (m, o) in ws.masks[i].iter_mut().zip(out.iter_mut()) {
                        *m = if rng.random::<f64>() < step.dropout { T::zero() } else { keep };
                        *o *= *m;
                    }
                }
            }
        }
    }

    /// Backpropagate `ws.delta` (gradient w.r.t. the final pre-activation)
    /// and accumulate parameter gradients into `grads`.
    fn backward_sample<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        ws: &mut Workspace<T>,
        grads: &mut ParameterSet<T>,
        with_dropout: bool,
    ) {
        for (i, step) in self.steps.iter().enumerate().rev() {
            let input = &ws.acts[i];
            let out_len = step.plan.out_len();
            let in_len = step.plan.in_len();
            let need_input_grad = i > 0;
            let delta = &ws.delta[..out_len];
            let delta_in = &mut ws.delta_in[..in_len];
            match (&step.plan, step.param) {
                (LayerPlan::Conv(c), Some(p)) => {
                    let (gk, gb) = split_grads(grads, p);
                    conv_backward(c, params.kernel(p), input, delta, gk, gb, need_input_grad.then_some(delta_in));
                }
                (LayerPlan::Dense(d), Some(p)) => {
                    let (gk, gb) = split_grads(grads, p);
                    dense_backward(d, params.kernel(p), input, delta, gk, gb, need_input_grad.then_some(delta_in));
                }
                (LayerPlan::Pool(pp), _) => pool_backward(pp, delta, delta_in),
                _ => unreachable!(),
            }
            if !need_input_grad {
                break;
            }
            // Turn the gradient w.r.t. this step's input into the gradient
            // w.r.t. the previous step's pre-activation.
            let prev = &self.steps[i - 1];
            let z = &ws.pre[i - 1];
            let d = &mut ws.delta_in[..in_len];
            if prev.dropout > 0.0 && with_dropout {
                for (g, &m) in d.iter_mut().zip(&ws.masks[i - 1]) {
                    *g *= m;
                }
            }
            match prev.activation {
                Activation::Relu => {
                    for (g, &v) in d.iter_mut().zip(z.iter()) {
                        if v <= T::zero() {
                            *g = T::zero();
                        }
                    }
                }
                Activation::Tanh => {
                    for (g, &v) in d.iter_mut().zip(z.iter()) {
                        let t = v.tanh();
                        *g *= T::one() - t * t;
                    }
                }
                Activation::None => {}
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_in);
        }
    }

    /// Logits for every sample of `batch` (row-major, `n x num_classes`).
    pub fn forward<T: Scalar>(&self, params: &ParameterSet<T>, batch: &[T]) -> Result<Vec<T>> {
        self.check_params(params)?;
        let n = self.check_batch(batch)?;
        let d = self.input_len();
        let mut ws = self.workspace();
        let mut out = Vec::with_capacity(n * self.output_len());
        for x in batch.chunks_exact(d) {
            self.forward_sample(params, x, &mut ws, None);
            out.extend_from_slice(ws.acts.last().unwrap());
        }
        Ok(out)
    }

    /// Mean loss over the batch plus `l2 * sum(w^2)`, and its gradient.
    ///
    /// `dropout_seed = None` runs in inference mode (no dropout).
    pub fn loss_and_grads<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        batch: &[T],
        targets: Targets<'_, T>,
        l2: f64,
        dropout_seed: Option<u64>,
    ) -> Result<(f64, ParameterSet<T>)> {
        let mut ws = self.workspace();
        let mut grads = ParameterSet::zeros(params.layout().clone());
        let mut rng = dropout_seed.map(|s| rng::stream(s, &[rng::tag::DROPOUT]));
        let loss = self.loss_and_grads_into(params, batch, targets, l2, rng.as_mut(), &mut ws, &mut grads)?;
        Ok((loss, grads))
    }

    /// Allocation-free variant of [`Net::loss_and_grads`]; overwrites `grads`.
    #[allow(clippy::too_many_arguments)]
    pub fn loss_and_grads_into<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        batch: &[T],
        targets: Targets<'_, T>,
        l2: f64,
        mut dropout: Option<&mut ChaCha8Rng>,
        ws: &mut Workspace<T>,
        grads: &mut ParameterSet<T>,
    ) -> Result<f64> {
        self.check_params(params)?;
        let n = self.check_batch(batch)?;
        let tlen = match targets {
            Targets::Classes(l) => l.len(),
            Targets::Regression(t) => t.len(),
        };
        if tlen != n {
            return Err(Error::validation(format!("{n} samples but {tlen} targets")));
        }
        let k = self.output_len();
        match targets {
            Targets::Classes(labels) => {
                if let Some(&bad) = labels.iter().find(|&&y| y as usize >= k) {
                    return Err(Error::validation(format!("label {bad} outside [0, {k})")));
                }
            }
            Targets::Regression(_) if k != 1 => {
                return Err(Error::validation("regression needs a single output unit"));
            }
            Targets::Regression(_) => {}
        }
        grads.as_mut_slice().iter_mut().for_each(|g| *g = T::zero());
        let d = self.input_len();
        let inv_n = 1.0 / n as f64;
        let scale = T::of(inv_n);
        let mut total = 0.0f64;
        let with_dropout = dropout.is_some();
        for (s, x) in batch.chunks_exact(d).enumerate() {
            self.forward_sample(params, x, ws, dropout.as_deref_mut());
            let out = ws.acts.last().unwrap();
            match targets {
                Targets::Classes(labels) => {
                    let y = labels[s] as usize;
                    let m = out.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
                    let sum: T = out.iter().map(|&v| (v - m).exp()).sum();
                    let lse = m + sum.ln();
                    total += (lse - out[y]).f64();
                    for (j, (dl, &v)) in ws.delta.iter_mut().zip(out.iter()).enumerate() {
                        let p = (v - lse).exp();
                        *dl = if j == y { p - T::one() } else { p } * scale;
                    }
                }
                Targets::Regression(t) => {
                    let p = sigmoid(out[0]);
                    let diff = p - t[s];
                    total += (diff * diff).f64();
                    ws.delta[0] = T::of(2.0) * diff * p * (T::one() - p) * scale;
                }
            }
            self.backward_sample(params, ws, grads, with_dropout);
        }
        let mut loss = total * inv_n;
        if l2 != 0.0 {
            loss += l2 * params.sum_squares();
            let two_l2 = T::of(2.0 * l2);
            for (g, &w) in grads.as_mut_slice().iter_mut().zip(params.as_slice()) {
                *g += two_l2 * w;
            }
        }
        if !loss.is_finite() {
            return Err(Error::Unstable(format!("loss is {loss}")));
        }
        if !grads.all_finite() {
            return Err(Error::Unstable("non-finite gradient".into()));
        }
        Ok(loss)
    }

    /// Predicted class per sample: argmax of the logits, ties to the lowest index.
    pub fn predict_classes<T: Scalar>(&self, params: &ParameterSet<T>, batch: &[T]) -> Result<Vec<usize>> {
        let logits = self.forward(params, batch)?;
        Ok(logits.chunks_exact(self.output_len()).map(argmax).collect())
    }

    /// Mean cross-entropy and accuracy in inference mode.
    pub fn evaluate<T: Scalar>(&self, params: &ParameterSet<T>, batch: &[T], labels: &[u8]) -> Result<(f64, f64)> {
        self.check_params(params)?;
        let n = self.check_batch(batch)?;
        if labels.len() != n {
            return Err(Error::validation(format!("{n} samples but {} labels", labels.len())));
        }
        let mut ws = self.workspace();
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (x, &y) in batch.chunks_exact(self.input_len()).zip(labels) {
            self.forward_sample(params, x, &mut ws, None);
            let out = ws.acts.last().unwrap();
            let m = out.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let lse = m + out.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
            loss += (lse - out[y as usize]).f64();
            if argmax(out) == y as usize {
                correct += 1;
            }
        }
        Ok((loss / n as f64, correct as f64 / n as f64))
    }
}

pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

/// Index of the largest value; the first one wins ties.
pub fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn split_grads<T: Scalar>(grads: &mut ParameterSet<T>, layer: usize) -> (&mut [T], &mut [T]) {
    let kl = grads.layout().layers[layer].kernel_len;
    grads.layer_mut(layer).split_at_mut(kl)
}

fn conv_forward<T: Scalar>(c: &ConvPlan, kernel: &[T], bias: &[T], input: &[T], z: &mut [T]) {
    let oc_n = c.out_c;
    for oy in 0..c.out_h {
        for ox in 0..c.out_w {
            let out = &mut z[(oy * c.out_w + ox) * oc_n..][..oc_n];
            out.copy_from_slice(bias);
            for ky in 0..c.k {
                let iy = (oy * c.stride + ky) as isize - c.pad_top as isize;
                if iy < 0 || iy >= c.in_h as isize {
                    continue;
                }
                for kx in 0..c.k {
                    let ix = (ox * c.stride + kx) as isize - c.pad_left as isize;
                    if ix < 0 || ix >= c.in_w as isize {
                        continue;
                    }
                    let xin = &input[(iy as usize * c.in_w + ix as usize) * c.in_c..][..c.in_c];
                    let wbase = (ky * c.k + kx) * c.in_c * oc_n;
                    for (ic, &xv) in xin.iter().enumerate() {
                        let w = &kernel[wbase + ic * oc_n..][..oc_n];
                        for (o, &wv) in out.iter_mut().zip(w) {
                            *o += xv * wv;
                        }
                    }
                }
            }
        }
    }
}

fn conv_backward<T: Scalar>(
    c: &ConvPlan,
    kernel: &[T],
    input: &[T],
    delta: &[T],
    gk: &mut [T],
    gb: &mut [T],
    mut dx: Option<&mut [T]>,
) {
    let oc_n = c.out_c;
    if let Some(dx) = dx.as_deref_mut() {
        dx.iter_mut().for_each(|v| *v = T::zero());
    }
    for oy in 0..c.out_h {
        for ox in 0..c.out_w {
            let dz = &delta[(oy * c.out_w + ox) * oc_n..][..oc_n];
            for (g, &d) in gb.iter_mut().zip(dz) {
                *g += d;
            }
            for ky in 0..c.k {
                let iy = (oy * c.stride + ky) as isize - c.pad_top as isize;
                if iy < 0 || iy >= c.in_h as isize {
                    continue;
                }
                for kx in 0..c.k {
                    let ix = (ox * c.stride + kx) as isize - c.pad_left as isize;
                    if ix < 0 || ix >= c.in_w as isize {
                        continue;
                    }
                    let pos = (iy as usize * c.in_w + ix as usize) * c.in_c;
                    let wbase = (ky * c.k + kx) * c.in_c * oc_n;
                    for ic in 0..c.in_c {
                        let xv = input[pos + ic];
                        let off = wbase + ic * oc_n;
                        let g = &mut gk[off..off + oc_n];
                        for (gw, &d) in g.iter_mut().zip(dz) {
                            *gw += xv * d;
                        }
                        if let Some(dx) = dx.as_deref_mut() {
                            let w = &kernel[off..off + oc_n];
                            let s: T = w.iter().zip(dz).map(|(&a, &b)| a * b).sum();
                            dx[pos + ic] += s;
                        }
                    }
                }
            }
        }
    }
}

fn dense_forward<T: Scalar>(d: &DensePlan, kernel: &[T], bias: &[T], input: &[T], z: &mut [T]) {
    z.copy_from_slice(bias);
    for (i, &xv) in input.iter().enumerate() {
        let w = &kernel[i * d.out_dim..][..d.out_dim];
        for (o, &wv) in z.iter_mut().zip(w) {
            *o += xv * wv;
        }
    }
}

fn dense_backward<T: Scalar>(
    d: &DensePlan,
    kernel: &[T],
    input: &[T],
    delta: &[T],
    gk: &mut [T],
    gb: &mut [T],
    mut dx: Option<&mut [T]>,
) {
    for (g, &dv) in gb.iter_mut().zip(delta) {
        *g += dv;
    }
    for (i, &xv) in input.iter().enumerate() {
        let off = i * d.out_dim;
        for (g, &dv) in gk[off..off + d.out_dim].iter_mut().zip(delta) {
            *g += xv * dv;
        }
        if let Some(dx) = dx.as_deref_mut() {
            dx[i] = kernel[off..off + d.out_dim].iter().zip(delta).map(|(&a, &b)| a * b).sum();
        }
    }
}

fn pool_forward<T: Scalar>(p: &PoolPlan, input: &[T], z: &mut [T]) {
    z.iter_mut().for_each(|v| *v = T::zero());
    for pos in input.chunks_exact(p.c) {
        for (o, &v) in z.iter_mut().zip(pos) {
            *o += v;
        }
    }
    let inv = T::of(1.0 / (p.h * p.w) as f64);
    z.iter_mut().for_each(|v| *v *= inv);
}

fn pool_backward<T: Scalar>(p: &PoolPlan, delta: &[T], dx: &mut [T]) {
    let inv = T::of(1.0 / (p.h * p.w) as f64);
    for pos in dx.chunks_exact_mut(p.c) {
        for (g, &d) in pos.iter_mut().zip(delta) {
            *g = d * inv;
        }
    }
}

/// Reorder the output units of parameterized layer `layer` (0-based) and the
/// matching inputs of the next parameterized layer; the network function is
/// unchanged. New unit `j` is old unit `perm[j]`.
pub fn permute_units<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterSet<T>,
    layer: usize,
    perm: &[usize],
) -> Result<ParameterSet<T>> {
    params.matches(spec)?;
    let n_layers = params.num_layers();
    if layer + 1 >= n_layers {
        return Err(Error::validation("cannot permute the output layer's units"));
    }
    let shapes: Vec<Vec<usize>> = params.layout().layers.iter().map(|l| l.kernel_shape.clone()).collect();
    let units = *shapes[layer].last().unwrap();
    let mut check = perm.to_vec();
    check.sort_unstable();
    if check != (0..units).collect::<Vec<_>>() {
        return Err(Error::validation("not a permutation of the layer's units"));
    }
    let mut out = params.clone();
    // Producer: permute the last kernel axis and the bias.
    let rows = params.kernel(layer).len() / units;
    for r in 0..rows {
        for (j, &src) in perm.iter().enumerate() {
            out.kernel_mut(layer)[r * units + j] = params.kernel(layer)[r * units + src];
        }
    }
    for (j, &src) in perm.iter().enumerate() {
        out.bias_mut(layer)[j] = params.bias(layer)[src];
    }
    // Consumer: permute the input-channel axis. Both conv `[k,k,in,out]` and
    // dense `[in,out]` kernels store input channel `c` of position `p` at row
    // `p * units + c`, with `out` contiguous values per row.
    let next = layer + 1;
    let cols = *shapes[next].last().unwrap();
    let in_rows = params.kernel(next).len() / cols;
    let positions = in_rows / units;
    for p in 0..positions {
        for (j, &src) in perm.iter().enumerate() {
            let dst_row = (p * units + j) * cols;
            let src_row = (p * units + src) * cols;
            for c in 0..cols {
                out.kernel_mut(next)[dst_row + c] = params.kernel(next)[src_row + c];
            }
        }
    }
    Ok(out)
}
