use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::randmat::Matrix;
use crate::topology::{realize_topology, Activation, ArchitectureSpec, TopologyRealization};
use crate::{instrument, rng, Error, Result};

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Gaussian weights with variance `gain / fan_in`.
    FanInScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitScheme {
    pub kind: InitKind,
    pub gain: f64,
}

impl InitScheme {
    /// Gain 2 for ReLU, 1 otherwise.
    pub fn for_activation(activation: Activation) -> Self {
        let gain = match activation {
            Activation::Relu => 2.0,
            Activation::Linear | Activation::Elu => 1.0,
        };
        InitScheme {
            kind: InitKind::FanInScaled,
            gain,
        }
    }

    pub fn variance(&self, fan_in: usize) -> f64 {
        self.gain / fan_in as f64
    }
}

/// One fully connected layer of the body. Its input is the previous layer's
/// output (or the network input) followed by the long-range source units.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub cell: usize,
    /// Index of the layer inside its cell.
    pub index: usize,
    pub width: usize,
    /// Global index of the layer feeding this one; `None` for the network input.
    pub prev: Option<usize>,
    pub prev_width: usize,
    /// Long-range inputs as (global layer, unit), appended after `prev`.
    pub sources: Vec<(usize, usize)>,
    /// Row-major `width x fan_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.prev_width + self.sources.len()
    }

    #[inline]
    pub(crate) fn gather(&self, r: usize, input: &Matrix, post: &[Vec<f64>], out: &mut [f64]) {
        match self.prev {
            None => out[..self.prev_width].copy_from_slice(input.row(r)),
            Some(p) => {
                let w = self.prev_width;
                out[..w].copy_from_slice(&post[p][r * w..(r + 1) * w]);
            }
        }
        for (k, &(l, u)) in self.sources.iter().enumerate() {
            let lw = post_width(post, l, input.rows());
            out[self.prev_width + k] = post[l][r * lw + u];
        }
    }
}

#[inline]
fn post_width(post: &[Vec<f64>], layer: usize, batch: usize) -> usize {
    post[layer].len() / batch
}

/// A multilayer perceptron whose long-range links are concatenated into
/// the inputs of later layers, as dictated by a [`TopologyRealization`].
///
/// Layer 0 of the first cell projects the input to the cell width; layer 0
/// of every later cell reads the last layer of the cell before. A linear
/// classifier head reads only the final layer.
#[derive(Debug)]
pub struct MlpModel {
    spec: ArchitectureSpec,
    realization: TopologyRealization,
    topo_seed: u64,
    init_seed: u64,
    init: InitScheme,
    layers: Vec<Layer>,
    head_weights: Vec<f64>,
    head_bias: Vec<f64>,
    id: u64,
    version: u64,
}

impl Clone for MlpModel {
    fn clone(&self) -> Self {
        MlpModel {
            spec: self.spec.clone(),
            realization: self.realization.clone(),
            topo_seed: self.topo_seed,
            init_seed: self.init_seed,
            init: self.init,
            layers: self.layers.clone(),
            head_weights: self.head_weights.clone(),
            head_bias: self.head_bias.clone(),
            id: fresh_id(),
            version: 0,
        }
    }
}

/// Activations kept by [`MlpModel::forward`] for backprop and Jacobians.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    model_id: u64,
    version: u64,
    pub(crate) input: Matrix,
    /// Per layer, row-major `batch x width`.
    pub(crate) pre: Vec<Vec<f64>>,
    pub(crate) post: Vec<Vec<f64>>,
    pub logits: Matrix,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }

    /// Post-activation outputs of a layer, row-major `batch x width`.
    pub fn activations(&self, layer: usize) -> &[f64] {
        &self.post[layer]
    }

    pub fn pre_activations(&self, layer: usize) -> &[f64] {
        &self.pre[layer]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
    pub head_weights: Vec<f64>,
    pub head_bias: Vec<f64>,
    /// Mean loss of the batch the gradients came from.
    pub loss: f64,
}

impl Gradients {
    /// `self = momentum * self + other`, used as a heavy-ball velocity.
    pub fn accumulate(&mut self, other: &Gradients, momentum: f64) {
        fn mix(v: &mut [f64], g: &[f64], m: f64) {
            for (a, b) in v.iter_mut().zip(g) {
                *a = m * *a + b;
            }
        }
        for (v, g) in self.layers.iter_mut().zip(&other.layers) {
            mix(&mut v.weights, &g.weights, momentum);
            mix(&mut v.bias, &g.bias, momentum);
        }
        mix(&mut self.head_weights, &other.head_weights, momentum);
        mix(&mut self.head_bias, &other.head_bias, momentum);
        self.loss = other.loss;
    }

    /// All gradient entries in the order of [`MlpModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out.extend_from_slice(&self.head_weights);
        out.extend_from_slice(&self.head_bias);
        out
    }
}

impl MlpModel {
    /// Samples the topology from `topo_seed`, then draws the weights from
    /// `init_seed`. Biases start at zero.
    pub fn build(
        spec: &ArchitectureSpec,
        topo_seed: u64,
        init_seed: u64,
        init: InitScheme,
    ) -> Result<Self> {
        let realization = realize_topology(spec, topo_seed)?;
        Self::from_realization(spec, realization, init_seed, init)
    }

    /// Like [`MlpModel::build`] but refuses multi-cell specs, for which
    /// layerwise Jacobian statistics are not defined here.
    pub fn build_for_jacobians(
        spec: &ArchitectureSpec,
        topo_seed: u64,
        init_seed: u64,
        init: InitScheme,
    ) -> Result<Self> {
        require_single_cell(spec)?;
        Self::build(spec, topo_seed, init_seed, init)
    }

    pub fn from_realization(
        spec: &ArchitectureSpec,
        realization: TopologyRealization,
        init_seed: u64,
        init: InitScheme,
    ) -> Result<Self> {
        spec.validate()?;
        if !(init.gain > 0.0 && init.gain.is_finite()) {
            return Err(Error::Domain(format!("init gain must be positive, got {}", init.gain)));
        }
        if realization.cells.len() != spec.cells.len()
            || realization
                .cells
                .iter()
                .zip(&spec.cells)
                .any(|(r, c)| r.depth != c.depth || r.width != c.width)
        {
            return Err(Error::Consistency("realization does not match the spec".into()));
        }
        instrument::record_model_build();

        let mut layers = Vec::new();
        let mut offset = 0usize;
        let mut prev_width = spec.input_dim as usize;
        for (ci, (cell, real)) in spec.cells.iter().zip(&realization.cells).enumerate() {
            let w = cell.width as usize;
            for i in 0..cell.depth as usize {
                let prev = if offset + i == 0 { None } else { Some(offset + i - 1) };
                let sources = real.sources[i]
                    .iter()
                    .map(|s| (offset + s.layer as usize, s.unit as usize))
                    .collect();
                layers.push(Layer {
                    cell: ci,
                    index: i,
                    width: w,
                    prev,
                    prev_width,
                    sources,
                    weights: Vec::new(),
                    bias: vec![0.0; w],
                });
                prev_width = w;
            }
            offset += cell.depth as usize;
        }

        let mut r = rng::rng_from_seed(init_seed);
        for layer in &mut layers {
            let fan_in = layer.fan_in();
            let sd = libm::sqrt(init.variance(fan_in));
            layer.weights = (0..layer.width * fan_in)
                .map(|_| sd * r.sample::<f64, _>(StandardNormal))
                .collect();
        }
        let out = spec.output_dim as usize;
        let sd = libm::sqrt(init.variance(prev_width));
        let head_weights = (0..out * prev_width)
            .map(|_| sd * r.sample::<f64, _>(StandardNormal))
            .collect();

        Ok(MlpModel {
            spec: spec.clone(),
            topo_seed: realization.seed,
            realization,
            init_seed,
            init,
            layers,
            head_weights,
            head_bias: vec![0.0; out],
            id: fresh_id(),
            version: 0,
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn realization(&self) -> &TopologyRealization {
        &self.realization
    }

    pub fn topo_seed(&self) -> u64 {
        self.topo_seed
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn init_scheme(&self) -> InitScheme {
        self.init
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_mut(&mut self, g: usize) -> &mut Layer {
        self.version += 1;
        &mut self.layers[g]
    }

    pub fn head_weights(&self) -> &[f64] {
        &self.head_weights
    }

    pub fn activation(&self) -> Activation {
        self.spec.activation
    }

    pub fn last_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.width)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum::<usize>()
            + self.head_weights.len()
            + self.head_bias.len()
    }

    /// All parameters: each layer's weights (row-major) then bias, in layer
    /// order, followed by the head's weights and bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out.extend_from_slice(&self.head_weights);
        out.extend_from_slice(&self.head_bias);
        out
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v = it.next().unwrap());
            l.bias.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        self.head_weights.iter_mut().for_each(|v| *v = it.next().unwrap());
        self.head_bias.iter_mut().for_each(|v| *v = it.next().unwrap());
        self.version += 1;
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardCache> {
        if batch.cols() != self.spec.input_dim as usize {
            return Err(Error::Shape(format!(
                "batch has {} columns, model expects input_dim {}",
                batch.cols(),
                self.spec.input_dim
            )));
        }
        let n = batch.rows();
        let act = self.spec.activation;
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let max_fan = self.layers.iter().map(Layer::fan_in).max().unwrap_or(0);
        let mut x = vec![0.0; max_fan];
        for layer in &self.layers {
            let w = layer.width;
            let fan = layer.fan_in();
            let mut h = vec![0.0; n * w];
            let mut s = vec![0.0; n * w];
            for r in 0..n {
                layer.gather(r, batch, &post, &mut x[..fan]);
                for j in 0..w {
                    let row = &layer.weights[j * fan..(j + 1) * fan];
                    let z = layer.bias[j] + dot(row, &x[..fan]);
                    h[r * w + j] = z;
                    s[r * w + j] = act.apply(z);
                }
            }
            pre.push(h);
            post.push(s);
        }
        let last = post.last().expect("at least one layer");
        let lw = self.last_width();
        let out = self.spec.output_dim as usize;
        let mut logits = Matrix::zeros(n, out);
        for r in 0..n {
            let s = &last[r * lw..(r + 1) * lw];
            for k in 0..out {
                let v = self.head_bias[k] + dot(&self.head_weights[k * lw..(k + 1) * lw], s);
                logits.set(r, k, v);
            }
        }
        Ok(ForwardCache {
            model_id: self.id,
            version: self.version,
            input: batch.clone(),
            pre,
            post,
            logits,
        })
    }

    pub(crate) fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.model_id != self.id {
            return Err(Error::State("cache was produced by a different model"));
        }
        if cache.version != self.version {
            return Err(Error::State("parameters changed since the forward pass"));
        }
        Ok(())
    }

    /// Mean softmax cross-entropy of the cached logits and its gradients.
    pub fn backward(&self, cache: &ForwardCache, labels: &[usize]) -> Result<Gradients> {
        self.check_cache(cache)?;
        let (loss, dlogits) = softmax_cross_entropy(&cache.logits, labels)?;
        let mut g = self.backward_from_logits(cache, &dlogits)?;
        g.loss = loss;
        Ok(g)
    }

    /// Backpropagates an arbitrary upstream gradient on the logits.
    pub fn backward_from_logits(&self, cache: &ForwardCache, dlogits: &Matrix) -> Result<Gradients> {
        self.check_cache(cache)?;
        let n = cache.batch_size();
        if dlogits.shape() != cache.logits.shape() {
            return Err(Error::Shape(format!(
                "upstream gradient is {:?}, logits are {:?}",
                dlogits.shape(),
                cache.logits.shape()
            )));
        }
        let act = self.spec.activation;
        let out = self.spec.output_dim as usize;
        let lw = self.last_width();
        let last = self.layers.len() - 1;

        let mut ds: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; n * l.width]).collect();
        let mut head_weights = vec![0.0; out * lw];
        let mut head_bias = vec![0.0; out];
        for r in 0..n {
            let s = &cache.post[last][r * lw..(r + 1) * lw];
            for k in 0..out {
                let d = dlogits.get(r, k);
                if d == 0.0 {
                    continue;
                }
                head_bias[k] += d;
                let hw = &self.head_weights[k * lw..(k + 1) * lw];
                let gw = &mut head_weights[k * lw..(k + 1) * lw];
                let dsr = &mut ds[last][r * lw..(r + 1) * lw];
                for j in 0..lw {
                    gw[j] += d * s[j];
                    dsr[j] += d * hw[j];
                }
            }
        }

        let mut grads: Vec<LayerGradient> = Vec::with_capacity(self.layers.len());
        let max_fan = self.layers.iter().map(Layer::fan_in).max().unwrap_or(0);
        let mut x = vec![0.0; max_fan];
        let mut dx = vec![0.0; max_fan];
        for g in (0..self.layers.len()).rev() {
            let layer = &self.layers[g];
            let w = layer.width;
            let fan = layer.fan_in();
            let mut gw = vec![0.0; w * fan];
            let mut gb = vec![0.0; w];
            let (earlier, rest) = ds.split_at_mut(g);
            let ds_here = &rest[0];
            for r in 0..n {
                layer.gather(r, &cache.input, &cache.post, &mut x[..fan]);
                dx[..fan].iter_mut().for_each(|v| *v = 0.0);
                for j in 0..w {
                    let dh = ds_here[r * w + j] * act.derivative(cache.pre[g][r * w + j]);
                    if dh == 0.0 {
                        continue;
                    }
                    gb[j] += dh;
                    let wrow = &layer.weights[j * fan..(j + 1) * fan];
                    let grow = &mut gw[j * fan..(j + 1) * fan];
                    for k in 0..fan {
                        grow[k] += dh * x[k];
                        dx[k] += dh * wrow[k];
                    }
                }
                if let Some(p) = layer.prev {
                    let pw = layer.prev_width;
                    let dst = &mut earlier[p][r * pw..(r + 1) * pw];
                    for k in 0..pw {
                        dst[k] += dx[k];
                    }
                }
                for (k, &(l, u)) in layer.sources.iter().enumerate() {
                    let sw = self.layers[l].width;
                    earlier[l][r * sw + u] += dx[layer.prev_width + k];
                }
            }
            grads.push(LayerGradient {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            head_weights,
            head_bias,
            loss: 0.0,
        })
    }

    /// Plain gradient step `theta -= lr * grad`.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            axpy(&mut l.weights, &g.weights, -lr);
            axpy(&mut l.bias, &g.bias, -lr);
        }
        axpy(&mut self.head_weights, &grads.head_weights, -lr);
        axpy(&mut self.head_bias, &grads.head_bias, -lr);
        self.version += 1;
    }

    /// Predicted class per row.
    pub fn predict(&self, batch: &Matrix) -> Result<Vec<usize>> {
        let cache = self.forward(batch)?;
        Ok((0..batch.rows()).map(|r| argmax(cache.logits.row(r))).collect())
    }
}

pub(crate) fn require_single_cell(spec: &ArchitectureSpec) -> Result<()> {
    if spec.cells.len() != 1 {
        return Err(Error::Unsupported(format!(
            "layerwise Jacobian experiments need a single-cell spec, got {} cells",
            spec.cells.len()
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], x: &[f64], a: f64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if *v > xs[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy of softmax(logits) and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (n, k) = logits.shape();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for a batch of {n}", labels.len())));
    }
    let mut grad = Matrix::zeros(n, k);
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::range("label", y as i64, format!("[0, {})", k)));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| libm::exp(v - max)).sum();
        let log_z = max + libm::log(sum);
        loss += log_z - row[y];
        for c in 0..k {
            let p = libm::exp(row[c] - log_z);
            let target = if c == y { 1.0 } else { 0.0 };
            grad.set(r, c, (p - target) / n as f64);
        }
    }
    Ok((loss / n as f64, grad))
}
