use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{require_single_cell, ForwardCache, MlpModel};
use crate::randmat::{singular_values, Matrix, SingularSpectrum};
use crate::{rng, Error, Result};

/// Probe inputs used by [`ldi_report`] when the caller has no preference.
pub const DEFAULT_PROBES: usize = 16;

/// `n` standard-normal rows of width `input_dim`.
pub fn gaussian_probes(input_dim: usize, n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::range("probes", 0, ">= 1"));
    }
    let mut r = rng::rng_from_seed(seed);
    let data = (0..n * input_dim)
        .map(|_| r.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::new(n, input_dim, data)
}

impl MlpModel {
    fn check_jacobian_layer(&self, layer: usize) -> Result<()> {
        if layer == 0 || layer >= self.layers().len() {
            return Err(Error::range(
                "layer",
                layer as i64,
                format!("[1, {}]", self.layers().len() as i64 - 1),
            ));
        }
        Ok(())
    }

    /// `J = D W` for layer `layer` at one cached sample: the derivative of
    /// the layer's output with respect to its concatenated input.
    pub fn jacobian_from_cache(
        &self,
        cache: &ForwardCache,
        row: usize,
        layer: usize,
    ) -> Result<Matrix> {
        self.check_cache(cache)?;
        self.check_jacobian_layer(layer)?;
        if row >= cache.batch_size() {
            return Err(Error::range("row", row as i64, format!("[0, {})", cache.batch_size())));
        }
        let l = &self.layers()[layer];
        let (w, fan) = (l.width, l.fan_in());
        let act = self.activation();
        let mut j = Matrix::zeros(w, fan);
        for a in 0..w {
            let d = act.derivative(cache.pre[layer][row * w + a]);
            for b in 0..fan {
                j.set(a, b, d * l.weights[a * fan + b]);
            }
        }
        Ok(j)
    }

    /// Layerwise Jacobian of a single input sample. `layer` is the global
    /// layer index, which equals the in-cell index for single-cell models.
    pub fn layerwise_jacobian(&self, sample: &[f64], layer: usize) -> Result<Matrix> {
        self.check_jacobian_layer(layer)?;
        let x = Matrix::new(1, sample.len(), sample.to_vec())?;
        let cache = self.forward(&x)?;
        self.jacobian_from_cache(&cache, 0, layer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerJacobian {
    pub layer: usize,
    pub rows: usize,
    pub cols: usize,
    /// Singular values averaged position-wise over the probes.
    pub spectrum: SingularSpectrum,
    pub mean_sv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub probes: usize,
    /// Layers `1..depth`.
    pub layers: Vec<LayerJacobian>,
    /// Mean of `mean_sv` over the layers that receive long-range links (`2..depth`).
    pub summary_mean_sv: f64,
}

/// Mean singular values of the layerwise Jacobians, averaged over probe
/// inputs. Meant for freshly initialized single-cell models.
pub fn ldi_report(model: &MlpModel, probes: &Matrix) -> Result<JacobianReport> {
    require_single_cell(model.spec())?;
    let n = probes.rows();
    if n == 0 {
        return Err(Error::range("probes", 0, ">= 1"));
    }
    let depth = model.layers().len();
    if depth < 3 {
        return Err(Error::DegenerateCell {
            cell: 0,
            depth: depth as u32,
        });
    }
    let cache = model.forward(probes)?;
    let mut layers = Vec::with_capacity(depth - 1);
    for g in 1..depth {
        let l = &model.layers()[g];
        let k = l.width.min(l.fan_in());
        let mut acc = vec![0.0; k];
        let mut mean_sv = 0.0;
        for r in 0..n {
            let s = singular_values(&model.jacobian_from_cache(&cache, r, g)?)?;
            for (a, v) in acc.iter_mut().zip(&s.values) {
                *a += v;
            }
            mean_sv += s.mean;
        }
        acc.iter_mut().for_each(|v| *v /= n as f64);
        let mean = acc.iter().sum::<f64>() / k as f64;
        let mean_square = acc.iter().map(|v| v * v).sum::<f64>() / k as f64;
        layers.push(LayerJacobian {
            layer: g,
            rows: l.width,
            cols: l.fan_in(),
            spectrum: SingularSpectrum {
                values: acc,
                mean,
                mean_square,
            },
            mean_sv: mean_sv / n as f64,
        });
    }
    let shortcut_layers: Vec<f64> = layers.iter().filter(|l| l.layer >= 2).map(|l| l.mean_sv).collect();
    let summary_mean_sv = shortcut_layers.iter().sum::<f64>() / shortcut_layers.len() as f64;
    Ok(JacobianReport {
        probes: n,
        layers,
        summary_mean_sv,
    })
}
