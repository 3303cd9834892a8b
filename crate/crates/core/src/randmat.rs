//! Dense Gaussian matrices and their singular values.
//!
//! Singular values come from a one-sided Jacobi sweep (Hestenes), which
//! orthogonalizes the columns in place; the column norms are then the
//! singular values. It is accurate to working precision and fast enough
//! for the matrix sizes used here (a few thousand rows, at most a few
//! hundred columns).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("matrix dimensions must be positive, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn scaled(&self, k: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSpectrum {
    /// Descending, non-negative, `min(rows, cols)` entries.
    pub values: Vec<f64>,
    pub mean: f64,
    pub mean_square: f64,
}

impl SingularSpectrum {
    fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let mean_square = values.iter().map(|v| v * v).sum::<f64>() / n;
        SingularSpectrum {
            values,
            mean,
            mean_square,
        }
    }
}

/// I.i.d. `N(0, variance)` entries.
pub fn sample_gaussian(rows: usize, cols: usize, variance: f64, seed: u64) -> Result<Matrix> {
    let mut r = rng::rng_from_seed(seed);
    sample_gaussian_with(rows, cols, variance, &mut r)
}

pub(crate) fn sample_gaussian_with<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut R,
) -> Result<Matrix> {
    if rows == 0 {
        return Err(Error::range("rows", 0, ">= 1"));
    }
    if cols == 0 {
        return Err(Error::range("cols", 0, ">= 1"));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Domain(format!("variance must be positive, got {variance}")));
    }
    let sd = libm::sqrt(variance);
    let data = (0..rows * cols)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::new(rows, cols, data)
}

const JACOBI_EPS: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 60;

/// Singular values by one-sided Jacobi rotations.
pub fn singular_values(m: &Matrix) -> Result<SingularSpectrum> {
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix entries"));
    }
    // Work on the orientation with at least as many rows as columns, stored
    // column by column so rotations touch contiguous memory.
    let (h, w, mut cols) = if m.rows >= m.cols {
        let mut cols = vec![0.0; m.rows * m.cols];
        for r in 0..m.rows {
            for c in 0..m.cols {
                cols[c * m.rows + r] = m.data[r * m.cols + c];
            }
        }
        (m.rows, m.cols, cols)
    } else {
        (m.cols, m.rows, m.data.clone())
    };

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..w {
            for q in p + 1..w {
                let (head, tail) = cols.split_at_mut(q * h);
                let a = &mut head[p * h..(p + 1) * h];
                let b = &mut tail[..h];
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for k in 0..h {
                    alpha += a[k] * a[k];
                    beta += b[k] * b[k];
                    gamma += a[k] * b[k];
                }
                if gamma == 0.0 || gamma.abs() <= JACOBI_EPS * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for k in 0..h {
                    let x = a[k];
                    let y = b[k];
                    a[k] = c * x - s * y;
                    b[k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let values = (0..w)
        .map(|c| libm::sqrt(cols[c * h..(c + 1) * h].iter().map(|v| v * v).sum::<f64>()))
        .collect();
    Ok(SingularSpectrum::from_values(values))
}

/// Pooled estimate of `E[sigma^2]` for `rows x cols` unit-variance Gaussians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSquareEstimate {
    pub rows: usize,
    pub cols: usize,
    pub trials: usize,
    /// Mean of the squared singular values, pooled over trials.
    pub mean: f64,
    /// Standard error of `mean` from the spread of per-trial means.
    pub std_error: f64,
}

/// Estimates the mean squared singular value of tall Gaussian matrices,
/// which should equal the row count whatever the column count.
pub fn mean_square_identity_check(
    rows: usize,
    cols: usize,
    trials: usize,
    seed: u64,
) -> Result<MeanSquareEstimate> {
    if trials == 0 {
        return Err(Error::range("trials", 0, ">= 1"));
    }
    if cols == 0 || rows < cols {
        return Err(Error::range(
            "cols",
            cols as i64,
            format!("[1, rows = {rows}]"),
        ));
    }
    let per_trial = (0..trials)
        .map(|t| {
            let mut r = rng::stream(seed, &[t as u64]);
            let m = sample_gaussian_with(rows, cols, 1.0, &mut r)?;
            Ok(singular_values(&m)?.mean_square)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, sd) = mean_and_sd(&per_trial);
    Ok(MeanSquareEstimate {
        rows,
        cols,
        trials,
        mean,
        std_error: sd / libm::sqrt(trials as f64),
    })
}

pub(crate) fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSweepRow {
    pub width: usize,
    pub mass: f64,
    pub matrix_rows: usize,
    pub trials: usize,
    pub mean_sv: f64,
    pub stddev_sv: f64,
}

/// Jacobian height implied by a mass: `round(width + mass / 2)`.
pub fn rows_for_mass(width: usize, mass: f64) -> usize {
    libm::round(width as f64 + mass / 2.0) as usize
}

/// One point of the mass sweep; `index` keys the random streams so rows
/// can be produced one at a time or in any order.
pub fn simulate_mass_point(
    width: usize,
    mass: f64,
    index: usize,
    trials: usize,
    variance: f64,
    seed: u64,
) -> Result<SimSweepRow> {
    if width == 0 {
        return Err(Error::range("width", 0, ">= 1"));
    }
    if trials == 0 {
        return Err(Error::range("trials", 0, ">= 1"));
    }
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(Error::Domain(format!("mass must be non-negative, got {mass}")));
    }
    let rows = rows_for_mass(width, mass);
    let means = (0..trials)
        .map(|t| {
            let mut r = rng::stream(seed, &[index as u64, t as u64]);
            let m = sample_gaussian_with(rows, width, variance, &mut r)?;
            Ok(singular_values(&m)?.mean)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean_sv, stddev_sv) = mean_and_sd(&means);
    Ok(SimSweepRow {
        width,
        mass,
        matrix_rows: rows,
        trials,
        mean_sv,
        stddev_sv,
    })
}

/// Mean singular value of `(round(w + m/2)) x w` Gaussian matrices for each mass.
pub fn simulate_mass_sweep(
    width: usize,
    masses: &[f64],
    trials: usize,
    variance: f64,
    seed: u64,
) -> Result<Vec<SimSweepRow>> {
    masses
        .iter()
        .enumerate()
        .map(|(i, &m)| simulate_mass_point(width, m, i, trials, variance, seed))
        .collect()
}
