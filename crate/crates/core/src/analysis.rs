//! Parameter and FLOP accounting, architecture sweeps, and least-squares
//! fits of measured quantities against topology metrics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::datasets::{Dataset, SyntheticKind};
use crate::network::{self, InitScheme, LrSchedule, MlpModel, TrainConfig};
use crate::topology::{self, count_links_oracle, Activation, ArchitectureSpec, CellSpec};
use crate::{rng, Error, Result};

// Input columns of each body layer: the previous width plus long-range sources.
fn layer_shapes(spec: &ArchitectureSpec) -> impl Iterator<Item = (u64, u64)> + '_ {
    let mut prev = u64::from(spec.input_dim);
    spec.cells.iter().flat_map(move |cell| {
        let w = u64::from(cell.width);
        let first_in = prev;
        prev = w;
        (0..cell.depth).map(move |i| {
            let cols = if i == 0 { first_in } else { w + cell.sources_at(i) };
            (w, cols)
        })
    })
}

/// Trainable parameters: every body layer's weights and biases plus the
/// classifier head.
pub fn param_count(spec: &ArchitectureSpec) -> u64 {
    let body: u64 = layer_shapes(spec).map(|(w, cols)| w * cols + w).sum();
    let last = spec.cells.last().map_or(0, |c| u64::from(c.width));
    let out = u64::from(spec.output_dim);
    body + last * out + out
}

/// Twice the multiply-accumulates of the body layers for one sample.
/// Biases and the classifier head are not counted.
pub fn flop_count(spec: &ArchitectureSpec) -> u64 {
    2 * layer_shapes(spec).map(|(w, cols)| w * cols).sum::<u64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XTransform {
    Identity,
    Log,
}

impl XTransform {
    pub fn apply(self, x: f64) -> Result<f64> {
        match self {
            XTransform::Identity => Ok(x),
            XTransform::Log => {
                if x > 0.0 {
                    Ok(libm::log(x))
                } else {
                    Err(Error::Domain(format!("log transform needs x > 0, got {x}")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub x_transform: XTransform,
    pub n: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> Result<f64> {
        Ok(self.slope * self.x_transform.apply(x)? + self.intercept)
    }
}

/// Ordinary least squares of `ys` on `T(xs)`, with `R^2 = 1 - SS_res / SS_tot`.
pub fn linear_fit(xs: &[f64], ys: &[f64], x_transform: XTransform) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} x values, {} y values", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::range("points", xs.len() as i64, ">= 2"));
    }
    let tx = xs
        .iter()
        .map(|&x| x_transform.apply(x))
        .collect::<Result<Vec<_>>>()?;
    if tx.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("fit inputs"));
    }
    let n = tx.len() as f64;
    let mx = tx.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in tx.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if syy == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    if sxx == 0.0 {
        return Err(Error::Domain("all transformed x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = tx
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        r_squared: (1.0 - ss_res / syy).clamp(0.0, 1.0),
        x_transform,
        n: tx.len(),
    })
}

/// Coefficient of determination of arbitrary predictions. Unlike the
/// in-sample value it can be negative.
pub fn r_squared(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() || observed.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions for {} observations",
            predicted.len(),
            observed.len()
        )));
    }
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let ss_tot: f64 = observed.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let ss_res: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(p, y)| (y - p) * (y - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Accuracy predicted by a fit of accuracy against `log(mass)`.
pub fn predict_accuracy(fit: &LinearFit, masses: &[f64]) -> Result<Vec<f64>> {
    if fit.x_transform != XTransform::Log {
        return Err(Error::Unsupported("accuracy prediction needs a fit on log(mass)".into()));
    }
    masses.iter().map(|&m| fit.predict(m)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldoutFit {
    pub fit: LinearFit,
    /// R^2 of the fit's predictions on the points it did not see.
    pub held_out_r_squared: f64,
    pub held_out: usize,
}

/// Fits on the points with `in_train[k]` set and scores the rest.
pub fn holdout_fit(xs: &[f64], ys: &[f64], in_train: &[bool], x_transform: XTransform) -> Result<HoldoutFit> {
    if in_train.len() != xs.len() || ys.len() != xs.len() {
        return Err(Error::Shape(format!(
            "{} x values, {} y values, {} split flags",
            xs.len(),
            ys.len(),
            in_train.len()
        )));
    }
    let pick = |keep: bool| -> (Vec<f64>, Vec<f64>) {
        xs.iter()
            .zip(ys)
            .zip(in_train)
            .filter(|(_, &t)| t == keep)
            .map(|((&x, &y), _)| (x, y))
            .unzip()
    };
    let (tx, ty) = pick(true);
    let (hx, hy) = pick(false);
    let fit = linear_fit(&tx, &ty, x_transform)?;
    let predicted = hx.iter().map(|&x| fit.predict(x)).collect::<Result<Vec<_>>>()?;
    Ok(HoldoutFit {
        fit,
        held_out_r_squared: r_squared(&predicted, &hy)?,
        held_out: hx.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "source")]
pub enum DatasetRef {
    Synthetic {
        kind: SyntheticKind,
        /// Segment or ring count.
        n: u32,
        n_train: usize,
        n_test: usize,
    },
    Idx {
        train_images: String,
        train_labels: String,
        test_images: String,
        test_labels: String,
    },
}

impl DatasetRef {
    pub fn circle20() -> Self {
        DatasetRef::Synthetic {
            kind: SyntheticKind::Circle,
            n: 20,
            n_train: crate::datasets::TRAIN_SAMPLES,
            n_test: crate::datasets::TEST_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    #[serde(default = "default_schedule")]
    pub schedule: LrSchedule,
    #[serde(default)]
    pub momentum: f64,
}

fn default_schedule() -> LrSchedule {
    LrSchedule::Cosine
}

fn default_probes() -> usize {
    network::DEFAULT_PROBES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub widths: Vec<u32>,
    pub depths: Vec<u32>,
    pub budgets: Vec<u32>,
    pub repeats: usize,
    pub activation: Activation,
    pub train: TrainHyper,
    pub dataset: DatasetRef,
    #[serde(default = "default_probes")]
    pub probes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub depth: u32,
    pub width: u32,
    pub budget: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepJob {
    pub config_index: usize,
    pub repeat: usize,
    pub config: SweepConfig,
    /// Seed of this job; topology, init, data order and probes derive from it.
    pub seed: u64,
}

impl SweepGrid {
    /// Width 8, depths 16..=32 step 4, budgets 0..=14, five repeats, 60 epochs.
    pub fn full_preset(dataset: DatasetRef) -> Self {
        SweepGrid {
            widths: alloc::vec![8],
            depths: alloc::vec![16, 20, 24, 28, 32],
            budgets: (0..=14).collect(),
            repeats: 5,
            activation: Activation::Elu,
            train: TrainHyper {
                epochs: 60,
                batch_size: 64,
                lr0: 0.05,
                schedule: LrSchedule::Cosine,
                momentum: 0.0,
            },
            dataset,
            probes: network::DEFAULT_PROBES,
        }
    }

    /// Three depths by five budgets by three repeats on Circle20 for 15 epochs.
    /// Budgets start at 1 so every configuration has a positive mass for
    /// log-scale fits.
    pub fn desk_preset() -> Self {
        SweepGrid {
            widths: alloc::vec![8],
            depths: alloc::vec![16, 24, 32],
            budgets: alloc::vec![1, 2, 4, 8, 14],
            repeats: 3,
            activation: Activation::Relu,
            train: TrainHyper {
                epochs: 15,
                batch_size: 8,
                lr0: 0.05,
                schedule: LrSchedule::Cosine,
                momentum: 0.0,
            },
            dataset: DatasetRef::circle20(),
            probes: network::DEFAULT_PROBES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.depths.is_empty() || self.budgets.is_empty() {
            return Err(Error::InvalidSpec("sweep grid lists must be non-empty".into()));
        }
        if self.repeats == 0 {
            return Err(Error::range("repeats", 0, ">= 1"));
        }
        if self.probes == 0 {
            return Err(Error::range("probes", 0, ">= 1"));
        }
        if let Some(&d) = self.depths.iter().find(|&&d| d < 3) {
            return Err(Error::DegenerateCell { cell: 0, depth: d });
        }
        if self.widths.contains(&0) {
            return Err(Error::InvalidSpec("widths must be positive".into()));
        }
        if self.train.batch_size == 0 {
            return Err(Error::range("batch_size", 0, ">= 1"));
        }
        Ok(())
    }

    /// Configurations in depth-major, then width, then budget order.
    pub fn configs(&self) -> Vec<SweepConfig> {
        let mut out = Vec::new();
        for &depth in &self.depths {
            for &width in &self.widths {
                for &budget in &self.budgets {
                    out.push(SweepConfig {
                        depth,
                        width,
                        budget,
                    });
                }
            }
        }
        out
    }

    /// Every (config, repeat) job, in output order.
    pub fn jobs(&self, master_seed: u64) -> Vec<SweepJob> {
        let mut out = Vec::new();
        for (ci, config) in self.configs().into_iter().enumerate() {
            for repeat in 0..self.repeats {
                out.push(SweepJob {
                    config_index: ci,
                    repeat,
                    config,
                    seed: rng::derive_seed(master_seed, &[ci as u64, repeat as u64]),
                });
            }
        }
        out
    }

    pub fn spec_for(&self, config: &SweepConfig, input_dim: u32, output_dim: u32) -> Result<ArchitectureSpec> {
        ArchitectureSpec::single_cell(
            CellSpec::new(config.depth, config.width, config.budget),
            self.activation,
            input_dim,
            output_dim,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub depth: u32,
    pub width: u32,
    pub budget: u32,
    pub seed: u64,
    pub nn_mass: f64,
    pub nn_density: f64,
    pub param_count: u64,
    pub flop_count: u64,
    /// NaN when the run diverged.
    pub test_acc: f64,
    pub train_loss: f64,
    pub mean_init_sv: f64,
    pub diverged: bool,
}

/// Builds, probes and trains one sweep job. A diverged run yields a row
/// flagged `diverged` rather than an error.
pub fn run_job(grid: &SweepGrid, job: &SweepJob, train_set: &Dataset, test_set: &Dataset) -> Result<SweepRow> {
    let input_dim = train_set.feature_dim() as u32;
    let output_dim = train_set.n_classes() as u32;
    let spec = grid.spec_for(&job.config, input_dim, output_dim)?;
    let nn_mass = topology::nn_mass(&spec)?;
    let nn_density = topology::nn_density(&spec)?;

    let init = InitScheme::for_activation(grid.activation);
    let mut model = MlpModel::build_for_jacobians(
        &spec,
        rng::derive_seed(job.seed, &[0]),
        rng::derive_seed(job.seed, &[1]),
        init,
    )?;

    // The realized wiring must reproduce the closed-form mass.
    let cell = &spec.cells[0];
    let links = count_links_oracle(model.realization()).total;
    let d = f64::from(cell.depth);
    let realized_mass = 2.0 * d * links as f64 / (f64::from(cell.width) * (d - 1.0) * (d - 2.0));
    if (realized_mass - nn_mass).abs() > 1e-12 * nn_mass.max(1.0) {
        return Err(Error::Consistency(format!(
            "realized mass {realized_mass} differs from closed form {nn_mass}"
        )));
    }

    let probes = network::gaussian_probes(input_dim as usize, grid.probes, rng::derive_seed(job.seed, &[3]))?;
    let mean_init_sv = network::ldi_report(&model, &probes)?.summary_mean_sv;

    let config = TrainConfig {
        epochs: grid.train.epochs,
        batch_size: grid.train.batch_size,
        lr0: grid.train.lr0,
        schedule: grid.train.schedule,
        momentum: grid.train.momentum,
        seed: rng::derive_seed(job.seed, &[2]),
    };
    let (test_acc, train_loss, diverged) = match network::train(&mut model, train_set, test_set, &config) {
        Ok(trace) => match trace.final_record() {
            Some(r) => (r.test_acc, r.train_loss, false),
            None => {
                let (_, acc) = network::evaluate(&model, test_set)?;
                (acc, network::evaluate(&model, train_set)?.0, false)
            }
        },
        Err(Error::Divergence { .. }) => (f64::NAN, f64::NAN, true),
        Err(e) => return Err(e),
    };

    Ok(SweepRow {
        depth: job.config.depth,
        width: job.config.width,
        budget: job.config.budget,
        seed: job.seed,
        nn_mass,
        nn_density,
        param_count: param_count(&spec),
        flop_count: flop_count(&spec),
        test_acc,
        train_loss,
        mean_init_sv,
        diverged,
    })
}

/// Runs every job in order on the current thread.
pub fn run_sweep(grid: &SweepGrid, master_seed: u64, train_set: &Dataset, test_set: &Dataset) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    grid.jobs(master_seed)
        .iter()
        .map(|job| run_job(grid, job, train_set, test_set))
        .collect()
}

/// Per-configuration means over the non-diverged repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub depth: u32,
    pub width: u32,
    pub budget: u32,
    pub nn_mass: f64,
    pub param_count: u64,
    pub flop_count: u64,
    pub test_acc: f64,
    pub train_loss: f64,
    pub mean_init_sv: f64,
    pub repeats: usize,
}

/// Averages rows that share (depth, width, budget), keeping first-seen order.
/// Configurations whose every repeat diverged are dropped.
pub fn average_repeats(rows: &[SweepRow]) -> Vec<ConfigSummary> {
    let mut out: Vec<ConfigSummary> = Vec::new();
    for row in rows.iter().filter(|r| !r.diverged) {
        let slot = out
            .iter_mut()
            .find(|s| (s.depth, s.width, s.budget) == (row.depth, row.width, row.budget));
        match slot {
            Some(s) => {
                s.test_acc += row.test_acc;
                s.train_loss += row.train_loss;
                s.mean_init_sv += row.mean_init_sv;
                s.repeats += 1;
            }
            None => out.push(ConfigSummary {
                depth: row.depth,
                width: row.width,
                budget: row.budget,
                nn_mass: row.nn_mass,
                param_count: row.param_count,
                flop_count: row.flop_count,
                test_acc: row.test_acc,
                train_loss: row.train_loss,
                mean_init_sv: row.mean_init_sv,
                repeats: 1,
            }),
        }
    }
    for s in &mut out {
        let k = s.repeats as f64;
        s.test_acc /= k;
        s.train_loss /= k;
        s.mean_init_sv /= k;
    }
    out
}
