//! Command-line grammar and dispatch.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use nnmass_core::analysis::{self, average_repeats, holdout_fit, linear_fit, SweepGrid, XTransform};
use nnmass_core::datasets::{self, SyntheticKind};
use nnmass_core::design::{self, CellGeometry, DesignQuery, SearchStrategy};
use nnmass_core::network::{self, gaussian_probes, InitScheme, LrSchedule, MlpModel, TrainConfig};
use nnmass_core::randmat;
use nnmass_core::topology::{self, count_links_oracle, realize_topology};
use nnmass_core::{rng, Activation};
use serde_json::json;

use crate::error::{Error, Result};
use crate::files::{self, print_json, RowWriter};
use crate::{checkpoint, sweep};

#[derive(Debug, Parser)]
#[command(name = "nnmass", version, about = "NN-Mass topology metrics, simulations, training sweeps and design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cell densities, NN-Density, NN-Mass and average degree of an architecture.
    Mass {
        #[arg(long)]
        arch: PathBuf,
    },
    /// Average degree estimates, per cell and network-wide.
    Degree {
        #[arg(long)]
        arch: PathBuf,
    },
    /// Sample the long-range wiring of an architecture.
    Realize {
        #[arg(long)]
        arch: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Write the full realization here; stdout gets link counts only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean singular value of Gaussian Jacobian proxies across a mass grid.
    SimulateSv {
        #[arg(long)]
        width: usize,
        /// begin:end:step, end exclusive.
        #[arg(long)]
        mass: MassGrid,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        variance: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a Seg-n or Circle-n dataset as CSV.
    GenData {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 20)]
        n: u32,
        #[arg(long, default_value_t = datasets::TRAIN_SAMPLES)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse an IDX image/label pair and summarize it.
    LoadIdx {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Also write the samples as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one architecture and write its per-epoch trace.
    Train {
        #[arg(long)]
        arch: PathBuf,
        /// circle:N, seg:N or idx:TRAIN_IMAGES,TRAIN_LABELS,TEST_IMAGES,TEST_LABELS
        #[arg(long)]
        data: DataArg,
        #[arg(long)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long)]
        lr: f64,
        #[arg(long, default_value_t = 0.0)]
        momentum: f64,
        #[arg(long, value_enum, default_value_t = ScheduleArg::Cosine)]
        schedule: ScheduleArg,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = datasets::TRAIN_SAMPLES)]
        train_samples: usize,
        #[arg(long, default_value_t = datasets::TEST_SAMPLES)]
        test_samples: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Layerwise Jacobian singular values of a freshly initialized or checkpointed model.
    Ldi {
        #[arg(long, required_unless_present = "checkpoint")]
        arch: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = network::DEFAULT_PROBES)]
        probes: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Train every configuration of a grid and write one CSV row per run.
    Sweep {
        #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
        grid: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Least-squares fit of one CSV column against another.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, value_enum, default_value_t = TransformArg::Identity)]
        transform: TransformArg,
        /// Fit individual sweep rows instead of per-configuration means.
        #[arg(long)]
        per_repeat: bool,
        /// Depths excluded from the fit and used to score it.
        #[arg(long, value_delimiter = ',')]
        holdout_depths: Vec<u32>,
    },
    /// Choose shortcut budgets that reach a target NN-Mass with the fewest parameters.
    Design {
        #[arg(long)]
        target_mass: f64,
        /// Comma-separated DEPTHxWIDTH per cell, e.g. 4x2,4x3,4x4
        #[arg(long, value_delimiter = ',')]
        cells: Vec<CellArg>,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        #[arg(long)]
        max_params: Option<u64>,
        #[arg(long, default_value_t = 3)]
        input_dim: u32,
        #[arg(long, default_value_t = 10)]
        output_dim: u32,
        #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
        activation: ActivationArg,
        #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
        strategy: StrategyArg,
    },
    /// Match a reference network's NN-Mass with a different cell geometry.
    Compress {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, value_delimiter = ',')]
        cells: Vec<CellArg>,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassGrid {
    pub begin: f64,
    pub end: f64,
    pub step: f64,
}

impl MassGrid {
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let m = self.begin + f64::from(k) * self.step;
            if m >= self.end {
                return out;
            }
            out.push(m);
            k += 1;
        }
    }
}

impl FromStr for MassGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [b, e, st] = parts[..] else {
            return Err(format!("expected begin:end:step, got {s:?}"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
        let (begin, end, step) = (num(b)?, num(e)?, num(st)?);
        if !(step > 0.0 && step.is_finite()) || !begin.is_finite() || !end.is_finite() || begin < 0.0 {
            return Err(format!("need begin >= 0 and step > 0, got {s:?}"));
        }
        Ok(MassGrid { begin, end, step })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataArg {
    Synthetic(SyntheticKind, u32),
    Idx([PathBuf; 4]),
}

impl FromStr for DataArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("expected circle:N, seg:N or idx:..., got {s:?}"))?;
        match kind {
            "circle" | "seg" => {
                let n = rest.parse().map_err(|_| format!("not a count: {rest:?}"))?;
                let kind = if kind == "circle" {
                    SyntheticKind::Circle
                } else {
                    SyntheticKind::Seg
                };
                Ok(DataArg::Synthetic(kind, n))
            }
            "idx" => {
                let p: Vec<PathBuf> = rest.split(',').map(PathBuf::from).collect();
                let [a, b, c, d] = <[PathBuf; 4]>::try_from(p)
                    .map_err(|_| "idx needs TRAIN_IMAGES,TRAIN_LABELS,TEST_IMAGES,TEST_LABELS".to_string())?;
                Ok(DataArg::Idx([a, b, c, d]))
            }
            _ => Err(format!("unknown data source {kind:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellArg(pub CellGeometry);

impl FromStr for CellArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (d, w) = s
            .split_once('x')
            .ok_or_else(|| format!("expected DEPTHxWIDTH, got {s:?}"))?;
        let parse = |t: &str| t.parse::<u32>().map_err(|_| format!("not a count: {t:?}"));
        Ok(CellArg(CellGeometry::new(parse(d)?, parse(w)?)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Seg,
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Cosine,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Desk,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformArg {
    Identity,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Linear,
    Relu,
    Elu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Auto,
    Exhaustive,
    Monotone,
    Greedy,
}

fn geometry(cells: &[CellArg]) -> Vec<CellGeometry> {
    cells.iter().map(|c| c.0).collect()
}

fn load_data(data: &DataArg, train_samples: usize, test_samples: usize, seed: u64) -> Result<(datasets::Dataset, datasets::Dataset)> {
    match data {
        DataArg::Synthetic(kind, n) => Ok(datasets::synthetic_split(*kind, *n, train_samples, test_samples, seed)?),
        DataArg::Idx([a, b, c, d]) => Ok((files::load_idx(a, b)?, files::load_idx(c, d)?)),
    }
}

// Numeric columns of a CSV file, by header name.
fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let idx = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| Error::Input(format!("{}: no column named {n:?}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        for (c, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            let v = match field {
                "true" => 1.0,
                "false" => 0.0,
                _ => field.parse::<f64>().map_err(|_| {
                    Error::Input(format!("{}: row {}: {:?} is not a number", path.display(), line + 2, field))
                })?,
            };
            cols[c].push(v);
        }
    }
    Ok(cols)
}

fn read_sweep_rows(path: &Path) -> Result<Option<Vec<analysis::SweepRow>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?;
    if !sweep::SWEEP_HEADER.iter().all(|h| headers.iter().any(|x| x == *h)) {
        return Ok(None);
    }
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<analysis::SweepRow>, _>>()
        .map_err(|e| Error::csv(path, e))?;
    Ok(Some(rows))
}

fn summary_value(s: &analysis::ConfigSummary, column: &str) -> Option<f64> {
    Some(match column {
        "depth" => f64::from(s.depth),
        "width" => f64::from(s.width),
        "budget" => f64::from(s.budget),
        "nn_mass" => s.nn_mass,
        "param_count" => s.param_count as f64,
        "flop_count" => s.flop_count as f64,
        "test_acc" => s.test_acc,
        "train_loss" => s.train_loss,
        "mean_init_sv" => s.mean_init_sv,
        _ => return None,
    })
}

fn fit_command(csv_path: &Path, x: &str, y: &str, transform: XTransform, per_repeat: bool, holdout: &[u32]) -> Result<()> {
    let sweep_rows = if per_repeat { None } else { read_sweep_rows(csv_path)? };
    let (xs, ys, depths) = match sweep_rows {
        Some(rows) => {
            let summaries = average_repeats(&rows);
            let pick = |col: &str| {
                summaries
                    .iter()
                    .map(|s| summary_value(s, col).ok_or_else(|| Error::Input(format!("cannot average column {col:?}"))))
                    .collect::<Result<Vec<f64>>>()
            };
            (pick(x)?, pick(y)?, summaries.iter().map(|s| s.depth).collect::<Vec<_>>())
        }
        None => {
            let mut cols = read_columns(csv_path, &[x, y])?;
            let ys = cols.pop().unwrap();
            let xs = cols.pop().unwrap();
            let depths = if holdout.is_empty() {
                Vec::new()
            } else {
                read_columns(csv_path, &["depth"])?[0].iter().map(|&d| d as u32).collect()
            };
            (xs, ys, depths)
        }
    };
    if holdout.is_empty() {
        let fit = linear_fit(&xs, &ys, transform)?;
        return print_json(&json!({ "x": x, "y": y, "points": xs.len(), "fit": fit }));
    }
    let in_train: Vec<bool> = depths.iter().map(|d| !holdout.contains(d)).collect();
    let h = holdout_fit(&xs, &ys, &in_train, transform)?;
    print_json(&json!({
        "x": x,
        "y": y,
        "points": xs.len(),
        "fit": h.fit,
        "held_out": h.held_out,
        "held_out_r_squared": h.held_out_r_squared,
    }))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mass { arch } => {
            let spec = files::read_arch(&arch)?;
            print_json(&topology::mass_report(&spec)?)
        }
        Command::Degree { arch } => {
            let spec = files::read_arch(&arch)?;
            print_json(&topology::avg_degree(&spec)?)
        }
        Command::Realize { arch, seed, out } => {
            let spec = files::read_arch(&arch)?;
            let real = realize_topology(&spec, seed)?;
            let links = count_links_oracle(&real);
            match out {
                Some(path) => {
                    files::write_json(&path, &real)?;
                    print_json(&json!({ "seed": seed, "links": links }))
                }
                None => print_json(&json!({ "seed": seed, "links": links, "realization": real })),
            }
        }
        Command::SimulateSv {
            width,
            mass,
            trials,
            seed,
            variance,
            out,
        } => {
            let masses = mass.values();
            if masses.is_empty() {
                return Err(Error::Input("mass grid is empty".into()));
            }
            let mut w = RowWriter::create(&out, &["width", "mass", "matrix_rows", "trials", "mean_sv", "stddev_sv"])?;
            for (i, &m) in masses.iter().enumerate() {
                w.write(&randmat::simulate_mass_point(width, m, i, trials, variance, seed)?)?;
            }
            print_json(&json!({ "rows": masses.len(), "out": out }))
        }
        Command::GenData {
            kind,
            n,
            samples,
            seed,
            out,
        } => {
            let kind = match kind {
                KindArg::Seg => SyntheticKind::Seg,
                KindArg::Circle => SyntheticKind::Circle,
            };
            let ds = datasets::generate(kind, n, samples, seed)?;
            files::write_dataset_csv(&ds, &out)?;
            print_json(&json!({ "samples": ds.len(), "class_counts": ds.class_counts(), "out": out }))
        }
        Command::LoadIdx { images, labels, out } => {
            let ds = files::load_idx(&images, &labels)?;
            if let Some(path) = &out {
                files::write_dataset_csv(&ds, path)?;
            }
            print_json(&json!({
                "samples": ds.len(),
                "feature_dim": ds.feature_dim(),
                "provenance": ds.provenance(),
                "class_counts": ds.class_counts(),
            }))
        }
        Command::Train {
            arch,
            data,
            epochs,
            batch_size,
            lr,
            momentum,
            schedule,
            seed,
            train_samples,
            test_samples,
            out,
            checkpoint: ckpt,
        } => {
            let spec = files::read_arch(&arch)?;
            let (train_set, test_set) = load_data(&data, train_samples, test_samples, rng::derive_seed(seed, &[4]))?;
            let mut model = MlpModel::build(
                &spec,
                rng::derive_seed(seed, &[1]),
                rng::derive_seed(seed, &[2]),
                InitScheme::for_activation(spec.activation),
            )?;
            let config = TrainConfig {
                epochs,
                batch_size,
                lr0: lr,
                schedule: match schedule {
                    ScheduleArg::Cosine => LrSchedule::Cosine,
                    ScheduleArg::Constant => LrSchedule::Constant,
                },
                momentum,
                seed: rng::derive_seed(seed, &[3]),
            };
            let trace = network::train(&mut model, &train_set, &test_set, &config)?;
            let mut w = RowWriter::create(&out, &["epoch", "train_loss", "train_acc", "test_acc"])?;
            for r in &trace.records {
                w.write(&(r.epoch, r.train_loss, r.train_acc, r.test_acc))?;
            }
            if let Some(path) = &ckpt {
                checkpoint::save(&model, path)?;
            }
            print_json(&json!({
                "epochs": trace.records.len(),
                "final": trace.final_record(),
                "param_count": analysis::param_count(&spec),
                "nn_mass": topology::nn_mass(&spec).ok(),
            }))
        }
        Command::Ldi {
            arch,
            checkpoint: ckpt,
            probes,
            seed,
        } => {
            let model = match (&ckpt, &arch) {
                (Some(path), _) => checkpoint::load(path)?,
                (None, Some(path)) => {
                    let spec = files::read_arch(path)?;
                    MlpModel::build_for_jacobians(
                        &spec,
                        rng::derive_seed(seed, &[1]),
                        rng::derive_seed(seed, &[2]),
                        InitScheme::for_activation(spec.activation),
                    )?
                }
                (None, None) => unreachable!("clap requires --arch or --checkpoint"),
            };
            let x = gaussian_probes(model.spec().input_dim as usize, probes, rng::derive_seed(seed, &[3]))?;
            print_json(&network::ldi_report(&model, &x)?)
        }
        Command::Sweep {
            grid,
            preset,
            seed,
            jobs,
            out,
        } => {
            let grid = match (grid, preset) {
                (Some(path), _) => files::read_grid(&path)?,
                (None, Some(PresetArg::Desk)) => SweepGrid::desk_preset(),
                (None, Some(PresetArg::Full)) => {
                    SweepGrid::full_preset(nnmass_core::analysis::DatasetRef::circle20())
                }
                (None, None) => unreachable!("clap requires --grid or --preset"),
            };
            grid.validate()?;
            let (train_set, test_set) = sweep::load_dataset(&grid.dataset, seed)?;
            let mut w = RowWriter::create(&out, &sweep::SWEEP_HEADER)?;
            let mut diverged = 0usize;
            let rows = sweep::run_parallel(&grid, seed, jobs, &train_set, &test_set, |row| {
                diverged += usize::from(row.diverged);
                eprintln!(
                    "depth {} width {} budget {} acc {:.4}",
                    row.depth, row.width, row.budget, row.test_acc
                );
                w.write(row)
            })?;
            print_json(&json!({ "rows": rows, "diverged": diverged, "out": out }))
        }
        Command::Fit {
            csv,
            x,
            y,
            transform,
            per_repeat,
            holdout_depths,
        } => {
            let transform = match transform {
                TransformArg::Identity => XTransform::Identity,
                TransformArg::Log => XTransform::Log,
            };
            fit_command(&csv, &x, &y, transform, per_repeat, &holdout_depths)
        }
        Command::Design {
            target_mass,
            cells,
            tol,
            max_params,
            input_dim,
            output_dim,
            activation,
            strategy,
        } => {
            let query = DesignQuery {
                target_mass,
                cells: geometry(&cells),
                tolerance: tol,
                max_params,
                activation: match activation {
                    ActivationArg::Linear => Activation::Linear,
                    ActivationArg::Relu => Activation::Relu,
                    ActivationArg::Elu => Activation::Elu,
                },
                input_dim,
                output_dim,
            };
            let strategy = match strategy {
                StrategyArg::Auto => SearchStrategy::Auto,
                StrategyArg::Exhaustive => SearchStrategy::Exhaustive,
                StrategyArg::Monotone => SearchStrategy::Monotone,
                StrategyArg::Greedy => SearchStrategy::Greedy,
            };
            print_json(&design::design_with(&query, strategy)?)
        }
        Command::Compress { reference, cells, tol } => {
            let spec = files::read_arch(&reference)?;
            print_json(&design::compress(&spec, &geometry(&cells), tol)?)
        }
    }
}
