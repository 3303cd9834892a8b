//! Architecture specifications and closed-form topology metrics.
//!
//! A network is a sequence of cells. Inside a cell every layer has the same
//! width `w`; layers are indexed `0..depth`. Layer `i >= 2` receives
//! long-range links from `min(w * (i - 1), t)` units sampled from layers
//! `0..=i-2` of the same cell, where `t` is the cell's shortcut budget. Each
//! sampled unit feeds every one of the `w` units of layer `i`.
//!
//! The metrics only depend on `(depth, width, budget)` per cell and are
//! computed in closed form. [`realize_topology`] samples a concrete wiring,
//! and [`count_links_oracle`] counts its edges one by one; the two routes are
//! kept independent so they can check each other.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::ratio::Ratio;
use crate::{instrument, rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellSpec {
    pub depth: u32,
    pub width: u32,
    pub shortcut_budget: u32,
}

impl CellSpec {
    pub const fn new(depth: u32, width: u32, shortcut_budget: u32) -> Self {
        CellSpec {
            depth,
            width,
            shortcut_budget,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidSpec(format!("cell {index}: depth must be positive")));
        }
        if self.width == 0 {
            return Err(Error::InvalidSpec(format!("cell {index}: width must be positive")));
        }
        if self.shortcut_budget > 0 && self.depth < 3 {
            return Err(Error::InvalidSpec(format!(
                "cell {index}: a shortcut budget needs depth >= 3 (got {})",
                self.depth
            )));
        }
        Ok(())
    }

    fn require_metric_depth(&self, index: usize) -> Result<()> {
        if self.depth < 3 {
            Err(Error::DegenerateCell {
                cell: index,
                depth: self.depth,
            })
        } else {
            Ok(())
        }
    }

    /// Number of long-range source units feeding `layer`; zero for layers 0 and 1.
    pub fn sources_at(&self, layer: u32) -> u64 {
        if layer < 2 || layer >= self.depth {
            return 0;
        }
        let pool = u64::from(self.width) * u64::from(layer - 1);
        pool.min(u64::from(self.shortcut_budget))
    }

    /// `sum_{i=2}^{d-1} min(w (i - 1), t)`.
    pub fn shortcut_sources(&self) -> u64 {
        (2..self.depth).map(|i| self.sources_at(i)).sum()
    }

    /// Smallest budget at which every candidate unit is used at every layer.
    pub fn saturation_budget(&self) -> u32 {
        self.width * self.depth.saturating_sub(2)
    }

    /// Units in the cell.
    pub fn neurons(&self) -> u64 {
        u64::from(self.width) * u64::from(self.depth)
    }

    // m_c = 2 d S / ((d - 1)(d - 2)) as an exact fraction.
    pub(crate) fn mass_ratio(&self) -> Ratio {
        let d = u128::from(self.depth);
        Ratio::new(
            2 * d * u128::from(self.shortcut_sources()),
            (d - 1) * (d - 2),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Elu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Elu => {
                if x >= 0.0 {
                    x
                } else {
                    libm::expm1(x)
                }
            }
        }
    }

    /// Derivative in terms of the pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x >= 0.0 {
                    1.0
                } else {
                    libm::exp(x)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub cells: Vec<CellSpec>,
    pub activation: Activation,
    pub input_dim: u32,
    pub output_dim: u32,
}

impl ArchitectureSpec {
    pub fn new(
        cells: Vec<CellSpec>,
        activation: Activation,
        input_dim: u32,
        output_dim: u32,
    ) -> Result<Self> {
        let spec = ArchitectureSpec {
            cells,
            activation,
            input_dim,
            output_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn single_cell(
        cell: CellSpec,
        activation: Activation,
        input_dim: u32,
        output_dim: u32,
    ) -> Result<Self> {
        Self::new(alloc::vec![cell], activation, input_dim, output_dim)
    }

    /// Checks the structural invariants. Deserialized specs should go through this.
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidSpec("at least one cell is required".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidSpec("input_dim and output_dim must be positive".into()));
        }
        for (i, c) in self.cells.iter().enumerate() {
            c.validate(i)?;
        }
        Ok(())
    }

    fn require_metric_depths(&self) -> Result<()> {
        self.validate()?;
        for (i, c) in self.cells.iter().enumerate() {
            c.require_metric_depth(i)?;
        }
        Ok(())
    }
}

fn check_layer(cell: &CellSpec, layer: u32) -> Result<()> {
    if layer < 2 || layer + 1 > cell.depth {
        return Err(Error::range(
            "layer",
            i64::from(layer),
            format!("[2, {}]", i64::from(cell.depth) - 1),
        ));
    }
    Ok(())
}

/// Long-range edges entering `layer`: sampled sources times the `w` targets.
pub fn layer_longrange_links(cell: &CellSpec, layer: u32) -> Result<u64> {
    check_layer(cell, layer)?;
    let w = u64::from(cell.width);
    let pool = w * u64::from(layer - 1);
    let t = u64::from(cell.shortcut_budget);
    Ok(if t > pool { pool * w } else { t * w })
}

/// `w^2 (d - 1)(d - 2) / 2`, every (source, target) pair at least two layers apart.
pub fn total_possible_links(cell: &CellSpec) -> Result<u64> {
    cell.require_metric_depth(0)?;
    let w = u64::from(cell.width);
    let d = u64::from(cell.depth);
    Ok(w * w * (d - 1) * (d - 2) / 2)
}

/// Fraction of possible long-range links that are present in the cell.
pub fn cell_density(cell: &CellSpec) -> Result<f64> {
    cell.require_metric_depth(0)?;
    let d = u128::from(cell.depth);
    let r = Ratio::new(
        2 * u128::from(cell.shortcut_sources()),
        u128::from(cell.width) * (d - 1) * (d - 2),
    );
    Ok(r.to_f64())
}

/// Mean cell density over all cells.
pub fn nn_density(arch: &ArchitectureSpec) -> Result<f64> {
    arch.require_metric_depths()?;
    let mut sum = Ratio::ZERO;
    for c in &arch.cells {
        let d = u128::from(c.depth);
        sum = sum.add(Ratio::new(
            2 * u128::from(c.shortcut_sources()),
            u128::from(c.width) * (d - 1) * (d - 2),
        ));
    }
    Ok(sum.to_f64() / arch.cells.len() as f64)
}

/// Mass contribution of a single cell, `w d rho`.
pub fn cell_mass(cell: &CellSpec) -> Result<f64> {
    cell.require_metric_depth(0)?;
    Ok(cell.mass_ratio().to_f64())
}

/// NN-Mass: density-weighted neuron count summed over cells.
pub fn nn_mass(arch: &ArchitectureSpec) -> Result<f64> {
    arch.require_metric_depths()?;
    let total = arch
        .cells
        .iter()
        .fold(Ratio::ZERO, |acc, c| acc.add(c.mass_ratio()));
    Ok(total.to_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellDegree {
    /// `w + m/2` for the cell on its own.
    pub estimate: f64,
    /// Long-range links per node, `m (d-1)(d-2) / (2 d^2)`.
    pub exact_longrange: f64,
    pub neurons: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvgDegree {
    pub per_cell: Vec<CellDegree>,
    /// Neuron-weighted mean of the per-cell estimates.
    pub estimate: f64,
    /// Neuron-weighted mean of the per-cell long-range degrees.
    pub exact_longrange: f64,
}

/// Average degree of the layer graph. The closed form is a single-cell
/// result; with several cells each cell is evaluated alone and the
/// network-wide numbers are neuron-weighted means.
pub fn avg_degree(arch: &ArchitectureSpec) -> Result<AvgDegree> {
    arch.require_metric_depths()?;
    let per_cell: Vec<CellDegree> = arch
        .cells
        .iter()
        .map(|c| {
            let m = c.mass_ratio().to_f64();
            let d = f64::from(c.depth);
            CellDegree {
                estimate: f64::from(c.width) + m / 2.0,
                exact_longrange: m * (d - 1.0) * (d - 2.0) / (2.0 * d * d),
                neurons: c.neurons(),
            }
        })
        .collect();
    let total: u64 = per_cell.iter().map(|c| c.neurons).sum();
    let weighted = |f: fn(&CellDegree) -> f64| {
        per_cell.iter().map(|c| f(c) * c.neurons as f64).sum::<f64>() / total as f64
    };
    let estimate = weighted(|c| c.estimate);
    let exact_longrange = weighted(|c| c.exact_longrange);
    Ok(AvgDegree {
        per_cell,
        estimate,
        exact_longrange,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub per_cell_density: Vec<f64>,
    pub nn_density: f64,
    pub nn_mass: f64,
    pub avg_degree_estimate: f64,
    pub avg_degree_exact_longrange: f64,
}

pub fn mass_report(arch: &ArchitectureSpec) -> Result<MassReport> {
    let per_cell_density = arch
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.require_metric_depth(i)?;
            cell_density(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let degree = avg_degree(arch)?;
    Ok(MassReport {
        per_cell_density,
        nn_density: nn_density(arch)?,
        nn_mass: nn_mass(arch)?,
        avg_degree_estimate: degree.estimate,
        avg_degree_exact_longrange: degree.exact_longrange,
    })
}

/// A unit inside a cell, addressed by (layer, unit) with both zero-indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceUnit {
    pub layer: u32,
    pub unit: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRealization {
    pub depth: u32,
    pub width: u32,
    /// `sources[i]` lists the units feeding layer `i`, sorted. Layers 0 and 1 are empty.
    pub sources: Vec<Vec<SourceUnit>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyRealization {
    pub seed: u64,
    pub cells: Vec<CellRealization>,
}

impl TopologyRealization {
    pub fn sources(&self, cell: usize, layer: usize) -> &[SourceUnit] {
        self.cells
            .get(cell)
            .and_then(|c| c.sources.get(layer))
            .map_or(&[], |v| v.as_slice())
    }
}

/// Samples the long-range sources of every layer, uniformly without
/// replacement from the flattened candidate pool. Each (cell, layer) pair
/// draws from its own stream derived from `seed`.
pub fn realize_topology(arch: &ArchitectureSpec, seed: u64) -> Result<TopologyRealization> {
    arch.validate()?;
    instrument::record_realization();
    let cells = arch
        .cells
        .iter()
        .enumerate()
        .map(|(ci, cell)| {
            let sources = (0..cell.depth)
                .map(|layer| {
                    let amount = cell.sources_at(layer) as usize;
                    if amount == 0 {
                        return Vec::new();
                    }
                    let pool = (cell.width * (layer - 1)) as usize;
                    let mut r = rng::stream(seed, &[ci as u64, u64::from(layer)]);
                    let mut picked: Vec<SourceUnit> = index::sample(&mut r, pool, amount)
                        .into_iter()
                        .map(|k| SourceUnit {
                            layer: k as u32 / cell.width,
                            unit: k as u32 % cell.width,
                        })
                        .collect();
                    picked.sort_unstable();
                    picked
                })
                .collect();
            CellRealization {
                depth: cell.depth,
                width: cell.width,
                sources,
            }
        })
        .collect();
    Ok(TopologyRealization { seed, cells })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellLinkCount {
    pub per_layer: Vec<u64>,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCount {
    pub per_cell: Vec<CellLinkCount>,
    pub total: u64,
}

/// Counts long-range edges by walking every (source unit, target unit) pair.
pub fn count_links_oracle(real: &TopologyRealization) -> LinkCount {
    let per_cell: Vec<CellLinkCount> = real
        .cells
        .iter()
        .map(|cell| {
            let per_layer: Vec<u64> = cell
                .sources
                .iter()
                .map(|srcs| {
                    let mut edges = 0u64;
                    for _src in srcs {
                        for _target in 0..cell.width {
                            edges += 1;
                        }
                    }
                    edges
                })
                .collect();
            let total = per_layer.iter().sum();
            CellLinkCount { per_layer, total }
        })
        .collect();
    let total = per_cell.iter().map(|c| c.total).sum();
    LinkCount { per_cell, total }
}
