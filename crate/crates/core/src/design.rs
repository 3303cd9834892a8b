//! Choosing shortcut budgets for a fixed cell geometry so that a network
//! hits a target NN-Mass with as few parameters as possible.
//!
//! Everything here works from the closed forms: no topology is realized and
//! no model is built or trained.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::param_count;
use crate::topology::{self, Activation, ArchitectureSpec, CellSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub depth: u32,
    pub width: u32,
}

impl CellGeometry {
    pub const fn new(depth: u32, width: u32) -> Self {
        CellGeometry { depth, width }
    }
}

fn default_tolerance() -> f64 {
    0.05
}

fn default_input_dim() -> u32 {
    3
}

fn default_output_dim() -> u32 {
    10
}

fn default_activation() -> Activation {
    Activation::Relu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignQuery {
    pub target_mass: f64,
    pub cells: Vec<CellGeometry>,
    /// Relative half-width of the accepted mass window.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub max_params: Option<u64>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_input_dim")]
    pub input_dim: u32,
    #[serde(default = "default_output_dim")]
    pub output_dim: u32,
}

impl DesignQuery {
    pub fn new(target_mass: f64, cells: Vec<CellGeometry>, tolerance: f64) -> Self {
        DesignQuery {
            target_mass,
            cells,
            tolerance,
            max_params: None,
            activation: default_activation(),
            input_dim: default_input_dim(),
            output_dim: default_output_dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub budgets: Vec<u32>,
    pub achieved_mass: f64,
    pub param_count: u64,
    /// `|achieved - target| / target`, or the absolute difference for a zero target.
    pub gap: f64,
    pub within_tolerance: bool,
    pub spec: ArchitectureSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compression {
    pub result: DesignResult,
    pub reference_mass: f64,
    pub reference_params: u64,
    /// Reference parameters over designed parameters.
    pub reduction_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStrategy {
    /// Monotone search when the enumeration is small enough, greedy otherwise.
    Auto,
    /// Every budget combination.
    Exhaustive,
    /// Every combination of the leading cells plus a binary search on the last.
    Monotone,
    /// Fill cells by mass per parameter, then refine locally.
    Greedy,
}

/// Largest number of combinations the enumerating strategies will visit.
pub const ENUMERATION_LIMIT: u128 = 4_000_000;

fn check_geometry(cells: &[CellGeometry]) -> Result<()> {
    if cells.is_empty() {
        return Err(Error::InvalidSpec("at least one cell is required".into()));
    }
    for (i, c) in cells.iter().enumerate() {
        if c.width == 0 {
            return Err(Error::InvalidSpec(format!("cell {i}: width must be positive")));
        }
        if c.depth < 3 {
            return Err(Error::DegenerateCell { cell: i, depth: c.depth });
        }
    }
    Ok(())
}

/// Smallest and largest NN-Mass the geometry can reach: zero with no
/// shortcuts, `sum w d` with every cell saturated.
pub fn mass_range(cells: &[CellGeometry]) -> Result<(f64, f64)> {
    check_geometry(cells)?;
    let max = cells
        .iter()
        .map(|c| f64::from(c.width) * f64::from(c.depth))
        .sum();
    Ok((0.0, max))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

// Masses over a common denominator: mass * den = sum_c coef_c * S_c(t_c),
// where S_c(t) = sum_i min(w (i - 1), t). Integer arithmetic keeps the
// window tests exact and cheap.
struct Problem {
    cells: Vec<CellGeometry>,
    /// `prefix[c][t] = S_c(t)` for `t` in `0..=saturation`.
    prefix: Vec<Vec<u64>>,
    coef: Vec<u128>,
    den: u128,
    lo: f64,
    hi: f64,
    target: f64,
    max_params: Option<u64>,
    base_params: u64,
}

#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    budgets: Vec<u32>,
    num: u128,
    params: u64,
}

impl Problem {
    fn new(cells: &[CellGeometry], target: f64, lo: f64, hi: f64, max_params: Option<u64>, io: (u32, u32)) -> Result<Self> {
        check_geometry(cells)?;
        let mut den: u128 = 1;
        for c in cells {
            let d = u128::from(c.depth);
            let k = (d - 1) * (d - 2);
            den = (den / gcd(den, k))
                .checked_mul(k)
                .ok_or_else(|| Error::Unsupported("cell depths have no representable common denominator".into()))?;
        }
        let coef = cells
            .iter()
            .map(|c| {
                let d = u128::from(c.depth);
                2 * d * (den / ((d - 1) * (d - 2)))
            })
            .collect();
        let prefix = cells
            .iter()
            .map(|c| {
                let sat = c.width * (c.depth - 2);
                (0..=sat)
                    .map(|t| CellSpec::new(c.depth, c.width, t).shortcut_sources())
                    .collect()
            })
            .collect();
        let zero_spec = ArchitectureSpec::new(
            cells.iter().map(|c| CellSpec::new(c.depth, c.width, 0)).collect(),
            Activation::Linear,
            io.0,
            io.1,
        )?;
        Ok(Problem {
            cells: cells.to_vec(),
            prefix,
            coef,
            den,
            lo,
            hi,
            target,
            max_params,
            base_params: param_count(&zero_spec),
        })
    }

    fn options(&self, c: usize) -> usize {
        self.prefix[c].len()
    }

    fn mass_of(&self, num: u128) -> f64 {
        num as f64 / self.den as f64
    }

    fn candidate(&self, budgets: &[u32]) -> Candidate {
        let mut num = 0u128;
        let mut params = self.base_params;
        for (c, &t) in budgets.iter().enumerate() {
            let s = self.prefix[c][t as usize];
            num += self.coef[c] * u128::from(s);
            params += u64::from(self.cells[c].width) * s;
        }
        Candidate {
            budgets: budgets.to_vec(),
            num,
            params,
        }
    }

    fn feasible(&self, cand: &Candidate) -> bool {
        let m = self.mass_of(cand.num);
        m >= self.lo && m <= self.hi && self.max_params.is_none_or(|p| cand.params <= p)
    }

    // Distance from the mass window; zero inside.
    fn distance(&self, cand: &Candidate) -> f64 {
        let m = self.mass_of(cand.num);
        if m < self.lo {
            self.lo - m
        } else if m > self.hi {
            m - self.hi
        } else {
            0.0
        }
    }
}

// Keeps the best feasible candidate by (params, budgets) and, separately,
// the nearest candidate by (distance, params, budgets).
struct Tracker {
    best: Option<Candidate>,
    nearest: Option<(f64, Candidate)>,
}

impl Tracker {
    fn new() -> Self {
        Tracker {
            best: None,
            nearest: None,
        }
    }

    fn offer(&mut self, p: &Problem, cand: Candidate) {
        if p.feasible(&cand) {
            let better = match &self.best {
                None => true,
                Some(b) => (cand.params, &cand.budgets) < (b.params, &b.budgets),
            };
            if better {
                self.best = Some(cand);
            }
        } else if self.best.is_none() {
            let dist = p.distance(&cand);
            let better = match &self.nearest {
                None => true,
                Some((d, n)) => {
                    dist < *d || (dist == *d && (cand.params, &cand.budgets) < (n.params, &n.budgets))
                }
            };
            if better {
                self.nearest = Some((dist, cand));
            }
        }
    }

    fn finish(self) -> Option<(Candidate, bool)> {
        match self.best {
            Some(b) => Some((b, true)),
            None => self.nearest.map(|(_, n)| (n, false)),
        }
    }
}

fn enumeration_size(p: &Problem, cells: usize) -> u128 {
    (0..cells).fold(1u128, |acc, c| acc.saturating_mul(p.options(c) as u128))
}

// Calls `f` on every budget vector of the first `n` cells, in lexicographic order.
fn for_each_prefix(p: &Problem, n: usize, mut f: impl FnMut(&[u32])) {
    let mut budgets = vec![0u32; n];
    loop {
        f(&budgets);
        let mut c = n;
        loop {
            if c == 0 {
                return;
            }
            c -= 1;
            if (budgets[c] as usize) + 1 < p.options(c) {
                budgets[c] += 1;
                break;
            }
            budgets[c] = 0;
        }
    }
}

fn search_exhaustive(p: &Problem) -> Result<Option<(Candidate, bool)>> {
    let n = p.cells.len();
    if enumeration_size(p, n) > ENUMERATION_LIMIT {
        return Err(Error::Unsupported(format!(
            "exhaustive design search over more than {ENUMERATION_LIMIT} combinations"
        )));
    }
    let mut tracker = Tracker::new();
    for_each_prefix(p, n, |b| tracker.offer(p, p.candidate(b)));
    Ok(tracker.finish())
}

fn search_monotone(p: &Problem) -> Result<Option<(Candidate, bool)>> {
    let n = p.cells.len();
    let last = n - 1;
    if enumeration_size(p, last) > ENUMERATION_LIMIT {
        return Err(Error::Unsupported(format!(
            "monotone design search over more than {ENUMERATION_LIMIT} prefixes"
        )));
    }
    let options = p.options(last);
    let mut tracker = Tracker::new();
    let mut budgets = vec![0u32; n];
    for_each_prefix(p, last, |prefix| {
        budgets[..last].copy_from_slice(prefix);
        // Mass and parameters both increase strictly with the last budget,
        // so the cheapest in-window choice is the first one reaching `lo`.
        let (mut a, mut b) = (0usize, options);
        while a < b {
            let mid = (a + b) / 2;
            budgets[last] = mid as u32;
            if p.mass_of(p.candidate(&budgets).num) < p.lo {
                a = mid + 1;
            } else {
                b = mid;
            }
        }
        for t in [a.checked_sub(1), (a < options).then_some(a)].into_iter().flatten() {
            budgets[last] = t as u32;
            tracker.offer(p, p.candidate(&budgets));
        }
    });
    Ok(tracker.finish())
}

fn search_greedy(p: &Problem) -> Option<(Candidate, bool)> {
    let n = p.cells.len();
    // Mass per unit of S is coef / den, parameters per unit is w.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        let lhs = p.coef[x] * u128::from(p.cells[y].width);
        let rhs = p.coef[y] * u128::from(p.cells[x].width);
        rhs.cmp(&lhs).then(x.cmp(&y))
    });
    let mut budgets = vec![0u32; n];
    for &c in &order {
        let sat = p.options(c) - 1;
        budgets[c] = sat as u32;
        if p.mass_of(p.candidate(&budgets).num) < p.lo {
            continue;
        }
        let (mut a, mut b) = (0usize, sat);
        while a < b {
            let mid = (a + b) / 2;
            budgets[c] = mid as u32;
            if p.mass_of(p.candidate(&budgets).num) < p.lo {
                a = mid + 1;
            } else {
                b = mid;
            }
        }
        budgets[c] = a as u32;
        break;
    }
    // Local refinement: every combination within +-2 of the greedy point.
    let mut tracker = Tracker::new();
    let ranges: Vec<(u32, u32)> = budgets
        .iter()
        .enumerate()
        .map(|(c, &t)| (t.saturating_sub(2), (t + 2).min(p.options(c) as u32 - 1)))
        .collect();
    let mut cur: Vec<u32> = ranges.iter().map(|r| r.0).collect();
    loop {
        tracker.offer(p, p.candidate(&cur));
        let mut c = n;
        loop {
            if c == 0 {
                return tracker.finish();
            }
            c -= 1;
            if cur[c] < ranges[c].1 {
                cur[c] += 1;
                break;
            }
            cur[c] = ranges[c].0;
        }
    }
}

fn solve(p: &Problem, strategy: SearchStrategy, io: (Activation, u32, u32)) -> Result<DesignResult> {
    let found = match strategy {
        SearchStrategy::Exhaustive => search_exhaustive(p)?,
        SearchStrategy::Monotone => search_monotone(p)?,
        SearchStrategy::Greedy => search_greedy(p),
        SearchStrategy::Auto => {
            if enumeration_size(p, p.cells.len() - 1) <= ENUMERATION_LIMIT {
                search_monotone(p)?
            } else {
                search_greedy(p)
            }
        }
    };
    let (cand, within) = found.ok_or(Error::Numeric("design search found no candidate"))?;
    let spec = ArchitectureSpec::new(
        p.cells
            .iter()
            .zip(&cand.budgets)
            .map(|(c, &t)| CellSpec::new(c.depth, c.width, t))
            .collect(),
        io.0,
        io.1,
        io.2,
    )?;
    let achieved = topology::nn_mass(&spec)?;
    let gap = if p.target > 0.0 {
        (achieved - p.target).abs() / p.target
    } else {
        (achieved - p.target).abs()
    };
    Ok(DesignResult {
        budgets: cand.budgets,
        achieved_mass: achieved,
        param_count: cand.params,
        gap,
        within_tolerance: within,
        spec,
    })
}

fn check_tolerance(tol: f64) -> Result<()> {
    if tol.is_finite() && tol >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("tolerance must be finite and >= 0, got {tol}")))
    }
}

/// Budgets whose mass lies within `target * (1 +- tolerance)` and whose
/// parameter count is smallest; ties go to the lexicographically smallest
/// budget vector. When nothing fits the window (or `max_params`), the
/// nearest reachable mass is returned with `within_tolerance = false`.
pub fn design_for_mass(query: &DesignQuery) -> Result<DesignResult> {
    design_with(query, SearchStrategy::Auto)
}

pub fn design_with(query: &DesignQuery, strategy: SearchStrategy) -> Result<DesignResult> {
    check_tolerance(query.tolerance)?;
    let (min, max) = mass_range(&query.cells)?;
    let target = query.target_mass;
    if !target.is_finite() || target < min || target > max {
        return Err(Error::Infeasible { target, min, max });
    }
    let lo = target * (1.0 - query.tolerance);
    let hi = target * (1.0 + query.tolerance);
    let p = Problem::new(
        &query.cells,
        target,
        lo,
        hi,
        query.max_params,
        (query.input_dim, query.output_dim),
    )?;
    solve(&p, strategy, (query.activation, query.input_dim, query.output_dim))
}

/// Designs budgets for `cells` whose mass is at least the reference's and at
/// most `(1 + tolerance)` times it, with the fewest parameters. Activation
/// and input/output sizes are taken from the reference.
pub fn compress(reference: &ArchitectureSpec, cells: &[CellGeometry], tolerance: f64) -> Result<Compression> {
    compress_with(reference, cells, tolerance, SearchStrategy::Auto)
}

pub fn compress_with(
    reference: &ArchitectureSpec,
    cells: &[CellGeometry],
    tolerance: f64,
    strategy: SearchStrategy,
) -> Result<Compression> {
    check_tolerance(tolerance)?;
    let reference_mass = topology::nn_mass(reference)?;
    let reference_params = param_count(reference);
    let io = (reference.input_dim, reference.output_dim);
    let p = Problem::new(
        cells,
        reference_mass,
        reference_mass,
        reference_mass * (1.0 + tolerance),
        None,
        io,
    )?;
    let result = solve(&p, strategy, (reference.activation, io.0, io.1))?;
    Ok(Compression {
        reduction_ratio: reference_params as f64 / result.param_count as f64,
        reference_mass,
        reference_params,
        result,
    })
}
