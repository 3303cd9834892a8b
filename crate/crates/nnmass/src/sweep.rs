//! Multi-threaded sweep execution with rows delivered in job order.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use nnmass_core::analysis::{run_job, DatasetRef, SweepGrid, SweepRow};
use nnmass_core::datasets::{self, Dataset};
use nnmass_core::rng;

use crate::error::Result;
use crate::files;

pub const SWEEP_HEADER: [&str; 12] = [
    "depth",
    "width",
    "budget",
    "seed",
    "nn_mass",
    "nn_density",
    "param_count",
    "flop_count",
    "test_acc",
    "train_loss",
    "mean_init_sv",
    "diverged",
];

/// Train and test sets for a dataset reference. Synthetic data is drawn
/// from a stream of `seed`.
pub fn load_dataset(dataset: &DatasetRef, seed: u64) -> Result<(Dataset, Dataset)> {
    match dataset {
        DatasetRef::Synthetic {
            kind,
            n,
            n_train,
            n_test,
        } => Ok(datasets::synthetic_split(
            *kind,
            *n,
            *n_train,
            *n_test,
            rng::derive_seed(seed, &[u64::from(u32::MAX)]),
        )?),
        DatasetRef::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => Ok((
            files::load_idx(Path::new(train_images), Path::new(train_labels))?,
            files::load_idx(Path::new(test_images), Path::new(test_labels))?,
        )),
    }
}

/// Runs every job of the grid on up to `jobs` threads and hands rows to
/// `emit` in (config, repeat) order as soon as each prefix is complete.
/// Output does not depend on `jobs`.
pub fn run_parallel(
    grid: &SweepGrid,
    master_seed: u64,
    jobs: usize,
    train_set: &Dataset,
    test_set: &Dataset,
    mut emit: impl FnMut(&SweepRow) -> Result<()>,
) -> Result<usize> {
    grid.validate()?;
    let all = grid.jobs(master_seed);
    let workers = jobs.clamp(1, all.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, nnmass_core::Result<SweepRow>)>();

    std::thread::scope(|scope| -> Result<usize> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (all, next) = (&all, &next);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = all.get(k) else { break };
                if tx.send((k, run_job(grid, job, train_set, test_set))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut written = 0usize;
        for (k, row) in rx.iter() {
            pending.insert(k, row);
            while let Some(row) = pending.remove(&written) {
                let emitted = match row {
                    Ok(r) => emit(&r),
                    Err(e) => Err(e.into()),
                };
                if let Err(e) = emitted {
                    // Stop handing out work; running jobs finish on their own.
                    next.store(all.len(), Ordering::Relaxed);
                    return Err(e);
                }
                written += 1;
            }
        }
        Ok(written)
    })
}
