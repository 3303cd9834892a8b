//! Process-wide counters of expensive operations.
//!
//! The design search promises to work from closed forms only; these
//! counters let callers check that promise. Counts are global, so compare
//! snapshots taken on a single thread with nothing else running.

use core::sync::atomic::{AtomicU64, Ordering};

static REALIZATIONS: AtomicU64 = AtomicU64::new(0);
static MODEL_BUILDS: AtomicU64 = AtomicU64::new(0);
static TRAININGS: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    /// Topology realizations sampled.
    pub realizations: u64,
    /// Models whose weights were allocated.
    pub model_builds: u64,
    /// Training runs started.
    pub trainings: u64,
}

impl Counters {
    pub fn since(&self, earlier: &Counters) -> Counters {
        Counters {
            realizations: self.realizations - earlier.realizations,
            model_builds: self.model_builds - earlier.model_builds,
            trainings: self.trainings - earlier.trainings,
        }
    }
}

pub fn snapshot() -> Counters {
    Counters {
        realizations: REALIZATIONS.load(Ordering::Relaxed),
        model_builds: MODEL_BUILDS.load(Ordering::Relaxed),
        trainings: TRAININGS.load(Ordering::Relaxed),
    }
}

pub(crate) fn record_realization() {
    REALIZATIONS.fetch_add(1, Ordering::Relaxed);
}

pub(crate) fn record_model_build() {
    MODEL_BUILDS.fetch_add(1, Ordering::Relaxed);
}

pub(crate) fn record_training() {
    TRAININGS.fetch_add(1, Ordering::Relaxed);
}
