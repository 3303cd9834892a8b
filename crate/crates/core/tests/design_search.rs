use nnmass_core::analysis::param_count;
use nnmass_core::design::{compress, design_for_mass, design_with, mass_range, CellGeometry, DesignQuery, SearchStrategy};
use nnmass_core::topology::nn_mass;
use nnmass_core::{instrument, rng, Activation, ArchitectureSpec, CellSpec};
use rand::Rng;

fn random_geometry(r: &mut impl Rng) -> Vec<CellGeometry> {
    let n = r.random_range(1..=3);
    (0..n)
        .map(|_| CellGeometry::new(r.random_range(3..=7), r.random_range(1..=4)))
        .collect()
}

// Exhaustive and monotone search share the objective, so they must agree;
// every witness must reproduce its reported mass and size. Kept in one
// test so the instrumentation counters are not shared with other tests.
#[test]
fn strategies_agree_and_witnesses_check_out_without_training() {
    let before = instrument::snapshot();
    let mut r = rng::rng_from_seed(2024);
    for _ in 0..100 {
        let cells = random_geometry(&mut r);
        let (lo, hi) = mass_range(&cells).unwrap();
        let target = r.random_range(lo..hi);
        let mut q = DesignQuery::new(target, cells, r.random_range(0.0..0.1));
        q.input_dim = 2;
        q.output_dim = 2;
        let ex = design_with(&q, SearchStrategy::Exhaustive).unwrap();
        let mono = design_with(&q, SearchStrategy::Monotone).unwrap();
        assert_eq!(ex, mono, "{q:?}");
        assert_eq!(nn_mass(&mono.spec).unwrap(), mono.achieved_mass);
        assert_eq!(param_count(&mono.spec), mono.param_count);
        let greedy = design_with(&q, SearchStrategy::Greedy).unwrap();
        if greedy.within_tolerance {
            assert!(ex.within_tolerance && greedy.param_count >= ex.param_count);
        }
    }
    let used = instrument::snapshot().since(&before);
    assert_eq!(used.trainings, 0);
    assert_eq!(used.realizations, 0);
    assert_eq!(used.model_builds, 0);
}

#[test]
fn exact_witness_for_28() {
    let cells = vec![CellGeometry::new(4, 2), CellGeometry::new(4, 3), CellGeometry::new(4, 4)];
    let r = design_for_mass(&DesignQuery::new(28.0, cells, 0.0)).unwrap();
    assert_eq!(r.achieved_mass, 28.0);
    assert_eq!(r.budgets, vec![4, 6, 3]);
    // The published budgets (3, 4, 5) hit the same mass with more parameters.
    let published = ArchitectureSpec::new(
        vec![CellSpec::new(4, 2, 3), CellSpec::new(4, 3, 4), CellSpec::new(4, 4, 5)],
        Activation::Relu,
        3,
        10,
    )
    .unwrap();
    assert_eq!(nn_mass(&published).unwrap(), 28.0);
    assert!(param_count(&published) > r.param_count);
}

#[test]
fn compressing_deep_network_cuts_parameters() {
    let widths = [32, 64, 128];
    let reference = ArchitectureSpec::new(
        widths.iter().zip([110, 215, 300]).map(|(&w, t)| CellSpec::new(20, w, t)).collect(),
        Activation::Relu,
        3,
        10,
    )
    .unwrap();
    let target: Vec<CellGeometry> = widths.iter().map(|&w| CellGeometry::new(12, w)).collect();
    let c = compress(&reference, &target, 0.05).unwrap();
    assert!(c.result.within_tolerance);
    assert!(c.result.achieved_mass >= c.reference_mass);
    assert!(c.reduction_ratio >= 1.5, "{}", c.reduction_ratio);
}
