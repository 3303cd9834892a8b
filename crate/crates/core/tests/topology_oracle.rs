use nnmass_core::topology::{
    self, avg_degree, cell_density, count_links_oracle, layer_longrange_links, nn_density, nn_mass,
    realize_topology, total_possible_links,
};
use nnmass_core::{Activation, ArchitectureSpec, CellSpec};
use proptest::prelude::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn cell_strategy() -> impl Strategy<Value = CellSpec> {
    (3u32..14, 1u32..9, 0u32..120).prop_map(|(d, w, t)| CellSpec::new(d, w, t))
}

fn spec_strategy() -> impl Strategy<Value = ArchitectureSpec> {
    prop::collection::vec(cell_strategy(), 1..4)
        .prop_map(|cells| ArchitectureSpec::new(cells, Activation::Relu, 3, 2).unwrap())
}

// Possible links counted pair by pair: every unit of layer j feeding every
// unit of layer i for j <= i - 2.
fn possible_links_by_pairs(c: &CellSpec) -> u64 {
    let mut n = 0u64;
    for i in 0..c.depth {
        for j in 0..c.depth {
            if j + 2 <= i {
                n += u64::from(c.width) * u64::from(c.width);
            }
        }
    }
    n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_forms_match_link_enumeration(spec in spec_strategy(), seed in any::<u64>()) {
        let real = realize_topology(&spec, seed).unwrap();
        let counts = count_links_oracle(&real);
        let mut mass_from_links = 0.0;
        let mut density_from_links = 0.0;
        for (c, (cell, cnt)) in spec.cells.iter().zip(&counts.per_cell).enumerate() {
            let closed: u64 = (2..cell.depth).map(|i| layer_longrange_links(cell, i).unwrap()).sum();
            prop_assert_eq!(closed, cnt.total, "cell {}", c);
            let possible = possible_links_by_pairs(cell);
            prop_assert_eq!(total_possible_links(cell).unwrap(), possible);
            let rho = cnt.total as f64 / possible as f64;
            prop_assert!(rel_close(cell_density(cell).unwrap(), rho, 1e-12));
            density_from_links += rho;
            mass_from_links += f64::from(cell.width) * f64::from(cell.depth) * rho;
        }
        let k = spec.cells.len() as f64;
        prop_assert!(rel_close(nn_density(&spec).unwrap(), density_from_links / k, 1e-12));
        let m = nn_mass(&spec).unwrap();
        if m == 0.0 {
            prop_assert_eq!(mass_from_links, 0.0);
        } else {
            prop_assert!(rel_close(m, mass_from_links, 1e-12));
        }
    }

    #[test]
    fn realization_in_degree_and_reach(spec in spec_strategy(), seed in any::<u64>()) {
        let real = realize_topology(&spec, seed).unwrap();
        for (c, cell) in spec.cells.iter().enumerate() {
            for i in 0..cell.depth as usize {
                let src = real.sources(c, i);
                prop_assert_eq!(src.len() as u64, cell.sources_at(i as u32));
                prop_assert!(src.windows(2).all(|p| p[0] < p[1]));
                for s in src {
                    prop_assert!((s.layer as usize) + 2 <= i);
                    prop_assert!(s.unit < cell.width);
                }
            }
        }
    }

    #[test]
    fn mass_is_monotone_and_saturates(cell in cell_strategy()) {
        let next = CellSpec::new(cell.depth, cell.width, cell.shortcut_budget + 1);
        let sat = cell.saturation_budget();
        let (a, b) = (topology::cell_mass(&cell).unwrap(), topology::cell_mass(&next).unwrap());
        if cell.shortcut_budget < sat {
            prop_assert!(b > a);
        } else {
            prop_assert_eq!(a, b);
            prop_assert!(rel_close(cell_density(&cell).unwrap(), 1.0, 1e-12));
            prop_assert!(rel_close(a, f64::from(cell.width) * f64::from(cell.depth), 1e-12));
        }
    }

    #[test]
    fn long_range_degree_matches_counted_links(cell in cell_strategy(), seed in any::<u64>()) {
        let spec = ArchitectureSpec::single_cell(cell, Activation::Linear, 1, 1).unwrap();
        let links = count_links_oracle(&realize_topology(&spec, seed).unwrap()).total;
        let per_node = links as f64 / (f64::from(cell.width) * f64::from(cell.depth));
        let deg = avg_degree(&spec).unwrap();
        if per_node == 0.0 {
            prop_assert_eq!(deg.exact_longrange, 0.0);
        } else {
            prop_assert!(rel_close(deg.exact_longrange, per_node, 1e-12));
        }
        prop_assert!(rel_close(deg.estimate, f64::from(cell.width) + nn_mass(&spec).unwrap() / 2.0, 1e-12));
    }
}

#[test]
fn three_cell_example_mass_is_exactly_28() {
    let spec = ArchitectureSpec::new(
        vec![CellSpec::new(4, 2, 3), CellSpec::new(4, 3, 4), CellSpec::new(4, 4, 5)],
        Activation::Relu,
        3,
        10,
    )
    .unwrap();
    assert_eq!(nn_mass(&spec).unwrap(), 28.0);
    let report = topology::mass_report(&spec).unwrap();
    assert_eq!(report.nn_mass, 28.0);
    assert!((report.nn_density - 85.0 / 108.0).abs() < 1e-15);
}

#[test]
fn same_seed_same_wiring() {
    let spec = ArchitectureSpec::single_cell(CellSpec::new(12, 5, 9), Activation::Relu, 2, 2).unwrap();
    assert_eq!(realize_topology(&spec, 9).unwrap(), realize_topology(&spec, 9).unwrap());
    assert_ne!(realize_topology(&spec, 9).unwrap(), realize_topology(&spec, 10).unwrap());
}
