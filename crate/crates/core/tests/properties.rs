use proptest::prelude::*;
use signflow::cones::{negative_part, positive_part, project, surrogate_distance, Sign};
use signflow::energy::{EnergyModel, Nonlinearity};
use signflow::flow::{cutoff_g, descent_step, CutoffSpec, FlowParams};
use signflow::grid::{norm_h, Field, Grid};
use signflow::minimax::Path;
use signflow::sampling::{random_field, random_smooth_field, substream};

fn grid_strategy() -> impl Strategy<Value = Grid> {
    prop_oneof![
        (3usize..40).prop_map(|n| Grid::line(n).unwrap()),
        (3usize..14).prop_map(|n| Grid::square(n).unwrap()),
    ]
}

fn model(grid: Grid, p: f64) -> EnergyModel {
    EnergyModel::new(grid, Nonlinearity::odd_power(p).unwrap())
}

fn field(grid: Grid, seed: u64, smooth: bool, amplitude: f64) -> Field {
    let mut rng = substream(seed, 0);
    let u = if smooth {
        random_smooth_field(grid, &mut rng)
    } else {
        random_field(grid, &mut rng)
    };
    u.scaled(amplitude)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn descent_identity_holds(
        grid in grid_strategy(),
        p in 2.5f64..6.0,
        seed in any::<u64>(),
        smooth in any::<bool>(),
        amplitude in 0.1f64..5.0,
    ) {
        let m = model(grid, p);
        let u = field(grid, seed, smooth, amplitude);
        let (lhs, rhs) = m.lemma_a_identity(&u).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs));
    }

    #[test]
    fn energy_is_even_and_a_is_odd(
        grid in grid_strategy(),
        seed in any::<u64>(),
        amplitude in 0.1f64..5.0,
    ) {
        let m = model(grid, 4.0);
        let u = field(grid, seed, true, amplitude);
        let neg = u.scaled(-1.0);
        prop_assert_eq!(m.energy(&u).unwrap(), m.energy(&neg).unwrap());
        prop_assert_eq!(m.operator_a(&neg).unwrap(), m.operator_a(&u).unwrap().scaled(-1.0));
    }

    #[test]
    fn parts_split_and_project(grid in grid_strategy(), seed in any::<u64>()) {
        let u = field(grid, seed, false, 1.0);
        let (plus, minus) = (positive_part(&u), negative_part(&u));
        prop_assert_eq!(plus.add(&minus), u.clone());
        prop_assert!(plus.min() >= 0.0 && minus.max() <= 0.0);
        for sign in [Sign::Plus, Sign::Minus] {
            let w = project(&u, sign);
            prop_assert_eq!(project(&w, sign), w.clone());
            prop_assert_eq!(surrogate_distance(&w, sign), 0.0);
        }
    }

    #[test]
    fn solution_operator_preserves_cones(
        grid in grid_strategy(),
        seed in any::<u64>(),
        amplitude in 0.1f64..5.0,
    ) {
        let m = model(grid, 4.0);
        let u = positive_part(&field(grid, seed, false, amplitude));
        prop_assert!(m.operator_a(&u).unwrap().min() >= 0.0);
        prop_assert!(m.operator_a(&u.scaled(-1.0)).unwrap().max() <= 0.0);
    }

    #[test]
    fn descent_step_never_raises_energy(
        grid in grid_strategy(),
        seed in any::<u64>(),
        amplitude in 0.1f64..3.0,
    ) {
        let m = model(grid, 4.0);
        let u = field(grid, seed, true, amplitude);
        let out = descent_step(&m, &u, &FlowParams::default()).unwrap();
        let slack = 4.0 * f64::EPSILON * out.energy_before.abs();
        prop_assert!(out.energy <= out.energy_before + slack);
    }

    #[test]
    fn cutoff_stays_in_unit_interval(
        seed in any::<u64>(),
        c in 0.1f64..10.0,
        amplitude in 0.1f64..10.0,
    ) {
        let grid = Grid::line(31).unwrap();
        let m = model(grid, 4.0);
        let cs = CutoffSpec::new(c, 0.1 * c, 0.2 * c, 1.0).unwrap();
        let g = cutoff_g(&m, &field(grid, seed, true, amplitude), &cs).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn reparametrization_keeps_endpoints(seed in any::<u64>(), k in 17usize..40) {
        let grid = Grid::line(15).unwrap();
        let mut rng = substream(seed, 0);
        let nodes: Vec<Field> = (0..k).map(|_| random_smooth_field(grid, &mut rng)).collect();
        let mut path = Path { sign: Sign::Plus, radius: 1.0, nodes: nodes.clone() };
        path.reparametrize();
        prop_assert_eq!(&path.nodes[0], &nodes[0]);
        prop_assert_eq!(&path.nodes[k - 1], &nodes[k - 1]);
        let total: f64 = nodes.windows(2).map(|w| norm_h(&w[1].sub(&w[0]))).sum();
        let after: f64 = path.nodes.windows(2).map(|w| norm_h(&w[1].sub(&w[0]))).sum();
        prop_assert!(after <= total * (1.0 + 1e-12));
    }
}
