use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use stresscontrol::dynamics::{step, ModelParams, Plant, Scheme};
use stresscontrol::linalg::{spectral_abscissa, sym_eigenvalues};
use stresscontrol::spatial::{adjoint, build_grid, build_io_operators, BumpChannel, GridSpec, IoLayout, IoMode, SensorChannel};
use stresscontrol::synthesis::{minimal_gamma, solve_h_infinity_riccati, LinearSystem};
use stresscontrol::verify::closed_loop_hinf_norm;

fn matrix(rows: usize, cols: usize, range: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-range..range, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

/// Random 3-state plant with full sensing, so detectability always holds.
fn system() -> impl Strategy<Value = LinearSystem> {
    (matrix(3, 3, 1.5), matrix(3, 2, 1.0), matrix(3, 2, 1.0)).prop_filter_map("stabilizable", |(a, b1, b2)| {
        let sys = LinearSystem::euclidean(a, b1, b2, DMatrix::identity(3, 3), 1.0).ok()?;
        let g = minimal_gamma(&sys, 0.05, 1.0).ok()?;
        Some(sys.with_gamma(1.5 * g))
    })
}

fn are_residual(sys: &LinearSystem, p: &DMatrix<f64>) -> f64 {
    let g2 = sys.gamma * sys.gamma;
    let r = sys.drift.transpose() * p + p * &sys.drift + sys.c.transpose() * &sys.c
        + p * (&sys.b1 * sys.b1.transpose() / g2 - &sys.b2 * sys.b2.transpose()) * p;
    r.norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn riccati_solution_contract(sys in system()) {
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let p = &rs.p;
        prop_assert!(are_residual(&sys, p) <= 1e-8 * (1.0 + p.norm().powi(2)));
        prop_assert!((p - p.transpose()).norm() <= 1e-10 * p.norm());
        prop_assert!(spectral_abscissa(&rs.closed_loop_drift(&sys)).unwrap() < 0.0);
        prop_assert!(spectral_abscissa(&rs.saddle_drift(&sys)).unwrap() < 0.0);
        prop_assert!(sym_eigenvalues(p).min() >= -1e-8 * p.norm());
    }

    #[test]
    fn riccati_is_monotone_in_gamma(sys in system()) {
        let p1 = solve_h_infinity_riccati(&sys).unwrap().p;
        let p2 = solve_h_infinity_riccati(&sys.with_gamma(2.0 * sys.gamma)).unwrap().p;
        let diff = &p1 - &p2;
        let diff = (&diff + diff.transpose()) * 0.5;
        prop_assert!(sym_eigenvalues(&diff).min() >= -1e-8 * (1.0 + p1.norm()));
    }

    #[test]
    fn closed_loop_norm_is_below_gamma(sys in system()) {
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let g = closed_loop_hinf_norm(&sys, &rs).unwrap();
        prop_assert!(g.value < sys.gamma, "{} >= {}", g.value, sys.gamma);
    }

    #[test]
    fn io_operators_satisfy_weighted_adjointness(
        n in 5usize..30,
        dim in 1usize..3,
        centers in prop::collection::vec(0.15f64..0.85, 6),
        widths in prop::collection::vec(0.1f64..0.3, 3),
        seed in 0u64..1000,
    ) {
        let disc = build_grid(GridSpec::new(dim, 1.0, if dim == 2 { n.min(12) } else { n }).unwrap()).unwrap();
        let at = |k: usize| vec![centers[k]; dim];
        let layout = IoLayout {
            mode: IoMode::Bumps,
            disturbance_channels: vec![BumpChannel { center: at(0), width: widths[0], amplitude: 1.0 }],
            actuator_channels: vec![
                BumpChannel { center: at(1), width: widths[1], amplitude: 1.0 },
                BumpChannel { center: at(2), width: widths[2], amplitude: 0.5 },
            ],
            sensor_channels: vec![
                SensorChannel { center: at(3), width: 0.3, weight: 1.0 },
                SensorChannel { center: at(4), width: 0.25, weight: 2.0 },
            ],
        };
        let io = build_io_operators(&disc, &layout).unwrap();
        let ws = &disc.weights;
        let nn = disc.node_count();
        let field = |len: usize, k: u64| DVector::from_fn(len, |i, _| (((i as u64 + 1) * (seed + k + 3)) % 17) as f64 / 8.0 - 1.0);
        for (m, w_in, w_out) in [
            (&io.b1, &io.disturbance_weights, ws),
            (&io.b2, &io.control_weights, ws),
            (&io.c, ws, &io.output_weights),
        ] {
            let u = field(m.ncols(), 1);
            let v = field(m.nrows(), 2);
            let mv = adjoint(m, w_in, w_out);
            let lhs = w_out.inner(&(m * &u), &v).unwrap();
            let rhs = w_in.inner(&u, &(&mv * &v)).unwrap();
            let scale = w_in.norm(&u) * w_out.norm(&v) * (1.0 + m.norm());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
        }
        prop_assert_eq!(io.b1.nrows(), nn);
    }

    #[test]
    fn zero_and_saturation_are_equilibria(
        n in 3usize..20,
        diffusion in 0.01f64..1.0,
        growth in 0.1f64..2.0,
        saturation in 0.5f64..3.0,
    ) {
        let disc = build_grid(GridSpec::new(1, 1.0, n).unwrap()).unwrap();
        let io = build_io_operators(&disc, &IoLayout::identity()).unwrap();
        let plant = Plant::from_grid(&disc, ModelParams::new(diffusion, growth, saturation, 2.0).unwrap(), &io).unwrap();
        let u = DVector::zeros(plant.sys.b2.ncols());
        let w = DVector::zeros(plant.sys.b1.ncols());
        for scheme in [Scheme::ImexEuler, Scheme::Rk4Explicit] {
            let dt = 0.5 * plant.rk4_bound().min(1e-2);
            for level in [0.0, saturation] {
                let s = disc.constant(level);
                let next = step(&plant, &s, &u, &w, dt, scheme).unwrap();
                prop_assert!((next - &s).amax() <= 1e-13 * saturation.max(1.0));
            }
        }
    }
}
