use proptest::prelude::*;

use magtraj::fokker_planck::stationary::{recursion_residual, stationary_distribution};
use magtraj::spin::{build_collective_ops, coherent_state_x, jz_eigenstate, max_entropy_state};
use magtraj::trajectory::qubit::{circular_distance, wrap_angle};
use magtraj::trajectory::{sme_step_kraus, MeasurementRecord, run_trajectory, Drive, TrajectoryOptions};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kraus_keeps_a_valid_state(
        n in 1usize..6,
        b in -3.0f64..3.0,
        start in 0usize..3,
        dys in prop::collection::vec(-0.3f64..0.3, 1..40),
    ) {
        let ops = build_collective_ops(n).unwrap();
        let mut rho = match start {
            0 => coherent_state_x(&ops),
            1 => max_entropy_state(&ops),
            _ => jz_eigenstate(&ops, n / 2).unwrap(),
        };
        for dy in dys {
            rho = sme_step_kraus(&rho, &ops, b, 0.01, dy).unwrap();
            prop_assert!(rho.validate().is_ok());
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
            prop_assert!(rho.purity() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn replaying_any_record_stays_physical(
        b in 0.0f64..2.0,
        dys in prop::collection::vec(-0.5f64..0.5, 1..200),
    ) {
        let ops = build_collective_ops(1).unwrap();
        let record = MeasurementRecord { dt: 0.01, increments: dys, b_true: None, seed: None };
        let traj = run_trajectory(&max_entropy_state(&ops), &ops, b, Drive::Record(&record), TrajectoryOptions::default()).unwrap();
        for rho in &traj.states {
            prop_assert!(rho.min_eigenvalue() > -1e-10);
        }
    }

    #[test]
    fn circular_distance_is_a_metric_on_the_circle(a in -10.0f64..10.0, c in -10.0f64..10.0) {
        let d = circular_distance(a, c);
        prop_assert!((0.0..=std::f64::consts::PI + 1e-12).contains(&d));
        prop_assert!((d - circular_distance(c, a)).abs() < 1e-12);
        prop_assert!(circular_distance(a, wrap_angle(a)) < 1e-9);
    }

    #[test]
    fn stationary_recursion_holds(b in 0.4f64..3.0) {
        let dist = stationary_distribution(b, 500, 100).unwrap();
        prop_assert!(recursion_residual(&dist) < 1e-9);
        prop_assert!(dist.min_on_grid(512) > 0.0);
    }
}
