use std::fs;

use magtraj::estimation::{likelihood_trace, replay_loglik};
use magtraj::experiment::{run_experiment, Experiment, ExperimentConfig};
use magtraj::record_io::{self, RecordFile};
use magtraj::spin::{build_collective_ops, coherent_state_x, max_entropy_state};
use magtraj::trajectory::{generate_wiener, run_trajectory, Drive, Integrator, TrajectoryOptions};

fn small(experiment: Experiment, dir: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(experiment);
    c.output_path = dir.join(format!("{experiment}.csv"));
    match experiment {
        Experiment::Fig1Convergence | Experiment::Fig4Replay | Experiment::Fig6Online => c.total_time = 5.0,
        Experiment::Fig5Multiqubit => {
            c.n_qubits = 3;
            c.total_time = 2.0;
        }
        Experiment::Fig3Current => (c.grid_min, c.grid_max, c.grid_step) = (0.5, 1.0, 0.25),
        Experiment::Ergodicity => c.total_time = 100.0,
        Experiment::Lyapunov => c.draws = 1000,
        Experiment::KlMonotone => c.total_time = 1.0,
        Experiment::Fig2Stationary => {}
    }
    if experiment == Experiment::Fig6Online {
        (c.grid_min, c.grid_max, c.grid_step) = (0.0, 2.0, 0.5);
        c.stride = 10;
    }
    c
}

#[test]
fn every_experiment_writes_a_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let headers = [
        (Experiment::Fig1Convergence, "t,theta_0,theta_1,theta_2,theta_3,mixedness_0"),
        (Experiment::Fig2Stationary, "m,re,im"),
        (Experiment::Fig3Current, "B,J_sta,J_ratio,mean_theta"),
        (Experiment::Fig4Replay, "t,theta_ref,distance_1,distance_2,distance_3"),
        (Experiment::Fig5Multiqubit, "t,mixedness_coherent,mixedness_max_entropy,l1_distance"),
        (Experiment::Fig6Online, "t,B_est,loglik,loglik_grad,jx,jz,jx_true,jz_true"),
        (Experiment::Ergodicity, "theta,p_t1,p_t10,p_t100,expected"),
        (Experiment::Lyapunov, "theta,v,predicted,mean_dv,std_err,z"),
        (Experiment::KlMonotone, "t,kl,l2_distance"),
    ];
    for (experiment, header) in headers {
        let cfg = small(experiment, dir.path());
        let summary = run_experiment(&cfg).unwrap_or_else(|e| panic!("{experiment}: {e}"));
        assert!(!summary.checks.is_empty(), "{experiment}");
        for path in &summary.outputs {
            let text = fs::read_to_string(path).unwrap();
            let first = text.lines().next().unwrap();
            let width = first.split(',').count();
            assert!(text.lines().count() > 1, "{experiment}: no rows in {}", path.display());
            assert!(text.lines().all(|l| l.split(',').count() == width), "{experiment}: ragged rows");
        }
        let text = fs::read_to_string(&cfg.output_path).unwrap();
        assert!(text.starts_with(header), "{experiment}: {}", text.lines().next().unwrap());
    }
}

#[test]
fn online_scan_file_lists_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Experiment::Fig6Online, dir.path());
    let summary = run_experiment(&cfg).unwrap();
    let scan = fs::read_to_string(&summary.outputs[1]).unwrap();
    assert_eq!(scan.lines().next(), Some("B,loglik_T"));
    assert_eq!(scan.lines().count(), 1 + 5);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for experiment in [Experiment::Fig6Online, Experiment::Ergodicity, Experiment::Fig5Multiqubit] {
        let mut a = small(experiment, dir.path());
        a.output_path = dir.path().join("a.csv");
        let mut b = a.clone();
        b.output_path = dir.path().join("b.csv");
        run_experiment(&a).unwrap();
        run_experiment(&b).unwrap();
        assert_eq!(fs::read(&a.output_path).unwrap(), fs::read(&b.output_path).unwrap(), "{experiment}");
    }
}

#[test]
fn saved_record_reproduces_trajectory_and_likelihood() {
    let dir = tempfile::tempdir().unwrap();
    let ops = build_collective_ops(2).unwrap();
    let rho0 = coherent_state_x(&ops);
    let w = generate_wiener(0.01, 800, 21).unwrap();
    let opts = TrajectoryOptions { integrator: Integrator::Kraus, stride: 50 };
    let truth = run_trajectory(&rho0, &ops, 0.7, Drive::Wiener(&w), opts).unwrap();

    let path = dir.path().join("record.txt");
    record_io::save(&path, &RecordFile::from(&truth.record)).unwrap();
    let loaded = record_io::load(&path).unwrap();
    assert_eq!(loaded.generating_field().unwrap(), 0.7);
    let record = loaded.into_record().unwrap();
    assert_eq!(record, truth.record);

    let replay = run_trajectory(&rho0, &ops, 0.7, Drive::Record(&record), opts).unwrap();
    for (a, b) in replay.states.iter().zip(&truth.states) {
        assert!(a.l1_distance(b) < 1e-12);
    }
    let trace = likelihood_trace(&record, &ops, &rho0, 0.7, 50).unwrap();
    let direct = replay_loglik(&record, &ops, &rho0, 0.7, Integrator::Kraus).unwrap();
    assert!((trace.loglik.last().unwrap() - direct).abs() < 1e-9 * direct.abs().max(1.0));
}

#[test]
fn mixed_start_purifies_under_shared_record() {
    let ops = build_collective_ops(4).unwrap();
    let w = generate_wiener(1e-3, 10_000, 5).unwrap();
    let opts = TrajectoryOptions { integrator: Integrator::Kraus, stride: 10_000 };
    let truth = run_trajectory(&coherent_state_x(&ops), &ops, 2.0, Drive::Wiener(&w), opts).unwrap();
    let replay = run_trajectory(&max_entropy_state(&ops), &ops, 2.0, Drive::Record(&truth.record), opts).unwrap();
    let start = replay.states[0].purity();
    let end = replay.final_state().purity();
    assert!((start - 0.2).abs() < 1e-12);
    assert!(end > 0.99, "purity {end}");
    assert!(replay.final_state().l1_distance(truth.final_state()) < 0.1);
}
