//! Purity, coherence-decay and Lyapunov diagnostics along trajectories.

use rayon::prelude::*;

use crate::spin::CollectiveOps;
use crate::trajectory::noise::{stream_rng, wiener_increment};
use crate::trajectory::qubit::{angular_step, bloch_step, BlochState};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuritySample {
    pub t: f64,
    /// 1 − tr[ρ²].
    pub mixedness: f64,
    /// 1 − |ρ⃗|², single qubit only.
    pub bloch_mixedness: Option<f64>,
    /// ρ_y, single qubit only.
    pub rho_y: Option<f64>,
}

pub fn purity_diagnostics(trajectory: &Trajectory, ops: &CollectiveOps) -> Vec<PuritySample> {
    let qubit = ops.n_qubits() == 1;
    trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .map(|(&t, rho)| {
            let (bloch_mixedness, rho_y) = if qubit {
                let s = BlochState::from_density(rho);
                (Some(s.mixedness()), Some(s.rho_y))
            } else {
                (None, None)
            };
            PuritySample {
                t,
                mixedness: 1.0 - rho.purity(),
                bloch_mixedness,
                rho_y,
            }
        })
        .collect()
}

/// Pathwise slack of ln ε_t ≤ ln ε_0 − t − Σ 2ρ_z dW along a Bloch path with ρ_y = 0.
///
/// `path` holds the state before every step (length K+1), `noise` the K
/// increments. Entries are `bound − ln ε_t`; the inequality holds where they
/// are nonnegative. Steps where ε has fallen below `floor` are skipped since
/// 1 − |ρ⃗|² no longer resolves ε there.
pub fn epsilon_bound_slack(path: &[BlochState], noise: &[f64], dt: f64, floor: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let Some(first) = path.first() else {
        return out;
    };
    let ln_eps0 = first.mixedness().ln();
    let mut stochastic = 0.0;
    for (n, (s, &dw)) in path.iter().zip(noise).enumerate() {
        stochastic += -2.0 * s.rho_z * dw;
        let t = (n + 1) as f64 * dt;
        let eps = path[n + 1].mixedness();
        if eps < floor {
            break;
        }
        out.push((t, ln_eps0 - t + stochastic - eps.ln()));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleMoment {
    pub t: f64,
    pub mean: f64,
    pub std_err: f64,
}

/// Ensemble mean of ρ_y at the requested sample steps, one independent
/// Wiener stream per member.
pub fn ensemble_rho_y(
    initial: BlochState,
    b: f64,
    dt: f64,
    sample_steps: &[usize],
    members: usize,
    master_seed: u64,
) -> Vec<EnsembleMoment> {
    let last = sample_steps.iter().copied().max().unwrap_or(0);
    let paths: Vec<Vec<f64>> = (0..members as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream_rng(master_seed, index);
            let mut s = initial;
            let mut samples = Vec::with_capacity(sample_steps.len());
            let mut next = 0;
            let mut order: Vec<usize> = sample_steps.to_vec();
            order.sort_unstable();
            for n in 0..=last {
                while next < order.len() && order[next] == n {
                    samples.push(s.rho_y);
                    next += 1;
                }
                if n < last {
                    s = bloch_step(s, b, dt, wiener_increment(&mut rng, dt));
                }
            }
            samples
        })
        .collect();

    let mut order: Vec<usize> = sample_steps.to_vec();
    order.sort_unstable();
    let n = members as f64;
    order
        .iter()
        .enumerate()
        .map(|(k, &step)| {
            let mean = paths.iter().map(|p| p[k]).sum::<f64>() / n;
            let var = paths.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            EnsembleMoment {
                t: step as f64 * dt,
                mean,
                std_err: (var / n).sqrt(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSample {
    pub theta: f64,
    /// V = |cos θ|.
    pub v: f64,
    /// −½|cos θ|·dt.
    pub predicted: f64,
    pub mean_dv: f64,
    pub std_err: f64,
}

/// Single-step ensemble estimate of 𝔼[dV] for V(θ) = |cos θ| under the B = 0
/// angular SDE.
pub fn lyapunov_check(thetas: &[f64], dt: f64, draws: usize, seed: u64) -> Vec<LyapunovSample> {
    thetas
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            let mut rng = stream_rng(seed, k as u64);
            let v = theta.cos().abs();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..draws {
                let next = angular_step(theta, 0.0, dt, wiener_increment(&mut rng, dt));
                let dv = next.cos().abs() - v;
                sum += dv;
                sum_sq += dv * dv;
            }
            let n = draws as f64;
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
            LyapunovSample {
                theta,
                v,
                predicted: -0.5 * v * dt,
                mean_dv: mean,
                std_err: (var / n).sqrt(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{build_collective_ops, coherent_state_x};
    use crate::trajectory::noise::generate_wiener;
    use crate::trajectory::{run_trajectory, Drive, TrajectoryOptions};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn pure_state_has_zero_mixedness() {
        let ops = build_collective_ops(4).unwrap();
        let w = generate_wiener(0.01, 10, 1).unwrap();
        let t = run_trajectory(&coherent_state_x(&ops), &ops, 1.0, Drive::Wiener(&w), TrajectoryOptions::default())
            .unwrap();
        let d = purity_diagnostics(&t, &ops);
        assert!(d[0].mixedness.abs() < 1e-12);
        assert!(d[0].bloch_mixedness.is_none());
    }

    #[test]
    fn qubit_diagnostics_relation() {
        let ops = build_collective_ops(1).unwrap();
        let w = generate_wiener(0.01, 300, 3).unwrap();
        let rho = BlochState::new(0.5, 0.2, -0.5).to_density();
        let t = run_trajectory(&rho, &ops, 1.0, Drive::Wiener(&w), TrajectoryOptions::default()).unwrap();
        for s in purity_diagnostics(&t, &ops) {
            // 1 − tr ρ² = ½(1 − |ρ⃗|²) for a qubit
            assert!((s.mixedness - 0.5 * s.bloch_mixedness.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn lyapunov_zero_at_half_pi() {
        let s = lyapunov_check(&[FRAC_PI_2], 1e-3, 100, 1);
        assert!(s[0].predicted.abs() < 1e-18);
        assert!(s[0].v < 1e-15);
        assert!(s[0].mean_dv.abs() < 1e-12);
    }

    #[test]
    fn epsilon_bound_holds_along_bloch_path() {
        // the Euler path misses the continuum bound by an O(dt) amount at most
        for seed in 0..5 {
            let mut worst = Vec::new();
            for dt in [1e-3, 1e-4] {
                let w = generate_wiener(dt, (20.0 / dt) as usize, seed).unwrap();
                let mut path = vec![BlochState::new(0.5, 0.0, -0.5)];
                for &dw in &w.increments {
                    path.push(bloch_step(*path.last().unwrap(), 1.0, dt, dw));
                }
                let slack = epsilon_bound_slack(&path, &w.increments, dt, 1e-10);
                assert!(!slack.is_empty());
                worst.push(slack.iter().map(|x| x.1).fold(f64::INFINITY, f64::min));
            }
            assert!(worst[1] > -1e-2, "seed {seed}: {worst:?}");
            assert!(worst[1] >= 0.0 || worst[1] > worst[0] / 3.0, "seed {seed}: {worst:?}");
        }
    }
}
