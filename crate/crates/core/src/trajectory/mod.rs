//! Quantum trajectories of the continuously measured collective spin.

pub mod diagnostics;
pub mod noise;
pub mod qubit;
pub mod step;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spin::{CollectiveOps, DensityMatrix};

pub use noise::{generate_wiener, stream_rng, MeasurementRecord, WienerRealization};
pub use step::{emit_measurement, innovation, sme_step_euler, sme_step_kraus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Euler–Maruyama on the matrix SME; cross-validation only.
    Euler,
    #[default]
    Kraus,
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euler" => Ok(Integrator::Euler),
            "kraus" => Ok(Integrator::Kraus),
            other => Err(Error::InvalidArgument(format!("unknown integrator '{other}'"))),
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Euler => "euler",
            Integrator::Kraus => "kraus",
        })
    }
}

/// What drives a trajectory: fresh noise, or a stored record to replay.
#[derive(Debug, Clone, Copy)]
pub enum Drive<'a> {
    Wiener(&'a WienerRealization),
    Record(&'a MeasurementRecord),
}

impl Drive<'_> {
    pub fn dt(&self) -> f64 {
        match self {
            Drive::Wiener(w) => w.dt,
            Drive::Record(r) => r.dt,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Drive::Wiener(w) => w.len(),
            Drive::Record(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryOptions {
    pub integrator: Integrator,
    /// Keep every `stride`-th state (the initial and final states are always kept).
    pub stride: usize,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::Kraus,
            stride: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    /// Sample times, aligned with `states`.
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// dY emitted (noise-driven) or consumed (replay).
    pub record: MeasurementRecord,
    /// Effective dW used at each step.
    pub noise: Vec<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }
}

/// Integrates the SME from `initial`.
///
/// With a Wiener drive the record dY = 2tr[ρĴ_z]dt + dW is emitted; with a
/// record drive the trajectory uses its own innovation dW = dY − 2tr[ρĴ_z]dt.
pub fn run_trajectory(
    initial: &DensityMatrix,
    ops: &CollectiveOps,
    b: f64,
    drive: Drive<'_>,
    options: TrajectoryOptions,
) -> Result<Trajectory> {
    if initial.dim() != ops.dim() {
        return Err(Error::InvalidArgument(format!(
            "state dimension {} does not match operators of dimension {}",
            initial.dim(),
            ops.dim()
        )));
    }
    let dt = drive.dt();
    noise::check_dt(dt)?;
    let stride = options.stride.max(1);
    let k = drive.len();

    let mut rho = initial.clone();
    let mut times = vec![0.0];
    let mut states = vec![rho.clone()];
    let mut dys = Vec::with_capacity(k);
    let mut dws = Vec::with_capacity(k);

    for n in 0..k {
        let (dy, dw) = match drive {
            Drive::Wiener(w) => {
                let dw = w.increments[n];
                (step::emit_measurement(&rho, ops, dt, dw), dw)
            }
            Drive::Record(r) => {
                let dy = r.increments[n];
                (dy, step::innovation(&rho, ops, dt, dy))
            }
        };
        rho = match options.integrator {
            Integrator::Euler => step::sme_step_euler(&rho, ops, b, dt, dw),
            Integrator::Kraus => {
                step::sme_step_kraus(&rho, ops, b, dt, dy).map_err(|e| Error::at_step(n, e))?
            }
        };
        dys.push(dy);
        dws.push(dw);
        if (n + 1) % stride == 0 || n + 1 == k {
            times.push((n + 1) as f64 * dt);
            states.push(rho.clone());
        }
    }

    let (b_true, seed) = match drive {
        Drive::Wiener(w) => (Some(b), w.seed),
        Drive::Record(r) => (r.b_true, r.seed),
    };
    Ok(Trajectory {
        dt,
        times,
        states,
        record: MeasurementRecord {
            dt,
            increments: dys,
            b_true,
            seed,
        },
        noise: dws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{build_collective_ops, coherent_state_x, max_entropy_state};
    use qubit::BlochState;

    #[test]
    fn empty_drive_returns_initial() {
        let ops = build_collective_ops(1).unwrap();
        let rho = coherent_state_x(&ops);
        let w = generate_wiener(0.01, 0, 1).unwrap();
        let t = run_trajectory(&rho, &ops, 1.0, Drive::Wiener(&w), TrajectoryOptions::default()).unwrap();
        assert_eq!(t.states.len(), 1);
        assert_eq!(t.times, vec![0.0]);
        assert!(t.record.is_empty());
    }

    #[test]
    fn replaying_own_record_reproduces_trajectory() {
        let ops = build_collective_ops(3).unwrap();
        let rho = max_entropy_state(&ops);
        let w = generate_wiener(0.01, 2000, 11).unwrap();
        let opts = TrajectoryOptions { integrator: Integrator::Kraus, stride: 50 };
        let first = run_trajectory(&rho, &ops, 0.7, Drive::Wiener(&w), opts).unwrap();
        let again = run_trajectory(&rho, &ops, 0.7, Drive::Record(&first.record), opts).unwrap();
        for (a, b) in first.states.iter().zip(&again.states) {
            assert!(a.l1_distance(b) < 1e-9);
        }
        for (a, b) in first.noise.iter().zip(&again.noise) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stride_and_final_sample() {
        let ops = build_collective_ops(1).unwrap();
        let rho = BlochState::new(0.5, 0.0, -0.5).to_density();
        let w = generate_wiener(0.01, 250, 2).unwrap();
        let t = run_trajectory(&rho, &ops, 1.0, Drive::Wiener(&w), TrajectoryOptions::default()).unwrap();
        assert_eq!(t.states.len(), 4);
        assert!((t.final_time() - 2.5).abs() < 1e-12);
        assert_eq!(t.record.len(), 250);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let ops = build_collective_ops(2).unwrap();
        let rho = BlochState::new(0.0, 0.0, 0.0).to_density();
        let w = generate_wiener(0.01, 5, 2).unwrap();
        assert!(run_trajectory(&rho, &ops, 1.0, Drive::Wiener(&w), TrajectoryOptions::default()).is_err());
    }

    #[test]
    fn failing_step_reports_index() {
        let ops = build_collective_ops(1).unwrap();
        let up = crate::spin::jz_eigenstate(&ops, 1).unwrap();
        let record = MeasurementRecord {
            dt: 1e-300,
            increments: vec![0.0, 0.0, -2.0],
            b_true: None,
            seed: None,
        };
        let err = run_trajectory(
            &up,
            &ops,
            0.0,
            Drive::Record(&record),
            TrajectoryOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::StepFailed { step, .. } => assert_eq!(step, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn integrator_parsing() {
        assert_eq!("Euler".parse::<Integrator>().unwrap(), Integrator::Euler);
        assert_eq!("kraus".parse::<Integrator>().unwrap(), Integrator::Kraus);
        assert!("rk4".parse::<Integrator>().is_err());
        assert_eq!(Integrator::default().to_string(), "kraus");
    }
}
