//! Wiener realizations and measurement records.
//!
//! Realizations are drawn from ChaCha8 seeded with `seed_from_u64`, so a
//! `(seed, dt, steps)` triple regenerates the identical sequence on every
//! platform. Ensembles derive one stream per trajectory with
//! [`stream_rng`] rather than sharing a generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Independent generator for trajectory `index` of an ensemble seeded by `master_seed`.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// One draw of dW ~ N(0, dt).
pub fn wiener_increment<R: rand::Rng + ?Sized>(rng: &mut R, dt: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * dt.sqrt()
}

/// Sampled path of Wiener increments dW_1..dW_K.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerRealization {
    pub dt: f64,
    pub increments: Vec<f64>,
    pub seed: Option<u64>,
}

impl WienerRealization {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// T = K·dt.
    pub fn duration(&self) -> f64 {
        self.increments.len() as f64 * self.dt
    }

    /// Sums consecutive pairs, giving the same Brownian path at step 2·dt.
    pub fn coarsen(&self) -> WienerRealization {
        WienerRealization {
            dt: 2.0 * self.dt,
            increments: self.increments.chunks_exact(2).map(|c| c[0] + c[1]).collect(),
            seed: self.seed,
        }
    }
}

/// Observed increments dY_1..dY_K.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub dt: f64,
    pub increments: Vec<f64>,
    /// Field used to generate the record; absent for externally supplied data.
    pub b_true: Option<f64>,
    /// Seed of the realization behind the record, if known.
    pub seed: Option<u64>,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.increments.len() as f64 * self.dt
    }
}

pub(crate) fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// I.i.d. N(0, dt) increments, deterministic in `seed`.
pub fn generate_wiener(dt: f64, steps: usize, seed: u64) -> Result<WienerRealization> {
    check_dt(dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let increments = (0..steps).map(|_| wiener_increment(&mut rng, dt)).collect();
    Ok(WienerRealization {
        dt,
        increments,
        seed: Some(seed),
    })
}
