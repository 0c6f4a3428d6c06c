//! Time-average occupancy of a single angular trajectory against the
//! stationary density.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::stationary::stationary_distribution_converged;
use crate::error::{Error, Result};
use crate::trajectory::noise::{check_dt, wiener_increment};
use crate::trajectory::qubit::{angular_step, wrap_angle};

pub const DEFAULT_BINS: usize = 63;

/// Index of the bin (−π + kw, −π + (k+1)w] containing θ.
pub fn bin_index(theta: f64, bins: usize) -> usize {
    let w = 2.0 * PI / bins as f64;
    let k = ((wrap_angle(theta) + PI) / w).ceil() as isize - 1;
    k.clamp(0, bins as isize - 1) as usize
}

/// Stationary mass per bin; for B = 0 half the mass sits in each of the bins
/// holding ±π/2.
pub fn stationary_bin_masses(b: f64, bins: usize) -> Result<Vec<f64>> {
    if b == 0.0 {
        let mut masses = vec![0.0; bins];
        masses[bin_index(FRAC_PI_2, bins)] += 0.5;
        masses[bin_index(-FRAC_PI_2, bins)] += 0.5;
        return Ok(masses);
    }
    Ok(stationary_distribution_converged(b)?.bin_masses(bins))
}

/// ½ Σ |p_k − q_k|.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityResult {
    pub total_time: f64,
    pub samples: usize,
    /// Fraction of samples per bin.
    pub histogram: Vec<f64>,
    pub expected: Vec<f64>,
    pub tv_distance: f64,
    pub min_theta: f64,
    pub max_theta: f64,
}

/// One trajectory of the angular SDE from `theta0`, histogrammed at each of
/// the checkpoint times (ascending). Every post-step angle is a sample.
pub fn ergodicity_profile(
    b: f64,
    checkpoints: &[f64],
    dt: f64,
    seed: u64,
    bins: usize,
    theta0: f64,
) -> Result<Vec<ErgodicityResult>> {
    check_dt(dt)?;
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    if checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("checkpoints must be ascending".into()));
    }
    let expected = stationary_bin_masses(b, bins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; bins];
    let mut theta = wrap_angle(theta0);
    let (mut lo, mut hi) = (theta, theta);
    let mut done = 0usize;
    let mut out = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        let target = (t / dt).round() as usize;
        while done < target {
            theta = angular_step(theta, b, dt, wiener_increment(&mut rng, dt));
            counts[bin_index(theta, bins)] += 1;
            lo = lo.min(theta);
            hi = hi.max(theta);
            done += 1;
        }
        let n = done.max(1) as f64;
        let histogram: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        out.push(ErgodicityResult {
            total_time: t,
            samples: done,
            tv_distance: total_variation(&histogram, &expected),
            histogram,
            expected: expected.clone(),
            min_theta: lo,
            max_theta: hi,
        });
    }
    Ok(out)
}

pub fn ergodicity_test(
    b: f64,
    total_time: f64,
    dt: f64,
    seed: u64,
    bins: usize,
    theta0: f64,
) -> Result<ErgodicityResult> {
    let mut v = ergodicity_profile(b, &[total_time], dt, seed, bins, theta0)?;
    Ok(v.pop().expect("one checkpoint"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_edges() {
        assert_eq!(bin_index(PI, 63), 62);
        assert_eq!(bin_index(-PI, 63), 62);
        assert_eq!(bin_index(-PI + 1e-9, 63), 0);
        assert_eq!(bin_index(0.0, 2), 0);
        assert_eq!(bin_index(1e-12, 2), 1);
    }

    #[test]
    fn tv_of_identical_is_zero() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(total_variation(&p, &p), 0.0);
        assert!((total_variation(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_field_stays_in_basin() {
        let r = ergodicity_test(0.0, 1000.0, 0.01, 3, 63, 1.0).unwrap();
        assert!(r.min_theta > -FRAC_PI_2 && r.max_theta <= FRAC_PI_2, "{} {}", r.min_theta, r.max_theta);
        assert!((r.histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
