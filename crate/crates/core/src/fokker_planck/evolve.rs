//! Spectral time evolution of the angular Fokker–Planck equation.
//!
//! The even Fourier modes obey
//! ċ_m = imB c_m + m(c_{m+2} − c_{m−2})/8 − (m²/4)(c_m + (c_{m+2} + c_{m−2})/2),
//! with c_0 = 1/(2π) fixed, so the positive modes form a closed affine system.
//! It is integrated with classical RK4. This is a diagnostic tool for checking
//! relaxation, not a production solver.

use num_complex::Complex64;
use rayon::prelude::*;

use super::stationary::{FourierDistribution, C0};
use crate::error::{Error, Result};

/// Bound on dt·(Gershgorin radius) accepted by [`fp_evolve`]; RK4 is stable
/// up to about 2.8 along both axes.
pub const RK4_STABILITY: f64 = 2.5;
/// Any |c_m| above this aborts the evolution.
pub const BLOWUP: f64 = 1e6;

fn gershgorin(b: f64, max_order: usize) -> f64 {
    (2..=max_order)
        .step_by(2)
        .map(|m| {
            let m = m as f64;
            Complex64::new(-m * m / 4.0, m * b).norm() + (m / 8.0 - m * m / 8.0).abs() + (m / 8.0 + m * m / 8.0)
        })
        .fold(0.0, f64::max)
}

/// Largest step [`fp_evolve`] accepts for the given field and truncation.
pub fn max_stable_dt(b: f64, max_order: usize) -> f64 {
    RK4_STABILITY / gershgorin(b, max_order).max(f64::MIN_POSITIVE)
}

fn rhs(b: f64, c: &[Complex64], out: &mut [Complex64]) {
    let n = c.len();
    let zero = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let m = 2.0 * (j + 1) as f64;
        let cm = c[j];
        let up = if j + 1 < n { c[j + 1] } else { zero };
        let down = if j == 0 { Complex64::new(C0, 0.0) } else { c[j - 1] };
        out[j] = Complex64::new(0.0, m * b) * cm + (up - down) * (m / 8.0) - (cm + (up + down) * 0.5) * (m * m / 4.0);
    }
}

#[derive(Debug, Clone)]
pub struct FpEvolution {
    pub times: Vec<f64>,
    pub states: Vec<FourierDistribution>,
}

/// Evolves `initial` for `steps` RK4 steps, keeping every `sample_every`-th
/// state plus the first and last.
pub fn fp_evolve(
    initial: &FourierDistribution,
    b: f64,
    dt: f64,
    steps: usize,
    sample_every: usize,
) -> Result<FpEvolution> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let max_order = initial.max_order();
    let coeffs = initial.coefficients();
    if coeffs.iter().skip(1).step_by(2).any(|c| c.norm() != 0.0) {
        return Err(Error::InvalidArgument("odd Fourier modes are not evolved; initial must be π-periodic".into()));
    }
    let limit = max_stable_dt(b, max_order);
    if dt > limit {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt:e} exceeds the RK4 stability limit {limit:e} for M = {max_order}"
        )));
    }
    let every = sample_every.max(1);
    let pack = |c: &[Complex64]| -> Result<FourierDistribution> {
        let mut full = vec![Complex64::new(0.0, 0.0); max_order + 1];
        full[0] = Complex64::new(C0, 0.0);
        for (j, &x) in c.iter().enumerate() {
            full[2 * (j + 1)] = x;
        }
        FourierDistribution::from_coefficients(b, full)
    };

    let mut c: Vec<Complex64> = (2..=max_order).step_by(2).map(|m| coeffs[m]).collect();
    let n = c.len();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![Complex64::new(0.0, 0.0); n],
        vec![Complex64::new(0.0, 0.0); n],
        vec![Complex64::new(0.0, 0.0); n],
        vec![Complex64::new(0.0, 0.0); n],
        vec![Complex64::new(0.0, 0.0); n],
    );
    let mut times = vec![0.0];
    let mut states = vec![pack(&c)?];
    for step in 0..steps {
        rhs(b, &c, &mut k1);
        for j in 0..n {
            tmp[j] = c[j] + k1[j] * (0.5 * dt);
        }
        rhs(b, &tmp, &mut k2);
        for j in 0..n {
            tmp[j] = c[j] + k2[j] * (0.5 * dt);
        }
        rhs(b, &tmp, &mut k3);
        for j in 0..n {
            tmp[j] = c[j] + k3[j] * dt;
        }
        rhs(b, &tmp, &mut k4);
        let mut peak: f64 = 0.0;
        for j in 0..n {
            c[j] += (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (dt / 6.0);
            peak = peak.max(c[j].norm());
        }
        if !(peak <= BLOWUP) {
            return Err(Error::Unstable { step, magnitude: peak });
        }
        if (step + 1) % every == 0 || step + 1 == steps {
            times.push((step + 1) as f64 * dt);
            states.push(pack(&c)?);
        }
    }
    Ok(FpEvolution { times, states })
}

/// √(Σ_{m≥0} |c_m − c′_m|²), missing modes counted as zero.
pub fn coefficient_distance(a: &FourierDistribution, b: &FourierDistribution) -> f64 {
    let n = a.max_order().max(b.max_order()) as i64;
    (0..=n).map(|m| (a.coeff(m) - b.coeff(m)).norm_sqr()).sum::<f64>().sqrt()
}

/// H = ∫ p ln(p/q) dθ on a uniform periodic grid; both densities are floored
/// at 1e−300 to survive truncation ripples.
pub fn kl_divergence(p: &FourierDistribution, q: &FourierDistribution) -> f64 {
    let n = super::stationary::GRID_POINTS.max(2 * p.max_order().max(q.max_order()) + 2);
    let h = 2.0 * std::f64::consts::PI / n as f64;
    FourierDistribution::grid(n)
        .par_iter()
        .map(|&t| {
            let a = p.density(t).max(1e-300);
            let b = q.density(t).max(1e-300);
            a * (a / b).ln()
        })
        .sum::<f64>()
        * h
}
