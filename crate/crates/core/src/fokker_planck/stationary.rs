//! Stationary solution of the angular Fokker–Planck equation in Fourier form,
//! P(θ) = Σ c_m e^{−imθ}.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::cf::{quotient_sweep, CFCoefficients};
use crate::error::{Error, Result};

/// c_0 = 1/(2π).
pub const C0: f64 = 1.0 / (2.0 * PI);
pub const DEFAULT_MAX_ORDER: usize = 500;
pub const DEFAULT_DEPTH: usize = 100;
/// Smallest |B| handled by the continued-fraction branch.
pub const MIN_FIELD: f64 = 1e-3;
/// Tolerance on |S_m(depth) − S_m(depth − 10)|, weighted by |c_m|/c_0.
pub const QUOTIENT_TOL: f64 = 1e-10;
pub const GRID_POINTS: usize = 4096;

/// Density on (−π, π] stored as c_0..c_M; c_{−m} = conj(c_m).
#[derive(Debug, Clone, PartialEq)]
pub struct FourierDistribution {
    pub b: f64,
    coeffs: Vec<Complex64>,
}

impl FourierDistribution {
    /// The flat density 1/(2π), truncated at `max_order`.
    pub fn uniform(b: f64, max_order: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); max_order + 1];
        coeffs[0] = Complex64::new(C0, 0.0);
        Self { b, coeffs }
    }

    /// Builds a density from c_0..c_M. c_0 must be 1/(2π) and real.
    pub fn from_coefficients(b: f64, coeffs: Vec<Complex64>) -> Result<Self> {
        let Some(c0) = coeffs.first() else {
            return Err(Error::InvalidArgument("no Fourier coefficients".into()));
        };
        if (c0.re - C0).abs() > 1e-14 || c0.im.abs() > 1e-14 {
            return Err(Error::InvalidArgument(format!("c_0 = {c0} is not 1/(2π)")));
        }
        let mut coeffs = coeffs;
        coeffs[0] = Complex64::new(C0, 0.0);
        Ok(Self { b, coeffs })
    }

    pub fn max_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// c_0..c_M.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// c_m for any integer m; zero beyond the truncation.
    pub fn coeff(&self, m: i64) -> Complex64 {
        let k = m.unsigned_abs() as usize;
        match self.coeffs.get(k) {
            Some(&c) if m >= 0 => c,
            Some(&c) => c.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// (P(θ), P′(θ)).
    pub fn density_and_derivative(&self, theta: f64) -> (f64, f64) {
        let step = Complex64::from_polar(1.0, -theta);
        let mut phase = Complex64::new(1.0, 0.0);
        let mut p = 0.0;
        let mut dp = 0.0;
        for (m, &c) in self.coeffs.iter().enumerate().skip(1) {
            phase *= step;
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let term = c * phase;
            p += term.re;
            // d/dθ e^{−imθ} = −im e^{−imθ}
            dp += (term * Complex64::new(0.0, -(m as f64))).re;
        }
        (self.coeffs[0].re + 2.0 * p, 2.0 * dp)
    }

    pub fn density(&self, theta: f64) -> f64 {
        self.density_and_derivative(theta).0
    }

    /// Grid θ_k = −π + 2π(k+1)/n, k = 0..n, covering (−π, π].
    pub fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|k| -PI + 2.0 * PI * (k + 1) as f64 / n as f64).collect()
    }

    /// Periodic trapezoid rule, exact for trigonometric polynomials of degree < n.
    pub fn integral(&self) -> f64 {
        let n = GRID_POINTS.max(2 * self.max_order() + 2);
        let h = 2.0 * PI / n as f64;
        Self::grid(n).par_iter().map(|&t| self.density(t)).sum::<f64>() * h
    }

    /// Minimum of P over an n-point grid.
    pub fn min_on_grid(&self, n: usize) -> f64 {
        Self::grid(n)
            .par_iter()
            .map(|&t| self.density(t))
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// ∫ P over [lo, hi], exact for the truncated series.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, &c) in self.coeffs.iter().enumerate().skip(1) {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let mf = m as f64;
            let diff = Complex64::from_polar(1.0, -mf * hi) - Complex64::from_polar(1.0, -mf * lo);
            acc += c * diff / Complex64::new(0.0, -mf);
        }
        self.coeffs[0].re * (hi - lo) + 2.0 * acc.re
    }

    /// Mass in each of `bins` equal bins over (−π, π].
    pub fn bin_masses(&self, bins: usize) -> Vec<f64> {
        let w = 2.0 * PI / bins as f64;
        (0..bins)
            .map(|k| self.mass_between(-PI + k as f64 * w, -PI + (k + 1) as f64 * w))
            .collect()
    }

    /// |c_M|/c_0.
    pub fn tail(&self) -> f64 {
        let m = self.max_order();
        // the last even mode is the last nonzero one for the stationary series
        let last = if m.is_multiple_of(2) { m } else { m - 1 };
        self.coeffs[last].norm() / C0
    }
}

fn check_orders(max_order: usize, depth: usize) -> Result<()> {
    if max_order < 2 {
        return Err(Error::InvalidArgument(format!("max_order must be at least 2, got {max_order}")));
    }
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    Ok(())
}

/// B = 0: c_{2m} = (−1)^m/(2π), the Fourier series of ½[δ(θ − π/2) + δ(θ + π/2)].
pub fn zero_field_distribution(max_order: usize) -> FourierDistribution {
    let mut d = FourierDistribution::uniform(0.0, max_order);
    for m in (2..=max_order).step_by(2) {
        let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
        d.coeffs[m] = Complex64::new(sign * C0, 0.0);
    }
    d
}

/// Stationary density from c_{m+2} = S_m c_m, c_0 = 1/(2π).
///
/// The highest quotient used is the depth-th approximant and the lower ones
/// share its tail (see [`quotient_sweep`]). Fails with [`Error::NotConverged`]
/// when lowering the depth by 10 moves any c_{m+2} by more than
/// [`QUOTIENT_TOL`]·c_0; for depth ≤ 10 the check is skipped.
pub fn stationary_distribution(b: f64, max_order: usize, depth: usize) -> Result<FourierDistribution> {
    check_orders(max_order, depth)?;
    if !b.is_finite() {
        return Err(Error::InvalidArgument(format!("field must be finite, got {b}")));
    }
    if b == 0.0 {
        return Ok(zero_field_distribution(max_order));
    }
    if b.abs() < MIN_FIELD {
        return Err(Error::InvalidArgument(format!(
            "|B| = {} is below {MIN_FIELD}; use B = 0 for the closed form",
            b.abs()
        )));
    }

    // S_m for m = 0, 2, …, top gives c_2 … c_{top+2} with top + 2 ≤ M
    let top = (max_order - 2) & !1;
    let quotients = quotient_sweep(b, top, depth)?;
    let coarse = if depth > 10 {
        Some(quotient_sweep(b, top, depth - 10)?)
    } else {
        None
    };

    let mut dist = FourierDistribution::uniform(b, max_order);
    for (k, &s) in quotients.iter().enumerate() {
        let m = 2 * k;
        let cm = dist.coeffs[m];
        if let Some(coarse) = &coarse {
            let delta = (s - coarse[k]).norm() * cm.norm() / C0;
            if delta > QUOTIENT_TOL {
                return Err(Error::NotConverged { m, delta });
            }
        }
        dist.coeffs[m + 2] = s * cm;
    }
    Ok(dist)
}

/// Largest truncation tried by [`stationary_distribution_converged`].
pub const MAX_AUTO_ORDER: usize = 1 << 16;

/// Doubles (M, depth) from the defaults until doubling again changes c_2 by
/// less than 1e−10 and |c_M|/c_0 < 1e−13.
pub fn stationary_distribution_converged(b: f64) -> Result<FourierDistribution> {
    if b == 0.0 {
        return stationary_distribution(b, DEFAULT_MAX_ORDER, DEFAULT_DEPTH);
    }
    let (mut m, mut d) = (DEFAULT_MAX_ORDER, DEFAULT_DEPTH);
    let mut prev: Option<FourierDistribution> = None;
    let mut last_delta = f64::INFINITY;
    while m <= MAX_AUTO_ORDER {
        match stationary_distribution(b, m, d) {
            Ok(dist) => {
                if let Some(p) = &prev {
                    last_delta = (dist.coeff(2) - p.coeff(2)).norm();
                    if last_delta < 1e-10 && dist.tail() < 1e-13 {
                        return Ok(dist);
                    }
                }
                prev = Some(dist);
            }
            Err(Error::NotConverged { delta, .. }) => {
                last_delta = delta;
                prev = None;
            }
            Err(e) => return Err(e),
        }
        m *= 2;
        d *= 2;
    }
    Err(Error::NotConverged { m: 2, delta: last_delta })
}

/// max over even m ∈ [2, M] of |Q_m c_m + Q⁺_m c_{m+2} + Q⁻_m c_{m−2}|.
pub fn recursion_residual(dist: &FourierDistribution) -> f64 {
    (2..=dist.max_order())
        .step_by(2)
        .map(|m| {
            let q = CFCoefficients::new(dist.b, m as i64);
            let mi = m as i64;
            (q.q * dist.coeff(mi) + q.q_plus * dist.coeff(mi + 2) + q.q_minus * dist.coeff(mi - 2)).norm()
        })
        .fold(0.0, f64::max)
}

/// max over even m ≤ M − 4 of |Q⁻_{m+2}/S_m + Q_{m+2} + Q⁺_{m+2}S_{m+2}| with
/// S_m = c_{m+2}/c_m; modes that have underflowed are skipped.
pub fn quotient_residual(dist: &FourierDistribution) -> f64 {
    let top = dist.max_order().saturating_sub(4);
    (0..=top)
        .step_by(2)
        .filter_map(|m| {
            let mi = m as i64;
            let (c0, c2, c4) = (dist.coeff(mi), dist.coeff(mi + 2), dist.coeff(mi + 4));
            if c0.norm() < 1e-250 || c2.norm() < 1e-250 {
                return None;
            }
            let q = CFCoefficients::new(dist.b, mi + 2);
            let (s0, s2) = (c2 / c0, c4 / c2);
            Some((q.q_minus / s0 + q.q + q.q_plus * s2).norm())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentSummary {
    /// J_sta = B c_0 + Im[c_2]/4.
    pub j_sta: f64,
    /// max_θ |J(θ) − J_sta| on the grid.
    pub flatness: f64,
}

/// J(θ) = P(B + ¼ sin 2θ) − ¼[(1 + cos 2θ)P′ − 2 sin 2θ P].
pub fn current_at(dist: &FourierDistribution, theta: f64) -> f64 {
    let (p, dp) = dist.density_and_derivative(theta);
    let (s2, c2) = (2.0 * theta).sin_cos();
    p * (dist.b + 0.25 * s2) - 0.25 * ((1.0 + c2) * dp - 2.0 * s2 * p)
}

pub fn probability_current(dist: &FourierDistribution) -> CurrentSummary {
    let j_sta = dist.b * C0 + 0.25 * dist.coeff(2).im;
    let flatness = FourierDistribution::grid(GRID_POINTS)
        .par_iter()
        .map(|&t| (current_at(dist, t) - j_sta).abs())
        .reduce(|| 0.0, f64::max);
    CurrentSummary { j_sta, flatness }
}

/// J_classical = B/(2π), the current of dθ = B dt.
pub fn classical_current(b: f64) -> f64 {
    b / (2.0 * PI)
}

/// 𝔼[θ] = −2π Σ_{m≥1} Im[c_{2m}]/m.
pub fn stationary_mean_theta(dist: &FourierDistribution) -> f64 {
    let mut sum = 0.0;
    for m in 1..=dist.max_order() / 2 {
        sum += dist.coeff(2 * m as i64).im / m as f64;
    }
    -2.0 * PI * sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub b: f64,
    pub j_sta: f64,
    pub j_ratio: f64,
    pub mean_theta: f64,
}

/// Current, current ratio and mean angle over a list of fields, each solved to
/// convergence.
pub fn current_sweep(fields: &[f64]) -> Result<Vec<SweepRow>> {
    fields
        .par_iter()
        .map(|&b| {
            let dist = stationary_distribution_converged(b)?;
            let j_sta = b * C0 + 0.25 * dist.coeff(2).im;
            Ok(SweepRow {
                b,
                j_sta,
                j_ratio: j_sta / classical_current(b),
                mean_theta: stationary_mean_theta(&dist),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_closed_form() {
        let d = stationary_distribution(0.0, 40, 100).unwrap();
        for m in 0..=20i64 {
            let want = if m % 2 == 0 { C0 } else { -C0 };
            assert_eq!(d.coeff(2 * m), Complex64::new(want, 0.0));
            assert_eq!(d.coeff(2 * m + 1), Complex64::new(0.0, 0.0));
        }
        assert_eq!(probability_current(&d).j_sta, 0.0);
        assert_eq!(stationary_mean_theta(&d), 0.0);
    }

    #[test]
    fn rejects_tiny_field_and_bad_orders() {
        assert!(stationary_distribution(1e-4, 500, 100).is_err());
        assert!(stationary_distribution(1.0, 0, 100).is_err());
        assert!(stationary_distribution(1.0, 500, 0).is_err());
    }

    #[test]
    fn small_field_flags_truncation() {
        assert!(matches!(
            stationary_distribution(0.05, 500, 100),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn unit_field_is_consistent() {
        let d = stationary_distribution(1.0, 500, 100).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-10);
        assert!(recursion_residual(&d) < 1e-9);
        assert!(quotient_residual(&d) < 1e-9);
        assert!(probability_current(&d).flatness < 1e-8);
        assert!(d.min_on_grid(GRID_POINTS) > 0.0);
        let c2 = d.coeff(2);
        assert_eq!(d.coeff(-2), c2.conj());
    }

    #[test]
    fn converged_matches_frozen_values() {
        // reference values from an independent backward sweep at M = 6000
        let d = stationary_distribution_converged(0.05).unwrap();
        let c2 = d.coeff(2);
        assert!((c2.re + 0.15155635847591845).abs() < 1e-10, "{c2}");
        assert!((c2.im + 0.0269738522363474).abs() < 1e-10, "{c2}");
        let d = stationary_distribution_converged(0.5).unwrap();
        let c2 = d.coeff(2);
        assert!((c2.re + 0.0531312756097097).abs() < 1e-10, "{c2}");
        assert!((c2.im + 0.06624770009440879).abs() < 1e-10, "{c2}");
    }

    #[test]
    fn bin_masses_sum_to_one() {
        let d = stationary_distribution(1.0, 500, 100).unwrap();
        let masses = d.bin_masses(63);
        assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let direct = d.mass_between(0.0, 0.5);
        let n = 20_000;
        let h = 0.5 / n as f64;
        let simpson: f64 = (0..n).map(|k| d.density((k as f64 + 0.5) * h) * h).sum();
        assert!((direct - simpson).abs() < 1e-8);
    }

    #[test]
    fn negative_field_mirrors() {
        let p = stationary_distribution(0.7, 200, 100).unwrap();
        let n = stationary_distribution(-0.7, 200, 100).unwrap();
        for m in 0..=200i64 {
            assert!((p.coeff(m) - n.coeff(m).conj()).norm() < 1e-15);
        }
    }
}
