//! Continued fractions for the Fourier-mode recursion of the angular
//! Fokker–Planck equation.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Denominators smaller than this abort the evaluation.
pub const MIN_DENOMINATOR: f64 = 1e-300;

/// Depth-th approximant of a₁/(b₁ + a₂/(b₂ + …)), evaluated backwards.
pub fn continued_fraction(a: &[Complex64], b: &[Complex64], depth: usize) -> Result<Complex64> {
    if depth == 0 {
        return Err(Error::InvalidArgument("continued fraction depth must be at least 1".into()));
    }
    if depth > a.len() || depth > b.len() {
        return Err(Error::InvalidArgument(format!(
            "depth {depth} exceeds the partial quotient lists ({}, {})",
            a.len(),
            b.len()
        )));
    }
    let mut tail = Complex64::new(0.0, 0.0);
    for k in (0..depth).rev() {
        let denom = b[k] + tail;
        if denom.norm() < MIN_DENOMINATOR {
            return Err(Error::ZeroDenominator { index: k });
        }
        tail = a[k] / denom;
    }
    Ok(tail)
}

/// Coefficients of Q_m c_m + Q⁺_m c_{m+2} + Q⁻_m c_{m−2} = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CFCoefficients {
    pub m: i64,
    pub q: Complex64,
    pub q_plus: Complex64,
    pub q_minus: Complex64,
}

impl CFCoefficients {
    /// Q_m = 1 − 4iB/m, Q±_m = ½(1 ∓ 1/m). Undefined at m = 0.
    pub fn new(b: f64, m: i64) -> Self {
        assert!(m != 0, "recursion coefficients are undefined at m = 0");
        let mf = m as f64;
        Self {
            m,
            q: Complex64::new(1.0, -4.0 * b / mf),
            q_plus: Complex64::new(0.5 * (1.0 - 1.0 / mf), 0.0),
            q_minus: Complex64::new(0.5 * (1.0 + 1.0 / mf), 0.0),
        }
    }
}

/// Partial numerators and denominators whose continued fraction is
/// S_m = c_{m+2}/c_m:
/// a = [−Q⁻_{m+2}, −Q⁺_{m+2}Q⁻_{m+4}, −Q⁺_{m+4}Q⁻_{m+6}, …],
/// b = [Q_{m+2}, Q_{m+4}, …].
pub fn quotient_lists(b: f64, m: i64, depth: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut nums = Vec::with_capacity(depth);
    let mut dens = Vec::with_capacity(depth);
    for k in 0..depth as i64 {
        let here = CFCoefficients::new(b, m + 2 + 2 * k);
        if k == 0 {
            nums.push(-here.q_minus);
        } else {
            let prev = CFCoefficients::new(b, m + 2 * k);
            nums.push(-prev.q_plus * here.q_minus);
        }
        dens.push(here.q);
    }
    (nums, dens)
}

/// S_m = c_{m+2}/c_m to the given depth.
pub fn quotient(b: f64, m: i64, depth: usize) -> Result<Complex64> {
    let (a, bb) = quotient_lists(b, m, depth);
    continued_fraction(&a, &bb, depth)
}

/// S_0, S_2, …, S_{top} from one backward sweep of S_m = −Q⁻_{m+2}/(Q_{m+2} + Q⁺_{m+2}S_{m+2}).
///
/// S_top is the depth-th approximant; each lower S_m extends the same tail,
/// so it is the approximant of depth `depth + (top − m)/2` and the recursion
/// holds exactly between neighbouring quotients.
pub fn quotient_sweep(b: f64, top: usize, depth: usize) -> Result<Vec<Complex64>> {
    if depth == 0 {
        return Err(Error::InvalidArgument("continued fraction depth must be at least 1".into()));
    }
    if !top.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("top index {top} must be even")));
    }
    let start = top + 2 * (depth - 1);
    let mut out = vec![Complex64::new(0.0, 0.0); top / 2 + 1];
    let mut next = Complex64::new(0.0, 0.0);
    for m in (0..=start).rev().step_by(2) {
        let q = CFCoefficients::new(b, m as i64 + 2);
        let denom = q.q + q.q_plus * next;
        if denom.norm() < MIN_DENOMINATOR {
            return Err(Error::ZeroDenominator { index: (start - m) / 2 });
        }
        next = -q.q_minus / denom;
        if m <= top {
            out[m / 2] = next;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn trivial_and_golden() {
        assert_eq!(continued_fraction(&[c(1.0)], &[c(1.0)], 1).unwrap(), c(1.0));
        let ones = vec![c(1.0); 60];
        let g = continued_fraction(&ones, &ones, 60).unwrap();
        assert!((g.re - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-10);
        assert!(g.im.abs() < 1e-15);
    }

    #[test]
    fn guards() {
        assert!(matches!(continued_fraction(&[c(1.0)], &[c(1.0)], 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(continued_fraction(&[c(1.0)], &[c(1.0)], 2), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            continued_fraction(&[c(1.0), c(1.0)], &[c(1.0), c(0.0)], 2),
            Err(Error::ZeroDenominator { index: 1 })
        ));
    }

    #[test]
    fn coefficient_values() {
        let q = CFCoefficients::new(0.5, 4);
        assert_eq!(q.q, Complex64::new(1.0, -0.5));
        assert_eq!(q.q_plus, c(0.375));
        assert_eq!(q.q_minus, c(0.625));
    }

    #[test]
    fn lists_follow_recursion() {
        let (a, b) = quotient_lists(0.3, 2, 3);
        let q4 = CFCoefficients::new(0.3, 4);
        let q6 = CFCoefficients::new(0.3, 6);
        assert_eq!(a[0], -q4.q_minus);
        assert_eq!(a[1], -q4.q_plus * q6.q_minus);
        assert_eq!(b[1], q6.q);
    }

    #[test]
    fn sweep_matches_individual_fractions() {
        let sweep = quotient_sweep(0.4, 20, 30).unwrap();
        for (k, s) in sweep.iter().enumerate() {
            let m = 2 * k;
            let direct = quotient(0.4, m as i64, 30 + (20 - m) / 2).unwrap();
            assert!((s - direct).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_field_quotient_tends_to_minus_one() {
        // converges algebraically, error ≈ 1/depth²
        let s = quotient(0.0, 0, 10_000).unwrap();
        assert!((s + 1.0).norm() < 1e-7);
    }
}
