//! Single-step integrators for the stochastic master equation
//!
//! dρ = i[BĴ_y, ρ]dt + 𝒟[Ĵ_z]ρ dt + (ρĴ_z + Ĵ_zρ − 2tr[ρĴ_z]ρ) dW,
//! dY = 2tr[ρĴ_z]dt + dW.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spin::{hermitize, CMatrix, CollectiveOps, DensityMatrix, I, POSITIVITY_TOL};

/// dY = 2tr[ρĴ_z]dt + dW.
pub fn emit_measurement(rho: &DensityMatrix, ops: &CollectiveOps, dt: f64, dw: f64) -> f64 {
    2.0 * ops.mean_jz(rho.matrix()) * dt + dw
}

/// dW implied by an observed dY for the state `rho`.
pub fn innovation(rho: &DensityMatrix, ops: &CollectiveOps, dt: f64, dy: f64) -> f64 {
    dy - 2.0 * ops.mean_jz(rho.matrix()) * dt
}

/// Euler–Maruyama step. Preserves the trace to rounding but not positivity.
pub fn sme_step_euler(
    rho: &DensityMatrix,
    ops: &CollectiveOps,
    b: f64,
    dt: f64,
    dw: f64,
) -> DensityMatrix {
    let r = rho.matrix();
    let m = ops.m_values();
    let d = ops.dim();
    let mean_jz = ops.mean_jz(r);

    // i[BĴ_y, ρ]
    let jy = ops.jy();
    let comm = jy * r - r * jy;
    let mut out = r.clone();
    for i in 0..d {
        for k in 0..d {
            let x = r[(i, k)];
            // Ĵ_z is diagonal: (Ĵ_zρĴ_z − ½{Ĵ_z², ρ})_ik = −½(m_i − m_k)² ρ_ik
            let dissipator = -0.5 * (m[i] - m[k]).powi(2) * x;
            let innovation = (m[i] + m[k] - 2.0 * mean_jz) * x;
            out[(i, k)] += I * b * comm[(i, k)] * dt + dissipator * dt + innovation * dw;
        }
    }
    DensityMatrix::from_matrix_unchecked(out)
}

/// Ω(dY) = 𝕀 + iBĴ_y dt − ½Ĵ_z² dt + Ĵ_z dY.
///
/// The Hamiltonian of the SME above is −BĴ_y, so the coherent part of Ω is
/// 𝕀 − i(−BĴ_y)dt. With this sign the Kraus and Euler updates agree to first
/// order and a record generated at field B is best explained by +B.
pub fn kraus_operator(ops: &CollectiveOps, b: f64, dt: f64, dy: f64) -> CMatrix {
    let d = ops.dim();
    let mut omega = ops.jy().map(|z| I * b * dt * z);
    for (k, &m) in ops.m_values().iter().enumerate() {
        omega[(k, k)] += Complex64::new(1.0 - 0.5 * m * m * dt + m * dy, 0.0);
    }
    debug_assert_eq!(omega.nrows(), d);
    omega
}

/// ∂_BΩ = iĴ_y dt.
pub fn kraus_operator_b_derivative(ops: &CollectiveOps, dt: f64) -> CMatrix {
    ops.jy().map(|z| I * dt * z)
}

/// Smallest trace accepted before a Kraus update is declared inconsistent.
pub const MIN_KRAUS_TRACE: f64 = 1e-300;

/// Kraus update ρ → ΩρΩ†/tr[ΩρΩ†], followed by Hermitization and positivity repair.
///
/// Negative eigenvalues above −[`POSITIVITY_TOL`] are clipped to zero and the
/// state renormalized; anything more negative is reported as an error.
pub fn sme_step_kraus(
    rho: &DensityMatrix,
    ops: &CollectiveOps,
    b: f64,
    dt: f64,
    dy: f64,
) -> Result<DensityMatrix> {
    let omega = kraus_operator(ops, b, dt, dy);
    let (next, _) = apply_kraus(rho.matrix(), &omega)?;
    Ok(next)
}

/// Returns the normalized state and the normalization tr[ΩρΩ†].
pub(crate) fn apply_kraus(rho: &CMatrix, omega: &CMatrix) -> Result<(DensityMatrix, f64)> {
    let unnormalized = omega * rho * omega.adjoint();
    let trace = unnormalized.trace().re;
    if !(trace > MIN_KRAUS_TRACE) {
        return Err(Error::VanishingNorm { trace });
    }
    let scaled = unnormalized.map(|z| z / trace);
    Ok((repair(hermitize(&scaled))?, trace))
}

fn repair(m: CMatrix) -> Result<DensityMatrix> {
    let min = min_eigenvalue_hermitian(&m);
    if min >= 0.0 {
        return Ok(DensityMatrix::from_matrix_unchecked(m));
    }
    if min < -POSITIVITY_TOL {
        return Err(Error::NegativeEigenvalue { min_eigenvalue: min });
    }
    let eig = m.symmetric_eigen();
    let mut clipped = CMatrix::zeros(eig.eigenvectors.nrows(), eig.eigenvectors.ncols());
    let mut total = 0.0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        total += lambda;
        let v = eig.eigenvectors.column(k);
        clipped += (v * v.adjoint()).map(|z| z * lambda);
    }
    Ok(DensityMatrix::from_matrix_unchecked(
        hermitize(&clipped).map(|z| z / total),
    ))
}

fn min_eigenvalue_hermitian(m: &CMatrix) -> f64 {
    if m.nrows() == 2 {
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let off = m[(0, 1)].norm();
        return 0.5 * (a + d) - (0.25 * (a - d).powi(2) + off * off).sqrt();
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{build_collective_ops, coherent_state_x, jz_eigenstate, max_entropy_state, max_abs};
    use crate::trajectory::qubit::BlochState;

    fn qubit() -> CollectiveOps {
        build_collective_ops(1).unwrap()
    }

    #[test]
    fn euler_fixed_point_at_jz_eigenstate() {
        let ops = build_collective_ops(4).unwrap();
        for k in 0..ops.dim() {
            let rho = jz_eigenstate(&ops, k).unwrap();
            let next = sme_step_euler(&rho, &ops, 0.0, 0.01, 0.0);
            assert!(next.l1_distance(&rho) < 1e-15);
        }
    }

    #[test]
    fn euler_innovation_vanishes_on_measurement_eigenstate() {
        let ops = qubit();
        let up = jz_eigenstate(&ops, 1).unwrap();
        for dw in [-0.3, 0.0, 0.1, 2.0] {
            let next = sme_step_euler(&up, &ops, 0.0, 0.01, dw);
            assert!(next.l1_distance(&up) < 1e-15);
        }
    }

    #[test]
    fn euler_matches_component_form() {
        let ops = qubit();
        let s = BlochState::new(0.5, 0.0, -0.5);
        let (b, dt, dw) = (1.0, 1e-3, 0.02);
        let next = sme_step_euler(&s.to_density(), &ops, b, dt, dw);
        let got = BlochState::from_density(&next);

        // component form evaluated by hand
        let ex = 0.5 + (-b * -0.5 - 0.5 * 0.5) * dt + (0.5 * 0.5) * dw;
        let ey = 0.0;
        let ez = -0.5 + b * 0.5 * dt + (1.0 - 0.25) * dw;
        assert!((got.rho_x - ex).abs() < 1e-12);
        assert!((got.rho_y - ey).abs() < 1e-12);
        assert!((got.rho_z - ez).abs() < 1e-12);
        assert!((next.trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kraus_identity_and_qnd() {
        let ops = build_collective_ops(3).unwrap();
        let rho = coherent_state_x(&ops);
        let same = sme_step_kraus(&rho, &ops, 2.0, 0.0, 0.0).unwrap();
        assert!(same.l1_distance(&rho) < 1e-14);

        for k in 0..ops.dim() {
            let eig = jz_eigenstate(&ops, k).unwrap();
            for dy in [-0.5, 0.01, 0.3] {
                let next = sme_step_kraus(&eig, &ops, 0.0, 0.01, dy).unwrap();
                assert!(next.l1_distance(&eig) < 1e-14);
            }
        }
    }

    #[test]
    fn kraus_output_is_valid_density_matrix() {
        let ops = build_collective_ops(6).unwrap();
        let mut rho = max_entropy_state(&ops);
        for k in 0..200 {
            let dy = 0.1 * ((k as f64) * 0.37).sin();
            rho = sme_step_kraus(&rho, &ops, 1.3, 0.01, dy).unwrap();
            rho.validate().unwrap();
        }
    }

    #[test]
    fn kraus_vs_euler_single_step() {
        // Kraus and Euler differ at leading order by (dY² − dt)·C(ρ) with
        // C = ĴzρĴz − ρ tr[Ĵz²ρ] − (ℳ(ρ) − ρ tr ℳ(ρ)) tr ℳ(ρ); the remainder is O(dt^{3/2}).
        let ops = qubit();
        let rho = coherent_state_x(&ops);
        let (b, dt, dy) = (1.0, 1e-3, 0.01);
        let rho_z = 2.0 * ops.mean_jz(rho.matrix());
        let kraus = sme_step_kraus(&rho, &ops, b, dt, dy).unwrap();
        let euler = sme_step_euler(&rho, &ops, b, dt, dy - rho_z * dt);
        let diff = kraus.matrix() - euler.matrix();

        let r = rho.matrix();
        let jz = ops.jz();
        let m_rho = jz * r + r * jz;
        let tr_m = m_rho.trace().re;
        let c = jz * r * jz - r.map(|z| z * rho.expectation(ops.jz_squared()))
            - (&m_rho - r.map(|z| z * tr_m)).map(|z| z * tr_m);
        let leading = c.map(|z| z * (dy * dy - dt));
        assert!(max_abs(&diff) < 1e-3);
        assert!(max_abs(&(diff - leading)) < 1e-5);
    }

    #[test]
    fn clipping_repairs_tiny_negative_eigenvalue() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.0 + 1e-10, 0.0);
        m[(1, 1)] = Complex64::new(-1e-10, 0.0);
        let fixed = repair(m).unwrap();
        fixed.validate().unwrap();
        assert!(fixed.min_eigenvalue() >= 0.0);

        let mut bad = CMatrix::zeros(2, 2);
        bad[(0, 0)] = Complex64::new(1.1, 0.0);
        bad[(1, 1)] = Complex64::new(-0.1, 0.0);
        assert!(matches!(repair(bad), Err(Error::NegativeEigenvalue { .. })));
    }

    #[test]
    fn vanishing_trace_is_reported() {
        let ops = qubit();
        let up = jz_eigenstate(&ops, 1).unwrap();
        // Ω acting on m=+1/2 with dy = -2: 1 - dt/8 - 1 ≈ 0 for dt = 0
        let err = sme_step_kraus(&up, &ops, 0.0, 0.0, -2.0).unwrap_err();
        assert!(matches!(err, Error::VanishingNorm { .. }));
    }

    #[test]
    fn emitted_measurement() {
        let ops = build_collective_ops(5).unwrap();
        assert!((emit_measurement(&max_entropy_state(&ops), &ops, 0.01, 0.3) - 0.3).abs() < 1e-15);
        let q = qubit();
        let up = jz_eigenstate(&q, 1).unwrap();
        assert!((emit_measurement(&up, &q, 0.01, 0.0) - 0.01).abs() < 1e-15);
        let two = build_collective_ops(2).unwrap();
        let coh = coherent_state_x(&two);
        assert!((emit_measurement(&coh, &two, 0.01, -0.05) + 0.05).abs() < 1e-15);
    }
}
