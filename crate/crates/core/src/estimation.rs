//! Maximum-likelihood field estimation from a measurement record.
//!
//! Everything is kept in log form: dl = tr ℳ(ρ)(dY − ½tr ℳ(ρ)dt) with
//! ℳ(ρ) = Ĵ_zρ + ρĴ_z. The field derivative is carried by
//! τ = ∂_Bρ̃ / tr ρ̃, propagated with the same Kraus operator as ρ.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spin::{hermitize, CMatrix, CollectiveOps, DensityMatrix};
use crate::trajectory::noise::{check_dt, MeasurementRecord};
use crate::trajectory::step::{apply_kraus, innovation, kraus_operator, kraus_operator_b_derivative, sme_step_euler};
use crate::trajectory::Integrator;

/// tr ℳ(A) = 2 tr[Ĵ_z A] (real part).
pub fn m_trace(a: &CMatrix, ops: &CollectiveOps) -> f64 {
    2.0 * ops
        .m_values()
        .iter()
        .enumerate()
        .map(|(k, &m)| m * a[(k, k)].re)
        .sum::<f64>()
}

/// dl = tr ℳ(ρ)·(dY − ½ tr ℳ(ρ) dt).
pub fn loglik_step(rho: &DensityMatrix, ops: &CollectiveOps, dy: f64, dt: f64) -> f64 {
    let m = m_trace(rho.matrix(), ops);
    m * (dy - 0.5 * m * dt)
}

#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub rho: DensityMatrix,
    pub tau: CMatrix,
    pub b_est: f64,
    pub loglik: f64,
    pub loglik_grad: f64,
}

impl EstimatorState {
    /// τ starts at zero: the initial state does not depend on B.
    pub fn new(rho: DensityMatrix, b0: f64) -> Self {
        let d = rho.dim();
        Self {
            rho,
            tau: CMatrix::zeros(d, d),
            b_est: b0,
            loglik: 0.0,
            loglik_grad: 0.0,
        }
    }

    pub fn tau_trace(&self) -> f64 {
        self.tau.trace().re
    }
}

/// dl^B = (tr ℳ(τ) − tr ℳ(ρ)·tr τ)·(dY − tr ℳ(ρ) dt).
pub fn grad_loglik_step(est: &EstimatorState, ops: &CollectiveOps, dy: f64, dt: f64) -> f64 {
    let m_rho = m_trace(est.rho.matrix(), ops);
    let m_tau = m_trace(&est.tau, ops);
    (m_tau - m_rho * est.tau_trace()) * (dy - m_rho * dt)
}

/// Advances ρ and τ with Ω(dY) at the current B_est:
/// τ' = [Ω_BρΩ† + ΩρΩ_B† + ΩτΩ†]/tr[ΩρΩ†], ρ' = ΩρΩ†/tr[ΩρΩ†].
/// The likelihood accumulators and B_est are left untouched.
pub fn tau_step(est: &EstimatorState, ops: &CollectiveOps, dt: f64, dy: f64) -> Result<EstimatorState> {
    let (next, _, tau) = kraus_with_tau(est, ops, dt, dy)?;
    Ok(EstimatorState {
        rho: next,
        tau,
        ..est.clone()
    })
}

/// Returns (ρ', tr[ΩρΩ†], τ').
fn kraus_with_tau(
    est: &EstimatorState,
    ops: &CollectiveOps,
    dt: f64,
    dy: f64,
) -> Result<(DensityMatrix, f64, CMatrix)> {
    let omega = kraus_operator(ops, est.b_est, dt, dy);
    let omega_b = kraus_operator_b_derivative(ops, dt);
    let rho = est.rho.matrix();
    let (next, norm) = apply_kraus(rho, &omega)?;
    let omega_dag = omega.adjoint();
    let cross = &omega_b * rho * &omega_dag;
    let raw = &cross + cross.adjoint() + &omega * &est.tau * &omega_dag;
    Ok((next, norm, hermitize(&raw.map(|z| z / norm))))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LikelihoodTrace {
    pub times: Vec<f64>,
    /// l_t = Σ dl.
    pub loglik: Vec<f64>,
    /// l_t^B = Σ dl^B.
    pub loglik_grad: Vec<f64>,
    /// tr τ_t.
    pub tau_trace: Vec<f64>,
    /// Σ ln tr[ΩρΩ†], the discrete log-likelihood of the Kraus replay.
    pub kraus_loglik: Vec<f64>,
}

/// Replays `record` at fixed field `b` with Kraus steps, accumulating l_t,
/// l_t^B and tr τ every `stride` steps (plus t = 0 and the final step).
pub fn likelihood_trace(
    record: &MeasurementRecord,
    ops: &CollectiveOps,
    initial: &DensityMatrix,
    b: f64,
    stride: usize,
) -> Result<LikelihoodTrace> {
    check_dt(record.dt)?;
    let dt = record.dt;
    let stride = stride.max(1);
    let k = record.len();
    let mut est = EstimatorState::new(initial.clone(), b);
    let mut kraus_ll = 0.0;
    let mut out = LikelihoodTrace {
        times: vec![0.0],
        loglik: vec![0.0],
        loglik_grad: vec![0.0],
        tau_trace: vec![0.0],
        kraus_loglik: vec![0.0],
    };
    for (n, &dy) in record.increments.iter().enumerate() {
        est.loglik += loglik_step(&est.rho, ops, dy, dt);
        est.loglik_grad += grad_loglik_step(&est, ops, dy, dt);
        let (rho, norm, tau) = kraus_with_tau(&est, ops, dt, dy).map_err(|e| Error::at_step(n, e))?;
        est.rho = rho;
        est.tau = tau;
        kraus_ll += norm.ln();
        if (n + 1) % stride == 0 || n + 1 == k {
            out.times.push((n + 1) as f64 * dt);
            out.loglik.push(est.loglik);
            out.loglik_grad.push(est.loglik_grad);
            out.tau_trace.push(est.tau_trace());
            out.kraus_loglik.push(kraus_ll);
        }
    }
    Ok(out)
}

/// l_T(B) from replaying `record` with the chosen integrator.
pub fn replay_loglik(
    record: &MeasurementRecord,
    ops: &CollectiveOps,
    initial: &DensityMatrix,
    b: f64,
    integrator: Integrator,
) -> Result<f64> {
    check_dt(record.dt)?;
    let dt = record.dt;
    let mut rho = initial.clone();
    let mut l = 0.0;
    for (n, &dy) in record.increments.iter().enumerate() {
        l += loglik_step(&rho, ops, dy, dt);
        rho = match integrator {
            Integrator::Kraus => {
                let omega = kraus_operator(ops, b, dt, dy);
                apply_kraus(rho.matrix(), &omega).map_err(|e| Error::at_step(n, e))?.0
            }
            Integrator::Euler => sme_step_euler(&rho, ops, b, dt, innovation(&rho, ops, dt, dy)),
        };
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub grid: Vec<f64>,
    /// l_T(B) − max l_T, so the maximum is 0.
    pub loglik: Vec<f64>,
    pub argmax: f64,
    /// Interior local maxima as (B, l), highest first; includes the argmax
    /// when it is interior.
    pub local_maxima: Vec<(f64, f64)>,
}

impl ScanResult {
    /// Highest local maximum other than the global one.
    pub fn secondary_maximum(&self) -> Option<(f64, f64)> {
        self.local_maxima.iter().copied().find(|&(b, _)| b != self.argmax)
    }
}

/// Grid-search maximum likelihood: replays the record at every grid field.
pub fn scan_estimate(
    record: &MeasurementRecord,
    ops: &CollectiveOps,
    grid: &[f64],
    initial: &DensityMatrix,
    integrator: Integrator,
) -> Result<ScanResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty field grid".into()));
    }
    if record.is_empty() {
        return Err(Error::DegenerateInput("empty record gives a flat likelihood".into()));
    }
    let raw: Vec<f64> = grid
        .par_iter()
        .map(|&b| replay_loglik(record, ops, initial, b, integrator))
        .collect::<Result<_>>()?;
    let (imax, &lmax) = raw
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");
    let loglik: Vec<f64> = raw.iter().map(|l| l - lmax).collect();
    let mut local_maxima: Vec<(f64, f64)> = (1..grid.len().saturating_sub(1))
        .filter(|&k| loglik[k] > loglik[k - 1] && loglik[k] >= loglik[k + 1])
        .map(|k| (grid[k], loglik[k]))
        .collect();
    local_maxima.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ScanResult {
        grid: grid.to_vec(),
        loglik,
        argmax: grid[imax],
        local_maxima,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineOptions {
    pub b0: f64,
    /// Learning rate; 0.5·dt is the usual choice.
    pub gamma: f64,
    pub b_max: f64,
    pub stride: usize,
    /// Time constant of an optional exponential moving average of B_est.
    pub ema_time: Option<f64>,
}

impl OnlineOptions {
    pub fn with_defaults(dt: f64) -> Self {
        Self {
            b0: 0.5,
            gamma: 0.5 * dt,
            b_max: 2.0,
            stride: 100,
            ema_time: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OnlineTrace {
    pub times: Vec<f64>,
    pub b_est: Vec<f64>,
    /// Moving average of B_est when requested, otherwise empty.
    pub b_smoothed: Vec<f64>,
    pub loglik: Vec<f64>,
    pub loglik_grad: Vec<f64>,
    /// tr[ρ_est Ĵ_x].
    pub jx: Vec<f64>,
    /// tr[ρ_est Ĵ_z].
    pub jz: Vec<f64>,
}

/// Simultaneous state and field update: each step replays dY with the Kraus
/// operator at B_est(t), then B_est ← clip(B_est + γ dl^B, 0, b_max).
pub fn online_estimate(
    record: &MeasurementRecord,
    ops: &CollectiveOps,
    initial: &DensityMatrix,
    options: OnlineOptions,
) -> Result<OnlineTrace> {
    check_dt(record.dt)?;
    let OnlineOptions { b0, gamma, b_max, stride, ema_time } = options;
    if !(b_max >= 0.0 && (0.0..=b_max).contains(&b0)) {
        return Err(Error::InvalidArgument(format!("need 0 ≤ b0 ≤ b_max, got b0 = {b0}, b_max = {b_max}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let dt = record.dt;
    let stride = stride.max(1);
    let k = record.len();
    let mut est = EstimatorState::new(initial.clone(), b0);
    let mut smooth = b0;
    let alpha = ema_time.map(|tc| (dt / tc).min(1.0));

    let mut out = OnlineTrace::default();
    let sample = |est: &EstimatorState, smooth: f64, t: f64, out: &mut OnlineTrace| {
        out.times.push(t);
        out.b_est.push(est.b_est);
        if alpha.is_some() {
            out.b_smoothed.push(smooth);
        }
        out.loglik.push(est.loglik);
        out.loglik_grad.push(est.loglik_grad);
        out.jx.push(est.rho.expectation(ops.jx()));
        out.jz.push(ops.mean_jz(est.rho.matrix()));
    };
    sample(&est, smooth, 0.0, &mut out);

    for (n, &dy) in record.increments.iter().enumerate() {
        let dl = loglik_step(&est.rho, ops, dy, dt);
        let dl_b = grad_loglik_step(&est, ops, dy, dt);
        let (rho, _, tau) = kraus_with_tau(&est, ops, dt, dy).map_err(|e| Error::at_step(n, e))?;
        est.rho = rho;
        est.tau = tau;
        est.loglik += dl;
        est.loglik_grad += dl_b;
        est.b_est = (est.b_est + gamma * dl_b).clamp(0.0, b_max);
        if let Some(a) = alpha {
            smooth += a * (est.b_est - smooth);
        }
        if (n + 1) % stride == 0 || n + 1 == k {
            sample(&est, smooth, (n + 1) as f64 * dt, &mut out);
        }
    }
    Ok(out)
}
