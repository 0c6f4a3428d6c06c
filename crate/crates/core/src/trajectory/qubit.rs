//! Single-qubit reductions: Bloch components (ρ_x, ρ_y, ρ_z), the polar form
//! ρ_x + iρ_z = r e^{iθ}, and the pure-state angular SDE.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spin::{CMatrix, CollectiveOps, DensityMatrix};
use crate::trajectory::noise::WienerRealization;

fn qubit_ops() -> &'static CollectiveOps {
    static OPS: OnceLock<CollectiveOps> = OnceLock::new();
    OPS.get_or_init(|| CollectiveOps::new(1).expect("one qubit"))
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        PI
    } else {
        t
    }
}

/// Geodesic distance on the circle, in [0, π].
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub rho_x: f64,
    pub rho_y: f64,
    pub rho_z: f64,
}

impl BlochState {
    pub fn new(rho_x: f64, rho_y: f64, rho_z: f64) -> Self {
        Self { rho_x, rho_y, rho_z }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.rho_x * self.rho_x + self.rho_y * self.rho_y + self.rho_z * self.rho_z
    }

    /// 1 − |ρ⃗|², zero for pure states.
    pub fn mixedness(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    pub fn is_physical(&self) -> bool {
        self.norm_sqr() <= 1.0 + 1e-9
    }

    pub fn distance(&self, other: &BlochState) -> f64 {
        ((self.rho_x - other.rho_x).powi(2)
            + (self.rho_y - other.rho_y).powi(2)
            + (self.rho_z - other.rho_z).powi(2))
        .sqrt()
    }

    /// ρ_α = 2 tr[ρ Ĵ_α] for a 2×2 density matrix.
    pub fn from_density(rho: &DensityMatrix) -> Self {
        let ops = qubit_ops();
        Self {
            rho_x: 2.0 * rho.expectation(ops.jx()),
            rho_y: 2.0 * rho.expectation(ops.jy()),
            rho_z: 2.0 * rho.expectation(ops.jz()),
        }
    }

    /// ρ = ½𝕀 + ρ_x Ĵ_x + ρ_y Ĵ_y + ρ_z Ĵ_z.
    pub fn to_density(&self) -> DensityMatrix {
        let ops = qubit_ops();
        let m: CMatrix = CMatrix::identity(2, 2) * Complex64::new(0.5, 0.0)
            + ops.jx() * Complex64::new(self.rho_x, 0.0)
            + ops.jy() * Complex64::new(self.rho_y, 0.0)
            + ops.jz() * Complex64::new(self.rho_z, 0.0);
        DensityMatrix::from_matrix_unchecked(m)
    }

    pub fn to_angular(&self) -> AngularState {
        AngularState {
            r: self.rho_x.hypot(self.rho_z),
            theta: self.rho_z.atan2(self.rho_x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularState {
    pub r: f64,
    pub theta: f64,
}

impl AngularState {
    pub fn new(r: f64, theta: f64) -> Self {
        Self {
            r,
            theta: wrap_angle(theta),
        }
    }

    /// ε = 1 − r².
    pub fn epsilon(&self) -> f64 {
        1.0 - self.r * self.r
    }

    /// (ρ_x, 0, ρ_z) with ρ_x + iρ_z = r e^{iθ}.
    pub fn to_bloch(&self) -> BlochState {
        BlochState::new(self.r * self.theta.cos(), 0.0, self.r * self.theta.sin())
    }
}

/// Component-form Euler update:
/// dρ_x = (−Bρ_z − ½ρ_x)dt − ρ_zρ_x dW,
/// dρ_y = −½ρ_y dt − ρ_zρ_y dW,
/// dρ_z = Bρ_x dt + (1 − ρ_z²)dW.
pub fn bloch_step(s: BlochState, b: f64, dt: f64, dw: f64) -> BlochState {
    let BlochState { rho_x, rho_y, rho_z } = s;
    BlochState {
        rho_x: rho_x + (-b * rho_z - 0.5 * rho_x) * dt - rho_z * rho_x * dw,
        rho_y: rho_y - 0.5 * rho_y * dt - rho_z * rho_y * dw,
        rho_z: rho_z + b * rho_x * dt + (1.0 - rho_z * rho_z) * dw,
    }
}

/// Drift and diffusion of (r, θ): returns ((μ_r, σ_r), (μ_θ, σ_θ)).
///
/// μ_θ = B + ¼ sin 2θ − ½ sin 2θ (1 − r²)/r². The last term is the Itô
/// correction from the curvature of atan2; it vanishes on pure states, where
/// the angular SDE dθ = (B + ¼ sin 2θ)dt + cos θ dW is recovered.
pub fn polar_coefficients(s: AngularState, b: f64) -> ((f64, f64), (f64, f64)) {
    let AngularState { r, theta } = s;
    let (sin, cos) = theta.sin_cos();
    let sin2 = (2.0 * theta).sin();
    let drift_r = -0.5 * cos * cos * (r - 1.0 / r);
    let diff_r = sin * (1.0 - r * r);
    let drift_theta = b + 0.25 * sin2 - 0.5 * sin2 * (1.0 - r * r) / (r * r);
    let diff_theta = cos / r;
    ((drift_r, diff_r), (drift_theta, diff_theta))
}

/// Smallest radius for which θ is considered well defined.
pub const MIN_RADIUS: f64 = 1e-12;

/// Euler update of the polar SDE. At r = 1 both radial terms vanish exactly,
/// so pure states stay pure to the last bit.
pub fn polar_step(s: AngularState, b: f64, dt: f64, dw: f64) -> Result<AngularState> {
    if !(s.r >= MIN_RADIUS) {
        return Err(Error::DegenerateRadius { r: s.r });
    }
    let ((mu_r, sig_r), (mu_t, sig_t)) = polar_coefficients(s, b);
    Ok(AngularState {
        r: s.r + mu_r * dt + sig_r * dw,
        theta: wrap_angle(s.theta + mu_t * dt + sig_t * dw),
    })
}

/// dθ = (B + ¼ sin 2θ)dt + cos θ dW, wrapped into (−π, π].
pub fn angular_step(theta: f64, b: f64, dt: f64, dw: f64) -> f64 {
    wrap_angle(theta + (b + 0.25 * (2.0 * theta).sin()) * dt + theta.cos() * dw)
}

/// Bloch path sampled every `stride` steps; the final state is always included.
pub fn integrate_bloch(
    initial: BlochState,
    b: f64,
    noise: &WienerRealization,
    stride: usize,
) -> Vec<BlochState> {
    let stride = stride.max(1);
    let mut out = vec![initial];
    let mut s = initial;
    let k = noise.len();
    for (n, &dw) in noise.increments.iter().enumerate() {
        s = bloch_step(s, b, noise.dt, dw);
        if (n + 1) % stride == 0 || n + 1 == k {
            out.push(s);
        }
    }
    out
}

pub fn integrate_polar(
    initial: AngularState,
    b: f64,
    noise: &WienerRealization,
    stride: usize,
) -> Result<Vec<AngularState>> {
    let stride = stride.max(1);
    let mut out = vec![initial];
    let mut s = initial;
    let k = noise.len();
    for (n, &dw) in noise.increments.iter().enumerate() {
        s = polar_step(s, b, noise.dt, dw).map_err(|e| Error::at_step(n, e))?;
        if (n + 1) % stride == 0 || n + 1 == k {
            out.push(s);
        }
    }
    Ok(out)
}

pub fn integrate_angular(theta0: f64, b: f64, noise: &WienerRealization, stride: usize) -> Vec<f64> {
    let stride = stride.max(1);
    let mut out = vec![wrap_angle(theta0)];
    let mut t = wrap_angle(theta0);
    let k = noise.len();
    for (n, &dw) in noise.increments.iter().enumerate() {
        t = angular_step(t, b, noise.dt, dw);
        if (n + 1) % stride == 0 || n + 1 == k {
            out.push(t);
        }
    }
    out
}
