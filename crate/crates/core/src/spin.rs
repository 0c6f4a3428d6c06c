//! Collective spin operators and density matrices on the Dicke subspace.
//!
//! All N-qubit states considered here are symmetric, so they live in the
//! spin-J irrep with J = N/2 and dimension N+1. The basis is ordered by the
//! Ĵ_z eigenvalue m = −J, −J+1, …, J.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on ‖ρ − ρ†‖_max.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on |tr ρ − 1|.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted as positive semidefinite.
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Ĵ_x, Ĵ_y, Ĵ_z for N qubits restricted to the J = N/2 irrep (ħ = 1).
#[derive(Debug, Clone)]
pub struct CollectiveOps {
    n_qubits: usize,
    jx: CMatrix,
    jy: CMatrix,
    jz: CMatrix,
    jz_sq: CMatrix,
    m_values: Vec<f64>,
}

impl CollectiveOps {
    /// Ladder-operator construction: Ĵ₊|m⟩ = √(J(J+1) − m(m+1)) |m+1⟩.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument(
                "number of qubits must be at least 1".into(),
            ));
        }
        let dim = n_qubits + 1;
        let j = n_qubits as f64 / 2.0;
        let m_values: Vec<f64> = (0..dim).map(|k| -j + k as f64).collect();

        let mut jplus = CMatrix::zeros(dim, dim);
        for k in 0..dim - 1 {
            let m = m_values[k];
            jplus[(k + 1, k)] = Complex64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
        let jminus = jplus.adjoint();
        let jx = (&jplus + &jminus).map(|z| z * 0.5);
        let jy = (&jplus - &jminus).map(|z| z / (2.0 * I));
        let jz = CMatrix::from_diagonal(&DVector::from_iterator(
            dim,
            m_values.iter().map(|&m| Complex64::new(m, 0.0)),
        ));
        let jz_sq = CMatrix::from_diagonal(&DVector::from_iterator(
            dim,
            m_values.iter().map(|&m| Complex64::new(m * m, 0.0)),
        ));

        Ok(Self {
            n_qubits,
            jx,
            jy,
            jz,
            jz_sq,
            m_values,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Hilbert-space dimension N+1.
    pub fn dim(&self) -> usize {
        self.n_qubits + 1
    }

    /// Total spin J = N/2.
    pub fn spin(&self) -> f64 {
        self.n_qubits as f64 / 2.0
    }

    pub fn jx(&self) -> &CMatrix {
        &self.jx
    }

    pub fn jy(&self) -> &CMatrix {
        &self.jy
    }

    pub fn jz(&self) -> &CMatrix {
        &self.jz
    }

    pub fn jz_squared(&self) -> &CMatrix {
        &self.jz_sq
    }

    /// Diagonal of Ĵ_z, i.e. m = −J..J.
    pub fn m_values(&self) -> &[f64] {
        &self.m_values
    }

    /// tr[ρ Ĵ_z] using the diagonal structure of Ĵ_z.
    pub fn mean_jz(&self, rho: &CMatrix) -> f64 {
        self.m_values
            .iter()
            .enumerate()
            .map(|(k, &m)| m * rho[(k, k)].re)
            .sum()
    }

    /// ‖[Ĵ_x, Ĵ_y] − iĴ_z‖_max.
    pub fn commutator_residual(&self) -> f64 {
        let comm = &self.jx * &self.jy - &self.jy * &self.jx;
        max_abs(&(comm - self.jz.map(|z| z * I)))
    }

    /// ‖Ĵ_x² + Ĵ_y² + Ĵ_z² − J(J+1)𝕀‖_max.
    pub fn casimir_residual(&self) -> f64 {
        let j = self.spin();
        let casimir = &self.jx * &self.jx + &self.jy * &self.jy + &self.jz_sq;
        let target = CMatrix::identity(self.dim(), self.dim()) * Complex64::new(j * (j + 1.0), 0.0);
        max_abs(&(casimir - target))
    }

    /// Largest Hermiticity defect among the three operators.
    pub fn hermiticity_residual(&self) -> f64 {
        [&self.jx, &self.jy, &self.jz]
            .iter()
            .map(|op| max_abs(&(*op - op.adjoint())))
            .fold(0.0, f64::max)
    }
}

pub fn build_collective_ops(n_qubits: usize) -> Result<CollectiveOps> {
    CollectiveOps::new(n_qubits)
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermitian, unit-trace, positive semidefinite matrix on the Dicke subspace.
///
/// [`DensityMatrix::new`] validates all three properties. Integrators that do
/// not preserve positivity (the Euler form) build values through
/// [`DensityMatrix::from_matrix_unchecked`]; call [`DensityMatrix::validate`]
/// on those if the invariants matter.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let rho = Self(matrix);
        rho.validate()?;
        Ok(rho)
    }

    pub fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self(matrix)
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) state vector.
    pub fn from_pure(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let psi = psi / Complex64::new(norm, 0.0);
        Ok(Self(&psi * psi.adjoint()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Re tr[ρ A].
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                acc += (self.0[(i, k)] * op[(k, i)]).re;
            }
        }
        acc
    }

    /// tr[ρ²], computed as Σ|ρ_ij|² (exact for Hermitian ρ).
    pub fn purity(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.0 - self.0.adjoint()))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = hermitize(&self.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Checks Hermiticity, unit trace and positivity against the crate tolerances.
    pub fn validate(&self) -> Result<()> {
        if self.0.nrows() != self.0.ncols() || self.0.nrows() == 0 {
            return Err(Error::InvalidState("matrix is not square".into()));
        }
        let herm = self.hermiticity_error();
        if !(herm <= HERMITIAN_TOL) {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = self.trace();
        if !((tr.re - 1.0).abs() <= TRACE_TOL && tr.im.abs() <= TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if !(min >= -POSITIVITY_TOL) {
            return Err(Error::NegativeEigenvalue { min_eigenvalue: min });
        }
        Ok(())
    }

    /// Σ_ij |ρ₁,ij − ρ₂,ij|.
    pub fn l1_distance(&self, other: &DensityMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .sum()
    }
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Maximum-eigenvalue eigenstate of Ĵ_x (spin-coherent state along +x).
///
/// In the ladder basis its amplitudes are √(C(N,k)/2^N), which is the
/// rotation of |J, J⟩ by π/2 about y.
pub fn coherent_state_x(ops: &CollectiveOps) -> DensityMatrix {
    let n = ops.n_qubits();
    // log C(N,k) accumulated incrementally so N = 200 stays well inside f64
    let mut log_binom = 0.0;
    let mut amps = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            log_binom += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        amps.push(Complex64::new(
            (0.5 * (log_binom - n as f64 * std::f64::consts::LN_2)).exp(),
            0.0,
        ));
    }
    let psi = DVector::from_vec(amps);
    DensityMatrix::from_pure(&psi).expect("coherent amplitudes are nonzero")
}

/// 𝕀/(N+1) on the Dicke subspace.
pub fn max_entropy_state(ops: &CollectiveOps) -> DensityMatrix {
    let d = ops.dim();
    DensityMatrix(CMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0))
}

/// Jz eigenstate |m⟩⟨m| with m = −J + index.
pub fn jz_eigenstate(ops: &CollectiveOps, index: usize) -> Result<DensityMatrix> {
    if index >= ops.dim() {
        return Err(Error::InvalidArgument(format!(
            "eigenstate index {index} outside dimension {}",
            ops.dim()
        )));
    }
    let mut m = CMatrix::zeros(ops.dim(), ops.dim());
    m[(index, index)] = ONE;
    Ok(DensityMatrix(m))
}
