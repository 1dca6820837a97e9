//! Dense complex linear algebra on small tensor-factored Hilbert spaces:
//! kets, operators, density matrices, tensor products, partial traces and
//! purity.
//!
//! Every value carries its list of subsystem dimensions. The flat index
//! convention is fixed once for the whole crate: the leftmost factor is the
//! slowest-varying one, `index = sum_k i_k * prod_{j>k} d_j`, which is the
//! ordinary Kronecker-product layout. All values are immutable after
//! construction and safe to share across threads.

pub mod random;
pub mod textmat;

pub(crate) mod index;

pub(crate) use index::strides as factor_strides;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Absolute tolerance for entry-wise residuals (norms, traces, Hermiticity).
pub const ENTRY_TOL: f64 = 1e-12;
/// Eigenvalues below `-EIGEN_TOL` disqualify a candidate density matrix.
pub const EIGEN_TOL: f64 = 1e-10;
/// Squared norms / outcome weights at or below this are treated as an
/// annihilated state (conditioning on a practically impossible outcome).
pub const ANNIHILATION_TOL: f64 = 1e-14;
/// Dense-storage cap on the total Hilbert-space dimension.
pub const MAX_DIM: usize = 4096;

#[derive(Debug, Error)]
pub enum QStateError {
    #[error("dims must be a non-empty list of positive factors")]
    EmptyDims,
    #[error("total dimension {0} exceeds the dense-storage cap {MAX_DIM}")]
    DimensionCap(usize),
    #[error("amplitude count {found} does not match dims product {expected}")]
    AmplitudeCount { expected: usize, found: usize },
    #[error("matrix is {rows}x{cols}, expected square of side {side}")]
    MatrixShape {
        rows: usize,
        cols: usize,
        side: usize,
    },
    #[error("non-finite entry at position {0}")]
    NonFinite(usize),
    #[error("annihilated state: squared norm {0:e} is below threshold")]
    AnnihilatedState(f64),
    #[error("hermitian residual {0:.6}")]
    HermitianResidual(f64),
    #[error("trace residual {0:.6}")]
    TraceResidual(f64),
    #[error("negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),
    #[error("keep set must be a non-empty subset of the {nfactors} factor indices")]
    InvalidKeep { nfactors: usize },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("basis index {index} out of range for factor of dimension {dim}")]
    BasisIndex { index: usize, dim: usize },
}

fn check_dims(dims: &[usize]) -> Result<usize, QStateError> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(QStateError::EmptyDims);
    }
    let total: usize = dims.iter().product();
    if total > MAX_DIM {
        return Err(QStateError::DimensionCap(total));
    }
    Ok(total)
}

/// Largest entry-wise distance between two equally sized matrices.
pub fn entrywise_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "entrywise_distance shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// A pure state: complex amplitudes over a tensor-factored basis.
#[derive(Debug, Clone)]
pub struct Ket {
    dims: Vec<usize>,
    amps: DVector<Complex64>,
}

impl Ket {
    /// Builds a ket from raw amplitudes. The amplitude count must match the
    /// product of `dims`; no normalization is applied.
    pub fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self, QStateError> {
        let total = check_dims(&dims)?;
        if amps.len() != total {
            return Err(QStateError::AmplitudeCount {
                expected: total,
                found: amps.len(),
            });
        }
        if let Some(pos) = amps
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(QStateError::NonFinite(pos));
        }
        Ok(Self {
            dims,
            amps: DVector::from_vec(amps),
        })
    }

    /// The computational basis state `|i_0 i_1 ...>` for the given factor
    /// indices.
    pub fn basis(dims: Vec<usize>, indices: &[usize]) -> Result<Self, QStateError> {
        let total = check_dims(&dims)?;
        if indices.len() != dims.len() {
            return Err(QStateError::DimMismatch(format!(
                "{} basis indices for {} factors",
                indices.len(),
                dims.len()
            )));
        }
        for (&i, &d) in indices.iter().zip(dims.iter()) {
            if i >= d {
                return Err(QStateError::BasisIndex { index: i, dim: d });
            }
        }
        let strides = index::strides(&dims);
        let flat = index::compose(indices, &strides);
        let mut amps = vec![Complex64::new(0.0, 0.0); total];
        amps[flat] = Complex64::new(1.0, 0.0);
        Ok(Self {
            dims,
            amps: DVector::from_vec(amps),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total Hilbert-space dimension (product of the factor dims).
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn amplitude(&self, i: usize) -> Complex64 {
        self.amps[i]
    }

    /// Euclidean norm of the amplitude vector.
    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// Inner product `<self|other>` (conjugate-linear in `self`).
    pub fn inner(&self, other: &Ket) -> Result<Complex64, QStateError> {
        if self.dims != other.dims {
            return Err(QStateError::DimMismatch(format!(
                "inner product between dims {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self.amps.dotc(&other.amps))
    }

    /// Returns the unit-norm ket pointing in the same direction.
    ///
    /// Fails with [`QStateError::AnnihilatedState`] when the squared norm is
    /// at or below [`ANNIHILATION_TOL`], which signals conditioning on a
    /// practically impossible outcome.
    pub fn normalized(&self) -> Result<Self, QStateError> {
        let n2 = self.amps.norm_squared();
        if n2 <= ANNIHILATION_TOL {
            return Err(QStateError::AnnihilatedState(n2));
        }
        let inv = Complex64::new(1.0 / n2.sqrt(), 0.0);
        Ok(Self {
            dims: self.dims.clone(),
            amps: &self.amps * inv,
        })
    }

    /// Kronecker composition; the result's factor list is the concatenation
    /// of both operands' factor lists.
    pub fn tensor(&self, other: &Ket) -> Result<Self, QStateError> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        check_dims(&dims)?;
        Ok(Self {
            dims,
            amps: self.amps.kronecker(&other.amps),
        })
    }

    /// The projector `|self><self|` as a density matrix; the ket must be
    /// normalized for the trace check to pass.
    pub fn density(&self) -> Result<DensityMatrix, QStateError> {
        let outer = &self.amps * self.amps.adjoint();
        DensityMatrix::new(self.dims.clone(), outer)
    }

    /// Reduced density matrix over the kept factors, contracting the rest.
    /// Equivalent to `self.density()?.partial_trace(keep)` without forming
    /// the full outer product.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityMatrix, QStateError> {
        let plan = index::ContractionPlan::new(&self.dims, keep)?;
        let kdim = plan.kept_dim();
        let mut out = DMatrix::from_element(kdim, kdim, Complex64::new(0.0, 0.0));
        for a in 0..kdim {
            for b in 0..kdim {
                let mut acc = Complex64::new(0.0, 0.0);
                for &t in plan.traced_offsets() {
                    acc += self.amps[plan.kept_offsets()[a] + t]
                        * self.amps[plan.kept_offsets()[b] + t].conj();
                }
                out[(a, b)] = acc;
            }
        }
        DensityMatrix::new(plan.kept_dims().to_vec(), out)
    }
}

/// A linear operator on a tensor-factored space.
#[derive(Debug, Clone)]
pub struct Operator {
    dims: Vec<usize>,
    mat: DMatrix<Complex64>,
}

impl Operator {
    pub fn new(dims: Vec<usize>, mat: DMatrix<Complex64>) -> Result<Self, QStateError> {
        let total = check_dims(&dims)?;
        if mat.nrows() != total || mat.ncols() != total {
            return Err(QStateError::MatrixShape {
                rows: mat.nrows(),
                cols: mat.ncols(),
                side: total,
            });
        }
        if let Some(pos) = mat
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(QStateError::NonFinite(pos));
        }
        Ok(Self { dims, mat })
    }

    pub fn identity(dims: Vec<usize>) -> Result<Self, QStateError> {
        let total = check_dims(&dims)?;
        Ok(Self {
            dims,
            mat: DMatrix::identity(total, total),
        })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self, QStateError> {
        let total = check_dims(&dims)?;
        Ok(Self {
            dims,
            mat: DMatrix::from_element(total, total, Complex64::new(0.0, 0.0)),
        })
    }

    /// Rank-one projector `|psi><psi|`. Idempotent only when `psi` is
    /// normalized.
    pub fn projector(psi: &Ket) -> Self {
        Self {
            dims: psi.dims.to_vec(),
            mat: &psi.amps * psi.amps.adjoint(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            mat: self.mat.adjoint(),
        }
    }

    /// Largest entry-wise deviation from `A = A^dagger`.
    pub fn hermitian_residual(&self) -> f64 {
        hermitian_residual(&self.mat)
    }

    pub fn apply(&self, psi: &Ket) -> Result<Ket, QStateError> {
        if self.dims != psi.dims {
            return Err(QStateError::DimMismatch(format!(
                "operator dims {:?} applied to ket dims {:?}",
                self.dims, psi.dims
            )));
        }
        Ok(Ket {
            dims: psi.dims.clone(),
            amps: &self.mat * &psi.amps,
        })
    }

    pub fn tensor(&self, other: &Operator) -> Result<Self, QStateError> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        check_dims(&dims)?;
        Ok(Self {
            dims,
            mat: self.mat.kronecker(&other.mat),
        })
    }
}

fn hermitian_residual(mat: &DMatrix<Complex64>) -> f64 {
    let n = mat.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A positive, unit-trace operator describing a (possibly mixed) state.
///
/// Construction validates Hermiticity and trace to [`ENTRY_TOL`] and checks
/// that no eigenvalue lies below `-`[`EIGEN_TOL`] with a dense Hermitian
/// eigensolver.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(dims: Vec<usize>, mat: DMatrix<Complex64>) -> Result<Self, QStateError> {
        let total = check_dims(&dims)?;
        if mat.nrows() != total || mat.ncols() != total {
            return Err(QStateError::MatrixShape {
                rows: mat.nrows(),
                cols: mat.ncols(),
                side: total,
            });
        }
        if let Some(pos) = mat
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(QStateError::NonFinite(pos));
        }
        let herm = hermitian_residual(&mat);
        if herm > ENTRY_TOL {
            return Err(QStateError::HermitianResidual(herm));
        }
        let tr = mat.trace();
        let tr_res = (tr - Complex64::new(1.0, 0.0)).norm();
        if tr_res > ENTRY_TOL {
            return Err(QStateError::TraceResidual(tr_res));
        }
        if let Some(lo) = mat.symmetric_eigenvalues().iter().cloned().reduce(f64::min) {
            if lo < -EIGEN_TOL {
                return Err(QStateError::NegativeEigenvalue(lo));
            }
        }
        Ok(Self { dims, mat })
    }

    pub fn from_pure(psi: &Ket) -> Result<Self, QStateError> {
        psi.density()
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self, QStateError> {
        let total = check_dims(&dims)?;
        let mat = DMatrix::identity(total, total) * Complex64::new(1.0 / total as f64, 0.0);
        Ok(Self { dims, mat })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// Scalar trace. Tracing out *all* factors is exposed here rather than
    /// through [`DensityMatrix::partial_trace`].
    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// `Tr(rho^2)`, computed as the squared Frobenius norm (exact for
    /// Hermitian matrices). Lies in `[1/dim, 1]` for valid states.
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Ascending eigenvalues of the state (real, since the matrix is
    /// Hermitian by construction).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.mat.symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Traces out every factor not listed in `keep`; the result keeps the
    /// surviving factors in their original order. `keep` must be a non-empty
    /// subset of the factor indices.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix, QStateError> {
        let plan = index::ContractionPlan::new(&self.dims, keep)?;
        let kdim = plan.kept_dim();
        let mut out = DMatrix::from_element(kdim, kdim, Complex64::new(0.0, 0.0));
        for a in 0..kdim {
            for b in 0..kdim {
                let mut acc = Complex64::new(0.0, 0.0);
                for &t in plan.traced_offsets() {
                    acc += self.mat[(plan.kept_offsets()[a] + t, plan.kept_offsets()[b] + t)];
                }
                out[(a, b)] = acc;
            }
        }
        DensityMatrix::new(plan.kept_dims().to_vec(), out)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self, QStateError> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        check_dims(&dims)?;
        DensityMatrix::new(dims, self.mat.kronecker(&other.mat))
    }
}

/// `Tr(A rho)`. Real to within [`ENTRY_TOL`] whenever `A` is Hermitian.
pub fn expectation(op: &Operator, rho: &DensityMatrix) -> Result<Complex64, QStateError> {
    if op.dims() != rho.dims() {
        return Err(QStateError::DimMismatch(format!(
            "expectation of operator dims {:?} on state dims {:?}",
            op.dims(),
            rho.dims()
        )));
    }
    let n = rho.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += op.matrix()[(i, j)] * rho.matrix()[(j, i)];
        }
    }
    Ok(acc)
}

/// Pauli X on a single qubit factor.
pub fn pauli_x() -> Operator {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    Operator::new(vec![2], DMatrix::from_row_slice(2, 2, &[z, one, one, z])).unwrap()
}

/// Pauli Y on a single qubit factor.
pub fn pauli_y() -> Operator {
    let z = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    Operator::new(vec![2], DMatrix::from_row_slice(2, 2, &[z, -i, i, z])).unwrap()
}

/// Pauli Z on a single qubit factor.
pub fn pauli_z() -> Operator {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    Operator::new(vec![2], DMatrix::from_row_slice(2, 2, &[one, z, z, -one])).unwrap()
}
