//! Dense complex matrices on n qubits and the Hermitian-eigendecomposition
//! machinery used to turn generators into unitaries.
//!
//! Every operator in this crate is a dense `2^n x 2^n` complex matrix; the
//! largest space is 8 qubits (dim 256), so dense storage plus LAPACK `eigh`
//! is fast enough for everything including the Monte-Carlo sweeps.

use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::error::Error;

pub type CMat = Array2<Complex64>;

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

/// Frobenius norm.
pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry magnitude (max-norm).
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `‖AB − BA‖` in max-norm.
pub fn commutator_max_norm(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a.dot(b) - b.dot(a)))
}

/// Deviation from the Hermitian property, `‖A − A†‖` in max-norm.
pub fn hermiticity_error(a: &CMat) -> f64 {
    max_abs(&(a - &dagger(a)))
}

/// Deviation from unitarity, `‖U†U − I‖_F`.
pub fn unitarity_error(u: &CMat) -> f64 {
    let n = u.nrows();
    let mut g = dagger(u).dot(u);
    for i in 0..n {
        g[[i, i]] -= Complex64::new(1.0, 0.0);
    }
    fro_norm(&g)
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and the
/// matrix whose columns are the corresponding orthonormal eigenvectors.
///
/// The input is copied into column-major order before the LAPACK call:
/// `eigh` handed a row-major complex matrix diagonalizes its transpose
/// (i.e. the conjugate), silently conjugating every eigenvector.
pub fn herm_eig(h: &CMat) -> Result<(Array1<f64>, CMat), Error> {
    let n = h.nrows();
    let mut h_f = CMat::zeros((n, n).f());
    h_f.assign(h);
    let (vals, vecs) = h_f.eigh(UPLO::Lower).map_err(Error::Linalg)?;
    Ok((vals, vecs))
}

/// `exp(−i H θ)` for Hermitian `H`, via eigendecomposition.
///
/// The result is unitary to round-off by construction. Hermiticity is the
/// caller's contract; use [`hermiticity_error`] to enforce it where the
/// input is untrusted.
pub fn expm_herm(h: &CMat, theta: f64) -> Result<CMat, Error> {
    Ok(HermPropagator::new(h)?.evolve(theta))
}

/// A Hermitian generator pre-diagonalized so that `exp(−i H θ)` costs two
/// matrix multiplications per call.
///
/// The pulse-sequence search and the coupling-noise sweeps evaluate the same
/// generators at many different phases; diagonalizing each generator once
/// dominates nothing, while per-phase `eigh` would dominate everything.
#[derive(Debug, Clone)]
pub struct HermPropagator {
    eigvals: Array1<f64>,
    eigvecs: CMat,
}

impl HermPropagator {
    pub fn new(h: &CMat) -> Result<Self, Error> {
        let (eigvals, eigvecs) = herm_eig(h)?;
        Ok(Self { eigvals, eigvecs })
    }

    /// `V · diag(e^{−i λ θ}) · V†`.
    pub fn evolve(&self, theta: f64) -> CMat {
        let phases = self.eigvals.mapv(|l| Complex64::from_polar(1.0, -l * theta));
        // Scale columns of V by the phases, then multiply by V†.
        let mut scaled = self.eigvecs.clone();
        for (mut col, ph) in scaled.columns_mut().into_iter().zip(phases.iter()) {
            col.mapv_inplace(|z| z * ph);
        }
        scaled.dot(&dagger(&self.eigvecs))
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigvals
    }
}

/// Kronecker product; the left factor takes the more significant index
/// block.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMat::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij.norm_sqr() == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Cluster ascending eigenvalues into (value, multiplicity) groups, merging
/// values closer than `tol`.
pub fn cluster_eigenvalues(vals: &Array1<f64>, tol: f64) -> Vec<(f64, usize)> {
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for &v in vals.iter() {
        match groups.last_mut() {
            Some((rep, count)) if (v - *rep).abs() < tol => {
                // Running mean keeps the representative centred on the cluster.
                *rep = (*rep * *count as f64 + v) / (*count as f64 + 1.0);
                *count += 1;
            }
            _ => groups.push((v, 1)),
        }
    }
    groups
}

/// A dense Hermitian or unitary operator on `n` qubits (dim = 2^n).
///
/// Site 1 is the most significant bit of the computational-basis index, and
/// this convention is shared by every module in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    qubits: usize,
    matrix: CMat,
}

impl Operator {
    /// Wrap a matrix, checking that it is square with dimension `2^qubits`.
    pub fn new(qubits: usize, matrix: CMat) -> Result<Self, Error> {
        let dim = 1usize << qubits;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: matrix.nrows(),
            });
        }
        Ok(Self { qubits, matrix })
    }

    pub fn zeros(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        Self {
            qubits,
            matrix: CMat::zeros((dim, dim)),
        }
    }

    pub fn identity(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        Self {
            qubits,
            matrix: CMat::eye(dim),
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self {
            qubits: self.qubits,
            matrix: dagger(&self.matrix),
        }
    }

    /// Matrix product `self · rhs`.
    pub fn compose(&self, rhs: &Self) -> Result<Self, Error> {
        if self.qubits != rhs.qubits {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: rhs.dim(),
            });
        }
        Ok(Self {
            qubits: self.qubits,
            matrix: self.matrix.dot(&rhs.matrix),
        })
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            qubits: self.qubits,
            matrix: self.matrix.mapv(|z| z * factor),
        }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, Error> {
        if self.qubits != rhs.qubits {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: rhs.dim(),
            });
        }
        Ok(Self {
            qubits: self.qubits,
            matrix: &self.matrix + &rhs.matrix,
        })
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    pub fn unitarity_error(&self) -> f64 {
        unitarity_error(&self.matrix)
    }

    /// `exp(−i H θ)` where `H` is this operator; errors if the operator is
    /// not Hermitian to within `1e-12` in max-norm.
    pub fn evolve(&self, theta: f64) -> Result<Self, Error> {
        let herm_err = self.hermiticity_error();
        if herm_err > 1e-12 {
            return Err(Error::NotHermitian { residual: herm_err });
        }
        Ok(Self {
            qubits: self.qubits,
            matrix: expm_herm(&self.matrix, theta)?,
        })
    }

    /// Ascending eigenvalues of a Hermitian operator.
    pub fn eigenvalues(&self) -> Result<Array1<f64>, Error> {
        let herm_err = self.hermiticity_error();
        if herm_err > 1e-12 {
            return Err(Error::NotHermitian { residual: herm_err });
        }
        Ok(herm_eig(&self.matrix)?.0)
    }
}
