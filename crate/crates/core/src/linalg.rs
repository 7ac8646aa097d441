//! Dense complex linear algebra used by the model and surrogate builders.
//!
//! Matrices are `nalgebra` dense matrices over `Complex<f64>`. Vectorization is
//! column stacking, which is also nalgebra's storage order.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use thiserror::Error;

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;
/// A complex matrix that callers promise is Hermitian (A = A^H).
pub type HermitianMatrix = DMatrix<C64>;

pub const POWER_ITER_MAX: usize = 200;
pub const POWER_ITER_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("length {len} does not match {rows}x{cols}")]
    LengthMismatch {
        len: usize,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is empty")]
    Empty,
}

/// How a principal eigenpair was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    PowerIteration,
    DenseFallback,
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: ComplexVector,
    pub method: EigenMethod,
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn hadamard(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    if a.shape() != b.shape() {
        return Err(LinalgError::DimensionMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(a.component_mul(b))
}

/// Column-stacking vectorization.
pub fn vec(m: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &ComplexVector, rows: usize, cols: usize) -> Result<ComplexMatrix, LinalgError> {
    if v.len() != rows * cols {
        return Err(LinalgError::LengthMismatch {
            len: v.len(),
            rows,
            cols,
        });
    }
    Ok(ComplexMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// (A + A^H) / 2.
pub fn hermitian_part(a: &ComplexMatrix) -> HermitianMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Real quadratic form x^H A x for Hermitian A. Taking the real part equals
/// evaluating with the Hermitian part of A.
pub fn quad_form(a: &HermitianMatrix, x: &ComplexVector) -> f64 {
    x.dotc(&(a * x)).re
}

/// Largest eigenvalue/eigenvector of a Hermitian PSD matrix by power iteration,
/// falling back to a dense eigendecomposition when iteration stalls.
pub fn principal_eigenpair(a: &HermitianMatrix, tol: f64) -> Result<EigenPair, LinalgError> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(if n == 0 {
            LinalgError::Empty
        } else {
            LinalgError::DimensionMismatch {
                left: a.shape(),
                right: (n, n),
            }
        });
    }
    let norm = a.norm();
    if norm == 0.0 {
        let mut v = ComplexVector::zeros(n);
        v[0] = C64::new(1.0, 0.0);
        return Ok(EigenPair {
            value: 0.0,
            vector: v,
            method: EigenMethod::PowerIteration,
        });
    }
    // Deterministic start with distinct entries so it is unlikely to be
    // orthogonal to the dominant eigenvector.
    let mut v = ComplexVector::from_fn(n, |i, _| C64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64));
    v /= C64::from(v.norm());
    for _ in 0..POWER_ITER_MAX {
        let w = a * &v;
        let wn = w.norm();
        if wn == 0.0 {
            break;
        }
        v = w / C64::from(wn);
        let av = a * &v;
        let lambda = v.dotc(&av).re;
        let resid = (&av - &v * C64::from(lambda)).norm();
        if resid <= tol * norm {
            return Ok(EigenPair {
                value: lambda,
                vector: v,
                method: EigenMethod::PowerIteration,
            });
        }
    }
    let (value, vector) = dense_principal(a);
    Ok(EigenPair {
        value,
        vector,
        method: EigenMethod::DenseFallback,
    })
}

/// Largest eigenvalue and eigenvector from a full Hermitian eigendecomposition.
pub fn dense_principal(a: &HermitianMatrix) -> (f64, ComplexVector) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let (idx, val) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
    (val, eig.eigenvectors.column(idx).into_owned())
}

pub fn eigenvalues_hermitian(a: &HermitianMatrix) -> DVector<f64> {
    SymmetricEigen::new(hermitian_part(a)).eigenvalues
}

pub fn max_eigenvalue(a: &HermitianMatrix) -> f64 {
    eigenvalues_hermitian(a).max()
}

pub fn min_eigenvalue(a: &HermitianMatrix) -> f64 {
    eigenvalues_hermitian(a).min()
}

/// Largest eigenvalue of the product `a * b` for PSD `a`, `b`, computed as the
/// largest eigenvalue of the similar Hermitian matrix a^{1/2} b a^{1/2}.
pub fn max_eig_product(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64, LinalgError> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(LinalgError::DimensionMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    if a.nrows() == 0 {
        return Err(LinalgError::Empty);
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let sqrt_vals = eig.eigenvalues.map(|l| C64::from(l.max(0.0).sqrt()));
    let v = &eig.eigenvectors;
    let root = v * ComplexMatrix::from_diagonal(&sqrt_vals) * v.adjoint();
    let sym = &root * b * &root;
    Ok(max_eigenvalue(&sym))
}

/// Largest eigenvalue of the pencil (a, b) for Hermitian `a` and positive
/// definite `b`, i.e. max x^H a x / x^H b x. `None` when `b` is not PD.
pub fn max_generalized_eigenvalue(a: &HermitianMatrix, b: &HermitianMatrix) -> Option<f64> {
    let l = b.clone().cholesky()?.unpack();
    let y = l.solve_lower_triangular(a)?;
    let z = l.solve_lower_triangular(&y.adjoint())?;
    Some(max_eigenvalue(&hermitian_part(&z)))
}

/// Interleaved real view of a complex vector: [re0, im0, re1, im1, ...].
pub fn to_real(x: &ComplexVector) -> Vec<f64> {
    x.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn from_real(z: &[f64]) -> ComplexVector {
    ComplexVector::from_iterator(z.len() / 2, z.chunks_exact(2).map(|p| C64::new(p[0], p[1])))
}

/// Real symmetric R with x^H A x = z^T R z for Hermitian A and z = to_real(x).
pub fn real_composite(a: &HermitianMatrix) -> DMatrix<f64> {
    let n = a.nrows();
    let h = hermitian_part(a);
    let mut r = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let v = h[(i, j)];
            r[(2 * i, 2 * j)] = v.re;
            r[(2 * i, 2 * j + 1)] = -v.im;
            r[(2 * i + 1, 2 * j)] = v.im;
            r[(2 * i + 1, 2 * j + 1)] = v.re;
        }
    }
    r
}

/// Rows/columns (i*m + i) of an m^2 x m^2 matrix, i.e. the entries that survive
/// when the vectorized operand is vec(Diag(theta)).
pub fn restrict_to_diagonal_support(a: &ComplexMatrix, m: usize) -> ComplexMatrix {
    assert_eq!(a.nrows(), m * m);
    ComplexMatrix::from_fn(m, m, |i, j| a[(i * m + i, j * m + j)])
}

/// vec(Diag(theta)).
pub fn vec_diag(theta: &ComplexVector) -> ComplexVector {
    vec(&ComplexMatrix::from_diagonal(theta))
}

pub fn outer(x: &ComplexVector, y: &ComplexVector) -> ComplexMatrix {
    x * y.adjoint()
}
