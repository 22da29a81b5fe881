//! Small shared helpers over `nalgebra` complex matrices.
//!
//! Everything here belongs to the main numerical path. The [`crate::oracle`]
//! module intentionally avoids these helpers and re-implements its own dense
//! kernels so that oracle agreement is evidence rather than tautology.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Condition-estimate threshold beyond which a linear system is rejected.
pub const COND_LIMIT: f64 = 1e12;

/// 2-norm condition number from a full SVD. Intended for matrices that are
/// factored once per assembly, not for per-element inner loops.
pub fn svd_condition(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Cheap near-singularity proxy for an LU factorization: the ratio of the
/// largest to smallest magnitude on the diagonal of U. This is not a true
/// condition number but reliably flags the blow-ups we must refuse.
pub fn lu_diag_condition(lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let u = lu.u();
    let n = u.nrows().min(u.ncols());
    if n == 0 {
        return 1.0;
    }
    let mut max = 0.0_f64;
    let mut min = f64::INFINITY;
    for i in 0..n {
        let m = u[(i, i)].norm();
        max = max.max(m);
        min = min.min(m);
    }
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solve `A X = B` through an LU factorization, refusing ill-conditioned
/// systems instead of returning garbage.
pub fn solve(a: &CMatrix, b: &CMatrix, name: &str) -> Result<CMatrix> {
    if a.nrows() == 0 {
        return Ok(CMatrix::zeros(0, b.ncols()));
    }
    let lu = a.clone().lu();
    let cond = lu_diag_condition(&lu);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::IllConditioned {
            name: name.to_string(),
            cond,
        });
    }
    lu.solve(b).ok_or_else(|| Error::IllConditioned {
        name: name.to_string(),
        cond: f64::INFINITY,
    })
}

/// Explicit inverse with the same conditioning guard as [`solve`].
pub fn inverse(a: &CMatrix, name: &str) -> Result<CMatrix> {
    if a.nrows() == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let lu = a.clone().lu();
    let cond = lu_diag_condition(&lu);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::IllConditioned {
            name: name.to_string(),
            cond,
        });
    }
    lu.try_inverse().ok_or_else(|| Error::IllConditioned {
        name: name.to_string(),
        cond: f64::INFINITY,
    })
}

/// Force exact Hermitian symmetry, (A + A^H)/2.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Largest |A(i,j) - conj(A(j,i))| relative to the largest entry magnitude.
pub fn hermitian_violation(a: &CMatrix) -> f64 {
    let scale = a.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// log2 det of a Hermitian positive-definite matrix via Cholesky.
pub fn log2_det_hermitian_pd(a: &CMatrix, name: &str) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = hermitian_part(a)
        .cholesky()
        .ok_or_else(|| Error::IllConditioned {
            name: name.to_string(),
            cond: f64::INFINITY,
        })?;
    let l = chol.l();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        acc += l[(i, i)].re.log2();
    }
    Ok(2.0 * acc)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ||A - B||_F / ||B||_F with a zero-safe denominator.
pub fn rel_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = frobenius(&(a - b));
    let den = frobenius(b);
    if den == 0.0 {
        diff
    } else {
        diff / den
    }
}

/// Diagonal matrix from complex entries.
pub fn diag(entries: &CVector) -> CMatrix {
    CMatrix::from_diagonal(entries)
}
