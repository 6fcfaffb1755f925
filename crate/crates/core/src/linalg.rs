//! Dense decompositions, computed with faer on nalgebra matrices.
//!
//! nalgebra's own SVD loses accuracy on rank-deficient inputs (reconstruction
//! errors of order one on small low-rank products), and iterates of the solver
//! are low rank by design.

use faer::{Mat, MatRef, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn to_nalgebra(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// faer's AVX kernels can return with the upper halves of the vector
/// registers dirty, after which legacy-SSE code (libm's `exp` and `ln`
/// included) runs about twenty times slower until something clears them.
fn clear_upper_registers() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: the CPU supports AVX, checked just above.
        unsafe { zero_upper() }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn zero_upper() {
    std::arch::x86_64::_mm256_zeroupper();
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "{what} produced non-finite values"
        )))
    }
}

/// Thin SVD `m = U diag(s) Vᵀ`, singular values in non-increasing order.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    let svd = to_faer(m).thin_svd();
    clear_upper_registers();
    let svd = svd.map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    check_finite(&s, "SVD")?;
    Ok(ThinSvd {
        u: to_nalgebra(svd.U()),
        s,
        v: to_nalgebra(svd.V()),
    })
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let s = to_faer(m).singular_values();
    clear_upper_registers();
    let s = s.map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    check_finite(&s, "SVD")?;
    Ok(s)
}

/// Eigenvalues (non-decreasing) and eigenvectors of a symmetric matrix;
/// only the lower triangle is read.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let evd = to_faer(m).self_adjoint_eigen(Side::Lower);
    clear_upper_registers();
    let evd = evd.map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let values: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    check_finite(&values, "eigendecomposition")?;
    Ok((values, to_nalgebra(evd.U())))
}
