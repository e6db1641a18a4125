//! Symmetric logarithmic derivative and quantum Fisher information.

use thiserror::Error;

use crate::operators::{hermitize, ComplexMatrix, DensityMatrix, C64};

/// Relative rank cutoff on `p_j + p_k` used by [`sld`].
pub const DEFAULT_EPS_RANK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("density matrix has no positive eigenvalue")]
    ZeroState,
    #[error("eigendecomposition produced non-finite values")]
    Eigen,
    #[error("eps_rank must be positive, got {0}")]
    BadCutoff(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SldResult {
    pub l: ComplexMatrix,
    pub qfi: f64,
    /// Imaginary part of `Tr[L²ρ]`, kept as a diagnostic.
    pub qfi_imag_residue: f64,
    pub eigenvalues_rho: Vec<f64>,
    /// Ordered pairs `(j, k)` whose `p_j + p_k` fell below the cutoff.
    pub thresholded_pairs: usize,
}

/// Solves `∂θρ = (ρL + Lρ)/2` in the eigenbasis of `ρ`.
///
/// Matrix elements with `p_j + p_k ≤ eps_rank·max(p)` are set to zero (the
/// support convention). Slightly negative eigenvalues are clamped to zero in
/// the denominators only.
pub fn sld(
    rho: &DensityMatrix,
    drho_dtheta: &ComplexMatrix,
    eps_rank: f64,
) -> Result<SldResult, EstimationError> {
    if eps_rank.is_nan() || eps_rank <= 0.0 {
        return Err(EstimationError::BadCutoff(eps_rank));
    }
    let n = rho.dim();
    if drho_dtheta.dim() != n {
        return Err(EstimationError::DimensionMismatch {
            left: n,
            right: drho_dtheta.dim(),
        });
    }
    let eig = hermitize(rho.matrix()).eigh();
    if eig.values.iter().any(|p| !p.is_finite()) || !eig.vectors.is_finite() {
        return Err(EstimationError::Eigen);
    }
    let p_max = eig.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if p_max.is_nan() || p_max <= 0.0 {
        return Err(EstimationError::ZeroState);
    }
    let cutoff = eps_rank * p_max;
    let p: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();

    let v = &eig.vectors;
    let d_eig = &(&v.dagger() * drho_dtheta) * v;
    let mut thresholded = 0;
    let mut l_rows = vec![vec![C64::new(0.0, 0.0); n]; n];
    for j in 0..n {
        for k in 0..n {
            let s = p[j] + p[k];
            if s > cutoff {
                l_rows[j][k] = d_eig.get(j, k) * (2.0 / s);
            } else {
                thresholded += 1;
            }
        }
    }
    let l_eig = ComplexMatrix::from_rows(&l_rows).map_err(|_| EstimationError::Eigen)?;
    let l = hermitize(&(&(v * &l_eig) * &v.dagger()));
    let f = (&l * &l).trace_product(rho.matrix());
    Ok(SldResult {
        l,
        qfi: f.re,
        qfi_imag_residue: f.im,
        eigenvalues_rho: eig.values,
        thresholded_pairs: thresholded,
    })
}

/// `Re Tr[L²ρ]`.
pub fn qfi(rho: &DensityMatrix, l: &ComplexMatrix) -> Result<f64, EstimationError> {
    if l.dim() != rho.dim() {
        return Err(EstimationError::DimensionMismatch {
            left: rho.dim(),
            right: l.dim(),
        });
    }
    Ok((l * l).trace_product(rho.matrix()).re)
}
