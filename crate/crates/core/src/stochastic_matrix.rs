//! Fractional powers of row-stochastic matrices and the naive-parameter map.
//!
//! Non-integer powers use the principal eigendecomposition power
//! V diag(λ^η) V⁻¹. For the diagonally dominant matrices produced by the
//! misclassification module the eigenvalues are real and positive and the
//! result is again (numerically) row-stochastic; any imaginary residue and
//! clipped negative mass are surfaced on the result rather than silently
//! dropped.

use crate::error::{Error, Result};
use crate::misclass::{CategoryProbs, StochasticMatrix};
use ndarray::Array2;
use ndarray_linalg::{Eig, Inverse};
use num_complex::Complex64;

const MAX_CONDITION: f64 = 1e12;
const MAX_IMAG_RESIDUAL: f64 = 1e-6;

/// A computed matrix power with its numerical telemetry.
#[derive(Debug, Clone)]
pub struct MatrixPowerResult {
    pub matrix: StochasticMatrix,
    /// Real part of the principal power before clipping and renormalization.
    /// Algebraic identities (composition, square roots) hold on this matrix;
    /// the projected `matrix` deviates from them by at most the clip mass.
    pub principal: Array2<f64>,
    /// Largest imaginary magnitude discarded when projecting to the reals.
    pub imag_residual: f64,
    /// Total negative mass clipped to zero before row renormalization.
    pub clip_mass: f64,
}

/// Π^η for η ≥ 0.
///
/// η = 0 returns the identity; integer η is an exact repeated product;
/// otherwise the principal power via eigendecomposition, projected to the
/// reals, clipped at zero and row-renormalized.
pub fn fractional_power(pi: &StochasticMatrix, eta: f64) -> Result<MatrixPowerResult> {
    if !(eta >= 0.0) {
        return Err(Error::invalid(format!("matrix power requires eta >= 0, got {eta}")));
    }
    let j = pi.dim();
    if eta == 0.0 {
        return Ok(MatrixPowerResult {
            matrix: StochasticMatrix::identity(j),
            principal: Array2::eye(j),
            imag_residual: 0.0,
            clip_mass: 0.0,
        });
    }
    if eta.fract() == 0.0 {
        let n = eta as u64;
        let mut acc = pi.entries().clone();
        for _ in 1..n {
            acc = acc.dot(pi.entries());
        }
        return Ok(MatrixPowerResult {
            matrix: StochasticMatrix::new(acc.clone())?,
            principal: acc,
            imag_residual: 0.0,
            clip_mass: 0.0,
        });
    }

    let (eigenvalues, v) = pi
        .entries()
        .eig()
        .map_err(|e| Error::numerical(format!("eigendecomposition failed: {e}")))?;
    let v_inv = v
        .inv()
        .map_err(|e| Error::numerical(format!("eigenvector matrix is singular: {e}")))?;
    let cond = frobenius_norm(&v) * frobenius_norm(&v_inv);
    if cond > MAX_CONDITION {
        return Err(Error::numerical(format!(
            "eigenvector matrix condition {cond:.3e} exceeds {MAX_CONDITION:.0e}; \
             matrix is too close to defective for a fractional power"
        )));
    }

    let powered = Array2::from_diag(&eigenvalues.mapv(|l| l.powf(eta)));
    let raw = v.dot(&powered).dot(&v_inv);

    let mut imag_residual = 0.0f64;
    let mut clip_mass = 0.0f64;
    let mut principal = Array2::<f64>::zeros((j, j));
    let mut real = Array2::<f64>::zeros((j, j));
    for ((r, c), val) in raw.indexed_iter() {
        imag_residual = imag_residual.max(val.im.abs());
        principal[[r, c]] = val.re;
        let mut re = val.re;
        if re < 0.0 {
            clip_mass += -re;
            re = 0.0;
        }
        real[[r, c]] = re;
    }
    if imag_residual > MAX_IMAG_RESIDUAL {
        return Err(Error::numerical(format!(
            "matrix power ill-defined: imaginary residual {imag_residual:.3e} exceeds \
             {MAX_IMAG_RESIDUAL:.0e} (eigenvalues off the positive real axis)"
        )));
    }

    Ok(MatrixPowerResult {
        matrix: StochasticMatrix::from_renormalized(real)?,
        principal,
        imag_residual,
        clip_mass,
    })
}

fn frobenius_norm(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// The matrix A(Π, p) with A[j][j'] = π_{j'j} p_{j'} / (Π_{·j})ᵀp, so that
/// θ_naive = A·θ. Each row of A is a posterior over true categories given
/// the observed one, hence sums to one.
pub fn naive_map_matrix(pi: &StochasticMatrix, p: &CategoryProbs) -> Result<Array2<f64>> {
    let j = pi.dim();
    if p.len() != j {
        return Err(Error::invalid(format!(
            "dimension mismatch: Π is {j}x{j}, p has length {}",
            p.len()
        )));
    }
    if p.values().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("all category probabilities must be positive"));
    }
    let mut a = Array2::<f64>::zeros((j, j));
    for col in 0..j {
        // (Π_{·col})ᵀ p
        let denom: f64 = (0..j).map(|jp| pi.get(jp, col) * p.get(jp)).sum();
        if !(denom > 0.0) {
            return Err(Error::numerical(format!(
                "observed category {col} has zero implied mass; naive map undefined"
            )));
        }
        for jp in 0..j {
            a[[col, jp]] = pi.get(jp, col) * p.get(jp) / denom;
        }
    }
    Ok(a)
}
