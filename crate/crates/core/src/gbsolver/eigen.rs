//! Real eigenpairs of a dense non-symmetric matrix.
//!
//! Eigenvalues come from a real Schur decomposition; each real eigenvalue's
//! eigenvector is then refined by a few steps of shifted inverse iteration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues with `|Im| <= IMAG_TOL * (1 + |Re|)` are treated as real.
pub const IMAG_TOL: f64 = 1e-6;

const SCHUR_EPS: f64 = f64::EPSILON;
const INVERSE_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit-norm right eigenvector.
    pub vector: DVector<f64>,
}

/// All real eigenpairs of `m`, in the order the Schur form yields them.
pub fn eigensolve_real(m: &DMatrix<f64>) -> Result<Vec<EigenPair>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Validation(format!(
            "eigensolve needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), SCHUR_EPS, max_iterations(n))
        .ok_or(Error::EigenFailure)?;
    let values = schur.complex_eigenvalues();
    let scale = m.amax().max(1.0);
    let mut pairs = Vec::new();
    for z in values.iter() {
        if z.im.abs() > IMAG_TOL * (1.0 + z.re.abs()) {
            continue;
        }
        let vector = inverse_iteration(m, z.re, scale)?;
        pairs.push(EigenPair {
            value: z.re,
            vector,
        });
    }
    Ok(pairs)
}

fn max_iterations(n: usize) -> usize {
    100 * n.max(10)
}

fn inverse_iteration(m: &DMatrix<f64>, lambda: f64, scale: f64) -> Result<DVector<f64>> {
    let n = m.nrows();
    let mut shift = f64::EPSILON * scale;
    for _ in 0..8 {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] -= lambda + shift;
        }
        let lu = a.lu();
        // deterministic start with no special alignment to any basis vector
        let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_75).fract());
        v.normalize_mut();
        let mut ok = true;
        for _ in 0..INVERSE_STEPS {
            match lu.solve(&v) {
                Some(w) if w.iter().all(|x| x.is_finite()) && w.norm() > 0.0 => {
                    v = w.normalize();
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(v);
        }
        shift *= 100.0;
    }
    Err(Error::EigenFailure)
}
