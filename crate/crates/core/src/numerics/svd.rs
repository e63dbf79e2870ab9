//! One-sided Jacobi singular value decomposition.
//!
//! Deterministic for a fixed input: the sweep order is fixed, ties in the
//! singular-value sort are broken by original column index, and the sign of
//! each left singular vector is normalized so its first nonzero entry is
//! nonnegative.

use crate::error::{Error, Result};
use crate::numerics::matrix::{norm2, Matrix};

/// Sweep cap for the Jacobi iteration.
const MAX_SWEEPS: usize = 10_000;

/// Thin SVD: `u` is rows×r with orthonormal columns, `vt` is r×cols with
/// orthonormal rows, r = min(rows, cols), and `u·diag(s)·vt` reconstructs
/// the input.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let r = self.s.len();
        let mut scaled = self.u.clone();
        for i in 0..scaled.rows() {
            for j in 0..r {
                scaled[(i, j)] *= self.s[j];
            }
        }
        scaled.matmul(&self.vt)
    }
}

/// Compute the thin SVD of `m`.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    if m.rows() < m.cols() {
        // Work on the transpose and swap factors: A = (V)(S)(Uᵀ) when
        // Aᵀ = U S Vᵀ.
        let t = svd(&m.transpose())?;
        return Ok(SvdResult {
            u: t.vt.transpose(),
            s: t.s,
            vt: t.u.transpose(),
        });
    }

    let rows = m.rows();
    let n = m.cols();
    let mut b = m.clone(); // becomes U·diag(s)
    let mut v = Matrix::identity(n);

    // Stop rotating a column pair once its normalized off-diagonal entry
    // is below this threshold. Machine epsilon is too strict here: at that
    // level roundoff can re-introduce couplings of the same size as the
    // ones being annihilated and the sweep loop cycles forever. 1e-14
    // keeps the off-diagonal mass ~4 orders below the accuracy the rest of
    // the crate relies on (1e-10 relative).
    let eps = 1e-14;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..rows {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    app += bp * bp;
                    aqq += bq * bq;
                    apq += bp * bq;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    b[(i, p)] = c * bp - s * bq;
                    b[(i, q)] = s * bp + c * bq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: MAX_SWEEPS,
            residual: f64::NAN,
        });
    }

    // Singular values are the column norms of B; sort nonincreasing with
    // index tie-break for determinism.
    let norms: Vec<f64> = b.column_norms();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| norms[c].partial_cmp(&norms[a]).unwrap().then(a.cmp(&c)));

    let s_max = order.first().map_or(0.0, |&j| norms[j]);
    let zero_tol = s_max * 1e-13;

    let mut u = Matrix::zeros(rows, n);
    let mut s = Vec::with_capacity(n);
    let mut vt = Matrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        if norms[j] > zero_tol {
            let col: Vec<f64> = b.column(j).iter().map(|x| x / norms[j]).collect();
            u.set_column(k, &col);
        }
        for i in 0..n {
            vt[(k, i)] = v[(i, j)];
        }
    }

    // Fill columns for (numerically) zero singular values with a
    // deterministic orthonormal completion from the canonical basis.
    for k in 0..n {
        if s[k] > zero_tol {
            continue;
        }
        // The spectrum is sorted, so every column before k is already
        // placed and every column after k is still empty.
        let mut filled = false;
        for cand in 0..rows {
            let mut col = vec![0.0; rows];
            col[cand] = 1.0;
            for prev in 0..k {
                let pv = u.column(prev);
                let proj: f64 = pv.iter().zip(&col).map(|(a, b)| a * b).sum();
                for i in 0..rows {
                    col[i] -= proj * pv[i];
                }
            }
            let nrm = norm2(&col);
            if nrm > 0.5 {
                for x in col.iter_mut() {
                    *x /= nrm;
                }
                u.set_column(k, &col);
                filled = true;
                break;
            }
        }
        debug_assert!(filled, "orthonormal completion must succeed (rows >= cols)");
    }

    // Sign convention: first entry of each left vector that is nonzero (in
    // a relative sense) is made nonnegative; the matching right vector
    // flips with it so the product is unchanged.
    for k in 0..n {
        let col = u.column(k);
        let thresh = 1e-12 * col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(lead) = col.iter().find(|x| x.abs() > thresh) {
            if *lead < 0.0 {
                for i in 0..rows {
                    u[(i, k)] = -u[(i, k)];
                }
                for i in 0..vt.cols() {
                    vt[(k, i)] = -vt[(k, i)];
                }
            }
        }
    }

    Ok(SvdResult { u, s, vt })
}

/// Largest singular value of `m`.
pub fn sigma_max(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.s.first().copied().unwrap_or(0.0))
}

/// Singular value thresholding: the proximal operator of `tau·‖·‖_*`.
///
/// Returns `U·diag(max(s − tau, 0))·Vᵀ`.
pub fn svt(m: &Matrix, tau: f64) -> Result<Matrix> {
    assert!(tau >= 0.0, "svt: tau must be nonnegative");
    if tau == 0.0 {
        return Ok(m.clone());
    }
    let dec = svd(m)?;
    let r = dec.s.len();
    let mut scaled = dec.u;
    let mut any = false;
    for j in 0..r {
        let sj = (dec.s[j] - tau).max(0.0);
        if sj > 0.0 {
            any = true;
        }
        for i in 0..scaled.rows() {
            scaled[(i, j)] *= sj;
        }
    }
    if !any {
        return Ok(Matrix::zeros(m.rows(), m.cols()));
    }
    Ok(scaled.matmul(&dec.vt))
}

/// Nuclear norm (sum of singular values).
pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.s.iter().sum())
}
