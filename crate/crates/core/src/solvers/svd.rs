//! Thin singular value decomposition by one-sided Jacobi rotations.
//!
//! Low-rank inputs are the normal case here (the nuclear-norm projection
//! produces them), and the bidiagonal QR in nalgebra 0.35 occasionally returns
//! factors that do not recompose the input for such matrices. Hestenes'
//! method is unconditionally convergent and accurate to working precision.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// `m = u * diag(s) * v_t` with `s` descending; `p = min(rows, cols)` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSvd {
    /// `rows x p`, orthonormal columns where `s > 0`.
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    /// `p x cols`, orthonormal rows where `s > 0`.
    pub v_t: DMatrix<f64>,
}

impl ThinSvd {
    pub fn recompose(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.u.nrows(), self.v_t.ncols());
        for (k, &s) in self.s.iter().enumerate() {
            if s > 0.0 {
                out += s * self.u.column(k) * self.v_t.row(k);
            }
        }
        out
    }
}

/// Orthogonalizes the columns of the tall matrix `a` in place and returns the
/// accumulated rotation `v` (so that `a_in * v = a_out`).
fn hestenes(a: &mut DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = a.ncols();
    let mut v = DMatrix::identity(p, p);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut *a, &mut v] {
                    for r in 0..m.nrows() {
                        let (x, y) = (m[(r, i)], m[(r, j)]);
                        m[(r, i)] = c * x - s * y;
                        m[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            return Ok(v);
        }
    }
    Err(Error::Numerical(format!("Jacobi SVD did not converge in {MAX_SWEEPS} sweeps")))
}

pub fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("SVD of a matrix with non-finite entries".into()));
    }
    let wide = m.nrows() < m.ncols();
    let mut a = if wide { m.transpose() } else { m.clone() };
    let v = hestenes(&mut a)?;
    let p = a.ncols();
    let mut order: Vec<(f64, usize)> = (0..p).map(|k| (a.column(k).norm(), k)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    // `a = left * diag(s)`, the input (or its transpose) is `a * v^T`
    let mut left = DMatrix::zeros(a.nrows(), p);
    let mut right = DMatrix::zeros(p, p);
    let mut s = Vec::with_capacity(p);
    for (dst, &(sigma, k)) in order.iter().enumerate() {
        if sigma > 0.0 {
            left.set_column(dst, &(a.column(k) / sigma));
        }
        right.set_column(dst, &v.column(k));
        s.push(sigma);
    }
    Ok(if wide {
        ThinSvd {
            u: right,
            s,
            v_t: left.transpose(),
        }
    } else {
        ThinSvd {
            u: left,
            s,
            v_t: right.transpose(),
        }
    })
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(thin_svd(m)?.s)
}
