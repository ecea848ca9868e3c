//! Proximal and projection operators used by the inner solvers.

use nalgebra::{DMatrix, DVector};

use super::svd::thin_svd;
use crate::error::{invalid, Result};

/// Elementwise `max(v - threshold, 0)`: the prox of `threshold * sum(x)`
/// restricted to `x >= 0`.
pub fn shrink_nonneg(v: &DVector<f64>, threshold: f64) -> Result<DVector<f64>> {
    if !(threshold >= 0.0) {
        return Err(invalid(format!("shrinkage threshold must be >= 0, got {threshold}")));
    }
    Ok(v.map(|x| (x - threshold).max(0.0)))
}

/// Elementwise `max(v / (1 + gamma * step), 0)`: the prox of
/// `gamma * step / 2 * |x|^2` restricted to `x >= 0`.
pub fn shrink_tag_ridge(v: &DVector<f64>, gamma: f64, step: f64) -> Result<DVector<f64>> {
    if !(step > 0.0) {
        return Err(invalid(format!("step must be > 0, got {step}")));
    }
    if !(gamma >= 0.0) {
        return Err(invalid(format!("ridge weight must be >= 0, got {gamma}")));
    }
    let scale = 1.0 / (1.0 + gamma * step);
    Ok(v.map(|x| (x * scale).max(0.0)))
}

/// Projection onto the Frobenius ball of radius `eta`.
pub fn project_frobenius(c: &DMatrix<f64>, eta: f64) -> DMatrix<f64> {
    let mut out = c.clone();
    project_frobenius_mut(&mut out, eta);
    out
}

pub(crate) fn project_frobenius_mut(c: &mut DMatrix<f64>, eta: f64) {
    let norm = c.norm();
    if norm > eta {
        let orig = c.clone();
        let mut scale = eta / norm;
        *c *= scale;
        // rounding can leave the result an ulp outside, which would make a
        // second projection move it again
        while c.norm() > eta {
            scale = f64::from_bits(scale.to_bits() - 1);
            *c = &orig * scale;
        }
    }
}

/// Euclidean projection of a non-negative vector onto `{x >= 0 : sum(x) <= eta}`.
pub fn project_l1_ball(s: &DVector<f64>, eta: f64) -> Result<DVector<f64>> {
    if !(eta > 0.0) {
        return Err(invalid(format!("l1-ball radius must be > 0, got {eta}")));
    }
    if let Some(x) = s.iter().find(|&&x| !(x >= 0.0)) {
        return Err(invalid(format!("l1-ball projection expects non-negative input, got {x}")));
    }
    Ok(DVector::from_vec(l1_ball(s.as_slice(), eta)))
}

/// Sort-based simplex projection (water filling) for non-negative input.
fn l1_ball(s: &[f64], eta: f64) -> Vec<f64> {
    let total: f64 = s.iter().sum();
    if total <= eta {
        return s.to_vec();
    }
    let mut sorted = s.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - eta) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    s.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projection onto the nuclear-norm ball of radius `eta`: singular values are
/// projected onto the l1 ball, singular vectors are kept.
pub fn project_nuclear(c: &DMatrix<f64>, eta: f64) -> Result<DMatrix<f64>> {
    if !(eta > 0.0) {
        return Err(invalid(format!("nuclear-ball radius must be > 0, got {eta}")));
    }
    let svd = thin_svd(c)?;
    if svd.s.iter().sum::<f64>() <= eta {
        return Ok(c.clone());
    }
    let projected = l1_ball(&svd.s, eta);
    let mut out = DMatrix::zeros(c.nrows(), c.ncols());
    for (k, &s) in projected.iter().enumerate() {
        if s > 0.0 {
            out += s * svd.u.column(k) * svd.v_t.row(k);
        }
    }
    Ok(out)
}

/// NaN when the matrix has non-finite entries.
pub fn nuclear_norm(c: &DMatrix<f64>) -> f64 {
    thin_svd(c).map_or(f64::NAN, |svd| svd.s.iter().sum())
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    thin_svd(m).map_or(f64::NAN, |svd| svd.s[0])
}

/// Reciprocal Lipschitz constant `1 / (tau^2 sigma_max(M)^2)` of the
/// negative log-likelihood gradient when `M` multiplies the free block.
pub fn lipschitz_step(tau: f64, m: &DMatrix<f64>) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid(format!("precision must be > 0, got {tau}")));
    }
    let sigma = spectral_norm(m);
    if !(sigma > 0.0) {
        return Err(invalid("Lipschitz step undefined for an all-zero matrix"));
    }
    Ok(1.0 / (tau * tau * sigma * sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shrink_nonneg_examples() {
        let v = DVector::from_vec(vec![2.0, -1.0, 0.5]);
        assert_eq!(shrink_nonneg(&v, 1.0).unwrap(), DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let pos = DVector::from_vec(vec![0.3, 0.0, 4.0]);
        assert_eq!(shrink_nonneg(&pos, 0.0).unwrap(), pos);
        assert!(shrink_nonneg(&v, -0.1).is_err());
    }

    /// Minimizes a separable convex 1-D objective on `[0, hi]` by grid search.
    fn grid_argmin(f: impl Fn(f64) -> f64, hi: f64) -> f64 {
        let n = 200_000;
        (0..=n)
            .map(|k| hi * k as f64 / n as f64)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap()
    }

    #[test]
    fn shrink_nonneg_is_prox_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            let t = rng.random_range(0.0..1.5);
            let got = shrink_nonneg(&v, t).unwrap();
            for k in 0..2 {
                let oracle = grid_argmin(|x| 0.5 * (x - v[k]).powi(2) + t * x, 4.0);
                assert!((got[k] - oracle).abs() <= 2e-5, "{} vs {}", got[k], oracle);
            }
        }
    }

    #[test]
    fn shrink_tag_ridge_examples() {
        let v = DVector::from_vec(vec![1.5, -0.2, 0.0]);
        assert_eq!(shrink_tag_ridge(&v, 0.0, 0.7).unwrap(), v.map(|x| x.max(0.0)));
        let (g, t) = (0.3, 2.0);
        let u = DVector::from_vec(vec![0.4, 0.0, 2.5]);
        assert_relative_eq!(shrink_tag_ridge(&(&u * (1.0 + g * t)), g, t).unwrap(), u, epsilon = 1e-14);
        assert!(shrink_tag_ridge(&v, 0.1, 0.0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x: f64 = rng.random_range(-3.0..3.0);
            let (g, t): (f64, f64) = (rng.random_range(0.0..2.0), rng.random_range(0.1..2.0));
            // analytic 1-D oracle: stationary point of the quadratic, clipped at 0
            let oracle = (x / (1.0 + g * t)).max(0.0);
            let got = shrink_tag_ridge(&DVector::from_element(1, x), g, t).unwrap()[0];
            assert_relative_eq!(got, oracle, epsilon = 1e-15);
            let by_grid = grid_argmin(|y| 0.5 * (y - x).powi(2) + 0.5 * g * t * y * y, 4.0);
            assert!((got - by_grid).abs() <= 2e-5);
        }
    }

    #[test]
    fn frobenius_projection() {
        let c = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]);
        assert_eq!(project_frobenius(&c, 10.0), c);
        assert_relative_eq!(project_frobenius(&c, 2.5), &c / 2.0, epsilon = 1e-15);
        let once = project_frobenius(&c, 1.0);
        assert_eq!(project_frobenius(&once, 1.0), once);
    }

    #[test]
    fn l1_ball_examples() {
        let p = project_l1_ball(&DVector::from_vec(vec![3.0, 1.0]), 2.0).unwrap();
        assert_relative_eq!(p, DVector::from_vec(vec![2.0, 0.0]), epsilon = 1e-15);
        let p = project_l1_ball(&DVector::from_vec(vec![1.0, 1.0, 1.0]), 1.5).unwrap();
        assert_relative_eq!(p, DVector::from_vec(vec![0.5, 0.5, 0.5]), epsilon = 1e-15);
        let inside = DVector::from_vec(vec![0.2, 0.3]);
        assert_eq!(project_l1_ball(&inside, 1.0).unwrap(), inside);
        assert!(project_l1_ball(&DVector::from_vec(vec![-1.0]), 1.0).is_err());
    }

    #[test]
    fn nuclear_projection_examples() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let p = project_nuclear(&c, 2.0).unwrap();
        assert_relative_eq!(p, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0])), epsilon = 1e-12);
        let small = DMatrix::from_row_slice(2, 3, &[0.1, 0.0, 0.2, -0.1, 0.1, 0.0]);
        assert_relative_eq!(project_nuclear(&small, 5.0).unwrap(), small, epsilon = 1e-10);
    }

    #[test]
    fn lipschitz_examples() {
        assert_relative_eq!(lipschitz_step(1.0, &DMatrix::identity(3, 3)).unwrap(), 1.0, epsilon = 1e-14);
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        assert_relative_eq!(lipschitz_step(2.0, &m).unwrap(), 1.0 / 36.0, epsilon = 1e-14);
        assert!(lipschitz_step(1.0, &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = DMatrix::from_fn(4, 7, |_, _| rng.random_range(-1.0..1.0));
        let mtm = m.transpose() * &m;
        let mut v = DVector::from_element(7, 1.0);
        for _ in 0..2000 {
            v = &mtm * &v;
            v /= v.norm();
        }
        let oracle = (&m * &v).norm();
        assert_relative_eq!(spectral_norm(&m), oracle, max_relative = 1e-6);
    }
}
