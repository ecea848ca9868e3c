//! Standard normal density, distribution function, and the tail-stable
//! interval quantities the ordinal probit likelihood is built from.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{invalid, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Probability floor applied before taking logarithms of likelihoods.
pub const LIKELIHOOD_FLOOR: f64 = 1e-12;

/// Standard normal CDF. NaN is rejected.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(invalid("std_normal_cdf: NaN input"));
    }
    Ok(cdf(x))
}

/// Standard normal density. NaN is rejected.
pub fn std_normal_pdf(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(invalid("std_normal_pdf: NaN input"));
    }
    Ok(pdf(x))
}

/// Inverse of the standard normal CDF; `0 -> -inf`, `1 -> +inf`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("quantile probability {p} outside [0, 1]")));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against our own CDF tightens the inverse to machine precision
    let d = pdf(x);
    if d > 0.0 {
        x -= (cdf(x) - p) / d;
    }
    Ok(x)
}

#[inline]
pub(crate) fn cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x / SQRT_2)
    }
}

#[inline]
pub(crate) fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        INV_SQRT_2PI * (-0.5 * x * x).exp()
    }
}

#[inline]
fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Scaled complementary error function `exp(x^2) erfc(x)` for `x >= 0`.
fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == f64::INFINITY {
        return 0.0;
    }
    if x < 25.0 {
        (x * x).exp() * erfc(x)
    } else {
        let inv2 = 1.0 / (x * x);
        let series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2;
        series / (x * PI.sqrt())
    }
}

/// Mills ratio `(1 - Phi(x)) / phi(x)` for `x >= 0`.
#[inline]
fn mills(x: f64) -> f64 {
    (PI / 2.0).sqrt() * erfcx(x / SQRT_2)
}

/// Quantities of `P = Phi(a) - Phi(b)` for `a > b`, evaluated without
/// cancellation or underflow in either tail.
#[derive(Debug, Clone, Copy)]
pub(crate) struct IntervalTerms {
    /// `ln P`, unfloored.
    pub log_prob: f64,
    /// `phi(a) / P`
    pub hazard_upper: f64,
    /// `phi(b) / P`
    pub hazard_lower: f64,
    /// `a` and `b`, kept for the moment term.
    pub upper: f64,
    pub lower: f64,
}

impl IntervalTerms {
    pub fn new(upper: f64, lower: f64) -> Self {
        debug_assert!(upper > lower, "empty interval ({lower}, {upper})");
        if lower >= 0.0 {
            let (log_prob, hu, hl) = upper_tail(upper, lower);
            IntervalTerms {
                log_prob,
                hazard_upper: hu,
                hazard_lower: hl,
                upper,
                lower,
            }
        } else if upper <= 0.0 {
            // mirror into the upper tail: (a, b) -> (-b, -a)
            let (log_prob, hu, hl) = upper_tail(-lower, -upper);
            IntervalTerms {
                log_prob,
                hazard_upper: hl,
                hazard_lower: hu,
                upper,
                lower,
            }
        } else {
            let prob = cdf(upper) - cdf(lower);
            IntervalTerms {
                log_prob: prob.ln(),
                hazard_upper: pdf(upper) / prob,
                hazard_lower: pdf(lower) / prob,
                upper,
                lower,
            }
        }
    }

    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }

    /// `ln max(P, floor)`
    pub fn floored_log_prob(&self) -> f64 {
        self.log_prob.max(LIKELIHOOD_FLOOR.ln())
    }

    /// `(phi(a) - phi(b)) / P`
    pub fn ratio(&self) -> f64 {
        self.hazard_upper - self.hazard_lower
    }

    /// `(a phi(a) - b phi(b)) / P`, with infinite endpoints contributing 0.
    pub fn moment(&self) -> f64 {
        let up = if self.upper.is_infinite() {
            0.0
        } else {
            self.upper * self.hazard_upper
        };
        let lo = if self.lower.is_infinite() {
            0.0
        } else {
            self.lower * self.hazard_lower
        };
        up - lo
    }
}

/// For `a > b >= 0` returns `(ln P, phi(a)/P, phi(b)/P)`.
fn upper_tail(a: f64, b: f64) -> (f64, f64, f64) {
    // P = phi(b) * (m(b) - e * m(a)),  e = phi(a) / phi(b)
    let e = if a.is_infinite() {
        0.0
    } else {
        (-0.5 * (a - b) * (a + b)).exp()
    };
    let scaled = mills(b) - e * mills(a);
    let log_prob = ln_pdf(b) + scaled.ln();
    (log_prob, e / scaled, 1.0 / scaled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Composite Simpson quadrature of the density from `lo` to `x`.
    fn cdf_by_quadrature(x: f64) -> f64 {
        let lo = -40.0;
        let n = 400_000;
        let h = (x - lo) / n as f64;
        let mut acc = pdf(lo) + pdf(x);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * pdf(lo + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn cdf_matches_quadrature() {
        for &x in &[-8.0, -3.0, -1.0, -0.25, 0.0, 0.5, 1.0, 2.5, 6.0] {
            let q = cdf_by_quadrature(x);
            assert!((cdf(x) - q).abs() <= 1e-12, "x={x}: {} vs {q}", cdf(x));
        }
        assert_relative_eq!(std_normal_cdf(1.0).unwrap(), 0.841_344_746_068_542_9, epsilon = 1e-12);
    }

    #[test]
    fn cdf_edge_values() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        assert_eq!(std_normal_cdf(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY).unwrap(), 0.0);
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_pdf(f64::NAN).is_err());
    }

    #[test]
    fn pdf_values() {
        assert_relative_eq!(std_normal_pdf(0.0).unwrap(), 0.398_942_280_4, epsilon = 1e-10);
        assert_eq!(pdf(1.7), pdf(-1.7));
        // derivative of the CDF by central difference
        let h = 1e-5;
        let fd = (cdf(2.0 + h) - cdf(2.0 - h)) / (2.0 * h);
        assert_relative_eq!(pdf(2.0), fd, epsilon = 1e-9);
        assert_relative_eq!(pdf(2.0), 0.053_990_966_51, epsilon = 1e-10);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.01, 0.25, 0.5, 0.75, 0.99] {
            let x = std_normal_quantile(p).unwrap();
            assert_relative_eq!(cdf(x), p, max_relative = 1e-12);
        }
        assert!(std_normal_quantile(1.5).is_err());
    }

    #[test]
    fn interval_terms_agree_with_direct_formula() {
        for &(a, b) in &[(0.64, -0.64), (2.1, 0.64), (-0.64, -2.1), (f64::INFINITY, 2.1), (0.3, f64::NEG_INFINITY)] {
            let t = IntervalTerms::new(a, b);
            let p = cdf(a) - cdf(b);
            assert_relative_eq!(t.prob(), p, max_relative = 1e-12);
            assert_relative_eq!(t.ratio(), (pdf(a) - pdf(b)) / p, max_relative = 1e-10);
        }
    }

    #[test]
    fn far_tail_stays_finite() {
        // P(Y = top) at z = -30 with the top bin starting at 2.1: inverse Mills ratio
        let t = IntervalTerms::new(f64::INFINITY, 32.1);
        let x: f64 = 32.1;
        let mills_inv = x * (1.0 + 1.0 / (x * x) - 2.0 / x.powi(4));
        assert!(t.log_prob.is_finite());
        assert_relative_eq!(-t.ratio(), mills_inv, max_relative = 1e-6);
    }
}
