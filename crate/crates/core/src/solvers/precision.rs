//! One-dimensional secant updates: the precision `tau` (on `log tau`) and the
//! interior bin boundaries with `tau` held fixed.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::model::{dot, IntervalTerms, QuantizerSpec, ResponseMatrix, Thresholds};

/// Minimum gap kept between neighboring boundaries.
pub const MIN_BIN_GAP: f64 = 1e-4;

const SECANT_MAX_ITERS: usize = 50;
const SECANT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
struct SecantConfig {
    lo: f64,
    hi: f64,
    max_step: f64,
    max_iters: usize,
    tol: f64,
}

#[derive(Debug, Clone, Copy)]
struct SecantResult {
    x: f64,
    value: f64,
    converged: bool,
}

/// Minimizes a convex 1-D function given `eval(x) = (f(x), f'(x))` by secant
/// iterations on `f'`, safeguarded by a bracket on the sign of `f'`.
/// Returns the best point evaluated.
fn secant_minimize(mut eval: impl FnMut(f64) -> (f64, f64), x0: f64, cfg: SecantConfig) -> SecantResult {
    let (f0, g0) = eval(x0);
    let mut best = SecantResult {
        x: x0,
        value: f0,
        converged: g0.abs() <= cfg.tol,
    };
    if best.converged || !g0.is_finite() {
        return best;
    }
    let (mut left, mut right) = (cfg.lo, cfg.hi);
    let shrink_bracket = |x: f64, g: f64, left: &mut f64, right: &mut f64| {
        if g < 0.0 {
            *left = left.max(x);
        } else {
            *right = right.min(x);
        }
    };
    shrink_bracket(x0, g0, &mut left, &mut right);

    let (mut x_prev, mut g_prev) = (x0, g0);
    let mut x = (x0 - g0.signum() * 0.1 * cfg.max_step).clamp(cfg.lo, cfg.hi);
    for _ in 0..cfg.max_iters {
        if x == x_prev {
            best.converged = true;
            break;
        }
        let (f, g) = eval(x);
        if f < best.value {
            best = SecantResult { x, value: f, converged: false };
        }
        if g.abs() <= cfg.tol {
            best.converged = true;
            break;
        }
        shrink_bracket(x, g, &mut left, &mut right);
        if right - left <= 1e-12 * (1.0 + x.abs()) {
            best.converged = true;
            break;
        }

        let slope = (g - g_prev) / (x - x_prev);
        let mut next = if slope > 0.0 && slope.is_finite() {
            x - g / slope
        } else {
            x - g.signum() * cfg.max_step
        };
        next = next.clamp(x - cfg.max_step, x + cfg.max_step);
        if !(next > left && next < right) {
            next = match (left.is_finite(), right.is_finite()) {
                (true, true) => 0.5 * (left + right),
                (true, false) => x + cfg.max_step,
                (false, true) => x - cfg.max_step,
                (false, false) => next,
            };
        }
        x_prev = x;
        g_prev = g;
        x = next.clamp(cfg.lo, cfg.hi);
    }
    best
}

/// Outcome of a precision update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionEstimate {
    pub tau: f64,
    /// Negative log-likelihood at `tau`.
    pub objective: f64,
    /// False when the secant iteration hit its iteration cap.
    pub converged: bool,
}

fn slack_values(
    y: &ResponseMatrix,
    w: &DMatrix<f64>,
    c: &DMatrix<f64>,
    mu: &DVector<f64>,
) -> Vec<(usize, f64, usize)> {
    let w_t = w.transpose();
    y.entries()
        .iter()
        .map(|e| {
            let z = dot(w_t.column(e.question).as_slice(), c.column(e.learner).as_slice()) + mu[e.question];
            (e.question, z, e.label)
        })
        .collect()
}

/// Secant minimization of the negative log-likelihood over `tau > 0`
/// (parameterized by `log tau`), all other factors fixed.
pub fn estimate_precision(
    y: &ResponseMatrix,
    w: &DMatrix<f64>,
    c: &DMatrix<f64>,
    mu: &DVector<f64>,
    thresholds: &Thresholds,
    tau_init: f64,
) -> Result<PrecisionEstimate> {
    if !(tau_init > 0.0) || !tau_init.is_finite() {
        return Err(invalid(format!("tau_init must be positive, got {tau_init}")));
    }
    let slacks = slack_values(y, w, c, mu);
    let eval = |s: f64| {
        let tau = s.exp();
        let mut value = 0.0;
        let mut deriv = 0.0;
        for &(i, z, label) in &slacks {
            let b = thresholds.for_question(i).bounds_unchecked(label);
            let t = IntervalTerms::new(tau * (b.upper - z), tau * (b.lower - z));
            value -= t.floored_log_prob();
            deriv -= t.moment();
        }
        (value, deriv)
    };
    let cfg = SecantConfig {
        lo: 1e-4f64.ln(),
        hi: 1e4f64.ln(),
        max_step: 1.0,
        max_iters: SECANT_MAX_ITERS,
        tol: SECANT_TOL,
    };
    let res = secant_minimize(eval, tau_init.ln().clamp(cfg.lo, cfg.hi), cfg);
    let tau = if res.x == tau_init.ln() { tau_init } else { res.x.exp() };
    if !res.converged {
        log::warn!("precision secant did not converge; keeping best iterate tau = {tau}");
    }
    Ok(PrecisionEstimate {
        tau,
        objective: res.value,
        converged: res.converged,
    })
}

/// Which bin boundaries are learned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinSharing {
    Shared,
    PerQuestion,
}

/// One cyclic pass of secant updates over every interior boundary, each
/// restricted to keep a [`MIN_BIN_GAP`] to its neighbors.
///
/// In [`BinSharing::PerQuestion`] mode a shared input is first expanded into
/// one quantizer per question.
pub fn optimize_bins(
    y: &ResponseMatrix,
    w: &DMatrix<f64>,
    c: &DMatrix<f64>,
    mu: &DVector<f64>,
    thresholds: &Thresholds,
    tau: f64,
    mode: BinSharing,
) -> Result<Thresholds> {
    if !(tau > 0.0) {
        return Err(invalid(format!("precision must be > 0, got {tau}")));
    }
    let slacks = slack_values(y, w, c, mu);
    match mode {
        BinSharing::Shared => {
            let mut q = match thresholds {
                Thresholds::Shared(q) => q.clone(),
                Thresholds::PerQuestion(_) => {
                    return Err(invalid("shared bin learning needs a shared quantizer"));
                }
            };
            let obs: Vec<(f64, usize)> = slacks.iter().map(|&(_, z, l)| (z, l)).collect();
            optimize_quantizer(&mut q, &obs, tau);
            Ok(Thresholds::Shared(q))
        }
        BinSharing::PerQuestion => {
            let mut per: Vec<QuantizerSpec> = (0..y.num_questions())
                .map(|i| thresholds.for_question(i).clone())
                .collect();
            let mut by_row: Vec<Vec<(f64, usize)>> = vec![Vec::new(); y.num_questions()];
            for &(i, z, l) in &slacks {
                by_row[i].push((z, l));
            }
            for (q, obs) in per.iter_mut().zip(&by_row) {
                optimize_quantizer(q, obs, tau);
            }
            Ok(Thresholds::PerQuestion(per))
        }
    }
}

fn optimize_quantizer(q: &mut QuantizerSpec, obs: &[(f64, usize)], tau: f64) {
    let num_labels = q.num_labels();
    for p in 1..num_labels {
        let relevant: Vec<(f64, usize)> = obs
            .iter()
            .copied()
            .filter(|&(_, l)| l == p || l == p + 1)
            .collect();
        if relevant.is_empty() {
            continue;
        }
        let b = q.boundaries();
        let (below, current, above) = (b[p - 1], b[p], b[p + 1]);
        let lo = below + MIN_BIN_GAP;
        let hi = above - MIN_BIN_GAP;
        if !(lo < hi) {
            log::warn!("bin boundary {p} squeezed between {below} and {above}; left in place");
            continue;
        }
        let eval = |omega: f64| {
            let mut value = 0.0;
            let mut deriv = 0.0;
            for &(z, l) in &relevant {
                if l == p {
                    let t = IntervalTerms::new(tau * (omega - z), tau * (below - z));
                    value -= t.floored_log_prob();
                    deriv -= tau * t.hazard_upper;
                } else {
                    let t = IntervalTerms::new(tau * (above - z), tau * (omega - z));
                    value -= t.floored_log_prob();
                    deriv += tau * t.hazard_lower;
                }
            }
            (value, deriv)
        };
        let cfg = SecantConfig {
            lo,
            hi,
            max_step: 0.5,
            max_iters: SECANT_MAX_ITERS,
            tol: SECANT_TOL,
        };
        let start = current.clamp(lo, hi);
        let res = secant_minimize(eval, start, cfg);
        if res.x != current {
            q.set_boundary(p, res.x);
        }
    }
}
