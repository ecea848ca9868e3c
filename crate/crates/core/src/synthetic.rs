//! Ground-truth generation, factor alignment, and recovery errors for
//! synthetic recovery experiments.
//!
//! The canonical generator draws, for every question, a support of 1 to 3
//! concepts (uniform count, uniform positions without replacement) with
//! exponential(`lambda_k`) magnitudes; learner columns of `C` are i.i.d.
//! `N(0, V0)`; difficulties are i.i.d. `N(mu0, v_mu)`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::model::{std_normal_quantile, FactorModel, Observation, QuantizerSpec, ResponseMatrix};

/// Parameters of the canonical generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub mu0: f64,
    /// Variance of the difficulties.
    pub v_mu: f64,
    /// Exponential rate of the nonzero entries of each column of `W`.
    pub lambda_k: Vec<f64>,
    /// Covariance of the learner columns of `C`.
    pub v0: DMatrix<f64>,
    /// Noise precision; `f64::INFINITY` generates noiseless responses.
    pub tau: f64,
    pub bins: QuantizerSpec,
}

impl GeneratorParams {
    /// `mu0 = 0`, `v_mu = 1`, `lambda_k = 0.66`, `V0 = I`, `tau = 1`, and the
    /// five bins `{-inf, -2.1, -0.64, 0.64, 2.1, inf}`.
    pub fn standard(num_concepts: usize) -> Self {
        GeneratorParams {
            mu0: 0.0,
            v_mu: 1.0,
            lambda_k: vec![0.66; num_concepts],
            v0: DMatrix::identity(num_concepts, num_concepts),
            tau: 1.0,
            bins: QuantizerSpec::from_interior(&[-2.1, -0.64, 0.64, 2.1]).expect("ordered"),
        }
    }
}

/// True factors of a synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub w: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub tau: f64,
    pub bins: QuantizerSpec,
}

impl GroundTruth {
    /// Noiseless slack matrix `W C + mu 1^T`.
    pub fn slack(&self) -> DMatrix<f64> {
        let mut z = &self.w * &self.c;
        for (i, mut row) in z.row_iter_mut().enumerate() {
            row.add_scalar_mut(self.mu[i]);
        }
        z
    }

    pub fn num_concepts(&self) -> usize {
        self.w.ncols()
    }
}

pub fn generate_ground_truth(
    num_questions: usize,
    num_learners: usize,
    num_concepts: usize,
    params: &GeneratorParams,
    seed: u64,
) -> Result<GroundTruth> {
    if num_questions == 0 || num_learners == 0 || num_concepts == 0 {
        return Err(invalid("Q, N and K must all be >= 1"));
    }
    if params.lambda_k.len() != num_concepts || params.lambda_k.iter().any(|&l| !(l > 0.0)) {
        return Err(invalid("lambda_k needs one positive rate per concept"));
    }
    if !(params.v_mu > 0.0) {
        return Err(invalid(format!("v_mu must be > 0, got {}", params.v_mu)));
    }
    if !(params.tau > 0.0) {
        return Err(invalid(format!("tau must be > 0, got {}", params.tau)));
    }
    if params.v0.shape() != (num_concepts, num_concepts) {
        return Err(Error::DimensionMismatch(format!(
            "V0 is {:?}, expected {num_concepts}x{num_concepts}",
            params.v0.shape()
        )));
    }
    let chol = params
        .v0
        .clone()
        .cholesky()
        .ok_or_else(|| invalid("V0 is not positive definite"))?;
    let factor = chol.l();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates: Vec<Exp<f64>> = params
        .lambda_k
        .iter()
        .map(|&l| Exp::new(l).map_err(|e| invalid(e.to_string())))
        .collect::<Result<_>>()?;
    let max_support = num_concepts.min(3);
    let mut w = DMatrix::zeros(num_questions, num_concepts);
    for i in 0..num_questions {
        let size = rng.random_range(1..=max_support);
        for k in sample(&mut rng, num_concepts, size) {
            w[(i, k)] = rates[k].sample(&mut rng);
        }
    }
    let c = &factor * DMatrix::from_fn(num_concepts, num_learners, |_, _| StandardNormal.sample(&mut rng));
    let normal = Normal::new(params.mu0, params.v_mu.sqrt()).map_err(|e| invalid(e.to_string()))?;
    let mu = DVector::from_fn(num_questions, |_, _| normal.sample(&mut rng));
    Ok(GroundTruth {
        w,
        c,
        mu,
        tau: params.tau,
        bins: params.bins.clone(),
    })
}

/// Boundaries at the standard normal quantiles `p / P`.
pub fn make_even_bins(num_labels: usize) -> Result<QuantizerSpec> {
    if num_labels < 2 {
        return Err(invalid(format!("need at least 2 labels, got {num_labels}")));
    }
    let b = (0..=num_labels)
        .map(|p| std_normal_quantile(p as f64 / num_labels as f64))
        .collect::<Result<Vec<_>>>()?;
    QuantizerSpec::new(b)
}

/// Quantizes `Z + noise`, observing each cell independently with probability
/// `obs_fraction`.
pub fn generate_responses(gt: &GroundTruth, obs_fraction: f64, seed: u64) -> Result<ResponseMatrix> {
    if !(obs_fraction > 0.0 && obs_fraction <= 1.0) {
        return Err(invalid(format!("observation fraction {obs_fraction} outside (0, 1]")));
    }
    let z = gt.slack();
    let sd = if gt.tau.is_infinite() { 0.0 } else { 1.0 / gt.tau.sqrt() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for i in 0..z.nrows() {
        for j in 0..z.ncols() {
            let keep: f64 = rng.random();
            let eps: f64 = StandardNormal.sample(&mut rng);
            if obs_fraction < 1.0 && keep >= obs_fraction {
                continue;
            }
            let label = gt.bins.quantize(z[(i, j)] + sd * eps)?;
            entries.push(Observation {
                question: i,
                learner: j,
                label,
            });
        }
    }
    ResponseMatrix::new(z.nrows(), z.ncols(), entries)
}

/// Relative squared errors of aligned estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryErrors {
    pub e_w: f64,
    pub e_c: f64,
    pub e_mu: f64,
}

fn cosine(a: nalgebra::DVectorView<'_, f64>, b: nalgebra::DVectorView<'_, f64>) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        a.dot(&b) / (na * nb)
    }
}

/// Column cosine similarities `sim[(true k, estimated l)]`.
pub fn column_similarity(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(truth.ncols(), est.ncols(), |k, l| {
        cosine(truth.column(k).as_view(), est.column(l).as_view())
    })
}

/// Square assignment maximizing `sum_k weight[(k, perm[k])]` (Hungarian method).
pub fn max_weight_assignment(weight: &DMatrix<f64>) -> Vec<usize> {
    let n = weight.nrows();
    assert_eq!(n, weight.ncols(), "assignment needs a square matrix");
    // potentials formulation on cost = -weight, 1-based with a sentinel column 0
    let cost = |i: usize, j: usize| -weight[(i - 1, j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[matched_row[j] - 1] = j - 1;
    }
    perm
}

/// Permutes and rescales the concepts of `est` to best match `truth`.
///
/// Columns are matched by maximal total cosine similarity of `W` columns.
/// Each matched column of `W` is then scaled by the positive least-squares
/// factor against the true column, and the corresponding row of `C` by its
/// inverse, so `W C` is unchanged.
pub fn align_factors(est: &FactorModel, truth: &GroundTruth) -> Result<FactorModel> {
    let k = truth.num_concepts();
    if est.num_concepts() != k {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {} concepts, truth has {k}",
            est.num_concepts()
        )));
    }
    if est.w.nrows() != truth.w.nrows() || est.c.ncols() != truth.c.ncols() {
        return Err(Error::DimensionMismatch("estimate and truth sizes differ".into()));
    }
    let perm = max_weight_assignment(&column_similarity(&est.w, &truth.w));
    let mut w = DMatrix::zeros(est.w.nrows(), k);
    let mut c = DMatrix::zeros(k, est.c.ncols());
    for (dst, &src) in perm.iter().enumerate() {
        let col = est.w.column(src);
        let norm2 = col.norm_squared();
        let overlap = col.dot(&truth.w.column(dst));
        let scale = if norm2 > 0.0 && overlap > 0.0 { overlap / norm2 } else { 1.0 };
        w.set_column(dst, &(col * scale));
        c.set_row(dst, &(est.c.row(src) / scale));
    }
    let mut aligned = est.clone();
    aligned.w = w;
    aligned.c = c;
    Ok(aligned)
}

pub fn recovery_errors(aligned: &FactorModel, truth: &GroundTruth) -> Result<RecoveryErrors> {
    if aligned.w.shape() != truth.w.shape() || aligned.c.shape() != truth.c.shape() || aligned.mu.len() != truth.mu.len()
    {
        return Err(Error::DimensionMismatch("estimate and truth sizes differ".into()));
    }
    let rel = |est: f64, reference: f64, what: &str| {
        if reference == 0.0 {
            Err(invalid(format!("true {what} has zero norm")))
        } else {
            Ok(est / reference)
        }
    };
    Ok(RecoveryErrors {
        e_w: rel((&truth.w - &aligned.w).norm_squared(), truth.w.norm_squared(), "W")?,
        e_c: rel((&truth.c - &aligned.c).norm_squared(), truth.c.norm_squared(), "C")?,
        e_mu: rel((&truth.mu - &aligned.mu).norm_squared(), truth.mu.norm_squared(), "mu")?,
    })
}

/// A fitted-model shaped copy of the truth (useful as an oracle estimate).
pub fn truth_as_model(truth: &GroundTruth) -> FactorModel {
    FactorModel {
        w: truth.w.clone(),
        mu: truth.mu.clone(),
        c: truth.c.clone(),
        tau: if truth.tau.is_finite() { truth.tau } else { 1.0 },
        thresholds: crate::model::Thresholds::Shared(truth.bins.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rows_have_one_to_three_nonnegative_entries() {
        let gt = generate_ground_truth(200, 30, 5, &GeneratorParams::standard(5), 1).unwrap();
        for row in gt.w.row_iter() {
            let nnz = row.iter().filter(|&&x| x != 0.0).count();
            assert!((1..=3).contains(&nnz));
            assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn exponential_mean_matches_rate() {
        let gt = generate_ground_truth(40_000, 1, 5, &GeneratorParams::standard(5), 2).unwrap();
        let nz: Vec<f64> = gt.w.iter().copied().filter(|&x| x != 0.0).collect();
        assert!(nz.len() >= 100_000 / 2);
        let mean = nz.iter().sum::<f64>() / nz.len() as f64;
        assert!((mean - 1.0 / 0.66).abs() <= 0.02 * (1.0 / 0.66), "mean {mean}");
    }

    #[test]
    fn generator_is_deterministic_and_validates() {
        let p = GeneratorParams::standard(3);
        assert_eq!(generate_ground_truth(5, 4, 3, &p, 9).unwrap(), generate_ground_truth(5, 4, 3, &p, 9).unwrap());
        let mut bad = p.clone();
        bad.v_mu = 0.0;
        assert!(generate_ground_truth(5, 4, 3, &bad, 9).is_err());
        let mut bad = p;
        bad.v0 = -DMatrix::identity(3, 3);
        assert!(generate_ground_truth(5, 4, 3, &bad, 9).is_err());
    }

    /// Bisection on the CDF as an independent inverse.
    fn quantile_by_bisection(p: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if crate::model::std_normal_cdf(mid).unwrap() < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn even_bins() {
        assert_eq!(make_even_bins(2).unwrap().boundaries(), &[f64::NEG_INFINITY, 0.0, f64::INFINITY]);
        let q = make_even_bins(4).unwrap();
        for (p, &b) in q.interior().iter().enumerate() {
            assert_relative_eq!(b, quantile_by_bisection((p + 1) as f64 / 4.0), epsilon = 1e-10);
        }
        assert_relative_eq!(q.interior()[2], 0.6745, epsilon = 1e-4);
        assert!(make_even_bins(1).is_err());
    }

    #[test]
    fn noiseless_responses_quantize_slack() {
        let mut p = GeneratorParams::standard(3);
        p.tau = f64::INFINITY;
        let gt = generate_ground_truth(10, 12, 3, &p, 4).unwrap();
        let y = generate_responses(&gt, 1.0, 5).unwrap();
        assert_eq!(y.num_observed(), 120);
        let z = gt.slack();
        for e in y.entries() {
            assert_eq!(e.label, gt.bins.quantize(z[(e.question, e.learner)]).unwrap());
        }
        let partial = generate_responses(&gt, 0.3, 5).unwrap();
        assert!(partial.num_observed() < 120);
    }

    #[test]
    fn standard_bins_give_near_uniform_labels() {
        let gt = generate_ground_truth(200, 200, 5, &GeneratorParams::standard(5), 1).unwrap();
        let y = generate_responses(&gt, 1.0, 2).unwrap();
        let mut counts = [0usize; 6];
        for e in y.entries() {
            counts[e.label] += 1;
        }
        for &c in &counts[1..] {
            let freq = c as f64 / y.num_observed() as f64;
            assert!((freq - 0.2).abs() <= 0.05, "{counts:?}");
        }
    }

    #[test]
    fn even_bins_split_standard_normal_evenly() {
        let q = make_even_bins(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100_000;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            let x: f64 = StandardNormal.sample(&mut rng);
            counts[q.quantize(x).unwrap()] += 1;
        }
        let expected = n as f64 / 5.0;
        let chi2: f64 = counts[1..].iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99.9% quantile of chi-square with 4 degrees of freedom
        assert!(chi2 < 18.47, "chi2 {chi2}");
    }

    fn brute_force_best(weight: &DMatrix<f64>) -> f64 {
        fn rec(weight: &DMatrix<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == weight.nrows() {
                return 0.0;
            }
            let mut best = f64::NEG_INFINITY;
            for j in 0..weight.ncols() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(weight[(row, j)] + rec(weight, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(weight, 0, &mut vec![false; weight.ncols()])
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for k in 1..=6 {
            for _ in 0..10 {
                let m = DMatrix::from_fn(k, k, |_, _| rng.random::<f64>());
                let perm = max_weight_assignment(&m);
                let mut seen = perm.clone();
                seen.sort_unstable();
                assert_eq!(seen, (0..k).collect::<Vec<_>>());
                let total: f64 = perm.iter().enumerate().map(|(r, &c)| m[(r, c)]).sum();
                assert_relative_eq!(total, brute_force_best(&m), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn alignment_undoes_permutation_and_scaling() {
        let gt = generate_ground_truth(30, 20, 4, &GeneratorParams::standard(4), 3).unwrap();
        let perm = [2, 0, 3, 1];
        let scales = [2.0, 0.5, 1.0, 3.0];
        let mut est = truth_as_model(&gt);
        for (dst, &src) in perm.iter().enumerate() {
            est.w.set_column(dst, &(gt.w.column(src) * scales[dst]));
            est.c.set_row(dst, &(gt.c.row(src) / scales[dst]));
        }
        let aligned = align_factors(&est, &gt).unwrap();
        let e = recovery_errors(&aligned, &gt).unwrap();
        assert!(e.e_w < 1e-24 && e.e_c < 1e-24 && e.e_mu == 0.0, "{e:?}");
    }

    #[test]
    fn recovery_error_identities() {
        let gt = generate_ground_truth(10, 8, 3, &GeneratorParams::standard(3), 4).unwrap();
        let mut m = truth_as_model(&gt);
        let e = recovery_errors(&m, &gt).unwrap();
        assert_eq!((e.e_w, e.e_c, e.e_mu), (0.0, 0.0, 0.0));
        m.w.fill(0.0);
        assert_eq!(recovery_errors(&m, &gt).unwrap().e_w, 1.0);

        // scalar-loop oracle
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = FactorModel {
            w: gt.w.map(|x| x + rng.random::<f64>()),
            c: gt.c.map(|x| x * 0.9),
            mu: gt.mu.map(|x| x - 0.1),
            ..truth_as_model(&gt)
        };
        let e = recovery_errors(&m, &gt).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..10 {
            for k in 0..3 {
                num += (gt.w[(i, k)] - m.w[(i, k)]).powi(2);
                den += gt.w[(i, k)].powi(2);
            }
        }
        assert_relative_eq!(e.e_w, num / den, max_relative = 1e-12);
    }
}
