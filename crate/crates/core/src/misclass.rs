//! Misclassification matrix and category probabilities.
//!
//! Categorizing an error-contaminated measurement misclassifies the true
//! category. Under the transformed-scale normal error model the double
//! integral defining each matrix entry collapses: the inner integral over
//! the observed cell is a normal CDF difference, leaving one smooth 1-D
//! integral per entry which is evaluated by adaptive Gauss-Kronrod
//! quadrature on the transformed scale.

use crate::dist::{norm_cdf, norm_pdf};
use crate::error::{Error, Result};
use crate::error_model::{
    box_cox_unchecked, fit_error_params, fit_lambda, transformed_lower_bound,
    transformed_upper_bound, ErrorModelParams, ReplicateData,
};
use crate::quadrature::integrate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

const ROW_SUM_TOL: f64 = 1e-10;
const MIN_CATEGORY_MASS: f64 = 1e-6;
const QUAD_ABS_TOL: f64 = 1e-9;
const TAIL_SIGMAS: f64 = 10.0;
/// Out-of-support normal mass above which the estimate is flagged.
pub const SUPPORT_MASS_WARN: f64 = 1e-4;

/// Category intervals C_1 = (0, c_1), C_j = [c_{j-1}, c_j), C_J = [c_{J-1}, ∞).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScheme {
    cutpoints: Vec<f64>,
}

impl CategoryScheme {
    pub fn new(cutpoints: Vec<f64>) -> Result<Self> {
        if cutpoints.is_empty() {
            return Err(Error::invalid("need at least one cutpoint (J >= 2)"));
        }
        if !(cutpoints[0] > 0.0) {
            return Err(Error::invalid(format!(
                "cutpoints must be positive, got {}",
                cutpoints[0]
            )));
        }
        if cutpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("cutpoints must be strictly increasing"));
        }
        Ok(CategoryScheme { cutpoints })
    }

    /// Cutpoints at the k/J quantiles of the observed sample, k = 1..J−1
    /// (linear interpolation between order statistics).
    pub fn from_quantiles(w: &[f64], j: usize) -> Result<Self> {
        if j < 2 {
            return Err(Error::invalid(format!("need J >= 2 categories, got {j}")));
        }
        if w.len() < j {
            return Err(Error::invalid(format!(
                "need at least J = {j} observations to place quantile cutpoints, got {}",
                w.len()
            )));
        }
        let mut sorted = w.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let cuts: Vec<f64> = (1..j)
            .map(|k| {
                let h = (n - 1) as f64 * k as f64 / j as f64;
                let lo = h.floor() as usize;
                let frac = h - lo as f64;
                if lo + 1 < n {
                    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
                } else {
                    sorted[lo]
                }
            })
            .collect();
        CategoryScheme::new(cuts)
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    /// Number of categories J.
    pub fn n_categories(&self) -> usize {
        self.cutpoints.len() + 1
    }

    /// Zero-based category index of x under the half-open convention:
    /// a point exactly on cutpoint c_k belongs to the upper cell.
    pub fn categorize(&self, x: f64) -> Result<usize> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("categorize requires x > 0, got {x}")));
        }
        Ok(self.cutpoints.partition_point(|&c| c <= x))
    }

    /// Cell bounds on the transformed scale; outermost cells run to ±∞.
    fn transformed_bounds(&self, lambda: f64) -> Vec<(f64, f64)> {
        let t: Vec<f64> = self.cutpoints.iter().map(|&c| box_cox_unchecked(c, lambda)).collect();
        let j = self.n_categories();
        (0..j)
            .map(|k| {
                let lo = if k == 0 { f64::NEG_INFINITY } else { t[k - 1] };
                let hi = if k == j - 1 { f64::INFINITY } else { t[k] };
                (lo, hi)
            })
            .collect()
    }
}

/// Row-stochastic matrix: nonnegative entries, rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    entries: Array2<f64>,
}

impl StochasticMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(Error::invalid(format!("expected a square matrix, got {r}x{c}")));
        }
        for (i, row) in entries.rows().into_iter().enumerate() {
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::invalid(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("row {i} sums to {s}, expected 1")));
            }
        }
        Ok(StochasticMatrix { entries })
    }

    /// Rescales each row by its sum, then validates.
    pub fn from_renormalized(mut entries: Array2<f64>) -> Result<Self> {
        for mut row in entries.rows_mut() {
            let s: f64 = row.sum();
            if !(s > 0.0) {
                return Err(Error::numerical("cannot renormalize a row with nonpositive sum"));
            }
            row.mapv_inplace(|v| v / s);
        }
        StochasticMatrix::new(entries)
    }

    pub fn identity(j: usize) -> Self {
        StochasticMatrix { entries: Array2::eye(j) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[[from, to]]
    }

    pub fn frobenius_distance(&self, other: &StochasticMatrix) -> f64 {
        (&self.entries - &other.entries).mapv(|v| v * v).sum().sqrt()
    }
}

/// Probability vector over the J categories.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryProbs {
    probs: Vec<f64>,
}

impl CategoryProbs {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("empty probability vector"));
        }
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::invalid("probabilities must be nonnegative and finite"));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::invalid(format!("probabilities sum to {s}, expected 1")));
        }
        Ok(CategoryProbs { probs })
    }

    pub fn from_renormalized(mut probs: Vec<f64>) -> Result<Self> {
        let s: f64 = probs.iter().sum();
        if !(s > 0.0) {
            return Err(Error::numerical("cannot renormalize probabilities with nonpositive sum"));
        }
        probs.iter_mut().for_each(|p| *p /= s);
        CategoryProbs::new(probs)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, j: usize) -> f64 {
        self.probs[j]
    }
}

/// Estimated misclassification structure: Π, p, and the normal mass falling
/// outside the transformed support (renormalized away; large values signal a
/// poorly fitting transformation).
#[derive(Debug, Clone)]
pub struct PiPEstimate {
    pub pi: StochasticMatrix,
    pub p: CategoryProbs,
    pub out_of_support_mass: f64,
}

impl PiPEstimate {
    pub fn support_warning(&self) -> bool {
        self.out_of_support_mass > SUPPORT_MASS_WARN
    }
}

/// The fitted error mechanism: transformed-scale parameters plus the
/// categorization it applies to.
#[derive(Debug, Clone)]
pub struct MisclassModel {
    pub params: ErrorModelParams,
    pub scheme: CategoryScheme,
}

impl MisclassModel {
    /// Fits the full error mechanism from the primary sample and replicates
    /// (the transformation exponent is estimated from `primary_w` unless
    /// supplied).
    pub fn fit(
        primary_w: &[f64],
        replicates: &ReplicateData,
        scheme: CategoryScheme,
        lambda: Option<f64>,
    ) -> Result<Self> {
        let lambda = match lambda {
            Some(l) => l,
            None => fit_lambda(primary_w)?.lambda,
        };
        let params = fit_error_params(primary_w, replicates, Some(lambda))?;
        Ok(MisclassModel { params, scheme })
    }

    pub fn pi_p(&self) -> Result<PiPEstimate> {
        estimate_pi_p(&self.params, &self.scheme)
    }
}

/// P(W ∈ C_j | X = x): the probability that the contaminated measurement of
/// a subject with true value x lands in category j (zero-based).
///
/// With σ_u = 0 this degenerates to the indicator of x ∈ C_j.
pub fn cell_prob_w_given_x(
    x: f64,
    j: usize,
    params: &ErrorModelParams,
    scheme: &CategoryScheme,
) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("requires x > 0, got {x}")));
    }
    if j >= scheme.n_categories() {
        return Err(Error::invalid(format!(
            "category index {j} out of range for J = {}",
            scheme.n_categories()
        )));
    }
    let tx = box_cox_unchecked(x, params.lambda);
    if params.sigma2_u == 0.0 {
        return Ok(if scheme.categorize(x)? == j { 1.0 } else { 0.0 });
    }
    let su = params.sigma2_u.sqrt();
    let (lo, hi) = scheme.transformed_bounds(params.lambda)[j];
    let upper = if hi.is_infinite() { 1.0 } else { norm_cdf((hi - tx) / su) };
    let lower = if lo.is_infinite() { 0.0 } else { norm_cdf((lo - tx) / su) };
    Ok(upper - lower)
}

/// Estimates the misclassification matrix Π and category probabilities p
/// from the fitted error mechanism.
///
/// p_j is the normal mass of the transformed cell; π_{j'j} integrates the
/// observed-cell probability against the conditional density of the true
/// transformed value over cell j'. Outer tails are truncated at ±10σ and
/// rows are rescaled by their sums, which also absorbs the (negligible)
/// normal mass outside the transformed support.
pub fn estimate_pi_p(params: &ErrorModelParams, scheme: &CategoryScheme) -> Result<PiPEstimate> {
    if !(params.sigma2_lambda_x > 0.0) {
        return Err(Error::invalid("sigma2_lambda_x must be positive"));
    }
    let j = scheme.n_categories();
    let mu = params.mu_lambda_x;
    let sx = params.sigma2_lambda_x.sqrt();
    let bounds = scheme.transformed_bounds(params.lambda);

    let cell_mass = |&(lo, hi): &(f64, f64)| -> f64 {
        let upper = if hi.is_infinite() { 1.0 } else { norm_cdf((hi - mu) / sx) };
        let lower = if lo.is_infinite() { 0.0 } else { norm_cdf((lo - mu) / sx) };
        upper - lower
    };
    let raw_p: Vec<f64> = bounds.iter().map(cell_mass).collect();
    for (k, &pk) in raw_p.iter().enumerate() {
        if pk < MIN_CATEGORY_MASS {
            return Err(Error::EmptyCategory {
                index: k,
                detail: format!(
                    "estimated category probability {pk:.3e} below {MIN_CATEGORY_MASS:.0e}; \
                     the naive-parameter map is undefined for empty categories"
                ),
            });
        }
    }
    let p = CategoryProbs::from_renormalized(raw_p)?;

    let lower_support = transformed_lower_bound(params.lambda);
    let upper_support = transformed_upper_bound(params.lambda);
    let mut out_of_support_mass = 0.0;
    if lower_support.is_finite() {
        out_of_support_mass += norm_cdf((lower_support - mu) / sx);
    }
    if upper_support.is_finite() {
        out_of_support_mass += 1.0 - norm_cdf((upper_support - mu) / sx);
    }

    if params.sigma2_u == 0.0 {
        return Ok(PiPEstimate { pi: StochasticMatrix::identity(j), p, out_of_support_mass });
    }

    let su = params.sigma2_u.sqrt();
    let mut pi = Array2::<f64>::zeros((j, j));
    for (jp, &(row_lo, row_hi)) in bounds.iter().enumerate() {
        let a = row_lo.max(mu - TAIL_SIGMAS * sx);
        let b = row_hi.min(mu + TAIL_SIGMAS * sx);
        for (col, &(cell_lo, cell_hi)) in bounds.iter().enumerate() {
            let value = if a < b {
                integrate(
                    |t| {
                        let upper =
                            if cell_hi.is_infinite() { 1.0 } else { norm_cdf((cell_hi - t) / su) };
                        let lower =
                            if cell_lo.is_infinite() { 0.0 } else { norm_cdf((cell_lo - t) / su) };
                        (upper - lower) * norm_pdf((t - mu) / sx) / sx
                    },
                    a,
                    b,
                    QUAD_ABS_TOL,
                )?
                .value
            } else {
                // the whole row cell sits beyond the ±10σ truncation
                0.0
            };
            pi[[jp, col]] = value.max(0.0);
        }
    }
    let pi = StochasticMatrix::from_renormalized(pi)?;
    Ok(PiPEstimate { pi, p, out_of_support_mass })
}

/// Per-group misclassification structure for a discrete precisely measured
/// covariate, with deviations from the pooled structure.
#[derive(Debug, Clone)]
pub struct GroupPiP {
    pub per_level: Vec<PiPEstimate>,
    pub pooled_pi: StochasticMatrix,
    pub pooled_p: CategoryProbs,
    /// max-entry deviation |Π(z) − Π̄|_∞ per level
    pub max_pi_deviation: Vec<f64>,
    /// max-entry deviation |p(z) − p̄|_∞ per level
    pub max_p_deviation: Vec<f64>,
}

/// Applies [`estimate_pi_p`] within each level of a discrete covariate and
/// reports how far each level's structure sits from the pooled one.
///
/// The pooled quantities are the mixture implied by the level weights:
/// p̄ = Σ_z w_z p(z) and, row-wise, Π̄_{j'·} = Σ_z w_z p_{j'}(z) Π_{j'·}(z)
/// normalized by Σ_z w_z p_{j'}(z). Weights default to equal; pass the level
/// frequencies to match an observed mixture.
pub fn estimate_pi_p_by_group(
    params_by_level: &[ErrorModelParams],
    weights: Option<&[f64]>,
    scheme: &CategoryScheme,
) -> Result<GroupPiP> {
    if params_by_level.is_empty() {
        return Err(Error::invalid("no groups supplied"));
    }
    let l = params_by_level.len();
    let weights: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != l {
                return Err(Error::invalid(format!(
                    "got {} weights for {l} groups",
                    w.len()
                )));
            }
            if w.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::invalid("group weights must be positive"));
            }
            let s: f64 = w.iter().sum();
            w.iter().map(|&v| v / s).collect()
        }
        None => vec![1.0 / l as f64; l],
    };

    let per_level: Vec<PiPEstimate> = params_by_level
        .iter()
        .map(|params| estimate_pi_p(params, scheme))
        .collect::<Result<_>>()?;

    let j = scheme.n_categories();
    let mut pooled_p = vec![0.0; j];
    for (est, &w) in per_level.iter().zip(&weights) {
        for (k, pk) in est.p.values().iter().enumerate() {
            pooled_p[k] += w * pk;
        }
    }
    let mut pooled_pi = Array2::<f64>::zeros((j, j));
    for jp in 0..j {
        let mut row = vec![0.0; j];
        let mut mass = 0.0;
        for (est, &w) in per_level.iter().zip(&weights) {
            let cell_w = w * est.p.get(jp);
            mass += cell_w;
            for (col, r) in row.iter_mut().enumerate() {
                *r += cell_w * est.pi.get(jp, col);
            }
        }
        for (col, r) in row.iter().enumerate() {
            pooled_pi[[jp, col]] = r / mass;
        }
    }
    let pooled_pi = StochasticMatrix::from_renormalized(pooled_pi)?;
    let pooled_p = CategoryProbs::from_renormalized(pooled_p)?;

    let max_pi_deviation = per_level
        .iter()
        .map(|est| {
            (est.pi.entries() - pooled_pi.entries())
                .iter()
                .fold(0.0f64, |acc, &d| acc.max(d.abs()))
        })
        .collect();
    let max_p_deviation = per_level
        .iter()
        .map(|est| {
            est.p
                .values()
                .iter()
                .zip(pooled_p.values())
                .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()))
        })
        .collect();

    Ok(GroupPiP { per_level, pooled_pi, pooled_p, max_pi_deviation, max_p_deviation })
}
