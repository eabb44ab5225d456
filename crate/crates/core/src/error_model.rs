//! Box-Cox measurement-error model.
//!
//! The contaminated measurement `W` relates to the true value `X` additively
//! on a transformed scale: `Λ(W,λ) = Λ(X,λ) + U` with `Λ(X,λ)` normal and
//! `U` centered normal. This module fits the transformation exponent by
//! profile likelihood and recovers the transformed-scale mean and the two
//! variance components from replicate measurements.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Fitted Box-Cox transformation exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCoxParam {
    pub lambda: f64,
}

/// Parameters of the transformed-scale error mechanism.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorModelParams {
    pub lambda: f64,
    /// Mean of Λ(X, λ).
    pub mu_lambda_x: f64,
    /// Variance of Λ(X, λ).
    pub sigma2_lambda_x: f64,
    /// Measurement-error variance on the transformed scale.
    pub sigma2_u: f64,
    /// True when the signal-variance estimate came out non-positive and was
    /// floored; downstream results should be treated with suspicion.
    pub sigma2_floored: bool,
}

impl ErrorModelParams {
    pub fn new(lambda: f64, mu_lambda_x: f64, sigma2_lambda_x: f64, sigma2_u: f64) -> Result<Self> {
        if !(sigma2_lambda_x > 0.0) {
            return Err(Error::invalid(format!(
                "sigma2_lambda_x must be positive, got {sigma2_lambda_x}"
            )));
        }
        if !(sigma2_u >= 0.0) {
            return Err(Error::invalid(format!("sigma2_u must be nonnegative, got {sigma2_u}")));
        }
        Ok(ErrorModelParams { lambda, mu_lambda_x, sigma2_lambda_x, sigma2_u, sigma2_floored: false })
    }
}

/// Replicate measurements: `n0` subjects, `r` strictly positive values each.
#[derive(Debug, Clone)]
pub struct ReplicateData {
    values: Vec<Vec<f64>>,
}

impl ReplicateData {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "replicate data needs at least 2 subjects, got {}",
                values.len()
            )));
        }
        let r = values[0].len();
        if r < 2 {
            return Err(Error::invalid(format!(
                "measurement-error variance is unidentifiable with R = {r} replicate(s); need R >= 2"
            )));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != r {
                return Err(Error::invalid(format!(
                    "subject {i} has {} replicates, expected {r}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::domain(format!(
                    "replicate value {v} for subject {i} is not strictly positive"
                )));
            }
        }
        Ok(ReplicateData { values })
    }

    pub fn n_subjects(&self) -> usize {
        self.values.len()
    }

    pub fn n_replicates(&self) -> usize {
        self.values[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Resamples subjects with replacement (bootstrap helper).
    pub fn resample(&self, indices: &[usize]) -> ReplicateData {
        ReplicateData { values: indices.iter().map(|&i| self.values[i].clone()).collect() }
    }
}

/// Box-Cox transform Λ(x, λ) = (x^λ − 1)/λ, with Λ(x, 0) = log x.
///
/// Computed through expm1 so the λ → 0 limit is reached smoothly.
pub fn box_cox_transform(x: f64, lambda: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("Box-Cox transform requires x > 0, got {x}")));
    }
    Ok(box_cox_unchecked(x, lambda))
}

#[inline]
pub(crate) fn box_cox_unchecked(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        x.ln()
    } else if lambda == 1.0 {
        x - 1.0
    } else {
        (lambda * x.ln()).exp_m1() / lambda
    }
}

/// Inverse transform: the x > 0 with Λ(x, λ) = t.
///
/// Defined only while λ·t + 1 > 0 (the image of the positive half-line).
pub fn box_cox_inverse(t: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(t.exp());
    }
    if lambda == 1.0 {
        if t <= -1.0 {
            return Err(Error::domain(format!(
                "Box-Cox inverse undefined: t + 1 = {} <= 0",
                t + 1.0
            )));
        }
        return Ok(t + 1.0);
    }
    let arg = lambda * t;
    if arg <= -1.0 {
        return Err(Error::domain(format!(
            "Box-Cox inverse undefined: λt + 1 = {} <= 0 (t = {t}, λ = {lambda})",
            arg + 1.0
        )));
    }
    Ok((arg.ln_1p() / lambda).exp())
}

/// Lower bound of the transformed support: Λ((0,∞), λ) = (bound, ∞) for λ > 0.
/// Returns -inf for λ <= 0 lower side; for λ < 0 the support is bounded above.
pub(crate) fn transformed_lower_bound(lambda: f64) -> f64 {
    if lambda > 0.0 {
        -1.0 / lambda
    } else {
        f64::NEG_INFINITY
    }
}

pub(crate) fn transformed_upper_bound(lambda: f64) -> f64 {
    if lambda < 0.0 {
        -1.0 / lambda
    } else {
        f64::INFINITY
    }
}

/// Profile log-likelihood of the Box-Cox exponent:
/// L(λ) = −(n/2)·log v̂(λ) + (λ−1)·Σ log w, with v̂ the mean-squared
/// deviation of the transformed sample.
pub fn profile_loglik(w: &[f64], lambda: f64) -> f64 {
    let logs: Vec<f64> = w.iter().map(|wi| wi.ln()).collect();
    let sum_logs = logs.iter().sum();
    profile_loglik_from_logs(&logs, sum_logs, lambda)
}

/// Same likelihood evaluated from precomputed logs (the grid search calls
/// this hundreds of times per fit). Single pass, anchored at the first
/// transformed value to keep the variance accumulation stable.
fn profile_loglik_from_logs(logs: &[f64], sum_logs: f64, lambda: f64) -> f64 {
    let n = logs.len() as f64;
    let transform = |l: f64| -> f64 {
        if lambda == 0.0 {
            l
        } else {
            (lambda * l).exp_m1() / lambda
        }
    };
    let anchor = transform(logs[0]);
    let mut s = 0.0;
    let mut s2 = 0.0;
    for &l in logs {
        let d = transform(l) - anchor;
        s += d;
        s2 += d * d;
    }
    let var = (s2 / n - (s / n) * (s / n)).max(f64::MIN_POSITIVE);
    -0.5 * n * var.ln() + (lambda - 1.0) * sum_logs
}

const LAMBDA_LO: f64 = -2.0;
const LAMBDA_HI: f64 = 2.0;
const LAMBDA_GRID_STEP: f64 = 0.01;
const LAMBDA_TOL: f64 = 1e-5;

/// Maximum-likelihood estimate of the Box-Cox exponent.
///
/// Coarse grid over [−2, 2] at step 0.01, then golden-section refinement of
/// the bracketing interval down to 1e−5.
pub fn fit_lambda(w: &[f64]) -> Result<BoxCoxParam> {
    if w.len() < 10 {
        return Err(Error::invalid(format!(
            "lambda estimation needs n >= 10 observations, got {}",
            w.len()
        )));
    }
    if let Some(v) = w.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::domain(format!("observation {v} is not strictly positive")));
    }
    let first = w[0];
    if w.iter().all(|&v| v == first) {
        return Err(Error::estimation("degenerate sample: all observations equal"));
    }

    let logs: Vec<f64> = w.iter().map(|wi| wi.ln()).collect();
    let sum_logs: f64 = logs.iter().sum();
    let n_steps = ((LAMBDA_HI - LAMBDA_LO) / LAMBDA_GRID_STEP).round() as usize;
    let mut best_i = 0usize;
    let mut best_ll = f64::NEG_INFINITY;
    for i in 0..=n_steps {
        let lam = LAMBDA_LO + i as f64 * LAMBDA_GRID_STEP;
        let ll = profile_loglik_from_logs(&logs, sum_logs, lam);
        if ll > best_ll {
            best_ll = ll;
            best_i = i;
        }
    }
    let lo = LAMBDA_LO + best_i.saturating_sub(1) as f64 * LAMBDA_GRID_STEP;
    let hi = LAMBDA_LO + (best_i + 1).min(n_steps) as f64 * LAMBDA_GRID_STEP;
    let lambda =
        golden_max(|lam| profile_loglik_from_logs(&logs, sum_logs, lam), lo, hi, LAMBDA_TOL);
    if !lambda.is_finite() {
        return Err(Error::estimation("lambda profile likelihood maximization failed"));
    }
    Ok(BoxCoxParam { lambda })
}

/// Golden-section maximization on [a, b] to interval width `tol`.
fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

const SIGMA2_FLOOR: f64 = 1e-8;

/// Estimates (μ_λx, σ²_u, σ²_λx) from replicate measurements.
///
/// With per-subject replicate means m_i and within-subject sample variances
/// v_i of the transformed values, the estimating equations give
/// μ̂ = mean(m), σ̂²_u = mean(v), and σ̂²_λx = mean((m − μ̂)²) − σ̂²_u/R.
/// A non-positive signal variance is floored at 1e−8 and flagged.
///
/// When `lambda` is not supplied it is estimated from `primary_w`.
pub fn fit_error_params(
    primary_w: &[f64],
    replicates: &ReplicateData,
    lambda: Option<f64>,
) -> Result<ErrorModelParams> {
    let lambda = match lambda {
        Some(l) => l,
        None => fit_lambda(primary_w)?.lambda,
    };
    let n0 = replicates.n_subjects() as f64;
    let r = replicates.n_replicates() as f64;

    let mut subject_means = Vec::with_capacity(replicates.n_subjects());
    let mut sigma2_u_acc = 0.0;
    for row in replicates.rows() {
        let transformed: Vec<f64> = row.iter().map(|&w| box_cox_unchecked(w, lambda)).collect();
        let m: f64 = transformed.iter().sum::<f64>() / r;
        let v: f64 = transformed.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (r - 1.0);
        subject_means.push(m);
        sigma2_u_acc += v;
    }
    let sigma2_u = sigma2_u_acc / n0;
    let mu = subject_means.iter().sum::<f64>() / n0;
    let between = subject_means.iter().map(|m| (m - mu) * (m - mu)).sum::<f64>() / n0;
    let raw_sigma2_lambda_x = between - sigma2_u / r;

    let (sigma2_lambda_x, floored) = if raw_sigma2_lambda_x > 0.0 {
        (raw_sigma2_lambda_x, false)
    } else {
        (SIGMA2_FLOOR, true)
    };

    Ok(ErrorModelParams { lambda, mu_lambda_x: mu, sigma2_lambda_x, sigma2_u, sigma2_floored: floored })
}
