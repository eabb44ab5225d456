//! No-intercept regressions on category indicators.
//!
//! The design holds one indicator column per category (no intercept; the
//! indicators span it) plus optional precisely measured covariates. Identity
//! link is ordinary least squares; logit and probit are fitted by
//! iteratively reweighted least squares with step-halving, standard errors
//! from the inverse observed information.

use crate::dist::{norm_cdf, norm_pdf, norm_quantile};
use crate::error::{Error, Result};
use crate::misclass::CategoryScheme;
use ndarray::{Array1, Array2};
use ndarray_linalg::{Inverse, Solve};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 100;
const SEPARATION_THRESHOLD: f64 = 30.0;
const PROB_CLAMP: f64 = 1e-10;

/// Link function of the misspecified model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    Logit,
    Probit,
}

impl Link {
    pub fn is_binary(self) -> bool {
        !matches!(self, Link::Identity)
    }

    /// g(μ)
    pub fn link(self, mu: f64) -> f64 {
        match self {
            Link::Identity => mu,
            Link::Logit => (mu / (1.0 - mu)).ln(),
            Link::Probit => norm_quantile(mu),
        }
    }

    /// g⁻¹(η)
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Logit => 1.0 / (1.0 + (-eta).exp()),
            Link::Probit => norm_cdf(eta),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Logit => "logit",
            Link::Probit => "probit",
        }
    }
}

impl FromStr for Link {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(Link::Identity),
            "logit" | "logistic" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            other => Err(Error::invalid(format!(
                "unknown link '{other}' (expected identity, logit or probit)"
            ))),
        }
    }
}

/// Observed data: response, contaminated covariate and optional precise
/// covariates.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Option<Array2<f64>>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, w: Vec<f64>, z: Option<Array2<f64>>) -> Result<Self> {
        if y.len() != w.len() {
            return Err(Error::invalid(format!(
                "response length {} != covariate length {}",
                y.len(),
                w.len()
            )));
        }
        if let Some(z) = &z {
            if z.nrows() != y.len() {
                return Err(Error::invalid(format!(
                    "covariate matrix has {} rows for {} observations",
                    z.nrows(),
                    y.len()
                )));
            }
        }
        Ok(Dataset { y, w, z })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.z.as_ref().map_or(0, Array2::ncols)
    }

    /// Row-resampled copy (bootstrap helper).
    pub fn resample(&self, indices: &[usize]) -> Dataset {
        let y = indices.iter().map(|&i| self.y[i]).collect();
        let w = indices.iter().map(|&i| self.w[i]).collect();
        let z = self.z.as_ref().map(|z| {
            let mut out = Array2::zeros((indices.len(), z.ncols()));
            for (r, &i) in indices.iter().enumerate() {
                out.row_mut(r).assign(&z.row(i));
            }
            out
        });
        Dataset { y, w, z }
    }
}

/// Fitted coefficients of the misspecified model.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Coefficients of the J category indicators.
    pub theta: Vec<f64>,
    /// Coefficients of the precise covariates.
    pub theta_z: Vec<f64>,
    /// Standard errors for (theta, theta_z), concatenated.
    pub se: Option<Vec<f64>>,
    /// Full coefficient covariance (J+q square), observed information based.
    pub covariance: Option<Array2<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub link: Link,
    /// Set when a coefficient exceeded the separation threshold on a binary
    /// link; the estimate is the last iterate and should be discarded by
    /// resampling procedures.
    pub separation: bool,
}

impl FitResult {
    pub fn n_categories(&self) -> usize {
        self.theta.len()
    }

    /// θ_J − θ_1.
    pub fn relative_difference(&self) -> f64 {
        self.theta[self.theta.len() - 1] - self.theta[0]
    }

    pub fn usable(&self) -> bool {
        self.converged && !self.separation
    }
}

/// Builds the n × (J+q) design: one indicator column per category followed
/// by the covariate columns. No intercept.
pub fn build_design(
    w: &[f64],
    scheme: &CategoryScheme,
    z: Option<&Array2<f64>>,
) -> Result<Array2<f64>> {
    let categories = categorize_all(w, scheme)?;
    build_design_from_categories(&categories, scheme.n_categories(), z)
}

pub(crate) fn categorize_all(w: &[f64], scheme: &CategoryScheme) -> Result<Vec<usize>> {
    w.iter().map(|&wi| scheme.categorize(wi)).collect()
}

pub(crate) fn build_design_from_categories(
    categories: &[usize],
    n_categories: usize,
    z: Option<&Array2<f64>>,
) -> Result<Array2<f64>> {
    let n = categories.len();
    let q = z.map_or(0, Array2::ncols);
    let mut counts = vec![0usize; n_categories];
    let mut x = Array2::<f64>::zeros((n, n_categories + q));
    for (i, &c) in categories.iter().enumerate() {
        counts[c] += 1;
        x[[i, c]] = 1.0;
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCategory {
            index: k,
            detail: "no observations fall in this category".into(),
        });
    }
    if let Some(z) = z {
        for i in 0..n {
            for c in 0..q {
                x[[i, n_categories + c]] = z[[i, c]];
            }
        }
    }
    Ok(x)
}

/// Fits the misspecified model by categorizing `w` under `scheme`.
pub fn fit(data: &Dataset, scheme: &CategoryScheme, link: Link) -> Result<FitResult> {
    let categories = categorize_all(&data.w, scheme)?;
    fit_categories(&data.y, &categories, scheme.n_categories(), data.z.as_ref(), link)
}

/// Fits the model on pre-computed category indices (used by the
/// misclassification-resampling comparator, which perturbs categories
/// directly).
pub fn fit_categories(
    y: &[f64],
    categories: &[usize],
    n_categories: usize,
    z: Option<&Array2<f64>>,
    link: Link,
) -> Result<FitResult> {
    if y.len() != categories.len() {
        return Err(Error::invalid("response and categories have different lengths"));
    }
    if link.is_binary() {
        if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(format!(
                "binary link requires responses in {{0,1}}, got {bad}"
            )));
        }
    }
    let x = build_design_from_categories(categories, n_categories, z)?;
    let y = Array1::from_vec(y.to_vec());
    match link {
        Link::Identity => fit_ols(&y, &x, n_categories),
        _ => fit_irls(&y, &x, n_categories, link),
    }
}

fn fit_ols(y: &Array1<f64>, x: &Array2<f64>, n_categories: usize) -> Result<FitResult> {
    let xtx = x.t().dot(x);
    let xty = x.t().dot(y);
    let beta = xtx
        .solve(&xty)
        .map_err(|e| Error::numerical(format!("normal equations are singular: {e}")))?;
    let resid = y - &x.dot(&beta);
    let n = y.len() as f64;
    let p = x.ncols() as f64;
    let dof = (n - p).max(1.0);
    let sigma2 = resid.dot(&resid) / dof;
    let cov = xtx
        .inv()
        .map_err(|e| Error::numerical(format!("information matrix is singular: {e}")))?
        * sigma2;
    let se: Vec<f64> = (0..x.ncols()).map(|k| cov[[k, k]].max(0.0).sqrt()).collect();
    let coef = beta.to_vec();
    Ok(FitResult {
        theta: coef[..n_categories].to_vec(),
        theta_z: coef[n_categories..].to_vec(),
        se: Some(se),
        covariance: Some(cov),
        converged: true,
        iterations: 1,
        link: Link::Identity,
        separation: false,
    })
}

fn binary_loglik(y: &Array1<f64>, eta: &Array1<f64>, link: Link) -> f64 {
    y.iter()
        .zip(eta)
        .map(|(&yi, &e)| {
            let mu = link.inverse(e).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if yi > 0.5 {
                mu.ln()
            } else {
                (1.0 - mu).ln()
            }
        })
        .sum()
}

fn fit_irls(y: &Array1<f64>, x: &Array2<f64>, n_categories: usize, link: Link) -> Result<FitResult> {
    let n = y.len();
    let p = x.ncols();
    let mut beta = Array1::<f64>::zeros(p);
    let mut eta = x.dot(&beta);
    let mut loglik = binary_loglik(y, &eta, link);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=IRLS_MAX_ITER {
        iterations = iter;
        // working weights and response
        let mut wt = Array1::<f64>::zeros(n);
        let mut wz = Array1::<f64>::zeros(n);
        for i in 0..n {
            let e = eta[i];
            let mu = link.inverse(e).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let (dmu, var) = match link {
                Link::Logit => (mu * (1.0 - mu), mu * (1.0 - mu)),
                Link::Probit => (norm_pdf(e).max(1e-300), mu * (1.0 - mu)),
                Link::Identity => unreachable!(),
            };
            let w = (dmu * dmu / var).max(1e-300);
            wt[i] = w;
            wz[i] = e + (y[i] - mu) / dmu;
        }
        let xtwx = weighted_cross(x, &wt);
        let xtwz = weighted_xty(x, &wt, &wz);
        let target = xtwx
            .solve(&xtwz)
            .map_err(|e| Error::numerical(format!("IRLS system is singular: {e}")))?;

        // step-halving: shrink toward the previous iterate while the
        // likelihood decreases
        let mut step = 1.0;
        let mut candidate;
        let mut cand_eta;
        let mut cand_ll;
        loop {
            candidate = &beta * (1.0 - step) + &target * step;
            cand_eta = x.dot(&candidate);
            cand_ll = binary_loglik(y, &cand_eta, link);
            if cand_ll >= loglik - 1e-12 || step < 1e-6 {
                break;
            }
            step *= 0.5;
        }

        let max_change =
            candidate.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        beta = candidate;
        eta = cand_eta;
        loglik = cand_ll;
        if max_change < IRLS_TOL {
            converged = true;
            break;
        }
    }

    let separation = beta.iter().any(|b| b.abs() > SEPARATION_THRESHOLD);

    // observed information at the final iterate
    let mut wobs = Array1::<f64>::zeros(n);
    for i in 0..n {
        let e = eta[i];
        let mu = link.inverse(e).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        wobs[i] = match link {
            Link::Logit => mu * (1.0 - mu),
            Link::Probit => {
                let phi = norm_pdf(e);
                if y[i] > 0.5 {
                    (e * phi * mu + phi * phi) / (mu * mu)
                } else {
                    let q = 1.0 - mu;
                    (phi * phi - e * phi * q) / (q * q)
                }
            }
            Link::Identity => unreachable!(),
        };
    }
    let info = weighted_cross(x, &wobs);
    let (cov, se) = match info.inv() {
        Ok(cov) => {
            let se: Vec<f64> = (0..p).map(|k| cov[[k, k]].max(0.0).sqrt()).collect();
            (Some(cov), Some(se))
        }
        Err(_) => (None, None),
    };

    let coef = beta.to_vec();
    Ok(FitResult {
        theta: coef[..n_categories].to_vec(),
        theta_z: coef[n_categories..].to_vec(),
        se,
        covariance: cov,
        converged,
        iterations,
        link,
        separation,
    })
}

fn weighted_cross(x: &Array2<f64>, w: &Array1<f64>) -> Array2<f64> {
    let (n, p) = x.dim();
    let mut out = Array2::<f64>::zeros((p, p));
    for i in 0..n {
        let wi = w[i];
        for a in 0..p {
            let xa = x[[i, a]];
            if xa == 0.0 {
                continue;
            }
            for b in a..p {
                out[[a, b]] += wi * xa * x[[i, b]];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            out[[a, b]] = out[[b, a]];
        }
    }
    out
}

fn weighted_xty(x: &Array2<f64>, w: &Array1<f64>, y: &Array1<f64>) -> Array1<f64> {
    let (n, p) = x.dim();
    let mut out = Array1::<f64>::zeros(p);
    for i in 0..n {
        let wy = w[i] * y[i];
        for a in 0..p {
            out[a] += x[[i, a]] * wy;
        }
    }
    out
}
