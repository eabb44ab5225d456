//! Shared brute-force oracles for the integration suites.
//!
//! The misclassification oracle never touches the quadrature path it
//! validates: it samples the transformed-scale generative model directly
//! and categorizes by comparing against the transformed cutpoints (the same
//! event as categorizing the back-transformed value whenever that value
//! exists, and the convention that boundary cells absorb the normal tails,
//! matching the estimator's renormalization semantics).

use ndarray::Array2;
use simfex_core::dist::norm_cdf;
use simfex_core::dist::norm_quantile;
use simfex_core::misclass::CategoryScheme;
use simfex_core::rng::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;

/// Transformed-scale cell bounds of a scheme, outer cells unbounded.
pub fn transformed_cells(scheme: &CategoryScheme, lambda: f64) -> Vec<(f64, f64)> {
    let bc = |x: f64| -> f64 {
        if lambda == 0.0 {
            x.ln()
        } else if lambda == 1.0 {
            x - 1.0
        } else {
            ((lambda * x.ln()).exp() - 1.0) / lambda
        }
    };
    let t: Vec<f64> = scheme.cutpoints().iter().map(|&c| bc(c)).collect();
    let j = scheme.n_categories();
    (0..j)
        .map(|k| {
            let lo = if k == 0 { f64::NEG_INFINITY } else { t[k - 1] };
            let hi = if k == j - 1 { f64::INFINITY } else { t[k] };
            (lo, hi)
        })
        .collect()
}

fn cell_of(t: f64, cells: &[(f64, f64)]) -> usize {
    cells.iter().position(|&(lo, hi)| t >= lo && t < hi).unwrap_or(cells.len() - 1)
}

/// Monte Carlo estimate of Π: `draws_per_row` samples of the true
/// transformed value from each category (inverse-CDF truncated normal),
/// plus one error draw each.
pub fn mc_pi_oracle(
    lambda: f64,
    mu: f64,
    sigma2_x: f64,
    sigma2_u: f64,
    scheme: &CategoryScheme,
    draws_per_row: usize,
    seed: u64,
) -> Array2<f64> {
    let j = scheme.n_categories();
    let cells = transformed_cells(scheme, lambda);
    let sx = sigma2_x.sqrt();
    let su = sigma2_u.sqrt();
    let mut pi = Array2::<f64>::zeros((j, j));
    for (row, &(lo, hi)) in cells.iter().enumerate() {
        let mut rng = stream_rng(seed, row as u64);
        let a = if lo.is_finite() { norm_cdf((lo - mu) / sx) } else { 0.0 };
        let b = if hi.is_finite() { norm_cdf((hi - mu) / sx) } else { 1.0 };
        for _ in 0..draws_per_row {
            let u: f64 = rng.random();
            let p = (a + u * (b - a)).clamp(1e-300, 1.0 - 1e-16);
            let t = mu + sx * norm_quantile(p);
            let w = t + su * rng.sample::<f64, _>(StandardNormal);
            pi[[row, cell_of(w, &cells)]] += 1.0;
        }
        for col in 0..j {
            pi[[row, col]] /= draws_per_row as f64;
        }
    }
    pi
}

/// Monte Carlo estimate of p from unconditional draws.
pub fn mc_p_oracle(
    lambda: f64,
    mu: f64,
    sigma2_x: f64,
    scheme: &CategoryScheme,
    draws: usize,
    seed: u64,
) -> Vec<f64> {
    let cells = transformed_cells(scheme, lambda);
    let sx = sigma2_x.sqrt();
    let mut rng = stream_rng(seed, 1_000_000);
    let mut counts = vec![0.0f64; scheme.n_categories()];
    for _ in 0..draws {
        let t: f64 = mu + sx * rng.sample::<f64, _>(StandardNormal);
        counts[cell_of(t, &cells)] += 1.0;
    }
    counts.iter().map(|c| c / draws as f64).collect()
}

/// Analytic quantile cutpoints of the transformed-normal exposure.
pub fn analytic_cutpoints(lambda: f64, mu: f64, sigma2_x: f64, j: usize) -> CategoryScheme {
    let sx = sigma2_x.sqrt();
    let inv = |t: f64| -> f64 {
        if lambda == 0.0 {
            t.exp()
        } else {
            ((lambda * t).ln_1p() / lambda).exp()
        }
    };
    let cuts: Vec<f64> =
        (1..j).map(|k| inv(mu + sx * norm_quantile(k as f64 / j as f64))).collect();
    CategoryScheme::new(cuts).unwrap()
}
