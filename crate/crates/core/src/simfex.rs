//! Simulation-free extrapolation.
//!
//! The naive coefficients relate to the true ones through the linear map
//! induced by (Π, p). Applying the map with Π^η inflates the
//! misclassification deterministically; fitting a polynomial in η to the
//! resulting pseudo-coefficients and evaluating it at η = −1 backs the
//! estimate out to the error-free case. No pseudo-data simulation is
//! involved, so a full estimate costs a handful of small matrix products.

use crate::error::{Error, Result};
use crate::glm::{fit, Dataset, FitResult, Link};
use crate::misclass::{CategoryProbs, MisclassModel, StochasticMatrix};
use crate::rng::stream_rng;
use crate::stochastic_matrix::{fractional_power, naive_map_matrix};
use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Grid of misclassification-inflation exponents η ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaGrid {
    values: Vec<f64>,
}

impl EtaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("eta grid must be nonempty"));
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("eta grid values must be finite and >= 0"));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("eta grid must be strictly increasing"));
        }
        Ok(EtaGrid { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for EtaGrid {
    /// The working default: η = 0.5, 1, 1.5, 2.
    fn default() -> Self {
        EtaGrid { values: vec![0.5, 1.0, 1.5, 2.0] }
    }
}

/// Extrapolation function family fitted to the pseudo-coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtrapolantKind {
    Linear,
    Quadratic,
}

impl ExtrapolantKind {
    pub fn n_coefficients(self) -> usize {
        match self {
            ExtrapolantKind::Linear => 2,
            ExtrapolantKind::Quadratic => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExtrapolantKind::Linear => "linear",
            ExtrapolantKind::Quadratic => "quadratic",
        }
    }
}

impl FromStr for ExtrapolantKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ExtrapolantKind::Linear),
            "quadratic" => Ok(ExtrapolantKind::Quadratic),
            other => Err(Error::invalid(format!(
                "unknown extrapolant '{other}' (expected linear or quadratic)"
            ))),
        }
    }
}

/// Fitted per-component polynomials h_j(η; γ).
#[derive(Debug, Clone)]
pub struct Extrapolant {
    pub kind: ExtrapolantKind,
    /// One coefficient vector (intercept first) per component.
    pub gamma: Vec<Vec<f64>>,
}

impl Extrapolant {
    /// h(η) componentwise; defined for any real η including −1.
    pub fn evaluate(&self, eta: f64) -> Vec<f64> {
        self.gamma
            .iter()
            .map(|g| g.iter().rev().fold(0.0, |acc, &c| acc * eta + c))
            .collect()
    }
}

/// θ_naive = f(Π, p, θ) = A(Π, p)·θ.
pub fn naive_map(pi: &StochasticMatrix, p: &CategoryProbs, theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != pi.dim() {
        return Err(Error::invalid(format!(
            "theta has length {}, expected {}",
            theta.len(),
            pi.dim()
        )));
    }
    let a = naive_map_matrix(pi, p)?;
    Ok(a.dot(&Array1::from_vec(theta.to_vec())).to_vec())
}

/// Pseudo-coefficients over the grid: row k holds f(Π^{η_k}, p, θ_naive).
/// Purely deterministic; no pseudo-data are simulated.
pub fn pseudo_sequence(
    pi: &StochasticMatrix,
    p: &CategoryProbs,
    theta_naive: &[f64],
    grid: &EtaGrid,
) -> Result<Array2<f64>> {
    let j = pi.dim();
    let mut seq = Array2::<f64>::zeros((grid.len(), j));
    for (k, &eta) in grid.values().iter().enumerate() {
        let powered = fractional_power(pi, eta)?;
        let row = naive_map(&powered.matrix, p, theta_naive)?;
        for (col, v) in row.into_iter().enumerate() {
            seq[[k, col]] = v;
        }
    }
    Ok(seq)
}

/// Independent per-component least squares of the chosen polynomial in η.
pub fn fit_extrapolant(
    grid: &EtaGrid,
    sequence: &Array2<f64>,
    kind: ExtrapolantKind,
) -> Result<Extrapolant> {
    let k = grid.len();
    let n_coef = kind.n_coefficients();
    if sequence.nrows() != k {
        return Err(Error::invalid(format!(
            "sequence has {} rows for a grid of {k} points",
            sequence.nrows()
        )));
    }
    if k < n_coef {
        return Err(Error::invalid(format!(
            "{} extrapolation needs at least {n_coef} grid points, got {k}",
            kind.name()
        )));
    }
    // solve in powers of (η − η̄) for conditioning, then convert back
    let center: f64 = grid.values().iter().sum::<f64>() / k as f64;
    let mut design = Array2::<f64>::zeros((k, n_coef));
    for (r, &eta) in grid.values().iter().enumerate() {
        let mut v = 1.0;
        for c in 0..n_coef {
            design[[r, c]] = v;
            v *= eta - center;
        }
    }
    let xtx = design.t().dot(&design);
    let gamma = (0..sequence.ncols())
        .map(|col| {
            let y = sequence.column(col).to_owned();
            let xty = design.t().dot(&y);
            let g = xtx
                .solve(&xty)
                .map_err(|e| Error::numerical(format!("degenerate eta grid: {e}")))?;
            // a(η−c)² + b(η−c) + d  =  aη² + (b − 2ac)η + (d − bc + ac²)
            Ok(match kind {
                ExtrapolantKind::Linear => vec![g[0] - g[1] * center, g[1]],
                ExtrapolantKind::Quadratic => vec![
                    g[0] - g[1] * center + g[2] * center * center,
                    g[1] - 2.0 * g[2] * center,
                    g[2],
                ],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Extrapolant { kind, gamma })
}

/// Bootstrap inference summary over the SIMFEX coefficients.
#[derive(Debug, Clone)]
pub struct BootstrapSummary {
    pub se: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    /// Empirical covariance of the resampled coefficient vectors; linear
    /// contrasts get their standard errors from here.
    pub covariance: Array2<f64>,
    pub n_resamples: usize,
    pub n_discarded: usize,
}

impl BootstrapSummary {
    /// Standard error of θ_J − θ_1.
    pub fn relative_difference_se(&self) -> f64 {
        let j = self.covariance.nrows();
        contrast_se(&self.covariance, j - 1, 0)
    }
}

pub(crate) fn contrast_se(cov: &Array2<f64>, a: usize, b: usize) -> f64 {
    (cov[[a, a]] + cov[[b, b]] - 2.0 * cov[[a, b]]).max(0.0).sqrt()
}

/// Result of one SIMFEX run.
#[derive(Debug, Clone)]
pub struct SimfexResult {
    pub theta_simfex: Vec<f64>,
    /// θ_J − θ_1.
    pub relative_difference: f64,
    /// K × J pseudo-coefficients over the grid.
    pub pseudo_sequence: Array2<f64>,
    pub extrapolant: Extrapolant,
    /// The underlying naive fit.
    pub naive: FitResult,
    pub bootstrap: Option<BootstrapSummary>,
}

/// Runs the simulation-free estimator: naive fit, pseudo-sequence,
/// extrapolation to η = −1.
pub fn simfex_estimate(
    data: &Dataset,
    scheme: &crate::misclass::CategoryScheme,
    link: Link,
    pi: &StochasticMatrix,
    p: &CategoryProbs,
    grid: &EtaGrid,
    kind: ExtrapolantKind,
) -> Result<SimfexResult> {
    let naive = fit(data, scheme, link)?;
    let seq = pseudo_sequence(pi, p, &naive.theta, grid)?;
    let extrapolant = fit_extrapolant(grid, &seq, kind)?;
    let theta_simfex = extrapolant.evaluate(-1.0);
    let relative_difference = theta_simfex[theta_simfex.len() - 1] - theta_simfex[0];
    Ok(SimfexResult {
        theta_simfex,
        relative_difference,
        pseudo_sequence: seq,
        extrapolant,
        naive,
        bootstrap: None,
    })
}

/// Contrast variant for a discrete precisely measured covariate correlated
/// with the exposure: works on θ_j − θ_1 through per-level (Π(z), p(z)),
/// averaging the per-level pseudo-sequences by level frequency.
///
/// Returns the J−1 extrapolated contrasts (θ_2 − θ_1, …, θ_J − θ_1).
pub fn simfex_contrast_estimate(
    data: &Dataset,
    scheme: &crate::misclass::CategoryScheme,
    link: Link,
    group_labels: &[usize],
    group_models: &[(StochasticMatrix, CategoryProbs)],
    grid: &EtaGrid,
    kind: ExtrapolantKind,
) -> Result<Vec<f64>> {
    if group_labels.len() != data.len() {
        return Err(Error::invalid("group labels must align with the data rows"));
    }
    if group_models.is_empty() {
        return Err(Error::invalid("no group models supplied"));
    }
    let n_levels = group_models.len();
    let mut counts = vec![0usize; n_levels];
    for &g in group_labels {
        if g >= n_levels {
            return Err(Error::invalid(format!("group label {g} has no model")));
        }
        counts[g] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!("group level {empty} has no observations")));
    }
    let n = data.len() as f64;
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();

    let naive = fit(data, scheme, link)?;
    let j = naive.theta.len();
    let theta_tilde: Vec<f64> = (1..j).map(|k| naive.theta[k] - naive.theta[0]).collect();

    // frequency-weighted average of the per-level contrast pseudo-sequences
    let mut seq = Array2::<f64>::zeros((grid.len(), j - 1));
    for ((pi_z, p_z), &wt) in group_models.iter().zip(&weights) {
        for (k, &eta) in grid.values().iter().enumerate() {
            let powered = fractional_power(pi_z, eta)?;
            let a = naive_map_matrix(&powered.matrix, p_z)?;
            for row in 1..j {
                // f̃_row = Σ_{j'>=2} (A[row][j'] − A[1][j']) · θ̃_{j'}
                let mut acc = 0.0;
                for (col, &tt) in theta_tilde.iter().enumerate() {
                    acc += (a[[row, col + 1]] - a[[0, col + 1]]) * tt;
                }
                seq[[k, row - 1]] += wt * acc;
            }
        }
    }

    let extrapolant = fit_extrapolant(grid, &seq, kind)?;
    Ok(extrapolant.evaluate(-1.0))
}

/// Confidence-interval construction for the bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    /// estimate ± 1.96 · SE
    Normal,
    /// empirical 2.5% / 97.5% quantiles of the resample estimates
    Percentile,
}

/// Bootstrap configuration.
#[derive(Debug, Clone)]
pub struct BootstrapOptions {
    pub n_resamples: usize,
    pub seed: u64,
    /// Re-run the misclassification estimation (Algorithm 1) on every
    /// resample so that Π̂ and p̂ uncertainty propagates into the standard
    /// errors. Disable to hold the original (Π̂, p̂) fixed.
    pub reestimate_misclass: bool,
    pub ci: CiMethod,
    /// Known transformation exponent; when unset it is (re-)estimated from
    /// the primary sample per resample.
    pub lambda: Option<f64>,
}

impl BootstrapOptions {
    pub fn new(n_resamples: usize, seed: u64) -> Self {
        BootstrapOptions {
            n_resamples,
            seed,
            reestimate_misclass: true,
            ci: CiMethod::Normal,
            lambda: None,
        }
    }
}

const MAX_DISCARD_FRACTION: f64 = 0.2;
const CI_Z: f64 = 1.96;

/// Full inference pipeline: misclassification estimation and SIMFEX on the
/// original data, then the same two steps on paired resamples of the primary
/// rows and the replicate subjects. Resamples whose naive fit fails to
/// converge or separates are discarded and counted.
pub fn bootstrap_inference(
    data: &Dataset,
    replicates: &crate::error_model::ReplicateData,
    scheme: &crate::misclass::CategoryScheme,
    link: Link,
    grid: &EtaGrid,
    kind: ExtrapolantKind,
    opts: &BootstrapOptions,
) -> Result<SimfexResult> {
    if opts.n_resamples < 50 {
        return Err(Error::invalid(format!(
            "bootstrap needs at least 50 resamples, got {}",
            opts.n_resamples
        )));
    }
    let model = MisclassModel::fit(&data.w, replicates, scheme.clone(), opts.lambda)?;
    let pi_p = model.pi_p()?;
    let mut base = simfex_estimate(data, scheme, link, &pi_p.pi, &pi_p.p, grid, kind)?;

    let n = data.len();
    let n0 = replicates.n_subjects();
    let draws: Vec<Option<Vec<f64>>> = (0..opts.n_resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(opts.seed, b as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let subjects: Vec<usize> = (0..n0).map(|_| rng.random_range(0..n0)).collect();
            let rdata = data.resample(&rows);
            let rreps = replicates.resample(&subjects);
            let est = if opts.reestimate_misclass {
                let m = MisclassModel::fit(&rdata.w, &rreps, scheme.clone(), opts.lambda).ok()?;
                m.pi_p().ok()?
            } else {
                pi_p.clone()
            };
            let fit = simfex_estimate(&rdata, scheme, link, &est.pi, &est.p, grid, kind).ok()?;
            if !fit.naive.usable() {
                return None;
            }
            Some(fit.theta_simfex)
        })
        .collect();

    let kept: Vec<&Vec<f64>> = draws.iter().flatten().collect();
    let n_discarded = opts.n_resamples - kept.len();
    if (n_discarded as f64) > MAX_DISCARD_FRACTION * opts.n_resamples as f64 {
        return Err(Error::estimation(format!(
            "{n_discarded} of {} bootstrap resamples discarded (> {:.0}%)",
            opts.n_resamples,
            MAX_DISCARD_FRACTION * 100.0
        )));
    }

    let j = base.theta_simfex.len();
    let m = kept.len() as f64;
    let mut mean = vec![0.0; j];
    for v in &kept {
        for (acc, x) in mean.iter_mut().zip(v.iter()) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut covariance = Array2::<f64>::zeros((j, j));
    for v in &kept {
        for a in 0..j {
            for b in a..j {
                covariance[[a, b]] += (v[a] - mean[a]) * (v[b] - mean[b]);
            }
        }
    }
    let denom = (m - 1.0).max(1.0);
    for a in 0..j {
        for b in a..j {
            covariance[[a, b]] /= denom;
            covariance[[b, a]] = covariance[[a, b]];
        }
    }
    let se: Vec<f64> = (0..j).map(|k| covariance[[k, k]].max(0.0).sqrt()).collect();

    let (ci_lower, ci_upper) = match opts.ci {
        CiMethod::Normal => (
            base.theta_simfex.iter().zip(&se).map(|(e, s)| e - CI_Z * s).collect(),
            base.theta_simfex.iter().zip(&se).map(|(e, s)| e + CI_Z * s).collect(),
        ),
        CiMethod::Percentile => {
            let mut lower = vec![0.0; j];
            let mut upper = vec![0.0; j];
            for k in 0..j {
                let mut col: Vec<f64> = kept.iter().map(|v| v[k]).collect();
                col.sort_by(f64::total_cmp);
                lower[k] = percentile(&col, 0.025);
                upper[k] = percentile(&col, 0.975);
            }
            (lower, upper)
        }
    };

    base.bootstrap = Some(BootstrapSummary {
        se,
        ci_lower,
        ci_upper,
        covariance,
        n_resamples: opts.n_resamples,
        n_discarded,
    });
    Ok(base)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::misclass::CategoryScheme;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn pi2() -> StochasticMatrix {
        StochasticMatrix::new(array![[0.8, 0.2], [0.3, 0.7]]).unwrap()
    }

    fn pi3() -> StochasticMatrix {
        StochasticMatrix::new(array![
            [0.80, 0.15, 0.05],
            [0.20, 0.60, 0.20],
            [0.05, 0.15, 0.80]
        ])
        .unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(EtaGrid::new(vec![]).is_err());
        assert!(EtaGrid::new(vec![-0.5, 1.0]).is_err());
        assert!(EtaGrid::new(vec![1.0, 1.0]).is_err());
        assert_eq!(EtaGrid::default().values(), &[0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn naive_map_identity_is_identity() {
        let p = CategoryProbs::new(vec![0.3, 0.7]).unwrap();
        let theta = vec![1.5, -0.4];
        let out = naive_map(&StochasticMatrix::identity(2), &p, &theta).unwrap();
        assert_eq!(out, theta);
    }

    #[test]
    fn naive_map_preserves_constants() {
        let p = CategoryProbs::new(vec![0.5, 0.5]).unwrap();
        let out = naive_map(&pi2(), &p, &[3.25, 3.25]).unwrap();
        assert_abs_diff_eq!(out[0], 3.25, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 3.25, epsilon = 1e-12);
    }

    #[test]
    fn naive_map_hand_computed_case() {
        let p = CategoryProbs::new(vec![0.5, 0.5]).unwrap();
        let out = naive_map(&pi2(), &p, &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(out[0], 3.0 / 11.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out[1], 7.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn pseudo_sequence_special_rows() {
        let p = CategoryProbs::new(vec![0.25, 0.35, 0.40]).unwrap();
        let theta = vec![0.2, 0.5, 0.9];
        let grid = EtaGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let seq = pseudo_sequence(&pi3(), &p, &theta, &grid).unwrap();
        // eta = 0 row equals theta exactly
        for (c, &t) in theta.iter().enumerate() {
            assert_eq!(seq[[0, c]], t);
        }
        // eta = 1 row equals one application of the map
        let once = naive_map(&pi3(), &p, &theta).unwrap();
        for (c, &t) in once.iter().enumerate() {
            assert_abs_diff_eq!(seq[[1, c]], t, epsilon = 1e-12);
        }
    }

    #[test]
    fn pseudo_sequence_identity_pi_is_constant() {
        let p = CategoryProbs::new(vec![0.5, 0.5]).unwrap();
        let theta = vec![1.0, 2.0];
        let grid = EtaGrid::default();
        let seq = pseudo_sequence(&StochasticMatrix::identity(2), &p, &theta, &grid).unwrap();
        for k in 0..grid.len() {
            assert_eq!(seq[[k, 0]], 1.0);
            assert_eq!(seq[[k, 1]], 2.0);
        }
    }

    #[test]
    fn extrapolant_interpolates_exact_quadratic() {
        let grid = EtaGrid::default();
        let truth = |eta: f64| 0.3 - 0.7 * eta + 0.2 * eta * eta;
        let mut seq = Array2::<f64>::zeros((4, 1));
        for (k, &eta) in grid.values().iter().enumerate() {
            seq[[k, 0]] = truth(eta);
        }
        let ex = fit_extrapolant(&grid, &seq, ExtrapolantKind::Quadratic).unwrap();
        assert_abs_diff_eq!(ex.gamma[0][0], 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(ex.gamma[0][1], -0.7, epsilon = 1e-10);
        assert_abs_diff_eq!(ex.gamma[0][2], 0.2, epsilon = 1e-10);
        for (k, &eta) in grid.values().iter().enumerate() {
            assert_abs_diff_eq!(ex.evaluate(eta)[0], seq[[k, 0]], epsilon = 1e-10);
        }
        assert_abs_diff_eq!(ex.evaluate(-1.0)[0], truth(-1.0), epsilon = 1e-10);
    }

    #[test]
    fn extrapolant_constant_sequence_flat() {
        let grid = EtaGrid::default();
        let seq = Array2::from_elem((4, 2), 1.25);
        let ex = fit_extrapolant(&grid, &seq, ExtrapolantKind::Quadratic).unwrap();
        for g in &ex.gamma {
            assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(g[2], 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn linear_extrapolant_recovers_line() {
        // h(eta) = eta + 2 over the default grid: intercept 2, slope 1
        let grid = EtaGrid::default();
        let mut seq = Array2::<f64>::zeros((4, 1));
        for (k, &eta) in grid.values().iter().enumerate() {
            seq[[k, 0]] = eta + 2.0;
        }
        let ex = fit_extrapolant(&grid, &seq, ExtrapolantKind::Linear).unwrap();
        assert_abs_diff_eq!(ex.gamma[0][0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ex.gamma[0][1], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ex.evaluate(-1.0)[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn extrapolant_needs_enough_points() {
        let grid = EtaGrid::new(vec![0.5, 1.0]).unwrap();
        let seq = Array2::zeros((2, 1));
        assert!(fit_extrapolant(&grid, &seq, ExtrapolantKind::Quadratic).is_err());
        assert!(fit_extrapolant(&grid, &seq, ExtrapolantKind::Linear).is_ok());
    }

    #[test]
    fn quadratic_evaluation_at_minus_one() {
        let ex = Extrapolant { kind: ExtrapolantKind::Quadratic, gamma: vec![vec![0.4, 1.1, -0.3]] };
        assert_abs_diff_eq!(ex.evaluate(-1.0)[0], 0.4 - 1.1 - 0.3, epsilon = 1e-15);
    }

    #[test]
    fn identity_pi_returns_naive_estimate() {
        let scheme = CategoryScheme::new(vec![2.0, 4.0]).unwrap();
        let w = vec![1.0, 1.5, 3.0, 3.5, 5.0, 6.0];
        let y = vec![2.0, 4.0, 10.0, 30.0, 5.0, 7.0];
        let data = Dataset::new(y, w, None).unwrap();
        let p = CategoryProbs::new(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        let res = simfex_estimate(
            &data,
            &scheme,
            Link::Identity,
            &StochasticMatrix::identity(3),
            &p,
            &EtaGrid::default(),
            ExtrapolantKind::Quadratic,
        )
        .unwrap();
        for (a, b) in res.theta_simfex.iter().zip(&res.naive.theta) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        assert_eq!(
            res.relative_difference,
            res.theta_simfex[2] - res.theta_simfex[0]
        );
    }

    #[test]
    fn shift_equivariance() {
        let p = CategoryProbs::new(vec![0.25, 0.35, 0.40]).unwrap();
        let theta = vec![0.1, 0.6, 1.4];
        let shifted: Vec<f64> = theta.iter().map(|t| t + 2.5).collect();
        let grid = EtaGrid::default();
        let ex1 = fit_extrapolant(
            &grid,
            &pseudo_sequence(&pi3(), &p, &theta, &grid).unwrap(),
            ExtrapolantKind::Quadratic,
        )
        .unwrap();
        let ex2 = fit_extrapolant(
            &grid,
            &pseudo_sequence(&pi3(), &p, &shifted, &grid).unwrap(),
            ExtrapolantKind::Quadratic,
        )
        .unwrap();
        let v1 = ex1.evaluate(-1.0);
        let v2 = ex2.evaluate(-1.0);
        for (a, b) in v1.iter().zip(&v2) {
            assert_abs_diff_eq!(b - a, 2.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn composition_law_with_updated_marginal() {
        // chaining the map matches Π^{1+η} when the middle application uses
        // the marginal Πᵀp of the intermediate variable
        let p = CategoryProbs::new(vec![0.25, 0.35, 0.40]).unwrap();
        let theta = vec![0.1, 0.6, 1.4];
        let pi = pi3();
        for eta in [1.0, 2.0] {
            let lhs = naive_map(
                &fractional_power(&pi, 1.0 + eta).unwrap().matrix,
                &p,
                &theta,
            )
            .unwrap();
            let inner = naive_map(&pi, &p, &theta).unwrap();
            let pw_raw: Vec<f64> = (0..3)
                .map(|j| (0..3).map(|jp| pi.get(jp, j) * p.get(jp)).sum())
                .collect();
            let pw = CategoryProbs::from_renormalized(pw_raw).unwrap();
            let rhs = naive_map(
                &fractional_power(&pi, eta).unwrap().matrix,
                &pw,
                &inner,
            )
            .unwrap();
            for (a, b) in lhs.iter().zip(&rhs) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn contrast_estimate_matches_full_pipeline_with_one_level() {
        let scheme = CategoryScheme::new(vec![2.0, 4.0]).unwrap();
        let w = vec![1.0, 1.5, 3.0, 3.5, 5.0, 6.0, 1.2, 3.2, 5.5];
        let y = vec![2.0, 4.0, 10.0, 30.0, 5.0, 7.0, 3.0, 12.0, 6.0];
        let data = Dataset::new(y, w, None).unwrap();
        let p = CategoryProbs::new(vec![0.3, 0.4, 0.3]).unwrap();
        let grid = EtaGrid::default();

        let full = simfex_estimate(
            &data, &scheme, Link::Identity, &pi3(), &p, &grid, ExtrapolantKind::Quadratic,
        )
        .unwrap();
        let labels = vec![0usize; data.len()];
        let contrast = simfex_contrast_estimate(
            &data,
            &scheme,
            Link::Identity,
            &labels,
            &[(pi3(), p.clone())],
            &grid,
            ExtrapolantKind::Quadratic,
        )
        .unwrap();
        for (k, c) in contrast.iter().enumerate() {
            let direct = full.theta_simfex[k + 1] - full.theta_simfex[0];
            assert_abs_diff_eq!(c, &direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn contrast_identity_pi_returns_naive_contrasts() {
        let scheme = CategoryScheme::new(vec![2.0, 4.0]).unwrap();
        let w = vec![1.0, 1.5, 3.0, 3.5, 5.0, 6.0];
        let y = vec![2.0, 4.0, 10.0, 30.0, 5.0, 7.0];
        let data = Dataset::new(y.clone(), w.clone(), None).unwrap();
        let p = CategoryProbs::new(vec![0.3, 0.4, 0.3]).unwrap();
        let labels = vec![0usize, 1, 0, 1, 0, 1];
        let models = vec![
            (StochasticMatrix::identity(3), p.clone()),
            (StochasticMatrix::identity(3), p),
        ];
        let contrast = simfex_contrast_estimate(
            &data,
            &scheme,
            Link::Identity,
            &labels,
            &models,
            &EtaGrid::default(),
            ExtrapolantKind::Quadratic,
        )
        .unwrap();
        // naive group means: 3, 20, 6
        assert_abs_diff_eq!(contrast[0], 17.0, epsilon = 1e-9);
        assert_abs_diff_eq!(contrast[1], 3.0, epsilon = 1e-9);
    }
}
