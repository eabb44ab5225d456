//! Misclassification SIMEX comparator.
//!
//! Instead of the closed-form map, categories are physically resampled
//! through Π^η, the naive model is refit on each pseudo-dataset, and the
//! per-η averages are extrapolated to η = −1. Variance comes from the
//! difference-based jackknife: the average model-based covariance minus the
//! between-simulation covariance, extrapolated to η = −1.

use crate::error::{Error, Result};
use crate::glm::{categorize_all, fit_categories, Dataset, Link};
use crate::misclass::{CategoryScheme, StochasticMatrix};
use crate::rng::stream_rng;
use crate::simfex::{contrast_se, fit_extrapolant, EtaGrid, ExtrapolantKind};
use crate::stochastic_matrix::fractional_power;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

const MAX_REDRAWS: usize = 10;

/// Configuration of the simulation step.
#[derive(Debug, Clone)]
pub struct McsimexConfig {
    /// Pseudo-datasets per grid point.
    pub n_sim: usize,
    pub grid: EtaGrid,
    pub kind: ExtrapolantKind,
    pub seed: u64,
}

impl McsimexConfig {
    pub fn new(seed: u64) -> Self {
        McsimexConfig {
            n_sim: 100,
            grid: EtaGrid::default(),
            kind: ExtrapolantKind::Quadratic,
            seed,
        }
    }
}

/// Result of the comparator.
#[derive(Debug, Clone)]
pub struct McsimexResult {
    pub theta: Vec<f64>,
    /// θ_J − θ_1.
    pub relative_difference: f64,
    /// Jackknife standard errors (None when some pseudo-fit lacked one).
    pub se: Option<Vec<f64>>,
    /// Extrapolated jackknife covariance.
    pub covariance: Option<Array2<f64>>,
    /// K × J per-η averages of the pseudo-dataset estimates.
    pub sequence: Array2<f64>,
    /// Negative extrapolated variance was floored at zero.
    pub variance_floored: bool,
    /// Pseudo-datasets that had to be redrawn (empty category or failed fit).
    pub redraws: usize,
}

impl McsimexResult {
    pub fn relative_difference_se(&self) -> Option<f64> {
        let cov = self.covariance.as_ref()?;
        let j = cov.nrows();
        Some(contrast_se(cov, j - 1, 0))
    }
}

/// Resamples each observation's category from the row of `pi_eta` indexed by
/// its current category.
pub fn misclassify(
    categories: &[usize],
    pi_eta: &StochasticMatrix,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let j = pi_eta.dim();
    categories
        .iter()
        .map(|&c| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for to in 0..j {
                acc += pi_eta.get(c, to);
                if u < acc {
                    return to;
                }
            }
            j - 1
        })
        .collect()
}

/// MCSIMEX with a supplied (typically estimated) misclassification matrix.
pub fn mcsimex_estimate(
    data: &Dataset,
    scheme: &CategoryScheme,
    link: Link,
    pi: &StochasticMatrix,
    config: &McsimexConfig,
) -> Result<McsimexResult> {
    if config.n_sim < 1 {
        return Err(Error::invalid("n_sim must be at least 1"));
    }
    let j = scheme.n_categories();
    if pi.dim() != j {
        return Err(Error::invalid(format!(
            "Π is {}x{} but the scheme has {j} categories",
            pi.dim(),
            pi.dim()
        )));
    }
    let categories = categorize_all(&data.w, scheme)?;
    let powered: Vec<StochasticMatrix> = config
        .grid
        .values()
        .iter()
        .map(|&eta| Ok(fractional_power(pi, eta)?.matrix))
        .collect::<Result<_>>()?;

    let b = config.n_sim;
    let k = config.grid.len();
    // one task per (grid point, pseudo-dataset), each on its own RNG stream
    let fits: Vec<Result<(Vec<f64>, Option<Array2<f64>>, usize)>> = (0..k * b)
        .into_par_iter()
        .map(|task| {
            let ki = task / b;
            let mut rng: ChaCha12Rng = stream_rng(config.seed, task as u64);
            one_pseudo_fit(data, &categories, j, link, &powered[ki], &mut rng)
        })
        .collect();

    let mut redraws = 0usize;
    let mut sequence = Array2::<f64>::zeros((k, j));
    // per grid point: mean of model covariances and covariance of estimates
    let mut mean_cov: Vec<Option<Array2<f64>>> = vec![Some(Array2::zeros((j, j))); k];
    let mut thetas: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(b); k];
    for (task, item) in fits.into_iter().enumerate() {
        let ki = task / b;
        let (theta, cov, nredraw) = item?;
        redraws += nredraw;
        for (col, &t) in theta.iter().enumerate() {
            sequence[[ki, col]] += t / b as f64;
        }
        match (cov, &mut mean_cov[ki]) {
            (Some(c), Some(acc)) => *acc = &*acc + &(c / b as f64),
            _ => mean_cov[ki] = None,
        }
        thetas[ki].push(theta);
    }

    let point = fit_extrapolant(&config.grid, &sequence, config.kind)?;
    let theta = point.evaluate(-1.0);
    let relative_difference = theta[j - 1] - theta[0];

    // difference-based jackknife: extrapolate Σ̄(η) − S(η) to η = −1
    let mut variance_floored = false;
    let (covariance, se) = if mean_cov.iter().all(Option::is_some) && b > 1 {
        let mut diff_seq = Array2::<f64>::zeros((k, j * j));
        for ki in 0..k {
            let sbar = mean_cov[ki].as_ref().unwrap();
            let s_emp = sample_covariance(&thetas[ki], &sequence.row(ki).to_vec());
            for a in 0..j {
                for c in 0..j {
                    diff_seq[[ki, a * j + c]] = sbar[[a, c]] - s_emp[[a, c]];
                }
            }
        }
        let ex = fit_extrapolant(&config.grid, &diff_seq, config.kind)?;
        let flat = ex.evaluate(-1.0);
        let mut cov = Array2::<f64>::zeros((j, j));
        for a in 0..j {
            for c in 0..j {
                cov[[a, c]] = flat[a * j + c];
            }
        }
        // symmetrize and floor negative diagonal entries
        for a in 0..j {
            for c in 0..a {
                let m = 0.5 * (cov[[a, c]] + cov[[c, a]]);
                cov[[a, c]] = m;
                cov[[c, a]] = m;
            }
            if cov[[a, a]] < 0.0 {
                cov[[a, a]] = 0.0;
                variance_floored = true;
            }
        }
        let se = (0..j).map(|a| cov[[a, a]].sqrt()).collect();
        (Some(cov), Some(se))
    } else {
        (None, None)
    };

    Ok(McsimexResult {
        theta,
        relative_difference,
        se,
        covariance,
        sequence,
        variance_floored,
        redraws,
    })
}

fn one_pseudo_fit(
    data: &Dataset,
    categories: &[usize],
    j: usize,
    link: Link,
    pi_eta: &StochasticMatrix,
    rng: &mut ChaCha12Rng,
) -> Result<(Vec<f64>, Option<Array2<f64>>, usize)> {
    for attempt in 0..=MAX_REDRAWS {
        let pseudo = misclassify(categories, pi_eta, rng);
        match fit_categories(&data.y, &pseudo, j, data.z.as_ref(), link) {
            Ok(fit) if fit.usable() => {
                let cov = fit.covariance.map(|c| {
                    // θ block only
                    c.slice(ndarray::s![..j, ..j]).to_owned()
                });
                return Ok((fit.theta, cov, attempt));
            }
            Ok(_) | Err(Error::EmptyCategory { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::estimation(format!(
        "pseudo-dataset rejected {MAX_REDRAWS} times in a row (empty category or failed fit)"
    )))
}

fn sample_covariance(draws: &[Vec<f64>], mean: &[f64]) -> Array2<f64> {
    let j = mean.len();
    let mut cov = Array2::<f64>::zeros((j, j));
    for d in draws {
        for a in 0..j {
            for c in 0..j {
                cov[[a, c]] += (d[a] - mean[a]) * (d[c] - mean[c]);
            }
        }
    }
    let denom = (draws.len() as f64 - 1.0).max(1.0);
    cov / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_matrix_is_noop() {
        let pi = StochasticMatrix::identity(3);
        let cats = vec![0, 1, 2, 1, 0, 2];
        let mut rng = stream_rng(5, 0);
        assert_eq!(misclassify(&cats, &pi, &mut rng), cats);
    }

    #[test]
    fn uniform_row_concentrates_to_uniform_frequencies() {
        let pi = StochasticMatrix::new(array![
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0]
        ])
        .unwrap();
        let cats = vec![0usize; 1_000_000];
        let mut rng = stream_rng(6, 0);
        let out = misclassify(&cats, &pi, &mut rng);
        let mut freq = [0.0f64; 3];
        for c in out {
            freq[c] += 1e-6;
        }
        for f in freq {
            assert!((f - 1.0 / 3.0).abs() < 3e-3, "freq = {f}");
        }
    }

    #[test]
    fn fixed_seed_reproduces_draws() {
        let pi = StochasticMatrix::new(array![[0.7, 0.3], [0.4, 0.6]]).unwrap();
        let cats = vec![0, 1, 0, 1, 1, 0, 0];
        let a = misclassify(&cats, &pi, &mut stream_rng(9, 3));
        let b = misclassify(&cats, &pi, &mut stream_rng(9, 3));
        assert_eq!(a, b);
    }

    #[test]
    fn identity_pi_estimate_equals_naive() {
        let scheme = CategoryScheme::new(vec![2.0, 4.0]).unwrap();
        let w = vec![1.0, 1.5, 3.0, 3.5, 5.0, 6.0];
        let y = vec![2.0, 4.0, 10.0, 30.0, 5.0, 7.0];
        let data = Dataset::new(y, w, None).unwrap();
        let naive = crate::glm::fit(&data, &scheme, Link::Identity).unwrap();
        let mut config = McsimexConfig::new(17);
        config.n_sim = 8;
        let res = mcsimex_estimate(
            &data,
            &scheme,
            Link::Identity,
            &StochasticMatrix::identity(3),
            &config,
        )
        .unwrap();
        for (a, b) in res.theta.iter().zip(&naive.theta) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
        assert_eq!(res.redraws, 0);
    }

    #[test]
    fn estimates_are_deterministic_across_runs() {
        let scheme = CategoryScheme::new(vec![2.0, 4.0]).unwrap();
        let w: Vec<f64> = (0..120).map(|i| 0.5 + (i % 11) as f64 * 0.5).collect();
        let y: Vec<f64> = w.iter().enumerate().map(|(i, &wi)| wi + (i % 3) as f64).collect();
        let data = Dataset::new(y, w, None).unwrap();
        let pi = StochasticMatrix::new(array![
            [0.8, 0.15, 0.05],
            [0.2, 0.6, 0.2],
            [0.05, 0.15, 0.8]
        ])
        .unwrap();
        let config = McsimexConfig::new(23);
        let r1 = mcsimex_estimate(&data, &scheme, Link::Identity, &pi, &config).unwrap();
        let r2 = mcsimex_estimate(&data, &scheme, Link::Identity, &pi, &config).unwrap();
        assert_eq!(r1.theta, r2.theta);
        assert_eq!(r1.se, r2.se);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let scheme = CategoryScheme::new(vec![2.0, 4.0]).unwrap();
        let data =
            Dataset::new(vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 5.0], None).unwrap();
        let pi = StochasticMatrix::identity(2);
        assert!(
            mcsimex_estimate(&data, &scheme, Link::Identity, &pi, &McsimexConfig::new(1)).is_err()
        );
    }
}
