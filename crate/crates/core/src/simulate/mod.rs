//! Synthetic data generation and the Monte Carlo study harness.
//!
//! Data follow the transformed-scale error model: Λ(X,λ) is normal, a
//! centered normal error is added, and both are inverted back to the
//! positive scale (draws falling outside the transform's support are
//! rejected). The response comes from a continuous-covariate regression, so
//! the fitted indicator model is genuinely misspecified and the true
//! category coefficients are defined as g(E(Y | X ∈ C_j)); those are
//! evaluated once per configuration by a large Monte Carlo oracle and
//! cached.

mod report;
mod study;

pub use report::{parse_report_csv, CsvCell, MethodSummary, StudyReport, TargetSummary};
pub use study::{run_study, sensitivity_sweep, StudyOptions, Target};

use crate::dist::norm_quantile;
use crate::error::{Error, Result};
use crate::error_model::{box_cox_inverse, transformed_lower_bound, ReplicateData};
use crate::glm::{Dataset, Link};
use crate::misclass::CategoryScheme;
use crate::rng::stream_rng;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

/// Shape of the exposure distribution; fixes the transformation exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Normal,
    RightSkewed,
    HeavyTailed,
}

impl Setting {
    pub fn lambda(self) -> f64 {
        match self {
            Setting::Normal => 1.0,
            Setting::RightSkewed => 0.26,
            Setting::HeavyTailed => 0.95,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::Normal => "normal",
            Setting::RightSkewed => "right_skewed",
            Setting::HeavyTailed => "heavy_tailed",
        }
    }

    pub const ALL: [Setting; 3] = [Setting::Normal, Setting::RightSkewed, Setting::HeavyTailed];
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "i" => Ok(Setting::Normal),
            "right_skewed" | "right-skewed" | "ii" => Ok(Setting::RightSkewed),
            "heavy_tailed" | "heavy-tailed" | "iii" => Ok(Setting::HeavyTailed),
            other => Err(Error::invalid(format!("unknown setting '{other}'"))),
        }
    }
}

/// Response-generating regression model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Logistic,
    Linear,
    Probit,
}

impl Model {
    pub fn link(self) -> Link {
        match self {
            Model::Logistic => Link::Logit,
            Model::Linear => Link::Identity,
            Model::Probit => Link::Probit,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Logistic => "logistic",
            Model::Linear => "linear",
            Model::Probit => "probit",
        }
    }

    pub const ALL: [Model; 3] = [Model::Logistic, Model::Linear, Model::Probit];
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" | "logit" => Ok(Model::Logistic),
            "linear" | "identity" => Ok(Model::Linear),
            "probit" => Ok(Model::Probit),
            other => Err(Error::invalid(format!("unknown model '{other}'"))),
        }
    }
}

/// One simulation cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub setting: Setting,
    pub model: Model,
    pub nsr: f64,
    pub n: usize,
    pub j: usize,
    pub seed: u64,
    pub mu_lambda_x: f64,
    pub sigma2_lambda_x: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub noise_sd: f64,
}

/// Default regression slopes per setting. These are stand-ins for
/// unpublished study parameters: the slope scales the top-vs-bottom
/// category contrast to roughly 0.35 (tertiles) to 0.45 (quintiles) on the
/// link scale, a regime where the quadratic extrapolant tracks the
/// misclassification decay well.
pub fn default_betas(setting: Setting) -> (f64, f64) {
    match setting {
        // beta0 centers the linear predictor at E[X]
        Setting::Normal => (-0.88, 0.08),
        Setting::RightSkewed => (-0.3076, 0.002),
        Setting::HeavyTailed => (-0.8445, 0.071),
    }
}

pub const DEFAULT_MU_LAMBDA_X: f64 = 10.0;
pub const DEFAULT_SIGMA2_LAMBDA_X: f64 = 4.0;
pub const DEFAULT_NOISE_SD: f64 = 0.75;

impl GenConfig {
    /// A cell with the shipped default parameters.
    pub fn new(setting: Setting, model: Model, nsr: f64, j: usize, n: usize, seed: u64) -> Self {
        let (beta0, beta1) = default_betas(setting);
        GenConfig {
            setting,
            model,
            nsr,
            n,
            j,
            seed,
            mu_lambda_x: DEFAULT_MU_LAMBDA_X,
            sigma2_lambda_x: DEFAULT_SIGMA2_LAMBDA_X,
            beta0,
            beta1,
            noise_sd: DEFAULT_NOISE_SD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nsr > 0.0) {
            return Err(Error::invalid(format!("nsr must be positive, got {}", self.nsr)));
        }
        if self.j < 2 {
            return Err(Error::invalid(format!("j must be at least 2, got {}", self.j)));
        }
        if self.n < 10 {
            return Err(Error::invalid(format!("n must be at least 10, got {}", self.n)));
        }
        if !(self.sigma2_lambda_x > 0.0) {
            return Err(Error::invalid("sigma2_lambda_x must be positive"));
        }
        Ok(())
    }

    /// Analytic quantile cutpoints of the generating X distribution.
    pub fn analytic_scheme(&self) -> Result<CategoryScheme> {
        let lambda = self.setting.lambda();
        let sx = self.sigma2_lambda_x.sqrt();
        let cuts: Vec<f64> = (1..self.j)
            .map(|k| {
                let t = self.mu_lambda_x + sx * norm_quantile(k as f64 / self.j as f64);
                box_cox_inverse(t, lambda)
            })
            .collect::<Result<_>>()?;
        CategoryScheme::new(cuts)
    }

    /// The error variance on the transformed scale that hits the target
    /// noise-to-signal ratio on the original scale.
    pub fn sigma2_u(&self) -> Result<f64> {
        solve_sigma2_u(self.setting.lambda(), self.mu_lambda_x, self.sigma2_lambda_x, self.nsr)
    }
}

/// One generated dataset: the latent exposure, two replicate measurements
/// (the first doubles as the primary contaminated covariate), the response,
/// the analytic categorization and the oracle true coefficients.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub replicates: ReplicateData,
    pub y: Vec<f64>,
    pub scheme: CategoryScheme,
    pub true_theta: Vec<f64>,
    pub sigma2_u: f64,
}

impl GeneratedData {
    pub fn dataset(&self) -> Dataset {
        Dataset { y: self.y.clone(), w: self.w.clone(), z: None }
    }

    /// True θ_J − θ_1.
    pub fn true_relative_difference(&self) -> f64 {
        self.true_theta[self.true_theta.len() - 1] - self.true_theta[0]
    }
}

const REPLICATES_PER_SUBJECT: usize = 2;
const MAX_REJECT_FRACTION: f64 = 0.01;

/// Draws a dataset from the configured cell.
///
/// Each subject gets a latent transformed value plus two replicate errors;
/// any triple whose transformed values leave the Box-Cox support is redrawn
/// and counted, and a rejection rate above 1% aborts (the parameters are
/// then inconsistent with a positive exposure).
pub fn generate(config: &GenConfig, rng: &mut ChaCha12Rng) -> Result<GeneratedData> {
    config.validate()?;
    let lambda = config.setting.lambda();
    let sigma2_u = config.sigma2_u()?;
    let su = sigma2_u.sqrt();
    let sx = config.sigma2_lambda_x.sqrt();
    let mu = config.mu_lambda_x;
    let bound = transformed_lower_bound(lambda);
    let scheme = config.analytic_scheme()?;
    let true_theta = true_theta_oracle(config, DEFAULT_ORACLE_SEED)?.theta;

    let n = config.n;
    let mut x = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut rejected = 0usize;

    for _ in 0..n {
        let (t, us) = loop {
            let t: f64 = mu + sx * rng.sample::<f64, _>(StandardNormal);
            let us: [f64; REPLICATES_PER_SUBJECT] = [
                su * rng.sample::<f64, _>(StandardNormal),
                su * rng.sample::<f64, _>(StandardNormal),
            ];
            let ok = t > bound && us.iter().all(|u| t + u > bound);
            if ok {
                break (t, us);
            }
            rejected += 1;
            if rejected > n {
                return Err(Error::estimation(format!(
                    "rejection rate exceeds {:.0}%: parameters inconsistent with a positive exposure",
                    MAX_REJECT_FRACTION * 100.0
                )));
            }
        };
        let xi = box_cox_inverse(t, lambda)?;
        let wi: Vec<f64> =
            us.iter().map(|&u| box_cox_inverse(t + u, lambda)).collect::<Result<_>>()?;
        let eta = config.beta0 + config.beta1 * xi;
        let yi = match config.model {
            Model::Linear => eta + config.noise_sd * rng.sample::<f64, _>(StandardNormal),
            Model::Logistic | Model::Probit => {
                let pr = config.model.link().inverse(eta);
                if rng.random::<f64>() < pr {
                    1.0
                } else {
                    0.0
                }
            }
        };
        x.push(xi);
        rows.push(wi);
        y.push(yi);
    }
    if (rejected as f64) > MAX_REJECT_FRACTION * (n + rejected) as f64 {
        return Err(Error::estimation(format!(
            "rejection rate {:.3}% exceeds {:.0}%",
            100.0 * rejected as f64 / (n + rejected) as f64,
            MAX_REJECT_FRACTION * 100.0
        )));
    }

    let w = rows.iter().map(|r| r[0]).collect();
    let replicates = ReplicateData::new(rows)?;
    Ok(GeneratedData { x, w, replicates, y, scheme, true_theta, sigma2_u })
}

pub const DEFAULT_ORACLE_SEED: u64 = 0x0AC1_E5EED;

const ORACLE_DRAWS: usize = 10_000_000;

/// Oracle output: the true coefficients and their Monte Carlo standard
/// errors.
#[derive(Debug, Clone)]
pub struct OracleTheta {
    pub theta: Vec<f64>,
    pub se: Vec<f64>,
}

#[derive(PartialEq, Eq, Hash, Clone)]
struct OracleKey {
    setting: Setting,
    model: Model,
    mu_bits: u64,
    s2x_bits: u64,
    beta0_bits: u64,
    beta1_bits: u64,
    j: usize,
    seed: u64,
}

fn oracle_cache() -> &'static Mutex<HashMap<OracleKey, OracleTheta>> {
    static CACHE: OnceLock<Mutex<HashMap<OracleKey, OracleTheta>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// True category coefficients θ_j = g(E(Y | X ∈ C_j)) by brute force:
/// a large sample of X from the generating distribution, the regression
/// function averaged within each analytic category, mapped through the
/// link. Results are cached per configuration and oracle seed, and the
/// noise standard errors are returned via the delta method.
pub fn true_theta_oracle(config: &GenConfig, oracle_seed: u64) -> Result<OracleTheta> {
    let key = OracleKey {
        setting: config.setting,
        model: config.model,
        mu_bits: config.mu_lambda_x.to_bits(),
        s2x_bits: config.sigma2_lambda_x.to_bits(),
        beta0_bits: config.beta0.to_bits(),
        beta1_bits: config.beta1.to_bits(),
        j: config.j,
        seed: oracle_seed,
    };
    if let Some(hit) = oracle_cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }

    let lambda = config.setting.lambda();
    let sx = config.sigma2_lambda_x.sqrt();
    let mu = config.mu_lambda_x;
    let bound = transformed_lower_bound(lambda);
    let scheme = config.analytic_scheme()?;
    let link = config.model.link();
    let j = config.j;

    let mut rng = stream_rng(oracle_seed, 0);
    let mut sum = vec![0.0f64; j];
    let mut sumsq = vec![0.0f64; j];
    let mut count = vec![0u64; j];
    let mut drawn = 0usize;
    while drawn < ORACLE_DRAWS {
        let t: f64 = mu + sx * rng.sample::<f64, _>(StandardNormal);
        if t <= bound {
            continue;
        }
        drawn += 1;
        let xi = box_cox_inverse(t, lambda)?;
        let m = match config.model {
            Model::Linear => config.beta0 + config.beta1 * xi,
            _ => link.inverse(config.beta0 + config.beta1 * xi),
        };
        let cell = scheme.categorize(xi)?;
        sum[cell] += m;
        sumsq[cell] += m * m;
        count[cell] += 1;
    }

    let mut theta = vec![0.0; j];
    let mut se = vec![0.0; j];
    for k in 0..j {
        if count[k] == 0 {
            return Err(Error::EmptyCategory {
                index: k,
                detail: "oracle drew no observations in this category".into(),
            });
        }
        let nk = count[k] as f64;
        let mean = sum[k] / nk;
        let var = (sumsq[k] / nk - mean * mean).max(0.0);
        let mean_se = (var / nk).sqrt();
        theta[k] = link.link(mean);
        // delta method through the link
        let dg = match link {
            Link::Identity => 1.0,
            Link::Logit => 1.0 / (mean * (1.0 - mean)),
            Link::Probit => 1.0 / crate::dist::norm_pdf(norm_quantile(mean)),
        };
        se[k] = dg.abs() * mean_se;
    }
    let out = OracleTheta { theta, se };
    oracle_cache().lock().unwrap().insert(key, out.clone());
    Ok(out)
}

#[derive(PartialEq, Eq, Hash)]
struct NsrKey {
    lambda_bits: u64,
    mu_bits: u64,
    s2x_bits: u64,
    nsr_bits: u64,
}

fn nsr_cache() -> &'static Mutex<HashMap<NsrKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<NsrKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

const NSR_CALIBRATION_DRAWS: usize = 1_000_000;
const NSR_CALIBRATION_SEED: u64 = 0x4E53_52CA;

/// Solves for the transformed-scale error variance that yields the target
/// original-scale noise-to-signal ratio (Var W − Var X) / Var X.
///
/// λ = 1 (shifted normal) and λ = 0 (lognormal) have exact solutions; other
/// exponents are bisected against a fixed-seed Monte Carlo variance
/// estimate to 1% relative tolerance.
pub fn solve_sigma2_u(lambda: f64, mu: f64, sigma2_x: f64, nsr: f64) -> Result<f64> {
    if !(nsr > 0.0) {
        return Err(Error::invalid(format!("nsr must be positive, got {nsr}")));
    }
    if lambda == 1.0 {
        return Ok(nsr * sigma2_x);
    }
    if lambda == 0.0 {
        // X lognormal(mu, s): Var X = (e^s − 1) e^{2mu + s}; solving
        // (e^{s+u} − 1) e^{2mu+s+u} = (1 + nsr) Var X  for  q = e^{s+u}
        // is a quadratic in q.
        let s = sigma2_x;
        let var_x = (s.exp() - 1.0) * (2.0 * mu + s).exp();
        let c = (1.0 + nsr) * var_x * (-2.0 * mu).exp();
        let q = 0.5 * (1.0 + (1.0 + 4.0 * c).sqrt());
        return Ok(q.ln() - s);
    }

    let key = NsrKey {
        lambda_bits: lambda.to_bits(),
        mu_bits: mu.to_bits(),
        s2x_bits: sigma2_x.to_bits(),
        nsr_bits: nsr.to_bits(),
    };
    if let Some(&hit) = nsr_cache().lock().unwrap().get(&key) {
        return Ok(hit);
    }

    let mut rng = stream_rng(NSR_CALIBRATION_SEED, 0);
    let sx = sigma2_x.sqrt();
    let draws: Vec<(f64, f64)> = (0..NSR_CALIBRATION_DRAWS)
        .map(|_| {
            let t: f64 = mu + sx * rng.sample::<f64, _>(StandardNormal);
            let u: f64 = rng.sample(StandardNormal);
            (t, u)
        })
        .collect();
    let bound = transformed_lower_bound(lambda);

    let empirical_nsr = |s2u: f64| -> Result<f64> {
        let su = s2u.sqrt();
        let mut nx = 0.0f64;
        let (mut sx1, mut sx2) = (0.0f64, 0.0f64);
        let (mut sw1, mut sw2) = (0.0f64, 0.0f64);
        for &(t, u) in &draws {
            let tw = t + su * u;
            if t <= bound || tw <= bound {
                continue;
            }
            let x = box_cox_inverse(t, lambda)?;
            let w = box_cox_inverse(tw, lambda)?;
            nx += 1.0;
            sx1 += x;
            sx2 += x * x;
            sw1 += w;
            sw2 += w * w;
        }
        if nx < 1000.0 {
            return Err(Error::estimation("almost all calibration draws rejected"));
        }
        let var_x = sx2 / nx - (sx1 / nx).powi(2);
        let var_w = sw2 / nx - (sw1 / nx).powi(2);
        Ok((var_w - var_x) / var_x)
    };

    let mut lo = 0.0f64;
    let mut hi = sigma2_x;
    while empirical_nsr(hi)? < nsr {
        hi *= 2.0;
        if hi > 1e4 * sigma2_x {
            return Err(Error::estimation(
                "target NSR unreachable within the searched variance range",
            ));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if empirical_nsr(mid)? < nsr {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 0.01 * 0.5 * (hi + lo) {
            break;
        }
    }
    let result = 0.5 * (lo + hi);
    nsr_cache().lock().unwrap().insert(key, result);
    Ok(result)
}
