//! The estimator family behind a common trait.
//!
//! Each correction strategy (naive, MCSIMEX*, SIMFEX) implements
//! [`Method`] and registers under a stable name, so study harness and CLI
//! select estimators at runtime from a plain list of strings.

use crate::error::{Error, Result};
use crate::error_model::ReplicateData;
use crate::glm::{fit, Dataset, Link};
use crate::mcsimex::{mcsimex_estimate, McsimexConfig};
use crate::misclass::{CategoryProbs, CategoryScheme, StochasticMatrix};
use crate::rng::derive_seed;
use crate::simfex::{
    bootstrap_inference, contrast_se, simfex_estimate, BootstrapOptions, EtaGrid, ExtrapolantKind,
};
use ndarray::{s, Array2};

/// Everything a method needs to produce an estimate: the data, the
/// categorization, and the misclassification structure estimated from the
/// replicates (shared across methods so comparisons are like for like).
pub struct EstimationContext<'a> {
    pub data: &'a Dataset,
    pub replicates: &'a ReplicateData,
    pub scheme: &'a CategoryScheme,
    pub link: Link,
    pub pi: &'a StochasticMatrix,
    pub p: &'a CategoryProbs,
    pub grid: &'a EtaGrid,
    pub kind: ExtrapolantKind,
    /// Known transformation exponent; None re-estimates where needed.
    pub lambda: Option<f64>,
    /// Bootstrap resamples for SIMFEX inference; below 50 the bootstrap is
    /// skipped and SIMFEX reports a point estimate only.
    pub boot_resamples: usize,
    /// Pseudo-datasets per grid point for MCSIMEX*.
    pub mcsimex_b: usize,
    pub seed: u64,
}

/// Point estimate with an optional coefficient covariance for building
/// confidence intervals on coefficients and contrasts.
#[derive(Debug, Clone)]
pub struct MethodEstimate {
    pub theta: Vec<f64>,
    pub covariance: Option<Array2<f64>>,
}

impl MethodEstimate {
    pub fn relative_difference(&self) -> f64 {
        self.theta[self.theta.len() - 1] - self.theta[0]
    }

    /// Standard error of θ_hi − θ_lo (zero-based indices).
    pub fn contrast_se(&self, hi: usize, lo: usize) -> Option<f64> {
        self.covariance.as_ref().map(|c| contrast_se(c, hi, lo))
    }
}

/// One estimation strategy, selectable by name.
pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;
    fn estimate(&self, ctx: &EstimationContext) -> Result<MethodEstimate>;
}

/// Regression on the categorized contaminated covariate as-is.
pub struct NaiveMethod;

impl Method for NaiveMethod {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn estimate(&self, ctx: &EstimationContext) -> Result<MethodEstimate> {
        let result = fit(ctx.data, ctx.scheme, ctx.link)?;
        if !result.usable() {
            return Err(Error::estimation("naive fit did not converge cleanly"));
        }
        let j = result.theta.len();
        let covariance = result.covariance.map(|c| c.slice(s![..j, ..j]).to_owned());
        Ok(MethodEstimate { theta: result.theta, covariance })
    }
}

/// MCSIMEX driven by the estimated misclassification matrix.
pub struct McsimexStarMethod;

impl Method for McsimexStarMethod {
    fn name(&self) -> &'static str {
        "mcsimex"
    }

    fn estimate(&self, ctx: &EstimationContext) -> Result<MethodEstimate> {
        let config = McsimexConfig {
            n_sim: ctx.mcsimex_b,
            grid: ctx.grid.clone(),
            kind: ctx.kind,
            seed: derive_seed(ctx.seed, 0x6d63),
        };
        let result = mcsimex_estimate(ctx.data, ctx.scheme, ctx.link, ctx.pi, &config)?;
        Ok(MethodEstimate { theta: result.theta, covariance: result.covariance })
    }
}

/// Simulation-free extrapolation with bootstrap inference.
pub struct SimfexMethod;

impl Method for SimfexMethod {
    fn name(&self) -> &'static str {
        "simfex"
    }

    fn estimate(&self, ctx: &EstimationContext) -> Result<MethodEstimate> {
        if ctx.boot_resamples >= 50 {
            let mut opts = BootstrapOptions::new(ctx.boot_resamples, derive_seed(ctx.seed, 0x7378));
            opts.lambda = ctx.lambda;
            let result = bootstrap_inference(
                ctx.data,
                ctx.replicates,
                ctx.scheme,
                ctx.link,
                ctx.grid,
                ctx.kind,
                &opts,
            )?;
            let covariance = result.bootstrap.as_ref().map(|b| b.covariance.clone());
            Ok(MethodEstimate { theta: result.theta_simfex, covariance })
        } else {
            let result =
                simfex_estimate(ctx.data, ctx.scheme, ctx.link, ctx.pi, ctx.p, ctx.grid, ctx.kind)?;
            if !result.naive.usable() {
                return Err(Error::estimation("underlying naive fit did not converge"));
            }
            Ok(MethodEstimate { theta: result.theta_simfex, covariance: None })
        }
    }
}

/// All registered methods.
pub fn registry() -> Vec<Box<dyn Method>> {
    vec![Box::new(NaiveMethod), Box::new(McsimexStarMethod), Box::new(SimfexMethod)]
}

/// Looks a method up by its registered name (a few aliases accepted).
pub fn by_name(name: &str) -> Result<Box<dyn Method>> {
    match name.to_ascii_lowercase().as_str() {
        "naive" => Ok(Box::new(NaiveMethod)),
        "mcsimex" | "mcsimex*" | "mcsimex_star" => Ok(Box::new(McsimexStarMethod)),
        "simfex" => Ok(Box::new(SimfexMethod)),
        other => Err(Error::invalid(format!(
            "unknown method '{other}' (registered: {})",
            registry().iter().map(|m| m.name()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Resolves a list of names, rejecting duplicates.
pub fn resolve(names: &[String]) -> Result<Vec<Box<dyn Method>>> {
    if names.is_empty() {
        return Err(Error::invalid("no methods requested"));
    }
    let mut out: Vec<Box<dyn Method>> = Vec::with_capacity(names.len());
    for n in names {
        let m = by_name(n)?;
        if out.iter().any(|e| e.name() == m.name()) {
            return Err(Error::invalid(format!("method '{}' listed twice", m.name())));
        }
        out.push(m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_resolve() {
        for m in registry() {
            assert_eq!(by_name(m.name()).unwrap().name(), m.name());
        }
        assert_eq!(by_name("MCSIMEX*").unwrap().name(), "mcsimex");
        assert!(by_name("ridge").is_err());
    }

    #[test]
    fn duplicate_methods_rejected() {
        let names = vec!["naive".to_string(), "mcsimex_star".into(), "mcsimex".into()];
        assert!(resolve(&names).is_err());
        assert_eq!(resolve(&names[..2].to_vec()).unwrap().len(), 2);
    }
}
