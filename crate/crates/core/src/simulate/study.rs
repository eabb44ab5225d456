//! Monte Carlo study driver.
//!
//! Per repetition: generate a dataset, estimate the misclassification
//! structure from the replicates, run every requested method and score each
//! target (coefficients and selected contrasts) for bias and interval
//! coverage. Repetitions run in parallel on per-index RNG streams, so a
//! study is bitwise reproducible for any thread count.

use super::report::{StudyReport, TargetSummary};
use super::{generate, GenConfig};
use crate::error::{Error, Result};
use crate::methods::{self, EstimationContext, Method};
use crate::misclass::MisclassModel;
use crate::rng::{derive_seed, stream_rng};
use crate::simfex::{EtaGrid, ExtrapolantKind};
use rayon::prelude::*;
use std::time::Instant;

const CI_Z: f64 = 1.96;
const MAX_FAILURE_FRACTION: f64 = 0.05;

/// An inferential target of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// θ_j, one-based.
    Theta(usize),
    /// θ_hi − θ_lo, one-based.
    Contrast { hi: usize, lo: usize },
}

impl Target {
    pub fn label(&self) -> String {
        match self {
            Target::Theta(j) => format!("theta_{j}"),
            Target::Contrast { hi, lo } => format!("theta_{hi}-theta_{lo}"),
        }
    }

    fn extract(&self, theta: &[f64]) -> f64 {
        match *self {
            Target::Theta(j) => theta[j - 1],
            Target::Contrast { hi, lo } => theta[hi - 1] - theta[lo - 1],
        }
    }

    fn truth(&self, true_theta: &[f64]) -> f64 {
        self.extract(true_theta)
    }

    /// All coefficients, the top-vs-bottom contrast, and for quintiles the
    /// remaining reported contrasts.
    pub fn default_set(j: usize) -> Vec<Target> {
        let mut out: Vec<Target> = (1..=j).map(Target::Theta).collect();
        out.push(Target::Contrast { hi: j, lo: 1 });
        if j == 5 {
            out.push(Target::Contrast { hi: 5, lo: 3 });
            out.push(Target::Contrast { hi: 4, lo: 2 });
            out.push(Target::Contrast { hi: 3, lo: 1 });
        }
        out
    }
}

/// Study controls beyond the generating cell.
#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub n_reps: usize,
    pub methods: Vec<String>,
    /// SIMFEX bootstrap resamples; below 50 the bootstrap (and hence SIMFEX
    /// coverage) is skipped.
    pub boot_resamples: usize,
    /// MCSIMEX* pseudo-datasets per grid point.
    pub mcsimex_b: usize,
    pub parallelism: usize,
    pub grid: EtaGrid,
    pub kind: ExtrapolantKind,
}

impl StudyOptions {
    pub fn new(n_reps: usize, methods: &[&str]) -> Self {
        StudyOptions {
            n_reps,
            methods: methods.iter().map(|s| s.to_string()).collect(),
            boot_resamples: 0,
            mcsimex_b: 100,
            parallelism: 8,
            grid: EtaGrid::default(),
            kind: ExtrapolantKind::Quadratic,
        }
    }
}

struct RepOutcome {
    /// per method, per target: (estimate, Some(ci contains truth))
    cells: Vec<Vec<(f64, Option<bool>)>>,
}

/// Runs the Monte Carlo study for one cell.
pub fn run_study(config: &GenConfig, opts: &StudyOptions) -> Result<StudyReport> {
    if opts.n_reps < 50 {
        return Err(Error::invalid(format!(
            "study needs at least 50 repetitions, got {}",
            opts.n_reps
        )));
    }
    config.validate()?;
    let method_list = methods::resolve(&opts.methods)?;
    let targets = Target::default_set(config.j);
    // warm the caches once so parallel repetitions don't duplicate the work
    let oracle = super::true_theta_oracle(config, super::DEFAULT_ORACLE_SEED)?;
    config.sigma2_u()?;
    let start = Instant::now();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism.max(1))
        .build()
        .map_err(|e| Error::numerical(format!("thread pool: {e}")))?;

    let outcomes: Vec<Result<RepOutcome>> = pool.install(|| {
        (0..opts.n_reps)
            .into_par_iter()
            .map(|rep| run_repetition(config, opts, &method_list, &targets, rep as u64))
            .collect()
    });

    let mut n_failed = 0usize;
    let mut kept: Vec<RepOutcome> = Vec::with_capacity(opts.n_reps);
    for o in outcomes {
        match o {
            Ok(rep) => kept.push(rep),
            Err(_) => n_failed += 1,
        }
    }
    if (n_failed as f64) > MAX_FAILURE_FRACTION * opts.n_reps as f64 {
        return Err(Error::estimation(format!(
            "{n_failed} of {} repetitions failed (> {:.0}%)",
            opts.n_reps,
            MAX_FAILURE_FRACTION * 100.0
        )));
    }

    let n_used = kept.len();
    let mut method_summaries = Vec::with_capacity(method_list.len());
    for (mi, method) in method_list.iter().enumerate() {
        let mut target_summaries = Vec::with_capacity(targets.len());
        for (ti, target) in targets.iter().enumerate() {
            let truth = target.truth(&oracle.theta);
            let estimates: Vec<f64> = kept.iter().map(|r| r.cells[mi][ti].0).collect();
            let hits: Vec<Option<bool>> = kept.iter().map(|r| r.cells[mi][ti].1).collect();
            let m = estimates.len() as f64;
            let mean = estimates.iter().sum::<f64>() / m;
            let bias = mean - truth;
            let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / m;
            let se = var.sqrt();
            let rmse = estimates.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / m;
            let coverage = if hits.iter().all(Option::is_some) {
                let covered = hits.iter().filter(|h| h.unwrap()).count();
                Some(covered as f64 / m)
            } else {
                None
            };
            target_summaries.push(TargetSummary {
                target: target.label(),
                truth,
                bias,
                se,
                rmse: rmse.sqrt(),
                coverage,
                n_used,
            });
        }
        method_summaries.push(super::report::MethodSummary {
            method: method.name().to_string(),
            targets: target_summaries,
        });
    }

    Ok(StudyReport {
        config: config.clone(),
        n_reps: opts.n_reps,
        n_failed,
        methods: method_summaries,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_repetition(
    config: &GenConfig,
    opts: &StudyOptions,
    method_list: &[Box<dyn Method>],
    targets: &[Target],
    rep: u64,
) -> Result<RepOutcome> {
    let mut rng = stream_rng(config.seed, rep);
    let data = generate(config, &mut rng)?;
    let dataset = data.dataset();
    let model = MisclassModel::fit(&data.w, &data.replicates, data.scheme.clone(), None)?;
    let pi_p = model.pi_p()?;

    let ctx = EstimationContext {
        data: &dataset,
        replicates: &data.replicates,
        scheme: &data.scheme,
        link: config.model.link(),
        pi: &pi_p.pi,
        p: &pi_p.p,
        grid: &opts.grid,
        kind: opts.kind,
        lambda: None,
        boot_resamples: opts.boot_resamples,
        mcsimex_b: opts.mcsimex_b,
        seed: derive_seed(config.seed, rep),
    };

    let mut cells = Vec::with_capacity(method_list.len());
    for method in method_list {
        let est = method.estimate(&ctx)?;
        let mut row = Vec::with_capacity(targets.len());
        for target in targets {
            let value = target.extract(&est.theta);
            let truth = target.truth(&data.true_theta);
            let hit = est.covariance.as_ref().map(|cov| {
                let se = match *target {
                    Target::Theta(j) => cov[[j - 1, j - 1]].max(0.0).sqrt(),
                    Target::Contrast { hi, lo } => {
                        crate::simfex::contrast_se(cov, hi - 1, lo - 1)
                    }
                };
                (value - CI_Z * se) <= truth && truth <= (value + CI_Z * se)
            });
            row.push((value, hit));
        }
        cells.push(row);
    }
    Ok(RepOutcome { cells })
}

/// Runs the study at each noise-to-signal ratio in turn.
pub fn sensitivity_sweep(
    base: &GenConfig,
    nsr_values: &[f64],
    opts: &StudyOptions,
) -> Result<Vec<(f64, StudyReport)>> {
    if nsr_values.is_empty() {
        return Err(Error::invalid("empty NSR list"));
    }
    nsr_values
        .iter()
        .map(|&nsr| {
            let mut config = base.clone();
            config.nsr = nsr;
            run_study(&config, opts).map(|r| (nsr, r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{GenConfig, Model, Setting};
    use super::*;

    fn quick_opts(n_reps: usize) -> StudyOptions {
        let mut o = StudyOptions::new(n_reps, &["naive", "simfex"]);
        o.parallelism = 2;
        o.mcsimex_b = 20;
        o
    }

    #[test]
    fn target_labels_and_sets() {
        assert_eq!(Target::Theta(2).label(), "theta_2");
        assert_eq!(Target::Contrast { hi: 5, lo: 1 }.label(), "theta_5-theta_1");
        assert_eq!(Target::default_set(3).len(), 4);
        assert_eq!(Target::default_set(5).len(), 9);
    }

    #[test]
    fn zero_measurement_error_leaves_both_methods_unbiased() {
        let mut config = GenConfig::new(Setting::Normal, Model::Linear, 1e-6, 3, 600, 99);
        config.nsr = 1e-6;
        let report = run_study(&config, &quick_opts(60)).unwrap();
        let rd = format!("theta_{}-theta_1", config.j);
        for m in &report.methods {
            let cell = m.targets.iter().find(|t| t.target == rd).unwrap();
            let mc_se = cell.se / (cell.n_used as f64).sqrt();
            assert!(
                cell.bias.abs() < 2.0 * mc_se.max(1e-3),
                "{}: bias {} vs mc_se {}",
                m.method,
                cell.bias,
                mc_se
            );
        }
    }

    #[test]
    fn study_is_reproducible_across_parallelism() {
        let config = GenConfig::new(Setting::Normal, Model::Linear, 1.0, 3, 300, 5);
        let mut a_opts = quick_opts(50);
        a_opts.parallelism = 1;
        let mut b_opts = quick_opts(50);
        b_opts.parallelism = 4;
        let a = run_study(&config, &a_opts).unwrap();
        let b = run_study(&config, &b_opts).unwrap();
        assert_eq!(a.to_csv_body(), b.to_csv_body());
    }

    #[test]
    fn single_value_sweep_matches_run_study() {
        let config = GenConfig::new(Setting::Normal, Model::Linear, 0.8, 3, 300, 6);
        let opts = quick_opts(50);
        let direct = run_study(&config, &opts).unwrap();
        let sweep = sensitivity_sweep(&config, &[0.8], &opts).unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0].0, 0.8);
        assert_eq!(sweep[0].1.to_csv_body(), direct.to_csv_body());
    }

    #[test]
    fn too_few_reps_rejected() {
        let config = GenConfig::new(Setting::Normal, Model::Linear, 0.8, 3, 300, 6);
        assert!(run_study(&config, &quick_opts(10)).is_err());
    }
}
