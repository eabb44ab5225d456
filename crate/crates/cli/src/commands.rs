//! The five user workflows.

use crate::errors::{CliError, CliResult};
use crate::ingest::{ingest, ColumnMapping, IngestReport};
use crate::output::{config_hash, metadata_header, OutputDir};
use crate::{BootstrapArgs, DataArgs, FitArgs, Format, MisclassArgs, StudyArgs};
use serde_json::json;
use simfex_core::dist::norm_sf;
use simfex_core::error_model::fit_error_params;
use simfex_core::glm::{Dataset, Link};
use simfex_core::methods::{self, EstimationContext, MethodEstimate};
use simfex_core::misclass::{
    estimate_pi_p_by_group, CategoryScheme, MisclassModel, PiPEstimate,
};
use simfex_core::simfex::{simfex_contrast_estimate, EtaGrid, ExtrapolantKind};
use simfex_core::simulate::{
    default_betas, run_study, sensitivity_sweep, GenConfig, Model, Setting, StudyOptions,
    StudyReport, DEFAULT_MU_LAMBDA_X, DEFAULT_NOISE_SD, DEFAULT_SIGMA2_LAMBDA_X,
};
use std::path::Path;
use std::str::FromStr;

fn scheme_from_args(args: &DataArgs, w: &[f64]) -> CliResult<CategoryScheme> {
    match (&args.categories, &args.cutpoints) {
        (Some(j), None) => Ok(CategoryScheme::from_quantiles(w, *j)?),
        (None, Some(cuts)) => Ok(CategoryScheme::new(cuts.clone())?),
        (None, None) => Err(CliError::config(
            "supply exactly one of --categories (quantile cutpoints) or --cutpoints",
        )),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

fn report_rejections(report: &IngestReport) {
    for (row, reason) in &report.rejected {
        eprintln!("row {row} rejected: {reason}");
    }
    if report.n_missing_dropped > 0 {
        eprintln!(
            "{} row(s) dropped for missing values in mapped columns",
            report.n_missing_dropped
        );
    }
}

fn run_with_outputs(
    out: &Path,
    body: impl FnOnce(&OutputDir) -> CliResult<()>,
) -> CliResult<()> {
    let dir = OutputDir::create(out)?;
    match body(&dir) {
        Ok(()) => Ok(()),
        Err(e) => {
            dir.discard();
            Err(e)
        }
    }
}

fn fmt_f(v: f64) -> String {
    // shortest round-trip decimal
    format!("{v}")
}

// ---------------------------------------------------------------- misclass

pub fn misclass(args: MisclassArgs) -> CliResult<()> {
    let mapping = ColumnMapping {
        response: None,
        covariate: args.data.covariate.clone(),
        replicates: args.data.replicates.clone(),
        covariates: vec![],
        group: args.data.group.clone(),
    };
    if mapping.replicates.len() < 2 {
        return Err(CliError::config(
            "misclassification estimation needs at least two replicate columns (--replicates)",
        ));
    }
    let (data, report) = ingest(&args.data.input, &mapping)?;
    report_rejections(&report);
    let scheme = scheme_from_args(&args.data, &data.w)?;
    let replicates = data.replicates.as_ref().expect("replicates mapped");

    let hash = config_hash(&json!({
        "command": "misclass",
        "input": args.data.input.display().to_string(),
        "covariate": args.data.covariate,
        "replicates": args.data.replicates,
        "group": args.data.group,
        "cutpoints": scheme.cutpoints(),
    }));

    let model = MisclassModel::fit(&data.w, replicates, scheme.clone(), None)?;
    let est = model.pi_p()?;
    if est.support_warning() {
        eprintln!(
            "warning: {:.2e} of the fitted normal lies outside the transformed support",
            est.out_of_support_mass
        );
    }

    run_with_outputs(&args.output.out, |dir| {
        let header = metadata_header("misclass", None, &hash);
        write_pi_p(dir, &header, &est)?;

        let mut params_csv = header.clone();
        params_csv.push_str("name,value\n");
        params_csv.push_str(&format!("lambda,{}\n", fmt_f(model.params.lambda)));
        params_csv.push_str(&format!("mu_lambda_x,{}\n", fmt_f(model.params.mu_lambda_x)));
        params_csv
            .push_str(&format!("sigma2_lambda_x,{}\n", fmt_f(model.params.sigma2_lambda_x)));
        params_csv.push_str(&format!("sigma2_u,{}\n", fmt_f(model.params.sigma2_u)));
        params_csv.push_str(&format!("sigma2_floored,{}\n", model.params.sigma2_floored));
        params_csv
            .push_str(&format!("out_of_support_mass,{}\n", fmt_f(est.out_of_support_mass)));
        dir.write("error_model.csv", &params_csv)?;

        // per-group structure and deviations from the pooled one
        if let Some((labels, names)) = &data.groups {
            let lambda = model.params.lambda;
            let mut params_by_level = Vec::new();
            let mut weights = Vec::new();
            for level in 0..names.len() {
                let rows: Vec<usize> =
                    (0..data.w.len()).filter(|&i| labels[i] == level).collect();
                if rows.len() < 2 {
                    return Err(CliError::data(format!(
                        "group level '{}' has {} row(s); cannot estimate its error model",
                        names[level],
                        rows.len()
                    )));
                }
                let w_level: Vec<f64> = rows.iter().map(|&i| data.w[i]).collect();
                let reps_level = replicates.resample(&rows);
                params_by_level
                    .push(fit_error_params(&w_level, &reps_level, Some(lambda))?);
                weights.push(rows.len() as f64);
            }
            let grouped = estimate_pi_p_by_group(&params_by_level, Some(&weights), &scheme)?;
            let mut gcsv = header.clone();
            gcsv.push_str("level,max_pi_deviation,max_p_deviation\n");
            for (i, name) in names.iter().enumerate() {
                gcsv.push_str(&format!(
                    "{name},{},{}\n",
                    fmt_f(grouped.max_pi_deviation[i]),
                    fmt_f(grouped.max_p_deviation[i])
                ));
            }
            dir.write("group_deviations.csv", &gcsv)?;
        }

        let table = render_misclass_table(&model, &est);
        if args.output.format == Format::Table {
            dir.write("misclass.txt", &table)?;
        }
        print!("{table}");
        Ok(())
    })
}

fn write_pi_p(dir: &OutputDir, header: &str, est: &PiPEstimate) -> CliResult<()> {
    let j = est.pi.dim();
    let mut pi_csv = header.to_string();
    pi_csv.push_str(&(1..=j).map(|c| format!("c{c}")).collect::<Vec<_>>().join(","));
    pi_csv.push('\n');
    for r in 0..j {
        let row: Vec<String> = (0..j).map(|c| fmt_f(est.pi.get(r, c))).collect();
        pi_csv.push_str(&row.join(","));
        pi_csv.push('\n');
    }
    dir.write("pi.csv", &pi_csv)?;

    let mut p_csv = header.to_string();
    p_csv.push_str("category,probability\n");
    for (k, v) in est.p.values().iter().enumerate() {
        p_csv.push_str(&format!("{},{}\n", k + 1, fmt_f(*v)));
    }
    dir.write("p.csv", &p_csv)?;
    Ok(())
}

fn render_misclass_table(model: &MisclassModel, est: &PiPEstimate) -> String {
    let j = est.pi.dim();
    let p = &model.params;
    let mut out = format!(
        "error model: lambda = {:.4}, mu = {:.4}, sigma2_x = {:.4}, sigma2_u = {:.4}\n",
        p.lambda, p.mu_lambda_x, p.sigma2_lambda_x, p.sigma2_u
    );
    out.push_str("misclassification matrix (rows: true category; columns: observed):\n");
    for r in 0..j {
        let row: Vec<String> = (0..j).map(|c| format!("{:>7.4}", est.pi.get(r, c))).collect();
        out.push_str(&format!("  {}\n", row.join(" ")));
    }
    let probs: Vec<String> = est.p.values().iter().map(|v| format!("{v:>7.4}")).collect();
    out.push_str(&format!("category probabilities:\n  {}\n", probs.join(" ")));
    out
}

// -------------------------------------------------------------------- fit

struct FitComputation {
    scheme: CategoryScheme,
    estimates: Vec<(String, MethodEstimate)>,
    contrasts: Option<Vec<(String, f64)>>,
    naive_theta_z: Vec<f64>,
    z_names: Vec<String>,
    hash: String,
}

fn compute_fit(args: &FitArgs, boot: usize) -> CliResult<FitComputation> {
    let mapping = ColumnMapping {
        response: Some(args.response.clone()),
        covariate: args.data.covariate.clone(),
        replicates: args.data.replicates.clone(),
        covariates: args.data.covariates.clone(),
        group: args.data.group.clone(),
    };
    if mapping.replicates.len() < 2 {
        return Err(CliError::config(
            "the misclassification step needs at least two replicate columns (--replicates)",
        ));
    }
    let link = Link::from_str(&args.link).map_err(|e| CliError::config(e.to_string()))?;
    let kind = ExtrapolantKind::from_str(&args.extrapolant)
        .map_err(|e| CliError::config(e.to_string()))?;
    let grid = EtaGrid::new(args.eta_grid.clone()).map_err(|e| CliError::config(e.to_string()))?;
    let method_list =
        methods::resolve(&args.methods).map_err(|e| CliError::config(e.to_string()))?;

    let (data, report) = ingest(&args.data.input, &mapping)?;
    report_rejections(&report);
    let scheme = scheme_from_args(&args.data, &data.w)?;
    let replicates = data.replicates.as_ref().expect("replicates mapped");
    let dataset = Dataset::new(data.y.clone().expect("response mapped"), data.w.clone(), data.z.clone())?;

    let hash = config_hash(&json!({
        "command": "fit",
        "input": args.data.input.display().to_string(),
        "response": args.response,
        "covariate": args.data.covariate,
        "replicates": args.data.replicates,
        "covariates": args.data.covariates,
        "group": args.data.group,
        "link": args.link,
        "cutpoints": scheme.cutpoints(),
        "eta_grid": args.eta_grid,
        "extrapolant": args.extrapolant,
        "methods": args.methods,
        "mcsimex_b": args.mcsimex_b,
        "seed": args.seed,
        "boot": boot,
    }));

    let model = MisclassModel::fit(&data.w, replicates, scheme.clone(), None)?;
    let pi_p = model.pi_p()?;
    let ctx = EstimationContext {
        data: &dataset,
        replicates,
        scheme: &scheme,
        link,
        pi: &pi_p.pi,
        p: &pi_p.p,
        grid: &grid,
        kind,
        lambda: None,
        boot_resamples: boot,
        mcsimex_b: args.mcsimex_b,
        seed: args.seed,
    };

    let mut estimates = Vec::new();
    for method in &method_list {
        let est = method.estimate(&ctx).map_err(CliError::from)?;
        estimates.push((method.name().to_string(), est));
    }

    let naive_fit = simfex_core::glm::fit(&dataset, &scheme, link)?;

    // contrast variant over a discrete grouping column
    let contrasts = if let Some((labels, names)) = &data.groups {
        let lambda = model.params.lambda;
        let mut group_models = Vec::new();
        for level in 0..names.len() {
            let rows: Vec<usize> = (0..data.w.len()).filter(|&i| labels[i] == level).collect();
            if rows.len() < 2 {
                return Err(CliError::data(format!(
                    "group level '{}' has {} row(s); cannot estimate its error model",
                    names[level],
                    rows.len()
                )));
            }
            let w_level: Vec<f64> = rows.iter().map(|&i| data.w[i]).collect();
            let reps_level = replicates.resample(&rows);
            let params = fit_error_params(&w_level, &reps_level, Some(lambda))?;
            let est = simfex_core::misclass::estimate_pi_p(&params, &scheme)?;
            group_models.push((est.pi, est.p));
        }
        let contrast = simfex_contrast_estimate(
            &dataset,
            &scheme,
            link,
            labels,
            &group_models,
            &grid,
            kind,
        )?;
        Some(
            contrast
                .iter()
                .enumerate()
                .map(|(k, v)| (format!("theta_{}-theta_1", k + 2), *v))
                .collect(),
        )
    } else {
        None
    };

    Ok(FitComputation {
        scheme,
        estimates,
        contrasts,
        naive_theta_z: naive_fit.theta_z,
        z_names: args.data.covariates.clone(),
        hash,
    })
}

fn write_estimates(
    dir: &OutputDir,
    command: &str,
    seed: u64,
    comp: &FitComputation,
    with_inference: bool,
) -> CliResult<String> {
    let j = comp.scheme.n_categories();
    let header = metadata_header(command, Some(seed), &comp.hash);
    let mut csv = header.clone();
    csv.push_str("method,target,estimate,se,ci_lower,ci_upper,p_value\n");
    let mut table = String::new();

    for (name, est) in &comp.estimates {
        table.push_str(&format!("{name}:\n"));
        for (k, theta) in est.theta.iter().enumerate() {
            let (se_s, lo_s, hi_s) = interval_strings(est, Target::Theta(k), with_inference);
            csv.push_str(&format!(
                "{name},theta_{},{},{se_s},{lo_s},{hi_s},\n",
                k + 1,
                fmt_f(*theta)
            ));
            table.push_str(&format!("  theta_{}         {:>10.4}\n", k + 1, theta));
        }
        let rd = est.relative_difference();
        let (se_s, lo_s, hi_s) = interval_strings(est, Target::Contrast(j - 1, 0), with_inference);
        let p_s = if with_inference {
            est.contrast_se(j - 1, 0)
                .filter(|se| *se > 0.0)
                .map(|se| fmt_f(2.0 * norm_sf((rd / se).abs())))
                .unwrap_or_default()
        } else {
            String::new()
        };
        csv.push_str(&format!(
            "{name},theta_{j}-theta_1,{},{se_s},{lo_s},{hi_s},{p_s}\n",
            fmt_f(rd)
        ));
        table.push_str(&format!(
            "* theta_{j}-theta_1 {rd:>10.4}{}{}\n",
            if se_s.is_empty() {
                String::new()
            } else {
                format!("  se {:>8.4}  95% CI [{}, {}]", est.contrast_se(j - 1, 0).unwrap(),
                    format_args!("{:.4}", lo_s.parse::<f64>().unwrap_or(f64::NAN)),
                    format_args!("{:.4}", hi_s.parse::<f64>().unwrap_or(f64::NAN)))
            },
            if p_s.is_empty() {
                String::new()
            } else {
                format!("  p {:.4}", p_s.parse::<f64>().unwrap_or(f64::NAN))
            }
        ));
    }

    if !comp.naive_theta_z.is_empty() {
        for (name, value) in comp.z_names.iter().zip(&comp.naive_theta_z) {
            csv.push_str(&format!("naive,z_{name},{},,,,\n", fmt_f(*value)));
            table.push_str(&format!("  z:{name}          {value:>10.4} (naive fit)\n"));
        }
    }

    if let Some(contrasts) = &comp.contrasts {
        table.push_str("group-contrast extrapolation (correlated covariate):\n");
        for (target, value) in contrasts {
            csv.push_str(&format!("simfex_contrast,{target},{},,,,\n", fmt_f(*value)));
            table.push_str(&format!("  {target}   {value:>10.4}\n"));
        }
    }

    dir.write("estimates.csv", &csv)?;
    Ok(table)
}

enum Target {
    Theta(usize),
    Contrast(usize, usize),
}

fn interval_strings(
    est: &MethodEstimate,
    target: Target,
    with_inference: bool,
) -> (String, String, String) {
    if !with_inference {
        return (String::new(), String::new(), String::new());
    }
    let (value, se) = match target {
        Target::Theta(k) => (
            est.theta[k],
            est.covariance.as_ref().map(|c| c[[k, k]].max(0.0).sqrt()),
        ),
        Target::Contrast(hi, lo) => {
            (est.theta[hi] - est.theta[lo], est.contrast_se(hi, lo))
        }
    };
    match se {
        Some(se) => (
            fmt_f(se),
            fmt_f(value - 1.96 * se),
            fmt_f(value + 1.96 * se),
        ),
        None => (String::new(), String::new(), String::new()),
    }
}

pub fn fit(args: FitArgs) -> CliResult<()> {
    let comp = compute_fit(&args, 0)?;
    run_with_outputs(&args.output.out, |dir| {
        let table = write_estimates(dir, "fit", args.seed, &comp, false)?;
        if args.output.format == Format::Table {
            dir.write("estimates.txt", &table)?;
        }
        print!("{table}");
        Ok(())
    })
}

pub fn bootstrap(args: BootstrapArgs) -> CliResult<()> {
    if args.boot < 50 {
        return Err(CliError::config(format!(
            "--boot must be at least 50, got {}",
            args.boot
        )));
    }
    let comp = compute_fit(&args.fit, args.boot)?;
    run_with_outputs(&args.fit.output.out, |dir| {
        let table = write_estimates(dir, "bootstrap", args.fit.seed, &comp, true)?;
        if args.fit.output.format == Format::Table {
            dir.write("estimates.txt", &table)?;
        }
        print!("{table}");
        Ok(())
    })
}

// ------------------------------------------------------------------ study

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyFile {
    setting: String,
    model: String,
    nsr: f64,
    n: usize,
    j: usize,
    seed: u64,
    mu_lambda_x: Option<f64>,
    sigma2_lambda_x: Option<f64>,
    beta0: Option<f64>,
    beta1: Option<f64>,
    noise_sd: Option<f64>,
    reps: Option<usize>,
    boot: Option<usize>,
    mcsimex_b: Option<usize>,
    parallelism: Option<usize>,
    methods: Option<Vec<String>>,
    sweep: Option<SweepSection>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    nsr_values: Vec<f64>,
}

pub fn study(args: StudyArgs, sweep: bool) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", args.config.display())))?;
    let file: StudyFile =
        toml::from_str(&text).map_err(|e| CliError::config(format!("bad config: {e}")))?;

    let setting = Setting::from_str(&file.setting).map_err(|e| CliError::config(e.to_string()))?;
    let model = Model::from_str(&file.model).map_err(|e| CliError::config(e.to_string()))?;
    let (b0_default, b1_default) = default_betas(setting);
    let config = GenConfig {
        setting,
        model,
        nsr: file.nsr,
        n: file.n,
        j: file.j,
        seed: args.seed.unwrap_or(file.seed),
        mu_lambda_x: file.mu_lambda_x.unwrap_or(DEFAULT_MU_LAMBDA_X),
        sigma2_lambda_x: file.sigma2_lambda_x.unwrap_or(DEFAULT_SIGMA2_LAMBDA_X),
        beta0: file.beta0.unwrap_or(b0_default),
        beta1: file.beta1.unwrap_or(b1_default),
        noise_sd: file.noise_sd.unwrap_or(DEFAULT_NOISE_SD),
    };
    let method_names = args
        .methods
        .clone()
        .or(file.methods)
        .unwrap_or_else(|| vec!["naive".into(), "mcsimex".into(), "simfex".into()]);
    let mut opts = StudyOptions::new(
        args.reps.or(file.reps).unwrap_or(200),
        &method_names.iter().map(String::as_str).collect::<Vec<_>>(),
    );
    opts.boot_resamples = args.boot.or(file.boot).unwrap_or(0);
    opts.mcsimex_b = file.mcsimex_b.unwrap_or(100);
    opts.parallelism = file.parallelism.unwrap_or(8);

    let nsr_values = match (&file.sweep, sweep) {
        (Some(s), true) => s.nsr_values.clone(),
        (None, true) => {
            return Err(CliError::config(
                "sweep requires a [sweep] section with nsr_values in the config file",
            ))
        }
        (_, false) => vec![config.nsr],
    };

    // parallelism is excluded: it cannot change any result
    let hash = config_hash(&json!({
        "command": if sweep { "sweep" } else { "simulate" },
        "config": &config,
        "reps": opts.n_reps,
        "boot": opts.boot_resamples,
        "mcsimex_b": opts.mcsimex_b,
        "methods": method_names,
        "nsr_values": nsr_values,
    }));

    run_with_outputs(&args.output.out, |dir| {
        let command = if sweep { "sweep" } else { "simulate" };
        let header = metadata_header(command, Some(config.seed), &hash);
        let write_report = |name: &str, report: &StudyReport| -> CliResult<String> {
            let mut csv = header.clone();
            csv.push_str(&report.to_csv());
            dir.write(name, &csv)?;
            Ok(report.render_table())
        };
        if sweep {
            let results = sensitivity_sweep(&config, &nsr_values, &opts)?;
            let mut tables = String::new();
            for (nsr, report) in &results {
                let table = write_report(&format!("study-nsr{nsr}.csv"), report)?;
                tables.push_str(&table);
                tables.push('\n');
            }
            if args.output.format == Format::Table {
                dir.write("sweep.txt", &tables)?;
            }
            print!("{tables}");
        } else {
            let report = run_study(&config, &opts)?;
            let table = write_report("study.csv", &report)?;
            if args.output.format == Format::Table {
                dir.write("study.txt", &table)?;
            }
            print!("{table}");
        }
        Ok(())
    })
}
