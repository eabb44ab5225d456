//! End-to-end behavior of the extrapolation estimators on synthetic data
//! with a known error mechanism.

mod common;

use simfex_core::error_model::ErrorModelParams;
use simfex_core::glm::{fit, Link};
use simfex_core::mcsimex::{mcsimex_estimate, McsimexConfig};
use simfex_core::misclass::estimate_pi_p;
use simfex_core::rng::stream_rng;
use simfex_core::simfex::{
    fit_extrapolant, pseudo_sequence, simfex_contrast_estimate, simfex_estimate, EtaGrid,
    ExtrapolantKind,
};
use simfex_core::simulate::{generate, GenConfig, Model, Setting};
use simfex_core::stochastic_matrix::fractional_power;
use ndarray::Array2;

/// Large-sample check with the true (not estimated) error mechanism: the
/// extrapolated relative difference must beat the naive one.
#[test]
fn simfex_reduces_relative_difference_bias_at_large_n() {
    let config = GenConfig::new(Setting::Normal, Model::Linear, 0.8, 5, 100_000, 314);
    let mut rng = stream_rng(config.seed, 0);
    let data = generate(&config, &mut rng).unwrap();
    let truth = data.true_relative_difference();

    let params = ErrorModelParams::new(1.0, 10.0, 4.0, config.sigma2_u().unwrap()).unwrap();
    let pi_p = estimate_pi_p(&params, &data.scheme).unwrap();
    let res = simfex_estimate(
        &data.dataset(),
        &data.scheme,
        Link::Identity,
        &pi_p.pi,
        &pi_p.p,
        &EtaGrid::default(),
        ExtrapolantKind::Quadratic,
    )
    .unwrap();

    let naive_bias = (res.naive.relative_difference() - truth).abs();
    let simfex_bias = (res.relative_difference - truth).abs();
    assert!(
        simfex_bias < naive_bias,
        "simfex |bias| {simfex_bias:.4} not below naive |bias| {naive_bias:.4}"
    );
    // at this sample size the attenuation is far outside noise
    assert!(naive_bias > 0.1, "naive bias unexpectedly small: {naive_bias:.4}");
}

/// The per-level contrast map, written out literally as the displayed
/// double sum over matrix entries, must reproduce the library result.
#[test]
fn contrast_map_matches_literal_sum() {
    let config = GenConfig::new(Setting::Normal, Model::Linear, 1.0, 3, 4000, 2718);
    let mut rng = stream_rng(config.seed, 0);
    let data = generate(&config, &mut rng).unwrap();
    let dataset = data.dataset();
    let grid = EtaGrid::default();

    // two distinct error mechanisms
    let s2u = config.sigma2_u().unwrap();
    let model_a = estimate_pi_p(
        &ErrorModelParams::new(1.0, 9.0, 4.0, s2u).unwrap(),
        &data.scheme,
    )
    .unwrap();
    let model_b = estimate_pi_p(
        &ErrorModelParams::new(1.0, 11.0, 4.0, 0.5 * s2u).unwrap(),
        &data.scheme,
    )
    .unwrap();

    let naive = fit(&dataset, &data.scheme, Link::Identity).unwrap();
    let theta_tilde: Vec<f64> =
        (1..3).map(|k| naive.theta[k] - naive.theta[0]).collect();

    // literal evaluation per level and grid point:
    //   f̃_j = Σ_{j'≥2} [ π_{j'j} p_{j'} / Σ_i π_{ij} p_i  −  π_{j'1} p_{j'} / Σ_i π_{i1} p_i ] θ̃_{j'}
    let literal_level = |pi: &simfex_core::misclass::StochasticMatrix,
                         p: &simfex_core::misclass::CategoryProbs|
     -> Array2<f64> {
        let mut seq = Array2::<f64>::zeros((grid.len(), 2));
        for (k, &eta) in grid.values().iter().enumerate() {
            let m = fractional_power(pi, eta).unwrap().matrix;
            let denom = |col: usize| -> f64 { (0..3).map(|i| m.get(i, col) * p.get(i)).sum() };
            for j in 1..3 {
                let mut acc = 0.0;
                for jp in 1..3 {
                    let w_j = m.get(jp, j) * p.get(jp) / denom(j);
                    let w_1 = m.get(jp, 0) * p.get(jp) / denom(0);
                    acc += (w_j - w_1) * theta_tilde[jp - 1];
                }
                seq[[k, j - 1]] = acc;
            }
        }
        seq
    };

    let seq_a = literal_level(&model_a.pi, &model_a.p);
    let seq_b = literal_level(&model_b.pi, &model_b.p);
    // half the rows carry each label below, so the mixture is 50/50
    let blended = (&seq_a + &seq_b) * 0.5;
    let expected = fit_extrapolant(&grid, &blended, ExtrapolantKind::Quadratic)
        .unwrap()
        .evaluate(-1.0);

    let labels: Vec<usize> = (0..dataset.len()).map(|i| i % 2).collect();
    let got = simfex_contrast_estimate(
        &dataset,
        &data.scheme,
        Link::Identity,
        &labels,
        &[(model_a.pi.clone(), model_a.p.clone()), (model_b.pi.clone(), model_b.p.clone())],
        &grid,
        ExtrapolantKind::Quadratic,
    )
    .unwrap();

    for (g, e) in got.iter().zip(&expected) {
        assert!((g - e).abs() < 1e-10, "literal {e} vs library {g}");
    }
}

/// The simulation average converges to the simulation-free pseudo-estimate
/// as the number of pseudo-datasets grows.
#[test]
fn mcsimex_sequence_converges_to_pseudo_sequence() {
    let config = GenConfig::new(Setting::Normal, Model::Linear, 0.5, 3, 1000, 161);
    let mut rng = stream_rng(config.seed, 0);
    let data = generate(&config, &mut rng).unwrap();
    let dataset = data.dataset();
    let params = ErrorModelParams::new(1.0, 10.0, 4.0, config.sigma2_u().unwrap()).unwrap();
    let pi_p = estimate_pi_p(&params, &data.scheme).unwrap();
    let grid = EtaGrid::default();

    let naive = fit(&dataset, &data.scheme, Link::Identity).unwrap();
    let pseudo = pseudo_sequence(&pi_p.pi, &pi_p.p, &naive.theta, &grid).unwrap();

    let gap = |b: usize, seed: u64| -> f64 {
        let config = McsimexConfig {
            n_sim: b,
            grid: grid.clone(),
            kind: ExtrapolantKind::Quadratic,
            seed,
        };
        let res = mcsimex_estimate(&dataset, &data.scheme, Link::Identity, &pi_p.pi, &config)
            .unwrap();
        let mut worst = 0.0f64;
        for k in 0..grid.len() {
            for c in 0..3 {
                worst = worst.max((res.sequence[[k, c]] - pseudo[[k, c]]).abs());
            }
        }
        worst
    };

    let mut gaps = [Vec::new(), Vec::new(), Vec::new()];
    for seed in 0..20u64 {
        for (i, &b) in [10usize, 100, 1000].iter().enumerate() {
            gaps[i].push(gap(b, 5000 + seed));
        }
    }
    let median = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let g10 = median(&mut gaps[0]);
    let g100 = median(&mut gaps[1]);
    let g1000 = median(&mut gaps[2]);
    assert!(
        g10 > g100 && g100 > g1000,
        "median gaps not decreasing: {g10:.5} {g100:.5} {g1000:.5}"
    );
}
