use simfex_core::misclass::MisclassModel;
use simfex_core::rng::stream_rng;
use simfex_core::simulate::{generate, GenConfig, Model, Setting};
use simfex_core::*;
use std::time::Instant;

fn main() {
    let config = GenConfig::new(Setting::Normal, Model::Linear, 1.0, 3, 1000, 42);
    let mut rng = stream_rng(1, 0);
    let t0 = Instant::now();
    let data = generate(&config, &mut rng).unwrap();
    println!("generate n=1000 (incl oracle first call): {:?}", t0.elapsed());

    let t0 = Instant::now();
    for _ in 0..20 {
        let _ = fit_lambda(&data.w).unwrap();
    }
    println!("fit_lambda n=1000: {:?}/iter", t0.elapsed() / 20);

    let t0 = Instant::now();
    let model = MisclassModel::fit(&data.w, &data.replicates, data.scheme.clone(), None).unwrap();
    let pi_p = model.pi_p().unwrap();
    println!("full Algorithm 1 (lambda + params + pi/p J=3): {:?}", t0.elapsed());

    let t0 = Instant::now();
    for _ in 0..20 {
        let _ = model.pi_p().unwrap();
    }
    println!("estimate_pi_p J=3: {:?}/iter", t0.elapsed() / 20);

    let dataset = data.dataset();
    let grid = EtaGrid::default();
    let t0 = Instant::now();
    for _ in 0..50 {
        let _ = simfex_estimate(&dataset, &data.scheme, glm::Link::Identity, &pi_p.pi, &pi_p.p, &grid, ExtrapolantKind::Quadratic).unwrap();
    }
    println!("simfex_estimate (fit+powers+extrap): {:?}/iter", t0.elapsed() / 50);

    // J=5 pi/p
    let config5 = GenConfig::new(Setting::RightSkewed, Model::Logistic, 0.8, 5, 1000, 43);
    let mut rng5 = stream_rng(2, 0);
    let t0 = Instant::now();
    let data5 = generate(&config5, &mut rng5).unwrap();
    println!("generate J=5 right-skewed (incl oracle + NSR calib): {:?}", t0.elapsed());
    let model5 = MisclassModel::fit(&data5.w, &data5.replicates, data5.scheme.clone(), None).unwrap();
    let t0 = Instant::now();
    for _ in 0..10 {
        let _ = model5.pi_p().unwrap();
    }
    println!("estimate_pi_p J=5 lam=0.26: {:?}/iter", t0.elapsed() / 10);

    // one bootstrap resample equivalent: Algorithm1 + simfex
    let t0 = Instant::now();
    for _ in 0..20 {
        let m = MisclassModel::fit(&data.w, &data.replicates, data.scheme.clone(), None).unwrap();
        let pp = m.pi_p().unwrap();
        let _ = simfex_estimate(&dataset, &data.scheme, glm::Link::Identity, &pp.pi, &pp.p, &grid, ExtrapolantKind::Quadratic).unwrap();
    }
    println!("one bootstrap-resample unit: {:?}/iter", t0.elapsed() / 20);

    // logit fit n=1000
    let cfg_l = GenConfig::new(Setting::Normal, Model::Logistic, 1.0, 3, 1000, 44);
    let mut rng_l = stream_rng(3, 0);
    let data_l = generate(&cfg_l, &mut rng_l).unwrap();
    let ds_l = data_l.dataset();
    let t0 = Instant::now();
    for _ in 0..50 {
        let _ = glm::fit(&ds_l, &data_l.scheme, glm::Link::Logit).unwrap();
    }
    println!("logit IRLS fit n=1000: {:?}/iter", t0.elapsed() / 50);
}
