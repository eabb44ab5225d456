use ndarray_linalg::Eig;
use simfex_core::error_model::ErrorModelParams;
use simfex_core::misclass::estimate_pi_p;
use simfex_core::simulate::solve_sigma2_u;
use simfex_core::dist::norm_quantile;
use simfex_core::misclass::CategoryScheme;
use simfex_core::stochastic_matrix::fractional_power;

fn main() {
    for &lambda in &[0.0, 0.5, 1.0] {
        for &nsr in &[0.2, 0.8, 1.0] {
            for &j in &[3usize, 5] {
                let s2u = solve_sigma2_u(lambda, 10.0, 4.0, nsr).unwrap();
                let sx = 2.0;
                let inv = |t: f64| -> f64 {
                    if lambda == 0.0 { t.exp() } else { ((lambda * t).ln_1p() / lambda).exp() }
                };
                let cuts: Vec<f64> = (1..j).map(|k| inv(10.0 + sx * norm_quantile(k as f64 / j as f64))).collect();
                let scheme = CategoryScheme::new(cuts).unwrap();
                let params = ErrorModelParams::new(lambda, 10.0, 4.0, s2u).unwrap();
                let est = estimate_pi_p(&params, &scheme).unwrap();
                let (vals, _) = est.pi.entries().eig().unwrap();
                let min_re = vals.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
                let max_im = vals.iter().map(|v| v.im.abs()).fold(0.0f64, f64::max);
                let half = fractional_power(&est.pi, 0.5).unwrap();
                let back = half.matrix.entries().dot(half.matrix.entries());
                let dist = (&back - est.pi.entries()).mapv(|v| v * v).sum().sqrt();
                println!("lam={lambda} nsr={nsr} j={j}: min Re(eig)={min_re:+.4} max|Im|={max_im:.2e} clip={:.2e} imag={:.2e} sqrt_resid={dist:.2e}",
                    half.clip_mass, half.imag_residual);
            }
        }
    }
}
