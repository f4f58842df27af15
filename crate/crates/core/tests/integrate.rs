use whitenoise::integrate::{
    check_growth, compensator_sum, sde_wick_exp, wick_riemann, wiener_indicator, wiener_integral, IntegrandSpec,
};
use whitenoise::procmodel::{ProcessModel, VGammaKernel};
use whitenoise::quad::AdaptiveOptions;
use whitenoise::simulate::{sample_paths, GridSpec, Sampler};
use whitenoise::verify::{ito_residuals, TimeTimesX};

#[test]
fn integral_of_one_matches_indicator() {
    let opts = AdaptiveOptions::default();
    for m in [
        ProcessModel::bm(32).unwrap(),
        ProcessModel::fbm(0.7, 32).unwrap(),
        ProcessModel::fbm(0.3, 32).unwrap(),
    ] {
        let w = wiener_integral(&m, &|_| 1.0, 0.2, 0.9, &opts).unwrap();
        let ind = wiener_indicator(&m, 0.2, 0.9).unwrap();
        for (a, b) in w.chaos.first_chaos.0.iter().zip(&ind.first_chaos.0) {
            assert!((a - b).abs() < 1e-7, "{m}: {a} vs {b}");
        }
    }
}

#[test]
fn vgamma_wiener_integral_reports_accuracy() {
    let m = ProcessModel::vgamma(VGammaKernel::power_law(0.75), 16).unwrap();
    let w = wiener_integral(&m, &|t| t, 0.0, 1.0, &AdaptiveOptions::default()).unwrap();
    assert!(w.abs_error < 1e-6);
    assert!(w.variance() > 0.0);
}

#[test]
fn wick_sum_of_constant_telescopes() {
    let m = ProcessModel::fbm(0.7, 32).unwrap();
    let ens = sample_paths(&m, &GridSpec::uniform(1.0, 64), 16, 5, Sampler::Cholesky).unwrap();
    let sums = wick_riemann(&ens, &IntegrandSpec::power(0));
    for (s, p) in sums.iter().zip(&ens.paths) {
        assert!((s - (p[64] - p[0])).abs() < 1e-12);
    }
}

#[test]
fn time_times_x_residual_is_the_cross_variation() {
    let m = ProcessModel::bm(32).unwrap();
    let ens = sample_paths(&m, &GridSpec::uniform(1.0, 128), 16, 8, Sampler::Cholesky).unwrap();
    let res = ito_residuals(&ens, &TimeTimesX);
    for (r, p) in res.iter().zip(&ens.paths) {
        let cross: f64 = (0..128).map(|i| (ens.grid[i + 1] - ens.grid[i]) * (p[i + 1] - p[i])).sum();
        assert!((r - cross).abs() < 1e-12, "{r} vs {cross}");
    }
}

#[test]
fn brownian_compensator_vanishes() {
    let bm = ProcessModel::bm(8).unwrap();
    let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    assert_eq!(compensator_sum(&bm, &times).unwrap(), 0.0);
    let fbm = ProcessModel::fbm(0.7, 8).unwrap();
    let s = compensator_sum(&fbm, &times).unwrap();
    let n = 100f64;
    assert!((s - 0.5 * (1.0 - n.powf(-0.4))).abs() < 1e-12);
}

#[test]
fn growth_certificates() {
    let m = ProcessModel::bm(8).unwrap();
    let ens = sample_paths(&m, &GridSpec::uniform(1.0, 32), 200, 2, Sampler::Cholesky).unwrap();
    let cube = IntegrandSpec::power(3);
    assert!(check_growth(&*cube.phi, cube.growth, &ens).holds);
    let wild = IntegrandSpec::new("exp(x^2)", |_, x| (x * x).exp(), |_, x| 2.0 * x * (x * x).exp(), cube.growth);
    assert!(!check_growth(&*wild.phi, wild.growth, &ens).holds);
}

#[test]
fn wick_exponential_moments() {
    let m = ProcessModel::bm(32).unwrap();
    let r = sde_wick_exp(&m, &|_| 0.1, &|_| 1.0, 1.0, 2.0, 20_000, 4, &AdaptiveOptions::default()).unwrap();
    let captured: f64 = m.coeffs(1.0).unwrap().iter().map(|c| c * c).sum();
    assert!((r.noise_variance - captured).abs() < 1e-8);
    assert!(r.pass, "{:?} {:?}", r.mean, r.second_moment);
    assert!((r.mean.target - 2.0 * 0.1f64.exp()).abs() < 1e-10);
}
