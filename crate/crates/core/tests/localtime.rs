use std::f64::consts::PI;
use std::sync::Arc;

use whitenoise::localtime::{ibp_residuals, l2_quadrature, local_time_hist, local_time_mean, LevelGrid, LocalTimeMode};
use whitenoise::procmodel::{ProcessModel, VGammaKernel, VolterraProfile};
use whitenoise::quad::{integrate_adaptive, AdaptiveOptions};
use whitenoise::simulate::{sample_paths, GridSpec, Sampler};
use whitenoise::Error;

#[test]
fn mean_local_time_at_zero() {
    let bm = ProcessModel::bm(8).unwrap();
    for mode in [LocalTimeMode::Plain, LocalTimeMode::Weighted] {
        let v = local_time_mean(&bm, 0.0, 1.0, mode).unwrap();
        assert!((v - (2.0 / PI).sqrt()).abs() < 1e-8, "{mode:?}: {v}");
    }
    // against dR the mean only depends on R_T
    let fbm = ProcessModel::fbm(0.7, 8).unwrap();
    let v = local_time_mean(&fbm, 0.0, 2.0, LocalTimeMode::Weighted).unwrap();
    let r_t = 2f64.powf(1.4);
    assert!((v - (2.0 * r_t / PI).sqrt()).abs() < 1e-8);
}

#[test]
fn weighted_mean_off_zero() {
    let fbm = ProcessModel::fbm(0.3, 8).unwrap();
    let a = 0.6;
    let v = local_time_mean(&fbm, a, 1.0, LocalTimeMode::Weighted).unwrap();
    let oracle = integrate_adaptive(
        |r: f64| (-a * a / (2.0 * r)).exp() / (2.0 * PI * r).sqrt(),
        0.0,
        1.0,
        &AdaptiveOptions::default(),
    )
    .unwrap()
    .value;
    assert!((v - oracle).abs() < 1e-8);
}

#[test]
fn weighted_mode_rejects_the_bridge() {
    let b = ProcessModel::bridge(8).unwrap();
    assert!(matches!(
        local_time_mean(&b, 0.0, 1.0, LocalTimeMode::Weighted),
        Err(Error::NonPositiveVarianceMeasure { .. })
    ));
    let ens = sample_paths(&b, &GridSpec::uniform(1.0, 16), 4, 1, Sampler::Cholesky).unwrap();
    let levels = LevelGrid::default_for(0.25).unwrap();
    assert!(local_time_hist(&ens, 1.0, &levels, LocalTimeMode::Weighted).is_err());
    assert!(local_time_hist(&ens, 0.5, &levels, LocalTimeMode::Weighted).is_ok());
    assert!(local_time_hist(&ens, 1.0, &levels, LocalTimeMode::Plain).is_ok());
}

#[test]
fn histogram_mass_accounts_for_every_step() {
    let m = ProcessModel::fbm(0.7, 16).unwrap();
    let ens = sample_paths(&m, &GridSpec::uniform(1.0, 100), 20, 3, Sampler::Cholesky).unwrap();
    let narrow = LevelGrid::covering(0.0, 0.05, -0.3, 0.3).unwrap();
    let est = local_time_hist(&ens, 0.5, &narrow, LocalTimeMode::Plain).unwrap();
    for m in 0..20 {
        assert!((est.total(m) + est.unbinned[m] - 0.5).abs() < 1e-12);
    }
}

#[test]
fn brownian_double_integral() {
    let bm = ProcessModel::bm(8).unwrap();
    let q = l2_quadrature(&bm, 1.0).unwrap();
    assert!((q - 8.0 / 3.0 / (2.0 * PI).sqrt()).abs() < 1e-6);
    // scaling: ∬ over [0,T]² grows like T^{3/2}
    let q4 = l2_quadrature(&bm, 4.0).unwrap();
    assert!((q4 / q - 8.0).abs() < 1e-6);
}

/// `γ(r) = r`: increments are too smooth for a square-integrable local time.
#[derive(Debug)]
struct Linear;

impl VolterraProfile for Linear {
    fn gamma_sq(&self, r: f64) -> f64 {
        r * r
    }
    fn gamma_sq_deriv(&self, r: f64) -> f64 {
        2.0 * r
    }
    fn label(&self) -> String {
        "r".into()
    }
}

#[test]
fn smooth_kernel_diverges() {
    let m = ProcessModel::vgamma(VGammaKernel(Arc::new(Linear)), 8).unwrap();
    assert!(matches!(l2_quadrature(&m, 1.0), Err(Error::Divergent(_))));
}

#[test]
fn integration_by_parts_residual_shrinks() {
    let m = ProcessModel::fbm(0.7, 16).unwrap();
    let mean = |steps: usize| {
        let ens = sample_paths(&m, &GridSpec::uniform(1.0, steps), 200, 6, Sampler::Cholesky).unwrap();
        let r = ibp_residuals(&ens, &m, 0.0, 0.1).unwrap();
        r.iter().sum::<f64>() / r.len() as f64
    };
    let (coarse, fine) = (mean(64), mean(512));
    assert!(fine < 0.5 * coarse, "{coarse} -> {fine}");
}
