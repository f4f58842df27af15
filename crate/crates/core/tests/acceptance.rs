//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.
//!
//! Run a subset with `cargo test --test acceptance -- c3 c6`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use whitenoise::integrate::{compensator_sum, sde_wick_exp, wiener_indicator, IntegrandSpec};
use whitenoise::localtime::{
    l2_diagnostic, l2_quadrature, local_time_hist, occupation_check, stationary_bracket, LevelGrid, LocalTimeMode,
};
use whitenoise::procmodel::{ProcessModel, VGammaKernel};
use whitenoise::quad::AdaptiveOptions;
use whitenoise::simulate::{sample_paths, GridSpec, PathEnsemble, Sampler};
use whitenoise::verify::{compare_ito_wick, verify_ito, verify_tanaka, verify_wick_square, Cosine, Power};

const SEED: u64 = 20_240_917;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn grid_paths(model: &ProcessModel, steps: usize, paths: usize, sampler: Sampler) -> PathEnsemble {
    sample_paths(model, &GridSpec::uniform(1.0, steps), paths, SEED, sampler).unwrap()
}

fn c1_covariance() -> Outcome {
    let grid = [0.25, 0.5, 0.75, 1.0];
    let mut pass = true;
    let mut notes = Vec::new();
    let models = [
        ProcessModel::bm(128).unwrap(),
        ProcessModel::bridge(128).unwrap(),
        ProcessModel::fbm(0.3, 128).unwrap(),
        ProcessModel::fbm(0.5, 128).unwrap(),
        ProcessModel::fbm(0.7, 128).unwrap(),
    ];
    for m in &models {
        let report = m.covcheck(&grid, 1e-2).unwrap();
        let mut prev = vec![f64::INFINITY; grid.len()];
        let mut monotone = true;
        for k in [16, 32, 64, 128] {
            let mk = m.with_order(k).unwrap();
            for (i, &t) in grid.iter().enumerate() {
                let captured: f64 = mk.coeffs(t).unwrap().iter().map(|c| c * c).sum();
                let defect = mk.variance(t).unwrap() - captured;
                monotone &= defect <= prev[i] + 1e-12;
                prev[i] = defect;
            }
        }
        pass &= report.pass && monotone;
        notes.push(format!("{m}: err={:.3e} monotone={monotone}", report.max_abs_error));
    }
    Outcome::new(pass, notes.join("; "))
}

fn c2_wiener_variance() -> Outcome {
    let bm = wiener_indicator(&ProcessModel::bm(1 << 20).unwrap(), 0.0, 1.0)
        .unwrap()
        .variance();
    let fbm = wiener_indicator(&ProcessModel::fbm(0.3, 4096).unwrap(), 0.0, 1.0)
        .unwrap()
        .variance();
    let pass = (bm - 1.0).abs() < 1e-3 && (fbm - 1.0).abs() < 1e-2;
    Outcome::new(pass, format!("bm(K=2^20) var={bm:.6}; fbm(H=0.3, K=4096) var={fbm:.6}"))
}

fn c3_wick_square() -> Outcome {
    let ladder = [64, 128, 256, 512];
    let mut pass = true;
    let mut notes = Vec::new();
    for m in [
        ProcessModel::bm(128).unwrap(),
        ProcessModel::fbm(0.3, 128).unwrap(),
        ProcessModel::fbm(0.7, 128).unwrap(),
    ] {
        let ens = grid_paths(&m, 512, 10_000, Sampler::Hermite);
        let r = verify_wick_square(&ens, &m, &ladder, 0.05).unwrap();
        pass &= r.pass;
        let table: Vec<String> = r
            .convergence_table
            .iter()
            .map(|x| format!("{:.2e}", x.relative_residual))
            .collect();
        notes.push(format!("{m}: [{}] monotone={}", table.join(" "), r.monotone));
    }
    Outcome::new(pass, notes.join("; "))
}

fn c4_ito() -> Outcome {
    let ladder = [64, 128, 256, 512];
    let mut pass = true;
    let mut notes = Vec::new();
    for m in [
        ProcessModel::fbm(0.7, 64).unwrap(),
        ProcessModel::vgamma(VGammaKernel::power_law(0.75), 64).unwrap(),
    ] {
        let ens = grid_paths(&m, 512, 2_000, Sampler::Cholesky);
        for f in [&Power(3) as &dyn whitenoise::verify::ItoFunction, &Cosine { frequency: 1.0 }] {
            let r = verify_ito(&ens, &m, f, &ladder, 0.05).unwrap();
            pass &= r.pass;
            notes.push(format!("{m} {}: rel={:.2e}", f.name(), r.relative_residual));
        }
    }
    Outcome::new(pass, notes.join("; "))
}

fn c5_ito_vs_wick() -> Outcome {
    let bm = ProcessModel::bm(64).unwrap();
    let ens = grid_paths(&bm, 512, 1_000, Sampler::Cholesky);
    let mut max_diff: f64 = 0.0;
    for spec in [IntegrandSpec::power(1), IntegrandSpec::power(3)] {
        max_diff = max_diff.max(compare_ito_wick(&ens, &bm, &spec).max_abs_difference);
    }
    let fbm = ProcessModel::fbm(0.8, 64).unwrap();
    let n = 1usize << 16;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let sum = compensator_sum(&fbm, &times).unwrap();
    let pass = max_diff == 0.0 && (sum - 0.5).abs() < 1e-3;
    Outcome::new(
        pass,
        format!("bm max|fwd-wick|={max_diff:e}; fbm(0.8) compensator sum={sum:.6}"),
    )
}

fn c6_tanaka() -> Outcome {
    let bm = ProcessModel::bm(64).unwrap();
    let ens = grid_paths(&bm, 2048, 10_000, Sampler::Cholesky);
    let r = verify_tanaka(&ens, &bm, 0.0, &[(0.4, 512), (0.2, 1024), (0.1, 2048)], 0.025, 0.1).unwrap();
    let rungs: Vec<String> = r
        .rungs
        .iter()
        .map(|x| format!("eps={} ito={:.2e} gap={:.4}", x.eps, x.ito.relative_residual, x.gap))
        .collect();
    Outcome::new(
        r.pass,
        format!(
            "LT={:.4}±{:.4} target={:.4}; {}",
            r.local_time.estimate,
            r.local_time.stderr,
            (2.0 / PI).sqrt(),
            rungs.join(", ")
        ),
    )
}

fn c7_occupation() -> Outcome {
    let bm = ProcessModel::bm(64).unwrap();
    let ens = grid_paths(&bm, 1024, 500, Sampler::Cholesky);
    let mut exact = true;
    let mut worst_piecewise: f64 = 0.0;
    for mode in [LocalTimeMode::Plain, LocalTimeMode::Weighted] {
        let levels = LevelGrid::covering_ensemble(&ens, 0.0, 0.05).unwrap();
        let est = local_time_hist(&ens, 1.0, &levels, mode).unwrap();
        let lv = levels.clone();
        let indicator = move |x: f64| lv.bin_of(x).map_or(0.0, |j| (j % 3 == 0) as u8 as f64);
        exact &= occupation_check(&ens, &indicator, &est).unwrap().iter().all(|&r| r == 0.0);
        let lv = levels.clone();
        let stepped = move |x: f64| lv.bin_of(x).map_or(0.0, |j| (j as f64 * 0.37).sin());
        worst_piecewise = occupation_check(&ens, &stepped, &est)
            .unwrap()
            .into_iter()
            .fold(worst_piecewise, f64::max);
    }
    let mut residuals = Vec::new();
    for h in [0.2, 0.1, 0.05, 0.025] {
        let levels = LevelGrid::covering_ensemble(&ens, 0.0, h).unwrap();
        let est = local_time_hist(&ens, 1.0, &levels, LocalTimeMode::Plain).unwrap();
        let r = occupation_check(&ens, &|x: f64| x.abs(), &est).unwrap();
        residuals.push(r.iter().sum::<f64>() / r.len() as f64);
    }
    let scales = residuals.windows(2).all(|w| w[1] <= 0.6 * w[0]);
    let pass = exact && worst_piecewise < 1e-12 && scales;
    let ladder: Vec<String> = residuals.iter().map(|r| format!("{r:.2e}")).collect();
    Outcome::new(
        pass,
        format!(
            "indicator exact={exact}; piecewise max={worst_piecewise:.1e}; |x| ladder [{}]",
            ladder.join(" ")
        ),
    )
}

fn c8_l2() -> Outcome {
    let norm = (2.0 * PI).sqrt();
    let mut pass = true;
    let mut notes = Vec::new();
    // For H = 0.7 the box of half-width 0.05 flattens the integrand wherever
    // |t − s|^{2H} < ε², which removes about a quarter of the mass; that ratio
    // is reported but not gated.
    for (m, target, gate_mc) in [
        (ProcessModel::bm(64).unwrap(), 8.0 / 3.0 / norm, true),
        (ProcessModel::fbm(0.3, 64).unwrap(), 2.0 / (0.7 * 1.7) / norm, true),
        (ProcessModel::fbm(0.7, 64).unwrap(), 2.0 / (0.3 * 1.3) / norm, false),
    ] {
        let ens = grid_paths(&m, 1024, 10_000, Sampler::Cholesky);
        let r = l2_diagnostic(&m, 1.0, Some((&ens, 0.05))).unwrap();
        let ratio = r.ratio.unwrap();
        pass &= (r.quadrature - target).abs() < 1e-3 && (!gate_mc || (ratio - 1.0).abs() < 0.15);
        let tag = if gate_mc { "" } else { " (info)" };
        notes.push(format!(
            "{m}: quad={:.5} target={target:.5} mc/quad={ratio:.3}{tag}",
            r.quadrature
        ));
    }
    let vg = ProcessModel::vgamma(VGammaKernel::power_law(0.3), 64).unwrap();
    let q = l2_quadrature(&vg, 1.0).unwrap();
    let (lo, hi) = stationary_bracket(&vg, 1.0).unwrap();
    let bracketed = lo <= q && q <= hi;
    pass &= bracketed;
    notes.push(format!("{vg}: {lo:.4} <= {q:.4} <= {hi:.4}"));
    Outcome::new(pass, notes.join("; "))
}

fn c9_vgamma_derivative() -> Outcome {
    let vg = ProcessModel::vgamma(VGammaKernel::power_law(0.75), 32).unwrap();
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    for t in [0.25, 0.5, 1.0] {
        let c = |s: f64| vg.coeffs(s).unwrap();
        let (p1, m1, p2, m2) = (c(t + h), c(t - h), c(t + 2.0 * h), c(t - 2.0 * h));
        let d = vg.coeffs_deriv(t).unwrap();
        for k in 0..32 {
            let fd = (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * h);
            worst = worst.max(((d[k] - fd) / fd).abs());
        }
    }
    Outcome::new(worst < 1e-4, format!("max relative error {worst:.2e}"))
}

fn c10_sde() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for m in [ProcessModel::bm(64).unwrap(), ProcessModel::fbm(0.7, 64).unwrap()] {
        let r = sde_wick_exp(
            &m,
            &|t| 0.2 + 0.1 * t,
            &|t| 0.5 * (1.0 + t).cos(),
            1.0,
            1.5,
            100_000,
            SEED,
            &AdaptiveOptions::default(),
        )
        .unwrap();
        pass &= r.pass;
        notes.push(format!(
            "{m}: z(mean)={:.2} z(second)={:.2}",
            r.mean.z_score, r.second_moment.z_score
        ));
    }
    Outcome::new(pass, notes.join("; "))
}

fn csv_bytes(threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let mut out = Vec::new();
        let fbm = ProcessModel::fbm(0.7, 64).unwrap();
        grid_paths(&fbm, 128, 64, Sampler::Hermite).write_csv(&mut out).unwrap();
        let bm = ProcessModel::bm(64).unwrap();
        let ens = grid_paths(&bm, 256, 64, Sampler::Cholesky);
        ens.write_csv(&mut out).unwrap();
        let levels = LevelGrid::covering_ensemble(&ens, 0.0, 0.05).unwrap();
        local_time_hist(&ens, 1.0, &levels, LocalTimeMode::Weighted)
            .unwrap()
            .write_csv(&mut out)
            .unwrap();
        out
    })
}

fn c11_reproducibility() -> Outcome {
    let one = csv_bytes(1);
    let four = csv_bytes(4);
    Outcome::new(
        one == four,
        format!("{} bytes, 1 vs 4 threads identical={}", one.len(), one == four),
    )
}

type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("c1", "covariance reconstruction", Duration::from_secs(30), c1_covariance),
        ("c2", "wiener-integral variance", Duration::from_secs(10), c2_wiener_variance),
        ("c3", "wick square identity", Duration::from_secs(120), c3_wick_square),
        ("c4", "ito formula", Duration::from_secs(300), c4_ito),
        ("c5", "ito vs wick", Duration::from_secs(60), c5_ito_vs_wick),
        ("c6", "tanaka", Duration::from_secs(180), c6_tanaka),
        ("c7", "occupation formulas", Duration::from_secs(60), c7_occupation),
        ("c8", "l2 diagnostic", Duration::from_secs(180), c8_l2),
        ("c9", "vgamma derivative", Duration::from_secs(30), c9_vgamma_derivative),
        ("c10", "wick-exponential sde", Duration::from_secs(60), c10_sde),
        ("c11", "reproducibility", Duration::from_secs(60), c11_reproducibility),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let pass = outcome.pass && elapsed <= budget;
        failed += usize::from(!pass);
        println!(
            "{} {id:>3} {name:<26} {:>7.1}s (budget {}s)  {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            outcome.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
