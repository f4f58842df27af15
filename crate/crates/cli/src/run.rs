//! Dispatch from a validated config to the library, collecting the report and
//! its CSV tables.

use serde::Serialize;
use serde_json::{json, Value};
use whitenoise::integrate::{check_growth, forward_riemann, sde_wick_exp, wick_riemann, wiener_integral, IntegrandSpec};
use whitenoise::localtime::{l2_diagnostic, l2_monte_carlo, local_time_hist, local_time_mean, occupation_check, LevelGrid};
use whitenoise::procmodel::{Family, ProcessModel};
use whitenoise::quad::{gauss_hermite, AdaptiveOptions};
use whitenoise::simulate::{max_relative_defect, sample_paths, truncation_defect, PathEnsemble, Sampler};
use whitenoise::stats::{mean_stderr, MomentEstimate};
use whitenoise::verify::{compare_ito_wick, verify_ito, verify_tanaka};
use whitenoise::{hermite, Error};

use crate::config::{Command, IntegrandKind, PhiSpec, RunConfig};

/// Result of one command: pass flag, JSON payload and named CSV tables.
pub struct Outcome {
    pub pass: bool,
    pub result: Value,
    pub tables: Vec<(&'static str, Vec<u8>)>,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn table<R: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: R) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn with_writer(f: impl FnOnce(&mut Vec<u8>) -> whitenoise::Result<()>) -> whitenoise::Result<Vec<u8>> {
    let mut out = Vec::new();
    f(&mut out)?;
    Ok(out)
}

fn opts(model: &ProcessModel) -> AdaptiveOptions {
    AdaptiveOptions {
        abs_tol: model.knobs().abs_tol,
        ..AdaptiveOptions::default()
    }
}

fn ensemble(cfg: &RunConfig, model: &ProcessModel) -> whitenoise::Result<PathEnsemble> {
    sample_paths(model, &cfg.grid, cfg.mc.paths, cfg.mc.seed, cfg.mc.sampler)
}

fn defect_table(rows: &[whitenoise::procmodel::DefectRow]) -> Vec<u8> {
    table(
        &["t", "variance", "captured", "defect"],
        rows.iter().map(|r| {
            vec![
                r.t.to_string(),
                r.variance.to_string(),
                r.captured.to_string(),
                r.defect.to_string(),
            ]
        }),
    )
}

pub fn execute(command: Command, cfg: &RunConfig, model: &ProcessModel) -> whitenoise::Result<Outcome> {
    match command {
        Command::BasisCheck => basis_check(cfg, model),
        Command::Covcheck => covcheck(cfg, model),
        Command::Simulate => simulate(cfg, model),
        Command::Wiener => wiener(cfg, model),
        Command::Integrate => integrate(cfg, model),
        Command::VerifyIto => {
            let ens = ensemble(cfg, model)?;
            let f = cfg.ito.function.build();
            let r = verify_ito(&ens, model, f.as_ref(), &cfg.ito_ladder(), cfg.tolerances.relative)?;
            let csv = table(
                &["n_steps", "residual_l2", "stderr", "relative_residual"],
                r.convergence_table.iter().map(|x| {
                    vec![
                        x.n_steps.to_string(),
                        x.residual_l2.to_string(),
                        x.stderr.to_string(),
                        x.relative_residual.to_string(),
                    ]
                }),
            );
            Ok(Outcome {
                pass: r.pass,
                result: to_value(&r),
                tables: vec![("ladder.csv", csv)],
            })
        }
        Command::VerifyTanaka => {
            let mut fine = cfg.clone();
            fine.grid.steps = cfg.tanaka_steps();
            let ens = ensemble(&fine, model)?;
            let t = &cfg.tanaka;
            let r = verify_tanaka(&ens, model, t.level, &cfg.tanaka_ladder(), t.half_width, t.tolerance)?;
            let csv = table(
                &[
                    "eps",
                    "n_steps",
                    "ito_relative",
                    "delta_term",
                    "delta_stderr",
                    "gap",
                    "gap_stderr",
                ],
                r.rungs.iter().map(|x| {
                    [
                        x.eps,
                        x.n_steps as f64,
                        x.ito.relative_residual,
                        x.delta_term,
                        x.delta_stderr,
                        x.gap,
                        x.gap_stderr,
                    ]
                    .iter()
                    .map(f64::to_string)
                    .collect()
                }),
            );
            Ok(Outcome {
                pass: r.pass,
                result: to_value(&r),
                tables: vec![("tanaka.csv", csv)],
            })
        }
        Command::Compare => {
            let ens = ensemble(cfg, model)?;
            let spec = integrand(cfg);
            let r = compare_ito_wick(&ens, model, &spec);
            let fwd = forward_riemann(&ens, &spec);
            let wick = wick_riemann(&ens, &spec);
            let csv = table(
                &["path_id", "forward", "wick", "difference"],
                fwd.iter()
                    .zip(&wick)
                    .enumerate()
                    .map(|(m, (a, b))| vec![m.to_string(), a.to_string(), b.to_string(), (a - b).to_string()]),
            );
            // only Brownian motion has a pathwise identity to check here
            let identity = matches!(model.family(), Family::Bm) && cfg.mc.sampler == Sampler::Cholesky;
            let pass = !identity || r.max_abs_difference == 0.0;
            Ok(Outcome {
                pass,
                result: json!({ "identity_checked": identity, "comparison": r }),
                tables: vec![("compare.csv", csv)],
            })
        }
        Command::Localtime => localtime(cfg, model),
        Command::Occupation => occupation(cfg, model),
        Command::L2Diag => l2(cfg, model),
        Command::Sde => {
            let s = &cfg.sde;
            let (alpha, beta) = (s.alpha, s.beta);
            let r = sde_wick_exp(
                model,
                &|t| alpha.eval(t),
                &|t| beta.eval(t),
                cfg.grid.horizon,
                s.x0,
                cfg.mc.paths,
                cfg.mc.seed,
                &opts(model),
            )?;
            let csv = table(
                &["path_id", "z"],
                r.samples.iter().enumerate().map(|(m, z)| vec![m.to_string(), z.to_string()]),
            );
            Ok(Outcome {
                pass: r.pass,
                result: to_value(&r),
                tables: vec![("sde.csv", csv)],
            })
        }
    }
}

fn integrand(cfg: &RunConfig) -> IntegrandSpec {
    cfg.integrand.unwrap_or(IntegrandKind::Power { n: 1 }).build(cfg.grid.horizon)
}

fn basis_check(cfg: &RunConfig, model: &ProcessModel) -> whitenoise::Result<Outcome> {
    let k = model.order();
    let rule = gauss_hermite::<f64>(k + 32);
    let mut gram = vec![vec![0.0; k]; k];
    let mut e = vec![0.0; k];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        hermite::hermite_functions(x, &mut e);
        for i in 0..k {
            for j in 0..=i {
                gram[i][j] += w * e[i] * e[j];
            }
        }
    }
    let mut orthonormality_error: f64 = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, g) in row.iter().enumerate().take(i + 1) {
            let target = if i == j { 1.0 } else { 0.0 };
            orthonormality_error = orthonormality_error.max((g - target).abs());
        }
    }
    let assumption = model.assumption_check(cfg.grid.start, cfg.grid.horizon)?;
    let times = cfg.grid.times()?;
    let mut rows = Vec::new();
    for &t in &times {
        let c = model.coeffs(t)?;
        let d = match model.coeffs_deriv(t) {
            Ok(d) => Some(d),
            Err(Error::NotDifferentiable { .. }) => None,
            Err(e) => return Err(e),
        };
        for (i, ci) in c.iter().enumerate() {
            let dp = d.as_ref().map(|d| d[i].to_string()).unwrap_or_default();
            rows.push(vec![t.to_string(), i.to_string(), ci.to_string(), dp]);
        }
    }
    let pass = orthonormality_error < cfg.tolerances.basis && assumption.max_rel_error < cfg.tolerances.assumption;
    Ok(Outcome {
        pass,
        result: json!({
            "model": model.to_string(),
            "order": k,
            "orthonormality_error": orthonormality_error,
            "assumption": assumption,
        }),
        tables: vec![("coeffs.csv", table(&["t", "k", "c", "c_prime"], rows))],
    })
}

fn covcheck(cfg: &RunConfig, model: &ProcessModel) -> whitenoise::Result<Outcome> {
    let times = match &cfg.covcheck.times {
        Some(t) => t.clone(),
        None => cfg.grid.times()?.into_iter().filter(|&t| t > 0.0).collect(),
    };
    let tol = cfg.tolerances.covariance;
    let report = model.covcheck(&times, tol)?;
    let csv = defect_table(&report.defects);
    if let Some(g) = &cfg.covcheck.golden {
        let file = std::fs::File::open(&g.path).map_err(|e| Error::Io(format!("{}: {e}", g.path.display())))?;
        let want = whitenoise::Coeffs::read_csv(file)?.0;
        let got = model.coeffs(g.t)?;
        let n = want.len().min(got.len());
        let (worst_k, diff) = (0..n)
            .map(|k| (k, (want[k] - got[k]).abs()))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        let rows = table(
            &["k", "golden", "model", "difference"],
            (0..n).map(|k| {
                vec![
                    k.to_string(),
                    want[k].to_string(),
                    got[k].to_string(),
                    (got[k] - want[k]).to_string(),
                ]
            }),
        );
        return Ok(Outcome {
            pass: diff < cfg.tolerances.golden,
            result: json!({
                "model": model.to_string(),
                "golden": g.path,
                "t": g.t,
                "compared": n,
                "max_difference": diff,
                "worst_k": worst_k,
                "tolerance": cfg.tolerances.golden,
                "truncation": report,
            }),
            tables: vec![("defects.csv", csv), ("golden.csv", rows)],
        });
    }
    let Some(reference) = &cfg.covcheck.reference else {
        return Ok(Outcome {
            pass: report.pass,
            result: to_value(&report),
            tables: vec![("defects.csv", csv)],
        });
    };
    let mut spec = cfg.model.clone();
    spec.family = reference.clone();
    let other = spec.build()?;
    let (a, b) = (model.coeff_table(&times)?, other.coeff_table(&times)?);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let mut truncated: f64 = 0.0;
    let mut closed: f64 = 0.0;
    for i in 0..times.len() {
        for j in 0..=i {
            truncated = truncated.max((dot(&a[i], &a[j]) - dot(&b[i], &b[j])).abs());
            closed = closed.max((model.covariance(times[i], times[j])? - other.covariance(times[i], times[j])?).abs());
        }
    }
    Ok(Outcome {
        pass: truncated < tol && closed < tol,
        result: json!({
            "reference": other.to_string(),
            "max_truncated_difference": truncated,
            "max_closed_form_difference": closed,
            "tolerance": tol,
            "truncation": report,
        }),
        tables: vec![("defects.csv", csv)],
    })
}

fn simulate(cfg: &RunConfig, model: &ProcessModel) -> whitenoise::Result<Outcome> {
    let ens = ensemble(cfg, model)?;
    let mut tables = vec![("paths.csv", with_writer(|w| ens.write_csv(w))?)];
    let mut result = json!({
        "model": model.to_string(),
        "sampler": cfg.mc.sampler,
        "paths": ens.len(),
        "steps": ens.steps(),
    });
    let mut pass = true;
    if cfg.mc.sampler == Sampler::Hermite {
        let rows = truncation_defect(model, &cfg.grid, model.order())?;
        let worst = max_relative_defect(&rows);
        pass = worst < cfg.tolerances.defect;
        result["max_relative_defect"] = json!(worst);
        result["defect_bound"] = json!(cfg.tolerances.defect);
        tables.push(("coords.csv", with_writer(|w| ens.write_coords_csv(w))?));
        tables.push(("defects.csv", defect_table(&rows)));
    }
    Ok(Outcome { pass, result, tables })
}

fn wiener(cfg: &RunConfig, model: &ProcessModel) -> whitenoise::Result<Outcome> {
    let b = &cfg.wiener;
    let f = b.f;
    let w = wiener_integral(model, &|t| f.eval(t), b.a, b.b, &opts(model))?;
    let csv = table(
        &["k", "coefficient"],
        w.chaos
            .first_chaos
            .0
            .iter()
            .enumerate()
            .map(|(k, c)| vec![k.to_string(), c.to_string()]),
    );
    Ok(Outcome {
        pass: true,
        result: json!({
            "model": model.to_string(),
            "variance": w.variance(),
            "abs_error": w.abs_error,
            "a": b.a,
            "b": b.b,
        }),
        tables: vec![("wiener.csv", csv)],
    })
}

fn integrate(cfg: &RunConfig, model: &ProcessModel) -> whitenoise::Result<Outcome> {
    let ens = ensemble(cfg, model)?;
    let spec = integrand(cfg);
    let fwd = forward_riemann(&ens, &spec);
    let wick = wick_riemann(&ens, &spec);
    let growth = check_growth(&*spec.phi, spec.growth, &ens);
    let (fm, fse) = mean_stderr(&fwd);
    let wick_mean = MomentEstimate::of_mean(&wick, 0.0);
    let csv = table(
        &["path_id", "forward", "wick"],
        fwd.iter()
            .zip(&wick)
            .enumerate()
            .map(|(m, (a, b))| vec![m.to_string(), a.to_string(), b.to_string()]),
    );
    Ok(Outcome {
        pass: growth.holds && wick_mean.within(cfg.tolerances.sigmas),
        result: json!({
            "model": model.to_string(),
            "integrand": spec.name,
            "forward_mean": fm,
            "forward_stderr": fse,
            "wick_mean": wick_mean,
            "growth": growth,
        }),
        tables: vec![("integrals.csv", csv)],
    })
}

fn localtime(cfg: &RunConfig, model: &ProcessModel) -> whitenoise::Result<Outcome> {
    let b = &cfg.localtime;
    let ens = ensemble(cfg, model)?;
    let levels = LevelGrid::covering_ensemble(&ens, b.anchor, b.half_width)?;
    let est = local_time_hist(&ens, cfg.grid.horizon, &levels, b.mode)?;
    let anchor = levels.bin_of(b.anchor).expect("grid covers its anchor");
    let target = local_time_mean(model, b.anchor, cfg.grid.horizon, b.mode)?;
    let at_anchor = MomentEstimate::of_mean(&est.level_column(anchor), target);
    let summary = table(
        &["level", "mean", "stderr"],
        levels.centers.iter().enumerate().map(|(j, y)| {
            let (m, se) = mean_stderr(&est.level_column(j));
            vec![y.to_string(), m.to_string(), se.to_string()]
        }),
    );
    Ok(Outcome {
        pass: at_anchor.within(cfg.tolerances.sigmas),
        result: json!({
            "model": model.to_string(),
            "mode": b.mode,
            "half_width": b.half_width,
            "bins": levels.centers.len(),
            "anchor": b.anchor,
            "at_anchor": at_anchor,
        }),
        tables: vec![("localtime.csv", with_writer(|w| est.write_csv(w))?), ("levels.csv", summary)],
    })
}

fn occupation(cfg: &RunConfig, model: &ProcessModel) -> whitenoise::Result<Outcome> {
    let b = &cfg.occupation;
    let ens = ensemble(cfg, model)?;
    let mut rungs = Vec::new();
    let mut rows = Vec::new();
    for &h in &b.half_widths {
        let levels = LevelGrid::covering_ensemble(&ens, 0.0, h)?;
        let est = local_time_hist(&ens, cfg.grid.horizon, &levels, b.mode)?;
        let res = match b.phi {
            PhiSpec::Abs => occupation_check(&ens, &|x: f64| x.abs(), &est)?,
            PhiSpec::Cosine { frequency } => occupation_check(&ens, &|x: f64| (frequency * x).cos(), &est)?,
            PhiSpec::BinParity => {
                let lv = levels.clone();
                occupation_check(
                    &ens,
                    &move |x: f64| lv.bin_of(x).map_or(0.0, |j| f64::from(u8::from(j % 2 == 0))),
                    &est,
                )?
            }
        };
        let (mean, _) = mean_stderr(&res);
        let max = res.iter().cloned().fold(0.0, f64::max);
        rows.extend(
            res.iter()
                .enumerate()
                .map(|(m, r)| vec![h.to_string(), m.to_string(), r.to_string()]),
        );
        rungs.push(json!({ "half_width": h, "mean_residual": mean, "max_residual": max }));
    }
    let means: Vec<f64> = rungs
        .iter()
        .map(|r| r["mean_residual"].as_f64().unwrap_or(f64::NAN))
        .collect();
    let maxes: Vec<f64> = rungs.iter().map(|r| r["max_residual"].as_f64().unwrap_or(f64::NAN)).collect();
    let pass = match b.phi {
        PhiSpec::BinParity => maxes.iter().all(|&m| m == 0.0),
        _ => {
            let mut order: Vec<usize> = (0..means.len()).collect();
            order.sort_by(|&i, &j| b.half_widths[j].total_cmp(&b.half_widths[i]));
            order.windows(2).all(|w| means[w[1]] <= means[w[0]])
        }
    };
    Ok(Outcome {
        pass,
        result: json!({ "model": model.to_string(), "phi": b.phi, "mode": b.mode, "rungs": rungs }),
        tables: vec![("occupation.csv", table(&["half_width", "path_id", "residual"], rows))],
    })
}

fn l2(cfg: &RunConfig, model: &ProcessModel) -> whitenoise::Result<Outcome> {
    let b = &cfg.l2;
    let horizon = cfg.grid.horizon;
    if b.quadrature_only {
        let r = l2_diagnostic(model, horizon, None)?;
        let pass = r.bracket.is_none_or(|(lo, hi)| lo <= r.quadrature && r.quadrature <= hi);
        return Ok(Outcome {
            pass,
            result: to_value(&r),
            tables: vec![],
        });
    }
    let ens = ensemble(cfg, model)?;
    let r = l2_diagnostic(model, horizon, Some((&ens, b.half_width)))?;
    let levels = LevelGrid::covering_ensemble(&ens, 0.0, b.half_width)?;
    let per_path = l2_monte_carlo(&local_time_hist(
        &ens,
        horizon,
        &levels,
        whitenoise::localtime::LocalTimeMode::Plain,
    )?);
    let bracketed = r.bracket.is_none_or(|(lo, hi)| lo <= r.quadrature && r.quadrature <= hi);
    let pass = bracketed && r.ratio.is_none_or(|x| (x - 1.0).abs() < cfg.tolerances.l2);
    let csv = table(
        &["path_id", "integral"],
        per_path.iter().enumerate().map(|(m, v)| vec![m.to_string(), v.to_string()]),
    );
    Ok(Outcome {
        pass,
        result: to_value(&r),
        tables: vec![("l2.csv", csv)],
    })
}
