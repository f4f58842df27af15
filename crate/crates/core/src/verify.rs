//! Pathwise checks of the Wick–Itô formula, the Tanaka formula and the
//! forward/Wick discrepancy on sampled ensembles.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{check_growth, forward_riemann, polynomial_growth, wick_riemann, GrowthCheck, GrowthTag, IntegrandSpec};
use crate::localtime::{local_time_mean, LocalTimeMode};
use crate::procmodel::ProcessModel;
use crate::simulate::PathEnsemble;
use crate::stats::{mean_stderr, rms_stderr, MomentEstimate};

/// A `C^{1,2}` function `f(t, x)` with its derivatives.
pub trait ItoFunction: fmt::Debug + Send + Sync {
    fn name(&self) -> String;
    fn value(&self, t: f64, x: f64) -> f64;
    fn dt(&self, t: f64, x: f64) -> f64;
    fn dx(&self, t: f64, x: f64) -> f64;
    fn dxx(&self, t: f64, x: f64) -> f64;
    /// Bound on `f` and its derivatives on `[0, horizon]`.
    fn growth(&self, horizon: f64) -> GrowthTag;
}

/// `x^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Power(pub i32);

impl ItoFunction for Power {
    fn name(&self) -> String {
        format!("x^{}", self.0)
    }
    fn value(&self, _: f64, x: f64) -> f64 {
        x.powi(self.0)
    }
    fn dt(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn dx(&self, _: f64, x: f64) -> f64 {
        let n = self.0;
        if n == 0 {
            0.0
        } else {
            n as f64 * x.powi(n - 1)
        }
    }
    fn dxx(&self, _: f64, x: f64) -> f64 {
        let n = self.0;
        if n < 2 {
            0.0
        } else {
            (n * (n - 1)) as f64 * x.powi(n - 2)
        }
    }
    fn growth(&self, _: f64) -> GrowthTag {
        let n = self.0.max(0);
        let mut constant: f64 = 0.0;
        let mut falling = 1.0;
        for j in 0..=2.min(n) {
            constant = constant.max(falling * polynomial_growth(n - j).constant);
            falling *= (n - j) as f64;
        }
        GrowthTag {
            constant,
            lambda: polynomial_growth(n).lambda,
        }
    }
}

/// `cos(ω x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cosine {
    pub frequency: f64,
}

impl ItoFunction for Cosine {
    fn name(&self) -> String {
        format!("cos({}x)", self.frequency)
    }
    fn value(&self, _: f64, x: f64) -> f64 {
        (self.frequency * x).cos()
    }
    fn dt(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn dx(&self, _: f64, x: f64) -> f64 {
        -self.frequency * (self.frequency * x).sin()
    }
    fn dxx(&self, _: f64, x: f64) -> f64 {
        -self.frequency * self.frequency * (self.frequency * x).cos()
    }
    fn growth(&self, _: f64) -> GrowthTag {
        let w = self.frequency.abs();
        GrowthTag {
            constant: 1f64.max(w).max(w * w),
            lambda: 0.0,
        }
    }
}

/// `t · x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTimesX;

impl ItoFunction for TimeTimesX {
    fn name(&self) -> String {
        "t*x".into()
    }
    fn value(&self, t: f64, x: f64) -> f64 {
        t * x
    }
    fn dt(&self, _: f64, x: f64) -> f64 {
        x
    }
    fn dx(&self, t: f64, _: f64) -> f64 {
        t
    }
    fn dxx(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn growth(&self, horizon: f64) -> GrowthTag {
        let g = polynomial_growth(1);
        GrowthTag {
            constant: horizon.abs().max(1.0) * g.constant.max(1.0),
            lambda: g.lambda,
        }
    }
}

/// `√((x − c)² + ε²)`, a smooth stand-in for `|x − c|` whose half second
/// derivative is a unit-mass bump at `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mollified {
    pub level: f64,
    pub eps: f64,
}

impl ItoFunction for Mollified {
    fn name(&self) -> String {
        format!("|x-{}|_eps={}", self.level, self.eps)
    }
    fn value(&self, _: f64, x: f64) -> f64 {
        (x - self.level).hypot(self.eps)
    }
    fn dt(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn dx(&self, _: f64, x: f64) -> f64 {
        (x - self.level) / (x - self.level).hypot(self.eps)
    }
    fn dxx(&self, _: f64, x: f64) -> f64 {
        let r = (x - self.level).hypot(self.eps);
        self.eps * self.eps / (r * r * r)
    }
    fn growth(&self, _: f64) -> GrowthTag {
        let g = polynomial_growth(1);
        GrowthTag {
            constant: (g.constant + self.level.abs() + self.eps).max(1.0 / self.eps),
            lambda: g.lambda,
        }
    }
}

/// One refinement level of a convergence ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub n_steps: usize,
    pub residual_l2: f64,
    pub stderr: f64,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub identity: String,
    pub model: String,
    pub hermite_order: usize,
    pub n_paths: usize,
    pub n_steps: usize,
    /// `‖residual‖_{L²}` at the finest rung.
    pub residual_l2: f64,
    pub stderr: f64,
    pub relative_residual: f64,
    pub tolerance: f64,
    /// Each rung is no worse than the previous one, up to two standard errors.
    pub monotone: bool,
    pub growth: Option<GrowthCheck>,
    pub pass: bool,
    pub convergence_table: Vec<LadderRung>,
}

fn rungs(ens: &PathEnsemble, ladder: &[usize]) -> Result<Vec<PathEnsemble>> {
    if ladder.is_empty() {
        return Err(Error::param("ladder", "needs at least one step count"));
    }
    ladder
        .iter()
        .map(|&n| {
            if n == 0 || !ens.steps().is_multiple_of(n) {
                return Err(Error::Grid(format!(
                    "{n} steps do not divide the {} sampled steps",
                    ens.steps()
                )));
            }
            ens.coarsen(ens.steps() / n)
        })
        .collect()
}

fn rung(n_steps: usize, residuals: &[f64], scale: f64) -> LadderRung {
    let (residual_l2, stderr) = rms_stderr(residuals);
    let relative_residual = if scale > 0.0 { residual_l2 / scale } else { residual_l2 };
    LadderRung {
        n_steps,
        residual_l2,
        stderr,
        relative_residual,
    }
}

fn ladder_monotone(table: &[LadderRung]) -> bool {
    table
        .windows(2)
        .all(|w| w[1].residual_l2 <= w[0].residual_l2 + 2.0 * w[0].stderr.hypot(w[1].stderr))
}

/// Per path `f(T, G_T) − f(t_0, G_0) − Σ f_t Δt − Σ⋄ f_x ΔG − ½ Σ f_xx ΔR`,
/// where `Σ⋄` is the Wick–Riemann sum and `ΔR` the ensemble variance increments.
pub fn ito_residuals(ens: &PathEnsemble, f: &dyn ItoFunction) -> Vec<f64> {
    let grid = &ens.grid;
    let comp = ens.compensator_increments();
    let dr = ens.variance_increments();
    let n = ens.steps();
    ens.paths
        .par_iter()
        .map(|p| {
            let mut acc = f.value(grid[n], p[n]) - f.value(grid[0], p[0]);
            for i in 0..n {
                let (t, x) = (grid[i], p[i]);
                let fxx = f.dxx(t, x);
                acc -= f.dt(t, x) * (grid[i + 1] - t);
                acc -= f.dx(t, x) * (p[i + 1] - x) - fxx * comp[i];
                acc -= 0.5 * fxx * dr[i];
            }
            acc
        })
        .collect()
}

/// Runs [`ito_residuals`] on each rung of `ladder` (step counts dividing the
/// sampled grid), scaled by `‖f(T, G_T) − f(t_0, G_0)‖_{L²}`.
pub fn verify_ito(
    ens: &PathEnsemble,
    model: &ProcessModel,
    f: &dyn ItoFunction,
    ladder: &[usize],
    tolerance: f64,
) -> Result<VerificationReport> {
    let ensembles = rungs(ens, ladder)?;
    let n = ens.steps();
    let ends: Vec<f64> = ens
        .paths
        .iter()
        .map(|p| f.value(ens.grid[n], p[n]) - f.value(ens.grid[0], p[0]))
        .collect();
    let scale = rms_stderr(&ends).0;
    let table: Vec<LadderRung> = ensembles
        .iter()
        .zip(ladder)
        .map(|(e, &steps)| rung(steps, &ito_residuals(e, f), scale))
        .collect();
    let growth = check_growth(
        &|t, x| {
            f.value(t, x)
                .abs()
                .max(f.dx(t, x).abs())
                .max(f.dxx(t, x).abs())
                .max(f.dt(t, x).abs())
        },
        f.growth(ens.horizon()),
        ens,
    );
    Ok(report(
        format!("ito[{}]", f.name()),
        model,
        ens,
        table,
        tolerance,
        Some(growth),
    ))
}

fn report(
    identity: String,
    model: &ProcessModel,
    ens: &PathEnsemble,
    table: Vec<LadderRung>,
    tolerance: f64,
    growth: Option<GrowthCheck>,
) -> VerificationReport {
    let last = *table.last().expect("non-empty ladder");
    let monotone = ladder_monotone(&table);
    let pass = last.relative_residual < tolerance && monotone && growth.is_none_or(|g| g.holds);
    VerificationReport {
        identity,
        model: model.to_string(),
        hermite_order: model.order(),
        n_paths: ens.len(),
        n_steps: last.n_steps,
        residual_l2: last.residual_l2,
        stderr: last.stderr,
        relative_residual: last.relative_residual,
        tolerance,
        monotone,
        growth,
        pass,
        convergence_table: table,
    }
}

/// `Σ⋄ G ΔG` against `½(G_T² − R_T)` on each rung, relative to
/// `‖½(G_T² − R_T)‖_{L²}`. Paths must start at `G_0 = 0`.
pub fn verify_wick_square(
    ens: &PathEnsemble,
    model: &ProcessModel,
    ladder: &[usize],
    tolerance: f64,
) -> Result<VerificationReport> {
    if ens.paths.iter().any(|p| p[0] != 0.0) {
        return Err(Error::param("ensemble", "paths must start at zero"));
    }
    let ensembles = rungs(ens, ladder)?;
    let n = ens.steps();
    let r_t = ens.variance(n);
    let target: Vec<f64> = ens.paths.iter().map(|p| 0.5 * (p[n] * p[n] - r_t)).collect();
    let scale = rms_stderr(&target).0;
    let spec = IntegrandSpec::power(1);
    let table = ensembles
        .iter()
        .zip(ladder)
        .map(|(e, &steps)| {
            let res: Vec<f64> = wick_riemann(e, &spec).iter().zip(&target).map(|(i, t)| i - t).collect();
            rung(steps, &res, scale)
        })
        .collect();
    Ok(report("wick-square".into(), model, ens, table, tolerance, None))
}

/// One mollification level of the Tanaka check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TanakaRung {
    pub eps: f64,
    pub n_steps: usize,
    pub ito: LadderRung,
    /// `½ Σ f_ε''(G_i) ΔR_i`, averaged over paths.
    pub delta_term: f64,
    pub delta_stderr: f64,
    /// Mean of `δ-term − local-time estimate` per path.
    pub gap: f64,
    pub gap_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanakaReport {
    pub model: String,
    pub level: f64,
    pub n_paths: usize,
    pub half_width: f64,
    /// Weighted box-kernel estimate of `𝓛_T(c)` against its mean.
    pub local_time: MomentEstimate,
    pub tolerance: f64,
    pub gap_shrinks: bool,
    pub pass: bool,
    pub rungs: Vec<TanakaRung>,
}

/// Tanaka check at level `c`. Each `(ε, n)` rung runs the Itô formula for
/// [`Mollified`] on the ensemble coarsened to `n` steps; the δ-term is then
/// compared with the weighted local-time estimate of half-width `half_width`
/// on the full grid.
pub fn verify_tanaka(
    ens: &PathEnsemble,
    model: &ProcessModel,
    level: f64,
    ladder: &[(f64, usize)],
    half_width: f64,
    tolerance: f64,
) -> Result<TanakaReport> {
    if ladder.iter().any(|&(eps, _)| !(eps > 0.0)) {
        return Err(Error::param("eps", "mollification widths must be positive"));
    }
    let n = ens.steps();
    let horizon = ens.horizon();
    let dr_full = ens.variance_increments();
    if let Some((i, &d)) = dr_full.iter().enumerate().find(|(_, &d)| d < 0.0) {
        return Err(Error::NonPositiveVarianceMeasure {
            horizon,
            t: ens.grid[i],
            increment: d,
        });
    }
    let lt: Vec<f64> = ens
        .paths
        .par_iter()
        .map(|p| {
            (0..n)
                .filter(|&i| (p[i] - level).abs() < half_width)
                .map(|i| dr_full[i])
                .sum::<f64>()
                / (2.0 * half_width)
        })
        .collect();
    let target = local_time_mean(model, level, horizon, LocalTimeMode::Weighted)?;
    let local_time = MomentEstimate::of_mean(&lt, target);

    let mut rungs = Vec::with_capacity(ladder.len());
    for &(eps, steps) in ladder {
        let e = &self::rungs(ens, &[steps])?[0];
        let f = Mollified { level, eps };
        let ends: Vec<f64> = e.paths.iter().map(|p| f.value(0.0, p[steps]) - f.value(0.0, p[0])).collect();
        let ito = rung(steps, &ito_residuals(e, &f), rms_stderr(&ends).0);
        let dr = e.variance_increments();
        let delta: Vec<f64> = e
            .paths
            .par_iter()
            .map(|p| (0..steps).map(|i| 0.5 * f.dxx(0.0, p[i]) * dr[i]).sum())
            .collect();
        let (delta_term, delta_stderr) = mean_stderr(&delta);
        let gaps: Vec<f64> = delta.iter().zip(&lt).map(|(d, l)| d - l).collect();
        let (gap, gap_stderr) = mean_stderr(&gaps);
        rungs.push(TanakaRung {
            eps,
            n_steps: steps,
            ito,
            delta_term,
            delta_stderr,
            gap,
            gap_stderr,
        });
    }
    let gap_shrinks = rungs
        .windows(2)
        .all(|w| w[1].gap.abs() <= w[0].gap.abs() + 2.0 * w[0].gap_stderr.hypot(w[1].gap_stderr));
    let pass = local_time.within(3.0) && gap_shrinks && rungs.iter().all(|r| r.ito.relative_residual < tolerance);
    Ok(TanakaReport {
        model: model.to_string(),
        level,
        n_paths: ens.len(),
        half_width,
        local_time,
        tolerance,
        gap_shrinks,
        pass,
        rungs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub integrand: String,
    pub model: String,
    pub n_paths: usize,
    pub n_steps: usize,
    pub forward_mean: f64,
    pub forward_stderr: f64,
    pub wick_mean: f64,
    pub wick_stderr: f64,
    /// Mean of `forward − wick` per path.
    pub difference: f64,
    pub difference_stderr: f64,
    pub max_abs_difference: f64,
}

/// Forward and Wick Riemann sums on the same paths.
pub fn compare_ito_wick(ens: &PathEnsemble, model: &ProcessModel, spec: &IntegrandSpec) -> CompareReport {
    let fwd = forward_riemann(ens, spec);
    let wick = wick_riemann(ens, spec);
    let diff: Vec<f64> = fwd.iter().zip(&wick).map(|(a, b)| a - b).collect();
    let (forward_mean, forward_stderr) = mean_stderr(&fwd);
    let (wick_mean, wick_stderr) = mean_stderr(&wick);
    let (difference, difference_stderr) = mean_stderr(&diff);
    CompareReport {
        integrand: spec.name.clone(),
        model: model.to_string(),
        n_paths: ens.len(),
        n_steps: ens.steps(),
        forward_mean,
        forward_stderr,
        wick_mean,
        wick_stderr,
        difference,
        difference_stderr,
        max_abs_difference: diff.iter().fold(0.0, |m, d| m.max(d.abs())),
    }
}
