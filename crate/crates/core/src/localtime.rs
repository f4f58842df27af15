//! Box-kernel local-time estimators, occupation identities and the
//! `∬ (2πΔ(t, s))^{-1/2}` diagnostic.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procmodel::{Family, ProcessModel};
use crate::quad::{composite_graded, gauss_legendre, Endpoint, FixedRule, KahanAcc};
use crate::simulate::PathEnsemble;
use crate::stats::MomentEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalTimeMode {
    /// Lebesgue weights `Δt`.
    Plain,
    /// Variance-measure weights `ΔR`.
    Weighted,
}

/// Uniform bins `[y_j − h, y_j + h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelGrid {
    pub centers: Vec<f64>,
    pub half_width: f64,
}

impl LevelGrid {
    /// `bins` bins, the first starting at `lo`.
    pub fn new(lo: f64, half_width: f64, bins: usize) -> Result<Self> {
        if !(half_width > 0.0) || bins == 0 {
            return Err(Error::param("bins", "need a positive width and at least one bin"));
        }
        Ok(Self {
            centers: (0..bins).map(|j| lo + (2 * j + 1) as f64 * half_width).collect(),
            half_width,
        })
    }

    /// Bins aligned so that one is centred on `anchor`, covering `[lo, hi]`.
    pub fn covering(anchor: f64, half_width: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::param("half_width", "must be positive"));
        }
        let w = 2.0 * half_width;
        let below = ((anchor - half_width - lo) / w).ceil().max(0.0);
        let start = anchor - half_width - below * w;
        let bins = (((hi - start) / w).floor() as usize + 1).max(1);
        Self::new(start, half_width, bins)
    }

    /// Bins covering every value of the ensemble up to `horizon_index`.
    pub fn covering_ensemble(ens: &PathEnsemble, anchor: f64, half_width: f64) -> Result<Self> {
        let (lo, hi) = ens
            .paths
            .iter()
            .flat_map(|p| p.iter())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        Self::covering(anchor, half_width, lo.min(anchor), hi.max(anchor))
    }

    /// 64 bins spanning `±4 √(max R)`.
    pub fn default_for(max_variance: f64) -> Result<Self> {
        let span = 4.0 * max_variance.sqrt();
        Self::new(-span, span / 64.0, 64)
    }

    pub fn lo(&self) -> f64 {
        self.centers[0] - self.half_width
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let j = ((x - self.lo()) / (2.0 * self.half_width)).floor();
        if j >= 0.0 && (j as usize) < self.centers.len() {
            Some(j as usize)
        } else {
            None
        }
    }
}

/// Per-path, per-level local-time estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeEstimate {
    pub levels: LevelGrid,
    pub mode: LocalTimeMode,
    pub horizon: f64,
    /// `mass[m][j] = Σ_{i: G_i ∈ bin j} w_i`; the estimate is `mass / 2h`.
    pub mass: Vec<Vec<f64>>,
    /// Weight of samples outside every bin, per path.
    pub unbinned: Vec<f64>,
}

impl LocalTimeEstimate {
    pub fn value(&self, path: usize, bin: usize) -> f64 {
        self.mass[path][bin] / (2.0 * self.levels.half_width)
    }

    pub fn values(&self, path: usize) -> Vec<f64> {
        (0..self.levels.centers.len()).map(|j| self.value(path, j)).collect()
    }

    /// `Σ_j 2h · estimate_j` per path.
    pub fn total(&self, path: usize) -> f64 {
        self.mass[path].iter().sum()
    }

    pub fn level_column(&self, bin: usize) -> Vec<f64> {
        (0..self.mass.len()).map(|m| self.value(m, bin)).collect()
    }

    /// CSV with columns `path_id,level,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["path_id", "level", "value"])?;
        for m in 0..self.mass.len() {
            for (j, y) in self.levels.centers.iter().enumerate() {
                out.write_record(&[m.to_string(), y.to_string(), self.value(m, j).to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Step weights `Δt_i` or `ΔR_i` for the steps ending at or before `grid[upto]`.
pub fn step_weights(ens: &PathEnsemble, upto: usize, mode: LocalTimeMode) -> Result<Vec<f64>> {
    match mode {
        LocalTimeMode::Plain => Ok(ens.grid[..=upto].windows(2).map(|w| w[1] - w[0]).collect()),
        LocalTimeMode::Weighted => {
            let inc = ens.variance_increments();
            if let Some((i, &d)) = inc[..upto].iter().enumerate().find(|(_, &d)| d < 0.0) {
                return Err(Error::NonPositiveVarianceMeasure {
                    horizon: ens.grid[upto],
                    t: ens.grid[i],
                    increment: d,
                });
            }
            Ok(inc[..upto].to_vec())
        }
    }
}

/// `(1/2h) Σ_i 1{G_{t_i} ∈ bin} w_i` over the steps in `[0, horizon]`.
pub fn local_time_hist(ens: &PathEnsemble, horizon: f64, levels: &LevelGrid, mode: LocalTimeMode) -> Result<LocalTimeEstimate> {
    let upto = ens.index_of(horizon)?;
    let w = step_weights(ens, upto, mode)?;
    let bins = levels.centers.len();
    let (mass, unbinned): (Vec<Vec<f64>>, Vec<f64>) = ens
        .paths
        .par_iter()
        .map(|p| {
            let mut mass = vec![0.0; bins];
            let mut out = 0.0;
            for (x, wi) in p.iter().zip(&w) {
                match levels.bin_of(*x) {
                    Some(j) => mass[j] += wi,
                    None => out += wi,
                }
            }
            (mass, out)
        })
        .unzip();
    Ok(LocalTimeEstimate {
        levels: levels.clone(),
        mode,
        horizon,
        mass,
        unbinned,
    })
}

/// Per path `|Σ_i Φ(G_i) w_i − Σ_j 2h · estimate_j · Φ̄_j|` with `Φ̄_j` the
/// bin average of `Φ`. The left side is accumulated bin by bin in sample
/// order, so a `Φ` taking values in `{0, 1}` on whole bins gives exactly 0.
pub fn occupation_check(ens: &PathEnsemble, phi: &(dyn Fn(f64) -> f64 + Sync), est: &LocalTimeEstimate) -> Result<Vec<f64>> {
    let upto = ens.index_of(est.horizon)?;
    let w = step_weights(ens, upto, est.mode)?;
    let h = est.levels.half_width;
    let gl = gauss_legendre::<f64>(8);
    let averages: Vec<f64> = est
        .levels
        .centers
        .iter()
        .map(|&y| {
            let rule = gl.mapped(y - h, y + h);
            let first = phi(rule.nodes[0]);
            if rule.nodes.iter().all(|&x| phi(x) == first) {
                first
            } else {
                rule.integrate(phi) / (2.0 * h)
            }
        })
        .collect();
    let bins = averages.len();
    Ok(ens
        .paths
        .par_iter()
        .zip(&est.mass)
        .map(|(p, mass)| {
            let mut lhs = vec![0.0; bins];
            let mut outside = 0.0;
            for (x, wi) in p.iter().zip(&w) {
                match est.levels.bin_of(*x) {
                    Some(j) => lhs[j] += phi(*x) * wi,
                    None => outside += phi(*x) * wi,
                }
            }
            let inner: f64 = lhs.iter().zip(mass).zip(&averages).map(|((l, m), a)| l - m * a).sum();
            (inner + outside).abs()
        })
        .collect())
}

fn two_sided_rule(lo: f64, hi: f64, levels: usize) -> FixedRule<f64> {
    let base = gauss_legendre::<f64>(16);
    let mid = 0.5 * (lo + hi);
    let mut r = composite_graded(lo, mid, Endpoint::Left, 0.3, levels, &base);
    r.append(composite_graded(mid, hi, Endpoint::Right, 0.3, levels, &base));
    r
}

fn checked_sum(f: impl Fn(usize) -> Result<f64>) -> Result<f64> {
    let coarse = f(40)?;
    let fine = f(60)?;
    if !fine.is_finite() || (fine - coarse).abs() > 1e-6 * fine.abs().max(1e-12) {
        return Err(Error::Divergent(format!(
            "refinement moved the value from {coarse:.6e} to {fine:.6e}"
        )));
    }
    Ok(fine)
}

/// `E[ℓ_T(a)] = ∫_0^T (2πR_s)^{-1/2} e^{−a²/(2R_s)} ds`, or the same against
/// `dR_s` in weighted mode.
pub fn local_time_mean(model: &ProcessModel, a: f64, horizon: f64, mode: LocalTimeMode) -> Result<f64> {
    let start = model.domain().lo.max(0.0);
    if !(horizon > start) {
        return Err(Error::param("horizon", "must exceed the start of the domain"));
    }
    checked_sum(|levels| {
        let rule = two_sided_rule(start, horizon, levels);
        let mut acc = KahanAcc::default();
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            let r = model.variance(s)?;
            if r <= 0.0 {
                continue;
            }
            let density = (-a * a / (2.0 * r)).exp() / (2.0 * std::f64::consts::PI * r).sqrt();
            let weight = match mode {
                LocalTimeMode::Plain => 1.0,
                LocalTimeMode::Weighted => {
                    let d = model.variance_deriv(s)?;
                    if d < 0.0 {
                        return Err(Error::NonPositiveVarianceMeasure {
                            horizon,
                            t: s,
                            increment: d,
                        });
                    }
                    d
                }
            };
            acc.add(w * density * weight);
        }
        Ok(acc.value())
    })
}

/// `∬_{[0,T]²} (2πΔ(t, s))^{-1/2} dt ds` with `s = t − u` and both `t` and
/// `u` graded toward 0.
pub fn l2_quadrature(model: &ProcessModel, horizon: f64) -> Result<f64> {
    let levels = if matches!(model.family(), Family::VGamma { .. }) {
        20
    } else {
        40
    };
    let run = |levels: usize| -> Result<f64> {
        let base = gauss_legendre::<f64>(16);
        let outer = composite_graded(0.0, horizon, Endpoint::Left, 0.3, levels, &base);
        let rows: Vec<f64> = outer
            .nodes
            .par_iter()
            .map(|&t| {
                let inner = composite_graded(0.0, t, Endpoint::Left, 0.3, levels, &base);
                let mut acc = KahanAcc::default();
                for (&u, &w) in inner.nodes.iter().zip(&inner.weights) {
                    let d = model.increment_variance_lag((t - u).max(0.0), u)?;
                    if d <= 0.0 {
                        return Err(Error::param("model", format!("Δ({t}, {}) vanishes off the diagonal", t - u)));
                    }
                    acc.add(w / (2.0 * std::f64::consts::PI * d).sqrt());
                }
                Ok(acc.value())
            })
            .collect::<Result<_>>()?;
        Ok(2.0 * rows.iter().zip(&outer.weights).map(|(r, w)| r * w).sum::<f64>())
    };
    let coarse = run(levels)?;
    let fine = run(levels + 10)?;
    if !fine.is_finite() || (fine - coarse).abs() > 1e-5 * fine.abs() {
        return Err(Error::Divergent(format!(
            "double integral moved from {coarse:.6e} to {fine:.6e} under refinement"
        )));
    }
    Ok(fine)
}

/// Per path `∫ ℓ̂_T(a)² da = Σ_j mass_j² / 2h`.
pub fn l2_monte_carlo(est: &LocalTimeEstimate) -> Vec<f64> {
    let h2 = 2.0 * est.levels.half_width;
    est.mass.iter().map(|m| m.iter().map(|x| x * x).sum::<f64>() / h2).collect()
}

/// `(∬ (2π · 2R_{|t−s|})^{-1/2}, ∬ (2πR_{|t−s|})^{-1/2})`, which bracket the
/// double integral whenever `R_u ≤ Δ(t, s) ≤ 2R_u`.
pub fn stationary_bracket(model: &ProcessModel, horizon: f64) -> Result<(f64, f64)> {
    let rule = composite_graded(0.0, horizon, Endpoint::Left, 0.3, 40, &gauss_legendre::<f64>(16));
    let mut acc = KahanAcc::default();
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        let r = model.variance(u)?;
        acc.add(w * 2.0 * (horizon - u) / (2.0 * std::f64::consts::PI * r).sqrt());
    }
    let upper = acc.value();
    Ok((upper / 2f64.sqrt(), upper))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Report {
    pub model: String,
    pub horizon: f64,
    pub quadrature: f64,
    pub monte_carlo: Option<MomentEstimate>,
    pub ratio: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    pub half_width: Option<f64>,
    pub paths: Option<usize>,
}

/// Quadrature value, and the ensemble estimate when one is supplied.
pub fn l2_diagnostic(model: &ProcessModel, horizon: f64, ens: Option<(&PathEnsemble, f64)>) -> Result<L2Report> {
    let quadrature = l2_quadrature(model, horizon)?;
    let bracket = match model.family() {
        Family::VGamma { .. } => Some(stationary_bracket(model, horizon)?),
        _ => None,
    };
    let (monte_carlo, half_width, paths) = match ens {
        Some((e, h)) => {
            let levels = LevelGrid::covering_ensemble(e, 0.0, h)?;
            let est = local_time_hist(e, horizon, &levels, LocalTimeMode::Plain)?;
            (
                Some(MomentEstimate::of_mean(&l2_monte_carlo(&est), quadrature)),
                Some(h),
                Some(e.len()),
            )
        }
        None => (None, None, None),
    };
    Ok(L2Report {
        model: model.to_string(),
        horizon,
        quadrature,
        ratio: monte_carlo.map(|m| m.estimate / quadrature),
        monte_carlo,
        bracket,
        half_width,
        paths,
    })
}

/// Per path `|𝓛̂_T(a) − (ℓ̂_T(a) R'(T) − Σ_i ℓ̂_{t_i}(a) R''(t_i) Δt_i)|`,
/// the discrete form of the integration by parts between the two estimators.
pub fn ibp_residuals(ens: &PathEnsemble, model: &ProcessModel, level: f64, half_width: f64) -> Result<Vec<f64>> {
    let n = ens.steps();
    let horizon = ens.horizon();
    let dr_t = model.variance_deriv(horizon)?;
    let step = 1e-6;
    let second: Vec<f64> = ens.grid[..n]
        .iter()
        .map(|&t| {
            if t - step <= 0.0 {
                return Ok(f64::NAN);
            }
            Ok((model.variance_deriv(t + step)? - model.variance_deriv(t - step)?) / (2.0 * step))
        })
        .collect::<Result<_>>()?;
    let dt: Vec<f64> = ens.grid.windows(2).map(|w| w[1] - w[0]).collect();
    let dr = step_weights(ens, n, LocalTimeMode::Weighted)?;
    let scale = 1.0 / (2.0 * half_width);
    Ok(ens
        .paths
        .par_iter()
        .map(|p| {
            let inside = |x: f64| (x - level).abs() < half_width;
            let mut plain = 0.0;
            let mut weighted = 0.0;
            let mut correction = 0.0;
            for i in 0..n {
                // ℓ̂ up to t_i excludes step i itself
                if plain > 0.0 {
                    correction += plain * scale * second[i] * dt[i];
                }
                if inside(p[i]) {
                    plain += dt[i];
                    weighted += dr[i];
                }
            }
            (weighted * scale - (plain * scale * dr_t - correction)).abs()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_grid_is_anchored() {
        let g = LevelGrid::covering(0.0, 0.1, -0.55, 0.33).unwrap();
        assert!(g.centers.iter().any(|c| c.abs() < 1e-12));
        assert!(g.lo() <= -0.55 && g.centers.last().unwrap() + 0.1 >= 0.33);
        assert_eq!(g.bin_of(0.05 - 1e-12), g.bin_of(-0.05));
    }

    #[test]
    fn constant_path_concentrates_in_one_bin() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let cov = vec![vec![0.0; 11]; 11];
        let ens = PathEnsemble::from_paths(grid, vec![vec![0.0; 11]], cov).unwrap();
        let levels = LevelGrid::covering(0.0, 0.05, -0.5, 0.5).unwrap();
        let est = local_time_hist(&ens, 1.0, &levels, LocalTimeMode::Plain).unwrap();
        let j = levels.bin_of(0.0).unwrap();
        for k in 0..levels.centers.len() {
            let expect = if k == j { 1.0 / 0.1 } else { 0.0 };
            assert!((est.value(0, k) - expect).abs() < 1e-12);
        }
    }
}
