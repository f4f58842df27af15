//! Gaussian processes `G_t = ⟨·, g_t⟩` given by their kernel coefficients
//! `c_k(t) = ⟨g_t, e_k⟩` and derivative coefficients `c'_k(t) = ⟨g'_t, e_k⟩`.

pub mod fourier;
pub mod vgamma;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{hermite_antiderivatives, hermite_functions, HermiteBasis};
use crate::quad::{composite_graded, composite_uniform, gauss_legendre, Endpoint};

pub use fourier::fbm_constant;
pub use vgamma::{PowerLaw, VGammaKernel, VolterraProfile};

/// Hurst function of a multifractional Brownian motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HurstFunction {
    Constant {
        value: f64,
    },
    /// `h(t) = start + slope · t`
    Linear {
        start: f64,
        slope: f64,
    },
    /// `h(t) = mean + amplitude · sin(2π frequency · t)`
    Sine {
        mean: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl HurstFunction {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            HurstFunction::Constant { value } => value,
            HurstFunction::Linear { start, slope } => start + slope * t,
            HurstFunction::Sine {
                mean,
                amplitude,
                frequency,
            } => mean + amplitude * (2.0 * std::f64::consts::PI * frequency * t).sin(),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match *self {
            HurstFunction::Constant { .. } => 0.0,
            HurstFunction::Linear { slope, .. } => slope,
            HurstFunction::Sine {
                amplitude, frequency, ..
            } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                amplitude * w * (w * t).cos()
            }
        }
    }

    fn checked(&self, t: f64) -> Result<f64> {
        let h = self.value(t);
        if h > 0.0 && h < 1.0 {
            Ok(h)
        } else {
            Err(Error::param("h", format!("h({t}) = {h} is outside (0, 1)")))
        }
    }
}

/// Closed time interval the model is defined on. `hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::param("domain", format!("[{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                t,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    Bm,
    Bridge,
    Fbm { hurst: f64 },
    Mbm { h: HurstFunction },
    VGamma { kernel: VGammaKernel },
}

/// Numerical knobs shared by the quadrature-based families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelKnobs {
    /// Target for the refinement probe in [`ProcessModel::covcheck`].
    pub abs_tol: f64,
    /// Finite-difference step for mBm derivative coefficients.
    pub fd_step: f64,
    pub graded_ratio: f64,
    pub graded_levels: usize,
    pub panel_nodes: usize,
    /// Fourier integrals are cut at `√(2K+1) + fourier_tail`.
    pub fourier_tail: f64,
    /// Panel width times the largest oscillation wavenumber.
    pub fourier_panel_phase: f64,
}

impl Default for ModelKnobs {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            fd_step: 1e-4,
            graded_ratio: 0.3,
            graded_levels: 60,
            panel_nodes: 16,
            fourier_tail: 14.0,
            fourier_panel_phase: 2.0,
        }
    }
}

/// A Gaussian process of one of the reference families, truncated to the
/// first `K` Hermite modes.
#[derive(Debug, Clone)]
pub struct ProcessModel {
    family: Family,
    domain: Domain,
    basis: HermiteBasis<f64>,
    knobs: ModelKnobs,
}

impl ProcessModel {
    pub fn new(family: Family, domain: Domain, order: usize) -> Result<Self> {
        match &family {
            Family::Fbm { hurst } => {
                if !(*hurst > 0.0 && *hurst < 1.0) {
                    return Err(Error::param("hurst", format!("{hurst} is outside (0, 1)")));
                }
            }
            Family::Mbm { h } => {
                let hi = if domain.hi.is_finite() { domain.hi } else { domain.lo + 100.0 };
                for i in 0..=1000 {
                    h.checked(domain.lo + (hi - domain.lo) * i as f64 / 1000.0)?;
                }
            }
            Family::VGamma { kernel } => {
                let p = kernel.profile();
                if p.gamma_sq(0.0) != 0.0 {
                    return Err(Error::param("gamma", "γ(0) must vanish"));
                }
            }
            Family::Bridge => {
                if domain.lo < 0.0 || domain.hi > 1.0 {
                    return Err(Error::param("domain", "the bridge lives on [0, 1]"));
                }
            }
            Family::Bm => {}
        }
        if matches!(family, Family::Bm | Family::VGamma { .. }) && domain.lo < 0.0 {
            return Err(Error::param("domain", "this family is indexed by t ≥ 0"));
        }
        Ok(Self {
            family,
            domain,
            basis: HermiteBasis::new(order)?,
            knobs: ModelKnobs::default(),
        })
    }

    pub fn bm(order: usize) -> Result<Self> {
        Self::new(Family::Bm, Domain::new(0.0, f64::INFINITY)?, order)
    }

    pub fn bridge(order: usize) -> Result<Self> {
        Self::new(Family::Bridge, Domain::new(0.0, 1.0)?, order)
    }

    pub fn fbm(hurst: f64, order: usize) -> Result<Self> {
        Self::new(Family::Fbm { hurst }, Domain::new(0.0, f64::INFINITY)?, order)
    }

    pub fn mbm(h: HurstFunction, domain: Domain, order: usize) -> Result<Self> {
        Self::new(Family::Mbm { h }, domain, order)
    }

    pub fn vgamma(kernel: VGammaKernel, order: usize) -> Result<Self> {
        Self::new(Family::VGamma { kernel }, Domain::new(0.0, f64::INFINITY)?, order)
    }

    pub fn with_domain(self, domain: Domain) -> Result<Self> {
        Self::new(self.family, domain, self.basis.order()).map(|m| m.with_knobs(self.knobs))
    }

    pub fn with_order(&self, order: usize) -> Result<Self> {
        Ok(Self {
            basis: HermiteBasis::new(order)?,
            ..self.clone()
        })
    }

    pub fn with_knobs(mut self, knobs: ModelKnobs) -> Self {
        self.knobs = knobs;
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn basis(&self) -> &HermiteBasis<f64> {
        &self.basis
    }

    pub fn knobs(&self) -> &ModelKnobs {
        &self.knobs
    }

    /// Sobolev index `q` used for `|g'_t|_{-q}` in this family.
    pub fn regularity_index(&self) -> i32 {
        match self.family {
            Family::Bm | Family::Bridge => 1,
            Family::Fbm { .. } | Family::Mbm { .. } => 2,
            Family::VGamma { .. } => 3,
        }
    }

    /// `c_k(t)` for all `k < K`.
    pub fn coeffs(&self, t: f64) -> Result<Vec<f64>> {
        self.coeffs_with(t, false)
    }

    fn coeffs_with(&self, t: f64, refine: bool) -> Result<Vec<f64>> {
        self.domain.check(t)?;
        let k = self.order();
        Ok(match &self.family {
            Family::Bm => {
                let mut out = vec![0.0; k];
                hermite_antiderivatives(t, &mut out);
                out
            }
            Family::Bridge => {
                let mut out = vec![0.0; k];
                let mut one = vec![0.0; k];
                hermite_antiderivatives(t, &mut out);
                hermite_antiderivatives(1.0, &mut one);
                out.iter_mut().zip(&one).for_each(|(o, i)| *o -= t * i);
                out
            }
            Family::Fbm { hurst } => fourier::coeffs(*hurst, t, k, &self.knobs, fourier::Part::Value, refine),
            Family::Mbm { h } => fourier::coeffs(h.checked(t)?, t, k, &self.knobs, fourier::Part::Value, refine),
            Family::VGamma { kernel } => vgamma::coeffs(kernel.profile(), t, k, &self.knobs, refine),
        })
    }

    pub fn coeff(&self, t: f64, k: usize) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.coeffs(t)?[k])
    }

    /// `c'_k(t)` for all `k < K`.
    pub fn coeffs_deriv(&self, t: f64) -> Result<Vec<f64>> {
        self.coeffs_deriv_with(t, false)
    }

    fn coeffs_deriv_with(&self, t: f64, refine: bool) -> Result<Vec<f64>> {
        self.domain.check(t)?;
        let k = self.order();
        Ok(match &self.family {
            Family::Bm => {
                let mut out = vec![0.0; k];
                hermite_functions(t, &mut out);
                out
            }
            Family::Bridge => {
                let mut out = vec![0.0; k];
                let mut one = vec![0.0; k];
                hermite_functions(t, &mut out);
                hermite_antiderivatives(1.0, &mut one);
                out.iter_mut().zip(&one).for_each(|(o, i)| *o -= i);
                out
            }
            Family::Fbm { hurst } => fourier::coeffs(*hurst, t, k, &self.knobs, fourier::Part::Deriv, refine),
            Family::Mbm { h } => {
                // Richardson-extrapolated central differences of the value
                // coefficients with the same Hurst function.
                let step = self.knobs.fd_step;
                let at = |s: f64| -> Result<Vec<f64>> {
                    Ok(fourier::coeffs(
                        h.checked(s)?,
                        s,
                        k,
                        &self.knobs,
                        fourier::Part::Value,
                        refine,
                    ))
                };
                let (p1, m1, p2, m2) = (at(t + step)?, at(t - step)?, at(t + 2.0 * step)?, at(t - 2.0 * step)?);
                (0..k)
                    .map(|i| (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * step))
                    .collect()
            }
            Family::VGamma { kernel } => {
                if t <= 0.0 {
                    return Err(Error::NotDifferentiable {
                        t,
                        reason: "the Volterra kernel is evaluated on (0, T] only",
                    });
                }
                let p = kernel.profile();
                if !p.eps(t).is_finite() {
                    return Err(Error::NotDifferentiable {
                        t,
                        reason: "ε(t) is not finite",
                    });
                }
                vgamma::coeffs_deriv(p, t, k, &self.knobs, refine)
            }
        })
    }

    pub fn coeff_deriv(&self, t: f64, k: usize) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.coeffs_deriv(t)?[k])
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k < self.order() {
            Ok(())
        } else {
            Err(Error::param("k", format!("{k} ≥ K = {}", self.order())))
        }
    }

    /// Coefficient rows for many times, computed in parallel.
    pub fn coeff_table(&self, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        times.par_iter().map(|&t| self.coeffs(t)).collect()
    }

    pub fn deriv_table(&self, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        times.par_iter().map(|&t| self.coeffs_deriv(t)).collect()
    }

    /// `R_t`.
    pub fn variance(&self, t: f64) -> Result<f64> {
        self.domain.check(t)?;
        Ok(match &self.family {
            Family::Bm => t,
            Family::Bridge => t * (1.0 - t),
            Family::Fbm { hurst } => t.abs().powf(2.0 * hurst),
            Family::Mbm { h } => t.abs().powf(2.0 * h.checked(t)?),
            Family::VGamma { kernel } => kernel.profile().gamma_sq(t),
        })
    }

    /// `R(t, s)`.
    pub fn covariance(&self, t: f64, s: f64) -> Result<f64> {
        self.domain.check(t)?;
        self.domain.check(s)?;
        if t == s {
            return self.variance(t);
        }
        let frac = |h: f64| 0.5 * (t.abs().powf(2.0 * h) + s.abs().powf(2.0 * h) - (t - s).abs().powf(2.0 * h));
        Ok(match &self.family {
            Family::Bm => t.min(s),
            Family::Bridge => t.min(s) - t * s,
            Family::Fbm { hurst } => frac(*hurst),
            Family::Mbm { h } => {
                let (ht, hs) = (h.checked(t)?, h.checked(s)?);
                let hm = 0.5 * (ht + hs);
                let c = fbm_constant(hm).powi(2) / (fbm_constant(ht) * fbm_constant(hs));
                c * frac(hm)
            }
            Family::VGamma { kernel } => vgamma::covariance(kernel.profile(), t, s, &self.knobs),
        })
    }

    /// `Δ(t, s) = E[(G_t − G_s)²]`, evaluated without the cancellation in
    /// `R_t + R_s − 2R(t, s)` wherever a direct form exists.
    pub fn increment_variance(&self, t: f64, s: f64) -> Result<f64> {
        self.domain.check(t)?;
        self.domain.check(s)?;
        let u = (t - s).abs();
        Ok(match &self.family {
            Family::Bm => u,
            Family::Bridge => u - u * u,
            Family::Fbm { hurst } => u.powf(2.0 * hurst),
            Family::Mbm { .. } => (self.variance(t)? + self.variance(s)? - 2.0 * self.covariance(t, s)?).max(0.0),
            Family::VGamma { kernel } => vgamma::increment_variance(kernel.profile(), t.min(s), u, &self.knobs),
        })
    }

    /// `Δ(s + u, s)` with the lag `u ≥ 0` given directly, so that lags far
    /// below the resolution of `s` keep their value.
    pub fn increment_variance_lag(&self, s: f64, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::param("lag", "must be non-negative"));
        }
        self.domain.check(s)?;
        self.domain.check(s + u)?;
        Ok(match &self.family {
            Family::Bm => u,
            Family::Bridge => u - u * u,
            Family::Fbm { hurst } => u.powf(2.0 * hurst),
            Family::Mbm { .. } => return self.increment_variance(s + u, s),
            Family::VGamma { kernel } => vgamma::increment_variance(kernel.profile(), s, u, &self.knobs),
        })
    }

    /// `dR_t/dt`.
    pub fn variance_deriv(&self, t: f64) -> Result<f64> {
        self.domain.check(t)?;
        let singular = || Error::NotDifferentiable {
            t,
            reason: "variance is not differentiable at the origin",
        };
        Ok(match &self.family {
            Family::Bm => 1.0,
            Family::Bridge => 1.0 - 2.0 * t,
            Family::Fbm { hurst } => {
                if t == 0.0 {
                    if *hurst > 0.5 {
                        return Ok(0.0);
                    }
                    return Err(singular());
                }
                2.0 * hurst * t.abs().powf(2.0 * hurst - 1.0) * t.signum()
            }
            Family::Mbm { h } => {
                if t == 0.0 {
                    return Err(singular());
                }
                let hv = h.checked(t)?;
                let a = t.abs();
                a.powf(2.0 * hv) * (2.0 * h.deriv(t) * a.ln() + 2.0 * hv / t)
            }
            Family::VGamma { kernel } => {
                if t <= 0.0 {
                    return Err(singular());
                }
                kernel.profile().gamma_sq_deriv(t)
            }
        })
    }

    /// Compares `Σ_{k<K} c_k(t) c_k(s)` with `R(t, s)` over all grid pairs.
    pub fn covcheck(&self, grid: &[f64], tolerance: f64) -> Result<CovReport> {
        if grid.is_empty() {
            return Err(Error::Grid("empty grid".into()));
        }
        let table = self.coeff_table(grid)?;
        let refined: Vec<Vec<f64>> = match self.family {
            Family::Bm | Family::Bridge => table.clone(),
            _ => grid.par_iter().map(|&t| self.coeffs_with(t, true)).collect::<Result<_>>()?,
        };
        let quadrature_error = table
            .iter()
            .zip(&refined)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        let mut max_abs_error = 0.0;
        let mut worst_pair = (grid[0], grid[0]);
        for i in 0..grid.len() {
            for j in i..grid.len() {
                let approx: f64 = table[i].iter().zip(&table[j]).map(|(a, b)| a * b).sum();
                let err = (approx - self.covariance(grid[i], grid[j])?).abs();
                if err > max_abs_error {
                    max_abs_error = err;
                    worst_pair = (grid[i], grid[j]);
                }
            }
        }
        let mut defects = Vec::with_capacity(grid.len());
        let mut negative = None;
        for (row, &t) in table.iter().zip(grid) {
            let variance = self.variance(t)?;
            let captured: f64 = row.iter().map(|c| c * c).sum();
            let defect = variance - captured;
            if defect < -1e-8 && negative.is_none() {
                negative = Some(Error::NegativeDefect { t, defect });
            }
            defects.push(DefectRow {
                t,
                variance,
                captured,
                defect,
            });
        }
        let pass = negative.is_none() && max_abs_error < tolerance;
        Ok(CovReport {
            model: self.to_string(),
            order: self.order(),
            tolerance,
            max_abs_error,
            worst_pair,
            defects,
            quadrature_error,
            quadrature_tolerance: self.knobs.abs_tol,
            failure: negative.map(|e| e.to_string()),
            pass,
        })
    }

    /// Checks `c_k(b) − c_k(a) = ∫_a^b c'_k` coefficientwise.
    pub fn assumption_check(&self, a: f64, b: f64) -> Result<AssumptionReport> {
        if !(a < b) {
            return Err(Error::param("interval", format!("[{a}, {b}] is empty")));
        }
        let base = gauss_legendre::<f64>(self.knobs.panel_nodes);
        // the vgamma derivative blows up at 0⁺, so grade toward the left end
        let rule = if a == 0.0 {
            composite_graded(a, b, Endpoint::Left, self.knobs.graded_ratio, 30, &base)
        } else {
            composite_uniform(a, b, 8, &base)
        };
        let rows: Vec<Vec<f64>> = rule.nodes.par_iter().map(|&t| self.coeffs_deriv(t)).collect::<Result<_>>()?;
        let k = self.order();
        let mut integral = vec![0.0; k];
        for (row, w) in rows.iter().zip(&rule.weights) {
            for i in 0..k {
                integral[i] += w * row[i];
            }
        }
        let (ca, cb) = (self.coeffs(a)?, self.coeffs(b)?);
        let mut max_rel_error = 0.0;
        let mut worst_k = 0;
        for i in 0..k {
            let diff = cb[i] - ca[i];
            let rel = (diff - integral[i]).abs() / diff.abs().max(1e-6);
            if rel > max_rel_error {
                max_rel_error = rel;
                worst_k = i;
            }
        }
        Ok(AssumptionReport {
            a,
            b,
            max_rel_error,
            worst_k,
        })
    }
}

impl fmt::Display for ProcessModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Bm => write!(f, "bm"),
            Family::Bridge => write!(f, "bridge"),
            Family::Fbm { hurst } => write!(f, "fbm(H={hurst})"),
            Family::Mbm { h } => write!(f, "mbm({h:?})"),
            Family::VGamma { kernel } => write!(f, "vgamma(γ={})", kernel.profile().label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectRow {
    pub t: f64,
    pub variance: f64,
    pub captured: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovReport {
    pub model: String,
    pub order: usize,
    pub tolerance: f64,
    pub max_abs_error: f64,
    pub worst_pair: (f64, f64),
    pub defects: Vec<DefectRow>,
    /// Largest coefficient change under quadrature refinement.
    pub quadrature_error: f64,
    pub quadrature_tolerance: f64,
    pub failure: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a: f64,
    pub b: f64,
    pub max_rel_error: f64,
    pub worst_k: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let bridge = ProcessModel::bridge(8).unwrap();
        assert!((bridge.variance(0.5).unwrap() - 0.25).abs() < 1e-15);
        let bm = ProcessModel::bm(8).unwrap();
        assert_eq!(bm.covariance(1.0, 2.0).unwrap(), 1.0);
        let f = ProcessModel::fbm(0.3, 8).unwrap();
        assert!((f.covariance(1.0, 2.0).unwrap() - 2f64.powf(0.6) / 2.0).abs() < 1e-14);
        assert_eq!(f.variance(1.0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ProcessModel::fbm(1.2, 8).is_err());
        assert!(ProcessModel::fbm(0.0, 8).is_err());
        let bad = HurstFunction::Linear { start: 0.5, slope: 1.0 };
        assert!(ProcessModel::mbm(bad, Domain::new(0.0, 1.0).unwrap(), 8).is_err());
        let bm = ProcessModel::bm(8).unwrap();
        assert!(matches!(bm.coeffs(-1.0), Err(Error::OutOfDomain { .. })));
        assert!(bm.coeff(0.5, 8).is_err());
        let vg = ProcessModel::vgamma(VGammaKernel::power_law(0.75), 8).unwrap();
        assert!(matches!(vg.coeffs_deriv(0.0), Err(Error::NotDifferentiable { .. })));
    }

    #[test]
    fn constant_hurst_mbm_matches_fbm_covariance() {
        let h = HurstFunction::Constant { value: 0.35 };
        let m = ProcessModel::mbm(h, Domain::new(0.0, 3.0).unwrap(), 8).unwrap();
        let f = ProcessModel::fbm(0.35, 8).unwrap();
        for &(t, s) in &[(0.2, 1.0), (1.5, 2.5), (2.0, 2.0)] {
            assert!((m.covariance(t, s).unwrap() - f.covariance(t, s).unwrap()).abs() < 1e-14);
        }
    }
}
