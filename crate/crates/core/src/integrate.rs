//! Wiener integrals through the derivative coefficients, Wick–Riemann sums
//! on path ensembles, and the Wick-exponential linear SDE.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{wick_exp_sample, ChaosVector};
use crate::error::{Error, Result};
use crate::hermite::CoeffSeq;
use crate::procmodel::{Family, ProcessModel};
use crate::quad::{composite_graded, gauss_legendre, integrate_adaptive, integrate_vec_adaptive, AdaptiveOptions, Endpoint};
use crate::simulate::{gaussian_draws, PathEnsemble};
use crate::stats::MomentEstimate;

pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Growth certificate `|φ(t, x)| ≤ C e^{λ x²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthTag {
    pub constant: f64,
    pub lambda: f64,
}

/// An integrand `φ(t, G_t)` together with `∂_x φ`, which the Wick
/// compensator needs.
#[derive(Clone)]
pub struct IntegrandSpec {
    pub name: String,
    pub phi: Fn2,
    pub phi_x: Fn2,
    pub growth: GrowthTag,
}

impl fmt::Debug for IntegrandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntegrandSpec({}, {:?})", self.name, self.growth)
    }
}

impl IntegrandSpec {
    pub fn new(
        name: impl Into<String>,
        phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        phi_x: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        growth: GrowthTag,
    ) -> Self {
        Self {
            name: name.into(),
            phi: Arc::new(phi),
            phi_x: Arc::new(phi_x),
            growth,
        }
    }

    /// `φ(t, x) = x^n`.
    pub fn power(n: i32) -> Self {
        let nf = n as f64;
        Self::new(
            format!("x^{n}"),
            move |_, x| x.powi(n),
            move |_, x| if n == 0 { 0.0 } else { nf * x.powi(n - 1) },
            polynomial_growth(n),
        )
    }

    /// `φ(t, x) = g(t)`, deterministic.
    pub fn deterministic(name: impl Into<String>, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(
            name,
            move |t, _| g(t),
            |_, _| 0.0,
            GrowthTag {
                constant: f64::INFINITY,
                lambda: 0.0,
            },
        )
    }

    /// `a φ + b ψ`.
    pub fn combine(a: f64, phi: &Self, b: f64, psi: &Self) -> Self {
        let (p1, p2, d1, d2) = (phi.phi.clone(), psi.phi.clone(), phi.phi_x.clone(), psi.phi_x.clone());
        Self {
            name: format!("{a}·{} + {b}·{}", phi.name, psi.name),
            phi: Arc::new(move |t, x| a * p1(t, x) + b * p2(t, x)),
            phi_x: Arc::new(move |t, x| a * d1(t, x) + b * d2(t, x)),
            growth: GrowthTag {
                constant: a.abs() * phi.growth.constant + b.abs() * psi.growth.constant,
                lambda: phi.growth.lambda.max(psi.growth.lambda),
            },
        }
    }
}

/// `|x|^n ≤ (n/(2eλ))^{n/2} e^{λx²}` with `λ = 0.05`.
pub fn polynomial_growth(n: i32) -> GrowthTag {
    let lambda = 0.05;
    let nf = n.max(0) as f64;
    let constant = if n <= 0 {
        1.0
    } else {
        (nf / (2.0 * std::f64::consts::E * lambda)).powf(nf / 2.0)
    };
    GrowthTag { constant, lambda }
}

/// Outcome of checking a growth certificate on sampled values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub lambda: f64,
    /// `(4 max R)^{-1}` over the sampled grid.
    pub limit: f64,
    pub constant: f64,
    /// `max |φ(t, x)| e^{−λx²}` over the samples.
    pub observed: f64,
    pub holds: bool,
}

/// Checks `|φ(t_i, G_{t_i})| ≤ C e^{λ G²}` on every sample and `λ < (4 max R)^{-1}`.
pub fn check_growth(phi: &(dyn Fn(f64, f64) -> f64 + Sync), growth: GrowthTag, ens: &PathEnsemble) -> GrowthCheck {
    let max_r = (0..ens.grid.len()).map(|i| ens.variance(i)).fold(0.0, f64::max);
    let limit = if max_r > 0.0 { 1.0 / (4.0 * max_r) } else { f64::INFINITY };
    let observed = ens
        .paths
        .par_iter()
        .map(|p| {
            ens.grid
                .iter()
                .zip(p)
                .map(|(&t, &x)| phi(t, x).abs() * (-growth.lambda * x * x).exp())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    GrowthCheck {
        lambda: growth.lambda,
        limit,
        constant: growth.constant,
        observed,
        holds: growth.lambda < limit && observed <= growth.constant,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerIntegral {
    pub chaos: ChaosVector<f64>,
    pub abs_error: f64,
}

impl WienerIntegral {
    pub fn variance(&self) -> f64 {
        self.chaos.variance()
    }
}

/// `∫_a^b f(s) dG_s` as the first-chaos vector with `a_k = ∫_a^b f(s) c'_k(s) ds`.
pub fn wiener_integral(
    model: &ProcessModel,
    f: &(dyn Fn(f64) -> f64 + Sync),
    a: f64,
    b: f64,
    opts: &AdaptiveOptions,
) -> Result<WienerIntegral> {
    if !(a < b) {
        return Err(Error::param("interval", format!("[{a}, {b}] is empty")));
    }
    let k = model.order();
    let mut failure = None;
    let mut integrand = |s: f64, out: &mut [f64]| match model.coeffs_deriv(s) {
        Ok(c) => {
            let fs = f(s);
            out.iter_mut().zip(c).for_each(|(o, v)| *o = fs * v);
        }
        Err(e) => {
            failure.get_or_insert(e);
            out.iter_mut().for_each(|o| *o = 0.0);
        }
    };
    let (values, abs_error) = if matches!(model.family(), Family::VGamma { .. }) {
        // c'_k(s) carries the kernel singularity at s = 0⁺: a graded rule
        // toward the left end, checked against a refined one.
        let base = gauss_legendre::<f64>(16);
        let levels = if a == 0.0 { 30 } else { 0 };
        let coarse = composite_graded(a, b, Endpoint::Left, 0.3, levels, &base);
        let fine = composite_graded(a, b, Endpoint::Left, 0.3, levels + 10, &gauss_legendre::<f64>(24));
        let v1 = coarse.integrate_vec(k, &mut integrand);
        let v2 = fine.integrate_vec(k, &mut integrand);
        let err = v1.iter().zip(&v2).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if err > opts.abs_tol.max(opts.rel_tol * v2.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            let worst = v1
                .iter()
                .zip(&v2)
                .enumerate()
                .max_by(|x, y| (x.1 .0 - x.1 .1).abs().total_cmp(&(y.1 .0 - y.1 .1).abs()))
                .map(|(i, _)| i);
            return Err(Error::Quadrature {
                index: worst,
                achieved: err,
                requested: opts.abs_tol,
            });
        }
        (v2, err)
    } else {
        let r = integrate_vec_adaptive(&mut integrand, a, b, k, opts)?;
        (r.values, r.abs_error)
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(WienerIntegral {
        chaos: ChaosVector::pairing(CoeffSeq(values)),
        abs_error,
    })
}

/// `∫ 1_{[a,b]} dG = G_b − G_a`, coefficients `c_k(b) − c_k(a)`.
pub fn wiener_indicator(model: &ProcessModel, a: f64, b: f64) -> Result<ChaosVector<f64>> {
    let (ca, cb) = (model.coeffs(a)?, model.coeffs(b)?);
    Ok(ChaosVector::pairing(CoeffSeq(
        cb.iter().zip(&ca).map(|(x, y)| x - y).collect(),
    )))
}

fn per_path(ens: &PathEnsemble, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
    ens.paths.par_iter().map(|p| f(p)).collect()
}

/// `Σ_i φ(t_i, G_i)(G_{i+1} − G_i)` per path.
pub fn forward_riemann(ens: &PathEnsemble, spec: &IntegrandSpec) -> Vec<f64> {
    let grid = &ens.grid;
    per_path(ens, |p| {
        (0..grid.len() - 1)
            .map(|i| (spec.phi)(grid[i], p[i]) * (p[i + 1] - p[i]))
            .sum()
    })
}

/// `Σ_i φ_x(t_i, G_i)(cov(t_i, t_{i+1}) − var(t_i))` per path: the amount by
/// which the forward sum exceeds the Wick sum.
pub fn wick_correction(ens: &PathEnsemble, spec: &IntegrandSpec) -> Vec<f64> {
    let comp = ens.compensator_increments();
    let grid = &ens.grid;
    per_path(ens, |p| {
        comp.iter().enumerate().map(|(i, c)| (spec.phi_x)(grid[i], p[i]) * c).sum()
    })
}

/// Wick–Riemann sum `Σ_i [φ(t_i, G_i) ΔG_i − φ_x(t_i, G_i)(cov(t_i, t_{i+1}) − var(t_i))]`.
pub fn wick_riemann(ens: &PathEnsemble, spec: &IntegrandSpec) -> Vec<f64> {
    let comp = ens.compensator_increments();
    let grid = &ens.grid;
    per_path(ens, |p| {
        (0..grid.len() - 1)
            .map(|i| (spec.phi)(grid[i], p[i]) * (p[i + 1] - p[i]) - (spec.phi_x)(grid[i], p[i]) * comp[i])
            .sum()
    })
}

/// `Σ_i (R(t_i, t_{i+1}) − R(t_i))` from the model covariance.
pub fn compensator_sum(model: &ProcessModel, times: &[f64]) -> Result<f64> {
    let terms: Vec<f64> = times
        .par_windows(2)
        .map(|w| Ok(model.covariance(w[0], w[1])? - model.variance(w[0])?))
        .collect::<Result<_>>()?;
    let mut acc = crate::quad::KahanAcc::default();
    terms.into_iter().for_each(|t| acc.add(t));
    Ok(acc.value())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeReport {
    pub horizon: f64,
    pub x0: f64,
    pub drift_integral: f64,
    /// `Σ m_k²`, the variance of `∫ β d⋄G`.
    pub noise_variance: f64,
    pub paths: usize,
    pub mean: MomentEstimate,
    pub second_moment: MomentEstimate,
    pub pass: bool,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Samples `Z_T = x0 · exp⋄(∫_0^T α ds + ∫_0^T β d⋄G)`.
#[allow(clippy::too_many_arguments)]
pub fn sde_wick_exp(
    model: &ProcessModel,
    alpha: &(dyn Fn(f64) -> f64 + Sync),
    beta: &(dyn Fn(f64) -> f64 + Sync),
    horizon: f64,
    x0: f64,
    paths: usize,
    seed: u64,
    opts: &AdaptiveOptions,
) -> Result<SdeReport> {
    if paths < 2 {
        return Err(Error::param("paths", "at least two paths are needed for moment estimates"));
    }
    let drift = integrate_adaptive(alpha, 0.0, horizon, opts)?.value;
    let m = wiener_integral(model, beta, 0.0, horizon, opts)?.chaos.first_chaos.0;
    let noise_variance: f64 = m.iter().map(|v| v * v).sum();
    let k = m.len();
    let samples: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|i| x0 * wick_exp_sample(drift, &m, &gaussian_draws(seed, i, k)))
        .collect();
    let mean = MomentEstimate::of_mean(&samples, x0 * drift.exp());
    let squares: Vec<f64> = samples.iter().map(|z| z * z).collect();
    let second_moment = MomentEstimate::of_mean(&squares, x0 * x0 * (2.0 * drift + noise_variance).exp());
    let pass = mean.within(3.0) && second_moment.within(3.0);
    Ok(SdeReport {
        horizon,
        x0,
        drift_integral: drift,
        noise_variance,
        paths,
        mean,
        second_moment,
        pass,
        samples,
    })
}
