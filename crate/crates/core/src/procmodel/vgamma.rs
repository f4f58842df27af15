//! Volterra kernels `ε = √((γ²)')` and the `V_γ` coefficient routines.

use std::fmt::Debug;
use std::sync::Arc;

use crate::hermite::{hermite_functions, hermite_jet, hermite_jet_into};
use crate::quad::{composite_graded, gauss_legendre, Endpoint, FixedRule};

use super::ModelKnobs;

/// Variance profile `γ²` of a `V_γ` process and the derived maps
/// `ε = √((γ²)')`, `E(x) = ∫_0^x ε`, `ℰ(x) = ∫_0^x E`.
///
/// The defaults for `big_e` and `cal_e` integrate `ε` numerically; closed
/// forms should override them.
pub trait VolterraProfile: Debug + Send + Sync {
    fn gamma_sq(&self, r: f64) -> f64;

    /// `(γ²)'(r)` for `r > 0`.
    fn gamma_sq_deriv(&self, r: f64) -> f64;

    fn label(&self) -> String;

    fn eps(&self, r: f64) -> f64 {
        self.gamma_sq_deriv(r).max(0.0).sqrt()
    }

    fn big_e(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        profile_rule(x).integrate(|u| self.eps(u))
    }

    /// `ℰ(x) = ∫_0^x (x − u) ε(u) du`.
    fn cal_e(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        profile_rule(x).integrate(|u| (x - u) * self.eps(u))
    }
}

fn profile_rule(x: f64) -> FixedRule<f64> {
    composite_graded(0.0, x, Endpoint::Left, 0.3, 60, &gauss_legendre(16))
}

/// `γ(r) = r^H`: `ε(r) = √(2H) r^{H−1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub hurst: f64,
}

impl VolterraProfile for PowerLaw {
    fn gamma_sq(&self, r: f64) -> f64 {
        r.max(0.0).powf(2.0 * self.hurst)
    }

    fn gamma_sq_deriv(&self, r: f64) -> f64 {
        2.0 * self.hurst * r.powf(2.0 * self.hurst - 1.0)
    }

    fn label(&self) -> String {
        format!("r^{}", self.hurst)
    }

    fn eps(&self, r: f64) -> f64 {
        (2.0 * self.hurst).sqrt() * r.powf(self.hurst - 0.5)
    }

    fn big_e(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let a = self.hurst + 0.5;
        (2.0 * self.hurst).sqrt() * x.powf(a) / a
    }

    fn cal_e(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let a = self.hurst + 0.5;
        (2.0 * self.hurst).sqrt() * x.powf(a + 1.0) / (a * (a + 1.0))
    }
}

/// Shared handle to a profile.
#[derive(Debug, Clone)]
pub struct VGammaKernel(pub Arc<dyn VolterraProfile>);

impl VGammaKernel {
    pub fn power_law(hurst: f64) -> Self {
        Self(Arc::new(PowerLaw { hurst }))
    }

    pub fn profile(&self) -> &dyn VolterraProfile {
        self.0.as_ref()
    }
}

impl PartialEq for VGammaKernel {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.label() == other.0.label()
    }
}

/// Rule in the lag variable `r = t − u ∈ [0, t]`, graded toward `r = 0`.
fn rule(t: f64, knobs: &ModelKnobs, refine: bool) -> FixedRule<f64> {
    let base = gauss_legendre::<f64>(knobs.panel_nodes + if refine { 8 } else { 0 });
    let levels = knobs.graded_levels + if refine { 20 } else { 0 };
    composite_graded(0.0, t, Endpoint::Left, knobs.graded_ratio, levels, &base)
}

/// `⟨1_{[0,t)} ε(t − ·), e_k⟩`.
pub(crate) fn coeffs(kernel: &dyn VolterraProfile, t: f64, order: usize, knobs: &ModelKnobs, refine: bool) -> Vec<f64> {
    if t <= 0.0 {
        return vec![0.0; order];
    }
    rule(t, knobs, refine).integrate_vec(order, |r, out| {
        hermite_functions(t - r, out);
        let w = kernel.eps(r);
        out.iter_mut().for_each(|v| *v *= w);
    })
}

/// `⟨Φ'(t), e_k⟩` from the decomposition `Φ'(t) = F_t − (G_t)' + (H_t)''`:
///
/// ```text
/// (1/t) ∫_0^t e_k(u) ε(t−u) du
///   + (1/t) ∫_0^t e_k'(u) (u ε(t−u) − E(t−u)) du
///   + (1/t) ∫_0^t e_k''(u) ((t−u) E(t−u) − ℰ(t−u)) du
///   + e_k(0) (ε(t) − E(t)/t) + e_k'(0) (E(t) − ℰ(t)/t)
/// ```
pub(crate) fn coeffs_deriv(kernel: &dyn VolterraProfile, t: f64, order: usize, knobs: &ModelKnobs, refine: bool) -> Vec<f64> {
    let rule = rule(t, knobs, refine);
    let mut scratch = vec![0.0; order + 2];
    let mut d0 = vec![0.0; order];
    let mut d1 = vec![0.0; order];
    let mut d2 = vec![0.0; order];
    let mut out = vec![0.0; order];
    for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
        let u = t - r;
        let eps = kernel.eps(r);
        let big_e = kernel.big_e(r);
        let cal_e = kernel.cal_e(r);
        let w0 = w * eps / t;
        let w1 = w * (u * eps - big_e) / t;
        let w2 = w * (r * big_e - cal_e) / t;
        hermite_jet_into(u, &mut scratch, &mut d0, &mut d1, &mut d2);
        for k in 0..order {
            out[k] += w0 * d0[k] + w1 * d1[k] + w2 * d2[k];
        }
    }
    let at_zero = hermite_jet(0.0, order);
    let big_e = kernel.big_e(t);
    let b0 = kernel.eps(t) - big_e / t;
    let b1 = big_e - kernel.cal_e(t) / t;
    for k in 0..order {
        out[k] += at_zero.value[k] * b0 + at_zero.d1[k] * b1;
    }
    out
}

/// `∫_0^{min(t,s)} ε(t−u) ε(s−u) du`.
pub(crate) fn covariance(kernel: &dyn VolterraProfile, t: f64, s: f64, knobs: &ModelKnobs) -> f64 {
    let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
    if lo <= 0.0 {
        return 0.0;
    }
    if lo == hi {
        return kernel.gamma_sq(lo);
    }
    rule(lo, knobs, false).integrate(|r| kernel.eps(hi - lo + r) * kernel.eps(r))
}

/// `E[(G_{s+u} − G_s)²] = γ²(u) + ∫_0^s (ε(r + u) − ε(r))² dr`.
pub(crate) fn increment_variance(kernel: &dyn VolterraProfile, s: f64, u: f64, knobs: &ModelKnobs) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let head = kernel.gamma_sq(u);
    if s <= 0.0 {
        return head;
    }
    head + rule(s, knobs, false).integrate(|r| (kernel.eps(r + u) - kernel.eps(r)).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `γ²(r) = ln(1 + r)`: `ε = (1+r)^{-1/2}`, `E = 2(√(1+x) − 1)`,
    /// `ℰ = (4/3)((1+x)^{3/2} − 1) − 2x`.
    #[derive(Debug)]
    struct LogProfile;

    impl VolterraProfile for LogProfile {
        fn gamma_sq(&self, r: f64) -> f64 {
            r.ln_1p()
        }
        fn gamma_sq_deriv(&self, r: f64) -> f64 {
            1.0 / (1.0 + r)
        }
        fn label(&self) -> String {
            "ln(1+r)".into()
        }
    }

    #[test]
    fn numeric_profile_maps_match_closed_forms() {
        let p = LogProfile;
        for &x in &[0.1f64, 0.5, 2.0] {
            let e = 2.0 * ((1.0 + x).sqrt() - 1.0);
            let ce = 4.0 / 3.0 * ((1.0 + x).powf(1.5) - 1.0) - 2.0 * x;
            assert!((p.big_e(x) - e).abs() < 1e-13);
            assert!((p.cal_e(x) - ce).abs() < 1e-13);
        }
    }

    #[test]
    fn power_law_maps_match_numeric_defaults() {
        #[derive(Debug)]
        struct Numeric(PowerLaw);
        impl VolterraProfile for Numeric {
            fn gamma_sq(&self, r: f64) -> f64 {
                self.0.gamma_sq(r)
            }
            fn gamma_sq_deriv(&self, r: f64) -> f64 {
                self.0.gamma_sq_deriv(r)
            }
            fn label(&self) -> String {
                "numeric".into()
            }
        }
        for &h in &[0.3, 0.75] {
            let exact = PowerLaw { hurst: h };
            let num = Numeric(exact);
            for &x in &[0.2, 1.0, 1.7] {
                assert!((exact.big_e(x) - num.big_e(x)).abs() < 1e-12);
                assert!((exact.cal_e(x) - num.cal_e(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn aux_maps_nonnegative_nondecreasing() {
        let k = PowerLaw { hurst: 0.75 };
        assert_eq!(k.big_e(0.0), 0.0);
        assert_eq!(k.cal_e(0.0), 0.0);
        let mut prev = (0.0, 0.0);
        for i in 1..200 {
            let x = i as f64 * 0.01;
            let cur = (k.big_e(x), k.cal_e(x));
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1 && cur.0 >= 0.0);
            prev = cur;
        }
    }
}
