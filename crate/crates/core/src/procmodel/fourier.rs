//! Hermite coefficients of `M_H 1_{[0,t]}` computed in the Fourier domain.
//!
//! With the unitary transform `û(y) = (2π)^{-1/2} ∫ u(x) e^{-ixy} dx` the
//! Hermite functions satisfy `ê_k = (−i)^k e_k`, and Plancherel gives
//!
//! ```text
//! ⟨M_H 1_{[0,t]}, e_k⟩ = c_H^{-1} ∫ |y|^{1/2−H} (1 − e^{−ity}) / (iy) · i^k e_k(y) dy.
//! ```
//!
//! Parity of `e_k` folds this onto `(0, ∞)`:
//!
//! * even `k`: `2 (−1)^{k/2} c_H^{-1} ∫_0^∞ y^{−1/2−H} sin(ty) e_k(y) dy`
//! * odd `k`:  `−2 (−1)^{(k+1)/2} c_H^{-1} ∫_0^∞ y^{−1/2−H} (1 − cos ty) e_k(y) dy`
//!
//! and the `t`-derivative replaces `sin(ty)` by `y cos(ty)` and `1 − cos(ty)`
//! by `y sin(ty)`. The `y = 0` power singularity is handled by a graded rule
//! on `[0, 1]`; `[1, Y]` uses uniform panels fine enough to resolve both
//! `e_{K−1}` and `sin(ty)`, with `Y` past the last turning point.

use crate::hermite::hermite_functions;
use crate::quad::{composite_graded, composite_uniform, gauss_legendre, Endpoint, FixedRule};

use super::ModelKnobs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Part {
    Value,
    Deriv,
}

/// `c_x = (2π / (Γ(2x+1) sin(πx)))^{1/2}`.
pub fn fbm_constant(x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    (2.0 * pi / (libm::tgamma(2.0 * x + 1.0) * (pi * x).sin())).sqrt()
}

fn rule(order: usize, t: f64, knobs: &ModelKnobs, refine: bool) -> FixedRule<f64> {
    let base = gauss_legendre::<f64>(knobs.panel_nodes + if refine { 8 } else { 0 });
    let levels = knobs.graded_levels + if refine { 20 } else { 0 };
    let mut r = composite_graded(0.0, 1.0, Endpoint::Left, knobs.graded_ratio, levels, &base);
    let turning = (2.0 * order as f64 + 1.0).sqrt();
    let upper = turning + knobs.fourier_tail;
    let wavenumber = turning + t.abs();
    let mut h = knobs.fourier_panel_phase / wavenumber;
    if refine {
        h /= 2.0;
    }
    let panels = ((upper - 1.0) / h).ceil() as usize;
    let outer = composite_uniform(1.0, upper, panels, &base);
    r.nodes.extend(outer.nodes);
    r.weights.extend(outer.weights);
    r
}

/// Coefficients `⟨M_H 1_{[0,t]}, e_k⟩` (or their `t`-derivatives), `k < order`.
pub(crate) fn coeffs(hurst: f64, t: f64, order: usize, knobs: &ModelKnobs, part: Part, refine: bool) -> Vec<f64> {
    let mut out = vec![0.0; order];
    if part == Part::Value && t == 0.0 {
        return out;
    }
    let rule = rule(order, t, knobs, refine);
    let mut even = vec![0.0; order];
    let mut odd = vec![0.0; order];
    let mut e = vec![0.0; order];
    for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
        hermite_functions(y, &mut e);
        let (fe, fo) = match part {
            Part::Value => {
                let p = y.powf(-0.5 - hurst);
                let s = (0.5 * t * y).sin();
                (p * (t * y).sin(), p * 2.0 * s * s)
            }
            Part::Deriv => {
                let p = y.powf(0.5 - hurst);
                (p * (t * y).cos(), p * (t * y).sin())
            }
        };
        let (we, wo) = (w * fe, w * fo);
        for k in (0..order).step_by(2) {
            even[k] += we * e[k];
        }
        for k in (1..order).step_by(2) {
            odd[k] += wo * e[k];
        }
    }
    let c = fbm_constant(hurst);
    for (k, o) in out.iter_mut().enumerate() {
        *o = if k % 2 == 0 {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            2.0 * sign * even[k] / c
        } else {
            let sign = if k.div_ceil(2) % 2 == 0 { 1.0 } else { -1.0 };
            -2.0 * sign * odd[k] / c
        };
    }
    out
}
