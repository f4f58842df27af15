//! Hermite functions, projections onto the truncated basis, and the weighted
//! norms `|f|_p² = Σ (2k+2)^{2p} ⟨f, e_k⟩²`.
//!
//! `e_k(x) = (2^k k! √π)^{-1/2} H_k(x) e^{-x²/2}` is evaluated with the
//! normalised three-term recurrence
//!
//! ```text
//! e_{k+1}(x) = √(2/(k+1)) x e_k(x) − √(k/(k+1)) e_{k−1}(x),   e_0(x) = π^{-1/4} e^{-x²/2}
//! ```
//!
//! carried without the Gaussian factor and rescaled when it grows, so large
//! `|x|` does not underflow the seed. Derivatives use the ladder relation
//! `e_k' = √(k/2) e_{k−1} − √((k+1)/2) e_{k+1}`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, AdaptiveOptions, FixedRule};
use crate::scalar::Scalar;

/// Fills `out[k] = e_k(x)` for `k < out.len()`.
pub fn hermite_functions<T: Scalar>(x: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    let big = T::max_value().powf(T::lit(0.25));
    let ln_big = big.ln();
    let half_x2 = x * x / T::lit(2.0);
    let mut log_scale = T::zero();
    let mut factor = (-half_x2).exp();
    let mut prev = T::zero();
    let mut cur = T::PI().powf(T::lit(-0.25));
    out[0] = cur * factor;
    let sqrt2 = T::lit(2.0).sqrt();
    for k in 0..out.len() - 1 {
        let kf = T::from_usize_lossy(k);
        let kp1 = kf + T::one();
        let next = sqrt2 / kp1.sqrt() * x * cur - (kf / kp1).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > big {
            cur = cur / big;
            prev = prev / big;
            log_scale = log_scale + ln_big;
            factor = (log_scale - half_x2).exp();
        }
        out[k + 1] = cur * factor;
    }
}

/// Fills `out[k] = p_k(x) = e_k(x) e^{x²/2}`, the orthonormal Hermite
/// polynomials for the weight `e^{-x²}`. Only for moderate `|x|`.
pub fn hermite_polynomials<T: Scalar>(x: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    let mut prev = T::zero();
    let mut cur = T::PI().powf(T::lit(-0.25));
    out[0] = cur;
    let sqrt2 = T::lit(2.0).sqrt();
    for k in 0..out.len() - 1 {
        let kf = T::from_usize_lossy(k);
        let kp1 = kf + T::one();
        let next = sqrt2 / kp1.sqrt() * x * cur - (kf / kp1).sqrt() * prev;
        prev = cur;
        cur = next;
        out[k + 1] = cur;
    }
}

/// Values and first two derivatives of `e_0 .. e_{n-1}` at `x`.
#[derive(Debug, Clone)]
pub struct HermiteJet<T> {
    pub value: Vec<T>,
    pub d1: Vec<T>,
    pub d2: Vec<T>,
}

/// Fills value, first and second derivatives for `k < n` using the ladder
/// relation twice. `scratch` must have length `n + 2`.
pub fn hermite_jet_into<T: Scalar>(x: T, scratch: &mut [T], d0: &mut [T], d1: &mut [T], d2: &mut [T]) {
    let n = d0.len();
    debug_assert_eq!(scratch.len(), n + 2);
    hermite_functions(x, scratch);
    d0.copy_from_slice(&scratch[..n]);
    let half = T::lit(0.5);
    // first derivative for k <= n
    let first = |k: usize, e: &[T]| -> T {
        let kf = T::from_usize_lossy(k);
        let up = (half * (kf + T::one())).sqrt() * e[k + 1];
        if k == 0 {
            -up
        } else {
            (half * kf).sqrt() * e[k - 1] - up
        }
    };
    for k in 0..n {
        d1[k] = first(k, scratch);
    }
    for k in 0..n {
        let kf = T::from_usize_lossy(k);
        let up = (half * (kf + T::one())).sqrt() * first(k + 1, scratch);
        d2[k] = if k == 0 { -up } else { (half * kf).sqrt() * d1[k - 1] - up };
    }
}

/// Value, first, and second derivatives of `e_0 .. e_{n-1}` at `x`.
pub fn hermite_jet<T: Scalar>(x: T, n: usize) -> HermiteJet<T> {
    let mut scratch = vec![T::zero(); n + 2];
    let mut jet = HermiteJet {
        value: vec![T::zero(); n],
        d1: vec![T::zero(); n],
        d2: vec![T::zero(); n],
    };
    hermite_jet_into(x, &mut scratch, &mut jet.value, &mut jet.d1, &mut jet.d2);
    jet
}

/// `e_k^{(deriv)}(x)` for `deriv ∈ {0, 1, 2}`.
pub fn eval_hermite<T: Scalar>(k: usize, x: T, deriv: u8) -> T {
    assert!(deriv <= 2, "derivative order must be 0, 1 or 2");
    let jet = hermite_jet(x, k + 1);
    match deriv {
        0 => jet.value[k],
        1 => jet.d1[k],
        _ => jet.d2[k],
    }
}

/// `∫_0^x e_k(u) du` for all `k < out.len()`, exactly (no quadrature), from the
/// integrated ladder relation
/// `I_{k+1} = (√(k/2) I_{k−1} − e_k(x) + e_k(0)) / √((k+1)/2)`.
/// The recurrence contracts errors, so it is usable for very large `k`.
pub fn hermite_antiderivatives(x: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    let mut ex = vec![0.0; n];
    let mut e0 = vec![0.0; n];
    hermite_functions(x, &mut ex);
    hermite_functions(0.0, &mut e0);
    let pi_q = std::f64::consts::PI.powf(-0.25);
    out[0] = pi_q * (std::f64::consts::PI / 2.0).sqrt() * libm::erf(x / std::f64::consts::SQRT_2);
    if n > 1 {
        out[1] = std::f64::consts::SQRT_2 * pi_q * (-(-x * x / 2.0).exp_m1());
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = ((kf / 2.0).sqrt() * out[k - 1] - ex[k] + e0[k]) / ((kf + 1.0) / 2.0).sqrt();
    }
}

/// Finite coefficient sequence `(⟨f, e_k⟩)_{k<K}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffSeq<T>(pub Vec<T>);

impl<T: Scalar> CoeffSeq<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(order: usize) -> Self {
        Self(vec![T::zero(); order])
    }

    pub fn ones(order: usize) -> Self {
        Self(vec![T::one(); order])
    }

    /// Unit vector at index `k` of length `order`.
    pub fn unit(k: usize, order: usize) -> Self {
        let mut v = vec![T::zero(); order];
        v[k] = T::one();
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn dot(&self, other: &[T]) -> T {
        self.0.iter().zip(other).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> T {
        self.0.iter().map(|&a| a * a).sum()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self(self.0.iter().map(|&a| a * s).collect())
    }

    /// Writes the golden-table CSV (`k,value`).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["k", "value"])?;
        for (k, v) in self.0.iter().enumerate() {
            wtr.write_record([k.to_string(), format!("{v}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut out = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let k: usize = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Io(format!("bad k in row {row}")))?;
            if k != row {
                return Err(Error::Io(format!("expected k = {row}, found {k}")));
            }
            let v: f64 = rec
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Io(format!("bad value in row {row}")))?;
            out.push(T::lit(v));
        }
        Ok(Self(out))
    }
}

impl<T> std::ops::Index<usize> for CoeffSeq<T> {
    type Output = T;
    fn index(&self, k: usize) -> &T {
        &self.0[k]
    }
}

/// Rule used by [`project`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum QuadratureSpec {
    /// Whole-line Gauss–Hermite with `nodes` points; refined with `2 * nodes`.
    GaussHermite { nodes: usize },
    /// Adaptive Gauss–Kronrod on the support `[lo, hi]`.
    Interval { lo: f64, hi: f64, abs_tol: f64 },
}

/// Truncated orthonormal Hermite system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteBasis<T> {
    order: usize,
    quadrature: QuadratureSpec,
    #[serde(skip)]
    _scalar: std::marker::PhantomData<T>,
}

pub const DEFAULT_ORDER: usize = 64;

impl<T: Scalar> HermiteBasis<T> {
    pub fn new(order: usize) -> Result<Self> {
        Self::with_quadrature(
            order,
            QuadratureSpec::GaussHermite {
                nodes: order.max(1) + 32,
            },
        )
    }

    pub fn with_quadrature(order: usize, quadrature: QuadratureSpec) -> Result<Self> {
        if order == 0 {
            return Err(Error::param("order", "the basis needs at least one function"));
        }
        Ok(Self {
            order,
            quadrature,
            _scalar: std::marker::PhantomData,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        self.quadrature
    }

    /// All basis functions at `x`.
    pub fn eval_all(&self, x: T) -> Vec<T> {
        let mut v = vec![T::zero(); self.order];
        hermite_functions(x, &mut v);
        v
    }
}

impl<T: Scalar> Default for HermiteBasis<T> {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER).expect("default order is positive")
    }
}

/// Projects `f` onto the basis. Whole-line rules are checked against a
/// refined rule; interval rules against the adaptive error estimate.
pub fn project<T: Scalar, F: Fn(T) -> T>(f: F, basis: &HermiteBasis<T>, tol: T) -> Result<CoeffSeq<T>> {
    let k = basis.order();
    match basis.quadrature() {
        QuadratureSpec::GaussHermite { nodes } => {
            let run = |n: usize| -> Vec<T> {
                let rule: FixedRule<T> = quad::gauss_hermite(n);
                rule.integrate_vec(k, |x, out| {
                    hermite_functions(x, out);
                    let fx = f(x);
                    out.iter_mut().for_each(|v| *v = *v * fx);
                })
            };
            let coarse = run(nodes);
            let fine = run(2 * nodes);
            let diff = coarse.iter().zip(&fine).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
            if diff > tol {
                return Err(Error::Quadrature {
                    index: None,
                    achieved: diff.to_f64().unwrap_or(f64::NAN),
                    requested: tol.to_f64().unwrap_or(f64::NAN),
                });
            }
            Ok(CoeffSeq(fine))
        }
        QuadratureSpec::Interval { lo, hi, abs_tol } => {
            let opts = AdaptiveOptions {
                abs_tol: abs_tol.min(tol.to_f64().unwrap_or(abs_tol)),
                rel_tol: 0.0,
                max_subdivisions: 4000,
            };
            let r = quad::integrate_vec_adaptive(
                |x, out: &mut [T]| {
                    hermite_functions(x, out);
                    let fx = f(x);
                    out.iter_mut().for_each(|v| *v = *v * fx);
                },
                T::lit(lo),
                T::lit(hi),
                k,
                &opts,
            )?;
            Ok(CoeffSeq(r.values))
        }
    }
}

/// Value of a truncated weighted norm; for `p > 0` the truncation only gives
/// a lower bound on the true norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedNorm<T> {
    pub value: T,
    pub lower_bound: bool,
}

/// `|c|_p = (Σ_k (2k+2)^{2p} c_k²)^{1/2}` over the retained coefficients.
pub fn weighted_norm<T: Scalar>(c: &[T], p: i32) -> TruncatedNorm<T> {
    let mut acc = quad::KahanAcc::default();
    for (k, &ck) in c.iter().enumerate() {
        let w = T::from_usize_lossy(2 * k + 2).powi(2 * p);
        acc.add(w * ck * ck);
    }
    TruncatedNorm {
        value: acc.value().sqrt(),
        lower_bound: p > 0,
    }
}

/// `Σ_{k<order} (2k+2)^{-2n}`, the weighted norm² of the all-ones sequence at `p = -n`.
pub fn ones_series<T: Scalar>(n: i32, order: usize) -> T {
    let mut acc = quad::KahanAcc::default();
    // small terms first
    for k in (0..order).rev() {
        acc.add(T::from_usize_lossy(2 * k + 2).powi(-2 * n));
    }
    acc.value()
}
