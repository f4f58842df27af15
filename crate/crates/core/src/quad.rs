//! Quadrature rules.
//!
//! Three families are provided:
//!
//! * fixed Gauss rules (Legendre on `[-1, 1]`, and a Gauss–Hermite rule whose
//!   weights integrate products of Hermite *functions* over the whole line),
//! * composite rules built from a Gauss–Legendre panel, either uniform or
//!   geometrically graded toward an endpoint where the integrand has an
//!   algebraic singularity,
//! * adaptive Gauss–Kronrod (7/15) for scalar and vector-valued integrands.
//!
//! Nodes are always computed in `f64` and converted, so an `f32` rule is the
//! rounded `f64` rule.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> FixedRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        let mut acc = KahanAcc::<T>::default();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(x));
        }
        acc.value()
    }

    /// Integrates a vector-valued integrand. `f(x, buf)` fills `buf`.
    pub fn integrate_vec<F: FnMut(T, &mut [T])>(&self, dim: usize, mut f: F) -> Vec<T> {
        let mut out = vec![T::zero(); dim];
        let mut buf = vec![T::zero(); dim];
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            f(x, &mut buf);
            for (o, &b) in out.iter_mut().zip(&buf) {
                *o = *o + w * b;
            }
        }
        out
    }

    /// Affine image of a rule on `[-1, 1]` onto `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> FixedRule<T> {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        FixedRule {
            nodes: self.nodes.iter().map(|&x| mid + half * x).collect(),
            weights: self.weights.iter().map(|&w| w * half).collect(),
        }
    }

    pub(crate) fn append(&mut self, other: FixedRule<T>) {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
    }
}

/// n-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre<T: Scalar>(n: usize) -> FixedRule<T> {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_deriv(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    FixedRule {
        nodes: nodes.into_iter().map(T::lit).collect(),
        weights: weights.into_iter().map(T::lit).collect(),
    }
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// n-point Gauss–Hermite rule in *function* form: `∫ f(x) dx ≈ Σ w_i f(x_i)`
/// with `w_i = 1 / Σ_{k<n} e_k(x_i)²`. Exact for `f = e_j e_k`, `j + k < 2n`.
pub fn gauss_hermite<T: Scalar>(n: usize) -> FixedRule<T> {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    let mut nodes = vec![0.0f64; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        // Initial guesses follow the classical asymptotic placement of the
        // largest roots, then reuse the previous roots.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[n - 1],
            3 => 1.91 * z - 0.91 * nodes[n - 2],
            _ => 2.0 * z - nodes[n - 1 - (i - 2)],
        };
        for _ in 0..200 {
            let (en, enm1) = hermite_pair(n, z);
            // e_n' = -x e_n + sqrt(2n) e_{n-1}
            let d = -z * en + (2.0 * nf).sqrt() * enm1;
            let dz = en / d;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let mut buf = vec![0.0f64; n];
            crate::hermite::hermite_functions(x, &mut buf);
            1.0 / buf.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    FixedRule {
        nodes: nodes.into_iter().map(T::lit).collect(),
        weights: weights.into_iter().map(T::lit).collect(),
    }
}

/// Returns `(e_n(x), e_{n-1}(x))` in unscaled form (Gaussian factor dropped),
/// which is all Newton needs since the factor cancels in the ratio.
fn hermite_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            cur *= 1e-150;
            prev *= 1e-150;
        }
    }
    (cur, prev)
}

/// Which end of an interval carries the singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Left,
    Right,
}

/// Composite rule with `panels` equal panels, each carrying `base`.
pub fn composite_uniform<T: Scalar>(a: T, b: T, panels: usize, base: &FixedRule<T>) -> FixedRule<T> {
    let panels = panels.max(1);
    let h = (b - a) / T::from_usize_lossy(panels);
    let mut rule = FixedRule {
        nodes: Vec::with_capacity(panels * base.len()),
        weights: Vec::with_capacity(panels * base.len()),
    };
    for p in 0..panels {
        let lo = a + h * T::from_usize_lossy(p);
        let hi = if p + 1 == panels { b } else { lo + h };
        rule.append(base.mapped(lo, hi));
    }
    rule
}

/// Geometrically graded composite rule on `[a, b]`: panel breakpoints sit at
/// distances `(b-a)·ratio^j`, `j = 0..levels`, from the singular endpoint.
/// Exponentially accurate for integrands `|x - x_s|^α · smooth`, `α > -1`.
pub fn composite_graded<T: Scalar>(a: T, b: T, toward: Endpoint, ratio: T, levels: usize, base: &FixedRule<T>) -> FixedRule<T> {
    let len = b - a;
    let mut rule = FixedRule {
        nodes: Vec::with_capacity((levels + 1) * base.len()),
        weights: Vec::with_capacity((levels + 1) * base.len()),
    };
    let mut outer = T::one();
    for _ in 0..=levels {
        let inner = outer * ratio;
        let (lo, hi) = match toward {
            Endpoint::Left => (a + len * inner, a + len * outer),
            Endpoint::Right => (b - len * outer, b - len * inner),
        };
        // stop once the inner boundary is no longer resolved relative to
        // the endpoint, so interior nodes never round onto it
        let exact = len * inner;
        let gap = match toward {
            Endpoint::Left => lo - a,
            Endpoint::Right => b - hi,
        };
        let collapsed = (gap - exact).abs() > exact * T::lit(1e-6) || gap <= T::zero();
        if collapsed {
            break;
        }
        rule.append(base.mapped(lo, hi));
        outer = inner;
    }
    // innermost panel touching the singular point
    let (lo, hi) = match toward {
        Endpoint::Left => (a, a + len * outer),
        Endpoint::Right => (b - len * outer, b),
    };
    rule.append(base.mapped(lo, hi));
    rule
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy)]
pub struct KahanAcc<T> {
    sum: T,
    comp: T,
}

impl<T: Scalar> Default for KahanAcc<T> {
    fn default() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }
}

impl<T: Scalar> KahanAcc<T> {
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

/// Tolerances and refinement cap for the adaptive rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_error: T,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecQuadResult<T> {
    pub values: Vec<T>,
    /// Max-norm error estimate over components.
    pub abs_error: T,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment<T> {
    a: T,
    b: T,
    values: Vec<T>,
    err: T,
}

fn gk15_vec<T: Scalar, F: FnMut(T, &mut [T])>(f: &mut F, a: T, b: T, dim: usize, buf: &mut [T]) -> (Vec<T>, T) {
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    let mut kron = vec![T::zero(); dim];
    let mut gauss = vec![T::zero(); dim];
    for (j, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let nodes: &[T] = if x == 0.0 {
            &[mid][..]
        } else {
            &[mid - half * T::lit(x), mid + half * T::lit(x)][..]
        };
        for &node in nodes {
            f(node, buf);
            for i in 0..dim {
                kron[i] = kron[i] + T::lit(wk) * buf[i];
                if j % 2 == 1 {
                    gauss[i] = gauss[i] + T::lit(WG[j / 2]) * buf[i];
                }
            }
        }
    }
    let mut err = T::zero();
    for i in 0..dim {
        kron[i] = kron[i] * half;
        gauss[i] = gauss[i] * half;
        err = err.max((kron[i] - gauss[i]).abs());
    }
    (kron, err)
}

/// Adaptive Gauss–Kronrod integration of a vector-valued integrand over `[a, b]`.
/// Errors are measured in max-norm across components.
pub fn integrate_vec_adaptive<T: Scalar, F: FnMut(T, &mut [T])>(
    mut f: F,
    a: T,
    b: T,
    dim: usize,
    opts: &AdaptiveOptions,
) -> Result<VecQuadResult<T>> {
    let mut buf = vec![T::zero(); dim];
    if a == b {
        return Ok(VecQuadResult {
            values: vec![T::zero(); dim],
            abs_error: T::zero(),
            evaluations: 0,
        });
    }
    let (values, err) = gk15_vec(&mut f, a, b, dim, &mut buf);
    let mut segments = vec![Segment { a, b, values, err }];
    let mut evaluations = 15;
    loop {
        let total_err: T = segments.iter().map(|s| s.err).sum();
        let mut total = vec![T::zero(); dim];
        for s in &segments {
            for i in 0..dim {
                total[i] = total[i] + s.values[i];
            }
        }
        let scale = total.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let target = T::lit(opts.abs_tol).max(T::lit(opts.rel_tol) * scale);
        if total_err <= target {
            return Ok(VecQuadResult {
                values: total,
                abs_error: total_err,
                evaluations,
            });
        }
        // split the worst segment
        let (idx, worst) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty");
        let width = (worst.b - worst.a).abs();
        let floor = T::epsilon() * T::lit(8.0) * worst.a.abs().max(worst.b.abs());
        if segments.len() >= opts.max_subdivisions || width <= floor {
            return Err(Error::Quadrature {
                index: None,
                achieved: total_err.to_f64().unwrap_or(f64::NAN),
                requested: target.to_f64().unwrap_or(f64::NAN),
            });
        }
        let seg = segments.swap_remove(idx);
        let mid = (seg.a + seg.b) / T::lit(2.0);
        let (v1, e1) = gk15_vec(&mut f, seg.a, mid, dim, &mut buf);
        let (v2, e2) = gk15_vec(&mut f, mid, seg.b, dim, &mut buf);
        evaluations += 30;
        segments.push(Segment {
            a: seg.a,
            b: mid,
            values: v1,
            err: e1,
        });
        segments.push(Segment {
            a: mid,
            b: seg.b,
            values: v2,
            err: e2,
        });
    }
}

/// Adaptive Gauss–Kronrod integration of a scalar integrand over `[a, b]`.
pub fn integrate_adaptive<T: Scalar, F: FnMut(T) -> T>(mut f: F, a: T, b: T, opts: &AdaptiveOptions) -> Result<QuadResult<T>> {
    let r = integrate_vec_adaptive(|x, out: &mut [T]| out[0] = f(x), a, b, 1, opts)?;
    Ok(QuadResult {
        value: r.values[0],
        abs_error: r.abs_error,
        evaluations: r.evaluations,
    })
}
