//! First-chaos random variables, S-transforms, sample-level Wick operations
//! and generalized functionals `F(G_t)` of a single process value.
//!
//! Higher chaoses are never stored as coefficient tensors; they only appear
//! through pathwise samples such as `uv − E[uv]`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite::{hermite_functions, weighted_norm, CoeffSeq};
use crate::procmodel::ProcessModel;
use crate::quad::{integrate_adaptive, AdaptiveOptions};
use crate::scalar::Scalar;

/// `a₀ + Σ_k a_k Z_k` with `Z_k = ⟨·, e_k⟩` i.i.d. standard Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosVector<T> {
    pub const_part: T,
    pub first_chaos: CoeffSeq<T>,
}

impl<T: Scalar> ChaosVector<T> {
    pub fn new(const_part: T, first_chaos: CoeffSeq<T>) -> Self {
        Self { const_part, first_chaos }
    }

    /// `⟨·, f⟩` for a coefficient sequence `f`.
    pub fn pairing(f: CoeffSeq<T>) -> Self {
        Self::new(T::zero(), f)
    }

    pub fn mean(&self) -> T {
        self.const_part
    }

    pub fn variance(&self) -> T {
        self.first_chaos.norm_sq()
    }

    /// Value on the sample with coordinates `z`.
    pub fn sample(&self, z: &[T]) -> T {
        self.const_part + self.first_chaos.dot(z)
    }

    /// `a₀ + Σ a_k η_k`.
    pub fn s_transform(&self, eta: &TestFunction<T>) -> T {
        self.const_part + self.first_chaos.dot(eta.coeffs.as_slice())
    }

    /// `‖·‖_{-p}` of the first-chaos part, which is `|f|_{-p}`.
    pub fn hida_norm(&self, p: i32) -> T {
        weighted_norm(self.first_chaos.as_slice(), -p).value
    }
}

impl ChaosVector<f64> {
    /// `G_t` truncated to the model's basis.
    pub fn from_process(model: &ProcessModel, t: f64) -> Result<Self> {
        Ok(Self::pairing(CoeffSeq(model.coeffs(t)?)))
    }
}

/// S-transform of `X ⋄ Y`, which factorises as `S(X)(η) S(Y)(η)`.
pub fn wick_s_transform<T: Scalar>(x: &ChaosVector<T>, y: &ChaosVector<T>, eta: &TestFunction<T>) -> T {
    x.s_transform(eta) * y.s_transform(eta)
}

/// Finite Hermite expansion `η = Σ η_k e_k` with recorded geometric decay
/// `|η_k| ≤ C ρ^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<T> {
    pub coeffs: CoeffSeq<T>,
    pub decay_const: T,
    pub decay_rate: T,
}

impl<T: Scalar> TestFunction<T> {
    /// Records the smallest `C` that works for the given `ρ ∈ (0, 1)`.
    pub fn new(coeffs: CoeffSeq<T>, rate: T) -> Result<Self> {
        if !(rate > T::zero() && rate < T::one()) {
            return Err(Error::param("rate", "decay rate must lie in (0, 1)"));
        }
        let mut c = T::zero();
        let mut scale = T::one();
        for &v in coeffs.as_slice() {
            if !v.is_finite() {
                return Err(Error::param("coeffs", "non-finite coefficient"));
            }
            c = c.max(v.abs() / scale);
            scale = scale * rate;
        }
        if !c.is_finite() {
            return Err(Error::param("coeffs", "coefficients decay slower than the requested rate"));
        }
        Ok(Self {
            coeffs,
            decay_const: c,
            decay_rate: rate,
        })
    }

    /// `η_k = amplitude · ρ^k`.
    pub fn geometric(amplitude: T, rate: T, order: usize) -> Result<Self> {
        let mut v = Vec::with_capacity(order);
        let mut x = amplitude;
        for _ in 0..order {
            v.push(x);
            x = x * rate;
        }
        Self::new(CoeffSeq(v), rate)
    }

    pub fn zero(order: usize) -> Self {
        Self {
            coeffs: CoeffSeq::zeros(order),
            decay_const: T::zero(),
            decay_rate: T::lit(0.5),
        }
    }

    /// `|η|_p`.
    pub fn norm(&self, p: i32) -> T {
        weighted_norm(self.coeffs.as_slice(), p).value
    }
}

/// `uv − cov(U, V)`: a sample of `U ⋄ V` for centred jointly Gaussian `U, V`.
pub fn wick_pair_sample<T: Scalar>(u: T, v: T, cov_uv: T) -> T {
    u * v - cov_uv
}

/// `exp(c + Σ m_k z_k − ½ Σ m_k²)`, a sample of `e^c :e^{⟨·, m⟩}:`.
pub fn wick_exp_sample<T: Scalar>(c: T, m: &[T], z: &[T]) -> T {
    assert!(z.len() >= m.len(), "coordinate sample shorter than the exponent");
    let mut lin = T::zero();
    let mut sq = T::zero();
    for (&mk, &zk) in m.iter().zip(z) {
        lin = lin + mk * zk;
        sq = sq + mk * mk;
    }
    (c + lin - sq / T::lit(2.0)).exp()
}

/// A tempered distribution `F` applied to `G_t`: a point mass or a function
/// of moderate growth.
#[derive(Clone)]
pub enum Functional {
    Delta(f64),
    Function {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl Functional {
    pub fn delta(a: f64) -> Self {
        Functional::Delta(a)
    }

    pub fn function(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Functional::Function {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// `∫ F(x) w(x) dx` for a weight concentrated on `[centre ± half_width]`.
    fn pair_with(&self, w: impl Fn(f64) -> f64, centre: f64, half_width: f64) -> Result<f64> {
        match self {
            Functional::Delta(a) => Ok(w(*a)),
            Functional::Function { f, .. } => {
                let opts = AdaptiveOptions {
                    abs_tol: 1e-12,
                    rel_tol: 1e-12,
                    max_subdivisions: 4000,
                };
                let g = |x: f64| f(x) * w(x);
                // split at the centre so kinks there land on a node boundary
                let left = integrate_adaptive(g, centre - half_width, centre, &opts)?;
                let right = integrate_adaptive(g, centre, centre + half_width, &opts)?;
                Ok(left.value + right.value)
            }
        }
    }

    /// Hermite coefficients of `F` (point evaluations for `δ_a`).
    pub fn hermite_coeffs(&self, order: usize) -> Result<Vec<f64>> {
        match self {
            Functional::Delta(a) => {
                let mut out = vec![0.0; order];
                hermite_functions(*a, &mut out);
                Ok(out)
            }
            Functional::Function { f, .. } => {
                let reach = (2.0 * order as f64 + 1.0).sqrt() + 12.0;
                let opts = AdaptiveOptions {
                    abs_tol: 1e-11,
                    rel_tol: 0.0,
                    max_subdivisions: 8000,
                };
                let r = crate::quad::integrate_vec_adaptive(
                    |x, out: &mut [f64]| {
                        hermite_functions(x, out);
                        let fx = f(x);
                        out.iter_mut().for_each(|v| *v *= fx);
                    },
                    -reach,
                    reach,
                    order,
                    &opts,
                )?;
                Ok(r.values)
            }
        }
    }
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Delta(a) => write!(f, "delta({a})"),
            Functional::Function { name, .. } => write!(f, "{name}"),
        }
    }
}

fn positive_variance(model: &ProcessModel, t: f64) -> Result<f64> {
    let r = model.variance(t)?;
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::ZeroVariance { t })
    }
}

/// `S(F(G_t))(η) = ∫ F(x) (2πR_t)^{-1/2} exp(−(x − ⟨g_t, η⟩)²/(2R_t)) dx`.
pub fn s_transform_functional(model: &ProcessModel, func: &Functional, t: f64, eta: &TestFunction<f64>) -> Result<f64> {
    let r = positive_variance(model, t)?;
    let m: f64 = model.coeffs(t)?.iter().zip(eta.coeffs.as_slice()).map(|(c, e)| c * e).sum();
    let norm = (2.0 * std::f64::consts::PI * r).sqrt();
    func.pair_with(|x| (-(x - m).powi(2) / (2.0 * r)).exp() / norm, m, 14.0 * r.sqrt())
}

fn ln_factorial(k: usize) -> f64 {
    libm::lgamma(k as f64 + 1.0)
}

/// `ξ_{t,k}(x) = π^{1/4} (k!)^{1/2} R^{k/2} e^{−x²/(4R)} e_k(x/√(2R))`.
pub fn xi(r: f64, k: usize, x: f64) -> f64 {
    let mut e = vec![0.0; k + 1];
    hermite_functions(x / (2.0 * r).sqrt(), &mut e);
    let log_pref = 0.25 * std::f64::consts::PI.ln() + 0.5 * ln_factorial(k) + 0.5 * k as f64 * r.ln();
    log_pref.exp() * (-x * x / (4.0 * r)).exp() * e[k]
}

/// `⟨F, ξ_{t,k}⟩`.
pub fn xi_pairing(func: &Functional, t: f64, k: usize, model: &ProcessModel) -> Result<f64> {
    let r = positive_variance(model, t)?;
    let reach = (2.0 * r).sqrt() * ((2.0 * k as f64 + 1.0).sqrt() + 10.0);
    func.pair_with(|x| xi(r, k, x), 0.0, reach)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HidaNorm {
    pub t: f64,
    pub p: i32,
    pub norm_sq: f64,
    /// Geometric bound on the omitted terms; infinite when the series has not
    /// started to decay by the truncation order.
    pub tail_bound: f64,
    pub terms: Vec<f64>,
    pub decaying: bool,
}

/// `‖F(G_t)‖²_{-p} = (2πR_t)^{-1} Σ_k (k!)^{-1} R_t^{-2k} ⟨F, ξ_{t,k}⟩² (|A^{-p} g_t|₀²)^k`
/// summed for `k ≤ chaos_order`.
pub fn hida_norm_generalized(func: &Functional, t: f64, p: i32, model: &ProcessModel, chaos_order: usize) -> Result<HidaNorm> {
    let r = positive_variance(model, t)?;
    let a = weighted_norm(&model.coeffs(t)?, -p).value.powi(2);
    let mut terms = Vec::with_capacity(chaos_order + 1);
    for k in 0..=chaos_order {
        let pair = xi_pairing(func, t, k, model)?;
        let log_w = -ln_factorial(k) - 2.0 * k as f64 * r.ln() + k as f64 * a.ln();
        terms.push(pair * pair * log_w.exp() / (2.0 * std::f64::consts::PI * r));
    }
    let norm_sq: f64 = terms.iter().sum();
    // Parity makes individual terms vanish, so compare the envelope of
    // adjacent pairs near the truncation order.
    let env = |k: usize| terms[k].max(terms[k - 1]);
    let (tail_bound, decaying) = if chaos_order < 3 {
        (f64::INFINITY, false)
    } else {
        let (last, prev) = (env(chaos_order), env(chaos_order - 2));
        if last <= 1e-300 {
            (0.0, true)
        } else {
            let ratio = (last / prev).sqrt();
            if ratio < 1.0 {
                (last * ratio / (1.0 - ratio), true)
            } else {
                (f64::INFINITY, false)
            }
        }
    };
    Ok(HidaNorm {
        t,
        p,
        norm_sq,
        tail_bound,
        terms,
        decaying,
    })
}

/// Ratio of `‖F(G_t)‖²_{-p}` to `max{R^{-2p}, R^{2p}} R^{-1/2} |F|²_{-p}`;
/// bounded in `t` when the constant in that estimate exists.
pub fn hida_bound_ratio(func: &Functional, t: f64, p: i32, model: &ProcessModel, chaos_order: usize) -> Result<f64> {
    let n = hida_norm_generalized(func, t, p, model, chaos_order)?;
    let r = positive_variance(model, t)?;
    let f_norm = weighted_norm(&func.hermite_coeffs(model.order())?, -p).value.powi(2);
    let scale = r.powi(-2 * p).max(r.powi(2 * p)) / r.sqrt();
    Ok(n.norm_sq / (scale * f_norm))
}
