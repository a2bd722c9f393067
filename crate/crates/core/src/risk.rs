//! Empirical and population risks of a linear classifier `(w, b)`.
//!
//! With `X = μ + X_c`, put `S = ⟨X_c, w⟩`, `T = ⟨X_c, θ₁⟩` and
//! `m = ⟨μ, w⟩ + b`. The population risk is
//! `R(w, b) = E Σ_y g(y(T + θ̃₀)) ℓ(y(S + m))`, an expectation over the
//! bivariate normal pair `(S, T)`. Writing `T = σ_T u` and
//! `S = a u + c v` with independent standard normals `u, v`,
//! `a = ⟨w, Σθ₁⟩/σ_T` and `c² = ⟨w, Σw⟩ − a²`, three evaluators follow:
//!
//! * logistic loss: `ℓ(−s) = ℓ(s) + s` collapses the label sum to
//!   `ℓ(S + m) + g(−T − θ̃₀)(S + m)`, so
//!   `R = E ℓ(m + τξ) + m·p₋ − β⟨w, Σθ₁⟩` with `τ² = ⟨w, Σw⟩`,
//!   `p₋ = E g(−T − θ̃₀)` and `β = E g′(T + θ̃₀)` (Stein's identity);
//! * hinge loss: the inner expectation over `v` is closed form,
//!   `E(D − cv)₊ = DΦ(D/c) + cφ(D/c)`, leaving a 1-D rule over `u`;
//! * any other loss: a tensor Gauss–Hermite rule over `(u, v)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{dot, to_label_weighted, Dataset, LossKind, LossSpec, ModelSpec};
use crate::quadrature::{gauss_hermite_cached, ln_expect_normal, Hints, QuadratureRule};
use crate::special::{normal_cdf, normal_pdf};

pub const DEFAULT_QUAD_ORDER: usize = 60;

/// Risk value with its gradient in `(w, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskGrad {
    pub value: f64,
    pub grad_w: Vec<f64>,
    pub grad_b: f64,
}

#[derive(Clone, Debug)]
enum Kernel {
    Logistic { rule: Arc<QuadratureRule>, p_minus: f64, beta: f64 },
    Hinge { outer: Vec<OuterNode> },
    Generic { outer: Vec<OuterNode>, inner: Arc<QuadratureRule> },
}

/// Outer node in `u` with its probability weight and `g(σ_T u + θ̃₀)`.
#[derive(Clone, Copy, Debug)]
struct OuterNode {
    u: f64,
    weight: f64,
    g_plus: f64,
}

/// Population risk `R(w, b)` for a fixed model and loss.
#[derive(Clone, Debug)]
pub struct PopulationRisk {
    model: ModelSpec,
    loss: LossSpec,
    kernel: Kernel,
    sigma_theta: Vec<f64>,
    sigma_t: f64,
}

/// Second-order Gaussian summaries of `(w, b)`.
struct Summary {
    sw: Vec<f64>,
    q_ww: f64,
    q_wt: f64,
    m: f64,
}

fn outer_nodes(model: &ModelSpec, sigma_t: f64, order: usize) -> Result<Vec<OuterNode>> {
    let th = model.effective_bias();
    let link = model.link();
    if sigma_t == 0.0 {
        return Ok(vec![OuterNode {
            u: 0.0,
            weight: 1.0,
            g_plus: link.value(th),
        }]);
    }
    let rule = gauss_hermite_cached(order)?;
    Ok(rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&u, &weight)| OuterNode {
            u,
            weight,
            g_plus: link.value(sigma_t * u + th),
        })
        .collect())
}

/// `(ℓ, ℓ′, ℓ″)` of the logistic loss from one exponential and one log.
#[inline]
fn logistic_triple(s: f64) -> (f64, f64, f64) {
    let e = (-s.abs()).exp();
    let value = (-s).max(0.0) + e.ln_1p();
    let inv = 1.0 / (1.0 + e);
    let sig_neg = if s >= 0.0 { e * inv } else { inv };
    (value, -sig_neg, e * inv * inv)
}

impl PopulationRisk {
    pub fn new(model: &ModelSpec, loss: &LossSpec, order: usize) -> Result<Self> {
        let sigma_theta = model.cov_apply(model.theta1());
        let sigma_t = dot(&sigma_theta, model.theta1()).max(0.0).sqrt();
        let kernel = match &loss.kind {
            LossKind::Logistic => {
                let th = model.effective_bias();
                let link = model.link();
                let (p_minus, beta) = if sigma_t == 0.0 {
                    (link.value(-th), link.ln_density(th).exp())
                } else {
                    let hints = Hints {
                        features: vec![-th],
                        ..Default::default()
                    };
                    let p = ln_expect_normal(sigma_t, &|t| link.ln_value(-t - th), &hints, "risk p_minus")?;
                    let b = ln_expect_normal(sigma_t, &|t| link.ln_density(t + th), &hints, "risk slope")?;
                    (p.exp(), b.exp())
                };
                Kernel::Logistic {
                    rule: gauss_hermite_cached(order)?,
                    p_minus,
                    beta,
                }
            }
            LossKind::Hinge => Kernel::Hinge {
                outer: outer_nodes(model, sigma_t, order)?,
            },
            LossKind::Custom(_) => Kernel::Generic {
                outer: outer_nodes(model, sigma_t, order)?,
                inner: gauss_hermite_cached(order)?,
            },
        };
        Ok(PopulationRisk {
            model: model.clone(),
            loss: loss.clone(),
            kernel,
            sigma_theta,
            sigma_t,
        })
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    fn summary(&self, w: &[f64], b: f64) -> Summary {
        let sw = self.model.cov_apply(w);
        let q_ww = dot(w, &sw).max(0.0);
        let q_wt = dot(w, &self.sigma_theta);
        let m = dot(self.model.mu(), w) + b;
        Summary { sw, q_ww, q_wt, m }
    }

    /// Split `⟨w, Σw⟩` into the part along `T` and the residual variance.
    fn decompose(&self, s: &Summary) -> (f64, f64) {
        if self.sigma_t == 0.0 {
            return (0.0, s.q_ww);
        }
        let a = s.q_wt / self.sigma_t;
        let mut c2 = s.q_ww - a * a;
        if c2 <= 1e-14 * s.q_ww {
            c2 = 0.0;
        }
        (a, c2)
    }

    pub fn value(&self, w: &[f64], b: f64) -> f64 {
        let s = self.summary(w, b);
        match &self.kernel {
            Kernel::Logistic { rule, p_minus, beta } => {
                let tau = s.q_ww.sqrt();
                let mut acc = 0.0;
                for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
                    acc += wt * logistic_triple(s.m + tau * x).0;
                }
                acc + s.m * p_minus - beta * s.q_wt
            }
            Kernel::Hinge { outer } => {
                let (a, c2) = self.decompose(&s);
                let c = c2.sqrt();
                outer
                    .iter()
                    .map(|nd| {
                        let k = a * nd.u + s.m;
                        nd.weight
                            * (nd.g_plus * hinge_inner(1.0 - k, c).0
                                + (1.0 - nd.g_plus) * hinge_inner(1.0 + k, c).0)
                    })
                    .sum()
            }
            Kernel::Generic { outer, inner } => {
                let (a, c2) = self.decompose(&s);
                let c = c2.sqrt();
                let mut acc = 0.0;
                for nd in outer {
                    let k = a * nd.u + s.m;
                    let mut pos = 0.0;
                    let mut neg = 0.0;
                    for (&v, &wv) in inner.nodes.iter().zip(&inner.weights) {
                        let t = k + c * v;
                        pos += wv * self.loss.value(t);
                        neg += wv * self.loss.value(-t);
                    }
                    acc += nd.weight * (nd.g_plus * pos + (1.0 - nd.g_plus) * neg);
                }
                acc
            }
        }
    }

    pub fn value_grad(&self, w: &[f64], b: f64) -> RiskGrad {
        let s = self.summary(w, b);
        // Partials in (a, c², m), or (τ², m) for the logistic form.
        let (value, d_a, d_c2, d_m) = match &self.kernel {
            Kernel::Logistic { rule, p_minus, beta } => {
                let tau = s.q_ww.sqrt();
                let (mut l0, mut l1, mut l2) = (0.0, 0.0, 0.0);
                for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
                    let (v, d1, d2) = logistic_triple(s.m + tau * x);
                    l0 += wt * v;
                    l1 += wt * d1;
                    l2 += wt * d2;
                }
                let d_m = l1 + p_minus;
                let mut grad_w: Vec<f64> = s
                    .sw
                    .iter()
                    .zip(&self.sigma_theta)
                    .map(|(sw, st)| l2 * sw - beta * st)
                    .collect();
                for (g, mu) in grad_w.iter_mut().zip(self.model.mu()) {
                    *g += d_m * mu;
                }
                return RiskGrad {
                    value: l0 + s.m * p_minus - beta * s.q_wt,
                    grad_w,
                    grad_b: d_m,
                };
            }
            Kernel::Hinge { outer } => {
                let (a, c2) = self.decompose(&s);
                let c = c2.sqrt();
                let (mut val, mut da, mut dc2, mut dm) = (0.0, 0.0, 0.0, 0.0);
                for nd in outer {
                    let k = a * nd.u + s.m;
                    let (vp, pp, cp) = hinge_inner(1.0 - k, c);
                    let (vn, pn, cn) = hinge_inner(1.0 + k, c);
                    let gm = 1.0 - nd.g_plus;
                    val += nd.weight * (nd.g_plus * vp + gm * vn);
                    // ∂D/∂k = −y
                    let dk = nd.g_plus * (-pp) + gm * pn;
                    da += nd.weight * dk * nd.u;
                    dm += nd.weight * dk;
                    dc2 += nd.weight * (nd.g_plus * cp + gm * cn);
                }
                (val, da, dc2, dm)
            }
            Kernel::Generic { outer, inner } => {
                let (a, c2) = self.decompose(&s);
                let c = c2.sqrt();
                let (mut val, mut da, mut dc2, mut dm) = (0.0, 0.0, 0.0, 0.0);
                for nd in outer {
                    let k = a * nd.u + s.m;
                    let gm = 1.0 - nd.g_plus;
                    for (&v, &wv) in inner.nodes.iter().zip(&inner.weights) {
                        let t = k + c * v;
                        let wgt = nd.weight * wv;
                        val += wgt * (nd.g_plus * self.loss.value(t) + gm * self.loss.value(-t));
                        let dk = nd.g_plus * self.loss.subgradient(t) - gm * self.loss.subgradient(-t);
                        da += wgt * dk * nd.u;
                        dm += wgt * dk;
                        dc2 += wgt * self.curvature(t, v, c, nd.g_plus, dk);
                    }
                }
                (val, da, dc2, dm)
            }
        };
        let mut grad_w = vec![0.0; s.sw.len()];
        let a_coef = if self.sigma_t > 0.0 {
            let a = s.q_wt / self.sigma_t;
            (d_a - 2.0 * a * d_c2) / self.sigma_t
        } else {
            0.0
        };
        for (k, g) in grad_w.iter_mut().enumerate() {
            *g = a_coef * self.sigma_theta[k] + 2.0 * d_c2 * s.sw[k] + d_m * self.model.mu()[k];
        }
        RiskGrad {
            value,
            grad_w,
            grad_b: d_m,
        }
    }

    /// Contribution to `∂R/∂(c²)` at one tensor node.
    fn curvature(&self, t: f64, v: f64, c: f64, g_plus: f64, dk: f64) -> f64 {
        if let LossKind::Custom(f) = &self.loss.kind {
            if let (Some(p), Some(n)) = (f.second_derivative(t), f.second_derivative(-t)) {
                return 0.5 * (g_plus * p + (1.0 - g_plus) * n);
            }
        }
        if c > 0.0 {
            dk * v / (2.0 * c)
        } else {
            0.0
        }
    }
}

/// `E(D − cV)₊` with its partials in `D` and `c²`.
#[inline]
fn hinge_inner(d: f64, c: f64) -> (f64, f64, f64) {
    if c <= 1e-12 {
        return if d > 0.0 { (d, 1.0, 0.0) } else { (0.0, 0.0, 0.0) };
    }
    let z = d / c;
    let cdf = normal_cdf(z);
    let pdf = normal_pdf(z);
    (d * cdf + c * pdf, cdf, pdf / (2.0 * c))
}

/// `(1/n) Σ ℓ(Yᵢ(⟨Xᵢ, w⟩ + b))` over a fixed dataset.
#[derive(Clone, Debug)]
pub struct EmpiricalRisk {
    n: usize,
    dim: usize,
    z: Vec<f64>,
    y: Vec<f64>,
    loss: LossSpec,
}

impl EmpiricalRisk {
    pub fn new(data: &Dataset, loss: &LossSpec) -> Self {
        let lw = to_label_weighted(data);
        EmpiricalRisk {
            n: data.n,
            dim: data.dim,
            z: lw.z,
            y: data.y.iter().map(|&v| f64::from(v)).collect(),
            loss: loss.clone(),
        }
    }

    pub fn value(&self, w: &[f64], b: f64) -> f64 {
        let mut acc = 0.0;
        for (zi, yi) in self.z.chunks_exact(self.dim).zip(&self.y) {
            acc += self.loss.value(dot(zi, w) + yi * b);
        }
        acc / self.n as f64
    }

    pub fn value_grad(&self, w: &[f64], b: f64) -> RiskGrad {
        let mut value = 0.0;
        let mut grad_w = vec![0.0; self.dim];
        let mut grad_b = 0.0;
        let logistic = matches!(self.loss.kind, LossKind::Logistic);
        for (zi, yi) in self.z.chunks_exact(self.dim).zip(&self.y) {
            let t = dot(zi, w) + yi * b;
            let (v, d) = if logistic {
                let (v, d, _) = logistic_triple(t);
                (v, d)
            } else {
                (self.loss.value(t), self.loss.subgradient(t))
            };
            value += v;
            if d != 0.0 {
                for (g, z) in grad_w.iter_mut().zip(zi) {
                    *g += d * z;
                }
                grad_b += d * yi;
            }
        }
        let inv = 1.0 / self.n as f64;
        grad_w.iter_mut().for_each(|g| *g *= inv);
        RiskGrad {
            value: value * inv,
            grad_w,
            grad_b: grad_b * inv,
        }
    }
}

pub fn empirical_risk(data: &Dataset, loss: &LossSpec, w: &[f64], b: f64) -> f64 {
    EmpiricalRisk::new(data, loss).value(w, b)
}

pub fn population_risk(model: &ModelSpec, loss: &LossSpec, w: &[f64], b: f64, order: usize) -> Result<f64> {
    if w.len() != model.dim() {
        return Err(Error::InvalidArgument("w has the wrong dimension".into()));
    }
    Ok(PopulationRisk::new(model, loss, order)?.value(w, b))
}

/// `R(w, b) − R_n(w, b)`, or its negation.
#[derive(Clone, Debug)]
pub struct GapObjective {
    pub population: PopulationRisk,
    pub empirical: EmpiricalRisk,
    /// `+1` for `R − R_n`, `−1` for `R_n − R`.
    pub sign: f64,
}

impl GapObjective {
    pub fn new(data: &Dataset, model: &ModelSpec, loss: &LossSpec, order: usize) -> Result<Self> {
        if data.dim != model.dim() {
            return Err(Error::InvalidArgument("data and model dimensions differ".into()));
        }
        Ok(GapObjective {
            population: PopulationRisk::new(model, loss, order)?,
            empirical: EmpiricalRisk::new(data, loss),
            sign: 1.0,
        })
    }

    pub fn reversed(mut self) -> Self {
        self.sign = -self.sign;
        self
    }

    pub fn value(&self, w: &[f64], b: f64) -> f64 {
        self.sign * (self.population.value(w, b) - self.empirical.value(w, b))
    }

    pub fn value_grad(&self, w: &[f64], b: f64) -> RiskGrad {
        let p = self.population.value_grad(w, b);
        let e = self.empirical.value_grad(w, b);
        RiskGrad {
            value: self.sign * (p.value - e.value),
            grad_w: p.grad_w.iter().zip(&e.grad_w).map(|(a, b)| self.sign * (a - b)).collect(),
            grad_b: self.sign * (p.grad_b - e.grad_b),
        }
    }
}

pub fn gap(data: &Dataset, model: &ModelSpec, loss: &LossSpec, w: &[f64], b: f64) -> Result<f64> {
    Ok(GapObjective::new(data, model, loss, DEFAULT_QUAD_ORDER)?.value(w, b))
}

/// Largest deviation between the analytic population-risk gradient and
/// central differences with step `h = 1e−5`, relative to the largest
/// finite-difference component.
pub fn gradient_check(model: &ModelSpec, loss: &LossSpec, w: &[f64], b: f64) -> Result<f64> {
    let risk = PopulationRisk::new(model, loss, DEFAULT_QUAD_ORDER)?;
    let g = risk.value_grad(w, b);
    let h = 1e-5;
    let d = w.len();
    let mut fd = Vec::with_capacity(d + 1);
    let mut wp = w.to_vec();
    for k in 0..=d {
        let (fp, fm) = if k < d {
            wp[k] = w[k] + h;
            let fp = risk.value(&wp, b);
            wp[k] = w[k] - h;
            let fm = risk.value(&wp, b);
            wp[k] = w[k];
            (fp, fm)
        } else {
            (risk.value(w, b + h), risk.value(w, b - h))
        };
        fd.push((fp - fm) / (2.0 * h));
    }
    let analytic: Vec<f64> = g.grad_w.iter().copied().chain([g.grad_b]).collect();
    let scale = fd.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
    Ok(analytic
        .iter()
        .zip(&fd)
        .map(|(a, f)| (a - f).abs() / scale)
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Covariance, LinkKind, ScalarLoss};
    use crate::special::sigmoid;
    use approx::assert_relative_eq;

    #[derive(Debug)]
    struct PlainLogistic;
    impl ScalarLoss for PlainLogistic {
        fn value(&self, t: f64) -> f64 {
            crate::special::softplus(-t)
        }
        fn subgradient(&self, t: f64) -> f64 {
            -sigmoid(-t)
        }
    }

    fn model() -> ModelSpec {
        ModelSpec::new(
            3,
            Covariance::Full(vec![vec![1.0, 0.3, 0.0], vec![0.3, 2.0, 0.1], vec![0.0, 0.1, 0.5]]),
            vec![0.7, -0.4, 0.2],
            0.3,
            Some(vec![0.2, 0.0, -0.1]),
            LinkKind::Logistic,
        )
        .unwrap()
    }

    #[test]
    fn origin_risk_is_loss_at_zero() {
        let m = model();
        let v = population_risk(&m, &LossSpec::logistic(), &[0.0; 3], 0.0, 60).unwrap();
        assert_relative_eq!(v, 2f64.ln(), max_relative = 1e-14);
        let h = population_risk(&m, &LossSpec::hinge(), &[0.0; 3], 0.0, 60).unwrap();
        assert_relative_eq!(h, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn logistic_reduction_matches_tensor_rule() {
        let m = model();
        let closed = PopulationRisk::new(&m, &LossSpec::logistic(), 60).unwrap();
        let custom = LossSpec::custom(Arc::new(PlainLogistic), 1.0).unwrap();
        let tensor = PopulationRisk::new(&m, &custom, 60).unwrap();
        for (w, b) in [(vec![0.5, -0.2, 0.1], 0.3), (vec![-0.3, 0.6, 0.9], -0.5)] {
            assert_relative_eq!(closed.value(&w, b), tensor.value(&w, b), max_relative = 1e-10);
            let gc = closed.value_grad(&w, b);
            let gt = tensor.value_grad(&w, b);
            for (a, c) in gc.grad_w.iter().zip(&gt.grad_w) {
                assert!((a - c).abs() < 1e-8, "{a} vs {c}");
            }
            assert!((gc.grad_b - gt.grad_b).abs() < 1e-8);
        }
    }

    #[test]
    fn sign_symmetry() {
        let m = ModelSpec::spherical(1.0, vec![0.6, -0.8], 0.4, LinkKind::Probit).unwrap();
        let flipped = ModelSpec::spherical(1.0, vec![-0.6, 0.8], -0.4, LinkKind::Probit).unwrap();
        for loss in [LossSpec::logistic(), LossSpec::hinge()] {
            let a = population_risk(&m, &loss, &[0.3, 0.5], 0.2, 60).unwrap();
            let b = population_risk(&flipped, &loss, &[-0.3, -0.5], -0.2, 60).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = model();
        for loss in [LossSpec::logistic(), LossSpec::hinge()] {
            let e = gradient_check(&m, &loss, &[0.4, -0.3, 0.8], 0.25).unwrap();
            assert!(e < 1e-5, "{}: {e}", loss.name());
        }
    }

    #[test]
    fn empirical_examples() {
        let one = Dataset::new(1, vec![2.0], vec![1], 0).unwrap();
        assert_eq!(empirical_risk(&one, &LossSpec::hinge(), &[1.0], 0.0), 0.0);
        let two = Dataset::new(1, vec![1.0, -1.0], vec![1, 1], 0).unwrap();
        assert_eq!(empirical_risk(&two, &LossSpec::hinge(), &[1.0], 0.0), 1.0);
        assert_relative_eq!(empirical_risk(&two, &LossSpec::logistic(), &[0.0], 0.0), 2f64.ln());
        let e = EmpiricalRisk::new(&two, &LossSpec::logistic());
        let g = e.value_grad(&[0.3], 0.1);
        assert_relative_eq!(g.value, e.value(&[0.3], 0.1), max_relative = 1e-15);
    }
}
