//! Scalar functionals of the model, reduced to one-dimensional Gaussian
//! integrals.
//!
//! Write `X = μ + X_c` with `X_c ~ N(0, Σ)` and `θ̃₀ = θ₀ + ⟨μ, θ₁⟩`. Every
//! functional below depends on the input only through `T = ⟨X_c, θ₁⟩`, which
//! is `N(0, σ²)` with `σ² = ⟨θ₁, Σθ₁⟩`. For the label-weighted input
//! `Z = Y·X_c`, evenness of the Gaussian density `φ_Σ` gives
//!
//! ```text
//! p(z | Y = y) = φ_Σ(z) · g(⟨z, θ₁⟩ + yθ̃₀) / p_y,    p_y = E g(T + yθ̃₀)
//! p(z)         = φ_Σ(z) · [g(⟨z, θ₁⟩ + θ̃₀) + g(⟨z, θ₁⟩ − θ̃₀)]
//! ```
//!
//! so ratios of these densities are functions of `⟨z, θ₁⟩` alone and the
//! d-dimensional integrals collapse onto the law of `T`. In particular
//!
//! ```text
//! χ²(P_Z ‖ P_{Z|y}) + 1 = p_y · E[(g(T + θ̃₀) + g(T − θ̃₀))² / g(T + yθ̃₀)].
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{max_eigenvalue, ModelSpec};
use crate::quadrature::{ln_expect_normal, Hints};
use crate::special::{ln_add_exp, normal_cdf};

const MGF_EXPONENT_LIMIT: f64 = 1400.0;

/// `σ² = ⟨θ₁, Σθ₁⟩`.
pub fn signal_variance(model: &ModelSpec) -> f64 {
    model.cov_form(model.theta1(), model.theta1()).max(0.0)
}

pub fn signal_sd(model: &ModelSpec) -> f64 {
    signal_variance(model).sqrt()
}

/// `ln E e^{⟨X_c, t⟩} = ⟨t, Σt⟩ / 2`.
pub fn log_mgf(model: &ModelSpec, t: &[f64]) -> Result<f64> {
    if t.len() != model.dim() {
        return Err(Error::InvalidArgument(format!(
            "mgf argument has length {}, expected {}",
            t.len(),
            model.dim()
        )));
    }
    Ok(0.5 * model.cov_form(t, t))
}

/// Moment generating function of the centered input.
pub fn mgf(model: &ModelSpec, t: &[f64]) -> Result<f64> {
    let q = 2.0 * log_mgf(model, t)?;
    if q > MGF_EXPONENT_LIMIT {
        return Err(Error::Overflow {
            what: "mgf (use log_mgf)",
            log_value: 0.5 * q,
        });
    }
    Ok((0.5 * q).exp())
}

fn exp_checked(ln: f64, what: &'static str) -> Result<f64> {
    let v = ln.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow { what, log_value: ln })
    }
}

/// `ln E e^{max(0, T_G)}`, `T_G ~ N(0, G²σ²)`.
pub fn ln_mgf_num(model: &ModelSpec, scale: f64) -> Result<f64> {
    let s = scale.abs() * signal_sd(model);
    let hints = Hints {
        kinks: vec![0.0],
        centers: vec![s * s],
        ..Default::default()
    };
    ln_expect_normal(s, &|t: f64| t.max(0.0), &hints, "mgf_num")
}

/// `E e^{max(0, ⟨X_c, Gθ₁⟩)}`.
pub fn mgf_num(model: &ModelSpec, scale: f64) -> Result<f64> {
    exp_checked(ln_mgf_num(model, scale)?, "mgf_num")
}

/// `ln E e^{min(0, T_G)}`.
pub fn ln_mgf_den(model: &ModelSpec, scale: f64) -> Result<f64> {
    let s = scale.abs() * signal_sd(model);
    let hints = Hints {
        kinks: vec![0.0],
        ..Default::default()
    };
    ln_expect_normal(s, &|t: f64| t.min(0.0), &hints, "mgf_den")
}

/// `E e^{min(0, ⟨X_c, Gθ₁⟩)}`.
pub fn mgf_den(model: &ModelSpec, scale: f64) -> Result<f64> {
    Ok(ln_mgf_den(model, scale)?.exp())
}

/// `ln E e^{−|T|}`.
pub fn ln_tilde_m_inverse(model: &ModelSpec) -> Result<f64> {
    let hints = Hints {
        kinks: vec![0.0],
        ..Default::default()
    };
    ln_expect_normal(signal_sd(model), &|t: f64| -t.abs(), &hints, "tilde_m_inverse")
}

/// `1/M̃ = E e^{−|T|}`; equals 1 when `θ₁ = 0`.
pub fn tilde_m_inverse(model: &ModelSpec) -> Result<f64> {
    Ok(ln_tilde_m_inverse(model)?.exp())
}

/// `P(T ≥ |θ̃₀|)` with the convention ½ at `σ = θ̃₀ = 0`.
pub fn p_exceed(model: &ModelSpec) -> f64 {
    let a = model.effective_bias().abs();
    let s = signal_sd(model);
    if s == 0.0 {
        return if a > 0.0 { 0.0 } else { 0.5 };
    }
    normal_cdf(-a / s)
}

fn ln_label_prob(model: &ModelSpec, y: f64) -> Result<f64> {
    let g = model.link();
    let th = y * model.effective_bias();
    let hints = Hints {
        features: vec![-th],
        ..Default::default()
    };
    ln_expect_normal(signal_sd(model), &|t: f64| g.ln_value(t + th), &hints, "label_prob")
}

/// `(P(Y = +1), P(Y = −1))`. The rarer label is integrated and the other is
/// its complement, which is exact in floating point and keeps the rare
/// probability accurate.
pub fn label_probs(model: &ModelSpec) -> Result<(f64, f64)> {
    let bias = model.effective_bias();
    if bias == 0.0 {
        return Ok((0.5, 0.5));
    }
    if bias > 0.0 {
        let minus = ln_label_prob(model, -1.0)?.exp();
        Ok((1.0 - minus, minus))
    } else {
        let plus = ln_label_prob(model, 1.0)?.exp();
        Ok((plus, 1.0 - plus))
    }
}

/// `P(Y = +1) = E g(T + θ̃₀)`.
pub fn label_prob(model: &ModelSpec) -> Result<f64> {
    Ok(label_probs(model)?.0)
}

/// `χ²(P_Z ‖ P_{Z|Y=y})`.
pub fn chi2_conditional(model: &ModelSpec, y: i8) -> Result<f64> {
    if y != 1 && y != -1 {
        return Err(Error::InvalidArgument("label must be ±1".into()));
    }
    let th = model.effective_bias();
    if th == 0.0 {
        return Ok(0.0);
    }
    let g = model.link();
    let yf = f64::from(y);
    let ln_p = ln_label_prob(model, yf)?;
    let hints = Hints {
        features: vec![-th, th],
        ..Default::default()
    };
    let lnf = |t: f64| {
        2.0 * ln_add_exp(g.ln_value(t + th), g.ln_value(t - th)) - g.ln_value(t + yf * th)
    };
    let ln_i = ln_expect_normal(signal_sd(model), &lnf, &hints, "chi2_conditional")?;
    let v = (ln_p + ln_i).exp_m1();
    if !v.is_finite() {
        return Err(Error::Overflow {
            what: "chi2_conditional (clipped domain: link underflows)",
            log_value: ln_p + ln_i,
        });
    }
    if v < -1e-12 {
        return Err(Error::NonFinite("chi2_conditional is negative"));
    }
    Ok(v.max(0.0))
}

/// How a Poincaré or log-Sobolev constant was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KStrategy {
    /// Strong convexity of the potential: `λ_max(Σ)`.
    BakryEmery,
    /// `c·√(log d)·λ_max(E[XXᵀ])`.
    KlsSqrtLog,
    /// `c′·‖E[XXᵀ]‖_F`.
    KlsTrace,
    /// Value supplied by the caller.
    UserOverride,
}

/// Which constants to compute and any caller-supplied values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KRequest {
    pub strategy_p: KStrategy,
    pub strategy_ls: KStrategy,
    #[serde(default)]
    pub c_kls_user: Option<f64>,
    #[serde(default)]
    pub k_p_user: Option<f64>,
    #[serde(default)]
    pub k_ls_user: Option<f64>,
}

impl Default for KRequest {
    fn default() -> Self {
        KRequest {
            strategy_p: KStrategy::BakryEmery,
            strategy_ls: KStrategy::BakryEmery,
            c_kls_user: None,
            k_p_user: None,
            k_ls_user: None,
        }
    }
}

pub const DEFAULT_C_KLS: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KConstants {
    pub k_p: f64,
    pub k_ls: f64,
    pub k_chi2: f64,
    pub k_v: f64,
    pub k_u: f64,
    pub p_plus: f64,
    pub strategy_p: KStrategy,
    pub strategy_ls: KStrategy,
    pub c_kls_user: Option<f64>,
    /// Human-readable provenance warnings.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl KConstants {
    /// Constants assembled from explicit values; `K_V` and `K_U` follow from `p_plus`.
    pub fn from_parts(k_p: f64, k_ls: f64, k_chi2: f64, p_plus: f64) -> Self {
        KConstants {
            k_p,
            k_ls,
            k_chi2,
            k_v: 4.0 * p_plus * (1.0 - p_plus),
            k_u: (1.0 / p_plus).max(1.0 / (1.0 - p_plus)),
            p_plus,
            strategy_p: KStrategy::UserOverride,
            strategy_ls: KStrategy::UserOverride,
            c_kls_user: None,
            notes: Vec::new(),
        }
    }
}

fn positive(v: Option<f64>, what: &str) -> Result<f64> {
    match v {
        Some(x) if x.is_finite() && x > 0.0 => Ok(x),
        Some(x) => Err(Error::InvalidArgument(format!("{what} must be positive, got {x}"))),
        None => Err(Error::InvalidArgument(format!("{what} is required"))),
    }
}

fn isoperimetric_constant(
    model: &ModelSpec,
    strategy: KStrategy,
    user: Option<f64>,
    c_kls: f64,
    log_sobolev: bool,
) -> Result<f64> {
    match strategy {
        KStrategy::BakryEmery => Ok(model.cov_lambda_max()),
        KStrategy::UserOverride => positive(user, if log_sobolev { "k_ls_user" } else { "k_p_user" }),
        KStrategy::KlsSqrtLog | KStrategy::KlsTrace if log_sobolev => Err(Error::Unsupported(
            "KLS strategies bound Poincaré constants only".into(),
        )),
        KStrategy::KlsSqrtLog => {
            let log_d = (model.dim() as f64).ln().max(1.0);
            Ok(c_kls * log_d.sqrt() * max_eigenvalue(model.second_moment()))
        }
        KStrategy::KlsTrace => Ok(c_kls * model.second_moment().norm()),
    }
}

/// Isoperimetric and dependence constants of the label-weighted law.
pub fn k_constants(model: &ModelSpec, req: &KRequest) -> Result<KConstants> {
    let uses_kls = |s: KStrategy| matches!(s, KStrategy::KlsSqrtLog | KStrategy::KlsTrace);
    let mut notes = Vec::new();
    let c_kls = if uses_kls(req.strategy_p) || uses_kls(req.strategy_ls) {
        match req.c_kls_user {
            Some(c) => positive(Some(c), "c_kls_user")?,
            None => {
                let msg = format!(
                    "c_kls_user not given; using {DEFAULT_C_KLS} for the unspecified absolute constant"
                );
                log::warn!("{msg}");
                notes.push(msg);
                DEFAULT_C_KLS
            }
        }
    } else {
        DEFAULT_C_KLS
    };
    let k_p = isoperimetric_constant(model, req.strategy_p, req.k_p_user, c_kls, false)?;
    let k_ls = isoperimetric_constant(model, req.strategy_ls, req.k_ls_user, c_kls, true)?;
    let (p_plus, _) = label_probs(model)?;
    let k_chi2 = chi2_conditional(model, 1)?.max(chi2_conditional(model, -1)?);
    Ok(KConstants {
        k_p,
        k_ls,
        k_chi2,
        k_v: 4.0 * p_plus * (1.0 - p_plus),
        k_u: (1.0 / p_plus).max(1.0 / (1.0 - p_plus)),
        p_plus,
        strategy_p: req.strategy_p,
        strategy_ls: req.strategy_ls,
        c_kls_user: (uses_kls(req.strategy_p) || uses_kls(req.strategy_ls)).then_some(c_kls),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Covariance, LinkKind};
    use approx::assert_relative_eq;

    fn model_1d(s: f64, th0: f64, link: LinkKind) -> ModelSpec {
        ModelSpec::spherical(1.0, vec![s], th0, link).unwrap()
    }

    #[test]
    fn signal_variance_examples() {
        let m = ModelSpec::new(
            2,
            Covariance::Diagonal(vec![1.0, 4.0]),
            vec![1.0, 1.0],
            0.0,
            None,
            LinkKind::Logistic,
        )
        .unwrap();
        assert_eq!(signal_variance(&m), 5.0);
        let z = ModelSpec::spherical(1.0, vec![0.0, 0.0], 0.0, LinkKind::Logistic).unwrap();
        assert_eq!(signal_variance(&z), 0.0);
    }

    #[test]
    fn mgf_closed_form_and_overflow() {
        let m = ModelSpec::spherical(1.0, vec![0.0, 0.0], 0.0, LinkKind::Logistic).unwrap();
        assert_eq!(mgf(&m, &[0.0, 0.0]).unwrap(), 1.0);
        assert_relative_eq!(mgf(&m, &[1.0, 0.0]).unwrap(), 0.5f64.exp(), max_relative = 1e-15);
        assert!(matches!(mgf(&m, &[30.0, 30.0]), Err(Error::Overflow { .. })));
        assert_eq!(log_mgf(&m, &[30.0, 30.0]).unwrap(), 900.0);
    }

    #[test]
    fn mgf_num_den_reference() {
        let m = model_1d(1.0, 0.0, LinkKind::Logistic);
        // independent mpmath evaluation of ½ + e^{1/2}Φ(1) and ½ + e^{1/2}Φ(−1)
        assert_relative_eq!(mgf_num(&m, 1.0).unwrap(), 1.887_142_978_835_004_8, max_relative = 1e-12);
        assert_relative_eq!(mgf_den(&m, 1.0).unwrap(), 0.761_578_291_865_123_4, max_relative = 1e-12);
        let z = model_1d(0.0, 0.0, LinkKind::Logistic);
        assert_eq!(mgf_num(&z, 1.0).unwrap(), 1.0);
        assert_eq!(mgf_den(&z, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn tilde_m_inverse_reference() {
        for (s, want) in [
            (0.1, 0.924_957_570_575_071_2),
            (1.0, 0.523_156_583_730_246_7),
            (3.0, 0.243_027_896_711_124_3),
            (10.0, 0.079_013_388_202_772_0),
        ] {
            let v = tilde_m_inverse(&model_1d(s, 0.0, LinkKind::Logistic)).unwrap();
            assert_relative_eq!(v, want, max_relative = 1e-12);
        }
        // Mills ratio: 2e^{σ²/2}(1 − Φ(σ)) ≤ √(2/π)/σ, tight as σ grows.
        let big = tilde_m_inverse(&model_1d(100.0, 0.0, LinkKind::Logistic)).unwrap();
        let mills = (2.0 / std::f64::consts::PI).sqrt() / 100.0;
        assert!(big <= mills && big > 0.9998 * mills, "{big}");
    }

    #[test]
    fn p_exceed_cases() {
        assert_eq!(p_exceed(&model_1d(2.0, 0.0, LinkKind::Logistic)), 0.5);
        let v = p_exceed(&model_1d(2.0, 2.0 * 1.959964, LinkKind::Logistic));
        assert!((v - 0.025).abs() < 1e-6);
        assert_eq!(p_exceed(&model_1d(0.0, 1.0, LinkKind::Logistic)), 0.0);
        assert_eq!(p_exceed(&model_1d(0.0, 0.0, LinkKind::Logistic)), 0.5);
    }

    #[test]
    fn label_prob_reference() {
        let m = model_1d(1.0, 1.0, LinkKind::Logistic);
        assert_relative_eq!(label_prob(&m).unwrap(), 0.696_734_670_143_683_3, max_relative = 1e-12);
        assert_eq!(label_prob(&model_1d(1.0, 0.0, LinkKind::Probit)).unwrap(), 0.5);
        let z = model_1d(0.0, 10.0, LinkKind::Logistic);
        assert_relative_eq!(label_prob(&z).unwrap(), 0.999_954_602_131_297_6, max_relative = 1e-15);
    }

    #[test]
    fn chi2_reference() {
        let m = model_1d(1.0, 0.5, LinkKind::Logistic);
        assert_relative_eq!(chi2_conditional(&m, 1).unwrap(), 0.005_483_032_104_824_63, max_relative = 1e-9);
        assert_relative_eq!(chi2_conditional(&m, -1).unwrap(), 0.013_226_598_045_001_594, max_relative = 1e-9);
        let p = model_1d(1.0, 0.5, LinkKind::Probit);
        assert_relative_eq!(chi2_conditional(&p, -1).unwrap(), 0.088_117_715_981_454_52, max_relative = 1e-9);
        assert_eq!(chi2_conditional(&model_1d(1.0, 0.0, LinkKind::Logistic), 1).unwrap(), 0.0);
    }

    #[test]
    fn k_constants_examples() {
        let m = ModelSpec::spherical(1.0, vec![0.3, 0.4], 0.0, LinkKind::Logistic).unwrap();
        let k = k_constants(&m, &KRequest::default()).unwrap();
        assert_eq!((k.k_v, k.k_u, k.k_chi2), (1.0, 2.0, 0.0));
        assert_eq!((k.k_p, k.k_ls), (1.0, 1.0));
        let d = 7;
        let m = ModelSpec::spherical(1.0 / d as f64, vec![1.0; d], 0.0, LinkKind::Logistic).unwrap();
        let k = k_constants(&m, &KRequest::default()).unwrap();
        assert_relative_eq!(k.k_ls, 1.0 / d as f64);
        let kls = KRequest {
            strategy_p: KStrategy::KlsSqrtLog,
            ..Default::default()
        };
        let k = k_constants(&m, &kls).unwrap();
        assert_eq!(k.c_kls_user, Some(DEFAULT_C_KLS));
        assert!(!k.notes.is_empty());
        let bad = KRequest {
            strategy_ls: KStrategy::KlsTrace,
            ..Default::default()
        };
        assert!(k_constants(&m, &bad).is_err());
    }
}
