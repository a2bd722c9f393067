//! Concentration residuals for the uniform generalization error.
//!
//! Each residual `r(δ)` bounds the deviation of the supremum above its mean
//! with probability at least `1 − δ`. Two tail shapes exist: exponential
//! (Poincaré, `λ = ln(3/δ)²`) and Gaussian (log-Sobolev, `λ = ln(1/δ)`).
//! All arithmetic is done on logarithms so that `e^{2G|θ₀|}` at large bias
//! still yields a usable `log_value`.

use serde::{Deserialize, Serialize};

use crate::analytics::{self, KConstants};
use crate::error::{Error, Result};
use crate::model::{ConstraintSet, ModelSpec};
use crate::special::{ln_add_exp, ln_expm1, ln_sum_exp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Poincare,
    Logsobolev,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Poincare, Mode::Logsobolev];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Poincare => "poincare",
            Mode::Logsobolev => "logsobolev",
        }
    }

    /// `ln λ(δ)`: `ln(ln(3/δ)²)` or `ln ln(1/δ)`; the latter is `−∞` for δ ≥ 1.
    fn ln_lambda(self, delta: f64) -> f64 {
        match self {
            Mode::Poincare => 2.0 * (3.0 / delta).ln().ln(),
            Mode::Logsobolev => (1.0 / delta).ln().max(0.0).ln(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundInput {
    pub model: ModelSpec,
    pub constraints: ConstraintSet,
    pub loss_lipschitz: f64,
    pub n: usize,
    pub delta: f64,
    pub kconst: KConstants,
    pub mode: Mode,
}

impl BoundInput {
    pub fn new(
        model: ModelSpec,
        constraints: ConstraintSet,
        loss_lipschitz: f64,
        n: usize,
        delta: f64,
        kconst: KConstants,
        mode: Mode,
    ) -> Result<Self> {
        let input = BoundInput {
            model,
            constraints,
            loss_lipschitz,
            n,
            delta,
            kconst,
            mode,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if !(self.loss_lipschitz > 0.0 && self.loss_lipschitz.is_finite()) {
            return Err(Error::InvalidArgument("loss_lipschitz must be positive".into()));
        }
        ConstraintSet::new(self.constraints.r_w, self.constraints.r_b)?;
        Ok(())
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        BoundInput { delta, ..self.clone() }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        BoundInput { mode, ..self.clone() }
    }

    fn ln_l(&self) -> f64 {
        self.loss_lipschitz.ln()
    }
    fn ln_rw2(&self) -> f64 {
        2.0 * self.constraints.r_w.ln()
    }
    fn ln_rb2(&self) -> f64 {
        2.0 * self.constraints.r_b.ln()
    }
    fn ln_lambda(&self) -> f64 {
        self.mode.ln_lambda(self.delta)
    }
    fn abs_bias(&self) -> f64 {
        self.model.effective_bias().abs()
    }
    fn log_lipschitz_link(&self) -> Option<f64> {
        self.model.link().log_lipschitz()
    }
}

/// Probabilities above one are accepted up to 3 so that `ln(3/δ)` stays
/// positive; such statements are vacuous but the formulas remain defined.
fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 3.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta {delta} not in (0, 3)")))
    }
}

/// Why a residual does not apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    BiasNonzero,
    LogLinkNotLipschitz,
    NotLogistic,
    PExceedZero,
    NonCentralInput,
    ModeUnsupported,
    UnboundedLoss,
    NumericalFailure,
}

impl Reason {
    pub fn message(self) -> &'static str {
        match self {
            Reason::BiasNonzero => "requires zero effective bias",
            Reason::LogLinkNotLipschitz => "log-link not Lipschitz",
            Reason::NotLogistic => "requires the logistic link",
            Reason::PExceedZero => "P(T ≥ |bias|) is zero",
            Reason::NonCentralInput => "requires centered inputs",
            Reason::ModeUnsupported => "not available in this mode",
            Reason::UnboundedLoss => "loss is unbounded on Gaussian inputs",
            Reason::NumericalFailure => "a scalar functional could not be evaluated",
        }
    }
}

mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Outcome of one residual evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Applicable {
        /// `+∞` (serialized as null) when only the logarithm is representable.
        #[serde(with = "nullable")]
        value: f64,
        log_value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    Inapplicable {
        reason: Reason,
        message: String,
    },
}

impl Outcome {
    fn from_log(log_value: f64, detail: Option<String>) -> Self {
        Outcome::Applicable {
            value: log_value.exp(),
            log_value,
            detail,
        }
    }

    fn inapplicable(reason: Reason) -> Self {
        Outcome::Inapplicable {
            reason,
            message: reason.message().to_string(),
        }
    }

    fn failed(err: &Error) -> Self {
        Outcome::Inapplicable {
            reason: Reason::NumericalFailure,
            message: err.to_string(),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Outcome::Applicable { value, .. } => Some(*value),
            Outcome::Inapplicable { .. } => None,
        }
    }

    pub fn log_value(&self) -> Option<f64> {
        match self {
            Outcome::Applicable { log_value, .. } => Some(*log_value),
            Outcome::Inapplicable { .. } => None,
        }
    }

    pub fn reason(&self) -> Option<Reason> {
        match self {
            Outcome::Applicable { .. } => None,
            Outcome::Inapplicable { reason, .. } => Some(*reason),
        }
    }
}

/// Model functionals used by the residuals, as logarithms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub theta0_eff: f64,
    pub signal_sd: f64,
    /// `ln M_X(θ₁) = σ²/2`.
    pub ln_mgf: f64,
    pub ln_mgf_num: Option<f64>,
    pub ln_mgf_num_double: Option<f64>,
    pub ln_mgf_den: Option<f64>,
    pub ln_tilde_m_inverse: Option<f64>,
    pub p_exceed: f64,
    /// Set when `p_exceed` used the degenerate-corner convention.
    pub p_exceed_convention: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl Functionals {
    pub fn compute(model: &ModelSpec) -> Self {
        let centered = model.centered();
        let g = model.link().log_lipschitz().unwrap_or(1.0);
        let mut errors = Vec::new();
        let mut keep = |r: Result<f64>| match r {
            Ok(v) => Some(v),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        };
        let ln_mgf_num = keep(analytics::ln_mgf_num(&centered, g));
        let ln_mgf_num_double = keep(analytics::ln_mgf_num(&centered, 2.0 * g));
        let ln_mgf_den = keep(analytics::ln_mgf_den(&centered, g));
        let ln_tilde_m_inverse = keep(analytics::ln_tilde_m_inverse(&centered));
        let sd = analytics::signal_sd(model);
        let theta0_eff = model.effective_bias();
        Functionals {
            theta0_eff,
            signal_sd: sd,
            ln_mgf: 0.5 * sd * sd,
            ln_mgf_num,
            ln_mgf_num_double,
            ln_mgf_den,
            ln_tilde_m_inverse,
            p_exceed: analytics::p_exceed(model),
            p_exceed_convention: sd == 0.0 && theta0_eff == 0.0,
            errors,
        }
    }

    fn need(v: Option<f64>, what: &'static str) -> Result<f64> {
        v.ok_or(Error::NonFinite(what))
    }
}

/// `√(L² · Σ e^{terms} · e^{prefactor} · λ / n)` from logarithms.
fn assemble(input: &BoundInput, ln_prefactor: f64, terms: &[f64]) -> f64 {
    let inner = ln_sum_exp(terms.iter().copied());
    let n = input.n as f64;
    if inner == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    input.ln_l() + 0.5 * (ln_prefactor + inner + input.ln_lambda() - n.ln())
}

fn central_guard(input: &BoundInput) -> Option<Outcome> {
    (!input.model.is_central()).then(|| Outcome::inapplicable(Reason::NonCentralInput))
}

const LN_2: f64 = std::f64::consts::LN_2;
const LN_8: f64 = 3.0 * std::f64::consts::LN_2;
const LN_HALF: f64 = -std::f64::consts::LN_2;

/// No-bias residual; requires zero effective bias.
pub fn residual_no_bias(input: &BoundInput) -> Outcome {
    if let Some(o) = central_guard(input) {
        return o;
    }
    if input.abs_bias() != 0.0 {
        return Outcome::inapplicable(Reason::BiasNonzero);
    }
    let k = &input.kconst;
    let ln = match input.mode {
        Mode::Poincare => assemble(input, 0.0, &[k.k_p.ln() + input.ln_rw2(), input.ln_rb2()]),
        Mode::Logsobolev => assemble(input, LN_2, &[k.k_ls.ln() + input.ln_rw2(), input.ln_rb2()]),
    };
    Outcome::from_log(ln, None)
}

fn small_bias_log(input: &BoundInput, g: f64, a: f64, ln_rb2: f64) -> f64 {
    let k = &input.kconst;
    let e = 2.0 * g * a;
    let half_ln_root = 0.5 * ln_expm1(e);
    match input.mode {
        Mode::Poincare => assemble(
            input,
            0.0,
            &[
                k.k_p.ln() + ln_add_exp(e, half_ln_root) + input.ln_rw2(),
                ln_add_exp(0.0, half_ln_root) + ln_rb2,
            ],
        ),
        Mode::Logsobolev => assemble(
            input,
            LN_2 + (3.0 + e).ln(),
            &[k.k_ls.ln() + ln_add_exp(LN_HALF, e) + input.ln_rw2(), ln_rb2],
        ),
    }
}

/// Small-bias residual; requires a link whose logarithm is Lipschitz.
pub fn residual_small_bias(input: &BoundInput) -> Outcome {
    if let Some(o) = central_guard(input) {
        return o;
    }
    let Some(g) = input.log_lipschitz_link() else {
        return Outcome::inapplicable(Reason::LogLinkNotLipschitz);
    };
    Outcome::from_log(small_bias_log(input, g, input.abs_bias(), input.ln_rb2()), None)
}

/// Non-central residual: small-bias shape at the effective bias with the
/// intercept slot widened to `‖μ‖²R_w² + R_b²`.
pub fn residual_noncentral(input: &BoundInput) -> Outcome {
    let Some(g) = input.log_lipschitz_link() else {
        return Outcome::inapplicable(Reason::LogLinkNotLipschitz);
    };
    if input.mode != Mode::Poincare {
        return Outcome::inapplicable(Reason::ModeUnsupported);
    }
    let ln_rb2 = ln_add_exp(input.model.mu_norm_sq().ln() + input.ln_rw2(), input.ln_rb2());
    let a = input.abs_bias();
    Outcome::from_log(
        small_bias_log(input, g, a, ln_rb2),
        Some(format!("theta0_eff={}", input.model.effective_bias())),
    )
}

fn large_bias_log(input: &BoundInput, f: &Functionals) -> f64 {
    let k = &input.kconst;
    let a = input.abs_bias();
    let ln_m = f.ln_mgf;
    let rb_term = LN_8 - a + ln_m + input.ln_rb2();
    match input.mode {
        Mode::Poincare => assemble(
            input,
            0.0,
            &[k.k_p.ln() + ln_expm1(LN_8 + 2.0 * ln_m) + input.ln_rw2(), rb_term],
        ),
        Mode::Logsobolev => assemble(
            input,
            (std::f64::consts::E + a).ln(),
            &[
                k.k_ls.ln() + ln_add_exp(LN_HALF, LN_8 + 2.0 * ln_m) + input.ln_rw2(),
                rb_term,
            ],
        ),
    }
}

pub fn residual_large_bias_with(input: &BoundInput, f: &Functionals) -> Outcome {
    if let Some(o) = central_guard(input) {
        return o;
    }
    if input.model.link() != crate::model::LinkKind::Logistic {
        return Outcome::inapplicable(Reason::NotLogistic);
    }
    Outcome::from_log(large_bias_log(input, f), None)
}

/// Large-bias residual; logistic link only.
pub fn residual_large_bias(input: &BoundInput) -> Outcome {
    residual_large_bias_with(input, &Functionals::compute(&input.model))
}

fn weak_signal_log(input: &BoundInput, f: &Functionals) -> Result<f64> {
    let k = &input.kconst;
    let a = input.abs_bias();
    let link = input.model.link();
    let n1 = Functionals::need(f.ln_mgf_num, "mgf_num")?;
    let n2 = Functionals::need(f.ln_mgf_num_double, "mgf_num")?;
    let gg = link.ln_value(a) + link.ln_value(-a);
    let rb_term = LN_8 + gg + n1 + input.ln_rb2();
    Ok(match input.mode {
        Mode::Poincare => assemble(
            input,
            0.0,
            &[
                k.k_p.ln() + ln_expm1((4.0f64).ln() + n1 + n2) + input.ln_rw2(),
                rb_term,
            ],
        ),
        Mode::Logsobolev => {
            let den = Functionals::need(f.ln_mgf_den, "mgf_den")?;
            let factor = 1.0 + 0.5 * (-link.ln_value(-a) - den);
            assemble(
                input,
                LN_2 + factor.ln(),
                &[k.k_ls.ln() + (5.0f64).ln() + n1 + n2 + input.ln_rw2(), rb_term],
            )
        }
    })
}

pub fn residual_weak_signal_with(input: &BoundInput, f: &Functionals) -> Outcome {
    if let Some(o) = central_guard(input) {
        return o;
    }
    if input.log_lipschitz_link().is_none() {
        return Outcome::inapplicable(Reason::LogLinkNotLipschitz);
    }
    match weak_signal_log(input, f) {
        Ok(ln) => Outcome::from_log(ln, None),
        Err(e) => Outcome::failed(&e),
    }
}

/// Weak-signal residual; requires a link whose logarithm is Lipschitz.
pub fn residual_weak_signal(input: &BoundInput) -> Outcome {
    residual_weak_signal_with(input, &Functionals::compute(&input.model))
}

fn strong_signal_log(input: &BoundInput, f: &Functionals) -> Result<Outcome> {
    let k = &input.kconst;
    let a = input.abs_bias();
    let ln_q = 5.0 * a + Functionals::need(f.ln_tilde_m_inverse, "tilde_m_inverse")?;
    let half_q = 0.5 * ln_q;
    Ok(match input.mode {
        Mode::Poincare => Outcome::from_log(
            assemble(
                input,
                0.0,
                &[
                    k.k_p.ln() + ln_sum_exp([0.0, ln_q, half_q]) + input.ln_rw2(),
                    ln_add_exp(0.0, half_q) + input.ln_rb2(),
                ],
            ),
            None,
        ),
        Mode::Logsobolev => {
            if f.p_exceed <= 0.0 {
                return Ok(Outcome::inapplicable(Reason::PExceedZero));
            }
            let pre = LN_2 + (std::f64::consts::E - f.p_exceed.ln()).ln();
            Outcome::from_log(
                assemble(
                    input,
                    pre,
                    &[
                        k.k_ls.ln() + ln_add_exp((1.25f64).ln(), ln_q) + input.ln_rw2(),
                        input.ln_rb2(),
                    ],
                ),
                f.p_exceed_convention
                    .then(|| "p_exceed uses the degenerate-corner convention 1/2".to_string()),
            )
        }
    })
}

pub fn residual_strong_signal_with(input: &BoundInput, f: &Functionals) -> Outcome {
    if let Some(o) = central_guard(input) {
        return o;
    }
    if input.model.link() != crate::model::LinkKind::Logistic {
        return Outcome::inapplicable(Reason::NotLogistic);
    }
    strong_signal_log(input, f).unwrap_or_else(|e| Outcome::failed(&e))
}

/// Strong-signal residual; logistic link only.
pub fn residual_strong_signal(input: &BoundInput) -> Outcome {
    residual_strong_signal_with(input, &Functionals::compute(&input.model))
}

/// Conjugate exponent `c* = c/(c − 1)`.
pub fn conjugate(c: f64) -> f64 {
    if c == 1.0 {
        f64::INFINITY
    } else if c.is_infinite() {
        1.0
    } else {
        c / (c - 1.0)
    }
}

/// `ln(x·y)` with `∞·0 = 0`.
fn ln_product(x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        f64::NEG_INFINITY
    } else {
        x.ln() + y.ln()
    }
}

/// Arguments of the generic route beyond the K-constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenericArgs {
    pub c: f64,
    pub lipschitz: f64,
    pub r_w: f64,
    pub r_b: f64,
    pub n: usize,
    pub delta: f64,
    pub mode: Mode,
}

/// Residual from the functional inequality with conjugate pair `(c, c*)`.
pub fn residual_generic(k: &KConstants, args: GenericArgs) -> Result<f64> {
    Ok(generic_log(k, args)?.exp())
}

fn generic_log(k: &KConstants, a: GenericArgs) -> Result<f64> {
    if a.c.is_nan() || a.c < 1.0 {
        return Err(Error::InvalidArgument(format!("c = {} must be ≥ 1", a.c)));
    }
    check_delta(a.delta)?;
    if a.n == 0 || a.lipschitz.is_nan() || a.lipschitz <= 0.0 {
        return Err(Error::InvalidArgument("invalid n or lipschitz".into()));
    }
    let ln_l2 = 2.0 * a.lipschitz.ln();
    let ln_rw2 = 2.0 * a.r_w.ln();
    let ln_chi = if a.c.is_infinite() {
        if k.k_chi2 != 0.0 {
            return Err(Error::InvalidArgument("c = ∞ requires K_χ² = 0".into()));
        }
        0.0
    } else {
        (1.0 + a.c * k.k_chi2).ln()
    };
    let z_term = k.k_p.ln() + ln_chi + ln_l2 + ln_rw2;
    let y_term = ln_product(conjugate(a.c), k.k_v * a.r_b * a.r_b) + ln_l2;
    let poincare = ln_add_exp(z_term, y_term);
    let ln_n = (a.n as f64).ln();
    Ok(match a.mode {
        Mode::Poincare => 0.5 * (poincare - ln_n) + (3.0 / a.delta).ln().ln(),
        Mode::Logsobolev => {
            let ent = (1.0 + 0.5 * k.k_u.ln()).ln() + poincare;
            let ls = ln_add_exp(ent, LN_2 + k.k_ls.ln() + ln_l2 + ln_rw2);
            0.5 * (LN_2 + ls - ln_n + Mode::Logsobolev.ln_lambda(a.delta))
        }
    })
}

/// Conjugate exponents searched by [`best_residual`].
pub fn c_grid(k: &KConstants) -> Vec<f64> {
    let mut grid: Vec<f64> = (-10..=10).map(|j| 1.0 + 2f64.powi(j)).collect();
    if k.k_chi2 == 0.0 {
        grid.push(f64::INFINITY);
    }
    grid
}

/// Generic route minimized over [`c_grid`].
pub fn residual_generic_best(input: &BoundInput) -> Outcome {
    if let Some(o) = central_guard(input) {
        return o;
    }
    let mut best: Option<(f64, f64)> = None;
    for c in c_grid(&input.kconst) {
        let args = GenericArgs {
            c,
            lipschitz: input.loss_lipschitz,
            r_w: input.constraints.r_w,
            r_b: input.constraints.r_b,
            n: input.n,
            delta: input.delta,
            mode: input.mode,
        };
        if let Ok(v) = generic_log(&input.kconst, args) {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((c, v));
            }
        }
    }
    match best {
        Some((c, v)) => Outcome::from_log(v, Some(format!("c={c}"))),
        None => Outcome::inapplicable(Reason::NumericalFailure),
    }
}

/// Expectation bound `2L(R_w√tr E[XXᵀ] + R_b)/√n`.
pub fn rademacher_bound(l: f64, r_w: f64, r_b: f64, trace_second_moment: f64, n: usize) -> f64 {
    2.0 * l * (r_w * trace_second_moment.sqrt() + r_b) / (n as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    pub mode: Mode,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Best {
    pub name: String,
    pub mode: Mode,
    #[serde(with = "nullable")]
    pub residual: f64,
    pub log_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInput,
    pub functionals: Functionals,
    pub entries: Vec<BoundEntry>,
    pub rademacher_expectation_bound: f64,
    /// Bounded-differences comparison; reported only for information.
    pub mcdiarmid: Outcome,
    pub best: Option<Best>,
}

impl BoundReport {
    pub fn entry(&self, name: &str, mode: Mode) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.name == name && e.mode == mode)
    }

    /// Best entry restricted to one mode.
    pub fn best_in_mode(&self, mode: Mode) -> Option<Best> {
        select_best(self.entries.iter().filter(|e| e.mode == mode))
    }
}

fn select_best<'a, I: Iterator<Item = &'a BoundEntry>>(entries: I) -> Option<Best> {
    let mut best: Option<Best> = None;
    for e in entries {
        if let Outcome::Applicable { value, log_value, .. } = e.outcome {
            if best.as_ref().is_none_or(|b| log_value < b.log_residual) {
                best = Some(Best {
                    name: e.name.clone(),
                    mode: e.mode,
                    residual: value,
                    log_residual: log_value,
                });
            }
        }
    }
    best
}

/// Names of the residual entries in report order.
pub const ENTRY_NAMES: [&str; 7] = [
    "no_bias",
    "small_bias",
    "large_bias",
    "weak_signal",
    "strong_signal",
    "noncentral",
    "generic",
];

/// Evaluate every residual in both modes and pick the smallest.
pub fn best_residual(input: &BoundInput) -> Result<BoundReport> {
    input.validate()?;
    let f = Functionals::compute(&input.model);
    Ok(report_with(input, f))
}

/// Same as [`best_residual`] with precomputed functionals, for δ sweeps.
pub fn report_with(input: &BoundInput, f: Functionals) -> BoundReport {
    let mut entries = Vec::new();
    for mode in Mode::BOTH {
        let inp = input.with_mode(mode);
        for name in ENTRY_NAMES {
            let outcome = match name {
                "no_bias" => residual_no_bias(&inp),
                "small_bias" => residual_small_bias(&inp),
                "large_bias" => residual_large_bias_with(&inp, &f),
                "weak_signal" => residual_weak_signal_with(&inp, &f),
                "strong_signal" => residual_strong_signal_with(&inp, &f),
                "noncentral" => residual_noncentral(&inp),
                _ => residual_generic_best(&inp),
            };
            entries.push(BoundEntry {
                name: name.to_string(),
                mode,
                outcome,
            });
        }
    }
    let best = select_best(entries.iter());
    BoundReport {
        rademacher_expectation_bound: rademacher_bound(
            input.loss_lipschitz,
            input.constraints.r_w,
            input.constraints.r_b,
            input.model.second_moment_trace(),
            input.n,
        ),
        mcdiarmid: Outcome::inapplicable(Reason::UnboundedLoss),
        inputs: input.clone(),
        functionals: f,
        entries,
        best,
    }
}
