//! The data-generating law and the hypothesis class.
//!
//! Inputs are `X ~ N(μ, Σ)` and labels satisfy
//! `P(Y = y | X) = g(y(⟨X, θ₁⟩ + θ₀))` for a link `g` with `g(t) + g(−t) = 1`.
//! The label uses the shifted input, so a non-central model behaves like a
//! central one with bias `θ₀ + ⟨μ, θ₁⟩`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};
use crate::special::{ln_normal_cdf, ln_sigmoid, normal_cdf, sigmoid, softplus};

/// Covariance of the input law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Covariance {
    Spherical(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

/// Link function `g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Logistic,
    Probit,
}

impl LinkKind {
    pub fn value(self, t: f64) -> f64 {
        match self {
            LinkKind::Logistic => sigmoid(t),
            LinkKind::Probit => normal_cdf(t),
        }
    }

    pub fn ln_value(self, t: f64) -> f64 {
        match self {
            LinkKind::Logistic => ln_sigmoid(t),
            LinkKind::Probit => ln_normal_cdf(t),
        }
    }

    /// `ln g′(t)`.
    pub fn ln_density(self, t: f64) -> f64 {
        match self {
            LinkKind::Logistic => ln_sigmoid(t) + ln_sigmoid(-t),
            LinkKind::Probit => -0.5 * t * t - crate::special::LN_SQRT_2PI,
        }
    }

    /// Lipschitz constant `G` of `log g`, when it exists.
    pub fn log_lipschitz(self) -> Option<f64> {
        match self {
            LinkKind::Logistic => Some(1.0),
            LinkKind::Probit => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Logistic => "logistic",
            LinkKind::Probit => "probit",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelSpecRepr {
    dim: usize,
    covariance: Covariance,
    theta1: Vec<f64>,
    theta0: f64,
    #[serde(default)]
    mu: Vec<f64>,
    link: LinkKind,
}

/// Validated model. Construct with [`ModelSpec::new`] or deserialize.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecRepr", into = "ModelSpecRepr")]
pub struct ModelSpec {
    dim: usize,
    covariance: Covariance,
    theta1: Vec<f64>,
    theta0: f64,
    mu: Vec<f64>,
    link: LinkKind,
    /// Lower Cholesky factor for the full case.
    factor: Option<DMatrix<f64>>,
}

impl PartialEq for ModelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.covariance == other.covariance
            && self.theta1 == other.theta1
            && self.theta0 == other.theta0
            && self.mu == other.mu
            && self.link == other.link
    }
}

impl TryFrom<ModelSpecRepr> for ModelSpec {
    type Error = Error;

    fn try_from(r: ModelSpecRepr) -> Result<Self> {
        let mu = if r.mu.is_empty() { None } else { Some(r.mu) };
        ModelSpec::new(r.dim, r.covariance, r.theta1, r.theta0, mu, r.link)
    }
}

impl From<ModelSpec> for ModelSpecRepr {
    fn from(m: ModelSpec) -> Self {
        ModelSpecRepr {
            dim: m.dim,
            covariance: m.covariance,
            theta1: m.theta1,
            theta0: m.theta0,
            mu: m.mu,
            link: m.link,
        }
    }
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl ModelSpec {
    pub fn new(
        dim: usize,
        covariance: Covariance,
        theta1: Vec<f64>,
        theta0: f64,
        mu: Option<Vec<f64>>,
        link: LinkKind,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dim must be positive".into()));
        }
        if theta1.len() != dim {
            return Err(Error::InvalidModel(format!(
                "theta1 has length {}, expected {dim}",
                theta1.len()
            )));
        }
        let mu = mu.unwrap_or_else(|| vec![0.0; dim]);
        if mu.len() != dim {
            return Err(Error::InvalidModel(format!(
                "mu has length {}, expected {dim}",
                mu.len()
            )));
        }
        if !finite(&theta1) || !finite(&mu) || !theta0.is_finite() {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        let factor = match &covariance {
            Covariance::Spherical(s) => {
                if !(s.is_finite() && *s > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                None
            }
            Covariance::Diagonal(v) => {
                if v.len() != dim {
                    return Err(Error::InvalidModel(format!(
                        "diagonal covariance has length {}, expected {dim}",
                        v.len()
                    )));
                }
                if !v.iter().all(|x| x.is_finite() && *x > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                None
            }
            Covariance::Full(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::InvalidModel(format!(
                        "full covariance must be {dim}x{dim}"
                    )));
                }
                let m = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
                if !finite(m.as_slice()) {
                    return Err(Error::InvalidModel("non-finite covariance".into()));
                }
                let scale = m.amax().max(f64::MIN_POSITIVE);
                for i in 0..dim {
                    for j in 0..i {
                        if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                            return Err(Error::InvalidModel("covariance is not symmetric".into()));
                        }
                    }
                }
                let chol = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
                Some(chol.l())
            }
        };
        Ok(ModelSpec {
            dim,
            covariance,
            theta1,
            theta0,
            mu,
            link,
            factor,
        })
    }

    /// Spherical central model, the common case in tests and presets.
    pub fn spherical(s: f64, theta1: Vec<f64>, theta0: f64, link: LinkKind) -> Result<Self> {
        let d = theta1.len();
        ModelSpec::new(d, Covariance::Spherical(s), theta1, theta0, None, link)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }
    pub fn theta1(&self) -> &[f64] {
        &self.theta1
    }
    pub fn theta0(&self) -> f64 {
        self.theta0
    }
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    pub fn link(&self) -> LinkKind {
        self.link
    }

    pub fn is_central(&self) -> bool {
        self.mu.iter().all(|&m| m == 0.0)
    }

    /// `θ₀ + ⟨μ, θ₁⟩`.
    pub fn effective_bias(&self) -> f64 {
        self.theta0 + dot(&self.mu, &self.theta1)
    }

    pub fn mu_norm_sq(&self) -> f64 {
        dot(&self.mu, &self.mu)
    }

    /// Same model with a different bias.
    pub fn with_theta0(&self, theta0: f64) -> Self {
        let mut m = self.clone();
        m.theta0 = theta0;
        m
    }

    /// Central copy whose bias is the effective bias.
    pub fn centered(&self) -> Self {
        let mut m = self.clone();
        m.theta0 = self.effective_bias();
        m.mu = vec![0.0; self.dim];
        m
    }

    /// `Σv`.
    pub fn cov_apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.covariance {
            Covariance::Spherical(s) => v.iter().map(|x| s * x).collect(),
            Covariance::Diagonal(d) => v.iter().zip(d).map(|(x, s)| s * x).collect(),
            Covariance::Full(rows) => rows.iter().map(|r| dot(r, v)).collect(),
        }
    }

    /// `⟨u, Σv⟩`.
    pub fn cov_form(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(u, &self.cov_apply(v))
    }

    pub fn cov_trace(&self) -> f64 {
        match &self.covariance {
            Covariance::Spherical(s) => s * self.dim as f64,
            Covariance::Diagonal(d) => d.iter().sum(),
            Covariance::Full(rows) => (0..self.dim).map(|i| rows[i][i]).sum(),
        }
    }

    /// Dense `Σ`.
    pub fn cov_matrix(&self) -> DMatrix<f64> {
        match &self.covariance {
            Covariance::Spherical(s) => DMatrix::identity(self.dim, self.dim) * *s,
            Covariance::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Covariance::Full(rows) => DMatrix::from_fn(self.dim, self.dim, |i, j| rows[i][j]),
        }
    }

    pub fn cov_lambda_max(&self) -> f64 {
        match &self.covariance {
            Covariance::Spherical(s) => *s,
            Covariance::Diagonal(d) => d.iter().copied().fold(0.0, f64::max),
            Covariance::Full(_) => max_eigenvalue(self.cov_matrix()),
        }
    }

    /// `E[XXᵀ] = Σ + μμᵀ`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let mu = DVector::from_column_slice(&self.mu);
        self.cov_matrix() + &mu * mu.transpose()
    }

    /// `tr E[XXᵀ]`.
    pub fn second_moment_trace(&self) -> f64 {
        self.cov_trace() + self.mu_norm_sq()
    }

    /// Draw `X = μ + Lξ` into `out`.
    pub(crate) fn draw_input<R: Rng>(&self, rng: &mut R, xi: &mut [f64], out: &mut [f64]) {
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        match (&self.covariance, &self.factor) {
            (Covariance::Spherical(s), _) => {
                let r = s.sqrt();
                for k in 0..self.dim {
                    out[k] = self.mu[k] + r * xi[k];
                }
            }
            (Covariance::Diagonal(d), _) => {
                for k in 0..self.dim {
                    out[k] = self.mu[k] + d[k].sqrt() * xi[k];
                }
            }
            (Covariance::Full(_), Some(l)) => {
                for i in 0..self.dim {
                    let mut acc = self.mu[i];
                    for j in 0..=i {
                        acc += l[(i, j)] * xi[j];
                    }
                    out[i] = acc;
                }
            }
            (Covariance::Full(_), None) => unreachable!("full covariance without factor"),
        }
    }
}

pub(crate) fn max_eigenvalue(m: DMatrix<f64>) -> f64 {
    m.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A scalar margin loss supplied by the caller.
pub trait ScalarLoss: Send + Sync + fmt::Debug {
    fn value(&self, t: f64) -> f64;
    fn subgradient(&self, t: f64) -> f64;
    /// Second derivative where it exists; enables the exact curvature term
    /// in the population-risk gradient.
    fn second_derivative(&self, _t: f64) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug)]
pub enum LossKind {
    Logistic,
    Hinge,
    Custom(Arc<dyn ScalarLoss>),
}

/// Loss `ℓ` with its Lipschitz constant `L`.
#[derive(Clone, Debug)]
pub struct LossSpec {
    pub kind: LossKind,
    pub lipschitz: f64,
}

impl LossSpec {
    pub fn logistic() -> Self {
        LossSpec {
            kind: LossKind::Logistic,
            lipschitz: 1.0,
        }
    }

    pub fn hinge() -> Self {
        LossSpec {
            kind: LossKind::Hinge,
            lipschitz: 1.0,
        }
    }

    pub fn custom(loss: Arc<dyn ScalarLoss>, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::InvalidArgument("lipschitz must be positive".into()));
        }
        Ok(LossSpec {
            kind: LossKind::Custom(loss),
            lipschitz,
        })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LossKind::Logistic => "logistic",
            LossKind::Hinge => "hinge",
            LossKind::Custom(_) => "custom",
        }
    }

    /// Differentiable everywhere; custom losses qualify when they report a
    /// second derivative.
    pub fn is_smooth(&self) -> bool {
        match &self.kind {
            LossKind::Logistic => true,
            LossKind::Hinge => false,
            LossKind::Custom(f) => f.second_derivative(0.0).is_some(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.kind {
            LossKind::Logistic => softplus(-t),
            LossKind::Hinge => (1.0 - t).max(0.0),
            LossKind::Custom(f) => f.value(t),
        }
    }

    /// A subgradient; the hinge kink at `t = 1` returns 0.
    pub fn subgradient(&self, t: f64) -> f64 {
        match &self.kind {
            LossKind::Logistic => -sigmoid(-t),
            LossKind::Hinge => {
                if t < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::Custom(f) => f.subgradient(t),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LossRepr {
    kind: String,
    lipschitz: f64,
}

impl Serialize for LossSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LossRepr {
            kind: self.name().to_string(),
            lipschitz: self.lipschitz,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LossSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = LossRepr::deserialize(d)?;
        let kind = match r.kind.as_str() {
            "logistic" => LossKind::Logistic,
            "hinge" => LossKind::Hinge,
            other => {
                return Err(D::Error::custom(format!(
                    "loss kind `{other}` cannot be loaded from a file"
                )))
            }
        };
        if !(r.lipschitz.is_finite() && r.lipschitz > 0.0) {
            return Err(D::Error::custom("lipschitz must be positive"));
        }
        Ok(LossSpec {
            kind,
            lipschitz: r.lipschitz,
        })
    }
}

/// Hypothesis ball `{‖w‖ ≤ r_w} × [−r_b, r_b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub r_w: f64,
    pub r_b: f64,
}

impl ConstraintSet {
    pub fn new(r_w: f64, r_b: f64) -> Result<Self> {
        if !(r_w >= 0.0 && r_b >= 0.0 && r_w.is_finite() && r_b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "radii must be finite and nonnegative, got ({r_w}, {r_b})"
            )));
        }
        Ok(ConstraintSet { r_w, r_b })
    }

    /// Nearest feasible point: radial clip of `w`, clamp of `b`.
    pub fn project(&self, w: &mut [f64], b: &mut f64) {
        let nw = norm(w);
        if nw > self.r_w {
            let s = if nw > 0.0 { self.r_w / nw } else { 0.0 };
            w.iter_mut().for_each(|x| *x *= s);
        }
        *b = b.clamp(-self.r_b, self.r_b);
    }

    pub fn contains(&self, w: &[f64], b: f64, rel: f64) -> bool {
        norm(w) <= self.r_w * (1.0 + rel) + f64::MIN_POSITIVE && b.abs() <= self.r_b * (1.0 + rel)
    }
}

/// `n` labelled samples, inputs stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<i8>,
    pub master_seed: u64,
}

impl Dataset {
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<i8>, master_seed: u64) -> Result<Self> {
        let n = y.len();
        if dim == 0 || x.len() != n * dim {
            return Err(Error::InvalidArgument(format!(
                "x has {} entries, expected {n}x{dim}",
                x.len()
            )));
        }
        if y.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::InvalidArgument("labels must be ±1".into()));
        }
        if !finite(&x) {
            return Err(Error::InvalidArgument("non-finite input".into()));
        }
        Ok(Dataset {
            n,
            dim,
            x,
            y,
            master_seed,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    /// CSV with header `x1..xd,y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        wr.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for i in 0..self.n {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| format!("{v:e}")).collect();
            rec.push(self.y[i].to_string());
            wr.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Pairs `(Zᵢ, Yᵢ)` with `Zᵢ = Yᵢ·Xᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelWeighted {
    pub n: usize,
    pub dim: usize,
    pub z: Vec<f64>,
    pub y: Vec<i8>,
}

impl LabelWeighted {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.dim..(i + 1) * self.dim]
    }

    /// Inverse map; `Yᵢ² = 1` makes it the same multiplication.
    pub fn to_inputs(&self) -> Vec<f64> {
        weight_rows(&self.z, &self.y, self.dim)
    }
}

fn weight_rows(x: &[f64], y: &[i8], dim: usize) -> Vec<f64> {
    x.chunks(dim)
        .zip(y)
        .flat_map(|(row, &yi)| row.iter().map(move |v| f64::from(yi) * v))
        .collect()
}

pub fn to_label_weighted(data: &Dataset) -> LabelWeighted {
    LabelWeighted {
        n: data.n,
        dim: data.dim,
        z: weight_rows(&data.x, &data.y, data.dim),
        y: data.y.clone(),
    }
}

/// Sample `n` i.i.d. pairs from `model`; a pure function of `(model, n, seed)`.
pub fn sample_dataset(model: &ModelSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let d = model.dim;
    let mut rng = stream_rng(seed, stream::DATA);
    let mut x = vec![0.0; n * d];
    let mut y = vec![0i8; n];
    let mut xi = vec![0.0; d];
    for i in 0..n {
        let row = &mut x[i * d..(i + 1) * d];
        model.draw_input(&mut rng, &mut xi, row);
        let p = model.link.value(dot(row, &model.theta1) + model.theta0);
        let u: f64 = rng.random();
        y[i] = if u < p { 1 } else { -1 };
    }
    Ok(Dataset {
        n,
        dim: d,
        x,
        y,
        master_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn loss_reference_values() {
        let lg = LossSpec::logistic();
        let h = LossSpec::hinge();
        assert_relative_eq!(lg.value(0.0), 2f64.ln(), max_relative = 1e-15);
        assert_eq!(h.value(2.0), 0.0);
        assert_eq!(h.value(0.0), 1.0);
        assert!((lg.value(-100.0) - 100.0).abs() / 100.0 < 1e-12);
        assert_eq!(h.subgradient(1.0), 0.0);
        assert_eq!(h.subgradient(0.5), -1.0);
    }

    #[test]
    fn link_values() {
        assert_eq!(LinkKind::Logistic.value(0.0), 0.5);
        assert_eq!(LinkKind::Probit.value(0.0), 0.5);
        assert!((LinkKind::Probit.value(1.959964) - 0.975).abs() < 1e-6);
        for k in -20..=20 {
            let t = k as f64;
            for g in [LinkKind::Logistic, LinkKind::Probit] {
                assert!((g.value(t) + g.value(-t) - 1.0).abs() < 1e-15);
                assert_relative_eq!(g.ln_value(t).exp(), g.value(t), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn rejects_bad_models() {
        let bad = ModelSpec::new(
            2,
            Covariance::Full(vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
            vec![0.0, 0.0],
            0.0,
            None,
            LinkKind::Logistic,
        );
        assert_eq!(bad.unwrap_err(), Error::NotPositiveDefinite);
        assert!(ModelSpec::spherical(-1.0, vec![1.0], 0.0, LinkKind::Logistic).is_err());
        assert!(ModelSpec::new(2, Covariance::Spherical(1.0), vec![1.0], 0.0, None, LinkKind::Probit).is_err());
    }

    #[test]
    fn json_shape() {
        let m = ModelSpec::new(
            2,
            Covariance::Diagonal(vec![1.0, 4.0]),
            vec![1.0, 1.0],
            0.5,
            None,
            LinkKind::Probit,
        )
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"dim":2,"covariance":{"kind":"diagonal","value":[1.0,4.0]},"theta1":[1.0,1.0],"theta0":0.5,"mu":[0.0,0.0],"link":"probit"}"#
        );
        let back: ModelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let no_mu: ModelSpec = serde_json::from_str(
            r#"{"dim":1,"covariance":{"kind":"spherical","value":2.0},"theta1":[1.0],"theta0":0.0,"link":"logistic"}"#,
        )
        .unwrap();
        assert_eq!(no_mu.mu(), &[0.0]);
    }

    #[test]
    fn label_weighting_is_an_involution() {
        let data = Dataset::new(2, vec![1.0, 2.0, 3.0, 4.0], vec![-1, 1], 0).unwrap();
        let lw = to_label_weighted(&data);
        assert_eq!(lw.row(0), &[-1.0, -2.0]);
        assert_eq!(lw.row(1), &[3.0, 4.0]);
        assert_eq!(lw.to_inputs(), data.x);
    }

    #[test]
    fn full_covariance_sampling_matches_moments() {
        let m = ModelSpec::new(
            2,
            Covariance::Full(vec![vec![2.0, 0.6], vec![0.6, 1.0]]),
            vec![0.0, 0.0],
            0.0,
            Some(vec![1.0, -1.0]),
            LinkKind::Logistic,
        )
        .unwrap();
        let n = 200_000;
        let d = sample_dataset(&m, n, 11).unwrap();
        let (mut s0, mut s1, mut c01) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let r = d.row(i);
            s0 += r[0];
            s1 += r[1];
            c01 += (r[0] - 1.0) * (r[1] + 1.0);
        }
        let nf = n as f64;
        assert!((s0 / nf - 1.0).abs() < 0.02);
        assert!((s1 / nf + 1.0).abs() < 0.02);
        assert!((c01 / nf - 0.6).abs() < 0.02);
    }

    #[test]
    fn degenerate_signal_label_rate() {
        let m = ModelSpec::spherical(1.0, vec![0.0], 10.0, LinkKind::Logistic).unwrap();
        let n = 200_000;
        let d = sample_dataset(&m, n, 3).unwrap();
        let p = d.y.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
        let g = sigmoid(10.0);
        let se = (g * (1.0 - g) / n as f64).sqrt();
        assert!((p - g).abs() <= 3.0 * se + 1.0 / n as f64, "p={p}");
    }

    #[test]
    fn projection() {
        let c = ConstraintSet::new(1.0, 0.5).unwrap();
        let mut w = vec![3.0, 4.0];
        let mut b = -2.0;
        c.project(&mut w, &mut b);
        assert_relative_eq!(norm(&w), 1.0);
        assert_eq!(b, -0.5);
        let z = ConstraintSet::new(0.0, 0.0).unwrap();
        let mut w = vec![0.0, 0.0];
        let mut b = 0.3;
        z.project(&mut w, &mut b);
        assert_eq!((w, b), (vec![0.0, 0.0], 0.0));
    }
}
