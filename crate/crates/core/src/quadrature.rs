//! Quadrature against the standard normal law.
//!
//! Smooth integrands go through Gauss–Hermite rules (probabilists'
//! normalization, weights sum to one). Integrands with kinks or with mass far
//! from the origin go through composite Gauss–Legendre panels in log space.
//! Every evaluation is run at two resolutions and must agree to `REL_TOL`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{ln_sum_exp, LN_SQRT_2PI};

pub const DEFAULT_ORDER: usize = 120;
pub const MAX_ORDER: usize = 500;
pub const REL_TOL: f64 = 1e-9;

const PANEL_NODES: usize = 20;
const TAIL_SDS: f64 = 40.0;

/// Nodes and weights for `E f(ξ)`, `ξ ~ N(0,1)`.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson-style shifts. `off[i]` couples `i` and `i+1`.
fn tridiagonal_eigenvalues(diag: &mut [f64], off: &[f64]) -> Result<()> {
    let n = diag.len();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                return Err(Error::QuadratureNonConvergence {
                    what: "tridiagonal eigensolve",
                    coarse: diag[l],
                    fine: e[l],
                });
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Orthonormal Hermite recurrence at `x` up to degree `m`.
/// Returns `(p_m, p_{m-1}, ln Σ_{k<m} p_k²)`, with the two values sharing a
/// common rescaling so only their ratio is meaningful for large `x`.
fn hermite_recurrence(x: f64, m: usize) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum = 0.0;
    let mut ln_scale = 0.0;
    for k in 0..m {
        sum += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > 1e100 {
            cur *= 1e-100;
            prev *= 1e-100;
            sum *= 1e-200;
            ln_scale += 200.0 * std::f64::consts::LN_10;
        }
    }
    (cur, prev, sum.ln() + ln_scale)
}

/// Gauss–Hermite rule of the given order for the standard normal weight.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::QuadratureOrder(order));
    }
    let m = order;
    let mut nodes = vec![0.0; m];
    let off: Vec<f64> = (1..m).map(|k| (k as f64).sqrt()).collect();
    tridiagonal_eigenvalues(&mut nodes, &off)?;
    nodes.sort_by(|a, b| a.total_cmp(b));
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (pm, pm1, _) = hermite_recurrence(*x, m);
            if pm1 == 0.0 {
                break;
            }
            *x -= pm / ((m as f64).sqrt() * pm1);
        }
    }
    for i in 0..m / 2 {
        let a = 0.5 * (nodes[m - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[m - 1 - i] = a;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| (-hermite_recurrence(x, m).2).exp())
        .collect();
    Ok(QuadratureRule {
        order: m,
        nodes,
        weights,
    })
}

/// Shared immutable Gauss–Hermite rule.
pub fn gauss_hermite_cached(order: usize) -> Result<Arc<QuadratureRule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("quadrature cache poisoned").get(&order) {
        return Ok(Arc::clone(r));
    }
    let rule = Arc::new(gauss_hermite(order)?);
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .insert(order, Arc::clone(&rule));
    Ok(rule)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; p];
    let mut w = vec![0.0; p];
    let pf = p as f64;
    for i in 0..p {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (pf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=p {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pn1) = if p == 1 { (z, 1.0) } else { (p1, p0) };
            dp = pf * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

type Rule = Arc<(Vec<f64>, Vec<f64>)>;

fn legendre_cached(p: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    Arc::clone(guard.entry(p).or_insert_with(|| Arc::new(gauss_legendre(p))))
}

/// Where a 1-D integrand `f(t)` needs care, in the units of `t`.
#[derive(Clone, Debug, Default)]
pub struct Hints {
    /// Non-smooth points; their presence skips the Gauss–Hermite path.
    pub kinks: Vec<f64>,
    /// Smooth but sharp features (transitions) that panels should resolve.
    pub features: Vec<f64>,
    /// Points where `f(t)φ(t/s)` concentrates when away from the origin.
    pub centers: Vec<f64>,
}

fn ln_gh(rule: &QuadratureRule, s: f64, lnf: &dyn Fn(f64) -> f64) -> f64 {
    ln_sum_exp(
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&x, &w)| w.ln() + lnf(s * x)),
    )
}

fn breakpoints(s: f64, hints: &Hints) -> Vec<f64> {
    let to_x = |t: &f64| t / s;
    let centers: Vec<f64> = hints.centers.iter().map(to_x).collect();
    let lo = centers.iter().fold(-TAIL_SDS, |a, &c| a.min(c - TAIL_SDS));
    let hi = centers.iter().fold(TAIL_SDS, |a, &c| a.max(c + TAIL_SDS));
    let mut pts: Vec<f64> = Vec::new();
    let mut k = lo.floor();
    while k <= hi.ceil() {
        pts.push(k);
        k += 1.0;
    }
    for f in hints.kinks.iter().chain(&hints.features).map(to_x) {
        if f.is_finite() && f > lo && f < hi {
            pts.push(f);
            for j in 0..=30 {
                let h = 0.5f64.powi(j);
                pts.push(f - h);
                pts.push(f + h);
            }
        }
    }
    pts.retain(|p| *p >= lo.floor() && *p <= hi.ceil());
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * a.abs().max(1.0));
    pts
}

fn ln_panels(pts: &[f64], s: f64, p: usize, lnf: &dyn Fn(f64) -> f64) -> f64 {
    let gl = legendre_cached(p);
    let (gx, gw) = (&gl.0, &gl.1);
    let mut terms = Vec::with_capacity(pts.len() * p);
    for win in pts.windows(2) {
        let (a, b) = (win[0], win[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in gx.iter().zip(gw) {
            let x = mid + half * xi;
            terms.push((wi * half).ln() - 0.5 * x * x - LN_SQRT_2PI + lnf(s * x));
        }
    }
    ln_sum_exp(terms)
}

fn agree(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    if !(a.is_finite() && b.is_finite()) {
        return false;
    }
    (a - b).abs() <= REL_TOL
}

/// `ln E f(T)`, `T ~ N(0, s²)`, for positive `f` given as `ln f`.
///
/// `s = 0` is the point mass at zero.
pub fn ln_expect_normal(
    s: f64,
    lnf: &dyn Fn(f64) -> f64,
    hints: &Hints,
    what: &'static str,
) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale {s} for {what}")));
    }
    if s == 0.0 {
        return Ok(lnf(0.0));
    }
    if hints.kinks.is_empty() {
        let coarse = ln_gh(&*gauss_hermite_cached(DEFAULT_ORDER)?, s, lnf);
        let fine = ln_gh(&*gauss_hermite_cached(2 * DEFAULT_ORDER)?, s, lnf);
        if agree(coarse, fine) {
            return Ok(fine);
        }
    }
    let pts = breakpoints(s, hints);
    let coarse = ln_panels(&pts, s, PANEL_NODES, lnf);
    let fine = ln_panels(&pts, s, 2 * PANEL_NODES, lnf);
    if agree(coarse, fine) {
        Ok(fine)
    } else {
        Err(Error::QuadratureNonConvergence {
            what,
            coarse: coarse.exp(),
            fine: fine.exp(),
        })
    }
}
