use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::KConstants;
use crate::error::{Error, Result};
use crate::model::{dot, sample_dataset, to_label_weighted, LabelWeighted, ModelSpec};
use crate::rng::{stream, stream_rng};

/// `f(z, y) = a·tanh(⟨w, z⟩ + b·y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub a: f64,
    pub w: Vec<f64>,
    pub b: f64,
}

impl TestFunction {
    fn eval(&self, z: &[f64], y: f64) -> (f64, f64) {
        let t = (dot(&self.w, z) + self.b * y).tanh();
        (self.a * t, self.a * (1.0 - t * t))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FICheckOptions {
    pub functions: usize,
    pub samples: usize,
    pub batches: usize,
    /// Splitting parameter `c`; `c* = c/(c − 1)`.
    pub c: f64,
    pub seed: u64,
}

impl Default for FICheckOptions {
    fn default() -> Self {
        FICheckOptions { functions: 50, samples: 100_000, batches: 20, c: 2.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FIRow {
    pub index: usize,
    pub variance: f64,
    pub energy_p: f64,
    /// `Var / E Γ_P`, zero when both vanish.
    pub ratio_p: f64,
    pub se_p: f64,
    pub pass_p: bool,
    pub entropy: f64,
    pub energy_ls: f64,
    /// `Ent(f²) / (2 E Γ_LS)`.
    pub ratio_ls: f64,
    pub se_ls: f64,
    pub pass_ls: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FICheckResult {
    pub rows: Vec<FIRow>,
    pub c: f64,
    pub c_star: f64,
}

impl FICheckResult {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass_p && r.pass_ls)
    }

    pub fn max_ratio_p(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio_p).fold(0.0, f64::max)
    }

    pub fn max_ratio_ls(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio_ls).fold(0.0, f64::max)
    }
}

/// Random family with unit-scale amplitudes, slopes and offsets.
pub fn random_test_functions(dim: usize, count: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = stream_rng(seed, stream::AUX);
    (0..count)
        .map(|_| {
            let mut w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let len = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let r = rng.random_range(0.1..2.0);
            w.iter_mut().for_each(|v| *v *= r / len);
            TestFunction { a: rng.random_range(0.5..2.0), w, b: StandardNormal.sample(&mut rng) }
        })
        .collect()
}

#[derive(Clone, Copy, Default)]
struct Sums {
    n: f64,
    f: f64,
    f2: f64,
    f2_ln: f64,
    grad_z: f64,
    gamma_y: f64,
}

impl Sums {
    fn variance(&self) -> f64 {
        (self.f2 / self.n - (self.f / self.n).powi(2)).max(0.0)
    }
    fn entropy(&self) -> f64 {
        let m2 = self.f2 / self.n;
        if m2 <= 0.0 {
            return 0.0;
        }
        (self.f2_ln / self.n - m2 * m2.ln()).max(0.0)
    }
}

fn accumulate(f: &TestFunction, lw: &LabelWeighted, range: std::ops::Range<usize>) -> Sums {
    let w2 = dot(&f.w, &f.w);
    let mut s = Sums::default();
    for i in range {
        let z = lw.row(i);
        let y = f64::from(lw.y[i]);
        let (v, dv) = f.eval(z, y);
        let (flip, _) = f.eval(z, -y);
        let v2 = v * v;
        s.n += 1.0;
        s.f += v;
        s.f2 += v2;
        if v2 > 0.0 {
            s.f2_ln += v2 * v2.ln();
        }
        s.grad_z += dv * dv * w2;
        s.gamma_y += 0.25 * (v - flip).powi(2);
    }
    s
}

struct Energies {
    p: f64,
    ls: f64,
}

fn energies(s: &Sums, k: &KConstants, c: f64, c_star: f64) -> Energies {
    let gz = s.grad_z / s.n;
    let gy = s.gamma_y / s.n;
    let p = k.k_p * (1.0 + c * k.k_chi2) * gz + c_star * k.k_v * gy;
    let ls = (1.0 + 0.5 * k.k_u.ln()) * p + 2.0 * k.k_ls * gz;
    Energies { p, ls }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn batch_se(values: &[f64]) -> f64 {
    super::stats::se(values)
}

/// Check the label-weighted Poincaré and log-Sobolev inequalities for the
/// given functions by Monte Carlo.
pub fn fi_check_functions(
    model: &ModelSpec,
    kconst: &KConstants,
    functions: &[TestFunction],
    opts: &FICheckOptions,
) -> Result<FICheckResult> {
    if opts.c <= 1.0 {
        return Err(Error::InvalidArgument(format!("c must exceed 1, got {}", opts.c)));
    }
    if opts.batches < 2 || opts.samples < opts.batches {
        return Err(Error::InvalidArgument("need at least 2 batches and one sample per batch".into()));
    }
    if functions.iter().any(|f| f.w.len() != model.dim()) {
        return Err(Error::InvalidArgument("test function dimension mismatch".into()));
    }
    let c_star = opts.c / (opts.c - 1.0);
    let data = sample_dataset(model, opts.samples, opts.seed)?;
    let lw = to_label_weighted(&data);
    let per = opts.samples / opts.batches;
    let rows = functions
        .par_iter()
        .enumerate()
        .map(|(index, f)| {
            let total = accumulate(f, &lw, 0..opts.samples);
            let e = energies(&total, kconst, opts.c, c_star);
            let variance = total.variance();
            let entropy = total.entropy();
            let ratio_p = ratio(variance, e.p);
            let ratio_ls = ratio(entropy, 2.0 * e.ls);
            let (mut bp, mut bl) = (Vec::new(), Vec::new());
            for b in 0..opts.batches {
                let s = accumulate(f, &lw, b * per..(b + 1) * per);
                let eb = energies(&s, kconst, opts.c, c_star);
                bp.push(ratio(s.variance(), eb.p));
                bl.push(ratio(s.entropy(), 2.0 * eb.ls));
            }
            let se_p = batch_se(&bp);
            let se_ls = batch_se(&bl);
            FIRow {
                index,
                variance,
                energy_p: e.p,
                ratio_p,
                se_p,
                pass_p: ratio_p <= 1.0 + 3.0 * se_p,
                entropy,
                energy_ls: e.ls,
                ratio_ls,
                se_ls,
                pass_ls: ratio_ls <= 1.0 + 3.0 * se_ls,
            }
        })
        .collect();
    Ok(FICheckResult { rows, c: opts.c, c_star })
}

/// [`fi_check_functions`] on a random tanh family.
pub fn fi_check(model: &ModelSpec, kconst: &KConstants, opts: &FICheckOptions) -> Result<FICheckResult> {
    let fns = random_test_functions(model.dim(), opts.functions, opts.seed);
    fi_check_functions(model, kconst, &fns, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{k_constants, KRequest};
    use crate::model::LinkKind;

    #[test]
    fn constant_function_has_zero_ratio() {
        let m = ModelSpec::spherical(1.0, vec![1.0], 0.5, LinkKind::Logistic).unwrap();
        let k = k_constants(&m, &KRequest::default()).unwrap();
        let f = TestFunction { a: 0.0, w: vec![1.0], b: 0.0 };
        let opts = FICheckOptions { samples: 2000, ..Default::default() };
        let r = fi_check_functions(&m, &k, &[f], &opts).unwrap();
        assert_eq!(r.rows[0].ratio_p, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn label_function_energy_is_label_term_only() {
        // f = y: Var = 4p₊p₋ and Γ_Y = 1, Γ_Z = 0.
        let m = ModelSpec::spherical(1.0, vec![1.0], 0.0, LinkKind::Logistic).unwrap();
        let k = KConstants::from_parts(1.0, 1.0, 0.0, 0.5);
        let f = TestFunction { a: 1.0 / 40f64.tanh(), w: vec![0.0], b: 40.0 };
        let opts = FICheckOptions { samples: 4000, ..Default::default() };
        let r = fi_check_functions(&m, &k, &[f], &opts).unwrap();
        let c_star = 2.0;
        assert!((r.rows[0].energy_p - c_star * k.k_v).abs() < 1e-12);
    }
}
