use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_dataset, to_label_weighted, ModelSpec};
use crate::rng::{derive_seed, stream, stream_rng};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct IndependenceOptions {
    pub projections: usize,
    pub permutations: usize,
    pub level: f64,
    /// Run even though `θ₀ ≠ 0`, where dependence is expected.
    pub allow_bias: bool,
}

impl Default for IndependenceOptions {
    fn default() -> Self {
        IndependenceOptions { projections: 8, permutations: 500, level: 0.05, allow_bias: false }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndependenceResult {
    pub repetitions: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub p_values: Vec<f64>,
}

/// Largest standardized difference of projected `Z` means between the two
/// label groups.
fn statistic(proj: &[Vec<f64>], totals: &[f64], scales: &[f64], y: &[i8], n_pos: usize) -> f64 {
    let n = y.len();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.0;
    }
    let mut best = 0.0f64;
    for (k, s) in proj.iter().enumerate() {
        let pos: f64 = s.iter().zip(y).filter(|(_, &yi)| yi > 0).map(|(v, _)| v).sum();
        let diff = pos / n_pos as f64 - (totals[k] - pos) / n_neg as f64;
        best = best.max((diff / scales[k]).abs());
    }
    best
}

fn one_repetition(model: &ModelSpec, n: usize, seed: u64, opts: &IndependenceOptions) -> Result<f64> {
    let data = sample_dataset(model, n, seed)?;
    let lw = to_label_weighted(&data);
    let mut rng = stream_rng(seed, stream::AUX);
    let d = lw.dim;
    let n_pos = lw.y.iter().filter(|&&v| v > 0).count();
    let mut proj = Vec::with_capacity(opts.projections);
    for _ in 0..opts.projections {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        v.iter_mut().for_each(|a| *a /= nv);
        proj.push((0..n).map(|i| crate::model::dot(lw.row(i), &v)).collect::<Vec<f64>>());
    }
    let totals: Vec<f64> = proj.iter().map(|s| s.iter().sum()).collect();
    let nf = n as f64;
    let scales: Vec<f64> = proj
        .iter()
        .zip(&totals)
        .map(|(s, t)| {
            let m = t / nf;
            let var = s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
            let k = (1.0 / n_pos.max(1) as f64 + 1.0 / (n - n_pos).max(1) as f64).sqrt();
            (var.sqrt() * k).max(f64::MIN_POSITIVE)
        })
        .collect();
    let observed = statistic(&proj, &totals, &scales, &lw.y, n_pos);
    let mut y = lw.y.clone();
    let mut hits = 0usize;
    for _ in 0..opts.permutations {
        y.shuffle(&mut rng);
        if statistic(&proj, &totals, &scales, &y, n_pos) >= observed {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (1 + opts.permutations) as f64)
}

/// Permutation test of `Z ⟂ Y` repeated on fresh datasets.
pub fn independence_check(
    model: &ModelSpec,
    n: usize,
    repetitions: usize,
    seed: u64,
    opts: &IndependenceOptions,
) -> Result<IndependenceResult> {
    if model.theta0() != 0.0 && !opts.allow_bias {
        return Err(Error::InvalidArgument(
            "independence holds only for theta0 = 0; set allow_bias to run anyway".into(),
        ));
    }
    if n < 2 || opts.projections == 0 || opts.permutations == 0 {
        return Err(Error::InvalidArgument("need n ≥ 2, projections ≥ 1 and permutations ≥ 1".into()));
    }
    let p_values = (0..repetitions)
        .into_par_iter()
        .map(|r| one_repetition(model, n, derive_seed(seed, r as u64), opts))
        .collect::<Result<Vec<f64>>>()?;
    let rejections = p_values.iter().filter(|&&p| p <= opts.level).count();
    Ok(IndependenceResult {
        repetitions,
        rejections,
        rejection_rate: rejections as f64 / repetitions.max(1) as f64,
        p_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinkKind;

    #[test]
    fn refuses_biased_model_unless_allowed() {
        let m = ModelSpec::spherical(1.0, vec![1.0, 0.0], 1.0, LinkKind::Logistic).unwrap();
        let opts = IndependenceOptions { permutations: 20, ..Default::default() };
        assert!(independence_check(&m, 50, 2, 1, &opts).is_err());
        let opts = IndependenceOptions { allow_bias: true, ..opts };
        assert_eq!(independence_check(&m, 50, 2, 1, &opts).unwrap().p_values.len(), 2);
    }
}
