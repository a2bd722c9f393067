//! Maximization of the generalization gap over the hypothesis ball.
//!
//! The gap is a difference of convex functions when the loss is convex, so
//! local ascent only finds local maxima. Multi-start projected ascent with
//! starts biased toward the boundary does the bulk of the work; a random
//! direction search then polishes the best point, which matters for the
//! hinge loss whose empirical risk is piecewise linear.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{norm, ConstraintSet, Dataset, LossSpec, ModelSpec};
use crate::risk::{GapObjective, DEFAULT_QUAD_ORDER};
use crate::rng::{stream, stream_rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_init: f64,
    pub step_decay: f64,
    pub tol: f64,
    pub quad_order_2d: usize,
    /// Compare the result against random feasible points.
    pub audit: bool,
    /// Keep the per-iteration trace.
    pub trace: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 24,
            max_iters: 400,
            step_init: 0.5,
            step_decay: 0.97,
            tol: 1e-7,
            quad_order_2d: DEFAULT_QUAD_ORDER,
            audit: cfg!(debug_assertions),
            trace: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.restarts > 0
            && self.max_iters > 0
            && self.step_init > 0.0
            && self.step_decay > 0.0
            && self.step_decay < 1.0
            && self.tol > 0.0
            && self.tol < 1.0
            && self.quad_order_2d > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid optimizer config {self:?}")))
        }
    }
}

/// One row of an optimizer trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub start: usize,
    pub iter: usize,
    pub value: f64,
    pub step: f64,
    pub w_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    pub value: f64,
    pub argmax_w: Vec<f64>,
    pub argmax_b: f64,
    pub starts_used: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRow>>,
}

/// Write a trace as CSV with columns `start,iter,F,step,w_norm`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["start", "iter", "F", "step", "w_norm"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        wr.write_record([
            r.start.to_string(),
            r.iter.to_string(),
            format!("{:e}", r.value),
            format!("{:e}", r.step),
            format!("{:e}", r.w_norm),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

/// A point `(w, b)` stored contiguously.
#[derive(Clone, Debug)]
struct Point {
    x: Vec<f64>,
}

impl Point {
    fn new(w: &[f64], b: f64) -> Self {
        let mut x = w.to_vec();
        x.push(b);
        Point { x }
    }
    fn w(&self) -> &[f64] {
        &self.x[..self.x.len() - 1]
    }
    fn b(&self) -> f64 {
        self.x[self.x.len() - 1]
    }
    fn project(&mut self, c: &ConstraintSet) {
        let d = self.x.len() - 1;
        let (w, b) = self.x.split_at_mut(d);
        c.project(w, &mut b[0]);
    }
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn start_points(model: &ModelSpec, c: &ConstraintSet, restarts: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let d = model.dim();
    let mut starts = vec![Point::new(&vec![0.0; d], 0.0)];
    let t = model.theta1();
    let tn = norm(t);
    if tn > 0.0 {
        let dir: Vec<f64> = t.iter().map(|x| c.r_w * x / tn).collect();
        let neg: Vec<f64> = dir.iter().map(|x| -x).collect();
        starts.push(Point::new(&dir, c.r_b));
        starts.push(Point::new(&neg, -c.r_b));
    }
    let remaining = restarts.saturating_sub(starts.len());
    let coords = (2 * d).min(remaining / 2);
    let mut k = 0;
    while starts.len() < restarts {
        if k < coords {
            let mut w = vec![0.0; d];
            w[k / 2] = if k % 2 == 0 { c.r_w } else { -c.r_w };
            starts.push(Point::new(&w, 0.0));
            k += 1;
        } else {
            let w: Vec<f64> = random_unit(rng, d).into_iter().map(|x| x * c.r_w).collect();
            let b = c.r_b * (2.0 * rng.random::<f64>() - 1.0);
            starts.push(Point::new(&w, b));
        }
    }
    starts.truncate(restarts);
    starts
}

struct Ascent {
    point: Point,
    value: f64,
    converged: bool,
}

fn eval(obj: &GapObjective, p: &Point) -> (f64, Vec<f64>) {
    let g = obj.value_grad(p.w(), p.b());
    let mut grad = g.grad_w;
    grad.push(g.grad_b);
    (g.value, grad)
}

fn ascend(
    obj: &GapObjective,
    c: &ConstraintSet,
    cfg: &OptimizerConfig,
    start: Point,
    start_id: usize,
    trace: &mut Option<Vec<TraceRow>>,
) -> Ascent {
    let scale = c.r_w.max(c.r_b);
    let mut p = start;
    p.project(c);
    let (mut f, mut g) = eval(obj, &p);
    let mut flat = 0;
    let mut converged = false;
    for it in 0..cfg.max_iters {
        let gn = norm(&g);
        if gn == 0.0 {
            converged = true;
            break;
        }
        let mut h = cfg.step_init * cfg.step_decay.powi(it as i32) * scale / gn;
        let mut accepted = None;
        while h * gn > 1e-13 * scale {
            let mut cand = Point {
                x: p.x.iter().zip(&g).map(|(x, gi)| x + h * gi).collect(),
            };
            cand.project(c);
            let (fc, gc) = eval(obj, &cand);
            if fc >= f {
                accepted = Some((cand, fc, gc));
                break;
            }
            h *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            converged = true;
            break;
        };
        let gain = fc - f;
        let moved = cand.x.iter().zip(&p.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = cand;
        f = fc;
        g = gc;
        if let Some(rows) = trace.as_mut() {
            rows.push(TraceRow {
                start: start_id,
                iter: it,
                value: f,
                step: h * gn,
                w_norm: norm(p.w()),
            });
        }
        if moved == 0.0 {
            converged = true;
            break;
        }
        flat = if gain < cfg.tol { flat + 1 } else { 0 };
        if flat >= 3 {
            converged = true;
            break;
        }
    }
    Ascent { point: p, value: f, converged }
}

/// Random directions tried per polish round, at most.
const POLISH_DIRECTIONS: usize = 64;

/// Random-direction pattern search from `p`; only accepts improvements.
fn polish(obj: &GapObjective, c: &ConstraintSet, p: Point, f: f64, rng: &mut ChaCha8Rng) -> (Point, f64) {
    let dim = p.x.len();
    let scale = c.r_w.max(c.r_b);
    let mut radius = 0.05 * scale;
    let (mut p, mut f) = (p, f);
    let mut fails = 0;
    while radius > 1e-7 * scale {
        let mut improved = false;
        for _ in 0..(4 * dim).min(POLISH_DIRECTIONS) {
            let dir = random_unit(rng, dim);
            for sgn in [1.0, -1.0] {
                let mut cand = Point {
                    x: p.x.iter().zip(&dir).map(|(x, d)| x + sgn * radius * d).collect(),
                };
                cand.project(c);
                let fc = obj.value(cand.w(), cand.b());
                if fc > f {
                    p = cand;
                    f = fc;
                    improved = true;
                }
            }
        }
        if improved {
            fails = 0;
        } else {
            fails += 1;
            radius *= 0.5;
        }
        if fails > 40 {
            break;
        }
    }
    (p, f)
}

fn random_feasible(rng: &mut ChaCha8Rng, c: &ConstraintSet, d: usize) -> Point {
    let r = c.r_w * rng.random::<f64>().powf(1.0 / d as f64);
    let w: Vec<f64> = random_unit(rng, d).into_iter().map(|x| x * r).collect();
    Point::new(&w, c.r_b * (2.0 * rng.random::<f64>() - 1.0))
}

/// Best value of `obj` over `points` random feasible points.
pub fn audit_points(obj: &GapObjective, c: &ConstraintSet, d: usize, points: usize, seed: u64) -> (f64, Vec<f64>, f64) {
    let mut rng = stream_rng(seed, stream::AUX);
    let mut best = (f64::NEG_INFINITY, vec![0.0; d], 0.0);
    for _ in 0..points {
        let p = random_feasible(&mut rng, c, d);
        let v = obj.value(p.w(), p.b());
        if v > best.0 {
            best = (v, p.w().to_vec(), p.b());
        }
    }
    best
}

/// Maximize an arbitrary gap objective.
pub fn maximize(obj: &GapObjective, model: &ModelSpec, c: &ConstraintSet, cfg: &OptimizerConfig, seed: u64) -> Result<SupResult> {
    cfg.validate()?;
    let d = model.dim();
    if c.r_w == 0.0 && c.r_b == 0.0 {
        return Ok(SupResult {
            value: 0.0,
            argmax_w: vec![0.0; d],
            argmax_b: 0.0,
            starts_used: 1,
            converged: true,
            trace: cfg.trace.then(Vec::new),
        });
    }
    let mut rng = stream_rng(seed, stream::OPTIMIZER);
    let starts = start_points(model, c, cfg.restarts, &mut rng);
    let starts_used = starts.len();
    let mut trace = cfg.trace.then(Vec::new);
    let mut best: Option<Ascent> = None;
    let mut all_converged = true;
    for (i, s) in starts.into_iter().enumerate() {
        let a = ascend(obj, c, cfg, s, i, &mut trace);
        all_converged &= a.converged;
        if best.as_ref().is_none_or(|b| a.value > b.value) {
            best = Some(a);
        }
    }
    let best = best.expect("at least one start");
    // Gradient steps stall at the kinks of a non-smooth loss.
    let (point, mut value) = if obj.population.loss().is_smooth() {
        (best.point, best.value)
    } else {
        polish(obj, c, best.point, best.value, &mut rng)
    };
    let (mut w, mut b) = (point.w().to_vec(), point.b());
    let mut converged = all_converged;
    if cfg.audit {
        let (v, aw, ab) = audit_points(obj, c, d, 50, seed);
        if v > value {
            log::warn!("audit point beats optimizer: {v} > {value}");
            value = v;
            w = aw;
            b = ab;
            converged = false;
        }
    }
    // The origin is feasible and has zero gap.
    if value < 0.0 {
        value = 0.0;
        w = vec![0.0; d];
        b = 0.0;
    }
    Ok(SupResult {
        value,
        argmax_w: w,
        argmax_b: b,
        starts_used,
        converged,
        trace,
    })
}

/// `sup (R − R_n)` over the constraint set.
pub fn sup_gap(
    data: &Dataset,
    model: &ModelSpec,
    loss: &LossSpec,
    constraints: &ConstraintSet,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<SupResult> {
    let obj = GapObjective::new(data, model, loss, cfg.quad_order_2d)?;
    maximize(&obj, model, constraints, cfg, seed)
}

/// `sup (R_n − R)` over the constraint set.
pub fn sup_reverse_gap(
    data: &Dataset,
    model: &ModelSpec,
    loss: &LossSpec,
    constraints: &ConstraintSet,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<SupResult> {
    let obj = GapObjective::new(data, model, loss, cfg.quad_order_2d)?.reversed();
    maximize(&obj, model, constraints, cfg, seed)
}

pub const GRID_MAX_DIM: usize = 3;
pub const GRID_MAX_RESOLUTION: usize = 201;
pub const DEFAULT_REFINE_LEVELS: usize = 10;

/// Exhaustive grid search over the cube `[−R_w, R_w]^d × [−R_b, R_b]` with
/// points outside the ball pulled radially onto it, followed by
/// `refine_levels` rounds of zooming around the best three points.
pub fn grid_oracle_sup_with(
    data: &Dataset,
    model: &ModelSpec,
    loss: &LossSpec,
    c: &ConstraintSet,
    resolution: usize,
    refine_levels: usize,
) -> Result<f64> {
    let d = model.dim();
    if d > GRID_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            what: "grid oracle",
            dim: d,
            max: GRID_MAX_DIM,
        });
    }
    if !(2..=GRID_MAX_RESOLUTION).contains(&resolution) {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution} not in [2, {GRID_MAX_RESOLUTION}]"
        )));
    }
    let obj = GapObjective::new(data, model, loss, DEFAULT_QUAD_ORDER)?;
    let mut half: Vec<f64> = std::iter::repeat_n(c.r_w, d).chain([c.r_b]).collect();
    let mut found = scan(&obj, c, &vec![0.0; d + 1], &half, resolution, 3);
    let mut value = found[0].0;
    // After the full grid, each window spans one step either side.
    half.iter_mut().for_each(|h| *h *= 2.0 / (resolution - 1) as f64);
    const ZOOM: usize = 11;
    for _ in 0..refine_levels {
        let mut next: Vec<(f64, Vec<f64>)> = found
            .iter()
            .flat_map(|(_, p)| scan(&obj, c, p, &half, ZOOM, 3))
            .collect();
        next.sort_by(|a, b| b.0.total_cmp(&a.0));
        next.dedup_by(|a, b| a.1 == b.1);
        next.truncate(3);
        value = value.max(next[0].0);
        found = next;
        half.iter_mut().for_each(|h| *h *= 0.4);
    }
    Ok(value.max(0.0))
}

/// Grid oracle with the default number of zoom levels.
pub fn grid_oracle_sup(
    data: &Dataset,
    model: &ModelSpec,
    loss: &LossSpec,
    c: &ConstraintSet,
    resolution: usize,
) -> Result<f64> {
    grid_oracle_sup_with(data, model, loss, c, resolution, DEFAULT_REFINE_LEVELS)
}

/// Evaluate a `pts`-per-axis grid on `centre ± half` and keep the best few.
fn scan(
    obj: &GapObjective,
    c: &ConstraintSet,
    centre: &[f64],
    half: &[f64],
    pts: usize,
    keep: usize,
) -> Vec<(f64, Vec<f64>)> {
    let axes: Vec<Vec<f64>> = centre
        .iter()
        .zip(half)
        .map(|(&m, &h)| {
            if h == 0.0 {
                vec![m]
            } else {
                (0..pts)
                    .map(|i| m + h * (-1.0 + 2.0 * i as f64 / (pts - 1) as f64))
                    .collect()
            }
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut best: Vec<(f64, Vec<f64>)> = Vec::with_capacity(keep + 1);
    let mut idx = vec![0usize; axes.len()];
    for _ in 0..total {
        let mut p = Point {
            x: idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect(),
        };
        p.project(c);
        let v = obj.value(p.w(), p.b());
        if (best.len() < keep || v > best[best.len() - 1].0) && !best.iter().any(|(_, q)| *q == p.x) {
            best.push((v, p.x));
            best.sort_by(|a, b| b.0.total_cmp(&a.0));
            best.truncate(keep);
        }
        for (k, a) in axes.iter().enumerate() {
            idx[k] += 1;
            if idx[k] < a.len() {
                break;
            }
            idx[k] = 0;
        }
    }
    best
}
