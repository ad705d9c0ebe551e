//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, numerical, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearchConfig {
    pub c1: f64,
    pub c2: f64,
    pub max_trials: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            max_trials: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub memory: usize,
    pub grad_tol: f64,
    /// Stop as soon as the objective drops to this value.
    pub target_value: Option<f64>,
    /// Box bound `|p_k| <= bound` enforced by clamping after each step.
    pub bound: Option<f64>,
    pub line_search: LineSearchConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            memory: 10,
            grad_tol: 1e-9,
            target_value: None,
            bound: None,
            line_search: LineSearchConfig::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        if !(0.0 < ls.c1 && ls.c1 < ls.c2 && ls.c2 < 1.0) {
            return Err(invalid!("line search needs 0 < c1 < c2 < 1, got c1={} c2={}", ls.c1, ls.c2));
        }
        if ls.max_trials == 0 || self.memory == 0 {
            return Err(invalid!("line-search trials and memory must be positive"));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(invalid!("gradient tolerance must be non-negative"));
        }
        if let Some(b) = self.bound {
            if !(b > 0.0) {
                return Err(invalid!("bound must be positive, got {b}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    TargetReached,
    MaxIterations,
    LineSearchFailed,
}

/// One accepted step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
    /// Objective value at the start of the step.
    pub start_value: f64,
    /// Directional derivative along the search direction at the start and
    /// at the accepted point.
    pub slope_start: f64,
    pub slope_end: f64,
    /// True when the step was clamped onto the bound box; the Wolfe
    /// conditions then refer to the unclamped trial point and are not
    /// checked.
    pub projected: bool,
    pub evaluations: usize,
}

impl IterationRecord {
    /// Whether the step satisfies the strong Wolfe conditions.
    pub fn satisfies_wolfe(&self, ls: &LineSearchConfig) -> bool {
        self.value <= self.start_value + ls.c1 * self.step * self.slope_start
            && self.slope_end.abs() <= -ls.c2 * self.slope_start
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Evaluator<'a, F> {
    f: &'a mut F,
    count: usize,
    iter: usize,
}

impl<F> Evaluator<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, x: Vec<f64>) -> Result<Point> {
        let (f, g) = (self.f)(&x)?;
        self.count += 1;
        if g.len() != x.len() {
            return Err(invalid!("callback returned {} gradient entries for {} parameters", g.len(), x.len()));
        }
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(numerical!("non-finite objective or gradient at iteration {}", self.iter));
        }
        Ok(Point { x, f, g })
    }
}

/// Minimizes `f` from `init`. The callback returns the value and gradient.
pub fn lbfgs_minimize<F>(mut f: F, init: &[f64], config: &OptimizerConfig) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    config.validate()?;
    let clamp = |x: &mut [f64]| -> bool {
        let mut hit = false;
        if let Some(b) = config.bound {
            for v in x.iter_mut() {
                if v.abs() > b {
                    *v = v.clamp(-b, b);
                    hit = true;
                }
            }
        }
        hit
    };
    let mut ev = Evaluator { f: &mut f, count: 0, iter: 0 };
    let mut start = init.to_vec();
    clamp(&mut start);
    let mut cur = ev.eval(start)?;
    let mut history = Vec::new();
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);

    let termination = loop {
        let gnorm = norm(&cur.g);
        if config.target_value.is_some_and(|t| cur.f <= t) {
            break Termination::TargetReached;
        }
        if gnorm <= config.grad_tol {
            break Termination::GradientTolerance;
        }
        if history.len() >= config.max_iters {
            break Termination::MaxIterations;
        }
        ev.iter = history.len() + 1;

        let mut dir = two_loop(&cur.g, &mem);
        let mut slope = dot(&dir, &cur.g);
        if !(slope < 0.0) {
            mem.clear();
            dir = cur.g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let alpha0 = if mem.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let found = line_search(&mut ev, &cur, &dir, slope, alpha0, &config.line_search)?;
        let Some((alpha, mut next)) = found else {
            if mem.is_empty() {
                break Termination::LineSearchFailed;
            }
            // retry once along steepest descent before giving up
            mem.clear();
            continue;
        };
        let mut slope_end = dot(&next.g, &dir);
        let mut projected = false;
        let mut xp = next.x.clone();
        if clamp(&mut xp) {
            let p = ev.eval(xp)?;
            if p.f >= cur.f {
                break Termination::LineSearchFailed;
            }
            next = p;
            projected = true;
            slope_end = dot(&next.g, &dir);
            mem.clear();
        }

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if !projected && sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if mem.len() == config.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        history.push(IterationRecord {
            iter: history.len() + 1,
            value: next.f,
            grad_norm: norm(&next.g),
            step: alpha,
            start_value: cur.f,
            slope_start: slope,
            slope_end,
            projected,
            evaluations: ev.count,
        });
        cur = next;
    };
    Ok(LbfgsResult {
        grad_norm: norm(&cur.g),
        best: cur.x,
        value: cur.f,
        history,
        termination,
        evaluations: ev.count,
    })
}

/// `-H g` from the stored curvature pairs.
fn two_loop(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[derive(Clone, Copy)]
struct Trial {
    alpha: f64,
    f: f64,
    slope: f64,
}

/// Strong-Wolfe bracketing and zoom. Returns `None` when no acceptable
/// step is found within the trial budget.
fn line_search<F>(
    ev: &mut Evaluator<'_, F>,
    cur: &Point,
    dir: &[f64],
    slope0: f64,
    alpha0: f64,
    cfg: &LineSearchConfig,
) -> Result<Option<(f64, Point)>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let f0 = cur.f;
    let eval_at = |ev: &mut Evaluator<'_, F>, alpha: f64| -> Result<(Trial, Point)> {
        let x: Vec<f64> = cur.x.iter().zip(dir).map(|(x, d)| x + alpha * d).collect();
        let p = ev.eval(x)?;
        let slope = dot(&p.g, dir);
        Ok((Trial { alpha, f: p.f, slope }, p))
    };
    let armijo = |t: &Trial| t.f <= f0 + cfg.c1 * t.alpha * slope0;
    let curvature = |t: &Trial| t.slope.abs() <= -cfg.c2 * slope0;

    let mut prev = Trial { alpha: 0.0, f: f0, slope: slope0 };
    let mut alpha = alpha0;
    let mut trials = 0;
    let (mut lo, mut hi);
    loop {
        if trials >= cfg.max_trials {
            return Ok(None);
        }
        trials += 1;
        let (t, p) = eval_at(ev, alpha)?;
        if !armijo(&t) || (trials > 1 && t.f >= prev.f) {
            lo = prev;
            hi = t;
            break;
        }
        if curvature(&t) {
            return Ok(Some((t.alpha, p)));
        }
        if t.slope >= 0.0 {
            lo = t;
            hi = prev;
            break;
        }
        prev = t;
        alpha *= 2.0;
    }

    // zoom: `lo` satisfies Armijo and has the lowest value seen so far
    while trials < cfg.max_trials {
        trials += 1;
        let alpha = interpolate(&lo, &hi);
        let (t, p) = eval_at(ev, alpha)?;
        if !armijo(&t) || t.f >= lo.f {
            hi = t;
        } else {
            if curvature(&t) {
                return Ok(Some((t.alpha, p)));
            }
            if t.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = t;
        }
        if (hi.alpha - lo.alpha).abs() <= 1e-16 * lo.alpha.abs().max(1e-300) {
            break;
        }
    }
    Ok(None)
}

/// Minimizer of the cubic through both end points, kept inside the middle
/// 80% of the bracket; bisection if the cubic is degenerate.
fn interpolate(a: &Trial, b: &Trial) -> f64 {
    let (lo, hi) = if a.alpha < b.alpha { (a, b) } else { (b, a) };
    let width = hi.alpha - lo.alpha;
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (lo.alpha - hi.alpha);
    let disc = d1 * d1 - lo.slope * hi.slope;
    let mid = 0.5 * (lo.alpha + hi.alpha);
    let candidate = if disc >= 0.0 {
        let d2 = disc.sqrt();
        hi.alpha - width * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2)
    } else {
        mid
    };
    if !candidate.is_finite() {
        return mid;
    }
    candidate.clamp(lo.alpha + 0.1 * width, hi.alpha - 0.1 * width)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn convex_quadratic() {
        let target: Vec<f64> = (0..20).map(|k| k as f64 * 0.3 - 2.0).collect();
        let weights: Vec<f64> = (0..20).map(|k| 1.0 + k as f64).collect();
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let mut v = 0.0;
            let mut g = vec![0.0; x.len()];
            for k in 0..x.len() {
                let d = x[k] - target[k];
                v += 0.5 * weights[k] * d * d;
                g[k] = weights[k] * d;
            }
            Ok((v, g))
        };
        let r = lbfgs_minimize(f, &[0.0; 20], &OptimizerConfig::default()).unwrap();
        let err = r.best.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-8, "{err}");
        assert!(r.history.len() <= 50);
    }

    #[test]
    fn rosenbrock_converges() {
        let r = lbfgs_minimize(rosenbrock, &[-1.2, 1.0], &OptimizerConfig::default()).unwrap();
        assert!((r.best[0] - 1.0).abs() < 1e-6 && (r.best[1] - 1.0).abs() < 1e-6, "{:?}", r.best);
    }

    #[test]
    fn history_is_monotone_and_wolfe() {
        let cfg = OptimizerConfig::default();
        let r = lbfgs_minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        let mut last = f64::INFINITY;
        for rec in &r.history {
            assert!(rec.value <= last);
            assert!(rec.value <= rec.start_value);
            assert!(rec.satisfies_wolfe(&cfg.line_search), "{rec:?}");
            last = rec.value;
        }
        let again = lbfgs_minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn bound_is_respected() {
        let cfg = OptimizerConfig { bound: Some(0.5), ..OptimizerConfig::default() };
        let r = lbfgs_minimize(|x: &[f64]| Ok(((x[0] - 2.0).powi(2), vec![2.0 * (x[0] - 2.0)])), &[0.0], &cfg).unwrap();
        assert!(r.best[0] <= 0.5 + 1e-15);
        assert!((r.best[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config_and_nonfinite() {
        let mut cfg = OptimizerConfig::default();
        cfg.line_search.c1 = 0.95;
        assert!(lbfgs_minimize(rosenbrock, &[0.0, 0.0], &cfg).is_err());
        let r = lbfgs_minimize(|_x: &[f64]| Ok((f64::NAN, vec![0.0])), &[0.0], &OptimizerConfig::default());
        assert!(matches!(r, Err(crate::Error::Numerical(_))));
    }
}
