//! Limited-memory BFGS with a strong-Wolfe line search.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    /// Stop when `max_k |∂f/∂x_k|` falls below this.
    pub grad_tol: f64,
    /// Stop when an accepted step changes `f` by less than this.
    pub f_tol: f64,
    pub max_evaluations: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            grad_tol: 1e-8,
            f_tol: 1e-10,
            max_evaluations: 10_000,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    FunctionChange,
    MaxEvaluations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct LbfgsReport {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub n_evaluations: usize,
    pub iterations: usize,
    pub termination: Termination,
}

impl LbfgsReport {
    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::Gradient | Termination::FunctionChange)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evaluations += 1;
        let (f, g) = (self.f)(x)?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("objective returned non-finite value {f}")));
        }
        Ok((f, g))
    }
}

struct Point {
    alpha: f64,
    f: f64,
    dphi: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

/// Cubic minimizer of the interpolant through two points with slopes, safeguarded.
fn cubic_step(a: &Point, b: &Point) -> f64 {
    let (lo, hi) = if a.alpha < b.alpha { (a.alpha, b.alpha) } else { (b.alpha, a.alpha) };
    let d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.dphi * b.dphi;
    let mid = 0.5 * (a.alpha + b.alpha);
    if disc.is_nan() || disc < 0.0 {
        return mid;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / (b.dphi - a.dphi + 2.0 * d2);
    let margin = 0.1 * (hi - lo);
    if t.is_finite() && t > lo + margin && t < hi - margin {
        t
    } else {
        mid
    }
}

fn line_search<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>>(
    obj: &mut Counted<F>,
    x0: &[f64],
    f0: f64,
    g0: &[f64],
    dir: &[f64],
    alpha_init: f64,
    opts: &LbfgsOptions,
) -> Result<Option<Point>> {
    let dphi0 = dot(g0, dir);
    let eval_at = |obj: &mut Counted<F>, alpha: f64| -> Result<Point> {
        let x: Vec<f64> = x0.iter().zip(dir).map(|(a, d)| a + alpha * d).collect();
        let (f, g) = obj.eval(&x)?;
        Ok(Point {
            alpha,
            f,
            dphi: dot(&g, dir),
            x,
            g,
        })
    };
    let sufficient = |p: &Point| p.f <= f0 + opts.c1 * p.alpha * dphi0;
    let curvature = |p: &Point| p.dphi.abs() <= -opts.c2 * dphi0;

    let mut prev = Point {
        alpha: 0.0,
        f: f0,
        dphi: dphi0,
        x: x0.to_vec(),
        g: g0.to_vec(),
    };
    let mut alpha = alpha_init;
    let budget = |obj: &Counted<F>| obj.evaluations >= opts.max_evaluations;

    for i in 0..40 {
        if budget(obj) {
            return Ok(None);
        }
        let cur = eval_at(obj, alpha)?;
        if !sufficient(&cur) || (i > 0 && cur.f >= prev.f) {
            return zoom(obj, prev, cur, f0, dphi0, opts, &eval_at);
        }
        if curvature(&cur) {
            return Ok(Some(cur));
        }
        if cur.dphi >= 0.0 {
            return zoom(obj, cur, prev, f0, dphi0, opts, &eval_at);
        }
        alpha = cur.alpha * 2.0;
        prev = cur;
    }
    Ok((prev.alpha > 0.0).then_some(prev))
}

fn zoom<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>>(
    obj: &mut Counted<F>,
    mut lo: Point,
    mut hi: Point,
    f0: f64,
    dphi0: f64,
    opts: &LbfgsOptions,
    eval_at: &impl Fn(&mut Counted<F>, f64) -> Result<Point>,
) -> Result<Option<Point>> {
    for _ in 0..40 {
        if obj.evaluations >= opts.max_evaluations || (hi.alpha - lo.alpha).abs() < 1e-16 {
            break;
        }
        let alpha = cubic_step(&lo, &hi);
        let cur = eval_at(obj, alpha)?;
        if cur.f > f0 + opts.c1 * alpha * dphi0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.dphi.abs() <= -opts.c2 * dphi0 {
                return Ok(Some(cur));
            }
            if cur.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // Accept the best sufficient-decrease point found, if any.
    Ok((lo.alpha > 0.0 && lo.f < f0).then_some(lo))
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<F>(f: F, x0: &[f64], opts: &LbfgsOptions) -> Result<LbfgsReport>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut obj = Counted { f, evaluations: 0 };
    let mut x = x0.to_vec();
    let (mut fx, mut g) = obj.eval(&x)?;
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(opts.memory);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(opts.memory);
    let mut iterations = 0;

    let termination = loop {
        if inf_norm(&g) < opts.grad_tol {
            break Termination::Gradient;
        }
        if obj.evaluations >= opts.max_evaluations {
            break Termination::MaxEvaluations;
        }

        // Two-loop recursion.
        let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alphas[i] = rho * dot(&s_hist[i], &q);
            for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= alphas[i] * yj;
            }
        }
        if k > 0 {
            let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &q);
            for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alphas[i] - beta) * sj;
            }
        }
        let mut dir = q;
        if dot(&dir, &g) >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            dir = g.iter().map(|v| -v).collect();
        }
        let alpha_init = if s_hist.is_empty() {
            (1.0 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            1.0
        };

        let step = line_search(&mut obj, &x, fx, &g, &dir, alpha_init, opts)?;
        let Some(p) = step else {
            if !s_hist.is_empty() {
                // Retry from steepest descent before giving up.
                s_hist.clear();
                y_hist.clear();
                continue;
            }
            break if obj.evaluations >= opts.max_evaluations {
                Termination::MaxEvaluations
            } else {
                Termination::LineSearchFailed
            };
        };
        iterations += 1;
        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let df = fx - p.f;
        x = p.x;
        fx = p.f;
        g = p.g;
        if dot(&s, &y) > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        if df.abs() < opts.f_tol {
            break if inf_norm(&g) < opts.grad_tol {
                Termination::Gradient
            } else {
                Termination::FunctionChange
            };
        }
    };

    Ok(LbfgsReport {
        x,
        f: fx,
        grad: g,
        n_evaluations: obj.evaluations,
        iterations,
        termination,
    })
}
