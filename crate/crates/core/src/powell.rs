//! Powell's conjugate-direction method with Brent line search.
//!
//! Derivative-free and fully deterministic: the only inputs are the
//! objective callback, the starting point and the budgets. Non-finite
//! objective values during the search are treated as +inf (rejected steps),
//! so infeasible simulations cannot derail a run; only a non-finite value at
//! the starting point is an error.

use serde::{Deserialize, Serialize};

const GOLD: f64 = 1.618_034;
const ZEPS: f64 = 1e-12;
const CGOLD: f64 = 0.381_966_0;

#[derive(Debug, thiserror::Error)]
pub enum OptimizerError {
    #[error("objective is non-finite at the starting point")]
    NonFiniteStart,
    #[error("no finite value found inside the line-search bracket")]
    NonFiniteBracket,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Maximum direction-set sweeps.
    pub max_iterations: usize,
    /// Relative improvement per sweep below which the run stops.
    pub f_tolerance: f64,
    /// Hard cap on objective evaluations.
    pub max_evaluations: usize,
    /// Relative tolerance of each Brent line search.
    pub line_search_tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 150,
            f_tolerance: 1e-8,
            max_evaluations: 100_000,
            line_search_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// Completed sweeps.
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value at the end of each sweep; never increasing.
    pub history: Vec<f64>,
}

struct Evaluator<F> {
    f: F,
    used: usize,
    cap: usize,
}

impl<F: FnMut(&[f64]) -> f64> Evaluator<F> {
    /// None once the budget is exhausted; non-finite values become +inf.
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.used >= self.cap {
            return None;
        }
        self.used += 1;
        let v = (self.f)(x);
        Some(if v.is_finite() { v } else { f64::INFINITY })
    }
}

/// Brent's method on a bracketing triple (a, b, c) with f(b) = fb already
/// known and fb <= min(f(a), f(c)). Returns the best point seen; `eval`
/// returning None (budget out) stops early.
fn brent<G: FnMut(f64) -> Option<f64>>(
    mut eval: G,
    ax: f64,
    bx: f64,
    cx: f64,
    fb: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let (mut a, mut b) = (ax.min(cx), ax.max(cx));
    let (mut x, mut w, mut v) = (bx, bx, bx);
    let (mut fx, mut fw, mut fv) = (fb, fb, fb);
    let mut d = 0.0_f64;
    let mut e = 0.0_f64;

    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + ZEPS;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 && fx.is_finite() && fw.is_finite() && fv.is_finite() {
            // Parabolic fit through (x, w, v).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { b - x } else { a - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + if d >= 0.0 { tol1 } else { -tol1 }
        };
        let fu = match eval(u) {
            Some(f) => f,
            None => break,
        };
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Minimize a scalar function on a closed bracket. The minimum of a
/// monotone function is reported at (numerically near) the lower endpoint.
///
/// Non-finite values at the bracket ends shrink the bracket toward its
/// midpoint before the search starts; if no finite value is found the
/// search fails.
pub fn line_minimize<G: FnMut(f64) -> f64>(
    mut g: G,
    bracket: (f64, f64),
    tol: f64,
) -> Result<(f64, f64), OptimizerError> {
    let (mut lo, mut hi) = bracket;
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut eval = |t: f64| {
        let v = g(t);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let (mut flo, mut fhi) = (eval(lo), eval(hi));
    let mut tries = 0;
    while !(flo.is_finite() && fhi.is_finite()) {
        tries += 1;
        if tries > 45 {
            return Err(OptimizerError::NonFiniteBracket);
        }
        let m = 0.5 * (lo + hi);
        if !flo.is_finite() {
            lo = 0.5 * (lo + m);
            flo = eval(lo);
        }
        if !fhi.is_finite() {
            hi = 0.5 * (hi + m);
            fhi = eval(hi);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fmid = eval(mid);
    let mut best = if flo <= fhi { (lo, flo) } else { (hi, fhi) };
    if fmid < best.1 {
        best = (mid, fmid);
    }
    let (x, fx) = brent(
        |t| Some(eval(t)),
        lo,
        mid,
        hi,
        fmid,
        tol.max(1e-12),
        200,
    );
    if fx < best.1 {
        best = (x, fx);
    }
    Ok(best)
}

/// One internal line search: minimize along `dir` from `x`, updating `x`
/// and returning (new f, budget_exhausted). Never returns a value above
/// `fx`.
fn search_direction<F: FnMut(&[f64]) -> f64>(
    eval: &mut Evaluator<F>,
    x: &mut [f64],
    dir: &[f64],
    fx: f64,
    tol: f64,
) -> (f64, bool) {
    let n = x.len();
    let mut scratch = vec![0.0_f64; n];
    let mut best_alpha = 0.0_f64;
    let mut best_f = fx;
    let mut exhausted = false;
    {
        let mut g = |alpha: f64| -> Option<f64> {
            for i in 0..n {
                scratch[i] = x[i] + alpha * dir[i];
            }
            match eval.eval(&scratch) {
                Some(v) => {
                    if v < best_f {
                        best_f = v;
                        best_alpha = alpha;
                    }
                    Some(v)
                }
                None => {
                    exhausted = true;
                    None
                }
            }
        };

        // Bracket a descent interval around alpha = 0, shrinking through
        // infeasible (+inf) regions and expanding along descent.
        'bracketed: {
            let mut step = 1.0_f64;
            let mut f_pos = f64::INFINITY;
            for _ in 0..45 {
                match g(step) {
                    Some(v) if v.is_finite() => {
                        f_pos = v;
                        break;
                    }
                    Some(_) => step *= 0.5,
                    None => break 'bracketed,
                }
            }
            let descend = |g: &mut dyn FnMut(f64) -> Option<f64>,
                           mut a: f64,
                           mut b: f64,
                           fa: f64,
                           f_b: f64|
             -> Option<(f64, f64, f64, f64)> {
                let (mut fa, mut fb) = (fa, f_b);
                let mut c = b + GOLD * (b - a);
                let mut fc = g(c)?;
                let mut grow = 0;
                while fb > fc && grow < 50 {
                    a = b;
                    fa = fb;
                    b = c;
                    fb = fc;
                    c = b + GOLD * (b - a);
                    fc = g(c)?;
                    grow += 1;
                }
                let _ = fa;
                Some((a, b, c, fb))
            };
            if f_pos < fx {
                if let Some((a, b, c, fb)) = descend(&mut g, 0.0, step, fx, f_pos) {
                    let (_, _) = brent(&mut g, a, b, c, fb, tol, 100);
                }
            } else {
                // Try the opposite direction.
                let mut nstep = -step;
                let mut f_neg = f64::INFINITY;
                for _ in 0..45 {
                    match g(nstep) {
                        Some(v) if v.is_finite() => {
                            f_neg = v;
                            break;
                        }
                        Some(_) => nstep *= 0.5,
                        None => break 'bracketed,
                    }
                }
                if f_neg < fx {
                    if let Some((a, b, c, fb)) = descend(&mut g, 0.0, nstep, fx, f_neg) {
                        let (_, _) = brent(&mut g, a, b, c, fb, tol, 100);
                    }
                } else if f_pos.is_finite() && f_neg.is_finite() {
                    // Both sides are uphill: the minimum sits between.
                    let (_, _) = brent(&mut g, nstep, 0.0, step, fx, tol, 100);
                }
            }
        }
    }
    if best_f < fx {
        for i in 0..n {
            x[i] += best_alpha * dir[i];
        }
        (best_f, exhausted)
    } else {
        (fx, exhausted)
    }
}

/// Powell's method: sweep the direction set with line searches, then
/// line-minimize along the net displacement and let it replace the
/// direction of largest decrease. Directions reset to the coordinate axes
/// every n sweeps to prevent degeneracy.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimizerResult, OptimizerError> {
    let n = x0.len();
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(OptimizerError::NonFiniteStart);
    }
    let mut eval = Evaluator {
        f,
        used: 1, // f(x0) above
        cap: cfg.max_evaluations.max(1),
    };
    if n == 0 {
        return Ok(OptimizerResult {
            x_star: Vec::new(),
            f_star: f0,
            iterations: 0,
            evaluations: eval.used,
            converged: true,
            history: vec![f0],
        });
    }

    let identity = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let mut d = vec![0.0; n];
                d[i] = 1.0;
                d
            })
            .collect()
    };
    let mut dirs = identity(n);
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut history = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;

    'outer: while sweeps < cfg.max_iterations {
        let f_start = fx;
        let x_start = x.clone();
        let mut biggest_drop = 0.0_f64;
        let mut biggest_idx = 0usize;

        for i in 0..n {
            let before = fx;
            let (fnew, exhausted) =
                search_direction(&mut eval, &mut x, &dirs[i], fx, cfg.line_search_tolerance);
            fx = fnew;
            if before - fx > biggest_drop {
                biggest_drop = before - fx;
                biggest_idx = i;
            }
            if exhausted {
                sweeps += 1;
                history.push(fx);
                break 'outer;
            }
        }
        sweeps += 1;
        history.push(fx);

        if 2.0 * (f_start - fx) <= cfg.f_tolerance * (f_start.abs() + fx.abs()) + 1e-300 {
            converged = true;
            break;
        }

        // Net-displacement direction.
        let mut net: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let norm = net.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut net {
                *v /= norm;
            }
            let (fnew, exhausted) =
                search_direction(&mut eval, &mut x, &net, fx, cfg.line_search_tolerance);
            fx = fnew;
            dirs[biggest_idx] = dirs[n - 1].clone();
            dirs[n - 1] = net;
            if exhausted {
                break;
            }
        }

        if sweeps % n == 0 {
            dirs = identity(n);
        }
    }

    Ok(OptimizerResult {
        x_star: x,
        f_star: fx,
        iterations: sweeps,
        evaluations: eval.used,
        converged,
        history,
    })
}
