//! Limited-memory BFGS for smooth unconstrained minimization.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when `max |grad| <= grad_tol * max(1, |f|)`.
    pub grad_tol: f64,
    /// Stop when the relative decrease of `f` stays below this for `patience` iterations.
    pub f_rel_tol: f64,
    pub patience: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 5000,
            grad_tol: 1e-10,
            f_rel_tol: 1e-15,
            patience: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns the value and writes the gradient into its
/// second argument.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut stall = 0;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    if !fx.is_finite() {
        return LbfgsResult {
            x,
            f: fx,
            iterations: 0,
            evaluations,
            converged: false,
        };
    }

    for iter in 0..opts.max_iterations {
        if inf_norm(&g) <= opts.grad_tol * fx.abs().max(1.0) {
            return LbfgsResult {
                x,
                f: fx,
                iterations: iter,
                evaluations,
                converged: true,
            };
        }

        // two-loop recursion
        let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (a - b) * si);
        }

        let mut slope = dot(&g, &dir);
        if slope.is_nan() || slope >= 0.0 {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = if history.is_empty() {
            1.0 / inf_norm(&g).max(1e-300)
        } else {
            1.0
        };
        step = step.min(1.0);
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f(&x_new, &mut g_new);
            evaluations += 1;
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if history.is_empty() {
                return LbfgsResult {
                    x,
                    f: fx,
                    iterations: iter,
                    evaluations,
                    converged: false,
                };
            }
            history.clear();
            continue;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let rel = (fx - f_new) / fx.abs().max(1e-300);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        if rel <= opts.f_rel_tol {
            stall += 1;
            if stall >= opts.patience {
                return LbfgsResult {
                    x,
                    f: fx,
                    iterations: iter + 1,
                    evaluations,
                    converged: true,
                };
            }
        } else {
            stall = 0;
        }
    }
    LbfgsResult {
        x,
        f: fx,
        iterations: opts.max_iterations,
        evaluations,
        converged: false,
    }
}
