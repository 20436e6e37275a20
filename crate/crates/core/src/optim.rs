//! Dense BFGS minimizer with a backtracking Armijo line search.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    /// Stop when the gradient sup-norm falls below this.
    pub grad_tol: f64,
    /// Stop when the relative objective change falls below this.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// A relative-change stop only counts as converged if the gradient
    /// sup-norm is also below this.
    pub accept_grad_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            rel_tol: 1e-8,
            max_iter: 500,
            accept_grad_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_sup: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `objective`, which returns the value and gradient at a point.
/// Non-finite values are treated as infeasible and rejected by the line search.
pub fn minimize<F>(objective: F, x0: Vec<f64>, opts: &BfgsOptions) -> BfgsResult
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let identity = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        (0..n).for_each(|i| h[i * n + i] = 1.0);
    };
    let mut h = vec![0.0; n * n];
    identity(&mut h);

    let mut x = x0;
    let (mut f, mut g) = objective(&x);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return BfgsResult {
            grad_sup: f64::INFINITY,
            x,
            f,
            iterations: 0,
            converged: false,
        };
    }

    let mut iterations = 0;
    while iterations < opts.max_iter {
        let gs = sup_norm(&g);
        if gs < opts.grad_tol {
            return BfgsResult { x, f, grad_sup: gs, iterations, converged: true };
        }
        iterations += 1;

        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 || !slope.is_finite() {
            identity(&mut h);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = objective(&trial);
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // no descent along the search direction: numerically stationary
            return BfgsResult {
                converged: gs < opts.accept_grad_tol,
                x,
                f,
                grad_sup: gs,
                iterations,
            };
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }

        let rel_change = (f - f_new).abs() / f.abs().max(1e-300);
        x = x_new;
        f = f_new;
        g = g_new;
        let gs = sup_norm(&g);
        if gs < opts.grad_tol {
            return BfgsResult { x, f, grad_sup: gs, iterations, converged: true };
        }
        if rel_change < opts.rel_tol && gs < opts.accept_grad_tol {
            return BfgsResult { x, f, grad_sup: gs, iterations, converged: true };
        }
    }
    let grad_sup = sup_norm(&g);
    BfgsResult {
        x,
        f,
        grad_sup,
        iterations,
        converged: false,
    }
}
