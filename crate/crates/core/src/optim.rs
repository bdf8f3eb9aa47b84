//! Quasi-Newton minimization with finite-difference derivatives.

use crate::linalg::Matrix;

#[derive(Clone, Debug)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Convergence when the sup-norm of the gradient drops below this.
    pub grad_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 500, grad_tol: 1e-5 }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central-difference gradient with steps `cbrt(ε)(1 + |x_i|)`.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let base = f64::EPSILON.cbrt();
    let mut work = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = base * (1.0 + x[i].abs());
        work[i] = x[i] + h;
        let up = f(&work);
        work[i] = x[i] - h;
        let down = f(&work);
        work[i] = x[i];
        // The realized step differs from `h` by rounding.
        g[i] = (up - down) / ((x[i] + h) - (x[i] - h));
    }
    g
}

/// Symmetric central-difference Hessian with steps `ε^{1/4}(1 + |x_i|)`.
pub fn central_hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Matrix<f64> {
    let d = x.len();
    let hs: Vec<f64> = x.iter().map(|v| f64::EPSILON.powf(0.25) * (1.0 + v.abs())).collect();
    let f0 = f(x);
    let mut work = x.to_vec();
    let mut eval = |shifts: &[(usize, f64)]| {
        for &(i, s) in shifts {
            work[i] = x[i] + s;
        }
        let v = f(&work);
        for &(i, _) in shifts {
            work[i] = x[i];
        }
        v
    };
    let mut h = Matrix::zeros(d, d);
    for i in 0..d {
        let hi = hs[i];
        let up = eval(&[(i, hi)]);
        let down = eval(&[(i, -hi)]);
        h[(i, i)] = (up - 2.0 * f0 + down) / (hi * hi);
        for j in 0..i {
            let hj = hs[j];
            let pp = eval(&[(i, hi), (j, hj)]);
            let pm = eval(&[(i, hi), (j, -hj)]);
            let mp = eval(&[(i, -hi), (j, hj)]);
            let mm = eval(&[(i, -hi), (j, -hj)]);
            let v = (pp - pm - mp + mm) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` from `x0` by BFGS with an Armijo backtracking line search.
/// Non-finite values are treated as `+∞` so the search backs off.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &BfgsOptions) -> Minimum {
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut x = x0.to_vec();
    let mut fx = eval(&x);
    if n == 0 {
        return Minimum { x, f: fx, grad_norm: 0.0, iterations: 0, converged: true };
    }
    let mut g = central_gradient(&eval, &x);
    let mut hinv = Matrix::<f64>::identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if sup_norm(&g) <= opts.grad_tol {
            break;
        }
        iterations += 1;
        let mut dir: Vec<f64> = hinv.mat_vec(&g).iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            hinv = Matrix::identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
            fresh = true;
        }
        let mut step = 1.0;
        if fresh {
            let len = dot(&dir, &dir).sqrt();
            if len > 1.0 {
                step = 1.0 / len;
            }
        }
        // Near the optimum the achievable decrease falls below the rounding
        // level of `f`; there a step is accepted if it shrinks the gradient.
        let noise = 16.0 * f64::EPSILON * fx.abs().max(1.0);
        let gnorm = sup_norm(&g);
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let ft = eval(&trial);
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, None));
                break;
            }
            if ft <= fx + noise {
                let gt = central_gradient(&eval, &trial);
                if sup_norm(&gt) < gnorm {
                    accepted = Some((trial, ft, Some(gt)));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gt)) = accepted else {
            if fresh {
                break;
            }
            hinv = Matrix::identity(n);
            fresh = true;
            continue;
        };
        let gn = gt.unwrap_or_else(|| central_gradient(&eval, &xn));
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let stalled = (fx - fnew).abs() <= 1e-15 * fx.abs().max(1.0) && sup_norm(&s) <= 1e-12;
        x = xn;
        fx = fnew;
        g = gn;
        if stalled {
            break;
        }
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                // Scale the initial inverse Hessian before the first update.
                let scale = sy / dot(&y, &y);
                hinv = Matrix::identity(n).scale(scale);
            }
            let hy = hinv.mat_vec(&y);
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    hinv[(i, j)] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
            fresh = false;
        }
    }
    let grad_norm = sup_norm(&g);
    Minimum { x, f: fx, grad_norm, iterations, converged: grad_norm <= opts.grad_tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, &[-1.2, 1.0], &BfgsOptions::default());
        assert!(m.converged, "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn hessian_of_quadratic_is_exact() {
        let a = [[3.0, 1.0, -0.5], [1.0, 2.0, 0.25], [-0.5, 0.25, 4.0]];
        let f = |x: &[f64]| {
            let mut v = 0.7 * x[0] - 0.2 * x[2];
            for i in 0..3 {
                for j in 0..3 {
                    v += 0.5 * a[i][j] * x[i] * x[j];
                }
            }
            v
        };
        let h = central_hessian(&f, &[0.3, -1.1, 2.0]);
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)] - a[i][j]).abs() < 1e-6, "{i},{j}: {}", h[(i, j)]);
            }
        }
        assert!(h.asymmetry() == 0.0);
    }

    #[test]
    fn infinite_region_is_avoided() {
        let f = |x: &[f64]| if x[0] <= 0.0 { f64::NAN } else { x[0] - x[0].ln() };
        let m = minimize(f, &[5.0], &BfgsOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-5);
    }
}
