//! Unconstrained local optimizers and start designs.
//!
//! Objectives return `f64::INFINITY` (or `false` for residual maps) where
//! they cannot be evaluated; every method treats that as a rejected step.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::rng::StepRng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Convergence when `f_max − f_min ≤ ftol·(|f_min| + ftol)`.
    pub ftol: f64,
    /// and the simplex ∞-diameter is at most `xtol`.
    pub xtol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            ftol: 1e-10,
            xtol: 1e-7,
            initial_step: 0.25,
        }
    }
}

pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> LocalResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step * x0[i].abs().max(1.0);
        simplex.push(v);
    }
    let mut fs: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    while iterations < opts.max_iter {
        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]).then(a.cmp(&b)));
        let (best, worst, second) = (order[0], order[n], order[n.saturating_sub(1)]);
        let diam = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = fs[worst] - fs[best];
        if fs[best].is_finite()
            && spread <= opts.ftol * (fs[best].abs() + opts.ftol)
            && diam <= opts.xtol
        {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < fs[best] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[worst] = xe;
                fs[worst] = fe;
            } else {
                simplex[worst] = xr;
                fs[worst] = fr;
            }
            continue;
        }
        if fr < fs[second] {
            simplex[worst] = xr;
            fs[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < fs[worst] {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fs[worst].min(fr) {
            simplex[worst] = xc;
            fs[worst] = fc;
            continue;
        }
        let xb = simplex[best].clone();
        for &i in &order[1..] {
            for (v, b) in simplex[i].iter_mut().zip(&xb) {
                *v = b + 0.5 * (*v - b);
            }
            fs[i] = eval(&simplex[i], &mut evals);
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| fs[a].total_cmp(&fs[b]).then(a.cmp(&b)))
        .unwrap_or(0);
    LocalResult {
        x: simplex[best].clone(),
        f: fs[best],
        iterations,
        evaluations: evals,
        converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Converged when `½‖r‖² ≤ atol`.
    pub atol: f64,
    /// Converged when an accepted step lowers the cost by less than `rtol` relative.
    pub rtol: f64,
    pub gtol: f64,
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            atol: 0.0,
            rtol: 1e-12,
            gtol: 1e-14,
            xtol: 1e-12,
        }
    }
}

/// Levenberg–Marquardt on `½‖r(x)‖²` with a forward-difference Jacobian.
///
/// `res(x, out)` fills the residuals and returns `false` when `x` is not admissible.
pub fn levenberg_marquardt<R: FnMut(&[f64], &mut [f64]) -> bool>(
    mut res: R,
    x0: &[f64],
    m: usize,
    opts: &LmOptions,
) -> LocalResult {
    let k = x0.len();
    let mut evals = 0usize;
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    let mut call = |x: &[f64], out: &mut [f64], evals: &mut usize| -> Option<f64> {
        *evals += 1;
        if !res(x, out) {
            return None;
        }
        let c = 0.5 * out.iter().map(|v| v * v).sum::<f64>();
        c.is_finite().then_some(c)
    };
    let Some(mut cost) = call(&x, &mut r, &mut evals) else {
        return LocalResult {
            x,
            f: f64::INFINITY,
            iterations: 0,
            evaluations: evals,
            converged: false,
        };
    };

    let mut jac = vec![vec![0.0; m]; k];
    let mut xp = x.clone();
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut g = DVector::<f64>::zeros(k);
    let mut r_new = vec![0.0; m];

    let build = |x: &[f64],
                     r: &[f64],
                     jac: &mut Vec<Vec<f64>>,
                     a: &mut DMatrix<f64>,
                     g: &mut DVector<f64>,
                     xp: &mut Vec<f64>,
                     evals: &mut usize,
                     call: &mut dyn FnMut(&[f64], &mut [f64], &mut usize) -> Option<f64>|
     -> bool {
        for i in 0..k {
            xp.copy_from_slice(x);
            let mut h = 1e-7 * x[i].abs().max(1.0);
            xp[i] += h;
            h = xp[i] - x[i];
            let mut ok = call(xp, &mut jac[i], evals).is_some();
            if !ok {
                xp[i] = x[i] - h;
                ok = call(xp, &mut jac[i], evals).is_some();
                h = -h;
            }
            if !ok {
                return false;
            }
            for (jv, rv) in jac[i].iter_mut().zip(r) {
                *jv = (*jv - rv) / h;
            }
        }
        for i in 0..k {
            g[i] = dot(&jac[i], r);
            for j in 0..=i {
                let v = dot(&jac[i], &jac[j]);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        true
    };

    if cost <= opts.atol {
        return LocalResult {
            x,
            f: 2.0 * cost,
            iterations: 0,
            evaluations: evals,
            converged: true,
        };
    }
    if !build(&x, &r, &mut jac, &mut a, &mut g, &mut xp, &mut evals, &mut call) {
        return LocalResult {
            x,
            f: 2.0 * cost,
            iterations: 0,
            evaluations: evals,
            converged: false,
        };
    }
    let max_diag = (0..k).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let mut mu = 1e-3 * max_diag.max(1e-300);
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        if g.amax() <= opts.gtol {
            converged = true;
            break;
        }
        let mut lhs = a.clone();
        for i in 0..k {
            lhs[(i, i)] += mu * a[(i, i)].max(1e-12 * max_diag.max(1e-300));
        }
        let step = match lhs.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => {
                mu *= nu;
                nu *= 2.0;
                continue;
            }
        };
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if step.norm() <= opts.xtol * (xn + opts.xtol) {
            converged = true;
            break;
        }
        let x_new: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let cost_new = call(&x_new, &mut r_new, &mut evals);
        let predicted = {
            let mut s = 0.0;
            for i in 0..k {
                s += step[i] * (mu * lhs_diag_extra(&a, i, max_diag) * step[i] - g[i]);
            }
            0.5 * s
        };
        let accepted = match cost_new {
            Some(cn) if cn < cost => {
                let rho = (cost - cn) / predicted.max(1e-300);
                let rel = (cost - cn) / cost;
                x = x_new;
                std::mem::swap(&mut r, &mut r_new);
                cost = cn;
                mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
                nu = 2.0;
                if cost <= opts.atol || rel <= opts.rtol {
                    converged = true;
                    break;
                }
                true
            }
            _ => false,
        };
        if accepted {
            if !build(&x, &r, &mut jac, &mut a, &mut g, &mut xp, &mut evals, &mut call) {
                break;
            }
        } else {
            mu *= nu;
            nu *= 2.0;
            if !mu.is_finite() || mu > 1e300 {
                break;
            }
        }
    }
    LocalResult {
        x,
        f: 2.0 * cost,
        iterations,
        evaluations: evals,
        converged,
    }
}

#[inline]
fn lhs_diag_extra(a: &DMatrix<f64>, i: usize, max_diag: f64) -> f64 {
    a[(i, i)].max(1e-12 * max_diag.max(1e-300))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    pub gtol: f64,
    pub ftol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            gtol: 1e-6,
            ftol: 1e-12,
        }
    }
}

/// Central-difference gradient with relative step `rel`.
pub fn numeric_gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], rel: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// BFGS with a central-difference gradient and Armijo backtracking.
pub fn bfgs<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> LocalResult {
    let k = x0.len();
    let mut evals = 0usize;
    let mut fe = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut x = DVector::from_column_slice(x0);
    let mut fx = fe(x.as_slice());
    if !fx.is_finite() {
        return LocalResult {
            x: x0.to_vec(),
            f: fx,
            iterations: 0,
            evaluations: 1,
            converged: false,
        };
    }
    let mut g = DVector::from_vec(numeric_gradient(&mut fe, x.as_slice(), 1e-6));
    let mut hinv = DMatrix::<f64>::identity(k, k);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if g.amax() <= opts.gtol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir = -(&hinv * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            hinv = DMatrix::identity(k, k);
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn = &x + t * &dir;
            let fnew = fe(xn.as_slice());
            if fnew.is_finite() && fnew <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            converged = g.amax() <= opts.gtol.sqrt();
            break;
        };
        let gn = DVector::from_vec(numeric_gradient(&mut fe, xn.as_slice(), 1e-6));
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        let df = fx - fnew;
        x = xn;
        g = gn;
        fx = fnew;
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(k, k);
            let left = &i - rho * &s * y.transpose();
            let right = &i - rho * &y * s.transpose();
            hinv = &left * &hinv * &right + rho * &s * s.transpose();
        }
        if df <= opts.ftol * (fx.abs() + opts.ftol) {
            converged = true;
            break;
        }
    }
    LocalResult {
        x: x.as_slice().to_vec(),
        f: fx,
        iterations,
        evaluations: evals,
        converged,
    }
}

/// `n` points in `[0,1)^dim`, one per stratum along every axis.
pub fn latin_hypercube(n: usize, dim: usize, rng: &mut StepRng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..dim {
        for i in (1..n).rev() {
            let r = (rng.uniform() * (i + 1) as f64) as usize;
            perm.swap(i, r.min(i));
        }
        for (i, p) in pts.iter_mut().enumerate() {
            p[j] = (perm[i] as f64 + rng.uniform()) / n as f64;
        }
    }
    pts
}
