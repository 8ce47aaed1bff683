//! Gauss–Hermite rules for the standard normal weight and adaptive
//! Gauss–Kronrod integration on finite intervals.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights with `Σ wᵢ f(yᵢ) ≈ ∫ f(y) φ(y) dy`, `φ` the standard normal density.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HermiteRule {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(y, w)| w * f(*y)).sum()
    }
}

/// Orthonormal Hermite recurrence at `z`, rescaled to avoid overflow.
/// Returns `(p_n, p_{n-1}, log_scale)` with the true values equal to the
/// returned ones times `exp(log_scale)`.
fn hermite_pair(n: usize, z: f64) -> (f64, f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    let mut log_scale = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
        let m = p1.abs().max(p2.abs());
        if m > 1e150 {
            p1 /= m;
            p2 /= m;
            log_scale += m.ln();
        }
    }
    (p1, p2, log_scale)
}

/// Eigenvalues of the symmetric tridiagonal matrix with zero diagonal and
/// off-diagonal `e` (implicit QL with Wilkinson shifts).
fn tridiagonal_eigenvalues(mut e: Vec<f64>) -> Result<Vec<f64>> {
    let n = e.len() + 1;
    let mut d = vec![0.0f64; n];
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * (dd + 1e-3) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Quadrature("tridiagonal QL iteration did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Physicists' Gauss–Hermite nodes and weights: Jacobi-matrix eigenvalues
/// polished by Newton steps on the orthonormal recurrence.
fn physicists(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let e: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let guesses = tridiagonal_eigenvalues(e)?;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Largest roots first; the mirror image fills the other half.
        let mut z = guesses[n - 1 - i].abs();
        if n % 2 == 1 && i == m - 1 {
            z = 0.0;
        }
        let mut pp_log = 0.0;
        for _ in 0..20 {
            let (p1, p2, ls) = hermite_pair(n, z);
            let pp = (2.0 * n as f64).sqrt() * p2;
            let step = p1 / pp;
            pp_log = pp.abs().ln() + ls;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
            z -= step;
        }
        if !z.is_finite() {
            return Err(Error::Quadrature(format!(
                "Gauss-Hermite root {i} of order {n} is not finite"
            )));
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        let wi = (2.0f64.ln() - 2.0 * pp_log).exp();
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    Ok((x, w))
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<HermiteRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<HermiteRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Hermite rule of order `n` for the standard normal weight (cached).
pub fn gauss_hermite(n: usize) -> Result<Arc<HermiteRule>> {
    if n == 0 {
        return Err(Error::InvalidInput("quadrature order must be positive".into()));
    }
    if let Some(r) = cache().lock().expect("cache lock").get(&n) {
        return Ok(r.clone());
    }
    let (x, w) = physicists(n)?;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    // Ascending node order.
    let mut pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(&w)
        .map(|(x, w)| (std::f64::consts::SQRT_2 * x, w / sqrt_pi))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rule = Arc::new(HermiteRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    });
    cache().lock().expect("cache lock").insert(n, rule.clone());
    Ok(rule)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7/K15 panel: (Kronrod estimate, |Kronrod − Gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive G7/K15 on `[a, b]` until the summed error estimate is at most
/// `max(abs_tol, rel_tol·|I|)`.
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let mut panels = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..5000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature("integrand produced a non-finite value".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one panel");
        let (lo, hi, _, _) = panels.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature("panel width reached machine precision".into()));
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    Err(Error::Quadrature("adaptive refinement exhausted 5000 bisections".into()))
}
