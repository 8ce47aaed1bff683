//! Linear independence of `{1, y, G(y;γᵢ,cᵢ), y·G(y;γᵢ,cᵢ)}` through
//! Gaussian-weighted Gram matrices, and the two-sided Laplace transforms of
//! the logistic transition.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::star_transition;
use crate::quadrature::{adaptive_gk, gauss_hermite};

pub const DEFAULT_DELTA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    pub order: usize,
    pub max_order: usize,
    /// Largest allowed entry change between successive orders.
    pub tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            order: 200,
            max_order: 3200,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Independence {
    Independent,
    Dependent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramReport {
    pub pairs: Vec<(f64, f64)>,
    /// Coefficient names in family order: `d00` (for 1), `d01` (for y), then
    /// `d{i}0` for each `Gᵢ` and `d{i}1` for each `y·Gᵢ`.
    pub labels: Vec<String>,
    /// Unit-diagonal Gram matrix.
    pub gram: Vec<Vec<f64>>,
    pub diagonal: Vec<f64>,
    pub min_eigenvalue: f64,
    pub eigenvalues: Vec<f64>,
    pub normalized: bool,
    pub delta: f64,
    pub quadrature_order: usize,
    pub verdict: Independence,
}

fn labels(k: usize) -> Vec<String> {
    let mut out = vec!["d00".to_string(), "d01".to_string()];
    out.extend((1..=k).map(|i| format!("d{i}0")));
    out.extend((1..=k).map(|i| format!("d{i}1")));
    out
}

/// Values of the family `(1, y, G₁..G_k, yG₁..yG_k)` at `y`.
fn family_at(pairs: &[(f64, f64)], y: f64, out: &mut [f64]) {
    let k = pairs.len();
    out[0] = 1.0;
    out[1] = y;
    for (i, (g, c)) in pairs.iter().enumerate() {
        let v = star_transition(y, *g, *c);
        out[2 + i] = v;
        out[2 + k + i] = y * v;
    }
}

fn raw_gram(pairs: &[(f64, f64)], order: usize) -> Result<DMatrix<f64>> {
    let rule = gauss_hermite(order)?;
    let m = 2 + 2 * pairs.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut f = vec![0.0; m];
    for (y, w) in rule.nodes.iter().zip(&rule.weights) {
        if *w == 0.0 {
            continue;
        }
        family_at(pairs, *y, &mut f);
        for i in 0..m {
            let wi = w * f[i];
            for j in 0..=i {
                a[(i, j)] += wi * f[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
    Ok(a)
}

/// Gram matrix of the family under the standard normal weight, normalized
/// to unit diagonal; independent iff its smallest eigenvalue exceeds `delta`.
pub fn gram_independence(pairs: &[(f64, f64)], spec: &QuadratureSpec, delta: f64) -> Result<GramReport> {
    if let Some((g, c)) = pairs.iter().find(|(g, c)| !(*g > 0.0 && g.is_finite() && c.is_finite())) {
        return Err(Error::InvalidInput(format!("pair (gamma={g}, c={c}) needs gamma > 0")));
    }
    let mut order = spec.order.max(1);
    let mut a = raw_gram(pairs, order)?;
    loop {
        if 2 * order > spec.max_order {
            return Err(Error::Quadrature(format!(
                "Gram entries still moving at order {order} (limit {})",
                spec.max_order
            )));
        }
        let b = raw_gram(pairs, 2 * order)?;
        let change = (&b - &a).amax();
        order *= 2;
        a = b;
        if change <= spec.tol {
            break;
        }
    }
    let m = a.nrows();
    let diag: Vec<f64> = (0..m).map(|i| a[(i, i)]).collect();
    let mut g = a;
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] /= (diag[i] * diag[j]).sqrt();
        }
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(g.clone()).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let min = eig[0];
    Ok(GramReport {
        pairs: pairs.to_vec(),
        labels: labels(pairs.len()),
        gram: (0..m).map(|i| (0..m).map(|j| g[(i, j)]).collect()).collect(),
        diagonal: diag,
        min_eigenvalue: min,
        eigenvalues: eig,
        normalized: true,
        delta,
        quadrature_order: order,
        verdict: if min > delta {
            Independence::Independent
        } else {
            Independence::Dependent
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullVector {
    /// `(label, coefficient)` in the unit-diagonal basis, unit Euclidean norm.
    pub coefficients: Vec<(String, f64)>,
    /// `‖Σ dᵢⱼ fᵢⱼ / ‖fᵢⱼ‖_w‖_w`, the weighted norm of the combination.
    pub residual: f64,
    /// Dimension of the numerical null space.
    pub nullity: usize,
}

/// A canonical near-null coefficient vector when the family is dependent.
///
/// The null space is spanned by eigenvectors with eigenvalue below `delta`;
/// the returned vector is the first row of its reduced row-echelon basis,
/// rescaled to unit length, so exact duplicates give `±1/√2` on the
/// duplicated coordinates.
pub fn null_vector_extract(report: &GramReport) -> Option<NullVector> {
    if report.min_eigenvalue >= report.delta {
        return None;
    }
    let m = report.gram.len();
    let g = DMatrix::from_fn(m, m, |i, j| report.gram[i][j]);
    let eig = SymmetricEigen::new(g.clone());
    let cols: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] < report.delta).collect();
    let r = cols.len();
    // Rows of `basis` span the null space.
    let mut basis = DMatrix::<f64>::from_fn(r, m, |i, j| eig.eigenvectors[(j, cols[i])]);
    let mut row = 0;
    for col in 0..m {
        if row == r {
            break;
        }
        let (piv, val) = (row..r)
            .map(|i| (i, basis[(i, col)].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty pivot range");
        if val < 1e-8 {
            continue;
        }
        basis.swap_rows(row, piv);
        let p = basis[(row, col)];
        for j in 0..m {
            basis[(row, j)] /= p;
        }
        for i in 0..r {
            if i != row {
                let f = basis[(i, col)];
                if f != 0.0 {
                    for j in 0..m {
                        basis[(i, j)] -= f * basis[(row, j)];
                    }
                }
            }
        }
        row += 1;
    }
    let v: Vec<f64> = (0..m).map(|j| basis[(0, j)]).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
    let vv = nalgebra::DVector::from_vec(v.clone());
    let q = (vv.transpose() * &g * &vv)[(0, 0)];
    Some(NullVector {
        coefficients: report.labels.iter().cloned().zip(v).collect(),
        residual: q.max(0.0).sqrt(),
        nullity: r,
    })
}

fn strip_check(s: f64, gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !(s > 0.0 && s < gamma) {
        return Err(Error::Domain(format!(
            "two-sided Laplace transform needs 0 < s < gamma, got s={s}, gamma={gamma}"
        )));
    }
    Ok(())
}

/// `∫ e^{−sy} G(y;γ,c) dy = (π/γ) e^{−cs} / sin(πs/γ)` for `0 < s < γ`.
pub fn logistic_laplace_f0(s: f64, gamma: f64, c: f64) -> Result<f64> {
    strip_check(s, gamma)?;
    let a = PI * s / gamma;
    Ok(PI / gamma * (-c * s).exp() / a.sin())
}

/// `∫ e^{−sy} y G(y;γ,c) dy = (π/γ) c e^{−cs}/sin(πs/γ) + (π/γ)² e^{−cs} cos(πs/γ)/sin²(πs/γ)`.
pub fn logistic_laplace_f1(s: f64, gamma: f64, c: f64) -> Result<f64> {
    strip_check(s, gamma)?;
    let a = PI * s / gamma;
    let e = (-c * s).exp();
    let sn = a.sin();
    Ok(PI / gamma * c * e / sn + (PI / gamma).powi(2) * e * a.cos() / (sn * sn))
}

/// Quadrature oracle for `∫ e^{−sy} yᵏ G(y;γ,c) dy`, `k ∈ {0, 1}`.
///
/// The positive half-line is mapped by `u = e^{−sy}` and the negative one by
/// `u = e^{(γ−s)y}`; both become integrals over `(0, 1]` with at most a
/// logarithmic endpoint singularity.
pub fn laplace_quadrature(s: f64, gamma: f64, c: f64, k: u32) -> Result<f64> {
    strip_check(s, gamma)?;
    let pos = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let y = -u.ln() / s;
        y.powi(k as i32) * star_transition(y, gamma, c) / s
    };
    let r = gamma - s;
    let neg = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let y = u.ln() / r;
        // e^{−sy} G(y) / ((γ−s) u) = e^{−γy} G(y) / (γ−s) = 1 / ((e^{γy} + e^{γc})(γ−s))
        let core = if gamma * c > gamma * y {
            (-gamma * c).exp() / (1.0 + (gamma * (y - c)).exp())
        } else {
            (-gamma * y).exp() / (1.0 + (gamma * (c - y)).exp())
        };
        y.powi(k as i32) * core / r
    };
    let a = adaptive_gk(pos, 0.0, 1.0, 1e-11, 1e-12)?;
    let b = adaptive_gk(neg, 0.0, 1.0, 1e-11, 1e-12)?;
    Ok(a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn single_pair_is_independent() {
        let r = gram_independence(&[(1.0, 0.0)], &spec(), DEFAULT_DELTA).unwrap();
        assert_eq!(r.gram.len(), 4);
        assert_eq!(r.verdict, Independence::Independent);
        for i in 0..4 {
            assert!((r.gram[i][i] - 1.0).abs() < 1e-14);
            for j in 0..4 {
                assert!((r.gram[i][j] - r.gram[j][i]).abs() < 1e-12);
            }
        }
        assert!(null_vector_extract(&r).is_none());
    }

    #[test]
    fn unnormalized_entries_match_closed_forms() {
        // ⟨1,1⟩ = 1, ⟨y,y⟩ = 1, ⟨1,G(·;1,0)⟩ = 1/2 by symmetry.
        let r = gram_independence(&[(1.0, 0.0)], &spec(), DEFAULT_DELTA).unwrap();
        assert!((r.diagonal[0] - 1.0).abs() < 1e-13);
        assert!((r.diagonal[1] - 1.0).abs() < 1e-13);
        let g12 = r.gram[0][2] * (r.diagonal[0] * r.diagonal[2]).sqrt();
        assert!((g12 - 0.5).abs() < 1e-13);
    }

    #[test]
    fn duplicate_pair_is_dependent_with_canonical_null_vector() {
        let r = gram_independence(&[(1.0, 0.0), (1.0, 0.0)], &spec(), DEFAULT_DELTA).unwrap();
        assert!(r.min_eigenvalue < 1e-12);
        assert_eq!(r.verdict, Independence::Dependent);
        let nv = null_vector_extract(&r).unwrap();
        assert_eq!(nv.nullity, 2);
        let c: Vec<f64> = nv.coefficients.iter().map(|x| x.1).collect();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c[2].abs() - h).abs() < 1e-8 && (c[3] + c[2]).abs() < 1e-8);
        assert!(c[0].abs() < 1e-8 && c[1].abs() < 1e-8 && c[4].abs() < 1e-8 && c[5].abs() < 1e-8);
        assert!(nv.residual < 1e-6);
        assert_eq!(nv.coefficients[2].0, "d10");
        assert_eq!(nv.coefficients[3].0, "d20");
    }

    #[test]
    fn near_duplicate_has_small_residual() {
        let r = gram_independence(&[(1.0, 0.0), (1.0, 1e-6)], &spec(), DEFAULT_DELTA).unwrap();
        assert!(r.min_eigenvalue < DEFAULT_DELTA);
        let nv = null_vector_extract(&r).unwrap();
        assert!(nv.residual < 1e-4);
    }

    #[test]
    fn distinct_triple_is_independent() {
        let r = gram_independence(&[(0.5, -1.0), (1.0, 0.0), (2.0, 1.5)], &spec(), DEFAULT_DELTA).unwrap();
        assert_eq!(r.verdict, Independence::Independent);
        assert!(r.min_eigenvalue > DEFAULT_DELTA);
    }

    #[test]
    fn min_eigenvalue_bounds_rayleigh_quotients_and_is_permutation_invariant() {
        let pairs = [(0.7, -0.3), (2.2, 1.1), (1.4, 0.4)];
        let r = gram_independence(&pairs, &spec(), DEFAULT_DELTA).unwrap();
        let m = r.gram.len();
        let g = DMatrix::from_fn(m, m, |i, j| r.gram[i][j]);
        let rng = CounterRng::new(3, 0);
        for t in 0..10 {
            let mut s = rng.at(t);
            let v = nalgebra::DVector::from_fn(m, |_, _| s.uniform() - 0.5);
            let rq = (v.transpose() * &g * &v)[(0, 0)] / v.norm_squared();
            assert!(r.min_eigenvalue <= rq + 1e-15);
        }
        assert!(r.min_eigenvalue >= -1e-10);
        let permuted = [pairs[2], pairs[0], pairs[1]];
        let p = gram_independence(&permuted, &spec(), DEFAULT_DELTA).unwrap();
        assert!((p.min_eigenvalue - r.min_eigenvalue).abs() < 1e-12);
    }

    #[test]
    fn laplace_closed_form_values() {
        assert!((logistic_laplace_f0(0.5, 1.0, 0.0).unwrap() - PI).abs() < 1e-14);
        assert!(logistic_laplace_f1(0.5, 1.0, 0.0).unwrap().abs() < 1e-14);
        for s in [1e-3, 1e-5, 1e-7] {
            assert!((s * logistic_laplace_f0(s, 1.0, 0.0).unwrap() - 1.0).abs() < 2.0 * s);
        }
        for (s, g, c) in [(0.3, 1.0, 0.7), (1.2, 2.5, -1.0)] {
            let f0 = logistic_laplace_f0(s, g, c).unwrap();
            assert!((f0 - (-c * s).exp() * logistic_laplace_f0(s, g, 0.0).unwrap()).abs() < 1e-12 * f0.abs());
            let f1 = logistic_laplace_f1(s, g, c).unwrap();
            let rel = c * f0 + logistic_laplace_f1(s, g, 0.0).unwrap() * (-c * s).exp();
            assert!((f1 - rel).abs() < 1e-12 * f1.abs().max(1.0));
        }
        assert!(matches!(logistic_laplace_f0(1.0, 1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(logistic_laplace_f1(0.0, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn laplace_closed_forms_match_quadrature() {
        for (s, g, c) in [(0.5, 1.0, 0.0), (0.3, 1.0, 0.7), (0.05, 0.2, -2.0), (3.9, 4.0, 1.0)] {
            let f0 = logistic_laplace_f0(s, g, c).unwrap();
            let q0 = laplace_quadrature(s, g, c, 0).unwrap();
            assert!((f0 - q0).abs() <= 1e-6 * f0.abs(), "F0 {s} {g} {c}: {f0} vs {q0}");
            let f1 = logistic_laplace_f1(s, g, c).unwrap();
            let q1 = laplace_quadrature(s, g, c, 1).unwrap();
            assert!((f1 - q1).abs() <= 1e-6 * f1.abs().max(1e-3), "F1 {s} {g} {c}: {f1} vs {q1}");
        }
    }
}
