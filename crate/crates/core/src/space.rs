//! Unconstrained coordinates for each family and data-scaled start boxes.
//!
//! Maps (natural ← unconstrained):
//!
//! | family   | map |
//! |----------|-----|
//! | STGARCH  | `γ = γ_max·σ(v)`, `ω = eᵂ`, `α1ᵢ = e^{aᵢ}`, `α2ᵢ = 2α1ᵢ·tanh(uᵢ)`, `βⱼ = e^{bⱼ}/(1+Σe^{bₖ})` |
//! | AGARCH   | `ω = eᵂ`, `α = eᵃ`, `β = σ(b)`, `γ = tanh(g)` |
//! | INTGARCH | `ω = eᵂ`, `α1, α2, β = σ(·)` with `l` held fixed |
//! | STAR     | `φ` free, `ln γᵢ` squashed into `[ln γ_lo, ln γ_hi]`, `c₁ = z₁`, `cᵢ = cᵢ₋₁ + e^{zᵢ}` |
//!
//! where `σ` is the logistic function.

use crate::model::{
    AgarchParams, Family, IntgarchParams, ModelParams, StarParams, StgarchParams,
};

pub const STGARCH_GAMMA_MAX: f64 = 50.0;
pub const STAR_GAMMA_MIN: f64 = 0.01;
pub const STAR_GAMMA_MAX: f64 = 100.0;

/// Keeps inverse maps finite when a natural coordinate sits on a boundary.
const EDGE: f64 = 1e-12;

#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn logit(p: f64) -> f64 {
    let p = p.clamp(EDGE, 1.0 - EDGE);
    (p / (1.0 - p)).ln()
}

#[inline]
fn safe_ln(x: f64) -> f64 {
    x.max(1e-300).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Stgarch { q: usize, p: usize, d: usize, gamma_max: f64 },
    Agarch,
    Intgarch { l: u64 },
    Star { m: usize, p: usize, d: usize, gamma_lo: f64, gamma_hi: f64 },
}

/// Summary statistics used to scale start boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct DataScale {
    pub mean: f64,
    pub mean_sq: f64,
    pub sd: f64,
    /// Empirical deciles 0.1, …, 0.9.
    pub deciles: Vec<f64>,
}

impl DataScale {
    pub fn of(x: &[f64]) -> Self {
        let n = x.len().max(1) as f64;
        let mean = x.iter().sum::<f64>() / n;
        let mean_sq = x.iter().map(|v| v * v).sum::<f64>() / n;
        let sd = (mean_sq - mean * mean).max(0.0).sqrt();
        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let deciles = (1..10)
            .map(|k| {
                if sorted.is_empty() {
                    0.0
                } else {
                    let pos = k as f64 / 10.0 * (sorted.len() - 1) as f64;
                    let lo = pos.floor() as usize;
                    let hi = pos.ceil() as usize;
                    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
                }
            })
            .collect();
        Self {
            mean,
            mean_sq,
            sd,
            deciles,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    pub shape: Shape,
}

impl Space {
    pub fn new(shape: Shape) -> Self {
        Self { shape }
    }

    pub fn stgarch(q: usize, p: usize, d: usize) -> Self {
        Self::new(Shape::Stgarch {
            q,
            p,
            d,
            gamma_max: STGARCH_GAMMA_MAX,
        })
    }

    pub fn star(m: usize, p: usize, d: usize) -> Self {
        Self::new(Shape::Star {
            m,
            p,
            d,
            gamma_lo: STAR_GAMMA_MIN,
            gamma_hi: STAR_GAMMA_MAX,
        })
    }

    /// The space `theta` lives in, with its integer parameters held fixed.
    pub fn like(theta: &ModelParams) -> Self {
        match theta {
            ModelParams::Stgarch(p) => Self::stgarch(p.q(), p.p(), p.d()),
            ModelParams::Agarch(_) => Self::new(Shape::Agarch),
            ModelParams::Intgarch(p) => Self::new(Shape::Intgarch { l: p.l() }),
            ModelParams::Star(p) => Self::star(p.m(), p.p(), p.d()),
        }
    }

    pub fn family(&self) -> Family {
        match self.shape {
            Shape::Stgarch { .. } => Family::Stgarch,
            Shape::Agarch => Family::Agarch,
            Shape::Intgarch { .. } => Family::Intgarch,
            Shape::Star { .. } => Family::Star,
        }
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Stgarch { q, p, .. } => 2 + 2 * q + p,
            Shape::Agarch | Shape::Intgarch { .. } => 4,
            Shape::Star { m, p, .. } => (m + 1) * (p + 1) + 2 * m,
        }
    }

    /// Natural parameters for `u`, or `None` when the image fails validation
    /// (which only happens through overflow or rounding onto a boundary).
    pub fn to_params(&self, u: &[f64]) -> Option<ModelParams> {
        debug_assert_eq!(u.len(), self.dim());
        if u.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let out = match self.shape {
            Shape::Stgarch {
                q,
                p,
                d,
                gamma_max,
            } => {
                let gamma = gamma_max * logistic(u[0]);
                let omega = u[1].exp();
                let a1: Vec<f64> = u[2..2 + q].iter().map(|v| v.exp()).collect();
                let a2: Vec<f64> = a1
                    .iter()
                    .zip(&u[2 + q..2 + 2 * q])
                    .map(|(a, v)| 2.0 * a * v.tanh())
                    .collect();
                let eb: Vec<f64> = u[2 + 2 * q..2 + 2 * q + p].iter().map(|v| v.exp()).collect();
                let denom = 1.0 + eb.iter().sum::<f64>();
                let beta: Vec<f64> = eb.iter().map(|e| e / denom).collect();
                ModelParams::Stgarch(StgarchParams::new(gamma, omega, a1, a2, beta, d).ok()?)
            }
            Shape::Agarch => ModelParams::Agarch(
                AgarchParams::new(u[0].exp(), u[1].exp(), logistic(u[2]), u[3].tanh()).ok()?,
            ),
            Shape::Intgarch { l } => ModelParams::Intgarch(
                IntgarchParams::new(u[0].exp(), logistic(u[1]), logistic(u[2]), logistic(u[3]), l)
                    .ok()?,
            ),
            Shape::Star {
                m,
                p,
                d,
                gamma_lo,
                gamma_hi,
            } => {
                let w = p + 1;
                let regimes: Vec<Vec<f64>> = (0..=m).map(|i| u[i * w..(i + 1) * w].to_vec()).collect();
                let off = (m + 1) * w;
                let (llo, lhi) = (gamma_lo.ln(), gamma_hi.ln());
                let gamma: Vec<f64> = u[off..off + m]
                    .iter()
                    .map(|g| (llo + (lhi - llo) * logistic(*g)).exp())
                    .collect();
                let mut c = Vec::with_capacity(m);
                for (i, z) in u[off + m..off + 2 * m].iter().enumerate() {
                    c.push(if i == 0 { *z } else { c[i - 1] + z.exp() });
                }
                ModelParams::Star(StarParams::new(regimes, gamma, c, d).ok()?)
            }
        };
        Some(out)
    }

    /// Unconstrained coordinates of `theta`; boundary values are pulled inside by a hair.
    pub fn from_params(&self, theta: &ModelParams) -> Option<Vec<f64>> {
        let u = match (&self.shape, theta) {
            (Shape::Stgarch { q, p, gamma_max, .. }, ModelParams::Stgarch(t))
                if t.q() == *q && t.p() == *p =>
            {
                let mut u = vec![logit(t.gamma() / gamma_max), safe_ln(t.omega())];
                u.extend(t.alpha1().iter().map(|a| safe_ln(*a)));
                for (a1, a2) in t.alpha1().iter().zip(t.alpha2()) {
                    let r = if *a1 > 0.0 { a2 / (2.0 * a1) } else { 0.0 };
                    u.push(r.clamp(-1.0 + EDGE, 1.0 - EDGE).atanh());
                }
                let rest = (1.0 - t.beta_sum()).max(EDGE);
                u.extend(t.beta().iter().map(|b| safe_ln(*b / rest)));
                u
            }
            (Shape::Agarch, ModelParams::Agarch(t)) => vec![
                safe_ln(t.omega()),
                safe_ln(t.alpha()),
                logit(t.beta()),
                t.gamma().clamp(-1.0 + EDGE, 1.0 - EDGE).atanh(),
            ],
            (Shape::Intgarch { .. }, ModelParams::Intgarch(t)) => vec![
                safe_ln(t.omega()),
                logit(t.alpha1()),
                logit(t.alpha2()),
                logit(t.beta()),
            ],
            (
                Shape::Star {
                    m,
                    p,
                    gamma_lo,
                    gamma_hi,
                    ..
                },
                ModelParams::Star(t),
            ) if t.m() == *m && t.p() == *p => {
                let mut u: Vec<f64> = t.regimes().iter().flatten().copied().collect();
                let (llo, lhi) = (gamma_lo.ln(), gamma_hi.ln());
                u.extend(t.gamma().iter().map(|g| logit((g.ln() - llo) / (lhi - llo))));
                for (i, c) in t.c().iter().enumerate() {
                    u.push(if i == 0 { *c } else { safe_ln(c - t.c()[i - 1]) });
                }
                u
            }
            _ => return None,
        };
        Some(u)
    }

    /// Maps a point of the unit cube to a start in natural coordinates.
    pub fn start_from_unit(&self, v: &[f64], scale: &DataScale) -> ModelParams {
        let lerp = |lo: f64, hi: f64, t: f64| lo + (hi - lo) * t;
        let loglerp = |lo: f64, hi: f64, t: f64| (lo.ln() + (hi.ln() - lo.ln()) * t).exp();
        let var = scale.mean_sq.max(1e-12);
        match self.shape {
            Shape::Stgarch { q, p, d, gamma_max } => {
                let gamma = loglerp(0.05, 10.0f64.min(gamma_max), v[0]);
                let omega = loglerp(0.01 * var, var, v[1]);
                let a1: Vec<f64> = (0..q).map(|i| lerp(0.01, 0.4, v[2 + i]) / q as f64).collect();
                let a2: Vec<f64> = (0..q)
                    .map(|i| 2.0 * a1[i] * lerp(-0.9, 0.9, v[2 + q + i]))
                    .collect();
                let beta: Vec<f64> = (0..p)
                    .map(|j| lerp(0.05, 0.9, v[2 + 2 * q + j]) / p as f64)
                    .collect();
                StgarchParams::new(gamma, omega, a1, a2, beta, d)
                    .expect("start box lies inside the parameter space")
                    .into()
            }
            Shape::Agarch => AgarchParams::new(
                loglerp(0.01 * var, var, v[0]),
                lerp(0.01, 0.4, v[1]),
                lerp(0.3, 0.95, v[2]),
                lerp(-0.9, 0.9, v[3]),
            )
            .expect("start box lies inside the parameter space")
            .into(),
            Shape::Intgarch { l } => {
                let m = scale.mean.max(1e-3);
                IntgarchParams::new(
                    loglerp(0.05 * m, m, v[0]),
                    lerp(0.05, 0.8, v[1]),
                    lerp(0.05, 0.8, v[2]),
                    lerp(0.05, 0.8, v[3]),
                    l,
                )
                .expect("start box lies inside the parameter space")
                .into()
            }
            Shape::Star {
                m,
                p,
                d,
                gamma_lo,
                gamma_hi,
            } => {
                let w = p + 1;
                let sd = scale.sd.max(1e-6);
                let regimes: Vec<Vec<f64>> = (0..=m)
                    .map(|i| {
                        (0..w)
                            .map(|j| {
                                let t = v[i * w + j];
                                if j == 0 {
                                    lerp(-sd, sd, t)
                                } else {
                                    lerp(-0.9, 0.9, t)
                                }
                            })
                            .collect()
                    })
                    .collect();
                let off = (m + 1) * w;
                let gamma: Vec<f64> = (0..m)
                    .map(|i| loglerp(0.5f64.max(gamma_lo), 20.0f64.min(gamma_hi), v[off + i]))
                    .collect();
                let lo = scale.deciles.first().copied().unwrap_or(-1.0);
                let hi = scale.deciles.last().copied().unwrap_or(1.0);
                let mut c: Vec<f64> = (0..m).map(|i| lerp(lo, hi, v[off + m + i])).collect();
                c.sort_by(f64::total_cmp);
                for i in 1..m {
                    if c[i] <= c[i - 1] {
                        c[i] = c[i - 1] + 1e-3 * sd;
                    }
                }
                StarParams::new(regimes, gamma, c, d)
                    .expect("start box lies inside the parameter space")
                    .into()
            }
        }
    }

    /// True when a smoothness coordinate of `theta` sits within `tol` (relative) of its search cap.
    pub fn at_gamma_cap(&self, theta: &ModelParams, tol: f64) -> bool {
        match (&self.shape, theta) {
            (Shape::Stgarch { gamma_max, .. }, ModelParams::Stgarch(t)) => {
                t.gamma() >= gamma_max * (1.0 - tol)
            }
            (Shape::Star { gamma_hi, .. }, ModelParams::Star(t)) => {
                t.gamma().iter().any(|g| *g >= gamma_hi * (1.0 - tol))
            }
            _ => false,
        }
    }
}
