//! Candidate latent processes `h_t(θ)` on a fixed observed series.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    stgarch_transition, AgarchParams, IntgarchParams, ModelParams, StarParams, StgarchParams,
};

const WARM_UP_CAP: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatentPath {
    pub values: Vec<f64>,
    pub warm_up: usize,
    pub theta: ModelParams,
}

impl LatentPath {
    /// Values past the warm-up prefix.
    pub fn effective(&self) -> &[f64] {
        &self.values[self.warm_up..]
    }
}

/// `max(p,q,d) + ⌈ln 1e−12 / ln(Σβ + 1e−9)⌉`, capped at 500 but never below the order.
pub fn default_warm_up(order: usize, beta_sum: f64) -> usize {
    let decay = ((1e-12f64).ln() / (beta_sum + 1e-9).ln()).ceil();
    let decay = if decay.is_finite() && decay > 0.0 {
        decay.min(WARM_UP_CAP as f64) as usize
    } else {
        WARM_UP_CAP
    };
    (order + decay).min(WARM_UP_CAP).max(order)
}

/// Warm-up for `theta` under the default rule.
pub fn warm_up_for(theta: &ModelParams) -> usize {
    match theta {
        ModelParams::Stgarch(p) => {
            default_warm_up(p.p().max(p.q()).max(p.d()), p.beta_sum())
        }
        ModelParams::Agarch(p) => default_warm_up(1, p.beta()),
        ModelParams::Intgarch(p) => default_warm_up(1, p.beta()),
        ModelParams::Star(p) => p.p(),
    }
}

fn check_len(x: &[f64], warm_up: usize) -> Result<()> {
    if x.len() <= warm_up {
        return Err(Error::TooShort {
            needed: warm_up + 1,
            got: x.len(),
        });
    }
    Ok(())
}

/// Rejects anything that is not a non-negative integer.
pub fn check_counts(x: &[f64]) -> Result<()> {
    if let Some((t, v)) = x
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0 && v.fract() == 0.0))
    {
        return Err(Error::InvalidInput(format!(
            "count series must hold non-negative integers; x[{t}] = {v}"
        )));
    }
    Ok(())
}

/// An observed series with the summaries every filter start needs.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    pub x: &'a [f64],
    x2: Vec<f64>,
    mean_x2: f64,
}

impl<'a> Prepared<'a> {
    pub fn new(x: &'a [f64]) -> Self {
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let mean_x2 = if x.is_empty() {
            0.0
        } else {
            x2.iter().sum::<f64>() / x.len() as f64
        };
        Self { x, x2, mean_x2 }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn mean_x2(&self) -> f64 {
        self.mean_x2
    }

    /// Writes `h_t(θ)` for every `t` into `out`, which must match the series length.
    pub fn fill(&self, theta: &ModelParams, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.x.len());
        match theta {
            ModelParams::Stgarch(p) => self.fill_stgarch(p, out),
            ModelParams::Agarch(p) => self.fill_agarch(p, out),
            ModelParams::Intgarch(p) => fill_intgarch(p, self.x, out),
            ModelParams::Star(p) => fill_star(p, self.x, out),
        }
    }

    pub fn fill_stgarch(&self, p: &StgarchParams, out: &mut [f64]) {
        let (x, x2) = (self.x, &self.x2[..]);
        let omega = p.omega();
        let gamma = p.gamma();
        let init = self.mean_x2.max(omega);
        let (a1, a2, b) = (p.alpha1(), p.alpha2(), p.beta());
        let d = p.d();
        let has_f = gamma != 0.0 && a2.iter().any(|&a| a != 0.0);
        let n = x.len();

        if a1.len() == 1 && b.len() <= 1 {
            // Hot path: STGARCH(1,1,1) and ARCH(1).
            let (a1, a2) = (a1[0], a2[0]);
            let b1 = b.first().copied().unwrap_or(0.0);
            let mut prev = init;
            let mut prev_x2 = init;
            for t in 0..n {
                let f = if has_f && t >= 1 {
                    stgarch_transition(x[t - 1], gamma)
                } else {
                    0.0
                };
                let s = omega + (a1 + a2 * f) * prev_x2 + b1 * prev;
                out[t] = s;
                prev = s;
                prev_x2 = x2[t];
            }
            return;
        }

        for t in 0..n {
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for (i, (&c1, &c2)) in a1.iter().zip(a2).enumerate() {
                let lag = i + 1;
                let v = if t >= lag { x2[t - lag] } else { init };
                s1 += c1 * v;
                s2 += c2 * v;
            }
            let f = if has_f && t >= d {
                stgarch_transition(x[t - d], gamma)
            } else {
                0.0
            };
            let mut s = omega + s1 + s2 * f;
            for (j, &bj) in b.iter().enumerate() {
                let lag = j + 1;
                s += bj * if t >= lag { out[t - lag] } else { init };
            }
            out[t] = s;
        }
    }

    pub fn fill_agarch(&self, p: &AgarchParams, out: &mut [f64]) {
        let n = self.x.len();
        if n == 0 {
            return;
        }
        let init = self.mean_x2.max(p.omega());
        out[0] = init;
        for t in 1..n {
            out[t] = p.omega() + p.news(self.x[t - 1]) + p.beta() * out[t - 1];
        }
    }
}

fn fill_intgarch(p: &IntgarchParams, x: &[f64], out: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    out[0] = p.omega() / (1.0 - p.beta());
    for t in 1..x.len() {
        out[t] = p.step(x[t - 1], out[t - 1]);
    }
}

fn fill_star(p: &StarParams, x: &[f64], out: &mut [f64]) {
    let order = p.p();
    let mut lags = vec![0.0; order];
    for t in 0..x.len() {
        for (j, lag) in lags.iter_mut().enumerate() {
            *lag = if t > j { x[t - j - 1] } else { 0.0 };
        }
        out[t] = p.mean(&lags);
    }
}

fn run(theta: ModelParams, x: &[f64]) -> Result<LatentPath> {
    let warm_up = warm_up_for(&theta);
    check_len(x, warm_up)?;
    let mut values = vec![0.0; x.len()];
    Prepared::new(x).fill(&theta, &mut values);
    Ok(LatentPath {
        values,
        warm_up,
        theta,
    })
}

/// σ²_t(θ) with pre-sample `x²` and `σ²` set to the sample second moment
/// (floored at ω) and `F = 0` before the first available delayed observation.
pub fn stgarch_filter(theta: &StgarchParams, x: &[f64]) -> Result<LatentPath> {
    run(ModelParams::Stgarch(theta.clone()), x)
}

/// σ²_0 is the sample second moment floored at ω; the recursion runs from `t = 1`.
pub fn agarch_filter(theta: &AgarchParams, x: &[f64]) -> Result<LatentPath> {
    run(ModelParams::Agarch(*theta), x)
}

/// λ_0 = ω/(1−β); the recursion runs from `t = 1`.
pub fn intgarch_filter(theta: &IntgarchParams, x: &[f64]) -> Result<LatentPath> {
    check_counts(x)?;
    run(ModelParams::Intgarch(*theta), x)
}

pub fn star_mean(theta: &StarParams, x: &[f64]) -> Result<LatentPath> {
    run(ModelParams::Star(theta.clone()), x)
}

pub fn filter(theta: &ModelParams, x: &[f64]) -> Result<LatentPath> {
    if let ModelParams::Intgarch(_) = theta {
        check_counts(x)?;
    }
    run(theta.clone(), x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InnovationSpec;
    use crate::simulate::{
        simulate_agarch, simulate_intgarch, simulate_star, simulate_stgarch, SimConfig,
        StarSimOptions,
    };
    use proptest::prelude::*;

    fn theta1() -> StgarchParams {
        StgarchParams::new(2.0, 0.1, vec![0.15], vec![0.2], vec![0.5], 1).unwrap()
    }

    #[test]
    fn warm_up_rule() {
        // ln 1e-12 / ln 0.5 = 39.86 → 40
        assert_eq!(default_warm_up(1, 0.5), 41);
        assert_eq!(default_warm_up(3, 0.999999), 500);
        assert_eq!(default_warm_up(1, 0.0), 3);
    }

    #[test]
    fn arch_output_is_the_kernel() {
        let p = StgarchParams::new(1.3, 0.2, vec![0.3, 0.1], vec![0.1, -0.2], vec![], 2).unwrap();
        let x = [0.5, -1.0, 2.0, 0.3, -0.7, 1.1];
        let lp = stgarch_filter(&p, &x).unwrap();
        for t in 2..x.len() {
            let c = 0.2
                + 0.3 * x[t - 1] * x[t - 1]
                + 0.1 * x[t - 2] * x[t - 2]
                + (0.1 * x[t - 1] * x[t - 1] - 0.2 * x[t - 2] * x[t - 2])
                    * (1.0 / (1.0 + (1.3 * x[t - 2]).exp()) - 0.5);
            assert!((lp.values[t] - c).abs() < 1e-14);
        }
    }

    #[test]
    fn stgarch_filter_recovers_simulated_variance() {
        let path = simulate_stgarch(&theta1(), SimConfig::new(5000, 3), &InnovationSpec::StandardNormal)
            .unwrap();
        let lp = stgarch_filter(&theta1(), &path.x).unwrap();
        for t in 200..path.len() {
            assert!((lp.values[t] - path.latent[t]).abs() < 1e-8);
        }
    }

    #[test]
    fn alpha2_sign_is_invisible_at_gamma_zero() {
        let path = simulate_stgarch(&theta1(), SimConfig::new(1000, 1), &InnovationSpec::StandardNormal)
            .unwrap();
        let a = StgarchParams::new(0.0, 0.1, vec![0.15], vec![0.2], vec![0.5], 1).unwrap();
        let b = StgarchParams::new(0.0, 0.1, vec![0.15], vec![-0.2], vec![0.5], 1).unwrap();
        assert_eq!(stgarch_filter(&a, &path.x).unwrap().values, stgarch_filter(&b, &path.x).unwrap().values);
    }

    #[test]
    fn agarch_cases() {
        let truth = AgarchParams::new(0.05, 0.1, 0.85, 0.3).unwrap();
        let path = simulate_agarch(&truth, SimConfig::new(5000, 4), &InnovationSpec::StandardNormal)
            .unwrap();
        let lp = agarch_filter(&truth, &path.x).unwrap();
        for t in 500..path.len() {
            assert!((lp.values[t] / path.latent[t] - 1.0).abs() < 1e-8);
        }

        let p = AgarchParams::new(0.2, 0.3, 0.0, -0.4).unwrap();
        let lp = agarch_filter(&p, &path.x).unwrap();
        for t in 1..path.len() {
            let u = path.x[t - 1].abs() + 0.4 * path.x[t - 1];
            assert_eq!(lp.values[t], 0.2 + 0.3 * u * u);
        }

        let p = AgarchParams::new(0.2, 0.3, 0.0, 1.0).unwrap();
        let lp = agarch_filter(&p, &[1.5, -2.0, 0.0, 0.0]).unwrap();
        assert_eq!(lp.values[1], 0.2);
        assert_eq!(lp.values[2], 0.2 + 4.0 * 0.3 * 4.0);
    }

    #[test]
    fn intgarch_cases() {
        let truth = IntgarchParams::new(1.0, 0.3, 0.1, 0.2, 3).unwrap();
        let path = simulate_intgarch(&truth, SimConfig::new(2000, 5)).unwrap();
        let lp = intgarch_filter(&truth, &path.x).unwrap();
        for t in 100..path.len() {
            assert!((lp.values[t] - path.latent[t]).abs() < 1e-8);
        }
        let zeros = vec![0.0; 200];
        let lp = intgarch_filter(&truth, &zeros).unwrap();
        assert!((lp.values[199] - 1.25).abs() < 1e-14);
        assert!(intgarch_filter(&truth, &[1.0, 2.5, 3.0]).is_err());
        assert!(intgarch_filter(&truth, &[1.0, -2.0, 3.0]).is_err());
    }

    #[test]
    fn star_hand_evaluation() {
        let p = StarParams::new(vec![vec![0.2, 0.5], vec![-0.4, 0.4]], vec![4.0], vec![0.0], 1).unwrap();
        let x = [0.3, -0.6, 1.2];
        let lp = star_mean(&p, &x).unwrap();
        assert_eq!(lp.warm_up, 1);
        // m_1 at x_0 = 0.3: 0.2 + 0.15 + (-0.4 + 0.12)/(1 + e^{-1.2})
        let g = 1.0 / (1.0 + (-1.2f64).exp());
        assert!((lp.values[1] - (0.35 - 0.28 * g)).abs() < 1e-15);
        let g = 1.0 / (1.0 + (2.4f64).exp());
        assert!((lp.values[2] - (0.2 - 0.3 + (-0.4 - 0.24) * g)).abs() < 1e-15);
        assert!(star_mean(&p, &[1.0]).is_err());
    }

    #[test]
    fn star_mean_matches_simulator() {
        let p = StarParams::new(vec![vec![0.2, 0.5], vec![-0.4, 0.4]], vec![4.0], vec![0.0], 1).unwrap();
        let path = simulate_star(&p, SimConfig::new(1000, 6), StarSimOptions::new(1.0)).unwrap();
        let lp = star_mean(&p, &path.x).unwrap();
        assert_eq!(&lp.values[1..], &path.latent[1..]);
    }

    #[test]
    fn too_short_series() {
        assert!(matches!(stgarch_filter(&theta1(), &[0.1; 10]), Err(Error::TooShort { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn omega_shift_is_monotone(delta in 1e-4..1.0f64, seed in 0u64..1000) {
            let path = simulate_stgarch(&theta1(), SimConfig::new(400, seed), &InnovationSpec::StandardNormal).unwrap();
            let a = stgarch_filter(&theta1(), &path.x).unwrap();
            let q = StgarchParams::new(2.0, 0.1 + delta, vec![0.15], vec![0.2], vec![0.5], 1).unwrap();
            let b = stgarch_filter(&q, &path.x).unwrap();
            for (u, v) in a.values.iter().zip(&b.values) {
                prop_assert!(v - u >= delta * (1.0 - 1e-12));
            }
        }

        #[test]
        fn scale_equivariance(s in 0.1..10.0f64, seed in 0u64..1000) {
            let path = simulate_stgarch(&theta1(), SimConfig::new(400, seed), &InnovationSpec::StandardNormal).unwrap();
            let xs: Vec<f64> = path.x.iter().map(|v| v * s).collect();
            let q = StgarchParams::new(2.0 / s, 0.1 * s * s, vec![0.15], vec![0.2], vec![0.5], 1).unwrap();
            let a = stgarch_filter(&theta1(), &path.x).unwrap();
            let b = stgarch_filter(&q, &xs).unwrap();
            for (u, v) in a.values.iter().zip(&b.values) {
                prop_assert!((v / (s * s) - u).abs() <= 1e-10 * u);
            }
        }
    }
}
