//! Path simulation with burn-in.
//!
//! Draws at retained-or-discarded step `t` (counting burn-in) come from the
//! stream `CounterRng::new(seed, path_id).at(t)`, so two families fed the same
//! seed see the same innovations step by step.

use std::io::{self, Write};

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{
    stgarch_transition, AgarchParams, Family, InnovationSpec, IntgarchParams, ModelParams, StarParams,
    StgarchParams,
};
use crate::rng::{CounterRng, StepRng};
use crate::stationarity::{star_partial_sum_condition, star_sup_condition, SupGrid, Verdict};

pub const DEFAULT_BURN_IN: usize = 2000;
const DIVERGENCE_BOUND: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub n: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub path_id: u32,
}

impl SimConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            burn_in: DEFAULT_BURN_IN,
            seed,
            path_id: 0,
        }
    }

    pub fn burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn path_id(mut self, path_id: u32) -> Self {
        self.path_id = path_id;
        self
    }

    fn total(&self) -> Result<usize> {
        self.n.checked_add(self.burn_in).ok_or_else(|| {
            Error::InvalidInput(format!(
                "n + burn_in overflows ({} + {})",
                self.n, self.burn_in
            ))
        })
    }
}

/// Observed series with its latent truth (σ², λ or m) and provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimPath {
    pub family: Family,
    pub x: Vec<f64>,
    pub latent: Vec<f64>,
    pub seed: u64,
    pub path_id: u32,
    pub burn_in: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub innovation: Option<InnovationSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    /// Set when no stationarity criterion backs the parameters.
    pub unverified_stationarity: bool,
    /// Set when some `|x_t|` or latent value exceeded 1e10 or became non-finite.
    pub diverged: bool,
    pub warnings: Vec<String>,
}

impl SimPath {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// CSV with header `t,x,latent`; floats use the shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,latent")?;
        for (t, (x, l)) in self.x.iter().zip(&self.latent).enumerate() {
            writeln!(w, "{t},{x:?},{l:?}")?;
        }
        Ok(())
    }
}

fn diverged(x: f64, h: f64) -> bool {
    !(x.abs() < DIVERGENCE_BOUND && h.abs() < DIVERGENCE_BOUND)
}

pub fn simulate_stgarch(
    params: &StgarchParams,
    cfg: SimConfig,
    innov: &InnovationSpec,
) -> Result<SimPath> {
    let sampler = innov.sampler()?;
    let rng = CounterRng::new(cfg.seed, cfg.path_id);
    let mut path = stgarch_with(params, cfg, |t| sampler.draw(&mut rng.at(t)))?;
    path.innovation = Some(innov.clone());
    Ok(path)
}

pub(crate) fn stgarch_with(
    params: &StgarchParams,
    cfg: SimConfig,
    mut eta: impl FnMut(u64) -> f64,
) -> Result<SimPath> {
    let total = cfg.total()?;
    let (q, p, d) = (params.q(), params.p(), params.d());
    let (a1, a2, b) = (params.alpha1(), params.alpha2(), params.beta());
    let (omega, gamma) = (params.omega(), params.gamma());
    let sigma_init = omega / (1.0 - params.beta_sum());

    let mut x = vec![0.0; total];
    let mut h = vec![0.0; total];
    let mut div = false;
    for t in 0..total {
        let lag_x = |i: usize| if t >= i { x[t - i] } else { 0.0 };
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for i in 1..=q {
            let x2 = lag_x(i) * lag_x(i);
            s1 += a1[i - 1] * x2;
            s2 += a2[i - 1] * x2;
        }
        let mut sig = omega + s1 + s2 * stgarch_transition(lag_x(d), gamma);
        for j in 1..=p {
            sig += b[j - 1] * if t >= j { h[t - j] } else { sigma_init };
        }
        h[t] = sig;
        x[t] = sig.sqrt() * eta(t as u64);
        div |= diverged(x[t], sig);
    }

    let mut warnings = Vec::new();
    let unverified = p + q > 2;
    if unverified {
        warnings.push(format!(
            "no stationarity criterion is available for STGARCH({p},{q},{d}); \
             the path relies on empirical diagnostics only"
        ));
    }
    if div {
        warnings.push("path diverged".to_string());
    }
    Ok(SimPath {
        family: Family::Stgarch,
        x: x.split_off(cfg.burn_in),
        latent: h.split_off(cfg.burn_in),
        seed: cfg.seed,
        path_id: cfg.path_id,
        burn_in: cfg.burn_in,
        innovation: None,
        noise_sd: None,
        unverified_stationarity: unverified,
        diverged: div,
        warnings,
    })
}

pub fn simulate_agarch(
    params: &AgarchParams,
    cfg: SimConfig,
    innov: &InnovationSpec,
) -> Result<SimPath> {
    let sampler = innov.sampler()?;
    let rng = CounterRng::new(cfg.seed, cfg.path_id);
    let mut path = agarch_with(params, cfg, |t| sampler.draw(&mut rng.at(t)))?;
    path.innovation = Some(innov.clone());
    Ok(path)
}

pub(crate) fn agarch_with(
    params: &AgarchParams,
    cfg: SimConfig,
    mut eta: impl FnMut(u64) -> f64,
) -> Result<SimPath> {
    let total = cfg.total()?;
    let mut x = Vec::with_capacity(cfg.n);
    let mut h = Vec::with_capacity(cfg.n);
    let mut x_prev = 0.0;
    let mut h_prev = params.omega() / (1.0 - params.beta());
    let mut div = false;
    for t in 0..total {
        let sig = params.omega() + params.news(x_prev) + params.beta() * h_prev;
        let xt = sig.sqrt() * eta(t as u64);
        div |= diverged(xt, sig);
        if t >= cfg.burn_in {
            x.push(xt);
            h.push(sig);
        }
        x_prev = xt;
        h_prev = sig;
    }
    Ok(SimPath {
        family: Family::Agarch,
        x,
        latent: h,
        seed: cfg.seed,
        path_id: cfg.path_id,
        burn_in: cfg.burn_in,
        innovation: None,
        noise_sd: None,
        unverified_stationarity: false,
        diverged: div,
        warnings: if div { vec!["path diverged".into()] } else { vec![] },
    })
}

/// Simulates any family: `innov` drives the GARCH families, `star` the STAR noise.
pub fn simulate_model(
    theta: &ModelParams,
    cfg: SimConfig,
    innov: &InnovationSpec,
    star: StarSimOptions,
) -> Result<SimPath> {
    match theta {
        ModelParams::Stgarch(p) => simulate_stgarch(p, cfg, innov),
        ModelParams::Agarch(p) => simulate_agarch(p, cfg, innov),
        ModelParams::Intgarch(p) => simulate_intgarch(p, cfg),
        ModelParams::Star(p) => simulate_star(p, cfg, star),
    }
}

/// Poisson variate: inversion below 30, Hörmann's PTRS rejection above.
pub fn poisson(lambda: f64, rng: &mut StepRng) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < 30.0 {
        let u = rng.uniform();
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
            if p == 0.0 && cdf < u {
                // Tail mass lost to rounding; u sits in the last ulp.
                break;
            }
        }
        return k;
    }
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

pub fn simulate_intgarch(params: &IntgarchParams, cfg: SimConfig) -> Result<SimPath> {
    let rate = params.beta() + params.alpha1().max(params.alpha2());
    if rate >= 1.0 {
        return Err(Error::NonStationary(format!(
            "beta + max(alpha1, alpha2) = {rate} is not below 1"
        )));
    }
    let total = cfg.total()?;
    let rng = CounterRng::new(cfg.seed, cfg.path_id);
    let mut x = Vec::with_capacity(cfg.n);
    let mut lam = Vec::with_capacity(cfg.n);
    let mut x_prev = 0.0;
    let mut l_prev = params.omega() / (1.0 - params.beta());
    for t in 0..total {
        let l = params.step(x_prev, l_prev);
        let xt = poisson(l, &mut rng.at(t as u64)) as f64;
        if t >= cfg.burn_in {
            x.push(xt);
            lam.push(l);
        }
        x_prev = xt;
        l_prev = l;
    }
    Ok(SimPath {
        family: Family::Intgarch,
        x,
        latent: lam,
        seed: cfg.seed,
        path_id: cfg.path_id,
        burn_in: cfg.burn_in,
        innovation: None,
        noise_sd: None,
        unverified_stationarity: false,
        diverged: false,
        warnings: vec![],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarSimOptions {
    pub noise_sd: f64,
    /// Simulate even when neither sufficient stationarity condition holds.
    pub allow_nonstationary: bool,
}

impl StarSimOptions {
    pub fn new(noise_sd: f64) -> Self {
        Self {
            noise_sd,
            allow_nonstationary: false,
        }
    }
}

pub fn simulate_star(params: &StarParams, cfg: SimConfig, opts: StarSimOptions) -> Result<SimPath> {
    if !(opts.noise_sd > 0.0 && opts.noise_sd.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise_sd must be positive, got {}",
            opts.noise_sd
        )));
    }
    let p = params.p();
    if p == 0 {
        return Err(Error::InvalidInput("STAR order p must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    let sup = star_sup_condition(params, &SupGrid::default());
    let partial = star_partial_sum_condition(params);
    let verified = sup.verdict == Verdict::Pass || partial.verdict == Verdict::Pass;
    if !verified {
        if !opts.allow_nonstationary {
            return Err(Error::NonStationary(format!(
                "neither sufficient condition holds (sup sum {}, partial-sum max {})",
                sup.value, partial.value
            )));
        }
        warnings.push("simulating without a stationarity guarantee (override)".to_string());
    }

    let total = cfg.total()?;
    let rng = CounterRng::new(cfg.seed, cfg.path_id);
    let mut x = vec![0.0; total];
    let mut m = vec![0.0; total];
    let mut lags = vec![0.0; p];
    let mut div = false;
    for t in 0..total {
        for (j, lag) in lags.iter_mut().enumerate() {
            *lag = if t > j { x[t - j - 1] } else { 0.0 };
        }
        let mt = params.mean(&lags);
        let eps: f64 = StandardNormal.sample(&mut rng.at(t as u64));
        m[t] = mt;
        x[t] = mt + opts.noise_sd * eps;
        div |= diverged(x[t], mt);
    }
    if div {
        warnings.push("path diverged".to_string());
    }
    Ok(SimPath {
        family: Family::Star,
        x: x.split_off(cfg.burn_in),
        latent: m.split_off(cfg.burn_in),
        seed: cfg.seed,
        path_id: cfg.path_id,
        burn_in: cfg.burn_in,
        innovation: None,
        noise_sd: Some(opts.noise_sd),
        unverified_stationarity: !verified,
        diverged: div,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    /// Batch-means standard error; accounts for serial dependence.
    fn batch_se(xs: &[f64], batches: usize) -> (f64, f64) {
        let len = xs.len() / batches;
        let means: Vec<f64> = (0..batches)
            .map(|b| xs[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
            .collect();
        let (m, se) = mean_and_se(&means);
        (m, se)
    }

    #[test]
    fn garch_unconditional_variance() {
        let p = StgarchParams::new(0.0, 0.1, vec![0.2], vec![0.0], vec![0.5], 1).unwrap();
        let path = simulate_stgarch(&p, SimConfig::new(200_000, 11), &InnovationSpec::StandardNormal)
            .unwrap();
        let x2: Vec<f64> = path.x.iter().map(|x| x * x).collect();
        let (m, se) = batch_se(&x2, 100);
        assert!((m - 1.0 / 3.0).abs() < 3.0 * se, "mean {m}, se {se}");
    }

    #[test]
    fn empty_and_reproducible() {
        let p = StgarchParams::new(2.0, 0.1, vec![0.15], vec![0.2], vec![0.5], 1).unwrap();
        let e = simulate_stgarch(&p, SimConfig::new(0, 1), &InnovationSpec::StandardNormal).unwrap();
        assert!(e.is_empty() && e.latent.is_empty());
        let a = simulate_stgarch(&p, SimConfig::new(500, 9), &InnovationSpec::StandardNormal).unwrap();
        let b = simulate_stgarch(&p, SimConfig::new(500, 9), &InnovationSpec::StandardNormal).unwrap();
        assert_eq!(a, b);
        let c = simulate_stgarch(&p, SimConfig::new(500, 10), &InnovationSpec::StandardNormal).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn overflowing_length_is_rejected() {
        let p = StgarchParams::new(2.0, 0.1, vec![0.15], vec![0.2], vec![0.5], 1).unwrap();
        let cfg = SimConfig::new(usize::MAX, 1);
        assert!(matches!(
            simulate_stgarch(&p, cfg, &InnovationSpec::StandardNormal),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn stgarch_variance_floor_and_general_order_flag() {
        let p = StgarchParams::new(1.5, 0.05, vec![0.1, 0.05], vec![-0.15, 0.1], vec![0.3, 0.2], 2)
            .unwrap();
        let path = simulate_stgarch(&p, SimConfig::new(20_000, 3), &InnovationSpec::StandardNormal)
            .unwrap();
        assert!(path.latent.iter().all(|&h| h >= 0.05));
        assert!(path.unverified_stationarity);
        assert!(!path.warnings.is_empty());
    }

    #[test]
    fn agarch_symmetric_case_is_garch() {
        let a = AgarchParams::new(0.1, 0.2, 0.5, 0.0).unwrap();
        let g = StgarchParams::new(0.0, 0.1, vec![0.2], vec![0.0], vec![0.5], 1).unwrap();
        let cfg = SimConfig::new(3000, 5);
        let pa = simulate_agarch(&a, cfg, &InnovationSpec::StandardNormal).unwrap();
        let pg = simulate_stgarch(&g, cfg, &InnovationSpec::StandardNormal).unwrap();
        for (a, g) in pa.x.iter().zip(&pg.x).chain(pa.latent.iter().zip(&pg.latent)) {
            assert!((a - g).abs() <= 1e-12 * g.abs().max(1e-300));
        }
    }

    #[test]
    fn agarch_negative_news_quadruples() {
        let a = AgarchParams::new(0.1, 0.2, 0.3, 1.0).unwrap();
        let path = agarch_with(&a, SimConfig::new(50, 0).burn_in(5), |_| -0.8).unwrap();
        for t in 1..path.len() {
            let x = path.x[t - 1];
            assert!(x < 0.0);
            let expect = 0.1 + 4.0 * 0.2 * x * x + 0.3 * path.latent[t - 1];
            assert!((path.latent[t] - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn intgarch_step_arithmetic() {
        let p = IntgarchParams::new(1.0, 0.3, 0.1, 0.2, 3).unwrap();
        assert!((p.step(5.0, 2.0) - 2.5).abs() < 1e-15);
        // at or below the threshold the excess term vanishes
        assert_eq!(p.step(3.0, 2.0), 1.0 + 0.9 + 0.4);
    }

    #[test]
    fn intgarch_rejects_nonstationary() {
        let p = IntgarchParams::new(1.0, 0.4, 0.2, 0.7, 3).unwrap();
        assert!(matches!(
            simulate_intgarch(&p, SimConfig::new(10, 1)),
            Err(Error::NonStationary(_))
        ));
    }

    #[test]
    fn intgarch_counts_and_tower_property() {
        let p = IntgarchParams::new(1.0, 0.5, 0.2, 0.2, 4).unwrap();
        let path = simulate_intgarch(&p, SimConfig::new(100_000, 21)).unwrap();
        assert!(path.x.iter().all(|&x| x >= 0.0 && x.fract() == 0.0));
        assert!(path.latent.iter().all(|&l| l >= 1.0));
        let diff: Vec<f64> = path.x.iter().zip(&path.latent).map(|(x, l)| x - l).collect();
        let (m, se) = mean_and_se(&diff);
        assert!(m.abs() < 3.0 * se, "mean diff {m}, se {se}");
    }

    #[test]
    fn poisson_moments_both_branches() {
        for (lambda, seed) in [(0.7, 1u64), (12.0, 2), (30.0, 3), (250.0, 4)] {
            let rng = CounterRng::new(seed, 0);
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|t| poisson(lambda, &mut rng.at(t)) as f64).collect();
            let (m, se) = mean_and_se(&xs);
            assert!((m - lambda).abs() < 4.0 * se, "lambda {lambda}: mean {m}");
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            assert!((v / lambda - 1.0).abs() < 0.05, "lambda {lambda}: var {v}");
        }
    }

    #[test]
    fn star_zero_regimes_is_white_noise() {
        let p = StarParams::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0], vec![0.0], 1).unwrap();
        let path = simulate_star(&p, SimConfig::new(100_000, 4), StarSimOptions::new(1.0)).unwrap();
        assert!(path.latent.iter().all(|&m| m == 0.0));
        let n = path.len();
        let r1 = path.x.windows(2).map(|w| w[0] * w[1]).sum::<f64>()
            / path.x.iter().map(|x| x * x).sum::<f64>();
        assert!(r1.abs() < 3.0 / (n as f64).sqrt(), "lag-1 autocorrelation {r1}");
    }

    #[test]
    fn star_sharp_transition_matches_threshold_ar() {
        let phi0 = [0.2, 0.5];
        let phi1 = [-0.4, 0.4];
        let p = StarParams::new(vec![phi0.to_vec(), phi1.to_vec()], vec![1e6], vec![0.0], 1).unwrap();
        let path = simulate_star(&p, SimConfig::new(5000, 8), StarSimOptions::new(1.0)).unwrap();
        let mut checked = 0;
        for t in 1..path.len() {
            let z = path.x[t - 1];
            if z.abs() < 1e-3 {
                continue;
            }
            let ind = if z > 0.0 { 1.0 } else { 0.0 };
            let m = phi0[0] + phi0[1] * z + ind * (phi1[0] + phi1[1] * z);
            assert!((path.latent[t] - m).abs() < 1e-6);
            checked += 1;
        }
        assert!(checked > 4900);
    }

    #[test]
    fn star_requires_a_stationarity_condition() {
        let p = StarParams::new(vec![vec![0.0, 0.9], vec![0.0, 0.3]], vec![1.0], vec![0.0], 1).unwrap();
        assert!(matches!(
            simulate_star(&p, SimConfig::new(10, 1), StarSimOptions::new(1.0)),
            Err(Error::NonStationary(_))
        ));
        let mut opts = StarSimOptions::new(1.0);
        opts.allow_nonstationary = true;
        let path = simulate_star(&p, SimConfig::new(10, 1), opts).unwrap();
        assert!(path.unverified_stationarity);
    }

    #[test]
    fn csv_round_trips_values() {
        let p = AgarchParams::new(0.05, 0.1, 0.85, 0.3).unwrap();
        let path = simulate_agarch(&p, SimConfig::new(20, 2), &InnovationSpec::StandardNormal).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,latent"));
        for (t, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f[0].parse::<usize>().unwrap(), t);
            assert_eq!(f[1].parse::<f64>().unwrap(), path.x[t]);
            assert_eq!(f[2].parse::<f64>().unwrap(), path.latent[t]);
        }
    }

    #[test]
    fn doubling_burn_in_leaves_moments_unchanged() {
        let p = StgarchParams::new(2.0, 0.1, vec![0.15], vec![0.2], vec![0.5], 1).unwrap();
        let a = simulate_stgarch(&p, SimConfig::new(100_000, 31), &InnovationSpec::StandardNormal)
            .unwrap();
        let b = simulate_stgarch(
            &p,
            SimConfig::new(100_000, 32).burn_in(2 * DEFAULT_BURN_IN),
            &InnovationSpec::StandardNormal,
        )
        .unwrap();
        let sq = |p: &SimPath| p.x.iter().map(|x| x * x).collect::<Vec<_>>();
        let (ma, sa) = batch_se(&sq(&a), 100);
        let (mb, sb) = batch_se(&sq(&b), 100);
        assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt());
    }
}
