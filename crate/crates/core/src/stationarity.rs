//! Sufficient stationarity conditions: exact inequalities and Monte Carlo
//! log-moment estimates.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{star_transition, AgarchParams, InnovationSpec, IntgarchParams, StarParams, StgarchParams};
use crate::rng::CounterRng;

const MC_BATCH: usize = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub condition: String,
    /// The quantity compared with `threshold`; must lie strictly below it.
    pub value: f64,
    /// Per-component contributions, where the condition is a sum or a max.
    pub values: Vec<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_n: Option<usize>,
}

fn exact(condition: &str, value: f64, values: Vec<f64>, threshold: f64) -> StationarityReport {
    StationarityReport {
        condition: condition.to_string(),
        value,
        values,
        threshold,
        verdict: if value < threshold { Verdict::Pass } else { Verdict::Fail },
        mc_std_error: None,
        mc_n: None,
    }
}

/// Mean and standard error of `g(η)` over `mc_n` draws.
///
/// Batches of 65 536 draws use their own stream (`path_id` = batch index)
/// and are reduced in batch order, so the result does not depend on the
/// thread count.
pub fn mc_mean<G: Fn(f64) -> f64 + Sync>(
    g: G,
    innov: &InnovationSpec,
    mc_n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if mc_n < 2 {
        return Err(Error::InvalidInput("mc_n must be at least 2".into()));
    }
    let sampler = innov.sampler()?;
    let n_batches = mc_n.div_ceil(MC_BATCH);
    let partial: Vec<(f64, f64, usize)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let rng = CounterRng::new(seed, b as u32);
            let len = MC_BATCH.min(mc_n - b * MC_BATCH);
            let vals: Vec<f64> = (0..len as u64).map(|t| g(sampler.draw(&mut rng.at(t)))).collect();
            let m = vals.iter().sum::<f64>() / len as f64;
            let ss = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
            (m, ss, len)
        })
        .collect();
    // Chan et al. pairwise combination of (mean, M2, count), in batch order.
    let (mut mean, mut m2, mut count) = (0.0f64, 0.0f64, 0usize);
    for (mb, sb, nb) in partial {
        if count == 0 {
            mean = mb;
            m2 = sb;
            count = nb;
            continue;
        }
        let total = count + nb;
        let delta = mb - mean;
        mean += delta * nb as f64 / total as f64;
        m2 += sb + delta * delta * count as f64 * nb as f64 / total as f64;
        count = total;
    }
    let var = m2 / (count - 1) as f64;
    Ok((mean, (var / count as f64).sqrt()))
}

fn mc_verdict(est: f64, se: f64) -> Verdict {
    if est < -3.0 * se {
        Verdict::Pass
    } else if est > 3.0 * se {
        Verdict::Fail
    } else {
        Verdict::Undetermined
    }
}

fn mc_report(condition: &str, est: f64, se: f64, mc_n: usize) -> StationarityReport {
    StationarityReport {
        condition: condition.to_string(),
        value: est,
        values: vec![],
        threshold: 0.0,
        verdict: mc_verdict(est, se),
        mc_std_error: Some(se),
        mc_n: Some(mc_n),
    }
}

/// Degenerate case with a constant integrand: exact, zero standard error.
fn degenerate(condition: &str, value: f64) -> StationarityReport {
    let verdict = if value < 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    StationarityReport {
        condition: condition.to_string(),
        value,
        values: vec![],
        threshold: 0.0,
        verdict,
        mc_std_error: Some(0.0),
        mc_n: Some(0),
    }
}

/// `E log{β₁ + (α₁₁ + ½|α₂₁|)η²} < 0` for STGARCH(1,1,1).
pub fn stgarch111_logmoment(
    params: &StgarchParams,
    innov: &InnovationSpec,
    mc_n: usize,
    seed: u64,
) -> Result<StationarityReport> {
    if params.p() != 1 || params.q() != 1 {
        return Err(Error::InvalidInput(format!(
            "log-moment condition covers STGARCH(1,1,1), got p={}, q={}",
            params.p(),
            params.q()
        )));
    }
    let name = "E log(beta1 + (alpha11 + |alpha21|/2) eta^2) < 0";
    let b = params.beta()[0];
    let a = params.alpha1()[0] + 0.5 * params.alpha2()[0].abs();
    if a == 0.0 {
        return Ok(degenerate(name, b.ln()));
    }
    let (est, se) = mc_mean(|e| (b + a * e * e).ln(), innov, mc_n, seed)?;
    Ok(mc_report(name, est, se, mc_n))
}

/// `E log{β + α(|η| − γη)²} < 0` for AGARCH(1,1).
pub fn agarch_logmoment(
    params: &AgarchParams,
    innov: &InnovationSpec,
    mc_n: usize,
    seed: u64,
) -> Result<StationarityReport> {
    let name = "E log(beta + alpha (|eta| - gamma eta)^2) < 0";
    if params.alpha() == 0.0 {
        return Ok(degenerate(name, params.beta().ln()));
    }
    let (est, se) = mc_mean(
        |e| (params.beta() + params.news(e)).ln(),
        innov,
        mc_n,
        seed,
    )?;
    Ok(mc_report(name, est, se, mc_n))
}

/// `β + max(α₁, α₂) < 1`.
pub fn intgarch_condition(params: &IntgarchParams) -> StationarityReport {
    let v = params.beta() + params.alpha1().max(params.alpha2());
    exact("beta + max(alpha1, alpha2) < 1", v, vec![v], 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupGrid {
    pub points: usize,
    /// Half-width of the window beyond the outer thresholds, in units of `1/γ_min`.
    pub reach: f64,
    pub tol: f64,
    pub max_doublings: usize,
}

impl Default for SupGrid {
    fn default() -> Self {
        Self {
            points: 10_000,
            reach: 20.0,
            tol: 1e-8,
            max_doublings: 8,
        }
    }
}

fn sup_on_grid(params: &StarParams, j: usize, lo: f64, hi: f64, points: usize) -> f64 {
    let regimes = params.regimes();
    let at = |x: f64| {
        let mut v = regimes[0][j];
        for (i, r) in regimes.iter().enumerate().skip(1) {
            v += r[j] * star_transition(x, params.gamma()[i - 1], params.c()[i - 1]);
        }
        v.abs()
    };
    let limit_lo = regimes[0][j].abs();
    let limit_hi = regimes.iter().map(|r| r[j]).sum::<f64>().abs();
    let mut s = limit_lo.max(limit_hi);
    for k in 0..points {
        let x = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        s = s.max(at(x));
    }
    s
}

/// `Σⱼ sup_x |φ₀ⱼ + Σᵢ φᵢⱼ G(x; γᵢ, cᵢ)| < 1` over the lag coefficients `j = 1..p`.
pub fn star_sup_condition(params: &StarParams, grid: &SupGrid) -> StationarityReport {
    let gmin = params.gamma().iter().copied().fold(f64::INFINITY, f64::min);
    let c = params.c();
    let lo = c[0] - grid.reach / gmin;
    let hi = c[c.len() - 1] + grid.reach / gmin;
    let eval = |points: usize| -> Vec<f64> {
        (1..=params.p())
            .map(|j| sup_on_grid(params, j, lo, hi, points))
            .collect()
    };
    let mut points = grid.points.max(2);
    let mut values = eval(points);
    for _ in 0..grid.max_doublings {
        let finer = eval(2 * points - 1);
        let change = finer
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = finer;
        points = 2 * points - 1;
        if change < grid.tol {
            break;
        }
    }
    let total = values.iter().sum();
    exact(
        "sum_j sup_x |phi_0j + sum_i phi_ij G(x; gamma_i, c_i)| < 1",
        total,
        values,
        1.0,
    )
}

/// `max_{0≤i≤M} Σⱼ |Σ_{k≤i} φₖⱼ| < 1` over the lag coefficients `j = 1..p`.
pub fn star_partial_sum_condition(params: &StarParams) -> StationarityReport {
    let regimes = params.regimes();
    let p = params.p();
    let mut cum = vec![0.0; p + 1];
    let mut per_regime = Vec::with_capacity(regimes.len());
    for r in regimes {
        for (c, v) in cum.iter_mut().zip(r) {
            *c += v;
        }
        per_regime.push(cum[1..].iter().map(|v| v.abs()).sum::<f64>());
    }
    let v = per_regime.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    exact(
        "max_i sum_j |sum_{k<=i} phi_kj| < 1",
        v,
        per_regime,
        1.0,
    )
}
