//! Identifiability diagnostics.
//!
//! Two parameter points are treated as observationally equivalent on a path
//! when their latent filters agree, measured by
//! `D(θ) = (1/n) Σ_{t ≥ warm_up} (h_t(θ) − h_t(θ°))²`. The search minimizes
//! `D` from many starts, keeps endpoints with `D ≤ eps` and classifies them.

use std::collections::BTreeMap;
use std::io::{self, Write};

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::{warm_up_for, Prepared};
use crate::model::{InnovationSpec, ModelParams, StgarchParams};
use crate::optim::{latin_hypercube, levenberg_marquardt, LmOptions};
use crate::rng::CounterRng;
use crate::simulate::{simulate_model, SimConfig, StarSimOptions, DEFAULT_BURN_IN};
use crate::space::{DataScale, Shape, Space, STAR_GAMMA_MAX, STAR_GAMMA_MIN, STGARCH_GAMMA_MAX};

const SEARCH_STREAM: u32 = 0x4944_0000;
/// Relative distance from the smoothness cap that counts as "at the cap".
const CAP_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub n: usize,
    /// Starts per integer-grid value.
    pub starts: usize,
    /// Discrepancy threshold; `1e−10 · mean(h°²)` when `None`.
    pub eps: Option<f64>,
    pub data_seed: u64,
    pub path_id: u32,
    pub opt_seed: u64,
    pub burn_in: usize,
    pub innovation: InnovationSpec,
    pub noise_sd: f64,
    /// INTGARCH thresholds searched; `1..=10` when `None`.
    pub l_grid: Option<Vec<u64>>,
    /// STAR delays searched; `1..=p` when `None`.
    pub d_grid: Option<Vec<usize>>,
    /// Clustering radius in standardized coordinates.
    pub rho: f64,
    /// Standardized range under which a coordinate counts as constant.
    pub subvector_tol: f64,
    pub gamma_max: f64,
    pub star_gamma: (f64, f64),
    /// Length of the prefix used for the first optimization stage.
    pub prefix: usize,
    pub max_iter: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n: 100_000,
            starts: 50,
            eps: None,
            data_seed: 0,
            path_id: 0,
            opt_seed: 0,
            burn_in: DEFAULT_BURN_IN,
            innovation: InnovationSpec::StandardNormal,
            noise_sd: 1.0,
            l_grid: None,
            d_grid: None,
            rho: 0.05,
            subvector_tol: 1e-3,
            gamma_max: STGARCH_GAMMA_MAX,
            star_gamma: (STAR_GAMMA_MIN, STAR_GAMMA_MAX),
            prefix: 10_000,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentVerdict {
    PointIdentified,
    Ridge,
    Inconclusive,
}

impl std::fmt::Display for IdentVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IdentVerdict::PointIdentified => "point-identified",
            IdentVerdict::Ridge => "ridge",
            IdentVerdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minimizer {
    pub start_id: usize,
    pub theta: Vec<f64>,
    pub discrepancy: f64,
    /// Smoothness parameter at its search cap; excluded from the verdict.
    pub boundary_flat: bool,
    /// Single-linkage cluster index; `None` for boundary-flat points.
    pub cluster: Option<usize>,
    /// Standardized ∞-distance to `theta_true`.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub size: usize,
    pub center: Vec<f64>,
    pub contains_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchTrace {
    pub start_id: usize,
    pub grid_value: Option<i64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub discrepancy: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentReport {
    pub family: crate::model::Family,
    pub theta_true: ModelParams,
    pub coordinates: Vec<String>,
    pub eps: f64,
    pub rho: f64,
    pub n: usize,
    pub warm_up: usize,
    pub discrepancy_at_truth: f64,
    pub minimizers: Vec<Minimizer>,
    pub clusters: Vec<Cluster>,
    pub verdict: IdentVerdict,
    pub free_coordinates: Vec<String>,
    pub identified_subvector: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// False when the innovation law lacks full support, so point identification is not guaranteed.
    pub theorem_backed: bool,
    pub notes: Vec<String>,
    pub trace: Vec<SearchTrace>,
}

impl IdentReport {
    /// `start_id,<coordinate names>,D`, one row per minimizer.
    pub fn write_minimizers_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let names: Vec<String> = self.coordinates.iter().map(|c| csv_field(c)).collect();
        writeln!(w, "start_id,{},D", names.join(","))?;
        for m in &self.minimizers {
            let vals: Vec<String> = m.theta.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{},{},{:?}", m.start_id, vals.join(","), m.discrepancy)?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-coordinate scale `max(|θ°ᵢ|, 1)`.
fn scales(truth: &[f64]) -> Vec<f64> {
    truth.iter().map(|v| v.abs().max(1.0)).collect()
}

fn scaled_dist(a: &[f64], b: &[f64], s: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(s)
        .map(|((x, y), s)| (x - y).abs() / s)
        .fold(0.0, f64::max)
}

/// Mean squared difference of two latent paths past `warm_up`.
pub fn discrepancy(h: &[f64], h0: &[f64], warm_up: usize) -> f64 {
    let n = h.len() - warm_up;
    h[warm_up..]
        .iter()
        .zip(&h0[warm_up..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n as f64
}

fn default_eps(h0: &[f64], warm_up: usize) -> f64 {
    let tail = &h0[warm_up..];
    1e-10 * tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64
}

/// Search spaces, one per integer-grid value.
fn grid_spaces(truth: &ModelParams, cfg: &SearchConfig) -> Result<Vec<(Option<i64>, Space)>> {
    Ok(match truth {
        ModelParams::Stgarch(t) => vec![(
            None,
            Space::new(Shape::Stgarch {
                q: t.q(),
                p: t.p(),
                d: t.d(),
                gamma_max: cfg.gamma_max,
            }),
        )],
        ModelParams::Agarch(_) => vec![(None, Space::new(Shape::Agarch))],
        ModelParams::Intgarch(_) => {
            let grid = cfg.l_grid.clone().unwrap_or_else(|| (1..=10).collect());
            if grid.is_empty() {
                return Err(Error::InvalidInput("l_grid is empty".into()));
            }
            grid.into_iter()
                .map(|l| (Some(l as i64), Space::new(Shape::Intgarch { l })))
                .collect()
        }
        ModelParams::Star(t) => {
            let grid = cfg.d_grid.clone().unwrap_or_else(|| (1..=t.p()).collect());
            if grid.is_empty() {
                return Err(Error::InvalidInput("d_grid is empty".into()));
            }
            if let Some(d) = grid.iter().find(|&&d| d < 1 || d > t.p()) {
                return Err(Error::InvalidInput(format!("delay d = {d} outside 1..={}", t.p())));
            }
            grid.into_iter()
                .map(|d| {
                    (
                        Some(d as i64),
                        Space::new(Shape::Star {
                            m: t.m(),
                            p: t.p(),
                            d,
                            gamma_lo: cfg.star_gamma.0,
                            gamma_hi: cfg.star_gamma.1,
                        }),
                    )
                })
                .collect()
        }
    })
}

/// One stage of LM on the scaled residuals `(h(θ) − h°)/√n_eff`.
fn lm_stage(
    space: &Space,
    prep: &Prepared<'_>,
    h0: &[f64],
    warm_up: usize,
    u0: &[f64],
    atol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize, bool) {
    let n = prep.len();
    let m = n - warm_up;
    let scale = 1.0 / (m as f64).sqrt();
    let mut buf = vec![0.0; n];
    let r = levenberg_marquardt(
        |u, out| {
            let Some(theta) = space.to_params(u) else {
                return false;
            };
            prep.fill(&theta, &mut buf);
            let mut ok = true;
            for (o, (h, g)) in out.iter_mut().zip(buf[warm_up..].iter().zip(&h0[warm_up..])) {
                *o = (h - g) * scale;
                ok &= o.is_finite();
            }
            ok
        },
        u0,
        m,
        &LmOptions {
            max_iter,
            atol,
            ..LmOptions::default()
        },
    );
    (r.x, r.iterations, r.converged)
}

/// Minimizes `D` over the family of `theta_true` on the observed series `x`.
pub fn equivalence_search_on(theta_true: &ModelParams, x: &[f64], cfg: &SearchConfig) -> Result<IdentReport> {
    if cfg.starts == 0 {
        return Err(Error::InvalidInput("starts must be positive".into()));
    }
    let warm_up = warm_up_for(theta_true);
    if x.len() <= warm_up + 1 {
        return Err(Error::TooShort {
            needed: warm_up + 1,
            got: x.len(),
        });
    }
    let prep = Prepared::new(x);
    let mut h0 = vec![0.0; x.len()];
    prep.fill(theta_true, &mut h0);
    let eps = cfg.eps.unwrap_or_else(|| default_eps(&h0, warm_up));
    let d_truth = discrepancy(&h0, &h0, warm_up);

    let pre_len = cfg.prefix.max(warm_up + 100).min(x.len());
    let pre_prep = Prepared::new(&x[..pre_len]);
    let mut pre_h0 = vec![0.0; pre_len];
    pre_prep.fill(theta_true, &mut pre_h0);
    let pre_eps = default_eps(&pre_h0, warm_up);

    let grid = grid_spaces(theta_true, cfg)?;
    let scale = DataScale::of(x);
    let mut tasks = Vec::new();
    for (k, (gv, space)) in grid.iter().enumerate() {
        let mut rng = CounterRng::new(cfg.opt_seed, SEARCH_STREAM + k as u32).at(0);
        for v in latin_hypercube(cfg.starts, space.dim(), &mut rng) {
            tasks.push((*gv, space, space.start_from_unit(&v, &scale)));
        }
    }

    let runs: Vec<(SearchTrace, Option<ModelParams>)> = tasks
        .into_par_iter()
        .enumerate()
        .map(|(id, (gv, space, start))| {
            let u0 = space.from_params(&start).expect("start lies in its space");
            let (u1, it1, _) = lm_stage(space, &pre_prep, &pre_h0, warm_up, &u0, 0.5 * 1e-8 * pre_eps, cfg.max_iter);
            let (u2, it2, conv) = if pre_len < x.len() {
                lm_stage(space, &prep, &h0, warm_up, &u1, 0.5 * 1e-8 * eps, cfg.max_iter)
            } else {
                (u1, 0, true)
            };
            let theta = space.to_params(&u2);
            let d = match &theta {
                Some(t) => {
                    let mut buf = vec![0.0; x.len()];
                    prep.fill(t, &mut buf);
                    discrepancy(&buf, &h0, warm_up)
                }
                None => f64::INFINITY,
            };
            let trace = SearchTrace {
                start_id: id,
                grid_value: gv,
                start: start.coordinate_values(),
                end: theta.as_ref().map(|t| t.coordinate_values()).unwrap_or_default(),
                discrepancy: d,
                iterations: it1 + it2,
                converged: conv && d.is_finite(),
            };
            (trace, theta)
        })
        .collect();

    let truth_vals = theta_true.coordinate_values();
    let sc = scales(&truth_vals);
    let mut minimizers = Vec::new();
    for ((trace, theta), (_, space)) in runs.iter().zip(grid_task_spaces(&grid, cfg.starts)) {
        let Some(theta) = theta else { continue };
        if !trace.converged || trace.discrepancy > eps {
            continue;
        }
        minimizers.push(Minimizer {
            start_id: trace.start_id,
            theta: trace.end.clone(),
            discrepancy: trace.discrepancy,
            boundary_flat: space.at_gamma_cap(theta, CAP_TOL),
            cluster: None,
            distance: scaled_dist(&trace.end, &truth_vals, &sc),
        });
    }
    let trace = runs.into_iter().map(|r| r.0).collect();
    let mut report = classify(theta_true, minimizers, eps, cfg.rho, cfg.subvector_tol, trace);
    report.n = x.len();
    report.warm_up = warm_up;
    report.discrepancy_at_truth = d_truth;
    annotate(&mut report, cfg);
    Ok(report)
}

fn grid_task_spaces(grid: &[(Option<i64>, Space)], starts: usize) -> impl Iterator<Item = &(Option<i64>, Space)> {
    grid.iter().flat_map(move |g| std::iter::repeat_n(g, starts))
}

/// Simulates a path at `theta_true` and searches it for equivalent points.
pub fn equivalence_search(theta_true: &ModelParams, cfg: &SearchConfig) -> Result<IdentReport> {
    let sim = SimConfig::new(cfg.n, cfg.data_seed).burn_in(cfg.burn_in).path_id(cfg.path_id);
    let path = simulate_model(theta_true, sim, &cfg.innovation, StarSimOptions::new(cfg.noise_sd))?;
    let mut report = equivalence_search_on(theta_true, &path.x, cfg)?;
    report.notes.extend(path.warnings);
    Ok(report)
}

/// Clusters minimizers and assigns the verdict.
fn classify(
    theta_true: &ModelParams,
    mut minimizers: Vec<Minimizer>,
    eps: f64,
    rho: f64,
    subvector_tol: f64,
    trace: Vec<SearchTrace>,
) -> IdentReport {
    let coords: Vec<String> = theta_true.coordinates().into_iter().map(|c| c.0).collect();
    let truth = theta_true.coordinate_values();
    let sc = scales(&truth);

    // Single linkage by union-find over the non-boundary points.
    let idx: Vec<usize> = (0..minimizers.len()).filter(|&i| !minimizers[i].boundary_flat).collect();
    let mut parent: Vec<usize> = (0..idx.len()).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            if scaled_dist(&minimizers[idx[a]].theta, &minimizers[idx[b]].theta, &sc) <= rho {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut label: BTreeMap<usize, usize> = BTreeMap::new();
    let mut clusters: Vec<Cluster> = Vec::new();
    for (a, &i) in idx.iter().enumerate() {
        let root = find(&mut parent, a);
        let next = label.len();
        let c = *label.entry(root).or_insert(next);
        if c == clusters.len() {
            clusters.push(Cluster {
                size: 0,
                center: vec![0.0; truth.len()],
                contains_truth: false,
            });
        }
        let m = &mut minimizers[i];
        m.cluster = Some(c);
        let cl = &mut clusters[c];
        cl.size += 1;
        for (s, v) in cl.center.iter_mut().zip(&m.theta) {
            *s += v;
        }
        cl.contains_truth |= m.distance <= rho;
    }
    for cl in &mut clusters {
        for s in &mut cl.center {
            *s /= cl.size as f64;
        }
    }

    let usable: Vec<&Minimizer> = idx.iter().map(|&i| &minimizers[i]).collect();
    let mut free = Vec::new();
    let mut constant = Vec::new();
    let mut reason = None;
    let verdict = if usable.is_empty() {
        reason = Some(if minimizers.is_empty() {
            "no converged start reached D <= eps".to_string()
        } else {
            "only boundary-flat minimizers (smoothness at its search cap)".to_string()
        });
        IdentVerdict::Inconclusive
    } else {
        for (j, name) in coords.iter().enumerate() {
            let dev = usable
                .iter()
                .map(|m| (m.theta[j] - truth[j]).abs() / sc[j])
                .fold(0.0, f64::max);
            let (lo, hi) = usable.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
                (lo.min(m.theta[j]), hi.max(m.theta[j]))
            });
            if dev > rho {
                free.push(name.clone());
            }
            if (hi - lo) / sc[j] <= subvector_tol {
                constant.push(name.clone());
            }
        }
        if usable.iter().all(|m| m.distance <= rho) {
            IdentVerdict::PointIdentified
        } else {
            IdentVerdict::Ridge
        }
    };
    IdentReport {
        family: theta_true.family(),
        theta_true: theta_true.clone(),
        coordinates: coords,
        eps,
        rho,
        n: 0,
        warm_up: 0,
        discrepancy_at_truth: 0.0,
        minimizers,
        clusters,
        verdict,
        free_coordinates: free,
        identified_subvector: constant,
        reason,
        theorem_backed: true,
        notes: Vec::new(),
        trace,
    }
}

fn annotate(report: &mut IdentReport, cfg: &SearchConfig) {
    match &report.theta_true {
        ModelParams::Stgarch(_) | ModelParams::Agarch(_) => {
            if !cfg.innovation.has_full_support() {
                report.theorem_backed = false;
                report.notes.push(
                    "innovation law lacks full support; point identification is not guaranteed for this run"
                        .into(),
                );
            }
        }
        ModelParams::Star(t) => {
            if t.check_identified().is_err() {
                report.theorem_backed = false;
                report.notes.push("a regime vector is zero; its transition parameters are not identified".into());
                if report.verdict == IdentVerdict::PointIdentified {
                    report.verdict = IdentVerdict::Inconclusive;
                    report.reason = Some(
                        "regime non-zero condition fails, so point identification is not claimed".into(),
                    );
                }
            }
        }
        ModelParams::Intgarch(t) => {
            if t.alpha1() == t.alpha2() {
                report
                    .notes
                    .push("alpha1 = alpha2: the threshold l does not enter the intensity".into());
            }
        }
    }
    let flat = report.minimizers.iter().filter(|m| m.boundary_flat).count();
    if flat > 0 {
        report.notes.push(format!(
            "{flat} minimizer(s) at the smoothness cap reported as boundary-flat, not as ridge evidence"
        ));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub n: usize,
    pub data_seed: u64,
    pub burn_in: usize,
    pub innovation: InnovationSpec,
    pub eps: Option<f64>,
    /// γ values on the `{α₂ = 0}` manifold.
    pub gamma_grid: Vec<f64>,
    /// Fractions `s` with `α₂ᵢ = s · 2α₁ᵢ` on the `{γ = 0}` manifold.
    pub cone_grid: Vec<f64>,
    /// Size of the off-manifold perturbations of `ω`, `α₁` and `β`.
    pub perturbation: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            n: 100_000,
            data_seed: 0,
            burn_in: DEFAULT_BURN_IN,
            innovation: InnovationSpec::StandardNormal,
            eps: None,
            gamma_grid: (0..=10).map(f64::from).collect(),
            cone_grid: (0..=10).map(|k| -1.0 + 0.2 * k as f64).collect(),
            perturbation: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbePoint {
    pub manifold: String,
    pub theta: Vec<f64>,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    #[serde(flatten)]
    pub ident: IdentReport,
    pub common_root: CommonRootReport,
    pub max_ridge_discrepancy: f64,
    pub ridge: Vec<ProbePoint>,
    pub perturbations: Vec<ProbePoint>,
}

/// Evaluates `D` along `{α₂ = 0}` and `{γ = 0}` through `theta_true` and at
/// perturbations of the identified coordinates.
pub fn stgarch_partial_ident_probe(theta_true: &StgarchParams, cfg: &ProbeConfig) -> Result<ProbeReport> {
    let roots = common_root_check(theta_true.alpha1(), theta_true.beta());
    if !roots.pass {
        return Err(Error::ConditionViolated(format!(
            "alpha1(z) and beta(z) condition fails: {}",
            roots.reason.clone().unwrap_or_default()
        )));
    }
    if theta_true.gamma() != 0.0 && theta_true.alpha2().iter().any(|a| *a != 0.0) {
        return Err(Error::InvalidInput(
            "the probe needs gamma = 0 or alpha2 = 0 at the true parameter".into(),
        ));
    }
    let truth: ModelParams = theta_true.clone().into();
    let sim = SimConfig::new(cfg.n, cfg.data_seed).burn_in(cfg.burn_in);
    let path = simulate_model(&truth, sim, &cfg.innovation, StarSimOptions::new(1.0))?;
    let x = &path.x;
    let warm_up = warm_up_for(&truth);
    if x.len() <= warm_up + 1 {
        return Err(Error::TooShort {
            needed: warm_up + 1,
            got: x.len(),
        });
    }
    let prep = Prepared::new(x);
    let mut h0 = vec![0.0; x.len()];
    prep.fill(&truth, &mut h0);
    let eps = cfg.eps.unwrap_or_else(|| default_eps(&h0, warm_up));
    let d_of = |t: &StgarchParams| {
        let mut buf = vec![0.0; x.len()];
        prep.fill(&ModelParams::Stgarch(t.clone()), &mut buf);
        discrepancy(&buf, &h0, warm_up)
    };
    let t = theta_true;
    let q = t.q();
    let mut candidates: Vec<(String, StgarchParams)> = Vec::new();
    for &g in &cfg.gamma_grid {
        let p = StgarchParams::new(g, t.omega(), t.alpha1().to_vec(), vec![0.0; q], t.beta().to_vec(), t.d())
            .map_err(Error::Invalid)?;
        candidates.push(("alpha2=0".into(), p));
    }
    for &s in &cfg.cone_grid {
        let a2: Vec<f64> = t.alpha1().iter().map(|a| s * 2.0 * a).collect();
        let p = StgarchParams::new(0.0, t.omega(), t.alpha1().to_vec(), a2, t.beta().to_vec(), t.d())
            .map_err(Error::Invalid)?;
        candidates.push(("gamma=0".into(), p));
    }
    let ridge: Vec<ProbePoint> = candidates
        .par_iter()
        .map(|(name, p)| ProbePoint {
            manifold: name.clone(),
            theta: ModelParams::Stgarch(p.clone()).coordinate_values(),
            discrepancy: d_of(p),
        })
        .collect();

    let h = cfg.perturbation;
    let mut perturbed: Vec<(String, StgarchParams)> = vec![(
        "omega".into(),
        StgarchParams::new(t.gamma(), t.omega() + h, t.alpha1().to_vec(), t.alpha2().to_vec(), t.beta().to_vec(), t.d())
            .map_err(Error::Invalid)?,
    )];
    for i in 0..q {
        let mut a1 = t.alpha1().to_vec();
        a1[i] += h;
        perturbed.push((
            format!("alpha1[{}]", i + 1),
            StgarchParams::new(t.gamma(), t.omega(), a1, t.alpha2().to_vec(), t.beta().to_vec(), t.d())
                .map_err(Error::Invalid)?,
        ));
    }
    for j in 0..t.p() {
        let mut b = t.beta().to_vec();
        b[j] += h;
        if let Ok(p) = StgarchParams::new(t.gamma(), t.omega(), t.alpha1().to_vec(), t.alpha2().to_vec(), b, t.d()) {
            perturbed.push((format!("beta[{}]", j + 1), p));
        }
    }
    let perturbations: Vec<ProbePoint> = perturbed
        .par_iter()
        .map(|(name, p)| ProbePoint {
            manifold: name.clone(),
            theta: ModelParams::Stgarch(p.clone()).coordinate_values(),
            discrepancy: d_of(p),
        })
        .collect();

    let max_ridge = ridge.iter().map(|p| p.discrepancy).fold(0.0, f64::max);
    let on_ridge = ridge.iter().all(|p| p.discrepancy <= eps);
    let off_ridge = perturbations.iter().all(|p| p.discrepancy > eps);
    let minimizers: Vec<Minimizer> = ridge
        .iter()
        .enumerate()
        .filter(|(_, p)| p.discrepancy <= eps)
        .map(|(i, p)| Minimizer {
            start_id: i,
            theta: p.theta.clone(),
            discrepancy: p.discrepancy,
            boundary_flat: false,
            cluster: None,
            distance: 0.0,
        })
        .collect();
    let truth_vals = truth.coordinate_values();
    let sc = scales(&truth_vals);
    let minimizers = minimizers
        .into_iter()
        .map(|mut m| {
            m.distance = scaled_dist(&m.theta, &truth_vals, &sc);
            m
        })
        .collect();
    let mut report = classify(&truth, minimizers, eps, 0.05, 1e-6, Vec::new());
    report.n = x.len();
    report.warm_up = warm_up;
    report.discrepancy_at_truth = discrepancy(&h0, &h0, warm_up);
    if !(on_ridge && off_ridge) {
        report.verdict = IdentVerdict::Inconclusive;
        report.reason = Some(if on_ridge {
            "a perturbation of an identified coordinate stayed within eps".into()
        } else {
            "a manifold point exceeded eps".into()
        });
    } else {
        report.verdict = IdentVerdict::Ridge;
        report.free_coordinates = report
            .coordinates
            .iter()
            .filter(|c| *c == "gamma" || c.starts_with("alpha2"))
            .cloned()
            .collect();
    }
    if !cfg.innovation.has_full_support() {
        report.theorem_backed = false;
        report.notes.push("innovation law lacks full support".into());
    }
    report.notes.extend(path.warnings);
    Ok(ProbeReport {
        ident: report,
        common_root: roots,
        max_ridge_discrepancy: max_ridge,
        ridge,
        perturbations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommonRootReport {
    pub pass: bool,
    /// Roots of `α₁(z) = Σ α₁ᵢ zⁱ` as `[re, im]`.
    pub alpha_roots: Vec<[f64; 2]>,
    /// Roots of `β(z) = 1 − Σ βⱼ zʲ`.
    pub beta_roots: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub common_root: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub warnings: Vec<String>,
}

/// Roots of `Σ cᵢ zⁱ` (ascending coefficients, non-zero leading term).
fn poly_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let k = c.len() - 1;
    if k == 0 {
        return Vec::new();
    }
    let lead = c[k];
    let comp = DMatrix::from_fn(k, k, |i, j| {
        if i == 0 {
            -c[k - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut r: Vec<Complex<f64>> = comp.complex_eigenvalues().iter().copied().collect();
    r.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    r
}

fn trim(c: &mut Vec<f64>) {
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
}

/// Checks that `α₁(z)` and `β(z)` have no common zero, with `α₁ ≢ 0` and
/// `(α₁q, βp) ≠ (0, 0)`. Ill-conditioned polynomials fail conservatively.
pub fn common_root_check(alpha1: &[f64], beta: &[f64]) -> CommonRootReport {
    let mut out = CommonRootReport {
        pass: false,
        alpha_roots: vec![],
        beta_roots: vec![],
        common_root: None,
        reason: None,
        warnings: vec![],
    };
    if alpha1.iter().all(|a| *a == 0.0) {
        out.reason = Some("alpha1 is identically zero".into());
        return out;
    }
    let last_a = alpha1.last().copied().unwrap_or(0.0);
    let last_b = beta.last().copied().unwrap_or(0.0);
    if last_a == 0.0 && last_b == 0.0 {
        out.reason = Some("(alpha1_q, beta_p) = (0, 0)".into());
        return out;
    }
    let mut a: Vec<f64> = std::iter::once(0.0).chain(alpha1.iter().copied()).collect();
    trim(&mut a);
    let mut b: Vec<f64> = std::iter::once(1.0).chain(beta.iter().map(|v| -v)).collect();
    trim(&mut b);
    for (name, c) in [("alpha1", &a), ("beta", &b)] {
        let big = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if c.len() > 1 && c[c.len() - 1].abs() < 1e-12 * big {
            out.warnings.push(format!("{name}(z) has a relatively tiny leading coefficient"));
            out.reason = Some(format!("root finding for {name}(z) is ill-conditioned"));
            return out;
        }
    }
    let ra = poly_roots(&a);
    let rb = poly_roots(&b);
    if ra.iter().chain(&rb).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        out.warnings.push("non-finite root".into());
        out.reason = Some("root finding failed".into());
        return out;
    }
    out.alpha_roots = ra.iter().map(|z| [z.re, z.im]).collect();
    out.beta_roots = rb.iter().map(|z| [z.re, z.im]).collect();
    for za in &ra {
        for zb in &rb {
            if (za - zb).norm() <= 1e-8 {
                out.common_root = Some([za.re, za.im]);
                out.reason = Some(format!("common root z = {} {:+}i", za.re, za.im));
                return out;
            }
        }
    }
    out.pass = true;
    out
}

/// Recovers `(α, γ)` from `y(x) = α°(|x| − γ°x)²` on `grid`.
///
/// Positive and negative points determine `A₊ = α(1−γ)²` and `A₋ = α(1+γ)²`
/// by least squares; `|γ| ≤ 1` then gives `√α = (√A₊ + √A₋)/2` and
/// `γ = (√A₋ − √A₊)/(√A₋ + √A₊)`.
pub fn agarch_identity_solve(alpha_true: f64, gamma_true: f64, grid: &[f64]) -> Result<(f64, f64)> {
    if !(alpha_true > 0.0 && alpha_true.is_finite()) || !(gamma_true.abs() <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "need alpha > 0 and |gamma| <= 1, got ({alpha_true}, {gamma_true})"
        )));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("grid contains a non-finite point".into()));
    }
    let y = |x: f64| {
        let u = x.abs() - gamma_true * x;
        alpha_true * u * u
    };
    let side = |pos: bool| -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for &x in grid.iter().filter(|x| if pos { **x > 0.0 } else { **x < 0.0 }) {
            num += y(x) * x * x;
            den += x.powi(4);
        }
        (den > 0.0).then(|| num / den)
    };
    let (Some(ap), Some(am)) = (side(true), side(false)) else {
        return Err(Error::Underdetermined(
            "grid must contain both positive and negative points".into(),
        ));
    };
    let (sp, sm) = (ap.max(0.0).sqrt(), am.max(0.0).sqrt());
    let root_alpha = 0.5 * (sp + sm);
    Ok((root_alpha * root_alpha, (sm - sp) / (sm + sp)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeDifference {
    pub probe: usize,
    pub max_difference: f64,
    pub is_truth: bool,
    /// A probe other than the truth whose map coincides with the truth's on the sample.
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonArReport {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_sum: f64,
    pub contractive: bool,
    pub probes: Vec<ProbeDifference>,
    pub violations: usize,
}

/// Plug-in checks for a Poisson autoregression `λ_t = f(λ_{t−1}, Y_{t−1}; θ)`.
///
/// `κ₁` and `κ₂` are the largest difference quotients of `f(·, y; θ°)` in
/// `λ` and `f(λ, ·; θ°)` in `y` over the sampled pairs; each probe reports
/// `max |f(λ, y; θ) − f(λ, y; θ°)|` over the same grid.
pub fn poisson_ar_condition_check<T, F>(
    f: F,
    theta_true: &T,
    lambda_sample: &[f64],
    y_max: u64,
    probes: &[T],
) -> Result<PoissonArReport>
where
    T: PartialEq + Sync,
    F: Fn(f64, u64, &T) -> f64 + Sync,
{
    if lambda_sample.is_empty() {
        return Err(Error::InvalidInput("lambda sample is empty".into()));
    }
    if let Some(l) = lambda_sample.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput(format!("lambda sample contains {l}")));
    }
    let ny = y_max as usize + 1;
    let table = |theta: &T| -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(lambda_sample.len() * ny);
        for &l in lambda_sample {
            for y in 0..=y_max {
                let out = f(l, y, theta);
                if !(out >= 0.0) || !out.is_finite() {
                    return Err(Error::Contract(format!(
                        "intensity map returned {out} at lambda = {l}, y = {y}"
                    )));
                }
                v.push(out);
            }
        }
        Ok(v)
    };
    let base = table(theta_true)?;
    let at = |i: usize, y: usize| base[i * ny + y];
    let mut k1 = 0.0f64;
    for i in 0..lambda_sample.len() {
        for j in i + 1..lambda_sample.len() {
            let dl = (lambda_sample[i] - lambda_sample[j]).abs();
            if dl == 0.0 {
                continue;
            }
            for y in 0..ny {
                k1 = k1.max((at(i, y) - at(j, y)).abs() / dl);
            }
        }
    }
    let mut k2 = 0.0f64;
    for i in 0..lambda_sample.len() {
        for y in 0..ny {
            for y2 in y + 1..ny {
                k2 = k2.max((at(i, y) - at(i, y2)).abs() / (y2 - y) as f64);
            }
        }
    }
    let probes: Vec<ProbeDifference> = probes
        .par_iter()
        .enumerate()
        .map(|(k, theta)| {
            let t = table(theta)?;
            let max_difference = t.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let is_truth = theta == theta_true;
            Ok(ProbeDifference {
                probe: k,
                max_difference,
                is_truth,
                violation: !is_truth && max_difference == 0.0,
            })
        })
        .collect::<Result<_>>()?;
    let violations = probes.iter().filter(|p| p.violation).count();
    Ok(PoissonArReport {
        kappa1: k1,
        kappa2: k2,
        kappa_sum: k1 + k2,
        contractive: k1 + k2 < 1.0,
        probes,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{IntgarchParams, StarParams};

    fn theta1() -> StgarchParams {
        StgarchParams::new(2.0, 0.1, vec![0.15], vec![0.2], vec![0.5], 1).unwrap()
    }

    fn quick(n: usize, starts: usize) -> SearchConfig {
        SearchConfig {
            n,
            starts,
            data_seed: 11,
            opt_seed: 3,
            prefix: 5_000,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn common_root_examples() {
        let r = common_root_check(&[0.2], &[0.5]);
        assert!(r.pass);
        assert_eq!(r.alpha_roots, vec![[0.0, 0.0]]);
        assert!((r.beta_roots[0][0] - 2.0).abs() < 1e-14);
        assert!(!common_root_check(&[0.0], &[0.5]).pass);
        let r = common_root_check(&[0.1, -0.05], &[0.5]);
        assert!(!r.pass);
        let z = r.common_root.unwrap();
        assert!((z[0] - 2.0).abs() < 1e-8 && z[1].abs() < 1e-8);
        assert!(!common_root_check(&[0.1, 0.0], &[0.5, 0.0]).pass);
        // Trailing zero in one sequence only is trimmed away.
        assert!(common_root_check(&[0.1, 0.0], &[0.5]).pass);
        assert!(common_root_check(&[0.2], &[]).pass);
        // Complex pair: β(z) = 1 − 0.2z − ... vs α₁ with a real root.
        assert!(common_root_check(&[0.1, 0.3], &[0.2, 0.3]).pass);
    }

    #[test]
    fn agarch_identity_examples() {
        let (a, g) = agarch_identity_solve(0.3, 0.4, &[-2.0, -1.0, 1.0, 2.0]).unwrap();
        assert!((a - 0.3).abs() < 1e-10 && (g - 0.4).abs() < 1e-10);
        let (_, g) = agarch_identity_solve(0.7, 0.0, &[-1.5, 0.5]).unwrap();
        assert!(g.abs() < 1e-12);
        for (gt, grid) in [(1.0, vec![-1.0, 0.0, 3.0]), (-1.0, vec![-2.0, 0.5])] {
            let (a, g) = agarch_identity_solve(0.2, gt, &grid).unwrap();
            assert!((a - 0.2).abs() < 1e-12 && (g - gt).abs() < 1e-12);
        }
        assert!(matches!(agarch_identity_solve(0.3, 0.4, &[1.0, 2.0]), Err(Error::Underdetermined(_))));
        assert!(matches!(agarch_identity_solve(0.3, 0.4, &[-1.0, 0.0]), Err(Error::Underdetermined(_))));
    }

    #[test]
    fn agarch_identity_matches_generic_least_squares() {
        // Independent route: LM directly on (α, γ) over the identity residuals.
        let grid = [-1.7, -0.4, 0.3, 0.9, 2.5];
        let (at, gt) = (0.45, -0.35);
        let yv: Vec<f64> = grid.iter().map(|x: &f64| at * (x.abs() - gt * x).powi(2)).collect();
        let r = levenberg_marquardt(
            |u, out| {
                for ((o, x), y) in out.iter_mut().zip(&grid).zip(&yv) {
                    *o = u[0] * (x.abs() - u[1] * x).powi(2) - y;
                }
                true
            },
            &[0.1, 0.0],
            grid.len(),
            &LmOptions::default(),
        );
        let (a, g) = agarch_identity_solve(at, gt, &grid).unwrap();
        assert!((a - r.x[0]).abs() < 1e-8 && (g - r.x[1]).abs() < 1e-8);
    }

    #[test]
    fn poisson_ar_linear_and_intgarch() {
        let lin = |l: f64, y: u64, t: &(f64, f64, f64)| t.0 + t.1 * y as f64 + t.2 * l;
        let lam: Vec<f64> = (0..40).map(|i| 0.25 * i as f64).collect();
        let r = poisson_ar_condition_check(lin, &(1.0, 0.3, 0.4), &lam, 20, &[(1.0, 0.3, 0.4), (1.0, 0.31, 0.4)]).unwrap();
        assert!((r.kappa1 - 0.4).abs() < 1e-12 && (r.kappa2 - 0.3).abs() < 1e-12);
        assert!(r.contractive);
        assert_eq!(r.probes[0].max_difference, 0.0);
        assert!(r.probes[0].is_truth && !r.probes[0].violation);
        assert!(r.probes[1].max_difference > 0.0);
        assert_eq!(r.violations, 0);

        let ig = |l: f64, y: u64, t: &IntgarchParams| t.step(y as f64, l);
        let truth = IntgarchParams::new(1.0, 0.3, 0.3, 0.2, 4).unwrap();
        let other_l = IntgarchParams::new(1.0, 0.3, 0.3, 0.2, 7).unwrap();
        let r = poisson_ar_condition_check(ig, &truth, &lam, 30, &[truth, other_l]).unwrap();
        assert_eq!(r.probes[0].max_difference, 0.0);
        assert!(r.probes[1].violation);
        assert_eq!(r.violations, 1);

        let neg = |_: f64, _: u64, _: &f64| -1.0;
        assert!(matches!(poisson_ar_condition_check(neg, &0.0, &lam, 3, &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn reference_stgarch_is_point_identified() {
        let truth: ModelParams = theta1().into();
        let r = equivalence_search(&truth, &quick(20_000, 6)).unwrap();
        assert!(r.discrepancy_at_truth <= 1e-18);
        assert_eq!(r.verdict, IdentVerdict::PointIdentified, "{:?}", r.trace);
        assert!(!r.minimizers.is_empty());
        for m in &r.minimizers {
            assert!(m.discrepancy <= r.eps);
            let dist = m.theta.iter().zip(truth.coordinate_values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dist < 0.05);
        }
        assert!(r.trace.iter().all(|t| t.discrepancy >= 0.0));
    }

    #[test]
    fn discrepancy_ignores_optimizer_seed() {
        let truth: ModelParams = theta1().into();
        let mut a = quick(5_000, 3);
        a.opt_seed = 1;
        let mut b = a.clone();
        b.opt_seed = 2;
        let ra = equivalence_search(&truth, &a).unwrap();
        let rb = equivalence_search(&truth, &b).unwrap();
        assert_eq!(ra.eps, rb.eps);
        assert_ne!(ra.trace[0].start, rb.trace[0].start);
        assert_eq!(ra.verdict, rb.verdict);
    }

    #[test]
    fn equal_slopes_leave_the_threshold_free() {
        let truth: ModelParams = IntgarchParams::new(1.0, 0.3, 0.3, 0.2, 4).unwrap().into();
        let mut cfg = quick(20_000, 4);
        cfg.l_grid = Some(vec![2, 4, 6]);
        let r = equivalence_search(&truth, &cfg).unwrap();
        assert_eq!(r.verdict, IdentVerdict::Ridge);
        assert_eq!(r.free_coordinates, vec!["l".to_string()]);
        assert_eq!(r.identified_subvector, vec!["omega", "alpha1", "alpha2", "beta"]);
    }

    #[test]
    fn distinct_slopes_pin_the_threshold() {
        let truth: ModelParams = IntgarchParams::new(1.0, 0.5, 0.2, 0.2, 4).unwrap().into();
        let mut cfg = quick(20_000, 4);
        cfg.l_grid = Some(vec![3, 4, 5]);
        let r = equivalence_search(&truth, &cfg).unwrap();
        assert_eq!(r.verdict, IdentVerdict::PointIdentified);
        assert!(r.minimizers.iter().all(|m| m.theta[4] == 4.0));
    }

    #[test]
    fn zero_regime_is_never_point_identified() {
        let truth: ModelParams = StarParams::new(vec![vec![0.2, 0.5], vec![0.0, 0.0]], vec![4.0], vec![0.0], 1)
            .unwrap()
            .into();
        let r = equivalence_search(&truth, &quick(5_000, 8)).unwrap();
        assert_ne!(r.verdict, IdentVerdict::PointIdentified);
        assert!(!r.theorem_backed);
    }

    #[test]
    fn three_point_innovations_are_not_theorem_backed() {
        let truth: ModelParams = theta1().into();
        let mut cfg = quick(5_000, 2);
        cfg.innovation = InnovationSpec::three_point_default();
        let r = equivalence_search(&truth, &cfg).unwrap();
        assert!(!r.theorem_backed);
    }

    #[test]
    fn partial_identification_probe() {
        let truth = StgarchParams::new(0.0, 0.1, vec![0.2], vec![0.0], vec![0.5], 1).unwrap();
        let cfg = ProbeConfig {
            n: 20_000,
            ..ProbeConfig::default()
        };
        let r = stgarch_partial_ident_probe(&truth, &cfg).unwrap();
        assert_eq!(r.ident.verdict, IdentVerdict::Ridge);
        assert!(r.max_ridge_discrepancy < 1e-12);
        assert_eq!(r.ridge.len(), 22);
        assert_eq!(r.ident.identified_subvector, vec!["omega", "alpha1[1]", "beta[1]"]);
        let omega = r.perturbations.iter().find(|p| p.manifold == "omega").unwrap();
        assert!(omega.discrepancy > r.ident.eps);

        let full = theta1();
        assert!(matches!(stgarch_partial_ident_probe(&full, &cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn probe_refuses_common_roots() {
        // (α₁₂, β₂) = (0, 0)
        let t = StgarchParams::new(0.0, 0.1, vec![0.2, 0.0], vec![0.0, 0.0], vec![0.5, 0.0], 1).unwrap();
        assert!(matches!(
            stgarch_partial_ident_probe(&t, &ProbeConfig { n: 2_000, ..ProbeConfig::default() }),
            Err(Error::ConditionViolated(_))
        ));
    }

    #[test]
    fn minimizer_csv_layout() {
        let truth: ModelParams = theta1().into();
        let r = equivalence_search(&truth, &quick(3_000, 2)).unwrap();
        let mut buf = Vec::new();
        r.write_minimizers_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "start_id,gamma,omega,alpha1[1],alpha2[1],beta[1],D");
        assert_eq!(lines.count(), r.minimizers.len());
    }
}
