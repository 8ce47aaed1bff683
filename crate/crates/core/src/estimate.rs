//! Multi-start point estimation.
//!
//! Gaussian quasi-likelihood for the variance families, Poisson
//! quasi-likelihood for INTGARCH and least squares for STAR. Integer
//! parameters (`l`, STAR `d`) are profiled over a caller-supplied grid.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::{check_counts, warm_up_for, Prepared};
use crate::model::{Family, ModelParams};
use crate::optim::{
    bfgs, latin_hypercube, levenberg_marquardt, nelder_mead, BfgsOptions, LmOptions,
    NelderMeadOptions,
};
use crate::rng::CounterRng;
use crate::space::{DataScale, Shape, Space, STAR_GAMMA_MAX, STAR_GAMMA_MIN, STGARCH_GAMMA_MAX};

/// Stream id reserved for start designs; grid point `k` uses `START_STREAM + k`.
const START_STREAM: u32 = 0x5354_0000;
/// Fixed warm-up of the variance and intensity objectives.
pub const DEFAULT_FIT_WARM_UP: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub min_len: usize,
    /// Leading observations excluded from the objective; family default when `None`.
    pub warm_up: Option<usize>,
    pub gamma_max: f64,
    pub star_gamma: (f64, f64),
    pub max_iter: usize,
    pub curvature: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_starts: 20,
            seed: 0,
            min_len: 500,
            warm_up: None,
            gamma_max: STGARCH_GAMMA_MAX,
            star_gamma: (STAR_GAMMA_MIN, STAR_GAMMA_MAX),
            max_iter: 2000,
            curvature: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartTrace {
    pub start_id: usize,
    /// Integer parameter value of the profile this start belongs to, if any.
    pub grid_value: Option<i64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curvature {
    pub coordinates: Vec<String>,
    /// Smallest eigenvalue after scaling the matrix to unit diagonal.
    pub min_eigenvalue: f64,
    pub raw_min_eigenvalue: f64,
    pub condition_number: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub value: i64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub theta_hat: ModelParams,
    pub objective: f64,
    pub n_effective: usize,
    pub warm_up: usize,
    pub starts: usize,
    pub trace: Vec<StartTrace>,
    pub profiled: BTreeMap<String, Vec<ProfilePoint>>,
    pub curvature: Option<Curvature>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Gaussian,
    Poisson,
    LeastSquares,
}

impl Objective {
    pub fn for_family(f: Family) -> Self {
        match f {
            Family::Stgarch | Family::Agarch => Objective::Gaussian,
            Family::Intgarch => Objective::Poisson,
            Family::Star => Objective::LeastSquares,
        }
    }
}

/// Orders of an STGARCH(p,q,d) fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Orders {
    pub p: usize,
    pub q: usize,
    pub d: usize,
}

impl Default for Orders {
    fn default() -> Self {
        Self { p: 1, q: 1, d: 1 }
    }
}

fn mean_tail(vals: impl Iterator<Item = f64>, n: usize) -> f64 {
    vals.sum::<f64>() / n as f64
}

/// Objective value of `theta` given a filled latent buffer.
fn objective_from(kind: Objective, x: &[f64], h: &[f64], warm_up: usize) -> f64 {
    let n = x.len() - warm_up;
    let (x, h) = (&x[warm_up..], &h[warm_up..]);
    let v = match kind {
        Objective::Gaussian => mean_tail(
            x.iter().zip(h).map(|(x, h)| {
                if *h > 0.0 {
                    h.ln() + x * x / h
                } else {
                    f64::INFINITY
                }
            }),
            n,
        ),
        Objective::Poisson => mean_tail(
            x.iter().zip(h).map(|(x, l)| {
                if *l > 0.0 {
                    l - x * l.ln()
                } else {
                    f64::INFINITY
                }
            }),
            n,
        ),
        Objective::LeastSquares => mean_tail(x.iter().zip(h).map(|(x, m)| (x - m) * (x - m)), n),
    };
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// The estimation objective at `theta` on `x` with the given warm-up.
pub fn objective_at(theta: &ModelParams, x: &[f64], warm_up: usize) -> Result<f64> {
    if x.len() <= warm_up {
        return Err(Error::TooShort {
            needed: warm_up,
            got: x.len(),
        });
    }
    if theta.family() == Family::Intgarch {
        check_counts(x)?;
    }
    let prep = Prepared::new(x);
    let mut h = vec![0.0; x.len()];
    prep.fill(theta, &mut h);
    Ok(objective_from(Objective::for_family(theta.family()), x, &h, warm_up))
}

struct Problem<'a> {
    space: Space,
    prep: &'a Prepared<'a>,
    kind: Objective,
    warm_up: usize,
}

impl Problem<'_> {
    fn value(&self, u: &[f64], buf: &mut [f64]) -> f64 {
        match self.space.to_params(u) {
            Some(theta) => {
                self.prep.fill(&theta, buf);
                objective_from(self.kind, self.prep.x, buf, self.warm_up)
            }
            None => f64::INFINITY,
        }
    }

    fn residuals(&self, u: &[f64], buf: &mut [f64], out: &mut [f64]) -> bool {
        let Some(theta) = self.space.to_params(u) else {
            return false;
        };
        self.prep.fill(&theta, buf);
        let scale = 1.0 / ((self.prep.len() - self.warm_up) as f64).sqrt();
        for (o, (x, m)) in out
            .iter_mut()
            .zip(self.prep.x[self.warm_up..].iter().zip(&buf[self.warm_up..]))
        {
            *o = (x - m) * scale;
        }
        out.iter().all(|v| v.is_finite())
    }

    fn run_start(&self, start_id: usize, grid_value: Option<i64>, start: &ModelParams, max_iter: usize) -> (StartTrace, Option<ModelParams>) {
        let u0 = self
            .space
            .from_params(start)
            .expect("start generated inside its own space");
        let n = self.prep.len();
        let (u, iterations, converged) = match self.kind {
            Objective::LeastSquares => {
                let mut buf = vec![0.0; n];
                let m = n - self.warm_up;
                let r = levenberg_marquardt(
                    |u, out| self.residuals(u, &mut buf, out),
                    &u0,
                    m,
                    &LmOptions {
                        max_iter: max_iter.min(500),
                        rtol: 1e-12,
                        ..LmOptions::default()
                    },
                );
                (r.x, r.iterations, r.converged)
            }
            _ => {
                let mut buf = vec![0.0; n];
                let nm = nelder_mead(
                    |u| self.value(u, &mut buf),
                    &u0,
                    &NelderMeadOptions {
                        max_iter,
                        ftol: 1e-9,
                        xtol: 1e-5,
                        initial_step: 0.5,
                    },
                );
                let polished = bfgs(
                    |u| self.value(u, &mut buf),
                    &nm.x,
                    &BfgsOptions {
                        max_iter: 200,
                        gtol: 1e-7,
                        ftol: 1e-13,
                    },
                );
                let (x, conv) = if polished.f <= nm.f {
                    (polished.x, polished.converged || nm.converged)
                } else {
                    (nm.x, nm.converged)
                };
                (x, nm.iterations + polished.iterations, conv)
            }
        };
        let theta = self.space.to_params(&u);
        let objective = match &theta {
            Some(t) => {
                let mut buf = vec![0.0; n];
                self.prep.fill(t, &mut buf);
                objective_from(self.kind, self.prep.x, &buf, self.warm_up)
            }
            None => f64::INFINITY,
        };
        let trace = StartTrace {
            start_id,
            grid_value,
            start: start.coordinate_values(),
            end: theta.as_ref().map(|t| t.coordinate_values()).unwrap_or_default(),
            objective,
            iterations,
            converged: converged && objective.is_finite(),
        };
        (trace, theta)
    }
}

/// Runs `opts.n_starts` Latin-hypercube starts for each space in `grid`.
fn profile_fit(
    x: &[f64],
    grid: Vec<(Option<i64>, Space)>,
    kind: Objective,
    warm_up: usize,
    opts: &FitOptions,
) -> Result<(Vec<StartTrace>, Vec<Option<ModelParams>>)> {
    if opts.n_starts == 0 {
        return Err(Error::InvalidInput("n_starts must be positive".into()));
    }
    let prep = Prepared::new(x);
    let scale = DataScale::of(x);
    let mut tasks = Vec::new();
    for (k, (gv, space)) in grid.into_iter().enumerate() {
        let mut rng = CounterRng::new(opts.seed, START_STREAM + k as u32).at(0);
        let design = latin_hypercube(opts.n_starts, space.dim(), &mut rng);
        for v in design {
            let start = space.start_from_unit(&v, &scale);
            tasks.push((gv, space.clone(), start));
        }
    }
    let results: Vec<(StartTrace, Option<ModelParams>)> = tasks
        .into_par_iter()
        .enumerate()
        .map(|(id, (gv, space, start))| {
            let problem = Problem {
                space,
                prep: &prep,
                kind,
                warm_up,
            };
            problem.run_start(id, gv, &start, opts.max_iter)
        })
        .collect();
    Ok(results.into_iter().unzip())
}

/// Index of the best converged start; ties go to the lowest start id.
fn argmin(trace: &[StartTrace]) -> Option<usize> {
    trace
        .iter()
        .enumerate()
        .filter(|(_, t)| t.converged)
        .min_by(|(_, a), (_, b)| a.objective.total_cmp(&b.objective).then(a.start_id.cmp(&b.start_id)))
        .map(|(i, _)| i)
}

fn assemble(
    x: &[f64],
    trace: Vec<StartTrace>,
    thetas: Vec<Option<ModelParams>>,
    warm_up: usize,
    profile_name: Option<&str>,
    grid: &[i64],
    opts: &FitOptions,
) -> Result<FitResult> {
    let Some(best) = argmin(&trace) else {
        return Err(Error::NotConverged(trace));
    };
    let theta_hat = thetas[best].clone().expect("converged start has parameters");
    let objective = objective_at(&theta_hat, x, warm_up)?;
    let mut profiled = BTreeMap::new();
    if let Some(name) = profile_name {
        let pts = grid
            .iter()
            .map(|&g| ProfilePoint {
                value: g,
                objective: trace
                    .iter()
                    .filter(|t| t.converged && t.grid_value == Some(g))
                    .map(|t| t.objective)
                    .fold(f64::INFINITY, f64::min),
            })
            .collect();
        profiled.insert(name.to_string(), pts);
    }
    let curvature = if opts.curvature {
        curvature_at(&theta_hat, x, Some(warm_up)).ok()
    } else {
        None
    };
    Ok(FitResult {
        theta_hat,
        objective,
        n_effective: x.len() - warm_up,
        warm_up,
        starts: trace.len(),
        trace,
        profiled,
        curvature,
    })
}

fn check_series(x: &[f64], opts: &FitOptions, warm_up: usize) -> Result<()> {
    let needed = opts.min_len.max(warm_up + 1);
    if x.len() < needed {
        return Err(Error::TooShort {
            needed: needed - 1,
            got: x.len(),
        });
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("series contains {v}")));
    }
    Ok(())
}

/// Gaussian QMLE: minimizes `(1/n)Σ[ln σ²_t(θ) + x²_t/σ²_t(θ)]` past the warm-up.
pub fn gaussian_qmle(x: &[f64], family: Family, orders: Orders, opts: &FitOptions) -> Result<FitResult> {
    let space = match family {
        Family::Stgarch => {
            if orders.q == 0 || orders.d == 0 || orders.d > orders.q {
                return Err(Error::InvalidInput(format!(
                    "invalid STGARCH orders p={}, q={}, d={}",
                    orders.p, orders.q, orders.d
                )));
            }
            Space::new(Shape::Stgarch {
                q: orders.q,
                p: orders.p,
                d: orders.d,
                gamma_max: opts.gamma_max,
            })
        }
        Family::Agarch => Space::new(Shape::Agarch),
        other => {
            return Err(Error::InvalidInput(format!(
                "Gaussian QMLE covers STGARCH and AGARCH, not {other}"
            )))
        }
    };
    let warm_up = opts.warm_up.unwrap_or(DEFAULT_FIT_WARM_UP);
    check_series(x, opts, warm_up)?;
    if x.iter().all(|v| *v == x[0]) {
        return Err(Error::Degenerate(
            "constant series: the quasi-likelihood has no interior minimizer".into(),
        ));
    }
    let (trace, thetas) = profile_fit(x, vec![(None, space)], Objective::Gaussian, warm_up, opts)?;
    assemble(x, trace, thetas, warm_up, None, &[], opts)
}

/// Poisson QMLE for INTGARCH, profiling the threshold `l` over `l_grid`.
pub fn poisson_qmle(x: &[f64], l_grid: &[u64], opts: &FitOptions) -> Result<FitResult> {
    if l_grid.is_empty() {
        return Err(Error::InvalidInput("l_grid is empty".into()));
    }
    if l_grid.contains(&0) {
        return Err(Error::InvalidInput("threshold l must be at least 1".into()));
    }
    check_counts(x)?;
    let warm_up = opts.warm_up.unwrap_or(DEFAULT_FIT_WARM_UP);
    check_series(x, opts, warm_up)?;
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("all-zero count series".into()));
    }
    let grid: Vec<(Option<i64>, Space)> = l_grid
        .iter()
        .map(|&l| (Some(l as i64), Space::new(Shape::Intgarch { l })))
        .collect();
    let (trace, thetas) = profile_fit(x, grid, Objective::Poisson, warm_up, opts)?;
    let g: Vec<i64> = l_grid.iter().map(|&l| l as i64).collect();
    assemble(x, trace, thetas, warm_up, Some("l"), &g, opts)
}

/// Nonlinear least squares for STAR(p) with `M` transitions, profiling `d` over `d_grid`.
pub fn star_nls(x: &[f64], d_grid: &[usize], m: usize, p: usize, opts: &FitOptions) -> Result<FitResult> {
    if d_grid.is_empty() {
        return Err(Error::InvalidInput("d_grid is empty".into()));
    }
    if m == 0 || p == 0 {
        return Err(Error::InvalidInput("STAR needs M >= 1 and p >= 1".into()));
    }
    if let Some(d) = d_grid.iter().find(|&&d| d < 1 || d > p) {
        return Err(Error::InvalidInput(format!("delay d = {d} outside 1..={p}")));
    }
    let warm_up = opts.warm_up.unwrap_or(p).max(p);
    check_series(x, opts, warm_up)?;
    let grid: Vec<(Option<i64>, Space)> = d_grid
        .iter()
        .map(|&d| {
            (
                Some(d as i64),
                Space::new(Shape::Star {
                    m,
                    p,
                    d,
                    gamma_lo: opts.star_gamma.0,
                    gamma_hi: opts.star_gamma.1,
                }),
            )
        })
        .collect();
    let (trace, thetas) = profile_fit(x, grid, Objective::LeastSquares, warm_up, opts)?;
    let g: Vec<i64> = d_grid.iter().map(|&d| d as i64).collect();
    assemble(x, trace, thetas, warm_up, Some("d"), &g, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileContrast {
    pub value: i64,
    /// Profile objective minus the best profile objective.
    pub gap: f64,
    /// Standard error of the mean paired per-observation loss difference.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileFlatness {
    pub parameter: String,
    pub best: i64,
    pub contrasts: Vec<ProfileContrast>,
    /// Every gap within two standard errors.
    pub flat: bool,
}

/// Best converged endpoint of the profile at `value`.
fn profile_params(fit: &FitResult, value: i64) -> Option<ModelParams> {
    use crate::model::{IntgarchParams, StarParams};
    let t = fit
        .trace
        .iter()
        .filter(|t| t.converged && t.grid_value == Some(value))
        .min_by(|a, b| a.objective.total_cmp(&b.objective))?;
    let e = &t.end;
    match &fit.theta_hat {
        ModelParams::Intgarch(_) => {
            IntgarchParams::new(e[0], e[1], e[2], e[3], u64::try_from(value).ok()?).ok().map(Into::into)
        }
        ModelParams::Star(s) => {
            let (m, w) = (s.m(), s.p() + 1);
            let regimes = (0..=m).map(|i| e[i * w..(i + 1) * w].to_vec()).collect();
            let off = (m + 1) * w;
            StarParams::new(regimes, e[off..off + m].to_vec(), e[off + m..off + 2 * m].to_vec(), usize::try_from(value).ok()?)
                .ok()
                .map(Into::into)
        }
        _ => None,
    }
}

fn loss_terms(theta: &ModelParams, x: &[f64], warm_up: usize) -> Vec<f64> {
    let mut h = vec![0.0; x.len()];
    Prepared::new(x).fill(theta, &mut h);
    let kind = Objective::for_family(theta.family());
    x[warm_up..]
        .iter()
        .zip(&h[warm_up..])
        .map(|(x, h)| match kind {
            Objective::Gaussian => h.ln() + x * x / h,
            Objective::Poisson => h - x * h.ln(),
            Objective::LeastSquares => (x - h) * (x - h),
        })
        .collect()
}

/// Compares each profile point with the best one through paired
/// per-observation loss differences; flat when every mean difference lies
/// within two Monte Carlo standard errors of zero.
pub fn profile_flatness(fit: &FitResult, x: &[f64], name: &str) -> Result<ProfileFlatness> {
    let Some(points) = fit.profiled.get(name) else {
        return Err(Error::InvalidInput(format!("no profile stored under {name}")));
    };
    let best = points
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective).then(a.value.cmp(&b.value)))
        .ok_or_else(|| Error::InvalidInput("empty profile".into()))?
        .value;
    let base_theta = profile_params(fit, best)
        .ok_or_else(|| Error::InvalidInput(format!("profile {name} has no converged point at {best}")))?;
    let base = loss_terms(&base_theta, x, fit.warm_up);
    let mut contrasts = Vec::with_capacity(points.len());
    for p in points {
        let Some(theta) = profile_params(fit, p.value) else {
            contrasts.push(ProfileContrast {
                value: p.value,
                gap: f64::INFINITY,
                std_error: 0.0,
            });
            continue;
        };
        let diff: Vec<f64> = loss_terms(&theta, x, fit.warm_up)
            .iter()
            .zip(&base)
            .map(|(a, b)| a - b)
            .collect();
        let n = diff.len() as f64;
        let mean = diff.iter().sum::<f64>() / n;
        let var = diff.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        contrasts.push(ProfileContrast {
            value: p.value,
            gap: mean,
            std_error: (var / n).sqrt(),
        });
    }
    let flat = contrasts.iter().all(|c| c.gap.is_finite() && c.gap <= 2.0 * c.std_error);
    Ok(ProfileFlatness {
        parameter: name.to_string(),
        best,
        contrasts,
        flat,
    })
}

/// Continuous coordinates of `theta` (integer parameters excluded) and a
/// constructor that rebuilds a parameter point from perturbed values.
fn continuous_coordinates(theta: &ModelParams) -> Vec<(String, f64)> {
    theta
        .coordinates()
        .into_iter()
        .filter(|(name, _)| name != "l" && name != "d")
        .collect()
}

fn rebuild(theta: &ModelParams, values: &[f64]) -> Option<ModelParams> {
    use crate::model::{AgarchParams, IntgarchParams, StarParams, StgarchParams};
    let out = match theta {
        ModelParams::Stgarch(t) => {
            let q = t.q();
            let p = t.p();
            StgarchParams::new(
                values[0],
                values[1],
                values[2..2 + q].to_vec(),
                values[2 + q..2 + 2 * q].to_vec(),
                values[2 + 2 * q..2 + 2 * q + p].to_vec(),
                t.d(),
            )
            .ok()?
            .into()
        }
        ModelParams::Agarch(_) => AgarchParams::new(values[0], values[1], values[2], values[3]).ok()?.into(),
        ModelParams::Intgarch(t) => {
            IntgarchParams::new(values[0], values[1], values[2], values[3], t.l()).ok()?.into()
        }
        ModelParams::Star(t) => {
            let w = t.p() + 1;
            let m = t.m();
            let regimes = (0..=m).map(|i| values[i * w..(i + 1) * w].to_vec()).collect();
            let off = (m + 1) * w;
            StarParams::new(
                regimes,
                values[off..off + m].to_vec(),
                values[off + m..off + 2 * m].to_vec(),
                t.d(),
            )
            .ok()?
            .into()
        }
    };
    Some(out)
}

/// Outer product of central-difference gradients of `h_t(θ)`, averaged over
/// `t` past the warm-up, with its spectrum before and after unit-diagonal scaling.
pub fn curvature_at(theta: &ModelParams, x: &[f64], warm_up: Option<usize>) -> Result<Curvature> {
    let warm_up = warm_up.unwrap_or_else(|| warm_up_for(theta));
    if x.len() <= warm_up {
        return Err(Error::TooShort {
            needed: warm_up,
            got: x.len(),
        });
    }
    if theta.family() == Family::Intgarch {
        check_counts(x)?;
    }
    let coords = continuous_coordinates(theta);
    let base: Vec<f64> = coords.iter().map(|(_, v)| *v).collect();
    let k = base.len();
    let prep = Prepared::new(x);
    let n = x.len();
    let mut grads = vec![vec![0.0; n]; k];
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for i in 0..k {
        let h = 1e-5 * base[i].abs().max(1.0);
        let mut v = base.clone();
        v[i] = base[i] + h;
        let tp = rebuild(theta, &v).ok_or_else(|| {
            Error::OnBoundary(format!("{} + {h} leaves the parameter space", coords[i].0))
        })?;
        v[i] = base[i] - h;
        let tm = rebuild(theta, &v).ok_or_else(|| {
            Error::OnBoundary(format!("{} - {h} leaves the parameter space", coords[i].0))
        })?;
        prep.fill(&tp, &mut plus);
        prep.fill(&tm, &mut minus);
        for t in 0..n {
            grads[i][t] = (plus[t] - minus[t]) / (2.0 * h);
        }
    }
    let m = (n - warm_up) as f64;
    let mut opg = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = grads[i][warm_up..]
                .iter()
                .zip(&grads[j][warm_up..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / m;
            opg[(i, j)] = s;
            opg[(j, i)] = s;
        }
    }
    let raw = SymmetricEigen::new(opg.clone()).eigenvalues;
    let raw_min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let scale: Vec<f64> = (0..k)
        .map(|i| {
            let d = opg[(i, i)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut norm = opg;
    for i in 0..k {
        for j in 0..k {
            norm[(i, j)] *= scale[i] * scale[j];
        }
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(norm).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let min = eig[0];
    let max = eig[k - 1];
    Ok(Curvature {
        coordinates: coords.into_iter().map(|(n, _)| n).collect(),
        min_eigenvalue: min,
        raw_min_eigenvalue: raw_min,
        condition_number: if min > 0.0 { max / min } else { f64::INFINITY },
        eigenvalues: eig,
    })
}
