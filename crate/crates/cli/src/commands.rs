//! Command implementations. Each builds a serializable report plus CSV artifacts in memory.

use std::path::PathBuf;

use nlts_core::estimate::{
    gaussian_qmle, poisson_qmle, profile_flatness, star_nls, FitOptions, FitResult, Orders, ProfileFlatness,
};
use nlts_core::ident::{
    agarch_identity_solve, equivalence_search, stgarch_partial_ident_probe, IdentReport, IdentVerdict, ProbeConfig,
    ProbeReport, SearchConfig,
};
use nlts_core::mixture::{
    gram_independence, laplace_quadrature, logistic_laplace_f0, logistic_laplace_f1, null_vector_extract,
    GramReport, Independence, NullVector, QuadratureSpec, DEFAULT_DELTA,
};
use nlts_core::model::{Family, InnovationSpec, ModelParams, ParamDoc};
use nlts_core::rng::CounterRng;
use nlts_core::simulate::{simulate_model, SimConfig, StarSimOptions, DEFAULT_BURN_IN};
use nlts_core::stationarity::{
    agarch_logmoment, intgarch_condition, star_partial_sum_condition, star_sup_condition, stgarch111_logmoment,
    StationarityReport, SupGrid, Verdict,
};
use nlts_core::Error as CoreError;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Command, ExperimentConfig, SCHEMA_VERSION};
use crate::input::read_series;
use crate::CliError;

pub struct Context {
    pub config_dir: PathBuf,
}

/// A finished command: serialized `report.json` and named CSV artifacts.
pub struct Output {
    pub report: Vec<u8>,
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl Output {
    fn new<R: Serialize>(report: &R, artifacts: Vec<(String, Vec<u8>)>) -> Result<Self, CliError> {
        let mut bytes = serde_json::to_vec_pretty(report)
            .map_err(|e| CliError::Numerical(format!("cannot serialize report: {e}")))?;
        bytes.push(b'\n');
        Ok(Self {
            report: bytes,
            artifacts,
        })
    }
}

pub fn execute(cfg: &ExperimentConfig, ctx: &Context) -> Result<Output, CliError> {
    match cfg.command {
        Command::Simulate => simulate(cfg),
        Command::Fit => fit(cfg, ctx),
        Command::IdentScan => ident_scan(cfg),
        Command::PartialIdent => partial_ident(cfg),
        Command::LemmaCheck => lemma_check(cfg),
        Command::LaplaceCheck => laplace_check(cfg),
        Command::Stationarity => stationarity(cfg),
        Command::AgarchDemo => agarch_demo(cfg),
    }
}

fn innovation(cfg: &ExperimentConfig) -> Result<InnovationSpec, CliError> {
    let innov = cfg.run.innovation.clone().unwrap_or_default();
    innov.validate()?;
    Ok(innov)
}

fn positive(v: f64, name: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Validation(format!("run.{name} must be positive and finite, got {v}")))
    }
}

fn star_options(cfg: &ExperimentConfig) -> Result<StarSimOptions, CliError> {
    Ok(StarSimOptions::new(positive(cfg.run.noise_sd.unwrap_or(1.0), "noise_sd")?))
}

fn sim_config(cfg: &ExperimentConfig, n: usize, seed: u64) -> SimConfig {
    SimConfig::new(n, seed).burn_in(cfg.run.burn_in.unwrap_or(DEFAULT_BURN_IN))
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::Numerical(format!("cannot format CSV: {e}")))?;
    Ok(buf)
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct SimulateReport {
    schema_version: u32,
    command: Command,
    model: ParamDoc,
    n: usize,
    burn_in: usize,
    innovation: InnovationSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_sd: Option<f64>,
    paths: Vec<PathSummary>,
}

#[derive(Serialize)]
struct PathSummary {
    seed: u64,
    file: String,
    n: usize,
    mean: f64,
    variance: f64,
    max_abs: f64,
    diverged: bool,
    unverified_stationarity: bool,
    warnings: Vec<String>,
}

fn simulate(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let theta = cfg.model()?;
    let n = cfg.require(cfg.run.n, "n")?;
    let innov = innovation(cfg)?;
    let star = star_options(cfg)?;
    let mut paths = Vec::new();
    let mut artifacts = Vec::new();
    for &seed in cfg.seeds()? {
        let path = simulate_model(&theta, sim_config(cfg, n, seed), &innov, star)?;
        let file = format!("path_seed{seed}.csv");
        artifacts.push((file.clone(), csv_bytes(|b| path.write_csv(b))?));
        let len = path.x.len() as f64;
        let mean = path.x.iter().sum::<f64>() / len;
        let variance = path.x.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / len;
        paths.push(PathSummary {
            seed,
            file,
            n: path.x.len(),
            mean,
            variance,
            max_abs: path.x.iter().fold(0.0, |m, x| m.max(x.abs())),
            diverged: path.diverged,
            unverified_stationarity: path.unverified_stationarity,
            warnings: path.warnings,
        });
    }
    let report = SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: cfg.command,
        model: theta.to_doc(),
        n,
        burn_in: cfg.run.burn_in.unwrap_or(DEFAULT_BURN_IN),
        innovation: innov,
        noise_sd: (theta.family() == Family::Star).then_some(star.noise_sd),
        paths,
    };
    Output::new(&report, artifacts)
}

// --------------------------------------------------------------------- fit

#[derive(Serialize)]
struct FitReport {
    schema_version: u32,
    command: Command,
    family: Family,
    fits: Vec<FitCase>,
}

#[derive(Serialize)]
struct FitCase {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    n: usize,
    fit: FitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile_flatness: Option<ProfileFlatness>,
}

enum FitSpec {
    Gaussian(Family, Orders),
    Poisson(Vec<u64>),
    Star { d_grid: Vec<usize>, m: usize, p: usize },
}

fn fit_spec(cfg: &ExperimentConfig, family: Family, model: Option<&ModelParams>) -> Result<FitSpec, CliError> {
    let run = &cfg.run;
    Ok(match family {
        Family::Stgarch => {
            let orders = match (run.orders, model) {
                (Some(o), _) => Orders { p: o.p, q: o.q, d: o.d },
                (None, Some(ModelParams::Stgarch(s))) => Orders {
                    p: s.p(),
                    q: s.q(),
                    d: s.d(),
                },
                _ => Orders::default(),
            };
            FitSpec::Gaussian(family, orders)
        }
        Family::Agarch => FitSpec::Gaussian(family, Orders::default()),
        Family::Intgarch => FitSpec::Poisson(run.l_grid.clone().unwrap_or_else(|| (1..=10).collect())),
        Family::Star => {
            let (m0, p0) = match model {
                Some(ModelParams::Star(s)) => (Some(s.m()), Some(s.p())),
                _ => (None, None),
            };
            let m = run.m.or(m0).ok_or_else(|| CliError::Validation("STAR fit needs run.M".into()))?;
            let p = run.p.or(p0).ok_or_else(|| CliError::Validation("STAR fit needs run.p".into()))?;
            let d_grid = run.d_grid.clone().unwrap_or_else(|| (1..=p).collect());
            FitSpec::Star { d_grid, m, p }
        }
    })
}

fn fit_one(spec: &FitSpec, x: &[f64], opts: &FitOptions) -> Result<(FitResult, Option<ProfileFlatness>), CliError> {
    let (fit, profile) = match spec {
        FitSpec::Gaussian(family, orders) => (gaussian_qmle(x, *family, *orders, opts)?, None),
        FitSpec::Poisson(grid) => (poisson_qmle(x, grid, opts)?, (grid.len() > 1).then_some("l")),
        FitSpec::Star { d_grid, m, p } => (star_nls(x, d_grid, *m, *p, opts)?, (d_grid.len() > 1).then_some("d")),
    };
    let flat = match profile {
        Some(name) => Some(profile_flatness(&fit, x, name)?),
        None => None,
    };
    Ok((fit, flat))
}

fn fit_options(cfg: &ExperimentConfig, seed: u64) -> FitOptions {
    let mut opts = FitOptions {
        seed,
        ..FitOptions::default()
    };
    if let Some(s) = cfg.run.starts {
        opts.n_starts = s;
    }
    if let Some(m) = cfg.run.max_iter {
        opts.max_iter = m;
    }
    if let Some(g) = cfg.run.gamma_max {
        opts.gamma_max = g;
        opts.star_gamma.1 = g;
    }
    opts
}

fn fit(cfg: &ExperimentConfig, ctx: &Context) -> Result<Output, CliError> {
    let model = cfg.model.as_ref().map(|_| cfg.model()).transpose()?;
    let family = cfg
        .run
        .family
        .or(model.as_ref().map(ModelParams::family))
        .ok_or_else(|| CliError::Validation("fit needs run.family or a model document".into()))?;
    if let Some(m) = &model {
        if m.family() != family {
            return Err(CliError::Validation(format!(
                "run.family is {family} but the model is {}",
                m.family()
            )));
        }
    }
    let spec = fit_spec(cfg, family, model.as_ref())?;
    let mut fits = Vec::new();
    if let Some(input) = &cfg.run.input {
        let opt_seed = cfg.run.opt_seed.ok_or_else(|| {
            CliError::Validation("fit on an input file needs an explicit run.opt_seed".into())
        })?;
        let x = read_series(&ctx.config_dir.join(input))?;
        let (fit, flat) = fit_one(&spec, &x, &fit_options(cfg, opt_seed))?;
        fits.push(FitCase {
            seed: None,
            input: Some(input.display().to_string()),
            n: x.len(),
            fit,
            profile_flatness: flat,
        });
    } else {
        let theta = model
            .as_ref()
            .ok_or_else(|| CliError::Validation("fit needs run.input or a model to simulate from".into()))?;
        let n = cfg.require(cfg.run.n, "n")?;
        let innov = innovation(cfg)?;
        let star = star_options(cfg)?;
        for &seed in cfg.seeds()? {
            let path = simulate_model(theta, sim_config(cfg, n, seed), &innov, star)?;
            let (fit, flat) = fit_one(&spec, &path.x, &fit_options(cfg, cfg.run.opt_seed.unwrap_or(seed)))?;
            fits.push(FitCase {
                seed: Some(seed),
                input: None,
                n: path.x.len(),
                fit,
                profile_flatness: flat,
            });
        }
    }
    Output::new(
        &FitReport {
            schema_version: SCHEMA_VERSION,
            command: cfg.command,
            family,
            fits,
        },
        vec![],
    )
}

// -------------------------------------------------------------- ident-scan

#[derive(Serialize)]
struct IdentScanReport {
    schema_version: u32,
    command: Command,
    model: ParamDoc,
    runs: Vec<IdentRun>,
    summary: IdentSummary,
}

#[derive(Serialize)]
struct IdentRun {
    seed: u64,
    minimizers_file: String,
    /// Largest raw ∞-distance from a non-boundary minimizer to the truth.
    max_abs_distance: Option<f64>,
    report: IdentReport,
}

#[derive(Serialize)]
struct IdentSummary {
    seeds: usize,
    point_identified: usize,
    ridge: usize,
    inconclusive: usize,
    minimizers: usize,
    max_distance: Option<f64>,
    max_abs_distance: Option<f64>,
}

fn search_config(cfg: &ExperimentConfig, theta: &ModelParams, seed: u64) -> Result<SearchConfig, CliError> {
    let run = &cfg.run;
    let mut sc = SearchConfig {
        data_seed: seed,
        opt_seed: run.opt_seed.unwrap_or(seed),
        innovation: innovation(cfg)?,
        noise_sd: positive(run.noise_sd.unwrap_or(1.0), "noise_sd")?,
        l_grid: run.l_grid.clone(),
        d_grid: run.d_grid.clone(),
        eps: run.eps,
        ..SearchConfig::default()
    };
    if let Some(v) = run.n {
        sc.n = v;
    }
    if let Some(v) = run.starts {
        sc.starts = v;
    }
    if let Some(v) = run.burn_in {
        sc.burn_in = v;
    }
    if let Some(v) = run.rho {
        sc.rho = positive(v, "rho")?;
    }
    if let Some(v) = run.prefix {
        sc.prefix = v;
    }
    if let Some(v) = run.max_iter {
        sc.max_iter = v;
    }
    if let Some(g) = run.gamma_max {
        if theta.family() == Family::Star {
            sc.star_gamma.1 = g;
        } else {
            sc.gamma_max = g;
        }
    }
    Ok(sc)
}

fn fold_max(it: impl Iterator<Item = f64>) -> Option<f64> {
    it.fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
}

fn ident_scan(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let theta = cfg.model()?;
    let truth = theta.coordinate_values();
    let mut runs = Vec::new();
    let mut artifacts = Vec::new();
    for &seed in cfg.seeds()? {
        let sc = search_config(cfg, &theta, seed)?;
        let report = equivalence_search(&theta, &sc)?;
        let file = format!("minimizers_seed{seed}.csv");
        artifacts.push((file.clone(), csv_bytes(|b| report.write_minimizers_csv(b))?));
        let max_abs = fold_max(report.minimizers.iter().filter(|m| !m.boundary_flat).map(|m| {
            m.theta
                .iter()
                .zip(&truth)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        }));
        runs.push(IdentRun {
            seed,
            minimizers_file: file,
            max_abs_distance: max_abs,
            report,
        });
    }
    let count = |v: IdentVerdict| runs.iter().filter(|r| r.report.verdict == v).count();
    let summary = IdentSummary {
        seeds: runs.len(),
        point_identified: count(IdentVerdict::PointIdentified),
        ridge: count(IdentVerdict::Ridge),
        inconclusive: count(IdentVerdict::Inconclusive),
        minimizers: runs.iter().map(|r| r.report.minimizers.len()).sum(),
        max_distance: fold_max(
            runs.iter()
                .flat_map(|r| r.report.minimizers.iter())
                .filter(|m| !m.boundary_flat)
                .map(|m| m.distance),
        ),
        max_abs_distance: fold_max(runs.iter().filter_map(|r| r.max_abs_distance)),
    };
    Output::new(
        &IdentScanReport {
            schema_version: SCHEMA_VERSION,
            command: cfg.command,
            model: theta.to_doc(),
            runs,
            summary,
        },
        artifacts,
    )
}

// ----------------------------------------------------------- partial-ident

#[derive(Serialize)]
struct PartialIdentReport {
    schema_version: u32,
    command: Command,
    model: ParamDoc,
    runs: Vec<ProbeRun>,
    summary: ProbeSummary,
}

#[derive(Serialize)]
struct ProbeRun {
    seed: u64,
    report: ProbeReport,
}

#[derive(Serialize)]
struct ProbeSummary {
    seeds: usize,
    ridge_verdicts: usize,
    max_ridge_discrepancy: f64,
    /// Smallest ratio `D / eps` over the off-manifold perturbations.
    min_perturbation_ratio: Option<f64>,
}

fn partial_ident(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let theta = cfg.model()?;
    let ModelParams::Stgarch(st) = &theta else {
        return Err(CliError::Validation(format!(
            "partial-ident probes STGARCH parameters, not {}",
            theta.family()
        )));
    };
    let run = &cfg.run;
    let mut base = ProbeConfig {
        innovation: innovation(cfg)?,
        eps: run.eps,
        ..ProbeConfig::default()
    };
    if let Some(v) = run.n {
        base.n = v;
    }
    if let Some(v) = run.burn_in {
        base.burn_in = v;
    }
    if let Some(v) = &run.gamma_grid {
        base.gamma_grid = v.clone();
    }
    if let Some(v) = &run.cone_grid {
        base.cone_grid = v.clone();
    }
    if let Some(v) = run.perturbation {
        base.perturbation = v;
    }
    let mut runs = Vec::new();
    for &seed in cfg.seeds()? {
        let pc = ProbeConfig {
            data_seed: seed,
            ..base.clone()
        };
        runs.push(ProbeRun {
            seed,
            report: stgarch_partial_ident_probe(st, &pc)?,
        });
    }
    let summary = ProbeSummary {
        seeds: runs.len(),
        ridge_verdicts: runs
            .iter()
            .filter(|r| r.report.ident.verdict == IdentVerdict::Ridge)
            .count(),
        max_ridge_discrepancy: runs.iter().map(|r| r.report.max_ridge_discrepancy).fold(0.0, f64::max),
        min_perturbation_ratio: runs
            .iter()
            .flat_map(|r| r.report.perturbations.iter().map(|p| p.discrepancy / r.report.ident.eps))
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v)))),
    };
    Output::new(
        &PartialIdentReport {
            schema_version: SCHEMA_VERSION,
            command: cfg.command,
            model: theta.to_doc(),
            runs,
            summary,
        },
        vec![],
    )
}

// ------------------------------------------------------------- lemma-check

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum CaseSource {
    Explicit,
    Sweep,
    Duplicate,
}

#[derive(Serialize)]
struct LemmaCase {
    id: usize,
    source: CaseSource,
    gram: GramReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    null_vector: Option<NullVector>,
}

#[derive(Serialize)]
struct LemmaSummary {
    cases: usize,
    independent: usize,
    dependent: usize,
    sweep: usize,
    sweep_independent: usize,
    duplicates: usize,
    duplicates_dependent: usize,
    min_sweep_eigenvalue: Option<f64>,
    max_duplicate_eigenvalue: Option<f64>,
}

#[derive(Serialize)]
struct LemmaReport {
    schema_version: u32,
    command: Command,
    delta: f64,
    quadrature: QuadratureSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<crate::config::SweepSpec>,
    cases: Vec<LemmaCase>,
    summary: LemmaSummary,
}

/// Distinct-pair configurations drawn uniformly from the sweep box, redrawn
/// until every two pairs are at least `min_separation` apart in ∞-norm.
fn sweep_configs(s: &crate::config::SweepSpec) -> Result<Vec<Vec<(f64, f64)>>, CliError> {
    let [g0, g1] = s.gamma_range;
    let [c0, c1] = s.c_range;
    if !(g0 > 0.0 && g1 >= g0 && c1 >= c0 && g1.is_finite() && c0.is_finite() && c1.is_finite()) {
        return Err(CliError::Validation(
            "sweep needs 0 < gamma_range[0] <= gamma_range[1] and a finite, ordered c_range".into(),
        ));
    }
    if s.k_max == 0 {
        return Err(CliError::Validation("sweep.k_max must be at least 1".into()));
    }
    let rng = CounterRng::new(s.seed, 0);
    let mut out = Vec::with_capacity(s.count);
    let mut t = 0u64;
    while out.len() < s.count {
        if t > 1000 * (s.count as u64 + 1) {
            return Err(CliError::Validation(
                "sweep box too small for the requested separation".into(),
            ));
        }
        let mut r = rng.at(t);
        t += 1;
        let k = 1 + ((r.uniform() * s.k_max as f64) as usize).min(s.k_max - 1);
        let pairs: Vec<(f64, f64)> = (0..k)
            .map(|_| (g0 + (g1 - g0) * r.uniform(), c0 + (c1 - c0) * r.uniform()))
            .collect();
        let separated = (0..k).all(|a| {
            (a + 1..k).all(|b| {
                (pairs[a].0 - pairs[b].0)
                    .abs()
                    .max((pairs[a].1 - pairs[b].1).abs())
                    >= s.min_separation
            })
        });
        if separated {
            out.push(pairs);
        }
    }
    Ok(out)
}

fn duplicate_configs(s: &crate::config::SweepSpec) -> Vec<Vec<(f64, f64)>> {
    let rng = CounterRng::new(s.seed, 1);
    let [g0, g1] = s.gamma_range;
    let [c0, c1] = s.c_range;
    (0..s.duplicates as u64)
        .map(|t| {
            let mut r = rng.at(t);
            let p = (g0 + (g1 - g0) * r.uniform(), c0 + (c1 - c0) * r.uniform());
            vec![p, p]
        })
        .collect()
}

fn lemma_check(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let run = &cfg.run;
    let mut configs: Vec<(CaseSource, Vec<(f64, f64)>)> = Vec::new();
    for pairs in run.pairs.iter().flatten() {
        if pairs.is_empty() {
            return Err(CliError::Validation("run.pairs holds an empty configuration".into()));
        }
        configs.push((CaseSource::Explicit, pairs.iter().map(|p| (p[0], p[1])).collect()));
    }
    if let Some(s) = &run.sweep {
        configs.extend(sweep_configs(s)?.into_iter().map(|p| (CaseSource::Sweep, p)));
        configs.extend(duplicate_configs(s).into_iter().map(|p| (CaseSource::Duplicate, p)));
    }
    if configs.is_empty() {
        return Err(CliError::Validation("lemma-check needs run.pairs or run.sweep".into()));
    }
    let delta = positive(run.delta.unwrap_or(DEFAULT_DELTA), "delta")?;
    let mut quad = QuadratureSpec::default();
    if let Some(o) = run.quadrature_order {
        if o == 0 {
            return Err(CliError::Validation("run.quadrature_order must be positive".into()));
        }
        quad.order = o;
        quad.max_order = quad.max_order.max(16 * o);
    }
    let cases = configs
        .par_iter()
        .enumerate()
        .map(|(id, (source, pairs))| {
            let gram = gram_independence(pairs, &quad, delta)?;
            let null_vector = null_vector_extract(&gram);
            Ok(LemmaCase {
                id,
                source: *source,
                gram,
                null_vector,
            })
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    let of = |s: CaseSource| cases.iter().filter(move |c| c.source == s);
    let summary = LemmaSummary {
        cases: cases.len(),
        independent: cases.iter().filter(|c| c.gram.verdict == Independence::Independent).count(),
        dependent: cases.iter().filter(|c| c.gram.verdict == Independence::Dependent).count(),
        sweep: of(CaseSource::Sweep).count(),
        sweep_independent: of(CaseSource::Sweep)
            .filter(|c| c.gram.verdict == Independence::Independent)
            .count(),
        duplicates: of(CaseSource::Duplicate).count(),
        duplicates_dependent: of(CaseSource::Duplicate)
            .filter(|c| c.gram.verdict == Independence::Dependent)
            .count(),
        min_sweep_eigenvalue: of(CaseSource::Sweep)
            .map(|c| c.gram.min_eigenvalue)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v)))),
        max_duplicate_eigenvalue: fold_max(of(CaseSource::Duplicate).map(|c| c.gram.min_eigenvalue)),
    };
    Output::new(
        &LemmaReport {
            schema_version: SCHEMA_VERSION,
            command: cfg.command,
            delta,
            quadrature: quad,
            sweep: run.sweep.clone(),
            cases,
            summary,
        },
        vec![],
    )
}

// ----------------------------------------------------------- laplace-check

#[derive(Serialize)]
struct LaplacePoint {
    s: f64,
    gamma: f64,
    c: f64,
    f0: f64,
    f0_quadrature: f64,
    f0_relative_error: f64,
    f1: f64,
    f1_quadrature: f64,
    f1_relative_error: f64,
}

#[derive(Serialize)]
struct LaplaceAnchor {
    name: String,
    s: f64,
    gamma: f64,
    c: f64,
    expected: f64,
    closed_form: f64,
    quadrature: f64,
    abs_error: f64,
    pass: bool,
}

#[derive(Serialize)]
struct LaplaceReport {
    schema_version: u32,
    command: Command,
    tol: f64,
    points: Vec<LaplacePoint>,
    anchors: Vec<LaplaceAnchor>,
    max_relative_error: f64,
    pass: bool,
}

/// 50 points: γ ∈ {0.5, 1, 2, 3, 5}, s/γ ∈ {0.1, 0.3, 0.5, 0.7, 0.9}, c ∈ {−1, 0.5}.
fn default_laplace_grid() -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(50);
    for g in [0.5, 1.0, 2.0, 3.0, 5.0] {
        for r in [0.1, 0.3, 0.5, 0.7, 0.9] {
            for c in [-1.0, 0.5] {
                out.push([r * g, g, c]);
            }
        }
    }
    out
}

fn rel_err(approx: f64, exact: f64) -> f64 {
    let d = (approx - exact).abs();
    if exact == 0.0 {
        d
    } else {
        d / exact.abs()
    }
}

fn laplace_check(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let tol = positive(cfg.run.tol.unwrap_or(1e-6), "tol")?;
    let grid = cfg.run.points.clone().unwrap_or_else(default_laplace_grid);
    if grid.is_empty() {
        return Err(CliError::Validation("run.points is empty".into()));
    }
    let points = grid
        .par_iter()
        .map(|&[s, gamma, c]| {
            let f0 = logistic_laplace_f0(s, gamma, c)?;
            let f1 = logistic_laplace_f1(s, gamma, c)?;
            let q0 = laplace_quadrature(s, gamma, c, 0)?;
            let q1 = laplace_quadrature(s, gamma, c, 1)?;
            Ok(LaplacePoint {
                s,
                gamma,
                c,
                f0,
                f0_quadrature: q0,
                f0_relative_error: rel_err(q0, f0),
                f1,
                f1_quadrature: q1,
                f1_relative_error: rel_err(q1, f1),
            })
        })
        .collect::<Result<Vec<_>, CoreError>>()
        .map_err(|e| match e {
            CoreError::Domain(m) => CliError::Validation(m),
            other => other.into(),
        })?;
    let anchor = |name: &str, k: u32, expected: f64| -> Result<LaplaceAnchor, CliError> {
        let (s, gamma, c) = (0.5, 1.0, 0.0);
        let closed = if k == 0 {
            logistic_laplace_f0(s, gamma, c)?
        } else {
            logistic_laplace_f1(s, gamma, c)?
        };
        let quad = laplace_quadrature(s, gamma, c, k)?;
        let abs_error = (closed - expected).abs().max((quad - expected).abs());
        Ok(LaplaceAnchor {
            name: name.to_string(),
            s,
            gamma,
            c,
            expected,
            closed_form: closed,
            quadrature: quad,
            abs_error,
            pass: abs_error <= tol,
        })
    };
    let anchors = vec![
        anchor("F0(1/2; 1, 0) = pi", 0, std::f64::consts::PI)?,
        anchor("F1(1/2; 1, 0) = 0", 1, 0.0)?,
    ];
    let max_relative_error = points
        .iter()
        .map(|p| p.f0_relative_error.max(p.f1_relative_error))
        .fold(0.0, f64::max);
    let pass = max_relative_error <= tol && anchors.iter().all(|a| a.pass);
    Output::new(
        &LaplaceReport {
            schema_version: SCHEMA_VERSION,
            command: cfg.command,
            tol,
            points,
            anchors,
            max_relative_error,
            pass,
        },
        vec![],
    )
}

// ------------------------------------------------------------ stationarity

#[derive(Serialize)]
struct McRun {
    seed: u64,
    report: StationarityReport,
}

#[derive(Serialize)]
struct StationarityCommandReport {
    schema_version: u32,
    command: Command,
    model: ParamDoc,
    innovation: InnovationSpec,
    exact: Vec<StationarityReport>,
    monte_carlo: Vec<McRun>,
    /// No pass/fail flip across the Monte Carlo seeds; absent without Monte Carlo runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    verdicts_stable: Option<bool>,
    notes: Vec<String>,
}

fn stationarity(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let theta = cfg.model()?;
    let innov = innovation(cfg)?;
    let mc_n = cfg.run.mc_n.unwrap_or(1_000_000);
    let mut exact = Vec::new();
    let mut monte_carlo = Vec::new();
    let mut notes = Vec::new();
    match &theta {
        ModelParams::Stgarch(p) if p.p() == 1 && p.q() == 1 => {
            for &seed in cfg.seeds()? {
                monte_carlo.push(McRun {
                    seed,
                    report: stgarch111_logmoment(p, &innov, mc_n, seed)?,
                });
            }
        }
        ModelParams::Stgarch(p) => notes.push(format!(
            "no sufficient stationarity condition is available for STGARCH({},{},{}); \
             simulation proceeds with unverified_stationarity set",
            p.p(),
            p.q(),
            p.d()
        )),
        ModelParams::Agarch(p) => {
            for &seed in cfg.seeds()? {
                monte_carlo.push(McRun {
                    seed,
                    report: agarch_logmoment(p, &innov, mc_n, seed)?,
                });
            }
        }
        ModelParams::Intgarch(p) => exact.push(intgarch_condition(p)),
        ModelParams::Star(p) => {
            exact.push(star_sup_condition(p, &SupGrid::default()));
            exact.push(star_partial_sum_condition(p));
        }
    }
    let verdicts_stable = (!monte_carlo.is_empty()).then(|| {
        let has = |v: Verdict| monte_carlo.iter().any(|r| r.report.verdict == v);
        !(has(Verdict::Pass) && has(Verdict::Fail))
    });
    Output::new(
        &StationarityCommandReport {
            schema_version: SCHEMA_VERSION,
            command: cfg.command,
            model: theta.to_doc(),
            innovation: innov,
            exact,
            monte_carlo,
            verdicts_stable,
            notes,
        },
        vec![],
    )
}

// ------------------------------------------------------------- agarch-demo

#[derive(Serialize)]
struct AgarchCase {
    alpha: f64,
    gamma: f64,
    grid: Vec<f64>,
    alpha_hat: f64,
    gamma_hat: f64,
    abs_error: f64,
}

#[derive(Serialize)]
struct OneSignedCase {
    grid: Vec<f64>,
    truths_tested: usize,
    underdetermined: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

#[derive(Serialize)]
struct AgarchDemoReport {
    schema_version: u32,
    command: Command,
    recovery_tol: f64,
    cases: Vec<AgarchCase>,
    one_signed: Vec<OneSignedCase>,
    max_abs_error: f64,
    all_recovered: bool,
    one_signed_all_refused: bool,
}

const AGARCH_RECOVERY_TOL: f64 = 1e-10;

fn agarch_demo(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let run = &cfg.run;
    let mut truths: Vec<(f64, f64, Option<Vec<f64>>)> = run
        .truths
        .iter()
        .flatten()
        .map(|t| (t[0], t[1], None))
        .collect();
    if let Some(r) = run.random_truths {
        let rng = CounterRng::new(r.seed, 0);
        for t in 0..r.count as u64 {
            let mut s = rng.at(t);
            let alpha = 0.01 + 0.99 * s.uniform();
            let gamma = -1.0 + 2.0 * s.uniform();
            let mut grid: Vec<f64> = (0..3).map(|_| -(0.1 + 2.9 * s.uniform())).collect();
            grid.extend((0..3).map(|_| 0.1 + 2.9 * s.uniform()));
            truths.push((alpha, gamma, Some(grid)));
        }
    }
    if truths.is_empty() {
        return Err(CliError::Validation("agarch-demo needs run.truths or run.random_truths".into()));
    }
    let mut cases = Vec::new();
    for (alpha, gamma, own) in &truths {
        let grid = match (&run.x_grid, own) {
            (Some(g), _) => g.clone(),
            (None, Some(g)) => g.clone(),
            (None, None) => vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0],
        };
        let (alpha_hat, gamma_hat) = agarch_identity_solve(*alpha, *gamma, &grid)?;
        cases.push(AgarchCase {
            alpha: *alpha,
            gamma: *gamma,
            abs_error: (alpha_hat - alpha).abs().max((gamma_hat - gamma).abs()),
            grid,
            alpha_hat,
            gamma_hat,
        });
    }
    let one_signed_grids = run
        .one_signed_grids
        .clone()
        .unwrap_or_else(|| vec![vec![0.5, 1.0, 2.0], vec![-2.0, -1.0, -0.5], vec![0.0, 1.0, 3.0]]);
    let mut one_signed = Vec::new();
    for grid in one_signed_grids {
        let mut refused = 0;
        let mut message = None;
        for (alpha, gamma, _) in &truths {
            match agarch_identity_solve(*alpha, *gamma, &grid) {
                Err(CoreError::Underdetermined(m)) => {
                    refused += 1;
                    message.get_or_insert(m);
                }
                Err(e) => return Err(e.into()),
                Ok(_) => {}
            }
        }
        one_signed.push(OneSignedCase {
            grid,
            truths_tested: truths.len(),
            underdetermined: refused,
            message,
        });
    }
    let max_abs_error = cases.iter().map(|c| c.abs_error).fold(0.0, f64::max);
    Output::new(
        &AgarchDemoReport {
            schema_version: SCHEMA_VERSION,
            command: cfg.command,
            recovery_tol: AGARCH_RECOVERY_TOL,
            all_recovered: max_abs_error <= AGARCH_RECOVERY_TOL,
            one_signed_all_refused: one_signed.iter().all(|c| c.underdetermined == c.truths_tested),
            cases,
            one_signed,
            max_abs_error,
        },
        vec![],
    )
}
