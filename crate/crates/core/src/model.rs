//! Parameter records for the four model families, their transition
//! functions, innovation laws and the flat JSON parameter document.

use std::fmt;

use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StepRng;

/// Smooth-transition weight of STGARCH, `1/(1+exp(γx)) − 1/2`.
///
/// Evaluated as `−tanh(γx/2)/2`, which never overflows and is exactly odd in `x`.
#[inline]
pub fn stgarch_transition(x: f64, gamma: f64) -> f64 {
    -0.5 * (0.5 * gamma * x).tanh()
}

/// Logistic transition of STAR, `1/(1+exp(−γ(x−c)))`.
#[inline]
pub fn star_transition(x: f64, gamma: f64, c: f64) -> f64 {
    let z = gamma * (x - c);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Stgarch,
    Agarch,
    Intgarch,
    Star,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Stgarch => "stgarch",
            Family::Agarch => "agarch",
            Family::Intgarch => "intgarch",
            Family::Star => "star",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    Finite,
    OmegaPositive,
    GammaNonNegative,
    GammaPositive,
    GammaBox,
    Alpha1NonNegative,
    Alpha2Cone,
    AlphaNonNegative,
    BetaNonNegative,
    BetaUnit,
    BetaSum,
    RateUnit,
    OrderQ,
    OrderShape,
    DelayRange,
    ThresholdPositive,
    ThresholdsIncreasing,
    RegimeNonZero,
    MissingField,
}

impl Constraint {
    pub fn describe(self) -> &'static str {
        match self {
            Constraint::Finite => "all values finite",
            Constraint::OmegaPositive => "omega > 0",
            Constraint::GammaNonNegative => "gamma >= 0",
            Constraint::GammaPositive => "gamma > 0",
            Constraint::GammaBox => "gamma in [-1, 1]",
            Constraint::Alpha1NonNegative => "alpha1 >= 0",
            Constraint::Alpha2Cone => "|alpha2| ≤ 2·alpha1",
            Constraint::AlphaNonNegative => "alpha >= 0",
            Constraint::BetaNonNegative => "beta >= 0",
            Constraint::BetaUnit => "beta in [0, 1)",
            Constraint::BetaSum => "Σβ < 1",
            Constraint::RateUnit => "rate coefficients in [0, 1)",
            Constraint::OrderQ => "q >= 1",
            Constraint::OrderShape => "coefficient lengths consistent with orders",
            Constraint::DelayRange => "delay d within 1..=lag order",
            Constraint::ThresholdPositive => "threshold l >= 1",
            Constraint::ThresholdsIncreasing => "thresholds strictly increasing",
            Constraint::RegimeNonZero => "regime vectors beta_i (i >= 1) non-zero",
            Constraint::MissingField => "required field present",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Violations(pub Vec<Violation>);

impl Violations {
    fn push(&mut self, constraint: Constraint, detail: impl Into<String>) {
        self.0.push(Violation {
            constraint,
            detail: detail.into(),
        });
    }

    pub fn contains(&self, constraint: Constraint) -> bool {
        self.0.iter().any(|v| v.constraint == constraint)
    }

    fn into_result(self) -> std::result::Result<(), Violations> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} ({})", v.constraint.describe(), v.detail)?;
        }
        Ok(())
    }
}

fn check_finite(v: &mut Violations, name: &str, xs: &[f64]) {
    if xs.iter().any(|x| !x.is_finite()) {
        v.push(Constraint::Finite, format!("{name} contains a non-finite value"));
    }
}

/// STGARCH(p,q,d): `σ²_t = ω + Σα1ᵢX²_{t−i} + (Σα2ᵢX²_{t−i})F(X_{t−d},γ) + Σβⱼσ²_{t−j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StgarchParams {
    gamma: f64,
    omega: f64,
    alpha1: Vec<f64>,
    alpha2: Vec<f64>,
    beta: Vec<f64>,
    d: usize,
}

impl StgarchParams {
    pub fn new(
        gamma: f64,
        omega: f64,
        alpha1: Vec<f64>,
        alpha2: Vec<f64>,
        beta: Vec<f64>,
        d: usize,
    ) -> std::result::Result<Self, Violations> {
        let mut v = Violations::default();
        check_finite(&mut v, "gamma", &[gamma]);
        check_finite(&mut v, "omega", &[omega]);
        check_finite(&mut v, "alpha1", &alpha1);
        check_finite(&mut v, "alpha2", &alpha2);
        check_finite(&mut v, "beta", &beta);
        if gamma < 0.0 {
            v.push(Constraint::GammaNonNegative, format!("gamma = {gamma}"));
        }
        if omega <= 0.0 {
            v.push(Constraint::OmegaPositive, format!("omega = {omega}"));
        }
        let q = alpha1.len();
        if q == 0 {
            v.push(Constraint::OrderQ, "alpha1 is empty");
        }
        if alpha2.len() != q {
            v.push(
                Constraint::OrderShape,
                format!("alpha1 has {} entries, alpha2 has {}", q, alpha2.len()),
            );
        }
        for (i, &a) in alpha1.iter().enumerate() {
            if a < 0.0 {
                v.push(Constraint::Alpha1NonNegative, format!("alpha1[{}] = {a}", i + 1));
            }
        }
        for (i, (&a1, &a2)) in alpha1.iter().zip(alpha2.iter()).enumerate() {
            if a2.abs() > 2.0 * a1 {
                v.push(
                    Constraint::Alpha2Cone,
                    format!("|alpha2[{}]| = {} > 2·alpha1[{}] = {}", i + 1, a2.abs(), i + 1, 2.0 * a1),
                );
            }
        }
        for (j, &b) in beta.iter().enumerate() {
            if !(0.0..1.0).contains(&b) {
                v.push(Constraint::BetaUnit, format!("beta[{}] = {b}", j + 1));
            }
        }
        let sb: f64 = beta.iter().sum();
        if sb >= 1.0 {
            v.push(Constraint::BetaSum, format!("Σβ = {sb}"));
        }
        if d < 1 || d > q {
            v.push(Constraint::DelayRange, format!("d = {d}, q = {q}"));
        }
        v.into_result()?;
        Ok(Self {
            gamma,
            omega,
            alpha1,
            alpha2,
            beta,
            d,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn alpha1(&self) -> &[f64] {
        &self.alpha1
    }
    pub fn alpha2(&self) -> &[f64] {
        &self.alpha2
    }
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn p(&self) -> usize {
        self.beta.len()
    }
    pub fn q(&self) -> usize {
        self.alpha1.len()
    }
    pub fn beta_sum(&self) -> f64 {
        self.beta.iter().sum()
    }

    /// Conditions under which full identification holds: some `α2ᵢ ≠ 0` and `γ > 0`.
    pub fn has_transition(&self) -> bool {
        self.gamma > 0.0 && self.alpha2.iter().any(|&a| a != 0.0)
    }
}

/// AGARCH(1,1): `σ²_t = ω + α(|X_{t−1}| − γX_{t−1})² + βσ²_{t−1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgarchParams {
    omega: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl AgarchParams {
    pub fn new(omega: f64, alpha: f64, beta: f64, gamma: f64) -> std::result::Result<Self, Violations> {
        let mut v = Violations::default();
        check_finite(&mut v, "parameters", &[omega, alpha, beta, gamma]);
        if omega <= 0.0 {
            v.push(Constraint::OmegaPositive, format!("omega = {omega}"));
        }
        if alpha < 0.0 {
            v.push(Constraint::AlphaNonNegative, format!("alpha = {alpha}"));
        }
        if !(0.0..1.0).contains(&beta) {
            v.push(Constraint::BetaUnit, format!("beta = {beta}"));
        }
        if !(-1.0..=1.0).contains(&gamma) {
            v.push(Constraint::GammaBox, format!("gamma = {gamma}"));
        }
        v.into_result()?;
        Ok(Self {
            omega,
            alpha,
            beta,
            gamma,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `α(|x| − γx)²`
    #[inline]
    pub fn news(&self, x: f64) -> f64 {
        let u = x.abs() - self.gamma * x;
        self.alpha * u * u
    }
}

/// INTGARCH: `λ_t = ω + α1X_{t−1} + (α2−α1)(X_{t−1}−l)⁺ + βλ_{t−1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntgarchParams {
    omega: f64,
    alpha1: f64,
    alpha2: f64,
    beta: f64,
    l: u64,
}

impl IntgarchParams {
    pub fn new(
        omega: f64,
        alpha1: f64,
        alpha2: f64,
        beta: f64,
        l: u64,
    ) -> std::result::Result<Self, Violations> {
        let mut v = Violations::default();
        check_finite(&mut v, "parameters", &[omega, alpha1, alpha2, beta]);
        if omega <= 0.0 {
            v.push(Constraint::OmegaPositive, format!("omega = {omega}"));
        }
        for (name, x) in [("alpha1", alpha1), ("alpha2", alpha2), ("beta", beta)] {
            if !(0.0..1.0).contains(&x) {
                v.push(Constraint::RateUnit, format!("{name} = {x}"));
            }
        }
        if l < 1 {
            v.push(Constraint::ThresholdPositive, format!("l = {l}"));
        }
        v.into_result()?;
        Ok(Self {
            omega,
            alpha1,
            alpha2,
            beta,
            l,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }
    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn l(&self) -> u64 {
        self.l
    }

    /// One step of the intensity recursion.
    #[inline]
    pub fn step(&self, x_prev: f64, lambda_prev: f64) -> f64 {
        let excess = (x_prev - self.l as f64).max(0.0);
        self.omega
            + self.alpha1 * x_prev
            + (self.alpha2 - self.alpha1) * excess
            + self.beta * lambda_prev
    }
}

/// Multiple-regime STAR(p) with `M+1` limiting regimes.
///
/// `regimes[i] = (φ_{i0}, φ_{i1}, …, φ_{ip})`; regime 0 is the base regime and
/// regime `i ≥ 1` is weighted by `G(X_{t−d}; γᵢ, cᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarParams {
    regimes: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    c: Vec<f64>,
    d: usize,
}

impl StarParams {
    pub fn new(
        regimes: Vec<Vec<f64>>,
        gamma: Vec<f64>,
        c: Vec<f64>,
        d: usize,
    ) -> std::result::Result<Self, Violations> {
        let mut v = Violations::default();
        let m = gamma.len();
        if m < 1 {
            v.push(Constraint::OrderShape, "M must be at least 1");
        }
        if c.len() != m {
            v.push(
                Constraint::OrderShape,
                format!("gamma has {m} entries, c has {}", c.len()),
            );
        }
        if regimes.len() != m + 1 {
            v.push(
                Constraint::OrderShape,
                format!("expected M+1 = {} regime vectors, got {}", m + 1, regimes.len()),
            );
        }
        let width = regimes.first().map_or(0, |r| r.len());
        if width < 2 {
            v.push(Constraint::OrderShape, "regime vectors need length p+1 with p >= 1");
        }
        if regimes.iter().any(|r| r.len() != width) {
            v.push(Constraint::OrderShape, "regime vectors differ in length");
        }
        for r in &regimes {
            check_finite(&mut v, "regimes", r);
        }
        check_finite(&mut v, "gamma", &gamma);
        check_finite(&mut v, "c", &c);
        for (i, &g) in gamma.iter().enumerate() {
            if g <= 0.0 {
                v.push(Constraint::GammaPositive, format!("gamma[{}] = {g}", i + 1));
            }
        }
        for w in c.windows(2) {
            if w[0] >= w[1] {
                v.push(
                    Constraint::ThresholdsIncreasing,
                    format!("c = {:?} is not strictly increasing", c),
                );
                break;
            }
        }
        let p = width.saturating_sub(1);
        if d < 1 || d > p {
            v.push(Constraint::DelayRange, format!("d = {d}, p = {p}"));
        }
        v.into_result()?;
        Ok(Self {
            regimes,
            gamma,
            c,
            d,
        })
    }

    pub fn regimes(&self) -> &[Vec<f64>] {
        &self.regimes
    }
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    pub fn c(&self) -> &[f64] {
        &self.c
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn m(&self) -> usize {
        self.gamma.len()
    }
    pub fn p(&self) -> usize {
        self.regimes[0].len() - 1
    }

    /// Asserts that every transition regime carries a non-zero coefficient vector.
    pub fn check_identified(&self) -> std::result::Result<(), Violations> {
        let mut v = Violations::default();
        for (i, r) in self.regimes.iter().enumerate().skip(1) {
            if r.iter().all(|&x| x == 0.0) {
                v.push(Constraint::RegimeNonZero, format!("beta_{i} is the zero vector"));
            }
        }
        v.into_result()
    }

    /// `m(x_{t−1}, …, x_{t−p}; θ)` with `lags[j−1] = x_{t−j}`.
    #[inline]
    pub fn mean(&self, lags: &[f64]) -> f64 {
        let z = lags[self.d - 1];
        let mut m = affine(&self.regimes[0], lags);
        for (i, r) in self.regimes.iter().enumerate().skip(1) {
            m += affine(r, lags) * star_transition(z, self.gamma[i - 1], self.c[i - 1]);
        }
        m
    }
}

#[inline]
fn affine(coef: &[f64], lags: &[f64]) -> f64 {
    coef[0]
        + coef[1..]
            .iter()
            .zip(lags.iter())
            .map(|(a, x)| a * x)
            .sum::<f64>()
}

/// Innovation law for the variance families, standardized to mean 0 and variance 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InnovationSpec {
    StandardNormal,
    StandardizedT { nu: f64 },
    ThreePoint { values: [f64; 3], probs: [f64; 3] },
}

impl Default for InnovationSpec {
    fn default() -> Self {
        InnovationSpec::StandardNormal
    }
}

impl InnovationSpec {
    /// `{−√2, 0, √2}` with probabilities `(1/4, 1/2, 1/4)`.
    pub fn three_point_default() -> Self {
        let a = std::f64::consts::SQRT_2;
        InnovationSpec::ThreePoint {
            values: [-a, 0.0, a],
            probs: [0.25, 0.5, 0.25],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationSpec::StandardNormal => Ok(()),
            InnovationSpec::StandardizedT { nu } => {
                if nu.is_finite() && nu > 4.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!(
                        "standardized-t needs nu > 4, got {nu}"
                    )))
                }
            }
            InnovationSpec::ThreePoint { values, probs } => {
                if probs.iter().any(|&p| !(p > 0.0)) || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(
                        "three-point law needs finite values and positive probabilities".into(),
                    ));
                }
                let total: f64 = probs.iter().sum();
                let mean: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
                let var: f64 = values.iter().zip(&probs).map(|(v, p)| v * v * p).sum::<f64>()
                    - mean * mean;
                if (total - 1.0).abs() > 1e-12 || mean.abs() > 1e-12 || (var - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "three-point law must have total mass 1, mean 0 and variance 1 \
                         (mass {total}, mean {mean}, variance {var})"
                    )));
                }
                if !values.iter().any(|&v| v > 0.0) || !values.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidInput(
                        "three-point law needs a positive and a negative support point".into(),
                    ));
                }
                if values[0] == values[1] || values[1] == values[2] || values[0] == values[2] {
                    return Err(Error::InvalidInput(
                        "three-point support points must be distinct".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn has_full_support(&self) -> bool {
        !matches!(self, InnovationSpec::ThreePoint { .. })
    }

    pub fn sampler(&self) -> Result<InnovationSampler> {
        self.validate()?;
        Ok(match *self {
            InnovationSpec::StandardNormal => InnovationSampler::Normal,
            InnovationSpec::StandardizedT { nu } => InnovationSampler::T {
                dist: StudentT::new(nu).map_err(|e| Error::InvalidInput(e.to_string()))?,
                scale: ((nu - 2.0) / nu).sqrt(),
            },
            InnovationSpec::ThreePoint { values, probs } => InnovationSampler::ThreePoint {
                values,
                cum: [probs[0], probs[0] + probs[1]],
            },
        })
    }
}

/// Prepared sampler for an [`InnovationSpec`].
#[derive(Debug, Clone)]
pub enum InnovationSampler {
    Normal,
    T { dist: StudentT<f64>, scale: f64 },
    ThreePoint { values: [f64; 3], cum: [f64; 2] },
}

impl InnovationSampler {
    pub fn draw(&self, rng: &mut StepRng) -> f64 {
        match self {
            InnovationSampler::Normal => StandardNormal.sample(rng),
            InnovationSampler::T { dist, scale } => dist.sample(rng) * scale,
            InnovationSampler::ThreePoint { values, cum } => {
                let u = rng.uniform();
                if u < cum[0] {
                    values[0]
                } else if u < cum[1] {
                    values[1]
                } else {
                    values[2]
                }
            }
        }
    }
}

/// A validated parameter point of any family.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Stgarch(StgarchParams),
    Agarch(AgarchParams),
    Intgarch(IntgarchParams),
    Star(StarParams),
}

impl ModelParams {
    pub fn family(&self) -> Family {
        match self {
            ModelParams::Stgarch(_) => Family::Stgarch,
            ModelParams::Agarch(_) => Family::Agarch,
            ModelParams::Intgarch(_) => Family::Intgarch,
            ModelParams::Star(_) => Family::Star,
        }
    }

    /// Named coordinates of θ in the conventional order; integer
    /// parameters (`d` for STGARCH is fixed and omitted, `l`, STAR `d`) come last.
    pub fn coordinates(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        match self {
            ModelParams::Stgarch(p) => {
                out.push(("gamma".to_string(), p.gamma));
                out.push(("omega".to_string(), p.omega));
                for (i, a) in p.alpha1.iter().enumerate() {
                    out.push((format!("alpha1[{}]", i + 1), *a));
                }
                for (i, a) in p.alpha2.iter().enumerate() {
                    out.push((format!("alpha2[{}]", i + 1), *a));
                }
                for (j, b) in p.beta.iter().enumerate() {
                    out.push((format!("beta[{}]", j + 1), *b));
                }
            }
            ModelParams::Agarch(p) => {
                out.push(("omega".to_string(), p.omega));
                out.push(("alpha".to_string(), p.alpha));
                out.push(("beta".to_string(), p.beta));
                out.push(("gamma".to_string(), p.gamma));
            }
            ModelParams::Intgarch(p) => {
                out.push(("omega".to_string(), p.omega));
                out.push(("alpha1".to_string(), p.alpha1));
                out.push(("alpha2".to_string(), p.alpha2));
                out.push(("beta".to_string(), p.beta));
                out.push(("l".to_string(), p.l as f64));
            }
            ModelParams::Star(p) => {
                for (i, r) in p.regimes.iter().enumerate() {
                    for (j, v) in r.iter().enumerate() {
                        out.push((format!("phi[{i}][{j}]"), *v));
                    }
                }
                for (i, g) in p.gamma.iter().enumerate() {
                    out.push((format!("gamma[{}]", i + 1), *g));
                }
                for (i, c) in p.c.iter().enumerate() {
                    out.push((format!("c[{}]", i + 1), *c));
                }
                out.push(("d".to_string(), p.d as f64));
            }
        }
        out
    }

    pub fn coordinate_values(&self) -> Vec<f64> {
        self.coordinates().into_iter().map(|(_, v)| v).collect()
    }

    pub fn to_doc(&self) -> ParamDoc {
        ParamDoc::from(self)
    }
}

impl From<StgarchParams> for ModelParams {
    fn from(p: StgarchParams) -> Self {
        ModelParams::Stgarch(p)
    }
}
impl From<AgarchParams> for ModelParams {
    fn from(p: AgarchParams) -> Self {
        ModelParams::Agarch(p)
    }
}
impl From<IntgarchParams> for ModelParams {
    fn from(p: IntgarchParams) -> Self {
        ModelParams::Intgarch(p)
    }
}
impl From<StarParams> for ModelParams {
    fn from(p: StarParams) -> Self {
        ModelParams::Star(p)
    }
}

/// Scalar `gamma` for the GARCH families, one value per regime for STAR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaField {
    Scalar(f64),
    List(Vec<f64>),
}

/// Flat key-value parameter document.
///
/// AGARCH stores `alpha` as `alpha1[0]` and `beta` as `beta[0]`; INTGARCH
/// stores its three rates as one-element `alpha1`, `alpha2` and `beta`.
/// `M`, `p` and `q` are redundant with the array lengths and are checked
/// for consistency when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDoc {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regimes: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
}

impl ParamDoc {
    fn empty(family: Family) -> Self {
        Self {
            family,
            gamma: None,
            omega: None,
            alpha1: None,
            alpha2: None,
            beta: None,
            d: None,
            l: None,
            regimes: None,
            c: None,
            m: None,
            p: None,
            q: None,
        }
    }
}

impl From<&ModelParams> for ParamDoc {
    fn from(params: &ModelParams) -> Self {
        let mut doc = ParamDoc::empty(params.family());
        match params {
            ModelParams::Stgarch(p) => {
                doc.gamma = Some(GammaField::Scalar(p.gamma));
                doc.omega = Some(p.omega);
                doc.alpha1 = Some(p.alpha1.clone());
                doc.alpha2 = Some(p.alpha2.clone());
                doc.beta = Some(p.beta.clone());
                doc.d = Some(p.d);
                doc.p = Some(p.p());
                doc.q = Some(p.q());
            }
            ModelParams::Agarch(p) => {
                doc.gamma = Some(GammaField::Scalar(p.gamma));
                doc.omega = Some(p.omega);
                doc.alpha1 = Some(vec![p.alpha]);
                doc.beta = Some(vec![p.beta]);
            }
            ModelParams::Intgarch(p) => {
                doc.omega = Some(p.omega);
                doc.alpha1 = Some(vec![p.alpha1]);
                doc.alpha2 = Some(vec![p.alpha2]);
                doc.beta = Some(vec![p.beta]);
                doc.l = Some(p.l);
            }
            ModelParams::Star(p) => {
                doc.gamma = Some(GammaField::List(p.gamma.clone()));
                doc.regimes = Some(p.regimes.clone());
                doc.c = Some(p.c.clone());
                doc.d = Some(p.d);
                doc.m = Some(p.m());
                doc.p = Some(p.p());
            }
        }
        doc
    }
}

fn missing(v: &mut Violations, field: &str) {
    v.push(Constraint::MissingField, format!("`{field}` is required"));
}

fn single(v: &mut Violations, field: &str, xs: &Option<Vec<f64>>) -> f64 {
    match xs.as_deref() {
        Some([x]) => *x,
        Some(other) => {
            v.push(
                Constraint::OrderShape,
                format!("`{field}` must hold exactly one value, got {}", other.len()),
            );
            f64::NAN
        }
        None => {
            missing(v, field);
            f64::NAN
        }
    }
}

fn scalar_gamma(v: &mut Violations, g: &Option<GammaField>) -> f64 {
    match g {
        Some(GammaField::Scalar(x)) => *x,
        Some(GammaField::List(xs)) if xs.len() == 1 => xs[0],
        Some(GammaField::List(_)) => {
            v.push(Constraint::OrderShape, "`gamma` must be a scalar for this family");
            f64::NAN
        }
        None => {
            missing(v, "gamma");
            f64::NAN
        }
    }
}

/// Checks every invariant of the document's family and returns the typed record.
pub fn validate(doc: &ParamDoc) -> std::result::Result<ModelParams, Violations> {
    let mut v = Violations::default();
    let forbid = |v: &mut Violations, present: bool, field: &str| {
        if present {
            v.push(
                Constraint::OrderShape,
                format!("`{field}` does not apply to family {}", doc.family),
            );
        }
    };
    match doc.family {
        Family::Stgarch => {
            forbid(&mut v, doc.l.is_some(), "l");
            forbid(&mut v, doc.regimes.is_some(), "regimes");
            forbid(&mut v, doc.c.is_some(), "c");
            forbid(&mut v, doc.m.is_some(), "M");
            let gamma = scalar_gamma(&mut v, &doc.gamma);
            let omega = doc.omega.unwrap_or_else(|| {
                missing(&mut v, "omega");
                f64::NAN
            });
            let alpha1 = doc.alpha1.clone().unwrap_or_else(|| {
                missing(&mut v, "alpha1");
                Vec::new()
            });
            let alpha2 = doc.alpha2.clone().unwrap_or_else(|| vec![0.0; alpha1.len()]);
            let beta = doc.beta.clone().unwrap_or_default();
            let d = doc.d.unwrap_or(1);
            if let Some(q) = doc.q {
                if q != alpha1.len() {
                    v.push(Constraint::OrderShape, format!("q = {q} but alpha1 has {}", alpha1.len()));
                }
            }
            if let Some(p) = doc.p {
                if p != beta.len() {
                    v.push(Constraint::OrderShape, format!("p = {p} but beta has {}", beta.len()));
                }
            }
            if !v.0.is_empty() {
                return Err(v);
            }
            StgarchParams::new(gamma, omega, alpha1, alpha2, beta, d).map(ModelParams::Stgarch)
        }
        Family::Agarch => {
            forbid(&mut v, doc.alpha2.is_some(), "alpha2");
            forbid(&mut v, doc.l.is_some(), "l");
            forbid(&mut v, doc.regimes.is_some(), "regimes");
            forbid(&mut v, doc.c.is_some(), "c");
            forbid(&mut v, doc.d.is_some(), "d");
            forbid(&mut v, doc.m.is_some(), "M");
            let gamma = scalar_gamma(&mut v, &doc.gamma);
            let omega = doc.omega.unwrap_or_else(|| {
                missing(&mut v, "omega");
                f64::NAN
            });
            let alpha = single(&mut v, "alpha1", &doc.alpha1);
            let beta = single(&mut v, "beta", &doc.beta);
            if !v.0.is_empty() {
                return Err(v);
            }
            AgarchParams::new(omega, alpha, beta, gamma).map(ModelParams::Agarch)
        }
        Family::Intgarch => {
            forbid(&mut v, doc.gamma.is_some(), "gamma");
            forbid(&mut v, doc.regimes.is_some(), "regimes");
            forbid(&mut v, doc.c.is_some(), "c");
            forbid(&mut v, doc.d.is_some(), "d");
            forbid(&mut v, doc.m.is_some(), "M");
            let omega = doc.omega.unwrap_or_else(|| {
                missing(&mut v, "omega");
                f64::NAN
            });
            let a1 = single(&mut v, "alpha1", &doc.alpha1);
            let a2 = single(&mut v, "alpha2", &doc.alpha2);
            let b = single(&mut v, "beta", &doc.beta);
            let l = doc.l.unwrap_or_else(|| {
                missing(&mut v, "l");
                0
            });
            if !v.0.is_empty() {
                return Err(v);
            }
            IntgarchParams::new(omega, a1, a2, b, l).map(ModelParams::Intgarch)
        }
        Family::Star => {
            forbid(&mut v, doc.omega.is_some(), "omega");
            forbid(&mut v, doc.alpha1.is_some(), "alpha1");
            forbid(&mut v, doc.alpha2.is_some(), "alpha2");
            forbid(&mut v, doc.beta.is_some(), "beta");
            forbid(&mut v, doc.l.is_some(), "l");
            forbid(&mut v, doc.q.is_some(), "q");
            let regimes = doc.regimes.clone().unwrap_or_else(|| {
                missing(&mut v, "regimes");
                Vec::new()
            });
            let gamma = match &doc.gamma {
                Some(GammaField::List(g)) => g.clone(),
                Some(GammaField::Scalar(g)) => vec![*g],
                None => {
                    missing(&mut v, "gamma");
                    Vec::new()
                }
            };
            let c = doc.c.clone().unwrap_or_else(|| {
                missing(&mut v, "c");
                Vec::new()
            });
            let d = doc.d.unwrap_or(1);
            if let Some(m) = doc.m {
                if m != gamma.len() {
                    v.push(Constraint::OrderShape, format!("M = {m} but gamma has {}", gamma.len()));
                }
            }
            if let Some(p) = doc.p {
                if regimes.iter().any(|r| r.len() != p + 1) {
                    v.push(Constraint::OrderShape, format!("p = {p} but regime vectors are not of length p+1"));
                }
            }
            if !v.0.is_empty() {
                return Err(v);
            }
            StarParams::new(regimes, gamma, c, d).map(ModelParams::Star)
        }
    }
}

impl TryFrom<ParamDoc> for ModelParams {
    type Error = Violations;
    fn try_from(doc: ParamDoc) -> std::result::Result<Self, Violations> {
        validate(&doc)
    }
}

impl Serialize for ModelParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ParamDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ParamDoc::deserialize(d)?;
        validate(&doc).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stgarch_transition_values() {
        assert_eq!(stgarch_transition(0.0, 2.5), 0.0);
        for x in [-3.0, -0.1, 0.0, 4.2, 1e300] {
            assert_eq!(stgarch_transition(x, 0.0), 0.0);
        }
        // 1/(1+e) - 1/2 evaluated to 20 digits: -0.23105857863000487925...
        assert!((stgarch_transition(1.0, 1.0) - (-0.231_058_578_630_004_88)).abs() < 1e-15);
        assert_eq!(stgarch_transition(1e6, 3.0), -0.5);
        assert_eq!(stgarch_transition(-1e6, 3.0), 0.5);
        assert_eq!(stgarch_transition(1e308, 1e10), -0.5);
    }

    #[test]
    fn stgarch_transition_is_odd_and_bounded() {
        for i in -200..=200 {
            let x = i as f64 * 0.173;
            for g in [0.0, 0.01, 0.7, 2.0, 13.0, 1e4] {
                let f = stgarch_transition(x, g);
                assert!((-0.5..=0.5).contains(&f));
                assert!((f + stgarch_transition(-x, g)).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn stgarch_transition_gjr_limit() {
        for i in -500..=500 {
            let x = i as f64 * 0.011;
            if x.abs() < 1e-3 {
                continue;
            }
            assert_eq!(stgarch_transition(x, 1e6), -x.signum() / 2.0);
        }
    }

    #[test]
    fn star_transition_values() {
        assert_eq!(star_transition(0.7, 3.0, 0.7), 0.5);
        // 1/(1+e^-2) = 0.88079707797788244406...
        assert!((star_transition(1.0, 2.0, 0.0) - 0.880_797_077_977_882_4).abs() < 1e-15);
        assert_eq!(star_transition(1e6, 1.0, 0.0), 1.0);
        assert_eq!(star_transition(-1e6, 1.0, 0.0), 0.0);
        assert!(star_transition(-1e4, 1e4, 0.0).is_finite());
    }

    #[test]
    fn star_transition_symmetry_and_monotonicity() {
        for g in [0.2, 1.0, 4.0, 50.0] {
            for c in [-1.5, 0.0, 2.25] {
                let mut prev = -1.0;
                for i in -300..=300 {
                    let x = c + i as f64 * 0.01;
                    let v = star_transition(x, g, c);
                    assert!((v + star_transition(2.0 * c - x, g, c) - 1.0).abs() <= 1e-14);
                    assert!(v >= prev);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn cone_makes_news_kernel_nonnegative() {
        let p = StgarchParams::new(3.0, 0.1, vec![0.1, 0.05], vec![0.2, -0.1], vec![0.3], 1).unwrap();
        for i in -400..=400 {
            let x = i as f64 * 0.05;
            for (a1, a2) in p.alpha1().iter().zip(p.alpha2()) {
                assert!(a1 + a2 * stgarch_transition(x, p.gamma()) >= 0.0);
            }
        }
    }

    #[test]
    fn validate_reports_each_violation() {
        let err = StgarchParams::new(1.0, 0.1, vec![0.1], vec![0.3], vec![0.5], 1).unwrap_err();
        assert!(err.contains(Constraint::Alpha2Cone));
        assert_eq!(Constraint::Alpha2Cone.describe(), "|alpha2| ≤ 2·alpha1");

        let err = StgarchParams::new(1.0, 0.1, vec![0.1], vec![0.0], vec![0.6, 0.5], 1).unwrap_err();
        assert!(err.contains(Constraint::BetaSum));
        assert_eq!(Constraint::BetaSum.describe(), "Σβ < 1");

        let err = StarParams::new(
            vec![vec![0.0, 0.5], vec![0.1, 0.2], vec![0.3, 0.1]],
            vec![1.0, 1.0],
            vec![1.0, 0.5],
            1,
        )
        .unwrap_err();
        assert!(err.contains(Constraint::ThresholdsIncreasing));
        assert_eq!(Constraint::ThresholdsIncreasing.describe(), "thresholds strictly increasing");

        let err = StgarchParams::new(-1.0, 0.0, vec![-0.1], vec![0.0], vec![], 2).unwrap_err();
        assert!(err.contains(Constraint::GammaNonNegative));
        assert!(err.contains(Constraint::OmegaPositive));
        assert!(err.contains(Constraint::Alpha1NonNegative));
        assert!(err.contains(Constraint::DelayRange));
    }

    #[test]
    fn boundary_values_are_violations() {
        assert!(StgarchParams::new(0.0, 0.0, vec![0.1], vec![0.0], vec![], 1).is_err());
        assert!(StgarchParams::new(0.0, 0.1, vec![0.1], vec![0.0], vec![0.5, 0.5], 1).is_err());
        assert!(StgarchParams::new(0.0, 0.1, vec![0.1], vec![0.2], vec![], 1).is_ok());
        assert!(AgarchParams::new(0.1, 0.1, 1.0, 0.0).is_err());
        assert!(AgarchParams::new(0.1, 0.1, 0.5, 1.0).is_ok());
        assert!(IntgarchParams::new(1.0, 0.3, 0.2, 0.5, 0).is_err());
        assert!(IntgarchParams::new(1.0, 1.0, 0.2, 0.5, 1).is_err());
    }

    #[test]
    fn star_identified_flag() {
        let p = StarParams::new(vec![vec![0.2, 0.5], vec![0.0, 0.0]], vec![2.0], vec![0.0], 1).unwrap();
        assert!(p.check_identified().unwrap_err().contains(Constraint::RegimeNonZero));
    }

    #[test]
    fn innovation_laws_are_standardized() {
        InnovationSpec::three_point_default().validate().unwrap();
        assert!(InnovationSpec::StandardizedT { nu: 4.0 }.validate().is_err());
        assert!(InnovationSpec::ThreePoint {
            values: [0.0, 1.0, 2.0],
            probs: [0.25, 0.5, 0.25]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn doc_validation_from_json() {
        let doc: ParamDoc = serde_json::from_str(
            r#"{"family":"stgarch","gamma":2,"omega":0.1,"alpha1":[0.15],"alpha2":[0.45],"beta":[0.5],"d":1}"#,
        )
        .unwrap();
        let err = validate(&doc).unwrap_err();
        assert!(err.contains(Constraint::Alpha2Cone));
        assert!(serde_json::from_str::<ParamDoc>(r#"{"family":"agarch","bogus":1}"#).is_err());
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        let st = (
            0.0..50.0f64,
            1e-6..10.0f64,
            proptest::collection::vec((0.0..1.0f64, -1.0..1.0f64), 1..4),
            proptest::collection::vec(0.0..0.3f64, 0..3),
        )
            .prop_map(|(g, w, a, b)| {
                let a1: Vec<f64> = a.iter().map(|x| x.0).collect();
                let a2: Vec<f64> = a.iter().map(|x| 2.0 * x.0 * x.1).collect();
                ModelParams::Stgarch(StgarchParams::new(g, w, a1, a2, b, 1).unwrap())
            });
        let ag = (1e-6..10.0f64, 0.0..1.0f64, 0.0..0.999f64, -1.0..=1.0f64)
            .prop_map(|(w, a, b, g)| ModelParams::Agarch(AgarchParams::new(w, a, b, g).unwrap()));
        let ig = (1e-6..10.0f64, 0.0..0.99f64, 0.0..0.99f64, 0.0..0.99f64, 1u64..50)
            .prop_map(|(w, a, b, c, l)| {
                ModelParams::Intgarch(IntgarchParams::new(w, a, b, c, l).unwrap())
            });
        let sr = (
            proptest::collection::vec(-2.0..2.0f64, 6),
            0.01..100.0f64,
            -3.0..3.0f64,
            1usize..3,
        )
            .prop_map(|(phi, g, c, d)| {
                let regimes = vec![phi[0..3].to_vec(), phi[3..6].to_vec()];
                ModelParams::Star(StarParams::new(regimes, vec![g], vec![c], d).unwrap())
            });
        prop_oneof![st, ag, ig, sr]
    }

    proptest! {
        #[test]
        fn param_doc_round_trip_is_lossless(p in arb_params()) {
            let text = serde_json::to_string(&p).unwrap();
            let back: ModelParams = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert_eq!(back.coordinate_values(), p.coordinate_values());
        }
    }
}
