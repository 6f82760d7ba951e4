//! Warm-started regularization paths for GLM families: the outer
//! proximal-Newton (IRLS) loop around the penalized WLS engine, λ grids and
//! prediction from stored paths.

use std::sync::Arc;

use crate::cox::{fit_cox_path, SurvivalResponse};
use crate::data::{column_stats, predict_sparse, ColumnStats, FeatureMatrix, Weights};
use crate::error::{Error, Result};
use crate::family::{self, FamilyDescriptor, FamilyKind, GlmFamily, Link};
use crate::pwls::{penalty_value, PenaltySpec, SolverOptions, Standardization, WlsEngine, WlsProblem};

/// How the λ grid is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSpec {
    /// `nlambda` values from λ_max down log-linearly; `min_ratio` defaults to
    /// `1e-2` when `p > n` and `1e-4` otherwise.
    Auto {
        nlambda: usize,
        min_ratio: Option<f64>,
    },
    /// A strictly decreasing, user-supplied sequence. Never truncated.
    Explicit(Vec<f64>),
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Auto {
            nlambda: 100,
            min_ratio: None,
        }
    }
}

/// Options for the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub lambda: LambdaSpec,
    pub solver: SolverOptions,
    /// Cap on IRLS iterations per λ.
    pub max_outer: usize,
    /// The IRLS loop ends once both the relative deviance change
    /// `|Δdev| / (0.1 + |dev|)` and the largest absolute change in the
    /// linear predictor and standardized coefficients fall below this.
    pub outer_tol: f64,
    pub max_halvings: usize,
    /// Stop generated paths once the fit saturates or stalls.
    pub early_stop: bool,
    /// Features held at zero for the whole path.
    pub exclude: Vec<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lambda: LambdaSpec::default(),
            solver: SolverOptions::default(),
            max_outer: 25,
            outer_tol: 1e-8,
            max_halvings: 10,
            early_stop: true,
            exclude: Vec::new(),
        }
    }
}

impl FitOptions {
    pub fn with_lambda(mut self, lambda: LambdaSpec) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }
}

/// Scale on which predictions are returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictType {
    Link,
    Response,
    Class,
}

/// The model a path belongs to.
#[derive(Debug, Clone)]
pub enum ModelFamily {
    Glm(Arc<dyn GlmFamily>),
    Cox,
}

impl ModelFamily {
    pub fn name(&self) -> String {
        match self {
            ModelFamily::Glm(f) => f.name(),
            ModelFamily::Cox => "cox".into(),
        }
    }

    pub fn is_cox(&self) -> bool {
        matches!(self, ModelFamily::Cox)
    }

    pub fn glm(&self) -> Option<&Arc<dyn GlmFamily>> {
        match self {
            ModelFamily::Glm(f) => Some(f),
            ModelFamily::Cox => None,
        }
    }
}

/// A coefficient vector stored by its nonzero entries, indices ascending.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseCoefficients {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseCoefficients {
    pub fn from_dense(beta: &[f64]) -> Self {
        let mut out = Self::default();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                out.indices.push(j);
                out.values.push(b);
            }
        }
        out
    }

    pub fn to_dense(&self, p: usize) -> Vec<f64> {
        let mut beta = vec![0.0; p];
        for (&j, &b) in self.indices.iter().zip(&self.values) {
            beta[j] = b;
        }
        beta
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// `wa·a + wb·b` over the union of supports.
    pub fn combine(a: &Self, wa: f64, b: &Self, wb: f64) -> Self {
        let mut out = Self::default();
        let (mut i, mut k) = (0, 0);
        while i < a.indices.len() || k < b.indices.len() {
            let ja = a.indices.get(i).copied().unwrap_or(usize::MAX);
            let jb = b.indices.get(k).copied().unwrap_or(usize::MAX);
            let (j, v) = if ja == jb {
                i += 1;
                k += 1;
                (ja, wa * a.values[i - 1] + wb * b.values[k - 1])
            } else if ja < jb {
                i += 1;
                (ja, wa * a.values[i - 1])
            } else {
                k += 1;
                (jb, wb * b.values[k - 1])
            };
            if v != 0.0 {
                out.indices.push(j);
                out.values.push(v);
            }
        }
        out
    }
}

/// Per-λ solver diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathDiagnostics {
    /// Coordinate sweeps per λ.
    pub passes: Vec<usize>,
    pub outer_iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Penalized objective at each accepted outer iterate, per λ; the first
    /// entry is the warm start.
    pub objective_trace: Vec<Vec<f64>>,
    /// The path stopped before its last requested λ because a fit failed.
    pub truncated: bool,
}

/// A fitted regularization path with coefficients on the original scale.
#[derive(Debug, Clone)]
pub struct PathFit {
    pub family: ModelFamily,
    pub lambda: Vec<f64>,
    /// Per-λ intercepts; all zero for Cox models.
    pub intercepts: Vec<f64>,
    pub coefficients: Vec<SparseCoefficients>,
    pub dev_ratio: Vec<f64>,
    pub null_deviance: f64,
    pub penalty: PenaltySpec,
    pub stats: ColumnStats,
    pub n_obs: usize,
    pub n_features: usize,
    pub lambda_max: Option<f64>,
    pub diagnostics: PathDiagnostics,
}

/// Coefficients at an arbitrary λ.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolated {
    pub intercept: f64,
    pub beta: SparseCoefficients,
    /// `s` fell outside the fitted range and was moved to its nearest end.
    pub clamped: bool,
}

/// Predictions, one column per requested λ.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub values: Vec<Vec<f64>>,
    pub clamped: Vec<bool>,
}

impl PathFit {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn nonzero_counts(&self) -> Vec<usize> {
        self.coefficients.iter().map(|c| c.nnz()).collect()
    }

    /// Linear interpolation in λ between neighbouring grid points; grid
    /// values return the stored coefficients unchanged.
    pub fn coefficients_at(&self, s: f64) -> Interpolated {
        let k = interpolation_point(&self.lambda, s);
        match k {
            Bracket::Exact(k, clamped) => Interpolated {
                intercept: self.intercepts[k],
                beta: self.coefficients[k].clone(),
                clamped,
            },
            Bracket::Between(k, frac) => Interpolated {
                intercept: (1.0 - frac) * self.intercepts[k] + frac * self.intercepts[k + 1],
                beta: SparseCoefficients::combine(
                    &self.coefficients[k],
                    1.0 - frac,
                    &self.coefficients[k + 1],
                    frac,
                ),
                clamped: false,
            },
        }
    }

    pub fn predict(&self, x: &FeatureMatrix, s: &[f64], kind: PredictType) -> Result<Predictions> {
        if x.n_cols() != self.n_features {
            return Err(Error::Dimension {
                what: "prediction matrix columns",
                expected: self.n_features,
                got: x.n_cols(),
            });
        }
        check_predict_type(&self.family, kind)?;
        let mut values = Vec::with_capacity(s.len());
        let mut clamped = Vec::with_capacity(s.len());
        for &si in s {
            let c = self.coefficients_at(si);
            let eta = predict_sparse(x, &c.beta.indices, &c.beta.values, c.intercept);
            values.push(transform_eta(&self.family, eta, kind));
            clamped.push(c.clamped);
        }
        Ok(Predictions { values, clamped })
    }
}

pub(crate) fn check_predict_type(family: &ModelFamily, kind: PredictType) -> Result<()> {
    if kind == PredictType::Class {
        let binary = family.glm().map(|f| f.is_binary()).unwrap_or(false);
        if !binary {
            return Err(Error::InvalidArgument(format!(
                "class predictions require a binomial family, not {}",
                family.name()
            )));
        }
    }
    Ok(())
}

/// Maps link-scale values to the requested scale.
pub fn transform_eta(family: &ModelFamily, mut eta: Vec<f64>, kind: PredictType) -> Vec<f64> {
    match (family, kind) {
        (_, PredictType::Link) => eta,
        (ModelFamily::Cox, _) => {
            eta.iter_mut().for_each(|e| *e = e.exp());
            eta
        }
        (ModelFamily::Glm(f), PredictType::Response) => {
            eta.iter_mut().for_each(|e| *e = f.link_inverse(*e));
            eta
        }
        (ModelFamily::Glm(f), PredictType::Class) => {
            eta.iter_mut()
                .for_each(|e| *e = if f.link_inverse(*e) >= 0.5 { 1.0 } else { 0.0 });
            eta
        }
    }
}

pub(crate) enum Bracket {
    Exact(usize, bool),
    Between(usize, f64),
}

pub(crate) fn interpolation_point(lambda: &[f64], s: f64) -> Bracket {
    let m = lambda.len();
    if s >= lambda[0] {
        return Bracket::Exact(0, s > lambda[0]);
    }
    if s <= lambda[m - 1] {
        return Bracket::Exact(m - 1, s < lambda[m - 1]);
    }
    // lambda[k] > s > lambda[k + 1] or an exact hit
    let k = lambda.partition_point(|&l| l > s);
    if lambda[k] == s {
        return Bracket::Exact(k, false);
    }
    let k = k - 1;
    let frac = (lambda[k] - s) / (lambda[k] - lambda[k + 1]);
    Bracket::Between(k, frac)
}

/// `nlambda` values from `lmax` to `lmax·min_ratio`, equispaced in log λ.
pub fn lambda_sequence(lmax: f64, nlambda: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if !(lmax > 0.0 && lmax.is_finite()) {
        return Err(Error::InvalidLambda(format!("lambda_max must be positive, got {lmax}")));
    }
    if nlambda == 0 {
        return Err(Error::InvalidLambda("nlambda must be at least 1".into()));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::InvalidLambda(format!(
            "lambda min ratio must lie in (0, 1), got {min_ratio}"
        )));
    }
    if nlambda == 1 {
        return Ok(vec![lmax]);
    }
    let last = (nlambda - 1) as f64;
    Ok((0..nlambda)
        .map(|k| lmax * min_ratio.powf(k as f64 / last))
        .collect())
}

/// Default smallest-to-largest λ ratio.
pub fn default_min_ratio(n: usize, p: usize) -> f64 {
    if p > n {
        1e-2
    } else {
        1e-4
    }
}

/// `deviance/(2n) + λ Σ_j γ_j ((1−α)/2 β_j² + α|β_j|)` with `γ` the
/// rescaled penalty factors.
pub fn objective(
    family: &dyn GlmFamily,
    y: &[f64],
    eta: &[f64],
    beta: &[f64],
    lambda: f64,
    penalty: &PenaltySpec,
    obs_w: &Weights,
) -> Result<f64> {
    let mu = family::link_inverse(family, eta);
    let dev = family::deviance(family, y, &mu, obs_w.as_slice())?;
    let n = y.len() as f64;
    Ok(dev / (2.0 * n) + lambda * penalty_value(beta, &penalty.effective_factors(), penalty.alpha))
}

/// The smooth part of a penalized objective, expressed through a deviance.
pub(crate) trait Loss: Sync {
    /// Working response and weights of the local quadratic approximation.
    fn working(&self, eta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
    /// `None` when `eta` is outside the model's domain.
    fn deviance(&self, eta: &[f64]) -> Option<f64>;
    /// `∂ deviance / ∂η_i`, or `None` outside the domain.
    fn deviance_gradient(&self, eta: &[f64]) -> Option<Vec<f64>>;
    /// Factor turning deviance into objective units (up to a constant).
    fn scale(&self) -> f64;
    /// Intercept of the intercept-only model.
    fn null_intercept(&self) -> f64;
    /// True when the working response and weights do not depend on `η`,
    /// so one weighted least-squares solve is the exact update.
    fn quadratic(&self) -> bool {
        false
    }
}

pub(crate) struct GlmLoss<'a> {
    pub family: &'a dyn GlmFamily,
    pub y: &'a [f64],
    pub w: &'a [f64],
}

impl Loss for GlmLoss<'_> {
    fn working(&self, eta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let wk = family::irls_working(self.family, self.y, eta, self.w)?;
        Ok((wk.z, wk.w))
    }

    fn deviance(&self, eta: &[f64]) -> Option<f64> {
        let mu = family::link_inverse(self.family, eta);
        if mu.iter().any(|m| !m.is_finite()) {
            return None;
        }
        family::deviance(self.family, self.y, &mu, self.w).ok()
    }

    fn deviance_gradient(&self, eta: &[f64]) -> Option<Vec<f64>> {
        let f = self.family;
        let g: Vec<f64> = eta
            .iter()
            .zip(self.y)
            .zip(self.w)
            .map(|((&e, &y), &w)| {
                let mu = f.link_inverse(e);
                if w == 0.0 || f.clamp_mu(mu) != mu {
                    // the deviance is flat where the mean is clamped
                    0.0
                } else {
                    -2.0 * w * (y - mu) * f.mu_eta(e) / f.variance(mu)
                }
            })
            .collect();
        g.iter().all(|v| v.is_finite()).then_some(g)
    }

    fn scale(&self) -> f64 {
        1.0 / (2.0 * self.y.len() as f64)
    }

    fn null_intercept(&self) -> f64 {
        let total: f64 = self.w.iter().sum();
        let mean = self.y.iter().zip(self.w).map(|(y, w)| y * w).sum::<f64>() / total;
        self.family.link(self.family.clamp_mu(mean))
    }

    fn quadratic(&self) -> bool {
        // unit variance with the identity link: z = y and w = obs_w
        matches!(
            self.family.descriptor(),
            Some(FamilyDescriptor {
                kind: FamilyKind::Gaussian | FamilyKind::Tweedie { power: 0.0 },
                link: Link::Identity,
            })
        )
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Iterate {
    pub b0: f64,
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    pub dev: f64,
}

pub(crate) struct LambdaOutcome {
    pub passes: usize,
    pub outer: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// `P(new) − P(old)` from coefficient differences, which are exact for
/// nearby values.
fn penalty_increment(new: &[f64], old: &[f64], factors: &[f64], alpha: f64) -> f64 {
    new.iter()
        .zip(old)
        .zip(factors)
        .map(|((&b, &a), &g)| {
            let abs = if a >= 0.0 && b >= 0.0 {
                b - a
            } else if a <= 0.0 && b <= 0.0 {
                a - b
            } else {
                b.abs() - a.abs()
            };
            g * (0.5 * (1.0 - alpha) * (b - a) * (b + a) + alpha * abs)
        })
        .sum()
}

/// Largest linear-predictor move for which the deviance change is taken
/// from Simpson's rule along the step instead of a difference of totals.
const SMALL_STEP: f64 = 1e-3;

/// Deviance change from `cur` to the candidate. Small steps integrate the
/// deviance gradient along the segment, which resolves decreases far below
/// the rounding error of the deviance itself.
fn deviance_increment(loss: &dyn Loss, cur: &Iterate, cur_grad: Option<&[f64]>, delta: &[f64], dev: f64) -> f64 {
    let direct = dev - cur.dev;
    let step = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let Some(g0) = cur_grad else { return direct };
    if !(step <= SMALL_STEP) {
        return direct;
    }
    let slope = |g: &[f64]| g.iter().zip(delta).map(|(a, b)| a * b).sum::<f64>();
    let along = |t: f64| -> Option<f64> {
        let eta: Vec<f64> = cur.eta.iter().zip(delta).map(|(e, d)| e + t * d).collect();
        loss.deviance_gradient(&eta).map(|g| slope(&g))
    };
    match (along(0.5), along(1.0)) {
        (Some(mid), Some(end)) => (slope(g0) + 4.0 * mid + end) / 6.0,
        _ => direct,
    }
}

/// IRLS at one λ with step halving, updating `cur` in place.
pub(crate) fn solve_lambda(
    engine: &WlsEngine<'_>,
    loss: &dyn Loss,
    cur: &mut Iterate,
    lambda: f64,
    lambda_prev: f64,
    opts: &FitOptions,
    solver: &SolverOptions,
) -> Result<LambdaOutcome> {
    let scale = loss.scale();
    let alpha = engine.terms.alpha;
    let factors = engine.factors();
    // the trace and the deviance accumulate accurate increments from a
    // direct evaluation
    let mut obj = cur.dev * scale + lambda * penalty_value(&cur.beta, factors, alpha);
    let mut trace = vec![obj];
    let mut passes = 0;
    let mut converged = false;
    let mut outer = 0;
    while outer < opts.max_outer {
        outer += 1;
        let (z, w) = loss.working(&cur.eta)?;
        let prob = WlsProblem {
            z: &z,
            w: &w,
            lambda,
            lambda_prev,
        };
        let sol = engine.solve(&prob, cur.b0, &cur.beta, solver);
        passes += sol.passes;
        let cur_grad = loss.deviance_gradient(&cur.eta);
        let mut b0 = sol.intercept;
        let mut beta = sol.beta;
        let mut first_gap = None;
        let mut accepted = None;
        for h in 0..=opts.max_halvings {
            let eta = engine.linear_predictor(b0, &beta);
            if let Some(dev) = loss.deviance(&eta) {
                let step: Vec<f64> = beta.iter().zip(&cur.beta).map(|(b, a)| b - a).collect();
                let delta = engine.linear_predictor(b0 - cur.b0, &step);
                let ddev = deviance_increment(loss, cur, cur_grad.as_deref(), &delta, dev);
                let gap = ddev * scale + lambda * penalty_increment(&beta, &cur.beta, factors, alpha);
                first_gap.get_or_insert(gap);
                if gap <= 0.0 {
                    let moved = delta
                        .iter()
                        .chain(&step)
                        .map(|d| d.abs())
                        .fold((b0 - cur.b0).abs(), f64::max);
                    let dev = cur.dev + ddev;
                    accepted = Some((Iterate { b0, beta, eta, dev }, gap, ddev, moved));
                    break;
                }
            }
            if h == opts.max_halvings {
                break;
            }
            b0 = 0.5 * (b0 + cur.b0);
            for (b, &old) in beta.iter_mut().zip(&cur.beta) {
                *b = 0.5 * (*b + old);
            }
        }
        match accepted {
            Some((next, gap, ddev, moved)) => {
                let change = ddev.abs() / (0.1 + next.dev.abs());
                *cur = next;
                obj += gap;
                trace.push(obj);
                let settled = loss.quadratic() || (change < opts.outer_tol && moved < opts.outer_tol);
                if settled && sol.converged {
                    converged = true;
                    break;
                }
            }
            None => {
                // the full step was no improvement: keep the old iterate,
                // which is optimal when the gap is at rounding level
                converged = sol.converged
                    && first_gap.map(|g| g <= 1e-10 * obj.abs().max(1e-300)).unwrap_or(false);
                break;
            }
        }
    }
    Ok(LambdaOutcome {
        passes,
        outer,
        converged,
        trace,
    })
}

/// The fit a path starts from: intercept only (or η = 0), plus an
/// unpenalized fit of features with zero penalty factor.
pub(crate) fn null_iterate(
    engine: &WlsEngine<'_>,
    loss: &dyn Loss,
    opts: &FitOptions,
) -> Result<(Iterate, bool)> {
    let p = engine.n_features();
    let intercept = engine.terms.intercept;
    let b0 = if intercept { loss.null_intercept() } else { 0.0 };
    let eta = vec![b0; engine.x.n_rows()];
    let dev = loss
        .deviance(&eta)
        .ok_or_else(|| Error::InvalidFamily("null model lies outside the family's domain".into()))?;
    let mut it = Iterate {
        b0,
        beta: vec![0.0; p],
        eta,
        dev,
    };
    let free: Vec<bool> = (0..p)
        .map(|j| engine.is_eligible(j) && engine.factors()[j] == 0.0)
        .collect();
    if !free.iter().any(|&f| f) {
        return Ok((it, true));
    }
    let restricted = engine.restricted(&free);
    let out = solve_lambda(&restricted, loss, &mut it, 0.0, 0.0, opts, &opts.solver)?;
    Ok((it, out.converged))
}

/// `max_j |g_j| / (α' γ_j)` over penalized features at the null fit, with
/// `α' = max(α, 0.001)`.
pub(crate) fn lambda_max_at(engine: &WlsEngine<'_>, loss: &dyn Loss, null: &Iterate) -> Result<f64> {
    let (z, w) = loss.working(&null.eta)?;
    let prob = WlsProblem {
        z: &z,
        w: &w,
        lambda: 0.0,
        lambda_prev: 0.0,
    };
    let g = engine.gradient(&prob, null.b0, &null.beta);
    let alpha = engine.terms.alpha.max(1e-3);
    let mut best: Option<f64> = None;
    for (j, gj) in g.iter().enumerate() {
        let f = engine.factors()[j];
        if engine.is_eligible(j) && f > 0.0 {
            let v = gj.abs() / (alpha * f);
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    match best {
        None => Err(Error::UndefinedLambdaMax(
            "no penalized feature can enter the model".into(),
        )),
        Some(v) if !(v > 0.0) || !v.is_finite() => Err(Error::UndefinedLambdaMax(
            "the gradient vanishes at the null model".into(),
        )),
        Some(v) => Ok(v),
    }
}

/// Everything a path produces before it is tagged with its family.
pub(crate) struct PathCore {
    pub lambda: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub coefficients: Vec<SparseCoefficients>,
    pub dev_ratio: Vec<f64>,
    pub null_deviance: f64,
    pub lambda_max: Option<f64>,
    pub diagnostics: PathDiagnostics,
}

fn validate_explicit(lambda: &[f64]) -> Result<()> {
    if lambda.is_empty() {
        return Err(Error::InvalidLambda("empty lambda sequence".into()));
    }
    if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidLambda("lambda values must be finite and nonnegative".into()));
    }
    if lambda.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidLambda("lambda values must be strictly decreasing".into()));
    }
    Ok(())
}

/// Builds the engine for a path: weights normalized to sum to `n`,
/// excluded features removed.
pub(crate) fn path_engine<'x>(
    x: &'x FeatureMatrix,
    obs_w: &Weights,
    penalty: &PenaltySpec,
    center: bool,
    intercept: bool,
    exclude: &[usize],
) -> Result<(WlsEngine<'x>, ColumnStats)> {
    let p = x.n_cols();
    penalty.validate(p)?;
    if let Some(&j) = exclude.iter().find(|&&j| j >= p) {
        return Err(Error::OutOfRange {
            what: "excluded feature",
            index: j,
            len: p,
        });
    }
    let stats = column_stats(x, obs_w)?;
    let std = Standardization::new(&stats, penalty.standardize, center);
    let mut engine = WlsEngine::from_parts(x, std, penalty, intercept);
    if !exclude.is_empty() {
        let mut allowed = vec![true; p];
        for &j in exclude {
            allowed[j] = false;
        }
        engine = engine.restricted(&allowed);
    }
    Ok((engine, stats))
}

pub(crate) fn run_path(
    engine: &WlsEngine<'_>,
    loss: &dyn Loss,
    penalty: &PenaltySpec,
    opts: &FitOptions,
    null_deviance: f64,
    store_intercept: bool,
) -> Result<PathCore> {
    let (n, p) = (engine.x.n_rows(), engine.n_features());
    let (null, _) = null_iterate(engine, loss, opts)?;
    let (lambdas, lambda_max, auto) = match &opts.lambda {
        LambdaSpec::Auto { nlambda, min_ratio } => {
            let lmax = lambda_max_at(engine, loss, &null)?;
            let ratio = min_ratio.unwrap_or_else(|| default_min_ratio(n, p));
            (lambda_sequence(lmax, *nlambda, ratio)?, Some(lmax), true)
        }
        LambdaSpec::Explicit(l) => {
            validate_explicit(l)?;
            (l.clone(), lambda_max_at(engine, loss, &null).ok(), false)
        }
    };
    let mut solver = opts.solver;
    if let Some(lmax) = lambda_max {
        solver.kkt_tol *= lmax;
    }
    let first_prev = lambda_max.map_or(lambdas[0], |m| m.max(lambdas[0]));
    let mut cur = null;
    let mut core = PathCore {
        lambda: Vec::new(),
        intercepts: Vec::new(),
        coefficients: Vec::new(),
        dev_ratio: Vec::new(),
        null_deviance,
        lambda_max,
        diagnostics: PathDiagnostics::default(),
    };
    let (lower, upper) = (penalty.lower(), penalty.upper());
    for (k, &lam) in lambdas.iter().enumerate() {
        let prev = if k == 0 { first_prev } else { lambdas[k - 1] };
        let out = match solve_lambda(engine, loss, &mut cur, lam, prev, opts, &solver) {
            Ok(out) => out,
            Err(e) if k == 0 => return Err(e),
            Err(_) => {
                core.diagnostics.truncated = true;
                break;
            }
        };
        let (b0, beta) = engine.unstandardize(cur.b0, &cur.beta, lower, upper);
        let dr = if null_deviance > 0.0 {
            1.0 - cur.dev / null_deviance
        } else {
            0.0
        };
        core.lambda.push(lam);
        core.intercepts.push(if store_intercept { b0 } else { 0.0 });
        core.coefficients.push(SparseCoefficients::from_dense(&beta));
        core.dev_ratio.push(dr);
        let d = &mut core.diagnostics;
        d.passes.push(out.passes);
        d.outer_iterations.push(out.outer);
        d.converged.push(out.converged);
        d.objective_trace.push(out.trace);
        if auto && opts.early_stop && k + 1 >= 5.min(lambdas.len()) && k > 0 {
            let gain = dr - core.dev_ratio[k - 1];
            if dr > 0.999 || gain < 1e-5 * dr {
                break;
            }
        }
    }
    Ok(core)
}

/// Fits the elastic-net path of a GLM family.
pub fn fit_glm_path(
    x: &FeatureMatrix,
    y: &[f64],
    obs_w: &Weights,
    family: Arc<dyn GlmFamily>,
    penalty: &PenaltySpec,
    opts: &FitOptions,
) -> Result<PathFit> {
    let n = x.n_rows();
    if n < 2 {
        return Err(Error::InvalidArgument("at least two observations are required".into()));
    }
    if y.len() != n {
        return Err(Error::Dimension {
            what: "response",
            expected: n,
            got: y.len(),
        });
    }
    if obs_w.len() != n {
        return Err(Error::Dimension {
            what: "weights",
            expected: n,
            got: obs_w.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response"));
    }
    family::check_response(family.as_ref(), y)?;
    let w = obs_w.normalized_to_count();
    let (engine, stats) = path_engine(x, obs_w, penalty, penalty.intercept, penalty.intercept, &opts.exclude)?;
    let loss = GlmLoss {
        family: family.as_ref(),
        y,
        w: &w,
    };
    let null_b0 = if penalty.intercept { loss.null_intercept() } else { 0.0 };
    let null_deviance = loss
        .deviance(&vec![null_b0; n])
        .ok_or_else(|| Error::InvalidFamily("null model lies outside the family's domain".into()))?;
    let core = run_path(&engine, &loss, penalty, opts, null_deviance, true)?;
    Ok(PathFit {
        family: ModelFamily::Glm(family),
        lambda: core.lambda,
        intercepts: core.intercepts,
        coefficients: core.coefficients,
        dev_ratio: core.dev_ratio,
        null_deviance: core.null_deviance,
        penalty: penalty.clone(),
        stats,
        n_obs: n,
        n_features: x.n_cols(),
        lambda_max: core.lambda_max,
        diagnostics: core.diagnostics,
    })
}

/// A response together with the model it is fitted under.
#[derive(Debug, Clone)]
pub enum Response {
    Glm {
        y: Vec<f64>,
        family: Arc<dyn GlmFamily>,
    },
    Cox(SurvivalResponse),
}

impl Response {
    pub fn glm(y: Vec<f64>, family: Arc<dyn GlmFamily>) -> Self {
        Response::Glm { y, family }
    }

    pub fn len(&self) -> usize {
        match self {
            Response::Glm { y, .. } => y.len(),
            Response::Cox(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn model_family(&self) -> ModelFamily {
        match self {
            Response::Glm { family, .. } => ModelFamily::Glm(family.clone()),
            Response::Cox(_) => ModelFamily::Cox,
        }
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Ok(match self {
            Response::Glm { y, family } => Response::Glm {
                y: rows.iter().map(|&r| y[r]).collect(),
                family: family.clone(),
            },
            Response::Cox(s) => Response::Cox(s.subset(rows)?),
        })
    }
}

/// Fits the path for either kind of response.
pub fn fit_path(
    x: &FeatureMatrix,
    response: &Response,
    obs_w: &Weights,
    penalty: &PenaltySpec,
    opts: &FitOptions,
) -> Result<PathFit> {
    match response {
        Response::Glm { y, family } => fit_glm_path(x, y, obs_w, family.clone(), penalty, opts),
        Response::Cox(s) => fit_cox_path(x, s, obs_w, penalty, opts),
    }
}

/// λ_max for a GLM problem: the smallest λ at which every penalized
/// coefficient is zero.
pub fn lambda_max(
    x: &FeatureMatrix,
    y: &[f64],
    obs_w: &Weights,
    family: &dyn GlmFamily,
    penalty: &PenaltySpec,
) -> Result<f64> {
    family::check_response(family, y)?;
    let w = obs_w.normalized_to_count();
    let (engine, _) = path_engine(x, obs_w, penalty, penalty.intercept, penalty.intercept, &[])?;
    let loss = GlmLoss { family, y, w: &w };
    let (null, _) = null_iterate(&engine, &loss, &FitOptions::default())?;
    lambda_max_at(&engine, &loss, &null)
}
