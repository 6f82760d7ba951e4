//! Penalized weighted least squares by cyclic coordinate descent.
//!
//! Solves, on the standardized scale,
//!
//! ```text
//! minimize  1/(2n) Σ_i w_i (z_i − β0 − x̃_iᵀβ)² + λ Σ_j γ_j ((1−α)/2 β_j² + α|β_j|)
//! subject to L̃_j ≤ β_j ≤ Ũ_j
//! ```
//!
//! Coordinate descent runs over a strong set predicted from the previous
//! path point; the returned solution is always certified by a KKT check
//! over every feature.

use crate::data::{column_stats, ColumnStats, FeatureMatrix, Weights};
use crate::error::{Error, Result};

/// Elastic-net penalty, coefficient bounds and model-structure flags.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub alpha: f64,
    factors: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pub standardize: bool,
    pub intercept: bool,
    rescale_factors: bool,
}

impl PenaltySpec {
    /// Lasso (α = 1) with unit penalty factors, no bounds, standardization
    /// and an intercept.
    pub fn new(p: usize) -> Self {
        Self {
            alpha: 1.0,
            factors: vec![1.0; p],
            lower: vec![f64::NEG_INFINITY; p],
            upper: vec![f64::INFINITY; p],
            standardize: true,
            intercept: true,
            rescale_factors: true,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_penalty_factors(mut self, factors: Vec<f64>) -> Self {
        self.factors = factors;
        self
    }

    pub fn with_lower(mut self, lower: Vec<f64>) -> Self {
        self.lower = lower;
        self
    }

    pub fn with_upper(mut self, upper: Vec<f64>) -> Self {
        self.upper = upper;
        self
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    pub fn with_intercept(mut self, on: bool) -> Self {
        self.intercept = on;
        self
    }

    /// Keeps penalty factors exactly as given instead of rescaling them to
    /// mean one.
    pub fn without_factor_rescaling(mut self) -> Self {
        self.rescale_factors = false;
        self
    }

    pub fn n_features(&self) -> usize {
        self.factors.len()
    }

    pub fn raw_factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rescales_factors(&self) -> bool {
        self.rescale_factors
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidPenalty(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        for (what, len) in [
            ("penalty factors", self.factors.len()),
            ("lower bounds", self.lower.len()),
            ("upper bounds", self.upper.len()),
        ] {
            if len != p {
                return Err(Error::Dimension {
                    what,
                    expected: p,
                    got: len,
                });
            }
        }
        if self.factors.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidPenalty(
                "penalty factors must be finite and nonnegative".into(),
            ));
        }
        if self.factors.iter().all(|&g| g == 0.0) {
            return Err(Error::InvalidPenalty(
                "at least one penalty factor must be positive".into(),
            ));
        }
        for j in 0..p {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > 0.0 || u < 0.0 {
                return Err(Error::InvalidPenalty(format!(
                    "bounds for feature {j} must satisfy lower <= 0 <= upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(())
    }

    /// Penalty factors as used by the solver (mean one unless rescaling is
    /// disabled).
    pub fn effective_factors(&self) -> Vec<f64> {
        if !self.rescale_factors {
            return self.factors.clone();
        }
        let p = self.factors.len() as f64;
        let total: f64 = self.factors.iter().sum();
        self.factors.iter().map(|g| g * p / total).collect()
    }
}

/// `sign(x) · max(|x| − t, 0)`.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// One coordinate minimization.
///
/// `gradient` is `(1/n) Σ w_i x̃_ij r_i` at the current residual, `v` is
/// `(1/n) Σ w_i x̃_ij²`. Returns the bounded minimizer of the univariate
/// subproblem, or 0 when its curvature vanishes.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn coordinate_update(
    gradient: f64,
    v: f64,
    beta_old: f64,
    lambda: f64,
    alpha: f64,
    factor: f64,
    lower: f64,
    upper: f64,
) -> f64 {
    let denom = v + lambda * (1.0 - alpha) * factor;
    if denom <= 0.0 {
        return 0.0;
    }
    let u = gradient + v * beta_old;
    (soft_threshold(u, lambda * alpha * factor) / denom).clamp(lower, upper)
}

/// Centering and scaling applied implicitly to every column.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
    /// Columns whose coefficient is forced to zero (no spread after
    /// centering, or identically zero).
    pub degenerate: Vec<bool>,
}

impl Standardization {
    pub fn new(stats: &ColumnStats, standardize: bool, center: bool) -> Self {
        let p = stats.means.len();
        let mut centers = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        let mut degenerate = Vec::with_capacity(p);
        for j in 0..p {
            let (m, sd) = (stats.means[j], stats.scales[j]);
            let spread = if center { sd } else { (sd * sd + m * m).sqrt() };
            let degen = if center { stats.is_constant(j) } else { spread == 0.0 };
            centers.push(if center { m } else { 0.0 });
            scales.push(if standardize && !degen { spread } else { 1.0 });
            degenerate.push(degen);
        }
        Self {
            centers,
            scales,
            degenerate,
        }
    }
}

/// Per-feature penalty data resolved onto the standardized scale.
#[derive(Debug, Clone)]
pub(crate) struct PenaltyTerms {
    pub alpha: f64,
    pub factors: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub intercept: bool,
    /// Features allowed to take nonzero values.
    pub eligible: Vec<bool>,
}

impl PenaltyTerms {
    pub fn new(penalty: &PenaltySpec, std: &Standardization, intercept: bool) -> Self {
        let factors = penalty.effective_factors();
        let p = factors.len();
        let mut lower = Vec::with_capacity(p);
        let mut upper = Vec::with_capacity(p);
        for j in 0..p {
            lower.push(penalty.lower[j] * std.scales[j]);
            upper.push(penalty.upper[j] * std.scales[j]);
        }
        let eligible = std.degenerate.iter().map(|d| !d).collect();
        Self {
            alpha: penalty.alpha,
            factors,
            lower,
            upper,
            intercept,
            eligible,
        }
    }

    pub fn restricted(&self, allowed: &[bool]) -> Self {
        let mut out = self.clone();
        for (e, &a) in out.eligible.iter_mut().zip(allowed) {
            *e = *e && a;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on `max_j v_j (Δβ_j)²` over a full sweep.
    pub tol: f64,
    /// Absolute tolerance of the KKT certificate.
    pub kkt_tol: f64,
    /// Cap on coordinate sweeps.
    pub max_passes: usize,
    /// Restrict sweeps to the strong set; `false` sweeps every feature.
    pub screening: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            kkt_tol: 1e-7,
            max_passes: 100_000,
            screening: true,
        }
    }
}

/// A solution on the standardized scale.
#[derive(Debug, Clone, PartialEq)]
pub struct WlsSolution {
    pub intercept: f64,
    pub beta: Vec<f64>,
    /// `(1/n) Σ_i w_i x̃_ij r_i` at the solution.
    pub gradient: Vec<f64>,
    pub passes: usize,
    pub converged: bool,
}

/// Working data for one penalized WLS problem.
#[derive(Debug, Clone, Copy)]
pub struct WlsProblem<'a> {
    pub z: &'a [f64],
    pub w: &'a [f64],
    pub lambda: f64,
    /// Previous path value, used by the strong rule.
    pub lambda_prev: f64,
}

/// Design matrix with its standardization and resolved penalty.
#[derive(Debug, Clone)]
pub struct WlsEngine<'x> {
    pub(crate) x: &'x FeatureMatrix,
    pub(crate) std: Standardization,
    pub(crate) terms: PenaltyTerms,
}

/// Incrementally maintained residual `r_i = base_i + shift`; the scalar
/// shift carries the centering terms so sparse columns stay sparse.
struct Residual {
    base: Vec<f64>,
    shift: f64,
    sum_w: f64,
    sum_w_base: f64,
}

impl<'x> WlsEngine<'x> {
    /// Standardizes with statistics computed under `obs_w` and centers iff
    /// the model has an intercept.
    pub fn new(x: &'x FeatureMatrix, obs_w: &Weights, penalty: &PenaltySpec) -> Result<Self> {
        penalty.validate(x.n_cols())?;
        let stats = column_stats(x, obs_w)?;
        let std = Standardization::new(&stats, penalty.standardize, penalty.intercept);
        Ok(Self::from_parts(x, std, penalty, penalty.intercept))
    }

    pub(crate) fn from_parts(
        x: &'x FeatureMatrix,
        std: Standardization,
        penalty: &PenaltySpec,
        intercept: bool,
    ) -> Self {
        let terms = PenaltyTerms::new(penalty, &std, intercept);
        Self { x, std, terms }
    }

    pub(crate) fn with_terms(&self, terms: PenaltyTerms) -> Self {
        Self {
            x: self.x,
            std: self.std.clone(),
            terms,
        }
    }

    pub fn standardization(&self) -> &Standardization {
        &self.std
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn factors(&self) -> &[f64] {
        &self.terms.factors
    }

    /// Bounds on the standardized scale.
    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.terms.lower, &self.terms.upper)
    }

    fn residual(&self, z: &[f64], w: &[f64], intercept: f64, beta: &[f64]) -> Residual {
        let mut base: Vec<f64> = z.iter().map(|zi| zi - intercept).collect();
        let mut shift = 0.0;
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                let s = self.std.scales[j];
                self.x.column(j).for_each(|i, v| base[i] -= b * v / s);
                shift += b * self.std.centers[j] / s;
            }
        }
        let sum_w: f64 = w.iter().sum();
        let sum_w_base = w.iter().zip(&base).map(|(a, b)| a * b).sum();
        Residual {
            base,
            shift,
            sum_w,
            sum_w_base,
        }
    }

    /// `(1/n) Σ_i w_i x̃_ij r_i` given `wx_j = Σ_i w_i x_ij`.
    #[inline]
    fn gradient_j(&self, j: usize, w: &[f64], r: &Residual, wx: f64, n: f64) -> f64 {
        let raw = self.x.column(j).dot2(w, &r.base) + r.shift * wx;
        let centered = raw - self.std.centers[j] * (r.sum_w_base + r.shift * r.sum_w);
        centered / (n * self.std.scales[j])
    }

    fn column_sums(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.x.n_rows() as f64;
        let sum_w: f64 = w.iter().sum();
        let p = self.x.n_cols();
        let mut wx = vec![0.0; p];
        let mut v = vec![0.0; p];
        for j in 0..p {
            if !self.terms.eligible[j] {
                continue;
            }
            let col = self.x.column(j);
            let mut a = 0.0;
            let mut b = 0.0;
            col.for_each(|i, x| {
                a += w[i] * x;
                b += w[i] * x * x;
            });
            let (c, s) = (self.std.centers[j], self.std.scales[j]);
            wx[j] = a;
            v[j] = ((b - 2.0 * c * a + c * c * sum_w) / (s * s) / n).max(0.0);
        }
        (wx, v)
    }

    /// Gradient `(1/n) Σ w_i x̃_ij r_i` for every feature at `(intercept, beta)`.
    pub fn gradient(&self, prob: &WlsProblem<'_>, intercept: f64, beta: &[f64]) -> Vec<f64> {
        let n = self.x.n_rows() as f64;
        let r = self.residual(prob.z, prob.w, intercept, beta);
        (0..self.x.n_cols())
            .map(|j| {
                let wx = self.x.column(j).dot(prob.w);
                self.gradient_j(j, prob.w, &r, wx, n)
            })
            .collect()
    }

    /// Penalized WLS objective on the standardized scale.
    pub fn objective(&self, prob: &WlsProblem<'_>, intercept: f64, beta: &[f64]) -> f64 {
        let n = self.x.n_rows() as f64;
        let r = self.residual(prob.z, prob.w, intercept, beta);
        let loss: f64 = r
            .base
            .iter()
            .zip(prob.w)
            .map(|(b, w)| {
                let ri = b + r.shift;
                w * ri * ri
            })
            .sum::<f64>()
            / (2.0 * n);
        loss + prob.lambda * penalty_value(beta, &self.terms.factors, self.terms.alpha)
    }

    /// Strong-rule screen: previously nonzero features, unpenalized
    /// features, and features with `|g_j| > α(2λ_k − λ_{k−1})γ_j`.
    pub fn strong_set(&self, gradient: &[f64], beta_prev: &[f64], lambda: f64, lambda_prev: f64) -> Vec<usize> {
        let cut = self.terms.alpha * (2.0 * lambda - lambda_prev);
        (0..self.x.n_cols())
            .filter(|&j| self.terms.eligible[j])
            .filter(|&j| {
                let g = self.terms.factors[j];
                beta_prev[j] != 0.0 || g == 0.0 || gradient[j].abs() > cut * g
            })
            .collect()
    }

    /// Features whose optimality conditions fail by more than `tol`.
    pub fn kkt_check(
        &self,
        prob: &WlsProblem<'_>,
        intercept: f64,
        beta: &[f64],
        tol: f64,
    ) -> Vec<usize> {
        let g = self.gradient(prob, intercept, beta);
        self.kkt_violations(&g, beta, prob.lambda, tol, |_| true)
    }

    fn kkt_violations(
        &self,
        gradient: &[f64],
        beta: &[f64],
        lambda: f64,
        tol: f64,
        consider: impl Fn(usize) -> bool,
    ) -> Vec<usize> {
        let t = &self.terms;
        (0..beta.len())
            .filter(|&j| t.eligible[j] && consider(j))
            .filter(|&j| {
                let b = beta[j];
                let l1 = lambda * t.alpha * t.factors[j];
                // gradient minus the smooth part of the penalty derivative
                let d = gradient[j] - lambda * (1.0 - t.alpha) * t.factors[j] * b;
                let (lo, hi) = (t.lower[j], t.upper[j]);
                if b == 0.0 {
                    let up_ok = hi <= 0.0 || d <= l1 + tol;
                    let down_ok = lo >= 0.0 || d >= -l1 - tol;
                    !(up_ok && down_ok)
                } else if b >= hi {
                    // at the upper bound: only pushing further up is blocked
                    d - l1 < -tol
                } else if b <= lo {
                    d + l1 > tol
                } else {
                    (d - l1 * b.signum()).abs() > tol
                }
            })
            .collect()
    }

    /// Cyclic coordinate descent with strong-rule screening and KKT
    /// certification, warm-started from `(intercept, beta)`.
    pub fn solve(
        &self,
        prob: &WlsProblem<'_>,
        intercept: f64,
        beta: &[f64],
        opts: &SolverOptions,
    ) -> WlsSolution {
        let p = self.x.n_cols();
        let n = self.x.n_rows() as f64;
        let t = &self.terms;
        let w = prob.w;
        let mut beta: Vec<f64> = (0..p)
            .map(|j| {
                if t.eligible[j] {
                    beta[j].clamp(t.lower[j], t.upper[j])
                } else {
                    0.0
                }
            })
            .collect();
        let mut b0 = if t.intercept { intercept } else { 0.0 };
        let mut r = self.residual(prob.z, w, b0, &beta);
        let (wx, v) = self.column_sums(w);

        let mut in_set = vec![false; p];
        if opts.screening {
            let g: Vec<f64> = (0..p)
                .map(|j| {
                    if t.eligible[j] {
                        self.gradient_j(j, w, &r, wx[j], n)
                    } else {
                        0.0
                    }
                })
                .collect();
            for j in self.strong_set(&g, &beta, prob.lambda, prob.lambda_prev) {
                in_set[j] = true;
            }
        } else {
            in_set.copy_from_slice(&t.eligible[..p]);
        }
        let mut set: Vec<usize> = (0..p).filter(|&j| in_set[j]).collect();
        let v0 = r.sum_w / n;
        // With an intercept, each coordinate step re-optimizes it too: the
        // column is centered under the working weights, which differ from
        // the weights used for standardization.
        let coupling: Vec<(f64, f64)> = (0..p)
            .map(|j| {
                if !t.intercept || r.sum_w <= 0.0 {
                    return (0.0, v[j]);
                }
                let (c, sc) = (self.std.centers[j], self.std.scales[j]);
                let m = (wx[j] - c * r.sum_w) / (sc * r.sum_w);
                let vc = v[j] - r.sum_w * m * m / n;
                if vc > 1e-10 * v[j] {
                    (m, vc)
                } else {
                    (0.0, v[j])
                }
            })
            .collect();
        let mut passes = 0usize;
        let mut converged = false;

        'outer: loop {
            loop {
                if passes >= opts.max_passes {
                    break 'outer;
                }
                passes += 1;
                let mut max_change: f64 = 0.0;
                if t.intercept && r.sum_w > 0.0 {
                    let delta = (r.sum_w_base + r.shift * r.sum_w) / r.sum_w;
                    if delta != 0.0 {
                        b0 += delta;
                        r.shift -= delta;
                        max_change = max_change.max(v0 * delta * delta);
                    }
                }
                for &j in &set {
                    let g = self.gradient_j(j, w, &r, wx[j], n);
                    let old = beta[j];
                    let (m, vc) = coupling[j];
                    let new = coordinate_update(
                        g,
                        vc,
                        old,
                        prob.lambda,
                        t.alpha,
                        t.factors[j],
                        t.lower[j],
                        t.upper[j],
                    );
                    if new != old {
                        let delta = new - old;
                        let s = self.std.scales[j];
                        let col = self.x.column(j);
                        col.for_each(|i, x| r.base[i] -= delta * x / s);
                        r.sum_w_base -= delta * wx[j] / s;
                        r.shift += delta * self.std.centers[j] / s;
                        if m != 0.0 {
                            b0 += delta * m;
                            r.shift -= delta * m;
                        }
                        beta[j] = new;
                        max_change = max_change.max(v[j] * delta * delta);
                    }
                }
                if max_change < opts.tol {
                    break;
                }
            }
            // refresh sums that drift with many incremental updates
            r = self.residual(prob.z, w, b0, &beta);
            let g: Vec<f64> = (0..p)
                .map(|j| {
                    if t.eligible[j] {
                        self.gradient_j(j, w, &r, wx[j], n)
                    } else {
                        0.0
                    }
                })
                .collect();
            let violators = self.kkt_violations(&g, &beta, prob.lambda, opts.kkt_tol, |_| true);
            if violators.is_empty() {
                converged = true;
                break;
            }
            let mut grew = false;
            for j in violators {
                if !in_set[j] {
                    in_set[j] = true;
                    grew = true;
                }
            }
            if grew {
                set = (0..p).filter(|&j| in_set[j]).collect();
            }
        }

        let gradient = self.gradient(prob, b0, &beta);
        WlsSolution {
            intercept: b0,
            beta,
            gradient,
            passes,
            converged,
        }
    }

    /// `η_i = b0 + Σ_j x̃_ij β_j` on the standardized design.
    pub fn linear_predictor(&self, intercept: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![intercept; self.x.n_rows()];
        let mut shift = 0.0;
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                let s = self.std.scales[j];
                self.x.column(j).for_each(|i, v| eta[i] += b * v / s);
                shift += b * self.std.centers[j] / s;
            }
        }
        if shift != 0.0 {
            for e in &mut eta {
                *e -= shift;
            }
        }
        eta
    }

    /// Restricts the features allowed to become nonzero.
    pub(crate) fn restricted(&self, allowed: &[bool]) -> Self {
        self.with_terms(self.terms.restricted(allowed))
    }

    pub(crate) fn is_eligible(&self, j: usize) -> bool {
        self.terms.eligible[j]
    }

    /// Maps standardized coefficients back to the original column scale,
    /// clamped to the original bounds.
    pub fn unstandardize(&self, intercept: f64, beta: &[f64], lower: &[f64], upper: &[f64]) -> (f64, Vec<f64>) {
        let mut b0 = intercept;
        let mut out = vec![0.0; beta.len()];
        for j in 0..beta.len() {
            if beta[j] != 0.0 {
                let b = (beta[j] / self.std.scales[j]).clamp(lower[j], upper[j]);
                out[j] = b;
                b0 -= self.std.centers[j] * b;
            }
        }
        (b0, out)
    }

    /// Inverse of [`Self::unstandardize`].
    pub fn standardize_coefficients(&self, intercept: f64, beta: &[f64]) -> (f64, Vec<f64>) {
        let mut b0 = intercept;
        let mut out = vec![0.0; beta.len()];
        for j in 0..beta.len() {
            if beta[j] != 0.0 {
                out[j] = beta[j] * self.std.scales[j];
                b0 += self.std.centers[j] * beta[j];
            }
        }
        (b0, out)
    }
}

/// `Σ_j γ_j ((1−α)/2 β_j² + α|β_j|)`.
pub fn penalty_value(beta: &[f64], factors: &[f64], alpha: f64) -> f64 {
    beta.iter()
        .zip(factors)
        .map(|(&b, &g)| g * (0.5 * (1.0 - alpha) * b * b + alpha * b.abs()))
        .sum()
}
