//! Cox proportional-hazards models with Breslow ties: partial likelihood
//! sweeps for right-censored and (start, stop] data, stratification,
//! regularization paths and Breslow survival curves.

use std::collections::HashMap;

use crate::data::{predict_sparse, FeatureMatrix, Weights};
use crate::error::{Error, Result};
use crate::path::{self, FitOptions, Loss, ModelFamily, PathFit};
use crate::pwls::PenaltySpec;

/// Survival outcomes with per-stratum orderings computed once.
#[derive(Debug, Clone)]
pub struct SurvivalResponse {
    start: Vec<f64>,
    stop: Vec<f64>,
    status: Vec<bool>,
    counting: bool,
    strata: Vec<usize>,
    labels: Vec<String>,
    groups: Vec<Stratum>,
}

/// Orderings of one stratum. Positions refer to `by_stop`.
#[derive(Debug, Clone)]
struct Stratum {
    by_stop: Vec<usize>,
    by_start: Vec<usize>,
    /// Unique failure times, ascending.
    times: Vec<f64>,
    /// Position of the first observation with stop equal to each failure
    /// time; the deaths at that time occupy `first[i]..death_end[i]`.
    first: Vec<usize>,
    death_end: Vec<usize>,
    /// Number of failure times `≤ stop` at each position.
    upto: Vec<usize>,
}

impl Stratum {
    fn build(members: Vec<usize>, start: &[f64], stop: &[f64], status: &[bool]) -> Self {
        let mut by_stop = members.clone();
        // ascending stop, failures before censorings, then index
        by_stop.sort_by(|&a, &b| {
            stop[a]
                .total_cmp(&stop[b])
                .then(status[b].cmp(&status[a]))
                .then(a.cmp(&b))
        });
        let mut by_start = members;
        by_start.sort_by(|&a, &b| start[a].total_cmp(&start[b]).then(a.cmp(&b)));

        let mut times = Vec::new();
        let mut first = Vec::new();
        let mut death_end = Vec::new();
        let mut upto = Vec::with_capacity(by_stop.len());
        let mut q = 0;
        while q < by_stop.len() {
            let t = stop[by_stop[q]];
            let block_start = q;
            let mut d = q;
            while d < by_stop.len() && stop[by_stop[d]] == t && status[by_stop[d]] {
                d += 1;
            }
            if d > q {
                times.push(t);
                first.push(block_start);
                death_end.push(d);
            }
            while q < by_stop.len() && stop[by_stop[q]] == t {
                upto.push(times.len());
                q += 1;
            }
        }
        Self {
            by_stop,
            by_start,
            times,
            first,
            death_end,
            upto,
        }
    }
}

impl SurvivalResponse {
    /// Right-censored data: `time > 0`, `status` true for a failure.
    pub fn right_censored(time: Vec<f64>, status: Vec<bool>) -> Result<Self> {
        let start = vec![0.0; time.len()];
        Self::build(start, time, status, false)
    }

    /// Counting-process data: observation `j` is at risk on `(start_j, stop_j]`.
    pub fn counting(start: Vec<f64>, stop: Vec<f64>, status: Vec<bool>) -> Result<Self> {
        if start.len() != stop.len() {
            return Err(Error::Dimension {
                what: "start times",
                expected: stop.len(),
                got: start.len(),
            });
        }
        let counting = start.iter().any(|&s| s != 0.0);
        Self::build(start, stop, status, counting)
    }

    fn build(start: Vec<f64>, stop: Vec<f64>, status: Vec<bool>, counting: bool) -> Result<Self> {
        let n = stop.len();
        if n == 0 {
            return Err(Error::Empty("survival response"));
        }
        if status.len() != n {
            return Err(Error::Dimension {
                what: "status",
                expected: n,
                got: status.len(),
            });
        }
        for i in 0..n {
            let (a, b) = (start[i], stop[i]);
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidSurvival(format!("non-finite time at row {i}")));
            }
            if a < 0.0 || b <= a {
                return Err(Error::InvalidSurvival(format!(
                    "row {i}: need stop > start >= 0, got start {a}, stop {b}"
                )));
            }
        }
        let mut out = Self {
            start,
            stop,
            status,
            counting,
            strata: vec![0; n],
            labels: vec!["1".into()],
            groups: Vec::new(),
        };
        out.rebuild();
        Ok(out)
    }

    /// Assigns strata; labels are numbered in order of first appearance.
    pub fn with_strata<S: AsRef<str>>(mut self, labels: &[S]) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Dimension {
                what: "strata",
                expected: self.len(),
                got: labels.len(),
            });
        }
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut codes = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            let next = names.len();
            let c = *index.entry(l).or_insert_with(|| {
                names.push(l.to_string());
                next
            });
            codes.push(c);
        }
        self.strata = codes;
        self.labels = names;
        self.rebuild();
        Ok(self)
    }

    fn rebuild(&mut self) {
        let mut members = vec![Vec::new(); self.labels.len()];
        for (i, &s) in self.strata.iter().enumerate() {
            members[s].push(i);
        }
        self.groups = members
            .into_iter()
            .map(|m| Stratum::build(m, &self.start, &self.stop, &self.status))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.stop.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stop.is_empty()
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn stop(&self) -> &[f64] {
        &self.stop
    }

    pub fn status(&self) -> &[bool] {
        &self.status
    }

    /// True when some start time is nonzero.
    pub fn is_counting(&self) -> bool {
        self.counting
    }

    pub fn strata(&self) -> &[usize] {
        &self.strata
    }

    pub fn strata_labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_failures(&self) -> usize {
        self.status.iter().filter(|&&s| s).count()
    }

    /// Unique failure times of stratum `s`.
    pub fn failure_times(&self, s: usize) -> &[f64] {
        &self.groups[s].times
    }

    /// Whether observation `j` is at risk at time `t`: `start_j < t ≤ stop_j`.
    pub fn risk_at(&self, j: usize, t: f64) -> bool {
        self.start[j] < t && t <= self.stop[j]
    }

    /// [`Self::risk_at`] for a failure time of stratum `stratum`.
    pub fn risk_in(&self, j: usize, t: f64, stratum: usize) -> bool {
        self.strata[j] == stratum && self.risk_at(j, t)
    }

    /// Restriction to the given rows, keeping stratum labels.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<f64>>();
        let status = rows.iter().map(|&r| self.status[r]).collect();
        let mut out = Self::build(pick(&self.start), pick(&self.stop), status, self.counting)?;
        let labels: Vec<&str> = rows.iter().map(|&r| self.labels[self.strata[r]].as_str()).collect();
        if self.labels.len() > 1 {
            out = out.with_strata(&labels)?;
        }
        Ok(out)
    }
}

/// Score, negated Hessian diagonal and working response of the log
/// partial likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxDerivatives {
    /// `ℓ'(η)_k`.
    pub grad: Vec<f64>,
    /// `w_k = −ℓ''(η)_{k,k} ≥ 0`.
    pub wdiag: Vec<f64>,
    /// `η_k + ℓ'_k / w_k`, or `η_k` where `w_k = 0`.
    pub z: Vec<f64>,
}

/// Per-stratum sums shared by the likelihood and its derivatives.
struct RiskSums {
    /// Shift subtracted from η before exponentiating.
    shift: f64,
    /// `Σ_{j∈R_i} w_j e^{η_j − shift}` per failure time.
    rss: Vec<f64>,
    /// Weighted death mass per failure time.
    deaths: Vec<f64>,
}

fn check_inputs(surv: &SurvivalResponse, eta: &[f64], w: &[f64]) -> Result<()> {
    let n = surv.len();
    for (what, len) in [("linear predictor", eta.len()), ("weights", w.len())] {
        if len != n {
            return Err(Error::Dimension {
                what,
                expected: n,
                got: len,
            });
        }
    }
    if eta.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("linear predictor"));
    }
    Ok(())
}

fn stratum_shift(g: &Stratum, eta: &[f64]) -> f64 {
    g.by_stop
        .iter()
        .map(|&k| eta[k])
        .fold(f64::NEG_INFINITY, f64::max)
        .max(-f64::MAX)
}

/// Risk-set sums: a reverse cumulative sum over stop order, then for
/// (start, stop] data the mass of observations entering at or after each
/// failure time is removed by a two-pointer sweep over start order.
fn risk_sums(surv: &SurvivalResponse, g: &Stratum, eta: &[f64], w: &[f64], counting: bool) -> RiskSums {
    let shift = stratum_shift(g, eta);
    let ns = g.by_stop.len();
    let mut suffix = vec![0.0; ns + 1];
    for q in (0..ns).rev() {
        let k = g.by_stop[q];
        suffix[q] = suffix[q + 1] + w[k] * (eta[k] - shift).exp();
    }
    let m = g.times.len();
    let mut rss: Vec<f64> = g.first.iter().map(|&q| suffix[q]).collect();
    if counting {
        let mut curr = 0.0;
        let mut i = m;
        let mut si = ns;
        while i > 0 && si > 0 {
            let k = g.by_start[si - 1];
            if surv.start[k] < g.times[i - 1] {
                rss[i - 1] -= curr;
                i -= 1;
            } else {
                curr += w[k] * (eta[k] - shift).exp();
                si -= 1;
            }
        }
        // every remaining start is at or after these failure times
        while i > 0 {
            rss[i - 1] -= curr;
            i -= 1;
        }
    }
    let deaths = (0..m)
        .map(|i| (g.first[i]..g.death_end[i]).map(|q| w[g.by_stop[q]]).sum())
        .collect();
    RiskSums { shift, rss, deaths }
}

fn derivatives(surv: &SurvivalResponse, eta: &[f64], w: &[f64], counting: bool) -> CoxDerivatives {
    let n = surv.len();
    let mut grad = vec![0.0; n];
    let mut wdiag = vec![0.0; n];
    for g in &surv.groups {
        let rs = risk_sums(surv, g, eta, w, counting);
        let m = g.times.len();
        let mut rd = vec![0.0; m + 1];
        let mut rd2 = vec![0.0; m + 1];
        for i in 0..m {
            let (a, b) = if rs.deaths[i] > 0.0 {
                (rs.deaths[i] / rs.rss[i], rs.deaths[i] / (rs.rss[i] * rs.rss[i]))
            } else {
                (0.0, 0.0)
            };
            rd[i + 1] = rd[i] + a;
            rd2[i + 1] = rd2[i] + b;
        }
        let ns = g.by_stop.len();
        let mut rsk = vec![0.0; n];
        let mut rsksq = vec![0.0; n];
        for q in 0..ns {
            let k = g.by_stop[q];
            rsk[k] = rd[g.upto[q]];
            rsksq[k] = rd2[g.upto[q]];
        }
        if counting {
            let (mut curr, mut curr2) = (0.0, 0.0);
            let mut i = 0;
            let mut si = 0;
            while i < m && si < ns {
                let k = g.by_start[si];
                if surv.start[k] < g.times[i] {
                    rsk[k] -= curr;
                    rsksq[k] -= curr2;
                    si += 1;
                } else {
                    curr += rd[i + 1] - rd[i];
                    curr2 += rd2[i + 1] - rd2[i];
                    i += 1;
                }
            }
            // entries after the last failure time are in no risk set
            while si < ns {
                let k = g.by_start[si];
                rsk[k] -= curr;
                rsksq[k] -= curr2;
                si += 1;
            }
        }
        for &k in &g.by_stop {
            let a = w[k] * (eta[k] - rs.shift).exp();
            let d = if surv.status[k] { w[k] } else { 0.0 };
            grad[k] = d - a * rsk[k];
            wdiag[k] = (a * rsk[k] - a * a * rsksq[k]).max(0.0);
        }
    }
    let z = (0..n)
        .map(|k| {
            if wdiag[k] > 0.0 {
                eta[k] + grad[k] / wdiag[k]
            } else {
                eta[k]
            }
        })
        .collect();
    CoxDerivatives { grad, wdiag, z }
}

/// Derivatives for right-censored data in O(n) after the cached sort.
pub fn cox_derivatives_rc(surv: &SurvivalResponse, eta: &[f64], w: &[f64]) -> Result<CoxDerivatives> {
    check_inputs(surv, eta, w)?;
    if surv.counting {
        return Err(Error::InvalidSurvival(
            "the right-censored sweep requires all start times to be zero".into(),
        ));
    }
    Ok(derivatives(surv, eta, w, false))
}

/// Derivatives for (start, stop] data.
pub fn cox_derivatives_ss(surv: &SurvivalResponse, eta: &[f64], w: &[f64]) -> Result<CoxDerivatives> {
    check_inputs(surv, eta, w)?;
    Ok(derivatives(surv, eta, w, true))
}

/// Dispatches to the sweep matching the data layout.
pub fn cox_derivatives(surv: &SurvivalResponse, eta: &[f64], w: &[f64]) -> Result<CoxDerivatives> {
    check_inputs(surv, eta, w)?;
    Ok(derivatives(surv, eta, w, surv.counting))
}

/// Breslow log partial likelihood `ℓ(η)`, summed over strata.
pub fn log_partial_likelihood(surv: &SurvivalResponse, eta: &[f64], w: &[f64]) -> Result<f64> {
    check_inputs(surv, eta, w)?;
    let mut total = 0.0;
    for g in &surv.groups {
        let rs = risk_sums(surv, g, eta, w, surv.counting);
        for i in 0..g.times.len() {
            if rs.deaths[i] == 0.0 {
                continue;
            }
            let mut lin = 0.0;
            for q in g.first[i]..g.death_end[i] {
                let k = g.by_stop[q];
                lin += w[k] * eta[k];
            }
            total += lin - rs.deaths[i] * (rs.rss[i].ln() + rs.shift);
        }
    }
    Ok(total)
}

/// `(2/n) · (−ℓ(η))`.
pub fn neg_log_partial_likelihood(surv: &SurvivalResponse, eta: &[f64], w: &[f64]) -> Result<f64> {
    let l = log_partial_likelihood(surv, eta, w)?;
    Ok(-2.0 * l / surv.len() as f64)
}

/// Saturated Breslow log likelihood `−Σ_i D_i log D_i`.
pub fn saturated_log_likelihood(surv: &SurvivalResponse, w: &[f64]) -> f64 {
    let mut total = 0.0;
    for g in &surv.groups {
        for i in 0..g.times.len() {
            let d: f64 = (g.first[i]..g.death_end[i]).map(|q| w[g.by_stop[q]]).sum();
            if d > 0.0 {
                total -= d * d.ln();
            }
        }
    }
    total
}

/// Deviance `2(ℓ_sat − ℓ(η))`.
pub fn cox_deviance(surv: &SurvivalResponse, eta: &[f64], w: &[f64]) -> Result<f64> {
    let l = log_partial_likelihood(surv, eta, w)?;
    Ok(2.0 * (saturated_log_likelihood(surv, w) - l))
}

pub(crate) struct CoxLoss<'a> {
    pub surv: &'a SurvivalResponse,
    pub w: &'a [f64],
    pub saturated: f64,
}

impl Loss for CoxLoss<'_> {
    fn working(&self, eta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = cox_derivatives(self.surv, eta, self.w)?;
        // the 2/n scaling of the objective doubles the quadratic weights
        let w = d.wdiag.iter().map(|v| 2.0 * v).collect();
        Ok((d.z, w))
    }

    fn deviance(&self, eta: &[f64]) -> Option<f64> {
        let l = log_partial_likelihood(self.surv, eta, self.w).ok()?;
        let dev = 2.0 * (self.saturated - l);
        dev.is_finite().then_some(dev)
    }

    fn deviance_gradient(&self, eta: &[f64]) -> Option<Vec<f64>> {
        let d = cox_derivatives(self.surv, eta, self.w).ok()?;
        let g: Vec<f64> = d.grad.iter().map(|v| -2.0 * v).collect();
        g.iter().all(|v| v.is_finite()).then_some(g)
    }

    fn scale(&self) -> f64 {
        1.0 / self.surv.len() as f64
    }

    fn null_intercept(&self) -> f64 {
        0.0
    }
}

/// Fits the elastic-net path of a Cox model. The intercept flag of
/// `penalty` is ignored; columns are still centered for standardization.
pub fn fit_cox_path(
    x: &FeatureMatrix,
    surv: &SurvivalResponse,
    obs_w: &Weights,
    penalty: &PenaltySpec,
    opts: &FitOptions,
) -> Result<PathFit> {
    let n = x.n_rows();
    if surv.len() != n {
        return Err(Error::Dimension {
            what: "survival response",
            expected: n,
            got: surv.len(),
        });
    }
    if obs_w.len() != n {
        return Err(Error::Dimension {
            what: "weights",
            expected: n,
            got: obs_w.len(),
        });
    }
    let w = obs_w.normalized_to_count();
    if !surv.status.iter().zip(&w).any(|(&s, &wi)| s && wi > 0.0) {
        return Err(Error::NoFailures);
    }
    let penalty = penalty.clone().with_intercept(false);
    let (engine, stats) = path::path_engine(x, obs_w, &penalty, true, false, &opts.exclude)?;
    let loss = CoxLoss {
        surv,
        w: &w,
        saturated: saturated_log_likelihood(surv, &w),
    };
    let null_deviance = loss
        .deviance(&vec![0.0; n])
        .ok_or(Error::NonFinite("null deviance"))?;
    let core = path::run_path(&engine, &loss, &penalty, opts, null_deviance, false)?;
    Ok(PathFit {
        family: ModelFamily::Cox,
        lambda: core.lambda,
        intercepts: core.intercepts,
        coefficients: core.coefficients,
        dev_ratio: core.dev_ratio,
        null_deviance: core.null_deviance,
        penalty,
        stats,
        n_obs: n,
        n_features: x.n_cols(),
        lambda_max: core.lambda_max,
        diagnostics: core.diagnostics,
    })
}

/// Breslow cumulative baseline hazard of one stratum, a right-continuous
/// step function jumping at each failure time.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumHazard {
    pub label: String,
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl StratumHazard {
    /// `Λ_0(t)`: zero before the first failure.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineHazard {
    pub strata: Vec<StratumHazard>,
}

impl BaselineHazard {
    /// Increment-wise `(1−frac)·a + frac·b` for two hazards on the same times.
    pub fn interpolate(a: &Self, b: &Self, frac: f64) -> Self {
        let strata = a
            .strata
            .iter()
            .zip(&b.strata)
            .map(|(x, y)| {
                let increments: Vec<f64> = x
                    .increments
                    .iter()
                    .zip(&y.increments)
                    .map(|(u, v)| (1.0 - frac) * u + frac * v)
                    .collect();
                StratumHazard {
                    label: x.label.clone(),
                    times: x.times.clone(),
                    cumulative: cumulate(&increments),
                    increments,
                }
            })
            .collect();
        Self { strata }
    }

    pub fn stratum(&self, label: &str) -> Option<&StratumHazard> {
        self.strata.iter().find(|s| s.label == label)
    }
}

pub(crate) fn cumulate(increments: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    increments
        .iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect()
}

/// `ΔΛ_0(t_i) = D_i / Σ_{j∈R_i} w_j e^{η_j}` per stratum.
pub fn breslow_hazard(surv: &SurvivalResponse, eta: &[f64], w: &[f64]) -> Result<BaselineHazard> {
    check_inputs(surv, eta, w)?;
    let strata = surv
        .groups
        .iter()
        .zip(&surv.labels)
        .map(|(g, label)| {
            let rs = risk_sums(surv, g, eta, w, surv.counting);
            let scale = (-rs.shift).exp();
            let increments: Vec<f64> = rs
                .deaths
                .iter()
                .zip(&rs.rss)
                .map(|(&d, &r)| if d > 0.0 { d / r * scale } else { 0.0 })
                .collect();
            StratumHazard {
                label: label.clone(),
                times: g.times.clone(),
                cumulative: cumulate(&increments),
                increments,
            }
        })
        .collect();
    Ok(BaselineHazard { strata })
}

/// Baseline hazard of a fitted Cox path at `s`, from the training data.
pub fn baseline_hazard(
    fit: &PathFit,
    s: f64,
    x: &FeatureMatrix,
    surv: &SurvivalResponse,
    obs_w: &Weights,
) -> Result<BaselineHazard> {
    if !fit.family.is_cox() {
        return Err(Error::InvalidArgument("baseline hazard requires a Cox model".into()));
    }
    if x.n_cols() != fit.n_features {
        return Err(Error::Dimension {
            what: "design matrix columns",
            expected: fit.n_features,
            got: x.n_cols(),
        });
    }
    let c = fit.coefficients_at(s);
    let eta = predict_sparse(x, &c.beta.indices, &c.beta.values, 0.0);
    breslow_hazard(surv, &eta, obs_w.as_slice())
}

/// A predicted survival curve `S(t) = exp(−Λ_0(t) e^{η})` at the failure
/// times of the row's stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub row: usize,
    pub stratum: String,
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
}

/// Survival curves for new rows given their linear predictors. `strata`
/// is required when the hazard has more than one stratum.
pub fn survival_curves(
    hazard: &BaselineHazard,
    eta: &[f64],
    strata: Option<&[String]>,
) -> Result<Vec<SurvivalCurve>> {
    if let Some(s) = strata {
        if s.len() != eta.len() {
            return Err(Error::Dimension {
                what: "strata of new rows",
                expected: eta.len(),
                got: s.len(),
            });
        }
    } else if hazard.strata.len() > 1 {
        return Err(Error::InvalidArgument(
            "the model is stratified: a stratum is required for each new row".into(),
        ));
    }
    eta.iter()
        .enumerate()
        .map(|(row, &e)| {
            let h = match strata {
                Some(s) => hazard
                    .stratum(&s[row])
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown stratum {:?} at row {row}", s[row])))?,
                None => &hazard.strata[0],
            };
            let risk = e.exp();
            Ok(SurvivalCurve {
                row,
                stratum: h.label.clone(),
                times: h.times.clone(),
                survival: h.cumulative.iter().map(|c| (-c * risk).exp()).collect(),
            })
        })
        .collect()
}

/// Survival curves of a fitted path at `s` for the rows of `new_x`.
pub fn survival_curve(
    fit: &PathFit,
    s: f64,
    hazard: &BaselineHazard,
    new_x: &FeatureMatrix,
    strata: Option<&[String]>,
) -> Result<Vec<SurvivalCurve>> {
    if new_x.n_cols() != fit.n_features {
        return Err(Error::Dimension {
            what: "new design matrix columns",
            expected: fit.n_features,
            got: new_x.n_cols(),
        });
    }
    let c = fit.coefficients_at(s);
    let eta = predict_sparse(new_x, &c.beta.indices, &c.beta.values, 0.0);
    survival_curves(hazard, &eta, strata)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn risk_interval_is_open_on_the_left() {
        let s = SurvivalResponse::counting(vec![0.0, 2.0, 1.0], vec![2.0, 4.0, 3.0], vec![true; 3]).unwrap();
        assert!(s.risk_at(0, 2.0));
        assert!(!s.risk_at(1, 2.0));
        assert!(s.risk_at(2, 2.0));
    }

    #[test]
    fn two_observation_example() {
        let s = SurvivalResponse::right_censored(vec![1.0, 2.0], vec![true, true]).unwrap();
        let eta = [0.0, 0.0];
        let nll = neg_log_partial_likelihood(&s, &eta, &ones(2)).unwrap();
        assert!((nll - 2f64.ln()).abs() < 1e-15);
        let d = cox_derivatives_rc(&s, &eta, &ones(2)).unwrap();
        assert_eq!(d.grad, vec![0.5, -0.5]);
        assert_eq!(d.wdiag, vec![0.25, 0.25]);
        assert_eq!(d.z, vec![2.0, -2.0]);
    }

    #[test]
    fn no_failures_gives_zero_derivatives() {
        let s = SurvivalResponse::right_censored(vec![1.0, 2.0, 3.0], vec![false; 3]).unwrap();
        let d = cox_derivatives_rc(&s, &[0.1, -0.2, 0.3], &ones(3)).unwrap();
        assert!(d.grad.iter().chain(&d.wdiag).all(|&v| v == 0.0));
    }

    #[test]
    fn staggered_entry_risk_sums() {
        let s = SurvivalResponse::counting(vec![0.0, 1.5, 0.0], vec![1.0, 3.0, 2.0], vec![true; 3]).unwrap();
        let g = &s.groups[0];
        let rs = risk_sums(&s, g, &[0.0; 3], &ones(3), true);
        assert_eq!(g.times, vec![1.0, 2.0, 3.0]);
        assert_eq!(rs.rss, vec![2.0, 2.0, 1.0]);
    }

    #[test]
    fn rejects_empty_intervals() {
        assert!(SurvivalResponse::counting(vec![1.0], vec![1.0], vec![true]).is_err());
        assert!(SurvivalResponse::right_censored(vec![0.0], vec![true]).is_err());
    }

    #[test]
    fn ties_sort_failures_first() {
        let s = SurvivalResponse::right_censored(vec![2.0, 2.0, 1.0], vec![false, true, true]).unwrap();
        let g = &s.groups[0];
        assert_eq!(g.by_stop, vec![2, 1, 0]);
        assert_eq!(g.times, vec![1.0, 2.0]);
        assert_eq!(g.upto, vec![1, 2, 2]);
    }

    #[test]
    fn null_model_hazard_is_nelson_aalen() {
        let n = 5;
        let s = SurvivalResponse::right_censored((1..=n).map(|t| t as f64).collect(), vec![true; n]).unwrap();
        let h = breslow_hazard(&s, &vec![0.0; n], &ones(n)).unwrap();
        for (i, inc) in h.strata[0].increments.iter().enumerate() {
            assert!((inc - 1.0 / (n - i) as f64).abs() < 1e-15);
        }
        assert_eq!(h.strata[0].at(0.5), 0.0);
        let c = survival_curves(&h, &[0.0], None).unwrap();
        assert!((c[0].survival[0] - (-0.2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn strata_labels_follow_first_appearance() {
        let s = SurvivalResponse::right_censored(vec![1.0, 2.0, 3.0], vec![true; 3])
            .unwrap()
            .with_strata(&["b", "a", "b"])
            .unwrap();
        assert_eq!(s.strata(), &[0, 1, 0]);
        assert_eq!(s.strata_labels(), &["b".to_string(), "a".to_string()]);
        assert_eq!(s.failure_times(0), &[1.0, 3.0]);
    }
}
