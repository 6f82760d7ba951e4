//! K-fold cross-validation with pre-validated predictions, performance
//! measures, ROC curves and confusion tables.
//!
//! The fold standard errors are the usual crude estimate and tend to be too
//! small, since the fold measures are correlated.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cox::{cox_deviance, SurvivalResponse};
use crate::data::{predict_sparse, FeatureMatrix, Weights};
use crate::error::{Error, Result};
use crate::family::{self, GlmFamily};
use crate::path::{self, FitOptions, LambdaSpec, PathFit, Response};
use crate::pwls::PenaltySpec;
use crate::relaxed::{self, RelaxedFit};

/// Seeded fold assignment: a uniformly random permutation dealt round-robin
/// into `k` folds, so fold sizes differ by at most one.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "number of folds must lie in [2, {n}], got {k}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (i, &r) in perm.iter().enumerate() {
        folds[r] = i % k;
    }
    Ok(folds)
}

/// Performance measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Deviance,
    Mse,
    Mae,
    Class,
    Auc,
    CIndex,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Deviance,
        Measure::Mse,
        Measure::Mae,
        Measure::Class,
        Measure::Auc,
        Measure::CIndex,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Deviance => "deviance",
            Measure::Mse => "mse",
            Measure::Mae => "mae",
            Measure::Class => "class",
            Measure::Auc => "auc",
            Measure::CIndex => "c-index",
        }
    }

    /// AUC and concordance are maximized; the rest minimized.
    pub fn maximize(self) -> bool {
        matches!(self, Measure::Auc | Measure::CIndex)
    }

    pub fn valid_for(self, response: &Response) -> bool {
        match response {
            Response::Cox(_) => matches!(self, Measure::Deviance | Measure::CIndex),
            Response::Glm { family, .. } => match self {
                Measure::Deviance | Measure::Mse | Measure::Mae => true,
                Measure::Class | Measure::Auc => family.is_binary(),
                Measure::CIndex => false,
            },
        }
    }

    /// Every measure applicable to `response`, in a fixed order.
    pub fn all_for(response: &Response) -> Vec<Measure> {
        Self::ALL.into_iter().filter(|m| m.valid_for(response)).collect()
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "deviance" => Measure::Deviance,
            "mse" => Measure::Mse,
            "mae" => Measure::Mae,
            "class" => Measure::Class,
            "auc" => Measure::Auc,
            "c-index" | "c" | "cindex" => Measure::CIndex,
            other => return Err(Error::InvalidArgument(format!("unknown measure {other:?}"))),
        })
    }
}

fn weighted_mean(values: impl Iterator<Item = f64>, w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    values.zip(w).map(|(v, wi)| v * wi).sum::<f64>() / total
}

/// A measure of link-scale predictions against the observed response.
/// Deviance, mse, mae and class are weighted means per observation; AUC
/// and concordance ignore weights.
pub fn evaluate(measure: Measure, eta: &[f64], response: &Response, w: &[f64]) -> Result<f64> {
    let n = response.len();
    if eta.len() != n || w.len() != n {
        return Err(Error::Dimension {
            what: "predictions",
            expected: n,
            got: eta.len().min(w.len()),
        });
    }
    if !measure.valid_for(response) {
        return Err(Error::InvalidArgument(format!(
            "measure {measure} is not available for family {}",
            response.model_family().name()
        )));
    }
    match response {
        Response::Cox(surv) => match measure {
            Measure::Deviance => {
                let total: f64 = w.iter().sum();
                let wn: Vec<f64> = w.iter().map(|v| v * n as f64 / total).collect();
                Ok(cox_deviance(surv, eta, &wn)? / n as f64)
            }
            _ => concordance(eta, surv),
        },
        Response::Glm { y, family } => glm_measure(measure, eta, y, family.as_ref(), w),
    }
}

fn glm_measure(measure: Measure, eta: &[f64], y: &[f64], f: &dyn GlmFamily, w: &[f64]) -> Result<f64> {
    let mu = family::link_inverse(f, eta);
    match measure {
        Measure::Deviance => {
            let total: f64 = w.iter().sum();
            Ok(family::deviance(f, y, &mu, w)? / total)
        }
        Measure::Mse => Ok(weighted_mean(y.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)), w)),
        Measure::Mae => Ok(weighted_mean(y.iter().zip(&mu).map(|(a, b)| (a - b).abs()), w)),
        Measure::Class => Ok(weighted_mean(
            y.iter()
                .zip(&mu)
                .map(|(a, m)| (a - if *m >= 0.5 { 1.0 } else { 0.0 }).abs()),
            w,
        )),
        Measure::Auc => {
            let labels: Vec<bool> = y.iter().map(|&v| v > 0.5).collect();
            auc(eta, &labels)
        }
        Measure::CIndex => unreachable!("rejected by valid_for"),
    }
}

/// Mann–Whitney AUC: the probability that a random positive outscores a
/// random negative, counting ties as one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            what: "labels",
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over tie groups
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Harrell's concordance of risk scores with observed stop times. A pair
/// is comparable when the earlier time is a failure, or the times are
/// equal and only one of them is a failure; higher risk should fail first.
pub fn concordance(eta: &[f64], surv: &SurvivalResponse) -> Result<f64> {
    let (t, d) = (surv.stop(), surv.status());
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..t.len() {
        if !d[i] {
            continue;
        }
        for j in 0..t.len() {
            if i == j {
                continue;
            }
            let comparable = t[i] < t[j] || (t[i] == t[j] && !d[j]);
            if comparable {
                den += 1.0;
                if eta[i] > eta[j] {
                    num += 1.0;
                } else if eta[i] == eta[j] {
                    num += 0.5;
                }
            }
        }
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("no comparable pairs for the concordance index".into()));
    }
    Ok(num / den)
}

/// ROC curve swept from the highest threshold down.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    /// Threshold reached at each point (`+∞` for the origin).
    pub thresholds: Vec<f64>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.fpr
            .windows(2)
            .zip(self.tpr.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }
}

/// `(FPR, TPR)` at every distinct score, starting at `(0,0)` and ending
/// at `(1,1)`; tied scores move both rates in one step.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            what: "labels",
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::InvalidArgument("ROC curve needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut curve = RocCurve {
        fpr: vec![0.0],
        tpr: vec![0.0],
        thresholds: vec![f64::INFINITY],
    };
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        curve.fpr.push(fp / n_neg);
        curve.tpr.push(tp / n_pos);
        curve.thresholds.push(s);
    }
    Ok(curve)
}

/// Contingency table of predicted (rows) against true (columns) classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<f64>,
    /// `counts[predicted][true]`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn percent_correct(&self) -> f64 {
        let diag: usize = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total() as f64
    }
}

pub fn confusion_matrix(predicted: &[f64], truth: &[f64]) -> Result<ConfusionMatrix> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension {
            what: "true classes",
            expected: predicted.len(),
            got: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::Empty("class predictions"));
    }
    let mut classes: Vec<f64> = predicted.iter().chain(truth).copied().collect();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    let idx = |v: f64| classes.iter().position(|&c| c == v).expect("class collected above");
    let k = classes.len();
    let mut counts = vec![vec![0; k]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        counts[idx(p)][idx(t)] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

/// Rounds to three decimals and drops trailing zeros.
fn short_number(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.classes.len();
        let labels: Vec<String> = self.classes.iter().map(|c| format!("{c}")).collect();
        let row_tot: Vec<usize> = self.counts.iter().map(|r| r.iter().sum()).collect();
        let col_tot: Vec<usize> = (0..k).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect();
        let total = self.total();
        let label_w = labels.iter().map(|l| l.len()).max().unwrap_or(0).max("Total".len());
        let lead = (4 + label_w).max("Predicted".len());
        let widths: Vec<usize> = (0..k)
            .map(|j| {
                let cells = self.counts.iter().map(|r| r[j].to_string().len()).max().unwrap_or(0);
                labels[j].len().max(cells).max(col_tot[j].to_string().len())
            })
            .collect();
        let tot_w = "Total".len().max(total.to_string().len());

        writeln!(f, "{:lead$}True", "")?;
        write!(f, "{:<lead$}", "Predicted")?;
        for j in 0..k {
            write!(f, " {:>w$}", labels[j], w = widths[j])?;
        }
        writeln!(f, " {:>tot_w$}", "Total")?;
        for (i, row) in self.counts.iter().enumerate() {
            write!(f, "{:<lead$}", format!("    {:<label_w$}", labels[i]))?;
            for j in 0..k {
                write!(f, " {:>w$}", row[j], w = widths[j])?;
            }
            writeln!(f, " {:>tot_w$}", row_tot[i])?;
        }
        write!(f, "{:<lead$}", format!("    {:<label_w$}", "Total"))?;
        for j in 0..k {
            write!(f, " {:>w$}", col_tot[j], w = widths[j])?;
        }
        writeln!(f, " {:>tot_w$}", total)?;
        writeln!(f)?;
        writeln!(f, " Percent Correct:  {}", short_number(self.percent_correct()))
    }
}

/// Mean and standard error of per-fold measures: `folds[f][k]` is fold
/// `f`'s measure at grid point `k`.
pub fn summarize_folds(folds: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let nf = folds.len() as f64;
    let m = folds.first().map_or(0, |r| r.len());
    let mut cvm = vec![0.0; m];
    let mut cvsd = vec![0.0; m];
    for k in 0..m {
        let mean = folds.iter().map(|r| r[k]).sum::<f64>() / nf;
        let var = if folds.len() > 1 {
            folds.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        cvm[k] = mean;
        cvsd[k] = (var / nf).sqrt();
    }
    (cvm, cvsd)
}

/// Indices of the optimum and of the largest λ within one standard error
/// of it, on a decreasing λ grid. Ties go to the larger λ.
pub fn select_lambda(cvm: &[f64], cvsd: &[f64], maximize: bool) -> Result<(usize, usize)> {
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut best: Option<usize> = None;
    for (k, &v) in cvm.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        if best.is_none_or(|b| sign * v < sign * cvm[b]) {
            best = Some(k);
        }
    }
    let imin = best.ok_or_else(|| Error::CrossValidation("no finite cross-validation measure".into()))?;
    let bound = sign * cvm[imin] + cvsd[imin];
    let i1se = (0..cvm.len())
        .find(|&k| cvm[k].is_finite() && sign * cvm[k] <= bound)
        .unwrap_or(imin);
    Ok((imin, i1se))
}

/// Options for [`cv_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub nfolds: usize,
    /// Defaults to deviance.
    pub measure: Option<Measure>,
    pub seed: u64,
    /// Explicit fold assignment; overrides `nfolds` and `seed`.
    pub fold_ids: Option<Vec<usize>>,
    /// Retain the pre-validated link-scale predictions.
    pub keep: bool,
    pub relax: bool,
    pub gamma: Vec<f64>,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            nfolds: 10,
            measure: None,
            seed: 0,
            fold_ids: None,
            keep: false,
            relax: false,
            gamma: relaxed::DEFAULT_GAMMA.to_vec(),
        }
    }
}

/// Cross-validation surface over the blending grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedCv {
    pub gamma: Vec<f64>,
    /// `cvm[g][k]` at `gamma[g]`, `lambda[k]`.
    pub cvm: Vec<Vec<f64>>,
    pub cvsd: Vec<Vec<f64>>,
    pub gamma_min: f64,
    pub lambda_min: f64,
    pub gamma_1se: f64,
    pub lambda_1se: f64,
    /// `fit_preval[g][i][k]` when kept.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit_preval: Option<Vec<Vec<Vec<f64>>>>,
}

/// Cross-validation summary on the full-data λ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub measure: Measure,
    pub lambda: Vec<f64>,
    pub cvm: Vec<f64>,
    pub cvsd: Vec<f64>,
    /// Nonzero coefficients of the full-data fit at each λ.
    pub nzero: Vec<usize>,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub index_min: usize,
    pub index_1se: usize,
    pub fold_ids: Vec<usize>,
    /// Folds left out of the summary because they were degenerate.
    pub skipped_folds: Vec<usize>,
    /// `fit_preval[i][k]`: held-out link-scale prediction of row `i` at
    /// `lambda[k]`, when kept.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit_preval: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relaxed: Option<RelaxedCv>,
}

/// Full-data fit together with its cross-validation summary.
#[derive(Debug, Clone)]
pub struct CvFit {
    pub cv: CvResult,
    pub fit: PathFit,
    pub relaxed_fit: Option<RelaxedFit>,
}

/// Reasons a fold cannot be used.
fn fold_is_degenerate(train: &Response, test: &Response, measure: Measure) -> bool {
    match (train, test) {
        (Response::Cox(a), Response::Cox(b)) => a.n_failures() == 0 || b.n_failures() == 0,
        (Response::Glm { y: ya, family }, Response::Glm { y: yb, .. }) if family.is_binary() => {
            let both = |y: &[f64]| y.iter().any(|&v| v > 0.5) && y.iter().any(|&v| v <= 0.5);
            !both(ya) || (measure == Measure::Auc && !both(yb))
        }
        _ => false,
    }
}

/// Held-out link-scale predictions of one fold, per γ: `[g][k][i]`.
struct FoldOutcome {
    rows: Vec<usize>,
    preds: Vec<Vec<Vec<f64>>>,
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    x: &FeatureMatrix,
    response: &Response,
    obs_w: &Weights,
    penalty: &PenaltySpec,
    opts: &FitOptions,
    folds: &[usize],
    f: usize,
    gammas: &[f64],
    relax: bool,
    measure: Measure,
) -> Option<FoldOutcome> {
    let test: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == f).collect();
    let train: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != f).collect();
    let rtrain = response.subset(&train).ok()?;
    let rtest = response.subset(&test).ok()?;
    if fold_is_degenerate(&rtrain, &rtest, measure) {
        return None;
    }
    let xtrain = x.select_rows(&train).ok()?;
    let xtest = x.select_rows(&test).ok()?;
    let wtrain = obs_w.subset(&train).ok()?;
    let lambda = match &opts.lambda {
        LambdaSpec::Explicit(l) => l.clone(),
        LambdaSpec::Auto { .. } => unreachable!("fold fits use the full-data grid"),
    };
    let preds = if relax {
        let fit = relaxed::fit_relaxed(&xtrain, &rtrain, &wtrain, penalty, opts).ok()?;
        gammas
            .iter()
            .map(|&g| {
                lambda
                    .iter()
                    .map(|&s| {
                        let (b0, beta, _) = fit.coefficients_at(s, g).expect("gamma validated");
                        predict_sparse(&xtest, &beta.indices, &beta.values, b0)
                    })
                    .collect()
            })
            .collect()
    } else {
        let fit = path::fit_path(&xtrain, &rtrain, &wtrain, penalty, opts).ok()?;
        vec![lambda
            .iter()
            .map(|&s| {
                let c = fit.coefficients_at(s);
                predict_sparse(&xtest, &c.beta.indices, &c.beta.values, c.intercept)
            })
            .collect()]
    };
    Some(FoldOutcome { rows: test, preds })
}

/// K-fold cross-validation. The full-data fit fixes the λ grid; each fold
/// is refitted on that grid and its held-out rows predicted at every λ.
/// Fold fits run in parallel and are combined in fold order.
pub fn cv_fit(
    x: &FeatureMatrix,
    response: &Response,
    obs_w: &Weights,
    penalty: &PenaltySpec,
    fit_opts: &FitOptions,
    cv_opts: &CvOptions,
) -> Result<CvFit> {
    let n = x.n_rows();
    let measure = cv_opts.measure.unwrap_or(Measure::Deviance);
    if !measure.valid_for(response) {
        return Err(Error::InvalidArgument(format!(
            "measure {measure} is not available for family {}",
            response.model_family().name()
        )));
    }
    let folds = match &cv_opts.fold_ids {
        Some(ids) => {
            if ids.len() != n {
                return Err(Error::Dimension {
                    what: "fold ids",
                    expected: n,
                    got: ids.len(),
                });
            }
            ids.clone()
        }
        None => make_folds(n, cv_opts.nfolds, cv_opts.seed)?,
    };
    let nfolds = folds.iter().max().map_or(0, |m| m + 1);
    let gammas: Vec<f64> = if cv_opts.relax { cv_opts.gamma.clone() } else { vec![1.0] };
    if gammas.is_empty() || gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::InvalidArgument("gamma values must lie in [0, 1]".into()));
    }

    let (fit, relaxed_fit) = if cv_opts.relax {
        let r = relaxed::fit_relaxed(x, response, obs_w, penalty, fit_opts)?;
        (r.base.clone(), Some(r))
    } else {
        (path::fit_path(x, response, obs_w, penalty, fit_opts)?, None)
    };
    let lambda = fit.lambda.clone();
    let fold_opts = FitOptions {
        lambda: LambdaSpec::Explicit(lambda.clone()),
        ..fit_opts.clone()
    };

    let outcomes: Vec<Option<FoldOutcome>> = (0..nfolds)
        .into_par_iter()
        .map(|f| {
            run_fold(
                x,
                response,
                obs_w,
                penalty,
                &fold_opts,
                &folds,
                f,
                &gammas,
                cv_opts.relax,
                measure,
            )
        })
        .collect();

    let m = lambda.len();
    let ng = gammas.len();
    let mut preval = vec![vec![vec![f64::NAN; m]; n]; ng];
    // per-γ per-fold measure rows
    let mut fold_measures: Vec<Vec<Vec<f64>>> = vec![Vec::new(); ng];
    let mut skipped = Vec::new();
    for (f, out) in outcomes.iter().enumerate() {
        let Some(out) = out else {
            skipped.push(f);
            continue;
        };
        let test_resp = response.subset(&out.rows)?;
        let test_w: Vec<f64> = out.rows.iter().map(|&i| obs_w.as_slice()[i]).collect();
        let mut rows = Vec::with_capacity(ng);
        let mut usable = true;
        for g in 0..ng {
            let mut row = Vec::with_capacity(m);
            for k in 0..m {
                let v = evaluate(measure, &out.preds[g][k], &test_resp, &test_w).unwrap_or(f64::NAN);
                if !v.is_finite() {
                    usable = false;
                }
                row.push(v);
            }
            rows.push(row);
        }
        if !usable {
            skipped.push(f);
            continue;
        }
        for (g, row) in rows.into_iter().enumerate() {
            fold_measures[g].push(row);
            for k in 0..m {
                for (t, &i) in out.rows.iter().enumerate() {
                    preval[g][i][k] = out.preds[g][k][t];
                }
            }
        }
    }
    if fold_measures[0].len() < 2 {
        return Err(Error::CrossValidation(format!(
            "only {} usable folds out of {nfolds}",
            fold_measures[0].len()
        )));
    }

    let surfaces: Vec<(Vec<f64>, Vec<f64>)> = fold_measures.iter().map(|fm| summarize_folds(fm)).collect();
    let plain = gammas.iter().position(|&g| g == 1.0);
    let (cvm, cvsd) = match plain {
        Some(g) => surfaces[g].clone(),
        None => {
            // the plain path is also needed when the grid omits γ = 1
            let plain_cv = cv_fit(
                x,
                response,
                obs_w,
                penalty,
                fit_opts,
                &CvOptions {
                    relax: false,
                    keep: false,
                    fold_ids: Some(folds.clone()),
                    ..cv_opts.clone()
                },
            )?;
            (plain_cv.cv.cvm, plain_cv.cv.cvsd)
        }
    };
    let (imin, i1se) = select_lambda(&cvm, &cvsd, measure.maximize())?;

    let relaxed = if cv_opts.relax {
        Some(select_relaxed(&gammas, &lambda, &surfaces, measure.maximize(), cv_opts.keep.then(|| preval.clone()))?)
    } else {
        None
    };
    let fit_preval = if cv_opts.keep {
        plain.map(|g| preval[g].clone())
    } else {
        None
    };
    let cv = CvResult {
        measure,
        nzero: fit.nonzero_counts(),
        lambda_min: lambda[imin],
        lambda_1se: lambda[i1se],
        index_min: imin,
        index_1se: i1se,
        lambda,
        cvm,
        cvsd,
        fold_ids: folds,
        skipped_folds: skipped,
        fit_preval,
        relaxed,
    };
    Ok(CvFit { cv, fit, relaxed_fit })
}

/// Optimum over the (γ, λ) surface and the most regularized point within
/// one standard error: largest λ first, then largest γ.
fn select_relaxed(
    gammas: &[f64],
    lambda: &[f64],
    surfaces: &[(Vec<f64>, Vec<f64>)],
    maximize: bool,
    preval: Option<Vec<Vec<Vec<f64>>>>,
) -> Result<RelaxedCv> {
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut order: Vec<usize> = (0..gammas.len()).collect();
    order.sort_by(|&a, &b| gammas[b].total_cmp(&gammas[a]));
    let mut best: Option<(usize, usize)> = None;
    for k in 0..lambda.len() {
        for &g in &order {
            let v = surfaces[g].0[k];
            if !v.is_finite() {
                continue;
            }
            if best.is_none_or(|(bg, bk)| sign * v < sign * surfaces[bg].0[bk]) {
                best = Some((g, k));
            }
        }
    }
    let (gmin, kmin) = best.ok_or_else(|| Error::CrossValidation("no finite cross-validation measure".into()))?;
    let bound = sign * surfaces[gmin].0[kmin] + surfaces[gmin].1[kmin];
    let mut one_se = (gmin, kmin);
    'search: for k in 0..lambda.len() {
        for &g in &order {
            let v = surfaces[g].0[k];
            if v.is_finite() && sign * v <= bound {
                one_se = (g, k);
                break 'search;
            }
        }
    }
    Ok(RelaxedCv {
        gamma: gammas.to_vec(),
        cvm: surfaces.iter().map(|s| s.0.clone()).collect(),
        cvsd: surfaces.iter().map(|s| s.1.clone()).collect(),
        gamma_min: gammas[gmin],
        lambda_min: lambda[kmin],
        gamma_1se: gammas[one_se.0],
        lambda_1se: lambda[one_se.1],
        fit_preval: preval,
    })
}

/// Every applicable measure for each column of link-scale predictions.
pub fn assess(columns: &[Vec<f64>], response: &Response, w: &[f64]) -> Result<Vec<(Measure, Vec<f64>)>> {
    Measure::all_for(response)
        .into_iter()
        .map(|m| {
            let vals = columns
                .iter()
                .map(|c| evaluate(m, c, response, w))
                .collect::<Result<Vec<f64>>>()?;
            Ok((m, vals))
        })
        .collect()
}
