//! The simplified relaxed lasso: unpenalized refits on each distinct active
//! set of a path, blended with the penalized estimate by `γ`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::data::{predict_sparse, FeatureMatrix, Weights};
use crate::error::{Error, Result};
use crate::path::{
    self, check_predict_type, transform_eta, FitOptions, LambdaSpec, PathFit, PredictType, Predictions, Response,
    SparseCoefficients,
};
use crate::pwls::{PenaltySpec, SolverOptions};

/// Default blending grid for relaxed cross-validation.
pub const DEFAULT_GAMMA: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Outcome of one active-set refit.
#[derive(Debug, Clone, PartialEq)]
pub struct Refit {
    pub intercept: f64,
    pub beta: SparseCoefficients,
    /// `false` when the refit was singular or did not converge; the path
    /// then falls back to the penalized estimate at that λ.
    pub ok: bool,
}

/// A penalized path with its active-set refits.
#[derive(Debug, Clone)]
pub struct RelaxedFit {
    pub base: PathFit,
    pub refit_intercepts: Vec<f64>,
    pub refit_coefficients: Vec<SparseCoefficients>,
    /// Per λ: whether the refit succeeded (otherwise it equals the base).
    pub refit_ok: Vec<bool>,
    /// Distinct active sets actually refitted.
    pub refit_count: usize,
    pub warnings: Vec<String>,
}

fn refit_options() -> FitOptions {
    FitOptions {
        lambda: LambdaSpec::Explicit(vec![0.0]),
        solver: SolverOptions {
            tol: 1e-16,
            kkt_tol: 1e-10,
            ..SolverOptions::default()
        },
        outer_tol: 1e-12,
        ..FitOptions::default()
    }
}

/// Unpenalized fit restricted to `active` plus the unpenalized features.
fn refit_active(
    x: &FeatureMatrix,
    response: &Response,
    obs_w: &Weights,
    penalty: &PenaltySpec,
    active: &[usize],
) -> Refit {
    let p = x.n_cols();
    let factors = penalty.raw_factors();
    let mut keep = vec![false; p];
    for &j in active {
        keep[j] = true;
    }
    for j in 0..p {
        if factors[j] == 0.0 {
            keep[j] = true;
        }
    }
    let size = keep.iter().filter(|&&k| k).count() + usize::from(penalty.intercept && !matches!(response, Response::Cox(_)));
    let fallback = Refit {
        intercept: 0.0,
        beta: SparseCoefficients::default(),
        ok: false,
    };
    if size >= x.n_rows() && size > 0 {
        return fallback;
    }
    let opts = FitOptions {
        exclude: (0..p).filter(|&j| !keep[j]).collect(),
        ..refit_options()
    };
    match path::fit_path(x, response, obs_w, penalty, &opts) {
        Ok(fit) if fit.len() == 1 && fit.diagnostics.converged[0] => Refit {
            intercept: fit.intercepts[0],
            beta: fit.coefficients[0].clone(),
            ok: true,
        },
        _ => fallback,
    }
}

/// Fits the penalized path and refits every distinct active set.
pub fn fit_relaxed(
    x: &FeatureMatrix,
    response: &Response,
    obs_w: &Weights,
    penalty: &PenaltySpec,
    opts: &FitOptions,
) -> Result<RelaxedFit> {
    let base = path::fit_path(x, response, obs_w, penalty, opts)?;
    relax(base, x, response, obs_w)
}

/// Adds refits to an existing path fitted on `(x, response, obs_w)`.
pub fn relax(base: PathFit, x: &FeatureMatrix, response: &Response, obs_w: &Weights) -> Result<RelaxedFit> {
    if x.n_cols() != base.n_features || response.len() != x.n_rows() {
        return Err(Error::Dimension {
            what: "relaxation data",
            expected: base.n_obs,
            got: x.n_rows(),
        });
    }
    let mut warnings = Vec::new();
    if base.penalty.alpha < 1.0 {
        warnings.push(format!(
            "relaxing an elastic-net path (alpha = {}) is not recommended; relaxation is intended for the lasso",
            base.penalty.alpha
        ));
    }
    let mut cache: BTreeMap<Vec<usize>, Option<Refit>> = BTreeMap::new();
    for c in &base.coefficients {
        cache.entry(c.indices.clone()).or_insert(None);
    }
    let keys: Vec<Vec<usize>> = cache.keys().cloned().collect();
    let refits: Vec<Refit> = keys
        .par_iter()
        .map(|k| refit_active(x, response, obs_w, &base.penalty, k))
        .collect();
    for (k, r) in keys.into_iter().zip(refits) {
        cache.insert(k, Some(r));
    }
    let m = base.len();
    let mut refit_intercepts = Vec::with_capacity(m);
    let mut refit_coefficients = Vec::with_capacity(m);
    let mut refit_ok = Vec::with_capacity(m);
    for k in 0..m {
        let r = cache[&base.coefficients[k].indices]
            .as_ref()
            .expect("every active set was refitted");
        if r.ok {
            refit_intercepts.push(r.intercept);
            refit_coefficients.push(r.beta.clone());
        } else {
            refit_intercepts.push(base.intercepts[k]);
            refit_coefficients.push(base.coefficients[k].clone());
        }
        refit_ok.push(r.ok);
    }
    if refit_ok.iter().any(|ok| !ok) {
        warnings.push("some active-set refits failed; the penalized estimate is used there".into());
    }
    Ok(RelaxedFit {
        refit_count: cache.len(),
        base,
        refit_intercepts,
        refit_coefficients,
        refit_ok,
        warnings,
    })
}

/// `γ·base + (1−γ)·refit`.
pub fn blend(base: &[f64], refit: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    if base.len() != refit.len() {
        return Err(Error::Dimension {
            what: "refit coefficients",
            expected: base.len(),
            got: refit.len(),
        });
    }
    Ok(base
        .iter()
        .zip(refit)
        .map(|(b, r)| gamma * b + (1.0 - gamma) * r)
        .collect())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("gamma must lie in [0, 1], got {gamma}")))
    }
}

impl RelaxedFit {
    /// Blended coefficients at `s`; the refit path is interpolated in λ
    /// like the base path. Returns `(intercept, beta, clamped)`.
    pub fn coefficients_at(&self, s: f64, gamma: f64) -> Result<(f64, SparseCoefficients, bool)> {
        check_gamma(gamma)?;
        let b = self.base.coefficients_at(s);
        if gamma == 1.0 {
            return Ok((b.intercept, b.beta, b.clamped));
        }
        let r = self.refit_at(s);
        if gamma == 0.0 {
            return Ok((r.0, r.1, b.clamped));
        }
        let intercept = gamma * b.intercept + (1.0 - gamma) * r.0;
        let beta = SparseCoefficients::combine(&b.beta, gamma, &r.1, 1.0 - gamma);
        Ok((intercept, beta, b.clamped))
    }

    fn refit_at(&self, s: f64) -> (f64, SparseCoefficients) {
        match path::interpolation_point(&self.base.lambda, s) {
            path::Bracket::Exact(k, _) => (self.refit_intercepts[k], self.refit_coefficients[k].clone()),
            path::Bracket::Between(k, frac) => (
                (1.0 - frac) * self.refit_intercepts[k] + frac * self.refit_intercepts[k + 1],
                SparseCoefficients::combine(
                    &self.refit_coefficients[k],
                    1.0 - frac,
                    &self.refit_coefficients[k + 1],
                    frac,
                ),
            ),
        }
    }

    /// Predictions from blended coefficients, one column per `s`.
    pub fn predict(&self, x: &FeatureMatrix, s: &[f64], gamma: f64, kind: PredictType) -> Result<Predictions> {
        if x.n_cols() != self.base.n_features {
            return Err(Error::Dimension {
                what: "prediction matrix columns",
                expected: self.base.n_features,
                got: x.n_cols(),
            });
        }
        check_predict_type(&self.base.family, kind)?;
        let mut values = Vec::with_capacity(s.len());
        let mut clamped = Vec::with_capacity(s.len());
        for &si in s {
            let (b0, beta, c) = self.coefficients_at(si, gamma)?;
            let eta = predict_sparse(x, &beta.indices, &beta.values, b0);
            values.push(transform_eta(&self.base.family, eta, kind));
            clamped.push(c);
        }
        Ok(Predictions { values, clamped })
    }
}

/// Relaxed predictions; see [`RelaxedFit::predict`].
pub fn predict_relaxed(
    fit: &RelaxedFit,
    x: &FeatureMatrix,
    s: &[f64],
    gamma: f64,
    kind: PredictType,
) -> Result<Predictions> {
    fit.predict(x, s, gamma, kind)
}
