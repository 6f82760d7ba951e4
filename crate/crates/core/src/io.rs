//! The serialized model document and atomic file output.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! loaded model predicts bit-for-bit like the fit it was saved from, and
//! serialize → parse → serialize reproduces the same bytes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cox::{breslow_hazard, BaselineHazard, StratumHazard, SurvivalResponse};
use crate::data::{predict_sparse, ColumnStats, FeatureMatrix, Weights};
use crate::error::{Error, Result};
use crate::eval::{CvResult, Measure};
use crate::family::{Family, FamilyDescriptor};
use crate::path::{self, Bracket, ModelFamily, PathDiagnostics, PathFit, SparseCoefficients};
use crate::pwls::PenaltySpec;
use crate::relaxed::RelaxedFit;

pub const SCHEMA_VERSION: u32 = 1;

/// `(lambda_index, feature_index, value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet(pub usize, pub usize, pub f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Glm,
    Cox,
}

/// Penalty settings; infinite bounds are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyDocument {
    pub alpha: f64,
    pub penalty_factors: Vec<f64>,
    pub rescale_factors: bool,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub standardize: bool,
    pub intercept: bool,
}

impl PenaltyDocument {
    fn from_spec(p: &PenaltySpec) -> Self {
        let finite = |v: &[f64]| v.iter().map(|&b| b.is_finite().then_some(b)).collect();
        Self {
            alpha: p.alpha,
            penalty_factors: p.raw_factors().to_vec(),
            rescale_factors: p.rescales_factors(),
            lower: finite(p.lower()),
            upper: finite(p.upper()),
            standardize: p.standardize,
            intercept: p.intercept,
        }
    }

    fn to_spec(&self) -> PenaltySpec {
        let lower = self.lower.iter().map(|b| b.unwrap_or(f64::NEG_INFINITY)).collect();
        let upper = self.upper.iter().map(|b| b.unwrap_or(f64::INFINITY)).collect();
        let spec = PenaltySpec::new(self.penalty_factors.len())
            .with_alpha(self.alpha)
            .with_penalty_factors(self.penalty_factors.clone())
            .with_lower(lower)
            .with_upper(upper)
            .with_standardize(self.standardize)
            .with_intercept(self.intercept);
        if self.rescale_factors {
            spec
        } else {
            spec.without_factor_rescaling()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedDocument {
    pub gamma: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub coefficients: Vec<Triplet>,
    pub refit_ok: Vec<bool>,
    pub refit_count: usize,
}

/// Breslow baseline hazard at every λ of the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxDocument {
    pub strata: Vec<String>,
    /// Distinct failure times per stratum.
    pub failure_times: Vec<Vec<f64>>,
    /// `hazard_increments[k][s][t]` at `lambda[k]`.
    pub hazard_increments: Vec<Vec<Vec<f64>>>,
}

/// Selected tuning values from cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    pub measure: Measure,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma_1se: Option<f64>,
}

impl CvSelection {
    pub fn from_result(cv: &CvResult) -> Self {
        match &cv.relaxed {
            Some(r) => Self {
                measure: cv.measure,
                lambda_min: r.lambda_min,
                lambda_1se: r.lambda_1se,
                gamma_min: Some(r.gamma_min),
                gamma_1se: Some(r.gamma_1se),
            },
            None => Self {
                measure: cv.measure,
                lambda_min: cv.lambda_min,
                lambda_1se: cv.lambda_1se,
                gamma_min: None,
                gamma_1se: None,
            },
        }
    }
}

/// A fitted path in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub model: ModelKind,
    /// Set for GLM models.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<FamilyDescriptor>,
    pub penalty: PenaltyDocument,
    pub n_obs: usize,
    pub lambda: Vec<f64>,
    pub lambda_max: Option<f64>,
    pub intercepts: Vec<f64>,
    pub coefficients: Vec<Triplet>,
    pub feature_names: Vec<String>,
    pub column_stats: ColumnStats,
    pub dev_ratio: Vec<f64>,
    pub null_deviance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relaxed: Option<RelaxedDocument>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cox: Option<CoxDocument>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cv: Option<CvSelection>,
}

fn triplets(coefs: &[SparseCoefficients]) -> Vec<Triplet> {
    coefs
        .iter()
        .enumerate()
        .flat_map(|(k, c)| c.indices.iter().zip(&c.values).map(move |(&j, &v)| Triplet(k, j, v)))
        .collect()
}

fn from_triplets(t: &[Triplet], m: usize, p: usize, what: &str) -> Result<Vec<SparseCoefficients>> {
    let mut out = vec![SparseCoefficients::default(); m];
    for &Triplet(k, j, v) in t {
        if k >= m || j >= p {
            return Err(Error::Format(format!(
                "{what} triplet ({k}, {j}) outside a {m} x {p} path"
            )));
        }
        let c = &mut out[k];
        if c.indices.last().is_some_and(|&last| last >= j) {
            return Err(Error::Format(format!("{what} triplets are not sorted at ({k}, {j})")));
        }
        c.indices.push(j);
        c.values.push(v);
    }
    Ok(out)
}

fn non_finite_check(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Format(format!("{what} contains non-finite values")))
    }
}

impl ModelDocument {
    /// Document for a GLM or Cox path. Feature names default to `x0, x1, …`.
    pub fn from_fit(fit: &PathFit, feature_names: Option<Vec<String>>) -> Result<Self> {
        let (model, family) = match &fit.family {
            ModelFamily::Cox => (ModelKind::Cox, None),
            ModelFamily::Glm(f) => {
                let d = f.descriptor().ok_or_else(|| {
                    Error::InvalidFamily(format!("family {} cannot be serialized", f.name()))
                })?;
                (ModelKind::Glm, Some(d))
            }
        };
        let feature_names =
            feature_names.unwrap_or_else(|| (0..fit.n_features).map(|j| format!("x{j}")).collect());
        if feature_names.len() != fit.n_features {
            return Err(Error::Dimension {
                what: "feature names",
                expected: fit.n_features,
                got: feature_names.len(),
            });
        }
        non_finite_check("dev_ratio", &fit.dev_ratio)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            model,
            family,
            penalty: PenaltyDocument::from_spec(&fit.penalty),
            n_obs: fit.n_obs,
            lambda: fit.lambda.clone(),
            lambda_max: fit.lambda_max,
            intercepts: fit.intercepts.clone(),
            coefficients: triplets(&fit.coefficients),
            feature_names,
            column_stats: fit.stats.clone(),
            dev_ratio: fit.dev_ratio.clone(),
            null_deviance: fit.null_deviance,
            relaxed: None,
            cox: None,
            cv: None,
        })
    }

    /// Adds the refit path and the blending grid used to tune it.
    pub fn with_relaxed(mut self, r: &RelaxedFit, gamma: &[f64]) -> Self {
        self.relaxed = Some(RelaxedDocument {
            gamma: gamma.to_vec(),
            intercepts: r.refit_intercepts.clone(),
            coefficients: triplets(&r.refit_coefficients),
            refit_ok: r.refit_ok.clone(),
            refit_count: r.refit_count,
        });
        self
    }

    /// Adds the baseline hazard at each λ, computed from the training data.
    pub fn with_cox_hazards(mut self, fit: &PathFit, x: &FeatureMatrix, surv: &SurvivalResponse, obs_w: &Weights) -> Result<Self> {
        if !fit.family.is_cox() {
            return Err(Error::InvalidArgument("baseline hazards require a Cox model".into()));
        }
        let mut increments = Vec::with_capacity(fit.len());
        let mut first: Option<BaselineHazard> = None;
        for c in &fit.coefficients {
            let eta = predict_sparse(x, &c.indices, &c.values, 0.0);
            let h = breslow_hazard(surv, &eta, obs_w.as_slice())?;
            increments.push(h.strata.iter().map(|s| s.increments.clone()).collect());
            first.get_or_insert(h);
        }
        let first = first.ok_or(Error::Empty("path"))?;
        self.cox = Some(CoxDocument {
            strata: first.strata.iter().map(|s| s.label.clone()).collect(),
            failure_times: first.strata.iter().map(|s| s.times.clone()).collect(),
            hazard_increments: increments,
        });
        Ok(self)
    }

    pub fn with_cv(mut self, cv: &CvResult) -> Self {
        self.cv = Some(CvSelection::from_result(cv));
        self
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let m = self.lambda.len();
        let p = self.feature_names.len();
        if m == 0 {
            return Err(Error::Format("empty lambda path".into()));
        }
        if self.lambda.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::Format("lambda is not strictly decreasing".into()));
        }
        for (what, len) in [("intercepts", self.intercepts.len()), ("dev_ratio", self.dev_ratio.len())] {
            if len != m {
                return Err(Error::Format(format!("{what} has length {len}, expected {m}")));
            }
        }
        let pen = &self.penalty;
        for (what, len) in [
            ("penalty_factors", pen.penalty_factors.len()),
            ("lower", pen.lower.len()),
            ("upper", pen.upper.len()),
            ("column means", self.column_stats.means.len()),
            ("column scales", self.column_stats.scales.len()),
        ] {
            if len != p {
                return Err(Error::Format(format!("{what} has length {len}, expected {p}")));
            }
        }
        match (self.model, &self.family) {
            (ModelKind::Glm, None) => return Err(Error::Format("GLM model without a family".into())),
            (ModelKind::Cox, Some(_)) => return Err(Error::Format("Cox model with a GLM family".into())),
            _ => {}
        }
        if let Some(r) = &self.relaxed {
            if r.intercepts.len() != m || r.refit_ok.len() != m {
                return Err(Error::Format("relaxed block does not match the path length".into()));
            }
        }
        if let Some(c) = &self.cox {
            if self.model != ModelKind::Cox {
                return Err(Error::Format("cox block on a GLM model".into()));
            }
            if c.failure_times.len() != c.strata.len() || c.hazard_increments.len() != m {
                return Err(Error::Format("cox block does not match strata or path length".into()));
            }
            for h in &c.hazard_increments {
                if h.len() != c.strata.len() || h.iter().zip(&c.failure_times).any(|(a, t)| a.len() != t.len()) {
                    return Err(Error::Format("hazard increments do not match failure times".into()));
                }
            }
        }
        Ok(())
    }

    /// Rebuilds the fitted path. Solver diagnostics are not stored.
    pub fn to_fit(&self) -> Result<PathFit> {
        self.validate()?;
        let m = self.lambda.len();
        let p = self.feature_names.len();
        let family = match self.family {
            Some(d) => ModelFamily::Glm(Family::from_descriptor(d)?.into_shared()),
            None => ModelFamily::Cox,
        };
        Ok(PathFit {
            family,
            lambda: self.lambda.clone(),
            intercepts: self.intercepts.clone(),
            coefficients: from_triplets(&self.coefficients, m, p, "coefficient")?,
            dev_ratio: self.dev_ratio.clone(),
            null_deviance: self.null_deviance,
            penalty: self.penalty.to_spec(),
            stats: self.column_stats.clone(),
            n_obs: self.n_obs,
            n_features: p,
            lambda_max: self.lambda_max,
            diagnostics: PathDiagnostics {
                passes: vec![0; m],
                outer_iterations: vec![0; m],
                converged: vec![true; m],
                objective_trace: vec![Vec::new(); m],
                truncated: false,
            },
        })
    }

    /// Rebuilds the relaxed fit when the document carries one.
    pub fn to_relaxed(&self) -> Result<Option<RelaxedFit>> {
        let Some(r) = &self.relaxed else {
            return Ok(None);
        };
        let base = self.to_fit()?;
        let refit_coefficients = from_triplets(&r.coefficients, base.len(), base.n_features, "refit")?;
        let mut warnings = Vec::new();
        if base.penalty.alpha < 1.0 {
            warnings.push(format!(
                "relaxing an elastic-net path (alpha = {}) is not recommended; relaxation is intended for the lasso",
                base.penalty.alpha
            ));
        }
        Ok(Some(RelaxedFit {
            base,
            refit_intercepts: r.intercepts.clone(),
            refit_coefficients,
            refit_ok: r.refit_ok.clone(),
            refit_count: r.refit_count,
            warnings,
        }))
    }

    /// Baseline hazard at `s`, interpolated linearly in λ between stored
    /// path points and clamped to the path ends.
    pub fn hazard_at(&self, s: f64) -> Result<BaselineHazard> {
        self.validate()?;
        let c = self
            .cox
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("model has no baseline hazard".into()))?;
        let build = |k: usize| BaselineHazard {
            strata: c
                .strata
                .iter()
                .zip(&c.failure_times)
                .zip(&c.hazard_increments[k])
                .map(|((label, times), inc)| StratumHazard {
                    label: label.clone(),
                    times: times.clone(),
                    cumulative: crate::cox::cumulate(inc),
                    increments: inc.clone(),
                })
                .collect(),
        };
        Ok(match path::interpolation_point(&self.lambda, s) {
            Bracket::Exact(k, _) => build(k),
            Bracket::Between(k, frac) => BaselineHazard::interpolate(&build(k), &build(k + 1), frac),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed write never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
