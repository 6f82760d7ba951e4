//! Elastic-net regularization paths for generalized linear models, Cox
//! proportional-hazards models and the simplified relaxed lasso, with
//! cross-validation and model assessment.
//!
//! The pieces stack bottom-up:
//!
//! - [`data`]: dense/CSC design matrices and weighted column kernels
//! - [`family`]: link, variance and deviance for GLM families
//! - [`pwls`]: penalized weighted least squares by coordinate descent
//! - [`path`]: the IRLS outer loop over a warm-started λ sequence
//! - [`cox`]: partial likelihood sweeps, Cox paths and survival curves
//! - [`relaxed`]: unpenalized active-set refits and γ-blending
//! - [`eval`]: cross-validation, performance measures, ROC, confusion tables
//! - [`io`]: the JSON model document and atomic file output

pub mod cox;
pub mod data;
pub mod error;
pub mod eval;
pub mod family;
pub mod io;
pub mod path;
pub mod pwls;
pub mod relaxed;

pub use cox::{fit_cox_path, SurvivalResponse};
pub use data::{ColumnStats, FeatureMatrix, Weights};
pub use error::{Error, Result};
pub use eval::{cv_fit, CvFit, CvOptions, CvResult, Measure};
pub use family::{Family, FamilyKind, GlmFamily, Link};
pub use io::ModelDocument;
pub use path::{
    fit_glm_path, fit_path, FitOptions, LambdaSpec, ModelFamily, PathFit, PredictType, Response, SparseCoefficients,
};
pub use pwls::{PenaltySpec, SolverOptions};
pub use relaxed::{fit_relaxed, RelaxedFit};
