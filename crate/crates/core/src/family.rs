//! One-parameter GLM families described by a link, a variance function, a
//! unit deviance and an initialization rule.
//!
//! Built-in families are values of [`Family`]; anything else can be
//! supplied as a [`CustomFamily`] assembled from the same ingredients. The
//! path solvers only see the [`GlmFamily`] trait.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Lower clamp for binomial means (upper clamp is `1 - BINOMIAL_EPS`).
pub const BINOMIAL_EPS: f64 = 1e-5;
/// Lower clamp for families whose mean must be strictly positive.
pub const POSITIVE_EPS: f64 = 1e-10;

/// The interface the IRLS path solver needs from a family.
pub trait GlmFamily: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    /// `η = g(μ)`.
    fn link(&self, mu: f64) -> f64;
    /// `μ = g⁻¹(η)`.
    fn link_inverse(&self, eta: f64) -> f64;
    /// `dμ/dη` evaluated at `η`.
    fn mu_eta(&self, eta: f64) -> f64;
    fn variance(&self, mu: f64) -> f64;
    /// Per-observation deviance contribution `d(y, μ)`.
    fn unit_deviance(&self, y: f64, mu: f64) -> f64;
    /// Numerical guard applied to means before variance/deviance evaluation.
    fn clamp_mu(&self, mu: f64) -> f64 {
        mu
    }
    fn valid_mu(&self, mu: f64) -> bool;
    fn valid_response(&self, y: f64) -> bool;
    /// Strictly interior starting mean for one observation.
    fn initial_mu(&self, y: f64, weight: f64) -> f64;
    /// True for 0/1 responses (enables class/AUC measures).
    fn is_binary(&self) -> bool {
        false
    }
    /// Serializable description; `None` for families that cannot be
    /// reconstructed from a name.
    fn descriptor(&self) -> Option<FamilyDescriptor> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    Identity,
    Log,
    Logit,
    Probit,
    Inverse,
    /// `η = 1/μ²`
    InverseSquare,
}

impl Link {
    pub fn eval(self, mu: f64) -> f64 {
        match self {
            Link::Identity => mu,
            Link::Log => mu.ln(),
            Link::Logit => (mu / (1.0 - mu)).ln(),
            Link::Probit => normal_quantile(mu),
            Link::Inverse => 1.0 / mu,
            Link::InverseSquare => 1.0 / (mu * mu),
        }
    }

    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Log => eta.exp(),
            Link::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            Link::Probit => normal_cdf(eta),
            Link::Inverse => 1.0 / eta,
            Link::InverseSquare => 1.0 / eta.sqrt(),
        }
    }

    pub fn mu_eta(self, eta: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Log => eta.exp(),
            Link::Logit => {
                let e = (-eta.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            Link::Probit => normal_pdf(eta),
            Link::Inverse => -1.0 / (eta * eta),
            Link::InverseSquare => -0.5 * eta.powf(-1.5),
        }
    }

    /// Whether `eta` lies in the domain of the inverse link.
    pub fn valid_eta(self, eta: f64) -> bool {
        match self {
            Link::Inverse => eta != 0.0 && eta.is_finite(),
            Link::InverseSquare => eta > 0.0 && eta.is_finite(),
            _ => eta.is_finite(),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "identity" => Link::Identity,
            "log" => Link::Log,
            "logit" => Link::Logit,
            "probit" => Link::Probit,
            "inverse" => Link::Inverse,
            "inverse-square" | "1/mu^2" | "1/mu2" => Link::InverseSquare,
            _ => return None,
        })
    }

    fn as_str(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Log => "log",
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Inverse => "inverse",
            Link::InverseSquare => "inverse-square",
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal quantile: a starting point from the inverse
/// complementary error function polished by Newton steps on [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return match p {
            0.0 => f64::NEG_INFINITY,
            1.0 => f64::INFINITY,
            _ => f64::NAN,
        };
    }
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..3 {
        let d = normal_pdf(x);
        if d <= 0.0 {
            break;
        }
        let step = (normal_cdf(x) - p) / d;
        x -= step;
        if step.abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum FamilyKind {
    Gaussian,
    Binomial,
    Quasibinomial,
    Poisson,
    Quasipoisson,
    NegativeBinomial { theta: f64 },
    Gamma,
    InverseGaussian,
    Tweedie { power: f64 },
}

impl FamilyKind {
    fn default_link(self) -> Link {
        match self {
            FamilyKind::Gaussian => Link::Identity,
            FamilyKind::Binomial | FamilyKind::Quasibinomial => Link::Logit,
            _ => Link::Log,
        }
    }

    fn label(self) -> String {
        match self {
            FamilyKind::Gaussian => "gaussian".into(),
            FamilyKind::Binomial => "binomial".into(),
            FamilyKind::Quasibinomial => "quasibinomial".into(),
            FamilyKind::Poisson => "poisson".into(),
            FamilyKind::Quasipoisson => "quasipoisson".into(),
            FamilyKind::NegativeBinomial { theta } => format!("negative-binomial:theta={theta}"),
            FamilyKind::Gamma => "gamma".into(),
            FamilyKind::InverseGaussian => "inverse-gaussian".into(),
            FamilyKind::Tweedie { power } => format!("tweedie:q={power}"),
        }
    }

    fn is_binomial(self) -> bool {
        matches!(self, FamilyKind::Binomial | FamilyKind::Quasibinomial)
    }

    /// Means must be strictly positive.
    fn positive_mean(self) -> bool {
        match self {
            FamilyKind::Gaussian => false,
            FamilyKind::Binomial | FamilyKind::Quasibinomial => false,
            FamilyKind::Tweedie { power } => power != 0.0,
            _ => true,
        }
    }
}

/// Serialized family identity: kind plus link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyDescriptor {
    #[serde(flatten)]
    pub kind: FamilyKind,
    pub link: Link,
}

/// A built-in family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Family {
    kind: FamilyKind,
    link: Link,
}

impl Family {
    pub fn new(kind: FamilyKind) -> Result<Self> {
        Self::with_link(kind, kind.default_link())
    }

    pub fn with_link(kind: FamilyKind, link: Link) -> Result<Self> {
        match kind {
            FamilyKind::NegativeBinomial { theta } if !(theta > 0.0 && theta.is_finite()) => {
                return Err(Error::InvalidFamily(format!(
                    "negative binomial theta must be positive, got {theta}"
                )))
            }
            FamilyKind::Tweedie { power } if !(power == 0.0 || (1.0..=3.0).contains(&power)) => {
                return Err(Error::InvalidFamily(format!(
                    "tweedie variance power must be 0 or in [1, 3], got {power}"
                )))
            }
            _ => {}
        }
        Ok(Self { kind, link })
    }

    pub fn gaussian() -> Self {
        Self::new(FamilyKind::Gaussian).unwrap()
    }

    pub fn binomial() -> Self {
        Self::new(FamilyKind::Binomial).unwrap()
    }

    pub fn poisson() -> Self {
        Self::new(FamilyKind::Poisson).unwrap()
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn link_kind(&self) -> Link {
        self.link
    }

    pub fn from_descriptor(d: FamilyDescriptor) -> Result<Self> {
        Self::with_link(d.kind, d.link)
    }

    pub fn into_shared(self) -> Arc<dyn GlmFamily> {
        Arc::new(self)
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Parses `name[:option[,option]]`, where an option is a link name,
    /// `link=<name>`, `theta=<v>` (also `θ=<v>`) or `q=<v>` (also
    /// `power=<v>`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, opts) = match s.split_once(':') {
            Some((a, b)) => (a, b),
            None => (s, ""),
        };
        let mut link = None;
        let mut theta = None;
        let mut power = None;
        for opt in opts.split(',').map(str::trim).filter(|o| !o.is_empty()) {
            if let Some((key, value)) = opt.split_once('=') {
                let parse = |v: &str| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidFamily(format!("bad numeric value in option `{opt}`"))
                    })
                };
                match key.trim() {
                    "theta" | "θ" => theta = Some(parse(value)?),
                    "q" | "power" => power = Some(parse(value)?),
                    "link" => {
                        link = Some(Link::parse(value.trim()).ok_or_else(|| {
                            Error::InvalidFamily(format!("unknown link `{value}`"))
                        })?)
                    }
                    other => {
                        return Err(Error::InvalidFamily(format!("unknown option `{other}`")))
                    }
                }
            } else {
                link = Some(
                    Link::parse(opt)
                        .ok_or_else(|| Error::InvalidFamily(format!("unknown link `{opt}`")))?,
                );
            }
        }
        let kind = match name {
            "gaussian" => FamilyKind::Gaussian,
            "binomial" => FamilyKind::Binomial,
            "quasibinomial" => FamilyKind::Quasibinomial,
            "poisson" => FamilyKind::Poisson,
            "quasipoisson" => FamilyKind::Quasipoisson,
            "negative-binomial" | "negbin" => FamilyKind::NegativeBinomial {
                theta: theta.ok_or_else(|| {
                    Error::InvalidFamily("negative-binomial requires theta=<value>".into())
                })?,
            },
            "gamma" => FamilyKind::Gamma,
            "inverse-gaussian" => FamilyKind::InverseGaussian,
            "tweedie" => FamilyKind::Tweedie {
                power: power
                    .ok_or_else(|| Error::InvalidFamily("tweedie requires q=<value>".into()))?,
            },
            other => return Err(Error::InvalidFamily(format!("unknown family `{other}`"))),
        };
        match link {
            Some(l) => Family::with_link(kind, l),
            None => Family::new(kind),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = self.kind.label();
        if self.link == self.kind.default_link() {
            write!(f, "{label}")
        } else if label.contains(':') {
            write!(f, "{label},link={}", self.link.as_str())
        } else {
            write!(f, "{label}:{}", self.link.as_str())
        }
    }
}

/// `y log(y/μ)` with `0 log 0 = 0`.
fn ylogy(y: f64, mu: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        y * (y / mu).ln()
    }
}

impl GlmFamily for Family {
    fn name(&self) -> String {
        self.to_string()
    }

    fn link(&self, mu: f64) -> f64 {
        self.link.eval(mu)
    }

    fn link_inverse(&self, eta: f64) -> f64 {
        self.link.inverse(eta)
    }

    fn mu_eta(&self, eta: f64) -> f64 {
        self.link.mu_eta(eta)
    }

    fn variance(&self, mu: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 1.0,
            FamilyKind::Binomial | FamilyKind::Quasibinomial => mu * (1.0 - mu),
            FamilyKind::Poisson | FamilyKind::Quasipoisson => mu,
            FamilyKind::NegativeBinomial { theta } => mu + mu * mu / theta,
            FamilyKind::Gamma => mu * mu,
            FamilyKind::InverseGaussian => mu * mu * mu,
            FamilyKind::Tweedie { power } => mu.powf(power),
        }
    }

    fn unit_deviance(&self, y: f64, mu: f64) -> f64 {
        let d = match self.kind {
            FamilyKind::Gaussian => (y - mu) * (y - mu),
            FamilyKind::Binomial | FamilyKind::Quasibinomial => {
                2.0 * (ylogy(y, mu) + ylogy(1.0 - y, 1.0 - mu))
            }
            FamilyKind::Poisson | FamilyKind::Quasipoisson => 2.0 * (ylogy(y, mu) - (y - mu)),
            FamilyKind::NegativeBinomial { theta } => {
                2.0 * (ylogy(y, mu) - (y + theta) * ((y + theta) / (mu + theta)).ln())
            }
            FamilyKind::Gamma => 2.0 * (-(y / mu).ln() + (y - mu) / mu),
            FamilyKind::InverseGaussian => (y - mu) * (y - mu) / (mu * mu * y),
            FamilyKind::Tweedie { power } => tweedie_unit_deviance(y, mu, power),
        };
        // rounding can produce tiny negatives near the saturated fit
        d.max(0.0)
    }

    fn clamp_mu(&self, mu: f64) -> f64 {
        if self.kind.is_binomial() {
            mu.clamp(BINOMIAL_EPS, 1.0 - BINOMIAL_EPS)
        } else if self.kind.positive_mean() {
            mu.max(POSITIVE_EPS)
        } else {
            mu
        }
    }

    fn valid_mu(&self, mu: f64) -> bool {
        if !mu.is_finite() {
            return false;
        }
        if self.kind.is_binomial() {
            mu > 0.0 && mu < 1.0
        } else if self.kind.positive_mean() {
            mu > 0.0
        } else {
            true
        }
    }

    fn valid_response(&self, y: f64) -> bool {
        if !y.is_finite() {
            return false;
        }
        match self.kind {
            FamilyKind::Gaussian => true,
            FamilyKind::Binomial | FamilyKind::Quasibinomial => (0.0..=1.0).contains(&y),
            FamilyKind::Poisson | FamilyKind::Quasipoisson | FamilyKind::NegativeBinomial { .. } => {
                y >= 0.0
            }
            FamilyKind::Gamma | FamilyKind::InverseGaussian => y > 0.0,
            FamilyKind::Tweedie { power } => {
                if power == 0.0 {
                    true
                } else if power < 2.0 {
                    y >= 0.0
                } else {
                    y > 0.0
                }
            }
        }
    }

    fn initial_mu(&self, y: f64, weight: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => y,
            FamilyKind::Tweedie { power } if power == 0.0 => y,
            FamilyKind::Binomial | FamilyKind::Quasibinomial => (weight * y + 0.5) / (weight + 1.0),
            _ => y + 0.1,
        }
    }

    fn is_binary(&self) -> bool {
        self.kind.is_binomial()
    }

    fn descriptor(&self) -> Option<FamilyDescriptor> {
        Some(FamilyDescriptor {
            kind: self.kind,
            link: self.link,
        })
    }
}

fn tweedie_unit_deviance(y: f64, mu: f64, q: f64) -> f64 {
    if q == 0.0 {
        (y - mu) * (y - mu)
    } else if q == 1.0 {
        2.0 * (ylogy(y, mu) - (y - mu))
    } else if q == 2.0 {
        2.0 * (-(y / mu).ln() + (y - mu) / mu)
    } else {
        let a = if y == 0.0 {
            0.0
        } else {
            y.powf(2.0 - q) / ((1.0 - q) * (2.0 - q))
        };
        2.0 * (a - y * mu.powf(1.0 - q) / (1.0 - q) + mu.powf(2.0 - q) / (2.0 - q))
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type PairFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Predicate = Arc<dyn Fn(f64) -> bool + Send + Sync>;

/// A user-defined family assembled from closures.
#[derive(Clone)]
pub struct CustomFamily {
    name: String,
    link: ScalarFn,
    link_inverse: ScalarFn,
    mu_eta: ScalarFn,
    variance: ScalarFn,
    unit_deviance: PairFn,
    initial_mu: PairFn,
    valid_mu: Predicate,
    valid_response: Predicate,
    clamp_mu: Option<ScalarFn>,
}

impl fmt::Debug for CustomFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFamily").field("name", &self.name).finish()
    }
}

impl CustomFamily {
    /// Starts from a built-in link; every other ingredient must be given.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        link: impl Fn(f64) -> f64 + Send + Sync + 'static,
        link_inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
        mu_eta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        variance: impl Fn(f64) -> f64 + Send + Sync + 'static,
        unit_deviance: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        initial_mu: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            link: Arc::new(link),
            link_inverse: Arc::new(link_inverse),
            mu_eta: Arc::new(mu_eta),
            variance: Arc::new(variance),
            unit_deviance: Arc::new(unit_deviance),
            initial_mu: Arc::new(initial_mu),
            valid_mu: Arc::new(f64::is_finite),
            valid_response: Arc::new(f64::is_finite),
            clamp_mu: None,
        }
    }

    pub fn with_valid_mu(mut self, f: impl Fn(f64) -> bool + Send + Sync + 'static) -> Self {
        self.valid_mu = Arc::new(f);
        self
    }

    pub fn with_valid_response(mut self, f: impl Fn(f64) -> bool + Send + Sync + 'static) -> Self {
        self.valid_response = Arc::new(f);
        self
    }

    pub fn with_clamp(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.clamp_mu = Some(Arc::new(f));
        self
    }
}

impl GlmFamily for CustomFamily {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn link(&self, mu: f64) -> f64 {
        (self.link)(mu)
    }
    fn link_inverse(&self, eta: f64) -> f64 {
        (self.link_inverse)(eta)
    }
    fn mu_eta(&self, eta: f64) -> f64 {
        (self.mu_eta)(eta)
    }
    fn variance(&self, mu: f64) -> f64 {
        (self.variance)(mu)
    }
    fn unit_deviance(&self, y: f64, mu: f64) -> f64 {
        (self.unit_deviance)(y, mu)
    }
    fn clamp_mu(&self, mu: f64) -> f64 {
        match &self.clamp_mu {
            Some(f) => f(mu),
            None => mu,
        }
    }
    fn valid_mu(&self, mu: f64) -> bool {
        (self.valid_mu)(mu)
    }
    fn valid_response(&self, y: f64) -> bool {
        (self.valid_response)(y)
    }
    fn initial_mu(&self, y: f64, weight: f64) -> f64 {
        (self.initial_mu)(y, weight)
    }
}

/// `g(μ)` elementwise; means are clamped first and must then be valid.
pub fn link_eval(f: &dyn GlmFamily, mu: &[f64]) -> Result<Vec<f64>> {
    mu.iter()
        .map(|&m| {
            let m = if m.is_nan() { m } else { f.clamp_mu(m) };
            if f.valid_mu(m) {
                Ok(f.link(m))
            } else {
                Err(Error::InvalidFamily(format!(
                    "mean {m} outside the valid range of {}",
                    f.name()
                )))
            }
        })
        .collect()
}

pub fn link_inverse(f: &dyn GlmFamily, eta: &[f64]) -> Vec<f64> {
    eta.iter().map(|&e| f.link_inverse(e)).collect()
}

pub fn mu_eta(f: &dyn GlmFamily, eta: &[f64]) -> Vec<f64> {
    eta.iter().map(|&e| f.mu_eta(e)).collect()
}

pub fn variance(f: &dyn GlmFamily, mu: &[f64]) -> Vec<f64> {
    mu.iter().map(|&m| f.variance(f.clamp_mu(m))).collect()
}

/// Working response and IRLS weights at the current linear predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct Working {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub mu: Vec<f64>,
}

/// `z = η + (y − μ)/μ'(η)`, `w = obs_w · μ'(η)² / V(μ)`.
pub fn irls_working(f: &dyn GlmFamily, y: &[f64], eta: &[f64], obs_w: &[f64]) -> Result<Working> {
    let n = y.len();
    if eta.len() != n || obs_w.len() != n {
        return Err(Error::Dimension {
            what: "working inputs",
            expected: n,
            got: eta.len().min(obs_w.len()),
        });
    }
    let mut z = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut mus = Vec::with_capacity(n);
    for i in 0..n {
        let mu = f.clamp_mu(f.link_inverse(eta[i]));
        let mut d = f.mu_eta(eta[i]);
        if d.abs() < f64::EPSILON {
            d = f64::EPSILON.copysign(if d == 0.0 { 1.0 } else { d });
        }
        let v = f.variance(mu);
        let wi = obs_w[i] * d * d / v;
        if !wi.is_finite() || wi < 0.0 {
            return Err(Error::InvalidFamily(format!(
                "non-finite working weight at observation {i} for family {}",
                f.name()
            )));
        }
        z.push(eta[i] + (y[i] - mu) / d);
        w.push(wi);
        mus.push(mu);
    }
    Ok(Working { z, w, mu: mus })
}

/// Total weighted deviance `Σ obs_w_i d(y_i, μ_i)`.
pub fn deviance(f: &dyn GlmFamily, y: &[f64], mu: &[f64], obs_w: &[f64]) -> Result<f64> {
    if mu.len() != y.len() || obs_w.len() != y.len() {
        return Err(Error::Dimension {
            what: "deviance inputs",
            expected: y.len(),
            got: mu.len().min(obs_w.len()),
        });
    }
    let mut total = 0.0;
    for i in 0..y.len() {
        if obs_w[i] == 0.0 {
            continue;
        }
        let m = f.clamp_mu(mu[i]);
        if !f.valid_mu(m) {
            return Err(Error::InvalidFamily(format!(
                "mean {m} outside the valid range of {}",
                f.name()
            )));
        }
        total += obs_w[i] * f.unit_deviance(y[i], m);
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("deviance"));
    }
    Ok(total)
}

/// Rejects responses outside the family's domain.
pub fn check_response(f: &dyn GlmFamily, y: &[f64]) -> Result<()> {
    match y.iter().position(|&v| !f.valid_response(v)) {
        Some(row) => Err(Error::InvalidResponse {
            family: f.name(),
            row,
            value: y[row],
        }),
        None => Ok(()),
    }
}

/// Starting means and the intercept `g(weighted mean of μ0)`.
pub fn initialize(f: &dyn GlmFamily, y: &[f64], obs_w: &[f64]) -> Result<(Vec<f64>, f64)> {
    let total: f64 = obs_w.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidWeights("all weights are zero".into()));
    }
    check_response(f, y)?;
    let mu0: Vec<f64> = y
        .iter()
        .zip(obs_w)
        .map(|(&yi, &wi)| f.initial_mu(yi, wi))
        .collect();
    let mean = mu0.iter().zip(obs_w).map(|(m, w)| m * w).sum::<f64>() / total;
    Ok((mu0, f.link(f.clamp_mu(mean))))
}
