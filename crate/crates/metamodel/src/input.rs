//! Probabilistic input models: marginal distributions joined by a Gaussian
//! copula, with the transform between physical coordinates and independent
//! standard-normal coordinates.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stdnorm;

/// CDF values are clipped to this range before applying Φ⁻¹ so that points
/// on the faces of the unit hypercube do not map to infinities.
const CDF_CLIP: f64 = 1e-15;

const EULER_GAMMA: f64 = 0.5772156649015328606;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("coefficient of variation must be strictly positive, got {0}")]
    NonPositiveCov(f64),
    #[error("moment parameterization not supported for family {0}")]
    UnsupportedMoments(&'static str),
    #[error("component {index} value {value} is outside the marginal support")]
    OutOfSupport { index: usize, value: f64 },
    #[error("non-finite coordinate at component {0}")]
    NonFinite(usize),
    #[error("hypercube coordinate at ({row}, {col}) must lie strictly inside (0,1), got {value}")]
    OutsideHypercube { row: usize, col: usize, value: f64 },
    #[error("correlation matrix must be symmetric positive-definite with unit diagonal: {0}")]
    BadCorrelation(String),
    #[error("expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input-model document: {0}")]
    BadDocument(String),
}

/// Supported marginal families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginalFamily {
    Normal,
    Lognormal,
    Uniform,
    Gumbel,
    /// Gaussian truncated to [0, ∞); parameters refer to the underlying
    /// untruncated law.
    TruncatedNormal,
}

impl MarginalFamily {
    fn name(self) -> &'static str {
        match self {
            MarginalFamily::Normal => "normal",
            MarginalFamily::Lognormal => "lognormal",
            MarginalFamily::Uniform => "uniform",
            MarginalFamily::Gumbel => "gumbel",
            MarginalFamily::TruncatedNormal => "truncated-normal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Dist {
    Normal { mean: f64, std: f64 },
    Lognormal { log_location: f64, log_scale: f64 },
    Uniform { lower: f64, upper: f64 },
    /// Max-type (right-skewed) Gumbel.
    Gumbel { location: f64, scale: f64 },
    TruncatedNormal { mean: f64, std: f64 },
}

/// A one-dimensional marginal distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    dist: Dist,
    label: String,
}

impl Marginal {
    pub fn normal(mean: f64, std: f64) -> Result<Self, InputError> {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(InputError::InvalidParameter(format!(
                "normal requires finite mean and std > 0, got mean={mean}, std={std}"
            )));
        }
        Ok(Self {
            dist: Dist::Normal { mean, std },
            label: String::new(),
        })
    }

    /// Lognormal with log-space location λ and scale ζ (ln X ~ N(λ, ζ²)).
    pub fn lognormal(log_location: f64, log_scale: f64) -> Result<Self, InputError> {
        if !(log_scale > 0.0 && log_scale.is_finite() && log_location.is_finite()) {
            return Err(InputError::InvalidParameter(format!(
                "lognormal requires finite λ and ζ > 0, got λ={log_location}, ζ={log_scale}"
            )));
        }
        Ok(Self {
            dist: Dist::Lognormal {
                log_location,
                log_scale,
            },
            label: String::new(),
        })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self, InputError> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(InputError::InvalidParameter(format!(
                "uniform requires lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self {
            dist: Dist::Uniform { lower, upper },
            label: String::new(),
        })
    }

    pub fn gumbel(location: f64, scale: f64) -> Result<Self, InputError> {
        if !(scale > 0.0 && scale.is_finite() && location.is_finite()) {
            return Err(InputError::InvalidParameter(format!(
                "gumbel requires finite location and scale > 0, got location={location}, scale={scale}"
            )));
        }
        Ok(Self {
            dist: Dist::Gumbel { location, scale },
            label: String::new(),
        })
    }

    /// Gaussian truncated to [0, ∞); `mean`/`std` parameterize the
    /// underlying untruncated law.
    pub fn truncated_normal(mean: f64, std: f64) -> Result<Self, InputError> {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(InputError::InvalidParameter(format!(
                "truncated-normal requires finite mean and std > 0, got mean={mean}, std={std}"
            )));
        }
        Ok(Self {
            dist: Dist::TruncatedNormal { mean, std },
            label: String::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn family(&self) -> MarginalFamily {
        match self.dist {
            Dist::Normal { .. } => MarginalFamily::Normal,
            Dist::Lognormal { .. } => MarginalFamily::Lognormal,
            Dist::Uniform { .. } => MarginalFamily::Uniform,
            Dist::Gumbel { .. } => MarginalFamily::Gumbel,
            Dist::TruncatedNormal { .. } => MarginalFamily::TruncatedNormal,
        }
    }

    /// Natural parameters in the order used by the document format.
    pub fn natural_params(&self) -> Vec<f64> {
        match self.dist {
            Dist::Normal { mean, std } => vec![mean, std],
            Dist::Lognormal {
                log_location,
                log_scale,
            } => vec![log_location, log_scale],
            Dist::Uniform { lower, upper } => vec![lower, upper],
            Dist::Gumbel { location, scale } => vec![location, scale],
            Dist::TruncatedNormal { mean, std } => vec![mean, std],
        }
    }

    pub fn mean(&self) -> f64 {
        match self.dist {
            Dist::Normal { mean, .. } => mean,
            Dist::Lognormal {
                log_location,
                log_scale,
            } => (log_location + 0.5 * log_scale * log_scale).exp(),
            Dist::Uniform { lower, upper } => 0.5 * (lower + upper),
            Dist::Gumbel { location, scale } => location + EULER_GAMMA * scale,
            Dist::TruncatedNormal { mean, std } => {
                let alpha = -mean / std;
                mean + std * hazard(alpha)
            }
        }
    }

    pub fn std(&self) -> f64 {
        match self.dist {
            Dist::Normal { std, .. } => std,
            Dist::Lognormal {
                log_location,
                log_scale,
            } => {
                let z2 = log_scale * log_scale;
                ((z2.exp() - 1.0) * (2.0 * log_location + z2).exp()).sqrt()
            }
            Dist::Uniform { lower, upper } => (upper - lower) / 12f64.sqrt(),
            Dist::Gumbel { scale, .. } => std::f64::consts::PI * scale / 6f64.sqrt(),
            Dist::TruncatedNormal { mean, std } => {
                let alpha = -mean / std;
                let lam = hazard(alpha);
                std * (1.0 + alpha * lam - lam * lam).sqrt()
            }
        }
    }

    /// Support as a closed-or-open interval (lower, upper); infinite bounds
    /// mean unbounded sides.
    pub fn support(&self) -> (f64, f64) {
        match self.dist {
            Dist::Normal { .. } | Dist::Gumbel { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Dist::Lognormal { .. } => (0.0, f64::INFINITY),
            Dist::Uniform { lower, upper } => (lower, upper),
            Dist::TruncatedNormal { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match self.dist {
            Dist::Normal { .. } | Dist::Gumbel { .. } => true,
            Dist::Lognormal { .. } => x > 0.0,
            Dist::Uniform { lower, upper } => x >= lower && x <= upper,
            Dist::TruncatedNormal { .. } => x >= 0.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.dist {
            Dist::Normal { mean, std } => stdnorm::cdf((x - mean) / std),
            Dist::Lognormal {
                log_location,
                log_scale,
            } => {
                if x <= 0.0 {
                    0.0
                } else {
                    stdnorm::cdf((x.ln() - log_location) / log_scale)
                }
            }
            Dist::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Dist::Gumbel { location, scale } => (-(-(x - location) / scale).exp()).exp(),
            Dist::TruncatedNormal { mean, std } => {
                if x < 0.0 {
                    0.0
                } else {
                    let base = stdnorm::cdf(-mean / std);
                    (stdnorm::cdf((x - mean) / std) - base) / (1.0 - base)
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self.dist {
            Dist::Normal { mean, std } => mean + std * stdnorm::quantile(p),
            Dist::Lognormal {
                log_location,
                log_scale,
            } => (log_location + log_scale * stdnorm::quantile(p)).exp(),
            Dist::Uniform { lower, upper } => lower + p * (upper - lower),
            Dist::Gumbel { location, scale } => location - scale * (-p.ln()).ln(),
            Dist::TruncatedNormal { mean, std } => {
                let base = stdnorm::cdf(-mean / std);
                mean + std * stdnorm::quantile(base + p * (1.0 - base))
            }
        }
    }
}

/// φ(α)/(1 − Φ(α)), the Gaussian hazard, used by truncated-normal moments.
fn hazard(alpha: f64) -> f64 {
    stdnorm::pdf(alpha) / (1.0 - stdnorm::cdf(alpha))
}

/// Builds a marginal from a mean and a coefficient of variation.
pub fn marginal_from_moments(
    family: MarginalFamily,
    mean: f64,
    cov: f64,
) -> Result<Marginal, InputError> {
    if !(cov > 0.0 && cov.is_finite()) {
        return Err(InputError::NonPositiveCov(cov));
    }
    if !mean.is_finite() {
        return Err(InputError::InvalidParameter(format!(
            "mean must be finite, got {mean}"
        )));
    }
    match family {
        MarginalFamily::Normal => {
            if mean == 0.0 {
                return Err(InputError::UnsupportedMoments("normal with zero mean"));
            }
            Marginal::normal(mean, cov * mean.abs())
        }
        MarginalFamily::Lognormal => {
            if mean <= 0.0 {
                return Err(InputError::UnsupportedMoments(
                    "lognormal with non-positive mean",
                ));
            }
            let zeta = (1.0 + cov * cov).ln().sqrt();
            let lambda = mean.ln() - 0.5 * zeta * zeta;
            Marginal::lognormal(lambda, zeta)
        }
        MarginalFamily::Uniform => {
            if mean == 0.0 {
                return Err(InputError::UnsupportedMoments("uniform with zero mean"));
            }
            let half_width = cov * mean.abs() * 3f64.sqrt();
            Marginal::uniform(mean - half_width, mean + half_width)
        }
        MarginalFamily::Gumbel => {
            if mean <= 0.0 {
                return Err(InputError::UnsupportedMoments(
                    "gumbel with non-positive mean",
                ));
            }
            let std = cov * mean;
            let scale = std * 6f64.sqrt() / std::f64::consts::PI;
            Marginal::gumbel(mean - EULER_GAMMA * scale, scale)
        }
        MarginalFamily::TruncatedNormal => {
            // Parameters are defined on the untruncated law, so requested
            // truncated moments cannot be honored exactly.
            Err(InputError::UnsupportedMoments("truncated-normal"))
        }
    }
}

/// Joint input model: ordered marginals plus a Gaussian-copula correlation.
///
/// Immutable after construction; transforms may be evaluated concurrently.
#[derive(Debug, Clone)]
pub struct InputModel {
    marginals: Vec<Marginal>,
    correlation: DMatrix<f64>,
    /// Lower Cholesky factor of the copula correlation; `None` when identity.
    chol_factor: Option<DMatrix<f64>>,
}

impl InputModel {
    /// Independent components (identity copula correlation).
    pub fn independent(marginals: Vec<Marginal>) -> Result<Self, InputError> {
        if marginals.is_empty() {
            return Err(InputError::InvalidParameter(
                "at least one marginal required".into(),
            ));
        }
        let dim = marginals.len();
        Ok(Self {
            marginals,
            correlation: DMatrix::identity(dim, dim),
            chol_factor: None,
        })
    }

    /// Correlated components. The matrix is interpreted directly as the
    /// standard-normal-space correlation of the Gaussian copula.
    pub fn with_correlation(
        marginals: Vec<Marginal>,
        correlation: DMatrix<f64>,
    ) -> Result<Self, InputError> {
        if marginals.is_empty() {
            return Err(InputError::InvalidParameter(
                "at least one marginal required".into(),
            ));
        }
        let dim = marginals.len();
        if correlation.nrows() != dim || correlation.ncols() != dim {
            return Err(InputError::BadCorrelation(format!(
                "expected {dim}x{dim}, got {}x{}",
                correlation.nrows(),
                correlation.ncols()
            )));
        }
        let mut is_identity = true;
        for i in 0..dim {
            if (correlation[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(InputError::BadCorrelation(format!(
                    "diagonal entry ({i},{i}) is {}",
                    correlation[(i, i)]
                )));
            }
            for j in 0..dim {
                let diff = correlation[(i, j)] - correlation[(j, i)];
                if diff.abs() > 1e-12 {
                    return Err(InputError::BadCorrelation(format!(
                        "asymmetric at ({i},{j})"
                    )));
                }
                if i != j && correlation[(i, j)] != 0.0 {
                    is_identity = false;
                }
            }
        }
        if is_identity {
            return Self::independent(marginals);
        }
        let cholesky = Cholesky::new(correlation.clone())
            .ok_or_else(|| InputError::BadCorrelation("not positive-definite".into()))?;
        Ok(Self {
            marginals,
            correlation,
            chol_factor: Some(cholesky.l()),
        })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.correlation
    }

    pub fn is_independent(&self) -> bool {
        self.chol_factor.is_none()
    }

    fn check_dim(&self, len: usize) -> Result<(), InputError> {
        if len != self.dim() {
            return Err(InputError::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Physical point → independent standard-normal point: componentwise
    /// z_i = Φ⁻¹(F_i(x_i)), then decorrelation through the inverse Cholesky
    /// factor of the copula correlation.
    pub fn to_standard(&self, x: &[f64]) -> Result<Vec<f64>, InputError> {
        self.check_dim(x.len())?;
        let mut g = Vec::with_capacity(x.len());
        for (i, (&xi, marginal)) in x.iter().zip(self.marginals.iter()).enumerate() {
            if !marginal.in_support(xi) {
                return Err(InputError::OutOfSupport {
                    index: i,
                    value: xi,
                });
            }
            let u = marginal.cdf(xi).clamp(CDF_CLIP, 1.0 - CDF_CLIP);
            g.push(stdnorm::quantile(u));
        }
        match &self.chol_factor {
            None => Ok(g),
            Some(l) => {
                let v = nalgebra::DVector::from_vec(g);
                let z = l.solve_lower_triangular(&v).ok_or_else(|| {
                    InputError::BadCorrelation("singular Cholesky factor".into())
                })?;
                Ok(z.data.into())
            }
        }
    }

    /// Independent standard-normal point → physical point; exact inverse of
    /// [`Self::to_standard`] up to the CDF clip.
    pub fn from_standard(&self, z: &[f64]) -> Result<Vec<f64>, InputError> {
        self.check_dim(z.len())?;
        for (i, &zi) in z.iter().enumerate() {
            if !zi.is_finite() {
                return Err(InputError::NonFinite(i));
            }
        }
        let g: Vec<f64> = match &self.chol_factor {
            None => z.to_vec(),
            Some(l) => {
                let v = nalgebra::DVector::from_column_slice(z);
                (l * v).data.into()
            }
        };
        Ok(g.iter()
            .zip(self.marginals.iter())
            .map(|(&gi, marginal)| {
                let u = stdnorm::cdf(gi).clamp(CDF_CLIP, 1.0 - CDF_CLIP);
                marginal.quantile(u)
            })
            .collect())
    }

    /// Maps unit-hypercube rows to physical space via z = Φ⁻¹(u) followed by
    /// [`Self::from_standard`].
    pub fn sample(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>, InputError> {
        self.check_dim(u.ncols())?;
        let mut out = DMatrix::<f64>::zeros(u.nrows(), u.ncols());
        let mut z = vec![0.0; u.ncols()];
        for row in 0..u.nrows() {
            for col in 0..u.ncols() {
                let v = u[(row, col)];
                if !(v > 0.0 && v < 1.0) {
                    return Err(InputError::OutsideHypercube {
                        row,
                        col,
                        value: v,
                    });
                }
                z[col] = stdnorm::quantile(v);
            }
            let x = self.from_standard(&z)?;
            for col in 0..u.ncols() {
                out[(row, col)] = x[col];
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Document format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct MarginalSpec {
    family: String,
    parameterization: String,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct InputModelDoc {
    marginals: Vec<MarginalSpec>,
    /// Row-major correlation matrix; omitted means identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correlation: Option<Vec<Vec<f64>>>,
}

fn family_from_name(name: &str) -> Result<MarginalFamily, InputError> {
    match name {
        "normal" => Ok(MarginalFamily::Normal),
        "lognormal" => Ok(MarginalFamily::Lognormal),
        "uniform" => Ok(MarginalFamily::Uniform),
        "gumbel" => Ok(MarginalFamily::Gumbel),
        "truncated-normal" | "truncated-normal-left-zero" => Ok(MarginalFamily::TruncatedNormal),
        other => Err(InputError::BadDocument(format!(
            "unknown marginal family {other:?}"
        ))),
    }
}

fn marginal_from_natural(family: MarginalFamily, values: &[f64]) -> Result<Marginal, InputError> {
    let two = |vs: &[f64]| -> Result<(f64, f64), InputError> {
        if vs.len() != 2 {
            return Err(InputError::BadDocument(format!(
                "expected 2 parameter values, got {}",
                vs.len()
            )));
        }
        Ok((vs[0], vs[1]))
    };
    let (a, b) = two(values)?;
    match family {
        MarginalFamily::Normal => Marginal::normal(a, b),
        MarginalFamily::Lognormal => Marginal::lognormal(a, b),
        MarginalFamily::Uniform => Marginal::uniform(a, b),
        MarginalFamily::Gumbel => Marginal::gumbel(a, b),
        MarginalFamily::TruncatedNormal => Marginal::truncated_normal(a, b),
    }
}

impl InputModel {
    pub fn from_json(text: &str) -> Result<Self, InputError> {
        let doc: InputModelDoc =
            serde_json::from_str(text).map_err(|e| InputError::BadDocument(e.to_string()))?;
        if doc.marginals.is_empty() {
            return Err(InputError::BadDocument("no marginals listed".into()));
        }
        let mut marginals = Vec::with_capacity(doc.marginals.len());
        for spec in &doc.marginals {
            let family = family_from_name(&spec.family)?;
            let marginal = match spec.parameterization.as_str() {
                "natural" => marginal_from_natural(family, &spec.values)?,
                "moments" => {
                    if spec.values.len() != 2 {
                        return Err(InputError::BadDocument(format!(
                            "moments parameterization expects [mean, cov], got {} values",
                            spec.values.len()
                        )));
                    }
                    marginal_from_moments(family, spec.values[0], spec.values[1])?
                }
                other => {
                    return Err(InputError::BadDocument(format!(
                        "unknown parameterization {other:?}"
                    )))
                }
            };
            marginals.push(marginal.with_label(spec.label.clone()));
        }
        match doc.correlation {
            None => Self::independent(marginals),
            Some(rows) => {
                let dim = marginals.len();
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(InputError::BadDocument(format!(
                        "correlation must be {dim}x{dim}"
                    )));
                }
                if rows
                    .iter()
                    .any(|r| r.iter().any(|v| !v.is_finite()))
                {
                    return Err(InputError::BadDocument(
                        "correlation entries must be finite".into(),
                    ));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                let m = DMatrix::from_row_slice(dim, dim, &flat);
                Self::with_correlation(marginals, m)
            }
        }
    }

    /// Canonical serialization: natural parameters, correlation included
    /// only when not the identity.
    pub fn to_json(&self) -> String {
        let marginals = self
            .marginals
            .iter()
            .map(|m| MarginalSpec {
                family: m.family().name().to_string(),
                parameterization: "natural".to_string(),
                values: m.natural_params(),
                label: m.label().to_string(),
            })
            .collect();
        let correlation = if self.is_independent() {
            None
        } else {
            Some(
                (0..self.dim())
                    .map(|i| (0..self.dim()).map(|j| self.correlation[(i, j)]).collect())
                    .collect(),
            )
        };
        let doc = InputModelDoc {
            marginals,
            correlation,
        };
        serde_json::to_string_pretty(&doc).expect("input model serialization cannot fail")
    }
}
