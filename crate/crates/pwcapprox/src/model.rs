//! Piecewise-concave data model: diagonal-quadratic pieces, pointwise-max
//! evaluation, and the JSON model-file format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid model: {0}")]
    Validation(String),
    #[error("unsupported model version {0} (expected {MODEL_VERSION})")]
    Version(u32),
    #[error("unknown model kind `{0}`")]
    Kind(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Axis-aligned box `{ x : lower <= x <= upper }` with nonempty interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ModelError> {
        let b = BoxDomain { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self, ModelError> {
        Self::new(vec![lower], vec![upper])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(ModelError::Validation(format!(
                "box bounds must be nonempty and of equal length ({} vs {})",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for j in 0..self.lower.len() {
            if !(self.lower[j] < self.upper[j]) {
                return Err(ModelError::Validation(format!(
                    "empty interior on axis {}: lower {} !< upper {}",
                    j + 1,
                    self.lower[j],
                    self.upper[j]
                )));
            }
        }
        Ok(())
    }
}

/// One concave piece: `sum_j d_j x_j^2 + a^T x + b` with every `d_j <= 0`.
///
/// Covers the univariate parabola (n = 1), the isotropic
/// `-mu * ||x||^2 + affine` piece (all `d_j = -mu`), and, with `d = 0`,
/// a plain affine piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagQuadPiece {
    pub d: Vec<f64>,
    pub a: Vec<f64>,
    pub b: f64,
}

impl DiagQuadPiece {
    pub fn new(d: Vec<f64>, a: Vec<f64>, b: f64) -> Result<Self, ModelError> {
        let piece = DiagQuadPiece { d, a, b };
        piece.validate()?;
        Ok(piece)
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d.len() != self.a.len() {
            return Err(ModelError::Validation(format!(
                "piece coefficient lengths differ: d has {}, a has {}",
                self.d.len(),
                self.a.len()
            )));
        }
        for (j, &dj) in self.d.iter().enumerate() {
            if !(dj <= 0.0) {
                return Err(ModelError::Validation(format!(
                    "concavity violated: d_{} = {} > 0",
                    j + 1,
                    dj
                )));
            }
        }
        if !self.b.is_finite()
            || self.d.iter().any(|v| !v.is_finite())
            || self.a.iter().any(|v| !v.is_finite())
        {
            return Err(ModelError::Validation("non-finite coefficient".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut acc = self.b;
        for j in 0..x.len() {
            acc += (self.d[j] * x[j] + self.a[j]) * x[j];
        }
        Ok(acc)
    }
}

/// Pointwise maximum of finitely many concave pieces over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct PwcFunction {
    pieces: Vec<DiagQuadPiece>,
    domain: BoxDomain,
}

impl PwcFunction {
    pub fn new(pieces: Vec<DiagQuadPiece>, domain: BoxDomain) -> Result<Self, ModelError> {
        if pieces.is_empty() {
            return Err(ModelError::Validation("piece list must be nonempty".into()));
        }
        domain.validate()?;
        for piece in &pieces {
            piece.validate()?;
            if piece.dim() != domain.dim() {
                return Err(ModelError::DimMismatch {
                    expected: domain.dim(),
                    got: piece.dim(),
                });
            }
        }
        Ok(PwcFunction { pieces, domain })
    }

    pub fn pieces(&self) -> &[DiagQuadPiece] {
        &self.pieces
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Max over pieces; the winner is the smallest index attaining the max.
    /// Evaluation is global: `x` need not lie in the domain box.
    pub fn eval(&self, x: &[f64]) -> Result<(f64, usize), ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut best = f64::NEG_INFINITY;
        let mut winner = 0;
        for (i, piece) in self.pieces.iter().enumerate() {
            let v = piece.eval(x)?;
            if v > best {
                best = v;
                winner = i;
            }
        }
        Ok((best, winner))
    }
}

/// Common evaluation surface for both model representations.
pub trait Approximation {
    fn dim(&self) -> usize;
    fn domain(&self) -> &BoxDomain;
    fn value_at(&self, x: &[f64]) -> Result<f64, ModelError>;
}

impl Approximation for PwcFunction {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn value_at(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(self.eval(x)?.0)
    }
}

/// Provenance metadata carried by a model file. Builders fill what applies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub builder: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kappas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_split: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mu: Option<f64>,
    /// True when mu came from the sampling heuristic rather than the user;
    /// such a mu is not a rigorous convexity certificate.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mu_heuristic: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid_per_axis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub achieved_error: Option<f64>,
}

/// One coordinate of a sum-form model: a univariate max-of-parabolas payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentPayload {
    pub domain: BoxDomain,
    pub pieces: Vec<DiagQuadPiece>,
}

/// On-disk model document. Numbers are serialized via serde_json's shortest
/// round-trip decimal form, so save/load is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub kind: String,
    pub domain: BoxDomain,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pieces: Option<Vec<DiagQuadPiece>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub components: Option<Vec<ComponentPayload>>,
    pub meta: Meta,
}

impl ModelFile {
    pub fn from_pwc(f: &PwcFunction, meta: Meta) -> Self {
        ModelFile {
            version: MODEL_VERSION,
            kind: "pwc".into(),
            domain: f.domain().clone(),
            pieces: Some(f.pieces().to_vec()),
            components: None,
            meta,
        }
    }

    pub fn to_pwc(&self) -> Result<PwcFunction, ModelError> {
        let pieces = self
            .pieces
            .clone()
            .ok_or_else(|| ModelError::Validation("pwc model is missing `pieces`".into()))?;
        PwcFunction::new(pieces, self.domain.clone())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.version != MODEL_VERSION {
            return Err(ModelError::Version(self.version));
        }
        self.domain.validate()?;
        match self.kind.as_str() {
            "pwc" => {
                self.to_pwc()?;
            }
            "sumform" => {
                let components = self.components.as_ref().ok_or_else(|| {
                    ModelError::Validation("sumform model is missing `components`".into())
                })?;
                if components.len() != self.domain.dim() {
                    return Err(ModelError::Validation(format!(
                        "sumform has {} components for a {}-dimensional box",
                        components.len(),
                        self.domain.dim()
                    )));
                }
                for (j, component) in components.iter().enumerate() {
                    if component.domain.dim() != 1 {
                        return Err(ModelError::Validation(format!(
                            "component {} is not univariate",
                            j + 1
                        )));
                    }
                    if component.domain.lower[0] != self.domain.lower[j]
                        || component.domain.upper[0] != self.domain.upper[j]
                    {
                        return Err(ModelError::Validation(format!(
                            "component {} domain does not match box axis {}",
                            j + 1,
                            j + 1
                        )));
                    }
                    PwcFunction::new(component.pieces.clone(), component.domain.clone())?;
                }
            }
            other => return Err(ModelError::Kind(other.to_string())),
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        self.validate()?;
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)?;
        // Surface a version mismatch before field-level validation noise.
        let raw: serde_json::Value = serde_json::from_str(&text)?;
        if let Some(version) = raw.get("version").and_then(|v| v.as_u64()) {
            if version != MODEL_VERSION as u64 {
                return Err(ModelError::Version(version as u32));
            }
        }
        let model: ModelFile = serde_json::from_value(raw)?;
        model.validate()?;
        Ok(model)
    }
}
