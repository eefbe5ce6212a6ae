//! Separable builder: per-coordinate univariate constructions whose sum
//! approximates `f_s(x) = sum_j f_j(x_j)` with the error budget split across
//! coordinates (uniformly, `eps_j = eps / n`, unless overridden).
//!
//! The sum form keeps one univariate max-of-parabolas per coordinate and is
//! the primary representation; expanding into explicit max-form pieces
//! multiplies piece counts (`prod_j n_{p,j}`) and is opt-in.

use thiserror::Error;

use crate::expr::EvalError;
use crate::model::{
    Approximation, BoxDomain, ComponentPayload, DiagQuadPiece, Meta, ModelError, ModelFile,
    PwcFunction,
};
use crate::univariate::{self, BuildError, Kappa};

pub const DEFAULT_MAX_EXPANDED_PIECES: u128 = 100_000;

#[derive(Debug, Error)]
pub enum SeparableError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("expanded piece count {0} exceeds the guard of {1}")]
    ExpandOverflow(u128, u128),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Sum of per-coordinate univariate piecewise-concave functions.
#[derive(Debug, Clone, PartialEq)]
pub struct SumForm {
    components: Vec<PwcFunction>,
    domain: BoxDomain,
}

impl SumForm {
    pub fn new(components: Vec<PwcFunction>, domain: BoxDomain) -> Result<Self, SeparableError> {
        if components.len() != domain.dim() {
            return Err(SeparableError::Input(format!(
                "{} components for a {}-dimensional box",
                components.len(),
                domain.dim()
            )));
        }
        for (j, component) in components.iter().enumerate() {
            if component.dim() != 1 {
                return Err(SeparableError::Input(format!(
                    "component {} is not univariate",
                    j + 1
                )));
            }
            let cd = component.domain();
            if cd.lower[0] != domain.lower[j] || cd.upper[0] != domain.upper[j] {
                return Err(SeparableError::Input(format!(
                    "component {} domain [{}, {}] does not match box axis {}",
                    j + 1,
                    cd.lower[0],
                    cd.upper[0],
                    j + 1
                )));
            }
        }
        Ok(SumForm { components, domain })
    }

    pub fn components(&self) -> &[PwcFunction] {
        &self.components
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `sum_j max_i p_{j,i}(x_j)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut total = 0.0;
        for (j, component) in self.components.iter().enumerate() {
            total += component.eval(&[x[j]])?.0;
        }
        Ok(total)
    }

    /// Per-component winner indices at `x`.
    pub fn winners(&self, x: &[f64]) -> Result<Vec<usize>, ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        self.components
            .iter()
            .enumerate()
            .map(|(j, component)| Ok(component.eval(&[x[j]])?.1))
            .collect()
    }

    pub fn to_model(&self, meta: Meta) -> ModelFile {
        ModelFile {
            version: crate::model::MODEL_VERSION,
            kind: "sumform".into(),
            domain: self.domain.clone(),
            pieces: None,
            components: Some(
                self.components
                    .iter()
                    .map(|c| ComponentPayload {
                        domain: c.domain().clone(),
                        pieces: c.pieces().to_vec(),
                    })
                    .collect(),
            ),
            meta,
        }
    }

    pub fn from_model(model: &ModelFile) -> Result<Self, SeparableError> {
        if model.kind != "sumform" {
            return Err(SeparableError::Input(format!(
                "expected a sumform model, got kind `{}`",
                model.kind
            )));
        }
        let payloads = model
            .components
            .as_ref()
            .ok_or_else(|| SeparableError::Input("sumform model is missing components".into()))?;
        let components = payloads
            .iter()
            .map(|c| Ok(PwcFunction::new(c.pieces.clone(), c.domain.clone())?))
            .collect::<Result<Vec<_>, SeparableError>>()?;
        SumForm::new(components, model.domain.clone())
    }
}

impl Approximation for SumForm {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn value_at(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.eval(x)
    }
}

/// Build each coordinate with the univariate builder at its share of the
/// error budget. `eps_split` overrides the uniform `eps / n` split; it must
/// have one positive entry per coordinate summing to at most `eps`.
pub fn build_separable<F>(
    components: &[(F, Kappa)],
    domain: &BoxDomain,
    eps: f64,
    eps_split: Option<&[f64]>,
) -> Result<(SumForm, Meta), SeparableError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let n = domain.dim();
    if components.len() != n {
        return Err(SeparableError::Input(format!(
            "{} component functions for a {}-dimensional box",
            components.len(),
            n
        )));
    }
    if !(eps > 0.0) {
        return Err(SeparableError::Input(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let split: Vec<f64> = match eps_split {
        Some(s) => {
            if s.len() != n {
                return Err(SeparableError::Input(format!(
                    "eps split has {} entries for {} coordinates",
                    s.len(),
                    n
                )));
            }
            if s.iter().any(|&e| !(e > 0.0)) {
                return Err(SeparableError::Input("eps split entries must be positive".into()));
            }
            let total: f64 = s.iter().sum();
            if total > eps * (1.0 + 1e-12) {
                return Err(SeparableError::Input(format!(
                    "eps split sums to {total} > eps = {eps}"
                )));
            }
            s.to_vec()
        }
        None => vec![eps / n as f64; n],
    };
    let mut built = Vec::with_capacity(n);
    let mut kappas = Vec::with_capacity(n);
    for (j, (f, kappa)) in components.iter().enumerate() {
        let (pwc, _, _) =
            univariate::build_univariate(f, domain.lower[j], domain.upper[j], *kappa, split[j])?;
        kappas.push(kappa.get());
        built.push(pwc);
    }
    let sumform = SumForm::new(built, domain.clone())?;
    let meta = Meta {
        builder: Some("separable".into()),
        eps: Some(eps),
        eps_split: Some(split),
        kappas: Some(kappas),
        ..Meta::default()
    };
    Ok((sumform, meta))
}

/// Expand into explicit max form: one piece per index tuple `(i_1..i_n)`,
/// summing the per-coordinate coefficients. Because the coordinates are
/// independent, `max` and `sum` commute and the expansion evaluates
/// identically to the sum form.
pub fn expand_sumform(sf: &SumForm, max_pieces: u128) -> Result<PwcFunction, SeparableError> {
    let counts: Vec<usize> = sf.components.iter().map(|c| c.pieces().len()).collect();
    let total: u128 = counts.iter().map(|&c| c as u128).product();
    if total > max_pieces {
        return Err(SeparableError::ExpandOverflow(total, max_pieces));
    }
    let n = sf.dim();
    let mut pieces = Vec::with_capacity(total as usize);
    let mut index = vec![0usize; n];
    loop {
        let mut d = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut b = 0.0;
        for j in 0..n {
            let piece = &sf.components[j].pieces()[index[j]];
            d.push(piece.d[0]);
            a.push(piece.a[0]);
            b += piece.b;
        }
        pieces.push(DiagQuadPiece::new(d, a, b)?);
        let mut j = n;
        loop {
            if j == 0 {
                return Ok(PwcFunction::new(pieces, sf.domain.clone())?);
            }
            j -= 1;
            index[j] += 1;
            if index[j] < counts[j] {
                break;
            }
            index[j] = 0;
        }
    }
}
