//! Python bindings for the pwcapprox library.
//!
//! Exposes expression parsing, the three approximation builders, model
//! save/load, and sup-norm error certification. Build with
//! `cargo build -p pwcapprox-py` and import the resulting cdylib as
//! `pwcapprox_py` (see python/smoke_test.py for the rename dance).

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use pwcapprox::analysis;
use pwcapprox::dc::{self, DcParams};
use pwcapprox::expr::{EvalError, ExprAst};
use pwcapprox::model::{BoxDomain, Meta, ModelFile, PwcFunction};
use pwcapprox::separable::{self, SumForm};
use pwcapprox::univariate::{self, Kappa};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

/// A parsed scalar expression in variables `x1..xn`.
#[pyclass(name = "Expr")]
struct PyExpr {
    ast: ExprAst,
}

#[pymethods]
impl PyExpr {
    #[new]
    fn new(source: &str, dim: usize) -> PyResult<Self> {
        let ast = ExprAst::parse(source, dim).map_err(value_err)?;
        Ok(PyExpr { ast })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.ast.dim()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<f64> {
        self.ast.eval(&x).map_err(value_err)
    }

    /// Zero-based indices of the variables the expression references.
    fn variables(&self) -> Vec<usize> {
        self.ast.variables()
    }

    fn __str__(&self) -> String {
        self.ast.to_string()
    }
}

enum Inner {
    Pwc(PwcFunction),
    Sum(SumForm),
}

/// A piecewise-concave model: either a flat max of pieces (`pwc`) or a
/// sum of univariate maxes (`sumform`).
#[pyclass(name = "Model")]
struct PyModel {
    inner: Inner,
    meta: Meta,
}

impl PyModel {
    fn from_model_file(model: ModelFile) -> PyResult<Self> {
        model.validate().map_err(value_err)?;
        let inner = match model.kind.as_str() {
            "pwc" => Inner::Pwc(model.to_pwc().map_err(value_err)?),
            _ => Inner::Sum(SumForm::from_model(&model).map_err(value_err)?),
        };
        Ok(PyModel {
            inner,
            meta: model.meta,
        })
    }

    fn to_model_file(&self) -> ModelFile {
        match &self.inner {
            Inner::Pwc(p) => ModelFile::from_pwc(p, self.meta.clone()),
            Inner::Sum(sf) => sf.to_model(self.meta.clone()),
        }
    }
}

#[pymethods]
impl PyModel {
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            Inner::Pwc(_) => "pwc",
            Inner::Sum(_) => "sumform",
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        match &self.inner {
            Inner::Pwc(p) => p.dim(),
            Inner::Sum(sf) => sf.dim(),
        }
    }

    #[getter]
    fn num_pieces(&self) -> usize {
        match &self.inner {
            Inner::Pwc(p) => p.pieces().len(),
            Inner::Sum(sf) => sf.components().iter().map(|c| c.pieces().len()).sum(),
        }
    }

    #[getter]
    fn domain(&self) -> (Vec<f64>, Vec<f64>) {
        let d = match &self.inner {
            Inner::Pwc(p) => p.domain(),
            Inner::Sum(sf) => sf.domain(),
        };
        (d.lower.clone(), d.upper.clone())
    }

    /// Evaluate at a point. Returns `(value, winners)` where `winners`
    /// holds the winning piece index, one entry per component for a
    /// sumform model and a single entry for a flat model.
    fn eval(&self, x: Vec<f64>) -> PyResult<(f64, Vec<usize>)> {
        match &self.inner {
            Inner::Pwc(p) => {
                let (v, w) = p.eval(&x).map_err(value_err)?;
                Ok((v, vec![w]))
            }
            Inner::Sum(sf) => {
                let v = sf.eval(&x).map_err(value_err)?;
                let w = sf.winners(&x).map_err(value_err)?;
                Ok((v, w))
            }
        }
    }

    /// Builder metadata as a JSON string.
    fn meta_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.meta).map_err(value_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.to_model_file().save(&path).map_err(io_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let model = ModelFile::load(&path).map_err(io_err)?;
        PyModel::from_model_file(model)
    }

    /// Expand a sumform model into an equivalent flat max-of-pieces model.
    fn expand(&self, max_pieces: u128) -> PyResult<Self> {
        match &self.inner {
            Inner::Pwc(_) => Err(PyValueError::new_err("model is already in flat form")),
            Inner::Sum(sf) => {
                let expanded = separable::expand_sumform(sf, max_pieces).map_err(value_err)?;
                Ok(PyModel {
                    inner: Inner::Pwc(expanded),
                    meta: self.meta.clone(),
                })
            }
        }
    }
}

fn parse_expr(function: &str, dim: usize) -> PyResult<ExprAst> {
    ExprAst::parse(function, dim).map_err(value_err)
}

/// Build a univariate approximation of `function` (an expression in `x1`)
/// on `[lower, upper]` with sup-norm tolerance `eps`. The Lipschitz
/// constant `kappa` is estimated by dense sampling when omitted.
#[pyfunction]
#[pyo3(signature = (function, lower, upper, eps, kappa=None, safety=1.1))]
fn approx_uni(
    function: &str,
    lower: f64,
    upper: f64,
    eps: f64,
    kappa: Option<f64>,
    safety: f64,
) -> PyResult<PyModel> {
    let ast = parse_expr(function, 1)?;
    let f = |t: f64| ast.eval(&[t]);
    let kappa_value = match kappa {
        Some(k) => k,
        None => analysis::estimate_lipschitz(f, lower, upper, 10_000, safety).map_err(value_err)?,
    };
    let kappa = Kappa::new(kappa_value).map_err(value_err)?;
    let (p, _, meta) = univariate::build_univariate(f, lower, upper, kappa, eps).map_err(value_err)?;
    Ok(PyModel {
        inner: Inner::Pwc(p),
        meta,
    })
}

/// Build a piecewise-concave approximation of a smooth `function` of
/// `dim` variables via its difference-of-convex split. `mu` is the
/// concavifying curvature; when omitted it is estimated from sampled
/// Hessians and flagged as heuristic in the metadata.
#[pyfunction]
#[pyo3(signature = (function, dim, lower, upper, grid=9, mu=None, safety=1.1))]
fn approx_c2(
    function: &str,
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    grid: usize,
    mu: Option<f64>,
    safety: f64,
) -> PyResult<PyModel> {
    let ast = parse_expr(function, dim)?;
    let domain = BoxDomain::new(lower, upper).map_err(value_err)?;
    let f = |x: &[f64]| ast.eval(x);
    let mu_value = match mu {
        Some(m) if m >= 0.0 => m,
        Some(m) => return Err(PyValueError::new_err(format!("mu must be nonnegative, got {m}"))),
        None => dc::estimate_mu(f, &domain, 5, safety, 1e-3).map_err(value_err)?,
    };
    let params = DcParams {
        mu: mu_value,
        grid_per_axis: grid,
        ..DcParams::default()
    };
    let (p, mut meta) = dc::build_c2(f, &domain, &params).map_err(value_err)?;
    meta.mu_heuristic = Some(mu.is_none());
    Ok(PyModel {
        inner: Inner::Pwc(p),
        meta,
    })
}

/// Build a sumform approximation of a separable function given as one
/// univariate expression per coordinate. Component `j` may reference
/// any single variable (or none); `eps` is split evenly across
/// components unless `eps_split` is given.
#[pyfunction]
#[pyo3(signature = (functions, lower, upper, eps, kappas=None, eps_split=None, safety=1.1))]
fn approx_sep(
    functions: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    eps: f64,
    kappas: Option<Vec<f64>>,
    eps_split: Option<Vec<f64>>,
    safety: f64,
) -> PyResult<PyModel> {
    let n = functions.len();
    let domain = BoxDomain::new(lower, upper).map_err(value_err)?;
    if domain.dim() != n {
        return Err(PyValueError::new_err(format!(
            "{} component functions for a {}-dimensional box",
            n,
            domain.dim()
        )));
    }
    let asts: Vec<ExprAst> = functions
        .iter()
        .map(|src| parse_expr(src, n))
        .collect::<PyResult<_>>()?;
    let mut fns: Vec<Box<dyn Fn(f64) -> Result<f64, EvalError> + '_>> = Vec::new();
    for (j, ast) in asts.iter().enumerate() {
        let vars = ast.variables();
        let var = match vars.as_slice() {
            [] => j,
            [v] => *v,
            _ => {
                return Err(PyValueError::new_err(format!(
                    "component {} references more than one variable",
                    j + 1
                )))
            }
        };
        fns.push(Box::new(ast.univariate_in(var)));
    }
    let kappa_values: Vec<f64> = match kappas {
        Some(list) => {
            if list.len() != n {
                return Err(PyValueError::new_err(format!("kappas must have {n} entries")));
            }
            list
        }
        None => {
            let mut estimated = Vec::with_capacity(n);
            for (j, f) in fns.iter().enumerate() {
                estimated.push(
                    analysis::estimate_lipschitz(
                        f,
                        domain.lower[j],
                        domain.upper[j],
                        10_000,
                        safety,
                    )
                    .map_err(value_err)?,
                );
            }
            estimated
        }
    };
    let pairs: Vec<(&dyn Fn(f64) -> Result<f64, EvalError>, Kappa)> = fns
        .iter()
        .zip(&kappa_values)
        .map(|(f, &k)| Ok((f.as_ref(), Kappa::new(k).map_err(value_err)?)))
        .collect::<PyResult<_>>()?;
    let (sf, meta) =
        separable::build_separable(&pairs, &domain, eps, eps_split.as_deref()).map_err(value_err)?;
    Ok(PyModel {
        inner: Inner::Sum(sf),
        meta,
    })
}

/// Sample the absolute error |f - p| on a dense grid. Returns
/// `(max_abs_error, argmax_point, samples_used)`.
#[pyfunction]
#[pyo3(signature = (model, function, per_axis=200))]
fn sup_error(model: &PyModel, function: &str, per_axis: usize) -> PyResult<(f64, Vec<f64>, usize)> {
    let dim = model.dim();
    let ast = parse_expr(function, dim)?;
    let f = |x: &[f64]| ast.eval(x);
    let report = match &model.inner {
        Inner::Pwc(p) => analysis::sup_error(f, p, per_axis, &[], None),
        Inner::Sum(sf) => analysis::sup_error(f, sf, per_axis, &[], None),
    }
    .map_err(value_err)?;
    Ok((report.max_abs_error, report.argmax_point, report.samples_used))
}

#[pymodule]
fn pwcapprox_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(approx_uni, m)?)?;
    m.add_function(wrap_pyfunction!(approx_c2, m)?)?;
    m.add_function(wrap_pyfunction!(approx_sep, m)?)?;
    m.add_function(wrap_pyfunction!(sup_error, m)?)?;
    Ok(())
}
