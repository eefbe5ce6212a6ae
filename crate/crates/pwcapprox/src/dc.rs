//! Difference-of-convex builder for smooth multivariate targets.
//!
//! The target `f` is shifted to `f_cvx(x) = f(x) + mu * ||x||^2`, which is
//! convex once `mu` dominates half the most negative Hessian eigenvalue.
//! `f_cvx` is approximated by the max of its tangent planes on a uniform
//! tensor grid, and recombining with `f_ccv = -mu * ||x||^2` yields pieces
//! of the form `-mu * ||x||^2 + a_i^T x + b_i`.

use thiserror::Error;

use crate::expr::{self, EvalError};
use crate::model::{BoxDomain, DiagQuadPiece, Meta, ModelError, PwcFunction};

/// Tensor-grid tangent planes; `grid_per_axis^n` must stay below this.
pub const MAX_PLANES: u128 = 1_000_000;
/// The tensor grid grows as `g^n`; higher dimensions need a different method.
pub const MAX_DIM: usize = 6;

#[derive(Debug, Error)]
pub enum DcError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("plane count {0} exceeds the limit of {MAX_PLANES}")]
    PlaneOverflow(u128),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcParams {
    pub mu: f64,
    pub grid_per_axis: usize,
    pub h_grad: f64,
    pub h_hess: f64,
}

impl Default for DcParams {
    fn default() -> Self {
        DcParams {
            mu: 0.0,
            grid_per_axis: 11,
            h_grad: 1e-5,
            h_hess: 1e-3,
        }
    }
}

/// One supporting plane `a^T x + b` of the shifted convex function.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPlane {
    pub a: Vec<f64>,
    pub b: f64,
}

/// Smallest eigenvalue of a small dense symmetric matrix via cyclic Jacobi
/// rotations, iterated until the off-diagonal norm falls below
/// `1e-12 * ||H||`.
pub fn min_eigenvalue(h: &[Vec<f64>]) -> Result<f64, DcError> {
    let n = h.len();
    if n == 0 || n > 20 {
        return Err(DcError::Input(format!(
            "matrix order {n} outside supported range 1..=20"
        )));
    }
    let mut m = vec![vec![0.0; n]; n];
    let mut norm = 0.0f64;
    for i in 0..n {
        if h[i].len() != n {
            return Err(DcError::Input("matrix is not square".into()));
        }
        for j in 0..n {
            if (h[i][j] - h[j][i]).abs() > 1e-9 * (1.0 + h[i][j].abs()) {
                return Err(DcError::Input(format!(
                    "matrix is not symmetric at ({i},{j})"
                )));
            }
            m[i][j] = h[i][j];
            norm += h[i][j] * h[i][j];
        }
    }
    let norm = norm.sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let tol = 1e-12 * norm;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * m[i][j] * m[i][j];
            }
        }
        if off.sqrt() < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() <= tol / (n * n) as f64 {
                    continue;
                }
                let theta = 0.5 * (2.0 * m[p][q]).atan2(m[q][q] - m[p][p]);
                let (s, c) = theta.sin_cos();
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut min = f64::INFINITY;
    for i in 0..n {
        min = min.min(m[i][i]);
    }
    Ok(min)
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Uniform tensor grid with `per_axis` nodes per axis including box corners.
fn tensor_grid(domain: &BoxDomain, per_axis: usize) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let total = (per_axis as u128).pow(n as u32) as usize;
    let mut points = Vec::with_capacity(total);
    let mut index = vec![0usize; n];
    loop {
        let point: Vec<f64> = (0..n)
            .map(|j| {
                let t = index[j] as f64 / (per_axis - 1) as f64;
                domain.lower[j] + t * (domain.upper[j] - domain.lower[j])
            })
            .collect();
        points.push(point);
        let mut j = n;
        loop {
            if j == 0 {
                return points;
            }
            j -= 1;
            index[j] += 1;
            if index[j] < per_axis {
                break;
            }
            index[j] = 0;
        }
    }
}

/// Cell midpoints of the `per_axis` tensor grid: `per_axis - 1` values per
/// axis, offset half a cell from the nodes.
fn midpoint_grid(domain: &BoxDomain, per_axis: usize) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let cells = per_axis - 1;
    let mut points = Vec::new();
    let mut index = vec![0usize; n];
    loop {
        let point: Vec<f64> = (0..n)
            .map(|j| {
                let cell = (domain.upper[j] - domain.lower[j]) / cells as f64;
                domain.lower[j] + (index[j] as f64 + 0.5) * cell
            })
            .collect();
        points.push(point);
        let mut j = n;
        loop {
            if j == 0 {
                return points;
            }
            j -= 1;
            index[j] += 1;
            if index[j] < cells {
                break;
            }
            index[j] = 0;
        }
    }
}

/// Sampling heuristic for the convexifying shift: take the most negative
/// Hessian eigenvalue seen on a coarse grid plus cell midpoints, and set
/// `mu = safety * max(0, -lambda_min / 2)`. Not a rigorous certificate.
pub fn estimate_mu<F>(
    f: F,
    domain: &BoxDomain,
    samples_per_axis: usize,
    safety: f64,
    h_hess: f64,
) -> Result<f64, DcError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    if samples_per_axis < 2 {
        return Err(DcError::Input("need at least 2 samples per axis".into()));
    }
    if safety < 1.0 {
        return Err(DcError::Input(format!("safety must be >= 1, got {safety}")));
    }
    check_dim(domain, samples_per_axis)?;
    let mut points = tensor_grid(domain, samples_per_axis);
    points.extend(midpoint_grid(domain, samples_per_axis));
    let mut lambda_min = f64::INFINITY;
    for point in &points {
        let hess = expr::hessian_fd(&f, point, h_hess)?;
        lambda_min = lambda_min.min(min_eigenvalue(&hess)?);
    }
    Ok(safety * (0.0f64).max(-lambda_min / 2.0))
}

fn check_dim(domain: &BoxDomain, per_axis: usize) -> Result<(), DcError> {
    let n = domain.dim();
    if n > MAX_DIM {
        return Err(DcError::Input(format!(
            "dimension {n} exceeds the tensor-grid limit of {MAX_DIM}"
        )));
    }
    let count = (per_axis as u128).pow(n as u32);
    if count > MAX_PLANES {
        return Err(DcError::PlaneOverflow(count));
    }
    Ok(())
}

/// Tangent planes of `f_cvx = f + mu * ||x||^2` at every tensor-grid node:
/// `a_i` is the central-difference gradient and `b_i = f_cvx(x_i) - a_i^T x_i`.
pub fn build_tangent_planes<F>(
    f: F,
    mu: f64,
    domain: &BoxDomain,
    grid_per_axis: usize,
    h_grad: f64,
) -> Result<Vec<TangentPlane>, DcError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    if grid_per_axis < 2 {
        return Err(DcError::Input("grid_per_axis must be at least 2".into()));
    }
    if mu < 0.0 {
        return Err(DcError::Input(format!("mu must be nonnegative, got {mu}")));
    }
    check_dim(domain, grid_per_axis)?;
    let f_cvx = |x: &[f64]| -> Result<f64, EvalError> { Ok(f(x)? + mu * norm_sq(x)) };
    let mut planes = Vec::new();
    for node in tensor_grid(domain, grid_per_axis) {
        let a = expr::gradient_fd(&f_cvx, &node, h_grad)?;
        let value = f_cvx(&node)?;
        let dot: f64 = a.iter().zip(&node).map(|(ai, xi)| ai * xi).sum();
        planes.push(TangentPlane { a, b: value - dot });
    }
    Ok(planes)
}

/// Full Theorem-1-style build: `p(x) = -mu * ||x||^2 + max_i (a_i^T x + b_i)`.
pub fn build_c2<F>(
    f: F,
    domain: &BoxDomain,
    params: &DcParams,
) -> Result<(PwcFunction, Meta), DcError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let planes = build_tangent_planes(&f, params.mu, domain, params.grid_per_axis, params.h_grad)?;
    let n = domain.dim();
    let d = vec![-params.mu; n];
    let pieces: Vec<DiagQuadPiece> = planes
        .into_iter()
        .map(|plane| DiagQuadPiece::new(d.clone(), plane.a, plane.b))
        .collect::<Result<_, _>>()?;
    let pwc = PwcFunction::new(pieces, domain.clone())?;
    let meta = Meta {
        builder: Some("dc".into()),
        mu: Some(params.mu),
        grid_per_axis: Some(params.grid_per_axis),
        ..Meta::default()
    };
    Ok((pwc, meta))
}
