//! Univariate max-of-parabolas builder.
//!
//! The interval `[lower, upper]` is split into `n_p` equal subintervals of
//! width `delta`. Each subinterval gets one concave parabola that matches the
//! target at the subinterval midpoint and has slope `+2 kappa` at the left
//! node and `-2 kappa` at the right node. The pointwise max of these pieces
//! deviates from any function with Lipschitz modulus below `kappa` by at most
//! `2.5 * kappa * delta`, so `delta = eps / (2.5 kappa)` meets a sup-norm
//! target of `eps`.

use thiserror::Error;

use crate::expr::EvalError;
use crate::model::{BoxDomain, DiagQuadPiece, Meta, ModelError, PwcFunction};

/// Hard cap on subinterval counts; beyond this the request is almost
/// certainly a misconfigured eps or kappa.
pub const MAX_SUBINTERVALS: usize = 100_000_000;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("subinterval count {0} exceeds the limit of {MAX_SUBINTERVALS}")]
    GridOverflow(u128),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A positive Lipschitz modulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa(f64);

impl Kappa {
    pub fn new(kappa: f64) -> Result<Self, BuildError> {
        if kappa > 0.0 && kappa.is_finite() {
            Ok(Kappa(kappa))
        } else {
            Err(BuildError::Input(format!(
                "kappa must be positive and finite, got {kappa}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Uniform discretization of `[lower, upper]` into `n_p` subintervals.
#[derive(Debug, Clone, PartialEq)]
pub struct UniGrid {
    pub lower: f64,
    pub upper: f64,
    pub delta: f64,
    pub n_p: usize,
}

impl UniGrid {
    pub fn new(lower: f64, upper: f64, n_p: usize) -> Result<Self, BuildError> {
        if !(lower < upper) {
            return Err(BuildError::Input(format!(
                "need lower < upper, got [{lower}, {upper}]"
            )));
        }
        if n_p == 0 {
            return Err(BuildError::Input("n_p must be positive".into()));
        }
        Ok(UniGrid {
            lower,
            upper,
            delta: (upper - lower) / n_p as f64,
            n_p,
        })
    }

    /// Node `i` for `i = 0..=n_p`; the endpoints are reproduced exactly.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_p {
            self.upper
        } else {
            self.lower + i as f64 * self.delta
        }
    }

    /// Midpoint of subinterval `i` (1-based, `1..=n_p`).
    pub fn midpoint(&self, i: usize) -> f64 {
        self.node(i - 1) + 0.5 * self.delta
    }
}

/// Choose the grid for a sup-norm target `eps`: start from
/// `delta0 = eps / (2.5 kappa)` and shrink `delta` so the subintervals tile
/// the interval exactly. Shrinking only tightens the error bound.
pub fn build_grid(lower: f64, upper: f64, eps: f64, kappa: Kappa) -> Result<UniGrid, BuildError> {
    if !(lower < upper) {
        return Err(BuildError::Input(format!(
            "need lower < upper, got [{lower}, {upper}]"
        )));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(BuildError::Input(format!("eps must be positive, got {eps}")));
    }
    let delta0 = eps / (2.5 * kappa.get());
    let ratio = (upper - lower) / delta0;
    // tolerate float noise when delta0 divides the interval exactly
    let n_p = (ratio - 1e-9).ceil().max(1.0);
    if !n_p.is_finite() || n_p as u128 > MAX_SUBINTERVALS as u128 {
        return Err(BuildError::GridOverflow(n_p as u128));
    }
    UniGrid::new(lower, upper, n_p as usize)
}

/// Coefficients of the parabola for subinterval `i` (1-based), from the
/// closed form: with left node `L`, right node `R`, midpoint value `v`,
///
/// ```text
/// d = -2k/delta
/// a = -2k (1 - 2R/delta)
/// b = -2k L^2 / delta - 0.5 k delta - 2k L + v
/// ```
pub fn build_piece<F>(
    f: F,
    grid: &UniGrid,
    i: usize,
    kappa: Kappa,
) -> Result<DiagQuadPiece, BuildError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if i == 0 || i > grid.n_p {
        return Err(BuildError::Input(format!(
            "subinterval index {i} out of range 1..={}",
            grid.n_p
        )));
    }
    let k = kappa.get();
    let delta = grid.delta;
    let left = grid.node(i - 1);
    let right = grid.node(i);
    let v = f(grid.midpoint(i))?;
    let d = -2.0 * k / delta;
    let a = -2.0 * k * (1.0 - 2.0 * right / delta);
    let b = -2.0 * k * left * left / delta - 0.5 * k * delta - 2.0 * k * left + v;
    Ok(DiagQuadPiece::new(vec![d], vec![a], b)?)
}

/// Build the full approximation: one piece per subinterval of the grid
/// chosen for `eps`. Returns the function, the grid, and model metadata.
pub fn build_univariate<F>(
    f: F,
    lower: f64,
    upper: f64,
    kappa: Kappa,
    eps: f64,
) -> Result<(PwcFunction, UniGrid, Meta), BuildError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let grid = build_grid(lower, upper, eps, kappa)?;
    let pwc = build_on_grid(&f, &grid, kappa)?;
    let meta = Meta {
        builder: Some("univariate".into()),
        kappa: Some(kappa.get()),
        eps: Some(eps),
        delta: Some(grid.delta),
        n_p: Some(grid.n_p),
        ..Meta::default()
    };
    Ok((pwc, grid, meta))
}

/// Build on an explicit grid (used by convergence studies).
pub fn build_on_grid<F>(f: F, grid: &UniGrid, kappa: Kappa) -> Result<PwcFunction, BuildError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let mut pieces = Vec::with_capacity(grid.n_p);
    for i in 1..=grid.n_p {
        pieces.push(build_piece(&f, grid, i, kappa)?);
    }
    let domain = BoxDomain::interval(grid.lower, grid.upper)?;
    Ok(PwcFunction::new(pieces, domain)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(v: f64) -> Result<f64, EvalError> {
        Ok(v)
    }

    #[test]
    fn grid_exact_division() {
        let g = build_grid(0.0, 1.0, 2.5, Kappa::new(1.0).unwrap()).unwrap();
        assert_eq!(g.n_p, 1);
        assert_eq!(g.delta, 1.0);
    }

    #[test]
    fn grid_shrinks_delta_to_fit() {
        let g = build_grid(0.0, 1.0, 0.6, Kappa::new(1.0).unwrap()).unwrap();
        // delta0 = 0.24, ceil(1/0.24) = 5
        assert_eq!(g.n_p, 5);
        assert!((g.delta - 0.2).abs() < 1e-15);
        assert!((g.n_p as f64 * g.delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_sin_count() {
        let g = build_grid(0.0, std::f64::consts::PI, 0.01, Kappa::new(1.0).unwrap()).unwrap();
        assert_eq!(g.n_p, 786);
    }

    #[test]
    fn grid_overflow_guard() {
        let err = build_grid(0.0, 1.0, 1e-12, Kappa::new(1.0).unwrap()).unwrap_err();
        assert!(matches!(err, BuildError::GridOverflow(_)));
    }

    #[test]
    fn grid_nodes_reproduce_endpoints() {
        let g = build_grid(0.0, std::f64::consts::PI, 0.05, Kappa::new(1.0).unwrap()).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(g.n_p), std::f64::consts::PI);
        assert!((g.n_p as f64 * g.delta - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn piece_unit_interval_closed_form() {
        // L=0, R=1, kappa=1, delta=1: (d, a, b) = (-2, 2, v - 0.5)
        let grid = UniGrid::new(0.0, 1.0, 1).unwrap();
        let kappa = Kappa::new(1.0).unwrap();
        let v = 1.25;
        let piece = build_piece(|_| ok(v), &grid, 1, kappa).unwrap();
        assert_eq!(piece.d[0], -2.0);
        assert_eq!(piece.a[0], 2.0);
        assert_eq!(piece.b, v - 0.5);
    }

    #[test]
    fn piece_matches_midpoint_and_slopes() {
        let grid = UniGrid::new(-1.5, 2.5, 7).unwrap();
        let kappa = Kappa::new(3.0).unwrap();
        let f = |x: f64| ok((2.7 * x).sin());
        for i in 1..=grid.n_p {
            let piece = build_piece(f, &grid, i, kappa).unwrap();
            let m = grid.midpoint(i);
            let l = grid.node(i - 1);
            let r = grid.node(i);
            let slope = |x: f64| 2.0 * piece.d[0] * x + piece.a[0];
            assert!((piece.eval(&[m]).unwrap() - f(m).unwrap()).abs() < 1e-9);
            assert!((slope(l) - 2.0 * kappa.get()).abs() < 1e-9);
            assert!((slope(r) + 2.0 * kappa.get()).abs() < 1e-9);
            assert!(piece.d[0] < 0.0);
        }
    }

    #[test]
    fn constant_target_values() {
        // p_i(m) = c and p_i at the nodes is c - 0.5 k delta
        let grid = UniGrid::new(0.0, 2.0, 4).unwrap();
        let kappa = Kappa::new(1.0).unwrap();
        let c = 3.0;
        for i in 1..=grid.n_p {
            let piece = build_piece(|_| ok(c), &grid, i, kappa).unwrap();
            let expected_node = c - 0.5 * kappa.get() * grid.delta;
            assert!((piece.eval(&[grid.midpoint(i)]).unwrap() - c).abs() < 1e-12);
            assert!((piece.eval(&[grid.node(i - 1)]).unwrap() - expected_node).abs() < 1e-12);
            assert!((piece.eval(&[grid.node(i)]).unwrap() - expected_node).abs() < 1e-12);
        }
    }

    #[test]
    fn build_constant_meets_bound() {
        let kappa = Kappa::new(1.0).unwrap();
        let (p, grid, meta) = build_univariate(|_| ok(3.0), 0.0, 1.0, kappa, 0.5).unwrap();
        assert_eq!(p.pieces().len(), grid.n_p);
        assert_eq!(meta.builder.as_deref(), Some("univariate"));
        let mut worst: f64 = 0.0;
        for k in 0..=10_000 {
            let x = k as f64 / 10_000.0;
            let (v, _) = p.eval(&[x]).unwrap();
            worst = worst.max((v - 3.0).abs());
        }
        assert!(worst <= 0.5, "max error {worst}");
        for i in 1..=grid.n_p {
            let (v, _) = p.eval(&[grid.midpoint(i)]).unwrap();
            assert!((v - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn build_sin_meets_eps() {
        let kappa = Kappa::new(1.0).unwrap();
        let pi = std::f64::consts::PI;
        let (p, grid, _) = build_univariate(|x| ok(x.sin()), 0.0, pi, kappa, 0.01).unwrap();
        assert_eq!(grid.n_p, 786);
        let mut worst: f64 = 0.0;
        for k in 0..=100_000 {
            let x = pi * k as f64 / 100_000.0;
            let (v, _) = p.eval(&[x]).unwrap();
            worst = worst.max((v - x.sin()).abs());
        }
        assert!(worst <= 0.01, "max error {worst}");
    }

    #[test]
    fn build_abs_kink() {
        // |x| attains modulus 1, so kappa is inflated slightly above it
        let kappa = Kappa::new(1.01).unwrap();
        let (p, _, _) = build_univariate(|x| ok(x.abs()), -1.0, 1.0, kappa, 0.1).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=40_000 {
            let x = -1.0 + k as f64 / 20_000.0;
            let (v, _) = p.eval(&[x]).unwrap();
            worst = worst.max((v - x.abs()).abs());
        }
        assert!(worst <= 0.1, "max error {worst}");
    }
}
