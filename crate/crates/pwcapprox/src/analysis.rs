//! Certification suite: Lipschitz estimation, dense-grid sup-norm error
//! measurement, the sawtooth lower envelope, structural property checks for
//! univariate builds, and convergence studies.
//!
//! Everything here certifies by dense sampling, not global optimization; the
//! sample counts are recorded in the reports so claims are reproducible.

use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::model::{Approximation, ModelError, PwcFunction};
use crate::univariate::{self, BuildError, Kappa, UniGrid};

/// Tensor sample grids are capped at this many points.
pub const MAX_SAMPLES: u128 = 20_000_000;

pub const DEFAULT_SAMPLES_PER_UNIT: usize = 10_000;
pub const DEFAULT_SAFETY: f64 = 1.1;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("sample count {0} exceeds the limit of {MAX_SAMPLES}")]
    SampleOverflow(u128),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// Result of a dense-grid sup-norm measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub max_abs_error: f64,
    #[serde(rename = "argmax")]
    pub argmax_point: Vec<f64>,
    pub samples_used: usize,
    pub bound: Option<f64>,
    #[serde(rename = "pass")]
    pub bound_satisfied: bool,
}

impl ErrorReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Heuristic Lipschitz estimate from dense difference quotients, scaled by a
/// safety factor. Sampled quotients approach the true modulus from below, so
/// the raw maximum is always quoted with `safety >= 1` applied.
pub fn estimate_lipschitz<F>(
    f: F,
    lower: f64,
    upper: f64,
    samples_per_unit: usize,
    safety: f64,
) -> Result<f64, AnalysisError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if !(lower < upper) {
        return Err(AnalysisError::Input(format!(
            "need lower < upper, got [{lower}, {upper}]"
        )));
    }
    if safety < 1.0 {
        return Err(AnalysisError::Input(format!(
            "safety must be >= 1, got {safety}"
        )));
    }
    let count = ((samples_per_unit as f64 * (upper - lower)).ceil() as usize).max(100);
    if count as u128 > MAX_SAMPLES {
        return Err(AnalysisError::SampleOverflow(count as u128));
    }
    let h = (upper - lower) / count as f64;
    let mut max_slope = 0.0f64;
    let mut prev = f(lower)?;
    for k in 1..=count {
        let x = if k == count { upper } else { lower + k as f64 * h };
        let v = f(x)?;
        max_slope = max_slope.max((v - prev).abs() / h);
        prev = v;
    }
    // floor keeps the delta rule finite for constant targets
    Ok((max_slope * safety).max(1e-12 * safety))
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Max of `|f - p|` over a tensor grid of `per_axis` points per axis plus
/// any forced extra points (midpoints, grid nodes). The argmax tie-break is
/// the lexicographically lowest point.
pub fn sup_error<A, F>(
    f: F,
    p: &A,
    per_axis: usize,
    extra: &[Vec<f64>],
    bound: Option<f64>,
) -> Result<ErrorReport, AnalysisError>
where
    A: Approximation,
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    if per_axis < 2 {
        return Err(AnalysisError::Input("need at least 2 samples per axis".into()));
    }
    let domain = p.domain();
    let n = domain.dim();
    let total = (per_axis as u128).pow(n as u32);
    if total > MAX_SAMPLES {
        return Err(AnalysisError::SampleOverflow(total));
    }
    let mut max_abs_error = -1.0f64;
    let mut argmax = vec![f64::NAN; n];
    let mut samples_used = 0usize;
    let consider = |x: &[f64],
                        max_abs_error: &mut f64,
                        argmax: &mut Vec<f64>|
     -> Result<(), AnalysisError> {
        let err = (f(x)? - p.value_at(x)?).abs();
        if err > *max_abs_error || (err == *max_abs_error && lex_less(x, argmax)) {
            *max_abs_error = err;
            *argmax = x.to_vec();
        }
        Ok(())
    };

    let mut index = vec![0usize; n];
    'grid: loop {
        let x: Vec<f64> = (0..n)
            .map(|j| {
                let t = index[j] as f64 / (per_axis - 1) as f64;
                if index[j] + 1 == per_axis {
                    domain.upper[j]
                } else {
                    domain.lower[j] + t * (domain.upper[j] - domain.lower[j])
                }
            })
            .collect();
        consider(&x, &mut max_abs_error, &mut argmax)?;
        samples_used += 1;
        let mut j = n;
        loop {
            if j == 0 {
                break 'grid;
            }
            j -= 1;
            index[j] += 1;
            if index[j] < per_axis {
                break;
            }
            index[j] = 0;
        }
    }
    for x in extra {
        if x.len() != n {
            return Err(AnalysisError::Input(format!(
                "extra point of dimension {}, expected {n}",
                x.len()
            )));
        }
        consider(x, &mut max_abs_error, &mut argmax)?;
        samples_used += 1;
    }
    let bound_satisfied = bound.map_or(true, |b| max_abs_error <= b);
    Ok(ErrorReport {
        max_abs_error,
        argmax_point: argmax,
        samples_used,
        bound,
        bound_satisfied,
    })
}

/// Cone-shaped Lipschitz lower bound around `center`:
/// `v_mid - kappa * |x - center|`.
pub fn sawtooth_value(v_mid: f64, center: f64, kappa: f64, x: f64) -> f64 {
    v_mid - kappa * (x - center).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub pass: bool,
    /// Worst-case point; present whenever the check fails and for all
    /// sampled checks.
    pub witness: Option<f64>,
    /// Worst-case slack; negative means the check failed by that amount.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

const PROP_TOL: f64 = 1e-9;
const SLOPE_TOL: f64 = 1e-6;

/// Check the structural guarantees of a univariate build against dense
/// samples (at least `samples_per_unit` per unit length, floor 1000):
///
/// * `p1_concavity` — every piece curvature equals `-2 kappa / delta < 0`.
/// * `p2_underestimation` — each piece stays below the target outside its
///   own open subinterval.
/// * `p3_piece_midpoint` — piece `i` matches the target at its midpoint.
/// * `p4_locality` — the winning piece at any sample owns a window no wider
///   than half a subinterval beyond its own nodes.
/// * `midpoint_exactness` — the full max matches the target at every
///   subinterval midpoint.
/// * `slope_bound` — adjacent-sample slopes of `p` stay within `4 kappa`.
pub fn check_properties<F>(
    f: F,
    p: &PwcFunction,
    grid: &UniGrid,
    kappa: Kappa,
    samples_per_unit: usize,
) -> Result<PropertyReport, AnalysisError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if p.dim() != 1 {
        return Err(AnalysisError::Input("property checks apply to univariate models".into()));
    }
    if p.pieces().len() != grid.n_p {
        return Err(AnalysisError::Input(format!(
            "model has {} pieces but the grid describes {}",
            p.pieces().len(),
            grid.n_p
        )));
    }
    let domain = p.domain();
    if domain.lower[0] != grid.lower || domain.upper[0] != grid.upper {
        return Err(AnalysisError::Input("model domain does not match the grid".into()));
    }
    let k = kappa.get();
    let length = grid.upper - grid.lower;
    let count = ((samples_per_unit as f64 * length).ceil() as usize).max(1000);
    if count as u128 > MAX_SAMPLES {
        return Err(AnalysisError::SampleOverflow(count as u128));
    }
    let h = length / count as f64;
    let sample = |idx: usize| {
        if idx == count {
            grid.upper
        } else {
            grid.lower + idx as f64 * h
        }
    };

    let mut checks = Vec::new();

    // P1: curvature sign and value
    {
        let expected = -2.0 * k / grid.delta;
        let mut worst = f64::INFINITY;
        let mut witness = None;
        for (i, piece) in p.pieces().iter().enumerate() {
            let dev = (piece.d[0] - expected).abs() / expected.abs().max(1.0);
            let slack = PROP_TOL - dev;
            let slack = if piece.d[0] < 0.0 { slack } else { -1.0 };
            if slack < worst {
                worst = slack;
                witness = Some(grid.midpoint(i + 1));
            }
        }
        checks.push(PropertyCheck {
            name: "p1_concavity",
            pass: worst >= 0.0,
            witness,
            margin: worst,
        });
    }

    // P2 and P4 share the sample sweep; slope bound rides along.
    let mut p2_margin = f64::INFINITY;
    let mut p2_witness = None;
    let mut p4_margin = f64::INFINITY;
    let mut p4_witness = None;
    let mut max_slope = 0.0f64;
    let mut slope_witness = grid.lower;
    let mut prev_value = None;
    for idx in 0..=count {
        let x = sample(idx);
        let fx = f(x)?;
        let (px, winner) = p.eval(&[x])?;
        for (i, piece) in p.pieces().iter().enumerate() {
            let left = grid.node(i);
            let right = grid.node(i + 1);
            // restrict to samples outside the open subinterval of piece i
            if x > left && x < right {
                continue;
            }
            let slack = fx - piece.eval(&[x])?;
            if slack < p2_margin {
                p2_margin = slack;
                p2_witness = Some(x);
            }
        }
        let window_lo = grid.node(winner) - 0.5 * grid.delta;
        let window_hi = grid.node(winner + 1) + 0.5 * grid.delta;
        let slack = (x - window_lo).min(window_hi - x);
        if slack < p4_margin {
            p4_margin = slack;
            p4_witness = Some(x);
        }
        if let Some(prev) = prev_value {
            let slope: f64 = (px - prev) / h;
            if slope.abs() > max_slope {
                max_slope = slope.abs();
                slope_witness = x;
            }
        }
        prev_value = Some(px);
    }
    checks.push(PropertyCheck {
        name: "p2_underestimation",
        pass: p2_margin >= -PROP_TOL,
        witness: p2_witness,
        margin: p2_margin,
    });

    // P3 per piece, and midpoint exactness of the full max
    let mut p3_worst = 0.0f64;
    let mut p3_witness = None;
    let mut mid_worst = 0.0f64;
    let mut mid_witness = None;
    for i in 1..=grid.n_p {
        let m = grid.midpoint(i);
        let fm = f(m)?;
        let piece_dev = (p.pieces()[i - 1].eval(&[m])? - fm).abs();
        if piece_dev > p3_worst {
            p3_worst = piece_dev;
            p3_witness = Some(m);
        }
        let max_dev = (p.eval(&[m])?.0 - fm).abs();
        if max_dev > mid_worst {
            mid_worst = max_dev;
            mid_witness = Some(m);
        }
    }
    checks.push(PropertyCheck {
        name: "p3_piece_midpoint",
        pass: p3_worst <= PROP_TOL,
        witness: p3_witness,
        margin: PROP_TOL - p3_worst,
    });
    checks.push(PropertyCheck {
        name: "p4_locality",
        pass: p4_margin >= -PROP_TOL,
        witness: p4_witness,
        margin: p4_margin,
    });
    checks.push(PropertyCheck {
        name: "midpoint_exactness",
        pass: mid_worst <= PROP_TOL,
        witness: mid_witness,
        margin: PROP_TOL - mid_worst,
    });
    checks.push(PropertyCheck {
        name: "slope_bound",
        pass: max_slope <= 4.0 * k + SLOPE_TOL,
        witness: Some(slope_witness),
        margin: 4.0 * k + SLOPE_TOL - max_slope,
    });

    Ok(PropertyReport { checks })
}

/// One row of a convergence study. `delta` and `bound` quote the requested
/// spacing; the build may use a slightly smaller spacing to tile the
/// interval, which only tightens the true error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub delta: f64,
    pub n_p: usize,
    pub max_error: f64,
    pub bound: f64,
    pub ratio: f64,
}

pub fn convergence_study<F>(
    f: F,
    lower: f64,
    upper: f64,
    kappa: Kappa,
    deltas: &[f64],
    per_axis: usize,
) -> Result<Vec<StudyRow>, AnalysisError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if deltas.is_empty() {
        return Err(AnalysisError::Input("delta list is empty".into()));
    }
    if deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(AnalysisError::Input("deltas must be positive".into()));
    }
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let bound = 2.5 * kappa.get() * delta;
        let (p, grid, _) = univariate::build_univariate(&f, lower, upper, kappa, bound)?;
        let extra: Vec<Vec<f64>> = (1..=grid.n_p)
            .map(|i| vec![grid.midpoint(i)])
            .chain((0..=grid.n_p).map(|i| vec![grid.node(i)]))
            .collect();
        let report = sup_error(|x: &[f64]| f(x[0]), &p, per_axis, &extra, Some(bound))?;
        rows.push(StudyRow {
            delta,
            n_p: grid.n_p,
            max_error: report.max_abs_error,
            bound,
            ratio: report.max_abs_error / bound,
        });
    }
    Ok(rows)
}

pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("delta,n_p,max_error,bound,ratio\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.delta, row.n_p, row.max_error, row.bound, row.ratio
        ));
    }
    out
}
