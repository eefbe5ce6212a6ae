//! End-to-end acceptance suite. Each test prints one pass/fail line for its
//! criterion; run with `cargo test --test acceptance -- --nocapture` to see
//! the summary lines.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pwcapprox::analysis::{self, check_properties, convergence_study, sup_error};
use pwcapprox::dc::{self, DcParams};
use pwcapprox::expr::EvalError;
use pwcapprox::model::{BoxDomain, ModelFile, PwcFunction};
use pwcapprox::separable::{self, build_separable};
use pwcapprox::univariate::{self, build_univariate, Kappa, UniGrid};

type Target = Box<dyn Fn(f64) -> Result<f64, EvalError>>;

fn kappa(v: f64) -> Kappa {
    Kappa::new(v).unwrap()
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Random trigonometric polynomial with an analytic Lipschitz bound
/// `sum_k |c_k| k`, inflated slightly so the modulus inequality is strict.
fn fourier_target(seed: u64) -> (Target, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = rng.gen_range(2..=4);
    let mut coeffs = Vec::new();
    let mut bound = 0.0;
    for k in 1..=terms {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
        bound += c.abs() * k as f64;
        coeffs.push((c, k as f64, phase));
    }
    let f = move |x: f64| -> Result<f64, EvalError> {
        Ok(coeffs.iter().map(|(c, k, p)| c * (k * x + p).sin()).sum())
    };
    (Box::new(f), bound + 0.01)
}

/// The corpus used by criteria 3, 4, 5 and 9: sin, a constant, |x| with an
/// inflated kappa, and ten random trigonometric polynomials.
fn corpus() -> Vec<(String, Target, f64, f64, f64, f64)> {
    // (name, f, lower, upper, kappa, eps)
    let mut items: Vec<(String, Target, f64, f64, f64, f64)> = vec![
        (
            "sin".into(),
            Box::new(|x: f64| Ok(x.sin())),
            0.0,
            PI,
            1.0,
            0.01,
        ),
        (
            "constant".into(),
            Box::new(|_x: f64| Ok(3.0)),
            0.0,
            1.0,
            1.0,
            0.25,
        ),
        (
            "abs".into(),
            Box::new(|x: f64| Ok(x.abs())),
            -1.0,
            1.0,
            1.01,
            0.1,
        ),
    ];
    for seed in 0..10u64 {
        let (f, k) = fourier_target(1000 + seed);
        items.push((format!("fourier{seed}"), f, -1.0, 2.0, k, 0.05));
    }
    items
}

#[test]
fn criterion_1_univariate_error_bound() {
    let start = Instant::now();
    let rows = convergence_study(
        |x| Ok(x.sin()),
        0.0,
        PI,
        kappa(1.0),
        &[0.1, 0.05, 0.025],
        100_001,
    )
    .unwrap();
    let all_within = rows.iter().all(|r| r.max_error <= r.bound);
    let elapsed = start.elapsed();
    let detail = format!(
        "errors {:?} vs bounds {:?}, {:.2}s",
        rows.iter().map(|r| r.max_error).collect::<Vec<_>>(),
        rows.iter().map(|r| r.bound).collect::<Vec<_>>(),
        elapsed.as_secs_f64()
    );
    report(
        "1 (error bound 2.5*kappa*delta)",
        all_within && elapsed.as_secs_f64() < 5.0,
        &detail,
    );
}

#[test]
fn criterion_2_tolerance_targeting() {
    let start = Instant::now();
    let (p, grid, _) = build_univariate(|x| Ok(x.sin()), 0.0, PI, kappa(1.0), 0.01).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..=100_000 {
        let x = PI * k as f64 / 100_000.0;
        worst = worst.max((p.eval(&[x]).unwrap().0 - x.sin()).abs());
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "n_p = {}, max error = {:.6}, {:.2}s",
        grid.n_p,
        worst,
        elapsed.as_secs_f64()
    );
    report(
        "2 (delta = eps/2.5kappa rule)",
        grid.n_p == 786 && worst <= 0.01 && elapsed.as_secs_f64() < 2.0,
        &detail,
    );
}

#[test]
fn criterion_3_midpoint_exactness() {
    let mut worst: f64 = 0.0;
    let mut worst_name = String::new();
    for (name, f, lower, upper, k, eps) in corpus() {
        let (p, grid, _) = build_univariate(&f, lower, upper, kappa(k), eps).unwrap();
        for i in 1..=grid.n_p {
            let m = grid.midpoint(i);
            let dev = (p.eval(&[m]).unwrap().0 - f(m).unwrap()).abs();
            if dev > worst {
                worst = dev;
                worst_name = name.clone();
            }
        }
    }
    report(
        "3 (midpoint exactness)",
        worst <= 1e-9,
        &format!("worst |p(m) - f(m)| = {worst:.3e} on {worst_name}"),
    );
}

#[test]
fn criterion_4_underestimation_and_locality() {
    let mut all_pass = true;
    let mut detail = String::new();
    for (name, f, lower, upper, k, eps) in corpus() {
        let (p, grid, _) = build_univariate(&f, lower, upper, kappa(k), eps).unwrap();
        let props = check_properties(&f, &p, &grid, kappa(k), 10_000).unwrap();
        let p2 = props.get("p2_underestimation").unwrap();
        let p4 = props.get("p4_locality").unwrap();
        if !(p2.pass && p4.pass) {
            all_pass = false;
            detail.push_str(&format!("{name}: P2 {} P4 {}; ", p2.pass, p4.pass));
        }

        // fault injection: perturbing one coefficient must be caught with a witness
        let mut pieces = p.pieces().to_vec();
        let idx = pieces.len() / 2;
        pieces[idx].b += 1.0;
        let corrupted = PwcFunction::new(pieces, p.domain().clone()).unwrap();
        let bad = check_properties(&f, &corrupted, &grid, kappa(k), 10_000).unwrap();
        let caught = bad
            .checks
            .iter()
            .any(|c| !c.pass && c.witness.is_some());
        if bad.pass() || !caught {
            all_pass = false;
            detail.push_str(&format!("{name}: fault not detected; "));
        }
    }
    if detail.is_empty() {
        detail = "P2 and P4 hold on the corpus; injected faults rejected with witnesses".into();
    }
    report("4 (underestimation & locality)", all_pass, &detail);
}

#[test]
fn criterion_5_slope_bound() {
    let mut all_pass = true;
    let mut detail = String::new();
    for (name, f, lower, upper, k, eps) in corpus() {
        let (p, grid, _) = build_univariate(&f, lower, upper, kappa(k), eps).unwrap();
        let props = check_properties(&f, &p, &grid, kappa(k), 10_000).unwrap();
        let slope = props.get("slope_bound").unwrap();
        if !slope.pass {
            all_pass = false;
            detail.push_str(&format!("{name}: slope margin {}; ", slope.margin));
        }
    }
    if detail.is_empty() {
        detail = "max adjacent-sample slope <= 4*kappa + 1e-6 on the corpus".into();
    }
    report("5 (slope bound 4*kappa)", all_pass, &detail);
}

/// Independent oracle for the parabola coefficients: solve the defining
/// 3x3 linear system by Gaussian elimination with partial pivoting.
fn solve_piece_system(left: f64, delta: f64, k: f64, v: f64) -> [f64; 3] {
    let right = left + delta;
    let m = left + 0.5 * delta;
    let mut a = [
        [m * m, m, 1.0, v],
        [2.0 * left, 1.0, 0.0, 2.0 * k],
        [2.0 * right, 1.0, 0.0, -2.0 * k],
    ];
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in (col + 1)..3 {
            let factor = a[row][col] / a[col][col];
            for c in col..4 {
                a[row][c] -= factor * a[col][c];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = a[row][3];
        for c in (row + 1)..3 {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    x
}

#[test]
fn criterion_6_closed_form_vs_linear_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let left: f64 = rng.gen_range(-5.0..5.0);
        let delta: f64 = rng.gen_range(0.01..2.0);
        let k: f64 = rng.gen_range(0.1..10.0);
        let v: f64 = rng.gen_range(-10.0..10.0);
        let grid = UniGrid {
            lower: left,
            upper: left + delta,
            delta,
            n_p: 1,
        };
        let piece = univariate::build_piece(|_| Ok(v), &grid, 1, kappa(k)).unwrap();
        let oracle = solve_piece_system(left, delta, k, v);
        let closed = [piece.d[0], piece.a[0], piece.b];
        for (c, o) in closed.iter().zip(&oracle) {
            worst = worst.max((c - o).abs() / o.abs().max(1.0));
        }
    }
    report(
        "6 (closed form vs 3x3 solve)",
        worst <= 1e-9,
        &format!("worst relative deviation = {worst:.3e} over 100 tuples"),
    );
}

#[test]
fn criterion_7_dc_exactness() {
    let start = Instant::now();

    // f = -||x||^2 with mu = 1 on [-1,1]^2 is reproduced exactly
    let domain = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let params = DcParams {
        mu: 1.0,
        grid_per_axis: 5,
        ..DcParams::default()
    };
    let neg_norm = |x: &[f64]| Ok(-(x[0] * x[0] + x[1] * x[1]));
    let (p_exact, _) = dc::build_c2(neg_norm, &domain, &params).unwrap();
    let exact_report = sup_error(neg_norm, &p_exact, 201, &[], Some(1e-9)).unwrap();

    // f = x1^2 + x2^2, mu = 0, 11x11 grid: tangent-gap error on 201x201
    let domain01 = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let params01 = DcParams {
        mu: 0.0,
        grid_per_axis: 11,
        ..DcParams::default()
    };
    let paraboloid = |x: &[f64]| Ok(x[0] * x[0] + x[1] * x[1]);
    let (p_convex, _) = dc::build_c2(paraboloid, &domain01, &params01).unwrap();
    let convex_report = sup_error(paraboloid, &p_convex, 201, &[], Some(0.006)).unwrap();

    let elapsed = start.elapsed();
    let detail = format!(
        "exact case error = {:.3e}, paraboloid error = {:.5}, {:.2}s",
        exact_report.max_abs_error,
        convex_report.max_abs_error,
        elapsed.as_secs_f64()
    );
    report(
        "7 (DC exactness cases)",
        exact_report.max_abs_error <= 1e-9
            && convex_report.max_abs_error <= 0.006
            && elapsed.as_secs_f64() < 5.0,
        &detail,
    );
}

#[test]
fn criterion_8_separable_additivity() {
    let domain = BoxDomain::new(vec![0.0, -1.0], vec![PI, 1.0]).unwrap();
    let sine = |x: f64| -> Result<f64, EvalError> { Ok(x.sin()) };
    let absolute = |x: f64| -> Result<f64, EvalError> { Ok(x.abs()) };
    let comps: Vec<(&dyn Fn(f64) -> Result<f64, EvalError>, Kappa)> =
        vec![(&sine, kappa(1.0)), (&absolute, kappa(1.01))];
    let (sf, _) = build_separable(&comps, &domain, 0.02, None).unwrap();

    let truth = |x: &[f64]| -> Result<f64, EvalError> { Ok(x[0].sin() + x[1].abs()) };
    let err_report = sup_error(truth, &sf, 301, &[], Some(0.02)).unwrap();

    let expanded = separable::expand_sumform(&sf, 1_000_000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_gap: f64 = 0.0;
    for _ in 0..1000 {
        let x = [rng.gen_range(0.0..PI), rng.gen_range(-1.0..1.0)];
        let s = sf.eval(&x).unwrap();
        let (e, _) = expanded.eval(&x).unwrap();
        worst_gap = worst_gap.max((s - e).abs());
    }
    let detail = format!(
        "dense error = {:.5} (<= 0.02), sum/max gap = {worst_gap:.3e} over {} pieces",
        err_report.max_abs_error,
        expanded.pieces().len()
    );
    report(
        "8 (separable additivity)",
        err_report.max_abs_error <= 0.02 && worst_gap <= 1e-12,
        &detail,
    );
}

#[test]
fn criterion_9_determinism_and_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut all_exact = true;

    for (name, f, lower, upper, k, eps) in corpus() {
        let (p, _, meta) = build_univariate(&f, lower, upper, kappa(k), eps).unwrap();
        let path = dir.path().join(format!("{name}.json"));
        ModelFile::from_pwc(&p, meta).save(&path).unwrap();
        let loaded = ModelFile::load(&path).unwrap().to_pwc().unwrap();
        for _ in 0..200 {
            let x = [rng.gen_range(lower..upper)];
            if p.eval(&x).unwrap() != loaded.eval(&x).unwrap() {
                all_exact = false;
            }
        }
    }

    // sumform round-trip
    let domain = BoxDomain::new(vec![0.0, -1.0], vec![PI, 1.0]).unwrap();
    let sine = |x: f64| -> Result<f64, EvalError> { Ok(x.sin()) };
    let absolute = |x: f64| -> Result<f64, EvalError> { Ok(x.abs()) };
    let comps: Vec<(&dyn Fn(f64) -> Result<f64, EvalError>, Kappa)> =
        vec![(&sine, kappa(1.0)), (&absolute, kappa(1.01))];
    let (sf, meta) = build_separable(&comps, &domain, 0.1, None).unwrap();
    let path = dir.path().join("sumform.json");
    sf.to_model(meta).save(&path).unwrap();
    let loaded = separable::SumForm::from_model(&ModelFile::load(&path).unwrap()).unwrap();
    for _ in 0..200 {
        let x = [rng.gen_range(0.0..PI), rng.gen_range(-1.0..1.0)];
        if sf.eval(&x).unwrap() != loaded.eval(&x).unwrap() {
            all_exact = false;
        }
    }

    // identical inputs produce byte-identical reports and model files
    let run = || {
        let (p, grid, meta) =
            build_univariate(|x| Ok(x.sin()), 0.0, PI, kappa(1.0), 0.05).unwrap();
        let extras: Vec<Vec<f64>> = (1..=grid.n_p).map(|i| vec![grid.midpoint(i)]).collect();
        let rep = analysis::sup_error(
            |x: &[f64]| Ok(x[0].sin()),
            &p,
            10_001,
            &extras,
            Some(2.5 * grid.delta),
        )
        .unwrap();
        let model = serde_json::to_string(&ModelFile::from_pwc(&p, meta)).unwrap();
        (rep.to_json(), model)
    };
    let (report_a, model_a) = run();
    let (report_b, model_b) = run();
    let deterministic = report_a == report_b && model_a == model_b;

    report(
        "9 (determinism & round-trip)",
        all_exact && deterministic,
        &format!("bit-exact round-trips: {all_exact}, repeat-run identical: {deterministic}"),
    );
}
