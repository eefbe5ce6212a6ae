//! Property-based invariants of the data model and the builders.

use proptest::prelude::*;

use pwcapprox::expr::ExprAst;
use pwcapprox::model::{BoxDomain, DiagQuadPiece, Meta, ModelFile, PwcFunction};
use pwcapprox::separable::{build_separable, expand_sumform};
use pwcapprox::univariate::{build_univariate, Kappa};

fn arb_piece(dim: usize) -> impl Strategy<Value = DiagQuadPiece> {
    (
        prop::collection::vec(-10.0f64..=0.0, dim),
        prop::collection::vec(-10.0f64..10.0, dim),
        -10.0f64..10.0,
    )
        .prop_map(|(d, a, b)| DiagQuadPiece::new(d, a, b).unwrap())
}

fn arb_pwc() -> impl Strategy<Value = PwcFunction> {
    (1usize..=3).prop_flat_map(|dim| {
        prop::collection::vec(arb_piece(dim), 1..6).prop_map(move |pieces| {
            let domain = BoxDomain::new(vec![-1.0; dim], vec![1.0; dim]).unwrap();
            PwcFunction::new(pieces, domain).unwrap()
        })
    })
}

proptest! {
    /// The max dominates every individual piece everywhere.
    #[test]
    fn max_dominates_pieces(p in arb_pwc(), seed in 0u64..1000) {
        let dim = p.dim();
        let x: Vec<f64> = (0..dim)
            .map(|j| -2.0 + (seed as f64 * 0.137 + j as f64 * 0.71).fract() * 4.0)
            .collect();
        let (value, winner) = p.eval(&x).unwrap();
        for piece in p.pieces() {
            prop_assert!(value >= piece.eval(&x).unwrap());
        }
        prop_assert_eq!(p.pieces()[winner].eval(&x).unwrap(), value);
    }

    /// Where one piece wins at both ends and the midpoint, the function is
    /// midpoint-concave along the segment.
    #[test]
    fn concave_on_constant_winner_segments(p in arb_pwc(), seed in 0u64..500) {
        let dim = p.dim();
        let x: Vec<f64> = (0..dim).map(|j| ((seed as f64 + j as f64) * 0.31).fract() - 0.5).collect();
        let y: Vec<f64> = (0..dim).map(|j| ((seed as f64 - j as f64) * 0.53).fract() * 0.8).collect();
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let (vx, wx) = p.eval(&x).unwrap();
        let (vy, wy) = p.eval(&y).unwrap();
        let (vm, wm) = p.eval(&mid).unwrap();
        if wx == wy && wy == wm {
            prop_assert!(vm >= 0.5 * (vx + vy) - 1e-12);
        }
    }

    /// Serialization round-trips without drift across repeated cycles.
    #[test]
    fn save_load_is_exact(p in arb_pwc()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let model = ModelFile::from_pwc(&p, Meta::default());
        model.save(&path).unwrap();
        let once = ModelFile::load(&path).unwrap();
        once.save(&path).unwrap();
        let twice = ModelFile::load(&path).unwrap();
        prop_assert_eq!(&model, &once);
        prop_assert_eq!(&once, &twice);
    }

    /// The expanded max form agrees with the sum form at arbitrary points.
    #[test]
    fn sum_max_exchange(eps in 0.3f64..2.0, seed in 0u64..200) {
        let domain = BoxDomain::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let f0 = |x: f64| Ok(x.abs());
        let f1 = |x: f64| Ok((2.0 * x).sin());
        let comps: Vec<(&dyn Fn(f64) -> Result<f64, pwcapprox::expr::EvalError>, Kappa)> =
            vec![(&f0, Kappa::new(1.01).unwrap()), (&f1, Kappa::new(2.0).unwrap())];
        let (sf, _) = build_separable(&comps, &domain, eps, None).unwrap();
        let expanded = expand_sumform(&sf, 1_000_000).unwrap();
        let t = (seed as f64 * 0.0173).fract();
        let x = [-1.0 + 2.0 * t, 2.0 * (1.0 - t)];
        let s = sf.eval(&x).unwrap();
        let (e, _) = expanded.eval(&x).unwrap();
        prop_assert!((s - e).abs() <= 1e-12);
    }

    /// Printing and reparsing an expression preserves its evaluation exactly.
    #[test]
    fn parse_print_roundtrip(a in -5.0f64..5.0, b in -5.0f64..5.0, op in 0usize..6) {
        let src = match op {
            0 => format!("{a}+x1*{b}"),
            1 => format!("sin({a}*x1)-cos(x2)"),
            2 => format!("abs(x1-{a})^2"),
            3 => format!("tanh(x1)*{b}+exp(-x2^2)"),
            4 => format!("({a}+x1)/({b}*{b}+x2^2+1)"),
            _ => format!("-x1^3+{a}"),
        };
        let ast = ExprAst::parse(&src, 2).unwrap();
        let reparsed = ExprAst::parse(&ast.to_string(), 2).unwrap();
        for k in 0..20 {
            let x = [-2.0 + 0.2 * k as f64, 1.5 - 0.15 * k as f64];
            prop_assert_eq!(ast.eval(&x).ok(), reparsed.eval(&x).ok());
        }
    }

    /// Builder output always satisfies the concavity invariant and midpoint
    /// interpolation regardless of target and tolerance.
    #[test]
    fn univariate_build_invariants(eps in 0.05f64..1.0, freq in 0.5f64..3.0) {
        let k = Kappa::new(freq + 0.01).unwrap();
        let f = move |x: f64| Ok((freq * x).sin());
        let (p, grid, _) = build_univariate(f, -1.0, 2.0, k, eps).unwrap();
        for piece in p.pieces() {
            prop_assert!(piece.d[0] < 0.0);
        }
        for i in 1..=grid.n_p {
            let m = grid.midpoint(i);
            let fm = (freq * m).sin();
            prop_assert!((p.eval(&[m]).unwrap().0 - fm).abs() <= 1e-9);
        }
    }
}
