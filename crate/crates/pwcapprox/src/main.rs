//! Command-line front end.
//!
//! Exit codes: 0 success, 1 tolerance violated, 2 configuration error,
//! 3 build or i/o error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pwcapprox::analysis::{self, ErrorReport};
use pwcapprox::dc::{self, DcParams};
use pwcapprox::expr::{EvalError, ExprAst};
use pwcapprox::model::{BoxDomain, ModelFile, PwcFunction};
use pwcapprox::separable::{self, SumForm};
use pwcapprox::univariate::{self, Kappa, UniGrid};

const EXIT_BOUND: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUILD: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pwcapprox",
    about = "Piecewise-concave approximation of functions over a box",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for any randomized sampling (all built-in sampling is
    /// deterministic; the seed is recorded for reproducibility)
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Safety factor applied to heuristic kappa / mu estimates
    #[arg(long, global = true, default_value_t = 1.1)]
    safety: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Build a univariate max-of-parabolas approximation
    ApproxUni {
        #[command(flatten)]
        common: Common,
        /// Target expression in x1
        #[arg(long)]
        function: String,
        #[arg(long)]
        lower: f64,
        #[arg(long)]
        upper: f64,
        /// Sup-norm tolerance
        #[arg(long)]
        eps: f64,
        /// Lipschitz constant; estimated by dense sampling when absent
        #[arg(long)]
        kappa: Option<f64>,
        /// Certification samples per axis
        #[arg(long, default_value_t = 20_001)]
        density: usize,
        /// Model output path
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        /// Optional JSON error-report path
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build a difference-of-convex approximation for a smooth target
    ApproxC2 {
        #[command(flatten)]
        common: Common,
        /// Target expression in x1..xn
        #[arg(long)]
        function: String,
        #[arg(long)]
        dim: usize,
        /// Comma-separated lower bounds
        #[arg(long)]
        lower: String,
        /// Comma-separated upper bounds
        #[arg(long)]
        upper: String,
        /// Convexifying shift; estimated from sampled Hessians when absent
        #[arg(long)]
        mu: Option<f64>,
        /// Tangent-plane grid nodes per axis
        #[arg(long, default_value_t = 11)]
        grid: usize,
        /// Refine the grid until the sampled error reaches this tolerance
        #[arg(long)]
        target_eps: Option<f64>,
        /// Certification samples per axis
        #[arg(long, default_value_t = 201)]
        density: usize,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build a separable approximation from per-coordinate expressions
    ApproxSep {
        #[command(flatten)]
        common: Common,
        /// One univariate expression per coordinate (repeat the flag)
        #[arg(long = "component", required = true)]
        components: Vec<String>,
        #[arg(long)]
        lower: String,
        #[arg(long)]
        upper: String,
        #[arg(long)]
        eps: f64,
        /// Comma-separated per-coordinate Lipschitz constants
        #[arg(long)]
        kappa: Option<String>,
        /// Comma-separated per-coordinate tolerances (default: eps/n each)
        #[arg(long)]
        eps_split: Option<String>,
        /// Write explicit max-form pieces instead of the sum form
        #[arg(long)]
        expand: bool,
        #[arg(long, default_value_t = separable::DEFAULT_MAX_EXPANDED_PIECES)]
        max_pieces: u128,
        /// Certification samples per axis
        #[arg(long, default_value_t = 301)]
        density: usize,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a saved model at points
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Inline point as comma-separated coordinates (repeatable)
        #[arg(long = "point")]
        points: Vec<String>,
        /// CSV file of points with header x1,...,xn
        #[arg(long = "points")]
        points_file: Option<PathBuf>,
    },
    /// Re-certify a univariate model against its target function
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Target expression in x1
        #[arg(long)]
        function: String,
        /// Property-check samples per unit length
        #[arg(long, default_value_t = 10_000)]
        density: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Error-vs-spacing convergence study
    Study {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        function: String,
        #[arg(long)]
        lower: f64,
        #[arg(long)]
        upper: f64,
        #[arg(long)]
        kappa: Option<f64>,
        /// Comma-separated subinterval spacings
        #[arg(long)]
        deltas: String,
        /// Certification samples per axis
        #[arg(long, default_value_t = 20_001)]
        density: usize,
        /// CSV output path
        #[arg(long, default_value = "study.csv")]
        out: PathBuf,
    },
    /// Dump model samples to CSV for external plotting
    Sample {
        #[arg(long)]
        model: PathBuf,
        /// Samples per axis
        #[arg(long, default_value_t = 101)]
        density: usize,
        #[arg(long, default_value = "samples.csv")]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Build(String),
    Bound(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Build(_) => EXIT_BUILD,
            Failure::Bound(_) => EXIT_BOUND,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Build(m) | Failure::Bound(m) => m,
        }
    }
}

fn config<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

fn build_err<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Build(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Config(format!("invalid {what} entry `{t}`")))
        })
        .collect()
}

fn parse_function(source: &str, dim: usize) -> Result<ExprAst, Failure> {
    ExprAst::parse(source, dim).map_err(config)
}

fn write_report(report: &ErrorReport, path: Option<&Path>) -> Result<(), Failure> {
    if let Some(path) = path {
        std::fs::write(path, report.to_json() + "\n").map_err(build_err)?;
    }
    Ok(())
}

fn univariate_extras(grid: &UniGrid) -> Vec<Vec<f64>> {
    (1..=grid.n_p)
        .map(|i| vec![grid.midpoint(i)])
        .chain((0..=grid.n_p).map(|i| vec![grid.node(i)]))
        .collect()
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::ApproxUni {
            common,
            function,
            lower,
            upper,
            eps,
            kappa,
            density,
            out,
            report,
        } => {
            let ast = parse_function(&function, 1)?;
            let f = |x: f64| ast.eval(&[x]);
            if !(eps > 0.0) {
                return Err(Failure::Config(format!("--eps must be positive, got {eps}")));
            }
            let kappa_value = match kappa {
                Some(k) => k,
                None => {
                    analysis::estimate_lipschitz(f, lower, upper, 10_000, common.safety)
                        .map_err(build_err)?
                }
            };
            let kappa = Kappa::new(kappa_value).map_err(config)?;
            let (p, grid, mut meta) =
                univariate::build_univariate(f, lower, upper, kappa, eps).map_err(build_err)?;
            let extras = univariate_extras(&grid);
            let err_report = analysis::sup_error(
                |x: &[f64]| f(x[0]),
                &p,
                density,
                &extras,
                Some(2.5 * kappa.get() * grid.delta),
            )
            .map_err(build_err)?;
            meta.achieved_error = Some(err_report.max_abs_error);
            ModelFile::from_pwc(&p, meta).save(&out).map_err(build_err)?;
            write_report(&err_report, report.as_deref())?;
            println!(
                "builder=univariate kappa={} n_p={} delta={} max_error={} eps={}",
                kappa.get(),
                grid.n_p,
                grid.delta,
                err_report.max_abs_error,
                eps
            );
            println!("model written to {}", out.display());
            if err_report.max_abs_error <= eps {
                Ok(())
            } else {
                Err(Failure::Bound(format!(
                    "max_error {} exceeds eps {}",
                    err_report.max_abs_error, eps
                )))
            }
        }

        Command::ApproxC2 {
            common,
            function,
            dim,
            lower,
            upper,
            mu,
            grid,
            target_eps,
            density,
            out,
            report,
        } => {
            let ast = parse_function(&function, dim)?;
            let lower = parse_list(&lower, "--lower")?;
            let upper = parse_list(&upper, "--upper")?;
            if lower.len() != dim || upper.len() != dim {
                return Err(Failure::Config(format!(
                    "bounds must have {dim} entries (got {} and {})",
                    lower.len(),
                    upper.len()
                )));
            }
            let domain = BoxDomain::new(lower, upper).map_err(config)?;
            let f = |x: &[f64]| ast.eval(x);
            let (mu_value, heuristic) = match mu {
                Some(m) if m >= 0.0 => (m, false),
                Some(m) => {
                    return Err(Failure::Config(format!("--mu must be nonnegative, got {m}")))
                }
                None => (
                    dc::estimate_mu(f, &domain, 5, common.safety, 1e-3).map_err(build_err)?,
                    true,
                ),
            };
            let mut params = DcParams {
                mu: mu_value,
                grid_per_axis: grid,
                ..DcParams::default()
            };
            let mut built;
            let mut err_report;
            loop {
                built = dc::build_c2(f, &domain, &params).map_err(build_err)?;
                err_report = analysis::sup_error(f, &built.0, density, &[], target_eps)
                    .map_err(build_err)?;
                let Some(eps) = target_eps else { break };
                if err_report.max_abs_error <= eps {
                    break;
                }
                // refine: doubling cell counts keeps the previous nodes
                let next = params.grid_per_axis * 2 - 1;
                if (next as u128).pow(domain.dim() as u32) > dc::MAX_PLANES {
                    break;
                }
                params.grid_per_axis = next;
            }
            let (p, mut meta) = built;
            meta.mu_heuristic = Some(heuristic);
            meta.achieved_error = Some(err_report.max_abs_error);
            ModelFile::from_pwc(&p, meta).save(&out).map_err(build_err)?;
            write_report(&err_report, report.as_deref())?;
            println!(
                "builder=dc mu={}{} grid_per_axis={} pieces={} max_error={}",
                mu_value,
                if heuristic { " (heuristic)" } else { "" },
                params.grid_per_axis,
                p.pieces().len(),
                err_report.max_abs_error
            );
            println!("model written to {}", out.display());
            match target_eps {
                Some(eps) if err_report.max_abs_error > eps => Err(Failure::Bound(format!(
                    "max_error {} exceeds target eps {}",
                    err_report.max_abs_error, eps
                ))),
                _ => Ok(()),
            }
        }

        Command::ApproxSep {
            common,
            components,
            lower,
            upper,
            eps,
            kappa,
            eps_split,
            expand,
            max_pieces,
            density,
            out,
            report,
        } => {
            let n = components.len();
            let lower = parse_list(&lower, "--lower")?;
            let upper = parse_list(&upper, "--upper")?;
            if lower.len() != n || upper.len() != n {
                return Err(Failure::Config(format!(
                    "bounds must have one entry per component ({n})"
                )));
            }
            let domain = BoxDomain::new(lower, upper).map_err(config)?;
            let asts: Vec<ExprAst> = components
                .iter()
                .map(|src| parse_function(src, n))
                .collect::<Result<_, _>>()?;
            // each component must be univariate in a single coordinate
            let mut fns: Vec<Box<dyn Fn(f64) -> Result<f64, EvalError> + '_>> = Vec::new();
            for (j, ast) in asts.iter().enumerate() {
                let vars = ast.variables();
                let var = match vars.as_slice() {
                    [] => j,
                    [v] => *v,
                    _ => {
                        return Err(Failure::Config(format!(
                            "component {} references more than one variable",
                            j + 1
                        )))
                    }
                };
                fns.push(Box::new(ast.univariate_in(var)));
            }
            let kappas: Vec<f64> = match kappa {
                Some(text) => {
                    let list = parse_list(&text, "--kappa")?;
                    if list.len() != n {
                        return Err(Failure::Config(format!(
                            "--kappa must have {n} entries"
                        )));
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
                                common.safety,
                            )
                            .map_err(build_err)?,
                        );
                    }
                    estimated
                }
            };
            let split = match eps_split {
                Some(text) => Some(parse_list(&text, "--eps-split")?),
                None => None,
            };
            let pairs: Vec<(&dyn Fn(f64) -> Result<f64, EvalError>, Kappa)> = fns
                .iter()
                .zip(&kappas)
                .map(|(f, &k)| Ok((f.as_ref(), Kappa::new(k).map_err(config)?)))
                .collect::<Result<_, Failure>>()?;
            let (sf, mut meta) =
                separable::build_separable(&pairs, &domain, eps, split.as_deref())
                    .map_err(build_err)?;
            let truth = |x: &[f64]| -> Result<f64, EvalError> {
                let mut total = 0.0;
                for (j, f) in fns.iter().enumerate() {
                    total += f(x[j])?;
                }
                Ok(total)
            };
            let err_report =
                analysis::sup_error(truth, &sf, density, &[], Some(eps)).map_err(build_err)?;
            meta.achieved_error = Some(err_report.max_abs_error);
            if expand {
                let expanded = separable::expand_sumform(&sf, max_pieces).map_err(build_err)?;
                ModelFile::from_pwc(&expanded, meta)
                    .save(&out)
                    .map_err(build_err)?;
                println!(
                    "builder=separable (expanded) pieces={} max_error={}",
                    expanded.pieces().len(),
                    err_report.max_abs_error
                );
            } else {
                sf.to_model(meta).save(&out).map_err(build_err)?;
                let counts: Vec<String> = sf
                    .components()
                    .iter()
                    .map(|c| c.pieces().len().to_string())
                    .collect();
                println!(
                    "builder=separable components={} pieces=[{}] max_error={}",
                    n,
                    counts.join(","),
                    err_report.max_abs_error
                );
            }
            write_report(&err_report, report.as_deref())?;
            println!("model written to {}", out.display());
            if err_report.max_abs_error <= eps {
                Ok(())
            } else {
                Err(Failure::Bound(format!(
                    "max_error {} exceeds eps {}",
                    err_report.max_abs_error, eps
                )))
            }
        }

        Command::Eval {
            model,
            points,
            points_file,
        } => {
            let loaded = LoadedModel::load(&model)?;
            let mut all_points: Vec<Vec<f64>> = Vec::new();
            for text in &points {
                all_points.push(parse_list(text, "--point")?);
            }
            if let Some(path) = points_file {
                all_points.extend(read_points_csv(&path, loaded.dim())?);
            }
            if all_points.is_empty() {
                return Err(Failure::Config("no points given; use --point or --points".into()));
            }
            for x in &all_points {
                if x.len() != loaded.dim() {
                    return Err(Failure::Config(format!(
                        "point {:?} has dimension {}, model expects {}",
                        x,
                        x.len(),
                        loaded.dim()
                    )));
                }
                let (value, winner) = loaded.eval(x)?;
                println!("{value} {winner}");
            }
            Ok(())
        }

        Command::Check {
            common: _,
            model,
            function,
            density,
            report,
        } => {
            let file = ModelFile::load(&model).map_err(build_err)?;
            if file.kind != "pwc" || file.meta.builder.as_deref() != Some("univariate") {
                return Err(Failure::Config(
                    "check applies to models written by approx-uni".into(),
                ));
            }
            let (kappa, n_p) = match (file.meta.kappa, file.meta.n_p) {
                (Some(k), Some(n)) => (k, n),
                _ => {
                    return Err(Failure::Config(
                        "model metadata is missing kappa or n_p".into(),
                    ))
                }
            };
            let p = file.to_pwc().map_err(build_err)?;
            let grid = UniGrid::new(p.domain().lower[0], p.domain().upper[0], n_p)
                .map_err(config)?;
            let kappa = Kappa::new(kappa).map_err(config)?;
            let ast = parse_function(&function, 1)?;
            let f = |x: f64| ast.eval(&[x]);
            let props =
                analysis::check_properties(f, &p, &grid, kappa, density).map_err(build_err)?;
            let extras = univariate_extras(&grid);
            let err_report = analysis::sup_error(
                |x: &[f64]| f(x[0]),
                &p,
                20_001,
                &extras,
                Some(2.5 * kappa.get() * grid.delta),
            )
            .map_err(build_err)?;
            for check in &props.checks {
                match check.witness {
                    Some(w) if !check.pass => println!(
                        "{}: FAIL (margin {}, witness x = {})",
                        check.name, check.margin, w
                    ),
                    _ => println!("{}: {}", check.name, if check.pass { "pass" } else { "FAIL" }),
                }
            }
            println!(
                "sup_error: {} (bound {}) -> {}",
                err_report.max_abs_error,
                err_report.bound.unwrap_or(f64::NAN),
                if err_report.bound_satisfied { "pass" } else { "FAIL" }
            );
            if let Some(path) = report {
                let doc = serde_json::json!({
                    "properties": props,
                    "error": err_report,
                });
                std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap() + "\n")
                    .map_err(build_err)?;
            }
            if props.pass() && err_report.bound_satisfied {
                Ok(())
            } else {
                Err(Failure::Bound("one or more property checks failed".into()))
            }
        }

        Command::Study {
            common,
            function,
            lower,
            upper,
            kappa,
            deltas,
            density,
            out,
        } => {
            let ast = parse_function(&function, 1)?;
            let f = |x: f64| ast.eval(&[x]);
            let deltas = parse_list(&deltas, "--deltas")?;
            if deltas.iter().any(|&d| !(d > 0.0)) {
                return Err(Failure::Config("--deltas entries must be positive".into()));
            }
            let kappa_value = match kappa {
                Some(k) => k,
                None => analysis::estimate_lipschitz(f, lower, upper, 10_000, common.safety)
                    .map_err(build_err)?,
            };
            let kappa = Kappa::new(kappa_value).map_err(config)?;
            let rows = analysis::convergence_study(f, lower, upper, kappa, &deltas, density)
                .map_err(build_err)?;
            let csv = analysis::study_csv(&rows);
            std::fs::write(&out, &csv).map_err(build_err)?;
            print!("{csv}");
            println!("study written to {}", out.display());
            Ok(())
        }

        Command::Sample {
            model,
            density,
            out,
        } => {
            if density < 2 {
                return Err(Failure::Config("--density must be at least 2".into()));
            }
            let loaded = LoadedModel::load(&model)?;
            let n = loaded.dim();
            let domain = loaded.domain().clone();
            let header: Vec<String> = (1..=n).map(|j| format!("x{j}")).collect();
            let mut csv = format!("{},p,winner\n", header.join(","));
            let mut index = vec![0usize; n];
            let mut rows = 0usize;
            'grid: loop {
                let x: Vec<f64> = (0..n)
                    .map(|j| {
                        let t = index[j] as f64 / (density - 1) as f64;
                        domain.lower[j] + t * (domain.upper[j] - domain.lower[j])
                    })
                    .collect();
                let (value, winner) = loaded.eval(&x)?;
                let coords: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                csv.push_str(&format!("{},{value},{winner}\n", coords.join(",")));
                rows += 1;
                let mut j = n;
                loop {
                    if j == 0 {
                        break 'grid;
                    }
                    j -= 1;
                    index[j] += 1;
                    if index[j] < density {
                        break;
                    }
                    index[j] = 0;
                }
            }
            std::fs::write(&out, csv).map_err(build_err)?;
            println!("{rows} samples written to {}", out.display());
            Ok(())
        }
    }
}

enum LoadedModel {
    Pwc(PwcFunction),
    Sum(SumForm),
}

impl LoadedModel {
    fn load(path: &Path) -> Result<Self, Failure> {
        let file = ModelFile::load(path).map_err(build_err)?;
        match file.kind.as_str() {
            "pwc" => Ok(LoadedModel::Pwc(file.to_pwc().map_err(build_err)?)),
            "sumform" => Ok(LoadedModel::Sum(
                SumForm::from_model(&file).map_err(build_err)?,
            )),
            other => Err(Failure::Build(format!("unknown model kind `{other}`"))),
        }
    }

    fn dim(&self) -> usize {
        match self {
            LoadedModel::Pwc(p) => p.dim(),
            LoadedModel::Sum(s) => s.dim(),
        }
    }

    fn domain(&self) -> &BoxDomain {
        match self {
            LoadedModel::Pwc(p) => p.domain(),
            LoadedModel::Sum(s) => s.domain(),
        }
    }

    /// Value plus a winner label: the piece index for max-form models, the
    /// per-component winner indices joined by `|` for sum-form models.
    fn eval(&self, x: &[f64]) -> Result<(f64, String), Failure> {
        match self {
            LoadedModel::Pwc(p) => {
                let (v, w) = p.eval(x).map_err(build_err)?;
                Ok((v, w.to_string()))
            }
            LoadedModel::Sum(s) => {
                let v = s.eval(x).map_err(build_err)?;
                let winners = s.winners(x).map_err(build_err)?;
                let label: Vec<String> = winners.iter().map(|w| w.to_string()).collect();
                Ok((v, label.join("|")))
            }
        }
    }
}

fn read_points_csv(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>, Failure> {
    let text = std::fs::read_to_string(path).map_err(build_err)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Failure::Config("points file is empty".into()))?;
    let expected: Vec<String> = (1..=dim).map(|j| format!("x{j}")).collect();
    if header.trim() != expected.join(",") {
        return Err(Failure::Config(format!(
            "points header `{header}` does not match expected `{}`",
            expected.join(",")
        )));
    }
    let mut points = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        points.push(parse_list(line, "points row")?);
    }
    Ok(points)
}
