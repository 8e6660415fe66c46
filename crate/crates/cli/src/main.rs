//! `pio`: spectra, resolvent solves and oracle checks for partial integral
//! operator models described by a JSON file.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 model validation failure,
//! 3 refusal because the request lies outside the theory (reason on stderr).

mod canonical;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use pio_core::expr::parse_expr2;
use pio_core::model::{validate_model, DiscreteModel, PioModel, DEFAULT_ORTHO_TOL};
use pio_core::oracle::{compare_spectra, nystrom_matrix, oracle_eigs};
use pio_core::pie::{classify_tau, residual, solve_pie, TauKind};
use pio_core::quadrature::Grid2D;
use pio_core::spectrum::{
    delta_trace, discrete_spectrum, eigenfunctions_t, sigma_full, Path, SearchOptions,
};
use pio_core::SpectralError;

#[derive(Debug, Parser)]
#[command(
    name = "pio",
    version,
    about = "Spectral analysis of partial integral operators T = T1 + T2"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
struct SearchOverrides {
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    scan_points: Option<usize>,
    #[arg(long)]
    root_tol: Option<f64>,
    #[arg(long)]
    rank_tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check orthonormality, boundedness and evaluability.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_ORTHO_TOL)]
        ortho_tol: f64,
    },
    /// Essential and discrete spectrum.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchOverrides,
        #[arg(long, default_value_t = 1)]
        path: u8,
    },
    /// Discrete eigenvalues only.
    Discrete {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchOverrides,
        #[arg(long, default_value_t = 1)]
        path: u8,
    },
    /// Solve f - τ T f = g on the quadrature grid.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        tau: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau_im: f64,
        /// Right-hand side in x and y.
        #[arg(long)]
        rhs: String,
        #[command(flatten)]
        search: SearchOverrides,
    },
    /// Δ(λ) on an equispaced range, as CSV.
    DeltaTrace {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        lmin: f64,
        #[arg(long, allow_hyphen_values = true)]
        lmax: f64,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        path: u8,
    },
    /// Compare the analytic spectrum with a Nyström discretisation.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        nx: usize,
        #[arg(long, default_value_t = 100)]
        ny: usize,
        #[arg(long, default_value_t = 5e-3)]
        tol_disc: f64,
        #[arg(long, default_value_t = 2e-2)]
        tol_ess: f64,
        #[command(flatten)]
        search: SearchOverrides,
    },
    /// Orthonormal eigenfunctions for a discrete eigenvalue, as CSV.
    Eigenfunction {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[command(flatten)]
        search: SearchOverrides,
    },
}

enum Failure {
    Usage(String),
    Validation(String),
    Refusal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Refusal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Validation(m) | Failure::Refusal(m) => m,
        }
    }
}

fn refusal(e: SpectralError) -> Failure {
    match e {
        SpectralError::GridMismatch(_) | SpectralError::IndexOutOfRange { .. } => {
            Failure::Usage(e.to_string())
        }
        other => Failure::Refusal(other.to_string()),
    }
}

fn load(path: &PathBuf) -> Result<PioModel, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    PioModel::from_json_str(&text).map_err(|e| Failure::Usage(e.to_string()))
}

fn apply_overrides(m: &mut PioModel, s: &SearchOverrides) -> Result<(), Failure> {
    if let Some(v) = s.margin {
        if !(v.is_finite() && v > 0.0) {
            return Err(Failure::Usage(format!(
                "--margin must be positive, got {v}"
            )));
        }
        m.search.margin = Some(v);
    }
    if let Some(v) = s.scan_points {
        if v < 3 {
            return Err(Failure::Usage(format!(
                "--scan-points must be at least 3, got {v}"
            )));
        }
        m.search.scan_points = v;
    }
    if let Some(v) = s.root_tol {
        if !(v.is_finite() && v > 0.0) {
            return Err(Failure::Usage(format!(
                "--root-tol must be positive, got {v}"
            )));
        }
        m.search.root_tol = v;
    }
    if let Some(v) = s.rank_tol {
        if !(v.is_finite() && v > 0.0) {
            return Err(Failure::Usage(format!(
                "--rank-tol must be positive, got {v}"
            )));
        }
        m.search.rank_tol = v;
    }
    Ok(())
}

/// Load, override, validate and sample.
fn prepare(common: &Common, search: &SearchOverrides) -> Result<DiscreteModel, Failure> {
    let mut m = load(&common.model)?;
    apply_overrides(&mut m, search)?;
    let report = validate_model(&m, DEFAULT_ORTHO_TOL);
    if !report.passed() {
        let mut msg = String::from("model validation failed:");
        for c in report.failures() {
            let _ = write!(msg, "\n  {}: {}", c.name, c.detail);
        }
        return Err(Failure::Validation(msg));
    }
    DiscreteModel::new(m).map_err(|e| Failure::Validation(e.to_string()))
}

fn path_arg(p: u8) -> Result<Path, Failure> {
    Path::from_index(p).ok_or_else(|| Failure::Usage(format!("--path must be 1 or 2, got {p}")))
}

fn emit(common: &Common, text: &str) -> Result<(), Failure> {
    match &common.out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => write_stdout(text),
    }
}

/// A closed pipe on standard output is not an error of the tool.
fn write_stdout(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Usage(format!(
            "cannot write to standard output: {e}"
        ))),
        _ => Ok(()),
    }
}

fn grid_csv(fs: &[Grid2D], names: &[String]) -> String {
    let mut out = String::from("x,y");
    for n in names {
        let _ = write!(out, ",re_{n},im_{n}");
    }
    out.push('\n');
    let Some(first) = fs.first() else {
        return out;
    };
    let rules = first.rules();
    for (p, &x) in rules.x.nodes().iter().enumerate() {
        for (q, &y) in rules.y.nodes().iter().enumerate() {
            out.push_str(&canonical::float(x));
            out.push(',');
            out.push_str(&canonical::float(y));
            for f in fs {
                let v = f.at(p, q);
                let _ = write!(
                    out,
                    ",{},{}",
                    canonical::float(v.re),
                    canonical::float(v.im)
                );
            }
            out.push('\n');
        }
    }
    out
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { common, ortho_tol } => {
            let m = load(&common.model)?;
            let report = validate_model(&m, ortho_tol);
            emit(&common, &canonical::to_string(&report))?;
            if report.passed() {
                Ok(())
            } else {
                let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
                Err(Failure::Validation(format!(
                    "model validation failed: {}",
                    names.join(", ")
                )))
            }
        }
        Command::Spectrum {
            common,
            search,
            path,
        } => {
            let path = path_arg(path)?;
            let m = prepare(&common, &search)?;
            let opts = SearchOptions {
                path,
                ..SearchOptions::for_model(&m)
            };
            emit(&common, &canonical::to_string(&sigma_full(&m, &opts)))
        }
        Command::Discrete {
            common,
            search,
            path,
        } => {
            let path = path_arg(path)?;
            let m = prepare(&common, &search)?;
            let opts = SearchOptions {
                path,
                ..SearchOptions::for_model(&m)
            };
            let d = discrete_spectrum(&m, &opts);
            let v = json!({
                "discrete": d.eigenvalues,
                "multiplicity_kind": pio_core::spectrum::MULTIPLICITY_KIND,
                "unresolved_bands": d.unresolved_bands,
                "scan_step": d.scan_step,
                "settings": opts,
            });
            emit(&common, &canonical::to_string(&v))
        }
        Command::Solve {
            common,
            tau,
            tau_im,
            rhs,
            search,
        } => {
            let m = prepare(&common, &search)?;
            let expr = parse_expr2(&rhs).map_err(|e| Failure::Usage(format!("--rhs: {e}")))?;
            let g = Grid2D::try_from_fn(m.rules().clone(), |x, y| {
                expr.eval(x, y)
                    .map(|v| Complex64::new(v, 0.0))
                    .map_err(|e| Failure::Usage(format!("--rhs at ({x}, {y}): {e}")))
            })?;
            let tau = Complex64::new(tau, tau_im);
            let class = classify_tau(&m, tau);
            match class.class {
                TauKind::Zero | TauKind::ChannelSingular => {
                    return Err(Failure::Refusal(format!(
                        "OutsideTheory: τ = {tau} is {:?}",
                        class.class
                    )))
                }
                TauKind::Eigen => {
                    return Err(Failure::Refusal(format!(
                        "NonUniqueSolution: 1/τ = {} is a discrete eigenvalue of T",
                        1.0 / tau
                    )))
                }
                TauKind::Regular => {}
            }
            let f = solve_pie(&m, tau, &g).map_err(|e| Failure::Refusal(e.to_string()))?;
            let res = residual(&m, tau, &f, &g).map_err(refusal)?;
            emit(&common, &grid_csv(&[f], &["f".to_string()]))?;
            let summary = canonical::to_string(&json!({
                "tau": tau,
                "class": class.class,
                "singular_ratio": class.singular_ratio,
                "residual": res,
                "grid": {"nx": m.nx(), "ny": m.ny()},
            }));
            if common.out.is_some() {
                write_stdout(&summary)?;
            } else {
                eprint!("{summary}");
            }
            Ok(())
        }
        Command::DeltaTrace {
            common,
            lmin,
            lmax,
            samples,
            path,
        } => {
            let path = path_arg(path)?;
            if samples == 0 || !lmin.is_finite() || !lmax.is_finite() || lmin > lmax {
                return Err(Failure::Usage(
                    "need finite --lmin <= --lmax and --samples >= 1".into(),
                ));
            }
            let m = prepare(&common, &SearchOverrides::default())?;
            let mut out = String::from("lambda,re_delta,im_delta,path\n");
            for row in delta_trace(&m, lmin, lmax, samples, path) {
                let d = row.delta.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    canonical::float(row.lambda),
                    canonical::float(d.re),
                    canonical::float(d.im),
                    path
                );
            }
            emit(&common, &out)
        }
        Command::OracleCheck {
            common,
            nx,
            ny,
            tol_disc,
            tol_ess,
            search,
        } => {
            let m = prepare(&common, &search)?;
            let sys =
                nystrom_matrix(m.model(), nx, ny).map_err(|e| Failure::Usage(e.to_string()))?;
            let eigs = oracle_eigs(&sys).map_err(|e| Failure::Refusal(e.to_string()))?;
            let report = sigma_full(&m, &SearchOptions::for_model(&m));
            let cmp = compare_spectra(&report, &eigs, tol_disc, tol_ess);
            let head: Vec<f64> = eigs.iter().rev().take(10).copied().collect();
            let v = json!({
                "nystrom": {"Nx": nx, "Ny": ny},
                "eigs_head": head,
                "mismatches": cmp.mismatches,
                "tol_disc": tol_disc,
                "tol_ess": tol_ess,
                "discrete": report.discrete,
                "symmetry_defect": sys.symmetry_defect(),
            });
            emit(&common, &canonical::to_string(&v))
        }
        Command::Eigenfunction {
            common,
            lambda,
            search,
        } => {
            let m = prepare(&common, &search)?;
            let fs = eigenfunctions_t(&m, lambda).map_err(refusal)?;
            let names: Vec<String> = (1..=fs.len()).map(|i| format!("f{i}")).collect();
            emit(&common, &grid_csv(&fs, &names))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}
