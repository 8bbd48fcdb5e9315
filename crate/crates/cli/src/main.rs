//! `lagsol`: build, check and export Lagrangian solitons.
//!
//! Exit codes: 0 all checks pass, 2 invalid input, 3 numerical failure,
//! 4 a verification check failed.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "lagsol", version, about = "Lagrangian mean curvature flow solitons from quadrics")]
struct Cli {
    /// key = value file; flags on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "LAGSOL_OUT_DIR", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    cmd: Cmd,
}

/// Mesh sampling and export controls.
#[derive(Args, Debug, Clone)]
pub struct Sampling {
    /// Number of curve parameter values.
    #[arg(long, default_value_t = 40)]
    pub samples: usize,
    /// Quadric points per parameter value.
    #[arg(long, default_value_t = 6)]
    pub points: usize,
    /// Half-width of the box for non-compact quadric directions.
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Mesh points that also get the finite-difference soliton check.
    #[arg(long, default_value_t = 24)]
    pub verify_points: usize,
    /// Also write a PLY vertex cloud.
    #[arg(long)]
    pub ply: bool,
    /// PLY projection ℝ²ⁿ → ℝ³ as three `;`-separated rows.
    #[arg(long, allow_hyphen_values = true)]
    pub projection: Option<String>,
}

/// Data of a periodic-type solution.
#[derive(Args, Debug, Clone)]
pub struct PeriodicData {
    /// Signs λ_j = ±1, positives first.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub lambdas: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    /// α_j > 0 at the base point u = 0.
    #[arg(long, value_delimiter = ',', required = true)]
    pub alphas: Vec<f64>,
    /// First-integral constant A > 0 at the base point.
    #[arg(long)]
    pub first_integral: f64,
    /// Initial angles ψ_j (default 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub psi: Option<Vec<f64>>,
    /// Largest denominator tried when looking for closed orbits.
    #[arg(long, default_value_t = 64)]
    pub qmax: i64,
    /// Tolerance for rational detection of holonomies.
    #[arg(long, default_value_t = 64e-9)]
    pub detect_tol: f64,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Expander-type profile, mesh, asymptotic planes and checks.
    Expander {
        /// Ambient dimension (checked against --a).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        psi: Option<Vec<f64>>,
        /// Mesh covers y ∈ [−y_max, y_max].
        #[arg(long, default_value_t = 3.0)]
        y_max: f64,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Compact shrinker: all λ_j = +1 and α < 0.
    Shrinker {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[arg(long)]
        first_integral: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        psi: Option<Vec<f64>>,
        #[arg(long, default_value_t = 64)]
        qmax: i64,
        #[arg(long, default_value_t = 64e-9)]
        detect_tol: f64,
        /// Write a mesh when the orbit closes.
        #[arg(long)]
        mesh: bool,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Period, holonomies and closing verdict.
    Periodic {
        #[command(flatten)]
        data: PeriodicData,
        /// Write a mesh when the orbit closes.
        #[arg(long)]
        mesh: bool,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Newton search for data with prescribed holonomies.
    PeriodicSearch {
        #[command(flatten)]
        data: PeriodicData,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        target: Vec<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 40)]
        max_iterations: usize,
    },
    /// Translating soliton over an expander-type base in dimension n−1.
    Translator {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        /// n−1 positive constants.
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        psi: Option<Vec<f64>>,
        /// Integration constant K as `re,im` (default 0).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        k: Option<Vec<f64>>,
        #[arg(long, default_value_t = 3.0)]
        y_max: f64,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Solve for the constants a_j giving prescribed asymptotic angles.
    InvertAngles {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        target: Vec<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Re-read an exported run and recompute every residual.
    Verify {
        /// Directory holding run.cfg and mesh.csv (default: --out).
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, default_value_t = 24)]
        verify_points: usize,
        #[arg(long, default_value_t = 1e-9)]
        mesh_tol: f64,
    },
    /// Meshes of the family L_t over a closed orbit.
    FlowFamily {
        #[command(flatten)]
        data: PeriodicData,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        t_list: Vec<f64>,
        #[command(flatten)]
        sampling: Sampling,
    },
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    ExitCode::from(commands::exit_code(run(args)))
}

fn run(args: Vec<String>) -> Result<commands::Outcome, commands::CliError> {
    use commands::CliError;
    let args = match config::config_path(&args) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("config {path}: {e}")))?;
            let entries = config::parse(&text).map_err(|e| CliError::Usage(format!("config {path}: {e}")))?;
            config::merge(&args, &entries).map_err(|e| CliError::Usage(format!("config {path}: {e}")))?
        }
        None => args,
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(commands::Outcome::pass());
            }
            let msg = e.to_string();
            return Err(CliError::Usage(msg.trim_start_matches("error: ").trim_end().to_string()));
        }
    };
    let out = cli.out;
    match cli.cmd {
        Cmd::Expander {
            n,
            alpha,
            a,
            psi,
            y_max,
            sampling,
        } => commands::expander(&out, n, alpha, a, psi, y_max, &sampling),
        Cmd::Shrinker {
            alpha,
            alphas,
            first_integral,
            psi,
            qmax,
            detect_tol,
            mesh,
            sampling,
        } => {
            let data = PeriodicData {
                lambdas: vec![1.0; alphas.len()],
                alpha,
                alphas,
                first_integral,
                psi,
                qmax,
                detect_tol,
            };
            commands::periodic(&out, "shrinker", &data, mesh, &sampling)
        }
        Cmd::Periodic { data, mesh, sampling } => commands::periodic(&out, "periodic", &data, mesh, &sampling),
        Cmd::PeriodicSearch {
            data,
            target,
            tol,
            max_iterations,
        } => commands::periodic_search(&out, &data, target, tol, max_iterations),
        Cmd::Translator {
            alpha,
            a,
            psi,
            k,
            y_max,
            sampling,
        } => commands::translator(&out, alpha, a, psi, k, y_max, &sampling),
        Cmd::InvertAngles { alpha, target, tol } => commands::invert_angles(alpha, target, tol),
        Cmd::Verify {
            dir,
            run,
            mesh,
            verify_points,
            mesh_tol,
        } => {
            let dir = dir.unwrap_or(out);
            let run = run.unwrap_or_else(|| dir.join("run.cfg"));
            let mesh = mesh.unwrap_or_else(|| dir.join("mesh.csv"));
            commands::verify(&dir, &run, &mesh, verify_points, mesh_tol)
        }
        Cmd::FlowFamily { data, t_list, sampling } => commands::flow_family(&out, &data, &t_list, &sampling),
    }
}
