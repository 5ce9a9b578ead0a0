use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use eigstab::cli::config::{DomainConfig, TriangleCase};
use eigstab::cli::{self, CliError, RunConfig};
use eigstab::mesh::MeshPattern;
use eigstab::stabilize::WeightMode;

/// Stable computation of Dirichlet-Laplacian eigenfunctions for tightly
/// clustered eigenvalues on perturbed polygons.
#[derive(Debug, Parser)]
#[command(
    name = "eigstab",
    version,
    after_help = "Configuration comes from an optional JSON file (--config); \
                  flags override config fields. EIGSTAB_THREADS caps the \
                  pipeline parallelism. Exit codes: 0 success, 1 config \
                  error, 2 numerical failure."
)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Perturbation magnitude.
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Rectangle mesh diagonal pattern.
    #[arg(long, global = true, value_enum)]
    pattern: Option<PatternArg>,

    /// Cells per unit side for rectangle meshes.
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Refinement levels for triangle and polygon meshes.
    #[arg(long, global = true)]
    levels: Option<u32>,

    /// Switch the domain to the perturbed equilateral triangle, case A-D.
    #[arg(long, global = true, value_enum)]
    case: Option<CaseArg>,

    /// First clustered eigenvalue index (1-based).
    #[arg(long = "cluster-first", global = true)]
    cluster_first: Option<usize>,

    /// Last clustered eigenvalue index (1-based).
    #[arg(long = "cluster-last", global = true)]
    cluster_last: Option<usize>,

    /// Relative residual target of the eigensolver.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Eigensolver iteration cap.
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,

    /// Right-hand form weight: paper (d_j) or det (|det S_j|).
    #[arg(long = "weight-mode", global = true, value_enum)]
    weight_mode: Option<WeightArg>,

    /// Output directory.
    #[arg(long = "out-dir", global = true)]
    out_dir: Option<PathBuf>,

    /// Skip VTK output.
    #[arg(long = "no-vtk", global = true)]
    no_vtk: bool,

    /// Skip CSV output.
    #[arg(long = "no-csv", global = true)]
    no_csv: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the domain mesh and export it as VTK.
    Mesh,
    /// Solve the Dirichlet eigenproblem on the configured domain.
    Solve,
    /// Run the stabilization pipeline on the configured cluster.
    Stabilize,
    /// Rectangle experiment: quotients and antisymmetry across eps = 1e-1,
    /// 1e-5, 1e-10 for standard FEM and the stabilized method.
    Table1,
    /// The four perturbed-triangle cases A-D.
    TriangleStudy,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PatternArg {
    Left,
    Right,
    Crossed,
}

impl From<PatternArg> for MeshPattern {
    fn from(p: PatternArg) -> Self {
        match p {
            PatternArg::Left => MeshPattern::Left,
            PatternArg::Right => MeshPattern::Right,
            PatternArg::Crossed => MeshPattern::Crossed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseArg {
    A,
    B,
    C,
    D,
}

impl From<CaseArg> for TriangleCase {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::A => TriangleCase::A,
            CaseArg::B => TriangleCase::B,
            CaseArg::C => TriangleCase::C,
            CaseArg::D => TriangleCase::D,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightArg {
    Paper,
    Det,
}

impl From<WeightArg> for WeightMode {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Paper => WeightMode::PaperD,
            WeightArg::Det => WeightMode::Det,
        }
    }
}

fn apply_overrides(config: &mut RunConfig, cli: &Cli) {
    if let Some(case) = cli.case {
        let eps = cli.eps.unwrap_or_else(|| {
            let e = config.domain.eps();
            if e > 0.0 {
                e
            } else {
                1e-6
            }
        });
        config.domain = DomainConfig::Triangle {
            case: case.into(),
            eps,
        };
    } else if let Some(eps) = cli.eps {
        config.domain.set_eps(eps);
    }
    if let Some(p) = cli.pattern {
        config.mesh.pattern = p.into();
    }
    if let Some(n) = cli.n {
        config.mesh.n = n;
    }
    if let Some(levels) = cli.levels {
        config.mesh.levels = levels;
    }
    if let Some(first) = cli.cluster_first {
        config.cluster.first = first;
    }
    if let Some(last) = cli.cluster_last {
        config.cluster.last = last;
    }
    if let Some(tol) = cli.tol {
        config.solver.tol = tol;
    }
    if let Some(max_iter) = cli.max_iter {
        config.solver.max_iter = max_iter;
    }
    if let Some(mode) = cli.weight_mode {
        config.weight_mode = mode.into();
    }
    if let Some(dir) = &cli.out_dir {
        config.outputs.dir = dir.clone();
    }
    if cli.no_vtk {
        config.outputs.emit_vtk = false;
    }
    if cli.no_csv {
        config.outputs.emit_csv = false;
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut config, cli);
    config.validate()?;
    match cli.command {
        Command::Mesh => cli::run_mesh(&config),
        Command::Solve => cli::run_solve(&config),
        Command::Stabilize => cli::run_stabilize(&config),
        Command::Table1 => cli::run_table1(&config),
        Command::TriangleStudy => cli::run_triangle_study(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
