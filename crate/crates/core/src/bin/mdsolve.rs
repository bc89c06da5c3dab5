use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mdsolve::amg::{AmgHierarchy, AmgParams};
use mdsolve::assembly::BlockSystem;
use mdsolve::bench::{
    build_system, emit_table, run_sweep, solve_system, Geometry, PrecondChoice, PrecondOverrides,
    SweepSpec, TableFormat,
};
use mdsolve::io::{export_system, import_system};
use mdsolve::krylov::SolveConfig;
use mdsolve::precond::{approx_schur, InnerSolver, SchurMode};
use mdsolve::sparse::mm::read_matrix_market;
use mdsolve::Result;

#[derive(Parser)]
#[command(
    name = "mdsolve",
    version,
    about = "Block-preconditioned solvers for mixed-dimensional flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a grid and print its subdomain/interface summary.
    Generate {
        #[command(flatten)]
        geo: GeometryArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble a system and print block statistics.
    Assemble {
        #[command(flatten)]
        geo: GeometryArgs,
        #[command(flatten)]
        phys: PhysicsArgs,
    },
    /// Solve one system with GMRES.
    Solve {
        #[command(flatten)]
        source: SystemSource,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "ml")]
        precond: PrecondChoice,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
        /// Write the residual history as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep and print an iteration table.
    Sweep {
        /// TOML sweep description; flags below are ignored when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "cross_2d")]
        geometry: GeometryName,
        #[arg(long = "n", default_values_t = [16usize, 32, 64])]
        sizes: Vec<usize>,
        #[arg(long = "refinement", default_values_t = [1usize])]
        refinements: Vec<usize>,
        #[arg(long = "kpar", default_values_t = [1e-4, 1.0, 1e4])]
        k_parallel: Vec<f64>,
        #[arg(long = "kappa", default_values_t = [1e-4, 1.0, 1e4])]
        kappa: Vec<f64>,
        #[arg(long = "precond", default_values_t = [PrecondChoice::Ml])]
        precond: Vec<PrecondChoice>,
        #[arg(long, default_value_t = 4)]
        fractures: usize,
        #[arg(long, default_value_t = 3)]
        planes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "markdown")]
        format: TableFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble a system and write it as Matrix Market blocks plus sidecar.
    Export {
        #[command(flatten)]
        geo: GeometryArgs,
        #[command(flatten)]
        phys: PhysicsArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read and validate an exported system directory.
    Import {
        #[arg(long)]
        system: PathBuf,
    },
    /// Print the AMG hierarchy for a Matrix Market file, or for the
    /// approximate Schur complement of a generated system.
    AmgStats {
        #[arg(long, conflicts_with = "geometry")]
        matrix: Option<PathBuf>,
        #[command(flatten)]
        geo: GeometryArgs,
        #[command(flatten)]
        phys: PhysicsArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryName {
    #[value(name = "cross_2d")]
    Cross2d,
    #[value(name = "random_2d")]
    Random2d,
    #[value(name = "regular_3d")]
    Regular3d,
}

#[derive(Args)]
struct GeometryArgs {
    #[arg(long, default_value = "cross_2d")]
    geometry: GeometryName,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    refinement: usize,
    /// Number of segments for random_2d.
    #[arg(long, default_value_t = 4)]
    fractures: usize,
    /// Number of planes for regular_3d.
    #[arg(long, default_value_t = 3)]
    planes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PhysicsArgs {
    #[arg(long, default_value_t = 1.0)]
    kpar: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    matrix_permeability: f64,
}

#[derive(Args)]
struct SystemSource {
    /// Exported system directory; overrides the geometry flags.
    #[arg(long)]
    system: Option<PathBuf>,
    #[command(flatten)]
    geo: GeometryArgs,
    #[command(flatten)]
    phys: PhysicsArgs,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long)]
    restart: Option<usize>,
    #[arg(long, value_enum)]
    schur: Option<SchurArg>,
    #[arg(long, value_enum)]
    inner_omega: Option<InnerArg>,
    #[arg(long, value_enum)]
    inner_gamma: Option<InnerArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchurArg {
    Diag,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum InnerArg {
    Amg,
    Direct,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

impl GeometryArgs {
    fn geometry(&self) -> Geometry {
        geometry(self.geometry, self.fractures, self.planes, self.seed)
    }

    fn system(&self, phys: &PhysicsArgs) -> Result<BlockSystem> {
        let (_, s) = build_system(
            &self.geometry(),
            self.n,
            self.refinement,
            phys.matrix_permeability,
            phys.kpar,
            phys.kappa,
        )?;
        Ok(s)
    }
}

fn geometry(name: GeometryName, fractures: usize, planes: usize, seed: u64) -> Geometry {
    match name {
        GeometryName::Cross2d => Geometry::Cross2d,
        GeometryName::Random2d => Geometry::Random2d { fractures, seed },
        GeometryName::Regular3d => Geometry::Regular3d { planes },
    }
}

impl SolverArgs {
    fn config(&self) -> SolveConfig {
        SolveConfig {
            rel_tol: self.tol,
            max_iters: self.max_iters,
            restart: self.restart,
            ..SolveConfig::default()
        }
    }

    fn overrides(&self) -> PrecondOverrides {
        let inner = |a: Option<InnerArg>| {
            a.map(|a| match a {
                InnerArg::Amg => InnerSolver::Amg,
                InnerArg::Direct => InnerSolver::Direct,
                InnerArg::Auto => InnerSolver::Auto,
            })
        };
        PrecondOverrides {
            schur: self.schur.map(|s| match s {
                SchurArg::Diag => SchurMode::DiagonalApprox,
                SchurArg::Exact => SchurMode::Exact,
            }),
            inner_omega: inner(self.inner_omega),
            inner_gamma: inner(self.inner_gamma),
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn describe_system(s: &BlockSystem) -> String {
    let sym = s.omega_gamma() == &s.gamma_omega().transpose();
    format!(
        "dofs {} (omega {}, gamma {})\n\
         A_omega_omega {}x{} nnz {}\nA_omega_gamma {}x{} nnz {}\n\
         A_gamma_omega {}x{} nnz {}\nA_gamma_gamma {}x{} nnz {} diagonal {}\n\
         A_omega_gamma == A_gamma_omega^T: {sym}\n",
        s.dim(),
        s.n_omega(),
        s.n_gamma(),
        s.omega_omega().nrows(),
        s.omega_omega().ncols(),
        s.omega_omega().nnz(),
        s.omega_gamma().nrows(),
        s.omega_gamma().ncols(),
        s.omega_gamma().nnz(),
        s.gamma_omega().nrows(),
        s.gamma_omega().ncols(),
        s.gamma_omega().nnz(),
        s.gamma_gamma().nrows(),
        s.gamma_gamma().ncols(),
        s.gamma_gamma().nnz(),
        s.gamma_gamma().is_diagonal(),
    )
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { geo, format, out } => {
            let summary = geo.geometry().build_grid(geo.n, geo.refinement)?.summary();
            let text = match format {
                ReportFormat::Text => summary.to_string(),
                ReportFormat::Json => serde_json::to_string_pretty(&summary)? + "\n",
            };
            emit(&text, out.as_deref())?;
        }
        Command::Assemble { geo, phys } => {
            print!("{}", describe_system(&geo.system(&phys)?));
        }
        Command::Solve {
            source,
            solver,
            precond,
            format,
            out,
        } => {
            let system = match &source.system {
                Some(dir) => import_system(dir)?,
                None => source.geo.system(&source.phys)?,
            };
            let report = solve_system(&system, precond, &solver.overrides(), &solver.config())?;
            match format {
                ReportFormat::Text => println!(
                    "{}: converged {} in {} iterations, relative residual {:.3e}, setup {:.3}s, solve {:.3}s",
                    precond.label(),
                    report.converged,
                    report.iterations,
                    report.true_residual,
                    report.setup_seconds,
                    report.solve_seconds
                ),
                ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            if let Some(p) = out {
                report.save_history_csv(&p)?;
            }
            return Ok(report.converged);
        }
        Command::Sweep {
            config,
            geometry: name,
            sizes,
            refinements,
            k_parallel,
            kappa,
            precond,
            fractures,
            planes,
            seed,
            solver,
            format,
            out,
        } => {
            let spec = match config {
                Some(path) => SweepSpec::load(&path)?,
                None => SweepSpec {
                    refinements,
                    k_parallel,
                    kappa,
                    preconditioners: precond,
                    overrides: solver.overrides(),
                    solver: solver.config(),
                    ..SweepSpec::standard(geometry(name, fractures, planes, seed), sizes)
                },
            };
            let result = run_sweep(&spec)?;
            emit(&emit_table(&result, format)?, out.as_deref())?;
            return Ok(result.all_converged());
        }
        Command::Export { geo, phys, out } => {
            let s = geo.system(&phys)?;
            export_system(&s, &out)?;
            println!("wrote {} dofs to {}", s.dim(), out.display());
        }
        Command::Import { system } => {
            print!("{}", describe_system(&import_system(&system)?));
        }
        Command::AmgStats { matrix, geo, phys } => {
            let a = match matrix {
                Some(p) => read_matrix_market(&p)?,
                None => approx_schur(&geo.system(&phys)?)?,
            };
            print!(
                "{}",
                AmgHierarchy::setup(&a, &AmgParams::default())?.stats()
            );
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
