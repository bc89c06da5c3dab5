//! Parameter sweeps over geometry, mesh size and fracture permeabilities,
//! rendered as iteration-count tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, BlockSystem, PhysicalParams};
use crate::error::{Error, Result};
use crate::grid::{
    build_cross_2d, build_random_network_2d, build_regular_network_3d, GridOptions, MixedDimGrid,
};
use crate::io::import_system;
use crate::krylov::{gmres, Identity, SolveConfig, SolveReport};
use crate::precond::{
    BlockKind, BlockPreconditioner, InnerSolver, PreconditionerConfig, SchurMode,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Two crossing fractures through the unit square.
    #[serde(rename = "cross_2d")]
    Cross2d,
    /// Random axis-aligned fracture segments in the unit square.
    #[serde(rename = "random_2d")]
    Random2d { fractures: usize, seed: u64 },
    /// Evenly spaced axis-orthogonal planes in the unit cube.
    #[serde(rename = "regular_3d")]
    Regular3d { planes: usize },
    /// A system directory written by `export_system`.
    Imported { path: PathBuf },
}

impl Geometry {
    pub fn label(&self) -> String {
        match self {
            Geometry::Cross2d => "cross_2d".into(),
            Geometry::Random2d { fractures, seed } => {
                format!("random_2d(f={fractures},seed={seed})")
            }
            Geometry::Regular3d { planes } => format!("regular_3d(planes={planes})"),
            Geometry::Imported { path } => format!("imported({})", path.display()),
        }
    }

    pub fn build_grid(&self, n: usize, refinement: usize) -> Result<MixedDimGrid> {
        let opts = GridOptions {
            fracture_refinement: refinement,
            ..GridOptions::default()
        };
        match self {
            Geometry::Cross2d => build_cross_2d(n, &opts),
            Geometry::Random2d { fractures, seed } => {
                build_random_network_2d(n, *fractures, *seed, &opts)
            }
            Geometry::Regular3d { planes } => build_regular_network_3d(n, *planes, &opts),
            Geometry::Imported { .. } => Err(Error::InvalidGrid(
                "an imported system has no grid; load it with import_system".into(),
            )),
        }
    }
}

/// Grid plus assembled system for uniform parameters: matrix permeability
/// on the top-dimensional subdomain, `k_parallel` on all lower-dimensional
/// ones and `kappa` on every interface.
pub fn build_system(
    geometry: &Geometry,
    n: usize,
    refinement: usize,
    matrix_permeability: f64,
    k_parallel: f64,
    kappa: f64,
) -> Result<(MixedDimGrid, BlockSystem)> {
    let grid = geometry.build_grid(n, refinement)?;
    let params = PhysicalParams::uniform(&grid, matrix_permeability, k_parallel, kappa);
    let system = assemble(&grid, &params)?;
    Ok((grid, system))
}

/// Preconditioner selection as exposed on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecondChoice {
    /// `M_L`: approximate Schur complement, AMG inner solves.
    Ml,
    /// `B_L` with exact Schur complement and direct inner solves.
    Bl,
    Bu,
    Bd,
    /// Unpreconditioned GMRES.
    None,
}

impl PrecondChoice {
    pub fn label(self) -> &'static str {
        match self {
            PrecondChoice::Ml => "ml",
            PrecondChoice::Bl => "bl",
            PrecondChoice::Bu => "bu",
            PrecondChoice::Bd => "bd",
            PrecondChoice::None => "none",
        }
    }

    /// Base configuration before overrides; `None` for the identity.
    pub fn config(self) -> Option<PreconditionerConfig> {
        match self {
            PrecondChoice::Ml => Some(PreconditionerConfig::practical()),
            PrecondChoice::Bl => Some(PreconditionerConfig::exact(BlockKind::Lower)),
            PrecondChoice::Bu => Some(PreconditionerConfig::exact(BlockKind::Upper)),
            PrecondChoice::Bd => Some(PreconditionerConfig::exact(BlockKind::Diagonal)),
            PrecondChoice::None => None,
        }
    }
}

impl std::fmt::Display for PrecondChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PrecondChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ml" => Ok(PrecondChoice::Ml),
            "bl" => Ok(PrecondChoice::Bl),
            "bu" => Ok(PrecondChoice::Bu),
            "bd" => Ok(PrecondChoice::Bd),
            "none" => Ok(PrecondChoice::None),
            other => Err(format!(
                "unknown preconditioner '{other}' (expected ml, bl, bu, bd or none)"
            )),
        }
    }
}

/// Optional replacements for the preset Schur mode and inner solvers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrecondOverrides {
    pub schur: Option<SchurMode>,
    pub inner_omega: Option<InnerSolver>,
    pub inner_gamma: Option<InnerSolver>,
}

impl PrecondOverrides {
    pub fn apply(&self, mut cfg: PreconditionerConfig) -> PreconditionerConfig {
        if let Some(s) = self.schur {
            cfg.schur = s;
        }
        if let Some(i) = self.inner_omega {
            cfg.inner_omega = i;
        }
        if let Some(i) = self.inner_gamma {
            cfg.inner_gamma = i;
        }
        cfg
    }
}

/// Builds the requested preconditioner and runs GMRES on `system`. The
/// report's `setup_seconds` covers preconditioner construction.
pub fn solve_system(
    system: &BlockSystem,
    choice: PrecondChoice,
    overrides: &PrecondOverrides,
    solver: &SolveConfig,
) -> Result<SolveReport> {
    let b = system.rhs();
    match choice.config() {
        None => gmres(system, &b, &Identity(system.dim()), solver),
        Some(base) => {
            let start = Instant::now();
            let p = BlockPreconditioner::build(system, &overrides.apply(base))?;
            let setup = start.elapsed().as_secs_f64();
            let mut report = gmres(system, &b, &p, solver)?;
            report.setup_seconds = setup;
            Ok(report)
        }
    }
}

fn default_refinements() -> Vec<usize> {
    vec![1]
}

fn default_matrix_permeability() -> f64 {
    1.0
}

fn default_preconditioners() -> Vec<PrecondChoice> {
    vec![PrecondChoice::Ml]
}

fn default_values() -> Vec<f64> {
    vec![1e-4, 1.0, 1e4]
}

/// A full sweep description. In TOML:
///
/// ```toml
/// geometry = { kind = "cross_2d" }
/// sizes = [16, 32, 64]
/// k_parallel = [1e-4, 1.0, 1e4]
/// kappa = [1e-4, 1.0, 1e4]
/// preconditioners = ["ml"]
/// [solver]
/// rel_tol = 1e-6
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub geometry: Geometry,
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Fracture refinement factors.
    #[serde(default = "default_refinements")]
    pub refinements: Vec<usize>,
    #[serde(default = "default_values")]
    pub k_parallel: Vec<f64>,
    #[serde(default = "default_values")]
    pub kappa: Vec<f64>,
    #[serde(default = "default_matrix_permeability")]
    pub matrix_permeability: f64,
    #[serde(default = "default_preconditioners")]
    pub preconditioners: Vec<PrecondChoice>,
    #[serde(default)]
    pub overrides: PrecondOverrides,
    #[serde(default)]
    pub solver: SolveConfig,
}

impl SweepSpec {
    /// The 3 × 3 permeability grid on the given mesh sizes with `M_L`.
    pub fn standard(geometry: Geometry, sizes: Vec<usize>) -> Self {
        SweepSpec {
            geometry,
            sizes,
            refinements: default_refinements(),
            k_parallel: default_values(),
            kappa: default_values(),
            matrix_permeability: 1.0,
            preconditioners: default_preconditioners(),
            overrides: PrecondOverrides::default(),
            solver: SolveConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let imported = matches!(self.geometry, Geometry::Imported { .. });
        if !imported {
            if self.sizes.is_empty() {
                return Err(Error::Config("sizes must not be empty".into()));
            }
            if self.sizes.contains(&0) || self.refinements.contains(&0) {
                return Err(Error::Config(
                    "sizes and refinements must be positive".into(),
                ));
            }
            if self.refinements.is_empty() || self.k_parallel.is_empty() || self.kappa.is_empty() {
                return Err(Error::Config(
                    "refinements, k_parallel and kappa must not be empty".into(),
                ));
            }
            let positive = |v: &f64| *v > 0.0 && v.is_finite();
            if !self.k_parallel.iter().all(positive)
                || !self.kappa.iter().all(positive)
                || !positive(&self.matrix_permeability)
            {
                return Err(Error::Config(
                    "permeabilities must be positive and finite".into(),
                ));
            }
        }
        if self.preconditioners.is_empty() {
            return Err(Error::Config("preconditioners must not be empty".into()));
        }
        self.solver.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub geometry: String,
    pub n: usize,
    pub refinement: usize,
    pub k_parallel: Option<f64>,
    pub kappa: Option<f64>,
    pub precond: String,
    pub n_omega: usize,
    pub n_gamma: usize,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Largest iteration count among rows with mesh size `n`.
    pub fn max_iterations_at(&self, n: usize) -> Option<usize> {
        self.rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.iterations)
            .max()
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged && r.error.is_none())
    }
}

struct Tuple {
    mesh: usize,
    k_parallel: Option<f64>,
    kappa: Option<f64>,
    precond: PrecondChoice,
}

fn run_tuple(
    spec: &SweepSpec,
    label: &str,
    (n, refinement): (usize, usize),
    prepared: &Result<Prepared>,
    t: &Tuple,
) -> SweepRow {
    let mut row = SweepRow {
        geometry: label.to_string(),
        n,
        refinement,
        k_parallel: t.k_parallel,
        kappa: t.kappa,
        precond: t.precond.label().to_string(),
        n_omega: 0,
        n_gamma: 0,
        iterations: 0,
        converged: false,
        residual: f64::NAN,
        setup_seconds: 0.0,
        solve_seconds: 0.0,
        error: None,
    };
    let outcome = (|| -> Result<SolveReport> {
        let prepared = prepared
            .as_ref()
            .map_err(|e| Error::InvalidGrid(e.to_string()))?;
        let assembled;
        let system = match prepared {
            Prepared::Grid(grid) => {
                let params = PhysicalParams::uniform(
                    grid,
                    spec.matrix_permeability,
                    t.k_parallel.unwrap_or(1.0),
                    t.kappa.unwrap_or(1.0),
                );
                assembled = assemble(grid, &params)?;
                &assembled
            }
            Prepared::System(s) => s,
        };
        row.n_omega = system.n_omega();
        row.n_gamma = system.n_gamma();
        solve_system(system, t.precond, &spec.overrides, &spec.solver)
    })();
    match outcome {
        Ok(rep) => {
            row.iterations = rep.iterations;
            row.converged = rep.converged;
            row.residual = rep.true_residual;
            row.setup_seconds = rep.setup_seconds;
            row.solve_seconds = rep.solve_seconds;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

#[allow(clippy::large_enum_variant)]
enum Prepared {
    Grid(MixedDimGrid),
    System(BlockSystem),
}

/// Runs every tuple of `spec`. Tuples run in parallel; rows come back in the
/// order mesh size, refinement, `K_∥`, `κ`, preconditioner. A failing tuple
/// is recorded in its row and does not stop the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let label = spec.geometry.label();

    type Mesh = (usize, usize);
    type Coeffs = (Option<f64>, Option<f64>);
    let (meshes, params): (Vec<Mesh>, Vec<Coeffs>) = match &spec.geometry {
        Geometry::Imported { .. } => (vec![(0, 0)], vec![(None, None)]),
        _ => (
            spec.sizes
                .iter()
                .flat_map(|&n| spec.refinements.iter().map(move |&r| (n, r)))
                .collect(),
            spec.k_parallel
                .iter()
                .flat_map(|&kp| spec.kappa.iter().map(move |&ka| (Some(kp), Some(ka))))
                .collect(),
        ),
    };

    let prepared: Vec<Result<Prepared>> = meshes
        .par_iter()
        .map(|&(n, r)| match &spec.geometry {
            Geometry::Imported { path } => import_system(path).map(Prepared::System),
            g => g.build_grid(n, r).map(Prepared::Grid),
        })
        .collect();

    let mut tuples = Vec::new();
    for mesh in 0..meshes.len() {
        for &(k_parallel, kappa) in &params {
            for &precond in &spec.preconditioners {
                tuples.push(Tuple {
                    mesh,
                    k_parallel,
                    kappa,
                    precond,
                });
            }
        }
    }
    let rows = tuples
        .par_iter()
        .map(|t| run_tuple(spec, &label, meshes[t.mesh], &prepared[t.mesh], t))
        .collect();
    Ok(SweepResult { rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    Text,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "text" | "txt" => Ok(TableFormat::Text),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(format!(
                "unknown format '{other}' (expected csv, text or markdown)"
            )),
        }
    }
}

const COLUMNS: [&str; 14] = [
    "geometry",
    "n",
    "refinement",
    "k_parallel",
    "kappa",
    "precond",
    "n_omega",
    "n_gamma",
    "iterations",
    "converged",
    "residual",
    "setup_s",
    "solve_s",
    "error",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn fields(r: &SweepRow) -> [String; 14] {
    [
        r.geometry.clone(),
        r.n.to_string(),
        r.refinement.to_string(),
        opt(r.k_parallel),
        opt(r.kappa),
        r.precond.clone(),
        r.n_omega.to_string(),
        r.n_gamma.to_string(),
        r.iterations.to_string(),
        r.converged.to_string(),
        format!("{:e}", r.residual),
        format!("{:.6}", r.setup_seconds),
        format!("{:.6}", r.solve_seconds),
        r.error.clone().unwrap_or_default(),
    ]
}

pub fn emit_table(result: &SweepResult, format: TableFormat) -> Result<String> {
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS)?;
            for r in &result.rows {
                w.write_record(fields(r))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
        TableFormat::Text => {
            let cells: Vec<[String; 14]> = result.rows.iter().map(fields).collect();
            let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
            for row in &cells {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let mut out = String::new();
            let line = |out: &mut String, items: &mut dyn Iterator<Item = &str>| {
                let parts: Vec<String> = items
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect();
                out.push_str(parts.join("  ").trim_end());
                out.push('\n');
            };
            line(&mut out, &mut COLUMNS.iter().copied());
            for row in &cells {
                line(&mut out, &mut row.iter().map(String::as_str));
            }
            Ok(out)
        }
        TableFormat::Markdown => Ok(markdown(result)),
    }
}

/// One line per (preconditioner, `K_∥`, `κ`), one iteration-count column per
/// mesh. Non-converged entries get a trailing `*`; failed tuples show `err`.
fn markdown(result: &SweepResult) -> String {
    let mut meshes: Vec<(usize, usize)> = Vec::new();
    for r in &result.rows {
        if !meshes.contains(&(r.n, r.refinement)) {
            meshes.push((r.n, r.refinement));
        }
    }
    let show_refinement = meshes.iter().any(|&(_, r)| r != 1);
    let mut lines: Vec<(String, String, String)> = Vec::new();
    let mut cells: BTreeMap<(usize, (usize, usize)), String> = BTreeMap::new();
    for r in &result.rows {
        let key = (r.precond.clone(), opt(r.k_parallel), opt(r.kappa));
        let idx = match lines.iter().position(|l| *l == key) {
            Some(i) => i,
            None => {
                lines.push(key);
                lines.len() - 1
            }
        };
        let cell = if r.error.is_some() {
            "err".to_string()
        } else if r.converged {
            r.iterations.to_string()
        } else {
            format!("{}*", r.iterations)
        };
        cells.insert((idx, (r.n, r.refinement)), cell);
    }

    let mut out = String::from("| precond | K_par | kappa |");
    for &(n, r) in &meshes {
        if show_refinement {
            let _ = write!(out, " n={n} r={r} |");
        } else {
            let _ = write!(out, " n={n} |");
        }
    }
    out.push_str("\n|---|---|---|");
    for _ in &meshes {
        out.push_str("---|");
    }
    out.push('\n');
    for (i, (p, kp, ka)) in lines.iter().enumerate() {
        let _ = write!(out, "| {p} | {kp} | {ka} |");
        for &m in &meshes {
            let _ = write!(out, " {} |", cells.get(&(i, m)).map_or("", String::as_str));
        }
        out.push('\n');
    }
    out
}
