//! Three orthogonal fracture planes in the unit cube, solved with M_L; the
//! residual history is written as CSV to standard output.

use mdsolve::bench::{build_system, Geometry};
use mdsolve::krylov::{gmres, SolveConfig};
use mdsolve::precond::{BlockPreconditioner, PreconditionerConfig};

fn main() -> mdsolve::Result<()> {
    let (grid, system) = build_system(&Geometry::Regular3d { planes: 3 }, 16, 1, 1.0, 1e4, 1e-4)?;
    eprintln!("{}", grid.summary());
    let p = BlockPreconditioner::build(&system, &PreconditionerConfig::practical())?;
    eprintln!("{}", p.describe());
    let rep = gmres(&system, &system.rhs(), &p, &SolveConfig::default())?;
    eprintln!(
        "converged {} in {} iterations",
        rep.converged, rep.iterations
    );
    rep.write_history_csv(std::io::stdout())
}
