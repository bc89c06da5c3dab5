//! Compares the block preconditioners on one system: the exact B_D, B_U and
//! B_L, the practical M_L, and no preconditioning.

use mdsolve::bench::{build_system, solve_system, Geometry, PrecondChoice, PrecondOverrides};
use mdsolve::krylov::SolveConfig;
use mdsolve::precond::{BlockKind, BlockPreconditioner, PreconditionerConfig};

fn main() -> mdsolve::Result<()> {
    let (_, system) = build_system(&Geometry::Cross2d, 16, 1, 1.0, 1e-4, 1e4)?;
    println!("cross_2d n=16, K_∥=1e-4, κ=1e4: {} dofs", system.dim());

    let solver = SolveConfig::default();
    for choice in [
        PrecondChoice::Bd,
        PrecondChoice::Bu,
        PrecondChoice::Bl,
        PrecondChoice::Ml,
        PrecondChoice::None,
    ] {
        let rep = solve_system(&system, choice, &PrecondOverrides::default(), &solver)?;
        println!(
            "{:>4}: {:>4} iterations, converged {}, residual {:.2e}",
            choice.label(),
            rep.iterations,
            rep.converged,
            rep.true_residual
        );
    }

    let ml = BlockPreconditioner::build(&system, &PreconditionerConfig::practical())?;
    println!("{}", ml.describe());
    let exact =
        BlockPreconditioner::build(&system, &PreconditionerConfig::exact(BlockKind::Lower))?;
    println!("{}", exact.describe());
    Ok(())
}
