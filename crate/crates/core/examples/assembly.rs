//! Assembles the block system for two crossing fractures and checks its
//! structural properties.

use mdsolve::assembly::{assemble, PhysicalParams};
use mdsolve::grid::{build_cross_2d, BoundarySpec, GridOptions};

fn main() -> mdsolve::Result<()> {
    let grid = build_cross_2d(8, &GridOptions::default())?;
    let params = PhysicalParams::uniform(&grid, 1.0, 1e4, 1e-4);
    let system = assemble(&grid, &params)?;

    println!(
        "omega dofs {}, gamma dofs {}",
        system.n_omega(),
        system.n_gamma()
    );
    println!("A_ΓΓ diagonal: {}", system.gamma_gamma().is_diagonal());
    println!(
        "A_ΩΓ == A_ΓΩᵀ: {}",
        system.omega_gamma() == &system.gamma_omega().transpose()
    );
    println!(
        "monolithic matrix symmetric: {}",
        system.monolithic().is_symmetric(0.0)
    );

    // With no-flow boundaries, constant pressure and zero flux is a null vector.
    let closed = GridOptions {
        boundary: BoundarySpec::no_flow(),
        ..GridOptions::default()
    };
    let grid = build_cross_2d(8, &closed)?;
    let system = assemble(&grid, &PhysicalParams::uniform(&grid, 1.0, 1.0, 1.0))?;
    let mut x = vec![1.0; system.n_omega()];
    x.extend(vec![0.0; system.n_gamma()]);
    let ax = system.apply_blocks(&x)?;
    let max = ax.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("no-flow null space residual: {max:e}");
    Ok(())
}
