//! Exports an assembled system as Matrix Market blocks, reads it back and
//! solves the imported copy.

use mdsolve::bench::{build_system, solve_system, Geometry, PrecondChoice, PrecondOverrides};
use mdsolve::io::{export_system, import_system};
use mdsolve::krylov::SolveConfig;

fn main() -> mdsolve::Result<()> {
    let (_, system) = build_system(
        &Geometry::Random2d {
            fractures: 6,
            seed: 7,
        },
        24,
        1,
        1.0,
        1.0,
        1.0,
    )?;
    let dir = std::env::temp_dir().join("mdsolve-example-system");
    export_system(&system, &dir)?;
    let back = import_system(&dir)?;
    println!("wrote and re-read {} dofs in {}", back.dim(), dir.display());
    println!("identical after round trip: {}", back == system);

    let rep = solve_system(
        &back,
        PrecondChoice::Ml,
        &PrecondOverrides::default(),
        &SolveConfig::default(),
    )?;
    println!("M_L on the imported system: {} iterations", rep.iterations);
    Ok(())
}
