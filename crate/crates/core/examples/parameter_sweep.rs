//! Iteration counts of M_L over mesh size and fracture permeabilities on the
//! crossing-fracture geometry, printed as a markdown table.

use mdsolve::bench::{emit_table, run_sweep, Geometry, SweepSpec, TableFormat};

fn main() -> mdsolve::Result<()> {
    let spec = SweepSpec::standard(Geometry::Cross2d, vec![16, 32, 64]);
    let result = run_sweep(&spec)?;
    print!("{}", emit_table(&result, TableFormat::Markdown)?);
    for n in &spec.sizes {
        println!(
            "max iterations at n={n}: {}",
            result.max_iterations_at(*n).unwrap_or(0)
        );
    }
    Ok(())
}
