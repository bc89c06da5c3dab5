//! Builds the canned geometries and prints their subdomain/interface layout.

use mdsolve::grid::{
    build_cross_2d, build_network_2d, build_random_network_2d, build_regular_network_3d,
    GridOptions, Segment,
};

fn main() -> mdsolve::Result<()> {
    let opts = GridOptions::default();

    println!("{}", build_cross_2d(4, &opts)?.summary());

    // A T-junction: a full vertical fracture and a horizontal one ending on it.
    let t = build_network_2d(
        8,
        &[
            Segment {
                normal_axis: 0,
                line: 4,
                start: 0,
                end: 8,
            },
            Segment {
                normal_axis: 1,
                line: 4,
                start: 0,
                end: 4,
            },
        ],
        &opts,
    )?;
    println!("{}", t.summary());

    let refined = GridOptions {
        fracture_refinement: 2,
        ..opts.clone()
    };
    let r = build_cross_2d(8, &refined)?;
    println!(
        "cross_2d n=8 with fracture refinement 2: {} omega dofs, {} gamma dofs\n",
        r.n_omega(),
        r.n_gamma()
    );

    let random = build_random_network_2d(16, 5, 42, &opts)?;
    println!("{}", random.summary());

    let cube = build_regular_network_3d(4, 3, &opts)?;
    println!("{}", cube.summary());
    Ok(())
}
