//! GMRES against unpreconditioned CG on growing 1D Laplacians: the iteration
//! count of the unpreconditioned baseline grows with the problem size.

use mdsolve::krylov::{cg, gmres, Identity, SolveConfig};
use mdsolve::sparse::CsrMatrix;

fn main() -> mdsolve::Result<()> {
    let cfg = SolveConfig::default();
    for n in [32, 64, 128, 256] {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t)?;
        let b = vec![1.0; n];
        let c = cg(&a, &b, &cfg)?;
        let g = gmres(&a, &b, &Identity(n), &cfg)?;
        println!(
            "n={n:>4}: CG {:>4} iterations, GMRES {:>4} iterations",
            c.iterations, g.iterations
        );
    }
    Ok(())
}
