//! Smoothed-aggregation AMG on the 5-point Laplacian: hierarchy statistics
//! and the error reduction of the stationary V(1,1) cycle.

use mdsolve::amg::{AmgHierarchy, AmgParams};
use mdsolve::sparse::CsrMatrix;

fn laplacian(n: usize) -> CsrMatrix {
    let id = |i: usize, j: usize| i * n + j;
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            t.push((id(i, j), id(i, j), 4.0));
            if i > 0 {
                t.push((id(i, j), id(i - 1, j), -1.0));
            }
            if i + 1 < n {
                t.push((id(i, j), id(i + 1, j), -1.0));
            }
            if j > 0 {
                t.push((id(i, j), id(i, j - 1), -1.0));
            }
            if j + 1 < n {
                t.push((id(i, j), id(i, j + 1), -1.0));
            }
        }
    }
    CsrMatrix::from_triplets(n * n, n * n, &t).expect("valid triplets")
}

fn main() -> mdsolve::Result<()> {
    let a = laplacian(64);
    let h = AmgHierarchy::setup(&a, &AmgParams::default())?;
    print!("{}", h.stats());

    // Solve A x = 0 from a rough start, so the iterate is the error itself.
    let b = vec![0.0; a.nrows()];
    let mut x: Vec<f64> = (0..a.nrows())
        .map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5)
        .collect();
    let a_norm = |e: &[f64]| -> mdsolve::Result<f64> {
        Ok(a.spmv(e)?
            .iter()
            .zip(e)
            .map(|(u, v)| u * v)
            .sum::<f64>()
            .sqrt())
    };
    let mut prev = a_norm(&x)?;
    for k in 1..=10 {
        x = h.v_cycle(&b, &x)?;
        let cur = a_norm(&x)?;
        println!(
            "cycle {k:>2}: A-norm error {cur:.3e}, factor {:.3}",
            cur / prev
        );
        prev = cur;
    }
    Ok(())
}
