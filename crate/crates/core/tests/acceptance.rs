//! Acceptance checks. Runs as a plain binary (`harness = false`) and prints
//! one PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mdsolve::amg::{AmgHierarchy, AmgParams};
use mdsolve::assembly::{assemble, BlockSystem, PhysicalParams};
use mdsolve::bench::{build_system, run_sweep, Geometry, SweepSpec};
use mdsolve::grid::{
    build_cross_2d, build_random_network_2d, build_regular_network_3d, BoundarySpec, GridOptions,
    MixedDimGrid,
};
use mdsolve::io::{export_system, import_system};
use mdsolve::krylov::{gmres, Identity, SolveConfig};
use mdsolve::precond::{
    approx_schur, exact_factors, exact_schur, BlockKind, BlockPreconditioner, PreconditionerConfig,
};
use mdsolve::sparse::{dense_lu_solve, CsrMatrix};
use mdsolve::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Small systems (at most 200 DOFs) across geometries and parameter regimes.
fn oracle_systems() -> Result<Vec<(String, BlockSystem)>> {
    let opts = GridOptions::default();
    let cases: Vec<(String, MixedDimGrid, f64, f64)> = vec![
        ("cross_2d n=2".into(), build_cross_2d(2, &opts)?, 1.0, 1.0),
        ("cross_2d n=4".into(), build_cross_2d(4, &opts)?, 1e4, 1e-4),
        ("cross_2d n=6".into(), build_cross_2d(6, &opts)?, 1e-4, 1e4),
        ("cross_2d n=8".into(), build_cross_2d(8, &opts)?, 1e4, 1e4),
        (
            "random_2d n=8 seed=1".into(),
            build_random_network_2d(8, 3, 1, &opts)?,
            1e-2,
            1e2,
        ),
        (
            "random_2d n=8 seed=2".into(),
            build_random_network_2d(8, 4, 2, &opts)?,
            1e2,
            1e-2,
        ),
        (
            "regular_3d n=2".into(),
            build_regular_network_3d(2, 3, &opts)?,
            1.0,
            1e-4,
        ),
        (
            "regular_3d n=3 (2 planes)".into(),
            build_regular_network_3d(3, 2, &opts)?,
            1e-4,
            1.0,
        ),
    ];
    let mut out = Vec::new();
    for (name, grid, kpar, kappa) in cases {
        let s = assemble(&grid, &PhysicalParams::uniform(&grid, 1.0, kpar, kappa))?;
        out.push((name, s));
    }
    Ok(out)
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn criterion_1(systems: &[(String, BlockSystem)]) -> Result<Outcome> {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut max_dofs = 0;
    for (_, s) in systems {
        max_dofs = max_dofs.max(s.dim());
        let a = s.monolithic().to_dense();
        let f = exact_factors(s)?;
        let rel = f.product()?.add_scaled(&a, -1.0)?.frobenius_norm() / a.frobenius_norm();
        worst = worst.max(rel);
    }
    let elapsed = start.elapsed();
    Ok(check(
        systems.len() >= 5 && max_dofs <= 200 && worst <= 1e-10 && elapsed < Duration::from_secs(5),
        format!(
            "{} systems (max {max_dofs} dofs), worst relative Frobenius error {worst:.2e}, {:.2}s",
            systems.len(),
            elapsed.as_secs_f64()
        ),
    ))
}

fn relative_residual(s: &BlockSystem, x: &[f64], b: &[f64]) -> Result<f64> {
    let ax = s.apply_blocks(x)?;
    let r: f64 = ax
        .iter()
        .zip(b)
        .map(|(u, v)| (u - v).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(r / b.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Gated on each system with its assembled right-hand side. Random
/// right-hand sides are also solved; they count only where a dense LU solve
/// shows that 1e-12 is reachable in double precision for that vector.
fn criterion_2(systems: &[(String, BlockSystem)]) -> Result<Outcome> {
    let cfg = SolveConfig {
        rel_tol: 1e-12,
        ..SolveConfig::default()
    };
    let mut worst_iters = 0;
    let mut worst_res = 0.0f64;
    let mut gated = 0;
    let mut skipped = Vec::new();
    for (k, (name, s)) in systems.iter().enumerate() {
        let p = BlockPreconditioner::build(s, &PreconditionerConfig::exact(BlockKind::Lower))?;
        let dense = s.monolithic().to_dense();
        for (assembled, b) in [
            (true, s.rhs()),
            (false, random_vector(s.dim(), 100 + k as u64)),
        ] {
            if !assembled {
                let floor = relative_residual(s, &dense_lu_solve(&dense, &b)?, &b)?;
                if floor > 1e-13 {
                    skipped.push(format!("{name} (LU floor {floor:.1e})"));
                    continue;
                }
            }
            let rep = gmres(s, &b, &p, &cfg)?;
            gated += 1;
            worst_iters = worst_iters.max(rep.iterations);
            worst_res = worst_res.max(rep.true_residual);
        }
    }
    let note = if skipped.is_empty() {
        String::new()
    } else {
        format!(
            "; random rhs not gated where 1e-12 is below the direct-solve floor: {}",
            skipped.join(", ")
        )
    };
    Ok(check(
        worst_iters <= 2 && worst_res <= 1e-12,
        format!("{gated} solves, max {worst_iters} iterations, max relative residual {worst_res:.2e}{note}"),
    ))
}

fn criterion_3(systems: &[(String, BlockSystem)]) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for (_, s) in systems {
        let exact = exact_schur(s)?;
        let approx = approx_schur(s)?.to_dense();
        // Entrywise difference relative to the largest entry of S.
        worst = worst.max(approx.max_abs_diff(&exact) / exact.norm_inf().max(1.0));
    }
    Ok(check(
        worst <= 1e-12,
        format!(
            "{} matching-grid systems, max scaled entrywise difference {worst:.2e}",
            systems.len()
        ),
    ))
}

fn criterion_4() -> Result<Outcome> {
    let start = Instant::now();
    let res = run_sweep(&SweepSpec::standard(Geometry::Cross2d, vec![16, 32, 64]))?;
    let elapsed = start.elapsed();
    let max_all = res.rows.iter().map(|r| r.iterations).max().unwrap_or(0);
    let m16 = res.max_iterations_at(16).unwrap_or(0);
    let m64 = res.max_iterations_at(64).unwrap_or(usize::MAX);
    let converged = res.all_converged() && res.rows.iter().all(|r| r.residual <= 1.1e-6);
    Ok(check(
        res.rows.len() == 27
            && converged
            && max_all <= 60
            && (m64 as f64) <= 1.6 * m16 as f64
            && elapsed < Duration::from_secs(120),
        format!(
            "{} tuples, all converged {converged}, max iterations {max_all}, max n=16 {m16}, max n=64 {m64} (ratio {:.2}), {:.1}s",
            res.rows.len(),
            m64 as f64 / m16.max(1) as f64,
            elapsed.as_secs_f64()
        ),
    ))
}

fn criterion_5() -> Result<Outcome> {
    let start = Instant::now();
    let res = run_sweep(&SweepSpec::standard(
        Geometry::Regular3d { planes: 3 },
        vec![8, 16],
    ))?;
    let elapsed = start.elapsed();
    let max_all = res.rows.iter().map(|r| r.iterations).max().unwrap_or(0);
    let converged = res.all_converged()
        && res
            .rows
            .iter()
            .all(|r| r.residual.is_finite() && r.residual <= 1.1e-6);
    Ok(check(
        res.rows.len() == 18 && converged && max_all <= 80 && elapsed < Duration::from_secs(300),
        format!(
            "{} tuples, all converged {converged}, max iterations {max_all} (n=8: {}, n=16: {}), {:.1}s",
            res.rows.len(),
            res.max_iterations_at(8).unwrap_or(0),
            res.max_iterations_at(16).unwrap_or(0),
            elapsed.as_secs_f64()
        ),
    ))
}

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
    CsrMatrix::from_triplets(n * n, n * n, &t).expect("valid Laplacian")
}

fn criterion_6() -> Result<Outcome> {
    // Stationary cycle on A x = 0: the iterate is the error.
    let a = laplacian(64);
    let h = AmgHierarchy::setup(&a, &AmgParams::default())?;
    let a_norm = |e: &[f64]| -> Result<f64> {
        Ok(a.spmv(e)?
            .iter()
            .zip(e)
            .map(|(u, v)| u * v)
            .sum::<f64>()
            .sqrt())
    };
    let zero = vec![0.0; a.nrows()];
    let mut x = random_vector(a.nrows(), 7);
    let mut prev = a_norm(&x)?;
    let mut worst_factor = 0.0f64;
    for _ in 0..10 {
        x = h.v_cycle(&zero, &x)?;
        let cur = a_norm(&x)?;
        worst_factor = worst_factor.max(cur / prev);
        prev = cur;
    }

    // Unit-scale Laplacians are compared entrywise in absolute terms; the
    // high-contrast Schur complement relative to its largest entry.
    let (_, cross) = build_system(&Geometry::Cross2d, 16, 1, 1.0, 1e4, 1e-4)?;
    let small = [
        (laplacian(16), false),
        (laplacian(24), false),
        (laplacian(32), false),
        (approx_schur(&cross)?, true),
    ];
    let mut galerkin = 0.0f64;
    let mut levels_checked = 0;
    for (m, scaled) in &small {
        let hs = AmgHierarchy::setup(m, &AmgParams::default())?;
        for w in hs.levels().windows(2) {
            let p = w[0]
                .prolongator()
                .expect("non-coarsest level has P")
                .to_dense();
            let af = w[0].operator().to_dense();
            let ac = p.transpose().matmul(&af)?.matmul(&p)?;
            let coarse = w[1].operator().to_dense();
            let scale = if *scaled {
                coarse.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()))
            } else {
                1.0
            };
            galerkin = galerkin.max(ac.max_abs_diff(&coarse) / scale);
            levels_checked += 1;
        }
    }
    Ok(check(
        worst_factor <= 0.5 && galerkin <= 1e-12 && levels_checked > 0,
        format!(
            "64x64 Poisson: {} levels, worst per-cycle A-norm factor {worst_factor:.3}; Galerkin max difference {galerkin:.2e} over {levels_checked} level pairs",
            h.num_levels()
        ),
    ))
}

fn criterion_7() -> Result<Outcome> {
    let cfg = SolveConfig {
        rel_tol: 1e-13,
        ..SolveConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut max_dofs = 0;
    let mut all_converged = true;
    for k in 0..20u64 {
        let n = rng.gen_range(3..=5);
        let fractures = rng.gen_range(1..=3);
        let grid = build_random_network_2d(n, fractures, k, &GridOptions::default())?;
        let kpar = 10f64.powf(rng.gen_range(-2.0..2.0));
        let kappa = 10f64.powf(rng.gen_range(-2.0..2.0));
        let mut params = PhysicalParams::uniform(&grid, 1.0, kpar, kappa);
        params.sources = Some(
            grid.subdomains()
                .iter()
                .map(|s| {
                    (0..s.num_cells())
                        .map(|_| rng.gen_range(-1.0..1.0))
                        .collect()
                })
                .collect(),
        );
        let s = assemble(&grid, &params)?;
        max_dofs = max_dofs.max(s.dim());
        let b = s.rhs();
        let exact = dense_lu_solve(&s.monolithic().to_dense(), &b)?;
        let rep = if k % 2 == 0 {
            gmres(&s, &b, &Identity(s.dim()), &cfg)?
        } else {
            let p = BlockPreconditioner::build(&s, &PreconditionerConfig::practical())?;
            gmres(&s, &b, &p, &cfg)?
        };
        all_converged &= rep.converged;
        let scale = exact.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (u, v) in rep.solution.iter().zip(&exact) {
            worst = worst.max((u - v).abs() / scale);
        }
        monotone &= rep
            .residual_history
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-14);
    }
    Ok(check(
        all_converged && worst <= 1e-8 && monotone && max_dofs <= 100,
        format!("20 systems (max {max_dofs} dofs), max scaled solution difference {worst:.2e}, histories monotone {monotone}"),
    ))
}

fn criterion_8(systems: &[(String, BlockSystem)]) -> Result<Outcome> {
    let mut transposes = 0;
    let mut exact_transpose = true;
    let mut check_sys = |s: &BlockSystem| {
        transposes += 1;
        exact_transpose &= s.omega_gamma() == &s.gamma_omega().transpose();
    };
    for (_, s) in systems {
        check_sys(s);
    }
    for n in [16, 32] {
        for (kp, ka) in [(1e-4, 1e4), (1e4, 1e-4)] {
            check_sys(&build_system(&Geometry::Cross2d, n, 1, 1.0, kp, ka)?.1);
            check_sys(&build_system(&Geometry::Regular3d { planes: 3 }, n / 2, 1, 1.0, kp, ka)?.1);
            check_sys(
                &build_system(
                    &Geometry::Random2d {
                        fractures: 5,
                        seed: n as u64,
                    },
                    n,
                    2,
                    1.0,
                    kp,
                    ka,
                )?
                .1,
            );
        }
    }

    let closed = GridOptions {
        boundary: BoundarySpec::no_flow(),
        ..GridOptions::default()
    };
    let grids = [
        build_cross_2d(12, &closed)?,
        build_random_network_2d(16, 6, 3, &closed)?,
        build_regular_network_3d(6, 3, &closed)?,
    ];
    let mut worst = 0.0f64;
    for g in &grids {
        for (kp, ka) in [(1e-4, 1e4), (1.0, 1.0), (1e4, 1e-4)] {
            let s = assemble(g, &PhysicalParams::uniform(g, 1.0, kp, ka))?;
            check_sys(&s);
            let a = s.monolithic();
            let scale = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut x = vec![1.0; s.n_omega()];
            x.extend(vec![0.0; s.n_gamma()]);
            let r = a.spmv(&x)?;
            worst = worst.max(r.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale);
        }
    }
    Ok(check(
        exact_transpose && worst <= 1e-12,
        format!("A_ΩΓ = A_ΓΩᵀ exactly on {transposes} systems: {exact_transpose}; no-flow constant-vector residual {worst:.2e} (relative to max entry)"),
    ))
}

fn criterion_9(systems: &[(String, BlockSystem)]) -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let mut all = systems.iter().map(|(_, s)| s.clone()).collect::<Vec<_>>();
    all.push(build_system(&Geometry::Regular3d { planes: 3 }, 6, 1, 1.0, 1e-4, 1e4)?.1);
    all.push(
        build_system(
            &Geometry::Random2d {
                fractures: 8,
                seed: 5,
            },
            24,
            2,
            1.0,
            1e4,
            1e-4,
        )?
        .1,
    );
    let mut identical = 0;
    for (k, s) in all.iter().enumerate() {
        let path = dir.path().join(format!("system{k}"));
        export_system(s, &path)?;
        if import_system(&path)? == *s {
            identical += 1;
        }
    }
    Ok(check(
        identical == all.len(),
        format!(
            "{identical}/{} systems identical after export and import",
            all.len()
        ),
    ))
}

fn main() -> ExitCode {
    let systems = match oracle_systems() {
        Ok(s) => s,
        Err(e) => {
            println!("FAIL setup: {e}");
            return ExitCode::FAILURE;
        }
    };
    type Check<'a> = Box<dyn Fn() -> Result<Outcome> + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        (
            "1 exact block factorization",
            Box::new(|| criterion_1(&systems)),
        ),
        (
            "2 two-iteration convergence with exact B_L",
            Box::new(|| criterion_2(&systems)),
        ),
        (
            "3 approximate Schur equals exact on matching grids",
            Box::new(|| criterion_3(&systems)),
        ),
        ("4 cross_2d robustness sweep", Box::new(criterion_4)),
        ("5 regular_3d robustness sweep", Box::new(criterion_5)),
        (
            "6 AMG contraction and Galerkin identity",
            Box::new(criterion_6),
        ),
        ("7 GMRES against dense LU", Box::new(criterion_7)),
        ("8 structure invariants", Box::new(|| criterion_8(&systems))),
        (
            "9 export/import round trip",
            Box::new(|| criterion_9(&systems)),
        ),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let outcome = run().unwrap_or_else(|e| check(false, format!("error: {e}")));
        if !outcome.pass {
            failures += 1;
        }
        println!(
            "{} criterion {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
