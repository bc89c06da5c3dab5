//! Krylov solvers: right-preconditioned GMRES and a plain CG baseline.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::amg::AmgHierarchy;
use crate::assembly::BlockSystem;
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, DenseMatrix};

/// A fixed linear map on `R^dim`.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `y = Op x`. Both slices have length `dim()`.
    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()>;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                op: "operator_apply",
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }
}

fn check_lengths(op: &'static str, n: usize, x: &[f64], y: &[f64]) -> Result<()> {
    for len in [x.len(), y.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                op,
                expected: n,
                found: len,
            });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_lengths("identity_apply", self.0, x, y)?;
        y.copy_from_slice(x);
        Ok(())
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                op: "operator_apply",
                nrows: self.nrows(),
                ncols: self.ncols(),
            });
        }
        check_lengths("spmv", self.nrows(), x, y)?;
        self.spmv_into(x, y);
        Ok(())
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_lengths("dense_apply", self.nrows(), x, y)?;
        y.copy_from_slice(&self.matvec(x)?);
        Ok(())
    }
}

impl LinearOperator for BlockSystem {
    fn dim(&self) -> usize {
        BlockSystem::dim(self)
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_lengths("block_apply", BlockSystem::dim(self), x, y)?;
        y.copy_from_slice(&self.apply_blocks(x)?);
        Ok(())
    }
}

impl LinearOperator for AmgHierarchy {
    fn dim(&self) -> usize {
        AmgHierarchy::dim(self)
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_lengths("amg_apply", AmgHierarchy::dim(self), x, y)?;
        y.iter_mut().for_each(|v| *v = 0.0);
        self.cycle_into(x, y);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Restart length; `None` runs full GMRES.
    pub restart: Option<usize>,
    pub record_history: bool,
    /// Store preconditioned basis vectors (flexible GMRES).
    pub flexible: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            rel_tol: 1e-6,
            max_iters: 500,
            restart: None,
            record_history: true,
            flexible: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.rel_tol.is_finite() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_iters must be at least 1".into(),
            ));
        }
        if self.restart == Some(0) {
            return Err(Error::InvalidParameter(
                "restart length must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// `‖b − A x_k‖ / ‖b‖`, starting with the initial residual.
    pub residual_history: Vec<f64>,
    #[serde(skip)]
    pub solution: Vec<f64>,
    /// Relative residual recomputed from the returned solution.
    pub true_residual: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

impl SolveReport {
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "relative_residual"])?;
        for (k, r) in self.residual_history.iter().enumerate() {
            w.write_record([k.to_string(), format!("{r:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_history_csv(&self, path: &Path) -> Result<()> {
        self.write_history_csv(std::fs::File::create(path)?)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut r = a.apply(x)?;
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    Ok(r)
}

/// Right-preconditioned GMRES from a zero initial guess.
///
/// Solves `A M y = b` with modified Gram-Schmidt Arnoldi and Givens
/// rotations, returning `x = M y`. Iteration stops once the Arnoldi residual
/// drops below `rel_tol`; the residual is then recomputed from `x`, and if
/// rounding has left it above `rel_tol` the method restarts from `x`.
pub fn gmres<A, M>(a: &A, b: &[f64], m: &M, cfg: &SolveConfig) -> Result<SolveReport>
where
    A: LinearOperator + ?Sized,
    M: LinearOperator + ?Sized,
{
    cfg.validate()?;
    let n = a.dim();
    if m.dim() != n {
        return Err(Error::DimensionMismatch {
            op: "gmres_preconditioner",
            expected: n,
            found: m.dim(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            op: "gmres_rhs",
            expected: n,
            found: b.len(),
        });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gmres right-hand side"));
    }
    let start = Instant::now();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(SolveReport {
            converged: true,
            iterations: 0,
            residual_history: vec![0.0],
            solution: x,
            true_residual: 0.0,
            setup_seconds: 0.0,
            solve_seconds: start.elapsed().as_secs_f64(),
        });
    }

    let restart = cfg
        .restart
        .unwrap_or(cfg.max_iters)
        .min(cfg.max_iters)
        .max(1);
    let mut history = vec![1.0];
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut true_rel = 1.0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        let beta = norm(&r);
        if beta / bnorm <= cfg.rel_tol {
            converged = true;
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut precond_basis: Vec<Vec<f64>> = Vec::new();
        let mut hessenberg: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut z = vec![0.0; n];
        let mut w = vec![0.0; n];

        for _ in 0..restart {
            if iterations >= cfg.max_iters {
                break;
            }
            let j = basis.len() - 1;
            m.apply_into(&basis[j], &mut z)?;
            a.apply_into(&z, &mut w)?;
            if cfg.flexible {
                precond_basis.push(z.clone());
            }
            let mut h = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= hij * vk);
                h[i] = hij;
            }
            let wnorm = norm(&w);
            h[j + 1] = wnorm;
            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let rho = h[j].hypot(h[j + 1]);
            let (c, s) = if rho == 0.0 {
                (1.0, 0.0)
            } else {
                (h[j] / rho, h[j + 1] / rho)
            };
            h[j] = rho;
            h[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            hessenberg.push(h);
            iterations += 1;
            let rel = g[j + 1].abs() / bnorm;
            history.push(rel);
            if rel <= cfg.rel_tol || wnorm <= f64::EPSILON * beta {
                break;
            }
            basis.push(w.iter().map(|v| v / wnorm).collect());
        }

        // Back substitution on the triangularized Hessenberg matrix.
        let k = hessenberg.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                s -= hessenberg[jj][i] * yj;
            }
            let d = hessenberg[i][i];
            y[i] = if d == 0.0 { 0.0 } else { s / d };
        }
        if cfg.flexible {
            for (zj, yj) in precond_basis.iter().zip(&y) {
                x.iter_mut().zip(zj).for_each(|(xi, zi)| *xi += yj * zi);
            }
        } else {
            let mut vy = vec![0.0; n];
            for (vj, yj) in basis.iter().zip(&y) {
                vy.iter_mut().zip(vj).for_each(|(a, v)| *a += yj * v);
            }
            m.apply_into(&vy, &mut z)?;
            x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
        }

        r = residual(a, b, &x)?;
        true_rel = norm(&r) / bnorm;
        if true_rel <= cfg.rel_tol {
            converged = true;
            break;
        }
        if k == 0 {
            break;
        }
    }

    if !cfg.record_history {
        history.clear();
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("gmres iterate"));
    }
    Ok(SolveReport {
        converged,
        iterations,
        residual_history: history,
        solution: x,
        true_residual: true_rel,
        setup_seconds: 0.0,
        solve_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Unpreconditioned conjugate gradients from a zero initial guess, kept as a
/// baseline for iteration counts. Assumes `A` is symmetric positive definite.
pub fn cg<A: LinearOperator + ?Sized>(a: &A, b: &[f64], cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            op: "cg_rhs",
            expected: n,
            found: b.len(),
        });
    }
    let start = Instant::now();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(SolveReport {
            converged: true,
            iterations: 0,
            residual_history: vec![0.0],
            solution: x,
            true_residual: 0.0,
            setup_seconds: 0.0,
            solve_seconds: start.elapsed().as_secs_f64(),
        });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut history = vec![1.0];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        a.apply_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut()
            .zip(&ap)
            .for_each(|(ri, api)| *ri -= alpha * api);
        iterations += 1;
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        history.push(rel);
        if rel <= cfg.rel_tol {
            converged = true;
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut()
            .zip(&r)
            .for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }
    let true_residual = norm(&residual(a, b, &x)?) / bnorm;
    if !cfg.record_history {
        history.clear();
    }
    Ok(SolveReport {
        converged,
        iterations,
        residual_history: history,
        solution: x,
        true_residual,
        setup_seconds: 0.0,
        solve_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amg::tests::poisson_1d;
    use crate::sparse::dense_lu_solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = DenseMatrix::new(n, n, data).unwrap();
        b.transpose()
            .matmul(&b)
            .unwrap()
            .add_scaled(&DenseMatrix::identity(n), n as f64 * 0.1)
            .unwrap()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = vec![1.0, -2.0, 3.5];
        let rep = gmres(&Identity(3), &b, &Identity(3), &SolveConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        for (x, y) in rep.solution.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let a = poisson_1d(8);
        let rep = gmres(&a, &[0.0; 8], &Identity(8), &SolveConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
        assert!(rep.solution.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let a = random_spd(30, 11);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let cfg = SolveConfig {
            rel_tol: 1e-12,
            ..SolveConfig::default()
        };
        let rep = gmres(&a, &b, &Identity(30), &cfg).unwrap();
        let exact = dense_lu_solve(&a, &b).unwrap();
        assert!(rep.converged);
        for (x, y) in rep.solution.iter().zip(&exact) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!(rep
            .residual_history
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-14));
        assert!(rep.true_residual <= 1e-12 * 1.01);
    }

    #[test]
    fn restarted_and_flexible_variants_agree() {
        let a = poisson_1d(40);
        let b: Vec<f64> = (0..40).map(|i| 1.0 + (i % 3) as f64).collect();
        let full = gmres(&a, &b, &Identity(40), &SolveConfig::default()).unwrap();
        let flex = gmres(
            &a,
            &b,
            &Identity(40),
            &SolveConfig {
                flexible: true,
                ..SolveConfig::default()
            },
        )
        .unwrap();
        let restarted = gmres(
            &a,
            &b,
            &Identity(40),
            &SolveConfig {
                restart: Some(5),
                max_iters: 2000,
                ..SolveConfig::default()
            },
        )
        .unwrap();
        assert!(full.converged && flex.converged && restarted.converged);
        assert_eq!(full.iterations, flex.iterations);
        assert!(restarted.iterations >= full.iterations);
        for (x, y) in full.solution.iter().zip(&restarted.solution) {
            assert!((x - y).abs() < 1e-3);
        }
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let a = poisson_1d(50);
        let b = vec![1.0; 50];
        let rep = gmres(
            &a,
            &b,
            &Identity(50),
            &SolveConfig {
                max_iters: 3,
                ..SolveConfig::default()
            },
        )
        .unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert_eq!(rep.residual_history.len(), 4);
    }

    #[test]
    fn amg_preconditioning_reduces_iterations() {
        let a = crate::amg::tests::poisson_2d(24);
        let b = vec![1.0; a.nrows()];
        let h = AmgHierarchy::setup(&a, &Default::default()).unwrap();
        let plain = gmres(&a, &b, &Identity(a.nrows()), &SolveConfig::default()).unwrap();
        let pre = gmres(&a, &b, &h, &SolveConfig::default()).unwrap();
        assert!(pre.converged);
        assert!(
            pre.iterations * 3 < plain.iterations,
            "{} vs {}",
            pre.iterations,
            plain.iterations
        );
    }

    #[test]
    fn cg_baseline() {
        let rep = cg(&Identity(4), &[1.0, 2.0, 3.0, 4.0], &SolveConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);

        let a = poisson_1d(64);
        let b: Vec<f64> = (0..64).map(|i| (i as f64 * 0.1).cos()).collect();
        let c = cg(&a, &b, &SolveConfig::default()).unwrap();
        let g = gmres(&a, &b, &Identity(64), &SolveConfig::default()).unwrap();
        assert!(c.converged && g.converged);
        let scale = g.solution.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in c.solution.iter().zip(&g.solution) {
            assert!((x - y).abs() <= 1e-4 * scale);
        }
        let small = cg(&poisson_1d(16), &b[..16], &SolveConfig::default()).unwrap();
        assert!(small.iterations < c.iterations);
    }

    #[test]
    fn history_csv_has_header_and_rows() {
        let rep = gmres(
            &Identity(2),
            &[1.0, 1.0],
            &Identity(2),
            &SolveConfig::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        rep.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iteration,relative_residual");
        assert_eq!(lines.len(), 1 + rep.residual_history.len());
    }

    #[test]
    fn invalid_config_and_shapes() {
        let bad = SolveConfig {
            rel_tol: 0.0,
            ..SolveConfig::default()
        };
        assert!(gmres(&Identity(2), &[1.0, 1.0], &Identity(2), &bad).is_err());
        assert!(gmres(&Identity(2), &[1.0], &Identity(2), &SolveConfig::default()).is_err());
        assert!(gmres(
            &Identity(2),
            &[1.0, 1.0],
            &Identity(3),
            &SolveConfig::default()
        )
        .is_err());
    }
}
