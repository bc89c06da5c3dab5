//! Smoothed-aggregation algebraic multigrid.
//!
//! Setup builds a level stack by strength-filtered greedy aggregation, a
//! piecewise-constant tentative prolongator smoothed by one damped Jacobi
//! step, and Galerkin coarse operators `Pᵀ A P`. The solve phase is a V(1,1)
//! cycle with forward Gauss-Seidel before and backward Gauss-Seidel after the
//! coarse correction, and a dense LU solve on the coarsest level. From a zero
//! initial guess one cycle is a fixed symmetric linear operator, which makes
//! it usable as a preconditioner inside standard (non-flexible) GMRES.

use std::fmt;

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, LuFactors};

#[derive(Clone, Debug, PartialEq)]
pub struct AmgParams {
    /// Strength threshold θ: `j` is a strong neighbor of `i` when
    /// `|a_ij| >= θ sqrt(|a_ii a_jj|)`.
    pub strength_threshold: f64,
    /// Coarsening stops once a level has fewer unknowns than this; that
    /// level is factored densely.
    pub max_coarse: usize,
    pub max_levels: usize,
    /// Power iterations used to estimate the spectral radius of `D⁻¹A`.
    pub power_iterations: usize,
    /// Prolongator smoothing weight is `numerator / ρ̂(D⁻¹A)`.
    pub smoothing_numerator: f64,
}

impl Default for AmgParams {
    fn default() -> Self {
        AmgParams {
            strength_threshold: 0.08,
            max_coarse: 64,
            max_levels: 20,
            power_iterations: 10,
            smoothing_numerator: 4.0 / 3.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AmgLevel {
    a: CsrMatrix,
    diag: Vec<f64>,
    /// Prolongator from the next coarser level; absent on the coarsest.
    p: Option<CsrMatrix>,
    r: Option<CsrMatrix>,
}

impl AmgLevel {
    pub fn operator(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn prolongator(&self) -> Option<&CsrMatrix> {
        self.p.as_ref()
    }
}

#[derive(Clone, Debug)]
enum CoarseSolver {
    Dense(LuFactors),
    Diagonal(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct AmgHierarchy {
    levels: Vec<AmgLevel>,
    coarse: CoarseSolver,
    /// The stored operators are `-A`; right-hand sides are negated on entry.
    negated: bool,
    params: AmgParams,
}

impl AmgHierarchy {
    /// Builds the hierarchy for `a`.
    ///
    /// Operators whose diagonal is entirely negative are negated internally;
    /// operators with no nonzero off-diagonal entries get a single level and
    /// an exact diagonal solve.
    pub fn setup(a: &CsrMatrix, params: &AmgParams) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                op: "amg_setup",
                nrows: a.nrows(),
                ncols: a.ncols(),
            });
        }
        if params.strength_threshold.is_nan()
            || params.strength_threshold < 0.0
            || params.max_levels == 0
        {
            return Err(Error::InvalidParameter(format!(
                "AMG parameters {params:?}"
            )));
        }
        let diag = a.extract_diagonal()?;
        if let Some(row) = diag.iter().position(|&d| d == 0.0) {
            return Err(Error::ZeroDiagonal { row, context: None });
        }
        let negated = !diag.is_empty() && diag.iter().all(|&d| d < 0.0);
        let mut current = if negated { a.scaled(-1.0) } else { a.clone() };

        if current.is_diagonal() {
            let inv = current
                .extract_diagonal()?
                .iter()
                .map(|d| 1.0 / d)
                .collect();
            let level = AmgLevel {
                diag: current.extract_diagonal()?,
                a: current,
                p: None,
                r: None,
            };
            return Ok(AmgHierarchy {
                levels: vec![level],
                coarse: CoarseSolver::Diagonal(inv),
                negated,
                params: params.clone(),
            });
        }

        let mut levels = Vec::new();
        loop {
            let diag = current.extract_diagonal()?;
            if let Some(row) = diag.iter().position(|&d| d == 0.0) {
                return Err(Error::ZeroDiagonal {
                    row,
                    context: Some(format!("AMG level {}", levels.len())),
                });
            }
            let n = current.nrows();
            if n < params.max_coarse || levels.len() + 1 >= params.max_levels {
                levels.push(AmgLevel {
                    a: current,
                    diag,
                    p: None,
                    r: None,
                });
                break;
            }
            let strong = strength_graph(&current, &diag, params.strength_threshold);
            let (aggregate_of, n_aggregates) = aggregate(&strong);
            if n_aggregates == 0 || n_aggregates >= n {
                levels.push(AmgLevel {
                    a: current,
                    diag,
                    p: None,
                    r: None,
                });
                break;
            }
            let p = smoothed_prolongator(&current, &strong, &aggregate_of, n_aggregates, params)?;
            let r = p.transpose();
            let coarse = r.matmul(&current.matmul(&p)?)?;
            levels.push(AmgLevel {
                a: current,
                diag,
                p: Some(p),
                r: Some(r),
            });
            current = coarse;
        }

        let coarsest = levels.last().expect("at least one level");
        let coarse = CoarseSolver::Dense(coarsest.a.to_dense().lu()?);
        Ok(AmgHierarchy {
            levels,
            coarse,
            negated,
            params: params.clone(),
        })
    }

    pub fn levels(&self) -> &[AmgLevel] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].a.nrows()
    }

    pub fn params(&self) -> &AmgParams {
        &self.params
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.a.nrows()).collect()
    }

    /// `Σ nnz(A_l) / nnz(A_0)`.
    pub fn operator_complexity(&self) -> f64 {
        let total: usize = self.levels.iter().map(|l| l.a.nnz()).sum();
        total as f64 / self.levels[0].a.nnz().max(1) as f64
    }

    /// `Σ n_l / n_0`.
    pub fn grid_complexity(&self) -> f64 {
        let total: usize = self.levels.iter().map(|l| l.a.nrows()).sum();
        total as f64 / self.dim().max(1) as f64
    }

    pub fn stats(&self) -> AmgStats {
        AmgStats {
            levels: self
                .levels
                .iter()
                .map(|l| (l.a.nrows(), l.a.nnz()))
                .collect(),
            operator_complexity: self.operator_complexity(),
            grid_complexity: self.grid_complexity(),
            negated: self.negated,
            direct: matches!(self.coarse, CoarseSolver::Diagonal(_)),
        }
    }

    /// One V(1,1) cycle for `A x = b` starting from `x0`.
    pub fn v_cycle(&self, b: &[f64], x0: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        for len in [b.len(), x0.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    op: "v_cycle",
                    expected: n,
                    found: len,
                });
            }
        }
        let mut x = x0.to_vec();
        self.cycle_into(b, &mut x);
        Ok(x)
    }

    /// One V-cycle from a zero initial guess: the preconditioner action.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                op: "amg_apply",
                expected: self.dim(),
                found: r.len(),
            });
        }
        let mut z = vec![0.0; r.len()];
        self.cycle_into(r, &mut z);
        Ok(z)
    }

    pub(crate) fn cycle_into(&self, b: &[f64], x: &mut [f64]) {
        if self.negated {
            let nb: Vec<f64> = b.iter().map(|v| -v).collect();
            self.level_cycle(0, &nb, x);
        } else {
            self.level_cycle(0, b, x);
        }
    }

    fn level_cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[l];
        let (Some(p), Some(r)) = (&level.p, &level.r) else {
            match &self.coarse {
                CoarseSolver::Dense(lu) => lu.solve_into(b, x),
                CoarseSolver::Diagonal(inv) => {
                    for ((xi, bi), di) in x.iter_mut().zip(b).zip(inv) {
                        *xi = bi * di;
                    }
                }
            }
            return;
        };
        gauss_seidel_forward(&level.a, &level.diag, b, x);
        let mut res = b.to_vec();
        level.a.spmv_sub_into(x, &mut res);
        let mut rc = vec![0.0; r.nrows()];
        r.spmv_into(&res, &mut rc);
        let mut xc = vec![0.0; rc.len()];
        self.level_cycle(l + 1, &rc, &mut xc);
        let mut corr = vec![0.0; x.len()];
        p.spmv_into(&xc, &mut corr);
        x.iter_mut().zip(&corr).for_each(|(a, c)| *a += c);
        gauss_seidel_backward(&level.a, &level.diag, b, x);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmgStats {
    /// `(rows, nnz)` per level, finest first.
    pub levels: Vec<(usize, usize)>,
    pub operator_complexity: f64,
    pub grid_complexity: f64,
    pub negated: bool,
    /// Single diagonal level solved exactly.
    pub direct: bool,
}

impl fmt::Display for AmgStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "levels {}  operator complexity {:.3}  grid complexity {:.3}{}{}",
            self.levels.len(),
            self.operator_complexity,
            self.grid_complexity,
            if self.negated { "  (negated)" } else { "" },
            if self.direct {
                "  (diagonal, direct)"
            } else {
                ""
            },
        )?;
        for (l, (n, nnz)) in self.levels.iter().enumerate() {
            writeln!(f, "  level {l:>2}: rows {n:>8}  nnz {nnz:>10}")?;
        }
        Ok(())
    }
}

fn gauss_seidel_forward(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64]) {
    for i in 0..a.nrows() {
        x[i] = gs_update(a, diag, b, x, i);
    }
}

fn gauss_seidel_backward(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64]) {
    for i in (0..a.nrows()).rev() {
        x[i] = gs_update(a, diag, b, x, i);
    }
}

#[inline]
fn gs_update(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &[f64], i: usize) -> f64 {
    let (cols, vals) = a.row(i);
    let mut s = b[i];
    for (&j, &v) in cols.iter().zip(vals) {
        if j != i {
            s -= v * x[j];
        }
    }
    s / diag[i]
}

/// Strong off-diagonal neighbors of every row.
fn strength_graph(a: &CsrMatrix, diag: &[f64], theta: f64) -> Vec<Vec<usize>> {
    (0..a.nrows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            cols.iter()
                .zip(vals)
                .filter(|&(&j, &v)| {
                    j != i && v != 0.0 && v.abs() >= theta * (diag[i] * diag[j]).abs().sqrt()
                })
                .map(|(&j, _)| j)
                .collect()
        })
        .collect()
}

/// Greedy aggregation. Pass one makes an aggregate of every node whose strong
/// neighborhood is still free; pass two attaches leftover nodes to a
/// neighboring pass-one aggregate; pass three groups whatever remains with its
/// free neighbors. Nodes without strong neighbors stay unaggregated.
fn aggregate(strong: &[Vec<usize>]) -> (Vec<Option<usize>>, usize) {
    let n = strong.len();
    let mut agg: Vec<Option<usize>> = vec![None; n];
    let mut count = 0;

    for i in 0..n {
        if agg[i].is_some() || strong[i].is_empty() {
            continue;
        }
        if strong[i].iter().all(|&j| agg[j].is_none()) {
            agg[i] = Some(count);
            for &j in &strong[i] {
                agg[j] = Some(count);
            }
            count += 1;
        }
    }

    let after_first = agg.clone();
    for i in 0..n {
        if agg[i].is_some() {
            continue;
        }
        if let Some(a) = strong[i].iter().find_map(|&j| after_first[j]) {
            agg[i] = Some(a);
        }
    }

    for i in 0..n {
        if agg[i].is_some() || strong[i].is_empty() {
            continue;
        }
        agg[i] = Some(count);
        for &j in &strong[i] {
            if agg[j].is_none() {
                agg[j] = Some(count);
            }
        }
        count += 1;
    }
    (agg, count)
}

/// `P = (I - ω D_f⁻¹ A_f) P_tent` where `A_f` keeps strong entries and lumps
/// weak ones onto the diagonal.
fn smoothed_prolongator(
    a: &CsrMatrix,
    strong: &[Vec<usize>],
    aggregate_of: &[Option<usize>],
    n_aggregates: usize,
    params: &AmgParams,
) -> Result<CsrMatrix> {
    let n = a.nrows();

    let mut sizes = vec![0usize; n_aggregates];
    for g in aggregate_of.iter().flatten() {
        sizes[*g] += 1;
    }
    let tentative: Vec<(usize, usize, f64)> = aggregate_of
        .iter()
        .enumerate()
        .filter_map(|(i, g)| g.map(|g| (i, g, 1.0 / (sizes[g] as f64).sqrt())))
        .collect();
    let p_tent = CsrMatrix::from_triplets(n, n_aggregates, &tentative)?;

    let mut filtered = Vec::with_capacity(a.nnz());
    for (i, strong_i) in strong.iter().enumerate() {
        let (cols, vals) = a.row(i);
        let mut lumped = 0.0;
        let mut diag = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag += v;
            } else if strong_i.binary_search(&j).is_ok() {
                filtered.push((i, j, v));
            } else {
                lumped += v;
            }
        }
        // A row without strong neighbors keeps its own diagonal; its row of
        // the prolongator is zero either way.
        let d = if strong_i.is_empty() {
            diag
        } else {
            diag + lumped
        };
        filtered.push((i, i, d));
    }
    let a_f = CsrMatrix::from_triplets(n, n, &filtered)?;
    let d_f = a_f.extract_diagonal()?;
    let mut dinv = Vec::with_capacity(n);
    for (i, &d) in d_f.iter().enumerate() {
        if d == 0.0 {
            return Err(Error::ZeroDiagonal {
                row: i,
                context: Some("filtered operator in prolongator smoothing".into()),
            });
        }
        dinv.push(1.0 / d);
    }
    let jacobi = a_f.scale_rows(&dinv)?;
    let rho = spectral_radius_estimate(&jacobi, params.power_iterations);
    let omega = if rho > 0.0 {
        params.smoothing_numerator / rho
    } else {
        0.0
    };
    let smoothed = jacobi.matmul(&p_tent)?;
    p_tent.add_scaled(&smoothed, -omega)
}

/// Power-iteration estimate of the spectral radius, from a fixed start vector.
fn spectral_radius_estimate(m: &CsrMatrix, iterations: usize) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin())
        .collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut y = vec![0.0; n];
    let mut rho = 0.0;
    for _ in 0..iterations.max(1) {
        let nx = norm(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        m.spmv_into(&x, &mut y);
        rho = norm(&y);
        std::mem::swap(&mut x, &mut y);
    }
    rho
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::sparse::{dense_lu_solve, DenseMatrix};

    pub(crate) fn poisson_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    pub(crate) fn poisson_2d(n: usize) -> CsrMatrix {
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
        CsrMatrix::from_triplets(n * n, n * n, &t).unwrap()
    }

    fn a_norm(a: &CsrMatrix, e: &[f64]) -> f64 {
        let ae = a.spmv(e).unwrap();
        ae.iter().zip(e).map(|(x, y)| x * y).sum::<f64>().sqrt()
    }

    #[test]
    fn poisson_1d_coarsens() {
        let h = AmgHierarchy::setup(&poisson_1d(64), &AmgParams::default()).unwrap();
        let sizes = h.level_sizes();
        assert!(sizes.len() >= 2, "{sizes:?}");
        assert!(sizes.windows(2).all(|w| w[1] < w[0]));
        assert!(*sizes.last().unwrap() <= 64);
    }

    #[test]
    fn diagonal_operator_is_single_level_direct() {
        let d: Vec<f64> = (1..=500).map(|i| i as f64).collect();
        let h = AmgHierarchy::setup(&CsrMatrix::from_diagonal(&d), &AmgParams::default()).unwrap();
        assert_eq!(h.num_levels(), 1);
        assert!(h.stats().direct);
        let z = h.apply(&d).unwrap();
        assert!(z.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn identity_preconditioner_returns_input() {
        let h = AmgHierarchy::setup(&CsrMatrix::identity(10), &AmgParams::default()).unwrap();
        let r: Vec<f64> = (0..10).map(|i| i as f64 - 3.0).collect();
        assert_eq!(h.apply(&r).unwrap(), r);
    }

    #[test]
    fn negative_diagonal_is_negated_transparently() {
        let a = poisson_2d(12).scaled(-1.0);
        let h = AmgHierarchy::setup(&a, &AmgParams::default()).unwrap();
        assert!(h.is_negated());
        let b: Vec<f64> = (0..a.nrows()).map(|i| (i as f64).cos()).collect();
        let mut x = vec![0.0; b.len()];
        for _ in 0..30 {
            x = h.v_cycle(&b, &x).unwrap();
        }
        let r = a.spmv(&x).unwrap();
        let res: f64 = r
            .iter()
            .zip(&b)
            .map(|(u, v)| (u - v).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-8, "residual {res}");
    }

    #[test]
    fn galerkin_identity_on_every_level() {
        let h = AmgHierarchy::setup(&poisson_2d(32), &AmgParams::default()).unwrap();
        assert!(h.num_levels() >= 2);
        for w in h.levels().windows(2) {
            let p = w[0].prolongator().unwrap().to_dense();
            let af = w[0].operator().to_dense();
            let ac = p.transpose().matmul(&af).unwrap().matmul(&p).unwrap();
            let diff = ac.max_abs_diff(&w[1].operator().to_dense());
            assert!(diff <= 1e-12, "Galerkin mismatch {diff}");
            assert_eq!(p.nrows(), w[0].operator().nrows());
            assert_eq!(p.ncols(), w[1].operator().nrows());
        }
        assert!(h.operator_complexity() <= 3.0);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let h = AmgHierarchy::setup(&poisson_2d(16), &AmgParams::default()).unwrap();
        let z = h.v_cycle(&vec![0.0; 256], &vec![0.0; 256]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn small_operator_is_solved_exactly() {
        let a = poisson_1d(20);
        let h = AmgHierarchy::setup(&a, &AmgParams::default()).unwrap();
        assert_eq!(h.num_levels(), 1);
        let b: Vec<f64> = (0..20).map(|i| (i as f64 * 0.3).sin()).collect();
        let x = h.v_cycle(&b, &[5.0; 20]).unwrap();
        let exact = dense_lu_solve(&a.to_dense(), &b).unwrap();
        for (u, v) in x.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn v_cycle_contracts_error_on_poisson_32() {
        let a = poisson_2d(32);
        let h = AmgHierarchy::setup(&a, &AmgParams::default()).unwrap();
        let b: Vec<f64> = (0..a.nrows())
            .map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.5)
            .collect();
        let exact = dense_lu_solve(&a.to_dense(), &b).unwrap();
        let mut x = vec![0.0; b.len()];
        let err = |x: &[f64]| {
            let e: Vec<f64> = x.iter().zip(&exact).map(|(u, v)| u - v).collect();
            a_norm(&a, &e)
        };
        let mut prev = err(&x);
        for _ in 0..10 {
            x = h.v_cycle(&b, &x).unwrap();
            let cur = err(&x);
            assert!(cur <= 0.5 * prev, "contraction {}", cur / prev);
            prev = cur;
        }
    }

    #[test]
    fn preconditioner_columns_are_reproducible() {
        let a = poisson_1d(10);
        let params = AmgParams {
            max_coarse: 3,
            ..AmgParams::default()
        };
        let h = AmgHierarchy::setup(&a, &params).unwrap();
        assert!(h.num_levels() >= 2);
        let columns = |h: &AmgHierarchy| {
            let mut m = DenseMatrix::zeros(10, 10);
            for j in 0..10 {
                let mut e = vec![0.0; 10];
                e[j] = 1.0;
                let z = h.apply(&e).unwrap();
                for i in 0..10 {
                    m[(i, j)] = z[i];
                }
            }
            m
        };
        let m1 = columns(&h);
        let m2 = columns(&h);
        assert_eq!(m1, m2);
        // Symmetric V(1,1) cycle gives a symmetric operator.
        assert!(m1.max_abs_diff(&m1.transpose()) < 1e-13);
    }

    #[test]
    fn zero_diagonal_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(
            AmgHierarchy::setup(&a, &AmgParams::default()),
            Err(Error::ZeroDiagonal { row: 0, .. })
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let h = AmgHierarchy::setup(&poisson_1d(5), &AmgParams::default()).unwrap();
        assert!(h.apply(&[1.0]).is_err());
        assert!(h.v_cycle(&[0.0; 5], &[0.0; 4]).is_err());
    }
}
