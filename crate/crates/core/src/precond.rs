//! Block preconditioners built from the factorization `A = U D L`, where
//!
//! ```text
//! U = [I  A_ΩΓ A_ΓΓ⁻¹]   D = [S  0   ]   L = [I           0]
//!     [0  I          ]       [0  A_ΓΓ]       [A_ΓΓ⁻¹ A_ΓΩ  I]
//! ```
//!
//! and `S = A_ΩΩ − A_ΩΓ A_ΓΓ⁻¹ A_ΓΩ`. `B_D = D⁻¹`, `B_U = (U D)⁻¹` and
//! `B_L = (D L)⁻¹`. The practical variant `M_L` has the structure of `B_L`
//! with `S` replaced by the sparse approximation built from `diag(A_ΓΓ)` and
//! both diagonal block solves replaced by one AMG V-cycle (or a direct
//! solve where the block is diagonal).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::amg::{AmgHierarchy, AmgParams};
use crate::assembly::BlockSystem;
use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::sparse::{triple_product_diag_scaled, CsrMatrix, DenseMatrix, LuFactors};

pub const DEFAULT_ORACLE_CAP: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// `B_D`: independent solves on both diagonal blocks.
    Diagonal,
    /// `B_U`: interface block first, then the corrected Ω residual.
    Upper,
    /// `B_L`: Ω block first, then the corrected interface residual.
    Lower,
    /// `M_L`: lower-triangular structure with approximate ingredients.
    Practical,
}

impl BlockKind {
    pub fn label(self) -> &'static str {
        match self {
            BlockKind::Diagonal => "B_D",
            BlockKind::Upper => "B_U",
            BlockKind::Lower => "B_L",
            BlockKind::Practical => "M_L",
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchurMode {
    /// Dense `S`, only below the oracle cap.
    Exact,
    /// Sparse `S̃ = A_ΩΩ − A_ΩΓ diag(A_ΓΓ)⁻¹ A_ΓΩ`.
    DiagonalApprox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    /// Exact solve: diagonal scaling, or dense LU below the oracle cap.
    Direct,
    /// One V-cycle from a zero initial guess.
    Amg,
    /// Direct when the block is diagonal, AMG otherwise.
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreconditionerConfig {
    pub kind: BlockKind,
    pub schur: SchurMode,
    pub inner_omega: InnerSolver,
    pub inner_gamma: InnerSolver,
    #[serde(skip)]
    pub amg: AmgParams,
    pub oracle_cap: usize,
}

impl Default for PreconditionerConfig {
    fn default() -> Self {
        Self::practical()
    }
}

impl PreconditionerConfig {
    /// `M_L` as used for the benchmark runs.
    pub fn practical() -> Self {
        PreconditionerConfig {
            kind: BlockKind::Practical,
            schur: SchurMode::DiagonalApprox,
            inner_omega: InnerSolver::Amg,
            inner_gamma: InnerSolver::Auto,
            amg: AmgParams::default(),
            oracle_cap: DEFAULT_ORACLE_CAP,
        }
    }

    /// Exact Schur complement with direct inner solves.
    pub fn exact(kind: BlockKind) -> Self {
        PreconditionerConfig {
            kind,
            schur: SchurMode::Exact,
            inner_omega: InnerSolver::Direct,
            inner_gamma: InnerSolver::Direct,
            ..Self::practical()
        }
    }

    pub fn with_kind(mut self, kind: BlockKind) -> Self {
        self.kind = kind;
        self
    }
}

fn check_cap(system: &BlockSystem, cap: usize) -> Result<()> {
    if system.dim() > cap {
        return Err(Error::OracleCapExceeded {
            dofs: system.dim(),
            cap,
        });
    }
    Ok(())
}

/// Dense `A_ΓΓ⁻¹ X` for a sparse `X` with `n_Γ` rows.
fn gamma_solve_dense(system: &BlockSystem, rhs: &CsrMatrix) -> Result<DenseMatrix> {
    let lu = system.gamma_gamma().to_dense().lu()?;
    let x = rhs.to_dense();
    let mut out = DenseMatrix::zeros(x.nrows(), x.ncols());
    let mut col = vec![0.0; x.nrows()];
    for j in 0..x.ncols() {
        for (i, c) in col.iter_mut().enumerate() {
            *c = x[(i, j)];
        }
        let sol = lu.solve(&col)?;
        for (i, v) in sol.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Dense Schur complement `S = A_ΩΩ − A_ΩΓ A_ΓΓ⁻¹ A_ΓΩ`, subject to the
/// default oracle cap.
pub fn exact_schur(system: &BlockSystem) -> Result<DenseMatrix> {
    exact_schur_capped(system, DEFAULT_ORACLE_CAP)
}

pub fn exact_schur_capped(system: &BlockSystem, cap: usize) -> Result<DenseMatrix> {
    check_cap(system, cap)?;
    let aoo = system.omega_omega().to_dense();
    if system.n_gamma() == 0 {
        return Ok(aoo);
    }
    let y = gamma_solve_dense(system, system.gamma_omega())?;
    let correction = system.omega_gamma().to_dense().matmul(&y)?;
    aoo.add_scaled(&correction, -1.0)
}

/// Sparse `S̃ = A_ΩΩ − A_ΩΓ diag(A_ΓΓ)⁻¹ A_ΓΩ`.
pub fn approx_schur(system: &BlockSystem) -> Result<CsrMatrix> {
    let diag = system.gamma_gamma().extract_diagonal()?;
    let mut dinv = Vec::with_capacity(diag.len());
    for (k, &d) in diag.iter().enumerate() {
        if d == 0.0 {
            let global = system.n_omega() + k;
            let partition = system.partition();
            let block = partition.gamma_block_of(global).unwrap_or(0);
            let local = global - partition.gamma.get(block).map_or(global, |r| r.start);
            return Err(Error::ZeroDiagonal {
                row: global,
                context: Some(format!("A_ΓΓ, interface {block} dof {local}")),
            });
        }
        dinv.push(1.0 / d);
    }
    let correction = triple_product_diag_scaled(system.omega_gamma(), &dinv, system.gamma_omega())?;
    system.omega_omega().add_scaled(&correction, -1.0)
}

/// Dense factors with `A = U D L`.
#[derive(Clone, Debug)]
pub struct ExactFactors {
    pub u: DenseMatrix,
    pub d: DenseMatrix,
    pub l: DenseMatrix,
}

impl ExactFactors {
    pub fn product(&self) -> Result<DenseMatrix> {
        self.u.matmul(&self.d)?.matmul(&self.l)
    }
}

pub fn exact_factors(system: &BlockSystem) -> Result<ExactFactors> {
    check_cap(system, DEFAULT_ORACLE_CAP)?;
    let (no, ng) = (system.n_omega(), system.n_gamma());
    let n = no + ng;
    let s = exact_schur(system)?;
    let agg = system.gamma_gamma().to_dense();

    let mut u = DenseMatrix::identity(n);
    let mut l = DenseMatrix::identity(n);
    let mut d = DenseMatrix::zeros(n, n);
    d.set_block(0, 0, &s);
    d.set_block(no, no, &agg);
    if ng > 0 {
        // A_ΩΓ A_ΓΓ⁻¹ = (A_ΓΓ⁻ᵀ A_ΩΓᵀ)ᵀ
        let lu_t = agg.transpose().lu()?;
        let aog = system.omega_gamma().to_dense();
        let mut upper = DenseMatrix::zeros(no, ng);
        for i in 0..no {
            let row = lu_t.solve(aog.row(i))?;
            for (j, v) in row.into_iter().enumerate() {
                upper[(i, j)] = v;
            }
        }
        u.set_block(0, no, &upper);
        l.set_block(no, 0, &gamma_solve_dense(system, system.gamma_omega())?);
    }
    Ok(ExactFactors { u, d, l })
}

#[derive(Clone, Debug)]
enum InnerOp {
    Diagonal(Vec<f64>),
    Dense(LuFactors),
    Amg(Box<AmgHierarchy>),
}

impl InnerOp {
    fn solve(&self, r: &[f64], z: &mut [f64]) {
        match self {
            InnerOp::Diagonal(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            InnerOp::Dense(lu) => lu.solve_into(r, z),
            InnerOp::Amg(h) => {
                z.iter_mut().for_each(|v| *v = 0.0);
                h.cycle_into(r, z);
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            InnerOp::Diagonal(_) => "diagonal".into(),
            InnerOp::Dense(_) => "dense LU".into(),
            InnerOp::Amg(h) => format!("AMG V(1,1), {} levels", h.num_levels()),
        }
    }

    fn diagonal_inverse(a: &CsrMatrix, what: &str) -> Result<Self> {
        let d = a.extract_diagonal()?;
        let mut inv = Vec::with_capacity(d.len());
        for (row, &v) in d.iter().enumerate() {
            if v == 0.0 {
                return Err(Error::ZeroDiagonal {
                    row,
                    context: Some(what.to_string()),
                });
            }
            inv.push(1.0 / v);
        }
        Ok(InnerOp::Diagonal(inv))
    }

    fn from_sparse(
        a: &CsrMatrix,
        solver: InnerSolver,
        cfg: &PreconditionerConfig,
        what: &str,
    ) -> Result<Self> {
        if a.nrows() == 0 {
            return Ok(InnerOp::Diagonal(Vec::new()));
        }
        match solver {
            InnerSolver::Direct | InnerSolver::Auto if a.is_diagonal() => {
                Self::diagonal_inverse(a, what)
            }
            InnerSolver::Direct => {
                if a.nrows() > cfg.oracle_cap {
                    return Err(Error::OracleCapExceeded {
                        dofs: a.nrows(),
                        cap: cfg.oracle_cap,
                    });
                }
                Ok(InnerOp::Dense(a.to_dense().lu()?))
            }
            InnerSolver::Amg | InnerSolver::Auto => {
                Ok(InnerOp::Amg(Box::new(AmgHierarchy::setup(a, &cfg.amg)?)))
            }
        }
    }
}

/// A fixed linear preconditioner for the full block system.
#[derive(Clone, Debug)]
pub struct BlockPreconditioner {
    config: PreconditionerConfig,
    n_omega: usize,
    n_gamma: usize,
    gamma_omega: CsrMatrix,
    omega_gamma: CsrMatrix,
    q_omega: InnerOp,
    q_gamma: InnerOp,
}

impl BlockPreconditioner {
    pub fn build(system: &BlockSystem, config: &PreconditionerConfig) -> Result<Self> {
        let q_omega = match config.schur {
            SchurMode::Exact => {
                let s = exact_schur_capped(system, config.oracle_cap)?;
                match config.inner_omega {
                    InnerSolver::Direct | InnerSolver::Auto => InnerOp::Dense(s.lu()?),
                    InnerSolver::Amg => {
                        let sparse = CsrMatrix::from_dense(&s, 0.0);
                        InnerOp::from_sparse(
                            &sparse,
                            InnerSolver::Amg,
                            config,
                            "exact Schur complement",
                        )?
                    }
                }
            }
            SchurMode::DiagonalApprox => {
                let s = approx_schur(system)?;
                InnerOp::from_sparse(
                    &s,
                    config.inner_omega,
                    config,
                    "approximate Schur complement",
                )?
            }
        };
        let q_gamma =
            InnerOp::from_sparse(system.gamma_gamma(), config.inner_gamma, config, "A_ΓΓ")?;
        Ok(BlockPreconditioner {
            config: config.clone(),
            n_omega: system.n_omega(),
            n_gamma: system.n_gamma(),
            gamma_omega: system.gamma_omega().clone(),
            omega_gamma: system.omega_gamma().clone(),
            q_omega,
            q_gamma,
        })
    }

    pub fn config(&self) -> &PreconditionerConfig {
        &self.config
    }

    pub fn kind(&self) -> BlockKind {
        self.config.kind
    }

    /// The AMG hierarchy used for the Ω block, if any.
    pub fn omega_hierarchy(&self) -> Option<&AmgHierarchy> {
        match &self.q_omega {
            InnerOp::Amg(h) => Some(h),
            _ => None,
        }
    }

    pub fn gamma_hierarchy(&self) -> Option<&AmgHierarchy> {
        match &self.q_gamma {
            InnerOp::Amg(h) => Some(h),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{} ({:?} Schur), Ω: {}, Γ: {}",
            self.config.kind,
            self.config.schur,
            self.q_omega.describe(),
            self.q_gamma.describe()
        )
    }

    fn apply_checked(&self, r: &[f64], z: &mut [f64]) {
        let no = self.n_omega;
        let (r_o, r_g) = r.split_at(no);
        let (z_o, z_g) = z.split_at_mut(no);
        match self.config.kind {
            BlockKind::Diagonal => {
                self.q_omega.solve(r_o, z_o);
                self.q_gamma.solve(r_g, z_g);
            }
            BlockKind::Lower | BlockKind::Practical => {
                self.q_omega.solve(r_o, z_o);
                let mut t = r_g.to_vec();
                self.gamma_omega.spmv_sub_into(z_o, &mut t);
                self.q_gamma.solve(&t, z_g);
            }
            BlockKind::Upper => {
                self.q_gamma.solve(r_g, z_g);
                let mut t = r_o.to_vec();
                self.omega_gamma.spmv_sub_into(z_g, &mut t);
                self.q_omega.solve(&t, z_o);
            }
        }
    }
}

impl LinearOperator for BlockPreconditioner {
    fn dim(&self) -> usize {
        self.n_omega + self.n_gamma
    }

    fn apply_into(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let n = self.dim();
        for len in [r.len(), z.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    op: "preconditioner_apply",
                    expected: n,
                    found: len,
                });
            }
        }
        self.apply_checked(r, z);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, PhysicalParams};
    use crate::grid::{build_cross_2d, DofPartition, GridOptions};

    fn one_dof() -> BlockSystem {
        let m = |v: f64| CsrMatrix::from_triplets(1, 1, &[(0, 0, v)]).unwrap();
        BlockSystem::new(
            m(2.0),
            m(1.0),
            m(1.0),
            m(-1.0),
            vec![0.0],
            vec![0.0],
            DofPartition::from_sizes(&[1], &[1]),
        )
        .unwrap()
    }

    fn cross(n: usize) -> BlockSystem {
        let grid = build_cross_2d(n, &GridOptions::default()).unwrap();
        assemble(&grid, &PhysicalParams::uniform(&grid, 1.0, 10.0, 0.5)).unwrap()
    }

    fn columns(op: &dyn LinearOperator) -> DenseMatrix {
        let n = op.dim();
        let mut m = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let c = op.apply(&e).unwrap();
            for i in 0..n {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    #[test]
    fn one_dof_schur_complements() {
        let s = one_dof();
        assert_eq!(exact_schur(&s).unwrap().as_slice(), &[3.0]);
        assert_eq!(approx_schur(&s).unwrap().get(0, 0), 3.0);
    }

    #[test]
    fn no_coupling_schur_is_omega_block() {
        let m = |v: f64| CsrMatrix::from_triplets(1, 1, &[(0, 0, v)]).unwrap();
        let s = BlockSystem::new(
            m(2.0),
            CsrMatrix::zeros(1, 1),
            CsrMatrix::zeros(1, 1),
            m(-4.0),
            vec![0.0],
            vec![0.0],
            DofPartition::from_sizes(&[1], &[1]),
        )
        .unwrap();
        assert_eq!(exact_schur(&s).unwrap().as_slice(), &[2.0]);
        assert_eq!(approx_schur(&s).unwrap().to_dense().as_slice(), &[2.0]);
    }

    #[test]
    fn one_dof_block_diagonal_apply() {
        let p = BlockPreconditioner::build(
            &one_dof(),
            &PreconditionerConfig::exact(BlockKind::Diagonal),
        )
        .unwrap();
        let z = p.apply(&[6.0, 4.0]).unwrap();
        assert!((z[0] - 2.0).abs() < 1e-15);
        assert!((z[1] + 4.0).abs() < 1e-15);
    }

    #[test]
    fn one_dof_block_lower_apply() {
        let p =
            BlockPreconditioner::build(&one_dof(), &PreconditionerConfig::exact(BlockKind::Lower))
                .unwrap();
        let z = p.apply(&[3.0, -1.0]).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-15);
        assert!((z[1] - 2.0).abs() < 1e-15);
        assert_eq!(p.apply(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn one_dof_block_upper_apply() {
        // z_Γ = r_Γ / −1; z_Ω = (r_Ω − z_Γ) / 3
        let p =
            BlockPreconditioner::build(&one_dof(), &PreconditionerConfig::exact(BlockKind::Upper))
                .unwrap();
        let z = p.apply(&[3.0, -1.0]).unwrap();
        assert!((z[1] - 1.0).abs() < 1e-15);
        assert!((z[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_schur_matches_elimination_on_cross() {
        let s = cross(2);
        let n = s.dim();
        let no = s.n_omega();
        // Gaussian elimination of the Γ unknowns on the monolithic matrix.
        let mut a = s.monolithic().to_dense();
        for k in (no..n).rev() {
            let piv = a[(k, k)];
            for i in 0..k {
                let f = a[(i, k)] / piv;
                if f != 0.0 {
                    for j in 0..n {
                        a[(i, j)] -= f * a[(k, j)];
                    }
                }
            }
        }
        let schur = exact_schur(&s).unwrap();
        for i in 0..no {
            for j in 0..no {
                assert!((schur[(i, j)] - a[(i, j)]).abs() <= 1e-12 * (1.0 + a[(i, j)].abs()));
            }
        }
        let approx = approx_schur(&s).unwrap().to_dense();
        assert!(approx.max_abs_diff(&schur) <= 1e-12 * schur.norm_inf());
    }

    #[test]
    fn factors_reproduce_the_system() {
        for n in [2, 4] {
            let s = cross(n);
            let f = exact_factors(&s).unwrap();
            let a = s.monolithic().to_dense();
            let diff = f.product().unwrap().add_scaled(&a, -1.0).unwrap();
            assert!(diff.frobenius_norm() <= 1e-10 * a.frobenius_norm());
        }
    }

    #[test]
    fn exact_lower_times_system_is_upper_factor() {
        let s = cross(2);
        let p =
            BlockPreconditioner::build(&s, &PreconditionerConfig::exact(BlockKind::Lower)).unwrap();
        let f = exact_factors(&s).unwrap();
        let ab = s.monolithic().to_dense().matmul(&columns(&p)).unwrap();
        assert!(ab.max_abs_diff(&f.u) <= 1e-10);
    }

    #[test]
    fn direct_practical_equals_exact_lower_on_matching_grid() {
        let s = cross(4);
        let practical = PreconditionerConfig {
            inner_omega: InnerSolver::Direct,
            inner_gamma: InnerSolver::Direct,
            ..PreconditionerConfig::practical()
        };
        let p = BlockPreconditioner::build(&s, &practical).unwrap();
        let e =
            BlockPreconditioner::build(&s, &PreconditionerConfig::exact(BlockKind::Lower)).unwrap();
        let (cp, ce) = (columns(&p), columns(&e));
        assert!(cp.max_abs_diff(&ce) <= 1e-10 * ce.norm_inf());
    }

    #[test]
    fn practical_setup_is_deterministic() {
        let s = cross(8);
        let cfg = PreconditionerConfig::practical();
        let a = BlockPreconditioner::build(&s, &cfg).unwrap();
        let b = BlockPreconditioner::build(&s, &cfg).unwrap();
        assert_eq!(columns(&a), columns(&b));
        assert!(a.describe().starts_with("M_L"));
        assert!(a.gamma_hierarchy().is_none());
    }

    #[test]
    fn zero_interface_diagonal_is_reported() {
        let m = |v: f64| CsrMatrix::from_triplets(1, 1, &[(0, 0, v)]).unwrap();
        let s = BlockSystem::new(
            m(2.0),
            m(1.0),
            m(1.0),
            CsrMatrix::zeros(1, 1),
            vec![0.0],
            vec![0.0],
            DofPartition::from_sizes(&[1], &[1]),
        )
        .unwrap();
        match approx_schur(&s) {
            Err(Error::ZeroDiagonal {
                row: 1,
                context: Some(c),
            }) => assert!(c.contains("interface 0")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exact_mode_respects_cap() {
        let s = cross(4);
        let cfg = PreconditionerConfig {
            oracle_cap: 10,
            ..PreconditionerConfig::exact(BlockKind::Lower)
        };
        assert!(matches!(
            BlockPreconditioner::build(&s, &cfg),
            Err(Error::OracleCapExceeded { cap: 10, .. })
        ));
    }

    #[test]
    fn wrong_length_rejected() {
        let p =
            BlockPreconditioner::build(&one_dof(), &PreconditionerConfig::exact(BlockKind::Lower))
                .unwrap();
        assert!(p.apply(&[1.0]).is_err());
    }
}
