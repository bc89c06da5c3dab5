//! Two-point flux discretization of the mixed-dimensional problem and the
//! resulting two-by-two block system.
//!
//! Unknowns are one pressure per subdomain cell (Ω) and one flux density
//! per mortar cell (Γ). With `a` the mortar measure and `κ̃` the effective
//! normal transmissivity of a mortar cell, the rows are
//!
//! ```text
//! Ω row of cell c:  Σ_faces T (p_c - p_nb) + Σ_{mortars on c's faces} a λ
//!                   - Σ_{mortars on c itself} a λ                    = f_c |c|
//! Γ row of mortar:  a p_higher - a p_lower - (a / κ̃) λ              = 0
//! ```
//!
//! so `A_ΓΩ = A_ΩΓᵀ` holds exactly and `A_ΓΓ` is diagonal with entries
//! `-a/κ̃`. The trace pressure on the higher side is replaced by the cell
//! pressure with the half-cell transmissibility folded into
//! `κ̃ = (1/κ + 1/t_half)⁻¹`.

use crate::error::{Error, Result};
use crate::grid::{BoundaryCondition, DofPartition, MixedDimGrid};
use crate::sparse::CsrMatrix;

/// Material parameters, indexed like the grid's subdomains and interfaces.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalParams {
    /// Tangential permeability per subdomain: the matrix permeability for
    /// top-dimensional subdomains, `K_∥` for fractures and intersections.
    pub permeability: Vec<f64>,
    /// Normal transmissivity `κ` per interface.
    pub kappa: Vec<f64>,
    /// Source per unit volume, one vector per subdomain. `None` means zero.
    pub sources: Option<Vec<Vec<f64>>>,
    /// Aperture `a`; a subdomain of codimension `c` gets specific volume
    /// `a^c`, scaling its cell volumes and tangential transmissibilities.
    pub aperture: f64,
}

impl PhysicalParams {
    /// Matrix permeability on top-dimensional subdomains, `k_parallel` on all
    /// lower-dimensional ones, and `kappa` on every interface.
    pub fn uniform(
        grid: &MixedDimGrid,
        matrix_permeability: f64,
        k_parallel: f64,
        kappa: f64,
    ) -> Self {
        let top = grid.ambient_dim();
        PhysicalParams {
            permeability: grid
                .subdomains()
                .iter()
                .map(|s| {
                    if s.dim == top {
                        matrix_permeability
                    } else {
                        k_parallel
                    }
                })
                .collect(),
            kappa: vec![kappa; grid.interfaces().len()],
            sources: None,
            aperture: 1.0,
        }
    }

    /// Multiplies every permeability and transmissivity by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        PhysicalParams {
            permeability: self.permeability.iter().map(|k| k * factor).collect(),
            kappa: self.kappa.iter().map(|k| k * factor).collect(),
            ..self.clone()
        }
    }

    fn validate(&self, grid: &MixedDimGrid) -> Result<()> {
        let ns = grid.subdomains().len();
        if self.permeability.len() != ns {
            return Err(Error::MissingParameter(format!(
                "permeability given for {} subdomains, grid has {ns}",
                self.permeability.len()
            )));
        }
        let ni = grid.interfaces().len();
        if self.kappa.len() != ni {
            return Err(Error::MissingParameter(format!(
                "kappa given for {} interfaces, grid has {ni}",
                self.kappa.len()
            )));
        }
        for (i, &k) in self.permeability.iter().enumerate() {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "permeability {k} on subdomain {i}"
                )));
            }
        }
        for (j, &k) in self.kappa.iter().enumerate() {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "kappa {k} on interface {j}"
                )));
            }
        }
        if !(self.aperture > 0.0 && self.aperture.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "aperture {}",
                self.aperture
            )));
        }
        if let Some(src) = &self.sources {
            if src.len() != ns {
                return Err(Error::MissingParameter(format!(
                    "sources given for {} subdomains, grid has {ns}",
                    src.len()
                )));
            }
            for (s, (v, sub)) in src.iter().zip(grid.subdomains()).enumerate() {
                if v.len() != sub.num_cells() {
                    return Err(Error::MissingParameter(format!(
                        "sources on subdomain {s}: {} values for {} cells",
                        v.len(),
                        sub.num_cells()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The block system `[[A_ΩΩ, A_ΩΓ], [A_ΓΩ, A_ΓΓ]] (p_Ω, λ_Γ) = (f_Ω, f_Γ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSystem {
    omega_omega: CsrMatrix,
    omega_gamma: CsrMatrix,
    gamma_omega: CsrMatrix,
    gamma_gamma: CsrMatrix,
    rhs_omega: Vec<f64>,
    rhs_gamma: Vec<f64>,
    partition: DofPartition,
}

impl BlockSystem {
    /// Checks block shapes against the partition.
    pub fn new(
        omega_omega: CsrMatrix,
        omega_gamma: CsrMatrix,
        gamma_omega: CsrMatrix,
        gamma_gamma: CsrMatrix,
        rhs_omega: Vec<f64>,
        rhs_gamma: Vec<f64>,
        partition: DofPartition,
    ) -> Result<Self> {
        partition.validate()?;
        let (no, ng) = (partition.n_omega(), partition.n_gamma());
        let checks = [
            ("A_omega_omega", omega_omega.shape(), (no, no)),
            ("A_omega_gamma", omega_gamma.shape(), (no, ng)),
            ("A_gamma_omega", gamma_omega.shape(), (ng, no)),
            ("A_gamma_gamma", gamma_gamma.shape(), (ng, ng)),
            ("rhs_omega", (rhs_omega.len(), 1), (no, 1)),
            ("rhs_gamma", (rhs_gamma.len(), 1), (ng, 1)),
        ];
        for (name, found, expected) in checks {
            if found != expected {
                return Err(Error::Partition(format!(
                    "{name} is {}x{} but the partition ({no} omega + {ng} gamma dofs) requires {}x{}",
                    found.0, found.1, expected.0, expected.1
                )));
            }
        }
        Ok(BlockSystem {
            omega_omega,
            omega_gamma,
            gamma_omega,
            gamma_gamma,
            rhs_omega,
            rhs_gamma,
            partition,
        })
    }

    pub fn omega_omega(&self) -> &CsrMatrix {
        &self.omega_omega
    }

    pub fn omega_gamma(&self) -> &CsrMatrix {
        &self.omega_gamma
    }

    pub fn gamma_omega(&self) -> &CsrMatrix {
        &self.gamma_omega
    }

    pub fn gamma_gamma(&self) -> &CsrMatrix {
        &self.gamma_gamma
    }

    pub fn rhs_omega(&self) -> &[f64] {
        &self.rhs_omega
    }

    pub fn rhs_gamma(&self) -> &[f64] {
        &self.rhs_gamma
    }

    pub fn partition(&self) -> &DofPartition {
        &self.partition
    }

    pub fn n_omega(&self) -> usize {
        self.partition.n_omega()
    }

    pub fn n_gamma(&self) -> usize {
        self.partition.n_gamma()
    }

    pub fn dim(&self) -> usize {
        self.n_omega() + self.n_gamma()
    }

    /// Right-hand side in partition order.
    pub fn rhs(&self) -> Vec<f64> {
        let mut b = self.rhs_omega.clone();
        b.extend_from_slice(&self.rhs_gamma);
        b
    }

    /// The full operator as one CSR matrix, Ω unknowns first.
    pub fn monolithic(&self) -> CsrMatrix {
        let (no, ng) = (self.n_omega(), self.n_gamma());
        let n = no + ng;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let nnz = self.omega_omega.nnz()
            + self.omega_gamma.nnz()
            + self.gamma_omega.nnz()
            + self.gamma_gamma.nnz();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (left, right) in [
            (&self.omega_omega, &self.omega_gamma),
            (&self.gamma_omega, &self.gamma_gamma),
        ] {
            for i in 0..left.nrows() {
                let (c, v) = left.row(i);
                col_idx.extend_from_slice(c);
                values.extend_from_slice(v);
                let (c, v) = right.row(i);
                col_idx.extend(c.iter().map(|j| j + no));
                values.extend_from_slice(v);
                row_ptr.push(col_idx.len());
            }
        }
        CsrMatrix::new(n, n, row_ptr, col_idx, values)
            .expect("block concatenation preserves canonical form")
    }

    /// Applies the operator block by block: `(A_ΩΩ x_Ω + A_ΩΓ x_Γ, A_ΓΩ x_Ω + A_ΓΓ x_Γ)`.
    pub fn apply_blocks(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                op: "BlockSystem::apply_blocks",
                expected: self.dim(),
                found: x.len(),
            });
        }
        let (xo, xg) = x.split_at(self.n_omega());
        let mut yo = self.omega_omega.spmv(xo)?;
        let t = self.omega_gamma.spmv(xg)?;
        yo.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
        let mut yg = self.gamma_omega.spmv(xo)?;
        let t = self.gamma_gamma.spmv(xg)?;
        yg.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
        yo.extend(yg);
        Ok(yo)
    }
}

/// Discretizes the flow problem on `grid` with `params`.
pub fn assemble(grid: &MixedDimGrid, params: &PhysicalParams) -> Result<BlockSystem> {
    params.validate(grid)?;
    let partition = grid.partition().clone();
    let (no, ng) = (partition.n_omega(), partition.n_gamma());
    let top = grid.ambient_dim();
    let specific_volume = |dim: usize| params.aperture.powi((top - dim) as i32);

    let mut oo: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs_omega = vec![0.0; no];
    for (s, sub) in grid.subdomains().iter().enumerate() {
        let off = partition.omega[s].start;
        let sv = specific_volume(sub.dim);
        let k = params.permeability[s] * sv;
        // Keep the diagonal in the pattern even for isolated cells.
        for c in 0..sub.num_cells() {
            oo.push((off + c, off + c, 0.0));
        }
        for f in &sub.internal_faces {
            let t = k * f.factor;
            let [a, b] = f.cells;
            oo.extend([
                (off + a, off + a, t),
                (off + b, off + b, t),
                (off + a, off + b, -t),
                (off + b, off + a, -t),
            ]);
        }
        for f in &sub.boundary_faces {
            match f.condition {
                BoundaryCondition::Dirichlet(p) => {
                    let t = k * f.factor;
                    oo.push((off + f.cell, off + f.cell, t));
                    rhs_omega[off + f.cell] += t * p;
                }
                BoundaryCondition::Neumann(q) => rhs_omega[off + f.cell] += sv * f.area * q,
            }
        }
        if let Some(src) = &params.sources {
            for (c, (&q, &vol)) in src[s].iter().zip(&sub.cell_volumes).enumerate() {
                rhs_omega[off + c] += q * vol * sv;
            }
        }
    }

    let mut go: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * ng);
    let mut gg_diag = vec![0.0; ng];
    for (j, intf) in grid.interfaces().iter().enumerate() {
        let hi_off = partition.omega[intf.higher].start;
        let lo_off = partition.omega[intf.lower].start;
        let hi_sub = &grid.subdomains()[intf.higher];
        let k_hi = params.permeability[intf.higher] * specific_volume(hi_sub.dim);
        for (m, mortar) in intf.cells.iter().enumerate() {
            let row = partition.gamma[j].start + m - no;
            let t_half = k_hi * mortar.higher_factor / mortar.area;
            let kappa_eff = 1.0 / (1.0 / params.kappa[j] + 1.0 / t_half);
            go.push((row, hi_off + mortar.higher_cell, mortar.area));
            go.push((row, lo_off + mortar.lower_cell, -mortar.area));
            gg_diag[row] = -mortar.area / kappa_eff;
        }
    }

    let omega_omega = CsrMatrix::from_triplets(no, no, &oo)?;
    let gamma_omega = CsrMatrix::from_triplets(ng, no, &go)?;
    let omega_gamma = gamma_omega.transpose();
    let gamma_gamma = CsrMatrix::from_diagonal(&gg_diag);
    BlockSystem::new(
        omega_omega,
        omega_gamma,
        gamma_omega,
        gamma_gamma,
        rhs_omega,
        vec![0.0; ng],
        partition,
    )
}
