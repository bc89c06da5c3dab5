//! Mixed-dimensional geometries: subdomains of dimension `0..=N`, the
//! interfaces coupling each subdomain to its lower-dimensional neighbors, and
//! the global degree-of-freedom layout.
//!
//! Every subdomain carries one pressure unknown per cell. Every interface
//! carries one flux unknown per mortar cell. Cell unknowns of all subdomains
//! come first, followed by the mortar unknowns of all interfaces.

mod cartesian;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cartesian::{
    build_cross_2d, build_network_2d, build_network_3d, build_random_network_2d,
    build_regular_network_3d, Plane, Segment,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    /// Prescribed pressure.
    Dirichlet(f64),
    /// Prescribed inflow per unit face measure.
    Neumann(f64),
}

/// Conditions on the sides of the outer box, per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub low: [BoundaryCondition; 3],
    pub high: [BoundaryCondition; 3],
}

impl BoundarySpec {
    /// Pressure 1 on the low side and 0 on the high side of `axis`, no flow elsewhere.
    pub fn pressure_drop(axis: usize) -> Self {
        let mut spec = Self::no_flow();
        spec.low[axis] = BoundaryCondition::Dirichlet(1.0);
        spec.high[axis] = BoundaryCondition::Dirichlet(0.0);
        spec
    }

    pub fn no_flow() -> Self {
        BoundarySpec {
            low: [BoundaryCondition::Neumann(0.0); 3],
            high: [BoundaryCondition::Neumann(0.0); 3],
        }
    }

    pub fn side(&self, axis: usize, high: bool) -> BoundaryCondition {
        if high {
            self.high[axis]
        } else {
            self.low[axis]
        }
    }
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::pressure_drop(0)
    }
}

/// Options shared by the grid builders.
#[derive(Clone, Debug, PartialEq)]
pub struct GridOptions {
    pub boundary: BoundarySpec,
    /// Each coarse cell touching a fracture is split into this many cells
    /// along the fracture normal. `1` gives a uniform grid.
    pub fracture_refinement: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            boundary: BoundarySpec::default(),
            fracture_refinement: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InternalFace {
    pub cells: [usize; 2],
    pub area: f64,
    /// Face measure over center-to-center distance.
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub area: f64,
    /// Face measure over the center-to-face distance.
    pub factor: f64,
    pub condition: BoundaryCondition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subdomain {
    pub id: usize,
    pub dim: usize,
    /// Cell measure in the subdomain's own dimension (1 for points).
    pub cell_volumes: Vec<f64>,
    pub cell_centers: Vec<[f64; 3]>,
    pub internal_faces: Vec<InternalFace>,
    pub boundary_faces: Vec<BoundaryFace>,
}

impl Subdomain {
    pub fn num_cells(&self) -> usize {
        self.cell_volumes.len()
    }
}

/// One mortar cell: a face of a higher-dimensional cell that coincides with a
/// lower-dimensional cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MortarCell {
    pub higher_cell: usize,
    /// Mortar measure over the distance from the higher cell center to the face.
    pub higher_factor: f64,
    pub lower_cell: usize,
    pub area: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interface {
    pub id: usize,
    pub dim: usize,
    /// Subdomain on the higher-dimensional side.
    pub higher: usize,
    /// Subdomain on the lower-dimensional side; geometrically equal to the interface.
    pub lower: usize,
    pub normal_axis: usize,
    /// Sign of the higher side's outer normal along `normal_axis`.
    pub orientation: i8,
    pub cells: Vec<MortarCell>,
}

impl Interface {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
}

/// Contiguous index ranges: all subdomain (Ω) ranges first, then all
/// interface (Γ) ranges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofPartition {
    pub omega: Vec<Range<usize>>,
    pub gamma: Vec<Range<usize>>,
}

impl DofPartition {
    pub fn from_sizes(omega_sizes: &[usize], gamma_sizes: &[usize]) -> Self {
        let mut start = 0;
        let mut take = |n: usize| {
            let r = start..start + n;
            start += n;
            r
        };
        let omega = omega_sizes.iter().map(|&n| take(n)).collect();
        let gamma = gamma_sizes.iter().map(|&n| take(n)).collect();
        DofPartition { omega, gamma }
    }

    pub fn n_omega(&self) -> usize {
        self.omega.last().map_or(0, |r| r.end)
    }

    pub fn n_gamma(&self) -> usize {
        self.gamma.iter().map(|r| r.len()).sum()
    }

    pub fn total(&self) -> usize {
        self.n_omega() + self.n_gamma()
    }

    pub fn omega_sizes(&self) -> Vec<usize> {
        self.omega.iter().map(|r| r.len()).collect()
    }

    pub fn gamma_sizes(&self) -> Vec<usize> {
        self.gamma.iter().map(|r| r.len()).collect()
    }

    /// Index of the interface owning global Γ-unknown `dof`, if any.
    pub fn gamma_block_of(&self, dof: usize) -> Option<usize> {
        self.gamma.iter().position(|r| r.contains(&dof))
    }

    /// Checks that the ranges tile `0..total` in order.
    pub fn validate(&self) -> Result<()> {
        let mut expected = 0;
        for (what, ranges) in [("omega", &self.omega), ("gamma", &self.gamma)] {
            for (k, r) in ranges.iter().enumerate() {
                if r.start != expected || r.end < r.start {
                    return Err(Error::Partition(format!(
                        "{what} block {k} spans {}..{}, expected to start at {expected}",
                        r.start, r.end
                    )));
                }
                expected = r.end;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedDimGrid {
    ambient_dim: usize,
    subdomains: Vec<Subdomain>,
    interfaces: Vec<Interface>,
    partition: DofPartition,
}

impl MixedDimGrid {
    /// Assembles a grid from parts, checking dimensions and cell references.
    pub fn new(
        ambient_dim: usize,
        subdomains: Vec<Subdomain>,
        interfaces: Vec<Interface>,
    ) -> Result<Self> {
        if !(1..=3).contains(&ambient_dim) {
            return Err(Error::InvalidGrid(format!(
                "ambient dimension {ambient_dim} not in 1..=3"
            )));
        }
        for (k, s) in subdomains.iter().enumerate() {
            if s.id != k {
                return Err(Error::InvalidGrid(format!(
                    "subdomain at position {k} has id {}",
                    s.id
                )));
            }
            if s.dim > ambient_dim {
                return Err(Error::InvalidGrid(format!(
                    "subdomain {k} has dimension {} > {ambient_dim}",
                    s.dim
                )));
            }
            if s.cell_centers.len() != s.num_cells() {
                return Err(Error::InvalidGrid(format!(
                    "subdomain {k}: centers and volumes differ in length"
                )));
            }
            if s.cell_volumes.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidGrid(format!(
                    "subdomain {k}: non-positive cell volume"
                )));
            }
            for f in &s.internal_faces {
                let [a, b] = f.cells;
                if a == b || a >= s.num_cells() || b >= s.num_cells() {
                    return Err(Error::InvalidGrid(format!(
                        "subdomain {k}: bad internal face {a}-{b}"
                    )));
                }
                if !(f.factor > 0.0 && f.factor.is_finite()) {
                    return Err(Error::InvalidGrid(format!(
                        "subdomain {k}: non-positive face factor"
                    )));
                }
            }
            for f in &s.boundary_faces {
                if f.cell >= s.num_cells() || !(f.factor > 0.0 && f.factor.is_finite()) {
                    return Err(Error::InvalidGrid(format!(
                        "subdomain {k}: bad boundary face"
                    )));
                }
            }
        }
        for (k, intf) in interfaces.iter().enumerate() {
            if intf.id != k {
                return Err(Error::InvalidGrid(format!(
                    "interface at position {k} has id {}",
                    intf.id
                )));
            }
            let (Some(hi), Some(lo)) = (subdomains.get(intf.higher), subdomains.get(intf.lower))
            else {
                return Err(Error::InvalidGrid(format!(
                    "interface {k} references a missing subdomain"
                )));
            };
            if hi.dim != lo.dim + 1 || intf.dim != lo.dim {
                return Err(Error::InvalidGrid(format!(
                    "interface {k}: dimensions higher={} lower={} interface={} are inconsistent",
                    hi.dim, lo.dim, intf.dim
                )));
            }
            for m in &intf.cells {
                if m.higher_cell >= hi.num_cells() || m.lower_cell >= lo.num_cells() {
                    return Err(Error::InvalidGrid(format!(
                        "interface {k}: mortar references a missing cell"
                    )));
                }
                if !(m.area > 0.0 && m.higher_factor > 0.0) {
                    return Err(Error::InvalidGrid(format!(
                        "interface {k}: non-positive mortar geometry"
                    )));
                }
            }
        }
        let omega: Vec<usize> = subdomains.iter().map(Subdomain::num_cells).collect();
        let gamma: Vec<usize> = interfaces.iter().map(Interface::num_cells).collect();
        Ok(MixedDimGrid {
            ambient_dim,
            subdomains,
            interfaces,
            partition: DofPartition::from_sizes(&omega, &gamma),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
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

    /// Interfaces towards higher-dimensional neighbors of subdomain `i`.
    pub fn higher_interfaces(&self, i: usize) -> impl Iterator<Item = &Interface> {
        self.interfaces.iter().filter(move |j| j.lower == i)
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            ambient_dim: self.ambient_dim,
            subdomains: self
                .subdomains
                .iter()
                .map(|s| SubdomainSummary {
                    id: s.id,
                    dim: s.dim,
                    cells: s.num_cells(),
                    internal_faces: s.internal_faces.len(),
                    boundary_faces: s.boundary_faces.len(),
                    dofs: self.partition.omega[s.id].clone(),
                })
                .collect(),
            interfaces: self
                .interfaces
                .iter()
                .map(|j| InterfaceSummary {
                    id: j.id,
                    dim: j.dim,
                    higher: j.higher,
                    lower: j.lower,
                    normal_axis: j.normal_axis,
                    orientation: j.orientation,
                    mortar_cells: j.num_cells(),
                    dofs: self.partition.gamma[j.id].clone(),
                })
                .collect(),
            n_omega: self.n_omega(),
            n_gamma: self.n_gamma(),
        }
    }
}

/// Counts and DOF layout of a grid, for debugging output.
#[derive(Clone, Debug, Serialize)]
pub struct GridSummary {
    pub ambient_dim: usize,
    pub subdomains: Vec<SubdomainSummary>,
    pub interfaces: Vec<InterfaceSummary>,
    pub n_omega: usize,
    pub n_gamma: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubdomainSummary {
    pub id: usize,
    pub dim: usize,
    pub cells: usize,
    pub internal_faces: usize,
    pub boundary_faces: usize,
    pub dofs: Range<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InterfaceSummary {
    pub id: usize,
    pub dim: usize,
    pub higher: usize,
    pub lower: usize,
    pub normal_axis: usize,
    pub orientation: i8,
    pub mortar_cells: usize,
    pub dofs: Range<usize>,
}

impl fmt::Display for GridSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "mixed-dimensional grid: ambient dim {}, {} subdomains, {} interfaces",
            self.ambient_dim,
            self.subdomains.len(),
            self.interfaces.len()
        )?;
        writeln!(
            f,
            "dofs: {} omega + {} gamma = {}",
            self.n_omega,
            self.n_gamma,
            self.n_omega + self.n_gamma
        )?;
        writeln!(f, "subdomains:")?;
        for s in &self.subdomains {
            writeln!(
                f,
                "  [{:>3}] dim {}  cells {:>6}  internal faces {:>6}  boundary faces {:>5}  dofs {}..{}",
                s.id, s.dim, s.cells, s.internal_faces, s.boundary_faces, s.dofs.start, s.dofs.end
            )?;
        }
        writeln!(f, "interfaces:")?;
        for j in &self.interfaces {
            writeln!(
                f,
                "  [{:>3}] dim {}  {:>3} -> {:>3}  axis {} side {:+}  mortar cells {:>5}  dofs {}..{}",
                j.id, j.dim, j.higher, j.lower, j.normal_axis, j.orientation, j.mortar_cells, j.dofs.start, j.dofs.end
            )?;
        }
        Ok(())
    }
}
