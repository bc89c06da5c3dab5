//! Builders for axis-aligned fracture networks on tensor-product grids.
//!
//! Grid entities (cells, faces, edges, vertices) are addressed in doubled
//! index space: along axis `d` an odd coordinate `2i+1` means the entity spans
//! cell `i`, an even coordinate `2i` means it lies on grid line `i`. The
//! entity dimension is the number of odd coordinates.
//!
//! Fractures are given as a set of grid faces. A lower-dimensional entity is a
//! cell of the mixed-dimensional grid when the fracture faces containing it
//! have normals along at least `N - dim` distinct axes: two crossing fracture
//! lines in 2D produce a point, two crossing planes in 3D produce a line, and
//! so on. Cells of equal dimension lying on the same flat and touching each
//! other form one subdomain. Where a same-flat neighbor is separated by a
//! lower-dimensional cell, no flux connects them directly; they couple through
//! the interfaces instead.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{
    BoundaryFace, BoundarySpec, GridOptions, Interface, InternalFace, MixedDimGrid, MortarCell,
    Subdomain,
};

type Key = [u32; 3];

/// An axis-aligned fracture segment on an interior grid line of a 2D grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    /// Axis the segment is normal to: 0 gives a vertical line `x = line/n`.
    pub normal_axis: usize,
    /// Grid line index in `1..n`.
    pub line: usize,
    /// Extent along the tangential axis, in cell indices `start..end`.
    pub start: usize,
    pub end: usize,
}

/// A full fracture plane through the unit cube, on grid plane `index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Plane {
    pub normal_axis: usize,
    pub index: usize,
}

struct TensorMesh {
    dim: usize,
    lines: [Vec<f64>; 3],
}

impl TensorMesh {
    fn cells(&self, d: usize) -> u32 {
        (self.lines[d].len() - 1) as u32
    }

    fn entity_dim(&self, key: &Key) -> usize {
        (0..self.dim).filter(|&d| key[d] % 2 == 1).count()
    }

    /// Width of the cell spanned by odd coordinate `a` along axis `d`.
    fn width(&self, d: usize, a: u32) -> f64 {
        let i = (a / 2) as usize;
        self.lines[d][i + 1] - self.lines[d][i]
    }

    fn measure(&self, key: &Key) -> f64 {
        (0..self.dim)
            .filter(|&d| key[d] % 2 == 1)
            .map(|d| self.width(d, key[d]))
            .product()
    }

    fn coord(&self, d: usize, a: u32) -> f64 {
        let i = (a / 2) as usize;
        if a % 2 == 1 {
            0.5 * (self.lines[d][i] + self.lines[d][i + 1])
        } else {
            self.lines[d][i]
        }
    }

    fn center(&self, key: &Key) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (d, cd) in c.iter_mut().enumerate().take(self.dim) {
            *cd = self.coord(d, key[d]);
        }
        c
    }
}

fn shifted(key: &Key, d: usize, delta: i64) -> Key {
    let mut k = *key;
    k[d] = (k[d] as i64 + delta) as u32;
    k
}

/// Grid lines along one axis: uniform with `n` cells, each coarse cell that
/// touches a fracture line split into `refine` equal parts. Returns the lines
/// and the fine index of every coarse line.
fn axis_lines(n: usize, fracture_lines: &BTreeSet<usize>, refine: usize) -> (Vec<f64>, Vec<usize>) {
    let h = 1.0 / n as f64;
    let mut lines = vec![0.0];
    let mut map = vec![0];
    for c in 0..n {
        let touches = fracture_lines.contains(&c) || fracture_lines.contains(&(c + 1));
        let parts = if touches { refine.max(1) } else { 1 };
        let x0 = c as f64 * h;
        for p in 1..=parts {
            lines.push(if p == parts {
                (c + 1) as f64 * h
            } else {
                x0 + h * p as f64 / parts as f64
            });
        }
        map.push(lines.len() - 1);
    }
    (lines, map)
}

struct Builder<'a> {
    mesh: TensorMesh,
    /// Bitmask of fracture-normal axes for every entity in the closure of a fracture face.
    dirs: BTreeMap<Key, u8>,
    bc: &'a BoundarySpec,
}

impl<'a> Builder<'a> {
    fn new(mesh: TensorMesh, fracture_faces: &BTreeSet<Key>, bc: &'a BoundarySpec) -> Result<Self> {
        let dim = mesh.dim;
        let mut dirs: BTreeMap<Key, u8> = BTreeMap::new();
        for face in fracture_faces {
            let even: Vec<usize> = (0..dim).filter(|&d| face[d] % 2 == 0).collect();
            if even.len() != 1 {
                return Err(Error::InvalidGrid(format!("{face:?} is not a grid face")));
            }
            let normal = even[0];
            if face[normal] == 0 || face[normal] >= 2 * mesh.cells(normal) {
                return Err(Error::InvalidGrid(format!(
                    "fracture face {face:?} lies on the outer boundary"
                )));
            }
            let odd: Vec<usize> = (0..dim).filter(|&d| d != normal).collect();
            for d in &odd {
                if face[*d] >= 2 * mesh.cells(*d) {
                    return Err(Error::InvalidGrid(format!(
                        "fracture face {face:?} outside the grid"
                    )));
                }
            }
            // Every sub-entity: each odd coordinate shifted by -1, 0 or +1.
            let combos = 3usize.pow(odd.len() as u32);
            for mut c in 0..combos {
                let mut k = *face;
                for &d in &odd {
                    k[d] = (k[d] as i64 + (c % 3) as i64 - 1) as u32;
                    c /= 3;
                }
                *dirs.entry(k).or_insert(0) |= 1 << normal;
            }
        }
        Ok(Builder { mesh, dirs, bc })
    }

    fn is_cell(&self, key: &Key) -> bool {
        let edim = self.mesh.entity_dim(key);
        if edim == self.mesh.dim {
            return true;
        }
        self.dirs
            .get(key)
            .is_some_and(|m| m.count_ones() as usize >= self.mesh.dim - edim)
    }

    fn build(self) -> Result<MixedDimGrid> {
        let dim = self.mesh.dim;

        // Subdomain cell lists, highest dimension first.
        let mut groups: Vec<(usize, Vec<Key>)> = Vec::new();
        let mut top = Vec::new();
        let n = [
            self.mesh.cells(0),
            self.mesh.cells(1),
            if dim > 2 { self.mesh.cells(2) } else { 1 },
        ];
        let zrange = if dim > 2 { 0..n[2] } else { 0..1 };
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in zrange.clone() {
                    top.push([2 * i + 1, 2 * j + 1, if dim > 2 { 2 * k + 1 } else { 0 }]);
                }
            }
        }
        groups.push((dim, top));

        for k in (0..dim).rev() {
            let keys: Vec<Key> = self
                .dirs
                .keys()
                .filter(|key| self.mesh.entity_dim(key) == k && self.is_cell(key))
                .copied()
                .collect();
            let pos: HashMap<Key, usize> =
                keys.iter().enumerate().map(|(p, key)| (*key, p)).collect();
            let mut uf = UnionFind::new(keys.len());
            for (p, key) in keys.iter().enumerate() {
                for d in (0..dim).filter(|&d| key[d] % 2 == 1) {
                    if let Some(&q) = pos.get(&shifted(key, d, 2)) {
                        uf.union(p, q);
                    }
                }
            }
            let mut component_of_root: HashMap<usize, usize> = HashMap::new();
            let mut comps: Vec<Vec<Key>> = Vec::new();
            for (p, key) in keys.iter().enumerate() {
                let root = uf.find(p);
                let c = *component_of_root.entry(root).or_insert_with(|| {
                    comps.push(Vec::new());
                    comps.len() - 1
                });
                comps[c].push(*key);
            }
            groups.extend(comps.into_iter().map(|c| (k, c)));
        }

        let mut index: HashMap<Key, (usize, usize)> = HashMap::new();
        for (s, (_, keys)) in groups.iter().enumerate() {
            for (c, key) in keys.iter().enumerate() {
                index.insert(*key, (s, c));
            }
        }

        let mut subdomains = Vec::with_capacity(groups.len());
        for (s, (sdim, keys)) in groups.iter().enumerate() {
            let mut sub = Subdomain {
                id: s,
                dim: *sdim,
                cell_volumes: keys.iter().map(|k| self.mesh.measure(k)).collect(),
                cell_centers: keys.iter().map(|k| self.mesh.center(k)).collect(),
                internal_faces: Vec::new(),
                boundary_faces: Vec::new(),
            };
            for (c, key) in keys.iter().enumerate() {
                for d in (0..dim).filter(|&d| key[d] % 2 == 1) {
                    for side in [-1i64, 1] {
                        let face = shifted(key, d, side);
                        if face[d] == 0 || face[d] == 2 * self.mesh.cells(d) {
                            let area = self.mesh.measure(&face);
                            let half = 0.5 * self.mesh.width(d, key[d]);
                            sub.boundary_faces.push(BoundaryFace {
                                cell: c,
                                area,
                                factor: area / half,
                                condition: self.bc.side(d, side > 0),
                            });
                            continue;
                        }
                        if side < 0 || self.is_cell(&face) {
                            continue;
                        }
                        let other = shifted(key, d, 2);
                        match index.get(&other) {
                            Some(&(os, oc)) if os == s => {
                                let area = self.mesh.measure(&face);
                                let dist =
                                    self.mesh.coord(d, other[d]) - self.mesh.coord(d, key[d]);
                                sub.internal_faces.push(InternalFace {
                                    cells: [c, oc],
                                    area,
                                    factor: area / dist,
                                });
                            }
                            // Immersed tip: no neighbor on this flat, no flux.
                            _ => {}
                        }
                    }
                }
            }
            subdomains.push(sub);
        }

        let mut mortars: BTreeMap<(usize, usize, usize, i8), Vec<MortarCell>> = BTreeMap::new();
        for (s, (sdim, keys)) in groups.iter().enumerate() {
            if *sdim == dim {
                continue;
            }
            for (c, key) in keys.iter().enumerate() {
                for d in (0..dim).filter(|&d| key[d] % 2 == 0) {
                    for side in [-1i64, 1] {
                        let higher = shifted(key, d, side);
                        if higher[d] == 0
                            || higher[d] >= 2 * self.mesh.cells(d)
                            || !self.is_cell(&higher)
                        {
                            continue;
                        }
                        let (hs, hc) = index[&higher];
                        let area = self.mesh.measure(key);
                        let half = 0.5 * self.mesh.width(d, higher[d]);
                        // The higher side's outer normal points back towards the lower cell.
                        mortars
                            .entry((hs, s, d, -side as i8))
                            .or_default()
                            .push(MortarCell {
                                higher_cell: hc,
                                higher_factor: area / half,
                                lower_cell: c,
                                area,
                            });
                    }
                }
            }
        }
        let interfaces = mortars
            .into_iter()
            .enumerate()
            .map(
                |(id, ((higher, lower, axis, orientation), cells))| Interface {
                    id,
                    dim: subdomains[lower].dim,
                    higher,
                    lower,
                    normal_axis: axis,
                    orientation,
                    cells,
                },
            )
            .collect();

        MixedDimGrid::new(dim, subdomains, interfaces)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so components are labelled deterministically.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Unit square with one horizontal and one vertical fracture crossing at the
/// center: one 2d matrix, two 1d fractures and a 0d intersection point.
pub fn build_cross_2d(n: usize, opts: &GridOptions) -> Result<MixedDimGrid> {
    if n < 2 {
        return Err(Error::InvalidGrid(format!(
            "cross_2d needs n >= 2, got {n}"
        )));
    }
    let c = n / 2;
    build_network_2d(
        n,
        &[
            Segment {
                normal_axis: 1,
                line: c,
                start: 0,
                end: n,
            },
            Segment {
                normal_axis: 0,
                line: c,
                start: 0,
                end: n,
            },
        ],
        opts,
    )
}

/// Unit square with `n x n` cells and the given fracture segments. Collinear
/// overlapping segments merge; crossings and T-junctions become 0d points.
pub fn build_network_2d(
    n: usize,
    segments: &[Segment],
    opts: &GridOptions,
) -> Result<MixedDimGrid> {
    if n < 2 {
        return Err(Error::InvalidGrid(format!(
            "2D networks need n >= 2, got {n}"
        )));
    }
    let mut frac_lines = [BTreeSet::new(), BTreeSet::new()];
    for s in segments {
        if s.normal_axis > 1 {
            return Err(Error::InvalidGrid(format!(
                "segment normal axis {} in 2D",
                s.normal_axis
            )));
        }
        if s.line == 0 || s.line >= n {
            return Err(Error::InvalidGrid(format!(
                "segment line {} not interior to 1..{n}",
                s.line
            )));
        }
        if s.start >= s.end {
            return Err(Error::InvalidGrid(format!(
                "degenerate segment {}..{} on line {}",
                s.start, s.end, s.line
            )));
        }
        if s.end > n {
            return Err(Error::InvalidGrid(format!(
                "segment end {} beyond {n}",
                s.end
            )));
        }
        frac_lines[s.normal_axis].insert(s.line);
    }
    let refine = opts.fracture_refinement.max(1);
    let (xl, xmap) = axis_lines(n, &frac_lines[0], refine);
    let (yl, ymap) = axis_lines(n, &frac_lines[1], refine);
    let maps = [xmap, ymap];

    let mut faces = BTreeSet::new();
    for s in segments {
        let normal = s.normal_axis;
        let tangent = 1 - normal;
        let line = 2 * maps[normal][s.line] as u32;
        for t in maps[tangent][s.start]..maps[tangent][s.end] {
            let mut key = [0u32; 3];
            key[normal] = line;
            key[tangent] = 2 * t as u32 + 1;
            faces.insert(key);
        }
    }
    let mesh = TensorMesh {
        dim: 2,
        lines: [xl, yl, vec![0.0, 1.0]],
    };
    Builder::new(mesh, &faces, &opts.boundary)?.build()
}

/// Random axis-aligned fracture segments on interior grid lines.
/// Deterministic for a fixed seed.
pub fn build_random_network_2d(
    n: usize,
    num_fractures: usize,
    seed: u64,
    opts: &GridOptions,
) -> Result<MixedDimGrid> {
    if n < 2 {
        return Err(Error::InvalidGrid(format!(
            "2D networks need n >= 2, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let segments: Vec<Segment> = (0..num_fractures)
        .map(|_| {
            let normal_axis = rng.gen_range(0..2);
            let line = rng.gen_range(1..n);
            let a = rng.gen_range(0..=n);
            let mut b = rng.gen_range(0..n);
            if b >= a {
                b += 1;
            }
            Segment {
                normal_axis,
                line,
                start: a.min(b),
                end: a.max(b),
            }
        })
        .collect();
    build_network_2d(n, &segments, opts)
}

/// Unit cube with `n^3` cells cut by full axis-aligned fracture planes.
pub fn build_network_3d(n: usize, planes: &[Plane], opts: &GridOptions) -> Result<MixedDimGrid> {
    if n < 2 {
        return Err(Error::InvalidGrid(format!(
            "3D networks need n >= 2, got {n}"
        )));
    }
    let mut frac_lines = [BTreeSet::new(), BTreeSet::new(), BTreeSet::new()];
    for p in planes {
        if p.normal_axis > 2 {
            return Err(Error::InvalidGrid(format!(
                "plane normal axis {} in 3D",
                p.normal_axis
            )));
        }
        if p.index == 0 || p.index >= n {
            return Err(Error::InvalidGrid(format!(
                "plane index {} not interior to 1..{n}",
                p.index
            )));
        }
        if !frac_lines[p.normal_axis].insert(p.index) {
            return Err(Error::InvalidGrid(format!(
                "duplicate plane at index {} along axis {}",
                p.index, p.normal_axis
            )));
        }
    }
    let refine = opts.fracture_refinement.max(1);
    let (xl, xmap) = axis_lines(n, &frac_lines[0], refine);
    let (yl, ymap) = axis_lines(n, &frac_lines[1], refine);
    let (zl, zmap) = axis_lines(n, &frac_lines[2], refine);
    let maps = [xmap, ymap, zmap];
    let cells = [xl.len() - 1, yl.len() - 1, zl.len() - 1];

    let mut faces = BTreeSet::new();
    for p in planes {
        let normal = p.normal_axis;
        let (a, b) = ((normal + 1) % 3, (normal + 2) % 3);
        for i in 0..cells[a] {
            for j in 0..cells[b] {
                let mut key = [0u32; 3];
                key[normal] = 2 * maps[normal][p.index] as u32;
                key[a] = 2 * i as u32 + 1;
                key[b] = 2 * j as u32 + 1;
                faces.insert(key);
            }
        }
    }
    let mesh = TensorMesh {
        dim: 3,
        lines: [xl, yl, zl],
    };
    Builder::new(mesh, &faces, &opts.boundary)?.build()
}

/// `num_planes` planes cycling through the x, y and z normals; the planes on
/// each axis are spread evenly over the interior grid lines. Three planes
/// give the three mid-planes crossing at the cube center.
pub fn build_regular_network_3d(
    n: usize,
    num_planes: usize,
    opts: &GridOptions,
) -> Result<MixedDimGrid> {
    let mut per_axis = [0usize; 3];
    for p in 0..num_planes {
        per_axis[p % 3] += 1;
    }
    let mut planes = Vec::with_capacity(num_planes);
    for (axis, &m) in per_axis.iter().enumerate() {
        for j in 0..m {
            let index = ((n * (j + 1)) as f64 / (m + 1) as f64).round() as usize;
            planes.push(Plane {
                normal_axis: axis,
                index,
            });
        }
    }
    build_network_3d(n, &planes, opts).map_err(|e| match e {
        Error::InvalidGrid(msg) => Error::InvalidGrid(format!(
            "cannot place {num_planes} planes on n = {n}: {msg}"
        )),
        other => other,
    })
}
