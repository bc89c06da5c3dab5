//! Exchange of assembled block systems as a directory of Matrix Market files
//! plus a JSON sidecar describing the DOF partition.
//!
//! Layout:
//!
//! ```text
//! system.json        {"format": 1, "omega_sizes": [...], "gamma_sizes": [...]}
//! A_omega_omega.mtx  A_omega_gamma.mtx  A_gamma_omega.mtx  A_gamma_gamma.mtx
//! b_omega.mtx        b_gamma.mtx
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::BlockSystem;
use crate::error::{Error, Result};
use crate::grid::DofPartition;
use crate::sparse::mm::{
    read_matrix_market, read_vector, write_matrix_market, write_vector, MmSymmetry,
};

pub const SIDECAR: &str = "system.json";
const FORMAT_VERSION: u32 = 1;

const BLOCK_FILES: [&str; 4] = [
    "A_omega_omega.mtx",
    "A_omega_gamma.mtx",
    "A_gamma_omega.mtx",
    "A_gamma_gamma.mtx",
];
const RHS_FILES: [&str; 2] = ["b_omega.mtx", "b_gamma.mtx"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format: u32,
    /// Cell counts per subdomain, in Ω ordering.
    pub omega_sizes: Vec<usize>,
    /// Mortar cell counts per interface, in Γ ordering.
    pub gamma_sizes: Vec<usize>,
}

pub fn export_system(system: &BlockSystem, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let blocks = [
        system.omega_omega(),
        system.omega_gamma(),
        system.gamma_omega(),
        system.gamma_gamma(),
    ];
    for (name, m) in BLOCK_FILES.iter().zip(blocks) {
        write_matrix_market(&dir.join(name), m, MmSymmetry::General)?;
    }
    write_vector(&dir.join(RHS_FILES[0]), system.rhs_omega())?;
    write_vector(&dir.join(RHS_FILES[1]), system.rhs_gamma())?;
    let sidecar = Sidecar {
        format: FORMAT_VERSION,
        omega_sizes: system.partition().omega_sizes(),
        gamma_sizes: system.partition().gamma_sizes(),
    };
    fs::write(dir.join(SIDECAR), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_sidecar(dir: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(dir.join(SIDECAR))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    if sidecar.format != FORMAT_VERSION {
        return Err(Error::Partition(format!(
            "{}: unsupported format version {} (expected {FORMAT_VERSION})",
            dir.join(SIDECAR).display(),
            sidecar.format
        )));
    }
    Ok(sidecar)
}

/// Reads a directory written by [`export_system`] (or by an external tool
/// following the same layout) and checks every block against the sidecar.
pub fn import_system(dir: &Path) -> Result<BlockSystem> {
    let sidecar = read_sidecar(dir)?;
    let mut blocks = Vec::with_capacity(4);
    for name in BLOCK_FILES {
        blocks.push(read_matrix_market(&dir.join(name))?);
    }
    let rhs_o = read_vector(&dir.join(RHS_FILES[0]))?;
    let rhs_g = read_vector(&dir.join(RHS_FILES[1]))?;
    let partition = DofPartition::from_sizes(&sidecar.omega_sizes, &sidecar.gamma_sizes);
    let mut it = blocks.into_iter();
    let (oo, og, go, gg) = (
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
    );
    BlockSystem::new(oo, og, go, gg, rhs_o, rhs_g, partition).map_err(|e| match e {
        Error::Partition(msg) => {
            Error::Partition(format!("{} vs {}: {msg}", dir.display(), SIDECAR))
        }
        other => other,
    })
}
