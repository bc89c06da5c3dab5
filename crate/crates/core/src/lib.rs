pub mod amg;
pub mod assembly;
pub mod bench;
pub mod error;
pub mod grid;
pub mod io;
pub mod krylov;
pub mod precond;
pub mod sparse;

pub use error::{Error, Result};
