//! Sparse (CSR) and small dense linear algebra.

mod csr;
mod dense;
pub mod mm;

pub use csr::{triple_product_diag_scaled, CsrMatrix};
pub use dense::{dense_lu_solve, DenseMatrix, LuFactors};
