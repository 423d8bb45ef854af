//! Matrix containers, Matrix Market ingestion and CSV emission.

mod dense;
mod market;
mod sparse;
pub mod table;
pub mod vector;

pub use dense::DenseMatrix;
pub use market::{parse_matrix_market, read_matrix_market};
pub use sparse::SparseSymMatrix;
pub use table::{write_table, Row};
pub use vector::RealVector;
