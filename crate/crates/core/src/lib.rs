pub mod error;
pub mod feasibility;
pub mod fixtures;
pub mod galois;
pub mod netmodel;
pub mod onoff;
pub mod par;
pub mod pbna;
pub mod polymatrix;
pub mod symbolic;
pub mod transform;

pub use error::{Error, Result};
