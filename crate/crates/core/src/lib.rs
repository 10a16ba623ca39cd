//! Ground-state energies, cut decompositions and sampling estimators for
//! weighted r-uniform directed hypergraphs.

pub mod arrays;
pub mod csp;
pub mod cutnorm;
pub mod error;
pub mod experiment;
pub mod gse;
pub mod homdensity;
pub mod io;
pub mod par;
pub mod qap;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
