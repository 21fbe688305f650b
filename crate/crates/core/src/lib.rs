pub mod checks;
pub mod combinatorics;
pub mod cumulants;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod kinetic;
pub mod meanfield;
pub mod observables;
pub mod quadrature;
pub mod random;
pub mod sequences;
pub mod states;

pub use error::{Error, Result};
