//! Theta functions, level-one Spin(2l) loop-group characters, circle and torus holonomies,
//! zeta-regularized determinants and Bismut-Chern iterated integrals.

pub mod error;
pub mod qseries;
pub mod special;
pub mod affine;
pub mod expm;
pub mod grassmann;
pub mod linalg;
pub mod synth;
pub mod transport;
pub mod elliptic;
pub mod chern;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
