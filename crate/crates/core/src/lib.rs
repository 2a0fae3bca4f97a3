//! Antenna-array synthesis under mutual coupling with characteristic modes
//! and generalized scattering matrices.
//!
//! The pipeline runs bottom-up:
//!
//! * [`mom`] assembles thin-wire EFIE impedance matrices and far fields,
//! * [`modal`] decomposes an element's matrix into characteristic modes,
//! * [`gsm`] builds per-element generalized scattering matrices,
//! * [`coupling`] forms the inter-element modal coupling matrix,
//! * [`array`] solves the coupled system and provides a direct MoM oracle,
//! * [`synthesis`] tunes synthetic elements so every element radiates a
//!   target modal polarization state under coupling.

pub mod array;
pub mod coupling;
pub mod error;
pub mod geometry;
pub mod gsm;
pub mod io;
pub mod layout;
pub mod linalg;
pub mod modal;
pub mod mom;
pub mod quadrature;
pub mod synthesis;

pub use error::{Error, Result};

/// Library version, recorded in output provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
