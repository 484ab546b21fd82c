//! Gaudin-type Lax structures on truncated boson ⊗ spin Hilbert spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`hilbert`]: truncated composite spaces, ladder/spin operators and
//!   truncation-aware (degree-guarded) comparison.
//! - [`laxkit`]: rational r-matrix, operator-valued 2×2 Lax families and the
//!   integrability identity checks.
//! - [`repzoo`]: Tavis-Cummings, generalized and inhomogeneous representations,
//!   closed-form charges and Laurent fitting of the generating function.
//! - [`spectra`]: complex spectra, truncation scans and parameter sweeps.
//! - [`cli`]: JSON configuration and the `gaudin-forge` command front end.

pub mod cli;
pub mod error;
pub mod hilbert;
pub mod laxkit;
pub mod repzoo;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex64;
