//! Far-field ptychography simulation and reconstruction.
//!
//! The crate covers the forward model ([`forward`]), object-only ePIE with
//! provenance-weighted step sizes ([`solver`]), the oversample-and-splice
//! refinement that re-images an initial estimate on a dense grid
//! ([`remix`]), evaluation metrics ([`metrics`]) and the binary file formats
//! and command-line front end ([`io`], [`cli`]).

pub mod cli;
pub mod config;
pub mod error;
pub mod fft;
pub mod field;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod remix;
pub mod solver;
pub mod stack;

pub use config::{EpieOrder, RemixConfig};
pub use error::{Error, Result};
pub use field::{ComplexField, RealField};
pub use geometry::{overlap_percent, raster_geometry, Position, ScanGeometry};
pub use stack::{DiffractionRecord, DiffractionStack, Provenance};
