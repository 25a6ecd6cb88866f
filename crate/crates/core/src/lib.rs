//! Random forests whose trees split the Poincaré ball with horospheres.
//!
//! * [`hypgeo`]: distances, Busemann functions, Klein conversions, Einstein
//!   midpoints and LCA depth.
//! * [`horosplit`]: class-balanced large-margin horosphere fitting and the
//!   per-node split search.
//! * [`horotree`] and [`hororf`]: trees and bootstrap forests.
//! * [`datasets`]: CSV ingestion, synthetic hierarchies, stratified folds and
//!   metrics.

pub mod datasets;
pub mod error;
pub mod horosplit;
pub mod horotree;
pub mod hororf;
pub mod hypgeo;

pub use error::{HoroError, Result};
