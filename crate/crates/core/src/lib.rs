//! Near-field beamforming analysis for extremely large antenna arrays.
//!
//! The crate models uniform circular (UCA), uniform linear (ULA) and
//! cylindrical arrays under the spherical-wave propagation model and provides:
//!
//! - [`special`]: Bessel functions of the first kind, the main-lobe inverse of
//!   `J0`, zeros of `J0` and Fresnel integrals.
//! - [`geometry`]: element placement, exact and Taylor-expanded propagation
//!   distances, far-field steering and near-field focusing vectors.
//! - [`gain`]: exact beamforming gains by direct summation together with the
//!   Bessel/Fresnel closed forms, depth-of-focus and effective Rayleigh
//!   distance (ERD) calculations.
//! - [`codebook`]: the concentric-ring codebook, its verification, selection
//!   and export.
//! - [`channel`]: multipath near-field channels, achievable rate and the
//!   Monte-Carlo codebook comparison.
//!
//! All gains are magnitudes of normalized inner products, so every value
//! lies in `[0, 1]`.

pub mod channel;
pub mod codebook;
mod error;
pub mod gain;
pub mod geometry;
pub mod special;

pub use error::{Error, Result};
pub use geometry::{ArrayGeometry, BeamVector, Distance, FocusPoint, Layout};
