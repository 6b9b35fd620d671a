//! Wave-optics simulation of correlation plenoptic imaging (CPI) with
//! entangled photon pairs.
//!
//! The simulator evaluates the second-order correlation function
//! Γ(ρ_a, ρ_b) of a two-arm ghost-imaging setup in the paraxial regime,
//! produces focused, misfocused and computationally refocused ghost
//! images, and quantifies the depth-of-field advantage over a standard
//! plenoptic camera.
//!
//! All lengths are carried in millimeters. Wavelengths are accepted in
//! micrometers at the configuration boundary and converted on parse.

pub mod analysis;
pub mod correlation;
pub mod error;
pub mod geometry;
pub mod kahan;
pub mod output;

pub mod propagation;
pub mod refocus;
pub mod runner;
pub mod scenario;

pub mod scene;
pub mod special;

pub use error::{Error, Result};
