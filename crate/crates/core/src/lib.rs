//! Hausdorff-gauge distortion under Orlicz-Sobolev maps.

pub mod asymptotics;
pub mod cli;
pub mod convex_calculus;
pub mod distortion;
pub mod error;
pub mod fractal_lab;
pub mod gauge;
pub mod hausdorff_net;
pub mod numeric;
pub mod scaling;
pub mod sobolev_conjugate;
pub mod table;

pub use error::{Error, Result};
