//! Effective (homogenized) Cahn-Hilliard dynamics in perforated domains.
//!
//! The crate solves the corrector problems on a periodic reference cell,
//! assembles the effective transport tensors (porosity theta1, diffusion
//! correction D, mobility corrections M_v and M_w), time-integrates the
//! upscaled macroscopic equation next to the homogeneous baseline, and
//! validates both against desk-scale simulations on the perforated
//! microscopic domain. Heterogeneous wetting data is upscaled to averaged
//! wall conditions and effective contact angles.
//!
//! Module map:
//! - [`cell`]: reference cell Y = Y1 u Y2 (rasterization, wall classes)
//! - [`energy`]: polynomial bulk free energy, admissibility, ratio r(s)
//! - [`poisson`] / [`corrector`]: cell problems and effective tensors
//! - [`domain`] / [`stepper`]: box domains and the Cahn-Hilliard stepper
//! - [`upscaled`]: the homogenized macroscopic equation
//! - [`perforated`]: micro domains, averaging, reconstruction, comparison
//! - [`wetting`]: wall data upscaling and contact angles
//! - [`config`] / [`runner`] / [`output`]: scenario orchestration and files

pub mod cell;
pub mod config;
pub mod corrector;
pub mod domain;
pub mod energy;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod output;
pub mod perforated;
pub mod poisson;
pub mod runner;
pub mod stepper;
pub mod upscaled;
pub mod wetting;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
