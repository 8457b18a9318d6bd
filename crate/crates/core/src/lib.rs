//! Hierarchical Takagi-Sugeno fuzzy control for a five-link planar biped.
//!
//! - [`fuzzy`]: membership functions and single-unit inference
//! - [`hierarchy`]: Raju chains, Joo and Jellali trees of units
//! - [`anfis`]: hybrid least-squares / gradient training
//! - [`biped`]: kinematics and the synthetic reference gait
//! - [`controller`]: the HFL1..HFL8 sub-controller assembly

pub mod anfis;
pub mod biped;
pub mod controller;
pub mod error;
pub mod fuzzy;
pub mod hierarchy;
pub mod io;

pub use error::{Error, Result};
