//! Segmentation-histogram row following for tall crops.
//!
//! A vegetation mask and depth map go in, a row-center column comes out
//! ([`perception`]); the [`controller`] turns it into smoothed velocity
//! commands. [`sim`] closes the loop in procedurally generated crop rows and
//! [`evaluation`] scores the resulting trajectories.

pub mod controller;
pub mod evaluation;
pub mod experiment;
pub mod grid;
pub mod harness;
pub mod oracle;
pub mod path;
pub mod perception;
pub mod pgm;
pub mod seed;
pub mod sim;

pub use controller::{ControllerConfig, HeadingController, VelocityCommand};
pub use grid::{DepthMap, Grid, VegetationMask, WeightedMask, NO_RETURN};
pub use perception::{MaskBuffer, PerceptionConfig, RowEstimate, Variant};
