//! Metamorphic testing of vision-based steering models.
//!
//! Scenes are moved between two visual domains (for example fine and snowy
//! weather) by a learned shared-latent translator, steering models are run
//! on the original and translated streams, and frames whose predictions
//! drift by more than an error bound are counted as inconsistencies.

pub mod dataset;
pub mod harness;
pub mod models;
pub mod nn;
pub mod raster;
pub mod synthetic;
pub mod translator;
