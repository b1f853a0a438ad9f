//! Active-inference agent with covert and overt visual attention.
//!
//! The agent keeps a generalized belief over a symbolic cue, the camera
//! orientation, a target hypothesis and a covert focus of attention. Visual
//! precision is foveated around the focus, and the belief and action updates
//! descend a free energy built from that precision.

pub mod agent;
pub mod attention;
pub mod cli;
pub mod error;
pub mod gencoords;
pub mod genmodels;
pub mod tasks;
pub mod world;

pub use error::{Error, Result};
