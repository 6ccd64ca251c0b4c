//! Sender/receiver signaling games with a continuous message channel.

pub mod agents;
pub mod analysis;
pub mod checkpoint;
pub mod error;
pub mod experiment;
pub mod game;
pub mod nn;
pub mod report;
pub mod seed;

pub use error::{Error, Result};
