//! Adaptive molecule-release rates for diffusion-based molecular links.
//!
//! The crate is `no_std` (with `alloc`) and holds the pure numerical core:
//! the Poisson ISI channel model, the finite-memory adaptive transmitter and
//! its baselines, the threshold receiver, and the exact error evaluators,
//! lower bounds and optimizers for the one-memory channel.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod channel;
mod error;
pub mod receiver;
pub mod special;
pub mod transmitter;

pub use channel::{ChannelModel, PhysicalParams, SlotState};
pub use error::{Error, Result};
pub use receiver::ThresholdDecoder;
pub use transmitter::{LevelTable, MemoryState, PowerConvention, Transmitter, TransmitterKind};
