//! Simulation and verification toolkit for the synchronization power of
//! ERC20-style token objects.

pub mod algorithms;
pub mod analysis;
pub mod cli;
pub mod codec;
pub mod objects;
pub mod verify;
pub mod sim;
