//! Command implementations and file formats behind the `ldw` binary.

pub mod commands;
pub mod container;
pub mod pgm;

pub use commands::{run, Cli};
