//! Library surface of the command-line driver, split out so integration
//! tests can exercise the commands without spawning processes.

pub mod commands;
pub mod format;
