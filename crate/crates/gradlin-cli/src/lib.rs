//! System files, text formats and subcommands of the `gradlin` tool.

pub mod commands;
pub mod polytext;
pub mod random;
pub mod sysfile;
pub mod table;
