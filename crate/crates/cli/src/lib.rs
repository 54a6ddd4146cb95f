//! File formats and renderers behind the `gip` command.

pub mod export;
pub mod files;
