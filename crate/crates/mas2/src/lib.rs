//! Meta-agent workflow generation, monitored execution with rectification,
//! tree-based preference curation, and the command-line harness.

pub mod gateway;
pub mod operators;
pub mod value;
pub mod meta;
pub mod seeds;
pub mod executor;
pub mod curate;
pub mod formats;
pub mod harness;
