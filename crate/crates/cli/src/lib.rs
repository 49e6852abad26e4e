//! Library surface of the `cfsem` CLI: model-file parsing, query parsing
//! and dispatch, and result rendering. The binary in `main.rs` is a thin
//! wrapper over these.

pub mod model_file;
pub mod output;
pub mod query;
