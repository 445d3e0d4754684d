//! Core of the filter-predicate optimizer: IR, parser, static analyses,
//! interval reasoning, the source-to-source transformation, and a
//! stratified semi-naive evaluator.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod engine;
pub mod format;
pub mod interval;
pub mod ir;
pub mod parser;
pub mod schema;
pub mod transform;
pub mod validate;

pub use format::format_program;
pub use ir::*;
pub use parser::{parse_program, ParseError};
pub use validate::{validate, Diagnostic, DiagnosticKind};
