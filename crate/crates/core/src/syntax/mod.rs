//! Syntax: abstract syntax trees, the parser, and the pretty-printer.

pub mod ast;
pub mod parser;
pub mod pretty;

pub use ast::{AnnType, BaseType, Expr, LamAnn, LocId, StateEnv, TypeEnv};
pub use parser::{parse_expr, parse_policy, parse_runtime_expr, parse_type, ParseError};
pub use pretty::{pretty_expr, pretty_lockset, pretty_policy, pretty_type};
