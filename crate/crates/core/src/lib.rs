//! Core library for the LW language: a higher-order calculus with
//! flow-lock policies, a security type system, an observation-emitting
//! interpreter, and bounded relational security checking.

pub mod policy;
pub mod syntax;
pub mod types;
pub mod interp;
pub mod equiv;
pub mod gen;
pub mod harness;
