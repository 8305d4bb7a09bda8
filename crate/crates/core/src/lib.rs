//! Order-aware dataflow compiler for shell scripts.

pub mod annotations;
pub mod cli;
pub mod interp;
pub mod odfm;
pub mod shell_ast;
pub mod transform;
pub mod translate;

#[doc(hidden)]
pub mod testkit;
