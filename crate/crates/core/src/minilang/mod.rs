//! minilang: a small imperative language whose interpreter records the full
//! program state after every executed statement.
//!
//! Values are 64-bit integers, booleans and bounded integer arrays. Every
//! variable is function-scoped; a variable that has not been assigned yet
//! holds `⊥` so that state tuples keep a fixed width.
//!
//! ```text
//! fn bubble(a: int[]) {
//!     for i in 0..len(a) {
//!         for j in 0..len(a) - i - 1 {
//!             if a[j] > a[j + 1] {
//!                 swap(a, j, j + 1);
//!             }
//!         }
//!     }
//! }
//! ```

pub mod ast;
pub mod error;
pub mod inputs;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod tracefile;
pub mod value;

pub use ast::{Arm, BranchSiteId, Program, StatementId, StatementKind, Stmt, Type};
pub use error::{ExecError, InputError, ParseError};
pub use inputs::{random_inputs, random_inputs_with, InputDist};
pub use interp::{branch_coverage, execute, observe, ExecLimits, ExecutionTrace, Observation, TraceStep};
pub use parser::parse;
pub use value::{ProgramState, Value};

/// Canonical token sequence of a statement.
pub fn tokenize_statement(s: &Stmt) -> Vec<String> {
    s.tokens()
}
