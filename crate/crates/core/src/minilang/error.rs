use thiserror::Error;

use super::ast::StatementId;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unsupported construct at {line}:{col}: {message}")]
    Unsupported { line: usize, col: usize, message: String },
    #[error("variable `{0}` is read but never assigned")]
    UndefinedVariable(String),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("step limit of {0} exceeded")]
    StepLimit(usize),
    #[error("runtime error at statement {stmt}: {message}")]
    Runtime { stmt: StatementId, message: String },
    #[error("input mismatch: {0}")]
    BadInput(String),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InputError {
    #[error("requested zero inputs")]
    ZeroCount,
    #[error("invalid input distribution: {0}")]
    BadDistribution(String),
}
