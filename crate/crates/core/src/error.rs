use std::io;

use thiserror::Error;

use crate::validator::Witness;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("permutation of length {found} does not match dimension {expected}")]
    PermutationLength { expected: usize, found: usize },

    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),

    #[error("index {index} out of range for dimension {bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("row set must not be empty")]
    EmptyRowSet,

    #[error("cell ({row}, {col}) is already 1")]
    CellAlreadySet { row: usize, col: usize },

    #[error("shift {shift} is outside Z_{modulus}")]
    ShiftOutOfRange { shift: usize, modulus: usize },

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("matrix is not K_{{s,t}}-free: {0}")]
    InvalidMatrix(Witness),

    #[error("{ones} ones exceed the registered upper bound {upper}")]
    ExceedsUpperBound { ones: u64, upper: u64 },

    #[error("cannot rip up {k} ones from a matrix with {ones}")]
    RipupTooLarge { k: usize, ones: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown mutation backend `{0}`")]
    UnknownBackend(String),

    #[error("population is empty")]
    EmptyPopulation,

    #[error("step budget of {budget} exceeded (estimated {estimate})")]
    BudgetExceeded { budget: u64, estimate: u64 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}
