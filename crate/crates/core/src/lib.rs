//! Search toolkit for dense K_{s,t}-free binary matrices.
//!
//! A Zarankiewicz number `Z(m, n, s, t)` is the largest number of ones an
//! `m x n` 0/1 matrix can hold without any `s` rows and `t` columns meeting
//! in all ones. This crate builds such matrices (explicit seeds, circulant
//! constructions, greedy fill, ripup-and-repair search, an evolutionary
//! strategy harness), verifies them, and compares them against known bounds.

pub mod bounds;
pub mod cli;
pub mod constructions;
pub mod error;
pub mod evolve;
pub mod local_search;
pub mod matrix;
pub mod render;
pub mod reproduce;
pub mod rng;
pub mod scoring;
pub mod validator;

pub use error::{Error, Result};
pub use matrix::{parse_matrix, serialize_matrix, BinaryMatrix, MatrixFile, MatrixMeta, ZarParams};
pub use rng::RngStream;
pub use validator::{can_add, count_violating_submatrices, excess_violations, find_witness, is_valid, Witness};
