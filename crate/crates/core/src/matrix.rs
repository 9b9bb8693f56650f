//! Dense 0/1 matrices stored as per-row column-support bitsets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Zarankiewicz instance: `m x n` matrices with no all-ones `s x t` block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ZarParams {
    m: usize,
    n: usize,
    s: usize,
    t: usize,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    m: usize,
    n: usize,
    s: usize,
    t: usize,
}

impl TryFrom<RawParams> for ZarParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ZarParams::new(r.m, r.n, r.s, r.t)
    }
}

impl From<ZarParams> for RawParams {
    fn from(p: ZarParams) -> Self {
        RawParams {
            m: p.m,
            n: p.n,
            s: p.s,
            t: p.t,
        }
    }
}

impl ZarParams {
    pub fn new(m: usize, n: usize, s: usize, t: usize) -> Result<Self> {
        if m == 0 || n == 0 || s == 0 || t == 0 {
            return Err(Error::InvalidParams(format!(
                "all of m, n, s, t must be positive, got ({m}, {n}, {s}, {t})"
            )));
        }
        Ok(Self { m, n, s, t })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// The instance with rows and columns swapped: Z(m,n,s,t) = Z(n,m,t,s).
    pub fn transposed(&self) -> Self {
        Self {
            m: self.n,
            n: self.m,
            s: self.t,
            t: self.s,
        }
    }

    /// True when no `s x t` block fits, so every matrix is valid.
    pub fn is_degenerate(&self) -> bool {
        self.s > self.m || self.t > self.n
    }

    pub fn is_diagonal_three(&self) -> bool {
        self.s == 3 && self.t == 3
    }
}

impl fmt::Display for ZarParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z({}, {}, {}, {})", self.m, self.n, self.s, self.t)
    }
}

pub(crate) fn words_for(cols: usize) -> usize {
    cols.div_ceil(64).max(1)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    wpr: usize,
    bits: Vec<u64>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let wpr = words_for(cols);
        Self {
            rows,
            cols,
            wpr,
            bits: vec![0; rows * wpr],
        }
    }

    /// The all-zero matrix of shape `(m, n)`.
    pub fn new(params: &ZarParams) -> Self {
        Self::zeros(params.m(), params.n())
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        let mut mat = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                mat.set(i, j, true);
            }
        }
        mat
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mat = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                if f(i, j) {
                    mat.set(i, j, true);
                }
            }
        }
        mat
    }

    /// Builds a matrix from nested rows of 0/1 values.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut mat = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("row has {} entries, expected {cols}", row.len()),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => mat.set(i, j, true),
                    other => {
                        return Err(Error::Parse {
                            line: i + 1,
                            reason: format!("entry {other} is not 0 or 1"),
                        })
                    }
                }
            }
        }
        Ok(mat)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Number of `u64` words backing each row.
    pub fn words_per_row(&self) -> usize {
        self.wpr
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.wpr..(i + 1) * self.wpr]
    }

    /// Low word of row `i`; the whole row when `cols <= 64`.
    #[inline]
    pub(crate) fn row_word(&self, i: usize) -> u64 {
        self.bits[i * self.wpr]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        self.bits[i * self.wpr + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        debug_assert!(i < self.rows && j < self.cols);
        let w = &mut self.bits[i * self.wpr + j / 64];
        let bit = 1u64 << (j % 64);
        if value {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    /// Returns a copy with `(i, j)` set to `value`.
    pub fn with(&self, i: usize, j: usize, value: bool) -> Self {
        let mut out = self.clone();
        out.set(i, j, value);
        out
    }

    pub fn row_ones(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn row_degrees(&self) -> Vec<usize> {
        (0..self.rows).map(|i| self.row_ones(i)).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn matches(&self, params: &ZarParams) -> Result<()> {
        if self.dims() != params.dims() {
            return Err(Error::DimensionMismatch {
                expected: params.dims(),
                found: self.dims(),
            });
        }
        Ok(())
    }

    /// Positions of all ones in row-major order.
    pub fn ones_positions(&self) -> Vec<(usize, usize)> {
        self.cells().filter(|&(i, j)| self.get(i, j)).collect()
    }

    /// Positions of all zeros in row-major order.
    pub fn zero_positions(&self) -> Vec<(usize, usize)> {
        self.cells().filter(|&(i, j)| !self.get(i, j)).collect()
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |i| (0..self.cols).map(move |j| (i, j)))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Entry `(i, j)` of the result is entry `(row_perm[i], col_perm[j])` of `self`.
    pub fn permute(&self, row_perm: &[usize], col_perm: &[usize]) -> Result<Self> {
        check_perm(row_perm, self.rows)?;
        check_perm(col_perm, self.cols)?;
        Ok(Self::from_fn(self.rows, self.cols, |i, j| {
            self.get(row_perm[i], col_perm[j])
        }))
    }

    /// Copies `other` into this matrix with its top-left corner at `(r0, c0)`.
    /// Entries outside this matrix are dropped.
    pub fn paste(&mut self, other: &BinaryMatrix, r0: usize, c0: usize) {
        for i in 0..other.rows {
            for j in 0..other.cols {
                if r0 + i < self.rows && c0 + j < self.cols {
                    self.set(r0 + i, c0 + j, other.get(i, j));
                }
            }
        }
    }

    /// True when every one of `self` is also a one of `other`.
    pub fn is_subset_of(&self, other: &BinaryMatrix) -> bool {
        self.dims() == other.dims()
            && self
                .bits
                .iter()
                .zip(&other.bits)
                .all(|(a, b)| a & !b == 0)
    }
}

fn check_perm(perm: &[usize], len: usize) -> Result<()> {
    if perm.len() != len {
        return Err(Error::PermutationLength {
            expected: len,
            found: perm.len(),
        });
    }
    let mut seen = vec![false; len];
    for &p in perm {
        if p >= len || std::mem::replace(&mut seen[p], true) {
            return Err(Error::NotAPermutation(len));
        }
    }
    Ok(())
}

impl fmt::Debug for BinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMatrix {}x{} ({} ones)", self.rows, self.cols, self.count_ones())?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                f.write_str(if self.get(i, j) { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Optional comment line of a matrix file: `# s t lower_bound_claim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixMeta {
    pub s: usize,
    pub t: usize,
    pub claim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixFile {
    pub matrix: BinaryMatrix,
    pub meta: Option<MatrixMeta>,
}

impl MatrixFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines: Vec<&str> = text.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        let header = lines.first().ok_or_else(|| parse_err(1, "missing header"))?;
        let dims: Vec<&str> = header.split(' ').collect();
        let (m, n) = match dims.as_slice() {
            [m, n] => (parse_num(m, 1)?, parse_num(n, 1)?),
            _ => return Err(parse_err(1, "header must be `m n`")),
        };
        let mut next = 1;
        let meta = match lines.get(1) {
            Some(line) if line.starts_with('#') => {
                next = 2;
                let fields: Vec<&str> = line[1..].split_whitespace().collect();
                match fields.as_slice() {
                    [s, t, c] => Some(MatrixMeta {
                        s: parse_num(s, 2)?,
                        t: parse_num(t, 2)?,
                        claim: parse_num(c, 2)?,
                    }),
                    _ => return Err(parse_err(2, "comment must be `# s t lower_bound_claim`")),
                }
            }
            _ => None,
        };
        let body = &lines[next..];
        if body.len() != m {
            return Err(parse_err(
                next + body.len().min(m) + 1,
                &format!("expected {m} rows, found {}", body.len()),
            ));
        }
        let mut matrix = BinaryMatrix::zeros(m, n);
        for (i, line) in body.iter().enumerate() {
            let lineno = next + i + 1;
            if line.len() != n {
                return Err(parse_err(
                    lineno,
                    &format!("row has {} characters, expected {n}", line.len()),
                ));
            }
            for (j, ch) in line.bytes().enumerate() {
                match ch {
                    b'0' => {}
                    b'1' => matrix.set(i, j, true),
                    _ => return Err(parse_err(lineno, &format!("invalid character {:?}", ch as char))),
                }
            }
        }
        Ok(Self { matrix, meta })
    }

    pub fn serialize(&self) -> String {
        let m = &self.matrix;
        let mut out = String::with_capacity(16 + m.rows() * (m.cols() + 1));
        out.push_str(&format!("{} {}\n", m.rows(), m.cols()));
        if let Some(meta) = self.meta {
            out.push_str(&format!("# {} {} {}\n", meta.s, meta.t, meta.claim));
        }
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                out.push(if m.get(i, j) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

fn parse_err(line: usize, reason: &str) -> Error {
    Error::Parse {
        line,
        reason: reason.to_string(),
    }
}

fn parse_num(s: &str, line: usize) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(line, &format!("expected a non-negative integer, found {s:?}")))
}

pub fn parse_matrix(text: &str) -> Result<BinaryMatrix> {
    MatrixFile::parse(text).map(|f| f.matrix)
}

pub fn serialize_matrix(matrix: &BinaryMatrix) -> String {
    MatrixFile {
        matrix: matrix.clone(),
        meta: None,
    }
    .serialize()
}
