//! K_{s,t}-freeness checks over row-subset intersections.
//!
//! Every query reduces to enumerating `s`-subsets of rows and intersecting
//! their column supports. The enumeration walks ordered combinations and
//! intersects incrementally, abandoning a branch as soon as the running
//! common support drops below `t` columns. For `s = 3` on matrices of at most
//! 64 columns a dedicated single-word loop is used.

use std::cell::Cell;
use std::fmt;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, ZarParams};

/// One all-ones `s x t` submatrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rows {:?} x cols {:?}", self.rows, self.cols)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViolationReport {
    /// Number of all-ones `s x t` submatrices.
    pub total_submatrices: u64,
    /// Sum over row subsets of `max(0, common - (t - 1))`.
    pub excess: u64,
    pub witness: Option<Witness>,
}

thread_local! {
    static CELL_CHECKS: Cell<u64> = const { Cell::new(0) };
}

/// Row-intersection work performed so far on the calling thread, in
/// word-level AND operations.
pub fn cell_checks() -> u64 {
    CELL_CHECKS.with(|c| c.get())
}

fn charge(ops: u64) {
    CELL_CHECKS.with(|c| c.set(c.get().wrapping_add(ops)));
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

fn full_mask(cols: usize, wpr: usize) -> Vec<u64> {
    let mut mask = vec![u64::MAX; wpr];
    let rem = cols % 64;
    if rem != 0 {
        mask[wpr - 1] = (1u64 << rem) - 1;
    }
    if cols == 0 {
        mask.iter_mut().for_each(|w| *w = 0);
    }
    mask
}

fn popcount(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

fn bit_indices(words: &[u64]) -> Vec<usize> {
    let mut out = Vec::new();
    for (wi, &w) in words.iter().enumerate() {
        let mut w = w;
        while w != 0 {
            out.push(wi * 64 + w.trailing_zeros() as usize);
            w &= w - 1;
        }
    }
    out
}

/// Walks `depth`-subsets of `candidates` whose running intersection with
/// `base` keeps at least `t` columns. The visitor sees the chosen rows and
/// their final common support.
struct SubsetWalk<'a> {
    mat: &'a BinaryMatrix,
    candidates: &'a [usize],
    depth: usize,
    t: usize,
    levels: Vec<Vec<u64>>,
    chosen: Vec<usize>,
    ops: u64,
}

impl<'a> SubsetWalk<'a> {
    fn run<F>(
        mat: &'a BinaryMatrix,
        candidates: &'a [usize],
        base: Vec<u64>,
        depth: usize,
        t: usize,
        mut visit: F,
    ) -> ControlFlow<()>
    where
        F: FnMut(&[usize], &[u64]) -> ControlFlow<()>,
    {
        if popcount(&base) < t || candidates.len() < depth {
            return ControlFlow::Continue(());
        }
        let wpr = mat.words_per_row();
        let mut levels = vec![base];
        levels.extend((0..depth).map(|_| vec![0u64; wpr]));
        let mut walk = SubsetWalk {
            mat,
            candidates,
            depth,
            t,
            levels,
            chosen: Vec::with_capacity(depth),
            ops: 0,
        };
        let flow = walk.rec(0, 0, &mut visit);
        charge(walk.ops);
        flow
    }

    fn rec<F>(&mut self, level: usize, from: usize, visit: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&[usize], &[u64]) -> ControlFlow<()>,
    {
        if level == self.depth {
            return visit(&self.chosen, &self.levels[level]);
        }
        let remaining = self.depth - level;
        for idx in from..=self.candidates.len() - remaining {
            let r = self.candidates[idx];
            let (head, tail) = self.levels.split_at_mut(level + 1);
            let parent = &head[level];
            let next = &mut tail[0];
            let mut count = 0;
            self.ops += next.len() as u64;
            for ((dst, &a), &b) in next.iter_mut().zip(parent).zip(self.mat.row(r)) {
                *dst = a & b;
                count += dst.count_ones() as usize;
            }
            if count < self.t {
                continue;
            }
            self.chosen.push(r);
            let flow = self.rec(level + 1, idx + 1, visit);
            self.chosen.pop();
            flow?;
        }
        ControlFlow::Continue(())
    }
}

/// Visits every `s`-row subset with at least `t` common columns, passing the
/// rows and the size of their common support.
fn for_each_offending<F>(mat: &BinaryMatrix, s: usize, t: usize, mut visit: F) -> ControlFlow<()>
where
    F: FnMut(&[usize], &[u64]) -> ControlFlow<()>,
{
    let m = mat.rows();
    if s > m || t > mat.cols() {
        return ControlFlow::Continue(());
    }
    if s == 3 && mat.words_per_row() == 1 {
        let mut ops = 0u64;
        let flow = (|| {
            for a in 0..m {
                let ra = mat.row_word(a);
                if (ra.count_ones() as usize) < t {
                    continue;
                }
                for b in a + 1..m {
                    let rab = ra & mat.row_word(b);
                    ops += 1;
                    if (rab.count_ones() as usize) < t {
                        continue;
                    }
                    for c in b + 1..m {
                        let common = rab & mat.row_word(c);
                        ops += 1;
                        if common.count_ones() as usize >= t {
                            visit(&[a, b, c], &[common])?;
                        }
                    }
                }
            }
            ControlFlow::Continue(())
        })();
        charge(ops);
        return flow;
    }
    let rows: Vec<usize> = (0..m).collect();
    let base = full_mask(mat.cols(), mat.words_per_row());
    SubsetWalk::run(mat, &rows, base, s, t, visit)
}

/// Columns in which every listed row has a one.
pub fn common_support(mat: &BinaryMatrix, rows: &[usize]) -> Result<Vec<usize>> {
    if rows.is_empty() {
        return Err(Error::EmptyRowSet);
    }
    let mut acc = full_mask(mat.cols(), mat.words_per_row());
    for &r in rows {
        if r >= mat.rows() {
            return Err(Error::IndexOutOfRange {
                index: r,
                bound: mat.rows(),
            });
        }
        for (a, &w) in acc.iter_mut().zip(mat.row(r)) {
            *a &= w;
        }
    }
    Ok(bit_indices(&acc))
}

pub fn is_valid(mat: &BinaryMatrix, params: &ZarParams) -> bool {
    for_each_offending(mat, params.s(), params.t(), |_, _| ControlFlow::Break(())).is_continue()
}

/// Number of all-ones `s x t` submatrices: the sum of `C(|common|, t)` over
/// all `s`-row subsets.
pub fn count_violating_submatrices(mat: &BinaryMatrix, params: &ZarParams) -> u64 {
    let t = params.t() as u64;
    let mut total = 0u64;
    let _ = for_each_offending(mat, params.s(), params.t(), |_, common| {
        total += binomial(popcount(common) as u64, t);
        ControlFlow::Continue(())
    });
    total
}

/// Sum over `s`-row subsets of how far their common support exceeds `t - 1`.
pub fn excess_violations(mat: &BinaryMatrix, params: &ZarParams) -> u64 {
    let allowed = params.t() - 1;
    let mut total = 0u64;
    let _ = for_each_offending(mat, params.s(), params.t(), |_, common| {
        total += (popcount(common) - allowed) as u64;
        ControlFlow::Continue(())
    });
    total
}

pub fn find_witness(mat: &BinaryMatrix, params: &ZarParams) -> Option<Witness> {
    let mut found = None;
    let _ = for_each_offending(mat, params.s(), params.t(), |rows, common| {
        let mut cols = bit_indices(common);
        cols.truncate(params.t());
        found = Some(Witness {
            rows: rows.to_vec(),
            cols,
        });
        ControlFlow::Break(())
    });
    found
}

pub fn violation_report(mat: &BinaryMatrix, params: &ZarParams) -> ViolationReport {
    ViolationReport {
        total_submatrices: count_violating_submatrices(mat, params),
        excess: excess_violations(mat, params),
        witness: find_witness(mat, params),
    }
}

/// Whether setting `(i, j)` keeps a valid matrix valid.
///
/// Only row subsets containing `i` whose other rows all have a one in column
/// `j` can become violations, so just the `(s-1)`-subsets of those rows are
/// checked against row `i`'s support with `j` included.
pub fn can_add(mat: &BinaryMatrix, i: usize, j: usize, params: &ZarParams) -> Result<bool> {
    if i >= mat.rows() {
        return Err(Error::IndexOutOfRange {
            index: i,
            bound: mat.rows(),
        });
    }
    if j >= mat.cols() {
        return Err(Error::IndexOutOfRange {
            index: j,
            bound: mat.cols(),
        });
    }
    if mat.get(i, j) {
        return Err(Error::CellAlreadySet { row: i, col: j });
    }
    Ok(can_add_unchecked(mat, i, j, params.s(), params.t()))
}

pub(crate) fn can_add_unchecked(mat: &BinaryMatrix, i: usize, j: usize, s: usize, t: usize) -> bool {
    let m = mat.rows();
    if s > m || t > mat.cols() {
        return true;
    }
    if s == 3 && mat.words_per_row() == 1 {
        let bit = 1u64 << j;
        let ri = mat.row_word(i) | bit;
        if (ri.count_ones() as usize) < t {
            return true;
        }
        let mut others = [0u64; 64];
        let mut k = 0;
        charge(m as u64);
        for r in 0..m {
            if r != i {
                let w = mat.row_word(r);
                if w & bit != 0 && ((w & ri).count_ones() as usize) >= t {
                    others[k] = w & ri;
                    k += 1;
                    if k == others.len() {
                        return can_add_general(mat, i, j, s, t);
                    }
                }
            }
        }
        charge((k * k.saturating_sub(1) / 2) as u64);
        for a in 0..k {
            for b in a + 1..k {
                if ((others[a] & others[b]).count_ones() as usize) >= t {
                    return false;
                }
            }
        }
        return true;
    }
    can_add_general(mat, i, j, s, t)
}

fn can_add_general(mat: &BinaryMatrix, i: usize, j: usize, s: usize, t: usize) -> bool {
    let mut base = mat.row(i).to_vec();
    base[j / 64] |= 1u64 << (j % 64);
    let others: Vec<usize> = (0..mat.rows()).filter(|&r| r != i && mat.get(r, j)).collect();
    SubsetWalk::run(mat, &others, base, s - 1, t, |_, _| ControlFlow::Break(())).is_continue()
}

#[cfg(test)]
pub(crate) mod naive {
    //! Brute-force reference checks over all `C(m,s) * C(n,t)` submatrices.

    use crate::matrix::BinaryMatrix;

    pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for x in start..n {
                cur.push(x);
                go(x + 1, n, k, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        if k <= n {
            go(0, n, k, &mut Vec::new(), &mut out);
        }
        out
    }

    pub fn count(mat: &BinaryMatrix, s: usize, t: usize) -> u64 {
        let rows = combinations(mat.rows(), s);
        let cols = combinations(mat.cols(), t);
        let mut total = 0;
        for r in &rows {
            for c in &cols {
                if r.iter().all(|&i| c.iter().all(|&j| mat.get(i, j))) {
                    total += 1;
                }
            }
        }
        total
    }
}
