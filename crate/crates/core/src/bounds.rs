//! Known bounds, Roman's counting upper bound, and certification of
//! constructions against them.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num::{BigInt, BigRational, Integer, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, ZarParams};
use crate::validator::{binomial, can_add_unchecked, find_witness};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundsRecord {
    pub params: ZarParams,
    pub lower: Option<u64>,
    pub upper: Option<u64>,
    pub tight: bool,
    pub provenance: String,
}

impl BoundsRecord {
    pub fn new(params: ZarParams, lower: Option<u64>, upper: Option<u64>, provenance: &str) -> Result<Self> {
        if let (Some(l), Some(u)) = (lower, upper) {
            if l > u {
                return Err(Error::ExceedsUpperBound { ones: l, upper: u });
            }
        }
        Ok(Self {
            params,
            lower,
            upper,
            tight: lower.is_some() && lower == upper,
            provenance: provenance.to_string(),
        })
    }
}

/// `(t-1) C(m,s) / C(k,s-1) + ((k+1)(s-1)/s) n`, exactly.
pub fn roman_upper_bound_exact(params: &ZarParams, k: u64) -> Result<BigRational> {
    let (m, n, s, t) = (params.m() as u64, params.n() as u64, params.s() as u64, params.t() as u64);
    let denom = binomial(k, s - 1);
    if k == 0 || denom == 0 {
        return Err(Error::InvalidParams(format!("Roman bound needs k >= max(1, s-1), got k = {k}")));
    }
    let first = BigRational::new(BigInt::from(t - 1) * BigInt::from(binomial(m, s)), BigInt::from(denom));
    let second = BigRational::new(BigInt::from((k + 1) * (s - 1)) * BigInt::from(n), BigInt::from(s));
    Ok(first + second)
}

pub fn roman_upper_bound(params: &ZarParams, k: u64) -> Result<f64> {
    roman_upper_bound_exact(params, k).map(|r| r.to_f64().unwrap_or(f64::INFINITY))
}

/// Floor of the smallest Roman bound over `k` in `[s-1, m]`, never above `m n`.
pub fn best_roman(params: &ZarParams) -> u64 {
    let trivial = (params.m() * params.n()) as u64;
    let lo = (params.s() as u64 - 1).max(1);
    (lo..=params.m() as u64)
        .filter_map(|k| roman_upper_bound_exact(params, k).ok())
        .min()
        .map(|r| r.floor().to_integer())
        .and_then(|v: BigInt| v.to_u64())
        .map_or(trivial, |v| v.min(trivial))
}

/// Raises `record.lower` to the ones count of a verified construction.
pub fn certify(record: &BoundsRecord, mat: &BinaryMatrix) -> Result<BoundsRecord> {
    mat.matches(&record.params)?;
    if let Some(w) = find_witness(mat, &record.params) {
        return Err(Error::InvalidMatrix(w));
    }
    let ones = mat.count_ones() as u64;
    if let Some(upper) = record.upper {
        if ones > upper {
            return Err(Error::ExceedsUpperBound { ones, upper });
        }
    }
    let mut out = record.clone();
    if record.lower.is_none_or(|l| ones >= l) {
        out.lower = Some(ones);
    }
    out.tight = out.lower.is_some() && out.lower == out.upper;
    Ok(out)
}

pub const BRUTE_FORCE_MAX_CELLS: usize = 20;

/// Exact `Z(m, n, s, t)` by branch and bound over cells in row-major order.
pub fn brute_force_exact(params: &ZarParams) -> Result<u64> {
    let cells = params.m() * params.n();
    if cells > BRUTE_FORCE_MAX_CELLS {
        return Err(Error::ResourceGuard(format!(
            "exhaustive search supports m*n <= {BRUTE_FORCE_MAX_CELLS}, got {cells}"
        )));
    }
    if params.is_degenerate() {
        return Ok(cells as u64);
    }
    fn go(mat: &mut BinaryMatrix, params: &ZarParams, idx: usize, ones: usize, best: &mut usize) {
        let cells = mat.rows() * mat.cols();
        if ones + (cells - idx) <= *best {
            return;
        }
        if idx == cells {
            *best = ones;
            return;
        }
        let (i, j) = idx.div_rem(&mat.cols());
        if can_add_unchecked(mat, i, j, params.s(), params.t()) {
            mat.set(i, j, true);
            go(mat, params, idx + 1, ones + 1, best);
            mat.set(i, j, false);
        }
        go(mat, params, idx + 1, ones, best);
    }
    let mut best = 0;
    go(&mut BinaryMatrix::new(params), params, 0, 0, &mut best);
    Ok(best as u64)
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    m: usize,
    n: usize,
    s: usize,
    t: usize,
    lower: Option<u64>,
    upper: Option<u64>,
    provenance: String,
}

/// Per-instance bounds, keyed by `(m, n, s, t)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BoundsRegistry {
    records: BTreeMap<ZarParams, BoundsRecord>,
}

impl BoundsRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Values stated in the source text: three tight cases and the lower
    /// bounds given by the shipped constructions.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        let p = |m, n| ZarParams::new(m, n, 3, 3).unwrap();
        for (m, n, v) in [(11, 21, 116), (11, 22, 121), (12, 22, 132)] {
            reg.insert(BoundsRecord::new(p(m, n), Some(v), Some(v), "tight; circulant and ripup-repair constructions").unwrap());
        }
        for (m, n, v) in [(8, 23, 94), (9, 22, 97), (16, 15, 123), (16, 16, 119)] {
            reg.insert(BoundsRecord::new(p(m, n), Some(v), None, "explicit construction").unwrap());
        }
        reg
    }

    pub fn insert(&mut self, record: BoundsRecord) {
        self.records.insert(record.params, record);
    }

    pub fn get(&self, params: &ZarParams) -> Option<&BoundsRecord> {
        self.records.get(params)
    }

    pub fn records(&self) -> impl Iterator<Item = &BoundsRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Certifies `mat` against the record for `params`, creating an empty
    /// record when none exists.
    pub fn certify(&mut self, params: &ZarParams, mat: &BinaryMatrix) -> Result<&BoundsRecord> {
        let current = self
            .records
            .get(params)
            .cloned()
            .unwrap_or_else(|| BoundsRecord::new(*params, None, None, "").unwrap());
        let updated = certify(&current, mat)?;
        self.records.insert(*params, updated);
        Ok(&self.records[params])
    }

    /// Reads `m,n,s,t,lower,upper,provenance` records. Empty bound fields
    /// mean unknown.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["m", "n", "s", "t", "lower", "upper", "provenance"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                line: 1,
                reason: format!("bounds header must be `{}`", expected.join(",")),
            });
        }
        let mut reg = Self::new();
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            let params = ZarParams::new(row.m, row.n, row.s, row.t)?;
            reg.insert(BoundsRecord::new(params, row.lower, row.upper, &row.provenance)?);
        }
        Ok(reg)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for r in self.records.values() {
            wtr.serialize(CsvRow {
                m: r.params.m(),
                n: r.params.n(),
                s: r.params.s(),
                t: r.params.t(),
                lower: r.lower,
                upper: r.upper,
                provenance: r.provenance.clone(),
            })?;
        }
        if self.records.is_empty() {
            wtr.write_record(["m", "n", "s", "t", "lower", "upper", "provenance"])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_12_22, seed_bank, two_block_circulant, ShiftSetPair, SeedBank};
    use crate::validator::{is_valid, naive};

    fn p(m: usize, n: usize, s: usize, t: usize) -> ZarParams {
        ZarParams::new(m, n, s, t).unwrap()
    }

    #[test]
    fn roman_hand_values() {
        // (2 * 165 / 10) + (6 * 2 / 3) * 21 = 33 + 84
        assert_eq!(
            roman_upper_bound_exact(&p(11, 21, 3, 3), 5).unwrap(),
            BigRational::from_integer(117.into())
        );
        assert_eq!(roman_upper_bound(&p(11, 21, 3, 3), 5).unwrap(), 117.0);
        // s = 1: only the first term survives
        assert_eq!(roman_upper_bound(&p(7, 4, 1, 3), 1).unwrap(), 14.0);
        // t = 1: only the second term survives, (k+1)(s-1)/s * n
        assert_eq!(
            roman_upper_bound_exact(&p(5, 6, 3, 1), 4).unwrap(),
            BigRational::from_integer(20.into())
        );
        // 2 * 1 / C(3, 2) + (4 * 2 / 3) * 3 = 2/3 + 8
        assert_eq!(
            roman_upper_bound_exact(&p(3, 3, 3, 3), 3).unwrap(),
            BigRational::new(26.into(), 3.into())
        );
        assert!(roman_upper_bound(&p(5, 5, 3, 3), 1).is_err());
        assert!(roman_upper_bound(&p(5, 5, 1, 3), 0).is_err());
    }

    #[test]
    fn best_roman_values() {
        assert_eq!(best_roman(&p(3, 3, 3, 3)), 8);
        assert_eq!(best_roman(&p(11, 21, 3, 3)), 117);
        assert_eq!(best_roman(&p(2, 5, 3, 3)), 10);
        for m in 3..12 {
            for n in 3..24 {
                assert!(best_roman(&p(m, n + 1, 3, 3)) >= best_roman(&p(m, n, 3, 3)));
            }
        }
    }

    #[test]
    fn fixtures_respect_roman() {
        for e in SeedBank::builtin().entries() {
            let q = p(e.matrix.rows(), e.matrix.cols(), 3, 3);
            assert!(e.matrix.count_ones() as u64 <= best_roman(&q), "{}", e.name);
        }
        assert!(132 <= best_roman(&p(12, 22, 3, 3)));
        assert!(121 <= best_roman(&p(11, 22, 3, 3)));
    }

    #[test]
    fn brute_force_small() {
        assert_eq!(brute_force_exact(&p(3, 3, 3, 3)).unwrap(), 8);
        assert_eq!(brute_force_exact(&p(2, 5, 3, 3)).unwrap(), 10);
        assert!(matches!(brute_force_exact(&p(5, 5, 3, 3)), Err(Error::ResourceGuard(_))));
    }

    /// Plain enumeration of all 2^(mn) matrices.
    fn enumerate_exact(q: &ZarParams) -> u64 {
        let cells = q.m() * q.n();
        let mut best = 0;
        for bits in 0u32..(1 << cells) {
            if (bits.count_ones() as u64) <= best {
                continue;
            }
            let m = BinaryMatrix::from_fn(q.m(), q.n(), |i, j| bits >> (i * q.n() + j) & 1 == 1);
            if naive::count(&m, q.s(), q.t()) == 0 {
                best = bits.count_ones() as u64;
            }
        }
        best
    }

    #[test]
    fn brute_force_matches_enumeration() {
        for (m, n, s, t) in [(3, 4, 3, 3), (4, 3, 3, 3), (3, 3, 2, 2), (4, 4, 2, 2), (3, 5, 2, 3), (4, 4, 3, 3)] {
            let q = p(m, n, s, t);
            assert_eq!(brute_force_exact(&q).unwrap(), enumerate_exact(&q), "{q}");
        }
        // Frozen oracle value: three rows share at most two full columns.
        assert_eq!(brute_force_exact(&p(3, 4, 3, 3)).unwrap(), 10);
    }

    #[test]
    fn roman_never_below_exact() {
        for m in 1..=5 {
            for n in 1..=5 {
                if m * n > 16 {
                    continue;
                }
                for (s, t) in [(2, 2), (2, 3), (3, 3), (3, 2)] {
                    let q = p(m, n, s, t);
                    assert!(brute_force_exact(&q).unwrap() <= best_roman(&q), "{q}");
                }
            }
        }
    }

    #[test]
    fn certify_cases() {
        let reg = BoundsRegistry::builtin();
        let q = p(11, 22, 3, 3);
        let open = BoundsRecord::new(q, None, Some(121), "upper only").unwrap();
        let circ = two_block_circulant(&ShiftSetPair::quadratic_residues_11());
        let out = certify(&open, &circ).unwrap();
        assert_eq!(out.lower, Some(121));
        assert!(out.tight);
        assert!(reg.get(&q).unwrap().tight);

        let q12 = p(12, 22, 3, 3);
        let open = BoundsRecord::new(q12, Some(100), Some(132), "").unwrap();
        assert!(certify(&open, &build_12_22()).unwrap().tight);

        let bad = BinaryMatrix::ones(3, 3);
        let rec = BoundsRecord::new(p(3, 3, 3, 3), None, Some(8), "").unwrap();
        match certify(&rec, &bad) {
            Err(Error::InvalidMatrix(w)) => assert_eq!(w.rows, vec![0, 1, 2]),
            other => panic!("{other:?}"),
        }

        // never lowers
        let rec = BoundsRecord::new(p(8, 23, 3, 3), Some(94), None, "").unwrap();
        let sparse = BinaryMatrix::zeros(8, 23);
        assert_eq!(certify(&rec, &sparse).unwrap().lower, Some(94));
        assert!(!certify(&rec, &seed_bank(8, 23).unwrap()).unwrap().tight);
        assert!(BoundsRecord::new(q, Some(5), Some(4), "").is_err());
    }

    #[test]
    fn registry_csv_round_trip() {
        let reg = BoundsRegistry::builtin();
        let mut buf = Vec::new();
        reg.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("m,n,s,t,lower,upper,provenance\n"));
        assert!(text.contains("8,23,3,3,94,,explicit construction"));
        assert_eq!(BoundsRegistry::from_csv(&buf[..]).unwrap(), reg);
        assert!(BoundsRegistry::from_csv("a,b\n1,2\n".as_bytes()).is_err());
        let mut empty = Vec::new();
        BoundsRegistry::new().to_csv(&mut empty).unwrap();
        assert!(BoundsRegistry::from_csv(&empty[..]).unwrap().is_empty());
    }

    #[test]
    fn registry_certify_creates_records() {
        let mut reg = BoundsRegistry::new();
        let q = p(8, 23, 3, 3);
        let m = seed_bank(8, 23).unwrap();
        assert!(is_valid(&m, &q));
        assert_eq!(reg.certify(&q, &m).unwrap().lower, Some(94));
        assert_eq!(reg.len(), 1);
    }
}
