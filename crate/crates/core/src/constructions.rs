//! Deterministic generators: the shipped seed bank, two-block circulant
//! constructions and greedy maximal fill.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, MatrixFile, ZarParams};
use crate::rng::RngStream;
use crate::validator::{can_add_unchecked, find_witness, is_valid};

const BUILTIN: [(&str, &str); 5] = [
    ("z_8x23_94.mat", include_str!("../fixtures/z_8x23_94.mat")),
    ("z_9x22_97.mat", include_str!("../fixtures/z_9x22_97.mat")),
    ("z_11x21_111.mat", include_str!("../fixtures/z_11x21_111.mat")),
    ("z_16x15_123.mat", include_str!("../fixtures/z_16x15_123.mat")),
    ("z_16x16_119.mat", include_str!("../fixtures/z_16x16_119.mat")),
];

#[derive(Clone, Debug)]
pub struct SeedEntry {
    pub name: String,
    pub matrix: BinaryMatrix,
    pub advertised_ones: usize,
}

/// Collection of known constructions keyed by shape.
#[derive(Clone, Debug, Default)]
pub struct SeedBank {
    entries: Vec<SeedEntry>,
}

/// Parses `z_<m>x<n>_<ones>.mat` into `(m, n, ones)`.
pub fn parse_fixture_name(name: &str) -> Option<(usize, usize, usize)> {
    let stem = name.strip_prefix("z_")?.strip_suffix(".mat")?;
    let (dims, ones) = stem.split_once('_')?;
    let (m, n) = dims.split_once('x')?;
    Some((m.parse().ok()?, n.parse().ok()?, ones.parse().ok()?))
}

pub fn fixture_name(mat: &BinaryMatrix) -> String {
    format!("z_{}x{}_{}.mat", mat.rows(), mat.cols(), mat.count_ones())
}

impl SeedBank {
    pub fn builtin() -> Self {
        let entries = BUILTIN
            .iter()
            .map(|(name, text)| {
                let (_, _, ones) = parse_fixture_name(name).expect("fixture name");
                SeedEntry {
                    name: name.to_string(),
                    matrix: MatrixFile::parse(text).expect("builtin fixture parses").matrix,
                    advertised_ones: ones,
                }
            })
            .collect();
        Self { entries }
    }

    /// Loads every `z_<m>x<n>_<ones>.mat` file in `dir`. Files whose
    /// contents disagree with their name are rejected.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut names: Vec<String> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| parse_fixture_name(n).is_some())
            .collect();
        names.sort();
        let mut entries = Vec::with_capacity(names.len());
        for name in names {
            let (m, n, ones) = parse_fixture_name(&name).unwrap();
            let matrix = MatrixFile::parse(&fs::read_to_string(dir.join(&name))?)?.matrix;
            if matrix.dims() != (m, n) || matrix.count_ones() != ones {
                return Err(Error::InvalidConfig(format!(
                    "{name}: contents are {}x{} with {} ones",
                    matrix.rows(),
                    matrix.cols(),
                    matrix.count_ones()
                )));
            }
            entries.push(SeedEntry {
                name,
                matrix,
                advertised_ones: ones,
            });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[SeedEntry] {
        &self.entries
    }

    /// The densest stored matrix of shape `(m, n)`.
    pub fn get(&self, m: usize, n: usize) -> Option<&BinaryMatrix> {
        self.entries
            .iter()
            .filter(|e| e.matrix.dims() == (m, n))
            .max_by_key(|e| e.advertised_ones)
            .map(|e| &e.matrix)
    }
}

/// The built-in seed matrix for `(m, n)`, if any.
pub fn seed_bank(m: usize, n: usize) -> Option<BinaryMatrix> {
    BUILTIN.iter().find_map(|(name, text)| {
        let (fm, fn_, _) = parse_fixture_name(name)?;
        (fm == m && fn_ == n).then(|| MatrixFile::parse(text).expect("builtin fixture").matrix)
    })
}

fn check_shifts(p: usize, shifts: &[usize]) -> Result<()> {
    match shifts.iter().find(|&&d| d >= p) {
        Some(&d) => Err(Error::ShiftOutOfRange { shift: d, modulus: p }),
        None => Ok(()),
    }
}

/// `p x p` matrix with a one at `(i, j)` iff `(j - i) mod p` is a shift.
pub fn circulant_block(p: usize, shifts: &[usize]) -> Result<BinaryMatrix> {
    check_shifts(p, shifts)?;
    let mut mat = BinaryMatrix::zeros(p, p);
    for i in 0..p {
        for &d in shifts {
            mat.set(i, (i + d) % p, true);
        }
    }
    Ok(mat)
}

/// Two shift sets over `Z_p`, one per circulant block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSetPair {
    p: usize,
    d1: Vec<usize>,
    d2: Vec<usize>,
}

impl ShiftSetPair {
    /// Shifts are sorted and deduplicated.
    pub fn new(p: usize, d1: &[usize], d2: &[usize]) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParams("modulus must be positive".into()));
        }
        check_shifts(p, d1)?;
        check_shifts(p, d2)?;
        let norm = |d: &[usize]| {
            let mut v = d.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        };
        Ok(Self {
            p,
            d1: norm(d1),
            d2: norm(d2),
        })
    }

    fn from_masks(p: usize, a: u64, b: u64) -> Self {
        Self {
            p,
            d1: mask_elements(a),
            d2: mask_elements(b),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d1(&self) -> &[usize] {
        &self.d1
    }

    pub fn d2(&self) -> &[usize] {
        &self.d2
    }

    pub fn ones_count(&self) -> usize {
        (self.d1.len() + self.d2.len()) * self.p
    }

    /// Quadratic residues mod 11 and their complement.
    pub fn quadratic_residues_11() -> Self {
        Self::new(11, &[1, 3, 4, 5, 9], &[0, 2, 6, 7, 8, 10]).unwrap()
    }
}

fn mask_elements(mask: u64) -> Vec<usize> {
    (0..64).filter(|b| mask >> b & 1 == 1).collect()
}

fn to_mask(shifts: &[usize]) -> u64 {
    shifts.iter().fold(0, |m, &d| m | 1u64 << d)
}

/// `p x 2p` matrix: the `d1` circulant in columns `[0, p)` and the `d2`
/// circulant in columns `[p, 2p)`.
pub fn two_block_circulant(pair: &ShiftSetPair) -> BinaryMatrix {
    let p = pair.p;
    let mut mat = BinaryMatrix::zeros(p, 2 * p);
    for i in 0..p {
        for &d in &pair.d1 {
            mat.set(i, (i + d) % p, true);
        }
        for &d in &pair.d2 {
            mat.set(i, p + (i + d) % p, true);
        }
    }
    mat
}

/// Intersection profile of a shift set: for every `(s-1)`-set of distinct
/// nonzero offsets, the size of `D` intersected with its translates.
struct Profiler {
    p: usize,
    full: u64,
    combos: Vec<Vec<usize>>,
}

impl Profiler {
    fn new(p: usize, s: usize) -> Self {
        let offsets: Vec<usize> = (1..p).collect();
        let mut combos = Vec::new();
        fn go(from: usize, k: usize, src: &[usize], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in from..src.len() {
                cur.push(src[i]);
                go(i + 1, k, src, cur, out);
                cur.pop();
            }
        }
        if s - 1 <= offsets.len() {
            go(0, s - 1, &offsets, &mut Vec::new(), &mut combos);
        }
        let full = if p == 64 { u64::MAX } else { (1u64 << p) - 1 };
        Self { p, full, combos }
    }

    fn rotate(&self, mask: u64, by: usize) -> u64 {
        if by == 0 {
            return mask;
        }
        ((mask << by) | (mask >> (self.p - by))) & self.full
    }

    fn profile(&self, mask: u64) -> Vec<u8> {
        self.combos
            .iter()
            .map(|combo| {
                combo
                    .iter()
                    .fold(mask, |acc, &d| acc & self.rotate(mask, d))
                    .count_ones() as u8
            })
            .collect()
    }
}

fn profiles_fit(a: &[u8], b: &[u8], limit: usize) -> bool {
    a.iter().zip(b).all(|(&x, &y)| x as usize + y as usize <= limit)
}

/// Whether the assembled two-block circulant is K_{s,t}-free, decided from
/// the shift sets alone: any `s` rows share `sum over blocks of
/// |D ∩ (D+δ_1) ∩ ... ∩ (D+δ_{s-1})|` columns.
pub fn circulant_pair_valid(pair: &ShiftSetPair, s: usize, t: usize) -> bool {
    if pair.p > 64 || s == 0 || t == 0 {
        let params = ZarParams::new(pair.p, 2 * pair.p, s.max(1), t.max(1)).unwrap();
        return is_valid(&two_block_circulant(pair), &params);
    }
    let prof = Profiler::new(pair.p, s);
    profiles_fit(
        &prof.profile(to_mask(&pair.d1)),
        &prof.profile(to_mask(&pair.d2)),
        t - 1,
    )
}

pub const MAX_ENUMERATION_MODULUS: usize = 13;

/// A shift set as sorted elements, bitmask and intersection profile.
type Candidate = (Vec<usize>, u64, Vec<u8>);

/// Finds a two-block circulant pair over `Z_p` with the most ones.
///
/// Ties are broken towards the smallest `(|d1|, |d2|)`, then the
/// lexicographically smallest `d1`, then `d2`. Because rotating `d1` only
/// permutes columns, `d1` is restricted to sets containing 0 (or empty).
pub fn enumerate_two_block_circulant(p: usize, s: usize, t: usize) -> Result<(ShiftSetPair, usize)> {
    if p == 0 || s == 0 || t == 0 {
        return Err(Error::InvalidParams("p, s and t must be positive".into()));
    }
    if p > MAX_ENUMERATION_MODULUS {
        return Err(Error::ResourceGuard(format!(
            "circulant enumeration supports p <= {MAX_ENUMERATION_MODULUS}, got {p}"
        )));
    }
    let prof = Profiler::new(p, s);
    let limit = t - 1;
    // Sets that are feasible on their own, bucketed by size and sorted by
    // their element lists.
    let mut by_size: Vec<Vec<Candidate>> = vec![Vec::new(); p + 1];
    for mask in 0u64..(1u64 << p) {
        let profile = prof.profile(mask);
        if profile.iter().all(|&c| c as usize <= limit) {
            by_size[mask.count_ones() as usize].push((mask_elements(mask), mask, profile));
        }
    }
    for bucket in &mut by_size {
        bucket.sort_by(|a, b| a.0.cmp(&b.0));
    }
    for total in (0..=2 * p).rev() {
        for a in total.saturating_sub(p)..=total.min(p) {
            let b = total - a;
            for (_, m1, p1) in by_size[a].iter().filter(|e| e.1 & 1 == 1 || e.1 == 0) {
                if let Some((_, m2, _)) = by_size[b].iter().find(|e| profiles_fit(p1, &e.2, limit)) {
                    let pair = ShiftSetPair::from_masks(p, *m1, *m2);
                    let ones = pair.ones_count();
                    return Ok((pair, ones));
                }
            }
        }
    }
    unreachable!("the empty pair is always feasible")
}

/// Order in which zero cells are offered to the greedy fill.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "order", content = "seed")]
pub enum FillPolicy {
    RowMajor,
    ReverseRowMajor,
    Shuffled(u64),
    /// Cells of the emptiest rows first; passes repeat until nothing changes.
    SparsestRowFirst,
}

impl FillPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            FillPolicy::RowMajor => "row-major",
            FillPolicy::ReverseRowMajor => "reverse-row-major",
            FillPolicy::Shuffled(_) => "shuffled",
            FillPolicy::SparsestRowFirst => "sparsest-row-first",
        }
    }
}

/// Sets every zero cell of `order` that keeps `mat` valid. Returns how many
/// were set.
pub(crate) fn fill_in_order(mat: &mut BinaryMatrix, params: &ZarParams, order: &[(usize, usize)]) -> usize {
    let mut added = 0;
    for &(i, j) in order {
        if !mat.get(i, j) && can_add_unchecked(mat, i, j, params.s(), params.t()) {
            mat.set(i, j, true);
            added += 1;
        }
    }
    added
}

pub(crate) fn row_major(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect()
}

/// Extends a valid matrix to a maximal one: afterwards no zero cell can be
/// set without creating an all-ones `s x t` block.
pub fn greedy_fill(mat: &BinaryMatrix, params: &ZarParams, policy: FillPolicy) -> Result<BinaryMatrix> {
    mat.matches(params)?;
    if let Some(w) = find_witness(mat, params) {
        return Err(Error::InvalidMatrix(w));
    }
    let mut out = mat.clone();
    let (rows, cols) = mat.dims();
    match policy {
        FillPolicy::RowMajor => {
            fill_in_order(&mut out, params, &row_major(rows, cols));
        }
        FillPolicy::ReverseRowMajor => {
            let mut order = row_major(rows, cols);
            order.reverse();
            fill_in_order(&mut out, params, &order);
        }
        FillPolicy::Shuffled(seed) => {
            let mut order = row_major(rows, cols);
            RngStream::new(seed).shuffle(&mut order);
            fill_in_order(&mut out, params, &order);
        }
        FillPolicy::SparsestRowFirst => loop {
            let degrees = out.row_degrees();
            let mut cells = out.zero_positions();
            cells.sort_by_key(|&(i, j)| (degrees[i], i, j));
            if fill_in_order(&mut out, params, &cells) == 0 {
                break;
            }
        },
    }
    Ok(out)
}

/// Circulant on `Z_11` plus one extra row, filled greedily with full
/// validity checks: row 11 left to right, then a row-major pass, then a
/// reverse pass.
pub fn build_12_22() -> BinaryMatrix {
    let params = ZarParams::new(12, 22, 3, 3).unwrap();
    let mut g = BinaryMatrix::new(&params);
    g.paste(&two_block_circulant(&ShiftSetPair::quadratic_residues_11()), 0, 0);

    let try_set = |g: &mut BinaryMatrix, i: usize, j: usize| {
        if !g.get(i, j) {
            g.set(i, j, true);
            if !is_valid(g, &params) {
                g.set(i, j, false);
            }
        }
    };
    for j in 0..22 {
        try_set(&mut g, 11, j);
    }
    for i in 0..12 {
        for j in 0..22 {
            try_set(&mut g, i, j);
        }
    }
    for i in (0..12).rev() {
        for j in (0..22).rev() {
            try_set(&mut g, i, j);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validator::can_add;

    fn p3(m: usize, n: usize) -> ZarParams {
        ZarParams::new(m, n, 3, 3).unwrap()
    }

    #[test]
    fn seed_bank_contents() {
        for ((m, n), ones) in [((8, 23), 94), ((9, 22), 97), ((11, 21), 111), ((16, 15), 123), ((16, 16), 119)] {
            let mat = seed_bank(m, n).unwrap();
            assert_eq!(mat.count_ones(), ones);
            assert!(is_valid(&mat, &p3(m, n)));
        }
        assert!(seed_bank(5, 5).is_none());
        let bank = SeedBank::builtin();
        assert_eq!(bank.entries().len(), 5);
        assert_eq!(bank.get(16, 16).unwrap().count_ones(), 119);
    }

    #[test]
    fn fixture_names() {
        assert_eq!(parse_fixture_name("z_11x21_116.mat"), Some((11, 21, 116)));
        assert_eq!(parse_fixture_name("z_11x21.mat"), None);
        assert_eq!(parse_fixture_name("x_1x1_1.mat"), None);
    }

    #[test]
    fn load_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = seed_bank(8, 23).unwrap();
        fs::write(dir.path().join(fixture_name(&m)), crate::matrix::serialize_matrix(&m)).unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let bank = SeedBank::load_dir(dir.path()).unwrap();
        assert_eq!(bank.get(8, 23), Some(&m));
        fs::write(dir.path().join("z_8x23_95.mat"), crate::matrix::serialize_matrix(&m)).unwrap();
        assert!(SeedBank::load_dir(dir.path()).is_err());
    }

    #[test]
    fn circulant_blocks() {
        let qr = circulant_block(11, &[1, 3, 4, 5, 9]).unwrap();
        assert_eq!(qr.count_ones(), 55);
        assert!(qr.row_degrees().iter().all(|&d| d == 5));
        assert!(qr.transpose().row_degrees().iter().all(|&d| d == 5));
        assert_eq!(circulant_block(3, &[]).unwrap(), BinaryMatrix::zeros(3, 3));
        assert_eq!(circulant_block(3, &[0, 1, 2]).unwrap(), BinaryMatrix::ones(3, 3));
        assert!(matches!(circulant_block(3, &[3]), Err(Error::ShiftOutOfRange { shift: 3, modulus: 3 })));
    }

    #[test]
    fn two_block_cases() {
        let qr = ShiftSetPair::quadratic_residues_11();
        let mat = two_block_circulant(&qr);
        assert_eq!(mat.dims(), (11, 22));
        assert_eq!(mat.count_ones(), 121);
        assert_eq!(qr.ones_count(), 121);
        assert!(is_valid(&mat, &p3(11, 22)));
        assert!(circulant_pair_valid(&qr, 3, 3));
        let empty = ShiftSetPair::new(5, &[], &[]).unwrap();
        assert_eq!(two_block_circulant(&empty), BinaryMatrix::zeros(5, 10));
        assert!(circulant_pair_valid(&empty, 3, 3));
        let full = ShiftSetPair::new(3, &[0, 1, 2], &[]).unwrap();
        assert!(!circulant_pair_valid(&full, 3, 3));
    }

    /// Independent check of the QR pair: brute-force triple intersections
    /// over all 45 offset pairs.
    #[test]
    fn quadratic_residue_triples_brute_force() {
        let d1 = [1usize, 3, 4, 5, 9];
        let d2 = [0usize, 2, 6, 7, 8, 10];
        let count = |d: &[usize], a: usize, b: usize| {
            (0..11)
                .filter(|x| d.contains(x) && d.contains(&((x + 11 - a) % 11)) && d.contains(&((x + 11 - b) % 11)))
                .count()
        };
        let mut pairs = 0;
        for a in 1..11 {
            for b in a + 1..11 {
                pairs += 1;
                assert!(count(&d1, a, b) + count(&d2, a, b) <= 2);
            }
        }
        assert_eq!(pairs, 45);
    }

    #[test]
    fn profile_agrees_with_validator_exhaustively() {
        for p in 1..=7usize {
            for s in 1..=3 {
                for t in 1..=3 {
                    let params = ZarParams::new(p, 2 * p, s, t).unwrap();
                    for a in 0u64..(1 << p) {
                        for b in 0u64..(1 << p) {
                            let pair = ShiftSetPair::from_masks(p, a, b);
                            assert_eq!(
                                circulant_pair_valid(&pair, s, t),
                                is_valid(&two_block_circulant(&pair), &params),
                                "p={p} s={s} t={t} {pair:?}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn profile_agrees_with_validator_random_p11() {
        let mut rng = RngStream::new(11);
        let params = p3(11, 22);
        for _ in 0..200 {
            let a = rng.next_below(1 << 11).unwrap();
            let b = rng.next_below(1 << 11).unwrap();
            let pair = ShiftSetPair::from_masks(11, a, b);
            assert_eq!(circulant_pair_valid(&pair, 3, 3), is_valid(&two_block_circulant(&pair), &params));
        }
    }

    /// Naive enumeration over all pairs, no rotation normalization.
    fn naive_best(p: usize, s: usize, t: usize) -> usize {
        let params = ZarParams::new(p, 2 * p, s, t).unwrap();
        let mut best = 0;
        for a in 0u64..(1 << p) {
            for b in 0u64..(1 << p) {
                let mat = two_block_circulant(&ShiftSetPair::from_masks(p, a, b));
                if is_valid(&mat, &params) {
                    best = best.max(mat.count_ones());
                }
            }
        }
        best
    }

    #[test]
    fn enumeration_small_moduli() {
        let (pair, ones) = enumerate_two_block_circulant(2, 3, 3).unwrap();
        assert_eq!(ones, 8);
        assert_eq!(two_block_circulant(&pair), BinaryMatrix::ones(2, 4));
        let (_, ones) = enumerate_two_block_circulant(3, 3, 3).unwrap();
        assert!(ones < 18);
        assert_eq!(ones, 12);
        for p in 1..=5 {
            for (s, t) in [(2, 2), (3, 3), (2, 3)] {
                let (pair, ones) = enumerate_two_block_circulant(p, s, t).unwrap();
                assert_eq!(ones, naive_best(p, s, t), "p={p} s={s} t={t}");
                let params = ZarParams::new(p, 2 * p, s, t).unwrap();
                assert!(is_valid(&two_block_circulant(&pair), &params));
            }
        }
        assert!(matches!(enumerate_two_block_circulant(14, 3, 3), Err(Error::ResourceGuard(_))));
    }

    #[test]
    fn greedy_fill_small() {
        let q = p3(3, 3);
        let out = greedy_fill(&BinaryMatrix::zeros(3, 3), &q, FillPolicy::RowMajor).unwrap();
        assert_eq!(out.count_ones(), 8);
        assert!(!out.get(2, 2));
        let rev = greedy_fill(&BinaryMatrix::zeros(3, 3), &q, FillPolicy::ReverseRowMajor).unwrap();
        assert!(!rev.get(0, 0) && rev.count_ones() == 8);
        assert!(matches!(
            greedy_fill(&BinaryMatrix::ones(3, 3), &q, FillPolicy::RowMajor),
            Err(Error::InvalidMatrix(_))
        ));
    }

    #[test]
    fn greedy_fill_maximal_and_superset() {
        let q = p3(8, 23);
        let fixture = seed_bank(8, 23).unwrap();
        assert_eq!(greedy_fill(&fixture, &q, FillPolicy::SparsestRowFirst).unwrap(), fixture);
        let mut rng = RngStream::new(3);
        for policy in [
            FillPolicy::RowMajor,
            FillPolicy::ReverseRowMajor,
            FillPolicy::Shuffled(17),
            FillPolicy::SparsestRowFirst,
        ] {
            for _ in 0..5 {
                let q = p3(7, 12);
                let mut start = BinaryMatrix::zeros(7, 12);
                for _ in 0..10 {
                    let (i, j) = (rng.index(7), rng.index(12));
                    if !start.get(i, j) && can_add(&start, i, j, &q).unwrap() {
                        start.set(i, j, true);
                    }
                }
                let out = greedy_fill(&start, &q, policy).unwrap();
                assert!(is_valid(&out, &q));
                assert!(start.is_subset_of(&out));
                for (i, j) in out.zero_positions() {
                    assert!(!can_add(&out, i, j, &q).unwrap());
                }
            }
        }
    }

    #[test]
    fn twelve_by_twenty_two() {
        let g = build_12_22();
        assert_eq!(g.count_ones(), 132);
        assert!(is_valid(&g, &p3(12, 22)));
        let base = two_block_circulant(&ShiftSetPair::quadratic_residues_11());
        assert!(base.row_degrees().iter().all(|&d| d == 11));
        assert_eq!(build_12_22(), g);
    }
}
