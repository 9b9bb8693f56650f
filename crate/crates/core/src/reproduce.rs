//! Ported reproduction pipelines for the seven documented `s = t = 3` cases.

use std::fmt;
use std::str::FromStr;

use crate::constructions::{build_12_22, enumerate_two_block_circulant, greedy_fill, two_block_circulant, FillPolicy, SeedBank};
use crate::error::{Error, Result};
use crate::local_search::{plateau_hill_climb, ripup_repair_search, RipupConfig};
use crate::matrix::{BinaryMatrix, ZarParams};
use crate::rng::RngStream;
use crate::validator::is_valid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Case {
    Z11x21,
    Z11x22,
    Z12x22,
    Z8x23,
    Z9x22,
    Z16x15,
    Z16x16,
}

impl Case {
    pub const ALL: [Case; 7] = [
        Case::Z11x21,
        Case::Z11x22,
        Case::Z12x22,
        Case::Z8x23,
        Case::Z9x22,
        Case::Z16x15,
        Case::Z16x16,
    ];

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Case::Z11x21 => (11, 21),
            Case::Z11x22 => (11, 22),
            Case::Z12x22 => (12, 22),
            Case::Z8x23 => (8, 23),
            Case::Z9x22 => (9, 22),
            Case::Z16x15 => (16, 15),
            Case::Z16x16 => (16, 16),
        }
    }

    pub fn params(&self) -> ZarParams {
        let (m, n) = self.dims();
        ZarParams::new(m, n, 3, 3).expect("positive dimensions")
    }

    /// Ones count the pipeline has to reach.
    pub fn target(&self) -> usize {
        match self {
            Case::Z11x21 => 116,
            Case::Z11x22 => 121,
            Case::Z12x22 => 132,
            Case::Z8x23 => 94,
            Case::Z9x22 => 97,
            Case::Z16x15 => 123,
            Case::Z16x16 => 119,
        }
    }

    /// Seeds tried in order by the randomized pipelines; empty for the
    /// deterministic ones.
    pub fn documented_seeds(&self) -> &'static [u64] {
        match self {
            Case::Z11x21 => &[0, 1, 2, 3, 4],
            Case::Z9x22 => &[31415, 31416, 31417, 31418, 31419],
            Case::Z16x16 => &[200, 300, 400, 500, 600],
            _ => &[],
        }
    }

    pub fn is_randomized(&self) -> bool {
        !self.documented_seeds().is_empty()
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (m, n) = self.dims();
        write!(f, "{m}x{n}")
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown case `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct ReproduceOptions {
    /// Replaces the documented seeds with this single seed.
    pub seed: Option<u64>,
    pub threads: usize,
    pub bank: SeedBank,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            seed: None,
            threads: 1,
            bank: SeedBank::builtin(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Reproduction {
    pub case: Case,
    pub matrix: BinaryMatrix,
    pub ones: usize,
    pub valid: bool,
    /// Seed of the attempt that produced `matrix`, for randomized cases.
    pub seed: Option<u64>,
    pub attempts: usize,
}

impl Reproduction {
    pub fn met(&self) -> bool {
        self.valid && self.ones >= self.case.target()
    }
}

fn bank_seed(bank: &SeedBank, case: Case) -> Result<BinaryMatrix> {
    let (m, n) = case.dims();
    bank.get(m, n)
        .cloned()
        .ok_or_else(|| Error::InvalidConfig(format!("seed bank has no {case} matrix")))
}

fn run_attempt(case: Case, seed: u64, options: &ReproduceOptions) -> Result<BinaryMatrix> {
    let params = case.params();
    let target = Some(case.target());
    match case {
        Case::Z11x21 => {
            let config = RipupConfig {
                target,
                seed,
                threads: options.threads,
                ..RipupConfig::standard()
            };
            Ok(ripup_repair_search(&bank_seed(&options.bank, case)?, &params, &config)?.best)
        }
        Case::Z16x16 => {
            let config = RipupConfig {
                restarts: 100,
                k_min: 2,
                k_max: 7,
                improve_iters: 0,
                target,
                seed,
                fill_policy: FillPolicy::Shuffled(seed),
                threads: options.threads,
            };
            Ok(ripup_repair_search(&bank_seed(&options.bank, case)?, &params, &config)?.best)
        }
        Case::Z9x22 => {
            let base = bank_seed(&options.bank, case)?;
            let mut rng = RngStream::new(seed);
            let mut best = greedy_fill(&base, &params, FillPolicy::SparsestRowFirst)?;
            for _ in 0..20 {
                if best.count_ones() >= case.target() {
                    break;
                }
                let cols = rng.permutation(params.n());
                let rows: Vec<usize> = (0..params.m()).collect();
                let start = base.permute(&rows, &cols)?;
                let found = plateau_hill_climb(&start, &params, 2000, (2, 9), target, &mut rng)?;
                if found.best_ones > best.count_ones() {
                    best = found.best;
                }
            }
            Ok(best)
        }
        _ => deterministic(case, options),
    }
}

fn deterministic(case: Case, options: &ReproduceOptions) -> Result<BinaryMatrix> {
    let params = case.params();
    match case {
        Case::Z11x22 => {
            let (pair, _) = enumerate_two_block_circulant(11, 3, 3)?;
            Ok(two_block_circulant(&pair))
        }
        Case::Z12x22 => Ok(build_12_22()),
        _ => greedy_fill(&bank_seed(&options.bank, case)?, &params, FillPolicy::RowMajor),
    }
}

/// Runs the pipeline for `case`. Randomized cases try their seeds in order
/// and stop at the first one that meets the target; the best valid result
/// over all attempts is returned either way.
pub fn reproduce(case: Case, options: &ReproduceOptions) -> Result<Reproduction> {
    let params = case.params();
    if !case.is_randomized() {
        let matrix = deterministic(case, options)?;
        return Ok(Reproduction {
            case,
            ones: matrix.count_ones(),
            valid: is_valid(&matrix, &params),
            matrix,
            seed: None,
            attempts: 1,
        });
    }
    let seeds: Vec<u64> = match options.seed {
        Some(s) => vec![s],
        None => case.documented_seeds().to_vec(),
    };
    let mut best: Option<Reproduction> = None;
    for (i, &seed) in seeds.iter().enumerate() {
        let matrix = run_attempt(case, seed, options)?;
        let attempt = Reproduction {
            case,
            ones: matrix.count_ones(),
            valid: is_valid(&matrix, &params),
            matrix,
            seed: Some(seed),
            attempts: i + 1,
        };
        let better = best
            .as_ref()
            .is_none_or(|b| (attempt.valid, attempt.ones) > (b.valid, b.ones));
        if better {
            best = Some(attempt);
        }
        if let Some(b) = best.as_mut() {
            b.attempts = i + 1;
            if b.met() {
                break;
            }
        }
    }
    Ok(best.expect("at least one seed"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for case in Case::ALL {
            assert_eq!(case.to_string().parse::<Case>().unwrap(), case);
            assert_eq!(case.params().dims(), case.dims());
        }
        assert!("11x23".parse::<Case>().is_err());
    }

    #[test]
    fn deterministic_cases_meet_targets() {
        let options = ReproduceOptions::default();
        for case in [Case::Z11x22, Case::Z12x22, Case::Z8x23, Case::Z16x15] {
            let r = reproduce(case, &options).unwrap();
            assert!(r.met(), "{case}: {}", r.ones);
            assert_eq!(r.ones, case.target());
            assert_eq!(r.seed, None);
        }
    }

    #[test]
    fn randomized_cases_meet_targets() {
        let options = ReproduceOptions::default();
        for case in [Case::Z9x22, Case::Z16x16, Case::Z11x21] {
            let r = reproduce(case, &options).unwrap();
            assert!(r.met(), "{case}: {}", r.ones);
            assert!(r.attempts <= 5);
        }
    }

    #[test]
    fn explicit_seed_overrides_list() {
        let options = ReproduceOptions {
            seed: Some(7),
            ..ReproduceOptions::default()
        };
        let r = reproduce(Case::Z11x21, &options).unwrap();
        assert_eq!(r.seed, Some(7));
        assert_eq!(r.attempts, 1);
        assert!(r.valid && r.ones >= 111);
    }
}
