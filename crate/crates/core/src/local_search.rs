//! Randomized ripup-and-repair with restarts.
//!
//! Each restart starts again from the seed matrix: a random batch of ones is
//! cleared, the matrix is greedily refilled, and then exchange sweeps trade a
//! single one for two new ones until a sweep finds nothing. Restarts draw
//! from independent streams, so they may run in parallel; the reduction
//! replays them in index order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::{fill_in_order, greedy_fill, row_major, FillPolicy};
use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, ZarParams};
use crate::rng::{restart_seed, RngStream};
use crate::validator::{can_add_unchecked, find_witness, is_valid};

fn default_threads() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RipupConfig {
    pub restarts: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub improve_iters: usize,
    #[serde(default)]
    pub target: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub fill_policy: FillPolicy,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl RipupConfig {
    /// 300 restarts, 3 to 12 ones ripped up, at most 200 exchange sweeps.
    pub fn standard() -> Self {
        Self {
            restarts: 300,
            k_min: 3,
            k_max: 12,
            improve_iters: 200,
            target: None,
            seed: 0,
            fill_policy: FillPolicy::Shuffled(0),
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= k_min <= k_max, got k_min = {}, k_max = {}",
                self.k_min, self.k_max
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchResult {
    pub best: BinaryMatrix,
    pub best_ones: usize,
    pub restarts_used: usize,
    pub hit_target: bool,
}

impl SearchResult {
    fn new(best: BinaryMatrix, restarts_used: usize, target: Option<usize>) -> Self {
        let best_ones = best.count_ones();
        Self {
            hit_target: target.is_some_and(|t| best_ones >= t),
            best,
            best_ones,
            restarts_used,
        }
    }
}

/// Clears `k` ones chosen uniformly at random.
pub fn ripup(mat: &BinaryMatrix, k: usize, rng: &mut RngStream) -> Result<BinaryMatrix> {
    let mut ones = mat.ones_positions();
    if k > ones.len() {
        return Err(Error::RipupTooLarge { k, ones: ones.len() });
    }
    rng.shuffle(&mut ones);
    let mut out = mat.clone();
    for &(i, j) in &ones[..k] {
        out.set(i, j, false);
    }
    Ok(out)
}

/// One pass of remove-one/add-two exchanges followed by a row-major fill.
///
/// Every one of the input is tried in random order: it is cleared and up to
/// two zero cells (the cleared cell included) are set in random order while
/// validity permits. The exchange is kept only if two cells went in.
pub fn one_out_two_in_sweep(mat: &BinaryMatrix, params: &ZarParams, rng: &mut RngStream) -> (BinaryMatrix, bool) {
    let (s, t) = (params.s(), params.t());
    let mut g = mat.clone();
    let mut ones = g.ones_positions();
    rng.shuffle(&mut ones);
    let mut improved = false;
    let mut added = Vec::with_capacity(2);
    for (oi, oj) in ones {
        g.set(oi, oj, false);
        let mut zeros = g.zero_positions();
        added.clear();
        // Lazy Fisher-Yates: only as much of the order as is examined.
        for k in 0..zeros.len() {
            let pick = k + rng.index(zeros.len() - k);
            zeros.swap(k, pick);
            let (ni, nj) = zeros[k];
            if can_add_unchecked(&g, ni, nj, s, t) {
                g.set(ni, nj, true);
                added.push((ni, nj));
                if added.len() == 2 {
                    break;
                }
            }
        }
        if added.len() == 2 {
            improved = true;
        } else {
            for &(ai, aj) in &added {
                g.set(ai, aj, false);
            }
            g.set(oi, oj, true);
        }
    }
    let order = row_major(g.rows(), g.cols());
    fill_in_order(&mut g, params, &order);
    (g, improved)
}

/// Plateau-accepting hill-climb rule: keep a candidate that is no worse.
pub fn accept_rule_sa(current_ones: usize, candidate_ones: usize) -> bool {
    candidate_ones >= current_ones
}

fn run_restart(seed: &BinaryMatrix, params: &ZarParams, config: &RipupConfig, restart: usize) -> BinaryMatrix {
    let mut rng = RngStream::new(restart_seed(config.seed, restart as u64));
    let ones = seed.count_ones();
    let k = if config.k_min >= ones {
        ones
    } else {
        rng.range_inclusive(config.k_min as u64, config.k_max.min(ones) as u64) as usize
    };
    let g = ripup(seed, k, &mut rng).expect("k bounded by ones");
    let policy = match config.fill_policy {
        FillPolicy::Shuffled(_) => FillPolicy::Shuffled(rng.next_u64()),
        other => other,
    };
    let mut g = greedy_fill(&g, params, policy).expect("ripup keeps validity");
    for _ in 0..config.improve_iters {
        let (next, improved) = one_out_two_in_sweep(&g, params, &mut rng);
        g = next;
        if !improved {
            break;
        }
    }
    g
}

/// Restarted ripup-and-repair from `seed_matrix`.
///
/// The result is never worse than the seed. When `config.target` is set the
/// run stops after the first restart (in index order) that reaches it.
pub fn ripup_repair_search(
    seed_matrix: &BinaryMatrix,
    params: &ZarParams,
    config: &RipupConfig,
) -> Result<SearchResult> {
    seed_matrix.matches(params)?;
    config.validate()?;
    if let Some(w) = find_witness(seed_matrix, params) {
        return Err(Error::InvalidMatrix(w));
    }
    if params.is_degenerate() {
        return Ok(SearchResult::new(BinaryMatrix::ones(params.m(), params.n()), 0, config.target));
    }
    let mut best = seed_matrix.clone();
    let mut best_ones = best.count_ones();
    let reached = |ones: usize| config.target.is_some_and(|t| ones >= t);
    if reached(best_ones) || config.restarts == 0 {
        return Ok(SearchResult::new(best, 0, config.target));
    }
    let chunk = config.threads.max(1);
    let mut next = 0;
    while next < config.restarts {
        let end = (next + chunk).min(config.restarts);
        let outcomes: Vec<BinaryMatrix> = if chunk == 1 {
            vec![run_restart(seed_matrix, params, config, next)]
        } else {
            (next..end)
                .into_par_iter()
                .map(|r| run_restart(seed_matrix, params, config, r))
                .collect()
        };
        for (offset, g) in outcomes.into_iter().enumerate() {
            let count = g.count_ones();
            if count > best_ones && is_valid(&g, params) {
                best_ones = count;
                best = g;
                if reached(best_ones) {
                    return Ok(SearchResult::new(best, next + offset + 1, config.target));
                }
            }
        }
        next = end;
    }
    Ok(SearchResult::new(best, config.restarts, config.target))
}

/// Plateau hill climb: repeatedly rip up a few ones from the current matrix,
/// refill sparsest rows first, and move whenever the result is no smaller.
pub fn plateau_hill_climb(
    start: &BinaryMatrix,
    params: &ZarParams,
    trials: usize,
    k_range: (usize, usize),
    target: Option<usize>,
    rng: &mut RngStream,
) -> Result<SearchResult> {
    if k_range.0 > k_range.1 {
        return Err(Error::InvalidConfig("empty ripup range".into()));
    }
    let mut current = greedy_fill(start, params, FillPolicy::SparsestRowFirst)?;
    let mut cur_ones = current.count_ones();
    let mut best = current.clone();
    let mut used = 0;
    while used < trials && !target.is_some_and(|t| best.count_ones() >= t) {
        used += 1;
        let k = (rng.range_inclusive(k_range.0 as u64, k_range.1 as u64) as usize).min(cur_ones);
        let cand = greedy_fill(&ripup(&current, k, rng)?, params, FillPolicy::SparsestRowFirst)?;
        let c = cand.count_ones();
        if c > best.count_ones() {
            best = cand.clone();
        }
        if accept_rule_sa(cur_ones, c) {
            current = cand;
            cur_ones = c;
        }
    }
    Ok(SearchResult::new(best, used, target))
}
