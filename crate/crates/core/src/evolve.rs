//! Phase-scheduled evolutionary search over construction strategies.
//!
//! Candidates are structured strategy configurations rather than program
//! text. Each iteration selects a parent by tournament, mutates it through a
//! named backend, runs it to obtain a primary and a prospect matrix, scores
//! the pair, and appends the child to the population. Phases run for a fixed
//! number of iterations and write a checkpoint every `checkpoint_every`
//! iterations; after the base phases, extra phases run for as long as the
//! last phase improved the best valid count and the known upper bound is not
//! yet matched.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constructions::{greedy_fill, two_block_circulant, FillPolicy, SeedBank, ShiftSetPair};
use crate::error::{Error, Result};
use crate::local_search::{ripup_repair_search, RipupConfig};
use crate::matrix::{BinaryMatrix, MatrixFile, ZarParams};
use crate::rng::{splitmix64, RngStream};
use crate::scoring::{score_candidate, CandidateScore, SotaTracker};
use crate::validator::{cell_checks, is_valid};

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenomeKind {
    ExplicitSeed,
    Circulant,
    Greedy,
    RipupRepair,
    Pipeline,
}

impl GenomeKind {
    pub const ALL: [GenomeKind; 5] = [
        GenomeKind::ExplicitSeed,
        GenomeKind::Circulant,
        GenomeKind::Greedy,
        GenomeKind::RipupRepair,
        GenomeKind::Pipeline,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GenomeKind::ExplicitSeed => "explicit-seed",
            GenomeKind::Circulant => "circulant",
            GenomeKind::Greedy => "greedy",
            GenomeKind::RipupRepair => "ripup-repair",
            GenomeKind::Pipeline => "pipeline",
        }
    }
}

impl fmt::Display for GenomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Choice(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParamRule {
    Int { min: i64, max: i64, default: i64 },
    /// A set of shifts over `Z_p` encoded as a bitmask of `bits` bits.
    Mask { bits: u32, default: i64 },
    Choice { options: &'static [&'static str], default: &'static str },
}

impl ParamRule {
    fn default_value(&self) -> ParamValue {
        match self {
            ParamRule::Int { default, .. } | ParamRule::Mask { default, .. } => ParamValue::Int(*default),
            ParamRule::Choice { default, .. } => ParamValue::Choice(default.to_string()),
        }
    }

    fn admits(&self, value: &ParamValue) -> bool {
        match (self, value) {
            (ParamRule::Int { min, max, .. }, ParamValue::Int(v)) => (min..=max).contains(&v),
            (ParamRule::Mask { bits, .. }, ParamValue::Int(v)) => *v >= 0 && (*v as u64) >> bits == 0,
            (ParamRule::Choice { options, .. }, ParamValue::Choice(c)) => options.contains(&c.as_str()),
            _ => false,
        }
    }

    /// Closest admissible value, or the default when the types differ.
    fn coerce(&self, value: &ParamValue) -> ParamValue {
        match (self, value) {
            (ParamRule::Int { min, max, .. }, ParamValue::Int(v)) => ParamValue::Int((*v).clamp(*min, *max)),
            (ParamRule::Mask { bits, .. }, ParamValue::Int(v)) if *v >= 0 => {
                ParamValue::Int(((*v as u64) & mask_of(*bits)) as i64)
            }
            _ if self.admits(value) => value.clone(),
            _ => self.default_value(),
        }
    }
}

fn mask_of(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

const FILL_CHOICES: &[&str] = &["none", "row-major", "reverse-row-major", "shuffled", "sparsest-row-first"];
const PROSPECT_CHOICES: &[&str] = &["copy", "permuted", "densified"];
const BASE_CHOICES: &[&str] = &["seed-bank", "circulant"];

/// Modulus of the circulant used for an `m x n` instance; the `p x 2p`
/// construction is cropped to `m x n`.
pub fn circulant_modulus(params: &ZarParams) -> usize {
    params.m().max(params.n().div_ceil(2)).min(62)
}

/// Parameter schema for `kind` on `params`.
pub fn schema(kind: GenomeKind, params: &ZarParams) -> Vec<(&'static str, ParamRule)> {
    let bits = circulant_modulus(params) as u32;
    let fill = ("fill", ParamRule::Choice { options: FILL_CHOICES, default: "none" });
    let fill_seed = ("fill_seed", ParamRule::Int { min: 0, max: 1 << 31, default: 0 });
    let prospect = ("prospect", ParamRule::Choice { options: PROSPECT_CHOICES, default: "copy" });
    let d1 = ("d1", ParamRule::Mask { bits, default: 1 });
    let d2 = ("d2", ParamRule::Mask { bits, default: 0 });
    let search = [
        ("restarts", ParamRule::Int { min: 1, max: 300, default: 20 }),
        ("k_min", ParamRule::Int { min: 1, max: 32, default: 3 }),
        ("k_max", ParamRule::Int { min: 1, max: 32, default: 8 }),
        ("improve_iters", ParamRule::Int { min: 0, max: 200, default: 50 }),
        ("search_seed", ParamRule::Int { min: 0, max: 1 << 31, default: 0 }),
    ];
    let mut out = match kind {
        GenomeKind::ExplicitSeed => vec![fill, fill_seed],
        GenomeKind::Circulant => vec![d1, d2, fill, fill_seed],
        GenomeKind::Greedy => vec![
            ("fill", ParamRule::Choice { options: &FILL_CHOICES[1..], default: "row-major" }),
            fill_seed,
        ],
        GenomeKind::RipupRepair => {
            let mut v = vec![("base", ParamRule::Choice { options: BASE_CHOICES, default: "seed-bank" }), d1, d2];
            v.extend(search.iter().cloned());
            v
        }
        GenomeKind::Pipeline => {
            let mut v = vec![
                d1,
                d2,
                ("fill", ParamRule::Choice { options: &FILL_CHOICES[1..], default: "row-major" }),
                fill_seed,
            ];
            v.extend(search.iter().cloned());
            v
        }
    };
    out.push(prospect);
    out
}

/// A construction strategy: a kind plus its named settings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyGenome {
    pub kind: GenomeKind,
    pub params: BTreeMap<String, ParamValue>,
}

impl StrategyGenome {
    /// A genome of `kind` with every parameter at its default.
    pub fn with_defaults(kind: GenomeKind, params: &ZarParams) -> Self {
        let params_map = schema(kind, params)
            .into_iter()
            .map(|(k, rules)| (k.to_string(), rules.default_value()))
            .collect();
        Self { kind, params: params_map }
    }

    /// The sparse starting strategy: an identity circulant, nothing else.
    pub fn base(params: &ZarParams) -> Self {
        Self::with_defaults(GenomeKind::Circulant, params)
    }

    pub fn set(mut self, name: &str, value: ParamValue) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        match self.params.get(name) {
            Some(ParamValue::Int(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn choice(&self, name: &str) -> Option<&str> {
        match self.params.get(name) {
            Some(ParamValue::Choice(c)) => Some(c),
            _ => None,
        }
    }

    /// Checks the genome against its kind's schema, including the cross
    /// constraints `k_min <= k_max` and the non-blank base rule.
    pub fn validate(&self, params: &ZarParams) -> Result<()> {
        let rules = schema(self.kind, params);
        for (name, s) in &rules {
            match self.params.get(*name) {
                Some(v) if s.admits(v) => {}
                Some(v) => return Err(Error::InvalidConfig(format!("{}: {name} = {v:?} out of schema", self.kind))),
                None => return Err(Error::InvalidConfig(format!("{}: missing {name}", self.kind))),
            }
        }
        if let Some(extra) = self.params.keys().find(|k| !rules.iter().any(|(n, _)| n == k)) {
            return Err(Error::InvalidConfig(format!("{}: unknown parameter {extra}", self.kind)));
        }
        if let (Some(lo), Some(hi)) = (self.int("k_min"), self.int("k_max")) {
            if lo > hi {
                return Err(Error::InvalidConfig(format!("{}: k_min {lo} > k_max {hi}", self.kind)));
            }
        }
        if self.has_search() && self.int("d1") == Some(0) && self.int("d2") == Some(0) {
            let uses_circulant = self.kind == GenomeKind::Pipeline || self.choice("base") == Some("circulant");
            if uses_circulant {
                return Err(Error::InvalidConfig(format!("{}: blank circulant base", self.kind)));
            }
        }
        Ok(())
    }

    fn has_search(&self) -> bool {
        matches!(self.kind, GenomeKind::RipupRepair | GenomeKind::Pipeline)
    }

    /// Coerces every value into the schema, fills in missing parameters and
    /// drops unknown ones.
    fn normalized(mut self, params: &ZarParams) -> Self {
        let rules = schema(self.kind, params);
        let mut out = BTreeMap::new();
        for (name, s) in &rules {
            let v = match self.params.remove(*name) {
                Some(v) => s.coerce(&v),
                None => s.default_value(),
            };
            out.insert(name.to_string(), v);
        }
        self.params = out;
        if let (Some(lo), Some(hi)) = (self.int("k_min"), self.int("k_max")) {
            if lo > hi {
                self.params.insert("k_min".into(), ParamValue::Int(hi));
            }
        }
        if self.has_search() && self.int("d1") == Some(0) && self.int("d2") == Some(0) {
            self.params.insert("d1".into(), ParamValue::Int(1));
        }
        self
    }
}

impl fmt::Display for StrategyGenome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        for (k, v) in &self.params {
            match v {
                ParamValue::Int(i) => write!(f, " {k}={i}")?,
                ParamValue::Choice(c) => write!(f, " {k}={c}")?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationEntry {
    pub genome: StrategyGenome,
    pub score: CandidateScore,
    pub born_iteration: u64,
}

/// Tournament of three, drawn with replacement. Ties go to the earliest born.
pub fn select<'a>(population: &'a [PopulationEntry], rng: &mut RngStream) -> Result<&'a PopulationEntry> {
    if population.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let mut best = &population[rng.index(population.len())];
    for _ in 0..2 {
        let cand = &population[rng.index(population.len())];
        let better = cand.score.total > best.score.total
            || (cand.score.total == best.score.total && cand.born_iteration < best.born_iteration);
        if better {
            best = cand;
        }
    }
    Ok(best)
}

/// A mutation backend.
pub trait Mutator {
    fn mutate(&self, genome: &StrategyGenome, params: &ZarParams, rng: &mut RngStream) -> Result<StrategyGenome>;
}

/// Jitters a numeric setting, resamples a choice, or switches kind, each
/// with equal probability.
#[derive(Clone, Copy, Debug, Default)]
pub struct HeuristicMutator;

impl HeuristicMutator {
    fn jitter(genome: &mut StrategyGenome, rules: &[(&'static str, ParamRule)], rng: &mut RngStream) -> bool {
        let numeric: Vec<&(&str, ParamRule)> =
            rules.iter().filter(|(_, s)| !matches!(s, ParamRule::Choice { .. })).collect();
        if numeric.is_empty() {
            return false;
        }
        let (name, s) = numeric[rng.index(numeric.len())];
        let current = genome.int(name).unwrap_or(0);
        let next = match s {
            ParamRule::Mask { bits, .. } => current ^ (1i64 << rng.index(*bits as usize)),
            ParamRule::Int { min, max, .. } => {
                let radius = ((current.abs() as f64) * 0.2).round().max(1.0) as i64;
                let step = rng.range_inclusive(0, 2 * radius as u64) as i64 - radius;
                let mut v = (current + step).clamp(*min, *max);
                if *name == "k_max" {
                    v = v.max(genome.int("k_min").unwrap_or(*min));
                } else if *name == "k_min" {
                    v = v.min(genome.int("k_max").unwrap_or(*max));
                }
                v
            }
            ParamRule::Choice { .. } => unreachable!(),
        };
        genome.params.insert(name.to_string(), ParamValue::Int(next));
        true
    }

    fn resample(genome: &mut StrategyGenome, rules: &[(&'static str, ParamRule)], rng: &mut RngStream) -> bool {
        let choices: Vec<(&str, &'static [&'static str])> = rules
            .iter()
            .filter_map(|(n, s)| match s {
                ParamRule::Choice { options, .. } if options.len() > 1 => Some((*n, *options)),
                _ => None,
            })
            .collect();
        if choices.is_empty() {
            return false;
        }
        let (name, options) = choices[rng.index(choices.len())];
        let pick = options[rng.index(options.len())];
        genome.params.insert(name.to_string(), ParamValue::Choice(pick.to_string()));
        true
    }

    fn switch_kind(genome: &mut StrategyGenome, rng: &mut RngStream) -> bool {
        let others: Vec<GenomeKind> = GenomeKind::ALL.into_iter().filter(|k| *k != genome.kind).collect();
        genome.kind = others[rng.index(others.len())];
        true
    }
}

impl Mutator for HeuristicMutator {
    fn mutate(&self, genome: &StrategyGenome, params: &ZarParams, rng: &mut RngStream) -> Result<StrategyGenome> {
        let mut child = genome.clone().normalized(params);
        let rules = schema(child.kind, params);
        let first = rng.index(3);
        for attempt in 0..3 {
            let done = match (first + attempt) % 3 {
                0 => Self::jitter(&mut child, &rules, rng),
                1 => Self::resample(&mut child, &rules, rng),
                _ => Self::switch_kind(&mut child, rng),
            };
            if done {
                break;
            }
        }
        Ok(child.normalized(params))
    }
}

/// Named mutation backends.
pub struct MutatorRegistry {
    backends: BTreeMap<String, Box<dyn Mutator>>,
}

impl Default for MutatorRegistry {
    fn default() -> Self {
        let mut reg = Self { backends: BTreeMap::new() };
        reg.register("heuristic", Box::new(HeuristicMutator));
        reg
    }
}

impl MutatorRegistry {
    pub fn register(&mut self, name: &str, backend: Box<dyn Mutator>) {
        self.backends.insert(name.to_string(), backend);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Mutator> {
        self.backends
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownBackend(name.to_string()))
    }
}

/// Mutates through the named backend.
pub fn mutate(
    genome: &StrategyGenome,
    backend: &str,
    registry: &MutatorRegistry,
    params: &ZarParams,
    rng: &mut RngStream,
) -> Result<StrategyGenome> {
    registry.get(backend)?.mutate(genome, params, rng)
}

/// Turns a genome into its `(primary, prospect)` matrices.
pub trait Materializer {
    fn run(&self, genome: &StrategyGenome, params: &ZarParams) -> Result<(BinaryMatrix, BinaryMatrix)>;
}

/// Runs genomes with the library's constructions and search.
pub struct StrategyRunner {
    pub bank: SeedBank,
    pub step_budget: u64,
}

impl Default for StrategyRunner {
    fn default() -> Self {
        Self {
            bank: SeedBank::builtin(),
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

fn fill_policy(name: &str, seed: u64) -> Option<FillPolicy> {
    match name {
        "row-major" => Some(FillPolicy::RowMajor),
        "reverse-row-major" => Some(FillPolicy::ReverseRowMajor),
        "shuffled" => Some(FillPolicy::Shuffled(seed)),
        "sparsest-row-first" => Some(FillPolicy::SparsestRowFirst),
        _ => None,
    }
}

impl StrategyRunner {
    fn circulant(&self, genome: &StrategyGenome, params: &ZarParams) -> BinaryMatrix {
        let p = circulant_modulus(params);
        let d1 = genome.int("d1").unwrap_or(1) as u64;
        let d2 = genome.int("d2").unwrap_or(0) as u64;
        let set = |mask: u64| (0..p).filter(|b| mask >> b & 1 == 1).collect::<Vec<_>>();
        let pair = ShiftSetPair::new(p, &set(d1), &set(d2)).expect("shifts below p");
        let mut out = BinaryMatrix::new(params);
        out.paste(&two_block_circulant(&pair), 0, 0);
        out
    }

    fn filled(&self, mat: BinaryMatrix, genome: &StrategyGenome, params: &ZarParams) -> BinaryMatrix {
        let seed = genome.int("fill_seed").unwrap_or(0) as u64;
        match genome.choice("fill").and_then(|f| fill_policy(f, seed)) {
            Some(policy) if is_valid(&mat, params) => greedy_fill(&mat, params, policy).expect("valid input"),
            _ => mat,
        }
    }

    fn search(&self, base: BinaryMatrix, genome: &StrategyGenome, params: &ZarParams) -> BinaryMatrix {
        if !is_valid(&base, params) {
            return base;
        }
        let config = RipupConfig {
            restarts: genome.int("restarts").unwrap_or(20) as usize,
            k_min: genome.int("k_min").unwrap_or(3) as usize,
            k_max: genome.int("k_max").unwrap_or(8) as usize,
            improve_iters: genome.int("improve_iters").unwrap_or(50) as usize,
            target: None,
            seed: genome.int("search_seed").unwrap_or(0) as u64,
            fill_policy: FillPolicy::Shuffled(0),
            threads: 1,
        };
        ripup_repair_search(&base, params, &config).map_or(base, |r| r.best)
    }

    fn primary(&self, genome: &StrategyGenome, params: &ZarParams) -> BinaryMatrix {
        match genome.kind {
            GenomeKind::ExplicitSeed => {
                let base = self
                    .bank
                    .get(params.m(), params.n())
                    .cloned()
                    .unwrap_or_else(|| BinaryMatrix::new(params));
                self.filled(base, genome, params)
            }
            GenomeKind::Circulant => self.filled(self.circulant(genome, params), genome, params),
            GenomeKind::Greedy => self.filled(BinaryMatrix::new(params), genome, params),
            GenomeKind::RipupRepair => {
                let base = match genome.choice("base") {
                    Some("seed-bank") => self.bank.get(params.m(), params.n()).cloned(),
                    _ => None,
                }
                .unwrap_or_else(|| self.circulant(genome, params));
                self.search(base, genome, params)
            }
            GenomeKind::Pipeline => {
                let base = self.filled(self.circulant(genome, params), genome, params);
                self.search(base, genome, params)
            }
        }
    }
}

/// The prospect matrix derived from the primary one.
fn prospect(primary: &BinaryMatrix, genome: &StrategyGenome) -> BinaryMatrix {
    match genome.choice("prospect") {
        Some("permuted") => {
            let mut rng = RngStream::new(999);
            let cols = rng.permutation(primary.cols());
            let rows = rng.permutation(primary.rows());
            primary.permute(&rows, &cols).expect("permutations match")
        }
        Some("densified") => {
            let mut out = primary.clone();
            for i in 0..out.rows() {
                if let Some(j) = (0..out.cols()).find(|&j| !out.get(i, j)) {
                    out.set(i, j, true);
                }
            }
            out
        }
        _ => primary.clone(),
    }
}

impl Materializer for StrategyRunner {
    fn run(&self, genome: &StrategyGenome, params: &ZarParams) -> Result<(BinaryMatrix, BinaryMatrix)> {
        genome.validate(params)?;
        let before = cell_checks();
        let primary = self.primary(genome, params);
        let spent = cell_checks().wrapping_sub(before);
        if spent > self.step_budget {
            return Err(Error::BudgetExceeded {
                budget: self.step_budget,
                estimate: spent,
            });
        }
        let second = prospect(&primary, genome);
        Ok((primary, second))
    }
}

/// Outcome of one evaluation.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub score: CandidateScore,
    pub primary: Option<BinaryMatrix>,
    pub credited: bool,
}

/// Runs a genome, scores it against the tracker as it stood, then credits
/// the primary matrix. Failed runs score as invalid.
pub fn evaluate(
    genome: &StrategyGenome,
    params: &ZarParams,
    tracker: &mut SotaTracker,
    runner: &dyn Materializer,
    iteration: u64,
) -> Evaluation {
    match runner.run(genome, params) {
        Ok((m1, m2)) => {
            let score = score_candidate(&m1, &m2, params, tracker);
            let credited = tracker.update(&m1, params, iteration);
            Evaluation {
                score,
                primary: Some(m1),
                credited,
            }
        }
        Err(_) => Evaluation {
            score: CandidateScore::invalid(),
            primary: None,
            credited: false,
        },
    }
}

fn default_iterations() -> usize {
    100
}

fn default_checkpoint_every() -> usize {
    10
}

fn default_mutator() -> String {
    "heuristic".into()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseConfig {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default = "default_mutator")]
    pub mutator: String,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            checkpoint_every: default_checkpoint_every(),
            mutator: default_mutator(),
            seed: 0,
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.checkpoint_every == 0 || (self.iterations > 0 && self.checkpoint_every > self.iterations) {
            return Err(Error::InvalidConfig(format!(
                "checkpoint_every must be in [1, iterations], got {} for {} iterations",
                self.checkpoint_every, self.iterations
            )));
        }
        Ok(())
    }

    /// The three default phases with distinct seeds derived from `seed`.
    pub fn default_schedule(seed: u64) -> Vec<PhaseConfig> {
        (0..3)
            .map(|i| PhaseConfig {
                seed: seed.wrapping_add(i),
                ..PhaseConfig::default()
            })
            .collect()
    }
}

/// Everything needed to continue a run.
#[derive(Clone, Debug, PartialEq)]
pub struct HarnessState {
    pub params: ZarParams,
    /// Index of the phase in progress.
    pub phase: usize,
    /// Iterations completed within the current phase.
    pub iteration: usize,
    pub evaluations: u64,
    pub population: Vec<PopulationEntry>,
    pub tracker: SotaTracker,
    pub best: Option<BinaryMatrix>,
    pub rng: RngStream,
    /// `n_sota` before the first phase, then after each completed phase.
    pub phase_marks: Vec<u64>,
}

impl HarnessState {
    /// Population seeded with the sparse base strategy, evaluated once.
    pub fn fresh(params: ZarParams, runner: &dyn Materializer) -> Self {
        let genome = StrategyGenome::base(&params);
        Self::with_genome(params, genome, runner)
    }

    pub fn with_genome(params: ZarParams, genome: StrategyGenome, runner: &dyn Materializer) -> Self {
        let mut tracker = SotaTracker::new();
        let eval = evaluate(&genome, &params, &mut tracker, runner, 0);
        let best = eval.primary.filter(|_| eval.credited);
        Self {
            params,
            phase: 0,
            iteration: 0,
            evaluations: 0,
            population: vec![PopulationEntry {
                genome,
                score: eval.score,
                born_iteration: 0,
            }],
            tracker,
            best,
            rng: RngStream::new(0),
            phase_marks: Vec::new(),
        }
    }

    /// The highest-scoring entry, earliest born on ties.
    pub fn best_entry(&self) -> Option<&PopulationEntry> {
        self.population.iter().fold(None, |acc: Option<&PopulationEntry>, e| match acc {
            Some(b) if b.score.total >= e.score.total => Some(b),
            _ => Some(e),
        })
    }
}

/// Receives checkpoints as they are taken.
pub trait CheckpointSink {
    fn store(&mut self, checkpoint: &Checkpoint) -> Result<()>;
}

/// Keeps checkpoints in memory.
#[derive(Default)]
pub struct MemorySink {
    pub checkpoints: Vec<Checkpoint>,
}

impl CheckpointSink for MemorySink {
    fn store(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        self.checkpoints.push(checkpoint.clone());
        Ok(())
    }
}

/// Discards checkpoints.
pub struct NullSink;

impl CheckpointSink for NullSink {
    fn store(&mut self, _: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

/// Writes `ckpt_p<phase>_i<iteration>.ckpt` files into a directory.
pub struct DirSink {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl DirSink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, written: Vec::new() })
    }
}

impl CheckpointSink for DirSink {
    fn store(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        let path = self
            .dir
            .join(format!("ckpt_p{:02}_i{:04}.ckpt", checkpoint.phase, checkpoint.iteration));
        save_checkpoint(checkpoint, &path)?;
        self.written.push(path);
        Ok(())
    }
}

/// The pieces of a run that are not part of its state.
pub struct Harness<'a> {
    pub runner: &'a dyn Materializer,
    pub mutators: &'a MutatorRegistry,
    pub sink: &'a mut dyn CheckpointSink,
    /// Known upper bound; the run stops once `n_sota` reaches it.
    pub upper: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseOutcome {
    Completed,
    BoundMatched,
}

fn phase_stream_seed(seed: u64, phase: usize) -> u64 {
    let mut s = seed ^ (phase as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut s)
}

fn bound_matched(state: &HarnessState, upper: Option<u64>) -> bool {
    upper.is_some_and(|u| state.tracker.n_sota() >= u)
}

/// Runs (or resumes) the current phase of `state`.
pub fn run_phase(state: &mut HarnessState, phase: &PhaseConfig, harness: &mut Harness<'_>) -> Result<PhaseOutcome> {
    phase.validate()?;
    let mutator = harness.mutators.get(&phase.mutator)?;
    if state.iteration == 0 {
        state.rng = RngStream::new(phase_stream_seed(phase.seed, state.phase));
    }
    while state.iteration < phase.iterations {
        if bound_matched(state, harness.upper) {
            return Ok(PhaseOutcome::BoundMatched);
        }
        let parent = select(&state.population, &mut state.rng)?.genome.clone();
        let child = mutator.mutate(&parent, &state.params, &mut state.rng)?;
        state.evaluations += 1;
        let eval = evaluate(&child, &state.params, &mut state.tracker, harness.runner, state.evaluations);
        if eval.credited {
            state.best = eval.primary;
        }
        state.population.push(PopulationEntry {
            genome: child,
            score: eval.score,
            born_iteration: state.evaluations,
        });
        state.iteration += 1;
        if state.iteration.is_multiple_of(phase.checkpoint_every) {
            harness.sink.store(&Checkpoint::capture(state))?;
        }
    }
    Ok(if bound_matched(state, harness.upper) {
        PhaseOutcome::BoundMatched
    } else {
        PhaseOutcome::Completed
    })
}

#[derive(Clone, Debug)]
pub struct ScheduleResult {
    pub best: Option<BinaryMatrix>,
    pub best_ones: usize,
    pub phases_run: usize,
    pub hit_upper: bool,
    pub state: HarnessState,
}

impl ScheduleResult {
    /// `(born_iteration, total score)` for every population entry.
    pub fn score_trace(&self) -> Vec<(u64, f64)> {
        self.state
            .population
            .iter()
            .map(|e| (e.born_iteration, e.score.total))
            .collect()
    }
}

/// Runs `base_phases`, then extra phases copying the last configuration
/// while the previous phase raised `n_sota` and the upper bound is unmatched.
/// Picks up wherever `state` left off, so a restored checkpoint resumes.
pub fn run_schedule(
    mut state: HarnessState,
    base_phases: &[PhaseConfig],
    harness: &mut Harness<'_>,
) -> Result<ScheduleResult> {
    let last = base_phases
        .last()
        .ok_or_else(|| Error::InvalidConfig("at least one phase is required".into()))?;
    if state.phase_marks.is_empty() {
        state.phase_marks.push(state.tracker.n_sota());
    }
    let mut hit_upper = bound_matched(&state, harness.upper);
    while !hit_upper {
        let cfg = base_phases.get(state.phase).unwrap_or(last);
        let outcome = run_phase(&mut state, cfg, harness)?;
        state.phase_marks.push(state.tracker.n_sota());
        state.phase += 1;
        state.iteration = 0;
        if outcome == PhaseOutcome::BoundMatched {
            hit_upper = true;
            break;
        }
        if state.phase < base_phases.len() {
            continue;
        }
        let marks = &state.phase_marks;
        let improved = marks[marks.len() - 1] > marks[marks.len() - 2];
        if !improved {
            break;
        }
    }
    let best_ones = state.best.as_ref().map_or(0, |b| b.count_ones());
    Ok(ScheduleResult {
        best: state.best.clone(),
        best_ones,
        phases_run: state.phase,
        hit_upper,
        state,
    })
}

const CHECKPOINT_FORMAT: &str = "zarforge-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Serializable snapshot of a [`HarnessState`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub params: ZarParams,
    pub phase: usize,
    pub iteration: usize,
    pub evaluations: u64,
    pub n_sota: u64,
    pub sota_history: Vec<(u64, u64)>,
    pub phase_marks: Vec<u64>,
    pub population: Vec<PopulationEntry>,
    /// Best credited matrix in the matrix file format.
    pub best: Option<String>,
    pub rng_seed: String,
    pub rng_state: [String; 4],
}

impl Checkpoint {
    pub fn capture(state: &HarnessState) -> Self {
        let words = state.rng.state();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            params: state.params,
            phase: state.phase,
            iteration: state.iteration,
            evaluations: state.evaluations,
            n_sota: state.tracker.n_sota(),
            sota_history: state.tracker.history().to_vec(),
            phase_marks: state.phase_marks.clone(),
            population: state.population.clone(),
            best: state.best.as_ref().map(|b| {
                MatrixFile {
                    matrix: b.clone(),
                    meta: None,
                }
                .serialize()
            }),
            rng_seed: format!("{:016x}", state.rng.seed()),
            rng_state: words.map(|w| format!("{w:016x}")),
        }
    }

    pub fn restore(&self) -> Result<HarnessState> {
        let hex = |s: &str| {
            u64::from_str_radix(s, 16).map_err(|_| Error::CorruptCheckpoint(format!("bad rng word {s:?}")))
        };
        let mut words = [0u64; 4];
        for (w, s) in words.iter_mut().zip(&self.rng_state) {
            *w = hex(s)?;
        }
        let best = match &self.best {
            Some(text) => Some(MatrixFile::parse(text)?.matrix),
            None => None,
        };
        Ok(HarnessState {
            params: self.params,
            phase: self.phase,
            iteration: self.iteration,
            evaluations: self.evaluations,
            population: self.population.clone(),
            tracker: SotaTracker::from_parts(self.n_sota, self.sota_history.clone()),
            best,
            rng: RngStream::from_parts(hex(&self.rng_seed)?, words),
            phase_marks: self.phase_marks.clone(),
        })
    }

    /// JSON body followed by a `sha256 <hex>` line over the body.
    pub fn to_text(&self) -> String {
        let body = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        let digest = hex::encode(Sha256::digest(body.as_bytes()));
        format!("{body}\nsha256 {digest}\n")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let trimmed = text.strip_suffix('\n').unwrap_or(text);
        let (body, trailer) = trimmed
            .rsplit_once('\n')
            .ok_or_else(|| Error::CorruptCheckpoint("missing checksum line".into()))?;
        let stated = trailer
            .strip_prefix("sha256 ")
            .ok_or_else(|| Error::CorruptCheckpoint("missing checksum line".into()))?;
        let actual = hex::encode(Sha256::digest(body.as_bytes()));
        if stated != actual {
            return Err(Error::CorruptCheckpoint("checksum mismatch".into()));
        }
        let ckpt: Checkpoint =
            serde_json::from_str(body).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::CorruptCheckpoint(format!(
                "unsupported format {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        Ok(ckpt)
    }
}

/// Writes to a temporary sibling and renames it into place.
pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, checkpoint.to_text())?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_text(&fs::read_to_string(path)?)
}
