//! Command implementations behind the `zarforge` binary.
//!
//! Every command returns a [`CommandOutcome`] instead of exiting, so the
//! binary only has to print and forward the exit code.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;

use crate::bounds::{best_roman, BoundsRegistry};
use crate::constructions::{fixture_name, SeedBank};
use crate::error::{Error, Result};
use crate::evolve::{
    run_schedule, CheckpointSink, DirSink, Harness, HarnessState, MutatorRegistry, NullSink, PhaseConfig,
    StrategyRunner, DEFAULT_STEP_BUDGET,
};
use crate::matrix::{BinaryMatrix, MatrixFile, MatrixMeta, ZarParams};
use crate::render::{to_pbm, to_svg};
use crate::reproduce::{reproduce, Case, ReproduceOptions};
use crate::validator::find_witness;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GUARD: i32 = 3;

/// Environment variable naming a directory of `z_<m>x<n>_<ones>.mat` seeds.
pub const FIXTURES_ENV: &str = "ZARFORGE_FIXTURES";

/// Ordered `key = value` lines.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    fields: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: &str, value: impl fmt::Display) -> &mut Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.fields {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub summary: String,
    pub report: Option<Report>,
}

impl CommandOutcome {
    fn new(exit_code: i32, summary: impl Into<String>, report: Option<Report>) -> Self {
        Self {
            exit_code,
            summary: summary.into(),
            report,
        }
    }

    pub fn from_error(err: &Error) -> Self {
        let code = match err {
            Error::InvalidMatrix(_) | Error::ExceedsUpperBound { .. } => EXIT_FAILED,
            Error::ResourceGuard(_) | Error::BudgetExceeded { .. } => EXIT_GUARD,
            _ => EXIT_USAGE,
        };
        Self::new(code, format!("error: {err}"), None)
    }
}

/// The seed bank named by the fixtures environment variable, or the
/// built-in one.
pub fn fixture_bank() -> Result<SeedBank> {
    match std::env::var_os(FIXTURES_ENV) {
        Some(dir) => SeedBank::load_dir(Path::new(&dir)),
        None => Ok(SeedBank::builtin()),
    }
}

fn read_matrix(path: &Path) -> Result<MatrixFile> {
    MatrixFile::parse(&fs::read_to_string(path)?)
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn cmd_verify(file: &Path, s: usize, t: usize) -> CommandOutcome {
    let run = || -> Result<CommandOutcome> {
        let mat = read_matrix(file)?.matrix;
        let params = ZarParams::new(mat.rows(), mat.cols(), s, t)?;
        let ones = mat.count_ones();
        let mut report = Report::default();
        report
            .push("file", file.display())
            .push("params", params)
            .push("ones", ones)
            .push("row_degrees", join(&mat.row_degrees()));
        Ok(match find_witness(&mat, &params) {
            None => {
                report.push("valid", true);
                CommandOutcome::new(EXIT_OK, format!("{ones} ones, valid"), Some(report))
            }
            Some(w) => {
                report
                    .push("valid", false)
                    .push("witness_rows", join(&w.rows))
                    .push("witness_cols", join(&w.cols));
                CommandOutcome::new(EXIT_FAILED, format!("{ones} ones, invalid: {w}"), Some(report))
            }
        })
    };
    run().unwrap_or_else(|e| CommandOutcome::from_error(&e))
}

fn write_matrix(path: &Path, mat: &BinaryMatrix, params: &ZarParams) -> Result<()> {
    let file = MatrixFile {
        matrix: mat.clone(),
        meta: Some(MatrixMeta {
            s: params.s(),
            t: params.t(),
            claim: mat.count_ones(),
        }),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, file.serialize())?;
    Ok(())
}

/// Runs a reproduction case and writes its matrix to `out`, or to
/// `z_<m>x<n>_<ones>.mat` in the working directory.
pub fn cmd_reproduce(case: &str, out: Option<&Path>, seed: Option<u64>, threads: usize) -> CommandOutcome {
    let run = || -> Result<CommandOutcome> {
        let case: Case = case.parse()?;
        let options = ReproduceOptions {
            seed,
            threads: threads.max(1),
            bank: fixture_bank()?,
        };
        let started = Instant::now();
        let r = reproduce(case, &options)?;
        let path = out.map_or_else(|| PathBuf::from(fixture_name(&r.matrix)), Path::to_path_buf);
        write_matrix(&path, &r.matrix, &case.params())?;
        let mut report = Report::default();
        report
            .push("case", case)
            .push("ones", r.ones)
            .push("target", case.target())
            .push("valid", r.valid)
            .push("met", r.met())
            .push("seed", r.seed.map_or("none".to_string(), |s| s.to_string()))
            .push("attempts", r.attempts)
            .push("out", path.display())
            .push("wall_time_s", format!("{:.3}", started.elapsed().as_secs_f64()));
        let summary = format!("{case}: {} ones (target {})", r.ones, case.target());
        let code = if r.met() { EXIT_OK } else { EXIT_FAILED };
        Ok(CommandOutcome::new(code, summary, Some(report)))
    };
    run().unwrap_or_else(|e| CommandOutcome::from_error(&e))
}

fn default_phases() -> usize {
    3
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

fn default_budget() -> u64 {
    DEFAULT_STEP_BUDGET
}

/// Search configuration file (TOML).
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_phases")]
    pub phases: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default = "default_mutator")]
    pub mutator: String,
    #[serde(default = "default_budget")]
    pub step_budget: u64,
    /// Stops the run once reached; defaults to the registered or Roman bound.
    pub target: Option<u64>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

impl SearchConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SearchConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases == 0 {
            return Err(Error::InvalidConfig("phases must be positive".into()));
        }
        self.phase_configs().iter().try_for_each(PhaseConfig::validate)
    }

    pub fn phase_configs(&self) -> Vec<PhaseConfig> {
        (0..self.phases as u64)
            .map(|i| PhaseConfig {
                iterations: self.iterations,
                checkpoint_every: self.checkpoint_every,
                mutator: self.mutator.clone(),
                seed: self.seed.wrapping_add(i),
            })
            .collect()
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct SearchOverrides {
    pub seed: Option<u64>,
    pub target: Option<u64>,
    pub phases: Option<usize>,
}

/// Runs the phase schedule and writes the best matrix to `out` and the run
/// report next to it with a `.report` extension.
pub fn cmd_search(params: ZarParams, config: Option<&Path>, out: &Path, overrides: &SearchOverrides) -> CommandOutcome {
    let run = || -> Result<CommandOutcome> {
        let mut cfg = match config {
            Some(path) => SearchConfig::parse(&fs::read_to_string(path)?)?,
            None => SearchConfig::default(),
        };
        cfg.seed = overrides.seed.unwrap_or(cfg.seed);
        cfg.phases = overrides.phases.unwrap_or(cfg.phases);
        cfg.target = overrides.target.or(cfg.target);
        cfg.validate()?;
        let started = Instant::now();
        let mut report = Report::default();
        report.push("params", params).push("seed", cfg.seed);

        let best = if params.is_degenerate() {
            report.push("phases_run", 0).push("hit_upper", true);
            BinaryMatrix::ones(params.m(), params.n())
        } else {
            let upper = cfg.target.unwrap_or_else(|| {
                BoundsRegistry::builtin()
                    .get(&params)
                    .and_then(|r| r.upper)
                    .unwrap_or_else(|| best_roman(&params))
            });
            let runner = StrategyRunner {
                bank: fixture_bank()?,
                step_budget: cfg.step_budget,
            };
            let mutators = MutatorRegistry::default();
            let mut dir_sink;
            let sink: &mut dyn CheckpointSink = match &cfg.checkpoint_dir {
                Some(dir) => {
                    dir_sink = DirSink::new(dir)?;
                    &mut dir_sink
                }
                None => &mut NullSink,
            };
            let mut harness = Harness {
                runner: &runner,
                mutators: &mutators,
                sink,
                upper: Some(upper),
            };
            let state = HarnessState::fresh(params, &runner);
            let result = run_schedule(state, &cfg.phase_configs(), &mut harness)?;
            let trace: Vec<String> = result
                .score_trace()
                .iter()
                .map(|(born, total)| format!("{born}:{total}"))
                .collect();
            let history: Vec<String> = result
                .state
                .tracker
                .history()
                .iter()
                .map(|(it, v)| format!("{it}:{v}"))
                .collect();
            report
                .push("upper", upper)
                .push("phases_run", result.phases_run)
                .push("hit_upper", result.hit_upper)
                .push("evaluations", result.state.evaluations)
                .push("n_sota", result.state.tracker.n_sota())
                .push("n_sota_history", history.join(","))
                .push("score_trace", trace.join(","));
            result.best.unwrap_or_else(|| BinaryMatrix::new(&params))
        };
        write_matrix(out, &best, &params)?;
        let ones = best.count_ones();
        report
            .push("ones", ones)
            .push("out", out.display())
            .push("wall_time_s", format!("{:.3}", started.elapsed().as_secs_f64()));
        fs::write(out.with_extension("report"), report.to_string())?;
        Ok(CommandOutcome::new(EXIT_OK, format!("{params}: best {ones} ones"), Some(report)))
    };
    run().unwrap_or_else(|e| CommandOutcome::from_error(&e))
}

/// Renders the bounds grid. Lower bounds come only from the construction
/// files in `constructions`, each certified against the registry.
pub fn cmd_table(bounds_csv: &Path, constructions: &Path) -> CommandOutcome {
    let run = || -> Result<CommandOutcome> {
        let csv = BoundsRegistry::from_csv(fs::File::open(bounds_csv)?)?;
        let mut registry = BoundsRegistry::new();
        for r in csv.records() {
            let mut r = r.clone();
            r.lower = None;
            r.tight = false;
            registry.insert(r);
        }
        let mut files: Vec<PathBuf> = fs::read_dir(constructions)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "mat"))
            .collect();
        files.sort();
        for path in &files {
            let file = read_matrix(path)?;
            let (s, t) = file.meta.map_or((3, 3), |m| (m.s, m.t));
            let params = ZarParams::new(file.matrix.rows(), file.matrix.cols(), s, t)?;
            if let Err(e) = registry.certify(&params, &file.matrix) {
                return Ok(CommandOutcome::new(
                    EXIT_FAILED,
                    format!("{}: {e}", path.display()),
                    None,
                ));
            }
        }
        let table = render_table(&registry);
        let mut report = Report::default();
        report
            .push("records", registry.len())
            .push("constructions", files.len())
            .push("tight", registry.records().filter(|r| r.tight).count());
        Ok(CommandOutcome::new(EXIT_OK, table, Some(report)))
    };
    run().unwrap_or_else(|e| CommandOutcome::from_error(&e))
}

/// One cell per record: `lower/upper`, `-` for an unknown side, and a
/// trailing `*` when the two agree.
pub fn table_cell(lower: Option<u64>, upper: Option<u64>) -> String {
    let side = |v: Option<u64>| v.map_or("-".to_string(), |v| v.to_string());
    let star = if lower.is_some() && lower == upper { " *" } else { "" };
    format!("{}/{}{star}", side(lower), side(upper))
}

/// Grid with one block per `(s, t)`, rows `m` and columns `n`.
pub fn render_table(registry: &BoundsRegistry) -> String {
    let mut blocks: BTreeMap<(usize, usize), Vec<&crate::bounds::BoundsRecord>> = BTreeMap::new();
    for r in registry.records() {
        blocks.entry((r.params.s(), r.params.t())).or_default().push(r);
    }
    let mut out = String::new();
    for ((s, t), recs) in blocks {
        let ms: BTreeSet<usize> = recs.iter().map(|r| r.params.m()).collect();
        let ns: BTreeSet<usize> = recs.iter().map(|r| r.params.n()).collect();
        let cells: BTreeMap<(usize, usize), String> = recs
            .iter()
            .map(|r| ((r.params.m(), r.params.n()), table_cell(r.lower, r.upper)))
            .collect();
        let width = cells.values().map(|c| c.len()).max().unwrap_or(1).max(3);
        out.push_str(&format!("s={s} t={t}\n{:>4}", "m\\n"));
        for n in &ns {
            out.push_str(&format!(" {n:>width$}"));
        }
        out.push('\n');
        for m in &ms {
            out.push_str(&format!("{m:>4}"));
            for n in &ns {
                let cell = cells.get(&(*m, *n)).map_or("", String::as_str);
                out.push_str(&format!(" {cell:>width$}"));
            }
            out.push('\n');
        }
    }
    out
}

/// Writes `out` with a `.pbm` extension and its `.svg` sibling.
pub fn cmd_render(file: &Path, out: &Path) -> CommandOutcome {
    let run = || -> Result<CommandOutcome> {
        let mat = read_matrix(file)?.matrix;
        let pbm = out.with_extension("pbm");
        let svg = out.with_extension("svg");
        fs::write(&pbm, to_pbm(&mat))?;
        fs::write(&svg, to_svg(&mat))?;
        let mut report = Report::default();
        report
            .push("width", mat.cols())
            .push("height", mat.rows())
            .push("black", mat.count_ones())
            .push("pbm", pbm.display())
            .push("svg", svg.display());
        Ok(CommandOutcome::new(
            EXIT_OK,
            format!("{}x{} image with {} black cells", mat.cols(), mat.rows(), mat.count_ones()),
            Some(report),
        ))
    };
    run().unwrap_or_else(|e| CommandOutcome::from_error(&e))
}
