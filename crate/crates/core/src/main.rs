use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use zarforge::cli::{self, CommandOutcome, SearchOverrides};
use zarforge::ZarParams;

#[derive(Parser)]
#[command(name = "zarforge", version, about = "Construct and check K_{s,t}-free 0/1 matrices")]
struct Args {
    /// Caps the worker threads used by parallel search.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a matrix file and print a witness if it contains an all-ones s x t submatrix.
    Verify {
        file: PathBuf,
        #[arg(short, default_value_t = 3)]
        s: usize,
        #[arg(short, default_value_t = 3)]
        t: usize,
    },
    /// Rerun one of the stored pipelines: 11x21, 11x22, 12x22, 8x23, 9x22, 16x15, 16x16.
    Reproduce {
        case: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the evolutionary strategy search for Z(m, n, s, t).
    Search {
        m: usize,
        n: usize,
        #[arg(short, default_value_t = 3)]
        s: usize,
        #[arg(short, default_value_t = 3)]
        t: usize,
        /// TOML search configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Stop once this many ones are reached.
        #[arg(long)]
        target: Option<u64>,
        /// Number of base phases.
        #[arg(long)]
        phases: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the bounds grid, taking lower bounds from verified construction files.
    Table { bounds: PathBuf, constructions: PathBuf },
    /// Write PBM and SVG images of a matrix file.
    Render {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(args: Args) -> CommandOutcome {
    match args.command {
        Command::Verify { file, s, t } => cli::cmd_verify(&file, s, t),
        Command::Reproduce { case, seed, out } => cli::cmd_reproduce(&case, out.as_deref(), seed, args.threads),
        Command::Search {
            m,
            n,
            s,
            t,
            config,
            seed,
            target,
            phases,
            out,
        } => match ZarParams::new(m, n, s, t) {
            Ok(params) => {
                let overrides = SearchOverrides { seed, target, phases };
                cli::cmd_search(params, config.as_deref(), &out, &overrides)
            }
            Err(e) => CommandOutcome::from_error(&e),
        },
        Command::Table { bounds, constructions } => cli::cmd_table(&bounds, &constructions),
        Command::Render { file, out } => cli::cmd_render(&file, &out),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.max(1))
        .build_global()
    {
        eprintln!("warning: {e}");
    }
    let outcome = run(args);
    println!("{}", outcome.summary.trim_end());
    if let Some(report) = &outcome.report {
        print!("{report}");
    }
    ExitCode::from(outcome.exit_code as u8)
}
