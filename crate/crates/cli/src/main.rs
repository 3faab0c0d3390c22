mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{LhdOptions, MetricsInput};
use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "smdd", version, about = "Sequential mixed-distance designs for two-layer simulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "SMDD_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

impl OutDir {
    fn or_cwd(self) -> PathBuf {
        self.out_dir.unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Latin hypercube design, optionally maximin-optimized.
    Lhd {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        maximin: bool,
        #[arg(long, default_value_t = smdd::design::DEFAULT_Q)]
        q: f64,
        /// Annealing swaps (default 10^4 K).
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        random_in_cell: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sliced maximin LHD (t slices of m points).
    Slhd {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        random_in_cell: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full sequential run against a built-in problem.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Create a state file for ask/tell.
    Init {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        state: PathBuf,
        /// CSV design to start from instead of the generated one.
        #[arg(long)]
        initial_design: Option<PathBuf>,
        /// Inner outputs at the rows of --initial-design.
        #[arg(long)]
        initial_responses: Option<PathBuf>,
        /// Overwrite an existing state file.
        #[arg(long)]
        force: bool,
    },
    /// Print the next point to evaluate.
    Ask {
        #[arg(long)]
        state: PathBuf,
    },
    /// Record the inner outputs at the last asked point.
    Tell {
        #[arg(long)]
        state: PathBuf,
        /// Comma-separated coordinates, as printed by ask.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Comma-separated inner outputs.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// AID and MPV for a state file or a design/response pair.
    Metrics {
        #[arg(long, conflicts_with_all = ["design", "responses"])]
        state: Option<PathBuf>,
        #[arg(long, requires = "responses")]
        design: Option<PathBuf>,
        #[arg(long, requires = "design")]
        responses: Option<PathBuf>,
        #[arg(long, default_value = "external")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = smdd::metrics::DEFAULT_TEST_POINTS)]
        test_points: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Replicated comparison of SMDD, SMDD-Det and MmLHD.
    Bench {
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Lhd {
            n,
            k,
            maximin,
            q,
            budget,
            random_in_cell,
            seed,
            out,
        } => commands::lhd(
            &LhdOptions {
                n,
                k,
                maximin,
                q,
                budget,
                random_in_cell,
                seed,
            },
            out.as_deref(),
        ),
        Command::Slhd {
            t,
            m,
            k,
            random_in_cell,
            seed,
            out,
        } => commands::slhd(t, m, k, random_in_cell, seed, out.as_deref()),
        Command::Run { config, out } => commands::run(&config, out.out_dir),
        Command::Init {
            config,
            state,
            initial_design,
            initial_responses,
            force,
        } => commands::init(
            &config,
            &state,
            initial_design.as_deref(),
            initial_responses.as_deref(),
            force,
        ),
        Command::Ask { state } => commands::ask(&state),
        Command::Tell { state, point, values } => commands::tell(&state, &point, &values),
        Command::Metrics {
            state,
            design,
            responses,
            method,
            seed,
            test_points,
            out,
        } => commands::metrics(
            &MetricsInput {
                state: state.as_deref(),
                design: design.as_deref(),
                responses: responses.as_deref(),
                method: &method,
                seed,
                test_points,
            },
            &out.or_cwd(),
        ),
        Command::Bench { plan, out } => commands::bench(&plan, &out.or_cwd()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
