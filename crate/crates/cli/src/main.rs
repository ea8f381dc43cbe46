//! `arrowpush` command line.
//!
//! Exit status: 0 on success, 1 when the chemistry says no (an arrow that
//! does not apply, a reaction that could not be validated, a record that
//! does not replay), 2 for usage errors, unreadable files and malformed
//! SMILES/MechSMILES.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arrowpush", version, about = "Arrow-pushing mechanism toolkit")]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, short = 'j', global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a SMILES string or a MechSMILES step.
    Parse {
        input: String,
    },
    /// Apply arrows and print the resulting state.
    Apply(ApplyArgs),
    /// List (or sample) the legal moves of a state.
    Enumerate {
        state: String,
        #[arg(long, short = 'L', default_value_t = 2)]
        max_arrows: usize,
        /// Print at most this many moves.
        #[arg(long)]
        limit: Option<usize>,
        /// Draw this many random moves instead of enumerating.
        #[arg(long)]
        sample: Option<usize>,
    },
    /// Convert a source dataset to unified JSONL records.
    Convert(ConvertArgs),
    /// Write synthetic or curated mechanisms.
    Synth(SynthArgs),
    /// Corpus statistics as TSV.
    Stats {
        records: PathBuf,
    },
    /// Training samples for the prediction tasks.
    Tasks(TasksArgs),
    /// Search for a mechanism from reactants to a product.
    Search(SearchArgs),
    /// Check that some mechanism leads from reactants to a product.
    Validate(SearchArgs),
    /// Full atom mapping and species roles of each record.
    Map {
        records: PathBuf,
    },
    /// Mechanistic templates of each record.
    Template {
        records: PathBuf,
        /// Bond radius around arrow-touched atoms, or `inf`.
        #[arg(long, default_value = "1")]
        radius: String,
    },
    /// Step and pathway accuracy of a policy on recorded mechanisms.
    Evaluate(EvaluateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
pub struct ApplyArgs {
    /// MechSMILES step. Omit when giving `--arrows`.
    mechsmiles: Option<String>,
    /// State to apply to; defaults to the step's own molecules.
    #[arg(long)]
    state: Option<String>,
    /// Arrows in the state's map numbers, `;` separated.
    #[arg(long, requires = "state", conflicts_with = "mechsmiles")]
    arrows: Option<String>,
}

#[derive(Args)]
pub struct ConvertArgs {
    /// Source file (CSV for flower and pmechdb, JSONL for mech-uspto); `-` for stdin.
    input: PathBuf,
    #[arg(long, short = 'f')]
    format: String,
    /// Output JSONL; stdout when omitted.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Rejected records as JSONL.
    #[arg(long)]
    rejects: Option<PathBuf>,
    /// Adapter configuration (JSON) overriding field names.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// unified, flower, mech-uspto or pmechdb.
    #[arg(long, short = 'f', default_value = "unified")]
    format: String,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 3)]
    max_steps: usize,
    #[arg(long, default_value_t = 3)]
    max_arrows: usize,
    /// Write the hand-curated mechanisms instead.
    #[arg(long)]
    curated: bool,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
pub struct TasksArgs {
    records: PathBuf,
    /// Task numbers 1-4; all when omitted.
    #[arg(long = "task", short = 't')]
    tasks: Vec<u8>,
    #[arg(long)]
    no_retro: bool,
    #[arg(long)]
    no_forward: bool,
    #[arg(long)]
    no_product_free: bool,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
pub struct PolicyArgs {
    /// `heuristic`, an http(s) URL, or `cmd:PROGRAM ARGS`.
    #[arg(long, default_value = "heuristic")]
    policy: String,
}

#[derive(Args)]
pub struct SearchArgs {
    reactants: String,
    product: String,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Require the exact final state instead of containing the product.
    #[arg(long)]
    exact: bool,
    /// Beam search of this width instead of best-first search.
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    max_children: Option<usize>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    records: PathBuf,
    /// `replay` evaluates against each record's own steps.
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long = "k", value_delimiter = ',', default_values_t = [1, 3, 5, 10])]
    ks: Vec<usize>,
    #[arg(long = "width", value_delimiter = ',', default_values_t = [1, 3])]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    task: u8,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long)]
    addr: Option<String>,
    #[arg(long)]
    sessions: Option<PathBuf>,
    /// Policy backend for `/search`; see `search --help`.
    #[arg(long)]
    policy: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let ctx = commands::Ctx { json: cli.json, seed: cli.seed, jobs: cli.jobs };
    match commands::run(&ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(fail) => {
            eprintln!("{}", fail.message());
            ExitCode::from(fail.code())
        }
    }
}
