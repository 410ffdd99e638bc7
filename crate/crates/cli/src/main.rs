//! `mixdio`: exact experiments on D-adic mixed approximation sets.

mod commands;
mod config;
mod report;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mixdio", version, about, args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Cyclic ratios of the D-adic sequence, e.g. `2` or `2,3`.
    #[arg(long, global = true, conflicts_with_all = ["prefix", "growing"])]
    pub ratios: Option<String>,
    /// Explicit prefix `1,n_1,n_2,...` of the sequence.
    #[arg(long, global = true)]
    pub prefix: Option<String>,
    /// Unbounded sequence with ratios `first, first+1, ...`.
    #[arg(long, global = true)]
    pub growing: Option<u64>,
    /// Declared ratio bound for prefix sequences.
    #[arg(long, global = true)]
    pub bound: Option<u64>,
    /// `power:TAU`, `psi0`, `psi1` or `table:FILE` with `q,value` lines.
    #[arg(long, global = true)]
    pub psi: Option<String>,
    /// Weights `i,j` with `i + j = 1`.
    #[arg(long, global = true, default_value = "1/2,1/2")]
    pub weights: String,
    /// Shorthand for `--psi power:TAU`.
    #[arg(long, global = true)]
    pub tau: Option<String>,
    /// Range `Q1:Q2`, read as `(Q1, Q2]`.
    #[arg(long, global = true)]
    pub range: Option<String>,
    /// Emit CSV instead of JSON.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// File of `key = value` defaults.
    #[arg(long, global = true)]
    pub config: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a critical series as convergent or divergent.
    Classify(commands::ClassifyArgs),
    /// Jarník–Besicovich exponent and the bisected transition.
    Dimension,
    /// Measure a resonant layer.
    Measure(commands::MeasureArgs),
    /// List the members of `A_psi` in a range.
    Enumerate(commands::EnumerateArgs),
    /// Dirichlet approximation with D-adic denominators.
    Dirichlet(commands::DirichletArgs),
    /// Check the local ubiquity inequality.
    Ubiquity(commands::UbiquityArgs),
    /// Build counterexample blocks and stitch them.
    Counterexample(commands::CounterexampleArgs),
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Compute(e)) => {
            println!("{}", report::error_json(&e));
            ExitCode::from(1)
        }
    }
}
