//! `rtr`: front end for the random-to-random shuffle toolkit.
//!
//! Exit codes: 0 on success, 1 when `verify` has a failing criterion or a
//! computation fails, 2 on a usage error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rtr_core::{CouplingVariant, Error, GoodTimeRule, QueueMembership};

#[derive(Parser, Debug)]
#[command(name = "rtr", version, about = "Random-to-random shuffle: exact distances, couplings and bounds")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: machine parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Strict,
    Amended,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MembershipArg {
    Literal,
    SelfExclusive,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct VariantFlags {
    /// Good-time rule.
    #[arg(long, value_enum, default_value_t = VariantArg::Amended)]
    pub variant: VariantArg,
    /// Queue growth test.
    #[arg(long, value_enum, default_value_t = MembershipArg::SelfExclusive)]
    pub membership: MembershipArg,
}

impl VariantFlags {
    pub fn resolve(self) -> CouplingVariant {
        CouplingVariant {
            good_time_rule: match self.variant {
                VariantArg::Strict => GoodTimeRule::Strict,
                VariantArg::Amended => GoodTimeRule::Amended,
            },
            queue_membership: membership(self.membership),
        }
    }
}

pub fn membership(m: MembershipArg) -> QueueMembership {
    match m {
        MembershipArg::Literal => QueueMembership::Literal,
        MembershipArg::SelfExclusive => QueueMembership::SelfExclusive,
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Second largest eigenvalue of the truncated chain, its generator or the limit matrix.
    Eig {
        /// Use the limit matrix C.
        #[arg(long, conflicts_with = "n")]
        limit: bool,
        /// Deck size for the finite-n matrices.
        #[arg(long, required_unless_present = "limit")]
        n: Option<usize>,
        /// Use the scaled generator n(K̃ₙ - I) instead of K̃ₙ.
        #[arg(long, requires = "n")]
        generator: bool,
        /// Emit the matrix instead of the eigenvalue report.
        #[arg(long)]
        matrix: bool,
        #[arg(long, hide = true)]
        decay_rate: Option<f64>,
    },
    /// Exact distance to uniform and between adjacent decks, for small n.
    Tv {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        t_min: usize,
        #[arg(long)]
        t_max: usize,
        /// Also report the exact ε-mixing time.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Monte Carlo runs of the coupling from two adjacent decks.
    Couple {
        #[arg(long)]
        n: usize,
        /// Step counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        variant: VariantFlags,
        /// Only estimate P(T ≥ k) from the queue process; skip full deck runs.
        #[arg(long)]
        tail_only: bool,
        #[arg(long, hide = true)]
        decay_rate: Option<f64>,
    },
    /// Empirical queue-size transition rates next to the closed-form rates.
    QueueStats {
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Number of shuffle steps in the single long run.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MembershipArg::SelfExclusive)]
        membership: MembershipArg,
    },
    /// Compares simulated queue sizes against the truncated chain.
    Dominance {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        t_max: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Analytic mixing-time bound.
    Bound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
        /// Also evaluate the survival and distance bounds at these step counts.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long, hide = true)]
        decay_rate: Option<f64>,
    },
    /// Runs the acceptance suite and prints one line per criterion.
    Verify {
        /// Trim every sample count tenfold.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        decay_rate: Option<f64>,
    },
}

pub enum Outcome {
    Ok,
    VerifyFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Some(t) = cli.common.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerifyFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                commands::CliError::Core(Error::Usage(_) | Error::Parse(_) | Error::Resource(_)) => {
                    eprintln!("run `rtr --help` for usage");
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
