//! Argument parsing and dispatch. Exit codes: 0 success, 1 usage or data
//! error, 2 fit stopped at its iteration cap (results still written).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use concmtf_core::{BlockConstraints, ModelKind, Ranks};

use crate::commands::{self, DecomposeArgs, EvalArgs, Outcome, TopicsArgs};
use crate::config::{Method, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "concmtf", version, about = "Constrained coupled matrix-tensor factorization for topic discovery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the count tensor, tag matrix and vocabulary from a JSON-lines post log.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a model to a tensor and optional side matrix.
    Decompose {
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        side: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Write measured sweep times to the trace instead of zeros.
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitOverrides,
    },
    /// Threshold a fitted model into topics.
    Topics {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        tags: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a planted instance.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitOverrides,
    },
    /// Score fitted models against a planted instance, or run a seeded
    /// comparison sweep when no model directories are given.
    Eval {
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Planted-instance seeds for a sweep, comma separated.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitOverrides,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Cp,
    Tucker,
}

#[derive(Debug, Clone, Args, Default)]
pub struct FitOverrides {
    #[arg(long)]
    pub seed: Option<u64>,
    /// `R` for CP or `R1,R2,R3`.
    #[arg(long)]
    pub rank: Option<String>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Bound on column L1 norms and pairwise inner products of A.
    #[arg(long)]
    pub eps_a: Option<f64>,
    #[arg(long)]
    pub eps_b: Option<f64>,
    #[arg(long)]
    pub eps_c: Option<f64>,
    #[arg(long)]
    pub eps_d: Option<f64>,
    /// Bound on the L1 norm of the core.
    #[arg(long)]
    pub eps_core: Option<f64>,
    /// Weight of the side-matrix fit.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
}

pub fn parse_ranks(s: &str) -> Result<Ranks> {
    let parts: Vec<usize> = s.split(',').map(|p| p.trim().parse::<usize>()).collect::<Result<_, _>>()?;
    match parts[..] {
        [r] => Ok(Ranks::cp(r)),
        [a, b, c] => Ok(Ranks(a, b, c)),
        _ => bail!("--rank takes R or R1,R2,R3, got {s:?}"),
    }
}

fn with_eps(b: &mut BlockConstraints, eps: Option<f64>) {
    if let Some(e) = eps {
        b.l1_eps = Some(e);
        b.orth_eps = Some(e);
    }
}

impl FitOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.fit.seed = s;
            cfg.synth.seed = s;
        }
        if let Some(k) = self.kind {
            let kind = match k {
                KindArg::Cp => ModelKind::Cp,
                KindArg::Tucker => ModelKind::Tucker3,
            };
            cfg.model.kind = kind;
            cfg.synth.kind = kind;
        }
        if let Some(r) = &self.rank {
            let ranks = parse_ranks(r)?;
            cfg.model.ranks = ranks;
            cfg.synth.ranks = ranks;
        }
        if let Some(n) = self.max_iters {
            cfg.fit.max_iters = n;
        }
        with_eps(&mut cfg.constraints.a, self.eps_a);
        with_eps(&mut cfg.constraints.b, self.eps_b);
        with_eps(&mut cfg.constraints.c, self.eps_c);
        with_eps(&mut cfg.constraints.d, self.eps_d);
        if let Some(e) = self.eps_core {
            cfg.constraints.core.l1_eps = Some(e);
        }
        if let Some(l) = self.lambda {
            cfg.constraints.coupling_weight = l;
        }
        Ok(())
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Build { input, out, common } => commands::cmd_build(input, out, &RunConfig::load(common.config.as_deref())?),
        Command::Decompose { tensor, side, out, method, timing, common, fit } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            fit.apply(&mut cfg)?;
            if let Some(m) = method {
                cfg.model.method = *m;
            }
            commands::cmd_decompose(&DecomposeArgs { tensor, side: side.as_deref(), out, timing: *timing }, &cfg)
        }
        Command::Topics { model, vocab, tags, out, common } => {
            let cfg = RunConfig::load(common.config.as_deref())?;
            commands::cmd_topics(&TopicsArgs { model, vocab: vocab.as_deref(), tags: tags.as_deref(), out }, &cfg)
        }
        Command::Synth { out, common, fit } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            fit.apply(&mut cfg)?;
            commands::cmd_synth(out, &cfg)
        }
        Command::Eval { instance, models, out, seeds, common, fit } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            fit.apply(&mut cfg)?;
            if let Some(s) = seeds {
                cfg.eval.seeds = s.clone();
            }
            commands::cmd_eval(&EvalArgs { instance: instance.as_deref(), models, out }, &cfg)
        }
    }
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
