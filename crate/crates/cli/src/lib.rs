//! Command surface of the `seqfdr` binary.
//!
//! * `simulate <config> --out <csv>`: run an experiment grid.
//! * `stream --procedure lord|lond`: online decisions over standard input,
//!   one P-value per line in, one `index alpha p REJECT|ACCEPT` line out.
//! * `schedule --head N`: print `λ_1..λ_N` and the residual budget.
//!
//! Exit codes: 0 success, 2 bad flags or config, 3 unwritable output,
//! 4 malformed stream input.

use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use seqfdr_core::engines::{OnlineEngine, Procedure};
use seqfdr_core::schedules::{LambdaSchedule, ScheduleKind};
use seqfdr_core::simulation::{self, ExperimentConfig, DEFAULT_NU};
use seqfdr_core::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_OUTPUT: u8 = 3;
pub const EXIT_INPUT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "seqfdr", version, about = "Online FDR control with LORD and LOND")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation grid from a config file and write CSV.
    Simulate(SimulateArgs),
    /// Test P-values read from stdin, one decision line per input line.
    Stream(StreamArgs),
    /// Print the leading terms of a significance schedule.
    Schedule(ScheduleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcedureArg {
    Lord,
    Lond,
    Bh,
}

impl From<ProcedureArg> for Procedure {
    fn from(p: ProcedureArg) -> Self {
        match p {
            ProcedureArg::Lord => Procedure::Lord,
            ProcedureArg::Lond => Procedure::Lond,
            ProcedureArg::Bh => Procedure::Bh,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleFlags {
    /// Total budget `q` (sum of all levels).
    #[arg(long, default_value_t = 0.1)]
    pub q: f64,
    /// Power exponent: λ_i ∝ i^-nu.
    #[arg(long, conflicts_with = "adaptive")]
    pub nu: Option<f64>,
    /// Use λ_i ∝ 1/((i+1) ln²(i+1)) instead of a power law.
    #[arg(long)]
    pub adaptive: bool,
}

impl ScheduleFlags {
    pub fn kind(&self) -> ScheduleKind {
        if self.adaptive {
            ScheduleKind::AdaptiveLog
        } else {
            ScheduleKind::Power {
                nu: self.nu.unwrap_or(DEFAULT_NU),
            }
        }
    }

    pub fn build(&self) -> Result<LambdaSchedule, Error> {
        LambdaSchedule::new(self.kind(), self.q)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Experiment config (TOML).
    pub config: PathBuf,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the replicate count.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Restrict to these procedures (repeatable).
    #[arg(long, value_enum)]
    pub procedure: Vec<ProcedureArg>,
}

#[derive(Debug, Clone, Args)]
pub struct StreamArgs {
    #[arg(long, value_enum, default_value = "lord")]
    pub procedure: ProcedureArg,
    #[command(flatten)]
    pub schedule: ScheduleFlags,
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleArgs {
    /// Number of leading terms to print.
    #[arg(long, default_value_t = 10)]
    pub head: u64,
    #[command(flatten)]
    pub schedule: ScheduleFlags,
}

pub fn run(cli: Cli) -> u8 {
    let stderr = io::stderr();
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args, &mut stderr.lock()),
        Command::Stream(args) => {
            let stdin = io::stdin();
            let stdout = io::stdout();
            cmd_stream(&args, stdin.lock(), &mut stdout.lock(), &mut stderr.lock())
        }
        Command::Schedule(args) => {
            let stdout = io::stdout();
            cmd_schedule(&args, &mut stdout.lock(), &mut stderr.lock())
        }
    }
}

/// Load the config, apply flag overrides, run the grid and write CSV.
pub fn cmd_simulate(args: &SimulateArgs, diag: &mut dyn Write) -> u8 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(diag, "error: cannot read config {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let mut exp = match ExperimentConfig::from_toml_str(&text) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(diag, "error: {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    if let Some(seed) = args.seed {
        exp.base.seed = seed;
    }
    if let Some(reps) = args.reps {
        exp.base.reps = reps;
    }
    if !args.procedure.is_empty() {
        exp.base.procedures = args.procedure.iter().map(|&p| p.into()).collect();
        exp.base.procedures.dedup();
    }
    if let Err(e) = exp.validate() {
        let _ = writeln!(diag, "error: {e}");
        return EXIT_CONFIG;
    }

    // open the destination before the (long) run so a bad path fails fast
    let mut sink: Box<dyn Write> = match &args.out {
        Some(path) => match File::create(path) {
            Ok(f) => Box::new(BufWriter::new(f)),
            Err(e) => {
                let _ = writeln!(diag, "error: cannot write {}: {e}", path.display());
                return EXIT_OUTPUT;
            }
        },
        None => Box::new(io::stdout().lock()),
    };

    let cells = match simulation::run_experiment(&exp) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(diag, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let written = simulation::write_csv(&cells, &mut sink).and_then(|w| w.flush());
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(diag, "error: writing CSV failed: {e}");
            EXIT_OUTPUT
        }
    }
}

/// Online decisions over `input`. Each decision is flushed before the next
/// line is read.
pub fn cmd_stream<R: BufRead>(args: &StreamArgs, input: R, out: &mut dyn Write, diag: &mut dyn Write) -> u8 {
    let q = args.schedule.q;
    if !(q > 0.0 && q < 1.0) {
        let _ = writeln!(diag, "error: --q must lie in (0,1), got {q}");
        return EXIT_CONFIG;
    }
    let schedule = match args.schedule.build() {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(diag, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut engine = match OnlineEngine::new(args.procedure.into(), schedule) {
        Ok(e) => e,
        Err(e) => {
            let _ = writeln!(diag, "error: {e}");
            return EXIT_CONFIG;
        }
    };

    for (k, line) in input.lines().enumerate() {
        let lineno = k + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                let _ = writeln!(diag, "# error line {lineno}: {e}");
                return EXIT_INPUT;
            }
        };
        let decision = line
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("cannot parse {:?} as a P-value: {e}", line.trim()))
            .and_then(|p| engine.step(p).map_err(|e| e.to_string()));
        match decision {
            Ok(d) => {
                if writeln!(out, "{d}").and_then(|_| out.flush()).is_err() {
                    // downstream closed the pipe
                    return EXIT_OUTPUT;
                }
            }
            Err(reason) => {
                let _ = out.flush();
                let _ = writeln!(diag, "# error line {lineno}: {reason}");
                return EXIT_INPUT;
            }
        }
    }
    let summary = writeln!(out, "# discoveries={} n={}", engine.discoveries(), engine.tested());
    if summary.and_then(|_| out.flush()).is_err() {
        return EXIT_OUTPUT;
    }
    EXIT_OK
}

/// `N` lines `i lambda_i`, then `# residual=<q − Σ_{i≤N} λ_i>`.
pub fn cmd_schedule(args: &ScheduleArgs, out: &mut dyn Write, diag: &mut dyn Write) -> u8 {
    let schedule = match args.schedule.build() {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(diag, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut write_all = || -> io::Result<()> {
        for i in 1..=args.head {
            writeln!(out, "{i} {}", schedule.lambda(i))?;
        }
        writeln!(out, "# residual={}", schedule.q() - schedule.partial_sum(args.head))?;
        out.flush()
    };
    match write_all() {
        Ok(()) => EXIT_OK,
        Err(_) => EXIT_OUTPUT,
    }
}
