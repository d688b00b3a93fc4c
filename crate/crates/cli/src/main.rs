//! Exact homotopy transfer from the command line: homology reports,
//! transfers in both directions with verification, replay of stored
//! results, comparison of two transfers, and triple Massey products.

use clap::{Args, Parser, Subcommand, ValueEnum};

use htt_cli::commands::{
    self, CmdError, Direction, Options,
};
use htt_cli::format::{self, FieldSpec, ProblemFile, ResultFile};
use htt_core::field::{GfP, Rational};
use htt_core::PivotPolicy;

#[derive(Parser)]
#[command(
    name = "htt",
    about = "Exact-arithmetic homotopy transfer for infinity-algebras",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    Down,
    Up,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Down => Direction::Down,
            DirectionArg::Up => Direction::Up,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Forward,
    Reverse,
}

impl From<PolicyArg> for PivotPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Forward => PivotPolicy::Forward,
            PolicyArg::Reverse => PivotPolicy::Reverse,
        }
    }
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Problem description file.
    #[arg(long, short = 'i')]
    input: String,
    /// Override the coefficient field, e.g. "rational" or "p5".
    #[arg(long)]
    field: Option<String>,
    /// Truncation arity (overrides the file).
    #[arg(long)]
    max_arity: Option<usize>,
    /// Degree window "lo:hi" for homology reports.
    #[arg(long, value_parser = parse_window)]
    window: Option<(i64, i64)>,
    /// Treat input degrees as cohomological (negate on ingestion).
    #[arg(long)]
    cohomological: bool,
    /// Skip the quasi-isomorphism hypothesis check before transferring.
    #[arg(long)]
    skip_hypothesis: bool,
    /// Which end of each solve picks up the free variables.
    #[arg(long, value_enum, default_value = "forward")]
    pivot_policy: PolicyArg,
    /// Write the result file here instead of stdout.
    #[arg(long, short = 'o')]
    out: Option<String>,
}

fn parse_window(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| "window must look like lo:hi".to_string())?;
    Ok((
        lo.parse().map_err(|e| format!("bad window bound: {e}"))?,
        hi.parse().map_err(|e| format!("bad window bound: {e}"))?,
    ))
}

#[derive(Subcommand)]
enum Command {
    /// Per-degree homology dimensions and chosen representatives.
    Homology {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a transfer and write the result file; exit 0 iff it verifies.
    Transfer {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, short = 'd', value_enum)]
        direction: DirectionArg,
    },
    /// Re-run the exact relations of a stored result against its problem.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Result file to replay.
        #[arg(long, short = 'r')]
        result: String,
    },
    /// Relate two transfer results by an isomorphism and a homotopy.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
    },
    /// Triple Massey product of three homology classes.
    Massey {
        #[command(flatten)]
        common: CommonArgs,
        /// The three classes, named as in the homology report.
        #[arg(num_args = 3)]
        classes: Vec<String>,
    },
}

fn options_of(common: &CommonArgs) -> Options {
    Options {
        max_arity: common.max_arity,
        window: common.window,
        cohomological: common.cohomological,
        skip_hypothesis: common.skip_hypothesis,
        policy: common.pivot_policy.into(),
        out: common.out.clone(),
    }
}

fn field_of(pf: &ProblemFile, common: &CommonArgs) -> Result<FieldSpec, CmdError> {
    let spec = match &common.field {
        None => pf.field.clone(),
        Some(s) if s == "rational" => FieldSpec::rational(),
        Some(s) => {
            let digits = s.strip_prefix('p').unwrap_or(s);
            let prime: u64 = digits
                .parse()
                .map_err(|_| CmdError::Invalid(format!("bad field override '{s}'")))?;
            FieldSpec::Prime { prime }
        }
    };
    spec.validate().map_err(CmdError::Invalid)?;
    Ok(spec)
}

fn run() -> Result<(), CmdError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Homology { common } => {
            let mut pf: ProblemFile = format::read_json(&common.input)?;
            pf.field = field_of(&pf, &common)?;
            let opts = options_of(&common);
            let report = match pf.field {
                FieldSpec::Named(_) => commands::cmd_homology::<Rational>(&pf, &opts)?,
                FieldSpec::Prime { .. } => commands::cmd_homology::<GfP>(&pf, &opts)?,
            };
            print!("{report}");
            Ok(())
        }
        Command::Transfer { common, direction } => {
            let mut pf: ProblemFile = format::read_json(&common.input)?;
            pf.field = field_of(&pf, &common)?;
            let opts = options_of(&common);
            let outcome = match pf.field {
                FieldSpec::Named(_) => {
                    commands::cmd_transfer::<Rational>(&pf, direction.into(), &opts)?
                }
                FieldSpec::Prime { .. } => {
                    commands::cmd_transfer::<GfP>(&pf, direction.into(), &opts)?
                }
            };
            eprint!("{}", outcome.report);
            if outcome.pass {
                Ok(())
            } else {
                Err(CmdError::VerifyFailed("verification failed".into()))
            }
        }
        Command::Verify { common, result } => {
            let mut pf: ProblemFile = format::read_json(&common.input)?;
            pf.field = field_of(&pf, &common)?;
            let rf: ResultFile = format::read_json(&result)?;
            let opts = options_of(&common);
            let (report, pass) = match pf.field {
                FieldSpec::Named(_) => commands::cmd_verify::<Rational>(&pf, &rf, &opts)?,
                FieldSpec::Prime { .. } => commands::cmd_verify::<GfP>(&pf, &rf, &opts)?,
            };
            print!("{report}");
            if pass {
                Ok(())
            } else {
                Err(CmdError::VerifyFailed("verification failed".into()))
            }
        }
        Command::Compare { common, left, right } => {
            let mut pf: ProblemFile = format::read_json(&common.input)?;
            pf.field = field_of(&pf, &common)?;
            let lf: ResultFile = format::read_json(&left)?;
            let rf: ResultFile = format::read_json(&right)?;
            let opts = options_of(&common);
            let (_, report) = match pf.field {
                FieldSpec::Named(_) => commands::cmd_compare::<Rational>(&pf, &lf, &rf, &opts)?,
                FieldSpec::Prime { .. } => commands::cmd_compare::<GfP>(&pf, &lf, &rf, &opts)?,
            };
            eprint!("{report}");
            Ok(())
        }
        Command::Massey { common, classes } => {
            let mut pf: ProblemFile = format::read_json(&common.input)?;
            pf.field = field_of(&pf, &common)?;
            let opts = options_of(&common);
            let names: [String; 3] = classes
                .try_into()
                .map_err(|_| CmdError::Invalid("massey needs exactly three classes".into()))?;
            let report = match pf.field {
                FieldSpec::Named(_) => commands::cmd_massey::<Rational>(&pf, &names, &opts)?,
                FieldSpec::Prime { .. } => commands::cmd_massey::<GfP>(&pf, &names, &opts)?,
            };
            print!("{report}");
            Ok(())
        }
    }
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {}", err.message());
            std::process::exit(err.exit_code());
        }
    }
}
