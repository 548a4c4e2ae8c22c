//! `datasale` command line: load a scenario, run one experiment, emit a report.
//!
//! Exit codes: 0 on success, 1 for configuration or usage errors, 2 when a
//! verification (oracle comparison, opt-in equilibrium construction) fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod report;
pub mod scenario;

use commands::{MechanismChoice, OptinRule, SearchConstraintArg, SearchFamily, SweepParam, Target};
use report::Format;
use scenario::{Loaded, SelectionSpec};

#[derive(Debug, Parser)]
#[command(
    name = "datasale",
    version,
    about = "Location-data sales in a Hotelling duopoly"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scenario file (TOML, or JSON including emitted reports).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Also write the report here: CSV with `--format csv`, JSON otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Location grid step for grid-based checks.
    #[arg(long, global = true)]
    pub grid: Option<f64>,
    /// max, min, or a fixed uniform price for firm A.
    #[arg(long = "price-selection", global = true, value_parser = SelectionSpec::parse)]
    pub price_selection: Option<SelectionSpec>,
    /// Accepted for compatibility; every computation is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the scenario's mechanism.
    Equilibrium,
    /// Compare two mechanisms' outcomes.
    Compare {
        #[arg(long, value_enum, default_value_t = MechanismChoice::None)]
        baseline: MechanismChoice,
        #[arg(long, value_enum, default_value_t = MechanismChoice::Scenario)]
        candidate: MechanismChoice,
    },
    /// Direct effect of sharing one consumer.
    Lemma1 {
        #[arg(long)]
        theta: f64,
        /// Defaults to the largest optimal no-sharing price.
        #[arg(long = "pA")]
        p_a: Option<f64>,
    },
    /// Construct or search for optimal mechanisms.
    Optimize {
        #[arg(long, value_enum, default_value_t = Target::Joint)]
        target: Target,
        #[arg(long = "pA")]
        p_a: Option<f64>,
        /// Consumers available for sharing, as `lo:hi[,lo:hi...]`.
        #[arg(long)]
        feasible: Option<String>,
        #[arg(long, value_enum, default_value_t = SearchFamily::Single)]
        family: SearchFamily,
        #[arg(long, default_value_t = 20)]
        endpoints: usize,
        #[arg(long, value_enum, default_value_t = SearchConstraintArg::None)]
        constraint: SearchConstraintArg,
    },
    /// Check or construct an opt-in equilibrium.
    Optin {
        /// Build the candidate around `--pA` instead of reading `--c-star`.
        #[arg(long)]
        construct: bool,
        #[arg(long = "pA")]
        p_a: Option<f64>,
        #[arg(long = "c-star")]
        c_star: Option<String>,
        #[arg(long, value_enum, default_value_t = OptinRule::FeasibleOptimum)]
        rule: OptinRule,
    },
    /// Vary one parameter and tabulate outcomes.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
    },
    /// Compare closed-form results with the brute-force oracle.
    Validate {
        #[arg(long, default_value_t = 20)]
        scenarios: usize,
    },
}

/// Marks a failed verification; mapped to exit code 2.
#[derive(Debug)]
pub struct VerificationFailed(pub String);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_VERIFY: u8 = 2;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut impl Write, stderr: &mut impl Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            if e.downcast_ref::<VerificationFailed>().is_some() {
                EXIT_VERIFY
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn execute(cli: &Cli, stdout: &mut impl Write) -> anyhow::Result<()> {
    let g = &cli.global;
    let mut loaded = match &g.config {
        Some(path) => Loaded::read(path)?,
        None => Loaded::defaults(),
    };
    if let Some(grid) = g.grid {
        loaded.scenario.solver.grid = grid;
    }
    if let Some(sel) = g.price_selection {
        loaded.scenario.solver.price_selection = sel;
    }
    let model = loaded.build()?;
    let (output, verdict) = commands::dispatch(&cli.command, &loaded, &model)?;

    stdout.write_all(output.render(g.format).as_bytes())?;
    if let Some(path) = &g.out {
        let body = match g.format {
            Format::Csv => output.csv(),
            _ => output.json(),
        };
        std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    match verdict {
        Some(reason) => Err(VerificationFailed(reason).into()),
        None => Ok(()),
    }
}
