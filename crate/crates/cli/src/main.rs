mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::Failure;
use crate::config::Settings;
use crate::table::Format;

#[derive(Parser)]
#[command(
    name = "ivput",
    version,
    about = "Perpetual American put under interactive volatility"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the pre-hit case and report boundaries and the action at --spot
    Classify(Shared),
    /// Write the b0/b1/s0_max curves over mu0 and the b* - s0 curve over s0
    Curves(CurvesArgs),
    /// Write the gain and both value functions over a price grid
    ValueProfile(ProfileArgs),
    /// Screen candidate strikes at the given spot
    SelectStrike(StrikeArgs),
    /// Monte Carlo attainment and dominance checks for the classified case
    Verify(VerifyArgs),
    /// Monte Carlo value of a single stopping rule
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
pub struct Shared {
    /// Flat `key = value` file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files; tables go to stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, allow_negative_numbers = true)]
    mu0: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu1: Option<f64>,
    #[arg(long)]
    sigma1: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "strike", alias = "strike-k")]
    strike_k: Option<f64>,
    #[arg(long)]
    s0: Option<f64>,
    /// Current price
    #[arg(long)]
    spot: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of simulated paths
    #[arg(long)]
    paths: Option<usize>,
    /// Base time step in years
    #[arg(long)]
    dt: Option<f64>,
    /// Truncation horizon in years
    #[arg(long)]
    tmax: Option<f64>,
    /// Monitor barriers on the grid only, without the bridge correction
    #[arg(long)]
    no_bridge: bool,
}

impl Shared {
    fn flags(&self) -> Settings {
        Settings {
            mu0: self.mu0,
            sigma0: self.sigma0,
            mu1: self.mu1,
            sigma1: self.sigma1,
            lambda: self.lambda,
            alpha: self.alpha,
            strike_k: self.strike_k,
            s0: self.s0,
            spot: self.spot,
            rho0: None,
            seed: self.seed,
            paths: self.paths,
            dt: self.dt,
            tmax: self.tmax,
        }
    }

    pub fn settings(&self, extra: Settings) -> Result<Settings, Failure> {
        let file = match &self.config {
            Some(p) => Settings::load(p).map_err(|e| Failure::Usage(e.to_string()))?,
            None => Settings::default(),
        };
        Ok(file.overlay(self.flags()).overlay(extra))
    }
}

/// A grid given either as `min..=max` in steps or as an explicit list.
#[derive(Debug, Clone)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
    pub values: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
struct CurvesArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    mu0_min: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    mu0_max: f64,
    #[arg(long, default_value_t = 0.005)]
    mu0_step: f64,
    /// Explicit mu0 values, replacing the stepped grid
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    mu0_values: Option<Vec<f64>>,
    #[arg(long, default_value_t = 14000.0)]
    s0_min: f64,
    #[arg(long, default_value_t = 16500.0)]
    s0_max: f64,
    #[arg(long, default_value_t = 10.0)]
    s0_step: f64,
    /// Explicit s0 values, replacing the stepped grid
    #[arg(long, value_delimiter = ',')]
    s0_values: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
struct ProfileArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long, default_value_t = 10000.0)]
    s_min: f64,
    #[arg(long, default_value_t = 20000.0)]
    s_max: f64,
    #[arg(long, default_value_t = 10.0)]
    s_step: f64,
    /// Explicit prices, replacing the stepped grid
    #[arg(long, value_delimiter = ',')]
    s_values: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
struct StrikeArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "15000,15500,16000,16500,17000,17500,18000"
    )]
    strikes: Vec<f64>,
    /// Drift bump over the crossing drift [default: 0.163]
    #[arg(long)]
    rho0: Option<f64>,
}

#[derive(Args, Clone)]
struct VerifyArgs {
    #[command(flatten)]
    shared: Shared,
    /// Multiply the excited boundary by this factor before checking
    #[arg(long)]
    scale_b1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleKind {
    Immediate,
    /// Stop at `S <= level` in either live regime
    HitLevel,
    /// Stop at `S <= b1`
    ExcitedOptimal,
    /// Stop at `S <= level` before the switch
    HitLevelPre,
    /// Stop at `S >= level` before the switch
    HitUpperPre,
    /// Stop on entering `[lo, hi]` before the switch
    HitBandPre,
    AtAbsorption,
    /// The solved optimal rule for the classified case
    PreRegimeOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeKind {
    Pre,
    Excited,
    Absorbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PayoffKind {
    Put,
    /// Discount factor at the stop
    Discount,
}

#[derive(Args, Clone)]
struct SimulateArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long, value_enum)]
    rule: RuleKind,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    /// Regime at the start price (--spot)
    #[arg(long, value_enum, default_value = "pre")]
    regime: RegimeKind,
    #[arg(long, value_enum, default_value = "put")]
    payoff: PayoffKind,
}

fn grid(min: f64, max: f64, step: f64, values: Option<Vec<f64>>) -> Grid {
    Grid {
        min,
        max,
        step,
        values,
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Classify(a) => commands::classify(&a),
        Command::Curves(a) => commands::curves(
            &a.shared,
            &grid(a.mu0_min, a.mu0_max, a.mu0_step, a.mu0_values),
            &grid(a.s0_min, a.s0_max, a.s0_step, a.s0_values),
        ),
        Command::ValueProfile(a) => {
            commands::value_profile(&a.shared, &grid(a.s_min, a.s_max, a.s_step, a.s_values))
        }
        Command::SelectStrike(a) => commands::select_strike(&a.shared, &a.strikes, a.rho0),
        Command::Verify(a) => commands::verify(&a.shared, a.scale_b1),
        Command::Simulate(a) => commands::simulate(
            &a.shared,
            commands::RuleSpec {
                kind: a.rule,
                level: a.level,
                lo: a.lo,
                hi: a.hi,
            },
            a.regime,
            a.payoff,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ivput: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
