//! Command definitions. Every argument struct both parses from the command
//! line and round-trips through JSON, so a run manifest can replay any
//! invocation bit-for-bit.

use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Build the generator matrix A on the degree-m monomial basis.
    Generator(GeneratorArgs),
    /// Conditional moment E[(X_t^x)^k].
    Moment(MomentArgs),
    /// Mixed moment E[X_t^n X_{t+s}^m] via the tower property.
    Mixed(MixedArgs),
    /// Exact price of a polynomial claim.
    Price(PriceArgs),
    /// Price gradient with respect to the observed market values.
    Greeks(GreeksArgs),
    /// Least-squares fit of a payoff, for use as a control variate.
    Fit(FitArgs),
    /// Simulate terminal states (one CSV row per path).
    Simulate(SimulateArgs),
    /// Plain vs control-variate estimator series over batches.
    CompareCv(CompareCvArgs),
    /// GMM calibration of a catalog model family.
    Calibrate(CalibrateArgs),
    /// Time-space harmonic polynomial Q(-s, .).
    Harmonic(HarmonicArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generator(_) => "generator",
            Command::Moment(_) => "moment",
            Command::Mixed(_) => "mixed",
            Command::Price(_) => "price",
            Command::Greeks(_) => "greeks",
            Command::Fit(_) => "fit",
            Command::Simulate(_) => "simulate",
            Command::CompareCv(_) => "compare-cv",
            Command::Calibrate(_) => "calibrate",
            Command::Harmonic(_) => "harmonic",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Generator(a) => &a.common,
            Command::Moment(a) => &a.common,
            Command::Mixed(a) => &a.common,
            Command::Price(a) => &a.common,
            Command::Greeks(a) => &a.common,
            Command::Fit(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::CompareCv(a) => &a.common,
            Command::Calibrate(a) => &a.common,
            Command::Harmonic(a) => &a.common,
        }
    }
}

/// Output format of the primary result file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CommonArgs {
    /// Random seed (ignored by purely deterministic commands).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; stdout when omitted. A manifest sidecar
    /// <out>.manifest.json is written alongside file outputs.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Monte Carlo worker threads (0 = all cores); never affects results.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GeneratorArgs {
    /// Model config: inline JSON or a path to a JSON document.
    #[arg(long)]
    pub config: String,
    /// Maximum polynomial degree m of the basis.
    #[arg(short = 'm', long)]
    pub degree: u32,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MomentArgs {
    #[arg(long)]
    pub config: String,
    /// Moment multi-index, e.g. "2" or "1,1".
    #[arg(short = 'k', long)]
    pub index: String,
    #[arg(short = 't', long)]
    pub t: f64,
    /// Start point, comma separated.
    #[arg(short = 'x', long)]
    pub x: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MixedArgs {
    #[arg(long)]
    pub config: String,
    /// Multi-index n applied at time t.
    #[arg(short = 'n', long)]
    pub n_index: String,
    /// Multi-index m applied at time t+s.
    #[arg(short = 'm', long)]
    pub m_index: String,
    #[arg(short = 't', long)]
    pub t: f64,
    #[arg(short = 's', long)]
    pub s: f64,
    #[arg(short = 'x', long)]
    pub x: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PriceArgs {
    #[arg(long)]
    pub config: String,
    /// Claim document: inline JSON or path, with dim/max_degree/
    /// coefficients/maturity; or use --poly for univariate coefficients.
    #[arg(long)]
    pub claim: Option<String>,
    /// Univariate claim coefficients "c0,c1,..." (requires --maturity).
    #[arg(long)]
    pub poly: Option<String>,
    #[arg(long)]
    pub maturity: Option<f64>,
    /// Valuation time, 0 <= t <= maturity.
    #[arg(short = 't', long, default_value_t = 0.0)]
    pub t: f64,
    /// Observed market values S_t, comma separated.
    #[arg(short = 's', long)]
    pub observed: String,
    /// Per-coordinate market map, e.g. "exp:1.0,id" (default all-identity).
    #[arg(long)]
    pub map: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

pub type GreeksArgs = PriceArgs;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    #[arg(long)]
    pub config: String,
    /// Payoff: "call:K", "put:K", "power:p" or "poly:c0,c1,...".
    #[arg(long)]
    pub payoff: String,
    #[arg(long)]
    pub degree: u32,
    /// Horizon; becomes the fitted claim's maturity.
    #[arg(short = 't', long)]
    pub t: f64,
    /// Start point of the pilot simulation.
    #[arg(long)]
    pub x0: String,
    #[arg(long, default_value_t = 10_000)]
    pub pilot_paths: usize,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long)]
    pub map: Option<String>,
    /// Sample scheme: pilot-simulated terminal points (default) or a
    /// uniform grid "lo:hi:count,..." per coordinate.
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: String,
    #[arg(short = 't', long)]
    pub t: f64,
    #[arg(long)]
    pub x0: String,
    #[arg(short = 'L', long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CompareCvArgs {
    #[arg(long)]
    pub config: String,
    #[arg(long)]
    pub payoff: String,
    /// Claim maturity and simulation horizon.
    #[arg(short = 'T', long)]
    pub maturity: f64,
    #[arg(long)]
    pub x0: String,
    #[arg(short = 'L', long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 50)]
    pub batches: usize,
    /// Degree of the pilot-fitted control polynomial.
    #[arg(long, default_value_t = 4)]
    pub degree: u32,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub pilot_paths: usize,
    #[arg(long)]
    pub map: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    /// Catalog family: bm, cir, vasicek or jacobi.
    #[arg(long)]
    pub family: String,
    /// Time-series CSV (single header row, one column per coordinate).
    #[arg(long)]
    pub data: String,
    /// Sampling interval of the series.
    #[arg(long)]
    pub dt: f64,
    /// Conditions "n|m|lag;..." with multi-indices like "1" or "1,1".
    #[arg(long)]
    pub conditions: String,
    /// Parameter box "lo:hi,lo:hi,..." in the family's parameter order.
    #[arg(long = "box")]
    pub parameter_box: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct HarmonicArgs {
    #[arg(long)]
    pub config: String,
    /// Polynomial document (dim/max_degree/coefficients) or path.
    #[arg(long)]
    pub f: Option<String>,
    /// Univariate coefficients "c0,c1,...".
    #[arg(long)]
    pub poly: Option<String>,
    #[arg(short = 's', long)]
    pub s: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}
