use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use psnci_core::{CoeffConvention, EntangledFamily, LogBase, Representation, SqueezedFamily};

#[derive(Debug, Parser)]
#[command(
    name = "psnci",
    version,
    about = "Phase-space distributions and non-classicality indicators"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Half-width of every phase-space axis before squeeze scaling
    #[arg(long, global = true, value_parser = positive_f64)]
    pub extent: Option<f64>,
    /// Grid points per axis before squeeze scaling
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub points: Option<u32>,
    /// Fail with exit code 3 when an error estimate exceeds this
    #[arg(long, global = true, value_parser = positive_f64)]
    pub tol: Option<f64>,
    #[arg(long, global = true, default_value = "sqrt", value_parser = parse_convention)]
    pub coeff_convention: CoeffConvention,
    #[arg(long, global = true, default_value = "2", value_parser = parse_base)]
    pub entropy_base: LogBase,
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "PSNCI_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    /// Output file; a `<out>.config.json` sidecar is written next to CSV output
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the pair-term grid of a state as CSV
    Dist(DistArgs),
    /// Compute delta and eta for a state
    Indicator(IndicatorArgs),
    /// Sweep a² for an entangled family
    SweepA(SweepAArgs),
    /// Sweep the squeezing parameter for a squeezed superposition family
    SweepR(SweepRArgs),
    /// Entanglement entropy of a two-mode Fock superposition
    Entropy(StateArg),
    /// Run the invariant suites
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct StateArg {
    /// State as inline JSON or a path to a JSON file
    #[arg(long)]
    pub state: String,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[command(flatten)]
    pub state: StateArg,
    #[arg(long, default_value = "wigner", value_parser = parse_rep)]
    pub rep: Representation,
}

#[derive(Debug, Args)]
pub struct IndicatorArgs {
    #[command(flatten)]
    pub state: StateArg,
    #[arg(long = "rep", visible_alias = "reps", value_delimiter = ',', default_value = "wigner,husimi,rivier", value_parser = parse_rep)]
    pub reps: Vec<Representation>,
}

#[derive(Debug, Args)]
pub struct SweepAArgs {
    /// entangledNM, e.g. entangled01 or entangled12
    #[arg(long, value_parser = parse_entangled)]
    pub family: EntangledFamily,
    /// Evenly spaced a² values over [0, 1]
    #[arg(long, default_value_t = 21, value_parser = clap::value_parser!(u32).range(1..), conflicts_with = "a2")]
    pub steps: u32,
    /// Explicit a² values
    #[arg(long, value_delimiter = ',')]
    pub a2: Option<Vec<f64>>,
    #[arg(long = "rep", visible_alias = "reps", value_delimiter = ',', default_value = "wigner,husimi,rivier", value_parser = parse_rep)]
    pub reps: Vec<Representation>,
    /// Exchange the two modes of every term
    #[arg(long)]
    pub swap_modes: bool,
}

#[derive(Debug, Args)]
pub struct SweepRArgs {
    /// psi00r or psi01r
    #[arg(long, value_parser = parse_squeezed)]
    pub family: SqueezedFamily,
    /// Amplitudes of the squeezed term
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7")]
    pub a: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub rmax: f64,
    /// Evenly spaced r values over [0, rmax]
    #[arg(long, default_value_t = 9, value_parser = clap::value_parser!(u32).range(1..))]
    pub steps: u32,
    #[arg(long, default_value = "wigner", value_parser = parse_rep)]
    pub rep: Representation,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long = "rep", visible_alias = "reps", value_delimiter = ',', default_value = "wigner,husimi,rivier", value_parser = parse_rep)]
    pub reps: Vec<Representation>,
    /// Skip the 121 vs 161 point comparison
    #[arg(long)]
    pub skip_grid_halving: bool,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("expected a positive number, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_rep(s: &str) -> Result<Representation, String> {
    s.parse().map_err(|e: psnci_core::Error| e.to_string())
}

fn parse_convention(s: &str) -> Result<CoeffConvention, String> {
    s.parse().map_err(|e: psnci_core::Error| e.to_string())
}

fn parse_base(s: &str) -> Result<LogBase, String> {
    s.parse().map_err(|e: psnci_core::Error| e.to_string())
}

fn parse_entangled(s: &str) -> Result<EntangledFamily, String> {
    let digits = s
        .strip_prefix("entangled")
        .ok_or("expected entangledNM, e.g. entangled01")?;
    let labels: Vec<u32> = digits
        .chars()
        .map(|c| c.to_digit(10))
        .collect::<Option<_>>()
        .ok_or("labels must be digits")?;
    match labels[..] {
        [n_low, n_high] if n_low < n_high && n_high <= 4 => Ok(EntangledFamily { n_low, n_high }),
        _ => Err(format!("'{s}': need two labels with n_low < n_high <= 4")),
    }
}

fn parse_squeezed(s: &str) -> Result<SqueezedFamily, String> {
    match s {
        "psi00r" => Ok(SqueezedFamily::Psi00r),
        "psi01r" => Ok(SqueezedFamily::Psi01r),
        _ => Err(format!("unknown family '{s}' (psi00r or psi01r)")),
    }
}
