use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "ringwave",
    version,
    about = "Traveling vortex rings of the fractional axisymmetric active vector system",
    subcommand_required = true,
    arg_required_else_help = true,
    args_override_self = true
)]
pub struct Cli {
    /// Plain-text key=value file; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (falls back to RINGWAVE_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Also write every human-readable table as CSV.
    #[arg(long, global = true)]
    pub csv: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tabulate F_a and F_a' on a log-spaced s ladder.
    #[command(args_override_self = true)]
    KernelTable(KernelTableArgs),
    /// Stream function of a field file.
    #[command(args_override_self = true)]
    Stream(StreamArgs),
    /// E, E2, impulse, mass and norms of a field file.
    #[command(args_override_self = true)]
    Functionals(FunctionalsArgs),
    /// Apply a rearrangement or scaling to a field file.
    #[command(args_override_self = true)]
    Rearrange(RearrangeArgs),
    /// Compute a traveling wave by constrained maximization.
    #[command(args_override_self = true)]
    Ring(RingArgs),
    /// Evolve a field under the transport equation.
    #[command(args_override_self = true)]
    Evolve(EvolveArgs),
    /// Evolve a wave and compare it with its rigid translate.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
}

/// Fractional order, with an optional override of the kernel constant.
#[derive(Args, Debug, Clone, Serialize)]
pub struct OrderArgs {
    #[arg(long = "a", default_value_t = 0.75)]
    #[serde(rename = "a")]
    pub a: f64,
    /// Replaces the Riesz constant c_a.
    #[arg(long = "c-a")]
    #[serde(rename = "c-a")]
    pub c_a: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct KernelTableArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub order: OrderArgs,
    #[arg(long = "s-min", default_value_t = 1e-6)]
    #[serde(rename = "s-min")]
    pub s_min: f64,
    #[arg(long = "s-max", default_value_t = 1e6)]
    #[serde(rename = "s-max")]
    pub s_max: f64,
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    /// Also write <prefix>.csv and <prefix>.json.
    #[arg(long = "out-prefix")]
    #[serde(rename = "out-prefix")]
    pub out_prefix: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RuleArg {
    CellAverage,
    Subtract,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct StreamArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub order: OrderArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cell-average")]
    pub rule: RuleArg,
    #[arg(long = "out-prefix", default_value = "stream")]
    #[serde(rename = "out-prefix")]
    pub out_prefix: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FunctionalsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub order: OrderArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Also report membership in K_mu and K'_mu.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long = "out-prefix")]
    #[serde(rename = "out-prefix")]
    pub out_prefix: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RearrangeOp {
    Steiner,
    Translate,
    ScaleImpulse,
    ScaleEnergy,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RearrangeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub order: OrderArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub op: Option<RearrangeOp>,
    /// Radial shift for `translate`.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Dilation factor for the scalings.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long = "out-prefix", default_value = "rearranged")]
    #[serde(rename = "out-prefix")]
    pub out_prefix: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SeedArg {
    Ball,
    Gaussian,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub order: OrderArgs,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 128)]
    pub nr: usize,
    #[arg(long, default_value_t = 256)]
    pub nz: usize,
    #[arg(long, default_value_t = 5.0)]
    pub rmax: f64,
    #[arg(long, default_value_t = 5.0)]
    pub zmax: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    #[arg(long = "max-iter", default_value_t = 2000)]
    #[serde(rename = "max-iter")]
    pub max_iter: usize,
    #[arg(long = "seed-profile", value_enum, default_value = "ball")]
    #[serde(rename = "seed-profile")]
    pub seed_profile: SeedArg,
    #[arg(long, value_enum, default_value = "cell-average")]
    pub rule: RuleArg,
    #[arg(long = "out-prefix", default_value = "ring")]
    #[serde(rename = "out-prefix")]
    pub out_prefix: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvolveArgs {
    /// Order of the dynamics; defaults to the one stored in the input.
    #[arg(long = "a")]
    #[serde(rename = "a")]
    pub a: Option<f64>,
    #[arg(long = "c-a")]
    #[serde(rename = "c-a")]
    pub c_a: Option<f64>,
    #[arg(long, conflicts_with = "from_ring")]
    pub input: Option<PathBuf>,
    /// JSON summary written by `ring`.
    #[arg(long = "from-ring")]
    #[serde(rename = "from-ring")]
    pub from_ring: Option<PathBuf>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub cfl: f64,
    #[arg(long = "diag-every", default_value_t = 10)]
    #[serde(rename = "diag-every")]
    pub diag_every: usize,
    /// Write a field snapshot every this many steps (0: final state only).
    #[arg(long = "snapshot-every", default_value_t = 0)]
    #[serde(rename = "snapshot-every")]
    pub snapshot_every: usize,
    #[arg(long = "out-prefix", default_value = "evolve")]
    #[serde(rename = "out-prefix")]
    pub out_prefix: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    /// JSON summary written by `ring`.
    #[arg(long = "from-ring")]
    #[serde(rename = "from-ring")]
    pub from_ring: Option<PathBuf>,
    /// Final time; defaults to `distance` core radii of travel.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub distance: f64,
    #[arg(long, default_value_t = 0.5)]
    pub cfl: f64,
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    #[arg(long = "out-prefix")]
    #[serde(rename = "out-prefix")]
    pub out_prefix: Option<PathBuf>,
}
