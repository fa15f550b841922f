use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Conditional-measurement purification of emitters in a cavity.
///
/// Every option can also be given in a key=value file passed with
/// `--config`; flags on the command line take precedence.
#[derive(Debug, Parser)]
#[command(name = "purify", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the purification loop and write one row per step.
    Protocol(ProtocolArgs),
    /// Eigen-decompose the conditional channel.
    Spectrum(SpectrumArgs),
    /// Run the loop over a grid of intervals and kept photon numbers.
    Sweep(SweepArgs),
    /// Run the built-in property suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct PhysicsArgs {
    /// Number of emitters [default: 2]
    #[arg(long)]
    pub emitters: Option<String>,
    /// Photon number that counts as success [default: 1]
    #[arg(long)]
    pub kept_photons: Option<String>,
    /// Dimensionless interaction time γτ, e.g. `pi/sqrt(10)`, or a grid
    /// `min:max:count`
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_tau: Option<String>,
    /// Coupling γ, multiplied with --tau [default: 1]
    #[arg(long)]
    pub gamma: Option<String>,
    /// Interaction time τ, multiplied with --gamma
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Comma-separated coupling multipliers for emitters 1, 2, ... [default: all 1]
    #[arg(long)]
    pub couplings: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Number of measurement rounds [default: 20]
    #[arg(long)]
    pub steps: Option<String>,
    /// Initial state: a label (singlet, w, ghz, t1..t4), a configuration
    /// such as `egg` or `100`, or `file:PATH` for a density matrix
    /// [default: first emitter excited]
    #[arg(long)]
    pub initial: Option<String>,
    /// Target state label [default: singlet for 2 emitters, w for 3]
    #[arg(long)]
    pub target: Option<String>,
    /// Closed forms used for reference columns: corrected or literal
    #[arg(long)]
    pub formula_variant: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct IoArgs {
    /// Output file [default: standard output]
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Output format: csv or json (verify also accepts text)
    #[arg(long)]
    pub format: Option<String>,
    /// key=value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProtocolArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub io: IoArgs,
    /// Also sample this many trajectories and add a sampled survival column
    #[arg(long)]
    pub trajectories: Option<String>,
    /// Seed for trajectory sampling (required with --trajectories)
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub io: IoArgs,
    /// Interval grid `min:max:count` (alternative to a grid in --gamma-tau)
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub jobs: Option<String>,
    /// Refuse grids with more points than this [default: 100000]
    #[arg(long)]
    pub max_points: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    /// Comma-separated coupling multipliers injected into every check
    #[arg(long)]
    pub couplings: Option<String>,
    /// Closed forms the simulation is compared against
    #[arg(long)]
    pub formula_variant: Option<String>,
    /// Seed for the randomized checks
    #[arg(long)]
    pub seed: Option<String>,
    #[command(flatten)]
    pub io: IoArgs,
}

type Flag<'a> = (&'static str, Option<&'a String>);

impl PhysicsArgs {
    fn flags(&self) -> [Flag<'_>; 6] {
        [
            ("emitters", self.emitters.as_ref()),
            ("kept-photons", self.kept_photons.as_ref()),
            ("gamma-tau", self.gamma_tau.as_ref()),
            ("gamma", self.gamma.as_ref()),
            ("tau", self.tau.as_ref()),
            ("couplings", self.couplings.as_ref()),
        ]
    }
}

impl RunArgs {
    fn flags(&self) -> [Flag<'_>; 4] {
        [
            ("steps", self.steps.as_ref()),
            ("initial", self.initial.as_ref()),
            ("target", self.target.as_ref()),
            ("formula-variant", self.formula_variant.as_ref()),
        ]
    }
}

impl IoArgs {
    fn flags(&self) -> [Flag<'_>; 1] {
        [("format", self.format.as_ref())]
    }
}

impl ProtocolArgs {
    pub fn flags(&self) -> Vec<Flag<'_>> {
        let mut v = Vec::new();
        v.extend(self.physics.flags());
        v.extend(self.run.flags());
        v.extend(self.io.flags());
        v.push(("trajectories", self.trajectories.as_ref()));
        v.push(("seed", self.seed.as_ref()));
        v
    }
}

impl SpectrumArgs {
    pub fn flags(&self) -> Vec<Flag<'_>> {
        let mut v = Vec::new();
        v.extend(self.physics.flags());
        v.extend(self.io.flags());
        v
    }
}

impl SweepArgs {
    pub fn flags(&self) -> Vec<Flag<'_>> {
        let mut v = Vec::new();
        v.extend(self.physics.flags());
        v.extend(self.run.flags());
        v.extend(self.io.flags());
        v.push(("grid", self.grid.as_ref()));
        v.push(("jobs", self.jobs.as_ref()));
        v.push(("max-points", self.max_points.as_ref()));
        v
    }
}

impl VerifyArgs {
    pub fn flags(&self) -> Vec<Flag<'_>> {
        let mut v = vec![
            ("couplings", self.couplings.as_ref()),
            ("formula-variant", self.formula_variant.as_ref()),
            ("seed", self.seed.as_ref()),
        ];
        v.extend(self.io.flags());
        v
    }
}
