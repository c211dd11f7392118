use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::OutputFormat;

/// CSL collapse-model bounds from room-temperature phonon entanglement
/// between two diamonds.
#[derive(Debug, Parser)]
#[command(name = "csl-bounds", version, about, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file (directory for `exclusion`); stdout when omitted.
    #[arg(long, short, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Output format [default: csv].
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Exclusion threshold on the decoherence exponent 4ηΔz²T.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Seed for the Monte Carlo and random-offset streams [default: 1].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// η evaluation route for `eta`.
    #[arg(long, global = true, value_enum, default_value_t = Method::Closed)]
    pub method: Method,
    /// Count every nucleon in the mass density (η scales by A²).
    #[arg(long, global = true)]
    pub nucleon_mass_convention: bool,
    /// JSON geometry file replacing the preset.
    #[arg(long, global = true, value_name = "PATH")]
    pub geometry: Option<PathBuf>,
    /// Collapse rate λ, s⁻¹.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Correlation length r_C, m.
    #[arg(long = "r-c", global = true)]
    pub r_c: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Closed,
    Quadrature,
    Mc,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruncationArg {
    Exact,
    FirstOrder,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decoherence coefficient η and the geometry factor η/λ.
    Eta {
        /// Monte-Carlo sample pairs.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
    /// Two-phonon density-matrix trajectory, analytic and numerical.
    Evolve {
        /// End time in seconds (default: the probe delay).
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Override Λ, s⁻¹.
        #[arg(long)]
        rate: Option<f64>,
        /// Override ω, s⁻¹.
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Anti-Stokes fringe probabilities over a φ_a sweep.
    Fringe {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phi_s: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phi_a_min: f64,
        #[arg(long, default_value_t = std::f64::consts::TAU, allow_negative_numbers = true)]
        phi_a_max: f64,
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[arg(long, default_value_t = 0.05)]
        eps_s: f64,
        #[arg(long, default_value_t = 0.05)]
        eps_a: f64,
        #[arg(long, value_enum, default_value_t = TruncationArg::Exact)]
        truncation: TruncationArg,
    },
    /// Exclusion scan and boundary in the (λ, r_C) plane.
    Exclusion {
        /// Points on the λ axis (log-spaced grids only).
        #[arg(long)]
        lambda_points: Option<usize>,
        /// Points on the r_C axis (log-spaced grids only).
        #[arg(long)]
        rc_points: Option<usize>,
    },
    /// Run every oracle and invariant check and print a summary table.
    Validate {
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
        #[arg(long, hide = true, default_value_t = 1.0)]
        perturb_gamma_perp: f64,
    },
}
