mod evolve;
mod matching;
mod profiles;
mod residual;
mod sweep;

use crate::config::Config;
use crate::error::CliError;
use clap::Subcommand;
use smap::assembler::ApproximateSolution;
use smap::inner::{build_inner, InnerExpansion};
use smap::remote::{build_remote, RemoteOptions};
use smap::selfsim::{build_matched, far_field_fit};
use smap::{BlowupParams, RadialGrid};
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Build every layer and write the profile tables and the matching report.
    Profiles,
    /// Residual norms of u^(N) over a dyadic t-ladder.
    Residual,
    /// Run the flow from an initial field and record diagnostics.
    Evolve,
    /// Fit the bubble scale and rotation of u^(N) over a dyadic t-ladder.
    Match,
    /// Repeat one command over a list of values of one config key.
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Profiles => "profiles",
            Command::Residual => "residual",
            Command::Evolve => "evolve",
            Command::Match => "match",
            Command::Sweep => "sweep",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Command::Profiles, Command::Residual, Command::Evolve, Command::Match, Command::Sweep].into_iter().find(|c| c.name() == name)
    }
}

pub fn run(cmd: Command, config: &Config, out: &Path) -> Result<(), CliError> {
    match cmd {
        Command::Profiles => profiles::run(config, out),
        Command::Residual => residual::run(config, out),
        Command::Evolve => evolve::run(config, out),
        Command::Match => matching::run(config, out),
        Command::Sweep => sweep::run(config, out),
    }
}

fn remote_options(config: &Config) -> RemoteOptions {
    RemoteOptions { tail_cutoff: config.bool("remote.tail_cutoff"), r_max: None, table_nodes: config.usize("remote.table_nodes") }
}

fn inner_expansion(config: &Config, params: BlowupParams) -> Result<InnerExpansion, CliError> {
    let grid = RadialGrid::geometric(config.f64("inner.r_max"), config.usize("inner.nodes"), config.f64("inner.first_step"))?;
    Ok(build_inner(params, Arc::new(grid))?)
}

/// Inner, self-similar and remote layers for `params`.
fn solution(config: &Config, params: BlowupParams) -> Result<ApproximateSolution, CliError> {
    let inner = inner_expansion(config, params)?;
    let (selfsim, _) = build_matched(&inner, config.f64("selfsim.y_max"))?;
    let far = far_field_fit(&selfsim)?;
    let remote = build_remote(&selfsim, &far, remote_options(config))?;
    Ok(ApproximateSolution::from_parts(inner, selfsim, remote))
}

/// `t0 2^-k` for `k < points`.
fn dyadic(key: &str, t0: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points == 0 {
        return Err(CliError::Config(format!("{key}: empty t-ladder")));
    }
    if !(t0 > 0.0) {
        return Err(CliError::Config(format!("{key}: t0 must be positive")));
    }
    Ok((0..points).map(|k| t0 * 0.5f64.powi(k as i32)).collect())
}
