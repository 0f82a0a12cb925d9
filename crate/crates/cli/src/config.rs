//! Flat run configuration shared by every subcommand. Values come from the
//! command line and an optional `--config` JSON file; flags win.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Nem,
    Gibbs,
    Clr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryArg {
    Grid,
    Random,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// JSON file with defaults for any of these flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Directory holding sites.csv, observations.csv and landuse.csv.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sites: Option<PathBuf>,
    #[arg(long, global = true)]
    pub observations: Option<PathBuf>,
    #[arg(long, global = true)]
    pub landuse: Option<PathBuf>,
    /// Edge list (site_i,site_j by site id) replacing the Voronoi lattice.
    #[arg(long, global = true)]
    pub edges: Option<PathBuf>,
    /// Fit result JSON; repeat for `compare`.
    #[arg(long, global = true, num_args = 1)]
    pub fit: Option<Vec<PathBuf>>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Natural-log transform observation values on ingestion.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub log: Option<bool>,
    /// Progress messages on standard error.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub verbose: Option<bool>,

    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    /// Number of mixture components.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// NEM penalty weight, or `auto` for held-out selection.
    #[arg(long, global = true)]
    pub lambda: Option<String>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Recompute component bases from hardened labels during NEM.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub update_basis: Option<bool>,

    #[arg(long, global = true)]
    pub sweeps: Option<usize>,
    #[arg(long, global = true)]
    pub burn_in: Option<usize>,
    #[arg(long, global = true)]
    pub thin: Option<usize>,
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub shared_variance: Option<bool>,
    #[arg(long, global = true)]
    pub delta_init: Option<f64>,
    #[arg(long, global = true)]
    pub delta_proposal_sd: Option<f64>,
    #[arg(long, global = true)]
    pub aux_sweeps: Option<usize>,
    /// Inverse-gamma shape of the noise-variance prior.
    #[arg(long = "prior-a", global = true)]
    #[serde(rename = "prior_a")]
    pub a: Option<f64>,
    /// Inverse-gamma scale of the noise-variance prior.
    #[arg(long = "prior-b", global = true)]
    #[serde(rename = "prior_b")]
    pub b: Option<f64>,

    /// Basis functions in the CLR model (1 to 3).
    #[arg(long, global = true)]
    pub n_basis: Option<usize>,
    /// Seasonal period in grid steps.
    #[arg(long, global = true)]
    pub period: Option<usize>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub robust: Option<bool>,

    #[arg(long, global = true)]
    pub n_sites: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub geometry: Option<GeometryArg>,
    #[arg(long, global = true)]
    pub width: Option<usize>,
    #[arg(long, global = true)]
    pub height: Option<usize>,
    #[arg(long, global = true)]
    pub extent: Option<f64>,
    /// Potts interaction of the simulated field.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub t_len: Option<usize>,
    /// Share of the true label in simulated compositions.
    #[arg(long, global = true)]
    pub q: Option<f64>,
    #[arg(long, global = true)]
    pub noise_sd: Option<f64>,
}

macro_rules! prefer {
    ($flags:ident, $file:ident; $($field:ident),* $(,)?) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field; } )*
    };
}

impl Flags {
    /// Fills every unset flag from the `--config` file, if any.
    pub fn resolve(mut self) -> Result<Flags, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::usage("MissingFile", format!("{}: {e}", path.display())))?;
        let file: Flags = serde_json::from_str(&text)
            .map_err(|e| CliError::usage("InvalidConfig", format!("{}: {e}", path.display())))?;
        prefer!(self, file;
            data, sites, observations, landuse, edges, fit, out, seed, jobs, log, verbose,
            method, k, lambda, restarts, max_iters, tol, update_basis,
            sweeps, burn_in, thin, chains, shared_variance, delta_init, delta_proposal_sd, aux_sweeps, a, b,
            n_basis, period, robust,
            n_sites, geometry, width, height, extent, delta, t_len, q, noise_sd,
        );
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::usage("InvalidArguments", "--out is required"))
    }

    /// Paths of the three ingestion tables.
    pub fn input_paths(&self) -> Result<[PathBuf; 3], CliError> {
        let pick = |explicit: &Option<PathBuf>, name: &str| -> Result<PathBuf, CliError> {
            match (explicit, &self.data) {
                (Some(p), _) => Ok(p.clone()),
                (None, Some(dir)) => Ok(dir.join(name)),
                (None, None) => Err(CliError::usage(
                    "InvalidArguments",
                    format!("--data or an explicit path for {name} is required"),
                )),
            }
        };
        Ok([
            pick(&self.sites, landmix::dataset::SITES_FILE)?,
            pick(&self.observations, landmix::dataset::OBSERVATIONS_FILE)?,
            pick(&self.landuse, landmix::dataset::LANDUSE_FILE)?,
        ])
    }

    /// `Some(λ)` for a fixed weight, `None` for automatic selection.
    pub fn lambda(&self) -> Result<Option<f64>, CliError> {
        match self.lambda.as_deref() {
            None | Some("auto") => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|l| l.is_finite() && *l >= 0.0)
                .map(Some)
                .ok_or_else(|| CliError::usage("InvalidConfig", format!("lambda must be `auto` or a non-negative number, got {v:?}"))),
        }
    }
}
