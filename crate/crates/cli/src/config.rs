//! Command-line flags, the TOML config file and their merge. A flag given
//! on the command line wins over the same key in the file.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lambdacoal::estimators::{Integrator, Mass};
use lambdacoal::{FitConfig, LambdaMeasure, Method, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::{read_input, CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "lambdacoal", version, about = "Simulate Beta-coalescent genealogies and infer Ne(t) and alpha")]
pub struct Cli {
    /// TOML file with `[simulate]`, `[fit]` and `[benchmark]` tables of flag
    /// values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate genealogies and write Newick and statistics files.
    Simulate(SimulateArgs),
    /// Fit an estimator to a dated Newick tree.
    Fit(FitArgs),
    /// Run a factorial simulation study and score every method.
    Benchmark(BenchmarkArgs),
    /// Rerun a recorded command and check its outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// Samples per sampling time, e.g. `25,25`.
    #[arg(long, value_delimiter = ',')]
    pub n_per_time: Option<Vec<usize>>,
    /// Sampling times before the most recent sample, e.g. `0,1`.
    #[arg(long, value_delimiter = ',')]
    pub sample_times: Option<Vec<f64>>,
    /// `uniform:<level>`, `exp:<scale>,<rate>`, `boombust:<scale>,<center>`,
    /// `piecewise:<t>/<v>,...` or a preset name.
    #[arg(long)]
    pub trajectory: Option<String>,
    /// `kingman`, `beta:<alpha>`, `bs` or `pointmass:<x>`.
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitArgs {
    /// Newick file; branch lengths in time units.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// CSV of `label,date` rows (calendar dates, larger is more recent).
    #[arg(long)]
    pub dates: Option<PathBuf>,
    /// `bs-mle`, `hybrid`, `mcmc` or `laplace`.
    #[arg(long)]
    pub method: Option<String>,
    /// Measure held fixed by `laplace`.
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub leapfrog_steps: Option<usize>,
    /// Fixed HMC step size; tuned during burn-in when absent.
    #[arg(long)]
    pub step_size: Option<f64>,
    /// `split` or `leapfrog`.
    #[arg(long)]
    pub integrator: Option<String>,
    /// `precision` or `identity`.
    #[arg(long)]
    pub mass: Option<String>,
    #[arg(long)]
    pub tau_shape: Option<f64>,
    #[arg(long)]
    pub tau_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BenchmarkArgs {
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// `iso`, `het2`, `het4` or `split:<t>/<fraction>;...`.
    #[arg(long, value_delimiter = ',')]
    pub schedules: Option<Vec<String>>,
    /// Trajectory specs separated by `;`, e.g. `uniform;exp:1000,1`.
    #[arg(long, value_delimiter = ';')]
    pub trajectories: Option<Vec<String>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// `manifest.json` written by an earlier run.
    pub manifest: PathBuf,
    /// Where to write the replayed outputs.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub simulate: SimulateArgs,
    pub fit: FitArgs,
    pub benchmark: BenchmarkArgs,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let bytes = read_input(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::Input(format!("{} is not UTF-8", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }
}

macro_rules! merge {
    ($flags:expr, $file:expr, $($field:ident),+) => {
        $( $flags.$field = $flags.$field.take().or($file.$field); )+
    };
}

fn input<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| CliError::Input(e.to_string()))
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| CliError::Input(format!("--{flag} is required")))
}

/// Resolved `simulate` settings, recorded in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSettings {
    pub n_per_time: Vec<usize>,
    pub sample_times: Vec<f64>,
    pub trajectory: String,
    pub measure: String,
    pub replicates: usize,
    pub seed: u64,
}

impl SimulateArgs {
    pub fn resolve(mut self, file: SimulateArgs) -> Result<(SimulateSettings, PathBuf)> {
        merge!(self, file, n_per_time, sample_times, trajectory, measure, replicates, seed, out_dir);
        let n_per_time = require(self.n_per_time, "n-per-time")?;
        let sample_times = self.sample_times.unwrap_or_else(|| vec![0.0]);
        if n_per_time.len() != sample_times.len() {
            return Err(CliError::Input(format!(
                "{} sample counts for {} sampling times",
                n_per_time.len(),
                sample_times.len()
            )));
        }
        let settings = SimulateSettings {
            n_per_time,
            sample_times,
            trajectory: self.trajectory.unwrap_or_else(|| "uniform".into()),
            measure: self.measure.unwrap_or_else(|| "kingman".into()),
            replicates: self.replicates.unwrap_or(1),
            seed: self.seed.unwrap_or(1),
        };
        if settings.replicates == 0 {
            return Err(CliError::Input("--replicates must be positive".into()));
        }
        input(settings.trajectory.parse::<Trajectory>())?;
        input(settings.measure.parse::<LambdaMeasure>())?;
        Ok((settings, require(self.out_dir, "out-dir")?))
    }
}

/// Resolved `fit` settings, recorded in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSettings {
    pub tree: PathBuf,
    pub dates: Option<PathBuf>,
    pub method: Method,
    pub measure: Option<String>,
    pub seed: u64,
    pub fit: FitConfig,
}

fn absolute(path: PathBuf) -> Result<PathBuf> {
    std::fs::canonicalize(&path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

impl FitArgs {
    pub fn resolve(mut self, file: FitArgs) -> Result<(FitSettings, PathBuf)> {
        merge!(
            self, file, tree, dates, method, measure, grid_size, iterations, burn_in, leapfrog_steps, step_size,
            integrator, mass, tau_shape, tau_rate, seed, out
        );
        let mut fit = FitConfig::default();
        if let Some(v) = self.grid_size {
            fit.grid_points = v;
        }
        if let Some(v) = self.iterations {
            fit.iterations = v;
        }
        if let Some(v) = self.burn_in {
            fit.burn_in = v;
        }
        if let Some(v) = self.leapfrog_steps {
            fit.leapfrog_steps = v;
        }
        fit.step_size = self.step_size;
        if let Some(v) = &self.integrator {
            fit.integrator = input(v.parse::<Integrator>())?;
        }
        if let Some(v) = &self.mass {
            fit.mass = input(v.parse::<Mass>())?;
        }
        if let Some(v) = self.tau_shape {
            fit.tau_shape = v;
        }
        if let Some(v) = self.tau_rate {
            fit.tau_rate = v;
        }
        fit.validate()?;
        let method = input(self.method.as_deref().unwrap_or("mcmc").parse::<Method>())?;
        if let Some(m) = &self.measure {
            input(m.parse::<LambdaMeasure>())?;
        }
        if method == Method::Laplace && self.measure.is_none() {
            return Err(CliError::Input("--method laplace needs --measure".into()));
        }
        let settings = FitSettings {
            tree: absolute(require(self.tree, "tree")?)?,
            dates: self.dates.map(absolute).transpose()?,
            method,
            measure: self.measure,
            seed: self.seed.unwrap_or(1),
            fit,
        };
        Ok((settings, require(self.out, "out")?))
    }
}

/// Resolved `benchmark` settings, recorded in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkSettings {
    pub alphas: Vec<f64>,
    pub ns: Vec<usize>,
    pub schedules: Vec<String>,
    pub trajectories: Vec<String>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub jobs: usize,
    pub fit: FitConfig,
}

impl BenchmarkArgs {
    pub fn resolve(mut self, file: BenchmarkArgs) -> Result<(BenchmarkSettings, PathBuf)> {
        merge!(
            self, file, alphas, ns, schedules, trajectories, replicates, methods, seed, jobs, grid_size, iterations,
            burn_in, out_dir
        );
        let mut fit = FitConfig::default();
        if let Some(v) = self.grid_size {
            fit.grid_points = v;
        }
        if let Some(v) = self.iterations {
            fit.iterations = v;
        }
        if let Some(v) = self.burn_in {
            fit.burn_in = v;
        }
        fit.validate()?;
        let methods = self
            .methods
            .unwrap_or_else(|| vec!["bs-mle".into(), "hybrid".into(), "mcmc".into()])
            .iter()
            .map(|m| input(m.parse::<Method>()))
            .collect::<Result<Vec<_>>>()?;
        if methods.contains(&Method::Laplace) {
            return Err(CliError::Input("benchmark methods are bs-mle, hybrid and mcmc".into()));
        }
        let settings = BenchmarkSettings {
            alphas: self.alphas.unwrap_or_else(|| vec![1.0, 1.5, 1.8]),
            ns: self.ns.unwrap_or_else(|| vec![20, 50, 100]),
            schedules: self.schedules.unwrap_or_else(|| vec!["iso".into()]),
            trajectories: self.trajectories.unwrap_or_else(|| vec!["uniform".into(), "exp".into(), "boombust".into()]),
            replicates: self.replicates.unwrap_or(50),
            methods,
            seed: self.seed.unwrap_or(1),
            jobs: self.jobs.unwrap_or(1).max(1),
            fit,
        };
        if settings.replicates == 0 {
            return Err(CliError::Input("--replicates must be positive".into()));
        }
        for list_empty in [
            settings.alphas.is_empty(),
            settings.ns.is_empty(),
            settings.schedules.is_empty(),
            settings.trajectories.is_empty(),
            settings.methods.is_empty(),
        ] {
            if list_empty {
                return Err(CliError::Input("benchmark lists must be non-empty".into()));
            }
        }
        for a in &settings.alphas {
            input(LambdaMeasure::for_alpha(*a))?;
        }
        for t in &settings.trajectories {
            input(t.parse::<Trajectory>())?;
        }
        for s in &settings.schedules {
            for &n in &settings.ns {
                crate::benchmark::schedule(s, n)?;
            }
        }
        Ok((settings, require(self.out_dir, "out-dir")?))
    }
}
