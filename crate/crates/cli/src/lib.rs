//! The `lambdacoal` command-line tool.

pub mod benchmark;
pub mod config;
pub mod error;
pub mod fit;
pub mod output;
pub mod simulate;

use std::path::Path;

use config::{BenchmarkSettings, Cli, Command, FileConfig, FitSettings, ReplayArgs, SimulateSettings};
use error::{read_input, CliError, Result};
use output::{sha256_hex, OutDir, RunManifest};

pub fn run(cli: Cli) -> Result<RunManifest> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(args) => {
            let (settings, dir) = args.resolve(file.simulate)?;
            simulate::run(&settings, OutDir::create(&dir)?)
        }
        Command::Fit(args) => {
            let (settings, dir) = args.resolve(file.fit)?;
            fit::run(&settings, OutDir::create(&dir)?)
        }
        Command::Benchmark(args) => {
            let (settings, dir) = args.resolve(file.benchmark)?;
            benchmark::run(&settings, OutDir::create(&dir)?)
        }
        Command::Replay(args) => replay(&args),
    }
}

fn settings<T: serde::de::DeserializeOwned>(m: &RunManifest) -> Result<T> {
    serde_json::from_value(m.config.clone())
        .map_err(|e| CliError::Input(format!("manifest config for {}: {e}", m.command)))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    serde_json::from_slice(&read_input(path)?)
        .map_err(|e| CliError::Input(format!("{} is not a run manifest: {e}", path.display())))
}

/// Checks the recorded inputs, reruns the command into `args.out_dir` and
/// compares every output hash.
pub fn replay(args: &ReplayArgs) -> Result<RunManifest> {
    let recorded = read_manifest(&args.manifest)?;
    for input in &recorded.inputs {
        let now = sha256_hex(&read_input(Path::new(&input.path))?);
        if now != input.sha256 {
            return Err(CliError::Input(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let out = OutDir::create(&args.out_dir)?;
    let replayed = match recorded.command.as_str() {
        "simulate" => simulate::run(&settings::<SimulateSettings>(&recorded)?, out)?,
        "fit" => fit::run(&settings::<FitSettings>(&recorded)?, out)?,
        "benchmark" => benchmark::run(&settings::<BenchmarkSettings>(&recorded)?, out)?,
        other => return Err(CliError::Input(format!("cannot replay command {other:?}"))),
    };
    if replayed.outputs != recorded.outputs {
        let differing: Vec<&str> = recorded
            .outputs
            .iter()
            .filter(|f| !replayed.outputs.contains(f))
            .map(|f| f.path.as_str())
            .collect();
        return Err(CliError::ReplayMismatch(format!("differing outputs: {differing:?}")));
    }
    println!("replay identical: {} files", replayed.outputs.len());
    Ok(replayed)
}
