//! Factorial simulation study: every (trajectory, α, n, schedule) cell gets
//! `replicates` simulated trees, each fitted by every method.

use lambdacoal::estimators::quantile;
use lambdacoal::{extract_stats, fit, score_trajectory, LambdaMeasure, Method, SamplingSchedule, Simulator, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::BenchmarkSettings;
use crate::error::{CliError, Result};
use crate::output::{csv_bytes, OutDir, RunManifest};
use crate::simulate::replicate_rng;

/// `iso`; `het2` (times 0, 1; 50/50); `het4` (times 0, 1, 2, 3;
/// 50/30/10/10); or `split:<t>/<fraction>;...`.
pub fn schedule(name: &str, n: usize) -> Result<SamplingSchedule> {
    let s = match name {
        "iso" => SamplingSchedule::isochronous(n),
        "het2" => SamplingSchedule::split(n, vec![0.0, 1.0], &[0.5, 0.5]),
        "het4" => SamplingSchedule::split(n, vec![0.0, 1.0, 2.0, 3.0], &[0.5, 0.3, 0.1, 0.1]),
        _ => {
            let bad = || CliError::Input(format!("unknown schedule {name:?}"));
            let pairs = name.strip_prefix("split:").ok_or_else(bad)?;
            let mut times = Vec::new();
            let mut fractions = Vec::new();
            for pair in pairs.split(';') {
                let (t, f) = pair.split_once('/').ok_or_else(bad)?;
                times.push(t.trim().parse::<f64>().map_err(|_| bad())?);
                fractions.push(f.trim().parse::<f64>().map_err(|_| bad())?);
            }
            SamplingSchedule::split(n, times, &fractions)
        }
    };
    s.map_err(|e| CliError::Input(format!("schedule {name:?} with n = {n}: {e}")))
}

#[derive(Debug, Clone)]
struct Task {
    trajectory: String,
    alpha: f64,
    n: usize,
    schedule: String,
    replicate: usize,
}

/// Scores of one method on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub method: Method,
    pub trajectory: String,
    pub alpha: f64,
    pub n: usize,
    pub schedule: String,
    pub replicate: usize,
    pub outcome: std::result::Result<Scores, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub alpha_hat: f64,
    pub coverage: f64,
    pub bias: f64,
    pub deviance: f64,
    pub mse: f64,
}

pub const REPLICATE_HEADER: [&str; 14] = [
    "method",
    "trajectory",
    "alpha",
    "n",
    "schedule",
    "replicate",
    "status",
    "alpha_hat",
    "coverage",
    "bias",
    "deviance",
    "mse",
    "grid_size",
    "error",
];

pub const SUMMARY_HEADER: [&str; 14] = [
    "method",
    "trajectory",
    "alpha",
    "n",
    "schedule",
    "replicates",
    "failed",
    "mean_alpha",
    "alpha_bias",
    "alpha_mse",
    "mean_coverage",
    "mean_bias",
    "median_deviance",
    "median_mse",
];

fn run_task(settings: &BenchmarkSettings, index: usize, task: &Task) -> Vec<Row> {
    let row = |method: Method, outcome| Row {
        method,
        trajectory: task.trajectory.clone(),
        alpha: task.alpha,
        n: task.n,
        schedule: task.schedule.clone(),
        replicate: task.replicate,
        outcome,
    };
    let prepared = (|| -> lambdacoal::Result<_> {
        let traj: Trajectory = task.trajectory.parse()?;
        let measure = LambdaMeasure::for_alpha(task.alpha)?;
        let schedule = schedule(&task.schedule, task.n).map_err(|e| lambdacoal::Error::InvalidArgument(e.to_string()))?;
        let mut rng = replicate_rng(settings.seed, index as u64);
        let tree = Simulator::new(&measure, task.n)?.simulate(&schedule, &traj, &mut rng)?;
        Ok((traj, extract_stats(&tree)?, rng))
    })();
    let (traj, data, mut rng) = match prepared {
        Ok(p) => p,
        Err(e) => return settings.methods.iter().map(|&m| row(m, Err(e.to_string()))).collect(),
    };
    settings
        .methods
        .iter()
        .map(|&method| {
            let mut method_rng = ChaCha8Rng::seed_from_u64(rng.random());
            let outcome = fit(&data, method, None, &settings.fit, &mut method_rng).and_then(|r| {
                let s = score_trajectory(&r.trajectory, &traj)?;
                Ok(Scores {
                    alpha_hat: r.alpha,
                    coverage: s.coverage,
                    bias: s.bias,
                    deviance: s.deviance,
                    mse: s.mse,
                })
            });
            row(method, outcome.map_err(|e| e.to_string()))
        })
        .collect()
}

pub fn replicate_csv(rows: &[Row], grid_size: usize) -> Vec<u8> {
    csv_bytes(
        &REPLICATE_HEADER,
        rows.iter().map(|r| {
            let mut v = vec![
                r.method.to_string(),
                r.trajectory.clone(),
                r.alpha.to_string(),
                r.n.to_string(),
                r.schedule.clone(),
                r.replicate.to_string(),
            ];
            match &r.outcome {
                Ok(s) => {
                    v.push("ok".into());
                    for x in [s.alpha_hat, s.coverage, s.bias, s.deviance, s.mse] {
                        v.push(x.to_string());
                    }
                    v.push(grid_size.to_string());
                    v.push(String::new());
                }
                Err(e) => {
                    v.push("error".into());
                    v.extend(std::iter::repeat_n(String::new(), 6));
                    v.push(e.clone());
                }
            }
            v
        }),
    )
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    quantile(&xs, 0.5)
}

/// Aggregate rows per (method, trajectory, α, n, schedule) in order of
/// first appearance.
pub fn summarize(rows: &[Row]) -> Vec<Vec<String>> {
    let mut keys: Vec<(Method, &str, f64, usize, &str)> = Vec::new();
    for r in rows {
        let k = (r.method, r.trajectory.as_str(), r.alpha, r.n, r.schedule.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, trajectory, alpha, n, schedule)| {
            let group: Vec<&Row> = rows
                .iter()
                .filter(|r| r.method == method && r.trajectory == trajectory && r.alpha == alpha && r.n == n && r.schedule == schedule)
                .collect();
            let ok: Vec<Scores> = group.iter().filter_map(|r| r.outcome.as_ref().ok().copied()).collect();
            let failed = group.len() - ok.len();
            let mut v = vec![
                method.to_string(),
                trajectory.to_string(),
                alpha.to_string(),
                n.to_string(),
                schedule.to_string(),
                ok.len().to_string(),
                failed.to_string(),
            ];
            if ok.is_empty() {
                v.extend(std::iter::repeat_n(String::new(), 7));
                return v;
            }
            let k = ok.len() as f64;
            let mean = |f: fn(&Scores) -> f64| ok.iter().map(f).sum::<f64>() / k;
            let mean_alpha = mean(|s| s.alpha_hat);
            let alpha_mse = ok.iter().map(|s| (s.alpha_hat - alpha).powi(2)).sum::<f64>() / k;
            for x in [
                mean_alpha,
                mean_alpha - alpha,
                alpha_mse,
                mean(|s| s.coverage),
                mean(|s| s.bias),
                median(ok.iter().map(|s| s.deviance).collect()),
                median(ok.iter().map(|s| s.mse).collect()),
            ] {
                v.push(x.to_string());
            }
            v
        })
        .collect()
}

pub fn run(settings: &BenchmarkSettings, mut out: OutDir) -> Result<RunManifest> {
    let mut tasks = Vec::new();
    for trajectory in &settings.trajectories {
        for &alpha in &settings.alphas {
            for &n in &settings.ns {
                for schedule in &settings.schedules {
                    for replicate in 0..settings.replicates {
                        tasks.push(Task {
                            trajectory: trajectory.clone(),
                            alpha,
                            n,
                            schedule: schedule.clone(),
                            replicate,
                        });
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .map_err(|e| CliError::Input(format!("cannot start {} workers: {e}", settings.jobs)))?;
    let rows: Vec<Row> = pool.install(|| {
        tasks
            .par_iter()
            .enumerate()
            .flat_map_iter(|(i, t)| run_task(settings, i, t))
            .collect()
    });

    out.write("replicates.csv", &replicate_csv(&rows, settings.fit.grid_points))?;
    out.write("summary.csv", &csv_bytes(&SUMMARY_HEADER, summarize(&rows)))?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    eprintln!("{} fits over {} replicates; {failed} failed", rows.len(), tasks.len());
    let manifest = out.finish("benchmark", settings, settings.seed, Vec::new())?;
    if failed > 0 {
        let first = rows.iter().find_map(|r| r.outcome.as_ref().err()).cloned().unwrap_or_default();
        return Err(CliError::Numerical(format!(
            "{failed} of {} fits failed (first: {first}); completed rows are in replicates.csv",
            rows.len()
        )));
    }
    Ok(manifest)
}
