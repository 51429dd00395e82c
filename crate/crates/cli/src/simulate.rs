use lambdacoal::{extract_stats, CoalescentData, LambdaMeasure, SamplingSchedule, Simulator, Trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::SimulateSettings;
use crate::error::Result;
use crate::output::{csv_bytes, OutDir, RunManifest};

/// Random stream of one replicate: the run seed with the replicate index as
/// stream number, so replicates do not depend on each other.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Columns `t,m` (coalescent times and block sizes) beside `s,n`
/// (sampling times and counts); the shorter pair is padded with blanks.
pub fn stats_csv(d: &CoalescentData) -> Vec<u8> {
    let rows = d.num_events().max(d.sampling_times().len());
    let cell = |v: Option<String>| v.unwrap_or_default();
    csv_bytes(
        &["t", "m", "s", "n"],
        (0..rows).map(|i| {
            vec![
                cell(d.coalescent_times().get(i).map(|v| v.to_string())),
                cell(d.block_sizes().get(i).map(|v| v.to_string())),
                cell(d.sampling_times().get(i).map(|v| v.to_string())),
                cell(d.sample_counts().get(i).map(|v| v.to_string())),
            ]
        }),
    )
}

pub fn run(settings: &SimulateSettings, mut out: OutDir) -> Result<RunManifest> {
    let traj: Trajectory = settings.trajectory.parse()?;
    let measure: LambdaMeasure = settings.measure.parse()?;
    let schedule = SamplingSchedule::new(settings.sample_times.clone(), settings.n_per_time.clone())?;
    let sim = Simulator::new(&measure, schedule.total())?;
    let width = settings.replicates.to_string().len().max(3);
    for i in 0..settings.replicates {
        let mut rng = replicate_rng(settings.seed, i as u64);
        let tree = sim.simulate(&schedule, &traj, &mut rng)?;
        let stats = extract_stats(&tree)?;
        let mut newick = tree.to_newick();
        newick.push('\n');
        out.write(&format!("tree_{i:0width$}.nwk"), newick.as_bytes())?;
        out.write(&format!("stats_{i:0width$}.csv"), &stats_csv(&stats))?;
    }
    eprintln!("wrote {} genealogies to {}", settings.replicates, out.root().display());
    out.finish("simulate", settings, settings.seed, Vec::new())
}
