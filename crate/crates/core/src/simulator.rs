//! Forward-in-algorithm, backward-in-time simulation of Λ-coalescent
//! genealogies under a deterministic population size trajectory and
//! heterochronous sampling.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genealogy::{extract_stats, Genealogy, Node};
use crate::lambda_rates::{LambdaMeasure, RateTable};

/// Population size `N_e(t)` as a function of time before the present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Trajectory {
    Uniform { level: f64 },
    /// `scale * exp(-rate * t)`.
    Exponential { scale: f64, rate: f64 },
    /// `scale * exp(-|t - center|)`.
    BoomBust { scale: f64, center: f64 },
    /// `values[i]` on `[breaks[i], breaks[i+1])`, the last value extending
    /// to infinity. `breaks[0]` is 0.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
}

fn positive(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidTrajectory(format!("{what} must be positive and finite, got {v}")))
    }
}

impl Trajectory {
    pub fn uniform(level: f64) -> Result<Self> {
        Ok(Self::Uniform { level: positive(level, "level")? })
    }

    pub fn exponential(scale: f64, rate: f64) -> Result<Self> {
        if !rate.is_finite() {
            return Err(Error::InvalidTrajectory(format!("rate must be finite, got {rate}")));
        }
        Ok(Self::Exponential { scale: positive(scale, "scale")?, rate })
    }

    pub fn boom_bust(scale: f64, center: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidTrajectory(format!("center must be finite, got {center}")));
        }
        Ok(Self::BoomBust { scale: positive(scale, "scale")?, center })
    }

    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(Error::InvalidTrajectory(
                "breaks and values must be non-empty and of equal length".into(),
            ));
        }
        if breaks[0] != 0.0 || breaks.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidTrajectory("breaks must start at 0 and increase".into()));
        }
        for &v in &values {
            positive(v, "value")?;
        }
        Ok(Self::PiecewiseConstant { breaks, values })
    }

    /// Named presets for the simulation study: `uniform:100`, `exp:1000,1`, `boombust:1000,1`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "uniform" => Self::uniform(100.0),
            "exp" => Self::exponential(1000.0, 1.0),
            "boombust" => Self::boom_bust(1000.0, 1.0),
            _ => Err(Error::InvalidTrajectory(format!("unknown trajectory {name:?}"))),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Uniform { level } => *level,
            Self::Exponential { scale, rate } => scale * (-rate * t).exp(),
            Self::BoomBust { scale, center } => scale * (-(t - center).abs()).exp(),
            Self::PiecewiseConstant { breaks, values } => {
                let i = breaks.partition_point(|&b| b <= t).saturating_sub(1);
                values[i]
            }
        }
    }

    /// Solves `∫_{u0}^{u} rate / N_e(v) dv = target` for u.
    pub fn advance(&self, u0: f64, rate: f64, target: f64) -> Result<f64> {
        let fail = |message: &str| Error::HazardInversion {
            time: u0,
            message: message.into(),
        };
        if !(rate > 0.0) || !(target >= 0.0) {
            return Err(fail("rate and target must be positive"));
        }
        let y = target / rate;
        let u = match self {
            Self::Uniform { level } => u0 + y * level,
            Self::Exponential { scale, rate: r } => {
                if *r == 0.0 {
                    u0 + y * scale
                } else {
                    // e^{r u} - e^{r u0} = y scale r
                    let x = y * scale * r * (-r * u0).exp();
                    if x <= -1.0 {
                        return Err(fail("cumulative hazard is bounded below the target"));
                    }
                    u0 + x.ln_1p() / r
                }
            }
            Self::BoomBust { scale, center } => {
                let mut u0 = u0;
                let mut y = y * scale;
                if u0 < *center {
                    // Hazard left to reach the peak.
                    let to_peak = (center - u0).exp_m1();
                    if y <= to_peak {
                        return Ok(u0 - (-y * (u0 - center).exp()).ln_1p());
                    }
                    y -= to_peak;
                    u0 = *center;
                }
                u0 + (y * (center - u0).exp()).ln_1p()
            }
            Self::PiecewiseConstant { breaks, values } => {
                let mut i = breaks.partition_point(|&b| b <= u0).saturating_sub(1);
                let mut u = u0;
                let mut y = y;
                loop {
                    let span = breaks.get(i + 1).map_or(f64::INFINITY, |b| b - u);
                    let need = y * values[i];
                    if need <= span {
                        break u + need;
                    }
                    y -= span / values[i];
                    u = breaks[i + 1];
                    i += 1;
                }
            }
        };
        if u.is_finite() && u >= u0 {
            Ok(u)
        } else {
            Err(fail("inversion produced a non-finite time"))
        }
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { level } => write!(f, "uniform:{level}"),
            Self::Exponential { scale, rate } => write!(f, "exp:{scale},{rate}"),
            Self::BoomBust { scale, center } => write!(f, "boombust:{scale},{center}"),
            Self::PiecewiseConstant { breaks, values } => {
                let pairs: Vec<String> = breaks.iter().zip(values).map(|(b, v)| format!("{b}/{v}")).collect();
                write!(f, "piecewise:{}", pairs.join(","))
            }
        }
    }
}

impl FromStr for Trajectory {
    type Err = Error;

    /// `uniform[:level]`, `exp[:scale,rate]`, `boombust[:scale,center]` or
    /// `piecewise:b0/v0,b1/v1,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            None => return Self::preset(s),
            Some(p) => p,
        };
        let bad = || Error::InvalidTrajectory(format!("cannot parse trajectory {s:?}"));
        let nums = |a: &str| -> Result<Vec<f64>> {
            a.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect()
        };
        match name {
            "uniform" => match nums(args)?[..] {
                [level] => Self::uniform(level),
                _ => Err(bad()),
            },
            "exp" => match nums(args)?[..] {
                [scale, rate] => Self::exponential(scale, rate),
                _ => Err(bad()),
            },
            "boombust" => match nums(args)?[..] {
                [scale, center] => Self::boom_bust(scale, center),
                _ => Err(bad()),
            },
            "piecewise" => {
                let mut breaks = Vec::new();
                let mut values = Vec::new();
                for pair in args.split(',') {
                    let (b, v) = pair.split_once('/').ok_or_else(bad)?;
                    breaks.push(b.trim().parse().map_err(|_| bad())?);
                    values.push(v.trim().parse().map_err(|_| bad())?);
                }
                Self::piecewise_constant(breaks, values)
            }
            _ => Err(bad()),
        }
    }
}

/// Sampling times (time before the most recent sample) and batch sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSchedule {
    times: Vec<f64>,
    counts: Vec<usize>,
}

impl SamplingSchedule {
    pub fn new(times: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("sampling schedule: {m}")));
        if times.is_empty() || times.len() != counts.len() {
            return bad("times and counts must be non-empty and of equal length");
        }
        if times[0] != 0.0 {
            return bad("the first sampling time must be 0");
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return bad("times must be finite and strictly increasing");
        }
        if counts.iter().any(|&c| c == 0) {
            return bad("every batch needs at least one sample");
        }
        if counts.iter().sum::<usize>() < 2 {
            return bad("at least two samples are needed");
        }
        Ok(Self { times, counts })
    }

    pub fn isochronous(n: usize) -> Result<Self> {
        Self::new(vec![0.0], vec![n])
    }

    /// Splits `n` samples over `times` in proportion to `fractions`; rounding
    /// remainders go to the earliest batches.
    pub fn split(n: usize, times: Vec<f64>, fractions: &[f64]) -> Result<Self> {
        if fractions.len() != times.len() || fractions.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::InvalidArgument(
                "one positive fraction per sampling time is required".into(),
            ));
        }
        let total: f64 = fractions.iter().sum();
        let mut counts: Vec<usize> = fractions
            .iter()
            .map(|f| (n as f64 * f / total).floor() as usize)
            .collect();
        let mut left = n - counts.iter().sum::<usize>();
        let mut i = 0;
        while left > 0 {
            let len = counts.len();
            counts[i % len] += 1;
            left -= 1;
            i += 1;
        }
        Self::new(times, counts)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Rate table and cumulative block-size distributions for one measure.
#[derive(Debug, Clone)]
pub struct Simulator {
    rates: RateTable,
    cdfs: Vec<Vec<f64>>,
}

/// Attempts at drawing a genealogy whose event times are all resolvable at
/// the genealogy time tolerance.
const MAX_ATTEMPTS: usize = 100;

impl Simulator {
    pub fn new(measure: &LambdaMeasure, max_lineages: usize) -> Result<Self> {
        let b_max = max_lineages.max(2);
        let rates = RateTable::build(measure, b_max)?;
        let mut cdfs = vec![Vec::new(); b_max + 1];
        for (b, cdf) in cdfs.iter_mut().enumerate().skip(2) {
            let mut acc = 0.0;
            *cdf = rates
                .block_size_pmf(b)
                .into_iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
        }
        Ok(Self { rates, cdfs })
    }

    pub fn rates(&self) -> &RateTable {
        &self.rates
    }

    fn block_size<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> usize {
        let cdf = &self.cdfs[b];
        let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
        let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        i + 2
    }

    /// Simulates one genealogy. Draws in which two events (or an event and
    /// one of its children) fall within the time tolerance are discarded
    /// and redrawn.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        schedule: &SamplingSchedule,
        traj: &Trajectory,
        rng: &mut R,
    ) -> Result<Genealogy> {
        if schedule.total() > self.rates.b_max() {
            return Err(Error::InvalidArgument(format!(
                "{} samples exceed the simulator's {} lineages",
                schedule.total(),
                self.rates.b_max()
            )));
        }
        let mut last = None;
        for _ in 0..MAX_ATTEMPTS {
            match self.draw(schedule, traj, rng)? {
                Ok(g) => return Ok(g),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    // Outer error: fatal. Inner error: unresolvable times, retry.
    fn draw<R: Rng + ?Sized>(
        &self,
        schedule: &SamplingSchedule,
        traj: &Trajectory,
        rng: &mut R,
    ) -> Result<Result<Genealogy>> {
        let mut nodes: Vec<Node> = Vec::with_capacity(2 * schedule.total());
        let mut active: Vec<usize> = Vec::with_capacity(schedule.total());
        let mut tip = 0;
        let mut add_batch = |nodes: &mut Vec<Node>, active: &mut Vec<usize>, j: usize| {
            for _ in 0..schedule.counts[j] {
                tip += 1;
                active.push(nodes.len());
                nodes.push(Node {
                    parent: None,
                    children: Vec::new(),
                    time: schedule.times[j],
                    label: Some(format!("t{tip}")),
                });
            }
        };
        add_batch(&mut nodes, &mut active, 0);
        let mut next = 1;
        let mut u = 0.0;
        loop {
            let b = active.len();
            let next_sample = schedule.times.get(next).copied();
            if b < 2 {
                match next_sample {
                    Some(s) => {
                        u = s;
                        add_batch(&mut nodes, &mut active, next);
                        next += 1;
                        continue;
                    }
                    None => break,
                }
            }
            let target: f64 = Exp1.sample(rng);
            let proposal = traj.advance(u, self.rates.total_rate(b), target)?;
            if let Some(s) = next_sample {
                if proposal > s {
                    u = s;
                    add_batch(&mut nodes, &mut active, next);
                    next += 1;
                    continue;
                }
            }
            u = proposal;
            let k = self.block_size(b, rng);
            let mut chosen = index::sample(rng, b, k).into_vec();
            chosen.sort_unstable_by(|a, b| b.cmp(a));
            let parent = nodes.len();
            let mut children: Vec<usize> = chosen.iter().map(|&i| active.swap_remove(i)).collect();
            children.reverse();
            for &c in &children {
                nodes[c].parent = Some(parent);
            }
            nodes.push(Node {
                parent: None,
                children,
                time: u,
                label: None,
            });
            active.push(parent);
        }
        let root = active[0];
        let g = match Genealogy::from_nodes(nodes, root, true) {
            Ok(g) => g,
            Err(e @ Error::TimeInversion { .. }) => return Ok(Err(e)),
            Err(e) => return Err(e),
        };
        match extract_stats(&g) {
            Ok(_) => Ok(Ok(g)),
            Err(e @ Error::SimultaneousMergers(_)) => Ok(Err(e)),
            Err(e) => Err(e),
        }
    }
}

/// One-off simulation; builds the rate table for `schedule.total()` lineages.
pub fn simulate<R: Rng + ?Sized>(
    schedule: &SamplingSchedule,
    traj: &Trajectory,
    m: &LambdaMeasure,
    rng: &mut R,
) -> Result<Genealogy> {
    Simulator::new(m, schedule.total())?.simulate(schedule, traj, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hazard(traj: &Trajectory, a: f64, b: f64) -> f64 {
        // Midpoint rule, split at every kink used by the test trajectories.
        let mut cuts = vec![a];
        cuts.extend([0.5, 1.0, 1.2].into_iter().filter(|&c| c > a && c < b));
        cuts.push(b);
        let n = 100_000;
        cuts.windows(2)
            .map(|w| {
                let h = (w[1] - w[0]) / n as f64;
                (0..n).map(|i| h / traj.value(w[0] + (i as f64 + 0.5) * h)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn inversion_matches_numeric_hazard() {
        let trajs = [
            Trajectory::uniform(3.0).unwrap(),
            Trajectory::exponential(10.0, 1.0).unwrap(),
            Trajectory::exponential(1.0, -0.2).unwrap(),
            Trajectory::boom_bust(5.0, 1.0).unwrap(),
            Trajectory::piecewise_constant(vec![0.0, 0.5, 1.2], vec![1.0, 4.0, 0.5]).unwrap(),
        ];
        for traj in &trajs {
            for (u0, rate, target) in [(0.0, 1.0, 0.3), (0.4, 2.5, 1.7), (1.5, 0.5, 0.2), (0.9, 6.0, 2.0)] {
                let u = traj.advance(u0, rate, target).unwrap();
                let h = rate * hazard(traj, u0, u);
                assert!((h - target).abs() < 1e-6, "{traj}: {h} vs {target}");
            }
        }
    }

    #[test]
    fn bounded_hazard_fails() {
        let traj = Trajectory::exponential(1.0, -1.0).unwrap();
        // total hazard from 0 is 1, so target 2 is unreachable
        assert!(matches!(traj.advance(0.0, 1.0, 2.0), Err(Error::HazardInversion { .. })));
    }

    #[test]
    fn trajectory_keywords() {
        assert_eq!("uniform".parse::<Trajectory>().unwrap(), Trajectory::uniform(100.0).unwrap());
        assert_eq!(
            "exp:1000,1".parse::<Trajectory>().unwrap(),
            Trajectory::exponential(1000.0, 1.0).unwrap()
        );
        assert_eq!(
            "boombust:1000,1".parse::<Trajectory>().unwrap(),
            Trajectory::boom_bust(1000.0, 1.0).unwrap()
        );
        let pw = "piecewise:0/1,2/3".parse::<Trajectory>().unwrap();
        assert_eq!(pw.value(2.5), 3.0);
        assert!("uniform:-1".parse::<Trajectory>().is_err());
        assert!("exp:1".parse::<Trajectory>().is_err());
        for t in ["uniform:7", "exp:2,0.5", "boombust:3,1", "piecewise:0/1,2/3"] {
            assert_eq!(t.parse::<Trajectory>().unwrap().to_string(), t);
        }
    }

    #[test]
    fn schedule_split() {
        let s = SamplingSchedule::split(50, vec![0.0, 1.0, 2.0, 3.0], &[0.5, 0.3, 0.1, 0.1]).unwrap();
        assert_eq!(s.counts(), &[25, 15, 5, 5]);
        let s = SamplingSchedule::split(21, vec![0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_eq!(s.counts(), &[11, 10]);
        assert!(SamplingSchedule::new(vec![1.0], vec![3]).is_err());
        assert!(SamplingSchedule::isochronous(1).is_err());
    }

    #[test]
    fn kingman_trees_are_binary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sim = Simulator::new(&LambdaMeasure::kingman(), 30).unwrap();
        let sched = SamplingSchedule::split(30, vec![0.0, 0.5], &[0.5, 0.5]).unwrap();
        for _ in 0..20 {
            let g = sim.simulate(&sched, &Trajectory::uniform(1.0).unwrap(), &mut rng).unwrap();
            assert!(g.is_binary());
            assert_eq!(g.num_tips(), 30);
        }
    }

    #[test]
    fn heterochronous_batches_survive_gaps() {
        // Samples far in the past: the first batch coalesces completely
        // before the second arrives.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sched = SamplingSchedule::new(vec![0.0, 100.0], vec![5, 5]).unwrap();
        let g = simulate(&sched, &Trajectory::uniform(0.1).unwrap(), &LambdaMeasure::beta(1.5).unwrap(), &mut rng)
            .unwrap();
        let d = extract_stats(&g).unwrap();
        assert_eq!(d.sampling_times(), &[0.0, 100.0]);
        assert_eq!(d.sample_counts(), &[5, 5]);
        assert!(d.coalescent_times().iter().any(|&t| t < 100.0));
    }

    #[test]
    fn seeded_runs_repeat() {
        let sched = SamplingSchedule::isochronous(40).unwrap();
        let traj = Trajectory::exponential(1000.0, 1.0).unwrap();
        let m = LambdaMeasure::beta(1.5).unwrap();
        let a = simulate(&sched, &traj, &m, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = simulate(&sched, &traj, &m, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.to_newick(), b.to_newick());
    }
}
