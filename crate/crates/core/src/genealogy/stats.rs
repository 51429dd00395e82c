use serde::{Deserialize, Serialize};

use super::{Genealogy, TIME_TOL};
use crate::error::{Error, Result};

/// Sufficient statistics of a genealogy: sampling times and counts,
/// coalescent times and block sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalescentData {
    sampling_times: Vec<f64>,
    sample_counts: Vec<usize>,
    coalescent_times: Vec<f64>,
    block_sizes: Vec<usize>,
}

impl CoalescentData {
    pub fn new(
        sampling_times: Vec<f64>,
        sample_counts: Vec<usize>,
        coalescent_times: Vec<f64>,
        block_sizes: Vec<usize>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidData(msg));
        if sampling_times.is_empty() || sampling_times.len() != sample_counts.len() {
            return bad("sampling times and counts must be non-empty and of equal length".into());
        }
        if coalescent_times.len() != block_sizes.len() {
            return bad("coalescent times and block sizes differ in length".into());
        }
        if sampling_times[0] != 0.0 {
            return bad(format!("first sampling time is {}, not 0", sampling_times[0]));
        }
        if sampling_times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("sampling times must be strictly increasing".into());
        }
        if coalescent_times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("coalescent times must be strictly increasing".into());
        }
        if coalescent_times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("coalescent times must be positive and finite".into());
        }
        if sample_counts.iter().any(|&n| n == 0) {
            return bad("every sampling time needs at least one sample".into());
        }
        if block_sizes.iter().any(|&m| m < 2) {
            return bad("block sizes must be at least 2".into());
        }
        let n: usize = sample_counts.iter().sum();
        let merged: usize = block_sizes.iter().map(|m| m - 1).sum();
        if n != merged + 1 {
            return bad(format!(
                "{n} samples and {merged} merged lineages do not end in a single ancestor"
            ));
        }
        let data = Self {
            sampling_times,
            sample_counts,
            coalescent_times,
            block_sizes,
        };
        if let Some(&t_k) = data.coalescent_times.last() {
            if *data.sampling_times.last().unwrap() >= t_k {
                return bad("a sample is taken at or after the root time".into());
            }
        }
        for (i, &t) in data.coalescent_times.iter().enumerate() {
            let a = data.lineage_count(t);
            if a < data.block_sizes[i] {
                return bad(format!(
                    "event {i} at {t} merges {} lineages but only {a} exist",
                    data.block_sizes[i]
                ));
            }
        }
        for w in data.lineage_steps().counts.iter() {
            if *w < 1 {
                return bad("lineage count drops to zero before the root".into());
            }
        }
        Ok(data)
    }

    pub fn sampling_times(&self) -> &[f64] {
        &self.sampling_times
    }

    pub fn sample_counts(&self) -> &[usize] {
        &self.sample_counts
    }

    pub fn coalescent_times(&self) -> &[f64] {
        &self.coalescent_times
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Total number of samples.
    pub fn num_samples(&self) -> usize {
        self.sample_counts.iter().sum()
    }

    /// Number of coalescent events K.
    pub fn num_events(&self) -> usize {
        self.coalescent_times.len()
    }

    /// Root time t_K, or 0 when there are no events.
    pub fn tmrca(&self) -> f64 {
        self.coalescent_times.last().copied().unwrap_or(0.0)
    }

    /// Number of extant lineages A(u), right-open: an event or sampling at
    /// exactly `u` is not yet applied. Negative `u` is clamped to 0.
    pub fn lineage_count(&self, u: f64) -> usize {
        let u = u.max(0.0);
        let sampled: usize = self
            .sampling_times
            .iter()
            .zip(&self.sample_counts)
            .take_while(|(s, _)| **s < u)
            .map(|(_, n)| n)
            .sum();
        let merged: usize = self
            .coalescent_times
            .iter()
            .zip(&self.block_sizes)
            .take_while(|(t, _)| **t < u)
            .map(|(_, m)| m - 1)
            .sum();
        sampled - merged
    }

    /// Lineage counts on each event-free interval of [0, t_K].
    pub fn lineage_steps(&self) -> LineageStep {
        let mut breakpoints = Vec::with_capacity(self.sampling_times.len() + self.num_events());
        let mut counts = Vec::with_capacity(breakpoints.capacity());
        let (mut i, mut k) = (0, 0);
        let mut a: usize = 0;
        while i < self.sampling_times.len() || k < self.num_events() {
            let next_s = self.sampling_times.get(i).copied().unwrap_or(f64::INFINITY);
            let next_t = self.coalescent_times.get(k).copied().unwrap_or(f64::INFINITY);
            let time = next_s.min(next_t);
            if let Some(&last) = breakpoints.last() {
                if time > last {
                    counts.push(a);
                    breakpoints.push(time);
                }
            } else {
                breakpoints.push(time);
            }
            if next_s <= next_t {
                a += self.sample_counts[i];
                i += 1;
            } else {
                a -= self.block_sizes[k] - 1;
                k += 1;
            }
        }
        LineageStep { breakpoints, counts }
    }
}

/// Piecewise-constant lineage count: `counts[i]` holds on
/// `(breakpoints[i], breakpoints[i + 1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineageStep {
    pub breakpoints: Vec<f64>,
    pub counts: Vec<usize>,
}

impl LineageStep {
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.counts)
            .map(|(w, &a)| (w[0], w[1], a))
    }
}

/// Extracts sampling times/counts and coalescent times/block sizes.
///
/// Tip times within [`TIME_TOL`] of each other form one sampling time.
/// Two internal nodes within [`TIME_TOL`] are rejected as simultaneous
/// mergers.
pub fn extract_stats(g: &Genealogy) -> Result<CoalescentData> {
    let mut tip_times: Vec<f64> = g.tips().map(|t| g.node(t).time).collect();
    tip_times.sort_by(f64::total_cmp);
    let origin = tip_times[0];

    let mut sampling_times: Vec<f64> = Vec::new();
    let mut sample_counts: Vec<usize> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    for t in tip_times {
        if t - anchor <= TIME_TOL {
            *sample_counts.last_mut().unwrap() += 1;
        } else {
            anchor = t;
            sampling_times.push(t - origin);
            sample_counts.push(1);
        }
    }

    let mut events: Vec<(f64, usize)> = g
        .internal_nodes()
        .map(|i| (g.node(i).time - origin, g.node(i).children.len()))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = events.windows(2).find(|w| w[1].0 - w[0].0 <= TIME_TOL) {
        return Err(Error::SimultaneousMergers(w[0].0));
    }
    let (coalescent_times, block_sizes) = events.into_iter().unzip();
    CoalescentData::new(sampling_times, sample_counts, coalescent_times, block_sizes)
}
