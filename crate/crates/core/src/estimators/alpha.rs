//! Gibbs update of α on a partition of (0, 2] into equal intervals.
//!
//! The full conditional of α given γ is approximated by a step function
//! that takes its midpoint value on each interval. An interval is drawn in
//! proportion to its step mass and α uniformly within it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lambda_rates::{LambdaMeasure, RateTable, ALPHA_MAX};
use crate::likelihood::{Layout, Segment};
use crate::numeric::log_sum_exp_slice;

/// The intervals `((m - 1) w, m w]` for `m = 1..=n` with `w = 2/n`.
pub fn alpha_intervals(n: usize) -> Vec<(f64, f64)> {
    let w = ALPHA_MAX / n as f64;
    (0..n).map(|m| (m as f64 * w, (m + 1) as f64 * w)).collect()
}

/// Precomputed rates at the interval midpoints for one (data, grid) pair.
#[derive(Debug, Clone)]
pub struct AlphaSweep {
    intervals: Vec<(f64, f64)>,
    /// `Σ_k log[C(A_k, m_k) λ_{A_k, m_k}]` at each midpoint.
    event_sums: Vec<f64>,
    /// Total rates `λ_b` at each midpoint, row-major over b.
    totals: Vec<f64>,
    b_max: usize,
    segments: Vec<Segment>,
}

impl AlphaSweep {
    pub fn new(layout: &Layout, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one α interval".into()));
        }
        let intervals = alpha_intervals(n);
        let b_max = layout.max_lineages();
        let mut event_sums = Vec::with_capacity(n);
        let mut totals = Vec::with_capacity(n * (b_max + 1));
        for &(lo, hi) in &intervals {
            let rates = RateTable::build(&LambdaMeasure::for_alpha(0.5 * (lo + hi))?, b_max)?;
            event_sums.push(layout.event_log_rate(&rates));
            totals.extend((0..=b_max).map(|b| if b < 2 { 0.0 } else { rates.total_rate(b) }));
        }
        Ok(Self {
            intervals,
            event_sums,
            totals,
            b_max,
            segments: layout.segments().to_vec(),
        })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Log likelihood at each midpoint given log sizes `gamma`, dropping
    /// the α-free term `-Σ c_d γ_d`.
    pub fn log_weights(&self, gamma: &[f64]) -> Vec<f64> {
        let mut by_lineages = vec![0.0; self.b_max + 1];
        for s in &self.segments {
            by_lineages[s.lineages] += s.duration * (-gamma[s.cell]).exp();
        }
        self.event_sums
            .iter()
            .zip(self.totals.chunks_exact(self.b_max + 1))
            .map(|(e, row)| e - row.iter().zip(&by_lineages).map(|(l, w)| l * w).sum::<f64>())
            .collect()
    }

    /// Draws α from the step approximation of its full conditional.
    pub fn sample<R: Rng + ?Sized>(&self, gamma: &[f64], rng: &mut R) -> f64 {
        let w = self.log_weights(gamma);
        let (lo, hi) = self.intervals[draw_index(&w, rng)];
        lo + (1.0 - rng.random::<f64>()) * (hi - lo)
    }
}

/// Index drawn with probability proportional to `exp(log_weights)`.
pub(crate) fn draw_index<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let norm = log_sum_exp_slice(log_weights);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in log_weights.iter().enumerate() {
        acc += (w - norm).exp();
        if u < acc {
            return i;
        }
    }
    // Rounding left the total just below one.
    log_weights
        .iter()
        .rposition(|w| w.is_finite())
        .unwrap_or(log_weights.len() - 1)
}
