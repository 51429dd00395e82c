//! Λ-coalescent log-likelihood of a genealogy given a piecewise-constant
//! trajectory on a [`SkyGrid`].
//!
//! With `N_e = exp(γ_d)` on cell d the log density is
//! `Σ_k log[C(A_k, m_k) λ_{A_k, m_k}] - Σ_d c_d γ_d - Σ_d E_d exp(-γ_d)`
//! where `E_d` integrates the total rate `λ_{A(u)}` over the cell and `c_d`
//! counts the events in it. Both A and N_e are step functions, so the
//! integral is exact.

use crate::error::{Error, Result};
use crate::genealogy::CoalescentData;
use crate::gmrf::SkyGrid;
use crate::lambda_rates::{LambdaMeasure, RateTable};

/// A maximal time interval on which both the cell and the lineage count
/// are constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub cell: usize,
    pub lineages: usize,
    pub duration: f64,
}

/// The γ- and α-independent structure of a (data, grid) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    cells: usize,
    segments: Vec<Segment>,
    /// Cell of each coalescent event.
    event_cells: Vec<usize>,
    /// `(A(t_k), m_k)` for each event.
    events: Vec<(usize, usize)>,
    max_lineages: usize,
}

impl Layout {
    pub fn new(data: &CoalescentData, grid: &SkyGrid) -> Result<Self> {
        let t_k = data.tmrca();
        if grid.end() < t_k * (1.0 - 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "grid ends at {} before the root at {t_k}",
                grid.end()
            )));
        }
        let x = grid.points();
        let mut segments = Vec::new();
        for (a, b, lineages) in data.lineage_steps().intervals() {
            if lineages < 2 {
                continue;
            }
            let mut d = x.partition_point(|&p| p <= a).saturating_sub(1).min(grid.num_cells() - 1);
            let mut start = a;
            loop {
                let end = if d + 1 < x.len() - 1 { b.min(x[d + 1]) } else { b };
                if end > start {
                    segments.push(Segment {
                        cell: d,
                        lineages,
                        duration: end - start,
                    });
                }
                if end >= b {
                    break;
                }
                start = end;
                d += 1;
            }
        }
        let event_cells = data
            .coalescent_times()
            .iter()
            .map(|&t| grid.cell_of(t).unwrap_or(grid.num_cells() - 1))
            .collect();
        let events: Vec<(usize, usize)> = data
            .coalescent_times()
            .iter()
            .zip(data.block_sizes())
            .map(|(&t, &m)| (data.lineage_count(t), m))
            .collect();
        let max_lineages = data
            .lineage_steps()
            .counts
            .iter()
            .copied()
            .max()
            .unwrap_or(1)
            .max(2);
        Ok(Self {
            cells: grid.num_cells(),
            segments,
            event_cells,
            events,
            max_lineages,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Segments with at least two lineages.
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn event_cells(&self) -> &[usize] {
        &self.event_cells
    }

    /// `(A(t_k), m_k)` for each event.
    pub fn events(&self) -> &[(usize, usize)] {
        &self.events
    }

    /// Largest lineage count, at least 2.
    pub fn max_lineages(&self) -> usize {
        self.max_lineages
    }

    /// Events per cell.
    pub fn event_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.cells];
        for &d in &self.event_cells {
            counts[d] += 1;
        }
        counts
    }

    /// `Σ_k log[C(A_k, m_k) λ_{A_k, m_k}]`.
    pub fn event_log_rate(&self, rates: &RateTable) -> f64 {
        self.events
            .iter()
            .map(|&(a, m)| rates.log_event_rate(a, m))
            .sum()
    }

    pub fn exposure(&self, rates: &RateTable) -> ExposureTable {
        let mut exposure = vec![0.0; self.cells];
        for s in &self.segments {
            exposure[s.cell] += rates.total_rate(s.lineages) * s.duration;
        }
        ExposureTable {
            exposure,
            counts: self.event_counts(),
            event_log_rate: self.event_log_rate(rates),
        }
    }
}

/// Rate-weighted exposure per cell, event counts per cell and the summed
/// event log rates for one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureTable {
    exposure: Vec<f64>,
    counts: Vec<usize>,
    event_log_rate: f64,
}

impl ExposureTable {
    pub fn exposure(&self) -> &[f64] {
        &self.exposure
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// `Σ_k log[C(A_k, m_k) λ_{A_k, m_k}]`; `-inf` when the measure cannot
    /// produce an observed block size.
    pub fn event_log_rate(&self) -> f64 {
        self.event_log_rate
    }

    pub fn cells(&self) -> usize {
        self.exposure.len()
    }

    /// The γ-dependent part `-Σ c_d γ_d - Σ E_d exp(-γ_d)`.
    pub fn trajectory_log_likelihood(&self, gamma: &[f64]) -> f64 {
        assert_eq!(gamma.len(), self.cells(), "log sizes do not match the grid");
        self.exposure
            .iter()
            .zip(&self.counts)
            .zip(gamma)
            .map(|((e, &c), g)| -(c as f64) * g - e * (-g).exp())
            .sum()
    }

    pub fn log_likelihood(&self, gamma: &[f64]) -> f64 {
        self.event_log_rate + self.trajectory_log_likelihood(gamma)
    }

    /// Gradient in γ: `E_d exp(-γ_d) - c_d`.
    pub fn gradient(&self, gamma: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cells()];
        self.gradient_into(gamma, &mut out);
        out
    }

    pub fn gradient_into(&self, gamma: &[f64], out: &mut [f64]) {
        assert_eq!(gamma.len(), self.cells(), "log sizes do not match the grid");
        for (((o, e), &c), g) in out.iter_mut().zip(&self.exposure).zip(&self.counts).zip(gamma) {
            *o = e * (-g).exp() - c as f64;
        }
    }

    /// Negative Hessian diagonal, `E_d exp(-γ_d)`. The Hessian is diagonal.
    pub fn curvature(&self, gamma: &[f64]) -> Vec<f64> {
        self.exposure.iter().zip(gamma).map(|(e, g)| e * (-g).exp()).collect()
    }
}

pub fn build_exposure(data: &CoalescentData, grid: &SkyGrid, m: &LambdaMeasure) -> Result<ExposureTable> {
    let layout = Layout::new(data, grid)?;
    let rates = RateTable::build(m, layout.max_lineages())?;
    Ok(layout.exposure(&rates))
}

pub fn log_likelihood(table: &ExposureTable, gamma: &[f64]) -> f64 {
    table.log_likelihood(gamma)
}

pub fn grad_log_likelihood(table: &ExposureTable, gamma: &[f64]) -> Vec<f64> {
    table.gradient(gamma)
}

/// Log probability of the observed block sizes given the lineage counts,
/// `Σ_k log P(X = m_k | A(t_k))`. Independent of the trajectory.
pub fn block_size_log_pseudolik(data: &CoalescentData, m: &LambdaMeasure) -> Result<f64> {
    let b_max = data.lineage_steps().counts.iter().copied().max().unwrap_or(2).max(2);
    let rates = RateTable::build(m, b_max)?;
    Ok(block_size_log_pseudolik_with(data, &rates))
}

pub fn block_size_log_pseudolik_with(data: &CoalescentData, rates: &RateTable) -> f64 {
    data.coalescent_times()
        .iter()
        .zip(data.block_sizes())
        .map(|(&t, &m)| {
            let a = data.lineage_count(t);
            rates.log_event_rate(a, m) - rates.total_log_rate(a)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(t: f64) -> CoalescentData {
        CoalescentData::new(vec![0.0], vec![2], vec![t], vec![2]).unwrap()
    }

    #[test]
    fn kingman_pair_is_exponential() {
        let d = pair(1.7);
        let grid = SkyGrid::regular(1.7, 3, 0.0).unwrap();
        let table = build_exposure(&d, &grid, &LambdaMeasure::kingman()).unwrap();
        assert!((table.exposure().iter().sum::<f64>() - 1.7).abs() < 1e-15);
        assert_eq!(table.counts(), &[0, 1]);
        assert!((table.log_likelihood(&[0.0, 0.0]) + 1.7).abs() < 1e-14);
    }

    #[test]
    fn single_lineage_gap_has_no_exposure() {
        let d = CoalescentData::new(vec![0.0, 2.0], vec![2, 2], vec![1.0, 3.0, 4.0], vec![2, 2, 2])
            .unwrap();
        let grid = SkyGrid::regular(4.0, 5, 0.0).unwrap();
        let table = build_exposure(&d, &grid, &LambdaMeasure::kingman()).unwrap();
        // cells (0,1] (1,2] (2,3] (3,4]: A = 2, 1, 3, 2
        for (e, want) in table.exposure().iter().zip([1.0, 0.0, 3.0, 1.0]) {
            assert!((e - want).abs() < 1e-14, "{e} vs {want}");
        }
        assert_eq!(table.counts(), &[1, 0, 1, 1]);
    }

    #[test]
    fn events_on_grid_points_attach_left() {
        let d = CoalescentData::new(vec![0.0], vec![3], vec![1.0, 2.0], vec![2, 2]).unwrap();
        let grid = SkyGrid::regular(2.0, 3, 0.0).unwrap();
        let layout = Layout::new(&d, &grid).unwrap();
        assert_eq!(layout.event_cells(), &[0, 1]);
        assert_eq!(layout.events(), &[(3, 2), (2, 2)]);
    }

    #[test]
    fn short_grid_rejected() {
        let grid = SkyGrid::regular(1.0, 3, 0.0).unwrap();
        assert!(Layout::new(&pair(2.0), &grid).is_err());
    }

    #[test]
    fn stationary_cell() {
        let d = CoalescentData::new(vec![0.0], vec![4], vec![0.5, 1.0, 3.0], vec![2, 2, 2]).unwrap();
        let grid = SkyGrid::regular(3.0, 4, 0.0).unwrap();
        let table = build_exposure(&d, &grid, &LambdaMeasure::beta(1.5).unwrap()).unwrap();
        let gamma: Vec<f64> = table
            .exposure()
            .iter()
            .zip(table.counts())
            .map(|(e, &c)| if c > 0 { (e / c as f64).ln() } else { 0.0 })
            .collect();
        let grad = table.gradient(&gamma);
        assert!(grad[0].abs() < 1e-12);
        // empty cell: positive gradient
        assert_eq!(table.counts()[1], 0);
        assert!(grad[1] > 0.0);
    }

    #[test]
    fn pseudolik_examples() {
        let binary = CoalescentData::new(vec![0.0], vec![4], vec![0.5, 1.0, 3.0], vec![2, 2, 2]).unwrap();
        assert_eq!(block_size_log_pseudolik(&binary, &LambdaMeasure::kingman()).unwrap(), 0.0);
        let tri = CoalescentData::new(vec![0.0], vec![3], vec![1.0], vec![3]).unwrap();
        let v = block_size_log_pseudolik(&tri, &LambdaMeasure::bolthausen_sznitman()).unwrap();
        assert!((v - 0.25f64.ln()).abs() < 1e-14);
    }
}
