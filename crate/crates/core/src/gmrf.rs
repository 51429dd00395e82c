//! Piecewise-constant log effective population size on a regular grid with
//! a first-order random-walk prior.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genealogy::CoalescentData;

/// Grid points `x_1 = 0 < ... < x_D` and log sizes `γ_d` on the cells
/// `(x_d, x_{d+1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkyGrid {
    points: Vec<f64>,
    gamma: Vec<f64>,
}

impl SkyGrid {
    pub fn new(points: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 grid points, got {}",
                points.len()
            )));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidGrid("first grid point must be 0".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidGrid("grid points must be finite and increasing".into()));
        }
        if gamma.len() != points.len() - 1 {
            return Err(Error::InvalidGrid(format!(
                "{} grid points need {} log sizes, got {}",
                points.len(),
                points.len() - 1,
                gamma.len()
            )));
        }
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidGrid("log sizes must be finite".into()));
        }
        Ok(Self { points, gamma })
    }

    /// `d` equally spaced points from 0 to `end`, all cells at `level`.
    pub fn regular(end: f64, d: usize, level: f64) -> Result<Self> {
        if !(end > 0.0 && end.is_finite()) {
            return Err(Error::InvalidGrid(format!("grid end must be positive, got {end}")));
        }
        if d < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 grid points, got {d}")));
        }
        let step = end / (d - 1) as f64;
        let mut points: Vec<f64> = (0..d).map(|i| i as f64 * step).collect();
        points[d - 1] = end;
        Self::new(points, vec![level; d - 1])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn set_gamma(&mut self, gamma: Vec<f64>) -> Result<()> {
        *self = Self::new(std::mem::take(&mut self.points), gamma)?;
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.gamma.len()
    }

    /// Spacing of a regular grid (first cell width).
    pub fn spacing(&self) -> f64 {
        self.points[1] - self.points[0]
    }

    pub fn end(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Index of the cell `(x_d, x_{d+1}]` containing `t`; time 0 belongs to
    /// the first cell. `None` beyond the last point.
    pub fn cell_of(&self, t: f64) -> Option<usize> {
        if t > self.end() || t < 0.0 {
            return None;
        }
        let below = self.points.partition_point(|&x| x < t);
        Some(below.saturating_sub(1))
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `N_e(t) = exp(γ_d)` for the cell containing `t`.
    pub fn pop_size(&self, t: f64) -> Option<f64> {
        self.cell_of(t).map(|d| self.gamma[d].exp())
    }
}

/// Regular grid of `d` points over `[0, t_K]`, initialised at the log of
/// the constant-size estimate `∫ C(A(u), 2) du / K`.
pub fn build_grid(data: &CoalescentData, d: usize) -> Result<SkyGrid> {
    if data.num_events() == 0 || data.tmrca() <= 0.0 {
        return Err(Error::InvalidGrid("data has no coalescent events".into()));
    }
    let exposure: f64 = data
        .lineage_steps()
        .intervals()
        .map(|(a, b, n)| (b - a) * (n * n.saturating_sub(1)) as f64 / 2.0)
        .sum();
    let level = (exposure / data.num_events() as f64).ln();
    SkyGrid::regular(data.tmrca(), d, level)
}

/// Intrinsic RW1 prior `γ ~ N(0, (τQ)^-1)` with `γᵀQγ = Σ (γ_{d+1} - γ_d)² / Δ`
/// and a Gamma(shape, rate) hyperprior on τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmrfPrior {
    cells: usize,
    spacing: f64,
    shape: f64,
    rate: f64,
    ridge: f64,
}

pub const DEFAULT_SHAPE: f64 = 0.001;
pub const DEFAULT_RATE: f64 = 0.001;

impl GmrfPrior {
    pub fn new(cells: usize, spacing: f64) -> Result<Self> {
        if cells < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 cells, got {cells}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGrid(format!("invalid spacing {spacing}")));
        }
        Ok(Self {
            cells,
            spacing,
            shape: DEFAULT_SHAPE,
            rate: DEFAULT_RATE,
            ridge: 0.0,
        })
    }

    pub fn for_grid(grid: &SkyGrid) -> Result<Self> {
        Self::new(grid.num_cells(), grid.spacing())
    }

    pub fn with_hyperprior(mut self, shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Gamma hyperprior needs positive shape and rate, got ({shape}, {rate})"
            )));
        }
        self.shape = shape;
        self.rate = rate;
        Ok(self)
    }

    /// Adds `ridge` to the diagonal of Q, making it positive definite.
    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Rank of the intrinsic precision.
    pub fn rank(&self) -> usize {
        self.cells - 1
    }

    /// Diagonal and off-diagonal of the tridiagonal Q.
    pub fn precision_bands(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.cells;
        let inv = 1.0 / self.spacing;
        let mut diag = vec![2.0 * inv + self.ridge; n];
        diag[0] = inv + self.ridge;
        diag[n - 1] = inv + self.ridge;
        (diag, vec![-inv; n - 1])
    }

    /// `Qγ`.
    pub fn apply(&self, gamma: &[f64]) -> Vec<f64> {
        let n = self.cells;
        let inv = 1.0 / self.spacing;
        let mut out: Vec<f64> = gamma.iter().map(|g| self.ridge * g).collect();
        for d in 0..n - 1 {
            let diff = (gamma[d + 1] - gamma[d]) * inv;
            out[d] -= diff;
            out[d + 1] += diff;
        }
        out
    }

    /// `γᵀQγ`.
    pub fn quad_form(&self, gamma: &[f64]) -> f64 {
        let rw: f64 = gamma.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / self.spacing;
        rw + self.ridge * gamma.iter().map(|g| g * g).sum::<f64>()
    }

    fn check(&self, gamma: &[f64]) -> Result<()> {
        if gamma.len() != self.cells {
            return Err(Error::InvalidArgument(format!(
                "expected {} log sizes, got {}",
                self.cells,
                gamma.len()
            )));
        }
        Ok(())
    }

    /// `(rank/2) log τ - (τ/2) γᵀQγ`, plus `(a-1) log τ - bτ` when
    /// `with_hyperprior` is set, up to constants. Returns the value and its
    /// gradient in γ.
    pub fn log_prior(&self, gamma: &[f64], tau: f64, with_hyperprior: bool) -> Result<(f64, Vec<f64>)> {
        self.check(gamma)?;
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("precision must be positive, got {tau}")));
        }
        let mut value = 0.5 * self.rank() as f64 * tau.ln() - 0.5 * tau * self.quad_form(gamma);
        if with_hyperprior {
            value += self.log_hyperprior(tau);
        }
        let grad = self.apply(gamma).into_iter().map(|q| -tau * q).collect();
        Ok((value, grad))
    }

    /// `(a-1) log τ - bτ`.
    pub fn log_hyperprior(&self, tau: f64) -> f64 {
        (self.shape - 1.0) * tau.ln() - self.rate * tau
    }

    /// Conditional draw `τ | γ ~ Gamma(a + rank/2, b + γᵀQγ/2)`, floored at
    /// the smallest positive normal double.
    pub fn sample_tau<R: Rng + ?Sized>(&self, gamma: &[f64], rng: &mut R) -> f64 {
        let shape = self.shape + 0.5 * self.rank() as f64;
        let rate = self.rate + 0.5 * self.quad_form(gamma);
        let g = Gamma::new(shape, 1.0 / rate).expect("positive Gamma parameters");
        g.sample(rng).max(f64::MIN_POSITIVE)
    }

    /// Eigen-decomposition of Q.
    pub fn eigenbasis(&self) -> Eigenbasis {
        Eigenbasis::new(self.cells, self.spacing, self.ridge)
    }
}

/// Orthonormal eigenvectors of the RW1 precision, which are the DCT-II
/// cosines `cos(πj(i + 1/2)/n)` with eigenvalues `4 sin²(πj/2n)/Δ`.
#[derive(Debug, Clone)]
pub struct Eigenbasis {
    n: usize,
    values: Vec<f64>,
    // Row j holds eigenvector j.
    vectors: Vec<f64>,
}

impl Eigenbasis {
    fn new(n: usize, spacing: f64, ridge: f64) -> Self {
        let values = (0..n)
            .map(|j| 4.0 * (PI * j as f64 / (2.0 * n as f64)).sin().powi(2) / spacing + ridge)
            .collect();
        let mut vectors = vec![0.0; n * n];
        for j in 0..n {
            let c = if j == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                vectors[j * n + i] = c * (PI * j as f64 * (i as f64 + 0.5) / n as f64).cos();
            }
        }
        Self { n, values, vectors }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Coordinates of `x` in the eigenbasis.
    pub fn to_eigen(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let row = &self.vectors[j * n..(j + 1) * n];
            out[j] = row.iter().zip(x).map(|(v, x)| v * x).sum();
        }
    }

    /// Inverse of [`Eigenbasis::to_eigen`].
    pub fn from_eigen(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..n {
            let row = &self.vectors[j * n..(j + 1) * n];
            let zj = z[j];
            for (o, v) in out.iter_mut().zip(row) {
                *o += zj * v;
            }
        }
    }
}
