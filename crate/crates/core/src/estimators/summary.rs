use serde::{Deserialize, Serialize};

/// Per-cell posterior summary of `N_e` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    /// Grid points; cell d spans `(points[d], points[d + 1]]`.
    pub points: Vec<f64>,
    pub median: Vec<f64>,
    /// 2.5% quantile.
    pub lower: Vec<f64>,
    /// 97.5% quantile.
    pub upper: Vec<f64>,
}

impl TrajectorySummary {
    pub fn cells(&self) -> usize {
        self.median.len()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Log of the median, the trajectory used for plug-in evaluations.
    pub fn log_median(&self) -> Vec<f64> {
        self.median.iter().map(|m| m.ln()).collect()
    }

    /// Summary of draws of log sizes, one `Vec` per draw.
    pub fn from_log_draws(points: Vec<f64>, draws: &[Vec<f64>]) -> Self {
        let cells = points.len() - 1;
        let mut median = Vec::with_capacity(cells);
        let mut lower = Vec::with_capacity(cells);
        let mut upper = Vec::with_capacity(cells);
        let mut column = Vec::with_capacity(draws.len());
        for d in 0..cells {
            column.clear();
            column.extend(draws.iter().map(|g| g[d]));
            column.sort_by(f64::total_cmp);
            lower.push(quantile(&column, 0.025).exp());
            median.push(quantile(&column, 0.5).exp());
            upper.push(quantile(&column, 0.975).exp());
        }
        Self {
            points,
            median,
            lower,
            upper,
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Effective sample size by Geyer's initial positive sequence.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n as f64 * var)
    };
    let mut sum = 0.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    // sum of pairs counts rho(0) = 1 once: tau = 2 * sum - 1
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    n as f64 / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert_eq!(quantile(&v, 0.125), 1.5);
    }

    #[test]
    fn ess_of_iid_and_ar1() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let iid: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let ess = effective_sample_size(&iid);
        assert!(ess > 15_000.0 && ess < 25_000.0, "{ess}");
        // AR(1) with φ = 0.9 has τ = (1 + φ)/(1 - φ) = 19.
        let mut x = 0.0;
        let ar: Vec<f64> = (0..50_000)
            .map(|_| {
                x = 0.9 * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        let ess = effective_sample_size(&ar);
        assert!(ess > 50_000.0 / 19.0 * 0.7 && ess < 50_000.0 / 19.0 * 1.3, "{ess}");
    }
}
