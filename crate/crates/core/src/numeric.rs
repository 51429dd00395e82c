//! Small numerical helpers shared across modules.

/// `log(Σ exp(x_i))`, stable for large magnitudes. Returns `-inf` for an
/// empty input or when every term is `-inf`.
pub fn log_sum_exp_slice(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Table of `ln(i!)` for `i = 0..=n`, summed exactly from logs.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    for i in 1..=n {
        out.push(libm::lgamma(i as f64 + 1.0));
    }
    out
}

/// LDLᵀ factorization of a symmetric positive-definite tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    // Forward pivots of LDLᵀ.
    pivots: Vec<f64>,
}

impl Tridiagonal {
    /// Returns `None` unless the matrix is numerically positive definite.
    pub fn factor(diag: Vec<f64>, off: Vec<f64>) -> Option<Self> {
        let n = diag.len();
        debug_assert_eq!(off.len() + 1, n);
        let mut pivots = Vec::with_capacity(n);
        for i in 0..n {
            let p = if i == 0 { diag[0] } else { diag[i] - off[i - 1] * off[i - 1] / pivots[i - 1] };
            if !(p > 0.0 && p.is_finite()) {
                return None;
            }
            pivots.push(p);
        }
        Some(Self { diag, off, pivots })
    }

    pub fn log_det(&self) -> f64 {
        self.pivots.iter().map(|p| p.ln()).sum()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.pivots.len();
        let mut y = rhs.to_vec();
        for i in 1..n {
            y[i] -= self.off[i - 1] / self.pivots[i - 1] * y[i - 1];
        }
        for i in 0..n {
            y[i] /= self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            y[i] -= self.off[i] / self.pivots[i] * y[i + 1];
        }
        y
    }

    /// Diagonal of the inverse, from forward and backward pivots.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.pivots.len();
        let mut back = vec![0.0; n];
        back[n - 1] = self.diag[n - 1];
        for i in (0..n - 1).rev() {
            back[i] = self.diag[i] - self.off[i] * self.off[i] / back[i + 1];
        }
        (0..n)
            .map(|i| 1.0 / (self.pivots[i] + back[i] - self.diag[i]))
            .collect()
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}
