//! Merger rates of Λ-coalescents.
//!
//! `λ_{b,k} = ∫ x^{k-2} (1-x)^{b-k} Λ(dx)` is the rate at which one given
//! k-subset of b lineages merges. Everything is kept in log space.

pub mod quadrature;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{ln_factorials, log_sum_exp_slice};
use quadrature::{integrate_unit, Tolerance};

/// Beta parameters at or above this are treated as Kingman by
/// [`LambdaMeasure::for_alpha`].
pub const KINGMAN_SWITCH: f64 = 1.9999;

/// Smallest α considered by the estimators.
pub const ALPHA_MIN: f64 = 0.005;
pub const ALPHA_MAX: f64 = 2.0;

type DensityFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A probability density on [0, 1].
///
/// The closure receives `(x, 1 - x)` with both coordinates computed
/// accurately, so densities that blow up at 1 can use the second argument.
#[derive(Clone)]
pub struct Density {
    name: String,
    f: Arc<DensityFn>,
}

impl Density {
    /// Wraps a density of `x` alone.
    pub fn new<F>(name: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::with_complement(name, move |x, _| f(x))
    }

    /// Wraps a density given as `f(x, 1 - x)`. Fails unless it integrates
    /// to 1 within 1e-6.
    pub fn with_complement<F>(name: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let d = Self {
            name: name.into(),
            f: Arc::new(f),
        };
        let mass = integrate_unit(|x, xc| d.eval(x, xc), Tolerance::default())
            .map_err(|e| Error::InvalidMeasure(format!("density {} is not integrable: {e}", d.name)))?;
        if (mass.value - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidMeasure(format!(
                "density {} integrates to {}",
                d.name, mass.value
            )));
        }
        Ok(d)
    }

    /// The Beta(2-α, α) density.
    pub fn beta(alpha: f64) -> Result<Self> {
        check_beta_alpha(alpha)?;
        let log_norm = libm::lgamma(2.0 - alpha) + libm::lgamma(alpha);
        Self::with_complement(format!("beta-density:{alpha}"), move |x, xc| {
            ((1.0 - alpha) * x.ln() + (alpha - 1.0) * xc.ln() - log_norm).exp()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64, xc: f64) -> f64 {
        (self.f)(x, xc)
    }
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density").field("name", &self.name).finish()
    }
}

/// The measure Λ driving the merger rates.
#[derive(Debug, Clone)]
pub enum LambdaMeasure {
    PointMass(f64),
    /// Beta(2-α, α) with 0 < α < 2.
    Beta { alpha: f64 },
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
    Density(Density),
}

fn check_beta_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidMeasure(format!(
            "Beta parameter must lie in (0, 2), got {alpha}"
        )))
    }
}

impl LambdaMeasure {
    pub fn kingman() -> Self {
        Self::PointMass(0.0)
    }

    pub fn bolthausen_sznitman() -> Self {
        Self::Beta { alpha: 1.0 }
    }

    /// Beta(2-α, α) for α in (0, 2); α = 2 gives Kingman.
    pub fn beta(alpha: f64) -> Result<Self> {
        if alpha == 2.0 {
            return Ok(Self::kingman());
        }
        check_beta_alpha(alpha)?;
        Ok(Self::Beta { alpha })
    }

    /// Like [`LambdaMeasure::beta`] but switches to Kingman from
    /// [`KINGMAN_SWITCH`] upwards.
    pub fn for_alpha(alpha: f64) -> Result<Self> {
        if alpha >= KINGMAN_SWITCH && alpha <= 2.0 {
            Ok(Self::kingman())
        } else {
            Self::beta(alpha)
        }
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidMeasure(format!("point mass at {x} outside [0, 1]")));
        }
        Ok(Self::PointMass(x))
    }

    /// A finite pmf on [0, 1]. Weights must be positive and sum to 1
    /// within 1e-9.
    pub fn discrete(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(
                "atoms and weights must be non-empty and of equal length".into(),
            ));
        }
        if let Some(x) = atoms.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidMeasure(format!("atom {x} outside [0, 1]")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        Ok(Self::Discrete { atoms, weights })
    }

    pub fn density(d: Density) -> Self {
        Self::Density(d)
    }

    /// The Beta parameter this measure corresponds to, with Kingman as 2.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            Self::Beta { alpha } => Some(*alpha),
            Self::PointMass(x) if *x == 0.0 => Some(2.0),
            _ => None,
        }
    }

    pub fn is_kingman(&self) -> bool {
        matches!(self, Self::PointMass(x) if *x == 0.0)
    }
}

impl fmt::Display for LambdaMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PointMass(x) if *x == 0.0 => write!(f, "kingman"),
            Self::PointMass(x) => write!(f, "pointmass:{x}"),
            Self::Beta { alpha } if *alpha == 1.0 => write!(f, "bs"),
            Self::Beta { alpha } => write!(f, "beta:{alpha}"),
            Self::Discrete { atoms, .. } => write!(f, "discrete({} atoms)", atoms.len()),
            Self::Density(d) => write!(f, "density:{}", d.name()),
        }
    }
}

impl FromStr for LambdaMeasure {
    type Err = Error;

    /// Parses `kingman`, `bs`, `beta:<α>` and `pointmass:<x>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let number = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidMeasure(format!("not a number: {v:?}")))
        };
        match s.split_once(':') {
            None if s.eq_ignore_ascii_case("kingman") => Ok(Self::kingman()),
            None if s.eq_ignore_ascii_case("bs") => Ok(Self::bolthausen_sznitman()),
            Some(("beta", v)) => Self::beta(number(v)?),
            Some(("pointmass", v)) => Self::point_mass(number(v)?),
            _ => Err(Error::InvalidMeasure(format!("unknown measure {s:?}"))),
        }
    }
}

fn check_pair(b: usize, k: usize) -> Result<()> {
    if b < 2 || k < 2 || k > b {
        Err(Error::InvalidMerger { b, k })
    } else {
        Ok(())
    }
}

/// `(k-2) ln x + (b-k) ln(1-x)` with `0 ln 0 = 0`.
fn log_kernel(b: usize, k: usize, x: f64, xc: f64) -> f64 {
    let lo = if k == 2 { 0.0 } else { (k - 2) as f64 * x.ln() };
    let hi = if k == b { 0.0 } else { (b - k) as f64 * xc.ln() };
    lo + hi
}

fn beta_log_rate(b: usize, k: usize, alpha: f64) -> f64 {
    libm::lgamma(k as f64 - alpha) + libm::lgamma(alpha + (b - k) as f64)
        - libm::lgamma(b as f64)
        - (libm::lgamma(2.0 - alpha) + libm::lgamma(alpha))
}

fn density_log_rate(b: usize, k: usize, d: &Density) -> Result<f64> {
    // Scale by the kernel's maximum so large b does not underflow.
    let mode = if b == 2 { 0.5 } else { (k - 2) as f64 / (b - 2) as f64 };
    let shift = log_kernel(b, k, mode, 1.0 - mode);
    let est = integrate_unit(
        |x, xc| (log_kernel(b, k, x, xc) - shift).exp() * d.eval(x, xc),
        Tolerance::default(),
    )?;
    Ok(shift + est.value.ln())
}

/// `log λ_{b,k}`.
pub fn log_rate(b: usize, k: usize, m: &LambdaMeasure) -> Result<f64> {
    check_pair(b, k)?;
    Ok(match m {
        LambdaMeasure::PointMass(x0) => log_kernel(b, k, *x0, 1.0 - x0),
        LambdaMeasure::Beta { alpha } => beta_log_rate(b, k, *alpha),
        LambdaMeasure::Discrete { atoms, weights } => {
            let terms: Vec<f64> = atoms
                .iter()
                .zip(weights)
                .map(|(&x, &w)| w.ln() + log_kernel(b, k, x, 1.0 - x))
                .collect();
            log_sum_exp_slice(&terms)
        }
        LambdaMeasure::Density(d) => density_log_rate(b, k, d)?,
    })
}

fn row(b: usize, m: &LambdaMeasure) -> Result<Vec<f64>> {
    (2..=b).map(|k| log_rate(b, k, m)).collect()
}

fn log_total_from_row(b: usize, row: &[f64], ln_fact: &[f64]) -> f64 {
    let terms: Vec<f64> = row
        .iter()
        .enumerate()
        .map(|(i, lr)| {
            let k = i + 2;
            ln_fact[b] - ln_fact[k] - ln_fact[b - k] + lr
        })
        .collect();
    log_sum_exp_slice(&terms)
}

/// `log λ_b = log Σ_k C(b,k) λ_{b,k}`, the total merger rate of b lineages.
pub fn total_log_rate(b: usize, m: &LambdaMeasure) -> Result<f64> {
    check_pair(b, 2)?;
    let r = row(b, m)?;
    Ok(log_total_from_row(b, &r, &ln_factorials(b)))
}

/// Upper bound on the Beta total rate: `log[(b-1) (b/2)^(α-1)]`.
pub fn bound_log_rate(b: usize, alpha: f64) -> f64 {
    ((b - 1) as f64).ln() + (alpha - 1.0) * (b as f64 / 2.0).ln()
}

/// Distribution of the number of lineages in the next merger, indexed by
/// `k - 2`.
pub fn block_size_pmf(b: usize, m: &LambdaMeasure) -> Result<Vec<f64>> {
    check_pair(b, 2)?;
    let r = row(b, m)?;
    Ok(pmf_from_row(b, &r, &ln_factorials(b)))
}

fn pmf_from_row(b: usize, row: &[f64], ln_fact: &[f64]) -> Vec<f64> {
    let total = log_total_from_row(b, row, ln_fact);
    row.iter()
        .enumerate()
        .map(|(i, lr)| {
            let k = i + 2;
            (ln_fact[b] - ln_fact[k] - ln_fact[b - k] + lr - total).exp()
        })
        .collect()
}

pub fn mean_block_size(b: usize, m: &LambdaMeasure) -> Result<f64> {
    let pmf = block_size_pmf(b, m)?;
    Ok(pmf.iter().enumerate().map(|(i, p)| (i + 2) as f64 * p).sum())
}

/// Cached `log λ_{b,k}` and `log λ_b` for every `2 <= k <= b <= b_max`.
#[derive(Debug, Clone)]
pub struct RateTable {
    measure: LambdaMeasure,
    b_max: usize,
    log_rates: Vec<f64>,
    log_totals: Vec<f64>,
    ln_fact: Vec<f64>,
}

fn offset(b: usize) -> usize {
    (b - 1) * (b - 2) / 2
}

impl RateTable {
    pub fn build(measure: &LambdaMeasure, b_max: usize) -> Result<Self> {
        if b_max < 2 {
            return Err(Error::InvalidArgument(format!("rate table needs b_max >= 2, got {b_max}")));
        }
        let ln_fact = ln_factorials(b_max);
        let mut log_rates = vec![0.0; offset(b_max + 1)];
        match measure {
            LambdaMeasure::Beta { alpha } => {
                let alpha = *alpha;
                let norm = libm::lgamma(2.0 - alpha) + libm::lgamma(alpha);
                let head: Vec<f64> = (0..=b_max).map(|k| libm::lgamma(k as f64 - alpha)).collect();
                let tail: Vec<f64> = (0..=b_max).map(|j| libm::lgamma(alpha + j as f64)).collect();
                for b in 2..=b_max {
                    for k in 2..=b {
                        log_rates[offset(b) + k - 2] = head[k] + tail[b - k] - ln_fact[b - 1] - norm;
                    }
                }
            }
            LambdaMeasure::Density(_) => {
                // Quadrature for the top row only; lower rows follow from
                // λ_{b,k} = λ_{b+1,k} + λ_{b+1,k+1}, a sum of positive terms.
                let top = row(b_max, measure)?;
                log_rates[offset(b_max)..].copy_from_slice(&top);
                for b in (2..b_max).rev() {
                    for k in 2..=b {
                        let a = log_rates[offset(b + 1) + k - 2];
                        let c = log_rates[offset(b + 1) + k - 1];
                        log_rates[offset(b) + k - 2] = log_sum_exp_slice(&[a, c]);
                    }
                }
            }
            _ => {
                for b in 2..=b_max {
                    for k in 2..=b {
                        log_rates[offset(b) + k - 2] = log_rate(b, k, measure)?;
                    }
                }
            }
        }
        let mut log_totals = vec![f64::NEG_INFINITY; b_max + 1];
        for b in 2..=b_max {
            log_totals[b] = log_total_from_row(b, &log_rates[offset(b)..offset(b + 1)], &ln_fact);
        }
        Ok(Self {
            measure: measure.clone(),
            b_max,
            log_rates,
            log_totals,
            ln_fact,
        })
    }

    pub fn measure(&self) -> &LambdaMeasure {
        &self.measure
    }

    pub fn b_max(&self) -> usize {
        self.b_max
    }

    /// `log λ_{b,k}`. Panics outside `2 <= k <= b <= b_max`.
    pub fn log_rate(&self, b: usize, k: usize) -> f64 {
        assert!(2 <= k && k <= b && b <= self.b_max, "({b}, {k}) outside rate table");
        self.log_rates[offset(b) + k - 2]
    }

    /// `log[C(b,k) λ_{b,k}]`, the log rate of any k-merger among b.
    pub fn log_event_rate(&self, b: usize, k: usize) -> f64 {
        self.ln_fact[b] - self.ln_fact[k] - self.ln_fact[b - k] + self.log_rate(b, k)
    }

    /// `log λ_b`; `-inf` for `b < 2`.
    pub fn total_log_rate(&self, b: usize) -> f64 {
        assert!(b <= self.b_max, "{b} lineages exceed rate table");
        self.log_totals[b]
    }

    /// `λ_b`; zero for `b < 2`.
    pub fn total_rate(&self, b: usize) -> f64 {
        self.total_log_rate(b).exp()
    }

    pub fn block_size_pmf(&self, b: usize) -> Vec<f64> {
        assert!(2 <= b && b <= self.b_max, "{b} lineages outside rate table");
        pmf_from_row(b, &self.log_rates[offset(b)..offset(b + 1)], &self.ln_fact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn bolthausen_sznitman_factorials() {
        let bs = LambdaMeasure::bolthausen_sznitman();
        assert!(close(log_rate(3, 2, &bs).unwrap(), 0.5f64.ln(), 1e-14));
        // (k-2)!(b-k)!/(b-1)! at b=6, k=4: 2*2/120
        assert!(close(log_rate(6, 4, &bs).unwrap(), (4.0f64 / 120.0).ln(), 1e-13));
        assert!(close(total_log_rate(3, &bs).unwrap(), 2f64.ln(), 1e-14));
    }

    #[test]
    fn kingman_rates() {
        let k = LambdaMeasure::kingman();
        assert_eq!(log_rate(10, 2, &k).unwrap(), 0.0);
        assert_eq!(log_rate(10, 3, &k).unwrap(), f64::NEG_INFINITY);
        assert!(close(total_log_rate(10, &k).unwrap(), 45f64.ln(), 1e-14));
        assert_eq!(block_size_pmf(5, &k).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(mean_block_size(37, &k).unwrap(), 2.0);
    }

    #[test]
    fn star_rates() {
        let star = LambdaMeasure::point_mass(1.0).unwrap();
        assert_eq!(block_size_pmf(5, &star).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(mean_block_size(5, &star).unwrap(), 5.0);
        assert_eq!(log_rate(5, 5, &star).unwrap(), 0.0);
    }

    #[test]
    fn invalid_arguments() {
        let bs = LambdaMeasure::bolthausen_sznitman();
        assert!(log_rate(3, 4, &bs).is_err());
        assert!(log_rate(1, 2, &bs).is_err());
        assert!(LambdaMeasure::beta(0.0).is_err());
        assert!(LambdaMeasure::beta(2.5).is_err());
        assert!(LambdaMeasure::beta(2.0).unwrap().is_kingman());
        assert!(LambdaMeasure::for_alpha(1.99995).unwrap().is_kingman());
        assert!(LambdaMeasure::discrete(vec![0.5], vec![0.7]).is_err());
        assert!(Density::new("half", |_| 0.5).is_err());
    }

    #[test]
    fn keywords() {
        assert!("kingman".parse::<LambdaMeasure>().unwrap().is_kingman());
        assert_eq!("bs".parse::<LambdaMeasure>().unwrap().alpha(), Some(1.0));
        assert_eq!("beta:1.5".parse::<LambdaMeasure>().unwrap().alpha(), Some(1.5));
        assert!(matches!(
            "pointmass:0.3".parse::<LambdaMeasure>().unwrap(),
            LambdaMeasure::PointMass(x) if x == 0.3
        ));
        assert!("beta:x".parse::<LambdaMeasure>().is_err());
        assert!("dirac".parse::<LambdaMeasure>().is_err());
    }

    #[test]
    fn discrete_matches_point_mass() {
        let d = LambdaMeasure::discrete(vec![0.3], vec![1.0]).unwrap();
        let p = LambdaMeasure::point_mass(0.3).unwrap();
        for k in 2..=8 {
            assert!(close(log_rate(8, k, &d).unwrap(), log_rate(8, k, &p).unwrap(), 1e-14));
        }
    }

    #[test]
    fn uniform_density_is_beta_one() {
        let u = LambdaMeasure::density(Density::new("uniform", |_| 1.0).unwrap());
        let bs = LambdaMeasure::bolthausen_sznitman();
        for k in 2..=12 {
            let a = log_rate(12, k, &u).unwrap();
            let b = log_rate(12, k, &bs).unwrap();
            assert!((a - b).abs() < 1e-10, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn table_matches_free_functions() {
        let measures = [
            LambdaMeasure::beta(0.7).unwrap(),
            LambdaMeasure::kingman(),
            LambdaMeasure::discrete(vec![0.0, 0.4], vec![0.5, 0.5]).unwrap(),
            LambdaMeasure::density(Density::beta(1.3).unwrap()),
        ];
        for m in &measures {
            let t = RateTable::build(m, 25).unwrap();
            for b in 2..=25 {
                let total = total_log_rate(b, m).unwrap();
                assert!((t.total_log_rate(b) - total).abs() < 1e-9, "{m} b={b}");
                for k in 2..=b {
                    let direct = log_rate(b, k, m).unwrap();
                    if direct == f64::NEG_INFINITY {
                        assert_eq!(t.log_rate(b, k), direct);
                    } else {
                        assert!((t.log_rate(b, k) - direct).abs() < 1e-9, "{m} ({b},{k})");
                    }
                }
                let pmf = t.block_size_pmf(b);
                assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_block_size_decreases_in_alpha() {
        let means: Vec<f64> = [1.0, 1.5, 1.8]
            .iter()
            .map(|&a| mean_block_size(100, &LambdaMeasure::beta(a).unwrap()).unwrap())
            .collect();
        assert!(means.windows(2).all(|w| w[0] > w[1]), "{means:?}");
        assert!(means[2] > 2.0);
    }

    #[test]
    fn near_kingman_limit() {
        let m = LambdaMeasure::beta(1.999).unwrap();
        let pmf = block_size_pmf(20, &m).unwrap();
        assert!(pmf[0] > 0.999);
        for b in 2..=100 {
            assert!((log_rate(b, 2, &m).unwrap().exp() - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn bound_examples() {
        assert!(close(bound_log_rate(3, 1.0), 2f64.ln(), 1e-15));
        assert!(close(total_log_rate(3, &LambdaMeasure::bolthausen_sznitman()).unwrap(), 2f64.ln(), 1e-14));
        assert_eq!(bound_log_rate(2, 0.4), 0.0);
        for b in [3, 10, 50, 100] {
            let m = LambdaMeasure::beta(0.5).unwrap();
            assert!(total_log_rate(b, &m).unwrap() < bound_log_rate(b, 0.5));
        }
    }

    #[test]
    fn bound_is_exceeded_above_one() {
        // High-precision totals λ_b for Beta(2-α, α).
        let cases = [
            (3, 1.8, 2.8),
            (50, 1.8, 667.2328779549517),
            (100, 1.5, 743.7999229221848),
            (100, 1.2, 225.5192728978166),
        ];
        for (b, alpha, exact) in cases {
            let m = LambdaMeasure::beta(alpha).unwrap();
            let total = total_log_rate(b, &m).unwrap();
            assert!((total - f64::ln(exact)).abs() < 1e-12, "b={b} α={alpha}");
            let excess = total - bound_log_rate(b, alpha);
            assert!(excess > 0.0 && excess < 0.07f64.ln_1p(), "b={b} α={alpha}: {excess}");
        }
    }
}
