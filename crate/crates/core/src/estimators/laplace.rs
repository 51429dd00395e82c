//! Laplace approximation of the trajectory posterior at a fixed measure.
//!
//! For each precision τ on a grid in log τ the conditional mode of γ is
//! found by Newton's method and the posterior of γ given τ is replaced by a
//! Gaussian there. The grid points are weighted by the Laplace estimate of
//! the marginal posterior of log τ, and cell summaries come from the
//! resulting Gaussian mixture.

use serde::{Deserialize, Serialize};

use super::summary::TrajectorySummary;
use super::{require_events, FitConfig};
use crate::error::{Error, Result};
use crate::genealogy::CoalescentData;
use crate::gmrf::{build_grid, GmrfPrior, SkyGrid};
use crate::lambda_rates::{LambdaMeasure, RateTable};
use crate::likelihood::{ExposureTable, Layout};
use crate::numeric::{log_sum_exp_slice, normal_cdf, Tridiagonal};

const MAX_NEWTON: usize = 200;
const LOG_TAU_START: (f64, f64) = (-5.0, 15.0);
const LOG_TAU_LIMITS: (f64, f64) = (-20.0, 25.0);
const LOG_TAU_STEP: f64 = 0.5;
/// Grid points whose log weight is this far below the maximum are dropped.
const WEIGHT_CUTOFF: f64 = 20.0;
/// Largest Newton step in any coordinate.
const MAX_STEP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceFit {
    pub summary: TrajectorySummary,
    /// Joint posterior mode of (γ, log τ).
    pub mode_gamma: Vec<f64>,
    pub mode_log_tau: f64,
    /// Retained log τ grid and normalized weights.
    pub log_tau: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Laplace fit with the grid and hyperprior from `cfg`.
pub fn laplace_fit(data: &CoalescentData, m: &LambdaMeasure, cfg: &FitConfig) -> Result<LaplaceFit> {
    cfg.validate()?;
    require_events(data)?;
    let grid = build_grid(data, cfg.grid_points)?;
    let layout = Layout::new(data, &grid)?;
    let rates = RateTable::build(m, layout.max_lineages())?;
    let table = layout.exposure(&rates);
    let prior = GmrfPrior::for_grid(&grid)?.with_hyperprior(cfg.tau_shape, cfg.tau_rate)?;
    fit_table(&table, &grid, &prior)
}

struct Conditional {
    log_tau: f64,
    gamma: Vec<f64>,
    variance: Vec<f64>,
    log_marginal: f64,
}

pub(crate) fn fit_table(table: &ExposureTable, grid: &SkyGrid, prior: &GmrfPrior) -> Result<LaplaceFit> {
    if table.exposure().iter().all(|&e| e == 0.0) {
        return Err(Error::InvalidData("no lineage pairs to coalesce".into()));
    }
    let start = grid.gamma().to_vec();
    let mut points: Vec<Conditional> = Vec::new();
    let mut theta = LOG_TAU_START.0;
    let mut warm = start.clone();
    while theta <= LOG_TAU_START.1 + 1e-9 {
        let c = conditional(table, prior, theta, &warm)?;
        warm = c.gamma.clone();
        points.push(c);
        theta += LOG_TAU_STEP;
    }
    // Extend while an edge still carries weight.
    loop {
        let best = points.iter().map(|c| c.log_marginal).fold(f64::NEG_INFINITY, f64::max);
        let (first_theta, first_lm, first_gamma) = (points[0].log_tau, points[0].log_marginal, points[0].gamma.clone());
        let last = points.len() - 1;
        let (last_theta, last_lm, last_gamma) = (points[last].log_tau, points[last].log_marginal, points[last].gamma.clone());
        let mut grew = false;
        if first_lm > best - WEIGHT_CUTOFF && first_theta - LOG_TAU_STEP >= LOG_TAU_LIMITS.0 {
            points.insert(0, conditional(table, prior, first_theta - LOG_TAU_STEP, &first_gamma)?);
            grew = true;
        }
        if last_lm > best - WEIGHT_CUTOFF && last_theta + LOG_TAU_STEP <= LOG_TAU_LIMITS.1 {
            points.push(conditional(table, prior, last_theta + LOG_TAU_STEP, &last_gamma)?);
            grew = true;
        }
        if !grew {
            break;
        }
    }
    let log_marginals: Vec<f64> = points.iter().map(|c| c.log_marginal).collect();
    let norm = log_sum_exp_slice(&log_marginals);
    let best = log_marginals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    points.retain(|c| c.log_marginal > best - WEIGHT_CUTOFF);
    let weights: Vec<f64> = points.iter().map(|c| (c.log_marginal - norm).exp()).collect();
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();

    let cells = table.cells();
    let mut median = Vec::with_capacity(cells);
    let mut lower = Vec::with_capacity(cells);
    let mut upper = Vec::with_capacity(cells);
    for d in 0..cells {
        let comps: Vec<(f64, f64, f64)> = points
            .iter()
            .zip(&weights)
            .map(|(c, &w)| (w, c.gamma[d], c.variance[d].sqrt()))
            .collect();
        lower.push(mixture_quantile(&comps, 0.025).exp());
        median.push(mixture_quantile(&comps, 0.5).exp());
        upper.push(mixture_quantile(&comps, 0.975).exp());
    }
    let best_point = points
        .iter()
        .max_by(|a, b| a.log_marginal.total_cmp(&b.log_marginal))
        .expect("at least one retained point");
    let (mode_gamma, mode_log_tau) = joint_mode(table, prior, &best_point.gamma)?;
    Ok(LaplaceFit {
        summary: TrajectorySummary {
            points: grid.points().to_vec(),
            median,
            lower,
            upper,
        },
        mode_gamma,
        mode_log_tau,
        log_tau: points.iter().map(|c| c.log_tau).collect(),
        weights,
    })
}

/// `ℓ(γ) - (τ/2) γᵀQγ`.
fn conditional_objective(table: &ExposureTable, prior: &GmrfPrior, tau: f64, gamma: &[f64]) -> f64 {
    table.trajectory_log_likelihood(gamma) - 0.5 * tau * prior.quad_form(gamma)
}

/// Negative Hessian of the conditional objective.
fn conditional_hessian(table: &ExposureTable, prior: &GmrfPrior, tau: f64, gamma: &[f64]) -> Option<Tridiagonal> {
    let (diag, off) = prior.precision_bands();
    let curv = table.curvature(gamma);
    Tridiagonal::factor(
        diag.iter().zip(&curv).map(|(q, c)| tau * q + c).collect(),
        off.iter().map(|q| tau * q).collect(),
    )
}

/// Mode of γ given τ = exp(theta), by damped Newton.
pub(crate) fn conditional_mode(
    table: &ExposureTable,
    prior: &GmrfPrior,
    theta: f64,
    start: &[f64],
) -> Result<(Vec<f64>, Tridiagonal)> {
    let tau = theta.exp();
    let mut gamma = start.to_vec();
    let mut value = conditional_objective(table, prior, tau, &gamma);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..MAX_NEWTON {
        let qg = prior.apply(&gamma);
        let grad: Vec<f64> = table
            .gradient(&gamma)
            .iter()
            .zip(&qg)
            .map(|(g, q)| g - tau * q)
            .collect();
        grad_norm = grad.iter().fold(0.0, |m, g| f64::max(m, g.abs()));
        let hess = conditional_hessian(table, prior, tau, &gamma).ok_or(Error::Newton {
            iterations: 0,
            gradient_norm: grad_norm,
        })?;
        let mut step = hess.solve(&grad);
        let decrement: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
        if decrement < 1e-20 || grad_norm < 1e-10 {
            return Ok((gamma, hess));
        }
        let biggest = step.iter().fold(0.0, |m, s| f64::max(m, s.abs()));
        if biggest > MAX_STEP {
            step.iter_mut().for_each(|s| *s *= MAX_STEP / biggest);
        }
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = gamma.iter().zip(&step).map(|(g, s)| g + t * s).collect();
            let v = conditional_objective(table, prior, tau, &trial);
            if v.is_finite() && v >= value - 1e-12 * value.abs().max(1.0) {
                gamma = trial;
                value = v;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                let hess = conditional_hessian(table, prior, tau, &gamma).expect("factored above");
                return Ok((gamma, hess));
            }
        }
    }
    Err(Error::Newton {
        iterations: MAX_NEWTON,
        gradient_norm: grad_norm,
    })
}

fn conditional(table: &ExposureTable, prior: &GmrfPrior, theta: f64, start: &[f64]) -> Result<Conditional> {
    let (gamma, hess) = conditional_mode(table, prior, theta, start)?;
    let tau = theta.exp();
    let log_marginal = conditional_objective(table, prior, tau, &gamma)
        + 0.5 * prior.rank() as f64 * theta
        + prior.shape() * theta
        - prior.rate() * tau
        - 0.5 * hess.log_det();
    Ok(Conditional {
        log_tau: theta,
        variance: hess.inverse_diagonal(),
        gamma,
        log_marginal,
    })
}

/// Quantile of a Gaussian mixture given as `(weight, mean, sd)` triples.
fn mixture_quantile(comps: &[(f64, f64, f64)], p: f64) -> f64 {
    let cdf = |x: f64| -> f64 { comps.iter().map(|&(w, m, s)| w * normal_cdf((x - m) / s)).sum() };
    let mut lo = comps.iter().map(|&(_, m, s)| m - 10.0 * s).fold(f64::INFINITY, f64::min);
    let mut hi = comps.iter().map(|&(_, m, s)| m + 10.0 * s).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `ℓ(γ) + (rank/2 + a) θ - e^θ (γᵀQγ/2 + b)`, the joint log posterior of
/// (γ, θ = log τ) up to a constant.
fn joint_objective(table: &ExposureTable, prior: &GmrfPrior, gamma: &[f64], theta: f64) -> f64 {
    table.trajectory_log_likelihood(gamma) + (0.5 * prior.rank() as f64 + prior.shape()) * theta
        - theta.exp() * (0.5 * prior.quad_form(gamma) + prior.rate())
}

/// Joint posterior mode of (γ, log τ) by Newton's method on the bordered
/// tridiagonal system, falling back to a coordinate step where the Hessian
/// is not negative definite.
pub(crate) fn joint_mode(table: &ExposureTable, prior: &GmrfPrior, start: &[f64]) -> Result<(Vec<f64>, f64)> {
    let half_rank = 0.5 * prior.rank() as f64 + prior.shape();
    let best_theta = |gamma: &[f64]| (half_rank / (prior.rate() + 0.5 * prior.quad_form(gamma))).ln();
    let mut gamma = start.to_vec();
    let mut theta = best_theta(&gamma);
    let mut value = joint_objective(table, prior, &gamma, theta);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..MAX_NEWTON {
        let tau = theta.exp();
        let qg = prior.apply(&gamma);
        let g_gamma: Vec<f64> = table.gradient(&gamma).iter().zip(&qg).map(|(g, q)| g - tau * q).collect();
        let ss = prior.quad_form(&gamma);
        let g_theta = half_rank - tau * (0.5 * ss + prior.rate());
        grad_norm = g_gamma.iter().fold(g_theta.abs(), |m, g| f64::max(m, g.abs()));
        if grad_norm < 1e-9 {
            return Ok((gamma, theta));
        }
        let a = conditional_hessian(table, prior, tau, &gamma).ok_or(Error::Newton {
            iterations: 0,
            gradient_norm: grad_norm,
        })?;
        let u: Vec<f64> = qg.iter().map(|q| tau * q).collect();
        let c = tau * (0.5 * ss + prior.rate());
        let a_inv_u = a.solve(&u);
        let a_inv_g = a.solve(&g_gamma);
        let schur = c - u.iter().zip(&a_inv_u).map(|(x, y)| x * y).sum::<f64>();
        let (mut d_gamma, d_theta) = if schur > 1e-12 * c {
            let d_theta = (g_theta - u.iter().zip(&a_inv_g).map(|(x, y)| x * y).sum::<f64>()) / schur;
            let d_gamma: Vec<f64> = a_inv_g.iter().zip(&a_inv_u).map(|(g, w)| g - w * d_theta).collect();
            (d_gamma, d_theta)
        } else {
            (a_inv_g, best_theta(&gamma) - theta)
        };
        let biggest = d_gamma.iter().fold(d_theta.abs(), |m, s| f64::max(m, s.abs()));
        let shrink = if biggest > MAX_STEP { MAX_STEP / biggest } else { 1.0 };
        d_gamma.iter_mut().for_each(|s| *s *= shrink);
        let d_theta = d_theta * shrink;
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let trial: Vec<f64> = gamma.iter().zip(&d_gamma).map(|(g, s)| g + t * s).collect();
            let trial_theta = theta + t * d_theta;
            let v = joint_objective(table, prior, &trial, trial_theta);
            if v.is_finite() && v > value {
                gamma = trial;
                theta = trial_theta;
                value = v;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // Closed-form θ step as a last resort.
            let th = best_theta(&gamma);
            let v = joint_objective(table, prior, &gamma, th);
            if v > value {
                theta = th;
                value = v;
            } else {
                return Ok((gamma, theta));
            }
        }
    }
    Err(Error::Newton {
        iterations: MAX_NEWTON,
        gradient_norm: grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_quantile_of_single_gaussian() {
        let q = mixture_quantile(&[(1.0, 2.0, 0.5)], 0.975);
        assert!((q - (2.0 + 0.5 * 1.959963984540054)).abs() < 1e-9);
        let m = mixture_quantile(&[(0.5, -1.0, 1.0), (0.5, 1.0, 1.0)], 0.5);
        assert!(m.abs() < 1e-9);
    }
}
