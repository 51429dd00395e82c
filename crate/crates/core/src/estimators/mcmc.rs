//! Metropolis-within-Gibbs sampler over (γ, τ, α).

use rand::Rng;

use super::alpha::AlphaSweep;
use super::block_size::block_size_mle;
use super::hybrid::exposure_at;
use super::hmc::{Hmc, HmcState, Mass};
use super::laplace::fit_table;
use super::summary::{effective_sample_size, quantile, TrajectorySummary};
use super::{require_events, Diagnostics, FitConfig, FitResult, Method};
use crate::error::{Error, Result};
use crate::genealogy::CoalescentData;
use crate::gmrf::{build_grid, GmrfPrior};
use crate::lambda_rates::ALPHA_MAX;
use crate::likelihood::Layout;

/// Floor on the per-cell mass curvature, relative to the mean.
const MIN_CURVATURE: f64 = 1e-2;

/// Post-burn-in draws.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Chain {
    pub alpha: Vec<f64>,
    pub tau: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    /// Grid points of the trajectory cells.
    pub points: Vec<f64>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

pub fn mcmc_fit<R: Rng + ?Sized>(data: &CoalescentData, cfg: &FitConfig, rng: &mut R) -> Result<FitResult> {
    cfg.validate()?;
    require_events(data)?;
    let grid = build_grid(data, cfg.grid_points)?;
    let layout = Layout::new(data, &grid)?;
    let prior = GmrfPrior::for_grid(&grid)?.with_hyperprior(cfg.tau_shape, cfg.tau_rate)?;
    let sweep = match cfg.fixed_alpha {
        Some(_) => None,
        None if cfg.prior_only => None,
        None => Some(AlphaSweep::new(&layout, cfg.alpha_intervals)?),
    };

    let mut alpha = match cfg.fixed_alpha {
        Some(a) => a,
        None => block_size_mle(data, cfg)?.alpha,
    };
    let mut table = exposure_at(&layout, alpha)?;
    let laplace = fit_table(&table, &grid, &prior).ok();
    let mut gamma = match &laplace {
        Some(fit) => fit.summary.log_median(),
        None => grid.gamma().to_vec(),
    };
    let mut tau = prior.sample_tau(&gamma, rng);

    let initial_step = cfg.step_size.unwrap_or_else(|| match cfg.mass {
        Mass::Precision => 1.0,
        Mass::Identity => {
            let max_count = table.counts().iter().copied().max().unwrap_or(1).max(1);
            1.0 / (max_count as f64).sqrt()
        }
    });
    let mut tuner = HmcState::new(initial_step, cfg.target_accept);
    let mut step = initial_step;
    let curvature = match (cfg.prior_only, &laplace) {
        (false, Some(fit)) => {
            // Curvature at the smooth mode, or the event count, which is the
            // curvature at the per-cell maximum that rough states approach.
            let w: Vec<f64> = table
                .curvature(&fit.mode_gamma)
                .into_iter()
                .zip(table.counts())
                .map(|(c, &k)| c.max(k as f64))
                .collect();
            let floor = MIN_CURVATURE * w.iter().sum::<f64>() / w.len() as f64;
            w.into_iter().map(|c| c.max(floor).max(f64::MIN_POSITIVE)).collect()
        }
        _ => vec![1.0; grid.num_cells()],
    };
    let mut hmc = Hmc::new(&prior, cfg.integrator, cfg.leapfrog_steps, cfg.mass, curvature)?;

    let burn = cfg.burn_in_iterations();
    let kept = cfg.iterations - burn;
    let mut chain = Chain {
        alpha: Vec::with_capacity(kept),
        tau: Vec::with_capacity(kept),
        gamma: Vec::with_capacity(kept),
        points: grid.points().to_vec(),
    };
    let mut accepted_total = 0usize;
    let mut window_accepts = 0usize;
    let mut window_start = burn;

    for it in 0..cfg.iterations {
        let adapting = it < burn && cfg.step_size.is_none();
        let base = if adapting { tuner.step_size() } else { step };
        let eps = base * (0.2 + 1.3 * rng.random::<f64>());
        let lik = if cfg.prior_only { None } else { Some(&table) };
        let t = hmc.transition(lik, tau, &mut gamma, eps, rng);
        if adapting {
            tuner.update(t.accept_prob);
            if it + 1 == burn {
                step = tuner.final_step_size();
            }
        }

        tau = prior.sample_tau(&gamma, rng);

        if cfg.fixed_alpha.is_none() {
            alpha = match &sweep {
                Some(s) => s.sample(&gamma, rng),
                None => ALPHA_MAX * (1.0 - rng.random::<f64>()),
            };
            if !cfg.prior_only {
                table = exposure_at(&layout, alpha)?;
            }
        }

        if it >= burn {
            accepted_total += t.accepted as usize;
            window_accepts += t.accepted as usize;
            if it + 1 - window_start == cfg.collapse_window {
                let rate = window_accepts as f64 / cfg.collapse_window as f64;
                if rate < cfg.collapse_rate {
                    return Err(Error::AcceptanceCollapse {
                        rate,
                        start: window_start,
                        end: it + 1,
                        step_size: step,
                    });
                }
                window_start = it + 1;
                window_accepts = 0;
            }
            chain.alpha.push(alpha);
            chain.tau.push(tau);
            chain.gamma.push(gamma.clone());
        }
    }

    let probe = cfg.probe();
    let mut sorted = chain.alpha.clone();
    sorted.sort_by(f64::total_cmp);
    let median = quantile(&sorted, 0.5);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let probe_draws: Vec<f64> = chain.gamma.iter().map(|g| g[probe]).collect();
    let diagnostics = Diagnostics {
        hmc_acceptance: Some(accepted_total as f64 / kept as f64),
        step_size: Some(step),
        ess_alpha: cfg.fixed_alpha.is_none().then(|| effective_sample_size(&chain.alpha)),
        ess_probe: Some(effective_sample_size(&probe_draws)),
        probe_cell: Some(probe),
        converged: true,
        hybrid_trace: Vec::new(),
    };
    Ok(FitResult {
        method: Method::Mcmc,
        alpha: median,
        alpha_boundary: None,
        alpha_median: Some(median),
        alpha_mean: Some(mean),
        alpha_interval: Some((quantile(&sorted, 0.025), quantile(&sorted, 0.975))),
        trajectory: TrajectorySummary::from_log_draws(grid.points().to_vec(), &chain.gamma),
        diagnostics,
        chain: Some(chain),
    })
}
