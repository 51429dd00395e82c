//! Hamiltonian Monte Carlo for log sizes given τ.
//!
//! The potential is `-ℓ(γ) + (τ/2) γᵀQγ` with kinetic energy `pᵀM⁻¹p/2`.
//! Trajectories are carried in coordinates `u` with `γ = F u`, chosen so
//! that the mass becomes the identity and the prior part becomes
//! `Σ λ_j u_j² / 2`. The split integrator kicks with the likelihood
//! gradient for half a step, follows the prior part exactly (a rotation per
//! coordinate) for a full step and kicks again.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::GmrfPrior;
use crate::likelihood::ExposureTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Split,
    Leapfrog,
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split" => Ok(Self::Split),
            "leapfrog" => Ok(Self::Leapfrog),
            _ => Err(Error::InvalidArgument(format!("unknown integrator {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mass {
    Identity,
    /// `τQ + diag(w)` with w a fixed per-cell likelihood curvature. In the
    /// Gaussian approximation every direction then moves at unit speed,
    /// whatever τ is.
    Precision,
}

impl std::str::FromStr for Mass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "precision" => Ok(Self::Precision),
            _ => Err(Error::InvalidArgument(format!("unknown mass {s:?}"))),
        }
    }
}

/// Frequencies below this are integrated as free flight.
const MIN_FREQUENCY: f64 = 1e-12;

/// The pencil `Q v = ν W v` with `vᵀ W v = 1`. With `M = τQ + W` the
/// coordinates `u_j = sqrt(1 + τν_j) vⱼᵀ W γ` have unit mass and prior
/// frequencies² `τν_j / (1 + τν_j)`, so changing τ only rescales them.
#[derive(Debug, Clone)]
struct Pencil {
    vectors: DMatrix<f64>,
    /// `Vᵀ W`, the inverse of `V`.
    inverse: DMatrix<f64>,
    nu: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Hmc {
    integrator: Integrator,
    steps: usize,
    mass: Mass,
    prior: GmrfPrior,
    pencil: Pencil,
    tau: f64,
    // `γ = V (scale ∘ u)`.
    scale: Vec<f64>,
    lambda: Vec<f64>,
    u: DVector<f64>,
    p: DVector<f64>,
    v: DVector<f64>,
    gamma: DVector<f64>,
    grad: DVector<f64>,
    grad_u: DVector<f64>,
}

/// Outcome of one HMC transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub accepted: bool,
    pub accept_prob: f64,
}

impl Hmc {
    /// `curvature` holds the per-cell w of [`Mass::Precision`]; it must be
    /// positive there and is ignored for the identity.
    pub fn new(
        prior: &GmrfPrior,
        integrator: Integrator,
        steps: usize,
        mass: Mass,
        curvature: Vec<f64>,
    ) -> Result<Self> {
        let n = prior.cells();
        let pencil = match mass {
            Mass::Identity => {
                let basis = prior.eigenbasis();
                let mut vectors = DMatrix::zeros(n, n);
                let mut e = vec![0.0; n];
                let mut col = vec![0.0; n];
                for j in 0..n {
                    e.iter_mut().for_each(|x| *x = 0.0);
                    e[j] = 1.0;
                    basis.from_eigen(&e, &mut col);
                    vectors.set_column(j, &DVector::from_column_slice(&col));
                }
                Pencil {
                    inverse: vectors.transpose(),
                    vectors,
                    nu: basis.values().to_vec(),
                }
            }
            Mass::Precision => {
                if curvature.len() != n || curvature.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(Error::InvalidArgument(format!(
                        "precision mass needs {n} positive curvatures"
                    )));
                }
                pencil(prior, &curvature)
            }
        };
        Ok(Self {
            integrator,
            steps: steps.max(1),
            mass,
            prior: prior.clone(),
            pencil,
            tau: f64::NAN,
            scale: vec![1.0; n],
            lambda: vec![0.0; n],
            u: DVector::zeros(n),
            p: DVector::zeros(n),
            v: DVector::zeros(n),
            gamma: DVector::zeros(n),
            grad: DVector::zeros(n),
            grad_u: DVector::zeros(n),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    /// Prior frequencies² in the integration coordinates.
    pub fn frequencies_squared(&mut self, tau: f64) -> &[f64] {
        self.prepare(tau);
        &self.lambda
    }

    fn prepare(&mut self, tau: f64) {
        if self.tau == tau {
            return;
        }
        self.tau = tau;
        for ((s, l), nu) in self.scale.iter_mut().zip(self.lambda.iter_mut()).zip(&self.pencil.nu) {
            match self.mass {
                Mass::Identity => {
                    *s = 1.0;
                    *l = tau * nu;
                }
                Mass::Precision => {
                    let m = 1.0 + tau * nu;
                    *s = 1.0 / m.sqrt();
                    *l = tau * nu / m;
                }
            }
        }
    }

    fn potential(&self, table: Option<&ExposureTable>, tau: f64, gamma: &[f64]) -> f64 {
        let lik = table.map_or(0.0, |t| t.trajectory_log_likelihood(gamma));
        0.5 * tau * self.prior.quad_form(gamma) - lik
    }

    fn kinetic(&self) -> f64 {
        0.5 * self.p.norm_squared()
    }

    /// `γ = V (scale ∘ u)` into `self.gamma`.
    fn to_gamma(&mut self) {
        for ((v, u), s) in self.v.iter_mut().zip(&self.u).zip(&self.scale) {
            *v = u * s;
        }
        self.gamma.gemv(1.0, &self.pencil.vectors, &self.v, 0.0);
    }

    /// Likelihood gradient at `self.u`, in u coordinates, into `grad_u`.
    fn likelihood_gradient(&mut self, table: Option<&ExposureTable>) {
        match table {
            Some(t) => {
                self.to_gamma();
                t.gradient_into(self.gamma.as_slice(), self.grad.as_mut_slice());
                self.grad_u.gemv_tr(1.0, &self.pencil.vectors, &self.grad, 0.0);
                for (g, s) in self.grad_u.iter_mut().zip(&self.scale) {
                    *g *= s;
                }
            }
            None => self.grad_u.fill(0.0),
        }
    }

    fn kick(&mut self, h: f64) {
        self.p.axpy(h, &self.grad_u, 1.0);
    }

    /// Exact flow of the prior part for time `h`.
    fn rotate(&mut self, h: f64) {
        for ((u, p), lam) in self.u.iter_mut().zip(self.p.iter_mut()).zip(&self.lambda) {
            let omega = lam.sqrt();
            if omega < MIN_FREQUENCY {
                *u += h * *p;
            } else {
                let (s, c) = (omega * h).sin_cos();
                let u0 = *u;
                *u = u0 * c + *p * s / omega;
                *p = -omega * u0 * s + *p * c;
            }
        }
    }

    /// Full gradient of the log target in u coordinates, into `grad_u`.
    fn full_gradient(&mut self, table: Option<&ExposureTable>) {
        self.likelihood_gradient(table);
        for ((g, u), lam) in self.grad_u.iter_mut().zip(&self.u).zip(&self.lambda) {
            *g -= lam * u;
        }
    }

    /// Integrates from (`self.u`, `self.p`) for `steps` steps of size `eps`.
    fn integrate(&mut self, table: Option<&ExposureTable>, eps: f64, steps: usize) {
        match self.integrator {
            Integrator::Split => {
                self.likelihood_gradient(table);
                for _ in 0..steps {
                    self.kick(0.5 * eps);
                    self.rotate(eps);
                    self.likelihood_gradient(table);
                    self.kick(0.5 * eps);
                }
            }
            Integrator::Leapfrog => {
                self.full_gradient(table);
                for _ in 0..steps {
                    self.kick(0.5 * eps);
                    self.u.axpy(eps, &self.p, 1.0);
                    self.full_gradient(table);
                    self.kick(0.5 * eps);
                }
            }
        }
    }

    fn position(&mut self) -> Vec<f64> {
        self.to_gamma();
        self.gamma.as_slice().to_vec()
    }

    fn load(&mut self, gamma: &[f64]) {
        self.gamma.copy_from_slice(gamma);
        self.u.gemv(1.0, &self.pencil.inverse, &self.gamma, 0.0);
        for (u, s) in self.u.iter_mut().zip(&self.scale) {
            *u /= s;
        }
    }

    /// Change in the Hamiltonian over `steps` steps of size `eps` from
    /// `gamma`, with `momentum` given in the integration coordinates.
    pub fn energy_error(
        &mut self,
        table: Option<&ExposureTable>,
        tau: f64,
        gamma: &[f64],
        momentum: &[f64],
        eps: f64,
        steps: usize,
    ) -> f64 {
        self.prepare(tau);
        self.p.copy_from_slice(momentum);
        let start = self.potential(table, tau, gamma) + self.kinetic();
        self.load(gamma);
        self.integrate(table, eps, steps);
        let end = self.position();
        self.potential(table, tau, &end) + self.kinetic() - start
    }

    /// One Metropolis-corrected transition from `gamma`, which is updated in
    /// place when the proposal is accepted.
    pub fn transition<R: Rng + ?Sized>(
        &mut self,
        table: Option<&ExposureTable>,
        tau: f64,
        gamma: &mut [f64],
        eps: f64,
        rng: &mut R,
    ) -> Transition {
        self.prepare(tau);
        for p in self.p.iter_mut() {
            *p = rng.sample(StandardNormal);
        }
        let start = self.potential(table, tau, gamma) + self.kinetic();
        self.load(gamma);
        self.integrate(table, eps, self.steps);
        let proposal = self.position();
        let end = self.potential(table, tau, &proposal) + self.kinetic();
        let log_ratio = start - end;
        let accept_prob = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
        let accepted = rng.random::<f64>() < accept_prob;
        if accepted {
            gamma.copy_from_slice(&proposal);
        }
        Transition { accepted, accept_prob }
    }
}

/// Generalized eigenvectors of `(Q, diag(w))` through the symmetric matrix
/// `W^-1/2 Q W^-1/2`.
fn pencil(prior: &GmrfPrior, w: &[f64]) -> Pencil {
    let n = w.len();
    let (diag, off) = prior.precision_bands();
    let r: Vec<f64> = w.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut sym = DMatrix::zeros(n, n);
    for i in 0..n {
        sym[(i, i)] = diag[i] * r[i] * r[i];
        if i + 1 < n {
            let o = off[i] * r[i] * r[i + 1];
            sym[(i, i + 1)] = o;
            sym[(i + 1, i)] = o;
        }
    }
    let eig = SymmetricEigen::new(sym);
    let mut vectors = eig.eigenvectors;
    let mut inverse = vectors.transpose();
    for i in 0..n {
        vectors.row_mut(i).scale_mut(r[i]);
        inverse.column_mut(i).scale_mut(1.0 / r[i]);
    }
    Pencil {
        vectors,
        inverse,
        nu: eig.eigenvalues.iter().map(|v| v.max(0.0)).collect(),
    }
}

/// Dual-averaging step-size adaptation with the usual constants.
///
/// The step is capped at `MAX_GROWTH` times the initial value: when every
/// proposal is accepted (an exact flow, e.g. with no likelihood) the
/// unconstrained recursion grows the step without limit.
#[derive(Debug, Clone)]
pub struct HmcState {
    target: f64,
    mu: f64,
    max_log_eps: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    t: f64,
}

impl HmcState {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;
    const MAX_GROWTH: f64 = 100.0;

    pub fn new(initial: f64, target: f64) -> Self {
        Self {
            target,
            mu: (10.0 * initial).ln(),
            max_log_eps: (Self::MAX_GROWTH * initial).ln(),
            h_bar: 0.0,
            log_eps: initial.ln(),
            log_eps_bar: initial.ln(),
            t: 0.0,
        }
    }

    /// Step size for the next adaptive transition.
    pub fn step_size(&self) -> f64 {
        self.log_eps.exp()
    }

    /// Step size to freeze at the end of adaptation.
    pub fn final_step_size(&self) -> f64 {
        self.log_eps_bar.exp()
    }

    pub fn update(&mut self, accept_prob: f64) {
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        self.log_eps = (self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar).min(self.max_log_eps);
        let k = self.t.powf(-Self::KAPPA);
        self.log_eps_bar = k * self.log_eps + (1.0 - k) * self.log_eps_bar;
    }
}
