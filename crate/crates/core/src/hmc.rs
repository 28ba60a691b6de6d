//! Hamiltonian Monte Carlo over a smoothly box-truncated Gaussian.
//!
//! The target density is
//!
//! ```text
//! p(s) ∝ N(s; μ, Σ) · Π_i σ(κ(d⁺_i − s_i)) · σ(κ(s_i − d⁻_i))
//! ```
//!
//! with σ the logistic function. The potential is U = −log p (including the
//! Gaussian normalizer), the kinetic energy is K(v) = ½ vᵀΣv, i.e. the mass
//! matrix is Σ⁻¹, and positions drift as ṡ = Σv.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::covariance::Covariance;
use crate::error::{invalid, Error, Result};
use crate::grid::{check_positive, Interval};
use crate::seed;

/// Default cutoff sharpness.
pub const DEFAULT_KAPPA: f64 = 50.0;

/// log(1 + eˣ) without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid, stable for large |x|.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct TargetDensity {
    mu: Vec<f64>,
    covariance: Arc<Covariance>,
    bounds: Arc<[Interval]>,
    kappa: f64,
    log_normalizer: f64,
}

impl TargetDensity {
    pub fn new(
        mu: Vec<f64>,
        covariance: Arc<Covariance>,
        bounds: Arc<[Interval]>,
        kappa: f64,
    ) -> Result<Self> {
        let d = covariance.dim();
        if mu.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: mu.len(),
            });
        }
        if bounds.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bounds.len(),
            });
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target mean".into()));
        }
        if let Some(b) = bounds.iter().find(|b| !(b.lo < b.hi)) {
            return Err(invalid(
                "bounds",
                format!("need lo < hi, got [{}, {}]", b.lo, b.hi),
            ));
        }
        check_positive("kappa", kappa)?;
        let log_normalizer =
            0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + covariance.log_det());
        Ok(Self {
            mu,
            covariance,
            bounds,
            kappa,
            log_normalizer,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// ½ log((2π)^D det Σ)
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn potential(&self, s: &[f64]) -> f64 {
        let d = self.dim();
        let mut diff = [0.0; 16];
        let mut heap;
        let diff: &mut [f64] = if d <= 16 {
            &mut diff[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        for i in 0..d {
            diff[i] = s[i] - self.mu[i];
        }
        let k = self.kappa;
        let barrier: f64 = s
            .iter()
            .zip(self.bounds.iter())
            .map(|(&x, b)| softplus(-k * (b.hi - x)) + softplus(-k * (x - b.lo)))
            .sum();
        0.5 * self.covariance.mahalanobis_sq(diff) + self.log_normalizer + barrier
    }

    /// ∇U(s) written into `out`.
    pub fn grad_potential_into(&self, s: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            scratch[i] = s[i] - self.mu[i];
        }
        self.covariance.mul_precision(&scratch[..d], &mut out[..d]);
        let k = self.kappa;
        for (i, b) in self.bounds.iter().enumerate() {
            out[i] += k * (sigmoid(-k * (b.hi - s[i])) - sigmoid(-k * (s[i] - b.lo)));
        }
    }

    pub fn grad_potential(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let mut scratch = vec![0.0; self.dim()];
        self.grad_potential_into(s, &mut out, &mut scratch);
        out
    }

    /// K(v) = ½ vᵀΣv
    pub fn kinetic(&self, v: &[f64]) -> f64 {
        0.5 * self.covariance.sigma_quad(v)
    }

    pub fn hamiltonian(&self, p: &PhasePoint) -> f64 {
        self.potential(&p.position) + self.kinetic(&p.momentum)
    }

    /// Whether `s` lies inside the box.
    pub fn contains(&self, s: &[f64]) -> bool {
        s.iter()
            .zip(self.bounds.iter())
            .all(|(&x, b)| x >= b.lo && x <= b.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
}

impl PhasePoint {
    pub fn new(position: Vec<f64>, momentum: Vec<f64>) -> Self {
        Self { position, momentum }
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(&self.momentum)
            .all(|v| v.is_finite())
    }
}

/// Reusable buffers for trajectory integration.
struct Workspace {
    grad: Vec<f64>,
    scratch: Vec<f64>,
    drift: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self {
            grad: vec![0.0; d],
            scratch: vec![0.0; d],
            drift: vec![0.0; d],
        }
    }
}

/// Integrates `steps` Störmer–Verlet steps of size `step_size` in place.
/// Consecutive half kicks are fused into full kicks.
fn leapfrog_in_place(
    target: &TargetDensity,
    s: &mut [f64],
    v: &mut [f64],
    steps: usize,
    step_size: f64,
    ws: &mut Workspace,
) -> Result<()> {
    let d = target.dim();
    let half = 0.5 * step_size;
    target.grad_potential_into(s, &mut ws.grad, &mut ws.scratch);
    for i in 0..d {
        v[i] -= half * ws.grad[i];
    }
    for step in 0..steps {
        target.covariance.mul_sigma(v, &mut ws.drift);
        for i in 0..d {
            s[i] += step_size * ws.drift[i];
        }
        target.grad_potential_into(s, &mut ws.grad, &mut ws.scratch);
        let kick = if step + 1 == steps { half } else { step_size };
        for i in 0..d {
            v[i] -= kick * ws.grad[i];
        }
        if s.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Diverged { step });
        }
    }
    Ok(())
}

pub fn leapfrog(
    target: &TargetDensity,
    start: &PhasePoint,
    steps: usize,
    step_size: f64,
) -> Result<PhasePoint> {
    if steps == 0 {
        return Err(invalid("trajectory_steps", "must be at least 1"));
    }
    check_positive("step_size", step_size)?;
    let d = target.dim();
    if start.position.len() != d || start.momentum.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: start.position.len().min(start.momentum.len()),
        });
    }
    let mut s = start.position.clone();
    let mut v = start.momentum.clone();
    leapfrog_in_place(
        target,
        &mut s,
        &mut v,
        steps,
        step_size,
        &mut Workspace::new(d),
    )?;
    Ok(PhasePoint::new(s, v))
}

/// Metropolis–Hastings test: accept iff u < min(1, exp(h_current − h_proposal)).
/// Non-finite proposal energies are always rejected.
pub fn mh_accept(h_current: f64, h_proposal: f64, u: f64) -> bool {
    if !h_proposal.is_finite() {
        return false;
    }
    let log_ratio = h_current - h_proposal;
    if log_ratio >= 0.0 {
        return u < 1.0;
    }
    u < log_ratio.exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcConfig {
    /// Leapfrog steps per proposal (L).
    pub trajectory_steps: usize,
    /// Leapfrog step size (Δl).
    pub step_size: f64,
    /// Recorded positions returned after burn-in. Rejected proposals
    /// re-record the current position.
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            trajectory_steps: 100,
            step_size: 0.02,
            n_samples: 100,
            burn_in: 10,
            seed: 0,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trajectory_steps == 0 {
            return Err(invalid("trajectory_steps", "must be at least 1"));
        }
        check_positive("step_size", self.step_size)?;
        if self.n_samples == 0 {
            return Err(invalid("n_samples", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub samples: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub mean_abs_energy_error: f64,
    pub proposals: usize,
    pub accepted: usize,
}

/// Runs one chain. The start is a draw from N(μ, Σ); each transition
/// refreshes momentum from N(0, Σ⁻¹), integrates a trajectory and applies
/// the Metropolis–Hastings test. Diverged trajectories count as rejections.
pub fn sample_chain(target: &TargetDensity, config: &HmcConfig) -> Result<ChainResult> {
    config.validate()?;
    let d = target.dim();
    let mut rng = seed::rng_from(config.seed);
    let mut z = vec![0.0; d];
    let mut s = vec![0.0; d];

    fill_normal(&mut rng, &mut z);
    target.covariance.color(&z, &mut s);
    for i in 0..d {
        s[i] += target.mu[i];
    }
    let mut u_current = target.potential(&s);

    let total = config.burn_in + config.n_samples;
    let mut samples = Vec::with_capacity(config.n_samples);
    let mut accepted = 0usize;
    let mut energy_err = 0.0;
    let mut finite_proposals = 0usize;
    let mut ws = Workspace::new(d);
    let mut v = vec![0.0; d];
    let mut proposal = vec![0.0; d];

    for iter in 0..total {
        fill_normal(&mut rng, &mut z);
        target.covariance.color_precision(&z, &mut v);
        let h_current = u_current + target.kinetic(&v);

        proposal.copy_from_slice(&s);
        let integrated = leapfrog_in_place(
            target,
            &mut proposal,
            &mut v,
            config.trajectory_steps,
            config.step_size,
            &mut ws,
        );
        let u: f64 = rng.random();
        let (h_proposal, u_proposal) = match integrated {
            Ok(()) => {
                let up = target.potential(&proposal);
                (up + target.kinetic(&v), up)
            }
            Err(_) => (f64::NAN, f64::NAN),
        };
        if h_proposal.is_finite() {
            energy_err += (h_proposal - h_current).abs();
            finite_proposals += 1;
        }
        if mh_accept(h_current, h_proposal, u) {
            s.copy_from_slice(&proposal);
            u_current = u_proposal;
            accepted += 1;
        }
        if iter >= config.burn_in {
            samples.push(s.clone());
        }
    }

    Ok(ChainResult {
        samples,
        acceptance_rate: accepted as f64 / total as f64,
        mean_abs_energy_error: if finite_proposals > 0 {
            energy_err / finite_proposals as f64
        } else {
            f64::INFINITY
        },
        proposals: total,
        accepted,
    })
}

fn fill_normal(rng: &mut seed::Rng, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
}

/// Chain length sufficient for the concentration bound of a chain with
/// spectral gap 1 − ξ:
///
/// ```text
/// ⌈ (1 + ξ)/(1 − ξ) · 2/γ² · ln(2 |Ω| T / δ) ⌉
/// ```
pub fn recommended_sample_count(
    xi: f64,
    gamma: f64,
    omega_size: usize,
    horizon: usize,
    delta: f64,
) -> Result<usize> {
    if !(0.0..1.0).contains(&xi) {
        return Err(invalid("xi", format!("must lie in [0, 1), got {xi}")));
    }
    // γ = 1 is accepted: the expression stays finite there
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid("gamma", format!("must lie in (0, 1], got {gamma}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    if omega_size == 0 || horizon == 0 {
        return Err(invalid("omega_size/horizon", "must be positive"));
    }
    let value = (1.0 + xi) / (1.0 - xi)
        * (2.0 / (gamma * gamma))
        * (2.0 * omega_size as f64 * horizon as f64 / delta).ln();
    Ok(value.ceil().max(1.0) as usize)
}
