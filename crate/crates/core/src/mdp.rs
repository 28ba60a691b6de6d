//! Grid-discretized MDPs with Gaussian transition kernels, plus the exact
//! (exhaustive) and IID-sampled Bellman updates.
//!
//! The discrete kernel P(j | s, a) is the Gaussian density N(μ(s,a), Σ)
//! evaluated at every grid point and normalized over the grid.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;

use crate::covariance::Covariance;
use crate::error::{invalid, Error, Result};
use crate::grid::{ActionSpace, GridSpace, StateSpace};
use crate::qtable::{sup_error, QTable};
use crate::seed::{self, Stream};

/// Dense kernels are cached when |S|²·|A| stays under this many entries.
const KERNEL_CACHE_LIMIT: usize = 16_000_000;

pub type MeanFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
pub type RewardFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// Gaussian transition model: next state ~ N(mean_fn(s, a), Σ).
#[derive(Clone)]
pub struct TransitionModel {
    mean_fn: Arc<MeanFn>,
    covariance: Arc<Covariance>,
}

impl TransitionModel {
    pub fn new<F>(mean_fn: F, covariance: Covariance) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            mean_fn: Arc::new(mean_fn),
            covariance: Arc::new(covariance),
        }
    }

    pub fn mean(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        (self.mean_fn)(state, action)
    }

    pub fn covariance(&self) -> &Arc<Covariance> {
        &self.covariance
    }
}

impl fmt::Debug for TransitionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransitionModel")
            .field("covariance", &self.covariance.matrix())
            .finish_non_exhaustive()
    }
}

#[derive(Clone)]
enum RewardSource {
    Function(Arc<RewardFn>),
    Table(DMatrix<f64>),
}

/// Deterministic reward with declared bounds. Bounds are verified against
/// every grid state-action pair when the MDP is built.
#[derive(Clone)]
pub struct RewardModel {
    source: RewardSource,
    r_min: f64,
    r_max: f64,
}

impl RewardModel {
    pub fn from_fn<F>(reward_fn: F, r_min: f64, r_max: f64) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        check_bounds(r_min, r_max)?;
        Ok(Self {
            source: RewardSource::Function(Arc::new(reward_fn)),
            r_min,
            r_max,
        })
    }

    /// Reward given directly as an |S|×|A| table.
    pub fn from_table(table: DMatrix<f64>, r_min: f64, r_max: f64) -> Result<Self> {
        check_bounds(r_min, r_max)?;
        Ok(Self {
            source: RewardSource::Table(table),
            r_min,
            r_max,
        })
    }

    /// Table reward whose bounds are the table's own extremes.
    pub fn tight_table(table: DMatrix<f64>) -> Result<Self> {
        if table.is_empty() {
            return Err(invalid("reward table", "empty"));
        }
        let (lo, hi) = (table.min(), table.max());
        Self::from_table(table, lo, hi)
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    fn tabulate(&self, states: &StateSpace, actions: &ActionSpace) -> Result<DMatrix<f64>> {
        let table = match &self.source {
            RewardSource::Table(t) => {
                if t.shape() != (states.len(), actions.len()) {
                    return Err(Error::ShapeMismatch {
                        left: t.shape(),
                        right: (states.len(), actions.len()),
                    });
                }
                t.clone()
            }
            RewardSource::Function(f) => {
                let action_points: Vec<Vec<f64>> = (0..actions.len())
                    .map(|a| actions.point_unchecked(a))
                    .collect();
                let mut t = DMatrix::zeros(states.len(), actions.len());
                for s in 0..states.len() {
                    let x = states.point_unchecked(s);
                    for (a, u) in action_points.iter().enumerate() {
                        t[(s, a)] = f(&x, u);
                    }
                }
                t
            }
        };
        for s in 0..table.nrows() {
            for a in 0..table.ncols() {
                let v = table[(s, a)];
                if !v.is_finite() || v < self.r_min || v > self.r_max {
                    return Err(Error::RewardOutOfRange {
                        state: s,
                        action: a,
                        value: v,
                        min: self.r_min,
                        max: self.r_max,
                    });
                }
            }
        }
        Ok(table)
    }
}

impl fmt::Debug for RewardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RewardModel")
            .field("r_min", &self.r_min)
            .field("r_max", &self.r_max)
            .finish_non_exhaustive()
    }
}

fn check_bounds(r_min: f64, r_max: f64) -> Result<()> {
    if !(r_min.is_finite() && r_max.is_finite() && r_min <= r_max) {
        return Err(invalid(
            "reward bounds",
            format!("need finite r_min <= r_max, got [{r_min}, {r_max}]"),
        ));
    }
    Ok(())
}

#[derive(Clone)]
pub struct DiscreteMdp {
    states: StateSpace,
    actions: ActionSpace,
    transition: TransitionModel,
    reward: RewardModel,
    gamma: f64,
    rewards: Arc<DMatrix<f64>>,
    /// μ(s, a) for every pair, pair-major: offset (s·|A| + a)·D_s.
    means: Arc<Vec<f64>>,
    grid_points: Arc<Vec<f64>>,
    kernels: Arc<OnceLock<Vec<f64>>>,
}

impl fmt::Debug for DiscreteMdp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteMdp")
            .field("states", &self.states)
            .field("actions", &self.actions)
            .field("gamma", &self.gamma)
            .field("reward", &self.reward)
            .finish_non_exhaustive()
    }
}

impl DiscreteMdp {
    pub fn new(
        states: StateSpace,
        actions: ActionSpace,
        transition: TransitionModel,
        reward: RewardModel,
        gamma: f64,
    ) -> Result<Self> {
        check_gamma(gamma)?;
        let dim = states.dims();
        if transition.covariance.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: transition.covariance.dim(),
            });
        }
        let mut means = Vec::with_capacity(states.len() * actions.len() * dim);
        let action_points: Vec<Vec<f64>> = (0..actions.len())
            .map(|a| actions.point_unchecked(a))
            .collect();
        for s in 0..states.len() {
            let x = states.point_unchecked(s);
            for u in &action_points {
                let mu = transition.mean(&x, u);
                if mu.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: mu.len(),
                    });
                }
                if mu.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("transition mean at state {s}")));
                }
                means.extend(mu);
            }
        }
        let rewards = reward.tabulate(&states, &actions)?;
        let grid_points = states.all_points();
        Ok(Self {
            states,
            actions,
            transition,
            reward,
            gamma,
            rewards: Arc::new(rewards),
            means: Arc::new(means),
            grid_points: Arc::new(grid_points),
            kernels: Arc::new(OnceLock::new()),
        })
    }

    /// Same world with a different reward; transition caches are shared.
    pub fn with_reward(&self, reward: RewardModel) -> Result<Self> {
        let rewards = reward.tabulate(&self.states, &self.actions)?;
        Ok(Self {
            reward,
            rewards: Arc::new(rewards),
            ..self.clone()
        })
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.states
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn transition(&self) -> &TransitionModel {
        &self.transition
    }

    pub fn covariance(&self) -> &Arc<Covariance> {
        &self.transition.covariance
    }

    pub fn reward_model(&self) -> &RewardModel {
        &self.reward
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.states.len(), self.actions.len())
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[(s, a)]
    }

    pub fn rewards(&self) -> &DMatrix<f64> {
        &self.rewards
    }

    /// Transition mean μ(s, a).
    pub fn mean(&self, s: usize, a: usize) -> &[f64] {
        let d = self.states.dims();
        let off = (s * self.actions.len() + a) * d;
        &self.means[off..off + d]
    }

    fn check_pair(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.num_states() {
            return Err(Error::IndexOutOfRange {
                index: s,
                len: self.num_states(),
            });
        }
        if a >= self.num_actions() {
            return Err(Error::IndexOutOfRange {
                index: a,
                len: self.num_actions(),
            });
        }
        Ok(())
    }

    /// P(· | s, a) over all grid states.
    pub fn transition_distribution(&self, s: usize, a: usize) -> Result<Vec<f64>> {
        self.check_pair(s, a)?;
        if let Some(k) = self.cached_kernels() {
            let n = self.num_states();
            let off = (s * self.num_actions() + a) * n;
            return Ok(k[off..off + n].to_vec());
        }
        Ok(self.compute_distribution(s, a))
    }

    fn cached_kernels(&self) -> Option<&[f64]> {
        let n = self.num_states();
        let total = n.checked_mul(n)?.checked_mul(self.num_actions())?;
        if total > KERNEL_CACHE_LIMIT {
            return None;
        }
        Some(self.kernels.get_or_init(|| {
            let pairs = self.num_states() * self.num_actions();
            let rows: Vec<Vec<f64>> = (0..pairs)
                .into_par_iter()
                .map(|p| self.compute_distribution(p / self.num_actions(), p % self.num_actions()))
                .collect();
            rows.concat()
        }))
    }

    fn compute_distribution(&self, s: usize, a: usize) -> Vec<f64> {
        let mut w = if self.covariance().is_diagonal() {
            self.product_weights(self.mean(s, a))
        } else {
            self.dense_weights(self.mean(s, a))
        };
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        w
    }

    /// Unnormalized weights for diagonal Σ as an outer product of
    /// per-dimension factors.
    fn product_weights(&self, mu: &[f64]) -> Vec<f64> {
        let cov = self.covariance();
        let mut w = vec![1.0];
        for (d, &m) in mu.iter().enumerate() {
            let axis = self.states.axis(d);
            let var = cov.variance(d);
            let exps: Vec<f64> = axis
                .iter()
                .map(|x| (x - m) * (x - m) / (2.0 * var))
                .collect();
            let shift = exps.iter().copied().fold(f64::INFINITY, f64::min);
            let factors: Vec<f64> = exps.iter().map(|e| (shift - e).exp()).collect();
            let mut next = Vec::with_capacity(w.len() * factors.len());
            for &prev in &w {
                next.extend(factors.iter().map(|f| prev * f));
            }
            w = next;
        }
        w
    }

    fn dense_weights(&self, mu: &[f64]) -> Vec<f64> {
        let d = self.states.dims();
        let cov = self.covariance();
        let mut diff = vec![0.0; d];
        let q: Vec<f64> = self
            .grid_points
            .chunks_exact(d)
            .map(|x| {
                for k in 0..d {
                    diff[k] = x[k] - mu[k];
                }
                cov.mahalanobis_sq(&diff)
            })
            .collect();
        let shift = q.iter().copied().fold(f64::INFINITY, f64::min);
        q.iter().map(|v| (-(v - shift) / 2.0).exp()).collect()
    }

    /// Σ_j P(j | s, a) · values[j].
    pub fn expected_next(&self, s: usize, a: usize, values: &[f64]) -> f64 {
        let n = self.num_states();
        if let Some(k) = self.cached_kernels() {
            let off = (s * self.num_actions() + a) * n;
            return dot(&k[off..off + n], values);
        }
        dot(&self.compute_distribution(s, a), values)
    }

    /// argmax_j P(j | s, a), lowest state index on ties.
    pub fn most_probable_next(&self, s: usize, a: usize) -> Result<usize> {
        self.check_pair(s, a)?;
        let mu = self.mean(s, a);
        if self.covariance().is_diagonal() {
            let multi: Vec<usize> = mu
                .iter()
                .enumerate()
                .map(|(d, &m)| {
                    let axis = self.states.axis(d);
                    let mut best = 0;
                    for k in 1..axis.len() {
                        if (axis[k] - m).powi(2) < (axis[best] - m).powi(2) {
                            best = k;
                        }
                    }
                    best
                })
                .collect();
            return self.states.flat_index(&multi);
        }
        let w = self.dense_weights(mu);
        let mut best = 0;
        for j in 1..w.len() {
            if w[j] > w[best] {
                best = j;
            }
        }
        Ok(best)
    }

    /// Draws one next state from P(· | s, a).
    pub fn sample_next(&self, s: usize, a: usize, rng: &mut seed::Rng) -> usize {
        let dist = self.transition_distribution(s, a).expect("valid pair");
        sample_categorical(&dist, rng)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(invalid("gamma", format!("must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn sample_categorical(p: &[f64], rng: &mut seed::Rng) -> usize {
    let cdf = cumulative(p);
    draw_from_cdf(&cdf, rng)
}

fn draw_from_cdf(cdf: &[f64], rng: &mut seed::Rng) -> usize {
    let total = *cdf.last().expect("non-empty distribution");
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn check_shape(mdp: &DiscreteMdp, q: &QTable) -> Result<()> {
    if q.shape() != mdp.shape() {
        return Err(Error::ShapeMismatch {
            left: q.shape(),
            right: mdp.shape(),
        });
    }
    Ok(())
}

/// Exact Bellman update: Q'(s,a) = Σ_j P(j|s,a)·(r(s,a) + γ·max_b Q(j,b)).
pub fn exhaustive_update(mdp: &DiscreteMdp, q: &QTable) -> Result<QTable> {
    check_shape(mdp, q)?;
    let values = q.state_values();
    let (ns, na) = mdp.shape();
    let rows: Vec<Vec<f64>> = (0..ns)
        .into_par_iter()
        .map(|s| {
            (0..na)
                .map(|a| exhaustive_entry(mdp, &values, s, a))
                .collect()
        })
        .collect();
    QTable::new(DMatrix::from_fn(ns, na, |s, a| rows[s][a]))
}

pub(crate) fn exhaustive_entry(mdp: &DiscreteMdp, values: &[f64], s: usize, a: usize) -> f64 {
    mdp.reward(s, a) + mdp.gamma() * mdp.expected_next(s, a, values)
}

/// Monte Carlo Bellman update with `n_samples` IID next states per pair.
/// Pair (s, a) uses a stream derived from `(seed, s, a)`.
pub fn iid_update(mdp: &DiscreteMdp, q: &QTable, n_samples: usize, seed: u64) -> Result<QTable> {
    check_shape(mdp, q)?;
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be at least 1"));
    }
    let values = q.state_values();
    let (ns, na) = mdp.shape();
    let rows: Vec<Vec<f64>> = (0..ns)
        .into_par_iter()
        .map(|s| {
            (0..na)
                .map(|a| {
                    let pair_seed = seed::derive(seed, Stream::Iid, &[0, s as u64, a as u64]);
                    iid_entry(mdp, &values, s, a, n_samples, pair_seed)
                })
                .collect()
        })
        .collect();
    QTable::new(DMatrix::from_fn(ns, na, |s, a| rows[s][a]))
}

/// r(s,a) + (γ/n)·Σ_k values[s_k] with s_k ~ P(·|s,a) drawn IID.
pub fn iid_entry(
    mdp: &DiscreteMdp,
    values: &[f64],
    s: usize,
    a: usize,
    n_samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = seed::rng_from(seed);
    let dist = mdp.transition_distribution(s, a).expect("valid pair");
    let cdf = cumulative(&dist);
    let total: f64 = (0..n_samples)
        .map(|_| values[draw_from_cdf(&cdf, &mut rng)])
        .sum();
    mdp.reward(s, a) + mdp.gamma() * total / n_samples as f64
}

#[derive(Debug, Clone)]
pub struct ValueIteration {
    pub q: QTable,
    pub sweeps: usize,
    pub converged: bool,
    pub last_change: f64,
}

/// Iterates [`exhaustive_update`] from the zero table until the sup-norm
/// change drops below `tolerance` or `max_sweeps` is reached.
pub fn value_iteration(
    mdp: &DiscreteMdp,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<ValueIteration> {
    crate::grid::check_positive("tolerance", tolerance)?;
    let (ns, na) = mdp.shape();
    let mut q = QTable::zeros(ns, na);
    let mut last_change = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        let next = exhaustive_update(mdp, &q)?;
        last_change = sup_error(&next, &q)?;
        q = next;
        if last_change < tolerance {
            return Ok(ValueIteration {
                q,
                sweeps: sweep,
                converged: true,
                last_change,
            });
        }
    }
    Ok(ValueIteration {
        q,
        sweeps: max_sweeps,
        converged: false,
        last_change,
    })
}

/// Convenience constructor for MDPs whose state and action grids are given
/// as (ranges, points) pairs.
pub fn grid(ranges: &[(f64, f64)], points: &[usize]) -> Result<GridSpace> {
    GridSpace::new(ranges.iter().copied(), points.to_vec())
}
