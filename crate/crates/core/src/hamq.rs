//! The Hamiltonian Q-learning loop and its exhaustive and IID baselines.
//!
//! Each iteration draws a random support Ω_t of state-action pairs, updates
//! those entries from samples of the transition kernel against the frozen
//! previous table, and reconstructs the remaining entries by matrix
//! completion warm-started from the previous table.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{check_positive, Interval};
use crate::hmc::{self, HmcConfig, TargetDensity, DEFAULT_KAPPA};
use crate::matcomp::{self, CompletionConfig, ObservedSet};
use crate::mdp::{self, DiscreteMdp};
use crate::qtable::{frobenius_error, sup_error, QTable};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Hmc,
    Exhaustive,
    Iid,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Hmc, Mode::Exhaustive, Mode::Iid];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Hmc => "hmc",
            Mode::Exhaustive => "exhaustive",
            Mode::Iid => "iid",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                invalid(
                    "mode",
                    format!("unknown mode `{s}` (expected hmc, exhaustive or iid)"),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub horizon: usize,
    pub support_prob: f64,
    pub hmc: HmcConfig,
    pub completion: CompletionConfig,
    pub kappa: f64,
    pub q_init_seed: u64,
    pub support_seed: u64,
    pub reference_tolerance: f64,
    pub reference_max_sweeps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            horizon: 50,
            support_prob: 0.5,
            hmc: HmcConfig::default(),
            completion: CompletionConfig::default(),
            kappa: DEFAULT_KAPPA,
            q_init_seed: 0,
            support_seed: 1,
            reference_tolerance: 1e-8,
            reference_max_sweeps: 10_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(invalid(
                "gamma",
                format!("must lie in [0, 1), got {}", self.gamma),
            ));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if !(self.support_prob > 0.0 && self.support_prob <= 1.0) {
            return Err(invalid(
                "support_prob",
                format!("must lie in (0, 1], got {}", self.support_prob),
            ));
        }
        check_positive("kappa", self.kappa)?;
        check_positive("reference_tolerance", self.reference_tolerance)?;
        if self.reference_max_sweeps == 0 {
            return Err(invalid("reference_max_sweeps", "must be at least 1"));
        }
        self.hmc.validate()?;
        self.completion.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iter: usize,
    pub sup_error: f64,
    pub frobenius_error: f64,
    pub omega_size: usize,
    /// Cumulative transition samples drawn so far.
    pub samples: u64,
    pub completion_converged: bool,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub mode: Mode,
    pub records: Vec<IterationRecord>,
    pub q: QTable,
    pub policy: Vec<usize>,
    pub reference_sweeps: usize,
}

impl TrainReport {
    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("at least one iteration")
    }
}

/// Result of one training iteration.
#[derive(Debug, Clone)]
pub struct Step {
    pub q: QTable,
    pub omega_size: usize,
    pub samples: u64,
    pub completion_converged: bool,
}

/// Random support Ω_t: every pair enters independently with probability
/// `p`, scanned in row-major order. An empty draw is redrawn once; if that
/// is empty too, one uniformly chosen pair is used.
pub fn sample_support(
    p: f64,
    shape: (usize, usize),
    seed: u64,
    t: usize,
) -> Result<Vec<(usize, usize)>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(
            "support_prob",
            format!("must lie in (0, 1], got {p}"),
        ));
    }
    let (rows, cols) = shape;
    if rows == 0 || cols == 0 {
        return Err(invalid("shape", "must be non-empty"));
    }
    if p == 1.0 {
        return Ok((0..rows)
            .flat_map(|s| (0..cols).map(move |a| (s, a)))
            .collect());
    }
    for attempt in 0..2u64 {
        let mut rng = seed::rng_from(seed::derive(seed, Stream::Support, &[t as u64, attempt]));
        let mut out = Vec::new();
        for s in 0..rows {
            for a in 0..cols {
                if rng.random::<f64>() < p {
                    out.push((s, a));
                }
            }
        }
        if !out.is_empty() {
            return Ok(out);
        }
    }
    let mut rng = seed::rng_from(seed::derive(seed, Stream::Support, &[t as u64, 2]));
    let k = rng.random_range(0..rows * cols);
    Ok(vec![(k / cols, k % cols)])
}

/// r(s,a) + γ/|H| · Σ_{x∈H} max_b Q(nearest(x), b).
pub fn hq_update_entry(
    mdp: &DiscreteMdp,
    q: &QTable,
    s: usize,
    a: usize,
    h: &[Vec<f64>],
) -> Result<f64> {
    check_shape(mdp, q)?;
    check_pair(mdp, s, a)?;
    if h.is_empty() {
        return Err(Error::EmptySamples);
    }
    let d = mdp.state_space().dims();
    for x in h {
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample position".into()));
        }
    }
    Ok(update_from_samples(mdp, &q.state_values(), s, a, h))
}

fn update_from_samples(
    mdp: &DiscreteMdp,
    values: &[f64],
    s: usize,
    a: usize,
    h: &[Vec<f64>],
) -> f64 {
    let grid = mdp.state_space();
    let total: f64 = h
        .iter()
        .map(|x| values[grid.nearest_index_unchecked(x)])
        .sum();
    mdp.reward(s, a) + mdp.gamma() * total / h.len() as f64
}

/// Weighted form of [`hq_update_entry`]: r(s,a) + γ · Σ w_k max_b Q(nearest(x_k), b) / Σ w_k.
/// With every grid state weighted by P(·|s,a) it reproduces the exact
/// Bellman update.
pub fn hq_update_entry_weighted(
    mdp: &DiscreteMdp,
    q: &QTable,
    s: usize,
    a: usize,
    h: &[(Vec<f64>, f64)],
) -> Result<f64> {
    check_shape(mdp, q)?;
    check_pair(mdp, s, a)?;
    let total_w: f64 = h.iter().map(|(_, w)| w).sum();
    if h.is_empty() || total_w <= 0.0 {
        return Err(Error::EmptySamples);
    }
    let values = q.state_values();
    let mut acc = 0.0;
    for (x, w) in h {
        acc += w * values[mdp.state_space().nearest_index(x)?];
    }
    Ok(mdp.reward(s, a) + mdp.gamma() * acc / total_w)
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

fn check_pair(mdp: &DiscreteMdp, s: usize, a: usize) -> Result<()> {
    if s >= mdp.num_states() {
        return Err(Error::IndexOutOfRange {
            index: s,
            len: mdp.num_states(),
        });
    }
    if a >= mdp.num_actions() {
        return Err(Error::IndexOutOfRange {
            index: a,
            len: mdp.num_actions(),
        });
    }
    Ok(())
}

/// HMC-sampled update of the entries on `support`, each from its own chain.
fn hmc_entries(
    mdp: &DiscreteMdp,
    values: &[f64],
    support: &[(usize, usize)],
    cfg: &TrainConfig,
    t: usize,
) -> Result<Vec<f64>> {
    let bounds: Arc<[Interval]> = mdp.state_space().ranges().into();
    support
        .par_iter()
        .map(|&(s, a)| {
            let target = TargetDensity::new(
                mdp.mean(s, a).to_vec(),
                mdp.covariance().clone(),
                bounds.clone(),
                cfg.kappa,
            )?;
            let chain_cfg = HmcConfig {
                seed: seed::derive(
                    cfg.support_seed,
                    Stream::Chain,
                    &[t as u64, s as u64, a as u64],
                ),
                ..cfg.hmc.clone()
            };
            let chain = hmc::sample_chain(&target, &chain_cfg)?;
            Ok(update_from_samples(mdp, values, s, a, &chain.samples))
        })
        .collect()
}

fn iid_entries(
    mdp: &DiscreteMdp,
    values: &[f64],
    support: &[(usize, usize)],
    cfg: &TrainConfig,
    t: usize,
) -> Vec<f64> {
    support
        .par_iter()
        .map(|&(s, a)| {
            let pair_seed = seed::derive(
                cfg.support_seed,
                Stream::Iid,
                &[t as u64, s as u64, a as u64],
            );
            mdp::iid_entry(mdp, values, s, a, cfg.hmc.n_samples, pair_seed)
        })
        .collect()
}

fn sampled_step(
    mdp: &DiscreteMdp,
    q: &QTable,
    cfg: &TrainConfig,
    t: usize,
    mode: Mode,
) -> Result<Step> {
    let support = sample_support(cfg.support_prob, mdp.shape(), cfg.support_seed, t)?;
    let values = q.state_values();
    let updated = match mode {
        Mode::Hmc => hmc_entries(mdp, &values, &support, cfg, t)?,
        Mode::Iid => iid_entries(mdp, &values, &support, cfg, t),
        Mode::Exhaustive => unreachable!("exhaustive mode has no support"),
    };
    let entries = support
        .iter()
        .zip(updated)
        .map(|(&(s, a), v)| (s, a, v))
        .collect();
    let obs = ObservedSet::new(mdp.shape(), entries)?;
    let completion_cfg = CompletionConfig {
        warm_start: Some(q.matrix().clone()),
        ..cfg.completion.clone()
    };
    let completed = matcomp::complete(&obs, &completion_cfg)?;
    Ok(Step {
        q: QTable::new(completed.matrix)?,
        omega_size: support.len(),
        samples: (support.len() * cfg.hmc.n_samples) as u64,
        completion_converged: completed.converged,
    })
}

/// One iteration of Hamiltonian Q-learning from Q^t to Q^{t+1}.
pub fn hq_iterate(mdp: &DiscreteMdp, q: &QTable, cfg: &TrainConfig, t: usize) -> Result<Step> {
    check_shape(mdp, q)?;
    sampled_step(mdp, q, cfg, t, Mode::Hmc)
}

/// One iteration of the given mode.
pub fn iterate(
    mdp: &DiscreteMdp,
    q: &QTable,
    cfg: &TrainConfig,
    t: usize,
    mode: Mode,
) -> Result<Step> {
    check_shape(mdp, q)?;
    match mode {
        Mode::Exhaustive => {
            let (ns, na) = mdp.shape();
            Ok(Step {
                q: mdp::exhaustive_update(mdp, q)?,
                omega_size: ns * na,
                samples: (ns * na * ns) as u64,
                completion_converged: true,
            })
        }
        _ => sampled_step(mdp, q, cfg, t, mode),
    }
}

/// Q* by value iteration on `mdp` with the configured discount.
pub fn reference_q(mdp: &DiscreteMdp, cfg: &TrainConfig) -> Result<(QTable, usize)> {
    cfg.validate()?;
    let mdp = mdp.with_gamma(cfg.gamma)?;
    let vi = mdp::value_iteration(&mdp, cfg.reference_tolerance, cfg.reference_max_sweeps)?;
    Ok((vi.q, vi.sweeps))
}

pub fn train(mdp: &DiscreteMdp, cfg: &TrainConfig) -> Result<TrainReport> {
    train_mode(mdp, cfg, Mode::Hmc)
}

pub fn baseline_train(mdp: &DiscreteMdp, cfg: &TrainConfig, mode: Mode) -> Result<TrainReport> {
    train_mode(mdp, cfg, mode)
}

pub fn train_mode(mdp: &DiscreteMdp, cfg: &TrainConfig, mode: Mode) -> Result<TrainReport> {
    let (reference, sweeps) = reference_q(mdp, cfg)?;
    let mut report = train_with_reference(mdp, cfg, mode, &reference)?;
    report.reference_sweeps = sweeps;
    Ok(report)
}

/// Training loop against a precomputed Q*, for repeated runs on one MDP.
pub fn train_with_reference(
    mdp: &DiscreteMdp,
    cfg: &TrainConfig,
    mode: Mode,
    reference: &QTable,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mdp = mdp.with_gamma(cfg.gamma)?;
    check_shape(&mdp, reference)?;
    let (ns, na) = mdp.shape();
    let mut q = initial_q((ns, na), cfg.q_init_seed);
    let mut records = Vec::with_capacity(cfg.horizon);
    let mut samples = 0u64;
    for t in 0..cfg.horizon {
        let start = Instant::now();
        let step = iterate(&mdp, &q, cfg, t, mode)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        q = step.q;
        samples += step.samples;
        records.push(IterationRecord {
            iter: t + 1,
            sup_error: sup_error(&q, reference)?,
            frobenius_error: frobenius_error(&q, reference)?,
            omega_size: step.omega_size,
            samples,
            completion_converged: step.completion_converged,
            wall_ms,
        });
    }
    let policy = q.greedy_policy();
    Ok(TrainReport {
        mode,
        records,
        q,
        policy,
        reference_sweeps: 0,
    })
}

/// Q^0 used by every mode for a given `q_init_seed`.
pub fn initial_q(shape: (usize, usize), q_init_seed: u64) -> QTable {
    QTable::random_uniform(
        shape.0,
        shape.1,
        seed::derive(q_init_seed, Stream::QInit, &[]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::Covariance;
    use crate::mdp::{exhaustive_update, grid, RewardModel, TransitionModel};

    fn line_mdp(points: usize, var: f64, gamma: f64) -> DiscreteMdp {
        let states = grid(&[(-1.0, 1.0)], &[points]).unwrap();
        let actions = grid(&[(-0.5, 0.5)], &[3]).unwrap();
        let t = TransitionModel::new(
            |s: &[f64], a: &[f64]| vec![0.8 * s[0] + a[0]],
            Covariance::diagonal(&[var]).unwrap(),
        );
        let r = RewardModel::from_fn(
            |s: &[f64], a: &[f64]| 1.0 - s[0] * s[0] * (1.0 - a[0] * a[0]),
            0.0,
            1.0,
        )
        .unwrap();
        DiscreteMdp::new(states, actions, t, r, gamma).unwrap()
    }

    fn quick_cfg(gamma: f64, horizon: usize, p: f64) -> TrainConfig {
        TrainConfig {
            gamma,
            horizon,
            support_prob: p,
            hmc: HmcConfig {
                trajectory_steps: 20,
                step_size: 0.05,
                n_samples: 30,
                burn_in: 5,
                seed: 0,
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn support_full_and_deterministic() {
        assert_eq!(sample_support(1.0, (4, 3), 9, 0).unwrap().len(), 12);
        let a = sample_support(0.3, (50, 10), 9, 4).unwrap();
        assert_eq!(a, sample_support(0.3, (50, 10), 9, 4).unwrap());
        assert_ne!(a, sample_support(0.3, (50, 10), 10, 4).unwrap());
        assert_ne!(a, sample_support(0.3, (50, 10), 9, 5).unwrap());
        assert!(sample_support(0.0, (4, 3), 9, 0).is_err());
        assert!(sample_support(1.5, (4, 3), 9, 0).is_err());
    }

    #[test]
    fn support_is_never_empty() {
        for t in 0..200 {
            let s = sample_support(1e-6, (2, 2), 3, t).unwrap();
            assert!(!s.is_empty());
            assert!(s.iter().all(|&(r, c)| r < 2 && c < 2));
        }
    }

    #[test]
    fn update_entry_cases() {
        let mdp = line_mdp(5, 0.1, 0.0);
        let q = QTable::random_uniform(5, 3, 2);
        let h = vec![vec![0.3], vec![-0.9]];
        assert_eq!(
            hq_update_entry(&mdp, &q, 2, 1, &h).unwrap(),
            mdp.reward(2, 1)
        );
        assert!(matches!(
            hq_update_entry(&mdp, &q, 2, 1, &[]),
            Err(Error::EmptySamples)
        ));

        let mdp = line_mdp(5, 0.1, 0.9);
        let q = QTable::from_rows(&[
            vec![0.1, 0.2, 0.3],
            vec![1.0, -1.0, 0.0],
            vec![0.5, 0.5, 0.5],
            vec![-2.0, 4.0, 1.0],
            vec![0.0, 0.0, 7.0],
        ])
        .unwrap();
        // grid points -1, -0.5, 0, 0.5, 1
        let single = hq_update_entry(&mdp, &q, 0, 0, &[vec![0.45]]).unwrap();
        assert!((single - (mdp.reward(0, 0) + 0.9 * 4.0)).abs() < 1e-15);
        let three = vec![vec![-0.8], vec![0.1], vec![3.0]];
        let got = hq_update_entry(&mdp, &q, 4, 2, &three).unwrap();
        let expect = mdp.reward(4, 2) + 0.9 * (0.3 + 0.5 + 7.0) / 3.0;
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn weighted_kernel_update_equals_exhaustive() {
        let mdp = line_mdp(7, 0.2, 0.85);
        let q = QTable::random_uniform(7, 3, 5);
        let exact = exhaustive_update(&mdp, &q).unwrap();
        for s in 0..7 {
            for a in 0..3 {
                let p = mdp.transition_distribution(s, a).unwrap();
                let h: Vec<(Vec<f64>, f64)> = (0..7)
                    .map(|j| (mdp.state_space().point(j).unwrap(), p[j]))
                    .collect();
                let v = hq_update_entry_weighted(&mdp, &q, s, a, &h).unwrap();
                assert!((v - exact.get(s, a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_support_keeps_updated_entries() {
        let mdp = line_mdp(5, 0.1, 0.9);
        let cfg = quick_cfg(0.9, 1, 1.0);
        let q = QTable::random_uniform(5, 3, 1);
        let a = hq_iterate(&mdp, &q, &cfg, 3).unwrap();
        let b = hq_iterate(&mdp, &q, &cfg, 3).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.omega_size, 15);
        assert_eq!(a.samples, 15 * 30);
        let values = q.state_values();
        let bounds: Arc<[Interval]> = mdp.state_space().ranges().into();
        for s in 0..5 {
            for act in 0..3 {
                let target = TargetDensity::new(
                    mdp.mean(s, act).to_vec(),
                    mdp.covariance().clone(),
                    bounds.clone(),
                    cfg.kappa,
                )
                .unwrap();
                let chain = hmc::sample_chain(
                    &target,
                    &HmcConfig {
                        seed: seed::derive(
                            cfg.support_seed,
                            Stream::Chain,
                            &[3, s as u64, act as u64],
                        ),
                        ..cfg.hmc.clone()
                    },
                )
                .unwrap();
                let expect = update_from_samples(&mdp, &values, s, act, &chain.samples);
                assert_eq!(a.q.get(s, act), expect);
            }
        }
    }

    #[test]
    fn many_samples_approach_exhaustive() {
        let mdp = line_mdp(9, 0.05, 0.9);
        let mut cfg = quick_cfg(0.9, 1, 1.0);
        cfg.hmc = HmcConfig {
            n_samples: 2000,
            ..HmcConfig::default()
        };
        let q = QTable::random_uniform(9, 3, 4);
        let hq = hq_iterate(&mdp, &q, &cfg, 0).unwrap();
        let exact = exhaustive_update(&mdp, &q).unwrap();
        let bound = 0.05 * 1.0 / (1.0 - 0.9);
        let err = sup_error(&hq.q, &exact).unwrap();
        assert!(err <= bound, "sup difference {err} > {bound}");
    }

    #[test]
    fn gamma_zero_single_step_gives_rewards_in_every_mode() {
        let mdp = line_mdp(5, 0.1, 0.5);
        let cfg = quick_cfg(0.0, 1, 1.0);
        for mode in Mode::ALL {
            let r = train_mode(&mdp, &cfg, mode).unwrap();
            assert_eq!(r.q.matrix(), mdp.rewards(), "{mode}");
            assert_eq!(r.records.len(), 1);
        }
    }

    #[test]
    fn exhaustive_mode_converges_monotonically() {
        let mdp = line_mdp(7, 0.2, 0.8);
        let cfg = quick_cfg(0.8, 120, 0.5);
        let r = baseline_train(&mdp, &cfg, Mode::Exhaustive).unwrap();
        assert!(r.final_record().sup_error < 1e-6);
        // Q* itself is only accurate to the value-iteration tolerance
        for w in r.records.windows(2) {
            assert!(w[1].sup_error <= w[0].sup_error + 1e-7);
            assert!(w[1].samples >= w[0].samples);
        }
        let q0 = initial_q((7, 3), cfg.q_init_seed);
        let cap = (1.0f64 / (1.0 - 0.8)).max(q0.max_value());
        let mut q = q0;
        let m = mdp.with_gamma(0.8).unwrap();
        for _ in 0..30 {
            q = exhaustive_update(&m, &q).unwrap();
            assert!(q.max_value() <= cap + 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic_and_well_formed() {
        let mdp = line_mdp(7, 0.2, 0.9);
        let cfg = quick_cfg(0.9, 4, 0.6);
        for mode in [Mode::Hmc, Mode::Iid] {
            let a = train_mode(&mdp, &cfg, mode).unwrap();
            let b = train_mode(&mdp, &cfg, mode).unwrap();
            assert_eq!(a.q, b.q);
            assert_eq!(a.records.len(), 4);
            let mut prev = 0;
            for (ra, rb) in a.records.iter().zip(&b.records) {
                assert_eq!(ra.sup_error, rb.sup_error);
                assert!(ra.sup_error >= 0.0 && ra.frobenius_error >= 0.0);
                assert!(ra.samples >= prev);
                assert_eq!(ra.samples - prev, (ra.omega_size * 30) as u64);
                prev = ra.samples;
            }
            assert_eq!(a.policy, a.q.greedy_policy());
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("sarsa".parse::<Mode>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            gamma: 1.0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            horizon: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            support_prob: 0.0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }
}
