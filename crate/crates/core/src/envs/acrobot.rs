//! Two-link underactuated acrobot, torque applied at the elbow.
//!
//! State (θ₁, θ̇₁, θ₂, θ̇₂). θ₁ is the shoulder angle measured from upright
//! and θ₂ the elbow angle relative to the first link, so the fully upright
//! configuration is (0, ·, 0, ·) and the hanging rest state is (π, 0, 0, 0).

use crate::covariance::Covariance;
use crate::error::Result;
use crate::grid::{check_positive, GridSpace};
use crate::mdp::{DiscreteMdp, RewardModel, TransitionModel};

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct AcrobotParams {
    pub link_mass_1: f64,
    pub link_mass_2: f64,
    pub link_length_1: f64,
    /// Distance from each joint to its link's center of mass.
    pub com_1: f64,
    pub com_2: f64,
    pub inertia_1: f64,
    pub inertia_2: f64,
    pub gravity: f64,
    pub euler_dt: f64,
    pub covariance: [f64; 4],
}

impl Default for AcrobotParams {
    fn default() -> Self {
        Self {
            link_mass_1: 1.0,
            link_mass_2: 1.0,
            link_length_1: 1.0,
            com_1: 0.5,
            com_2: 0.5,
            inertia_1: 1.0,
            inertia_2: 1.0,
            gravity: 9.8,
            euler_dt: 0.02,
            covariance: [0.143, 0.990, 0.635, 1.346],
        }
    }
}

impl AcrobotParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("link_mass_1", self.link_mass_1)?;
        check_positive("link_mass_2", self.link_mass_2)?;
        check_positive("link_length_1", self.link_length_1)?;
        check_positive("com_1", self.com_1)?;
        check_positive("com_2", self.com_2)?;
        check_positive("inertia_1", self.inertia_1)?;
        check_positive("inertia_2", self.inertia_2)?;
        check_positive("gravity", self.gravity)?;
        check_positive("euler_dt", self.euler_dt)?;
        for v in self.covariance {
            check_positive("covariance", v)?;
        }
        Ok(())
    }
}

pub const STATE_RANGES: [(f64, f64); 4] = [(-PI, PI), (-3.0, 3.0), (-PI, PI), (-3.0, 3.0)];
pub const STATE_POINTS: [usize; 4] = [5, 5, 5, 5];
pub const ACTION_RANGE: (f64, f64) = (-10.0, 10.0);
pub const ACTION_POINTS: usize = 10;
pub const DIM_NAMES: [&str; 4] = ["theta1", "theta1_dot", "theta2", "theta2_dot"];

/// (θ̈₁, θ̈₂) for elbow torque `a`.
pub fn acrobot_accel(s: &[f64], a: f64, p: &AcrobotParams) -> (f64, f64) {
    let (t1, d1_, t2, d2_) = (s[0], s[1], s[2], s[3]);
    let (m1, m2, l1) = (p.link_mass_1, p.link_mass_2, p.link_length_1);
    let (lc1, lc2, i1, i2, g) = (p.com_1, p.com_2, p.inertia_1, p.inertia_2, p.gravity);
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * t2.cos()) + i2;
    // gravity terms carry a minus sign because angles are measured from upright
    let phi2 = -m2 * lc2 * g * (t1 + t2).sin();
    let phi1 = -m2 * l1 * lc2 * d2_ * d2_ * t2.sin()
        - 2.0 * m2 * l1 * lc2 * d2_ * d1_ * t2.sin()
        - (m1 * lc1 + m2 * l1) * g * t1.sin()
        + phi2;
    let acc2 = (a + d2 / d1 * phi1 - m2 * l1 * lc2 * d1_ * d1_ * t2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let acc1 = -(d2 * acc2 + phi1) / d1;
    (acc1, acc2)
}

pub fn acrobot_mean_next(s: &[f64], a: f64, p: &AcrobotParams) -> Vec<f64> {
    let (acc1, acc2) = acrobot_accel(s, a, p);
    let dt = p.euler_dt;
    vec![
        s[0] + s[1] * dt,
        s[1] + acc1 * dt,
        s[2] + s[3] * dt,
        s[3] + acc2 * dt,
    ]
}

/// ((cos θ₁ + cos(θ₁+θ₂) + 2)/4)⁴: 1 fully upright, 0 hanging straight down.
pub fn acrobot_reward(s: &[f64], _a: &[f64]) -> f64 {
    let h = (s[0].cos() + (s[0] + s[2]).cos() + 2.0) / 4.0;
    h.powi(4)
}

pub fn acrobot_mdp(p: &AcrobotParams, gamma: f64) -> Result<DiscreteMdp> {
    p.validate()?;
    let states = GridSpace::new(STATE_RANGES, STATE_POINTS.to_vec())?;
    let actions = GridSpace::new([ACTION_RANGE], vec![ACTION_POINTS])?;
    let params = p.clone();
    let transition = TransitionModel::new(
        move |s: &[f64], a: &[f64]| acrobot_mean_next(s, a[0], &params),
        Covariance::diagonal(&p.covariance)?,
    );
    let reward = RewardModel::from_fn(acrobot_reward, 0.0, 1.0)?;
    DiscreteMdp::new(states, actions, transition, reward, gamma)
}
