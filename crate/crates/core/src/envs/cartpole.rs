//! Cart-pole with the pole angle measured from upright.
//!
//! State (θ, θ̇, x, ẋ), scalar force on the cart.

use crate::covariance::Covariance;
use crate::error::Result;
use crate::grid::{check_positive, GridSpace};
use crate::mdp::{DiscreteMdp, RewardModel, TransitionModel};

use super::HALF_PI;

#[derive(Debug, Clone, PartialEq)]
pub struct CartPoleParams {
    pub pole_mass: f64,
    pub cart_mass: f64,
    pub pole_length: f64,
    pub gravity: f64,
    pub euler_dt: f64,
    pub covariance: [f64; 4],
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            pole_mass: 0.1,
            cart_mass: 1.0,
            pole_length: 0.5,
            gravity: 9.8,
            euler_dt: 0.02,
            covariance: [0.143, 0.990, 0.635, 1.346],
        }
    }
}

impl CartPoleParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("pole_mass", self.pole_mass)?;
        check_positive("cart_mass", self.cart_mass)?;
        check_positive("pole_length", self.pole_length)?;
        check_positive("gravity", self.gravity)?;
        check_positive("euler_dt", self.euler_dt)?;
        for v in self.covariance {
            check_positive("covariance", v)?;
        }
        Ok(())
    }
}

pub const STATE_RANGES: [(f64, f64); 4] =
    [(-HALF_PI, HALF_PI), (-3.0, 3.0), (-2.4, 2.4), (-3.5, 3.5)];
pub const STATE_POINTS: [usize; 4] = [5, 5, 5, 5];
pub const ACTION_RANGE: (f64, f64) = (-10.0, 10.0);
pub const ACTION_POINTS: usize = 10;
pub const DIM_NAMES: [&str; 4] = ["theta", "theta_dot", "x", "x_dot"];

/// (θ̈, ẍ) for state (θ, θ̇, x, ẋ) and force `a`.
pub fn cartpole_accel(s: &[f64], a: f64, p: &CartPoleParams) -> (f64, f64) {
    let (theta, theta_dot) = (s[0], s[1]);
    let (m, big_m, l, g) = (p.pole_mass, p.cart_mass, p.pole_length, p.gravity);
    let total = m + big_m;
    let (sin, cos) = theta.sin_cos();
    let theta_acc = (g * sin - (a + m * l * theta_dot * theta_dot * sin) / total * cos)
        / (l * (4.0 / 3.0 - m * cos * cos / total));
    let x_acc = (a + m * l * (theta_dot * theta_dot * sin - theta_acc * cos)) / total;
    (theta_acc, x_acc)
}

/// One explicit Euler step of the noise-free dynamics.
pub fn cartpole_mean_next(s: &[f64], a: f64, p: &CartPoleParams) -> Vec<f64> {
    let (theta_acc, x_acc) = cartpole_accel(s, a, p);
    let dt = p.euler_dt;
    vec![
        s[0] + s[1] * dt,
        s[1] + theta_acc * dt,
        s[2] + s[3] * dt,
        s[3] + x_acc * dt,
    ]
}

/// cos⁴(15θ)
pub fn cartpole_reward(s: &[f64], _a: &[f64]) -> f64 {
    (15.0 * s[0]).cos().powi(4)
}

pub fn cartpole_mdp(p: &CartPoleParams, gamma: f64) -> Result<DiscreteMdp> {
    p.validate()?;
    let states = GridSpace::new(STATE_RANGES, STATE_POINTS.to_vec())?;
    let actions = GridSpace::new([ACTION_RANGE], vec![ACTION_POINTS])?;
    let params = p.clone();
    let transition = TransitionModel::new(
        move |s: &[f64], a: &[f64]| cartpole_mean_next(s, a[0], &params),
        Covariance::diagonal(&p.covariance)?,
    );
    let reward = RewardModel::from_fn(cartpole_reward, 0.0, 1.0)?;
    DiscreteMdp::new(states, actions, transition, reward, gamma)
}
