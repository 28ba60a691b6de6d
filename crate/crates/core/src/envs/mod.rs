//! Benchmark environments on their standard discretizations.

pub mod acrobot;
pub mod cartpole;
pub mod glider;
pub mod ocean;

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::mdp::DiscreteMdp;

pub use acrobot::{acrobot_accel, acrobot_mean_next, acrobot_reward, AcrobotParams};
pub use cartpole::{cartpole_accel, cartpole_mean_next, cartpole_reward, CartPoleParams};
pub use glider::{glider_accel, glider_mean_next, GliderParams};
pub use ocean::{build_w, ocean_correlation, ocean_reward, uncertainty_reduction, OceanField};

pub(crate) const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvName {
    CartPole,
    Acrobot,
    Glider,
}

impl EnvName {
    pub const ALL: [EnvName; 3] = [EnvName::CartPole, EnvName::Acrobot, EnvName::Glider];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::CartPole => "cartpole",
            EnvName::Acrobot => "acrobot",
            EnvName::Glider => "glider",
        }
    }

    /// Names of the state dimensions in grid order.
    pub fn dim_names(self) -> &'static [&'static str] {
        match self {
            EnvName::CartPole => &cartpole::DIM_NAMES,
            EnvName::Acrobot => &acrobot::DIM_NAMES,
            EnvName::Glider => &glider::DIM_NAMES,
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownEnvironment(s.to_string()))
    }
}

/// Overrides shared by every environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvOptions {
    pub euler_dt: f64,
    /// Measurement noise η of the glider's sampling reward.
    pub noise_variance: f64,
    pub gamma: f64,
}

impl Default for EnvOptions {
    fn default() -> Self {
        Self {
            euler_dt: 0.02,
            noise_variance: 0.01,
            gamma: 0.9,
        }
    }
}

pub fn make_env(name: EnvName, opts: &EnvOptions) -> Result<DiscreteMdp> {
    if !(opts.euler_dt.is_finite() && opts.euler_dt > 0.0) {
        return Err(invalid("euler_dt", "must be positive"));
    }
    match name {
        EnvName::CartPole => cartpole::cartpole_mdp(
            &CartPoleParams {
                euler_dt: opts.euler_dt,
                ..CartPoleParams::default()
            },
            opts.gamma,
        ),
        EnvName::Acrobot => acrobot::acrobot_mdp(
            &AcrobotParams {
                euler_dt: opts.euler_dt,
                ..AcrobotParams::default()
            },
            opts.gamma,
        ),
        EnvName::Glider => ocean::glider_mdp(
            &GliderParams {
                euler_dt: opts.euler_dt,
                ..GliderParams::default()
            },
            opts.noise_variance,
            opts.gamma,
        ),
    }
}

/// Parses an environment name and builds it.
pub fn make_env_by_name(name: &str, opts: &EnvOptions) -> Result<DiscreteMdp> {
    make_env(name.parse()?, opts)
}
