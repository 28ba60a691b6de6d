//! Planar underwater glider driven by an internal rotor.
//!
//! State (x, y, ẋ, ẏ, θ, θ̇), scalar control `a`.

use crate::covariance::Covariance;
use crate::error::Result;
use crate::grid::{check_positive, GridSpace};
use crate::mdp::{DiscreteMdp, RewardModel, TransitionModel};

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct GliderParams {
    pub mass: f64,
    pub inertia_in: f64,
    pub inertia_out: f64,
    pub radius: f64,
    pub flap_length: f64,
    pub flap_depth: f64,
    pub body_depth: f64,
    /// Angular location of the flap, radians.
    pub beta: f64,
    /// Maximum flap opening angle, radians.
    pub psi: f64,
    pub flap_drag: f64,
    pub body_drag: f64,
    pub water_density: f64,
    pub alpha_f: f64,
    pub alpha_b: f64,
    pub mu_f: f64,
    pub euler_dt: f64,
    pub covariance: [f64; 6],
}

impl Default for GliderParams {
    fn default() -> Self {
        Self {
            mass: 1.03,
            inertia_in: 0.5,
            inertia_out: 0.174,
            radius: 0.08,
            flap_length: 0.09,
            flap_depth: 0.044,
            body_depth: 0.02,
            beta: 30f64.to_radians(),
            psi: 20f64.to_radians(),
            flap_drag: 2.0,
            body_drag: 2.0,
            water_density: 1027.0,
            alpha_f: 0.062,
            alpha_b: 0.005,
            mu_f: 0.0074,
            euler_dt: 0.02,
            covariance: [11.111, 69.444, 11.111, 69.444, 0.143, 0.990],
        }
    }
}

/// Force and torque coefficients recomputed from the physical primitives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCoefficients {
    pub alpha_f: f64,
    pub alpha_b: f64,
    pub mu_f: f64,
}

impl GliderParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("inertia_in", self.inertia_in),
            ("inertia_out", self.inertia_out),
            ("radius", self.radius),
            ("flap_length", self.flap_length),
            ("flap_depth", self.flap_depth),
            ("body_depth", self.body_depth),
            ("water_density", self.water_density),
            ("euler_dt", self.euler_dt),
        ] {
            check_positive(name, v)?;
        }
        for v in self.covariance {
            check_positive("covariance", v)?;
        }
        Ok(())
    }

    pub fn derived(&self) -> DerivedCoefficients {
        let (r, l, psi) = (self.radius, self.flap_length, self.psi);
        let alpha_f = 0.5
            * self.water_density
            * self.flap_drag
            * self.flap_depth
            * l
            * (r * r + (l / 2.0).powi(2) + r * l * psi.cos());
        DerivedCoefficients {
            alpha_f,
            alpha_b: 0.5 * self.body_drag * self.body_depth * PI * r,
            mu_f: alpha_f * (l / 2.0 + r * psi.cos()),
        }
    }
}

pub const STATE_RANGES: [(f64, f64); 6] = [
    (-10.0, 10.0),
    (-10.0, 10.0),
    (-25.0, 25.0),
    (-25.0, 25.0),
    (-PI, PI),
    (-3.0, 3.0),
];
pub const STATE_POINTS: [usize; 6] = [5; 6];
pub const ACTION_RANGE: (f64, f64) = (-1.0, 1.0);
pub const ACTION_POINTS: usize = 5;
pub const DIM_NAMES: [&str; 6] = ["x", "y", "x_dot", "y_dot", "theta", "theta_dot"];

/// Sign with sgn(0) = 0.
fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// (ẍ, ÿ, θ̈) from M q̈ = R(θ) F_f + F_b + τ.
pub fn glider_accel(s: &[f64], a: f64, p: &GliderParams) -> [f64; 3] {
    let (vx, vy, theta, omega) = (s[2], s[3], s[4], s[5]);
    let flap = p.alpha_f * omega * omega;
    let fx = flap * sgn(omega) * (p.beta + p.psi).sin();
    let fy = flap * (p.beta + p.psi).cos();
    let (sin, cos) = theta.sin_cos();
    let speed = (vx * vx + vy * vy).sqrt();
    let force_x = cos * fx - sin * fy - p.alpha_b * speed * vx;
    let force_y = sin * fx + cos * fy - p.alpha_b * speed * vy;
    let torque = -p.mu_f * sgn(omega) * omega * omega - p.inertia_in * a;
    [
        force_x / p.mass,
        force_y / p.mass,
        torque / (p.inertia_in + p.inertia_out),
    ]
}

pub fn glider_mean_next(s: &[f64], a: f64, p: &GliderParams) -> Vec<f64> {
    let [ax, ay, aw] = glider_accel(s, a, p);
    let dt = p.euler_dt;
    vec![
        s[0] + s[2] * dt,
        s[1] + s[3] * dt,
        s[2] + ax * dt,
        s[3] + ay * dt,
        s[4] + s[5] * dt,
        s[5] + aw * dt,
    ]
}

/// Glider MDP with an all-zero reward; the sampling reward depends on the
/// kernel and is attached afterwards.
pub fn glider_dynamics_mdp(p: &GliderParams, gamma: f64) -> Result<DiscreteMdp> {
    p.validate()?;
    let states = GridSpace::new(STATE_RANGES, STATE_POINTS.to_vec())?;
    let actions = GridSpace::new([ACTION_RANGE], vec![ACTION_POINTS])?;
    let params = p.clone();
    let transition = TransitionModel::new(
        move |s: &[f64], a: &[f64]| glider_mean_next(s, a[0], &params),
        Covariance::diagonal(&p.covariance)?,
    );
    let reward = RewardModel::from_fn(|_: &[f64], _: &[f64]| 0.0, 0.0, 0.0)?;
    DiscreteMdp::new(states, actions, transition, reward, gamma)
}
