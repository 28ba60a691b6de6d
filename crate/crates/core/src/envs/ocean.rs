//! Objective-analysis reward for field sampling with the glider.
//!
//! A measurement set {q_i} explains
//!
//! ```text
//! U = Σ_{q∈𝒬} Σ_{i,j} B(q, q_i) (W⁻¹)_ij B(q_j, q),   W_ij = η δ_ij + B(q_i, q_j)
//! ```
//!
//! of the field variance at the evaluation points 𝒬, with
//! B(q, q') = exp(−‖q − q'‖² / σ²).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::check_positive;
use crate::mdp::{DiscreteMdp, RewardModel};

use super::glider::{glider_dynamics_mdp, GliderParams};

pub type Position = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct OceanField {
    pub decorrelation_scale: f64,
    pub noise_variance: f64,
    /// Symmetric positive semidefinite retrieval cost C.
    pub retrieval_cost: [[f64; 2]; 2],
    pub tradeoff: f64,
    pub evaluation_points: Vec<Position>,
}

impl OceanField {
    /// Field over the (x, y) grid of the glider state space.
    pub fn on_grid(mdp: &DiscreteMdp, noise_variance: f64) -> Self {
        let grid = mdp.state_space();
        let mut points = Vec::new();
        for x in grid.axis(0) {
            for y in grid.axis(1) {
                points.push([x, y]);
            }
        }
        Self {
            decorrelation_scale: 2.5,
            noise_variance,
            retrieval_cost: [[1.0, 0.0], [0.0, 0.0]],
            tradeoff: 0.1,
            evaluation_points: points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("decorrelation_scale", self.decorrelation_scale)?;
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(crate::error::invalid(
                "noise_variance",
                "must be finite and non-negative",
            ));
        }
        let c = self.retrieval_cost;
        let (tr, det) = (c[0][0] + c[1][1], c[0][0] * c[1][1] - c[0][1] * c[1][0]);
        if c[0][1] != c[1][0] || tr < 0.0 || det < 0.0 || c[0][0] < 0.0 || c[1][1] < 0.0 {
            return Err(crate::error::invalid(
                "retrieval_cost",
                "must be symmetric positive semidefinite",
            ));
        }
        Ok(())
    }

    pub fn correlation(&self, q: &Position, r: &Position) -> f64 {
        ocean_correlation(q, r, self.decorrelation_scale)
    }
}

pub fn ocean_correlation(q: &Position, r: &Position, sigma: f64) -> f64 {
    let d2 = (q[0] - r[0]).powi(2) + (q[1] - r[1]).powi(2);
    (-d2 / (sigma * sigma)).exp()
}

pub fn build_w(points: &[Position], sigma: f64, eta: f64) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| {
        let b = ocean_correlation(&points[i], &points[j], sigma);
        if i == j {
            b + eta
        } else {
            b
        }
    })
}

pub fn uncertainty_reduction(points: &[Position], field: &OceanField) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptySamples);
    }
    let w = build_w(points, field.decorrelation_scale, field.noise_variance);
    let chol = w.cholesky().ok_or(Error::SingularMeasurementCovariance)?;
    let mut total = 0.0;
    for q in &field.evaluation_points {
        let b =
            DVector::from_iterator(points.len(), points.iter().map(|p| field.correlation(q, p)));
        total += b.dot(&chol.solve(&b));
    }
    Ok(total)
}

/// The current state together with the most probable successor under
/// every action, without repeats.
pub fn measurement_states(mdp: &DiscreteMdp, s: usize) -> Result<Vec<usize>> {
    let mut out = vec![s];
    for a in 0..mdp.num_actions() {
        let next = mdp.most_probable_next(s, a)?;
        if !out.contains(&next) {
            out.push(next);
        }
    }
    Ok(out)
}

fn position(mdp: &DiscreteMdp, s: usize) -> Result<Position> {
    let p = mdp.state_space().point(s)?;
    Ok([p[0], p[1]])
}

/// −λ qᵀCq + U(Z_s). The action index is accepted for symmetry with other
/// rewards; the measurement set already ranges over all actions.
pub fn ocean_reward(mdp: &DiscreteMdp, s: usize, _a: usize, field: &OceanField) -> Result<f64> {
    let z: Vec<Position> = measurement_states(mdp, s)?
        .into_iter()
        .map(|j| position(mdp, j))
        .collect::<Result<_>>()?;
    let q = position(mdp, s)?;
    let c = field.retrieval_cost;
    let cost = q[0] * (c[0][0] * q[0] + c[0][1] * q[1]) + q[1] * (c[1][0] * q[0] + c[1][1] * q[1]);
    Ok(-field.tradeoff * cost + uncertainty_reduction(&z, field)?)
}

pub fn ocean_reward_table(mdp: &DiscreteMdp, field: &OceanField) -> Result<DMatrix<f64>> {
    field.validate()?;
    let per_state: Vec<f64> = (0..mdp.num_states())
        .into_par_iter()
        .map(|s| ocean_reward(mdp, s, 0, field))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(
        mdp.num_states(),
        mdp.num_actions(),
        |s, _| per_state[s],
    ))
}

/// Glider dynamics with the field-sampling reward over the (x, y) grid.
pub fn glider_mdp(p: &GliderParams, noise_variance: f64, gamma: f64) -> Result<DiscreteMdp> {
    let dynamics = glider_dynamics_mdp(p, gamma)?;
    let field = OceanField::on_grid(&dynamics, noise_variance);
    let table = ocean_reward_table(&dynamics, &field)?;
    dynamics.with_reward(RewardModel::tight_table(table)?)
}
