use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::mrp::{ProblemInstance, RewardModel};

/// Two states with `phi = (gamma, 1 + eps)`, all data on state 1, and state 1
/// feeding the absorbing, unobserved state 2 which pays reward 1.
///
/// `A = -gamma^2 eps` is nonzero, yet the reward of state 2 is never observed.
/// The second feature exceeds 1, so the row-norm bound is not enforced.
pub fn gen_eps_discounted(eps: f64, gamma: f64) -> Result<ProblemInstance> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma = {gamma} must lie in (0, 1)")));
    }
    ProblemInstance::new_unnormalized(
        Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]),
        vec![RewardModel::Deterministic(0.0), RewardModel::Deterministic(1.0)],
        gamma,
        Mat::from_column_slice(2, 1, &[gamma, 1.0 + eps]),
        Vector::from_row_slice(&[1.0, 0.0]),
    )
}
