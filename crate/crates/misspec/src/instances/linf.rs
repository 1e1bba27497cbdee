use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::mrp::{ProblemInstance, RewardModel};

use super::InstanceFamily;

/// Three 2-state instances with data only on state 1, which feeds the absorbing
/// state 2 paying `r_2 in {-1, 0, 1}`.
///
/// Features are `(1 - gamma)(alpha d_1 + d_2)` where `d_j` are the occupancy columns
/// and `alpha` solves `sigma_min(A) = y`. At `y = 0` the family has `A = 0` and the
/// claimed lower bound is infinite.
pub fn gen_linf_triplet(gamma: f64, y: f64) -> Result<InstanceFamily> {
    if !(0.7..1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma = {gamma} must lie in [0.7, 1)")));
    }
    if !(0.0..=1.0 - gamma).contains(&y) {
        return Err(Error::Domain(format!("y = {y} must lie in [0, 1 - gamma]")));
    }
    let alpha = ((-gamma + (gamma * gamma + 4.0 * y).sqrt()) / (2.0 * (1.0 - gamma))).min(1.0);
    let phi = Mat::from_column_slice(2, 1, &[alpha * (1.0 - gamma) + gamma, 1.0]);
    let members = [-1.0, 0.0, 1.0]
        .into_iter()
        .map(|r2| {
            ProblemInstance::new(
                Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]),
                vec![RewardModel::Deterministic(0.0), RewardModel::Deterministic(r2)],
                gamma,
                phi.clone(),
                Vector::from_row_slice(&[1.0, 0.0]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let lower = if y > 0.0 { 0.5 + gamma / y } else { f64::INFINITY };
    Ok(InstanceFamily::new(members)
        .with("gamma", gamma)
        .with("y", y)
        .with("alpha", alpha)
        .with("sigma_min_a", y)
        .with("lower_bound", lower))
}
