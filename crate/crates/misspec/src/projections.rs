//! Best linear approximations in the `L2(mu)` and sup norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::moments::ser_vec;
use crate::mrp::{self, ProblemInstance};
use crate::simplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L2mu,
    Linf,
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2mu" => Ok(NormKind::L2mu),
            "linf" => Ok(NormKind::Linf),
            _ => Err(Error::Domain(format!("unknown norm '{s}', expected l2mu or linf"))),
        }
    }
}

/// A member `Phi theta` of the linear class.
#[derive(Debug, Clone, Serialize)]
pub struct LinearValue {
    #[serde(serialize_with = "ser_vec")]
    pub theta: Vector,
    #[serde(serialize_with = "ser_vec")]
    pub realized: Vector,
}

impl LinearValue {
    pub fn new(phi: &Mat, theta: Vector) -> Self {
        LinearValue { realized: phi * &theta, theta }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionResult {
    pub linear_value: LinearValue,
    pub error: f64,
    pub norm_kind: NormKind,
    /// Primal-dual gap of the Chebyshev program (zero for `L2(mu)`).
    pub certificate_gap: f64,
}

/// `Pi_mu = Phi Sigma^{-1} Phi^T D`.
pub fn projection_matrix_l2(inst: &ProblemInstance) -> Result<Mat> {
    let phi = inst.phi();
    let sigma_inv = linalg::inverse(&inst.sigma()).ok_or(Error::SigmaSingular(0.0))?;
    Ok(phi * sigma_inv * phi.transpose() * inst.d())
}

/// Weighted least squares: `theta = Sigma^{-1} Phi^T D target`.
pub fn project_l2(inst: &ProblemInstance, target: &Vector) -> Result<ProjectionResult> {
    let phi = inst.phi();
    let rhs = phi.transpose() * inst.d() * target;
    let theta = linalg::solve(&inst.sigma(), &rhs).ok_or(Error::SigmaSingular(0.0))?;
    let lv = LinearValue::new(phi, theta);
    let error = mrp::weighted_norm(&(&lv.realized - target), inst.mu());
    Ok(ProjectionResult { linear_value: lv, error, norm_kind: NormKind::L2mu, certificate_gap: 0.0 })
}

/// Chebyshev approximation `min_theta ||Phi theta - target||_inf` by linear programming.
///
/// Variables are `(theta+, theta-, t)`, all nonnegative, with the `2S` constraints
/// `+-(Phi theta - target) <= t`.
pub fn project_linf(phi: &Mat, target: &Vector) -> Result<ProjectionResult> {
    let (s, d) = phi.shape();
    if target.len() != s {
        return Err(Error::Dimension(format!("target has length {}, expected {s}", target.len())));
    }
    if linalg::max_abs(target) == 0.0 {
        let lv = LinearValue::new(phi, Vector::zeros(d));
        return Ok(ProjectionResult { linear_value: lv, error: 0.0, norm_kind: NormKind::Linf, certificate_gap: 0.0 });
    }
    let n = 2 * d + 1;
    let mut a = Mat::zeros(2 * s, n);
    let mut b = Vector::zeros(2 * s);
    for i in 0..s {
        for j in 0..d {
            a[(i, j)] = phi[(i, j)];
            a[(i, d + j)] = -phi[(i, j)];
            a[(s + i, j)] = -phi[(i, j)];
            a[(s + i, d + j)] = phi[(i, j)];
        }
        a[(i, 2 * d)] = -1.0;
        a[(s + i, 2 * d)] = -1.0;
        b[i] = target[i];
        b[s + i] = -target[i];
    }
    let mut c = Vector::zeros(n);
    c[2 * d] = 1.0;
    let sol = simplex::solve(&c, &a, &b)?;
    let theta = Vector::from_iterator(d, (0..d).map(|j| sol.x[j] - sol.x[d + j]));
    let lv = LinearValue::new(phi, theta);
    let error = mrp::sup_norm(&(&lv.realized - target));
    let gap = (error - b.dot(&sol.y)).abs().max(sol.dual_infeasibility(&a, &c));
    Ok(ProjectionResult { linear_value: lv, error, norm_kind: NormKind::Linf, certificate_gap: gap })
}

/// Best-in-class error in the given norm.
pub fn misspecification(inst: &ProblemInstance, target: &Vector, norm: NormKind) -> Result<f64> {
    Ok(match norm {
        NormKind::L2mu => project_l2(inst, target)?.error,
        NormKind::Linf => project_linf(inst.phi(), target)?.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mrp::RewardModel;

    fn ones_pair(mu1: f64) -> ProblemInstance {
        ProblemInstance::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]),
            vec![RewardModel::Deterministic(1.0), RewardModel::Deterministic(0.0)],
            0.9,
            Mat::from_element(2, 1, 1.0),
            Vector::from_row_slice(&[mu1, 1.0 - mu1]),
        )
        .unwrap()
    }

    #[test]
    fn tabular_projection_is_identity() {
        let inst = ProblemInstance::new(
            Mat::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]),
            vec![RewardModel::Deterministic(0.0); 2],
            0.5,
            Mat::identity(2, 2),
            Vector::from_row_slice(&[0.3, 0.7]),
        )
        .unwrap();
        let pi = projection_matrix_l2(&inst).unwrap();
        assert!(linalg::max_abs_mat(&(pi - Mat::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn constant_feature_projection_rows_equal_mu() {
        let inst = ones_pair(0.3);
        let pi = projection_matrix_l2(&inst).unwrap();
        for i in 0..2 {
            assert!((pi[(i, 0)] - 0.3).abs() < 1e-14 && (pi[(i, 1)] - 0.7).abs() < 1e-14);
        }
        let res = project_l2(&inst, &Vector::from_row_slice(&[1.0, 0.0])).unwrap();
        assert!((res.linear_value.theta[0] - 0.3).abs() < 1e-14);
        assert!((res.error.powi(2) - 0.3 * 0.7).abs() < 1e-14);
    }

    #[test]
    fn chebyshev_of_step_is_half() {
        let res = project_linf(&Mat::from_element(2, 1, 1.0), &Vector::from_row_slice(&[1.0, 0.0])).unwrap();
        assert!((res.linear_value.theta[0] - 0.5).abs() < 1e-12);
        assert!((res.error - 0.5).abs() < 1e-12);
        assert!(res.certificate_gap < 1e-10);
    }

    #[test]
    fn realizable_targets_have_zero_error() {
        let phi = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 0.5, 0.0, 1.0]);
        let target = &phi * Vector::from_row_slice(&[2.0, -1.0]);
        let res = project_linf(&phi, &target).unwrap();
        assert!(res.error < 1e-10);
        let zero = project_linf(&phi, &Vector::zeros(3)).unwrap();
        assert_eq!(zero.linear_value.theta, Vector::zeros(2));
    }
}
