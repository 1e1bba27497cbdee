//! Population moments, whitened spectra, weighted operator norms and the pushforward condition.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::mrp::{OfflineDistribution, ProblemInstance, SIGMA_FLOOR};
use crate::scalar::ExtendedScalar;

/// Entries of the support-to-complement block above this make an operator norm infinite.
pub const INFINITY_BLOCK_TOL: f64 = 1e-10;
/// Residual threshold of the pushforward condition.
pub const PUSHFORWARD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct MomentSummary {
    #[serde(serialize_with = "ser_mat")]
    pub sigma: Mat,
    #[serde(serialize_with = "ser_mat")]
    pub a_matrix: Mat,
    #[serde(serialize_with = "ser_vec")]
    pub b_vector: Vector,
    pub sigma_min_a: f64,
    pub sigma_min_whitened: f64,
    pub lambda_min_sigma: f64,
}

pub(crate) fn ser_mat<S: serde::Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in m.row_iter() {
        seq.serialize_element(&r.iter().copied().collect::<Vec<f64>>())?;
    }
    seq.end()
}

pub(crate) fn ser_vec<S: serde::Serializer>(v: &Vector, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

/// `A = Phi^T D (I - gamma P) Phi`.
pub fn a_matrix(inst: &ProblemInstance) -> Mat {
    let phi = inst.phi();
    phi.transpose() * inst.d() * inst.mrp().resolvent_base() * phi
}

/// `b = Phi^T D r`.
pub fn b_vector(inst: &ProblemInstance) -> Vector {
    inst.phi().transpose() * inst.d() * inst.r()
}

/// `Sigma^{-1/2}` by symmetric eigendecomposition.
pub fn sigma_inv_sqrt(inst: &ProblemInstance) -> Result<Mat> {
    linalg::sym_inv_sqrt(&inst.sigma(), SIGMA_FLOOR).map_err(Error::SigmaSingular)
}

pub fn compute_moments(inst: &ProblemInstance) -> Result<MomentSummary> {
    let sigma = inst.sigma();
    let lambda_min_sigma = linalg::sym_eigenvalues(&sigma)[0];
    let w = linalg::sym_inv_sqrt(&sigma, SIGMA_FLOOR).map_err(Error::SigmaSingular)?;
    let a = a_matrix(inst);
    let whitened = &w * &a * &w;
    Ok(MomentSummary {
        sigma_min_a: linalg::sigma_min(&a),
        sigma_min_whitened: linalg::sigma_min(&whitened),
        lambda_min_sigma,
        b_vector: b_vector(inst),
        a_matrix: a,
        sigma,
    })
}

/// The `L2(mu)` operator norm of `x`, infinite when `x` reads off-support coordinates.
pub fn weighted_operator_norm(x: &Mat, mu: &OfflineDistribution) -> ExtendedScalar {
    let supp = mu.support();
    let off = mu.unsupported();
    for &i in supp {
        for &j in &off {
            if x[(i, j)].abs() > INFINITY_BLOCK_TOL {
                return ExtendedScalar::Infinite;
            }
        }
    }
    let k = supp.len();
    let sq: Vec<f64> = supp.iter().map(|&s| mu.weights()[s].sqrt()).collect();
    let block = Mat::from_fn(k, k, |i, j| sq[i] * x[(supp[i], supp[j])] / sq[j]);
    ExtendedScalar::Finite(linalg::sigma_max(&block))
}

#[derive(Debug, Clone, Serialize)]
pub struct PushforwardCheck {
    pub holds: bool,
    /// `(state, ||sum_s mu(s) phi(s) P(s, state)||)` for each unsupported state.
    pub residuals: Vec<(usize, f64)>,
}

/// Whether `E_{s~mu}[phi(s) P(s'|s)] = 0` for every unsupported `s'`.
pub fn pushforward_condition(inst: &ProblemInstance) -> PushforwardCheck {
    let mu = inst.mu();
    let m = inst.phi().transpose() * inst.d() * inst.p();
    let residuals: Vec<(usize, f64)> = mu.unsupported().into_iter().map(|s| (s, m.column(s).norm())).collect();
    PushforwardCheck {
        holds: residuals.iter().all(|(_, r)| *r <= PUSHFORWARD_TOL),
        residuals,
    }
}
