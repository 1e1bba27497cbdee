//! Pairs of instances that emit the same observation law.

use crate::error::{Error, Result};
use crate::estimators::{self, population_view};
use crate::linalg::{Mat, Vector};
use crate::mrp::{ProblemInstance, RewardModel};

use super::InstanceFamily;

fn to_absorbing_pair() -> Mat {
    Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0])
}

fn check_population(fam: InstanceFamily) -> Result<InstanceFamily> {
    let a = population_view(&fam.members[0]);
    let b = population_view(&fam.members[1]);
    if !estimators::populations_equal(&a, &b) {
        return Err(Error::Invariant("aliased members produce different observation laws".into()));
    }
    Ok(InstanceFamily { population: Some(a), ..fam })
}

/// Two 2-state instances with constant features, `||Pi_mu P||_mu = x` and whitened
/// `sigma_min = y`.
///
/// Member 0 has deterministic rewards `(1, 0)`; member 1 pays `Ber(mu_1)` in both
/// states. Both self-absorb into state 2. `x = 1` puts all mass on state 2 and
/// `x = inf` on state 1; either way the family is flagged support-degenerate.
pub fn gen_aliased_pair_l2(x: f64, y: f64) -> Result<InstanceFamily> {
    if x.is_nan() || x < 1.0 {
        return Err(Error::Domain(format!("x = {x} must be at least 1")));
    }
    if !(y > 0.0 && y < 0.5) {
        return Err(Error::Domain(format!("y = {y} must lie in (0, 1/2)")));
    }
    let mu1 = if x.is_infinite() { 1.0 } else { (x * x - 1.0) / (x * x) };
    let gamma = 1.0 - y;
    let phi = Mat::from_element(2, 1, 1.0);
    let mu = Vector::from_row_slice(&[mu1, 1.0 - mu1]);
    let m1 = ProblemInstance::new(
        to_absorbing_pair(),
        vec![RewardModel::Deterministic(1.0), RewardModel::Deterministic(0.0)],
        gamma,
        phi.clone(),
        mu.clone(),
    )?;
    let m2 = ProblemInstance::new(to_absorbing_pair(), vec![RewardModel::Bernoulli(mu1); 2], gamma, phi, mu)?;
    let lower = if x.is_infinite() {
        f64::INFINITY
    } else {
        (1.0 + gamma * gamma * (x * x - 1.0) / (y * y)).sqrt()
    };
    let fam = InstanceFamily {
        support_degenerate: !m1.mu().is_full_support(),
        ..InstanceFamily::new(vec![m1, m2])
    }
    .with("x", x)
    .with("y", y)
    .with("gamma", gamma)
    .with("mu1", mu1)
    .with("forced_theta", mu1 / (1.0 - gamma))
    .with("lower_bound", lower);
    check_population(fam)
}

/// Mixing weight `p = 1 - eps (1 - gamma) / 2` at which the sup-norm lower bound
/// comes within `eps` of `2 / (1 - gamma)`.
pub fn full_support_p_for_eps(gamma: f64, eps: f64) -> f64 {
    1.0 - eps * (1.0 - gamma) / 2.0
}

/// A 2-state instance with rewards `(1, 0)` and `mu = (p, 1 - p)` paired with a
/// 1-state instance paying `Ber(p)`, both with the single feature `1`.
///
/// The forced estimate `p / (1 - gamma)` is exact on the second member, and its
/// sup-norm ratio on the first is `2p / (1 - gamma)`.
pub fn gen_full_support_pair(gamma: f64, p: f64) -> Result<InstanceFamily> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma = {gamma} must lie in [0, 1)")));
    }
    if !(p > (1.0 - gamma) / 2.0 && p < 1.0 && p > 0.0) {
        return Err(Error::Domain(format!("p = {p} must lie in ((1 - gamma)/2, 1)")));
    }
    let m1 = ProblemInstance::new(
        to_absorbing_pair(),
        vec![RewardModel::Deterministic(1.0), RewardModel::Deterministic(0.0)],
        gamma,
        Mat::from_element(2, 1, 1.0),
        Vector::from_row_slice(&[p, 1.0 - p]),
    )?;
    let m2 = ProblemInstance::new(
        Mat::identity(1, 1),
        vec![RewardModel::Bernoulli(p)],
        gamma,
        Mat::from_element(1, 1, 1.0),
        Vector::from_element(1, 1.0),
    )?;
    let fam = InstanceFamily::new(vec![m1, m2])
        .with("gamma", gamma)
        .with("p", p)
        .with("forced_theta", p / (1.0 - gamma))
        .with("lower_bound", 2.0 * p / (1.0 - gamma));
    check_population(fam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::approx_ratio;
    use crate::moments::{compute_moments, weighted_operator_norm};
    use crate::projections::{projection_matrix_l2, NormKind};
    use crate::scalar::ExtendedScalar;

    #[test]
    fn plug_in_sqrt2() {
        let fam = gen_aliased_pair_l2(2f64.sqrt(), 0.1).unwrap();
        assert!((fam.param("mu1").unwrap() - 0.5).abs() < 1e-15);
        assert!((fam.param("gamma").unwrap() - 0.9).abs() < 1e-15);
        assert!(!fam.support_degenerate);
    }

    #[test]
    fn measured_parameters_match_claims() {
        let fam = gen_aliased_pair_l2(2.0, 0.25).unwrap();
        let m1 = &fam.members[0];
        let pi = projection_matrix_l2(m1).unwrap();
        let npp = weighted_operator_norm(&(pi * m1.p()), m1.mu()).to_f64();
        assert!((npp - 2.0).abs() < 1e-9);
        assert!((compute_moments(m1).unwrap().sigma_min_whitened - 0.25).abs() < 1e-9);
    }

    #[test]
    fn squared_error_ratio_matches_arithmetic() {
        let (x, y) = (2.0, 0.25);
        let fam = gen_aliased_pair_l2(x, y).unwrap();
        let (mu1, g): (f64, f64) = (0.75, 0.75);
        let mu2 = 1.0 - mu1;
        let th = mu1 / (1.0 - g);
        let oracle = ((th * th - 2.0 * mu1 * mu1 / (1.0 - g) + mu1) / (mu1 * mu2)).sqrt();
        let cand = Vector::from_element(2, fam.param("forced_theta").unwrap());
        let measured = approx_ratio(&fam.members[0], &cand, NormKind::L2mu).unwrap().to_f64();
        assert!((measured - oracle).abs() < 1e-9);
        assert!(measured >= fam.param("lower_bound").unwrap() - 1e-6);
    }

    #[test]
    fn boundaries_are_degenerate() {
        let one = gen_aliased_pair_l2(1.0, 0.2).unwrap();
        assert_eq!(one.param("mu1"), Some(0.0));
        assert!(one.support_degenerate);
        assert!((one.param("lower_bound").unwrap() - 1.0).abs() < 1e-15);
        let inf = gen_aliased_pair_l2(f64::INFINITY, 0.2).unwrap();
        assert!(inf.support_degenerate);
        let m = &inf.members[0];
        let pi = projection_matrix_l2(m).unwrap();
        assert_eq!(weighted_operator_norm(&(pi * m.p()), m.mu()), ExtendedScalar::Infinite);
        assert!(gen_aliased_pair_l2(0.5, 0.2).is_err());
        assert!(gen_aliased_pair_l2(2.0, 0.5).is_err());
    }

    #[test]
    fn full_support_pair() {
        let fam = gen_full_support_pair(0.5, 0.9).unwrap();
        let cand = Vector::from_element(2, fam.param("forced_theta").unwrap());
        let r = approx_ratio(&fam.members[0], &cand, NormKind::Linf).unwrap().to_f64();
        assert!((r - 3.6).abs() < 1e-9);
        assert!(gen_full_support_pair(0.5, 0.25).is_err());
        let p = full_support_p_for_eps(0.9, 0.1);
        assert!(gen_full_support_pair(0.9, p).unwrap().param("lower_bound").unwrap() >= 20.0 - 0.1 - 1e-9);
    }
}
