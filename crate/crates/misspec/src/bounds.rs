//! Approximation ratios, LSTD upper bounds, exact error decompositions and the
//! conditions under which LSTD is exact.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{self, A_SINGULAR_TOL};
use crate::linalg::{self, Mat, Vector};
use crate::moments;
use crate::mrp::{self, ProblemInstance};
use crate::projections::{self, NormKind};
use crate::scalar::ExtendedScalar;

pub fn norm_of(v: &Vector, inst: &ProblemInstance, norm: NormKind) -> f64 {
    match norm {
        NormKind::L2mu => mrp::weighted_norm(v, inst.mu()),
        NormKind::Linf => mrp::sup_norm(v),
    }
}

/// `||candidate - v_M|| / inf_theta ||Phi theta - v_M||` in the chosen norm.
pub fn approx_ratio(inst: &ProblemInstance, candidate: &Vector, norm: NormKind) -> Result<ExtendedScalar> {
    let v = inst.value_function();
    let num = norm_of(&(candidate - &v), inst, norm);
    let den = projections::misspecification(inst, &v, norm)?;
    Ok(ExtendedScalar::ratio(num, den))
}

/// `Phi A^{-1} Phi^T D`, the map from Bellman residuals to LSTD corrections.
fn lstd_operator(inst: &ProblemInstance) -> Result<Mat> {
    let a = moments::a_matrix(inst);
    let smin = linalg::sigma_min(&a);
    if smin <= A_SINGULAR_TOL {
        return Err(Error::AMatrixSingular(smin));
    }
    let rhs = inst.phi().transpose() * inst.d();
    let sol = linalg::solve_mat(&a, &rhs).ok_or(Error::AMatrixSingular(smin))?;
    Ok(inst.phi() * sol)
}

fn one_plus_sq(x: ExtendedScalar) -> ExtendedScalar {
    x.map(|t| (1.0 + t * t).sqrt())
}

/// Upper bounds on the `L2(mu)` ratio of LSTD.
///
/// Each bound comes in a `gamma P` form and an `(I - gamma P)` form; both are valid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct L2Bounds {
    pub sharp: ExtendedScalar,
    pub split: ExtendedScalar,
    pub sharp_resolvent: ExtendedScalar,
    pub split_resolvent: ExtendedScalar,
}

impl L2Bounds {
    pub fn best_sharp(&self) -> ExtendedScalar {
        self.sharp.min(self.sharp_resolvent)
    }

    pub fn best_split(&self) -> ExtendedScalar {
        self.split.min(self.split_resolvent)
    }
}

pub fn lstd_l2_bounds(inst: &ProblemInstance) -> Result<L2Bounds> {
    let op = lstd_operator(inst)?;
    let mu = inst.mu();
    let gp = inst.p() * inst.gamma();
    let base = inst.mrp().resolvent_base();
    let sharp = one_plus_sq(moments::weighted_operator_norm(&(&op * &gp), mu));
    let sharp_resolvent = one_plus_sq(moments::weighted_operator_norm(&(&op * &base), mu));

    let m = moments::compute_moments(inst)?;
    let pi = projections::projection_matrix_l2(inst)?;
    let y = m.sigma_min_whitened;
    let split_of = |x: &Mat| -> ExtendedScalar {
        match moments::weighted_operator_norm(x, mu) {
            ExtendedScalar::Finite(n) => one_plus_sq(ExtendedScalar::ratio(n, y)),
            ExtendedScalar::Infinite => ExtendedScalar::Infinite,
        }
    };
    let split = split_of(&(&pi * &gp));
    let split_resolvent = split_of(&(&pi * &base));
    Ok(L2Bounds { sharp, split, sharp_resolvent, split_resolvent })
}

/// Largest residual of the two exact forms of `Phi theta_LS - Phi theta_LSTD`:
/// `gamma Phi A^{-1} Phi^T D P v_perp` and `-Phi A^{-1} Phi^T D (I - gamma P) v_perp`,
/// where `v_perp = v_M - Pi_mu v_M`.
pub fn decomposition_check_l2(inst: &ProblemInstance) -> Result<f64> {
    let op = lstd_operator(inst)?;
    let v = inst.value_function();
    let ls = projections::project_l2(inst, &v)?.linear_value.realized;
    let lstd = estimators::lstd_population(inst)?.realized;
    let v_perp = &v - &ls;
    let lhs = &ls - &lstd;
    let rhs1 = &op * (inst.p() * &v_perp) * inst.gamma();
    let rhs2 = -(&op * (inst.mrp().resolvent_base() * &v_perp));
    Ok(linalg::max_abs(&(&lhs - rhs1)).max(linalg::max_abs(&(&lhs - rhs2))))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinfBounds {
    pub sharp: f64,
    pub split: f64,
    /// Residual of `Pi_inf v - Phi theta_LSTD = Phi A^{-1} Phi^T D (I - gamma P)(Pi_inf v - v)`.
    pub decomposition_residual: f64,
}

pub fn lstd_linf_bounds(inst: &ProblemInstance) -> Result<LinfBounds> {
    let op = lstd_operator(inst)?;
    let base = inst.mrp().resolvent_base();
    let full = &op * &base;
    let sharp = 1.0 + linalg::max_row_sum(&full);
    let split = 1.0 + (1.0 + inst.gamma()) / linalg::sigma_min(&moments::a_matrix(inst));
    let v = inst.value_function();
    let w = projections::project_linf(inst.phi(), &v)?.linear_value.realized;
    let lstd = estimators::lstd_population(inst)?.realized;
    let residual = linalg::max_abs(&((&w - &lstd) - &full * (&w - &v)));
    Ok(LinfBounds { sharp, split, decomposition_residual: residual })
}

/// Converts an `L2(mu)` ratio bound into a sup-norm ratio bound:
/// `1 + max_s ||Sigma^{-1/2} phi(s)|| (1 + alpha_mu)`.
pub fn l2_to_linf_translate(inst: &ProblemInstance, alpha_mu: f64) -> Result<f64> {
    if alpha_mu.is_nan() || alpha_mu < 1.0 {
        return Err(Error::Domain(format!("alpha_mu = {alpha_mu} must be at least 1")));
    }
    let w = moments::sigma_inv_sqrt(inst)?;
    let lev = inst.phi().row_iter().map(|r| (&w * r.transpose()).norm()).fold(0.0, f64::max);
    Ok(1.0 + lev * (1.0 + alpha_mu))
}

/// Structural conditions under which LSTD has ratio one.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlphaOneFlags {
    /// The `mu`-orthogonal complement of `col(Phi)` is mapped into itself by `P`.
    pub complement_closed: bool,
    /// `||P||_mu` is finite, so `v_M` is identifiable on the support.
    pub p_norm_finite: bool,
    pub complement_residual: f64,
}

pub fn alpha_one_predicates(inst: &ProblemInstance) -> AlphaOneFlags {
    let dphi = inst.d() * inst.phi();
    let basis = linalg::complement_basis(&dphi);
    let m = inst.phi().transpose() * inst.d() * inst.p() * basis;
    let residual = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    AlphaOneFlags {
        complement_closed: residual <= 1e-9,
        p_norm_finite: moments::weighted_operator_norm(inst.p(), inst.mu()).is_finite(),
        complement_residual: residual,
    }
}

/// Every ratio and bound for population LSTD on one instance.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub alpha_l2: ExtendedScalar,
    pub alpha_linf: ExtendedScalar,
    pub l2_bound_sharp: ExtendedScalar,
    pub l2_bound_split: ExtendedScalar,
    pub l2_bound_sharp_resolvent: ExtendedScalar,
    pub l2_bound_split_resolvent: ExtendedScalar,
    pub linf_bound_sharp: ExtendedScalar,
    pub linf_bound_split: ExtendedScalar,
    pub decomposition_residual: f64,
    pub linf_decomposition_residual: f64,
}

pub fn bound_report(inst: &ProblemInstance) -> Result<BoundReport> {
    let lstd = estimators::lstd_population(inst)?;
    let l2 = lstd_l2_bounds(inst)?;
    let linf = lstd_linf_bounds(inst)?;
    Ok(BoundReport {
        alpha_l2: approx_ratio(inst, &lstd.realized, NormKind::L2mu)?,
        alpha_linf: approx_ratio(inst, &lstd.realized, NormKind::Linf)?,
        l2_bound_sharp: l2.sharp,
        l2_bound_split: l2.split,
        l2_bound_sharp_resolvent: l2.sharp_resolvent,
        l2_bound_split_resolvent: l2.split_resolvent,
        linf_bound_sharp: linf.sharp.into(),
        linf_bound_split: linf.split.into(),
        decomposition_residual: decomposition_check_l2(inst)?,
        linf_decomposition_residual: linf.decomposition_residual,
    })
}

/// Which data regime a [`RegimeCell`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ArbitraryAliased,
    ArbitraryUnaliased,
    FullSupportAliased,
    FullSupportUnaliased,
}

impl Regime {
    pub const ALL: [Regime; 4] =
        [Regime::ArbitraryAliased, Regime::ArbitraryUnaliased, Regime::FullSupportAliased, Regime::FullSupportUnaliased];

    pub fn label(self) -> &'static str {
        match self {
            Regime::ArbitraryAliased => "mu >= 0, aliasing",
            Regime::ArbitraryUnaliased => "mu >= 0, no aliasing",
            Regime::FullSupportAliased => "mu > 0, aliasing",
            Regime::FullSupportUnaliased => "mu > 0, no aliasing",
        }
    }
}

/// The optimal approximation factor of one regime and norm, evaluated on an instance.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeCell {
    pub regime: Regime,
    pub norm: NormKind,
    pub formula: &'static str,
    pub value: ExtendedScalar,
    /// `true` when the factor is matched exactly, `false` when only up to constants.
    pub exact: bool,
    /// Whether the instance itself falls in this regime.
    pub applies: bool,
}

/// All eight regime cells.
///
/// The instance-dependent cells are `sqrt(1 + (gamma ||Pi_mu P||_mu / sigma_w)^2)` in
/// `L2(mu)` and `1 + (1 + gamma) / sigma_min(A)` in sup-norm, where `sigma_w` is the
/// smallest singular value of the whitened `A`.
pub fn regime_table(inst: &ProblemInstance) -> Result<Vec<RegimeCell>> {
    let m = moments::compute_moments(inst)?;
    let gamma = inst.gamma();
    let pi_p = projections::projection_matrix_l2(inst)? * inst.p();
    let l2 = match moments::weighted_operator_norm(&pi_p, inst.mu()) {
        ExtendedScalar::Finite(n) => one_plus_sq(ExtendedScalar::ratio(gamma * n, m.sigma_min_whitened)),
        ExtendedScalar::Infinite => ExtendedScalar::Infinite,
    };
    let linf = ExtendedScalar::ratio(1.0 + gamma, m.sigma_min_a).map(|t| 1.0 + t);
    let full = inst.mu().is_full_support();
    let aliased = estimators::feature_classes(inst.phi()).0.len() < inst.n_states();
    let l2_formula = "sqrt(1 + (gamma ||Pi_mu P||_mu / sigma_min(Sigma^-1/2 A Sigma^-1/2))^2)";
    let linf_formula = "1 + (1 + gamma) / sigma_min(A)";
    let mut cells = Vec::with_capacity(8);
    for regime in Regime::ALL {
        let applies = match regime {
            Regime::ArbitraryAliased => aliased,
            Regime::ArbitraryUnaliased => !aliased,
            Regime::FullSupportAliased => full && aliased,
            Regime::FullSupportUnaliased => full && !aliased,
        };
        let (l2_cell, linf_cell) = match regime {
            Regime::ArbitraryAliased | Regime::ArbitraryUnaliased => {
                ((l2_formula, l2, false), (linf_formula, linf, false))
            }
            Regime::FullSupportAliased => {
                ((l2_formula, l2, false), ("2 / (1 - gamma)", ExtendedScalar::ratio(2.0, 1.0 - gamma), true))
            }
            Regime::FullSupportUnaliased => (("1", 1.0.into(), true), ("1", 1.0.into(), true)),
        };
        for (norm, (formula, value, exact)) in [(NormKind::L2mu, l2_cell), (NormKind::Linf, linf_cell)] {
            cells.push(RegimeCell { regime, norm, formula, value, exact, applies });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mrp::RewardModel;

    #[test]
    fn gamma_zero_bounds_are_one() {
        let inst = ProblemInstance::new(
            Mat::from_row_slice(3, 3, &[0.2, 0.3, 0.5, 0.6, 0.1, 0.3, 0.3, 0.3, 0.4]),
            vec![RewardModel::Deterministic(0.5), RewardModel::Deterministic(-0.3), RewardModel::Deterministic(1.0)],
            0.0,
            Mat::from_row_slice(3, 2, &[0.6, 0.0, 0.0, 0.6, 0.4, 0.4]),
            Vector::from_row_slice(&[0.2, 0.3, 0.5]),
        )
        .unwrap();
        let b = lstd_l2_bounds(&inst).unwrap();
        assert_eq!(b.sharp, ExtendedScalar::Finite(1.0));
        assert_eq!(b.split, ExtendedScalar::Finite(1.0));
        let r = bound_report(&inst).unwrap();
        assert!((r.alpha_l2.to_f64() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tabular_orthonormal_linf_bounds_at_most_two() {
        let inst = ProblemInstance::new(
            Mat::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]),
            vec![RewardModel::Deterministic(1.0), RewardModel::Deterministic(0.0)],
            0.0,
            Mat::identity(2, 2),
            Vector::from_row_slice(&[0.5, 0.5]),
        )
        .unwrap();
        let b = lstd_linf_bounds(&inst).unwrap();
        assert!(b.sharp <= 2.0 + 1e-12 && b.split <= 3.0 + 1e-12);
    }

    #[test]
    fn regime_table_plug_in() {
        let fam = crate::instances::gen_aliased_pair_l2(2.0, 0.25).unwrap();
        let cells = regime_table(&fam.members[0]).unwrap();
        assert_eq!(cells.len(), 8);
        let oracle = (1.0 + (0.75f64 * 2.0 / 0.25).powi(2)).sqrt();
        assert!((cells[0].value.to_f64() - oracle).abs() < 1e-9);
        assert_eq!(cells[5].value, ExtendedScalar::Finite(8.0));
        assert_eq!(cells[7].value, ExtendedScalar::Finite(1.0));
    }

    #[test]
    fn translation_requires_alpha_at_least_one() {
        let inst = ProblemInstance::new(
            Mat::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
            vec![RewardModel::Deterministic(0.0); 3],
            0.5,
            Mat::identity(3, 3),
            Vector::from_row_slice(&[1.0 / 3.0; 3]),
        )
        .unwrap();
        assert!(matches!(l2_to_linf_translate(&inst, 0.0), Err(Error::Domain(_))));
        let t = l2_to_linf_translate(&inst, 1.0).unwrap();
        assert!((t - (1.0 + 2.0 * 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn realizable_candidate_off_target_is_infinite() {
        let inst = ProblemInstance::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]),
            vec![RewardModel::Deterministic(0.0); 2],
            0.9,
            Mat::from_element(2, 1, 1.0),
            Vector::from_row_slice(&[0.5, 0.5]),
        )
        .unwrap();
        let off = Vector::from_row_slice(&[0.1, 0.1]);
        assert_eq!(approx_ratio(&inst, &off, NormKind::L2mu).unwrap(), ExtendedScalar::Infinite);
        assert_eq!(approx_ratio(&inst, &Vector::zeros(2), NormKind::Linf).unwrap(), ExtendedScalar::Finite(1.0));
    }
}
