//! Property tests over seeded random instances.

use misspec::bounds::{self, approx_ratio};
use misspec::estimators;
use misspec::instances::random::{self, DegenerateKind};
use misspec::linalg::{self, Mat, Vector};
use misspec::moments;
use misspec::mrp::{self, Mrp, OfflineDistribution};
use misspec::projections::{self, project_l2, project_linf};
use misspec::rng;
use misspec::{NormKind, ProblemInstance};
use proptest::prelude::*;

fn instance(seed: u64) -> ProblemInstance {
    random::full_support(&mut rng::stream(seed, 0))
}

fn vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, len)
}

/// Reward vectors; halved so that sums of two stay in `[-1, 1]`.
fn rewards(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5..=0.5f64, len)
}

fn pi_norm(inst: &ProblemInstance, x: &Mat) -> misspec::ExtendedScalar {
    let pi = projections::projection_matrix_l2(inst).unwrap();
    moments::weighted_operator_norm(&(pi * x), inst.mu())
}

fn relabel(inst: &ProblemInstance, perm: &[usize]) -> ProblemInstance {
    let s = inst.n_states();
    let p = Mat::from_fn(s, s, |i, j| inst.p()[(perm[i], perm[j])]);
    let phi = Mat::from_fn(s, inst.dim(), |i, j| inst.phi()[(perm[i], j)]);
    let mu = Vector::from_iterator(s, perm.iter().map(|&k| inst.mu().weights()[k]));
    let rewards = perm.iter().map(|&k| inst.rewards()[k]).collect();
    ProblemInstance::new_unnormalized(p, rewards, inst.gamma(), phi, mu).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn truncated_series_matches_value_function(seed in any::<u64>(), r in rewards(8)) {
        let inst = instance(seed);
        let s = inst.n_states();
        let r = Vector::from_column_slice(&r[..s]);
        let m = Mrp::new(inst.p().clone(), r.clone(), 0.9).unwrap();
        let v = mrp::value_function(&m);
        let (mut term, mut sum) = (r.clone(), r);
        for _ in 0..200 {
            term = inst.p() * term * 0.9;
            sum += &term;
        }
        prop_assert!(linalg::max_abs(&(v - sum)) <= 1e-7);
    }

    #[test]
    fn value_function_is_linear_in_rewards(seed in any::<u64>(), r1 in rewards(8), r2 in rewards(8)) {
        let inst = instance(seed);
        let s = inst.n_states();
        let (r1, r2) = (Vector::from_column_slice(&r1[..s]), Vector::from_column_slice(&r2[..s]));
        let v = |r: Vector| mrp::value_function(&Mrp::new(inst.p().clone(), r, inst.gamma()).unwrap());
        let gap = v(&r1 + &r2) - v(r1) - v(r2);
        prop_assert!(linalg::max_abs(&gap) <= 1e-10);
    }

    #[test]
    fn weighted_norm_at_most_sup_norm(v in vector(6), w in prop::collection::vec(0.0..1.0f64, 6)) {
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let total: f64 = w.iter().sum();
        let mu = OfflineDistribution::new(Vector::from_iterator(6, w.iter().map(|x| x / total))).unwrap();
        let v = Vector::from_vec(v);
        prop_assert!(mrp::weighted_norm(&v, &mu) <= mrp::sup_norm(&v) + 1e-12);
    }

    #[test]
    fn pushforward_iff_finite_projected_norm(seed in any::<u64>(), kind in 0usize..3) {
        let kind = [DegenerateKind::Generic, DegenerateKind::Blocked, DegenerateKind::Balanced][kind];
        let inst = random::degenerate_support(&mut rng::stream(seed, 0), kind);
        let finite = pi_norm(&inst, inst.p()).is_finite();
        prop_assert_eq!(moments::pushforward_condition(&inst).holds, finite);
    }

    #[test]
    fn projected_norm_bounded_by_transition_norm(seed in any::<u64>(), kind in 0usize..3) {
        let kind = [DegenerateKind::Generic, DegenerateKind::Blocked, DegenerateKind::Balanced][kind];
        let inst = random::degenerate_support(&mut rng::stream(seed, 0), kind);
        let p_norm = moments::weighted_operator_norm(inst.p(), inst.mu());
        if let Some(pn) = p_norm.value() {
            prop_assert!(pi_norm(&inst, inst.p()).to_f64() <= pn + 1e-9);
        }
    }

    #[test]
    fn resolvent_form_differs_by_at_most_one(seed in any::<u64>()) {
        let inst = instance(seed);
        let a = pi_norm(&inst, &inst.mrp().resolvent_base()).to_f64();
        let b = inst.gamma() * pi_norm(&inst, inst.p()).to_f64();
        prop_assert!((a - b).abs() <= 1.0 + 1e-9);
    }

    #[test]
    fn whitened_sigma_min_is_basis_invariant(seed in any::<u64>(), entries in vector(9)) {
        let inst = instance(seed);
        let d = inst.dim();
        let r = Mat::from_fn(d, d, |i, j| entries[i * 3 + j] + if i == j { 6.0 } else { 0.0 });
        let moved = ProblemInstance::new_unnormalized(
            inst.p().clone(),
            inst.rewards().to_vec(),
            inst.gamma(),
            inst.phi() * r,
            inst.mu().weights().clone(),
        );
        prop_assume!(moved.is_ok());
        let before = moments::compute_moments(&inst).unwrap().sigma_min_whitened;
        let after = moments::compute_moments(&moved.unwrap()).unwrap().sigma_min_whitened;
        prop_assert!((before - after).abs() <= 1e-8 * (1.0 + before));
    }

    #[test]
    fn l2_projection_pythagoras(seed in any::<u64>(), t in vector(8), th in vector(3)) {
        let inst = instance(seed);
        let target = Vector::from_column_slice(&t[..inst.n_states()]);
        let w = inst.phi() * Vector::from_column_slice(&th[..inst.dim()]);
        let ls = project_l2(&inst, &target).unwrap().linear_value.realized;
        let sq = |v: &Vector| mrp::weighted_norm(v, inst.mu()).powi(2);
        let lhs = sq(&(&target - &ls)) + sq(&(&ls - &w));
        let rhs = sq(&(&target - &w));
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs));
    }

    #[test]
    fn projection_orderings_and_linf_optimality(seed in any::<u64>(), t in vector(8), th in vector(3)) {
        let inst = instance(seed);
        let target = Vector::from_column_slice(&t[..inst.n_states()]);
        let l2 = project_l2(&inst, &target).unwrap();
        let li = project_linf(inst.phi(), &target).unwrap();
        let mu_err = |v: &Vector| mrp::weighted_norm(&(v - &target), inst.mu());
        let sup_err = |v: &Vector| mrp::sup_norm(&(v - &target));
        prop_assert!(mu_err(&l2.linear_value.realized) <= mu_err(&li.linear_value.realized) + 1e-9);
        prop_assert!(sup_err(&li.linear_value.realized) <= sup_err(&l2.linear_value.realized) + 1e-9);
        prop_assert!(li.certificate_gap <= 1e-8);
        let w = inst.phi() * Vector::from_column_slice(&th[..inst.dim()]);
        prop_assert!(li.error <= sup_err(&w) + 1e-8);
        prop_assert!((li.error - sup_err(&li.linear_value.realized)).abs() <= 1e-9);
    }

    #[test]
    fn lstd_solves_its_fixed_point(seed in any::<u64>()) {
        let inst = instance(seed);
        let theta = estimators::lstd_population(&inst).unwrap().theta;
        let res = moments::a_matrix(&inst) * theta - moments::b_vector(&inst);
        prop_assert!(linalg::max_abs(&res) <= 1e-10);
    }

    #[test]
    fn bayes_abstraction_commutes_with_relabeling(seed in any::<u64>(), keys in vector(8)) {
        let inst = random::aliased_full_support(&mut rng::stream(seed, 0));
        let s = inst.n_states();
        let mut perm: Vec<usize> = (0..s).collect();
        perm.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
        let moved = relabel(&inst, &perm);
        let base = estimators::bayes_abstraction(&inst).unwrap().composed;
        let after = estimators::bayes_abstraction(&moved).unwrap().composed;
        for (i, &k) in perm.iter().enumerate() {
            prop_assert!((after[i] - base[k]).abs() <= 1e-9);
        }
    }

    #[test]
    fn injective_features_make_bayes_exact(seed in any::<u64>()) {
        let inst = instance(seed);
        prop_assume!(estimators::feature_classes(inst.phi()).0.len() == inst.n_states());
        let v = inst.value_function();
        let composed = estimators::bayes_abstraction(&inst).unwrap().composed;
        prop_assert!(linalg::max_abs(&(&composed - &v)) <= 1e-9 * (1.0 + linalg::max_abs(&v)));
        let proj = estimators::projected_bayes(&inst).unwrap().linear_value.realized;
        let r = approx_ratio(&inst, &proj, NormKind::Linf).unwrap().to_f64();
        prop_assert!((r - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn lstd_bounds_are_sound_and_ordered(seed in any::<u64>()) {
        let inst = instance(seed);
        let lstd = estimators::lstd_population(&inst).unwrap().realized;
        let l2 = bounds::lstd_l2_bounds(&inst).unwrap();
        let li = bounds::lstd_linf_bounds(&inst).unwrap();
        let a2 = approx_ratio(&inst, &lstd, NormKind::L2mu).unwrap();
        let ai = approx_ratio(&inst, &lstd, NormKind::Linf).unwrap();
        prop_assert!(a2.le_with_slack(&l2.sharp, 1e-8));
        prop_assert!(l2.sharp.le_with_slack(&l2.split, 1e-9));
        prop_assert!(l2.sharp_resolvent.le_with_slack(&l2.split_resolvent, 1e-9));
        prop_assert!(ai.le_with_slack(&li.sharp.into(), 1e-8));
        prop_assert!(li.sharp <= li.split + 1e-9);
        prop_assert!(li.decomposition_residual <= 1e-8 * (1.0 + linalg::max_abs(&inst.value_function())));
    }
}
