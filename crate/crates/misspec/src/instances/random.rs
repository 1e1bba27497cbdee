//! Random instance suites and small structured instances for property checks.
//!
//! Every generator draws from the supplied RNG only, so a suite is reproducible
//! from `(seed, index)` via [`crate::rng::stream`].

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::linalg::{self, Mat, Vector};
use crate::moments;
use crate::mrp::{ProblemInstance, RewardModel};

const MAX_STATES: usize = 8;
const MAX_DIM: usize = 3;

fn simplex<R: Rng>(r: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(r)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Row-stochastic matrix; each entry is zeroed with probability `sparsity`
/// (one entry per row always survives).
fn transition<R: Rng>(r: &mut R, s: usize, sparsity: f64) -> Mat {
    let mut p = Mat::zeros(s, s);
    for i in 0..s {
        let keep_one = r.random_range(0..s);
        let mut w = simplex(r, s);
        for (j, x) in w.iter_mut().enumerate() {
            if j != keep_one && r.random_bool(sparsity) {
                *x = 0.0;
            }
        }
        let total: f64 = w.iter().sum();
        for j in 0..s {
            p[(i, j)] = w[j] / total;
        }
    }
    p
}

fn rewards<R: Rng>(r: &mut R, s: usize) -> Vec<RewardModel> {
    (0..s)
        .map(|_| {
            if r.random_bool(0.25) {
                RewardModel::Bernoulli(r.random())
            } else {
                RewardModel::Deterministic(r.random_range(-1.0..=1.0))
            }
        })
        .collect()
}

/// Uniform entries, then all rows scaled by the largest row norm if it exceeds one.
fn bounded_features<R: Rng>(r: &mut R, s: usize, d: usize) -> Mat {
    let mut phi = Mat::from_fn(s, d, |_, _| r.random_range(-1.0..=1.0));
    let m = phi.row_iter().map(|row| row.norm()).fold(0.0, f64::max);
    if m > 1.0 {
        phi /= m;
    }
    phi
}

fn gamma<R: Rng>(r: &mut R) -> f64 {
    if r.random_bool(0.1) {
        0.0
    } else {
        r.random_range(0.0..0.95)
    }
}

/// Full-support instance with `S <= 8`, `d <= 3` and `sigma_min(A) > 1e-6`.
pub fn full_support<R: Rng>(r: &mut R) -> ProblemInstance {
    loop {
        let s = r.random_range(2..=MAX_STATES);
        let d = r.random_range(1..=MAX_DIM.min(s));
        let g = gamma(r);
        let sparsity = r.random_range(0.0..0.6);
        let p = transition(r, s, sparsity);
        let rw = rewards(r, s);
        let phi = bounded_features(r, s, d);
        let mu = Vector::from_vec(simplex(r, s));
        let Ok(inst) = ProblemInstance::new(p, rw, g, phi, mu) else { continue };
        if linalg::sigma_min(&moments::a_matrix(&inst)) > 1e-6 {
            return inst;
        }
    }
}

/// How the unsupported states are reached from the support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenerateKind {
    /// No structure; the pushforward condition generically fails.
    Generic,
    /// The support never transitions off the support.
    Blocked,
    /// One feature whose mass into each unsupported state cancels.
    Balanced,
}

/// Instance whose `mu` misses at least one state.
pub fn degenerate_support<R: Rng>(r: &mut R, kind: DegenerateKind) -> ProblemInstance {
    loop {
        let s = r.random_range(3..=MAX_STATES);
        let d = match kind {
            DegenerateKind::Balanced => 1,
            _ => r.random_range(1..=MAX_DIM.min(s - 1)),
        };
        let k = r.random_range(d.max(2)..s);
        let mut states: Vec<usize> = (0..s).collect();
        for i in (1..s).rev() {
            states.swap(i, r.random_range(0..=i));
        }
        let supp = &states[..k];
        let w = simplex(r, k);
        let mut mu = Vector::zeros(s);
        for (i, &st) in supp.iter().enumerate() {
            mu[st] = w[i];
        }
        let mut phi = bounded_features(r, s, d);
        let sparsity = r.random_range(0.0..0.5);
        let mut p = transition(r, s, sparsity);
        match kind {
            DegenerateKind::Generic => {}
            DegenerateKind::Blocked => {
                for &i in supp {
                    let inside = simplex(r, k);
                    p.row_mut(i).fill(0.0);
                    for (j, &st) in supp.iter().enumerate() {
                        p[(i, st)] = inside[j];
                    }
                }
            }
            DegenerateKind::Balanced => {
                // alternate feature signs on the support, then give each unsupported
                // column weights u_s >= 0 with sum_s mu_s phi_s u_s = 0
                for (i, &st) in supp.iter().enumerate() {
                    let mag = r.random_range(0.2..=1.0);
                    phi[(st, 0)] = if i % 2 == 0 { mag } else { -mag };
                }
                let n_pos = supp.iter().filter(|&&st| phi[(st, 0)] > 0.0).count() as f64;
                let n_neg = k as f64 - n_pos;
                let u: Vec<f64> = supp
                    .iter()
                    .map(|&st| {
                        let wgt = (mu[st] * phi[(st, 0)]).abs();
                        if phi[(st, 0)] > 0.0 { 1.0 / (wgt * n_pos) } else { 1.0 / (wgt * n_neg) }
                    })
                    .collect();
                let off: Vec<usize> = states[k..].to_vec();
                let umax = u.iter().copied().fold(0.0, f64::max);
                let share = r.random_range(0.1..0.6);
                for (i, &st) in supp.iter().enumerate() {
                    let mut row = vec![0.0; s];
                    let mut used = 0.0;
                    for &o in &off {
                        let q = share * u[i] / (umax * off.len() as f64);
                        row[o] = q;
                        used += q;
                    }
                    let inside = simplex(r, k);
                    for (j, &t) in supp.iter().enumerate() {
                        row[t] = (1.0 - used) * inside[j];
                    }
                    for j in 0..s {
                        p[(st, j)] = row[j];
                    }
                }
            }
        }
        let (rw, g) = (rewards(r, s), gamma(r));
        if let Ok(inst) = ProblemInstance::new(p, rw, g, phi, mu) {
            return inst;
        }
    }
}

/// Full-support instance where several states share a feature vector.
pub fn aliased_full_support<R: Rng>(r: &mut R) -> ProblemInstance {
    loop {
        let s = r.random_range(3..=MAX_STATES);
        let classes = r.random_range(2..s);
        let d = r.random_range(1..=MAX_DIM.min(classes));
        let class_feats = bounded_features(r, classes, d);
        let class_of: Vec<usize> = (0..s).map(|i| if i < classes { i } else { r.random_range(0..classes) }).collect();
        let phi = Mat::from_fn(s, d, |i, j| class_feats[(class_of[i], j)]);
        let sparsity = r.random_range(0.0..0.5);
        let p = transition(r, s, sparsity);
        let mu = Vector::from_vec(simplex(r, s));
        let (rw, g) = (rewards(r, s), gamma(r));
        if let Ok(inst) = ProblemInstance::new(p, rw, g, phi, mu) {
            return inst;
        }
    }
}

/// Four states in two closed blocks, features spanning exactly the first block
/// (up to a random rotation), full-support `mu`.
///
/// The `mu`-orthogonal complement of the features is the second block, which `P`
/// maps into itself.
pub fn closed_complement<R: Rng>(r: &mut R) -> ProblemInstance {
    let mut p = Mat::zeros(4, 4);
    for b in [0, 2] {
        let w0 = simplex(r, 2);
        let w1 = simplex(r, 2);
        p[(b, b)] = w0[0];
        p[(b, b + 1)] = w0[1];
        p[(b + 1, b)] = w1[0];
        p[(b + 1, b + 1)] = w1[1];
    }
    let angle: f64 = r.random_range(0.0..std::f64::consts::TAU);
    let (sn, cs) = angle.sin_cos();
    let mut phi = Mat::zeros(4, 2);
    phi[(0, 0)] = cs;
    phi[(0, 1)] = -sn;
    phi[(1, 0)] = sn;
    phi[(1, 1)] = cs;
    let mu = Vector::from_vec(simplex(r, 4));
    let (rw, g) = (rewards(r, 4), r.random_range(0.0..0.95));
    ProblemInstance::new(p, rw, g, phi, mu).expect("block instance is valid")
}

/// Identity features on `S <= 3` states with full-support `mu`.
pub fn tabular<R: Rng>(r: &mut R) -> ProblemInstance {
    let s = r.random_range(2..=3);
    let p = transition(r, s, 0.3);
    let mu = Vector::from_vec(simplex(r, s));
    let (rw, g) = (rewards(r, s), r.random_range(0.0..0.95));
    ProblemInstance::new(p, rw, g, Mat::identity(s, s), mu)
        .expect("tabular instance is valid")
}

/// Three states with `gamma = 0`, features `e_1, e_2, e_2` and `mu = (1 - delta, delta, 0)`.
///
/// `lambda_min(Sigma) = delta`, so the leverage `max_s ||Sigma^{-1/2} phi(s)||` is `delta^{-1/2}`.
pub fn small_covariance(delta: f64) -> ProblemInstance {
    ProblemInstance::new(
        Mat::from_element(3, 3, 1.0 / 3.0),
        vec![RewardModel::Deterministic(1.0), RewardModel::Deterministic(-0.5), RewardModel::Deterministic(0.25)],
        0.0,
        Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]),
        Vector::from_row_slice(&[1.0 - delta, delta, 0.0]),
    )
    .expect("small-covariance instance is valid")
}

/// 5 states, `d = 2`, `gamma = 0.5`, full support, `sigma_min(A) >= 0.05`.
pub fn well_conditioned_five_state<R: Rng>(r: &mut R) -> ProblemInstance {
    loop {
        let p = transition(r, 5, 0.2);
        let phi = bounded_features(r, 5, 2);
        let mu = Vector::from_vec(simplex(r, 5));
        let rw = rewards(r, 5);
        let Ok(inst) = ProblemInstance::new(p, rw, 0.5, phi, mu) else { continue };
        if linalg::sigma_min(&moments::a_matrix(&inst)) >= 0.05 && inst.mu().weights().min() >= 0.05 {
            return inst;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{alpha_one_predicates, approx_ratio};
    use crate::estimators::{feature_classes, lstd_population};
    use crate::moments::pushforward_condition;
    use crate::projections::NormKind;
    use crate::rng;

    #[test]
    fn suites_respect_shape_limits() {
        let mut r = rng::stream(11, 0);
        for _ in 0..50 {
            let i = full_support(&mut r);
            assert!(i.n_states() <= MAX_STATES && i.dim() <= MAX_DIM && i.mu().is_full_support());
            let a = aliased_full_support(&mut r);
            assert!(feature_classes(a.phi()).0.len() < a.n_states());
        }
    }

    #[test]
    fn structured_degenerate_kinds_satisfy_pushforward() {
        let mut r = rng::stream(12, 0);
        for kind in [DegenerateKind::Blocked, DegenerateKind::Balanced] {
            for _ in 0..50 {
                let i = degenerate_support(&mut r, kind);
                assert!(!i.mu().is_full_support());
                assert!(pushforward_condition(&i).holds, "{kind:?}: {:?}", pushforward_condition(&i).residuals);
            }
        }
    }

    #[test]
    fn closed_complement_gives_ratio_one() {
        let mut r = rng::stream(13, 0);
        for _ in 0..20 {
            let i = closed_complement(&mut r);
            assert!(alpha_one_predicates(&i).complement_closed);
            let lstd = lstd_population(&i).unwrap();
            let a = approx_ratio(&i, &lstd.realized, NormKind::L2mu).unwrap().to_f64();
            assert!((a - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn small_covariance_leverage() {
        let i = small_covariance(1e-4);
        assert!((linalg::sym_eigenvalues(&i.sigma())[0] - 1e-4).abs() < 1e-12);
    }
}
