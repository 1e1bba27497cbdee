//! LSTD (population and empirical), aliased sampling, and the Bayes abstraction estimator.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::moments;
use crate::mrp::{ProblemInstance, RewardModel};
use crate::projections::{self, LinearValue, ProjectionResult};
use crate::rng;

/// `sigma_min(A)` at or below this is treated as singular.
pub const A_SINGULAR_TOL: f64 = 1e-10;

/// `theta = A^{-1} b`.
pub fn lstd_population(inst: &ProblemInstance) -> Result<LinearValue> {
    let a = moments::a_matrix(inst);
    let smin = linalg::sigma_min(&a);
    if smin <= A_SINGULAR_TOL {
        return Err(Error::AMatrixSingular(smin));
    }
    let theta = linalg::solve(&a, &moments::b_vector(inst)).ok_or(Error::AMatrixSingular(smin))?;
    Ok(LinearValue::new(inst.phi(), theta))
}

/// One observed transition `(phi(s), r, phi(s'))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasedSample {
    pub phi: Vector,
    pub reward: f64,
    pub phi_next: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub d: usize,
    pub seed: u64,
    pub samples: Vec<AliasedSample>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

fn draw<R: Rng>(inst: &ProblemInstance, r: &mut R) -> AliasedSample {
    let s = rng::categorical(inst.mu().weights().iter().copied(), r.random());
    let u_reward: f64 = r.random();
    let reward = match inst.rewards()[s] {
        RewardModel::Deterministic(v) => v,
        RewardModel::Bernoulli(p) => {
            if u_reward < p {
                1.0
            } else {
                0.0
            }
        }
    };
    let next = rng::categorical(inst.p().row(s).iter().copied(), r.random());
    AliasedSample { phi: inst.features().row(s), reward, phi_next: inst.features().row(next) }
}

/// Draws `n` i.i.d. aliased samples; sample `i` depends only on `(seed, i)`.
pub fn sample_dataset(inst: &ProblemInstance, n: usize, seed: u64) -> Dataset {
    let mut samples = Vec::with_capacity(n);
    let mut chunk = 0u64;
    while samples.len() < n {
        let mut r = rng::stream(seed, chunk);
        let take = (n - samples.len()).min(rng::CHUNK as usize);
        samples.extend((0..take).map(|_| draw(inst, &mut r)));
        chunk += 1;
    }
    Dataset { d: inst.dim(), seed, samples }
}

/// Regenerates sample `index` of `sample_dataset(inst, _, seed)`.
pub fn sample_at(inst: &ProblemInstance, seed: u64, index: u64) -> AliasedSample {
    let mut r = rng::stream(seed, index / rng::CHUNK);
    for _ in 0..index % rng::CHUNK {
        draw(inst, &mut r);
    }
    draw(inst, &mut r)
}

/// `theta = A_hat^{-1} b_hat` from sample averages.
pub fn lstd_empirical(data: &Dataset, gamma: f64) -> Result<Vector> {
    let d = data.d;
    if data.samples.is_empty() {
        return Err(Error::AMatrixSingular(0.0));
    }
    let mut a = Mat::zeros(d, d);
    let mut b = Vector::zeros(d);
    for smp in &data.samples {
        if smp.phi.len() != d || smp.phi_next.len() != d {
            return Err(Error::Dimension("sample feature length disagrees with dataset".into()));
        }
        a += &smp.phi * (&smp.phi - &smp.phi_next * gamma).transpose();
        b += &smp.phi * smp.reward;
    }
    let n = data.samples.len() as f64;
    a /= n;
    b /= n;
    let smin = linalg::sigma_min(&a);
    if smin <= A_SINGULAR_TOL {
        return Err(Error::AMatrixSingular(smin));
    }
    linalg::solve(&a, &b).ok_or(Error::AMatrixSingular(smin))
}

fn feature_key(v: impl Iterator<Item = f64>) -> Vec<i64> {
    v.map(|x| (x * 1e12).round() as i64).collect()
}

/// The Bayes model `(r_phi, P_phi)` over distinct feature values and its value function.
#[derive(Debug, Clone, Serialize)]
pub struct AbstractModel {
    pub abstract_states: Vec<Vec<f64>>,
    /// Abstract state of each concrete state.
    pub class_of: Vec<usize>,
    #[serde(serialize_with = "moments::ser_vec")]
    pub r_phi: Vector,
    #[serde(serialize_with = "moments::ser_mat")]
    pub p_phi: Mat,
    #[serde(serialize_with = "moments::ser_vec")]
    pub v_phi: Vector,
    /// `v_phi` composed with `phi`, one entry per concrete state.
    #[serde(serialize_with = "moments::ser_vec")]
    pub composed: Vector,
}

/// Groups states by feature value in order of first appearance.
pub fn feature_classes(phi: &Mat) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut index: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    let mut reps = Vec::new();
    let mut class_of = Vec::with_capacity(phi.nrows());
    for row in phi.row_iter() {
        let key = feature_key(row.iter().copied());
        let next = reps.len();
        let c = *index.entry(key).or_insert(next);
        if c == next {
            reps.push(row.iter().copied().collect());
        }
        class_of.push(c);
    }
    (reps, class_of)
}

pub fn bayes_abstraction(inst: &ProblemInstance) -> Result<AbstractModel> {
    let (reps, class_of) = feature_classes(inst.phi());
    let k = reps.len();
    let w = inst.mu().weights();
    let mut mass = vec![0.0; k];
    let mut r_phi = Vector::zeros(k);
    let mut p_phi = Mat::zeros(k, k);
    for s in 0..inst.n_states() {
        let x = class_of[s];
        mass[x] += w[s];
        r_phi[x] += w[s] * inst.r()[s];
        for t in 0..inst.n_states() {
            p_phi[(x, class_of[t])] += w[s] * inst.p()[(s, t)];
        }
    }
    for x in 0..k {
        if mass[x] <= crate::mrp::SUPPORT_THRESHOLD {
            return Err(Error::UnsupportedAbstractState(x));
        }
        r_phi[x] /= mass[x];
        let row_sum: f64 = p_phi.row(x).sum();
        for y in 0..k {
            p_phi[(x, y)] /= row_sum;
        }
    }
    let base = Mat::identity(k, k) - &p_phi * inst.gamma();
    let v_phi = linalg::solve(&base, &r_phi).expect("I - gamma P_phi is invertible");
    let composed = Vector::from_iterator(inst.n_states(), class_of.iter().map(|&x| v_phi[x]));
    Ok(AbstractModel { abstract_states: reps, class_of, r_phi, p_phi, v_phi, composed })
}

/// Sup-norm projection of the Bayes value function onto the linear class.
pub fn projected_bayes(inst: &ProblemInstance) -> Result<ProjectionResult> {
    let model = bayes_abstraction(inst)?;
    projections::project_linf(inst.phi(), &model.composed)
}

/// One atom `(probability, phi, reward, phi')` of the observation distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub probability: f64,
    pub phi: Vec<f64>,
    pub reward: f64,
    pub phi_next: Vec<f64>,
}

/// The joint law of `(phi(s), r, phi(s'))` with `s ~ mu`, merged and sorted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AliasedPopulation {
    pub atoms: Vec<Atom>,
}

pub fn population_view(inst: &ProblemInstance) -> AliasedPopulation {
    let mut merged: BTreeMap<(Vec<i64>, i64, Vec<i64>), Atom> = BTreeMap::new();
    let phi = inst.phi();
    for &s in inst.mu().support() {
        let ms = inst.mu().weights()[s];
        for (q, r) in inst.rewards()[s].outcomes() {
            for t in 0..inst.n_states() {
                let prob = ms * q * inst.p()[(s, t)];
                if prob <= 0.0 {
                    continue;
                }
                let a: Vec<f64> = phi.row(s).iter().copied().collect();
                let b: Vec<f64> = phi.row(t).iter().copied().collect();
                let key = (
                    feature_key(a.iter().copied()),
                    (r * 1e12).round() as i64,
                    feature_key(b.iter().copied()),
                );
                merged
                    .entry(key)
                    .and_modify(|atom| atom.probability += prob)
                    .or_insert(Atom { probability: prob, phi: a, reward: r, phi_next: b });
            }
        }
    }
    AliasedPopulation { atoms: merged.into_values().filter(|a| a.probability > 1e-15).collect() }
}

/// Entrywise equality of two populations within `1e-9`.
pub fn populations_equal(a: &AliasedPopulation, b: &AliasedPopulation) -> bool {
    const TOL: f64 = 1e-9;
    let close = |x: &[f64], y: &[f64]| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| (p - q).abs() <= TOL);
    a.atoms.len() == b.atoms.len()
        && a.atoms.iter().zip(&b.atoms).all(|(x, y)| {
            (x.probability - y.probability).abs() <= TOL
                && (x.reward - y.reward).abs() <= TOL
                && close(&x.phi, &y.phi)
                && close(&x.phi_next, &y.phi_next)
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_pair(mu1: f64, bernoulli: bool) -> ProblemInstance {
        let rewards = if bernoulli {
            vec![RewardModel::Bernoulli(mu1); 2]
        } else {
            vec![RewardModel::Deterministic(1.0), RewardModel::Deterministic(0.0)]
        };
        ProblemInstance::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]),
            rewards,
            0.9,
            Mat::from_element(2, 1, 1.0),
            Vector::from_row_slice(&[mu1, 1.0 - mu1]),
        )
        .unwrap()
    }

    #[test]
    fn gamma_zero_lstd_is_regression() {
        let inst = ProblemInstance::new(
            Mat::from_row_slice(2, 2, &[0.4, 0.6, 0.1, 0.9]),
            vec![RewardModel::Deterministic(0.3), RewardModel::Deterministic(-0.8)],
            0.0,
            Mat::from_row_slice(2, 1, &[0.5, 1.0]),
            Vector::from_row_slice(&[0.5, 0.5]),
        )
        .unwrap();
        let lstd = lstd_population(&inst).unwrap();
        let ls = projections::project_l2(&inst, inst.r()).unwrap();
        assert!((lstd.theta[0] - ls.linear_value.theta[0]).abs() < 1e-14);
    }

    #[test]
    fn empty_dataset_and_zero_features_are_singular() {
        let empty = Dataset { d: 1, seed: 0, samples: vec![] };
        assert!(matches!(lstd_empirical(&empty, 0.5), Err(Error::AMatrixSingular(_))));
        let zero = Dataset {
            d: 1,
            seed: 0,
            samples: vec![AliasedSample { phi: Vector::zeros(1), reward: 1.0, phi_next: Vector::zeros(1) }],
        };
        assert!(matches!(lstd_empirical(&zero, 0.5), Err(Error::AMatrixSingular(_))));
    }

    #[test]
    fn sampling_is_index_addressable() {
        let inst = step_pair(0.3, true);
        let data = sample_dataset(&inst, 2500, 11);
        assert_eq!(data.n(), 2500);
        for &i in &[0u64, 1, 1023, 1024, 2499] {
            assert_eq!(sample_at(&inst, 11, i), data.samples[i as usize]);
        }
        assert!(sample_dataset(&inst, 0, 11).samples.is_empty());
    }

    #[test]
    fn degenerate_distribution_gives_identical_samples() {
        let inst = ProblemInstance::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            vec![RewardModel::Deterministic(0.5), RewardModel::Deterministic(0.0)],
            0.5,
            Mat::from_row_slice(2, 1, &[1.0, 0.2]),
            Vector::from_row_slice(&[1.0, 0.0]),
        )
        .unwrap();
        let data = sample_dataset(&inst, 50, 3);
        assert!(data.samples.iter().all(|s| *s == data.samples[0]));
    }

    #[test]
    fn step_pair_populations_match() {
        let a = population_view(&step_pair(0.3, false));
        let b = population_view(&step_pair(0.3, true));
        assert!(populations_equal(&a, &b));
        assert!(!populations_equal(&a, &population_view(&step_pair(0.31, true))));
        assert!((a.atoms.iter().map(|x| x.probability).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bayes_single_aliased_state() {
        let inst = ProblemInstance::new(
            Mat::from_row_slice(1, 1, &[1.0]),
            vec![RewardModel::Bernoulli(0.8)],
            0.75,
            Mat::from_element(1, 1, 1.0),
            Vector::from_row_slice(&[1.0]),
        )
        .unwrap();
        let m = bayes_abstraction(&inst).unwrap();
        assert!((m.v_phi[0] - 0.8 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn bayes_averages_aliased_rewards() {
        let inst = ProblemInstance::new(
            Mat::from_row_slice(3, 3, &[0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.1, 0.1, 0.8]),
            vec![RewardModel::Deterministic(0.6), RewardModel::Deterministic(-0.2), RewardModel::Deterministic(0.0)],
            0.5,
            Mat::from_row_slice(3, 1, &[1.0, 1.0, 0.5]),
            Vector::from_row_slice(&[0.25, 0.25, 0.5]),
        )
        .unwrap();
        let m = bayes_abstraction(&inst).unwrap();
        assert_eq!(m.abstract_states.len(), 2);
        assert!((m.r_phi[0] - 0.2).abs() < 1e-15);
        assert!((m.p_phi[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bayes_rejects_unsupported_class() {
        let inst = ProblemInstance::new(
            Mat::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]),
            vec![RewardModel::Deterministic(0.0); 2],
            0.5,
            Mat::from_row_slice(2, 1, &[1.0, 0.5]),
            Vector::from_row_slice(&[1.0, 0.0]),
        )
        .unwrap();
        assert!(matches!(bayes_abstraction(&inst), Err(Error::UnsupportedAbstractState(1))));
    }
}
