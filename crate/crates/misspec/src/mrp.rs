//! Finite discounted Markov reward processes, feature maps and offline distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// Rows and weights are accepted if they sum to one within this tolerance, then renormalized.
pub const INGEST_TOL: f64 = 1e-3;
/// Invariant tolerance on row sums after construction.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// `mu(s) > SUPPORT_THRESHOLD` defines the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-14;
/// Slack on the feature row-norm bound.
pub const ROW_NORM_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue of the feature covariance.
pub const SIGMA_FLOOR: f64 = 1e-10;

// Sums this close to one are left alone so that renormalized data is a fixed point.
const RENORM_SKIP: f64 = 64.0 * f64::EPSILON;

fn normalize(values: &mut [f64], what: &str) -> Result<()> {
    if let Some(x) = values.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::Invariant(format!("{what} has invalid entry {x}")));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > INGEST_TOL {
        return Err(Error::Invariant(format!("{what} sums to {sum}, not 1")));
    }
    if (sum - 1.0).abs() > RENORM_SKIP {
        values.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(())
}

/// A finite discounted Markov reward process `(P, r, gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mrp {
    transition: Mat,
    mean_reward: Vector,
    gamma: f64,
}

impl Mrp {
    /// Validates and renormalizes the transition rows.
    pub fn new(transition: Mat, mean_reward: Vector, gamma: f64) -> Result<Self> {
        let s = transition.nrows();
        if s == 0 || transition.ncols() != s {
            return Err(Error::Dimension(format!(
                "transition must be square and nonempty, got {}x{}",
                transition.nrows(),
                transition.ncols()
            )));
        }
        if mean_reward.len() != s {
            return Err(Error::Dimension(format!("reward has length {}, expected {s}", mean_reward.len())));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Invariant(format!("gamma = {gamma} is outside [0, 1)")));
        }
        if let Some(r) = mean_reward.iter().find(|r| !r.is_finite() || r.abs() > 1.0) {
            return Err(Error::Invariant(format!("mean reward {r} is outside [-1, 1]")));
        }
        let mut transition = transition;
        for i in 0..s {
            let mut row: Vec<f64> = transition.row(i).iter().copied().collect();
            normalize(&mut row, &format!("transition row {}", i + 1))?;
            for (j, x) in row.into_iter().enumerate() {
                transition[(i, j)] = x;
            }
        }
        Ok(Mrp { transition, mean_reward, gamma })
    }

    pub fn n_states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &Mat {
        &self.transition
    }

    pub fn mean_reward(&self) -> &Vector {
        &self.mean_reward
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `I - gamma P`.
    pub fn resolvent_base(&self) -> Mat {
        Mat::identity(self.n_states(), self.n_states()) - &self.transition * self.gamma
    }
}

/// Per-state reward law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", content = "param", rename_all = "lowercase")]
pub enum RewardModel {
    Deterministic(f64),
    /// Emits 1 with probability `p`, else 0.
    Bernoulli(f64),
}

impl RewardModel {
    pub fn mean(&self) -> f64 {
        match *self {
            RewardModel::Deterministic(v) => v,
            RewardModel::Bernoulli(p) => p,
        }
    }

    /// Finite support as `(probability, value)` pairs with positive probability.
    pub fn outcomes(&self) -> Vec<(f64, f64)> {
        match *self {
            RewardModel::Deterministic(v) => vec![(1.0, v)],
            RewardModel::Bernoulli(p) => [(p, 1.0), (1.0 - p, 0.0)]
                .into_iter()
                .filter(|(q, _)| *q > 0.0)
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            RewardModel::Deterministic(v) if v.is_finite() && v.abs() <= 1.0 => Ok(()),
            RewardModel::Bernoulli(p) if (0.0..=1.0).contains(&p) => Ok(()),
            other => Err(Error::Invariant(format!("invalid reward law {other:?}"))),
        }
    }
}

/// Feature matrix `Phi` with one row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    matrix: Mat,
}

impl FeatureMap {
    pub fn new(matrix: Mat) -> Result<Self> {
        if matrix.ncols() == 0 {
            return Err(Error::Dimension("feature dimension must be positive".into()));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invariant("features must be finite".into()));
        }
        Ok(FeatureMap { matrix })
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, s: usize) -> Vector {
        self.matrix.row(s).transpose()
    }

    pub fn max_row_norm(&self) -> f64 {
        self.matrix.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
    }

    /// Whether every row has Euclidean norm at most one.
    pub fn is_bounded(&self) -> bool {
        self.max_row_norm() <= 1.0 + ROW_NORM_TOL
    }
}

/// State distribution `mu` of the offline data.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDistribution {
    weights: Vector,
    support: Vec<usize>,
}

impl OfflineDistribution {
    pub fn new(weights: Vector) -> Result<Self> {
        let mut w: Vec<f64> = weights.iter().copied().collect();
        normalize(&mut w, "mu")?;
        let weights = Vector::from_vec(w);
        let support = (0..weights.len()).filter(|&s| weights[s] > SUPPORT_THRESHOLD).collect();
        Ok(OfflineDistribution { weights, support })
    }

    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn unsupported(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|s| !self.support.contains(s)).collect()
    }

    pub fn is_full_support(&self) -> bool {
        self.support.len() == self.weights.len()
    }

    /// The diagonal matrix `D`.
    pub fn diag(&self) -> Mat {
        Mat::from_diagonal(&self.weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// The triple `(M, mu, phi)` together with per-state reward laws.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    mrp: Mrp,
    rewards: Vec<RewardModel>,
    features: FeatureMap,
    mu: OfflineDistribution,
}

impl ProblemInstance {
    /// Builds an instance and enforces the feature row-norm bound and invertibility of `Sigma`.
    pub fn new(transition: Mat, rewards: Vec<RewardModel>, gamma: f64, features: Mat, mu: Vector) -> Result<Self> {
        let inst = Self::new_unnormalized(transition, rewards, gamma, features, mu)?;
        if !inst.features.is_bounded() {
            return Err(Error::Invariant(format!(
                "feature row norm {} exceeds 1",
                inst.features.max_row_norm()
            )));
        }
        Ok(inst)
    }

    /// As [`ProblemInstance::new`] but without the feature row-norm bound.
    pub fn new_unnormalized(
        transition: Mat,
        rewards: Vec<RewardModel>,
        gamma: f64,
        features: Mat,
        mu: Vector,
    ) -> Result<Self> {
        let s = transition.nrows();
        if rewards.len() != s {
            return Err(Error::Dimension(format!("{} reward laws for {s} states", rewards.len())));
        }
        if features.nrows() != s {
            return Err(Error::Dimension(format!("{} feature rows for {s} states", features.nrows())));
        }
        if mu.len() != s {
            return Err(Error::Dimension(format!("mu has length {}, expected {s}", mu.len())));
        }
        for r in &rewards {
            r.validate()?;
        }
        let mean = Vector::from_iterator(s, rewards.iter().map(RewardModel::mean));
        let mrp = Mrp::new(transition, mean, gamma)?;
        let features = FeatureMap::new(features)?;
        let mu = OfflineDistribution::new(mu)?;
        let inst = ProblemInstance { mrp, rewards, features, mu };
        let lmin = linalg::sym_eigenvalues(&inst.sigma())[0];
        if lmin <= SIGMA_FLOOR {
            return Err(Error::SigmaSingular(lmin));
        }
        Ok(inst)
    }

    /// Same transition, features and `mu` with different reward laws.
    pub fn with_rewards(&self, rewards: Vec<RewardModel>) -> Result<Self> {
        Self::new_unnormalized(
            self.mrp.transition.clone(),
            rewards,
            self.mrp.gamma,
            self.features.matrix.clone(),
            self.mu.weights.clone(),
        )
    }

    pub fn mrp(&self) -> &Mrp {
        &self.mrp
    }

    pub fn rewards(&self) -> &[RewardModel] {
        &self.rewards
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn mu(&self) -> &OfflineDistribution {
        &self.mu
    }

    pub fn n_states(&self) -> usize {
        self.mrp.n_states()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn gamma(&self) -> f64 {
        self.mrp.gamma
    }

    pub fn p(&self) -> &Mat {
        &self.mrp.transition
    }

    pub fn r(&self) -> &Vector {
        &self.mrp.mean_reward
    }

    pub fn phi(&self) -> &Mat {
        &self.features.matrix
    }

    pub fn d(&self) -> Mat {
        self.mu.diag()
    }

    /// `Sigma = Phi^T D Phi`.
    pub fn sigma(&self) -> Mat {
        let phi = self.phi();
        phi.transpose() * self.d() * phi
    }

    pub fn value_function(&self) -> Vector {
        value_function(&self.mrp)
    }
}

/// `v = (I - gamma P)^{-1} r`.
pub fn value_function(mrp: &Mrp) -> Vector {
    linalg::solve(&mrp.resolvent_base(), &mrp.mean_reward).expect("I - gamma P is invertible for gamma < 1")
}

/// The discounted occupancy matrix `(I - gamma P)^{-1}`.
pub fn occupancy_matrix(mrp: &Mrp) -> Mat {
    let s = mrp.n_states();
    linalg::solve_mat(&mrp.resolvent_base(), &Mat::identity(s, s)).expect("I - gamma P is invertible for gamma < 1")
}

/// `(sum_s mu(s) v(s)^2)^{1/2}`.
pub fn weighted_norm(v: &Vector, mu: &OfflineDistribution) -> f64 {
    mu.support().iter().map(|&s| mu.weights()[s] * v[s] * v[s]).sum::<f64>().sqrt()
}

pub fn sup_norm(v: &Vector) -> f64 {
    linalg::max_abs(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mrp(p: &[f64], r: &[f64], gamma: f64) -> Mrp {
        let s = r.len();
        Mrp::new(Mat::from_row_slice(s, s, p), Vector::from_row_slice(r), gamma).unwrap()
    }

    #[test]
    fn absorbing_pair_value() {
        let m = mrp(&[0.0, 1.0, 0.0, 1.0], &[1.0, 0.0], 0.9);
        let v = value_function(&m);
        assert!((v[0] - 1.0).abs() < 1e-14 && v[1].abs() < 1e-14);
    }

    #[test]
    fn zero_reward_gives_zero_value() {
        let m = mrp(&[0.2, 0.8, 0.5, 0.5], &[0.0, 0.0], 0.7);
        assert_eq!(sup_norm(&value_function(&m)), 0.0);
    }

    #[test]
    fn self_loop_geometric() {
        for &(c, g) in &[(1.0, 0.9), (-0.5, 0.3), (0.25, 0.0)] {
            let v = value_function(&mrp(&[1.0], &[c], g));
            assert!((v[0] - c / (1.0 - g)).abs() < 1e-12);
        }
        assert!((sup_norm(&value_function(&mrp(&[1.0], &[1.0], 0.9))) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn occupancy_identity_at_zero_discount() {
        let m = mrp(&[0.2, 0.8, 0.5, 0.5], &[0.0, 0.0], 0.0);
        assert!(linalg::max_abs_mat(&(occupancy_matrix(&m) - Mat::identity(2, 2))) == 0.0);
    }

    #[test]
    fn occupancy_rows_sum_to_horizon() {
        let m = mrp(&[0.1, 0.6, 0.3, 0.0, 0.5, 0.5, 0.9, 0.05, 0.05], &[0.0; 3], 0.8);
        let dd = occupancy_matrix(&m);
        for row in dd.row_iter() {
            assert!((row.sum() - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn norms() {
        let mu = OfflineDistribution::new(Vector::from_row_slice(&[0.5, 0.5])).unwrap();
        assert!((weighted_norm(&Vector::from_row_slice(&[1.0, 0.0]), &mu) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((weighted_norm(&Vector::from_row_slice(&[3.0, 4.0]), &mu) - 12.5f64.sqrt()).abs() < 1e-14);
        let degenerate = OfflineDistribution::new(Vector::from_row_slice(&[1.0, 0.0])).unwrap();
        assert_eq!(weighted_norm(&Vector::from_row_slice(&[2.0, 1e9]), &degenerate), 2.0);
        assert_eq!(sup_norm(&Vector::from_row_slice(&[1.0, -2.0])), 2.0);
        assert_eq!(sup_norm(&Vector::zeros(3)), 0.0);
    }

    #[test]
    fn ingestion_renormalizes_truncated_rows() {
        let m = Mrp::new(Mat::from_row_slice(1, 1, &[0.9995]), Vector::zeros(1), 0.5).unwrap();
        assert_eq!(m.transition()[(0, 0)], 1.0);
        assert!(Mrp::new(Mat::from_row_slice(1, 1, &[0.99]), Vector::zeros(1), 0.5).is_err());
        assert!(Mrp::new(Mat::from_row_slice(1, 1, &[1.0]), Vector::zeros(1), 1.0).is_err());
        assert!(Mrp::new(Mat::from_row_slice(1, 1, &[1.0]), Vector::from_row_slice(&[1.5]), 0.5).is_err());
    }

    #[test]
    fn support_and_sigma_checks() {
        let mu = OfflineDistribution::new(Vector::from_row_slice(&[1.0, 1e-15, 0.0])).unwrap();
        assert_eq!(mu.support(), &[0]);
        let p = Mat::identity(2, 2);
        let bad = ProblemInstance::new(
            p.clone(),
            vec![RewardModel::Deterministic(0.0); 2],
            0.5,
            Mat::from_row_slice(2, 1, &[0.0, 1.0]),
            Vector::from_row_slice(&[1.0, 0.0]),
        );
        assert!(matches!(bad, Err(Error::SigmaSingular(_))));
        let big = ProblemInstance::new(
            p.clone(),
            vec![RewardModel::Deterministic(0.0); 2],
            0.5,
            Mat::from_row_slice(2, 1, &[2.0, 1.0]),
            Vector::from_row_slice(&[0.5, 0.5]),
        );
        assert!(matches!(big, Err(Error::Invariant(_))));
        let ok = ProblemInstance::new_unnormalized(
            p,
            vec![RewardModel::Bernoulli(0.3); 2],
            0.5,
            Mat::from_row_slice(2, 1, &[2.0, 1.0]),
            Vector::from_row_slice(&[0.5, 0.5]),
        )
        .unwrap();
        assert_eq!(ok.r()[0], 0.3);
        assert!(!ok.features().is_bounded());
    }
}
