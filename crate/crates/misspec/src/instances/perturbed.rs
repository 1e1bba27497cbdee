//! Perturbed-feature family on a fixed 5-state chain with two unobserved states.
//!
//! Features are `eta (lambda_1 d_4 + lambda_2 d_5 + lambda_3 psi)` where `d_k` are
//! occupancy columns and `psi` lives on the observed states. `lambda` is taken from
//! the kernel of the pushforward map `M(psi)`, and `psi` is a fixed point of the map
//! sending a perturbation to the direction that attains `||Pi_mu (I - gamma P)||_mu`.

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::moments::{self, ser_mat, ser_vec};
use crate::mrp::{self, ProblemInstance, RewardModel};
use crate::projections;
use crate::rng;

use super::InstanceFamily;

/// Feature normalization keeping every row norm at most one.
pub const ETA: f64 = 1.0 / 304.0;
const GAMMA: f64 = 0.9;
const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_ITERS: usize = 10_000;
const MULTI_STARTS: u64 = 16;
const KERNEL_TOL: f64 = 1e-8;
const PATH_CLAMP: f64 = 1e-8;
const GRID: usize = 97;
const C_SCAN: [f64; 4] = [1.0, 0.5, 0.25, 0.1];

const RAW_TRANSITION: [[f64; 5]; 5] = [
    [0.384931, 0.0, 0.0, 0.393873, 0.221196],
    [0.0864944, 0.784211, 0.0, 0.0827968, 0.046498],
    [0.575606, 0.35247, 0.0, 0.0460586, 0.0258661],
    [0.346009, 0.227495, 0.00896672, 0.267374, 0.150155],
    [0.492524, 0.0488124, 0.364725, 0.0601558, 0.033783],
];

/// The reference transition matrix with its last column replaced by the exact
/// least-squares multiple of the fourth, then rows renormalized.
///
/// The reference columns agree only to printing precision; exact proportionality
/// is what makes the pushforward map rank one.
pub fn perturbed_transition() -> Mat {
    let mut p = Mat::from_fn(5, 5, |i, j| RAW_TRANSITION[i][j]);
    let (c4, c5) = (p.column(3).into_owned(), p.column(4).into_owned());
    let zeta = c4.dot(&c5) / c5.dot(&c5);
    p.set_column(4, &(c4 / zeta));
    for i in 0..5 {
        let s = p.row(i).sum();
        p.row_mut(i).iter_mut().for_each(|x| *x /= s);
    }
    p
}

/// Intermediate quantities of one construction.
#[derive(Debug, Clone, Serialize)]
pub struct ConstructionState {
    /// Perturbation on all states, zero off the observed ones, unit Euclidean norm.
    #[serde(serialize_with = "ser_vec")]
    pub psi: Vector,
    /// Kernel vector with `lambda_1 = 1`, `lambda_3 = c`, before scaling by `eta`.
    #[serde(serialize_with = "ser_vec")]
    pub lambda: Vector,
    #[serde(serialize_with = "ser_mat")]
    pub m_matrix: Mat,
    #[serde(serialize_with = "ser_mat")]
    pub n_matrix: Mat,
    pub c: f64,
    pub eta: f64,
    /// `|lambda_2 - closed form|`, or `None` when the closed form is ill-conditioned.
    pub closed_form_gap: Option<f64>,
}

/// A construction at `mu(t) = (t, (1 - t)/2, (1 - t)/2, 0, 0)` with its certificates.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbedMeasurement {
    pub t: f64,
    pub state: ConstructionState,
    /// `||Pi_mu P||_mu / sigma_min(Sigma^{-1/2} A Sigma^{-1/2})`.
    pub ratio: f64,
    pub norm_pi_p: f64,
    pub norm_pi_resolvent: f64,
    pub sigma_w: f64,
    /// `||Pi (I - gamma P) psi||_mu / (||psi||_mu ||Pi (I - gamma P)||_mu)`.
    pub fixed_point_certificate: f64,
    pub kernel_residual: f64,
    pub iterations: usize,
    #[serde(serialize_with = "ser_vec")]
    pub features: Vector,
}

struct Chain {
    p: Mat,
    base: Mat,
    d4: Vector,
    d5: Vector,
}

impl Chain {
    fn new() -> Self {
        let p = perturbed_transition();
        let base = Mat::identity(5, 5) - &p * GAMMA;
        let dd = linalg::inverse(&base).expect("I - gamma P is invertible for gamma < 1");
        Chain { d4: dd.column(3).into_owned(), d5: dd.column(4).into_owned(), p, base }
    }
}

fn path_mu(t: f64) -> Vector {
    Vector::from_row_slice(&[t, (1.0 - t) / 2.0, (1.0 - t) / 2.0, 0.0, 0.0])
}

fn embed(psi_bar: &Vector) -> Vector {
    Vector::from_row_slice(&[psi_bar[0], psi_bar[1], psi_bar[2], 0.0, 0.0])
}

fn kernel(chain: &Chain, mu: &Vector, psi: &Vector, c: f64) -> Result<(Vector, Mat, Option<f64>)> {
    let d = Mat::from_diagonal(mu);
    let mut left = Mat::zeros(2, 5);
    left.set_row(0, &chain.p.column(3).transpose());
    left.set_row(1, &chain.p.column(4).transpose());
    let right = Mat::from_columns(&[chain.d4.clone(), chain.d5.clone(), psi.clone()]);
    let m = left * &d * right;
    let ker = linalg::null_space(&m, KERNEL_TOL);
    if ker.ncols() != 2 {
        return Err(Error::Invariant(format!("pushforward map has kernel dimension {}, expected 2", ker.ncols())));
    }
    let sel = Mat::from_row_slice(2, 2, &[ker[(0, 0)], ker[(0, 1)], ker[(2, 0)], ker[(2, 1)]]);
    let coef = linalg::solve(&sel, &Vector::from_row_slice(&[1.0, c]))
        .ok_or_else(|| Error::Invariant("kernel does not admit lambda_1 = 1, lambda_3 = c".into()))?;
    let lambda = ker * coef;

    let p4 = chain.p.column(3);
    let ip = |v: &Vector| p4.component_mul(mu).dot(v);
    let b2 = ip(&chain.d5);
    let gap = (b2.abs() > 1e-10).then(|| {
        let closed = -(ip(&chain.d4) + c * ip(psi)) / b2;
        (lambda[1] - closed).abs()
    });
    Ok((lambda, m, gap))
}

fn features(chain: &Chain, lambda: &Vector, psi: &Vector) -> Vector {
    (&chain.d4 * lambda[0] + &chain.d5 * lambda[1] + psi * lambda[2]) * ETA
}

fn projection(phi: &Vector, mu: &Vector) -> Result<Mat> {
    let sigma = phi.component_mul(mu).dot(phi);
    if sigma <= mrp::SIGMA_FLOOR * ETA * ETA {
        return Err(Error::SigmaSingular(sigma));
    }
    Ok(phi * (phi.component_mul(mu)).transpose() / sigma)
}

/// `D^{1/2} Pi (I - gamma P) D^{-1/2}` with the pseudo-inverse off the support.
fn whitened_operator(chain: &Chain, pi: &Mat, mu: &Vector) -> Mat {
    let sq = mu.map(f64::sqrt);
    let isq = mu.map(|m| if m > mrp::SUPPORT_THRESHOLD { 1.0 / m.sqrt() } else { 0.0 });
    Mat::from_diagonal(&sq) * pi * &chain.base * Mat::from_diagonal(&isq)
}

struct Step {
    next: Vector,
    lambda: Vector,
    m: Mat,
    n: Mat,
    gap: Option<f64>,
}

fn step(chain: &Chain, mu: &Vector, c: f64, psi_bar: &Vector) -> Result<Step> {
    let psi = embed(psi_bar);
    let (lambda, m, gap) = kernel(chain, mu, &psi, c)?;
    let phi = features(chain, &lambda, &psi);
    let pi = projection(&phi, mu)?;
    let n = whitened_operator(chain, &pi, mu);
    let (y, _) = linalg::top_right_singular(&n);
    let isq = mu.map(|m| if m > mrp::SUPPORT_THRESHOLD { 1.0 / m.sqrt() } else { 0.0 });
    let x = y.component_mul(&isq);
    let bar = Vector::from_row_slice(&[x[0], x[1], x[2]]);
    let norm = bar.norm();
    if norm == 0.0 {
        return Err(Error::FixedPointDivergence("maximizer vanishes on the observed states".into()));
    }
    Ok(Step { next: linalg::canonical_sign(bar / norm, 1e-12), lambda, m, n, gap })
}

fn iterate(chain: &Chain, mu: &Vector, c: f64, start: Vector) -> Result<(Vector, usize)> {
    let mut psi = start;
    for k in 0..FIXED_POINT_ITERS {
        let next = step(chain, mu, c, &psi)?.next;
        if (&next - &psi).norm() <= FIXED_POINT_TOL {
            return Ok((next, k + 1));
        }
        psi = next;
    }
    Err(Error::FixedPointDivergence(format!("no convergence in {FIXED_POINT_ITERS} iterations")))
}

fn fixed_point(chain: &Chain, mu: &Vector, c: f64, seed: u64) -> Result<(Vector, usize)> {
    let mut last = match iterate(chain, mu, c, Vector::from_row_slice(&[1.0, 0.0, 0.0])) {
        Ok(hit) => return Ok(hit),
        Err(e) => e,
    };
    let mut r = rng::stream(seed, 0);
    for _ in 0..MULTI_STARTS {
        let v = Vector::from_fn(3, |_, _| StandardNormal.sample(&mut r));
        match iterate(chain, mu, c, v.normalize()) {
            Ok(hit) => return Ok(hit),
            Err(e) => last = e,
        }
    }
    Err(Error::FixedPointDivergence(format!("{MULTI_STARTS} restarts failed, last error: {last}")))
}

/// Runs the construction at path parameter `t` and kernel scale `c`.
pub fn construct_at(t: f64, c: f64, seed: u64) -> Result<PerturbedMeasurement> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("t = {t} must lie in (0, 1)")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("c = {c} must be positive")));
    }
    let chain = Chain::new();
    let mu = path_mu(t);
    let (psi_bar, iterations) = fixed_point(&chain, &mu, c, seed)?;
    let st = step(&chain, &mu, c, &psi_bar)?;
    let psi = embed(&psi_bar);
    let phi = features(&chain, &st.lambda, &psi);

    let inst = member(&chain, &phi, &mu, &st.lambda, 0.0)?;
    let pi = projections::projection_matrix_l2(&inst)?;
    let w = mrp::OfflineDistribution::new(mu.clone())?;
    let norm_pi_p = moments::weighted_operator_norm(&(&pi * &chain.p), &w).to_f64();
    let pr = &pi * &chain.base;
    let norm_pi_resolvent = moments::weighted_operator_norm(&pr, &w).to_f64();
    let sigma_w = moments::compute_moments(&inst)?.sigma_min_whitened;
    let certificate = mrp::weighted_norm(&(&pr * &psi), &w) / (mrp::weighted_norm(&psi, &w) * norm_pi_resolvent);
    let kernel_residual = (&st.m * &st.lambda).norm();
    Ok(PerturbedMeasurement {
        t,
        ratio: norm_pi_p / sigma_w,
        norm_pi_p,
        norm_pi_resolvent,
        sigma_w,
        fixed_point_certificate: certificate,
        kernel_residual,
        iterations,
        features: phi,
        state: ConstructionState {
            psi,
            lambda: st.lambda,
            m_matrix: st.m,
            n_matrix: st.n,
            c,
            eta: ETA,
            closed_form_gap: st.gap,
        },
    })
}

fn member(chain: &Chain, phi: &Vector, mu: &Vector, lambda: &Vector, z: f64) -> Result<ProblemInstance> {
    let mut rewards = vec![RewardModel::Deterministic(0.0); 5];
    rewards[3] = RewardModel::Deterministic(z * lambda[0] * ETA);
    rewards[4] = RewardModel::Deterministic(z * lambda[1] * ETA);
    ProblemInstance::new(chain.p.clone(), rewards, GAMMA, Mat::from_column_slice(5, 1, phi.as_slice()), mu.clone())
}

fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Constructions on a logit-spaced grid of `t` in `[1e-8, 1 - 1e-8]`, keyed by logit.
fn path_grid(c: f64, seed: u64) -> Vec<(f64, PerturbedMeasurement)> {
    let edge = ((1.0 - PATH_CLAMP) / PATH_CLAMP).ln();
    (0..GRID)
        .filter_map(|k| {
            let s = -edge + 2.0 * edge * k as f64 / (GRID - 1) as f64;
            construct_at(logistic(s), c, seed).ok().map(|m| (s, m))
        })
        .collect()
}

/// Smallest and largest ratio over the search grid of `t` and `c`.
pub fn path_ratio_range(seed: u64) -> (f64, f64) {
    C_SCAN
        .iter()
        .flat_map(|&c| path_grid(c, seed))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, m)| (lo.min(m.ratio), hi.max(m.ratio)))
}

/// Searches `mu(t)` and `c` for a construction with ratio `x`, returning the three
/// members with rewards `z * eta * (lambda_1, lambda_2)` on states 4 and 5 for
/// `z = -1, 0, 1`.
///
/// Fails with [`Error::BisectionFailure`] when no scanned `c` brackets `x`; the
/// message reports the range of ratios attained.
pub fn gen_thm36_family(x: f64, seed: u64) -> Result<(InstanceFamily, PerturbedMeasurement)> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("x = {x} must be positive and finite")));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in C_SCAN {
        let eval = |s: f64| construct_at(logistic(s), c, seed).ok();
        let grid = path_grid(c, seed);
        for (_, m) in &grid {
            lo = lo.min(m.ratio);
            hi = hi.max(m.ratio);
        }
        let Some(k) = grid.windows(2).position(|w| (w[0].1.ratio - x) * (w[1].1.ratio - x) <= 0.0) else {
            continue;
        };
        let (mut a, mut fa) = (grid[k].0, grid[k].1.ratio - x);
        let (mut b, mut best) = (grid[k + 1].0, grid[k + 1].1.clone());
        for _ in 0..200 {
            if (best.ratio - x).abs() <= 1e-6 * x {
                break;
            }
            let mid = 0.5 * (a + b);
            let Some(m) = eval(mid) else { break };
            if (m.ratio - x) * fa <= 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = m.ratio - x;
            }
            best = m;
        }
        if (best.ratio - x).abs() > 0.01 * x {
            continue;
        }
        let chain = Chain::new();
        let mu = path_mu(best.t);
        let members = [-1.0, 0.0, 1.0]
            .into_iter()
            .map(|z| member(&chain, &best.features, &mu, &best.state.lambda, z))
            .collect::<Result<Vec<_>>>()?;
        let fam = InstanceFamily::new(members)
            .with("x", x)
            .with("ratio", best.ratio)
            .with("t", best.t)
            .with("c", c)
            .with("eta", ETA)
            .with("gamma", GAMMA)
            .with("lower_bound", best.norm_pi_resolvent / best.sigma_w - 1.0)
            .with("fixed_point_certificate", best.fixed_point_certificate)
            .with("kernel_residual", best.kernel_residual);
        return Ok((fam, best));
    }
    Err(Error::BisectionFailure(format!(
        "ratio ranges over [{lo:.6}, {hi:.6}] along the mu path for c in {C_SCAN:?}; target {x} is not bracketed"
    )))
}
