//! Named verification checks with machine-readable reports.
//!
//! Each check rebuilds its instances from a seed, measures every claimed quantity
//! independently, and records each predicate with both sides of the comparison.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{self, approx_ratio};
use crate::error::{Error, Result};
use crate::estimators::{self, lstd_empirical, lstd_population, populations_equal, population_view, sample_dataset};
use crate::instances::{self, random, random::DegenerateKind};
use crate::linalg::{self, Mat, Vector};
use crate::moments;
use crate::mrp::{self, ProblemInstance};
use crate::projections::{self, NormKind};
use crate::rng;
use crate::scalar::ExtendedScalar;

pub const SCHEMA: u32 = 1;

/// Report ids accepted by [`run`].
pub const IDS: &[&str] = &[
    "thm32",
    "lem33",
    "thm34",
    "thm35",
    "searchA0",
    "thm36",
    "thm41",
    "thm31",
    "thm52",
    "thm53",
    "thm54",
    "corB1",
    "appC",
    "appD",
    "decomposition",
    "consistency",
];

pub type Params = BTreeMap<String, f64>;

/// One predicate `lhs <op> rhs`, with its outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub predicate: String,
    pub lhs: ExtendedScalar,
    pub rhs: ExtendedScalar,
    pub pass: bool,
}

impl Check {
    pub fn le(predicate: impl Into<String>, lhs: impl Into<ExtendedScalar>, rhs: impl Into<ExtendedScalar>) -> Self {
        let (lhs, rhs) = (lhs.into(), rhs.into());
        Check { predicate: predicate.into(), pass: lhs.to_f64() <= rhs.to_f64(), lhs, rhs }
    }

    pub fn ge(predicate: impl Into<String>, lhs: impl Into<ExtendedScalar>, rhs: impl Into<ExtendedScalar>) -> Self {
        let (lhs, rhs) = (lhs.into(), rhs.into());
        Check { predicate: predicate.into(), pass: lhs.to_f64() >= rhs.to_f64(), lhs, rhs }
    }

    /// `|measured - expected| <= tol`, reported as `lhs = measured`, `rhs = expected`.
    pub fn close(predicate: impl Into<String>, measured: f64, expected: f64, tol: f64) -> Self {
        Check {
            predicate: predicate.into(),
            pass: (measured - expected).abs() <= tol,
            lhs: measured.into(),
            rhs: expected.into(),
        }
    }

    /// Counts of failing cases out of a total, passing when no case fails.
    pub fn count(predicate: impl Into<String>, failures: usize, total: usize) -> Self {
        Check { predicate: predicate.into(), pass: failures == 0, lhs: (failures as f64).into(), rhs: (total as f64).into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub schema: u32,
    pub theorem: String,
    pub pass: bool,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub measured: BTreeMap<String, ExtendedScalar>,
    pub tolerances: BTreeMap<String, f64>,
    /// Seconds; excluded from reproducibility comparisons.
    pub wall_time: f64,
}

impl VerificationReport {
    /// JSON with `wall_time` zeroed, for byte-for-byte comparison.
    pub fn stable_json(&self) -> String {
        let mut r = self.clone();
        r.wall_time = 0.0;
        serde_json::to_string(&r).expect("report serializes")
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

struct Builder {
    id: String,
    seed: u64,
    checks: Vec<Check>,
    measured: BTreeMap<String, ExtendedScalar>,
    tolerances: RefCell<BTreeMap<String, f64>>,
}

impl Builder {
    fn new(id: &str, seed: u64) -> Self {
        Builder { id: id.into(), seed, checks: vec![], measured: BTreeMap::new(), tolerances: RefCell::default() }
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn measure(&mut self, key: impl Into<String>, v: impl Into<ExtendedScalar>) {
        self.measured.insert(key.into(), v.into());
    }

    fn tol(&self, key: &str, v: f64) -> f64 {
        self.tolerances.borrow_mut().insert(key.into(), v);
        v
    }

    fn finish(self, wall_time: f64) -> VerificationReport {
        VerificationReport {
            schema: SCHEMA,
            pass: !self.checks.is_empty() && self.checks.iter().all(|c| c.pass),
            theorem: self.id,
            seed: self.seed,
            checks: self.checks,
            measured: self.measured,
            tolerances: self.tolerances.into_inner(),
            wall_time,
        }
    }
}

fn param(params: &Params, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn suite(seed: u64, n: usize, mut gen: impl FnMut(&mut ChaCha8Rng, usize) -> ProblemInstance) -> Vec<ProblemInstance> {
    (0..n).map(|i| gen(&mut rng::stream(seed, i as u64), i)).collect()
}

fn norm_pi_p(inst: &ProblemInstance) -> Result<ExtendedScalar> {
    let pi = projections::projection_matrix_l2(inst)?;
    Ok(moments::weighted_operator_norm(&(pi * inst.p()), inst.mu()))
}

/// Runs the report with the given id.
pub fn run(id: &str, params: &Params, seed: u64) -> Result<VerificationReport> {
    run_with_instance(id, params, seed, None)
}

/// Like [`run`], but checks `instance` in place of the generated one.
///
/// Only `thm35` measures a single fixed instance; other ids reject an override.
pub fn run_with_instance(
    id: &str,
    params: &Params,
    seed: u64,
    instance: Option<&ProblemInstance>,
) -> Result<VerificationReport> {
    if instance.is_some() && id != "thm35" {
        return Err(Error::Domain(format!("report '{id}' does not accept an instance file")));
    }
    let start = Instant::now();
    let mut b = Builder::new(id, seed);
    match id {
        "thm32" => aliased_l2(&mut b, params)?,
        "lem33" => eps_discounted(&mut b)?,
        "thm34" => pushforward_equivalence(&mut b, seed, param(params, "n", 1000.0) as usize)?,
        "thm35" => fixed_five_state(&mut b, instance)?,
        "searchA0" => a_zero_search(&mut b, seed, param(params, "max_trials", 1e6) as u64)?,
        "thm36" => perturbed_family(&mut b, params, seed)?,
        "thm41" => linf_soundness(&mut b, seed, param(params, "n", 1000.0) as usize)?,
        "thm31" => l2_soundness(&mut b, seed, param(params, "n", 1000.0) as usize)?,
        "decomposition" => decomposition(&mut b, seed, param(params, "n", 1000.0) as usize)?,
        "thm52" => linf_triplet(&mut b, params)?,
        "thm53" => bayes(&mut b, seed, param(params, "n", 200.0) as usize, false)?,
        "corB1" => bayes(&mut b, seed, param(params, "n", 200.0) as usize, true)?,
        "thm54" => full_support_pair(&mut b, params)?,
        "appC" => alpha_one(&mut b, seed, param(params, "n", 50.0) as usize)?,
        "appD" => translation(&mut b, params, seed)?,
        "consistency" => consistency(&mut b, seed, param(params, "replicates", 20.0) as usize)?,
        other => {
            return Err(Error::Domain(format!("unknown report '{other}', expected one of {}", IDS.join(", "))))
        }
    }
    Ok(b.finish(start.elapsed().as_secs_f64()))
}

fn grid_or(params: &Params, key: &str, default: &[f64]) -> Vec<f64> {
    params.get(key).map_or_else(|| default.to_vec(), |v| vec![*v])
}

fn aliased_l2(b: &mut Builder, params: &Params) -> Result<()> {
    let tol = b.tol("parameter", 1e-9);
    let lb_slack = b.tol("lower_bound", 1e-6);
    let (mut dx, mut dy, mut gap, mut factor) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    let mut pop_fail = 0;
    let xs = grid_or(params, "x", &[1.5, 2.0, 4.0, 10.0]);
    let ys = grid_or(params, "y", &[0.05, 0.1, 0.25, 0.4]);
    for &x in &xs {
        for &y in &ys {
            let fam = instances::gen_aliased_pair_l2(x, y)?;
            let m1 = &fam.members[0];
            dx = dx.max((norm_pi_p(m1)?.to_f64() - x).abs());
            dy = dy.max((moments::compute_moments(m1)?.sigma_min_whitened - y).abs());
            if !populations_equal(&population_view(m1), &population_view(&fam.members[1])) {
                pop_fail += 1;
            }
            let forced = Vector::from_element(2, fam.param("forced_theta").unwrap_or(f64::NAN));
            let alpha = approx_ratio(m1, &forced, NormKind::L2mu)?.to_f64();
            let lower = fam.param("lower_bound").unwrap_or(f64::NAN);
            gap = gap.min(alpha - lower);
            if x > 2f64.sqrt() {
                let split = bounds::lstd_l2_bounds(m1)?.split.to_f64();
                factor = factor.max(split / lower);
            }
        }
    }
    b.check(Check::le("max |measured ||Pi_mu P||_mu - x|", dx, tol));
    b.check(Check::le("max |measured whitened sigma_min - y|", dy, tol));
    b.check(Check::count("aliased members with different observation laws", pop_fail, xs.len() * ys.len()));
    b.check(Check::ge("min (forced-estimator ratio - lower bound)", gap, -lb_slack));
    if factor > 0.0 {
        b.check(Check::le("max split upper bound / lower bound for x > sqrt 2", factor, 2.0));
    }
    b.measure("max_upper_over_lower", factor);
    Ok(())
}

fn eps_discounted(b: &mut Builder) -> Result<()> {
    let tol = b.tol("a_matrix", 1e-12);
    for gamma in [0.5, 0.9] {
        for eps in [0.1, 1e-3] {
            let inst = instances::gen_eps_discounted(eps, gamma)?;
            let tag = format!("gamma={gamma}, eps={eps}");
            let a = moments::a_matrix(&inst)[(0, 0)];
            b.check(Check::close(format!("A = -gamma^2 eps ({tag})"), a, -gamma * gamma * eps, tol));
            b.check(Check::ge(format!("||Pi_mu P||_mu = inf ({tag})"), norm_pi_p(&inst)?, ExtendedScalar::Infinite));
            let mis = projections::misspecification(&inst, &inst.value_function(), NormKind::L2mu)?;
            b.check(Check::le(format!("L2(mu) misspecification ({tag})"), mis, 1e-12));
            let pf = moments::pushforward_condition(&inst);
            b.check(Check::count(format!("pushforward condition holds ({tag})"), pf.holds as usize, 1));
        }
    }
    Ok(())
}

fn pushforward_equivalence(b: &mut Builder, seed: u64, n: usize) -> Result<()> {
    let kinds = [DegenerateKind::Generic, DegenerateKind::Blocked, DegenerateKind::Balanced];
    let insts = suite(seed, n, |r, i| random::degenerate_support(r, kinds[i % 3]));
    let mut mismatch = 0;
    let mut holds = 0;
    for inst in &insts {
        let pf = moments::pushforward_condition(inst).holds;
        holds += pf as usize;
        if pf != norm_pi_p(inst)?.is_finite() {
            mismatch += 1;
        }
    }
    b.check(Check::count("pushforward condition disagrees with finiteness of ||Pi_mu P||_mu", mismatch, n));
    b.measure("instances_with_pushforward", holds as f64);
    b.measure("instances", n as f64);
    Ok(())
}

fn fixed_five_state(b: &mut Builder, given: Option<&ProblemInstance>) -> Result<()> {
    let generated;
    let inst = match given {
        Some(i) => i,
        None => {
            generated = instances::gen_five_state_fixed()?;
            &generated
        }
    };
    if inst.n_states() != 5 || inst.dim() != 1 {
        return Err(Error::Dimension(format!(
            "expected 5 states and 1 feature, found {} and {}",
            inst.n_states(),
            inst.dim()
        )));
    }
    let sigma = inst.sigma()[(0, 0)];
    b.check(Check::close("Sigma", sigma, instances::FIXED_SIGMA, b.tol("sigma", 1e-4)));
    let a = moments::a_matrix(inst)[(0, 0)].abs();
    b.check(Check::le("|A|", a, b.tol("a_matrix", 1e-6)));
    let pf = moments::pushforward_condition(inst);
    let worst = pf.residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    b.check(Check::le("max pushforward residual", worst, b.tol("pushforward", 1e-8)));
    let mu_dev = (0..3).map(|j| (inst.mu().weights()[j] - instances::FIXED_MU[j]).abs()).fold(0.0, f64::max);
    b.check(Check::le("max |re-solved mu - reference mu|", mu_dev, b.tol("mu", 1e-4)));
    let f_dev =
        (0..3).map(|j| (inst.phi()[(j, 0)] - instances::FIXED_SUPPORT_FEATURES[j]).abs()).fold(0.0, f64::max);
    b.check(Check::le("max |features on support - reference|", f_dev, b.tol("features", 1e-4)));
    let reference = Mat::from_fn(5, 5, |i, j| instances::FIXED_OCCUPANCY[i][j]);
    let dd_dev = linalg::max_abs_mat(&(mrp::occupancy_matrix(inst.mrp()) - reference));
    b.check(Check::le("max |recomputed occupancy - reference|", dd_dev, b.tol("occupancy", 1e-3)));
    b.measure("sigma", sigma);
    for j in 0..3 {
        b.measure(format!("mu{}", j + 1), inst.mu().weights()[j]);
    }
    Ok(())
}

fn a_zero_search(b: &mut Builder, seed: u64, max_trials: u64) -> Result<()> {
    let (inst, trial) = instances::search_a_zero(seed, max_trials)?;
    let a = linalg::max_abs_mat(&moments::a_matrix(&inst));
    let s = linalg::max_abs_mat(&inst.sigma());
    b.check(Check::le("|A| / |Sigma|", a / s, b.tol("a_relative", 1e-8)));
    let mu_min = inst.mu().weights().iter().take(3).copied().fold(f64::INFINITY, f64::min);
    b.check(Check::ge("min mu on states 1..3", mu_min, 0.0).strict());
    let pf = moments::pushforward_condition(&inst);
    b.check(Check::count("pushforward condition fails", !pf.holds as usize, 1));
    b.measure("trial", trial as f64);
    Ok(())
}

impl Check {
    /// Tightens a `>=`/`<=` check to strict inequality.
    fn strict(mut self) -> Self {
        self.pass = self.pass && self.lhs != self.rhs;
        self
    }
}

fn perturbed_family(b: &mut Builder, params: &Params, seed: u64) -> Result<()> {
    let kernel_tol = b.tol("kernel", 1e-9);
    let cert_tol = b.tol("fixed_point", 1e-6);
    let lb_slack = b.tol("lower_bound", 1e-3);
    for x in grid_or(params, "x", &[5.0, 10.0, 50.0]) {
        let tag = format!("x={x}");
        let (fam, m) = match instances::gen_thm36_family(x, seed) {
            Ok(hit) => hit,
            Err(Error::BisectionFailure(_)) => {
                let (lo, hi) = instances::path_ratio_range(seed);
                b.check(Check::ge(format!("largest ratio on the mu path reaches target ({tag})"), hi, x));
                b.measure(format!("path_ratio_min[{tag}]"), lo);
                b.measure(format!("path_ratio_max[{tag}]"), hi);
                continue;
            }
            Err(e) => return Err(e),
        };
        b.check(Check::close(format!("ratio ({tag})"), m.ratio, x, 0.01 * x));
        b.check(Check::le(format!("||M(psi) lambda|| ({tag})"), m.kernel_residual, kernel_tol));
        b.check(Check::ge(format!("fixed-point certificate ({tag})"), m.fixed_point_certificate, 1.0 - cert_tol));
        let zero = &fam.members[1];
        let mis = projections::misspecification(zero, &zero.value_function(), NormKind::L2mu)?;
        b.check(Check::le(format!("z=0 misspecification ({tag})"), mis, 1e-12));
        let lower = m.norm_pi_resolvent / m.sigma_w - 1.0;
        let mut worst = f64::INFINITY;
        for k in [0, 2] {
            let inst = &fam.members[k];
            worst = worst.min(approx_ratio(inst, &Vector::zeros(5), NormKind::L2mu)?.to_f64());
        }
        b.check(Check::ge(format!("forced-zero ratio ({tag})"), worst, lower - lb_slack));
        if x >= 4.0 {
            let upper = bounds::lstd_l2_bounds(&fam.members[2])?.split.to_f64();
            b.check(Check::le(format!("upper bound / forced-zero ratio ({tag})"), upper / worst, 2.0));
        }
        b.measure(format!("t[{tag}]"), m.t);
    }
    Ok(())
}

fn rel_slack(v: &Vector) -> f64 {
    1.0 + linalg::max_abs(v)
}

fn decomposition(b: &mut Builder, seed: u64, n: usize) -> Result<()> {
    let tol = b.tol("relative_residual", 1e-8);
    let insts = suite(seed, n, |r, _| random::full_support(r));
    let mut worst = 0.0f64;
    for inst in &insts {
        let res = bounds::decomposition_check_l2(inst)?;
        worst = worst.max(res / rel_slack(&inst.value_function()));
    }
    b.check(Check::le("max residual / (1 + ||v||_inf) over both identities", worst, tol));
    b.measure("instances", n as f64);
    Ok(())
}

fn l2_soundness(b: &mut Builder, seed: u64, n: usize) -> Result<()> {
    let slack = b.tol("slack", 1e-8);
    let unit = b.tol("gamma_zero", 1e-10);
    let insts = suite(seed, n, |r, _| random::full_support(r));
    let (mut v1, mut v2, mut v0, mut zeros) = (0, 0, 0, 0);
    for inst in &insts {
        let lstd = lstd_population(inst)?;
        let alpha = approx_ratio(inst, &lstd.realized, NormKind::L2mu)?;
        let l2 = bounds::lstd_l2_bounds(inst)?;
        v1 += !alpha.le_with_slack(&l2.sharp, slack) as usize;
        v2 += !l2.sharp.le_with_slack(&l2.split, slack) as usize;
        if inst.gamma() == 0.0 {
            zeros += 1;
            let off = [alpha, l2.sharp, l2.split].iter().map(|x| (x.to_f64() - 1.0).abs()).fold(0.0, f64::max);
            v0 += (off > unit) as usize;
        }
    }
    b.check(Check::count("ratio exceeds sharp bound", v1, n));
    b.check(Check::count("sharp bound exceeds split bound", v2, n));
    b.check(Check::count("gamma = 0 instance with a quantity away from 1", v0, zeros));
    b.check(Check::ge("gamma = 0 instances in suite", zeros as f64, 1.0));
    Ok(())
}

fn linf_soundness(b: &mut Builder, seed: u64, n: usize) -> Result<()> {
    let slack = b.tol("slack", 1e-8);
    let insts = suite(seed, n, |r, _| random::full_support(r));
    let (mut v1, mut v2) = (0, 0);
    let mut residual = 0.0f64;
    for inst in &insts {
        let lstd = lstd_population(inst)?;
        let alpha = approx_ratio(inst, &lstd.realized, NormKind::Linf)?;
        let lb = bounds::lstd_linf_bounds(inst)?;
        v1 += !alpha.le_with_slack(&lb.sharp.into(), slack) as usize;
        v2 += (lb.sharp > lb.split + slack) as usize;
        residual = residual.max(lb.decomposition_residual);
    }
    b.check(Check::count("sup-norm ratio exceeds sharp bound", v1, n));
    b.check(Check::count("sharp bound exceeds split bound", v2, n));
    b.check(Check::le("max sup-norm decomposition residual", residual, b.tol("residual", 1e-8)));
    Ok(())
}

fn linf_triplet(b: &mut Builder, params: &Params) -> Result<()> {
    let tol = b.tol("sigma_min_a", 1e-10);
    let lb_slack = b.tol("lower_bound", 1e-6);
    for gamma in grid_or(params, "gamma", &[0.7, 0.9]) {
        let ys = match params.get("y") {
            Some(y) => vec![*y],
            None => vec![0.001, 0.01, 1.0 - gamma],
        };
        for y in ys {
            let tag = format!("gamma={gamma}, y={y}");
            let fam = instances::gen_linf_triplet(gamma, y)?;
            let smin = linalg::sigma_min(&moments::a_matrix(&fam.members[0]));
            b.check(Check::close(format!("sigma_min(A) ({tag})"), smin, y, tol));
            let rows = fam.members.iter().map(|m| m.features().max_row_norm()).fold(0.0, f64::max);
            b.check(Check::le(format!("feature row norm ({tag})"), rows, 1.0 + mrp::ROW_NORM_TOL));
            if y <= 0.0 {
                continue;
            }
            let closed = 0.5 + gamma / y;
            let mut forced = f64::INFINITY;
            for k in [0, 2] {
                forced = forced.min(approx_ratio(&fam.members[k], &Vector::zeros(2), NormKind::Linf)?.to_f64());
            }
            b.check(Check::ge(format!("forced-zero ratio vs 1/2 + gamma/y ({tag})"), forced, closed - lb_slack));
            let lb = bounds::lstd_linf_bounds(&fam.members[2])?;
            b.check(Check::le(format!("sharp bound / forced-zero ratio ({tag})"), lb.sharp / forced, 2.0));
            b.check(Check::le(format!("split bound / forced-zero ratio ({tag})"), lb.split / forced, 2.0));
            b.measure(format!("sharp_over_closed_form[{tag}]"), lb.sharp / closed);
        }
    }
    Ok(())
}

fn bayes(b: &mut Builder, seed: u64, n: usize, projected: bool) -> Result<()> {
    let slack = b.tol("slack", 1e-8);
    let insts = suite(seed, n, |r, _| random::aliased_full_support(r));
    let mut violations = 0;
    let mut worst = 0.0f64;
    for inst in &insts {
        let cand = if projected {
            estimators::projected_bayes(inst)?.linear_value.realized
        } else {
            estimators::bayes_abstraction(inst)?.composed
        };
        let alpha = approx_ratio(inst, &cand, NormKind::Linf)?;
        let bound = 2.0 / (1.0 - inst.gamma()) + if projected { 1.0 } else { 0.0 };
        violations += !alpha.le_with_slack(&bound.into(), slack) as usize;
        worst = worst.max(alpha.to_f64() / bound);
    }
    let what = if projected { "projected abstraction" } else { "abstraction" };
    b.check(Check::count(format!("{what} ratio exceeds its bound"), violations, n));
    b.measure("max_ratio_over_bound", worst);
    Ok(())
}

fn full_support_pair(b: &mut Builder, params: &Params) -> Result<()> {
    let eps = param(params, "eps", 0.1);
    let slack = b.tol("slack", 1e-9);
    for gamma in grid_or(params, "gamma", &[0.5, 0.9]) {
        let tag = format!("gamma={gamma}");
        let fam = instances::gen_full_support_pair(gamma, instances::full_support_p_for_eps(gamma, eps))?;
        let same = populations_equal(&population_view(&fam.members[0]), &population_view(&fam.members[1]));
        b.check(Check::count(format!("observation laws differ ({tag})"), !same as usize, 1));
        let forced = Vector::from_element(2, fam.param("forced_theta").unwrap_or(f64::NAN));
        let alpha = approx_ratio(&fam.members[0], &forced, NormKind::Linf)?.to_f64();
        b.check(Check::ge(format!("forced-estimator ratio ({tag})"), alpha, 2.0 / (1.0 - gamma) - eps - slack));
    }
    Ok(())
}

fn alpha_one(b: &mut Builder, seed: u64, n: usize) -> Result<()> {
    let tol = b.tol("ratio", 1e-8);
    let blocks = suite(seed, n, |r, _| random::closed_complement(r));
    let (mut off, mut flags) = (0.0f64, 0);
    for inst in &blocks {
        let lstd = lstd_population(inst)?;
        off = off.max((approx_ratio(inst, &lstd.realized, NormKind::L2mu)?.to_f64() - 1.0).abs());
        flags += !bounds::alpha_one_predicates(inst).complement_closed as usize;
    }
    b.check(Check::le("max |ratio - 1| on closed-complement instances", off, tol));
    b.check(Check::count("closed-complement instance not flagged", flags, n));
    let tabs = suite(seed ^ 0x7ab, n, |r, _| random::tabular(r));
    let mut err = 0.0f64;
    for inst in &tabs {
        let lstd = lstd_population(inst)?;
        let v = inst.value_function();
        for &s in inst.mu().support() {
            err = err.max((lstd.realized[s] - v[s]).abs());
        }
    }
    b.check(Check::le("max |LSTD - v| on support for tabular features", err, b.tol("tabular", 1e-10)));
    Ok(())
}

fn translation(b: &mut Builder, params: &Params, seed: u64) -> Result<()> {
    let n = param(params, "n", 1000.0) as usize;
    let slack = b.tol("slack", 1e-8);
    let insts = suite(seed, n, |r, _| random::full_support(r));
    let mut violations = 0;
    for inst in &insts {
        let lstd = lstd_population(inst)?;
        let alpha = approx_ratio(inst, &lstd.realized, NormKind::Linf)?;
        let Some(split) = bounds::lstd_l2_bounds(inst)?.split.value() else { continue };
        let translated = bounds::l2_to_linf_translate(inst, split)?;
        violations += !alpha.le_with_slack(&translated.into(), slack) as usize;
    }
    b.check(Check::count("sup-norm ratio exceeds translated bound", violations, n));
    let delta = param(params, "delta", 1e-4);
    let tight = random::small_covariance(delta);
    let split = bounds::lstd_l2_bounds(&tight)?.split.to_f64();
    let translated = bounds::l2_to_linf_translate(&tight, split)?;
    let sharp = bounds::lstd_linf_bounds(&tight)?.sharp;
    b.check(Check::ge("translated bound / sharp sup-norm bound on small-covariance instance", translated / sharp, 10.0));
    b.measure("translated", translated);
    b.measure("sharp", sharp);
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn consistency(b: &mut Builder, seed: u64, replicates: usize) -> Result<()> {
    let inst = random::well_conditioned_five_state(&mut rng::stream(seed, 0));
    let theta = lstd_population(&inst)?.theta;
    let mut medians = Vec::new();
    for (k, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
        let errs = (0..replicates as u64)
            .map(|rep| {
                let data = sample_dataset(&inst, n, seed.wrapping_add(1 + rep + 1000 * k as u64));
                lstd_empirical(&data, inst.gamma()).map(|t| (t - &theta).norm())
            })
            .collect::<Result<Vec<f64>>>()?;
        let m = median(errs);
        b.measure(format!("median_error[n={n}]"), m);
        medians.push(m);
    }
    for w in medians.windows(2) {
        b.check(Check::le("median error is non-increasing in n", w[1], w[0]));
    }
    b.check(Check::le("median error at n = 100000", medians[2], b.tol("final", 0.05)));
    Ok(())
}
