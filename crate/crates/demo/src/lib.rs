//! Browser bindings for exploring the lower-bound families.
//!
//! Each export returns a JSON string; the plain `*_json` functions behind them are
//! usable (and tested) natively.

use misspec::bounds::{self, approx_ratio};
use misspec::estimators::{lstd_population, population_view, populations_equal};
use misspec::instances;
use misspec::linalg::{self, Vector};
use misspec::moments;
use misspec::projections;
use misspec::{ExtendedScalar, NormKind, ProblemInstance};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

type Outcome = Result<Value, misspec::Error>;

fn norm_pi_p(inst: &ProblemInstance) -> Result<ExtendedScalar, misspec::Error> {
    let pi = projections::projection_matrix_l2(inst)?;
    Ok(moments::weighted_operator_norm(&(pi * inst.p()), inst.mu()))
}

fn lstd_ratio(inst: &ProblemInstance, norm: NormKind) -> Result<ExtendedScalar, misspec::Error> {
    approx_ratio(inst, &lstd_population(inst)?.realized, norm)
}

fn aliased_pair(x: f64, y: f64) -> Outcome {
    let fam = instances::gen_aliased_pair_l2(x, y)?;
    let (m1, m2) = (&fam.members[0], &fam.members[1]);
    let forced = Vector::from_element(2, fam.param("forced_theta").unwrap_or(f64::NAN));
    let l2 = bounds::lstd_l2_bounds(m1)?;
    Ok(json!({
        "params": fam.params,
        "measured_norm_pi_p": norm_pi_p(m1)?,
        "measured_sigma_w": moments::compute_moments(m1)?.sigma_min_whitened,
        "same_observations": populations_equal(&population_view(m1), &population_view(m2)),
        "forced_ratio": approx_ratio(m1, &forced, NormKind::L2mu)?,
        "lstd_ratio": lstd_ratio(m1, NormKind::L2mu)?,
        "upper_bound": l2.best_split(),
        "table": bounds::regime_table(m1)?,
    }))
}

fn linf_triplet(gamma: f64, y: f64) -> Outcome {
    let fam = instances::gen_linf_triplet(gamma, y)?;
    let forced = fam
        .members
        .iter()
        .map(|m| approx_ratio(m, &Vector::zeros(2), NormKind::Linf))
        .collect::<Result<Vec<_>, _>>()?;
    let linf = match bounds::lstd_linf_bounds(&fam.members[2]) {
        Ok(b) => json!({ "sharp": b.sharp, "split": b.split }),
        Err(misspec::Error::AMatrixSingular(_)) => Value::Null,
        Err(e) => return Err(e),
    };
    Ok(json!({
        "params": fam.params,
        "measured_sigma_min_a": linalg::sigma_min(&moments::a_matrix(&fam.members[0])),
        "forced_ratio_by_reward": forced,
        "lstd_bounds": linf,
    }))
}

fn perturbed_point(t: f64, c: f64) -> Outcome {
    let m = instances::construct_at(t, c, 0)?;
    Ok(json!({
        "t": m.t,
        "c": c,
        "ratio": m.ratio,
        "norm_pi_p": m.norm_pi_p,
        "norm_pi_resolvent": m.norm_pi_resolvent,
        "sigma_w": m.sigma_w,
        "forced_zero_lower_bound": m.norm_pi_resolvent / m.sigma_w - 1.0,
        "fixed_point_certificate": m.fixed_point_certificate,
        "kernel_residual": m.kernel_residual,
        "features": m.features.as_slice(),
    }))
}

fn render(outcome: Outcome) -> Result<String, String> {
    outcome.map(|v| v.to_string()).map_err(|e| e.to_string())
}

/// The aliased `L2(mu)` pair with `||Pi_mu P||_mu = x` and whitened `sigma_min(A) = y`.
pub fn aliased_pair_json(x: f64, y: f64) -> Result<String, String> {
    render(aliased_pair(x, y))
}

/// The sup-norm triplet with `sigma_min(A) = y`.
pub fn linf_triplet_json(gamma: f64, y: f64) -> Result<String, String> {
    render(linf_triplet(gamma, y))
}

/// One point `mu(t)` of the perturbed five-state construction at kernel scale `c`.
pub fn perturbed_point_json(t: f64, c: f64) -> Result<String, String> {
    render(perturbed_point(t, c))
}

#[wasm_bindgen(js_name = aliasedPair)]
pub fn aliased_pair_js(x: f64, y: f64) -> Result<String, JsValue> {
    aliased_pair_json(x, y).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = linfTriplet)]
pub fn linf_triplet_js(gamma: f64, y: f64) -> Result<String, JsValue> {
    linf_triplet_json(gamma, y).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = perturbedPoint)]
pub fn perturbed_point_js(t: f64, c: f64) -> Result<String, JsValue> {
    perturbed_point_json(t, c).map_err(|e| JsValue::from_str(&e))
}
