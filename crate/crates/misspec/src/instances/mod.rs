//! Constructors for the lower-bound instance families, the random search for
//! instances with `A = 0`, and random instance suites for property checks.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::estimators::AliasedPopulation;
use crate::mrp::ProblemInstance;
use crate::scalar::ExtendedScalar;

mod aliased;
mod discounted;
mod five_state;
mod linf;
mod perturbed;
pub mod random;

pub use aliased::{full_support_p_for_eps, gen_aliased_pair_l2, gen_full_support_pair};
pub use discounted::gen_eps_discounted;
pub use five_state::{
    a_zero_candidate, gen_five_state_fixed, search_a_zero, FIXED_COEFFICIENTS, FIXED_MU, FIXED_OCCUPANCY, FIXED_SIGMA,
    FIXED_SUPPORT_FEATURES, FIXED_TRANSITION,
};
pub use linf::gen_linf_triplet;
pub use perturbed::{
    construct_at, gen_thm36_family, path_ratio_range, perturbed_transition, ConstructionState, PerturbedMeasurement, ETA,
};

/// Instances built together, with the parameters the construction claims.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceFamily {
    #[serde(skip)]
    pub members: Vec<ProblemInstance>,
    /// Shared observation law, for families that are indistinguishable from data.
    pub population: Option<AliasedPopulation>,
    pub params: BTreeMap<String, ExtendedScalar>,
    /// Some member has `mu` without full support at a boundary parameter.
    pub support_degenerate: bool,
}

impl InstanceFamily {
    fn new(members: Vec<ProblemInstance>) -> Self {
        InstanceFamily { members, population: None, params: BTreeMap::new(), support_degenerate: false }
    }

    fn with(mut self, name: &str, value: impl Into<ExtendedScalar>) -> Self {
        self.params.insert(name.to_string(), value.into());
        self
    }

    /// A claimed parameter as `f64` (`inf` for unbounded values).
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).map(ExtendedScalar::to_f64)
    }
}
