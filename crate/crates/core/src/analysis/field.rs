//! Field sampling over the SCP simplex for three-state spaces.
//!
//! Produces plot-ready quiver data: the field `u` at each grid point of the
//! simplex together with the one-step hit-probability delta for the next
//! request. Only spaces with exactly three states are supported, matching the
//! three-coordinate output rows.

use super::{hit_prob_delta, instantaneous_stf, SCPVector};
use crate::error::{Error, Result};
use crate::popularity::PopularityVector;
use crate::schemes::{self, LruConditionalTable, SchemeSpec};
use crate::state_space::StateSpace;

/// One grid sample: the SCP point, the field there, and the delta.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub eta: [f64; 3],
    pub u: [f64; 3],
    pub d_gamma: f64,
}

/// Samples the instantaneous field on a simplex grid with step `grid_step`.
///
/// The transition matrix is built from `upsilon_n` and the prediction (the
/// accurate choice is `upsilon_next`); the delta weighs the field against
/// `upsilon_next`.
pub fn field_grid(
    scheme: &SchemeSpec,
    space: &StateSpace,
    upsilon_n: &PopularityVector,
    upsilon_next: &PopularityVector,
    prediction: Option<&PopularityVector>,
    lru_cond: Option<&LruConditionalTable>,
    grid_step: f64,
) -> Result<Vec<FieldSample>> {
    if space.n_states() != 3 {
        return Err(Error::InvalidParameter(format!(
            "field sampling needs a 3-state space, got {} states",
            space.n_states()
        )));
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::InvalidRange(format!("grid step {grid_step}")));
    }
    let prediction = prediction.or(Some(upsilon_next));
    let theta = schemes::overall_transition(scheme, space, upsilon_n, prediction, lru_cond)?;

    let steps = (1.0 / grid_step).round() as usize;
    let mut samples = Vec::new();
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let e1 = i as f64 * grid_step;
            let e2 = j as f64 * grid_step;
            let e3 = (1.0 - e1 - e2).max(0.0);
            let eta = SCPVector::new(vec![e1, e2, e3])?;
            let u = instantaneous_stf(&theta, &eta)?;
            let d_gamma = hit_prob_delta(upsilon_next, space, &u)?;
            samples.push(FieldSample {
                eta: [e1, e2, e3],
                u: [u.as_slice()[0], u.as_slice()[1], u.as_slice()[2]],
                d_gamma,
            });
        }
    }
    Ok(samples)
}
