//! Minimum-norm lift from content caching probabilities back to a state
//! distribution.
//!
//! `C_s eta = lambda` underdetermines `eta` whenever there are more states than
//! contents; any null-space component keeping `eta` a probability vector is
//! admissible. The canonical choice here is the minimum-Euclidean-norm feasible
//! point, computed by Dykstra's alternating projections between the affine set
//! `{C_s eta = lambda}` and the nonnegative orthant, starting from the origin.
//! The Gram matrix `C_s C_s^T` is `(a - b) I + b J` with `a = binom(N_c-1, L-1)`
//! and `b = binom(N_c-2, L-2)`, so its inverse is applied in closed form.

use super::{cs_apply, cs_t_apply, CCPVector, SCPVector};
use crate::error::{Error, Result};
use crate::state_space::{binomial, StateSpace};

const FEAS_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 100_000;

/// Result of the lift, with a conservative uniqueness flag: the lift is marked
/// unique only when the null space is trivial or the target is a 0/1 vertex.
#[derive(Debug, Clone)]
pub struct ScpFromCcp {
    pub eta: SCPVector,
    pub unique: bool,
    pub iterations: usize,
}

/// Applies `(C_s C_s^T)^{-1}` in closed form.
fn gram_inverse_apply(space: &StateSpace, y: &[f64]) -> Vec<f64> {
    let n_c = space.n_contents();
    let l = space.cache_size();
    let a = binomial(n_c - 1, l - 1) as f64;
    let b = if l >= 2 {
        binomial(n_c - 2, l - 2) as f64
    } else {
        0.0
    };
    let shift = b / (a - b + b * n_c as f64);
    let total: f64 = y.iter().sum();
    y.iter().map(|&v| (v - shift * total) / (a - b)).collect()
}

/// Projection onto the affine set `{x : C_s x = lambda}`.
fn project_affine(space: &StateSpace, x: &[f64], lambda: &[f64]) -> Vec<f64> {
    let mut residual = cs_apply(space, x);
    for (r, t) in residual.iter_mut().zip(lambda) {
        *r -= t;
    }
    let corr = cs_t_apply(space, &gram_inverse_apply(space, &residual));
    x.iter().zip(&corr).map(|(a, c)| a - c).collect()
}

/// Minimum-norm state distribution reproducing the given content probabilities.
pub fn scp_from_ccp(space: &StateSpace, lambda: &CCPVector) -> Result<ScpFromCcp> {
    let n_c = space.n_contents();
    if lambda.len() != n_c {
        return Err(Error::DimensionMismatch {
            expected: n_c,
            got: lambda.len(),
        });
    }
    let target = lambda.as_slice();
    let mass: f64 = target.iter().sum();
    if (mass - space.cache_size() as f64).abs() > 1e-9 {
        return Err(Error::Infeasible(format!(
            "CCP mass {mass} differs from the cache size {}",
            space.cache_size()
        )));
    }
    if target.iter().any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v)) {
        return Err(Error::Infeasible("CCP entries outside [0, 1]".into()));
    }

    let n_s = space.n_states();
    let mut x = vec![0.0; n_s];
    let mut correction = vec![0.0; n_s];
    let mut iterations = 0;
    for iter in 0..MAX_ITERS {
        iterations = iter + 1;
        let y = project_affine(space, &x, target);
        // orthant projection with Dykstra's correction
        let mut max_neg = 0.0f64;
        for i in 0..n_s {
            let v = y[i] + correction[i];
            let clipped = v.max(0.0);
            correction[i] = v - clipped;
            x[i] = clipped;
            max_neg = max_neg.max(-y[i]);
        }
        if max_neg <= FEAS_TOL {
            let feasible: f64 = cs_apply(space, &y)
                .iter()
                .zip(target)
                .fold(0.0, |m, (a, b)| m.max((a - b).abs()));
            if feasible <= FEAS_TOL {
                let eta: Vec<f64> = y.into_iter().map(|v| v.max(0.0)).collect();
                return Ok(ScpFromCcp {
                    eta: SCPVector::from_raw(eta),
                    unique: is_unique(space, target),
                    iterations,
                });
            }
        }
    }
    Err(Error::Infeasible(format!(
        "no simplex-consistent state distribution found after {iterations} iterations"
    )))
}

fn is_unique(space: &StateSpace, lambda: &[f64]) -> bool {
    if space.n_states() == space.n_contents() {
        return true;
    }
    lambda
        .iter()
        .all(|&v| v.abs() <= 1e-9 || (v - 1.0).abs() <= 1e-9)
}
