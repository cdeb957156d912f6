//! State-transition-field analysis.
//!
//! The state caching probability (SCP) vector `eta` lives on the simplex over
//! cache states; the content caching probability (CCP) vector is its image
//! `lambda = C_s eta` under the cache-state matrix. One request-and-replacement
//! round maps `eta` to `Theta eta`, and the field
//!
//! ```text
//! u(eta) = Theta eta - eta
//! ```
//!
//! gives the expected one-request change of the SCP. Everything downstream of a
//! replacement scheme - SCP evolution, hit probabilities, the one-step hit
//! probability delta and its bounds - is expressed through this field.

mod field;
mod projection;

pub use field::{field_grid, FieldSample};
pub use projection::{scp_from_ccp, ScpFromCcp};

use crate::error::{Error, Result};
use crate::matrix::TransitionMatrix;
use crate::popularity::PopularityVector;
use crate::schemes::{self, LruConditionalTable, SchemeSpec};
use crate::state_space::{CacheState, ContentId, StateSpace};

pub const DEFAULT_STEADY_TOL: f64 = 1e-12;
pub const DEFAULT_STEADY_MAX_ITERS: usize = 1_000_000;

/// State caching probabilities: a distribution over cache states.
#[derive(Debug, Clone, PartialEq)]
pub struct SCPVector {
    eta: Vec<f64>,
}

impl SCPVector {
    /// Accepts a vector within `1e-9` of the simplex and renormalizes it.
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if eta.is_empty() {
            return Err(Error::EmptyInput("SCP vector"));
        }
        if eta.iter().any(|&p| !p.is_finite() || p < -1e-12) {
            return Err(Error::InvalidParameter(
                "SCP entries must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = eta.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "SCP entries sum to {sum}, not 1"
            )));
        }
        let eta = eta.into_iter().map(|p| p.max(0.0) / sum).collect();
        Ok(Self { eta })
    }

    pub(crate) fn from_raw(eta: Vec<f64>) -> Self {
        Self { eta }
    }

    pub fn uniform(n_states: usize) -> Self {
        Self {
            eta: vec![1.0 / n_states as f64; n_states],
        }
    }

    /// All probability on a single state.
    pub fn point_mass(n_states: usize, k: usize) -> Result<Self> {
        if k >= n_states {
            return Err(Error::IndexOutOfRange {
                index: k,
                limit: n_states,
            });
        }
        let mut eta = vec![0.0; n_states];
        eta[k] = 1.0;
        Ok(Self { eta })
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.eta
    }
}

/// Content caching probabilities; entries lie in `[0, 1]` and sum to the cache size.
#[derive(Debug, Clone, PartialEq)]
pub struct CCPVector {
    lambda: Vec<f64>,
}

impl CCPVector {
    pub fn new(lambda: Vec<f64>, cache_size: usize) -> Result<Self> {
        if lambda
            .iter()
            .any(|&p| !p.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&p))
        {
            return Err(Error::InvalidParameter(
                "CCP entries must lie in [0, 1]".into(),
            ));
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - cache_size as f64).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "CCP entries sum to {sum}, not the cache size {cache_size}"
            )));
        }
        Ok(Self { lambda })
    }

    pub(crate) fn from_raw(lambda: Vec<f64>) -> Self {
        Self { lambda }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambda
    }
}

/// A tangent direction on the SCP simplex; entries sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct STFVector {
    u: Vec<f64>,
}

impl STFVector {
    pub(crate) fn from_raw(u: Vec<f64>) -> Self {
        Self { u }
    }

    pub fn zero(n_states: usize) -> Self {
        Self {
            u: vec![0.0; n_states],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }

    pub fn linf_norm(&self) -> f64 {
        self.u.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }
}

/// Per-state next-request hit probabilities `z = C_s^T upsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateHitVector {
    z: Vec<f64>,
}

impl StateHitVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }
}

/// `C_s x`: sums state-space entries into content space.
pub(crate) fn cs_apply(space: &StateSpace, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; space.n_contents()];
    for (k, state) in space.states().iter().enumerate() {
        let xk = x[k];
        if xk == 0.0 {
            continue;
        }
        for c in state.contents() {
            out[c.0] += xk;
        }
    }
    out
}

/// `C_s^T y`: sums content-space entries into state space.
pub(crate) fn cs_t_apply(space: &StateSpace, y: &[f64]) -> Vec<f64> {
    space
        .states()
        .iter()
        .map(|state| state.contents().iter().map(|c| y[c.0]).sum())
        .collect()
}

/// Content caching probabilities `lambda = C_s eta`.
pub fn ccp_from_scp(space: &StateSpace, eta: &SCPVector) -> Result<CCPVector> {
    if eta.len() != space.n_states() {
        return Err(Error::DimensionMismatch {
            expected: space.n_states(),
            got: eta.len(),
        });
    }
    Ok(CCPVector::from_raw(cs_apply(space, eta.as_slice())))
}

/// The instantaneous field `u = Theta eta - eta`.
pub fn instantaneous_stf(theta: &TransitionMatrix, eta: &SCPVector) -> Result<STFVector> {
    let mut u = theta.apply(eta.as_slice())?;
    for (ui, ei) in u.iter_mut().zip(eta.as_slice()) {
        *ui -= ei;
    }
    Ok(STFVector::from_raw(u))
}

/// The content component `u_l = Theta_l eta - eta` of the field.
pub fn content_stf(theta_l: &TransitionMatrix, eta: &SCPVector) -> Result<STFVector> {
    instantaneous_stf(theta_l, eta)
}

/// Closed-form content component of the field, bypassing matrix assembly.
///
/// These are per-scheme shortcuts; the generic `Theta_l eta - eta` product is
/// the source of truth and the two must agree. The `General` scheme has no
/// shortcut and falls back to the generic product.
pub fn content_stf_closed(
    scheme: &SchemeSpec,
    space: &StateSpace,
    l: ContentId,
    prediction: Option<&PopularityVector>,
    lru_cond: Option<&LruConditionalTable>,
    eta: &SCPVector,
) -> Result<STFVector> {
    scheme.validate(space.cache_size())?;
    if eta.len() != space.n_states() {
        return Err(Error::DimensionMismatch {
            expected: space.n_states(),
            got: eta.len(),
        });
    }
    if l.0 >= space.n_contents() {
        return Err(Error::UnknownContent {
            id: l.0,
            n_contents: space.n_contents(),
        });
    }

    if let SchemeSpec::General { .. } = scheme {
        let theta_l = schemes::conditional_transition(scheme, space, l, prediction, lru_cond)?;
        return content_stf(&theta_l, eta);
    }

    let pred = match scheme {
        SchemeSpec::Lp { .. } | SchemeSpec::TlpA | SchemeSpec::TlpP => {
            let p = prediction.ok_or_else(|| {
                Error::InvalidScheme("scheme requires a popularity prediction".into())
            })?;
            if p.len() != space.n_contents() {
                return Err(Error::DimensionMismatch {
                    expected: space.n_contents(),
                    got: p.len(),
                });
            }
            Some(p)
        }
        _ => None,
    };

    let eta = eta.as_slice();
    let n_states = space.n_states();
    let cache_size = space.cache_size();
    let mut u = vec![0.0; n_states];
    for m in 0..n_states {
        let state_m = space.state(m)?.clone();
        if state_m.contains(l) {
            // inflow: states k = m with l swapped out for some absent x
            let mut inflow = 0.0;
            for x in 0..space.n_contents() {
                let x = ContentId(x);
                if state_m.contains(x) {
                    continue;
                }
                let mut contents: Vec<ContentId> = state_m
                    .contents()
                    .iter()
                    .copied()
                    .filter(|&c| c != l)
                    .collect();
                contents.push(x);
                let state_k = CacheState::new(contents)?;
                let k = space.index_of(&state_k)?;
                let eta_k = eta[k];
                if eta_k == 0.0 {
                    continue;
                }
                inflow += eta_k
                    * match scheme {
                        SchemeSpec::Rr { phi } => *phi,
                        SchemeSpec::Lp { alpha } => {
                            alpha * schemes::lp_weight(&state_k, pred.unwrap(), l, x)
                        }
                        SchemeSpec::TlpA | SchemeSpec::TlpP => {
                            let p = pred.unwrap();
                            let qd = schemes::q_dagger(&state_k, p);
                            if x != qd || p.get(qd) >= p.get(l) {
                                0.0
                            } else if matches!(scheme, SchemeSpec::TlpA) {
                                1.0
                            } else {
                                p.get(l) - p.get(qd)
                            }
                        }
                        SchemeSpec::Lru => {
                            let table = lru_cond.ok_or(Error::MissingLruTable)?;
                            table.prob(space, k, x)?
                        }
                        SchemeSpec::General { .. } => unreachable!(),
                    };
            }
            u[m] = inflow;
        } else {
            // outflow from m when l is requested there
            u[m] = match scheme {
                SchemeSpec::Rr { phi } => -(cache_size as f64) * phi * eta[m],
                SchemeSpec::Lp { alpha } => {
                    let p = pred.unwrap();
                    let min_cached = state_m
                        .contents()
                        .iter()
                        .map(|&c| p.get(c))
                        .fold(f64::INFINITY, f64::min);
                    if min_cached < p.get(l) {
                        -alpha * eta[m]
                    } else {
                        0.0
                    }
                }
                SchemeSpec::TlpA | SchemeSpec::TlpP => {
                    let p = pred.unwrap();
                    let qd = schemes::q_dagger(&state_m, p);
                    if p.get(qd) >= p.get(l) {
                        0.0
                    } else if matches!(scheme, SchemeSpec::TlpA) {
                        -eta[m]
                    } else {
                        -(p.get(l) - p.get(qd)) * eta[m]
                    }
                }
                SchemeSpec::Lru => -eta[m],
                SchemeSpec::General { .. } => unreachable!(),
            };
        }
    }
    Ok(STFVector::from_raw(u))
}

/// The SCP trajectory and its field increments.
#[derive(Debug, Clone)]
pub struct ScpEvolution {
    /// `eta^(1) ... eta^(n)`.
    pub etas: Vec<SCPVector>,
    /// `u^(1) ... u^(n)` with `u^(t) = eta^(t) - eta^(t-1)`.
    pub stfs: Vec<STFVector>,
}

/// Steps the SCP through one transition matrix per request instant.
///
/// `prediction_seq[t]` is the prediction in force at step `t`; `None` means
/// accurate prediction, i.e. the next instant's popularity (the final step
/// reuses the last vector).
pub fn evolve_scp(
    scheme: &SchemeSpec,
    space: &StateSpace,
    popularity_seq: &[PopularityVector],
    prediction_seq: Option<&[PopularityVector]>,
    eta0: &SCPVector,
    lru_cond: Option<&LruConditionalTable>,
) -> Result<ScpEvolution> {
    if eta0.len() != space.n_states() {
        return Err(Error::DimensionMismatch {
            expected: space.n_states(),
            got: eta0.len(),
        });
    }
    let n = popularity_seq.len();
    if let Some(preds) = prediction_seq {
        if preds.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: preds.len(),
            });
        }
    }
    let mut etas = Vec::with_capacity(n);
    let mut stfs = Vec::with_capacity(n);
    let mut eta = eta0.clone();
    for t in 0..n {
        let prediction = match prediction_seq {
            Some(preds) => &preds[t],
            None => &popularity_seq[(t + 1).min(n - 1)],
        };
        let theta = schemes::overall_transition(
            scheme,
            space,
            &popularity_seq[t],
            Some(prediction),
            lru_cond,
        )?;
        let next = theta.apply(eta.as_slice())?;
        let u: Vec<f64> = next
            .iter()
            .zip(eta.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        stfs.push(STFVector::from_raw(u));
        eta = SCPVector::from_raw(next);
        etas.push(eta.clone());
    }
    Ok(ScpEvolution { etas, stfs })
}

/// Next-request hit probability `gamma = upsilon^T lambda`.
pub fn instantaneous_hit_prob(upsilon_next: &PopularityVector, lambda: &CCPVector) -> Result<f64> {
    if upsilon_next.len() != lambda.len() {
        return Err(Error::DimensionMismatch {
            expected: upsilon_next.len(),
            got: lambda.len(),
        });
    }
    Ok(upsilon_next
        .as_slice()
        .iter()
        .zip(lambda.as_slice())
        .map(|(a, b)| a * b)
        .sum())
}

/// Average hit probability as the plain mean of per-request hit probabilities.
///
/// `scp_seq` holds `eta^(0) ... eta^(n-1)`, one per request in `popularity_seq`.
pub fn average_hit_prob_direct(
    popularity_seq: &[PopularityVector],
    scp_seq: &[SCPVector],
    space: &StateSpace,
) -> Result<f64> {
    let n = popularity_seq.len();
    if scp_seq.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: scp_seq.len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyInput("popularity sequence"));
    }
    let mut total = 0.0;
    for (upsilon, eta) in popularity_seq.iter().zip(scp_seq) {
        let lambda = ccp_from_scp(space, eta)?;
        total += instantaneous_hit_prob(upsilon, &lambda)?;
    }
    Ok(total / n as f64)
}

/// Average hit probability reconstructed from the field increments:
/// the running sum of `u^(1) ... u^(t-1)` replaces each `eta^(t-1)`, plus the
/// average-popularity term against the initial point.
pub fn average_hit_prob_stf(
    popularity_seq: &[PopularityVector],
    stf_seq: &[STFVector],
    eta0: &SCPVector,
    space: &StateSpace,
) -> Result<f64> {
    let n = popularity_seq.len();
    if n == 0 {
        return Err(Error::EmptyInput("popularity sequence"));
    }
    if stf_seq.len() != n - 1 {
        return Err(Error::LengthMismatch {
            expected: n - 1,
            got: stf_seq.len(),
        });
    }
    if eta0.len() != space.n_states() {
        return Err(Error::DimensionMismatch {
            expected: space.n_states(),
            got: eta0.len(),
        });
    }
    let n_states = space.n_states();
    let mut cumulative = vec![0.0; n_states];
    let mut field_term = 0.0;
    for (t, u) in stf_seq.iter().enumerate() {
        if u.len() != n_states {
            return Err(Error::DimensionMismatch {
                expected: n_states,
                got: u.len(),
            });
        }
        for (c, v) in cumulative.iter_mut().zip(u.as_slice()) {
            *c += v;
        }
        // the popularity of request t+2 sees the increments u^(1..=t+1)
        let lam = cs_apply(space, &cumulative);
        field_term += popularity_seq[t + 1]
            .as_slice()
            .iter()
            .zip(&lam)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
    let mut upsilon_avg = vec![0.0; popularity_seq[0].len()];
    for upsilon in popularity_seq {
        for (a, b) in upsilon_avg.iter_mut().zip(upsilon.as_slice()) {
            *a += b;
        }
    }
    for a in upsilon_avg.iter_mut() {
        *a /= n as f64;
    }
    let lambda0 = cs_apply(space, eta0.as_slice());
    let base: f64 = upsilon_avg.iter().zip(&lambda0).map(|(a, b)| a * b).sum();
    Ok(field_term / n as f64 + base)
}

/// One-step hit-probability change `d = upsilon^T C_s u` caused by performing
/// (versus skipping) the replacement.
pub fn hit_prob_delta(
    upsilon_next: &PopularityVector,
    space: &StateSpace,
    u: &STFVector,
) -> Result<f64> {
    if upsilon_next.len() != space.n_contents() {
        return Err(Error::DimensionMismatch {
            expected: space.n_contents(),
            got: upsilon_next.len(),
        });
    }
    if u.len() != space.n_states() {
        return Err(Error::DimensionMismatch {
            expected: space.n_states(),
            got: u.len(),
        });
    }
    let lam = cs_apply(space, u.as_slice());
    Ok(upsilon_next
        .as_slice()
        .iter()
        .zip(&lam)
        .map(|(a, b)| a * b)
        .sum())
}

/// The delta rewritten against a reference popularity `upsilon_bar` under which
/// the current SCP would be stationary: `sum_l (upsilon_l - bar_l) c_l` with
/// `c_l = upsilon_next^T C_s u_l`.
pub fn decomposed_delta(
    upsilon_n: &PopularityVector,
    upsilon_bar: &PopularityVector,
    content_stfs: &[STFVector],
    upsilon_next: &PopularityVector,
    space: &StateSpace,
) -> Result<f64> {
    let n_c = space.n_contents();
    if upsilon_n.len() != n_c || upsilon_bar.len() != n_c || upsilon_next.len() != n_c {
        return Err(Error::DimensionMismatch {
            expected: n_c,
            got: upsilon_n.len().max(upsilon_bar.len()).max(upsilon_next.len()),
        });
    }
    if content_stfs.len() != n_c {
        return Err(Error::LengthMismatch {
            expected: n_c,
            got: content_stfs.len(),
        });
    }
    let mut total = 0.0;
    for (l, u_l) in content_stfs.iter().enumerate() {
        let c_l = hit_prob_delta(upsilon_next, space, u_l)?;
        total += (upsilon_n.as_slice()[l] - upsilon_bar.as_slice()[l]) * c_l;
    }
    Ok(total)
}

/// Worst-case bounds `(lower, upper)` on the one-step delta for each scheme.
pub fn delta_bounds(
    scheme: &SchemeSpec,
    upsilon_n: &PopularityVector,
    prediction: Option<&PopularityVector>,
    cache_size: usize,
) -> Result<(f64, f64)> {
    scheme.validate(cache_size)?;
    let max_upsilon = upsilon_n.max_entry();
    match scheme {
        SchemeSpec::Rr { phi } => Ok((-phi, cache_size as f64 * phi * max_upsilon)),
        SchemeSpec::Lp { alpha } => Ok((-alpha, alpha * max_upsilon)),
        SchemeSpec::TlpA | SchemeSpec::Lru => Ok((-1.0, max_upsilon)),
        SchemeSpec::TlpP => {
            let pred = prediction.ok_or_else(|| {
                Error::InvalidScheme("TLP-P bounds require a prediction".into())
            })?;
            if pred.len() != upsilon_n.len() {
                return Err(Error::DimensionMismatch {
                    expected: upsilon_n.len(),
                    got: pred.len(),
                });
            }
            let lower: f64 = -upsilon_n
                .as_slice()
                .iter()
                .zip(pred.as_slice())
                .map(|(a, b)| a * b)
                .sum::<f64>();
            Ok((lower, max_upsilon * pred.max_entry()))
        }
        SchemeSpec::General { .. } => Err(Error::UnsupportedScheme("general")),
    }
}

/// Fixed point of the transition matrix under constant popularity.
///
/// LP and TLP chains with strictly ordered predictions and everywhere-positive
/// popularity absorb into the state caching the top-predicted contents, which
/// is returned directly; all other cases run power iteration from the uniform
/// SCP until the residual drops below `tol`.
pub fn steady_state(
    scheme: &SchemeSpec,
    space: &StateSpace,
    upsilon: &PopularityVector,
    prediction: Option<&PopularityVector>,
    lru_cond: Option<&LruConditionalTable>,
    tol: f64,
    max_iters: usize,
) -> Result<SCPVector> {
    if upsilon.len() != space.n_contents() {
        return Err(Error::DimensionMismatch {
            expected: space.n_contents(),
            got: upsilon.len(),
        });
    }
    if scheme.needs_prediction() {
        if let Some(pred) = prediction {
            let positive = upsilon.as_slice().iter().all(|&v| v > 0.0);
            let mut sorted = pred.as_slice().to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let distinct = sorted.windows(2).all(|w| w[0] < w[1]);
            if positive && distinct {
                let mut order: Vec<usize> = (0..space.n_contents()).collect();
                order.sort_by(|&a, &b| {
                    pred.as_slice()[b].partial_cmp(&pred.as_slice()[a]).unwrap()
                });
                let top = CacheState::new(
                    order[..space.cache_size()].iter().map(|&i| ContentId(i)).collect(),
                )?;
                let k = space.index_of(&top)?;
                return SCPVector::point_mass(space.n_states(), k);
            }
        }
    }

    let theta = schemes::overall_transition(scheme, space, upsilon, prediction, lru_cond)?;
    let mut eta = vec![1.0 / space.n_states() as f64; space.n_states()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let next = theta.apply(&eta)?;
        residual = next
            .iter()
            .zip(&eta)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if residual <= tol {
            return Ok(SCPVector::from_raw(eta));
        }
        eta = next;
    }
    Err(Error::NoConvergence {
        iters: max_iters,
        residual,
    })
}

/// State hit probabilities `z = C_s^T upsilon`.
pub fn state_hit_vector(space: &StateSpace, upsilon: &PopularityVector) -> Result<StateHitVector> {
    if upsilon.len() != space.n_contents() {
        return Err(Error::DimensionMismatch {
            expected: space.n_contents(),
            got: upsilon.len(),
        });
    }
    Ok(StateHitVector {
        z: cs_t_apply(space, upsilon.as_slice()),
    })
}

/// One CCP step: lift to the minimum-norm feasible SCP, advance through the
/// transition matrix, and map back. The result depends on the lift rule; the
/// minimum-norm choice makes it canonical.
pub fn ccp_step(
    space: &StateSpace,
    scheme: &SchemeSpec,
    lambda_prev: &CCPVector,
    upsilon_n: &PopularityVector,
    prediction: Option<&PopularityVector>,
    lru_cond: Option<&LruConditionalTable>,
) -> Result<CCPVector> {
    let lifted = scp_from_ccp(space, lambda_prev)?;
    let theta = schemes::overall_transition(scheme, space, upsilon_n, prediction, lru_cond)?;
    let next = theta.apply(lifted.eta.as_slice())?;
    ccp_from_scp(space, &SCPVector::from_raw(next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{conditional_transition, overall_transition};

    fn pv(v: &[f64]) -> PopularityVector {
        PopularityVector::new(v.to_vec()).unwrap()
    }

    fn scp(v: &[f64]) -> SCPVector {
        SCPVector::new(v.to_vec()).unwrap()
    }

    fn space32() -> StateSpace {
        StateSpace::build(3, 2).unwrap()
    }

    fn random_simplex<R: rand::Rng>(rng: &mut R, n: usize) -> PopularityVector {
        let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        PopularityVector::from_rates(&raw).unwrap()
    }

    #[test]
    fn ccp_from_scp_examples() {
        let space = space32();
        let lam = ccp_from_scp(&space, &scp(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(lam.as_slice(), &[1.0, 1.0, 0.0]);

        let third = 1.0 / 3.0;
        let lam = ccp_from_scp(&space, &scp(&[third, third, third])).unwrap();
        for &v in lam.as_slice() {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }

        let lam = ccp_from_scp(&space, &scp(&[0.5, 0.3, 0.2])).unwrap();
        assert!((lam.as_slice()[0] - 0.8).abs() < 1e-15);
        assert!((lam.as_slice()[1] - 0.7).abs() < 1e-15);
        assert!((lam.as_slice()[2] - 0.5).abs() < 1e-15);

        // CCP mass always equals the cache size
        assert!((lam.as_slice().iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stf_of_identity_is_zero() {
        let theta = TransitionMatrix::identity(3);
        let u = instantaneous_stf(&theta, &scp(&[0.2, 0.3, 0.5])).unwrap();
        assert_eq!(u.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn rr_field_at_a_vertex() {
        let space = space32();
        let upsilon = pv(&[0.5, 0.3, 0.2]);
        let theta =
            overall_transition(&SchemeSpec::Rr { phi: 0.5 }, &space, &upsilon, None, None)
                .unwrap();
        let u = instantaneous_stf(&theta, &scp(&[1.0, 0.0, 0.0])).unwrap();
        let got = u.as_slice();
        assert!((got[0] - -0.2).abs() < 1e-15);
        assert!((got[1] - 0.1).abs() < 1e-15);
        assert!((got[2] - 0.1).abs() < 1e-15);
        assert!(got.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn stf_zero_at_steady_state() {
        let space = space32();
        let upsilon = pv(&[0.5, 0.3, 0.2]);
        let scheme = SchemeSpec::Rr { phi: 0.4 };
        let eta = steady_state(&scheme, &space, &upsilon, None, None, 1e-13, 1_000_000).unwrap();
        let theta = overall_transition(&scheme, &space, &upsilon, None, None).unwrap();
        let u = instantaneous_stf(&theta, &eta).unwrap();
        assert!(u.linf_norm() < 1e-12);
    }

    #[test]
    fn content_stf_rr_closed_form_at_vertex() {
        let space = space32();
        let phi = 0.35;
        let scheme = SchemeSpec::Rr { phi };
        let eta = scp(&[1.0, 0.0, 0.0]);
        let u2 =
            content_stf_closed(&scheme, &space, ContentId(2), None, None, &eta).unwrap();
        let got = u2.as_slice();
        assert!((got[0] - -2.0 * phi).abs() < 1e-15);
        assert!((got[1] - phi).abs() < 1e-15);
        assert!((got[2] - phi).abs() < 1e-15);

        let theta_2 =
            conditional_transition(&scheme, &space, ContentId(2), None, None).unwrap();
        let generic = content_stf(&theta_2, &eta).unwrap();
        for (a, b) in u2.as_slice().iter().zip(generic.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn content_stf_zero_when_cached_everywhere_in_support() {
        let space = space32();
        let scheme = SchemeSpec::Rr { phi: 0.3 };
        // support is {0,1} and {0,2}: content 0 cached in both
        let eta = scp(&[0.6, 0.4, 0.0]);
        let theta_0 = conditional_transition(&scheme, &space, ContentId(0), None, None).unwrap();
        let u0 = content_stf(&theta_0, &eta).unwrap();
        assert!(u0.linf_norm() < 1e-15);
    }

    #[test]
    fn closed_forms_agree_with_generic_products() {
        let mut rng = crate::rng::stream_rng(23, 0);
        let history: Vec<PopularityVector> = vec![pv(&[0.4, 0.3, 0.2, 0.1]); 24];
        let space = StateSpace::build(4, 2).unwrap();
        let table = LruConditionalTable::exact_from_history(&space, &history, 24, 1e-14).unwrap();
        for _ in 0..50 {
            let eta = SCPVector::new(random_simplex(&mut rng, space.n_states()).as_slice().to_vec())
                .unwrap();
            let pred = random_simplex(&mut rng, 4);
            let schemes: Vec<SchemeSpec> = vec![
                SchemeSpec::Rr { phi: 0.45 },
                SchemeSpec::Lp { alpha: 0.7 },
                SchemeSpec::TlpA,
                SchemeSpec::TlpP,
                SchemeSpec::Lru,
            ];
            for scheme in &schemes {
                for l in 0..4 {
                    let l = ContentId(l);
                    let closed =
                        content_stf_closed(scheme, &space, l, Some(&pred), Some(&table), &eta)
                            .unwrap();
                    let theta_l =
                        conditional_transition(scheme, &space, l, Some(&pred), Some(&table))
                            .unwrap();
                    let generic = content_stf(&theta_l, &eta).unwrap();
                    for (a, b) in closed.as_slice().iter().zip(generic.as_slice()) {
                        assert!(
                            (a - b).abs() <= 1e-12,
                            "{} content {l}: {a} vs {b}",
                            scheme.name()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn field_decomposes_over_contents() {
        let mut rng = crate::rng::stream_rng(31, 0);
        let space = StateSpace::build(4, 2).unwrap();
        for _ in 0..30 {
            let upsilon = random_simplex(&mut rng, 4);
            let pred = random_simplex(&mut rng, 4);
            let eta = SCPVector::new(random_simplex(&mut rng, space.n_states()).as_slice().to_vec())
                .unwrap();
            for scheme in [
                SchemeSpec::Rr { phi: 0.5 },
                SchemeSpec::Lp { alpha: 0.9 },
                SchemeSpec::TlpA,
                SchemeSpec::TlpP,
            ] {
                let theta =
                    overall_transition(&scheme, &space, &upsilon, Some(&pred), None).unwrap();
                let u = instantaneous_stf(&theta, &eta).unwrap();
                let mut mixed = vec![0.0; space.n_states()];
                for l in 0..4 {
                    let theta_l =
                        conditional_transition(&scheme, &space, ContentId(l), Some(&pred), None)
                            .unwrap();
                    let u_l = content_stf(&theta_l, &eta).unwrap();
                    for (m, v) in mixed.iter_mut().zip(u_l.as_slice()) {
                        *m += upsilon.as_slice()[l] * v;
                    }
                }
                for (a, b) in u.as_slice().iter().zip(&mixed) {
                    assert!((a - b).abs() <= 1e-12);
                }
                assert!(u.as_slice().iter().sum::<f64>().abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn evolution_telescopes_and_converges() {
        let space = space32();
        let upsilon = pv(&[0.5, 0.3, 0.2]);
        let scheme = SchemeSpec::Rr { phi: 0.5 };
        let seq = vec![upsilon.clone(); 400];
        let eta0 = scp(&[1.0, 0.0, 0.0]);
        let evo = evolve_scp(&scheme, &space, &seq, None, &eta0, None).unwrap();
        assert_eq!(evo.etas.len(), 400);

        // telescoping: eta^(N) - eta^(0) equals the summed field
        let mut acc = eta0.as_slice().to_vec();
        for u in &evo.stfs {
            for (a, v) in acc.iter_mut().zip(u.as_slice()) {
                *a += v;
            }
        }
        let last = evo.etas.last().unwrap();
        for (a, b) in acc.iter().zip(last.as_slice()) {
            assert!((a - b).abs() <= 1e-10);
        }

        // constant popularity drives the field to zero
        assert!(evo.stfs.last().unwrap().linf_norm() < 1e-9);

        // empty evolution
        let empty = evolve_scp(&scheme, &space, &[], None, &eta0, None).unwrap();
        assert!(empty.etas.is_empty() && empty.stfs.is_empty());
    }

    #[test]
    fn hit_prob_examples() {
        let full = CCPVector::new(vec![1.0, 1.0, 1.0], 3).unwrap();
        assert_eq!(
            instantaneous_hit_prob(&pv(&[0.2, 0.5, 0.3]), &full).unwrap(),
            1.0
        );

        let lam = CCPVector::new(vec![0.8, 0.7, 0.5], 2).unwrap();
        assert!((instantaneous_hit_prob(&pv(&[0.5, 0.3, 0.2]), &lam).unwrap() - 0.71).abs() < 1e-15);

        // uniform popularity over the uniform SCP of (3,2)
        let space = space32();
        let lam = ccp_from_scp(&space, &SCPVector::uniform(3)).unwrap();
        let gamma = instantaneous_hit_prob(&PopularityVector::uniform(3), &lam).unwrap();
        assert!((gamma - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn average_hit_prob_direct_matches_hand_rolled_mean() {
        let space = space32();
        let mut rng = crate::rng::stream_rng(7, 0);
        let scheme = SchemeSpec::Rr { phi: 0.5 };
        let seq: Vec<PopularityVector> = (0..10).map(|_| random_simplex(&mut rng, 3)).collect();
        let eta0 = SCPVector::uniform(3);
        let evo = evolve_scp(&scheme, &space, &seq, None, &eta0, None).unwrap();

        let mut scp_seq = vec![eta0.clone()];
        scp_seq.extend(evo.etas[..9].iter().cloned());
        let direct = average_hit_prob_direct(&seq, &scp_seq, &space).unwrap();

        let mut hand = 0.0;
        for t in 0..10 {
            let lam = ccp_from_scp(&space, &scp_seq[t]).unwrap();
            hand += instantaneous_hit_prob(&seq[t], &lam).unwrap();
        }
        hand /= 10.0;
        assert!((direct - hand).abs() <= 1e-14);

        // single step: upsilon^(1) against eta^(0)
        let one = average_hit_prob_direct(&seq[..1], &scp_seq[..1], &space).unwrap();
        let lam0 = ccp_from_scp(&space, &eta0).unwrap();
        assert!((one - instantaneous_hit_prob(&seq[0], &lam0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn stf_average_matches_direct_average() {
        let space = space32();
        let mut rng = crate::rng::stream_rng(13, 0);
        let scheme = SchemeSpec::Rr { phi: 0.4 };
        let seq: Vec<PopularityVector> = (0..20).map(|_| random_simplex(&mut rng, 3)).collect();
        let eta0 = scp(&[0.6, 0.1, 0.3]);
        let evo = evolve_scp(&scheme, &space, &seq, None, &eta0, None).unwrap();

        let mut scp_seq = vec![eta0.clone()];
        scp_seq.extend(evo.etas[..19].iter().cloned());
        let direct = average_hit_prob_direct(&seq, &scp_seq, &space).unwrap();
        let via_stf = average_hit_prob_stf(&seq, &evo.stfs[..19], &eta0, &space).unwrap();
        assert!((direct - via_stf).abs() <= 1e-10);

        // all-zero fields reduce to the base term
        let zeros = vec![STFVector::zero(3); 19];
        let base = average_hit_prob_stf(&seq, &zeros, &eta0, &space).unwrap();
        let mut avg = [0.0; 3];
        for v in &seq {
            for (a, b) in avg.iter_mut().zip(v.as_slice()) {
                *a += b / 20.0;
            }
        }
        let lam0 = ccp_from_scp(&space, &eta0).unwrap();
        let expect: f64 = avg.iter().zip(lam0.as_slice()).map(|(a, b)| a * b).sum();
        assert!((base - expect).abs() < 1e-14);

        // n = 1 has an empty field sum
        let one = average_hit_prob_stf(&seq[..1], &[], &eta0, &space).unwrap();
        assert!((one - instantaneous_hit_prob(&seq[0], &lam0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn delta_examples() {
        let space = space32();
        assert_eq!(
            hit_prob_delta(&pv(&[0.4, 0.35, 0.25]), &space, &STFVector::zero(3)).unwrap(),
            0.0
        );

        let u = STFVector::from_raw(vec![-0.2, 0.1, 0.1]);
        let d = hit_prob_delta(&pv(&[0.4, 0.35, 0.25]), &space, &u).unwrap();
        assert!((d - -0.025).abs() < 1e-15);

        // uniform next popularity nullifies any replacement
        let d = hit_prob_delta(&PopularityVector::uniform(3), &space, &u).unwrap();
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn lp_tlp_never_hurt_an_accurately_predicted_next_request() {
        // with the prediction equal to the next popularity, LP and TLP only
        // move mass toward states with a larger next-request hit probability
        let mut rng = crate::rng::stream_rng(41, 0);
        let space = StateSpace::build(5, 2).unwrap();
        for _ in 0..200 {
            let upsilon_n = random_simplex(&mut rng, 5);
            let upsilon_next = random_simplex(&mut rng, 5);
            let eta = SCPVector::new(random_simplex(&mut rng, space.n_states()).as_slice().to_vec())
                .unwrap();
            for scheme in [SchemeSpec::Lp { alpha: 0.9 }, SchemeSpec::TlpA, SchemeSpec::TlpP] {
                let theta =
                    overall_transition(&scheme, &space, &upsilon_n, Some(&upsilon_next), None)
                        .unwrap();
                let u = instantaneous_stf(&theta, &eta).unwrap();
                let d = hit_prob_delta(&upsilon_next, &space, &u).unwrap();
                assert!(d >= -1e-12, "{}: d = {d}", scheme.name());
            }
        }
    }

    #[test]
    fn decomposed_delta_zero_deviation_and_linearity() {
        let space = space32();
        let upsilon_bar = pv(&[0.5, 0.3, 0.2]);
        let upsilon_next = pv(&[0.4, 0.35, 0.25]);
        let scheme = SchemeSpec::Rr { phi: 0.5 };
        let eta =
            steady_state(&scheme, &space, &upsilon_bar, None, None, 1e-13, 1_000_000).unwrap();
        let stfs: Vec<STFVector> = (0..3)
            .map(|l| {
                let theta_l =
                    conditional_transition(&scheme, &space, ContentId(l), None, None).unwrap();
                content_stf(&theta_l, &eta).unwrap()
            })
            .collect();

        let zero =
            decomposed_delta(&upsilon_bar, &upsilon_bar, &stfs, &upsilon_next, &space).unwrap();
        assert!(zero.abs() < 1e-15);

        // single-content deviation scales linearly
        let eps = 0.01;
        let mut shifted = upsilon_bar.as_slice().to_vec();
        shifted[0] += eps;
        shifted[2] -= eps;
        let shifted = pv(&shifted);
        let d = decomposed_delta(&shifted, &upsilon_bar, &stfs, &upsilon_next, &space).unwrap();
        let c0 = hit_prob_delta(&upsilon_next, &space, &stfs[0]).unwrap();
        let c2 = hit_prob_delta(&upsilon_next, &space, &stfs[2]).unwrap();
        assert!((d - eps * (c0 - c2)).abs() < 1e-12);

        // and matches the direct delta at the steady state
        let theta = overall_transition(&scheme, &space, &shifted, None, None).unwrap();
        let u = instantaneous_stf(&theta, &eta).unwrap();
        let direct = hit_prob_delta(&upsilon_next, &space, &u).unwrap();
        assert!((d - direct).abs() <= 1e-9);
    }

    #[test]
    fn delta_bound_values() {
        let upsilon = pv(&[0.5, 0.3, 0.2]);
        let (lo, hi) =
            delta_bounds(&SchemeSpec::Rr { phi: 0.5 }, &upsilon, None, 2).unwrap();
        assert!((lo - -0.5).abs() < 1e-15 && (hi - 0.5).abs() < 1e-15);

        let (lo, hi) = delta_bounds(&SchemeSpec::TlpA, &upsilon, None, 2).unwrap();
        assert!((lo - -1.0).abs() < 1e-15 && (hi - 0.5).abs() < 1e-15);

        let (lo, hi) =
            delta_bounds(&SchemeSpec::TlpP, &upsilon, Some(&upsilon), 2).unwrap();
        assert!((lo - -0.38).abs() < 1e-15 && (hi - 0.25).abs() < 1e-15);

        assert!(matches!(
            delta_bounds(
                &SchemeSpec::General {
                    phi_table: Default::default()
                },
                &upsilon,
                None,
                2
            ),
            Err(Error::UnsupportedScheme(_))
        ));
    }

    #[test]
    fn steady_states_for_absorbing_and_symmetric_chains() {
        let space = space32();
        // TLP-A with distinct predictions absorbs into the top state
        let upsilon = pv(&[0.5, 0.3, 0.2]);
        let eta = steady_state(
            &SchemeSpec::TlpA,
            &space,
            &upsilon,
            Some(&upsilon),
            None,
            1e-12,
            1_000_000,
        )
        .unwrap();
        assert_eq!(eta.as_slice(), &[1.0, 0.0, 0.0]);

        // uniform popularity under RR is uniform over states
        let eta = steady_state(
            &SchemeSpec::Rr { phi: 0.5 },
            &space,
            &PopularityVector::uniform(3),
            None,
            None,
            1e-13,
            1_000_000,
        )
        .unwrap();
        for &v in eta.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steady_state_reports_non_convergence() {
        let space = space32();
        let result = steady_state(
            &SchemeSpec::Rr { phi: 0.5 },
            &space,
            &pv(&[0.5, 0.3, 0.2]),
            None,
            None,
            1e-13,
            2,
        );
        match result {
            Err(Error::NoConvergence { iters, residual }) => {
                assert_eq!(iters, 2);
                assert!(residual > 1e-13);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn stf_average_rejects_wrong_field_count() {
        let space = space32();
        let seq = vec![pv(&[0.5, 0.3, 0.2]); 4];
        let stfs = vec![STFVector::zero(3); 2];
        assert!(matches!(
            average_hit_prob_stf(&seq, &stfs, &SCPVector::uniform(3), &space),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn state_hit_vector_examples() {
        let space = space32();
        let z = state_hit_vector(&space, &pv(&[0.4, 0.35, 0.25])).unwrap();
        let got = z.as_slice();
        assert!((got[0] - 0.75).abs() < 1e-15);
        assert!((got[1] - 0.65).abs() < 1e-15);
        assert!((got[2] - 0.60).abs() < 1e-15);

        let z = state_hit_vector(&space, &PopularityVector::uniform(3)).unwrap();
        for &v in z.as_slice() {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }

        let z = state_hit_vector(&space, &pv(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(z.as_slice(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn ccp_step_consistency() {
        let space = space32();
        let scheme = SchemeSpec::Rr { phi: 0.5 };
        let upsilon = pv(&[0.5, 0.3, 0.2]);

        // a vertex SCP has a unique preimage
        let eta = scp(&[1.0, 0.0, 0.0]);
        let lam = ccp_from_scp(&space, &eta).unwrap();
        let stepped = ccp_step(&space, &scheme, &lam, &upsilon, None, None).unwrap();
        let theta = overall_transition(&scheme, &space, &upsilon, None, None).unwrap();
        let expect = ccp_from_scp(
            &space,
            &SCPVector::from_raw(theta.apply(eta.as_slice()).unwrap()),
        )
        .unwrap();
        for (a, b) in stepped.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }

        // uniform CCP under uniform popularity is a fixed point
        let lam = CCPVector::new(vec![2.0 / 3.0; 3], 2).unwrap();
        let stepped = ccp_step(
            &space,
            &scheme,
            &lam,
            &PopularityVector::uniform(3),
            None,
            None,
        )
        .unwrap();
        for &v in stepped.as_slice() {
            assert!((v - 2.0 / 3.0).abs() < 1e-10);
        }
    }
}
