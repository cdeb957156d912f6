//! Cache-state transition matrices for the replacement schemes.
//!
//! The general replacement model is parameterized by `phi_{l,q,k}`: the
//! probability of replacing cached content `q` with requested content `l` when
//! the cache is in state `k`. Each concrete scheme is a choice of `phi`:
//!
//! - RR: a constant `phi` in `(0, 1/L]` for every cached content.
//! - LP: replace a strictly-less-predicted-popular cached content with
//!   probability `alpha`, the victim weighted by the predicted popularity gap.
//! - TLP-A / TLP-P: replace only the least predicted-popular cached content
//!   `q'(k)`, always (A) or with probability equal to the predicted gap (P).
//! - LRU: replace the least recently used content, with recency probabilities
//!   supplied by a conditional table (exact for small windows, or estimated).
//!
//! Conditional matrices `Theta_l` condition on content `l` being requested; the
//! overall matrix is the popularity-weighted mixture `Theta = sum_l v_l Theta_l`.

pub mod lru;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::TransitionMatrix;
use crate::popularity::PopularityVector;
use crate::state_space::{CacheState, ContentId, StateSpace};

pub use lru::{lru_conditional_prob, lru_joint_prob, LruConditionalTable};

/// Replacement probabilities for the general model, keyed by
/// `(requested content l, evicted content q, state index k)`.
pub type PhiTable = BTreeMap<(usize, usize, usize), f64>;

/// A replacement scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeSpec {
    /// Random replacement with per-content conditional probability `phi`;
    /// a miss triggers a replacement with total probability `L * phi`.
    Rr { phi: f64 },
    /// Replace less (predicted-)popular, controlled by `alpha`.
    Lp { alpha: f64 },
    /// Always replace the least predicted-popular cached content.
    TlpA,
    /// Probabilistically replace the least predicted-popular cached content.
    TlpP,
    /// Evict the least recently used content.
    Lru,
    /// Arbitrary replacement probabilities; missing entries are zero.
    General { phi_table: PhiTable },
}

impl SchemeSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeSpec::Rr { .. } => "rr",
            SchemeSpec::Lp { .. } => "lp",
            SchemeSpec::TlpA => "tlpa",
            SchemeSpec::TlpP => "tlpp",
            SchemeSpec::Lru => "lru",
            SchemeSpec::General { .. } => "general",
        }
    }

    /// Whether matrix construction and simulation need a popularity prediction.
    pub fn needs_prediction(&self) -> bool {
        matches!(
            self,
            SchemeSpec::Lp { .. } | SchemeSpec::TlpA | SchemeSpec::TlpP
        )
    }

    /// Validates scheme parameters against a cache size.
    pub fn validate(&self, cache_size: usize) -> Result<()> {
        match self {
            SchemeSpec::Rr { phi } => {
                // phi = 0 is the degenerate never-replace cache
                let cap = 1.0 / cache_size as f64;
                if !(*phi >= 0.0 && *phi <= cap) {
                    return Err(Error::InvalidParameter(format!(
                        "RR phi {phi} outside [0, 1/L] = [0, {cap}]"
                    )));
                }
            }
            SchemeSpec::Lp { alpha }
                if !(*alpha > 0.0 && *alpha <= 1.0) => {
                    return Err(Error::InvalidParameter(format!(
                        "LP alpha {alpha} outside (0, 1]"
                    )));
                }
            _ => {}
        }
        Ok(())
    }
}

/// Builds a `General` scheme from a replacement-probability table, validating
/// that every value is a probability and per-`(l, k)` sums stay at most 1.
pub fn general_phi_table(entries: PhiTable) -> Result<SchemeSpec> {
    let mut row_sums: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(l, _q, k), &v) in &entries {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidProbability { value: v });
        }
        *row_sums.entry((l, k)).or_insert(0.0) += v;
    }
    for (&(l, k), &sum) in &row_sums {
        if sum > 1.0 + 1e-12 {
            return Err(Error::RowSumExceedsOne {
                state: k,
                content: l,
                sum,
            });
        }
    }
    Ok(SchemeSpec::General { phi_table: entries })
}

/// The least predicted-popular cached content `q'(k)`; ties go to the lowest id.
pub(crate) fn q_dagger(state: &CacheState, prediction: &PopularityVector) -> ContentId {
    let mut best = state.contents()[0];
    for &c in &state.contents()[1..] {
        if prediction.get(c) < prediction.get(best) {
            best = c;
        }
    }
    best
}

/// The normalized predicted-gap victim weight of LP (before scaling by alpha):
/// zero unless the predicted popularity of `q` is strictly below that of `l`.
pub(crate) fn lp_weight(
    state: &CacheState,
    prediction: &PopularityVector,
    l: ContentId,
    q: ContentId,
) -> f64 {
    let vl = prediction.get(l);
    if prediction.get(q) >= vl {
        return 0.0;
    }
    let denom: f64 = state
        .contents()
        .iter()
        .filter(|&&t| prediction.get(t) < vl)
        .map(|&t| vl - prediction.get(t))
        .sum();
    (vl - prediction.get(q)) / denom
}

/// `phi_{l,q,k}` for one scheme. Equality of predicted popularities never
/// triggers a replacement: replacing with an equally-predicted content cannot
/// improve the hit probability, and strictness keeps diagonals at most 1.
#[allow(clippy::too_many_arguments)]
fn phi_value(
    scheme: &SchemeSpec,
    space: &StateSpace,
    k: usize,
    state: &CacheState,
    l: ContentId,
    q: ContentId,
    prediction: Option<&PopularityVector>,
    lru_cond: Option<&LruConditionalTable>,
) -> Result<f64> {
    Ok(match scheme {
        SchemeSpec::Rr { phi } => *phi,
        SchemeSpec::Lp { alpha } => {
            let pred = required_prediction(prediction, space)?;
            alpha * lp_weight(state, pred, l, q)
        }
        SchemeSpec::TlpA | SchemeSpec::TlpP => {
            let pred = required_prediction(prediction, space)?;
            let qd = q_dagger(state, pred);
            if q != qd || pred.get(qd) >= pred.get(l) {
                0.0
            } else if matches!(scheme, SchemeSpec::TlpA) {
                1.0
            } else {
                pred.get(l) - pred.get(qd)
            }
        }
        SchemeSpec::Lru => {
            let table = lru_cond.ok_or(Error::MissingLruTable)?;
            table.prob(space, k, q)?
        }
        SchemeSpec::General { phi_table } => {
            phi_table.get(&(l.0, q.0, k)).copied().unwrap_or(0.0)
        }
    })
}

fn required_prediction<'a>(
    prediction: Option<&'a PopularityVector>,
    space: &StateSpace,
) -> Result<&'a PopularityVector> {
    let pred = prediction.ok_or_else(|| {
        Error::InvalidScheme("scheme requires a popularity prediction".into())
    })?;
    if pred.len() != space.n_contents() {
        return Err(Error::DimensionMismatch {
            expected: space.n_contents(),
            got: pred.len(),
        });
    }
    Ok(pred)
}

/// The conditional transition matrix `Theta_l`, given that content `l` is
/// requested. Columns of states already caching `l` are identity columns.
pub fn conditional_transition(
    scheme: &SchemeSpec,
    space: &StateSpace,
    l: ContentId,
    prediction: Option<&PopularityVector>,
    lru_cond: Option<&LruConditionalTable>,
) -> Result<TransitionMatrix> {
    scheme.validate(space.cache_size())?;
    if l.0 >= space.n_contents() {
        return Err(Error::UnknownContent {
            id: l.0,
            n_contents: space.n_contents(),
        });
    }
    let n_states = space.n_states();
    let mut cols = Vec::with_capacity(n_states);
    for k in 0..n_states {
        let state = space.state(k)?.clone();
        if state.contains(l) {
            cols.push(vec![(k, 1.0)]);
            continue;
        }
        let mut col = Vec::with_capacity(space.cache_size() + 1);
        let mut leave = 0.0;
        for (q, m) in content_exchange_targets(space, k, &state, l) {
            let phi = phi_value(scheme, space, k, &state, l, q, prediction, lru_cond)?;
            if !(-1e-12..=1.0 + 1e-12).contains(&phi) {
                return Err(Error::InvalidProbability { value: phi });
            }
            if phi > 0.0 {
                col.push((m, phi));
                leave += phi;
            }
        }
        if leave > 1.0 + 1e-12 {
            return Err(Error::RowSumExceedsOne {
                state: k,
                content: l.0,
                sum: leave,
            });
        }
        let stay = (1.0 - leave).max(0.0);
        if stay > 0.0 {
            col.push((k, stay));
        }
        cols.push(col);
    }
    let mut matrix = TransitionMatrix::from_columns(n_states, cols)?;
    if let (SchemeSpec::Lru, Some(table)) = (scheme, lru_cond) {
        matrix.set_lru_source(table.source());
    }
    Ok(matrix)
}

/// For each cached `q`, the state reached by exchanging `q` for `l`.
fn content_exchange_targets(
    space: &StateSpace,
    _k: usize,
    state: &CacheState,
    l: ContentId,
) -> Vec<(ContentId, usize)> {
    state
        .contents()
        .iter()
        .map(|&q| {
            let mut contents: Vec<ContentId> = state
                .contents()
                .iter()
                .copied()
                .filter(|&c| c != q)
                .collect();
            contents.push(l);
            let target = CacheState::new(contents).expect("exchange produces a valid state");
            (q, space.index_of(&target).expect("target state exists"))
        })
        .collect()
}

/// The overall transition matrix `Theta = sum_l v_l Theta_l`, assembled from
/// the per-scheme closed forms (the `General` scheme falls back to the
/// weighted sum of conditional matrices).
pub fn overall_transition(
    scheme: &SchemeSpec,
    space: &StateSpace,
    upsilon_n: &PopularityVector,
    prediction: Option<&PopularityVector>,
    lru_cond: Option<&LruConditionalTable>,
) -> Result<TransitionMatrix> {
    scheme.validate(space.cache_size())?;
    if upsilon_n.len() != space.n_contents() {
        return Err(Error::DimensionMismatch {
            expected: space.n_contents(),
            got: upsilon_n.len(),
        });
    }

    if let SchemeSpec::General { .. } = scheme {
        let mut terms = Vec::with_capacity(space.n_contents());
        let mut matrices = Vec::with_capacity(space.n_contents());
        for l in 0..space.n_contents() {
            matrices.push(conditional_transition(
                scheme,
                space,
                ContentId(l),
                prediction,
                lru_cond,
            )?);
        }
        for (l, m) in matrices.iter().enumerate() {
            terms.push((upsilon_n.as_slice()[l], m));
        }
        return TransitionMatrix::weighted_sum(&terms);
    }

    let n_states = space.n_states();
    let mut cols = Vec::with_capacity(n_states);
    for k in 0..n_states {
        let state = space.state(k)?.clone();
        let mut col: Vec<(usize, f64)> = Vec::new();
        let mut leave = 0.0;
        for l in 0..space.n_contents() {
            let l = ContentId(l);
            if state.contains(l) {
                continue;
            }
            let ul = upsilon_n.get(l);
            for (q, m) in content_exchange_targets(space, k, &state, l) {
                let phi = phi_value(scheme, space, k, &state, l, q, prediction, lru_cond)?;
                let value = ul * phi;
                if value > 0.0 {
                    col.push((m, value));
                    leave += value;
                }
            }
        }
        let stay = (1.0 - leave).max(0.0);
        if stay > 0.0 {
            col.push((k, stay));
        }
        // merge duplicate targets (distinct (l, q) pairs can reach the same m
        // only when they coincide, but General-free schemes never do)
        col.sort_unstable_by_key(|&(m, _)| m);
        col.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        cols.push(col);
    }
    let mut matrix = TransitionMatrix::from_columns(n_states, cols)?;
    if let (SchemeSpec::Lru, Some(table)) = (scheme, lru_cond) {
        matrix.set_lru_source(table.source());
    }
    Ok(matrix)
}
