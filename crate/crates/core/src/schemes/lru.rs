//! LRU recency probabilities.
//!
//! Fitting LRU into the general transition model needs the conditional
//! probability that a given cached content is the least recently used. The
//! joint probability that the cache is in state `k`, content `q*` is the LRU,
//! and the most recent request for `q*` lies `w` requests back factors over the
//! recency window: the `w-1` most recent requests must cover the other `L-1`
//! cached contents (each at least once), and the request `w` back must be for
//! `q*`. The joint is computed exactly by enumerating those ordered
//! allocations, which is exponential in `w`; for larger instances the
//! conditional table can instead be estimated from a seeded recency simulation.

use crate::error::{Error, Result};
use crate::matrix::LruTableSource;
use crate::popularity::PopularityVector;
use crate::rng::stream_rng;
use crate::state_space::{CacheState, ContentId, StateSpace};

/// Cap on the number of enumerated ordered allocations per joint probability.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 22;

fn check_history(space: &StateSpace, history: &[PopularityVector], need: usize) -> Result<()> {
    if history.len() < need {
        return Err(Error::HistoryTooShort {
            have: history.len(),
            need,
        });
    }
    for v in history {
        if v.len() != space.n_contents() {
            return Err(Error::DimensionMismatch {
                expected: space.n_contents(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// Joint probability that the state is `k`, `q_star` is the LRU content, and
/// the most recent request for `q_star` was `w` requests back.
///
/// `history` holds the per-instant request probabilities up to the request
/// before the current one; the window occupies its last `w` entries. The
/// window product is multiplied by the probability that the request `w` back
/// was for `q_star`, so joints over `(q_star, w)` normalize.
pub fn lru_joint_prob(
    space: &StateSpace,
    history: &[PopularityVector],
    q_star: ContentId,
    w: usize,
    k: usize,
) -> Result<f64> {
    let state = space.state(k)?.clone();
    if !state.contains(q_star) {
        return Err(Error::NotCached {
            content: q_star.0,
            state: k,
        });
    }
    if w < space.cache_size() {
        return Err(Error::WindowTooShort {
            w,
            cache_size: space.cache_size(),
        });
    }
    check_history(space, history, w)?;

    let others: Vec<ContentId> = state
        .contents()
        .iter()
        .copied()
        .filter(|&c| c != q_star)
        .collect();
    let start = history.len() - w;
    let q_star_factor = history[start].get(q_star);
    let window = &history[start + 1..];
    debug_assert_eq!(window.len(), w - 1);

    if others.is_empty() {
        // L = 1: the lone cached content is trivially the LRU.
        return Ok(if w == 1 { q_star_factor } else { 0.0 });
    }
    if q_star_factor == 0.0 {
        return Ok(0.0);
    }

    let n_others = others.len();
    let slots = w - 1;
    let count = (n_others as u128).pow(slots as u32);
    if count > DEFAULT_ENUMERATION_CAP {
        return Err(Error::TooExpensive {
            count,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }

    // Enumerate every assignment of window instants to the other cached
    // contents and keep the surjective ones.
    let full_cover: u64 = (1 << n_others) - 1;
    let mut assignment = vec![0usize; slots];
    let mut total = 0.0;
    loop {
        let mut cover: u64 = 0;
        let mut product = 1.0;
        for (i, &a) in assignment.iter().enumerate() {
            cover |= 1 << a;
            product *= window[i].get(others[a]);
            if product == 0.0 {
                break;
            }
        }
        if cover == full_cover {
            total += product;
        }
        // next assignment in base n_others
        let mut i = 0;
        loop {
            if i == slots {
                return Ok(q_star_factor * total);
            }
            assignment[i] += 1;
            if assignment[i] < n_others {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

/// Per-state sums of the joint probabilities over `w = L..=w_max`, truncated
/// when a whole `w` layer adds less than `tail_tol`. Returns one sum per
/// cached-content slot of state `k`.
fn joint_sums(
    space: &StateSpace,
    history: &[PopularityVector],
    k: usize,
    w_max: usize,
    tail_tol: f64,
) -> Result<Vec<f64>> {
    let state = space.state(k)?.clone();
    let mut sums = vec![0.0; state.len()];
    for w in space.cache_size()..=w_max {
        let mut layer = 0.0;
        for (slot, &q) in state.contents().iter().enumerate() {
            let joint = lru_joint_prob(space, history, q, w, k)?;
            sums[slot] += joint;
            layer += joint;
        }
        if layer < tail_tol {
            break;
        }
    }
    Ok(sums)
}

/// Conditional probability that `q_star` is the LRU content given state `k`,
/// from the truncated sum of joint probabilities over window lengths.
pub fn lru_conditional_prob(
    space: &StateSpace,
    history: &[PopularityVector],
    q_star: ContentId,
    k: usize,
    w_max: usize,
    tail_tol: f64,
) -> Result<f64> {
    if w_max < space.cache_size() {
        return Err(Error::WindowTooShort {
            w: w_max,
            cache_size: space.cache_size(),
        });
    }
    check_history(space, history, w_max)?;
    let state = space.state(k)?;
    let slot = state
        .contents()
        .binary_search(&q_star)
        .map_err(|_| Error::NotCached {
            content: q_star.0,
            state: k,
        })?;
    let sums = joint_sums(space, history, k, w_max, tail_tol)?;
    let total: f64 = sums.iter().sum();
    if total <= 0.0 {
        return Err(Error::Infeasible(format!(
            "state {k} has zero recency probability over the supplied history"
        )));
    }
    Ok(sums[slot] / total)
}

/// Conditional LRU probabilities for every `(cached content, state)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LruConditionalTable {
    /// `probs[k][slot]` follows the sorted content order of state `k`.
    probs: Vec<Vec<f64>>,
    source: LruTableSource,
}

impl LruConditionalTable {
    /// Exact table from the window enumeration over a popularity history.
    ///
    /// States with zero recency probability under the history (some cached
    /// content is never requested) get a uniform row; the chain cannot dwell
    /// in them.
    pub fn exact_from_history(
        space: &StateSpace,
        history: &[PopularityVector],
        w_max: usize,
        tail_tol: f64,
    ) -> Result<Self> {
        if w_max < space.cache_size() {
            return Err(Error::WindowTooShort {
                w: w_max,
                cache_size: space.cache_size(),
            });
        }
        check_history(space, history, w_max)?;
        let uniform = 1.0 / space.cache_size() as f64;
        let mut probs = Vec::with_capacity(space.n_states());
        for k in 0..space.n_states() {
            let sums = joint_sums(space, history, k, w_max, tail_tol)?;
            let total: f64 = sums.iter().sum();
            if total > 0.0 {
                probs.push(sums.into_iter().map(|s| s / total).collect());
            } else {
                probs.push(vec![uniform; space.cache_size()]);
            }
        }
        Ok(Self {
            probs,
            source: LruTableSource::Exact,
        })
    }

    /// Estimates the table by running an LRU cache on i.i.d. requests drawn
    /// from `upsilon`, recording which cached content is least recent at each
    /// request instant. The first tenth of the run is warmup. Unvisited states
    /// get a uniform row.
    pub fn estimate_monte_carlo(
        space: &StateSpace,
        upsilon: &PopularityVector,
        n_requests: usize,
        seed: u64,
    ) -> Result<Self> {
        if upsilon.len() != space.n_contents() {
            return Err(Error::DimensionMismatch {
                expected: space.n_contents(),
                got: upsilon.len(),
            });
        }
        if n_requests == 0 {
            return Err(Error::EmptyInput("recency estimation needs requests"));
        }
        let cache_size = space.cache_size();
        let mut rng = stream_rng(seed, 0);
        // most-recent-first recency list over an arbitrary initial state
        let mut recency: Vec<ContentId> = (0..cache_size).map(ContentId).collect();
        let mut counts = vec![vec![0u64; cache_size]; space.n_states()];
        let warmup = n_requests / 10;
        for step in 0..n_requests {
            if step >= warmup {
                let state = CacheState::new(recency.clone()).expect("recency holds a valid state");
                let k = space.index_of(&state)?;
                let lru = *recency.last().expect("cache is non-empty");
                let slot = state
                    .contents()
                    .binary_search(&lru)
                    .expect("LRU content is cached");
                counts[k][slot] += 1;
            }
            let requested = upsilon.sample(&mut rng);
            if let Some(pos) = recency.iter().position(|&c| c == requested) {
                recency.remove(pos);
            } else {
                recency.pop();
            }
            recency.insert(0, requested);
        }
        let uniform = 1.0 / cache_size as f64;
        let probs = counts
            .into_iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    vec![uniform; cache_size]
                } else {
                    row.into_iter().map(|c| c as f64 / total as f64).collect()
                }
            })
            .collect();
        Ok(Self {
            probs,
            source: LruTableSource::Estimated,
        })
    }

    /// Builds a table directly from per-state rows (aligned with each state's
    /// sorted content order); rows must sum to 1.
    pub fn from_rows(space: &StateSpace, probs: Vec<Vec<f64>>, source: LruTableSource) -> Result<Self> {
        if probs.len() != space.n_states() {
            return Err(Error::DimensionMismatch {
                expected: space.n_states(),
                got: probs.len(),
            });
        }
        for row in &probs {
            if row.len() != space.cache_size() {
                return Err(Error::DimensionMismatch {
                    expected: space.cache_size(),
                    got: row.len(),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::InvalidProbability { value: sum });
            }
        }
        Ok(Self { probs, source })
    }

    pub fn source(&self) -> LruTableSource {
        self.source
    }

    /// Probability that `q` is the LRU content given state `k`.
    pub fn prob(&self, space: &StateSpace, k: usize, q: ContentId) -> Result<f64> {
        let state = space.state(k)?;
        let slot = state
            .contents()
            .binary_search(&q)
            .map_err(|_| Error::NotCached {
                content: q.0,
                state: k,
            })?;
        Ok(self.probs[k][slot])
    }
}
