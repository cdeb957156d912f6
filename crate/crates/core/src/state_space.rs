//! Cache-state enumeration.
//!
//! A cache of size `L` over a catalog of `N_c` unit-size contents is in one of
//! `N_s = binomial(N_c, L)` states, each an `L`-subset of the catalog. States are
//! enumerated in lexicographic order of their sorted content lists, and the state
//! index is the rank in that order, so matrix layouts are reproducible across runs.

use crate::error::{Error, Result};

/// Default cap on the number of enumerated states. The analytic path is meant
/// for small instances; the simulation path never enumerates states.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// Index of a content in the catalog, in `[0, N_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContentId(pub usize);

impl ContentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for ContentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One cache state: a sorted set of exactly `L` distinct contents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheState {
    contents: Vec<ContentId>,
}

impl CacheState {
    /// Builds a state from a list of contents, sorting and rejecting duplicates.
    pub fn new(mut contents: Vec<ContentId>) -> Result<Self> {
        contents.sort_unstable();
        if contents.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(
                "cache state contains duplicate contents".into(),
            ));
        }
        Ok(Self { contents })
    }

    pub fn contents(&self) -> &[ContentId] {
        &self.contents
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    pub fn contains(&self, l: ContentId) -> bool {
        self.contents.binary_search(&l).is_ok()
    }

    /// The state obtained by replacing cached `q` with new content `l`.
    fn exchange(&self, q: ContentId, l: ContentId) -> Self {
        let mut contents: Vec<ContentId> = self
            .contents
            .iter()
            .copied()
            .filter(|&c| c != q)
            .collect();
        contents.push(l);
        contents.sort_unstable();
        Self { contents }
    }
}

/// Binomial coefficient, widened to avoid overflow while sizing state spaces.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 1..=k {
        result = result * (n as u128 - (k as u128 - i as u128)) / i as u128;
    }
    result
}

/// All `L`-subsets of `N_c` contents with their lexicographic ranks.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n_contents: usize,
    cache_size: usize,
    states: Vec<CacheState>,
}

impl StateSpace {
    /// Enumerates every cache state in lexicographic order of sorted content sets.
    pub fn build(n_contents: usize, cache_size: usize) -> Result<Self> {
        Self::build_with_cap(n_contents, cache_size, DEFAULT_STATE_CAP)
    }

    pub fn build_with_cap(n_contents: usize, cache_size: usize, cap: usize) -> Result<Self> {
        if cache_size < 1 || cache_size >= n_contents {
            return Err(Error::InvalidDimensions {
                n_contents,
                cache_size,
            });
        }
        let count = binomial(n_contents, cache_size);
        if count > cap as u128 {
            return Err(Error::TooLarge { states: count, cap });
        }
        let mut states = Vec::with_capacity(count as usize);
        let mut combo: Vec<usize> = (0..cache_size).collect();
        loop {
            states.push(CacheState {
                contents: combo.iter().map(|&c| ContentId(c)).collect(),
            });
            // Advance to the next combination in lexicographic order.
            let mut i = cache_size;
            loop {
                if i == 0 {
                    return Ok(Self {
                        n_contents,
                        cache_size,
                        states,
                    });
                }
                i -= 1;
                if combo[i] != i + n_contents - cache_size {
                    break;
                }
            }
            combo[i] += 1;
            for j in i + 1..cache_size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }

    pub fn n_contents(&self) -> usize {
        self.n_contents
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[CacheState] {
        &self.states
    }

    pub fn state(&self, k: usize) -> Result<&CacheState> {
        self.states.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            limit: self.states.len(),
        })
    }

    /// Lexicographic rank of a state; the inverse of `state(k)`.
    pub fn index_of(&self, state: &CacheState) -> Result<usize> {
        if state.len() != self.cache_size {
            return Err(Error::DimensionMismatch {
                expected: self.cache_size,
                got: state.len(),
            });
        }
        let mut rank: u128 = 0;
        let k = self.cache_size;
        for (i, &c) in state.contents.iter().enumerate() {
            if c.0 >= self.n_contents {
                return Err(Error::UnknownContent {
                    id: c.0,
                    n_contents: self.n_contents,
                });
            }
            let start = if i == 0 { 0 } else { state.contents[i - 1].0 + 1 };
            for j in start..c.0 {
                rank += binomial(self.n_contents - j - 1, k - i - 1);
            }
        }
        Ok(rank as usize)
    }

    /// Binary membership vector `s_k` of length `N_c`.
    pub fn state_vector(&self, k: usize) -> Result<Vec<f64>> {
        let state = self.state(k)?;
        let mut v = vec![0.0; self.n_contents];
        for c in state.contents() {
            v[c.0] = 1.0;
        }
        Ok(v)
    }

    /// Dense `N_c x N_s` matrix whose column `k` is `state_vector(k)`.
    pub fn state_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.states.len()]; self.n_contents];
        for (k, state) in self.states.iter().enumerate() {
            for c in state.contents() {
                m[c.0][k] = 1.0;
            }
        }
        m
    }

    /// States differing from state `k` in exactly one content.
    pub fn neighbors(&self, k: usize) -> Result<Vec<usize>> {
        let state = self.state(k)?.clone();
        let mut out = Vec::with_capacity(self.cache_size * (self.n_contents - self.cache_size));
        for q in state.contents() {
            for l in 0..self.n_contents {
                let l = ContentId(l);
                if state.contains(l) {
                    continue;
                }
                let m = state.exchange(*q, l);
                out.push(self.index_of(&m).expect("exchange stays in catalog"));
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// States reachable from `k` by inserting content `l` (one eviction choice per
    /// cached content); requires `l` not cached in `k`.
    pub fn content_neighbors(&self, k: usize, l: ContentId) -> Result<Vec<usize>> {
        if l.0 >= self.n_contents {
            return Err(Error::UnknownContent {
                id: l.0,
                n_contents: self.n_contents,
            });
        }
        let state = self.state(k)?.clone();
        if state.contains(l) {
            return Err(Error::ContentAlreadyCached {
                content: l.0,
                state: k,
            });
        }
        let mut out = Vec::with_capacity(self.cache_size);
        for q in state.contents() {
            let m = state.exchange(*q, l);
            out.push(self.index_of(&m).expect("exchange stays in catalog"));
        }
        out.sort_unstable();
        Ok(out)
    }

    /// The content `e(k, m)` cached in `k` but not in its neighbor `m`.
    pub fn exchanged_content(&self, k: usize, m: usize) -> Result<ContentId> {
        let sk = self.state(k)?;
        let sm = self.state(m)?;
        let mut diff = sk.contents().iter().filter(|c| !sm.contains(**c));
        let first = diff.next();
        let second = diff.next();
        match (first, second) {
            (Some(&c), None) if k != m => Ok(c),
            _ => Err(Error::NotNeighbors { a: k, b: m }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(ids: &[usize]) -> CacheState {
        CacheState::new(ids.iter().map(|&i| ContentId(i)).collect()).unwrap()
    }

    #[test]
    fn enumerates_all_subsets_in_lexicographic_order() {
        let space = StateSpace::build(3, 2).unwrap();
        assert_eq!(space.n_states(), 3);
        assert_eq!(space.states()[0], state(&[0, 1]));
        assert_eq!(space.states()[1], state(&[0, 2]));
        assert_eq!(space.states()[2], state(&[1, 2]));

        assert_eq!(StateSpace::build(4, 2).unwrap().n_states(), 6);
        // binomial(10, 5) computed directly
        assert_eq!(StateSpace::build(10, 5).unwrap().n_states(), 252);
    }

    #[test]
    fn rejects_invalid_dimensions_and_caps() {
        assert!(matches!(
            StateSpace::build(3, 3),
            Err(Error::InvalidDimensions { .. })
        ));
        assert!(matches!(
            StateSpace::build(3, 0),
            Err(Error::InvalidDimensions { .. })
        ));
        assert!(matches!(
            StateSpace::build_with_cap(30, 15, 1000),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn index_of_inverts_enumeration() {
        let space = StateSpace::build(6, 3).unwrap();
        for (k, s) in space.states().iter().enumerate() {
            assert_eq!(space.index_of(s).unwrap(), k);
        }
    }

    #[test]
    fn state_vectors_match_definition() {
        let space = StateSpace::build(3, 2).unwrap();
        let k01 = space.index_of(&state(&[0, 1])).unwrap();
        let k12 = space.index_of(&state(&[1, 2])).unwrap();
        assert_eq!(space.state_vector(k01).unwrap(), vec![1.0, 1.0, 0.0]);
        assert_eq!(space.state_vector(k12).unwrap(), vec![0.0, 1.0, 1.0]);

        let space4 = StateSpace::build(4, 2).unwrap();
        let k03 = space4.index_of(&state(&[0, 3])).unwrap();
        assert_eq!(space4.state_vector(k03).unwrap(), vec![1.0, 0.0, 0.0, 1.0]);

        assert!(matches!(
            space.state_vector(99),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn state_matrix_row_and_column_sums() {
        let space = StateSpace::build(3, 2).unwrap();
        let m = space.state_matrix();
        assert_eq!(m[0], vec![1.0, 1.0, 0.0]);
        assert_eq!(m[1], vec![1.0, 0.0, 1.0]);
        assert_eq!(m[2], vec![0.0, 1.0, 1.0]);
        // row sums equal binomial(N_c - 1, L - 1) = 2
        for row in &m {
            assert_eq!(row.iter().sum::<f64>(), 2.0);
        }

        let space4 = StateSpace::build(4, 2).unwrap();
        let m4 = space4.state_matrix();
        for k in 0..6 {
            let col_sum: f64 = m4.iter().map(|row| row[k]).sum();
            assert_eq!(col_sum, 2.0);
        }
    }

    #[test]
    fn neighbor_sets_by_enumeration() {
        let space = StateSpace::build(3, 2).unwrap();
        let k01 = space.index_of(&state(&[0, 1])).unwrap();
        let expected = vec![
            space.index_of(&state(&[0, 2])).unwrap(),
            space.index_of(&state(&[1, 2])).unwrap(),
        ];
        assert_eq!(space.neighbors(k01).unwrap(), expected);
        for k in 0..space.n_states() {
            assert_eq!(space.neighbors(k).unwrap().len(), 2);
        }

        let space4 = StateSpace::build(4, 2).unwrap();
        let k01 = space4.index_of(&state(&[0, 1])).unwrap();
        assert_eq!(space4.neighbors(k01).unwrap().len(), 4);
    }

    #[test]
    fn neighbor_symmetry() {
        let space = StateSpace::build(5, 2).unwrap();
        for k in 0..space.n_states() {
            for m in space.neighbors(k).unwrap() {
                assert!(space.neighbors(m).unwrap().contains(&k));
            }
        }
    }

    #[test]
    fn content_neighbors_by_enumeration() {
        let space = StateSpace::build(3, 2).unwrap();
        let k01 = space.index_of(&state(&[0, 1])).unwrap();
        let expected = vec![
            space.index_of(&state(&[0, 2])).unwrap(),
            space.index_of(&state(&[1, 2])).unwrap(),
        ];
        assert_eq!(space.content_neighbors(k01, ContentId(2)).unwrap(), expected);

        let space4 = StateSpace::build(4, 2).unwrap();
        let k01 = space4.index_of(&state(&[0, 1])).unwrap();
        let expected4 = vec![
            space4.index_of(&state(&[0, 3])).unwrap(),
            space4.index_of(&state(&[1, 3])).unwrap(),
        ];
        assert_eq!(
            space4.content_neighbors(k01, ContentId(3)).unwrap(),
            expected4
        );

        assert!(matches!(
            space.content_neighbors(k01, ContentId(0)),
            Err(Error::ContentAlreadyCached { .. })
        ));
    }

    #[test]
    fn content_neighbors_are_neighbors_of_size_l() {
        let space = StateSpace::build(5, 3).unwrap();
        for k in 0..space.n_states() {
            let nb = space.neighbors(k).unwrap();
            for l in 0..5 {
                let l = ContentId(l);
                if space.state(k).unwrap().contains(l) {
                    continue;
                }
                let cn = space.content_neighbors(k, l).unwrap();
                assert_eq!(cn.len(), 3);
                for m in cn {
                    assert!(nb.contains(&m));
                }
            }
        }
    }

    #[test]
    fn exchanged_content_antisymmetry() {
        let space = StateSpace::build(3, 2).unwrap();
        let k01 = space.index_of(&state(&[0, 1])).unwrap();
        let k02 = space.index_of(&state(&[0, 2])).unwrap();
        assert_eq!(space.exchanged_content(k01, k02).unwrap(), ContentId(1));
        assert_eq!(space.exchanged_content(k02, k01).unwrap(), ContentId(2));

        let space5 = StateSpace::build(5, 2).unwrap();
        for k in 0..space5.n_states() {
            for m in space5.neighbors(k).unwrap() {
                let out = space5.exchanged_content(k, m).unwrap();
                let inn = space5.exchanged_content(m, k).unwrap();
                assert_ne!(out, inn);
                let rebuilt = space5.state(k).unwrap().exchange(out, inn);
                assert_eq!(&rebuilt, space5.state(m).unwrap());
            }
        }

        assert!(matches!(
            space.exchanged_content(k01, k01),
            Err(Error::NotNeighbors { .. })
        ));
    }
}
