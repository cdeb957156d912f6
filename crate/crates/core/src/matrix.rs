//! Sparse column-stochastic transition matrices.
//!
//! Every column of a transition matrix holds at most `1 + L(N_c - L)` nonzeros
//! (the diagonal plus one entry per neighbor), so matrices are assembled and
//! stored column by column.

use crate::error::{Error, Result};

/// Where an LRU conditional-recency table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LruTableSource {
    /// Exact enumeration of recency windows over the supplied history.
    Exact,
    /// Estimated from a seeded recency simulation.
    Estimated,
}

/// An `N_s x N_s` column-stochastic matrix in sparse column-major form.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n_states: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lru_source: Option<LruTableSource>,
}

impl TransitionMatrix {
    /// Assembles a matrix from per-column `(row, value)` entries. Entries must be
    /// nonnegative and each column must sum to 1 within `1e-12`.
    pub fn from_columns(n_states: usize, mut cols: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if cols.len() != n_states {
            return Err(Error::DimensionMismatch {
                expected: n_states,
                got: cols.len(),
            });
        }
        for col in cols.iter_mut() {
            col.retain(|&(_, v)| v != 0.0);
            col.sort_unstable_by_key(|&(row, _)| row);
            let mut sum = 0.0;
            for &(row, v) in col.iter() {
                if row >= n_states {
                    return Err(Error::IndexOutOfRange {
                        index: row,
                        limit: n_states,
                    });
                }
                if !(0.0..=1.0 + 1e-12).contains(&v) {
                    return Err(Error::InvalidProbability { value: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidProbability { value: sum });
            }
        }
        Ok(Self {
            n_states,
            cols,
            lru_source: None,
        })
    }

    pub fn identity(n_states: usize) -> Self {
        Self {
            n_states,
            cols: (0..n_states).map(|k| vec![(k, 1.0)]).collect(),
            lru_source: None,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn lru_source(&self) -> Option<LruTableSource> {
        self.lru_source
    }

    pub(crate) fn set_lru_source(&mut self, source: LruTableSource) {
        self.lru_source = Some(source);
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cols[col]
            .binary_search_by_key(&row, |&(r, _)| r)
            .map(|i| self.cols[col][i].1)
            .unwrap_or(0.0)
    }

    pub fn column(&self, col: usize) -> &[(usize, f64)] {
        &self.cols[col]
    }

    /// Matrix-vector product `y = Theta * x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_states {
            return Err(Error::DimensionMismatch {
                expected: self.n_states,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_states];
        for (k, col) in self.cols.iter().enumerate() {
            let xk = x[k];
            if xk == 0.0 {
                continue;
            }
            for &(row, v) in col {
                y[row] += v * xk;
            }
        }
        Ok(y)
    }

    /// Convex combination `sum_i w_i * M_i` of matrices with equal dimensions.
    pub fn weighted_sum(terms: &[(f64, &TransitionMatrix)]) -> Result<Self> {
        let n = terms
            .first()
            .ok_or(Error::EmptyInput("weighted_sum needs at least one term"))?
            .1
            .n_states;
        let mut dense_cols: Vec<Vec<f64>> = vec![vec![0.0; n]; n];
        for &(w, m) in terms {
            if m.n_states != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.n_states,
                });
            }
            for (k, col) in m.cols.iter().enumerate() {
                for &(row, v) in col {
                    dense_cols[k][row] += w * v;
                }
            }
        }
        let cols = dense_cols
            .into_iter()
            .map(|col| {
                col.into_iter()
                    .enumerate()
                    .filter(|&(_, v)| v != 0.0)
                    .collect()
            })
            .collect();
        TransitionMatrix::from_columns(n, cols)
    }

    /// Largest absolute entrywise difference between two matrices.
    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        assert_eq!(self.n_states, other.n_states);
        let mut max = 0.0f64;
        for k in 0..self.n_states {
            let mut rows: Vec<usize> = self.cols[k].iter().map(|&(r, _)| r).collect();
            rows.extend(other.cols[k].iter().map(|&(r, _)| r));
            rows.sort_unstable();
            rows.dedup();
            for r in rows {
                max = max.max((self.get(r, k) - other.get(r, k)).abs());
            }
        }
        max
    }

    /// Verifies nonnegative entries and unit column sums within `tol`.
    pub fn check_column_stochastic(&self, tol: f64) -> Result<()> {
        for col in &self.cols {
            let mut sum = 0.0;
            for &(_, v) in col {
                if !(-(tol)..=1.0 + tol).contains(&v) {
                    return Err(Error::InvalidProbability { value: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > tol {
                return Err(Error::InvalidProbability { value: sum });
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_states]; self.n_states];
        for (k, col) in self.cols.iter().enumerate() {
            for &(row, v) in col {
                dense[row][k] = v;
            }
        }
        dense
    }

    /// Nonzero entries as `(row, col, value)` triplets in column-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (k, col) in self.cols.iter().enumerate() {
            for &(row, v) in col {
                out.push((row, k, v));
            }
        }
        out
    }
}
