//! Compressed sparse row storage for row-stochastic transition matrices.

/// Row-stochastic sparse matrix; row `j` holds the outgoing transitions of
/// state `j`. Zero entries are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds the matrix from per-row `(target, probability)` lists. Zero
    /// probabilities are dropped; duplicate targets are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let start = cols.len();
            for (c, v) in row {
                if v == 0.0 {
                    continue;
                }
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }

    /// Number of states.
    pub fn size(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[j]..self.row_ptr[j + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.row(from)
            .find(|&(c, _)| c == to)
            .map_or(0.0, |(_, v)| v)
    }

    pub fn row_sum(&self, j: usize) -> f64 {
        self.row(j).map(|(_, v)| v).sum()
    }

    /// `x P` for a row vector `x`.
    pub fn left_multiply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (k, p) in self.row(j) {
                    out[k] += xj * p;
                }
            }
        }
        out
    }

    /// `max_k |(x P - x)_k|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.left_multiply(x)
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Relabels states: old state `j` becomes `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut rows = vec![Vec::new(); self.size()];
        for j in 0..self.size() {
            rows[perm[j]] = self.row(j).map(|(k, v)| (perm[k], v)).collect();
        }
        Self::from_rows(rows)
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        let mut dense = vec![vec![0.0; n]; n];
        for (j, row) in dense.iter_mut().enumerate() {
            for (k, v) in self.row(j) {
                row[k] = v;
            }
        }
        dense
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_duplicates_and_drops_zeros() {
        let m = TransitionMatrix::from_rows(vec![vec![(1, 0.25), (0, 0.0), (1, 0.75)], vec![(0, 1.0)]]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.row_sum(1), 1.0);
    }

    #[test]
    fn permutation_relabels_states() {
        let m = TransitionMatrix::from_rows(vec![vec![(1, 1.0)], vec![(2, 1.0)], vec![(0, 1.0)]]);
        let p = m.permuted(&[2, 0, 1]);
        assert_eq!(p.get(2, 0), 1.0);
        assert_eq!(p.get(0, 1), 1.0);
        assert_eq!(p.get(1, 2), 1.0);
    }

    #[test]
    fn residual_of_uniform_cycle_is_zero() {
        let m = TransitionMatrix::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0)]]);
        assert_eq!(m.residual(&[0.5, 0.5]), 0.0);
        assert_eq!(m.residual(&[1.0, 0.0]), 1.0);
    }
}
