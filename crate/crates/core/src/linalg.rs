//! Pivoted Cholesky factorisation of Gram matrices.

use crate::error::{Error, Result};

/// Diagonal entries below this are treated as a PSD violation.
pub const PSD_THRESHOLD: f64 = -1e-8;

/// `Pᵀ A P = L Lᵀ` truncated at numerical rank `rank`.
///
/// `factor[i]` holds row `i` of `L` in the *original* ordering (so a sample
/// is `factor · z` directly), with `rank` columns.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    pub rank: usize,
    pub factor: Vec<Vec<f64>>,
    pub pivots: Vec<usize>,
}

impl PivotedCholesky {
    /// Stops once the largest remaining diagonal falls below
    /// `rel_tol · max diag(A)`; fails if any remaining diagonal is below
    /// [`PSD_THRESHOLD`].
    pub fn new(a: &[Vec<f64>], rel_tol: f64) -> Result<Self> {
        let n = a.len();
        if a.iter().any(|row| row.len() != n) {
            return Err(Error::param("matrix", "Gram matrix must be square"));
        }
        let mut diag: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        let scale = diag.iter().cloned().fold(0.0, f64::max);
        let mut perm: Vec<usize> = (0..n).collect();
        // rows of L in original order; row i has one entry per completed pivot
        let mut rows: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut pivots = Vec::new();
        for j in 0..n {
            if let Some(&bad) = perm[j..].iter().find(|&&p| diag[p] < PSD_THRESHOLD) {
                return Err(Error::NotPositiveSemidefinite {
                    pivot: bad,
                    value: diag[bad],
                });
            }
            let (pos, &dmax) = perm[j..]
                .iter()
                .map(|&p| &diag[p])
                .enumerate()
                .max_by(|x, y| x.1.partial_cmp(y.1).unwrap_or(std::cmp::Ordering::Equal))
                .expect("non-empty");
            if dmax <= rel_tol * scale || dmax <= 0.0 {
                break;
            }
            perm.swap(j, j + pos);
            let p = perm[j];
            let root = dmax.sqrt();
            let pivot_row = std::mem::take(&mut rows[p]);
            for &i in &perm[j + 1..] {
                let dot: f64 = rows[i].iter().zip(&pivot_row).map(|(x, y)| x * y).sum();
                let v = (a[i][p] - dot) / root;
                rows[i].push(v);
                diag[i] -= v * v;
            }
            rows[p] = pivot_row;
            rows[p].push(root);
            for &i in &perm[..j] {
                rows[i].push(0.0);
            }
            pivots.push(p);
        }
        let rank = pivots.len();
        let factor = rows
            .into_iter()
            .map(|mut r| {
                r.resize(rank, 0.0);
                r
            })
            .collect();
        Ok(Self { rank, factor, pivots })
    }

    /// `L z` for `z` of length `rank`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        self.factor
            .iter()
            .map(|row| row.iter().zip(z).map(|(l, z)| l * z).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_rank_deficient_gram() {
        // Gram of vectors (1,0), (1,1), (2,1), (0,0)
        let v = [[1.0, 0.0], [1.0, 1.0], [2.0, 1.0], [0.0, 0.0]];
        let a: Vec<Vec<f64>> = v
            .iter()
            .map(|x| v.iter().map(|y| x[0] * y[0] + x[1] * y[1]).collect())
            .collect();
        let c = PivotedCholesky::new(&a, 1e-12).unwrap();
        assert_eq!(c.rank, 2);
        for i in 0..4 {
            for j in 0..4 {
                let r: f64 = (0..c.rank).map(|k| c.factor[i][k] * c.factor[j][k]).sum();
                assert!((r - a[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(
            PivotedCholesky::new(&a, 1e-12),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }
}
