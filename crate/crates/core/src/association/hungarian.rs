//! Minimum-cost bipartite assignment (shortest augmenting path with
//! potentials, O(n³)).

use nalgebra::DMatrix;

/// Result of a thresholded assignment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    /// `(row, col)` pairs in ascending row order.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

/// Square min-cost perfect matching; returns the column of every row.
fn solve_square(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    debug_assert_eq!(n, cost.ncols());
    // 1-based arrays with column 0 as the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

fn pad_square(cost: &DMatrix<f64>, fill: f64) -> DMatrix<f64> {
    let n = cost.nrows().max(cost.ncols());
    DMatrix::from_fn(n, n, |r, c| if r < cost.nrows() && c < cost.ncols() { cost[(r, c)] } else { fill })
}

/// Minimum-total-cost matching of `min(rows, cols)` pairs.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> Vec<(usize, usize)> {
    if cost.nrows() == 0 || cost.ncols() == 0 {
        return Vec::new();
    }
    let (rows, cols) = cost.shape();
    solve_square(&pad_square(cost, 0.0)).into_iter().enumerate().filter(|&(r, c)| r < rows && c < cols).collect()
}

/// Assignment on `cost` padded to square with `threshold`; pairs whose cost
/// is `>= threshold` are dropped afterwards.
pub fn hungarian(cost: &DMatrix<f64>, threshold: f64) -> Assignment {
    let (rows, cols) = cost.shape();
    let mut matches = Vec::new();
    if rows > 0 && cols > 0 {
        for (r, c) in solve_square(&pad_square(cost, threshold)).into_iter().enumerate() {
            if r < rows && c < cols && cost[(r, c)] < threshold {
                matches.push((r, c));
            }
        }
    }
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    for &(r, c) in &matches {
        row_used[r] = true;
        col_used[c] = true;
    }
    Assignment {
        matches,
        unmatched_rows: (0..rows).filter(|&r| !row_used[r]).collect(),
        unmatched_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
    }
}

/// Total cost of `pairs`, summed in the given order.
pub fn assignment_cost(cost: &DMatrix<f64>, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, c)| cost[(r, c)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_diagonal() {
        let m = DMatrix::from_fn(3, 3, |r, c| if r == c { 0.0 } else { 1.0 });
        assert_eq!(hungarian(&m, 0.8).matches, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn threshold_drop() {
        let m = DMatrix::from_element(1, 1, 0.9);
        let a = hungarian(&m, 0.8);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_rows, vec![0]);
        assert_eq!(a.unmatched_cols, vec![0]);
    }

    #[test]
    fn rectangular() {
        let m = DMatrix::from_row_slice(2, 3, &[0.9, 0.1, 0.5, 0.2, 0.3, 0.95]);
        let a = hungarian(&m, 0.8);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
        assert_eq!(a.unmatched_cols, vec![2]);
        let t = m.transpose();
        assert_eq!(min_cost_assignment(&t), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn empty() {
        let m = DMatrix::<f64>::zeros(0, 4);
        let a = hungarian(&m, 0.5);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_cols, vec![0, 1, 2, 3]);
    }
}
