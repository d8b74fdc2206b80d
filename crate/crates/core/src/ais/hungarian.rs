//! Exact O(n³) minimum-cost assignment (Hungarian method, shortest
//! augmenting paths with dual potentials).

use serde::{Deserialize, Serialize};

use super::cost::CostMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub row: usize,
    pub col: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Sorted by row.
    pub matches: Vec<MatchPair>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self) -> f64 {
        self.matches.iter().map(|m| m.cost).sum()
    }

    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.matches.iter().find(|m| m.row == row).map(|m| m.col)
    }
}

/// Row→column permutation minimizing the total of a square row-major
/// matrix of finite costs.
pub fn solve_dense(a: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(a.len(), n * n);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row (1-based) assigned to column j; column 0 is virtual
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a[(i0 - 1) * n + j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
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
        row_to_col[p[j] - 1] = j - 1;
    }
    row_to_col
}

/// Optimal one-to-one assignment on a rectangular matrix with sentinels.
///
/// The matrix is padded to square with `10·max + 1`. Sentinels are replaced
/// by a penalty larger than the sum of all finite entries, so the solver
/// first maximizes the number of finite pairings and then minimizes their
/// cost. Sentinel pairings are dropped and reported unmatched.
pub fn hungarian(c: &CostMatrix) -> Assignment {
    let (n, m) = (c.rows(), c.cols());
    if n == 0 || m == 0 {
        return Assignment {
            matches: Vec::new(),
            unmatched_rows: (0..n).collect(),
            unmatched_cols: (0..m).collect(),
        };
    }
    let finite = c.cells.iter().filter(|x| !x.is_sentinel()).map(|x| x.cost);
    let max_finite = finite.clone().fold(0.0, f64::max);
    let penalty = finite.sum::<f64>() + 1.0;
    let pad = 10.0 * max_finite + 1.0;
    let size = n.max(m);
    let mut a = vec![pad; size * size];
    for i in 0..n {
        for j in 0..m {
            a[i * size + j] = if c.is_sentinel(i, j) { penalty } else { c.cost(i, j) };
        }
    }
    let perm = solve_dense(&a, size);
    let mut matches = Vec::new();
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; m];
    for (i, &j) in perm.iter().enumerate().take(n) {
        if j < m && !c.is_sentinel(i, j) {
            matches.push(MatchPair {
                row: i,
                col: j,
                cost: c.cost(i, j),
            });
            row_used[i] = true;
            col_used[j] = true;
        }
    }
    Assignment {
        matches,
        unmatched_rows: (0..n).filter(|&i| !row_used[i]).collect(),
        unmatched_cols: (0..m).filter(|&j| !col_used[j]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const S: f64 = f64::INFINITY;

    /// Exhaustive oracle over all injections of the smaller side: fewest
    /// sentinel pairings first, then lowest finite total.
    pub(crate) fn brute_force(c: &[Vec<f64>]) -> (usize, f64) {
        let n = c.len();
        let m = c[0].len();
        let mut best = (usize::MAX, f64::INFINITY);
        let mut cols: Vec<usize> = (0..m).collect();
        permute(&mut cols, 0, &mut |perm| {
            let mut sent = 0;
            let mut total = 0.0;
            for (i, &j) in perm.iter().enumerate().take(n.min(m)) {
                let (i, j) = if n <= m { (i, j) } else { (j, i) };
                if i >= n || j >= m {
                    continue;
                }
                if c[i][j].is_finite() {
                    total += c[i][j];
                } else {
                    sent += 1;
                }
            }
            if (sent, total) < best {
                best = (sent, total);
            }
        });
        best
    }

    fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }

    fn transpose_if_tall(c: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if c.len() <= c[0].len() {
            return c.to_vec();
        }
        (0..c[0].len()).map(|j| c.iter().map(|r| r[j]).collect()).collect()
    }

    #[test]
    fn one_by_one() {
        let a = hungarian(&CostMatrix::from_costs(&[vec![5.0]]));
        assert_eq!(a.matches, vec![MatchPair { row: 0, col: 0, cost: 5.0 }]);
    }

    #[test]
    fn three_by_three_example() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&CostMatrix::from_costs(&c));
        let map: Vec<(usize, usize)> = a.matches.iter().map(|m| (m.row, m.col)).collect();
        assert_eq!(map, vec![(0, 1), (1, 0), (2, 2)]);
        assert_eq!(a.total_cost(), 5.0);
    }

    #[test]
    fn all_sentinel() {
        let a = hungarian(&CostMatrix::from_costs(&[vec![S, S], vec![S, S], vec![S, S]]));
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_rows, vec![0, 1, 2]);
        assert_eq!(a.unmatched_cols, vec![0, 1]);
    }

    #[test]
    fn rectangular_leftovers() {
        let a = hungarian(&CostMatrix::from_costs(&[vec![7.0, 1.0, 9.0]]));
        assert_eq!(a.matches[0].col, 1);
        assert_eq!(a.unmatched_cols, vec![0, 2]);
        let a = hungarian(&CostMatrix::from_costs(&[vec![3.0], vec![1.0], vec![2.0]]));
        assert_eq!(a.matches[0].row, 1);
        assert_eq!(a.unmatched_rows, vec![0, 2]);
    }

    #[test]
    fn prefers_more_matches_over_cheaper_fewer() {
        // the cheap 0-0 pairing would strand row 1
        let c = vec![vec![1.0, 50.0], vec![2.0, S]];
        let a = hungarian(&CostMatrix::from_costs(&c));
        assert_eq!(a.matches.len(), 2);
        assert_eq!(a.total_cost(), 52.0);
    }

    fn arb_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=6, 1usize..=6).prop_flat_map(|(n, m)| {
            prop::collection::vec(
                prop::collection::vec(prop_oneof![8 => (0u32..=100).prop_map(f64::from), 1 => Just(S)], m),
                n,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn matches_brute_force(c in arb_matrix()) {
            let a = hungarian(&CostMatrix::from_costs(&c));
            let (sent, total) = brute_force(&transpose_if_tall(&c));
            let k = c.len().min(c[0].len());
            prop_assert_eq!(a.matches.len(), k - sent);
            prop_assert_eq!(a.total_cost(), total);
            let mut rows: Vec<usize> = a.matches.iter().map(|m| m.row).collect();
            let mut cols: Vec<usize> = a.matches.iter().map(|m| m.col).collect();
            rows.dedup();
            cols.sort();
            cols.dedup();
            prop_assert_eq!(rows.len(), a.matches.len());
            prop_assert_eq!(cols.len(), a.matches.len());
            prop_assert!(a.matches.iter().all(|m| m.cost.is_finite()));
            prop_assert_eq!(a.unmatched_rows.len() + a.matches.len(), c.len());
            prop_assert_eq!(a.unmatched_cols.len() + a.matches.len(), c[0].len());
        }

        #[test]
        fn scaling_keeps_unique_optimum(n in 2usize..=5, seed in any::<u64>(), k in 1u32..50) {
            // distinct powers of two make every assignment total distinct
            let mut vals: Vec<f64> = (0..n * n).map(|i| (1u64 << i) as f64).collect();
            let mut s = seed;
            for i in (1..vals.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                vals.swap(i, (s >> 33) as usize % (i + 1));
            }
            let c: Vec<Vec<f64>> = vals.chunks(n).map(|r| r.to_vec()).collect();
            let scaled: Vec<Vec<f64>> = c.iter().map(|r| r.iter().map(|x| x * k as f64).collect()).collect();
            let a = hungarian(&CostMatrix::from_costs(&c));
            let b = hungarian(&CostMatrix::from_costs(&scaled));
            let pa: Vec<(usize, usize)> = a.matches.iter().map(|m| (m.row, m.col)).collect();
            let pb: Vec<(usize, usize)> = b.matches.iter().map(|m| (m.row, m.col)).collect();
            prop_assert_eq!(pa, pb);
        }
    }
}
