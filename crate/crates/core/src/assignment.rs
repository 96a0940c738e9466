//! Exact rectangular assignment (Hungarian method with potentials) and a
//! threshold-graph perfect matching test used for bottleneck problems.

/// Minimum-cost assignment of every row of a `rows x cols` cost matrix
/// (row-major, `rows <= cols`) to a distinct column. Returns the column of
/// each row. Runs in O(rows^2 * cols).
pub fn solve(costs: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    assert!(rows <= cols, "assignment needs rows <= cols");
    assert_eq!(costs.len(), rows * cols);
    if rows == 0 {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| costs[(i - 1) * cols + (j - 1)];
    // 1-based, column 0 is a virtual start column
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Perfect matching of a square bipartite graph given as adjacency lists,
/// by repeated augmenting paths. Returns the column of each row, or `None`
/// if no perfect matching exists.
pub fn perfect_matching(adjacency: &[Vec<usize>], n: usize) -> Option<Vec<usize>> {
    let mut col_owner = vec![usize::MAX; n];
    for row in 0..n {
        let mut seen = vec![false; n];
        if !augment(row, adjacency, &mut seen, &mut col_owner) {
            return None;
        }
    }
    let mut rows = vec![0; n];
    for (c, &r) in col_owner.iter().enumerate() {
        rows[r] = c;
    }
    Some(rows)
}

fn augment(row: usize, adj: &[Vec<usize>], seen: &mut [bool], col_owner: &mut [usize]) -> bool {
    for &c in &adj[row] {
        if seen[c] {
            continue;
        }
        seen[c] = true;
        if col_owner[c] == usize::MAX || augment(col_owner[c], adj, seen, col_owner) {
            col_owner[c] = row;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(costs: &[f64], cols: usize, a: &[usize]) -> f64 {
        a.iter().enumerate().map(|(i, &j)| costs[i * cols + j]).sum()
    }

    #[test]
    fn square_instance() {
        let c = [1.0, 2.0, 1.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
        let a = solve(&c, 3, 3);
        assert_eq!(total(&c, 3, &a), 13.0);
    }

    #[test]
    fn rectangular_instance() {
        let c = [1.0, 0.0, 5.0, 2.0, 3.0, 1.0];
        let a = solve(&c, 2, 3);
        assert_eq!(a, vec![1, 2]);
    }

    #[test]
    fn matches_permutation_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (rows, cols) = (rng.random_range(1..5), 5);
            let c: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
            let a = solve(&c, rows, cols);
            let mut best = f64::INFINITY;
            permute(&mut (0..cols).collect(), 0, rows, &mut |p| {
                best = best.min(total(&c, cols, &p[..rows]));
            });
            assert!((total(&c, cols, &a) - best).abs() < 1e-12);
        }
    }

    fn permute(v: &mut Vec<usize>, k: usize, depth: usize, f: &mut dyn FnMut(&[usize])) {
        if k == depth {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, depth, f);
            v.swap(k, i);
        }
    }

    #[test]
    fn perfect_matching_cases() {
        let adj = vec![vec![0, 1], vec![0]];
        assert_eq!(perfect_matching(&adj, 2), Some(vec![1, 0]));
        let adj = vec![vec![0], vec![0]];
        assert_eq!(perfect_matching(&adj, 2), None);
    }
}
