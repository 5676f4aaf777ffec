//! Rectangular linear assignment (Hungarian method with potentials).

use crate::scalar::Real;

/// Minimum-cost assignment for a `rows x cols` cost matrix given row-major.
///
/// Every row of the smaller side is assigned. Returns, per row, the assigned
/// column (or `None` when there are more rows than columns).
pub fn min_cost_assignment<T: Real>(cost: &[T], rows: usize, cols: usize) -> Vec<Option<usize>> {
    assert_eq!(cost.len(), rows * cols, "cost matrix shape");
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        solve(|i, j| cost[i * cols + j], rows, cols)
    } else {
        let by_col = solve(|i, j| cost[j * cols + i], cols, rows);
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        out
    }
}

/// Assignment maximizing the total weight, where only entries with
/// `weight > 0` may be paired. Returns `(row, col)` pairs sorted by row.
pub fn max_weight_matching<T: Real>(weight: &[T], rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let cost: Vec<T> = weight.iter().map(|&w| if w > T::zero() { -w } else { T::zero() }).collect();
    min_cost_assignment(&cost, rows, cols)
        .into_iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| (r, c)))
        .filter(|&(r, c)| weight[r * cols + c] > T::zero())
        .collect()
}

// Shortest augmenting path over reduced costs; requires n <= m.
fn solve<T: Real>(a: impl Fn(usize, usize) -> T, n: usize, m: usize) -> Vec<Option<usize>> {
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    // p[j]: row (1-based) assigned to column j; 0 = free.
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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
    let mut out = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}
