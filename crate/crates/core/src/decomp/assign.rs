//! Minimum-cost rectangular assignment (shortest augmenting paths with
//! dual potentials, O(n²m)).

/// Solve the linear assignment problem for a `rows × cols` cost matrix.
///
/// Returns, for each row, the assigned column. When `rows <= cols` every row
/// is assigned; otherwise exactly `cols` rows are assigned and the rest are
/// `None`. Costs must be finite.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        solve(rows, cols, |i, j| cost[i][j])
    } else {
        let by_col = solve(cols, rows, |i, j| cost[j][i]);
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        out
    }
}

/// Core solver for `n <= m`; 1-based internally with a virtual column 0.
fn solve(n: usize, m: usize, a: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j]: row matched to column j (0 = none); way[j]: previous column on the path.
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
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

/// Total cost of an assignment, summed in row order.
pub fn assignment_cost(cost: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| cost[i][c]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_textbook_case() {
        let c = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ];
        let a = min_cost_assignment(&c);
        assert_eq!(assignment_cost(&c, &a), 5.0);
        assert_eq!(a, vec![Some(1), Some(0), Some(2)]);
    }

    #[test]
    fn rectangular_both_ways() {
        let wide = vec![vec![10.0, 1.0, 7.0], vec![1.0, 10.0, 7.0]];
        let a = min_cost_assignment(&wide);
        assert_eq!(a, vec![Some(1), Some(0)]);
        let tall = vec![vec![10.0, 1.0], vec![1.0, 10.0], vec![0.5, 0.5]];
        let a = min_cost_assignment(&tall);
        assert_eq!(assignment_cost(&tall, &a), 1.5);
        assert_eq!(a.iter().filter(|x| x.is_some()).count(), 2);
    }

    #[test]
    fn empty_inputs() {
        assert!(min_cost_assignment(&[]).is_empty());
        assert_eq!(min_cost_assignment(&[vec![], vec![]]), vec![None, None]);
    }
}
