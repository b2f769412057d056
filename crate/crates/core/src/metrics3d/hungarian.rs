//! Exact minimum-cost perfect matching on a dense square cost matrix
//! (shortest augmenting paths with row and column potentials, O(n^3)).

/// Returns, for each row, the column it is matched to in a minimum-cost
/// assignment. `cost` is row-major with `n * n` entries.
pub fn solve(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Vec::new();
    }
    // 1-based bookkeeping; column 0 is a virtual source.
    let mut row_pot = vec![0.0f64; n + 1];
    let mut col_pot = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_slack = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut col = 0usize;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[col] = true;
            let r = col_owner[col];
            let mut delta = f64::INFINITY;
            let mut next = 0usize;
            let row_cost = &cost[(r - 1) * n..r * n];
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = row_cost[j - 1] - row_pot[r] - col_pot[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = col;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    next = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    row_pot[col_owner[j]] += delta;
                    col_pot[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            col = next;
            if col_owner[col] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col];
            col_owner[col] = col_owner[prev];
            col = prev;
            if col == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[col_owner[j] - 1] = j - 1;
    }
    assignment
}
