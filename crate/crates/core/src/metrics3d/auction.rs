//! Forward auction with epsilon scaling for the dense assignment problem.
//!
//! Unassigned rows ("bidders") repeatedly bid for the column that is
//! cheapest once its price is added, raising that price by the margin over
//! their second choice plus `epsilon`. Each phase ends with every row
//! assigned and the assignment within `epsilon` of optimal per row
//! (epsilon complementary slackness), so the final cost exceeds the
//! optimum by at most `n * epsilon`. Prices carry over between phases
//! while `epsilon` shrinks.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Bids allowed per row within one phase before giving up.
pub const MAX_BIDS_PER_ROW: u64 = 100_000;

/// Factor by which epsilon shrinks between phases.
pub const EPSILON_DIVISOR: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct AuctionOutcome {
    /// Column assigned to each row.
    pub assignment: Vec<usize>,
    pub phases: u32,
    pub bids: u64,
    pub final_epsilon: f64,
}

/// Solves the `n x n` problem with row-major `cost`, starting at
/// `initial_epsilon` and dividing by [`EPSILON_DIVISOR`] until the phase
/// run at some `epsilon < target_epsilon` completes.
pub fn solve(
    cost: &[f64],
    n: usize,
    initial_epsilon: f64,
    target_epsilon: f64,
) -> Result<AuctionOutcome> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if !(initial_epsilon > 0.0 && target_epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "auction epsilons must be positive, got {initial_epsilon} and {target_epsilon}"
        )));
    }
    let mut prices = vec![0.0f64; n];
    let mut row_of_col = vec![usize::MAX; n];
    let mut col_of_row = vec![usize::MAX; n];
    let mut epsilon = initial_epsilon;
    let mut phases = 0;
    let mut bids = 0u64;
    loop {
        bids += run_phase(cost, n, epsilon, &mut prices, &mut row_of_col, &mut col_of_row)?;
        phases += 1;
        if epsilon < target_epsilon {
            break;
        }
        epsilon /= EPSILON_DIVISOR;
    }
    log::trace!("auction n={n} phases={phases} bids={bids} epsilon={epsilon:e}");
    Ok(AuctionOutcome {
        assignment: col_of_row,
        phases,
        bids,
        final_epsilon: epsilon,
    })
}

fn run_phase(
    cost: &[f64],
    n: usize,
    epsilon: f64,
    prices: &mut [f64],
    row_of_col: &mut [usize],
    col_of_row: &mut [usize],
) -> Result<u64> {
    row_of_col.fill(usize::MAX);
    col_of_row.fill(usize::MAX);
    let mut unassigned: VecDeque<usize> = (0..n).collect();
    let cap = MAX_BIDS_PER_ROW.saturating_mul(n as u64);
    let mut bids = 0u64;

    while let Some(row) = unassigned.pop_front() {
        bids += 1;
        if bids > cap {
            return Err(Error::NoConvergence { epsilon, bids });
        }
        // Lowest and second-lowest cost + price; values are their negatives.
        let row_cost = &cost[row * n..(row + 1) * n];
        let mut best_col = 0;
        let mut best = f64::INFINITY;
        let mut second = f64::INFINITY;
        for (col, (&c, &p)) in row_cost.iter().zip(prices.iter()).enumerate() {
            let total = c + p;
            if total < best {
                second = best;
                best = total;
                best_col = col;
            } else if total < second {
                second = total;
            }
        }
        let increment = if second.is_finite() {
            second - best + epsilon
        } else {
            epsilon
        };
        prices[best_col] += increment;
        let evicted = row_of_col[best_col];
        if evicted != usize::MAX {
            col_of_row[evicted] = usize::MAX;
            unassigned.push_back(evicted);
        }
        row_of_col[best_col] = row;
        col_of_row[row] = best_col;
    }
    Ok(bids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics3d::hungarian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn total(cost: &[f64], n: usize, a: &[usize]) -> f64 {
        a.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum()
    }

    #[test]
    fn single_row() {
        let out = solve(&[2.5], 1, 1.0, 0.1).unwrap();
        assert_eq!(out.assignment, vec![0]);
    }

    #[test]
    fn within_n_epsilon_of_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..25 {
            let n = rng.random_range(1..60);
            let cost: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect();
            let out = solve(&cost, n, 0.125, 1e-4).unwrap();
            let mut seen = out.assignment.clone();
            seen.sort_unstable();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
            let opt = total(&cost, n, &hungarian::solve(&cost, n));
            let got = total(&cost, n, &out.assignment);
            assert!(got >= opt - 1e-12);
            assert!(got - opt <= n as f64 * out.final_epsilon + 1e-12);
        }
    }

    #[test]
    fn schedule_stops_below_target() {
        let out = solve(&[0.0, 1.0, 1.0, 0.0], 2, 1.0, 0.1).unwrap();
        // 1, 0.25, 0.0625
        assert_eq!(out.phases, 3);
        assert_eq!(out.final_epsilon, 0.0625);
        assert_eq!(out.assignment, vec![0, 1]);
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        assert!(solve(&[0.0], 1, 0.0, 0.1).is_err());
    }
}
