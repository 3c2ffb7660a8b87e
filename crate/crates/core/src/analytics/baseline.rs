use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forge::winning_subsets;
use crate::model::{CellMask, Cell, GameInstance, CELLS};

/// Chance of success for a persuader revealing six random cells.
pub const CHANCE_LINE: f64 = 0.075;
/// The coarser chance line used before the closed form was derived.
pub const NAIVE_CHANCE_LINE: f64 = 0.10;

/// Probability that `n` uniform draws over nine cells hit both witness
/// cells and neither of the two other hidden cells.
pub fn p_win_closed(n: u32) -> f64 {
    let n = n as i32;
    (7.0f64 / 9.0).powi(n) * (1.0 - 2.0 * (6.0f64 / 7.0).powi(n) + (5.0f64 / 7.0).powi(n))
}

/// Same quantity by dynamic programming over
/// (witness cells seen in 0..=2) x (other hidden cell seen).
pub fn p_win_oracle(n: u32) -> f64 {
    const CORRECT: f64 = 2.0 / 9.0;
    const INCORRECT: f64 = 2.0 / 9.0;
    const IRRELEVANT: f64 = 5.0 / 9.0;
    // dist[seen][poisoned]; seen counts distinct witness cells.
    let mut dist = [[0.0f64; 2]; 3];
    dist[0][0] = 1.0;
    for _ in 0..n {
        let mut next = [[0.0f64; 2]; 3];
        for seen in 0..3 {
            for poisoned in 0..2 {
                let p = dist[seen][poisoned];
                if p == 0.0 {
                    continue;
                }
                let fresh = (2 - seen) as f64 / 9.0;
                let repeat = CORRECT - fresh;
                if seen < 2 {
                    next[seen + 1][poisoned] += p * fresh;
                }
                next[seen][poisoned] += p * (repeat + IRRELEVANT);
                next[seen][1] += p * INCORRECT;
            }
        }
        dist = next;
    }
    dist[2][0]
}

/// Monte Carlo estimate against the winning-subset definition: a game is won
/// when the set of hidden cells drawn is a winning subset. Returns (wins, games).
pub fn simulate_random_baseline(instances: &[GameInstance], draws: usize, games: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wins_per: Vec<Vec<CellMask>> = instances.iter().map(winning_subsets).collect();
    let mut wins = 0;
    for g in 0..games {
        let i = g % instances.len();
        let mut drawn = CellMask::EMPTY;
        for _ in 0..draws {
            drawn = drawn.with(Cell::from_index(rng.gen_range(0..CELLS)).expect("in range"));
        }
        if wins_per[i].contains(&drawn.intersection(instances[i].hidden)) {
            wins += 1;
        }
    }
    (wins, games)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((p_win_closed(6) - 0.0752).abs() < 1e-4);
        assert_eq!(p_win_closed(0), 0.0);
        assert!(p_win_closed(1).abs() < 1e-15);
        // Two draws must be the two witness cells in either order.
        assert!((p_win_oracle(2) - 2.0 / 81.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_oracle() {
        for n in 0..=20 {
            assert!((p_win_closed(n) - p_win_oracle(n)).abs() <= 1e-12, "n = {n}");
        }
    }

    #[test]
    fn six_draws_is_best() {
        let best = (1..=30).max_by(|a, b| p_win_closed(*a).total_cmp(&p_win_closed(*b))).unwrap();
        assert_eq!(best, 6);
    }
}
