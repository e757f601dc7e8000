//! Small named games used by tests, benches and the CLI.

use super::StochasticGame;

const PENNIES: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

/// Two-player, two-state, two-action game with a matching-pennies state
/// controlled by player 0 and an identical-interest coordination state
/// controlled by player 1.
///
/// From either state the controller's action 0 moves to state 0 with
/// probability 0.8 (state 1 with 0.2), action 1 the other way round.
/// Discounts are `(0.9, 0.8)`.
pub fn acceptance_game() -> StochasticGame {
    let coord = vec![1.0, 0.0, 0.0, 0.5];
    let neg: Vec<f64> = PENNIES.iter().map(|x| -x).collect();
    let payoffs = vec![
        vec![PENNIES.to_vec(), coord.clone()],
        vec![neg, coord],
    ];
    let row = |a: usize| if a == 0 { [0.8, 0.2] } else { [0.2, 0.8] };
    // state 0: controller is player 0 (most significant profile digit)
    let t0: Vec<f64> = (0..4).flat_map(|p| row(p / 2)).collect();
    // state 1: controller is player 1
    let t1: Vec<f64> = (0..4).flat_map(|p| row(p % 2)).collect();
    StochasticGame::new(vec![2, 2], 2, payoffs, vec![t0, t1], vec![0.9, 0.8], vec![0, 1])
        .expect("acceptance game is well formed")
}

/// Two states, both controlled by player 0; zero-sum in state 0 and
/// identical interest in state 1.
pub fn single_controller_game() -> StochasticGame {
    let g = acceptance_game();
    let row = |a: usize| if a == 0 { [0.3, 0.7] } else { [0.6, 0.4] };
    let t: Vec<f64> = (0..4).flat_map(|p| row(p / 2)).collect();
    let payoffs = (0..2)
        .map(|i| (0..2).map(|s| g.payoff_row(i, s).to_vec()).collect())
        .collect();
    StochasticGame::new(vec![2, 2], 2, payoffs, vec![t.clone(), t], vec![0.9, 0.8], vec![0, 0])
        .expect("single-controller game is well formed")
}

/// One-state game with the given stage payoffs and zero discounts: the
/// dynamics reduce to repeated-game stochastic fictitious play.
pub fn repeated_game(actions: Vec<usize>, payoffs: Vec<Vec<f64>>) -> StochasticGame {
    let n = actions.len();
    let profiles: usize = actions.iter().product();
    StochasticGame::new(
        actions,
        1,
        payoffs.into_iter().map(|r| vec![r]).collect(),
        vec![vec![1.0; profiles]],
        vec![0.0; n],
        vec![0],
    )
    .expect("repeated game is well formed")
}

/// Repeated matching pennies.
pub fn matching_pennies() -> StochasticGame {
    let neg = PENNIES.iter().map(|x| -x).collect();
    repeated_game(vec![2, 2], vec![PENNIES.to_vec(), neg])
}
