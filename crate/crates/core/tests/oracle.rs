use proptest::prelude::*;
use sfp_core::game::library;
use sfp_core::oracle::{backward_induction, solve_stage_nash, verify_solution, SolverParams};
use sfp_core::par::Execution;
use sfp_core::{PerturbationSpec, ProfileSpace, StochasticGame};

fn entropy(tau: f64) -> PerturbationSpec {
    PerturbationSpec::entropy(tau).unwrap()
}

/// Pennies at state 0, symmetric coordination at state 1, controllers 0
/// then 1, successor probabilities 0.8 / 0.2 by the controller's action.
fn two_state_game() -> StochasticGame {
    let pennies = vec![1.0, -1.0, -1.0, 1.0];
    let coord = vec![1.0, 0.0, 0.0, 1.0];
    let neg: Vec<f64> = pennies.iter().map(|x| -x).collect();
    let row = |a: usize| if a == 0 { [0.8, 0.2] } else { [0.2, 0.8] };
    let t0: Vec<f64> = (0..4).flat_map(|p| row(p / 2)).collect();
    let t1: Vec<f64> = (0..4).flat_map(|p| row(p % 2)).collect();
    StochasticGame::new(
        vec![2, 2],
        2,
        vec![vec![pennies, coord.clone()], vec![neg, coord]],
        vec![t0, t1],
        vec![0.9, 0.8],
        vec![0, 1],
    )
    .unwrap()
}

#[test]
fn horizon_two_matches_hand_arithmetic() {
    let g = two_state_game();
    let sol = backward_induction(&g, 2, &entropy(2.0), &SolverParams::default(), Execution::Sequential).unwrap();
    // Both terminal stage games have the uniform profile as their unique
    // Nash distribution, so v_1 = (0, 0.5) for both players.
    for (s, v) in [(0, 0.0), (1, 0.5)] {
        let x = &sol.stages[1][s];
        assert!(x.unique);
        for i in 0..2 {
            assert!((x.strategies[i].as_slice()[0] - 0.5).abs() < 1e-12);
            assert!((x.v[i] - v).abs() < 1e-12);
        }
    }
    // Q_0 = r + gamma * (p(1 | s, a) * 0.5).
    let expect = [
        [[1.09, -0.91, -0.64, 1.36], [-0.92, 1.08, 1.32, -0.68]],
        [[1.09, 0.36, 0.09, 1.36], [1.08, 0.32, 0.08, 1.32]],
    ];
    for s in 0..2 {
        for i in 0..2 {
            for (q, e) in sol.stages[0][s].q[i].iter().zip(expect[s][i]) {
                assert!((q - e).abs() < 1e-12, "Q_0({s})[{i}] = {:?}", sol.stages[0][s].q[i]);
            }
            let pi = &sol.stages[0][s].strategies;
            let v: f64 = (0..4)
                .map(|a| pi[0].as_slice()[a / 2] * pi[1].as_slice()[a % 2] * expect[s][i][a])
                .sum();
            assert!((sol.stages[0][s].v[i] - v).abs() < 1e-12);
        }
    }
    assert!(verify_solution(&g, &sol).passes(1e-10, 1e-12));
}

fn sigma(d: f64, tau: f64) -> f64 {
    1.0 / (1.0 + (-d / tau).exp())
}

/// `B^0` as a function of the opponent's weight on action 0, and `B^1`
/// as a function of the row player's, for a 2x2 game.
fn scalar_maps(q: &[Vec<f64>], tau: f64) -> (impl Fn(f64) -> f64 + '_, impl Fn(f64) -> f64 + '_) {
    let row = move |c: f64| sigma(c * (q[0][0] - q[0][2]) + (1.0 - c) * (q[0][1] - q[0][3]), tau);
    let col = move |p: f64| sigma(p * (q[1][0] - q[1][1]) + (1.0 - p) * (q[1][2] - q[1][3]), tau);
    (row, col)
}

fn grid_fixed_point(q: &[Vec<f64>], tau: f64) -> (f64, f64) {
    const N: usize = 10_000;
    let (row, col) = scalar_maps(q, tau);
    let grid = |k: usize| k as f64 / N as f64;
    let b0: Vec<f64> = (0..=N).map(|k| row(grid(k))).collect();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=N {
        let p = grid(i);
        let b1 = col(p);
        for (j, b) in b0.iter().enumerate() {
            let c = grid(j);
            let r = (p - b).abs().max((c - b1).abs());
            if r < best.0 {
                best = (r, p, c);
            }
        }
    }
    (best.1, best.2)
}

#[test]
fn fixed_point_matches_dense_grid() {
    let cases: Vec<(Vec<Vec<f64>>, f64)> = vec![
        (vec![vec![2.0, -1.0, -1.0, 1.0], vec![-2.0, 1.0, 1.0, -1.0]], 1.0),
        (vec![vec![0.3, -0.7, -1.2, 0.4], vec![-0.3, 0.7, 1.2, -0.4]], 0.25),
        (vec![vec![1.0, 0.0, 0.0, 0.5], vec![1.0, 0.0, 0.0, 0.5]], 2.0),
    ];
    let space = ProfileSpace::new(vec![2, 2]).unwrap();
    for (q, tau) in cases {
        let rows: Vec<&[f64]> = q.iter().map(Vec::as_slice).collect();
        let nash = solve_stage_nash(&space, &rows, &entropy(tau), &SolverParams::default()).unwrap();
        assert!(nash.unique);
        let (p, c) = grid_fixed_point(&q, tau);
        assert!((nash.profile[0].as_slice()[0] - p).abs() <= 2e-4, "{q:?}");
        assert!((nash.profile[1].as_slice()[0] - c).abs() <= 2e-4, "{q:?}");
    }
}

#[test]
fn zero_sum_fixed_point_matches_bisection() {
    let space = ProfileSpace::new(vec![2, 2]).unwrap();
    for (a, tau) in [([2.0, -1.0, -1.0, 1.0], 1.0), ([0.5, -2.0, -1.5, 3.0], 0.4), ([1.0, -1.0, -1.0, 1.0], 3.0)] {
        let q = vec![a.to_vec(), a.iter().map(|x| -x).collect::<Vec<_>>()];
        let (row, col) = scalar_maps(&q, tau);
        // p - B^0(B^1(p)) is increasing for zero-sum 2x2 games.
        let f = |p: f64| p - row(col(p));
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = 0.5 * (lo + hi);
        let rows: Vec<&[f64]> = q.iter().map(Vec::as_slice).collect();
        let nash = solve_stage_nash(&space, &rows, &entropy(tau), &SolverParams::default()).unwrap();
        assert!((nash.profile[0].as_slice()[0] - p).abs() <= 1e-8);
        assert!((nash.profile[1].as_slice()[0] - col(p)).abs() <= 1e-8);
    }
}

#[test]
fn undiscounted_stages_repeat() {
    let g = library::matching_pennies();
    let sol = backward_induction(&g, 5, &entropy(0.7), &SolverParams::default(), Execution::Parallel).unwrap();
    for stage in &sol.stages {
        assert_eq!(stage[0].q, sol.stages[4][0].q);
        assert_eq!(stage[0].strategies, sol.stages[4][0].strategies);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn opponent_only_terms_leave_the_fixed_point_unchanged(
        zero_sum in any::<bool>(),
        actions in prop_oneof![Just([2usize, 2]), Just([2, 3]), Just([3, 2])],
        raw in prop::collection::vec(-2.0..2.0f64, 9),
        h0 in prop::collection::vec(-5.0..5.0f64, 3),
        h1 in prop::collection::vec(-5.0..5.0f64, 3),
    ) {
        let a = raw[..actions[0] * actions[1]].to_vec();
        let b = if zero_sum { a.iter().map(|x| -x).collect() } else { a.clone() };
        let q = [a, b];
        let space = ProfileSpace::new(actions.to_vec()).unwrap();
        let tau = if zero_sum { 0.5 } else { 2.0 };
        let params = SolverParams::default();
        let rows: Vec<&[f64]> = q.iter().map(Vec::as_slice).collect();
        let base = solve_stage_nash(&space, &rows, &entropy(tau), &params).unwrap();
        prop_assume!(base.unique);

        let shifted: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                (0..space.len())
                    .map(|p| {
                        let a = space.decode(p);
                        let other = a[1 - i];
                        q[i][p] + if i == 0 { h0[other] } else { h1[other] }
                    })
                    .collect()
            })
            .collect();
        let rows: Vec<&[f64]> = shifted.iter().map(Vec::as_slice).collect();
        let moved = solve_stage_nash(&space, &rows, &entropy(tau), &params).unwrap();
        for (x, y) in base.profile.iter().zip(&moved.profile) {
            prop_assert!(x.linf_distance(y) <= 1e-9);
        }
    }
}
