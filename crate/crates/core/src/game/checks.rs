use std::collections::VecDeque;

use serde::Serialize;

use super::{StageGameStructure, StochasticGame};
use crate::error::{ControllerWitness, Error, Result};
use crate::STRUCTURAL_TOL;

/// Outcome of the turn-based controller check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ControllerReport {
    /// Lowest-index valid controller per state.
    pub chosen: Vec<usize>,
    /// Every player whose action alone determines the state's transitions.
    pub candidates: Vec<Vec<usize>>,
}

/// Finds, for each state, the players whose own action alone determines
/// `p(. | s, a)`.
///
/// A player qualifies at `s` when, for each of its actions, every entry of
/// the transition row varies by at most the structural tolerance over the
/// other players' actions. Fails with a witness pair per player when no one
/// qualifies.
pub fn validate_turn_based_controller(game: &StochasticGame) -> Result<ControllerReport> {
    let space = game.space();
    let k = game.states();
    let mut chosen = Vec::with_capacity(k);
    let mut candidates = Vec::with_capacity(k);
    for s in 0..k {
        let mut ok = Vec::new();
        let mut witnesses = Vec::new();
        for i in 0..space.players() {
            match controller_witness(game, s, i) {
                None => ok.push(i),
                Some((a, b)) => witnesses.push(ControllerWitness {
                    player: i,
                    a: space.decode(a),
                    b: space.decode(b),
                }),
            }
        }
        if ok.is_empty() {
            return Err(Error::Violation {
                state: s,
                witnesses,
            });
        }
        chosen.push(ok[0]);
        candidates.push(ok);
    }
    Ok(ControllerReport { chosen, candidates })
}

/// Returns two profiles that share `player`'s action but whose transition
/// rows differ by more than the tolerance in some entry, if any exist.
fn controller_witness(game: &StochasticGame, s: usize, player: usize) -> Option<(usize, usize)> {
    let space = game.space();
    let k = game.states();
    for own in 0..space.actions(player) {
        for next in 0..k {
            let mut lo = (f64::INFINITY, 0);
            let mut hi = (f64::NEG_INFINITY, 0);
            for a in (0..space.len()).filter(|&a| space.action_of(a, player) == own) {
                let x = game.transition_row(s, a)[next];
                if x < lo.0 {
                    lo = (x, a);
                }
                if x > hi.0 {
                    hi = (x, a);
                }
            }
            if hi.0 - lo.0 > STRUCTURAL_TOL {
                return Some((lo.1, hi.1));
            }
        }
    }
    None
}

/// Classifies the stage game `<A, r(s, .)>`.
///
/// Identical interest is tested first, so an all-zero stage is identical
/// interest rather than zero-sum.
pub fn classify_stage_game(game: &StochasticGame, s: usize) -> StageGameStructure {
    let n = game.players();
    let profiles = game.space().len();
    let identical = (0..profiles).all(|a| {
        let (lo, hi) = (0..n)
            .map(|i| game.payoff(i, s, a))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        hi - lo <= STRUCTURAL_TOL
    });
    if identical {
        return StageGameStructure::IdenticalInterest;
    }
    if n == 2 && (0..profiles).all(|a| (game.payoff(0, s, a) + game.payoff(1, s, a)).abs() <= STRUCTURAL_TOL) {
        return StageGameStructure::ZeroSum;
    }
    StageGameStructure::Unstructured
}

/// Directed graph on states with an edge `s -> s'` iff `p(s'|s, a) > 0` for
/// some profile `a`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionGraph {
    adjacency: Vec<Vec<usize>>,
}

impl TransitionGraph {
    pub fn from_game(game: &StochasticGame) -> Self {
        let k = game.states();
        let adjacency = (0..k)
            .map(|s| {
                (0..k)
                    .filter(|&t| (0..game.space().len()).any(|a| game.transition_row(s, a)[t] > 0.0))
                    .collect()
            })
            .collect();
        TransitionGraph { adjacency }
    }

    pub fn successors(&self, s: usize) -> &[usize] {
        &self.adjacency[s]
    }

    /// States reachable from `from` by a path of length >= 0.
    pub fn reachable(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adjacency.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(s) = queue.pop_front() {
            for &t in &self.adjacency[s] {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen
    }
}

/// Checks that every state reaches every other state.
pub fn check_connectivity(game: &StochasticGame) -> Result<()> {
    let graph = TransitionGraph::from_game(game);
    for from in 0..game.states() {
        if let Some(to) = graph.reachable(from).iter().position(|&r| !r) {
            return Err(Error::Disconnected { from, to });
        }
    }
    Ok(())
}

/// Split of a Q row into the stage payoff plus a function of the
/// controller's action.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    pub controller: usize,
    /// `g(a^{i_s})`, indexed by the controller's action.
    pub g: Vec<f64>,
    /// `max |Q(a) - r^i(s, a) - g(a^{i_s})|`.
    pub residual: f64,
}

/// Decomposes `q_row` as `r^i(s, .) + g(a^{i_s})` and reports the residual.
///
/// `g` is the mean of `Q - r` over the non-controller actions. A zero residual
/// means the Q game is strategically equivalent to the stage game (unit
/// scale).
pub fn decompose_controller_payoff(
    q_row: &[f64],
    game: &StochasticGame,
    s: usize,
    player: usize,
) -> Result<Decomposition> {
    let space = game.space();
    if q_row.len() != space.len() {
        return Err(Error::ShapeMismatch(format!(
            "Q row has {} entries, expected {}",
            q_row.len(),
            space.len()
        )));
    }
    let c = game.controller(s);
    let r = game.payoff_row(player, s);
    let mut g = vec![0.0; space.actions(c)];
    let per_action = (space.len() / space.actions(c)) as f64;
    for a in 0..space.len() {
        g[space.action_of(a, c)] += q_row[a] - r[a];
    }
    for x in &mut g {
        *x /= per_action;
    }
    let residual = (0..space.len())
        .map(|a| (q_row[a] - r[a] - g[space.action_of(a, c)]).abs())
        .fold(0.0, f64::max);
    Ok(Decomposition {
        controller: c,
        g,
        residual,
    })
}
