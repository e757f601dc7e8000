//! Structural checks on learner states, used by stress tests.

use super::{fresh_slot, LearnerState, SlotState, StageEntry};
use crate::game::StochasticGame;
use crate::STRUCTURAL_TOL;

/// Slack allowed on the Q bound for accumulated rounding.
pub const BOUND_SLACK: f64 = 1e-9;

/// Simplex membership, Q boundedness and `m = 0` stationarity.
pub fn check_state(game: &StochasticGame, state: &LearnerState) -> Vec<String> {
    let mut out = Vec::new();
    for (m, slot) in state.slots().iter().enumerate() {
        for (s, x) in slot.iter().enumerate() {
            for (j, b) in x.beliefs.iter().enumerate() {
                let p = b.as_slice();
                let total: f64 = p.iter().sum();
                if p.iter().any(|&v| v < 0.0) || (total - 1.0).abs() > STRUCTURAL_TOL {
                    out.push(format!("belief ({m}, {s}) about {j} off simplex: {p:?}"));
                }
            }
            for i in 0..game.players() {
                let bound = game.max_abs_payoff(i) / (1.0 - game.discount(i)) + BOUND_SLACK;
                let worst = x.q[i].iter().fold(0.0f64, |w, q| w.max(q.abs()));
                if worst > bound {
                    out.push(format!("|Q({m}, {s})[{i}]| = {worst} exceeds {bound}"));
                }
                if m == 0 && x.q[i] != game.payoff_row(i, s) {
                    out.push(format!("Q(0, {s})[{i}] differs from the stage payoff"));
                }
            }
        }
    }
    out
}

/// Only the slot `(entry.m(), entry.state)` may change during a stage; a
/// slot opened at the start of a new epoch must be fresh apart from that.
pub fn check_locality(
    game: &StochasticGame,
    before: &LearnerState,
    after: &LearnerState,
    entry: &StageEntry,
) -> Vec<String> {
    let mut out = Vec::new();
    let fresh = fresh_slot(game);
    let visited = (entry.m(), entry.state);
    for (m, slot) in after.slots().iter().enumerate() {
        for (s, x) in slot.iter().enumerate() {
            if (m, s) == visited {
                continue;
            }
            let prior: &SlotState = before
                .slots()
                .get(m)
                .map(|v| &v[s])
                .unwrap_or(&fresh[s]);
            if x != prior {
                out.push(format!(
                    "stage at (m {}, s {}) modified slot ({m}, {s})",
                    visited.0, visited.1
                ));
            }
        }
    }
    out
}

/// Visit counters agree with the stage log, and at an epoch boundary
/// `sum_s c[m][s]` equals the number of completed epochs longer than `m`.
pub fn check_counters(state: &LearnerState, log: &[StageEntry]) -> Vec<String> {
    let mut out = Vec::new();
    let depth = state.depth();
    let states = state.slots().first().map_or(0, Vec::len);
    let mut counts = vec![vec![0u64; states]; depth];
    for e in log {
        counts[e.m()][e.state] += 1;
    }
    for (m, logged) in counts.iter().enumerate() {
        for (s, &c) in logged.iter().enumerate() {
            if state.slot(m, s).count != c {
                out.push(format!(
                    "c[{m}][{s}] = {} but the log has {c} visits",
                    state.slot(m, s).count
                ));
            }
        }
        if state.epoch_complete() {
            let total: u64 = state.slots()[m].iter().map(|x| x.count).sum();
            let expect = (state.epoch() - m) as u64;
            if total != expect {
                out.push(format!("sum_s c[{m}][s] = {total}, expected {expect}"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Learner, RunConfig};
    use crate::game::library;

    #[test]
    fn clean_run_has_no_violations() {
        let g = library::acceptance_game();
        let cfg = RunConfig::new(12, 1.0);
        let mut learner = Learner::new(&g, &cfg, 5).unwrap();
        let mut log = Vec::new();
        for _ in 0..(12 * 13 / 2) {
            let before = learner.state().clone();
            let e = learner.stage().unwrap();
            assert!(check_locality(&g, &before, learner.state(), &e).is_empty());
            assert!(check_state(&g, learner.state()).is_empty());
            log.push(e);
            assert!(check_counters(learner.state(), &log).is_empty());
        }
    }

    #[test]
    fn detects_tampering() {
        let g = library::acceptance_game();
        let cfg = RunConfig::new(3, 1.0);
        let mut learner = Learner::new(&g, &cfg, 5).unwrap();
        let log = learner.run_epoch().unwrap();
        let mut bad = learner.state().clone();
        bad.slots[0][0].q[0][0] += 1.0;
        bad.slots[0][1].count += 1;
        assert!(!check_state(&g, &bad).is_empty());
        assert!(!check_counters(&bad, &log).is_empty());
        assert!(!check_locality(&g, learner.state(), &bad, &log[0]).is_empty());
    }
}
