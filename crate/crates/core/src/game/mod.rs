//! Finite n-player stochastic games with turn-based controllers.

mod checks;
mod generate;
mod io;
pub mod library;

pub use checks::{
    check_connectivity, classify_stage_game, decompose_controller_payoff,
    validate_turn_based_controller, ControllerReport, Decomposition, TransitionGraph,
};
pub use generate::{generate_game, ControllerRule, GeneratorSpec};
pub use io::{game_from_json, game_to_json, load_game, save_game};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::STRUCTURAL_TOL;

/// Joint action profiles, flattened row-major with player 0 most significant.
///
/// The flat order matches the nesting `[a^1][a^2]...[a^n]` of game files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ProfileSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl ProfileSpace {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidGame(format!(
                "action counts must be positive, got {sizes:?}"
            )));
        }
        let mut strides = vec![1; sizes.len()];
        for j in (0..sizes.len() - 1).rev() {
            strides[j] = strides[j + 1] * sizes[j + 1];
        }
        let len = strides[0] * sizes[0];
        Ok(ProfileSpace {
            sizes,
            strides,
            len,
        })
    }

    pub fn players(&self) -> usize {
        self.sizes.len()
    }

    pub fn actions(&self, player: usize) -> usize {
        self.sizes[player]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of joint profiles.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn action_of(&self, profile: usize, player: usize) -> usize {
        (profile / self.strides[player]) % self.sizes[player]
    }

    pub fn index(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.sizes.len());
        actions
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| a * s)
            .sum()
    }

    pub fn decode(&self, profile: usize) -> Vec<usize> {
        (0..self.players())
            .map(|j| self.action_of(profile, j))
            .collect()
    }

    /// Profile obtained by replacing `player`'s action in `profile`.
    #[inline]
    pub fn with_action(&self, profile: usize, player: usize, action: usize) -> usize {
        profile - self.action_of(profile, player) * self.strides[player]
            + action * self.strides[player]
    }
}

impl TryFrom<Vec<usize>> for ProfileSpace {
    type Error = Error;
    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        ProfileSpace::new(sizes)
    }
}

impl From<ProfileSpace> for Vec<usize> {
    fn from(space: ProfileSpace) -> Self {
        space.sizes
    }
}

/// Per-state stage-game structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageGameStructure {
    ZeroSum,
    IdenticalInterest,
    Unstructured,
}

/// A finite stochastic game `<S, A, r, p, gamma>` with a controller per state.
///
/// Construction checks shapes, row-stochasticity and discount ranges. The
/// turn-based property, stage structure and connectivity are checked by the
/// validators in this module so that invalid games can still be represented
/// and reported on.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticGame {
    space: ProfileSpace,
    states: usize,
    /// `payoffs[i][s][profile]`
    payoffs: Vec<Vec<Vec<f64>>>,
    /// `transition[s][profile * states + next]`
    transition: Vec<Vec<f64>>,
    discounts: Vec<f64>,
    controllers: Vec<usize>,
}

impl StochasticGame {
    pub fn new(
        actions: Vec<usize>,
        states: usize,
        payoffs: Vec<Vec<Vec<f64>>>,
        transition: Vec<Vec<f64>>,
        discounts: Vec<f64>,
        controllers: Vec<usize>,
    ) -> Result<Self> {
        let space = ProfileSpace::new(actions)?;
        let n = space.players();
        if n < 2 {
            return Err(Error::InvalidGame(format!("need at least 2 players, got {n}")));
        }
        if states == 0 {
            return Err(Error::InvalidGame("need at least one state".into()));
        }
        if payoffs.len() != n || payoffs.iter().any(|p| p.len() != states) {
            return Err(Error::ShapeMismatch(format!(
                "payoffs must be [{n}][{states}][profiles]"
            )));
        }
        if payoffs
            .iter()
            .flatten()
            .any(|row| row.len() != space.len())
        {
            return Err(Error::ShapeMismatch(format!(
                "each payoff row must have {} profiles",
                space.len()
            )));
        }
        if payoffs.iter().flatten().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("payoffs"));
        }
        if transition.len() != states || transition.iter().any(|t| t.len() != space.len() * states)
        {
            return Err(Error::ShapeMismatch(format!(
                "transition must be [{states}][profiles][{states}]"
            )));
        }
        for (s, rows) in transition.iter().enumerate() {
            for (a, row) in rows.chunks(states).enumerate() {
                if row.iter().any(|&x| !x.is_finite() || x < 0.0) {
                    return Err(Error::InvalidGame(format!(
                        "transition row (state {s}, profile {a}) has negative or non-finite entries"
                    )));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > STRUCTURAL_TOL {
                    return Err(Error::InvalidGame(format!(
                        "transition row (state {s}, profile {a}) sums to {total}"
                    )));
                }
            }
        }
        if discounts.len() != n {
            return Err(Error::ShapeMismatch(format!("expected {n} discounts")));
        }
        if let Some(g) = discounts.iter().find(|&&g| !(0.0..1.0).contains(&g)) {
            return Err(Error::InvalidGame(format!("discount {g} not in [0, 1)")));
        }
        if controllers.len() != states {
            return Err(Error::ShapeMismatch(format!("expected {states} controllers")));
        }
        if let Some(c) = controllers.iter().find(|&&c| c >= n) {
            return Err(Error::InvalidGame(format!("controller {c} out of range")));
        }
        Ok(StochasticGame {
            space,
            states,
            payoffs,
            transition,
            discounts,
            controllers,
        })
    }

    pub fn space(&self) -> &ProfileSpace {
        &self.space
    }

    pub fn players(&self) -> usize {
        self.space.players()
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn discount(&self, player: usize) -> f64 {
        self.discounts[player]
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    pub fn controller(&self, state: usize) -> usize {
        self.controllers[state]
    }

    pub fn controllers(&self) -> &[usize] {
        &self.controllers
    }

    /// `r^i(s, .)` over all joint profiles.
    pub fn payoff_row(&self, player: usize, state: usize) -> &[f64] {
        &self.payoffs[player][state]
    }

    pub fn payoff(&self, player: usize, state: usize, profile: usize) -> f64 {
        self.payoffs[player][state][profile]
    }

    /// `p(. | s, a)`.
    pub fn transition_row(&self, state: usize, profile: usize) -> &[f64] {
        let k = self.states;
        &self.transition[state][profile * k..(profile + 1) * k]
    }

    /// `max |r^i|` over all states and profiles.
    pub fn max_abs_payoff(&self, player: usize) -> f64 {
        self.payoffs[player]
            .iter()
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `E_{a ~ uniform}[r^i(s, a)]`.
    pub fn uniform_play_payoff(&self, player: usize, state: usize) -> f64 {
        let row = self.payoff_row(player, state);
        row.iter().sum::<f64>() / row.len() as f64
    }

    /// Copy of this game with a different controller map.
    pub fn with_controllers(&self, controllers: Vec<usize>) -> Result<Self> {
        StochasticGame::new(
            self.space.sizes().to_vec(),
            self.states,
            self.payoffs.clone(),
            self.transition.clone(),
            self.discounts.clone(),
            controllers,
        )
    }

    /// Runs every structural validator, failing on the first problem.
    ///
    /// The declared controller of each state must be one of the players that
    /// explain its transitions.
    pub fn validate(&self) -> Result<()> {
        let report = validate_turn_based_controller(self)?;
        for (s, cands) in report.candidates.iter().enumerate() {
            if !cands.contains(&self.controllers[s]) {
                return Err(Error::InvalidGame(format!(
                    "state {s}: declared controller {} does not control transitions (candidates {cands:?})",
                    self.controllers[s]
                )));
            }
        }
        for s in 0..self.states {
            if classify_stage_game(self, s) == StageGameStructure::Unstructured {
                return Err(Error::Unstructured { state: s });
            }
        }
        check_connectivity(self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_indexing_roundtrip() {
        let space = ProfileSpace::new(vec![2, 3, 2]).unwrap();
        assert_eq!(space.len(), 12);
        for p in 0..space.len() {
            assert_eq!(space.index(&space.decode(p)), p);
        }
        assert_eq!(space.index(&[1, 2, 1]), 11);
        assert_eq!(space.with_action(0, 1, 2), space.index(&[0, 2, 0]));
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let err = StochasticGame::new(
            vec![1, 1],
            1,
            vec![vec![vec![0.0]], vec![vec![0.0]]],
            vec![vec![0.9]],
            vec![0.5, 0.5],
            vec![0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidGame(_)));
    }

    #[test]
    fn rejects_discount_of_one() {
        let err = StochasticGame::new(
            vec![1, 1],
            1,
            vec![vec![vec![0.0]], vec![vec![0.0]]],
            vec![vec![1.0]],
            vec![1.0, 0.5],
            vec![0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidGame(_)));
    }
}
