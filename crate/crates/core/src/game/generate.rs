use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_connectivity, ProfileSpace, StageGameStructure, StochasticGame};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerRule {
    /// Explicit controller per state.
    Fixed(Vec<usize>),
    /// State `s` is controlled by player `s mod n`.
    RoundRobin,
    /// One player controls every state.
    Single(usize),
}

/// Parameters for [`generate_game`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub states: usize,
    /// Action count per player; its length is the player count.
    pub actions: Vec<usize>,
    /// Requested structure per state (`ZeroSum` or `IdenticalInterest`).
    pub structures: Vec<StageGameStructure>,
    pub payoff_range: (f64, f64),
    pub discounts: Vec<f64>,
    pub controllers: ControllerRule,
    /// Probability that a given successor gets positive mass in a
    /// transition row.
    #[serde(default = "default_density")]
    pub density: f64,
    /// States whose transitions are forced to a self-loop.
    #[serde(default)]
    pub absorbing: Vec<usize>,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_density() -> f64 {
    1.0
}

fn default_attempts() -> usize {
    100
}

impl GeneratorSpec {
    /// Mixed-structure template: `states` states alternating zero-sum and
    /// identical interest, two players, round-robin controllers.
    pub fn mixed(states: usize, actions: Vec<usize>, discounts: Vec<f64>) -> Self {
        let structures = (0..states)
            .map(|s| {
                if s % 2 == 0 {
                    StageGameStructure::ZeroSum
                } else {
                    StageGameStructure::IdenticalInterest
                }
            })
            .collect();
        GeneratorSpec {
            states,
            actions,
            structures,
            payoff_range: (-1.0, 1.0),
            discounts,
            controllers: ControllerRule::RoundRobin,
            density: 1.0,
            absorbing: Vec::new(),
            max_attempts: 100,
        }
    }

    fn controller_map(&self) -> Result<Vec<usize>> {
        let n = self.actions.len();
        let map = match &self.controllers {
            ControllerRule::Fixed(v) => v.clone(),
            ControllerRule::RoundRobin => (0..self.states).map(|s| s % n).collect(),
            ControllerRule::Single(i) => vec![*i; self.states],
        };
        if map.len() != self.states || map.iter().any(|&c| c >= n) {
            return Err(Error::InvalidConfig(format!(
                "controller assignment {map:?} invalid for {n} players and {} states",
                self.states
            )));
        }
        Ok(map)
    }
}

/// Draws a random valid game matching `spec`, deterministically in `seed`.
///
/// Transition rows are drawn per controller action and copied across the
/// other players' actions, so the turn-based property holds exactly.
/// Draws are repeated until the transition graph is connected.
pub fn generate_game(spec: &GeneratorSpec, seed: u64) -> Result<StochasticGame> {
    let n = spec.actions.len();
    let k = spec.states;
    if spec.structures.len() != k {
        return Err(Error::InvalidConfig(format!(
            "{} structure tags for {k} states",
            spec.structures.len()
        )));
    }
    if spec.structures.contains(&StageGameStructure::ZeroSum) && n != 2 {
        return Err(Error::InvalidConfig("zero-sum states need exactly 2 players".into()));
    }
    if spec.structures.contains(&StageGameStructure::Unstructured) {
        return Err(Error::InvalidConfig("cannot generate unstructured states".into()));
    }
    let (lo, hi) = spec.payoff_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidConfig(format!("bad payoff range ({lo}, {hi})")));
    }
    if !(spec.density > 0.0 && spec.density <= 1.0) {
        return Err(Error::InvalidConfig(format!("density {} not in (0, 1]", spec.density)));
    }
    if let Some(s) = spec.absorbing.iter().find(|&&s| s >= k) {
        return Err(Error::InvalidConfig(format!("absorbing state {s} out of range")));
    }
    let controllers = spec.controller_map()?;
    let space = ProfileSpace::new(spec.actions.clone())?;
    let mut rng = rng::stream(seed, Stream::Generator);

    let mut payoffs = vec![vec![Vec::new(); k]; n];
    for s in 0..k {
        let base: Vec<f64> = (0..space.len()).map(|_| rng.gen_range(lo..=hi)).collect();
        for (i, per_player) in payoffs.iter_mut().enumerate() {
            per_player[s] = match spec.structures[s] {
                StageGameStructure::ZeroSum if i == 1 => base.iter().map(|x| -x).collect(),
                _ => base.clone(),
            };
        }
    }

    for _ in 0..spec.max_attempts {
        let transition: Vec<Vec<f64>> = (0..k)
            .map(|s| {
                let c = controllers[s];
                let rows: Vec<Vec<f64>> = (0..space.actions(c))
                    .map(|_| {
                        if spec.absorbing.contains(&s) {
                            let mut row = vec![0.0; k];
                            row[s] = 1.0;
                            row
                        } else {
                            random_row(&mut rng, k, spec.density)
                        }
                    })
                    .collect();
                (0..space.len())
                    .flat_map(|a| rows[space.action_of(a, c)].iter().copied())
                    .collect()
            })
            .collect();
        let game = StochasticGame::new(
            spec.actions.clone(),
            k,
            payoffs.clone(),
            transition,
            spec.discounts.clone(),
            controllers.clone(),
        )?;
        if check_connectivity(&game).is_ok() {
            return Ok(game);
        }
    }
    Err(Error::Infeasible {
        attempts: spec.max_attempts,
        reason: "no connected transition graph found".into(),
    })
}

fn random_row<R: Rng>(rng: &mut R, k: usize, density: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..k)
            .map(|_| {
                if rng.gen::<f64>() < density {
                    rng.gen_range(0.05..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.into_iter().map(|x| x / total).collect();
        }
    }
}
