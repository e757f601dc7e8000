//! JSON game files.
//!
//! ```text
//! {
//!   "players": n,
//!   "states": |S|,
//!   "actions": [|A^1|, ..., |A^n|],
//!   "payoffs": [player][state][a^1]...[a^n],
//!   "transition": [state][a^1]...[a^n][next_state],
//!   "discounts": [gamma^1, ..., gamma^n],
//!   "controllers": [i_0, ..., i_{|S|-1}]
//! }
//! ```
//!
//! Players, states and actions are 0-based. Ragged or mis-sized arrays are
//! rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::StochasticGame;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    players: usize,
    states: usize,
    actions: Vec<usize>,
    payoffs: Value,
    transition: Value,
    discounts: Vec<f64>,
    controllers: Vec<usize>,
}

pub fn game_from_json(text: &str) -> Result<StochasticGame> {
    let file: GameFile = serde_json::from_str(text)?;
    if file.actions.len() != file.players {
        return Err(Error::ShapeMismatch(format!(
            "players = {} but actions lists {} entries",
            file.players,
            file.actions.len()
        )));
    }
    let mut pay_dims = vec![file.players, file.states];
    pay_dims.extend(&file.actions);
    let payoffs_flat = flatten(&file.payoffs, &pay_dims, "payoffs")?;

    let mut trans_dims = vec![file.states];
    trans_dims.extend(&file.actions);
    trans_dims.push(file.states);
    let transition_flat = flatten(&file.transition, &trans_dims, "transition")?;

    let profiles: usize = file.actions.iter().product();
    let payoffs = payoffs_flat
        .chunks(file.states * profiles)
        .map(|per_player| per_player.chunks(profiles).map(<[f64]>::to_vec).collect())
        .collect();
    let transition = transition_flat
        .chunks(profiles * file.states)
        .map(<[f64]>::to_vec)
        .collect();
    StochasticGame::new(
        file.actions,
        file.states,
        payoffs,
        transition,
        file.discounts,
        file.controllers,
    )
}

pub fn game_to_json(game: &StochasticGame) -> String {
    let space = game.space();
    let k = game.states();
    let n = game.players();
    let mut pay_dims = vec![n, k];
    pay_dims.extend(space.sizes());
    let pay_flat: Vec<f64> = (0..n)
        .flat_map(|i| (0..k).flat_map(move |s| game.payoff_row(i, s).iter().copied()))
        .collect();
    let mut trans_dims = vec![k];
    trans_dims.extend(space.sizes());
    trans_dims.push(k);
    let trans_flat: Vec<f64> = (0..k)
        .flat_map(|s| (0..space.len()).flat_map(move |a| game.transition_row(s, a).iter().copied()))
        .collect();
    let file = GameFile {
        players: n,
        states: k,
        actions: space.sizes().to_vec(),
        payoffs: nest(&pay_flat, &pay_dims),
        transition: nest(&trans_flat, &trans_dims),
        discounts: game.discounts().to_vec(),
        controllers: game.controllers().to_vec(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("game serializes");
    out.push('\n');
    out
}

pub fn load_game(path: impl AsRef<Path>) -> Result<StochasticGame> {
    let text = std::fs::read_to_string(path)?;
    game_from_json(&text)
}

pub fn save_game(game: &StochasticGame, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, game_to_json(game))?;
    Ok(())
}

fn flatten(value: &Value, dims: &[usize], what: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(dims.iter().product());
    flatten_into(value, dims, what, &mut out)?;
    Ok(out)
}

fn flatten_into(value: &Value, dims: &[usize], path: &str, out: &mut Vec<f64>) -> Result<()> {
    match dims.split_first() {
        None => match value.as_f64() {
            Some(x) => {
                out.push(x);
                Ok(())
            }
            None => Err(Error::ShapeMismatch(format!("{path}: expected a number"))),
        },
        Some((&len, rest)) => {
            let items = value
                .as_array()
                .ok_or_else(|| Error::ShapeMismatch(format!("{path}: expected an array")))?;
            if items.len() != len {
                return Err(Error::ShapeMismatch(format!(
                    "{path}: expected {len} entries, found {}",
                    items.len()
                )));
            }
            for (k, item) in items.iter().enumerate() {
                flatten_into(item, rest, &format!("{path}[{k}]"), out)?;
            }
            Ok(())
        }
    }
}

fn nest(flat: &[f64], dims: &[usize]) -> Value {
    match dims.split_first() {
        None => Value::from(flat[0]),
        Some((&len, rest)) => {
            let stride = flat.len() / len;
            Value::Array(
                flat.chunks(stride.max(1))
                    .take(len)
                    .map(|chunk| nest(chunk, rest))
                    .collect(),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::library;

    #[test]
    fn roundtrip_acceptance_game() {
        let g = library::acceptance_game();
        let text = game_to_json(&g);
        let back = game_from_json(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn nested_layout_matches_profile_order() {
        let g = library::acceptance_game();
        let v: Value = serde_json::from_str(&game_to_json(&g)).unwrap();
        // r^1(state 1, a^1 = 1, a^2 = 1) = 0.5
        assert_eq!(v["payoffs"][0][1][1][1], 0.5);
        // p(next 1 | state 0, a^1 = 1, a^2 = 0) = 0.8 since player 0 controls state 0
        assert_eq!(v["transition"][0][1][0][1], 0.8);
    }

    #[test]
    fn rejects_ragged_arrays() {
        let g = library::matching_pennies();
        let mut v: Value = serde_json::from_str(&game_to_json(&g)).unwrap();
        v["payoffs"][0][0][1] = serde_json::json!([1.0]);
        let err = game_from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)), "{err}");
    }

    #[test]
    fn rejects_malformed_json() {
        assert!(matches!(game_from_json("{ not json"), Err(Error::Parse(_))));
    }
}
