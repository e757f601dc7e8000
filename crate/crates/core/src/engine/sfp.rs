use rand::Rng;

use super::{StepSchedule, ValueBeliefs};
use crate::error::{Error, Result};
use crate::game::{ProfileSpace, StochasticGame};
use crate::response::{expected_payoff, smoothed_best_response, BeliefProfile, MixedStrategy, PerturbationSpec};
use crate::rng::sample_index;

#[derive(Clone, Debug, PartialEq)]
pub struct SfpOutcome {
    /// Realised joint action, one entry per player.
    pub actions: Vec<usize>,
    /// Unperturbed expected payoff of each player's smoothed response.
    pub values: Vec<f64>,
}

/// One joint stochastic fictitious play iteration on a substage game.
///
/// `beliefs[j]` is the belief every player holds about player `j`; all
/// players observe the same actions and use the same step sizes, so one
/// shared copy per player is exact. Each player responds to the others
/// with its own `q_rows[i]`, samples an action, then every belief moves
/// toward the realised action by `alpha.at(k)`.
#[allow(clippy::too_many_arguments)]
pub fn sfp_step<R: Rng + ?Sized>(
    space: &ProfileSpace,
    k: u64,
    q_rows: &[&[f64]],
    beliefs: &mut [MixedStrategy],
    perturb: &PerturbationSpec,
    alpha: &StepSchedule,
    value_beliefs: ValueBeliefs,
    rng: &mut R,
) -> Result<SfpOutcome> {
    sfp_apply(space, k, q_rows, beliefs, perturb, alpha, value_beliefs, |_, br| {
        sample_index(rng, br.as_slice())
    })
}

/// [`sfp_step`] with the action choice supplied by the caller.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sfp_apply(
    space: &ProfileSpace,
    k: u64,
    q_rows: &[&[f64]],
    beliefs: &mut [MixedStrategy],
    perturb: &PerturbationSpec,
    alpha: &StepSchedule,
    value_beliefs: ValueBeliefs,
    mut choose: impl FnMut(usize, &MixedStrategy) -> usize,
) -> Result<SfpOutcome> {
    let n = space.players();
    if q_rows.len() != n || beliefs.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "expected {n} Q rows and beliefs, got {} and {}",
            q_rows.len(),
            beliefs.len()
        )));
    }
    let responses = (0..n)
        .map(|i| smoothed_best_response(space, q_rows[i], BeliefProfile::new(i, beliefs), perturb))
        .collect::<Result<Vec<_>>>()?;
    let actions: Vec<usize> = responses.iter().enumerate().map(|(i, br)| choose(i, br)).collect();
    if let Some(i) = (0..n).find(|&i| actions[i] >= space.actions(i)) {
        return Err(Error::ShapeMismatch(format!(
            "action {} out of range for player {i}",
            actions[i]
        )));
    }

    let values_with = |beliefs: &[MixedStrategy]| {
        (0..n)
            .map(|i| expected_payoff(space, q_rows[i], &responses[i], BeliefProfile::new(i, beliefs)))
            .collect::<Result<Vec<_>>>()
    };
    let pre = match value_beliefs {
        ValueBeliefs::PreUpdate => Some(values_with(beliefs)?),
        ValueBeliefs::PostUpdate => None,
    };
    let step = alpha.at(k);
    for (b, &a) in beliefs.iter_mut().zip(&actions) {
        b.step_toward(a, step);
    }
    let values = match pre {
        Some(v) => v,
        None => values_with(beliefs)?,
    };
    Ok(SfpOutcome { actions, values })
}

/// Model-based Q-estimate update at state `s` for `player`:
/// `Q(a) <- Q(a) + step (r(s, a) + gamma sum_{s'} p(s'|s, a) v_next(s') - Q(a))`.
pub fn q_update(
    game: &StochasticGame,
    player: usize,
    s: usize,
    q_row: &mut [f64],
    v_next: &[f64],
    step: f64,
) -> Result<()> {
    let space = game.space();
    if q_row.len() != space.len() || v_next.len() != game.states() {
        return Err(Error::ShapeMismatch(format!(
            "Q row {} (expected {}), continuation values {} (expected {})",
            q_row.len(),
            space.len(),
            v_next.len(),
            game.states()
        )));
    }
    let gamma = game.discount(player);
    let r = game.payoff_row(player, s);
    for (a, q) in q_row.iter_mut().enumerate() {
        let cont: f64 = game
            .transition_row(s, a)
            .iter()
            .zip(v_next)
            .map(|(p, v)| p * v)
            .sum();
        *q += step * (r[a] + gamma * cont - *q);
    }
    Ok(())
}
