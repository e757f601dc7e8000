//! Independent re-check of a [`FiniteHorizonSolution`].
//!
//! Nothing here calls the response or solver code: payoffs are summed by
//! explicit profile enumeration and the logit is evaluated through a
//! log-sum-exp, so a bug on the solver path cannot hide itself.

use serde::Serialize;

use super::FiniteHorizonSolution;
use crate::game::StochasticGame;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    /// `max ||pi_k^i(s) - B^i(pi_k^{-i}(s); Q_k^i(s, .))||_inf`.
    pub fixed_point_residual: f64,
    /// Largest deviation from the Q and v recursions.
    pub recursion_residual: f64,
    /// `Q` at the last stage equals `r` bit for bit.
    pub terminal_exact: bool,
}

impl VerificationReport {
    pub fn passes(&self, fixed_point_tol: f64, recursion_tol: f64) -> bool {
        self.fixed_point_residual <= fixed_point_tol
            && self.recursion_residual <= recursion_tol
            && self.terminal_exact
    }
}

fn decode(sizes: &[usize], mut profile: usize) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for j in (0..sizes.len()).rev() {
        out[j] = profile % sizes[j];
        profile /= sizes[j];
    }
    out
}

pub fn verify_solution(game: &StochasticGame, sol: &FiniteHorizonSolution) -> VerificationReport {
    let sizes = game.space().sizes().to_vec();
    let profiles: usize = sizes.iter().product();
    let n = sizes.len();
    let decoded: Vec<Vec<usize>> = (0..profiles).map(|a| decode(&sizes, a)).collect();
    let tau = sol.tau;

    let mut fixed_point_residual: f64 = 0.0;
    let mut recursion_residual: f64 = 0.0;
    let mut terminal_exact = sol.stages.len() == sol.horizon && sol.horizon > 0;

    for (k, stage) in sol.stages.iter().enumerate() {
        for (s, x) in stage.iter().enumerate() {
            let strat = |j: usize, a: usize| x.strategies[j].as_slice()[a];
            for i in 0..n {
                // marginal payoff of each own action against the others
                let mut u = vec![0.0; sizes[i]];
                for (a, acts) in decoded.iter().enumerate() {
                    let w: f64 = (0..n).filter(|&j| j != i).map(|j| strat(j, acts[j])).product();
                    u[acts[i]] += w * x.q[i][a];
                }
                let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = top + u.iter().map(|x| ((x - top) / tau).exp()).sum::<f64>().ln() * tau;
                for (ai, ui) in u.iter().enumerate() {
                    let br = ((ui - lse) / tau).exp();
                    fixed_point_residual = fixed_point_residual.max((br - strat(i, ai)).abs());
                }

                // v = E_{a ~ pi}[Q]
                let v: f64 = decoded
                    .iter()
                    .enumerate()
                    .map(|(a, acts)| x.q[i][a] * (0..n).map(|j| strat(j, acts[j])).product::<f64>())
                    .sum();
                recursion_residual = recursion_residual.max((v - x.v[i]).abs());

                if k + 1 == sol.stages.len() {
                    terminal_exact &= x.q[i].as_slice() == game.payoff_row(i, s);
                } else {
                    let next = &sol.stages[k + 1];
                    for a in 0..profiles {
                        let mut cont = 0.0;
                        for (t, p) in game.transition_row(s, a).iter().enumerate() {
                            cont += p * next[t].v[i];
                        }
                        let target = game.payoff(i, s, a) + game.discount(i) * cont;
                        recursion_residual = recursion_residual.max((target - x.q[i][a]).abs());
                    }
                }
            }
        }
    }
    VerificationReport {
        fixed_point_residual,
        recursion_residual,
        terminal_exact,
    }
}
