//! Ground truth for the learning dynamics: Nash distributions of stage and
//! Q games, solved backward over a finite horizon.

mod compare;
mod ode;
pub mod verify;

pub use compare::{compare, oracle_checkpoint, median, ComparisonRow, ComparisonTable, SeriesPoint};
pub use ode::{euler_path, ode_rhs};
pub use verify::{verify_solution, VerificationReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{decompose_controller_payoff, ProfileSpace, StochasticGame};
use crate::par::{self, Execution};
use crate::response::{expected_payoff, smoothed_best_response, BeliefProfile, MixedStrategy, PerturbationSpec};
use crate::rng::{self, Stream};

/// Tolerance for the strategic-equivalence certificate.
pub const EQUIVALENCE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Weight on the best response in `pi <- (1 - d) pi + d B(pi)`.
    pub damping: f64,
    /// The damping is halved, down to this floor, whenever the residual
    /// stalls for [`STALL_WINDOW`] iterations. Equal to `damping` to keep
    /// it fixed.
    #[serde(default = "default_min_damping")]
    pub min_damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Random starting profiles for the uniqueness certificate.
    pub multistarts: usize,
    /// Distance under which two fixed points count as the same.
    pub agreement: f64,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            damping: 0.5,
            min_damping: default_min_damping(),
            tolerance: 1e-10,
            max_iterations: 1_000_000,
            multistarts: 10,
            agreement: 1e-6,
            seed: 0,
        }
    }
}

fn default_min_damping() -> f64 {
    1.0 / 1024.0
}

/// Iterations without halving the best residual before the damping is
/// reduced.
pub const STALL_WINDOW: usize = 2000;

/// Result of [`solve_stage_nash`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageNash {
    pub profile: Vec<MixedStrategy>,
    /// `max_i ||pi^i - B^i(pi^{-i})||_inf` at the returned profile.
    pub residual: f64,
    pub iterations: usize,
    /// All multi-starts converged to within `agreement` of `profile`.
    pub unique: bool,
    /// Other fixed points reached from the multi-starts, if any.
    pub alternatives: Vec<Vec<MixedStrategy>>,
}

fn best_responses(
    space: &ProfileSpace,
    q_rows: &[&[f64]],
    profile: &[MixedStrategy],
    perturb: &PerturbationSpec,
) -> Result<Vec<MixedStrategy>> {
    (0..space.players())
        .map(|i| smoothed_best_response(space, q_rows[i], BeliefProfile::new(i, profile), perturb))
        .collect()
}

fn profile_distance(a: &[MixedStrategy], b: &[MixedStrategy]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.linf_distance(y)).fold(0.0, f64::max)
}

/// Damped fixed-point iteration of the joint smoothed best response.
pub fn fixed_point_from(
    space: &ProfileSpace,
    q_rows: &[&[f64]],
    perturb: &PerturbationSpec,
    params: &SolverParams,
    start: Vec<MixedStrategy>,
) -> Result<(Vec<MixedStrategy>, f64, usize)> {
    let mut pi = start;
    let mut residual = f64::INFINITY;
    let mut damping = params.damping;
    let floor = params.min_damping.min(params.damping);
    // Best residual at the start of the current window, and so far.
    let (mut mark, mut best) = (f64::INFINITY, f64::INFINITY);
    for it in 0..params.max_iterations {
        let br = best_responses(space, q_rows, &pi, perturb)?;
        residual = profile_distance(&pi, &br);
        if residual <= params.tolerance {
            return Ok((pi, residual, it));
        }
        best = best.min(residual);
        if it > 0 && it % STALL_WINDOW == 0 {
            if best > 0.5 * mark && damping > floor {
                damping = (0.5 * damping).max(floor);
            }
            mark = best;
        }
        pi = pi.iter().zip(&br).map(|(p, b)| p.mix(b, damping)).collect();
    }
    Err(Error::NoConvergence {
        residual,
        iterations: params.max_iterations,
    })
}

/// Nash distribution of the strategic-form game `<A, q_rows>` started from
/// the uniform profile, with a multi-start uniqueness certificate.
pub fn solve_stage_nash(
    space: &ProfileSpace,
    q_rows: &[&[f64]],
    perturb: &PerturbationSpec,
    params: &SolverParams,
) -> Result<StageNash> {
    if q_rows.len() != space.players() || q_rows.iter().any(|q| q.len() != space.len()) {
        return Err(Error::ShapeMismatch("one Q row per player over all profiles".into()));
    }
    if !(params.damping > 0.0 && params.damping <= 1.0 && params.min_damping > 0.0) {
        return Err(Error::InvalidConfig(format!("damping {} not in (0, 1]", params.damping)));
    }
    let uniform = (0..space.players())
        .map(|i| MixedStrategy::uniform(space.actions(i)))
        .collect();
    let (profile, residual, iterations) = fixed_point_from(space, q_rows, perturb, params, uniform)?;

    let mut rng = rng::stream(params.seed, Stream::MultiStart);
    let starts: Vec<Vec<MixedStrategy>> = (0..params.multistarts)
        .map(|_| {
            (0..space.players())
                .map(|i| MixedStrategy::from_vec_unchecked(rng::simplex_point(&mut rng, space.actions(i))))
                .collect()
        })
        .collect();
    let mut unique = true;
    let mut alternatives: Vec<Vec<MixedStrategy>> = Vec::new();
    for outcome in starts
        .into_iter()
        .map(|start| fixed_point_from(space, q_rows, perturb, params, start))
    {
        match outcome {
            Ok((p, _, _)) if profile_distance(&p, &profile) <= params.agreement => {}
            Ok((p, _, _)) => {
                unique = false;
                if alternatives
                    .iter()
                    .all(|alt| profile_distance(alt, &p) > params.agreement)
                {
                    alternatives.push(p);
                }
            }
            Err(_) => unique = false,
        }
    }
    Ok(StageNash {
        profile,
        residual,
        iterations,
        unique,
        alternatives,
    })
}

/// Solution of one state at one stage of a finite-horizon game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSolution {
    pub strategies: Vec<MixedStrategy>,
    /// `Q_k^i(s, .)` per player.
    pub q: Vec<Vec<f64>>,
    /// `v_k^i(s)` per player.
    pub v: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub unique: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternatives: Vec<Vec<MixedStrategy>>,
    /// Largest strategic-equivalence residual over players (0 at the
    /// terminal stage).
    pub equivalence_residual: f64,
}

/// `{pi_k, Q_k, v_k}` for `k = 0..horizon`, where stage `horizon - 1` is the
/// last one and has `Q = r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteHorizonSolution {
    pub horizon: usize,
    pub tau: f64,
    /// `stages[k][s]`
    pub stages: Vec<Vec<StageSolution>>,
}

impl FiniteHorizonSolution {
    /// Stage `m` steps before the last one, matching the learner's key `m`.
    pub fn at_distance(&self, m: usize) -> Option<&[StageSolution]> {
        if m < self.horizon {
            Some(&self.stages[self.horizon - 1 - m])
        } else {
            None
        }
    }

    pub fn states(&self) -> usize {
        self.stages.first().map_or(0, Vec::len)
    }

    pub fn all_unique(&self) -> bool {
        self.stages.iter().flatten().all(|x| x.unique)
    }

    pub fn max_residual(&self) -> f64 {
        self.stages.iter().flatten().map(|x| x.residual).fold(0.0, f64::max)
    }

    pub fn max_equivalence_residual(&self) -> f64 {
        self.stages
            .iter()
            .flatten()
            .map(|x| x.equivalence_residual)
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("solution serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Backward induction over `horizon` stages on a validated game.
///
/// Each non-terminal Q game is certified strategically equivalent to the
/// stage game before it is solved. States within a stage are solved
/// independently and merged in state order.
pub fn backward_induction(
    game: &StochasticGame,
    horizon: usize,
    perturb: &PerturbationSpec,
    params: &SolverParams,
    exec: Execution,
) -> Result<FiniteHorizonSolution> {
    game.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let space = game.space();
    let n = game.players();
    let last = horizon - 1;
    let mut stages: Vec<Vec<StageSolution>> = Vec::with_capacity(horizon);

    for k in (0..horizon).rev() {
        let next = stages.last();
        let solved = par::map_range(exec, game.states(), |s| -> Result<StageSolution> {
            let q: Vec<Vec<f64>> = (0..n)
                .map(|i| match next {
                    None => game.payoff_row(i, s).to_vec(),
                    Some(next) => {
                        let gamma = game.discount(i);
                        (0..space.len())
                            .map(|a| {
                                let cont: f64 = game
                                    .transition_row(s, a)
                                    .iter()
                                    .zip(next.iter())
                                    .map(|(p, x)| p * x.v[i])
                                    .sum();
                                game.payoff(i, s, a) + gamma * cont
                            })
                            .collect()
                    }
                })
                .collect();
            let mut equivalence_residual: f64 = 0.0;
            if k < last {
                for (i, row) in q.iter().enumerate() {
                    let d = decompose_controller_payoff(row, game, s, i)?;
                    if d.residual > EQUIVALENCE_TOL {
                        return Err(Error::EquivalenceViolation {
                            stage: k,
                            state: s,
                            player: i,
                            residual: d.residual,
                        });
                    }
                    equivalence_residual = equivalence_residual.max(d.residual);
                }
            }
            let rows: Vec<&[f64]> = q.iter().map(Vec::as_slice).collect();
            let nash = solve_stage_nash(space, &rows, perturb, params)?;
            let v = (0..n)
                .map(|i| {
                    expected_payoff(space, &q[i], &nash.profile[i], BeliefProfile::new(i, &nash.profile))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StageSolution {
                strategies: nash.profile,
                q,
                v,
                residual: nash.residual,
                iterations: nash.iterations,
                unique: nash.unique,
                alternatives: nash.alternatives,
                equivalence_residual,
            })
        });
        stages.push(solved.into_iter().collect::<Result<Vec<_>>>()?);
    }
    stages.reverse();
    Ok(FiniteHorizonSolution {
        horizon,
        tau: perturb.tau(),
        stages,
    })
}
