use crate::error::{Error, Result};
use crate::game::ProfileSpace;
use crate::response::{smoothed_best_response, BeliefProfile, MixedStrategy, PerturbationSpec};

/// Right-hand side of the limiting ODE `d pi^j / dt = B^j(pi^{-j}) - pi^j`.
pub fn ode_rhs(
    space: &ProfileSpace,
    profile: &[MixedStrategy],
    q_rows: &[&[f64]],
    perturb: &PerturbationSpec,
) -> Result<Vec<Vec<f64>>> {
    if profile.len() != space.players() || q_rows.len() != space.players() {
        return Err(Error::ShapeMismatch("one strategy and one Q row per player".into()));
    }
    (0..space.players())
        .map(|j| {
            let br = smoothed_best_response(space, q_rows[j], BeliefProfile::new(j, profile), perturb)?;
            Ok(br
                .as_slice()
                .iter()
                .zip(profile[j].as_slice())
                .map(|(b, p)| b - p)
                .collect())
        })
        .collect()
}

/// Forward-Euler integration of [`ode_rhs`]; returns the terminal profile.
pub fn euler_path(
    space: &ProfileSpace,
    start: Vec<MixedStrategy>,
    q_rows: &[&[f64]],
    perturb: &PerturbationSpec,
    step: f64,
    steps: usize,
) -> Result<Vec<MixedStrategy>> {
    let mut pi = start;
    for _ in 0..steps {
        let d = ode_rhs(space, &pi, q_rows, perturb)?;
        pi = pi
            .iter()
            .zip(&d)
            .map(|(p, dp)| {
                MixedStrategy::from_vec_unchecked(
                    p.as_slice().iter().zip(dp).map(|(x, dx)| x + step * dx).collect(),
                )
            })
            .collect();
    }
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::library;
    use crate::oracle::{solve_stage_nash, SolverParams};

    #[test]
    fn zero_at_fixed_point() {
        let g = library::acceptance_game();
        let rows: Vec<&[f64]> = (0..2).map(|i| g.payoff_row(i, 1)).collect();
        let perturb = PerturbationSpec::entropy(2.0).unwrap();
        let nash = solve_stage_nash(g.space(), &rows, &perturb, &SolverParams::default()).unwrap();
        let d = ode_rhs(g.space(), &nash.profile, &rows, &perturb).unwrap();
        assert!(d.iter().flatten().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn pennies_uniform_is_stationary_and_tangent_sums_vanish() {
        let g = library::matching_pennies();
        let rows: Vec<&[f64]> = (0..2).map(|i| g.payoff_row(i, 0)).collect();
        let perturb = PerturbationSpec::entropy(0.7).unwrap();
        let uni = vec![MixedStrategy::uniform(2); 2];
        let d = ode_rhs(g.space(), &uni, &rows, &perturb).unwrap();
        assert!(d.iter().flatten().all(|&x| x == 0.0));

        let off = vec![MixedStrategy::new(vec![0.9, 0.1]).unwrap(), MixedStrategy::new(vec![0.3, 0.7]).unwrap()];
        let d = ode_rhs(g.space(), &off, &rows, &perturb).unwrap();
        for t in &d {
            assert!(t.iter().sum::<f64>().abs() <= 1e-12);
        }
    }
}
