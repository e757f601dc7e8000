//! Expected payoffs under product beliefs and the smoothed best response.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::ProfileSpace;
use crate::STRUCTURAL_TOL;

/// A probability vector over one player's actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::ShapeMismatch("empty strategy".into()));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("strategy"));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidConfig(format!("negative probability in {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > STRUCTURAL_TOL {
            return Err(Error::InvalidConfig(format!("probabilities sum to {total}")));
        }
        Ok(MixedStrategy(probs))
    }

    pub fn uniform(actions: usize) -> Self {
        MixedStrategy(vec![1.0 / actions as f64; actions])
    }

    pub fn pure(actions: usize, action: usize) -> Self {
        let mut p = vec![0.0; actions];
        p[action] = 1.0;
        MixedStrategy(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `-sum p log p`, with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    pub fn linf_distance(&self, other: &MixedStrategy) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Moves the strategy toward the pure action: `p <- p + alpha (e_a - p)`.
    pub fn step_toward(&mut self, action: usize, alpha: f64) {
        for (k, p) in self.0.iter_mut().enumerate() {
            let target = if k == action { 1.0 } else { 0.0 };
            *p += alpha * (target - *p);
        }
    }

    /// Convex combination `(1 - lambda) self + lambda other`.
    pub fn mix(&self, other: &MixedStrategy, lambda: f64) -> MixedStrategy {
        MixedStrategy(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
                .collect(),
        )
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        MixedStrategy(probs)
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        MixedStrategy::new(v)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(m: MixedStrategy) -> Self {
        m.0
    }
}

/// One player's beliefs about every opponent.
///
/// Borrows a full strategy profile; the owner's own entry is ignored.
#[derive(Clone, Copy, Debug)]
pub struct BeliefProfile<'a> {
    owner: usize,
    profile: &'a [MixedStrategy],
}

impl<'a> BeliefProfile<'a> {
    pub fn new(owner: usize, profile: &'a [MixedStrategy]) -> Self {
        BeliefProfile { owner, profile }
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn about(&self, player: usize) -> &MixedStrategy {
        &self.profile[player]
    }

    fn check(&self, space: &ProfileSpace, q_row: &[f64]) -> Result<()> {
        if q_row.len() != space.len() {
            return Err(Error::ShapeMismatch(format!(
                "Q row has {} entries, expected {}",
                q_row.len(),
                space.len()
            )));
        }
        if self.profile.len() != space.players() || self.owner >= space.players() {
            return Err(Error::ShapeMismatch(format!(
                "belief profile for player {} has {} entries, expected {}",
                self.owner,
                self.profile.len(),
                space.players()
            )));
        }
        for (j, b) in self.profile.iter().enumerate() {
            if j != self.owner && b.len() != space.actions(j) {
                return Err(Error::ShapeMismatch(format!(
                    "belief about player {j} has {} actions, expected {}",
                    b.len(),
                    space.actions(j)
                )));
            }
        }
        Ok(())
    }
}

/// Kind of smooth perturbation added to the expected payoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    Entropy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    kind: Perturbation,
    tau: f64,
}

impl PerturbationSpec {
    pub fn entropy(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidConfig(format!("temperature must be > 0, got {tau}")));
        }
        Ok(PerturbationSpec {
            kind: Perturbation::Entropy,
            tau,
        })
    }

    pub fn kind(&self) -> Perturbation {
        self.kind
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `tau * eta(strategy)`.
    pub fn penalty(&self, strategy: &MixedStrategy) -> f64 {
        match self.kind {
            Perturbation::Entropy => self.tau * strategy.entropy(),
        }
    }
}

/// `u(a^i) = E_{a^{-i} ~ beliefs}[Q(a^i, a^{-i})]`.
pub fn marginal_payoffs(
    space: &ProfileSpace,
    q_row: &[f64],
    beliefs: BeliefProfile<'_>,
) -> Result<Vec<f64>> {
    beliefs.check(space, q_row)?;
    let owner = beliefs.owner;
    let mut u = vec![0.0; space.actions(owner)];
    for (a, &q) in q_row.iter().enumerate() {
        let mut w = 1.0;
        for j in (0..space.players()).filter(|&j| j != owner) {
            w *= beliefs.profile[j].0[space.action_of(a, j)];
        }
        u[space.action_of(a, owner)] += w * q;
    }
    Ok(u)
}

/// `E_{(a^i, a^{-i}) ~ (own, beliefs)}[Q(a)]`.
pub fn expected_payoff(
    space: &ProfileSpace,
    q_row: &[f64],
    own: &MixedStrategy,
    beliefs: BeliefProfile<'_>,
) -> Result<f64> {
    let u = marginal_payoffs(space, q_row, beliefs)?;
    if own.len() != u.len() {
        return Err(Error::ShapeMismatch(format!(
            "own strategy has {} actions, expected {}",
            own.len(),
            u.len()
        )));
    }
    Ok(u.iter().zip(&own.0).map(|(x, p)| x * p).sum())
}

/// Logit choice `p(a) ∝ exp(u(a) / tau)`, computed with max subtraction.
///
/// Entries that underflow are clamped to the smallest positive normal so the
/// output keeps full support.
pub fn logit(u: &[f64], tau: f64) -> MixedStrategy {
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = u.iter().map(|x| ((x - max) / tau).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x = (*x / total).max(f64::MIN_POSITIVE);
    }
    MixedStrategy(w)
}

/// The unique maximiser of expected payoff plus the perturbation.
pub fn smoothed_best_response(
    space: &ProfileSpace,
    q_row: &[f64],
    beliefs: BeliefProfile<'_>,
    perturb: &PerturbationSpec,
) -> Result<MixedStrategy> {
    if q_row.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Q row"));
    }
    let u = marginal_payoffs(space, q_row, beliefs)?;
    match perturb.kind {
        Perturbation::Entropy => Ok(logit(&u, perturb.tau)),
    }
}

/// Unperturbed expected payoff of playing the smoothed best response.
pub fn best_response_value(
    space: &ProfileSpace,
    q_row: &[f64],
    beliefs: BeliefProfile<'_>,
    perturb: &PerturbationSpec,
) -> Result<f64> {
    let br = smoothed_best_response(space, q_row, beliefs, perturb)?;
    expected_payoff(space, q_row, &br, beliefs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_by_two() -> ProfileSpace {
        ProfileSpace::new(vec![2, 2]).unwrap()
    }

    fn against(belief: Vec<f64>) -> Vec<MixedStrategy> {
        vec![MixedStrategy::uniform(2), MixedStrategy::new(belief).unwrap()]
    }

    const Q: [f64; 4] = [2.0, 0.0, 1.0, 3.0];
    const PENNIES: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

    // Brute-force sum over the four profiles, independent of marginal_payoffs.
    fn brute_expected(q: &[f64; 4], own: [f64; 2], opp: [f64; 2]) -> f64 {
        let mut total = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                total += q[2 * a + b] * own[a] * opp[b];
            }
        }
        total
    }

    #[test]
    fn expected_payoff_examples() {
        let space = two_by_two();
        let prof = against(vec![0.25, 0.75]);
        let own = MixedStrategy::uniform(2);
        // Row player against a (0.25, 0.75) column player.
        let v = expected_payoff(&space, &Q, &own, BeliefProfile::new(0, &prof)).unwrap();
        assert_eq!(brute_expected(&Q, [0.5, 0.5], [0.25, 0.75]), 1.5);
        assert!((v - 1.5).abs() < 1e-15);
        // Column player against a (0.25, 0.75) row player.
        let col = vec![MixedStrategy::new(vec![0.25, 0.75]).unwrap(), MixedStrategy::uniform(2)];
        let v = expected_payoff(&space, &Q, &own, BeliefProfile::new(1, &col)).unwrap();
        let transposed = [Q[0], Q[2], Q[1], Q[3]];
        assert_eq!(brute_expected(&transposed, [0.5, 0.5], [0.25, 0.75]), 1.75);
        assert!((v - 1.75).abs() < 1e-15);

        let uni = against(vec![0.5, 0.5]);
        let v = expected_payoff(&space, &PENNIES, &own, BeliefProfile::new(0, &uni)).unwrap();
        assert_eq!(v, 0.0);

        let c = [3.5; 4];
        let v = expected_payoff(&space, &c, &MixedStrategy::pure(2, 1), BeliefProfile::new(0, &prof))
            .unwrap();
        assert!((v - 3.5).abs() < 1e-15);
    }

    #[test]
    fn marginal_payoff_examples() {
        let space = two_by_two();
        let prof = against(vec![0.25, 0.75]);
        let u = marginal_payoffs(&space, &Q, BeliefProfile::new(0, &prof)).unwrap();
        assert_eq!(u, vec![0.5, 2.5]);
        let uni = against(vec![0.5, 0.5]);
        let u = marginal_payoffs(&space, &PENNIES, BeliefProfile::new(0, &uni)).unwrap();
        assert_eq!(u, vec![0.0, 0.0]);
        let u = marginal_payoffs(&space, &[-2.0; 4], BeliefProfile::new(0, &prof)).unwrap();
        assert_eq!(u, vec![-2.0, -2.0]);
    }

    #[test]
    fn marginal_payoffs_for_column_player() {
        let space = two_by_two();
        let prof = vec![MixedStrategy::new(vec![0.25, 0.75]).unwrap(), MixedStrategy::uniform(2)];
        let u = marginal_payoffs(&space, &Q, BeliefProfile::new(1, &prof)).unwrap();
        // u(b) = 0.25 Q[0][b] + 0.75 Q[1][b]
        assert_eq!(u, vec![0.25 * 2.0 + 0.75 * 1.0, 0.75 * 3.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let space = two_by_two();
        let prof = against(vec![0.5, 0.5]);
        assert!(matches!(
            marginal_payoffs(&space, &[0.0; 3], BeliefProfile::new(0, &prof)),
            Err(Error::ShapeMismatch(_))
        ));
        let bad = vec![MixedStrategy::uniform(2), MixedStrategy::uniform(3)];
        assert!(matches!(
            marginal_payoffs(&space, &Q, BeliefProfile::new(0, &bad)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn logit_examples() {
        let p = logit(&[0.0, 0.0], 0.3);
        assert_eq!(p.as_slice(), &[0.5, 0.5]);

        let e = std::f64::consts::E;
        let p = logit(&[1.0, 0.0], 1.0);
        assert!((p.as_slice()[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p.as_slice()[0] - 0.731059).abs() < 1e-6);
        assert!((p.as_slice()[1] - 0.268941).abs() < 1e-6);

        let p = logit(&[1.0, 0.0], 1000.0);
        assert!(p.linf_distance(&MixedStrategy::uniform(2)) < 1e-3);
    }

    #[test]
    fn logit_survives_tiny_temperature() {
        let p = logit(&[1.0, 0.0, 0.999], 1e-6);
        assert!(p.as_slice().iter().all(|&x| x.is_finite() && x > 0.0));
        assert!((p.as_slice()[0] - 1.0).abs() < 1e-12);
        let p = logit(&[1e300, -1e300], 1e-6);
        assert!(p.as_slice().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn non_finite_q_row_is_rejected() {
        let space = two_by_two();
        let prof = against(vec![0.5, 0.5]);
        let perturb = PerturbationSpec::entropy(1.0).unwrap();
        let q = [f64::NAN, 0.0, 0.0, 0.0];
        assert!(matches!(
            smoothed_best_response(&space, &q, BeliefProfile::new(0, &prof), &perturb),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn temperature_must_be_positive() {
        assert!(PerturbationSpec::entropy(0.0).is_err());
        assert!(PerturbationSpec::entropy(-1.0).is_err());
        assert!(PerturbationSpec::entropy(f64::INFINITY).is_err());
    }

    #[test]
    fn best_response_value_examples() {
        let space = two_by_two();
        let perturb = PerturbationSpec::entropy(1.0).unwrap();
        let prof = against(vec![0.25, 0.75]);
        let v = best_response_value(&space, &Q, BeliefProfile::new(0, &prof), &perturb).unwrap();
        let br = logit(&[0.5, 2.5], 1.0);
        let expect = brute_expected(&Q, [br.as_slice()[0], br.as_slice()[1]], [0.25, 0.75]);
        assert!((v - expect).abs() < 1e-15);

        let uni = against(vec![0.5, 0.5]);
        let v = best_response_value(&space, &PENNIES, BeliefProfile::new(0, &uni), &perturb).unwrap();
        assert_eq!(v, 0.0);
        let v = best_response_value(&space, &[4.0; 4], BeliefProfile::new(0, &prof), &perturb).unwrap();
        assert!((v - 4.0).abs() < 1e-15);
    }

    #[test]
    fn step_toward_endpoints() {
        let mut p = MixedStrategy::new(vec![0.2, 0.8]).unwrap();
        p.step_toward(0, 0.0);
        assert_eq!(p.as_slice(), &[0.2, 0.8]);
        p.step_toward(0, 1.0);
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
    }

    fn space_and_inputs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (
            prop::collection::vec(-5.0f64..5.0, 6),
            prop::collection::vec(0.01f64..1.0, 2),
            0.05f64..10.0,
        )
    }

    proptest! {
        #[test]
        fn shift_invariance((q, b, tau) in space_and_inputs(), shift in prop::collection::vec(-10.0f64..10.0, 2)) {
            // player 0 has 3 actions, player 1 has 2
            let space = ProfileSpace::new(vec![3, 2]).unwrap();
            let total: f64 = b.iter().sum();
            let prof = vec![MixedStrategy::uniform(3), MixedStrategy::new(b.iter().map(|x| x / total).collect()).unwrap()];
            let perturb = PerturbationSpec::entropy(tau).unwrap();
            let shifted: Vec<f64> = (0..6).map(|a| q[a] + shift[space.action_of(a, 1)]).collect();
            let x = smoothed_best_response(&space, &q, BeliefProfile::new(0, &prof), &perturb).unwrap();
            let y = smoothed_best_response(&space, &shifted, BeliefProfile::new(0, &prof), &perturb).unwrap();
            prop_assert!(x.linf_distance(&y) <= 1e-12);
        }

        #[test]
        fn temperature_scaling((q, b, tau) in space_and_inputs(), h in 0.1f64..10.0) {
            let space = ProfileSpace::new(vec![3, 2]).unwrap();
            let total: f64 = b.iter().sum();
            let prof = vec![MixedStrategy::uniform(3), MixedStrategy::new(b.iter().map(|x| x / total).collect()).unwrap()];
            let scaled: Vec<f64> = q.iter().map(|x| h * x).collect();
            let x = smoothed_best_response(&space, &q, BeliefProfile::new(0, &prof), &PerturbationSpec::entropy(tau).unwrap()).unwrap();
            let y = smoothed_best_response(&space, &scaled, BeliefProfile::new(0, &prof), &PerturbationSpec::entropy(tau * h).unwrap()).unwrap();
            prop_assert!(x.linf_distance(&y) <= 1e-12);
        }

        #[test]
        fn belief_steps_stay_on_simplex(steps in prop::collection::vec((0usize..3, 0.0f64..=1.0), 1..200)) {
            let mut p = MixedStrategy::uniform(3);
            for (a, alpha) in steps {
                p.step_toward(a, alpha);
                prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
                prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
