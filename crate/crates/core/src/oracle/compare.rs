use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{profile_distance, FiniteHorizonSolution};
use crate::engine::{Checkpoint, SlotState};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub epoch: usize,
    pub m: usize,
    pub state: usize,
    /// `max_i ||pi_hat^i - pi_m^i||_inf`.
    pub pi_distance: f64,
    /// `max_i max_a |Q_hat^i(a) - Q_m^i(a)|`.
    pub q_error: f64,
    /// The oracle stage has several fixed points; `pi_distance` is to the
    /// nearest one found.
    pub ambiguous: bool,
}

/// Worst row per checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub epoch: usize,
    pub pi_distance: f64,
    pub q_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub max_m: usize,
    pub rows: Vec<ComparisonRow>,
    pub series: Vec<SeriesPoint>,
    pub ambiguous: bool,
}

pub const COMPARE_CSV_VERSION: &str = "# sfp-compare v1";

impl ComparisonTable {
    pub fn final_point(&self) -> Option<&SeriesPoint> {
        self.series.last()
    }

    /// Rows of the last checkpoint.
    pub fn final_rows(&self) -> impl Iterator<Item = &ComparisonRow> {
        let last = self.series.last().map(|p| p.epoch);
        self.rows.iter().filter(move |r| Some(r.epoch) == last)
    }

    /// Median of the last `window` series distances divided by the median of
    /// the first `window`.
    pub fn trend_ratio(&self, window: usize) -> Option<f64> {
        if window == 0 || self.series.len() < 2 * window {
            return None;
        }
        let d: Vec<f64> = self.series.iter().map(|p| p.pi_distance).collect();
        let head = median(&d[..window]);
        let tail = median(&d[d.len() - window..]);
        Some(tail / head)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{COMPARE_CSV_VERSION}").unwrap();
        writeln!(out, "epoch,m,state,pi_distance,q_error,ambiguous").unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.m, r.state, r.pi_distance, r.q_error, r.ambiguous
            )
            .unwrap();
        }
        out
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Distances between learned estimates and the oracle, per checkpoint,
/// `m <= max_m` and state. Learner key `m` is matched with the oracle stage
/// `m` steps before the last.
pub fn compare(
    checkpoints: &[Checkpoint],
    solution: &FiniteHorizonSolution,
    max_m: Option<usize>,
) -> Result<ComparisonTable> {
    let recorded = checkpoints
        .iter()
        .map(|c| c.slots.len())
        .max()
        .ok_or_else(|| Error::IndexMismatch("record has no checkpoints".into()))?;
    let max_m = max_m.unwrap_or(recorded.saturating_sub(1));
    if max_m >= solution.horizon {
        return Err(Error::IndexMismatch(format!(
            "comparing m up to {max_m} needs an oracle horizon of at least {}, got {}",
            max_m + 1,
            solution.horizon
        )));
    }
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut ambiguous = false;
    for cp in checkpoints {
        let mut worst = SeriesPoint {
            epoch: cp.epoch,
            pi_distance: 0.0,
            q_error: 0.0,
        };
        for (m, slot) in cp.slots.iter().enumerate().take(max_m + 1) {
            let stage = solution.at_distance(m).expect("m below horizon");
            if slot.len() != stage.len() {
                return Err(Error::IndexMismatch(format!(
                    "record has {} states, solution {}",
                    slot.len(),
                    stage.len()
                )));
            }
            for (s, (learned, truth)) in slot.iter().zip(stage).enumerate() {
                if learned.beliefs.len() != truth.strategies.len() {
                    return Err(Error::IndexMismatch("player counts differ".into()));
                }
                let mut pi_distance = profile_distance(&learned.beliefs, &truth.strategies);
                for alt in &truth.alternatives {
                    pi_distance = pi_distance.min(profile_distance(&learned.beliefs, alt));
                }
                let q_error = q_error(learned, &truth.q);
                ambiguous |= !truth.unique;
                worst.pi_distance = worst.pi_distance.max(pi_distance);
                worst.q_error = worst.q_error.max(q_error);
                rows.push(ComparisonRow {
                    epoch: cp.epoch,
                    m,
                    state: s,
                    pi_distance,
                    q_error,
                    ambiguous: !truth.unique,
                });
            }
        }
        series.push(worst);
    }
    Ok(ComparisonTable {
        max_m,
        rows,
        series,
        ambiguous,
    })
}

fn q_error(learned: &SlotState, truth: &[Vec<f64>]) -> f64 {
    learned
        .q
        .iter()
        .zip(truth)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// A checkpoint holding the oracle's own strategies and Q functions for
/// `m = 0..=depth`.
pub fn oracle_checkpoint(solution: &FiniteHorizonSolution, depth: usize, epoch: usize) -> Checkpoint {
    let slots = (0..=depth.min(solution.horizon - 1))
        .map(|m| {
            solution
                .at_distance(m)
                .expect("m below horizon")
                .iter()
                .map(|x| SlotState {
                    beliefs: x.strategies.clone(),
                    q: x.q.clone(),
                    v: x.v.clone(),
                    count: 0,
                })
                .collect()
        })
        .collect();
    Checkpoint {
        epoch,
        stages: 0,
        slots,
    }
}
