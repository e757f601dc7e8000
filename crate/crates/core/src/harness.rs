//! Experiment manifests, file outputs and batch execution.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::{self, bellman_residual, Checkpoint, MetricPoint, RunConfig, RunRecord};
use crate::error::{ControllerWitness, Error, Result};
use crate::game::{
    self, check_connectivity, classify_stage_game, validate_turn_based_controller, GeneratorSpec,
    StageGameStructure, StochasticGame,
};
use crate::oracle::{self, backward_induction, compare, ComparisonTable, FiniteHorizonSolution, SolverParams};
use crate::par::{self, Execution};

pub const TRAJECTORY_CSV_VERSION: &str = "# sfp-trajectory v1";
pub const SUMMARY_FORMAT: &str = "sfp-run-summary v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedGame {
    pub spec: GeneratorSpec,
    pub seed: u64,
}

/// Description of a batch of seeded runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    #[serde(default)]
    pub game: Option<PathBuf>,
    #[serde(default)]
    pub generator: Option<GeneratedGame>,
    pub run: RunConfig,
    #[serde(default)]
    pub oracle_horizon: Option<usize>,
    /// Seeds to run; `run.seed` alone when empty.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A manifest with its game loaded and every cross-field rule checked.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub game: StochasticGame,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub oracle_horizon: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let manifest: ExperimentManifest = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, base))
    }

    /// Resolves relative paths against `base` and validates.
    pub fn prepare(&self, base: &Path) -> Result<Experiment> {
        let game = match (&self.game, &self.generator) {
            (Some(p), None) => {
                let path = base.join(p);
                if !path.exists() {
                    return Err(Error::InvalidConfig(format!("game file {} not found", path.display())));
                }
                game::load_game(path)?
            }
            (None, Some(g)) => game::generate_game(&g.spec, g.seed)?,
            _ => {
                return Err(Error::InvalidConfig(
                    "manifest needs exactly one of game or generator".into(),
                ))
            }
        };
        game.validate()?;
        self.run.validate_for(game.states())?;
        let seeds = if self.seeds.is_empty() {
            vec![self.run.seed]
        } else {
            self.seeds.clone()
        };
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            return Err(Error::InvalidConfig(format!("seeds must be distinct: {seeds:?}")));
        }
        if let Some(h) = self.oracle_horizon {
            if h == 0 {
                return Err(Error::InvalidConfig("oracle horizon must be positive".into()));
            }
            if let Some(d) = self.run.snapshot_depth {
                if d >= h {
                    return Err(Error::InvalidConfig(format!(
                        "oracle horizon {h} does not cover snapshot depth {d}"
                    )));
                }
            }
        }
        Ok(Experiment {
            game,
            config: self.run.clone(),
            seeds,
            oracle_horizon: self.oracle_horizon,
            output_dir: self.output_dir.as_ref().map(|p| base.join(p)),
        })
    }
}

/// Runs one seed per entry, in parallel when requested. Output order
/// follows `seeds`.
pub fn run_batch(
    game: &StochasticGame,
    config: &RunConfig,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<RunRecord>> {
    par::map(exec, seeds, |&seed| engine::run(game, config, seed))
        .into_iter()
        .collect()
}

/// Persisted form of a run: everything but the stage log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format: String,
    pub seed: u64,
    pub config: RunConfig,
    pub total_stages: u64,
    #[serde(default)]
    pub oracle_horizon: Option<usize>,
    pub metrics: Vec<MetricPoint>,
    pub checkpoints: Vec<Checkpoint>,
}

impl RunSummary {
    pub fn new(record: &RunRecord, solution: Option<&FiniteHorizonSolution>) -> Result<Self> {
        let mut metrics = record.metrics.clone();
        if let Some(sol) = solution {
            let table = compare_record(&record.checkpoints, sol)?;
            for (point, s) in metrics.iter_mut().zip(&table.series) {
                for name in &record.config.metrics {
                    match name.as_str() {
                        "pi_distance" => {
                            point.values.insert(name.clone(), s.pi_distance);
                        }
                        "q_error" => {
                            point.values.insert(name.clone(), s.q_error);
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(RunSummary {
            format: SUMMARY_FORMAT.into(),
            seed: record.seed,
            config: record.config.clone(),
            total_stages: record.total_stages,
            oracle_horizon: solution.map(|s| s.horizon),
            metrics,
            checkpoints: record.checkpoints.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let summary: RunSummary = serde_json::from_str(text)?;
        if summary.format != SUMMARY_FORMAT {
            return Err(Error::Parse(format!("unsupported summary format {:?}", summary.format)));
        }
        Ok(summary)
    }
}

/// Compares every recorded `m` the solution covers.
fn compare_record(checkpoints: &[Checkpoint], sol: &FiniteHorizonSolution) -> Result<ComparisonTable> {
    let recorded = checkpoints.iter().map(|c| c.slots.len()).max().unwrap_or(0);
    compare(checkpoints, sol, Some(recorded.min(sol.horizon).saturating_sub(1)))
}

/// Trajectory CSV: one row per checkpoint, m, state and player.
pub fn trajectory_csv(
    game: &StochasticGame,
    record: &RunRecord,
    solution: Option<&FiniteHorizonSolution>,
) -> String {
    let space = game.space();
    let width = space.sizes().iter().copied().max().unwrap_or(0);
    let mut out = String::new();
    writeln!(out, "{TRAJECTORY_CSV_VERSION}").unwrap();
    let comps: Vec<String> = (0..width).map(|k| format!("p{k}")).collect();
    writeln!(out, "epoch,m,state,player,{},q_residual,pi_distance", comps.join(",")).unwrap();
    for cp in &record.checkpoints {
        for (m, slot) in cp.slots.iter().enumerate() {
            let truth = solution.and_then(|sol| sol.at_distance(m));
            for (s, x) in slot.iter().enumerate() {
                for i in 0..game.players() {
                    let p = x.beliefs[i].as_slice();
                    let cells: Vec<String> = (0..width)
                        .map(|k| p.get(k).map(|v| v.to_string()).unwrap_or_default())
                        .collect();
                    let q_res = if m == 0 {
                        0.0
                    } else {
                        slot_bellman_residual(game, &cp.slots[m - 1], s, i, &x.q[i])
                    };
                    let pi = truth
                        .map(|t| x.beliefs[i].linf_distance(&t[s].strategies[i]).to_string())
                        .unwrap_or_default();
                    writeln!(out, "{},{m},{s},{i},{},{q_res},{pi}", cp.epoch, cells.join(",")).unwrap();
                }
            }
        }
    }
    out
}

fn slot_bellman_residual(
    game: &StochasticGame,
    next: &[engine::SlotState],
    s: usize,
    i: usize,
    q: &[f64],
) -> f64 {
    let gamma = game.discount(i);
    (0..game.space().len())
        .map(|a| {
            let cont: f64 = game
                .transition_row(s, a)
                .iter()
                .zip(next)
                .map(|(p, x)| p * x.v[i])
                .sum();
            (q[a] - game.payoff(i, s, a) - gamma * cont).abs()
        })
        .fold(0.0, f64::max)
}

/// Runs every seed of the experiment and writes `run_<seed>.csv` and
/// `run_<seed>.json` into `out_dir`. Returns the written paths.
pub fn run_experiment(exp: &Experiment, out_dir: &Path, exec: Execution) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let solution = match exp.oracle_horizon {
        Some(h) => Some(backward_induction(
            &exp.game,
            h,
            &exp.config.perturbation()?,
            &SolverParams::default(),
            exec,
        )?),
        None => None,
    };
    let written = par::map(exec, &exp.seeds, |&seed| -> Result<Vec<PathBuf>> {
        let record = engine::run(&exp.game, &exp.config, seed)?;
        let csv_path = out_dir.join(format!("run_{seed}.csv"));
        let json_path = out_dir.join(format!("run_{seed}.json"));
        std::fs::write(&csv_path, trajectory_csv(&exp.game, &record, solution.as_ref()))?;
        std::fs::write(&json_path, RunSummary::new(&record, solution.as_ref())?.to_json())?;
        Ok(vec![csv_path, json_path])
    });
    let mut paths = Vec::new();
    for w in written {
        paths.extend(w?);
    }
    Ok(paths)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub checks: Vec<Check>,
}

/// Runs every game validator and collects the results, with witnesses on
/// failure.
pub fn validation_report(game: &StochasticGame) -> ValidationReport {
    let mut checks = vec![Check {
        name: "row_stochastic",
        ok: true,
        detail: Value::Null,
    }];
    match validate_turn_based_controller(game) {
        Ok(report) => {
            let mismatched: Vec<usize> = (0..game.states())
                .filter(|&s| !report.candidates[s].contains(&game.controller(s)))
                .collect();
            checks.push(Check {
                name: "turn_based_controller",
                ok: true,
                detail: json!({ "candidates": report.candidates, "chosen": report.chosen }),
            });
            checks.push(Check {
                name: "declared_controllers",
                ok: mismatched.is_empty(),
                detail: if mismatched.is_empty() {
                    Value::Null
                } else {
                    json!({ "states": mismatched, "declared": game.controllers() })
                },
            });
        }
        Err(Error::Violation { state, witnesses }) => checks.push(Check {
            name: "turn_based_controller",
            ok: false,
            detail: json!({ "state": state, "witnesses": witnesses_json(&witnesses) }),
        }),
        Err(e) => checks.push(Check {
            name: "turn_based_controller",
            ok: false,
            detail: json!({ "error": e.to_string() }),
        }),
    }
    let structures: Vec<StageGameStructure> =
        (0..game.states()).map(|s| classify_stage_game(game, s)).collect();
    let unstructured: Vec<usize> = structures
        .iter()
        .enumerate()
        .filter(|(_, &t)| t == StageGameStructure::Unstructured)
        .map(|(s, _)| s)
        .collect();
    checks.push(Check {
        name: "stage_structure",
        ok: unstructured.is_empty(),
        detail: json!({ "structures": structures, "unstructured_states": unstructured }),
    });
    checks.push(match check_connectivity(game) {
        Ok(()) => Check {
            name: "connectivity",
            ok: true,
            detail: Value::Null,
        },
        Err(Error::Disconnected { from, to }) => Check {
            name: "connectivity",
            ok: false,
            detail: json!({ "from": from, "to": to }),
        },
        Err(e) => Check {
            name: "connectivity",
            ok: false,
            detail: json!({ "error": e.to_string() }),
        },
    });
    ValidationReport {
        ok: checks.iter().all(|c| c.ok),
        checks,
    }
}

fn witnesses_json(w: &[ControllerWitness]) -> Value {
    serde_json::to_value(w).unwrap_or(Value::Null)
}

/// Pass/fail thresholds applied to the final checkpoint of a comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareThresholds {
    pub max_pi_distance: f64,
    /// Absolute Q tolerance; defaults to `0.1 max |r|` when absent.
    pub max_q_error: Option<f64>,
    /// When set, also require the trend ratio over this window to be < 0.5.
    pub trend_window: Option<usize>,
}

impl Default for CompareThresholds {
    fn default() -> Self {
        CompareThresholds {
            max_pi_distance: 0.05,
            max_q_error: None,
            trend_window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareVerdict {
    pub pass: bool,
    pub final_pi_distance: f64,
    pub final_q_error: f64,
    pub q_tolerance: f64,
    pub trend_ratio: Option<f64>,
    pub ambiguous: bool,
}

/// `max |r|` read off the terminal stage of a solution, where `Q = r`.
pub fn max_abs_stage_payoff(sol: &FiniteHorizonSolution) -> f64 {
    sol.at_distance(0)
        .into_iter()
        .flatten()
        .flat_map(|x| x.q.iter().flatten())
        .fold(0.0, |m, q| m.max(q.abs()))
}

pub fn judge(table: &ComparisonTable, sol: &FiniteHorizonSolution, th: &CompareThresholds) -> CompareVerdict {
    let last = table.final_point().copied().unwrap_or(oracle::SeriesPoint {
        epoch: 0,
        pi_distance: f64::INFINITY,
        q_error: f64::INFINITY,
    });
    let q_tolerance = th.max_q_error.unwrap_or(0.1 * max_abs_stage_payoff(sol));
    let trend_ratio = th.trend_window.and_then(|w| table.trend_ratio(w));
    let trend_ok = match th.trend_window {
        None => true,
        Some(_) => trend_ratio.is_some_and(|r| r < 0.5),
    };
    CompareVerdict {
        pass: last.pi_distance <= th.max_pi_distance && last.q_error <= q_tolerance && trend_ok,
        final_pi_distance: last.pi_distance,
        final_q_error: last.q_error,
        q_tolerance,
        trend_ratio,
        ambiguous: table.ambiguous,
    }
}

/// Engine-side Bellman residual of a checkpoint.
pub fn checkpoint_residual(game: &StochasticGame, cp: &Checkpoint) -> f64 {
    bellman_residual(game, &cp.slots)
}
