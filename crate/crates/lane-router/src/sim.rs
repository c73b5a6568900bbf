//! Monte Carlo rollout of a solved policy through the stochastic lane
//! change model, used to validate that empirical mean cost matches the
//! computed cost-to-go.
//!
//! Rollouts are deterministic given (graph, solution, start, seed). Trial
//! `i` of an estimate uses the seed `seed XOR K·(i+1)` for a fixed odd
//! constant `K`, so trials are independent, reproducible, and order-free.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{CellId, LaneGraph};
use crate::mdp::ActionKind;
use crate::router::Solution;
use crate::Action;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown cell id {0}")]
    UnknownCell(CellId),
    #[error("start cell {0} cannot reach the goal")]
    UnreachableStart(CellId),
    #[error("no policy action at visited cell {0}")]
    MissingAction(CellId),
    #[error("trials must be at least 1")]
    NoTrials,
}

/// One executed step of a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    /// Cell the action was taken from.
    pub cell: CellId,
    pub action: Action,
    /// Whether the lane change succeeded. Stays are always true; forced
    /// lane changes always move, so this records whether the change would
    /// have succeeded on its own (false means the surcharge was incurred).
    pub success: bool,
    /// Cost incurred by this step.
    pub cost: f64,
}

/// A full rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrace {
    pub steps: Vec<RolloutStep>,
    pub total_cost: f64,
    pub reached_goal: bool,
    pub steps_taken: usize,
}

/// Summary statistics over independent rollouts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub trials: usize,
    #[serde(rename = "mean")]
    pub mean_cost: f64,
    pub std_dev: f64,
    pub std_err: f64,
    /// Rollouts that hit the step limit without reaching the goal.
    pub failures: usize,
}

/// Default rollout step limit: 10·|cells|. Generous for monotone policies,
/// which never revisit a cell, while terminating cyclic ones.
pub fn default_step_limit(graph: &LaneGraph) -> usize {
    10 * graph.len().max(1)
}

const TRIAL_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed for trial `i` of an estimate run with base seed `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ TRIAL_SEED_STRIDE.wrapping_mul(trial as u64 + 1)
}

struct SampledStep {
    next: u32,
    cost: f64,
    success: bool,
}

/// Sample one policy step from cell `x`. Stays draw no randomness; lane
/// changes and forced lane changes draw exactly one uniform each.
#[inline]
fn sample_step(
    graph: &LaneGraph,
    solution: &Solution,
    x: u32,
    rng: &mut ChaCha8Rng,
) -> Result<SampledStep, SimError> {
    let action = solution
        .action_at(x)
        .ok_or_else(|| SimError::MissingAction(graph.id(x).clone()))?;
    let c = graph.cost(x);
    let params = &solution.params;
    Ok(match action.kind {
        ActionKind::Stay => SampledStep {
            next: action.success,
            cost: c,
            success: true,
        },
        ActionKind::LaneChange => {
            let succeeded = rng.gen::<f64>() < params.success_prob(graph.length(x));
            if succeeded {
                SampledStep {
                    next: action.success,
                    cost: params.lane_change_cost + c,
                    success: true,
                }
            } else {
                SampledStep {
                    next: action.failure.expect("lane change has failure target"),
                    cost: c,
                    success: false,
                }
            }
        }
        ActionKind::ForcedLaneChange => {
            // Always moves; the penalty is charged when the change would
            // not have succeeded on its own.
            let natural = rng.gen::<f64>() < params.success_prob(graph.length(x));
            SampledStep {
                next: action.success,
                cost: params.lane_change_cost
                    + c
                    + if natural {
                        0.0
                    } else {
                        params.forced_lane_change_cost
                    },
                success: natural,
            }
        }
    })
}

fn start_index(graph: &LaneGraph, solution: &Solution, start: &CellId) -> Result<u32, SimError> {
    let idx = graph
        .index_of(start.as_str())
        .ok_or_else(|| SimError::UnknownCell(start.clone()))?;
    if !solution.value_at(idx).is_finite() {
        return Err(SimError::UnreachableStart(start.clone()));
    }
    Ok(idx)
}

/// Execute the policy from `start` until the goal or the step limit,
/// recording every step. Identical inputs produce identical traces.
pub fn rollout(
    graph: &LaneGraph,
    solution: &Solution,
    start: &CellId,
    seed: u64,
    step_limit: usize,
) -> Result<RolloutTrace, SimError> {
    let goal = graph
        .index_of(solution.goal.as_str())
        .ok_or_else(|| SimError::UnknownCell(solution.goal.clone()))?;
    let mut x = start_index(graph, solution, start)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut steps = Vec::new();
    let mut total_cost = 0.0;
    let mut reached_goal = false;
    loop {
        if x == goal {
            reached_goal = true;
            break;
        }
        if steps.len() >= step_limit {
            break;
        }
        let step = sample_step(graph, solution, x, &mut rng)?;
        steps.push(RolloutStep {
            cell: graph.id(x).clone(),
            action: solution
                .action_of(graph, graph.id(x).as_str())
                .expect("step sampled from a cell with an action"),
            success: step.success,
            cost: step.cost,
        });
        total_cost += step.cost;
        x = step.next;
    }

    Ok(RolloutTrace {
        steps_taken: steps.len(),
        steps,
        total_cost,
        reached_goal,
    })
}

/// Estimate the expected policy cost from `start` over independent seeded
/// rollouts. Statistics accumulate in trial order, so a parallel driver
/// would produce the identical summary.
pub fn estimate_cost(
    graph: &LaneGraph,
    solution: &Solution,
    start: &CellId,
    trials: usize,
    seed: u64,
    step_limit: usize,
) -> Result<SimSummary, SimError> {
    if trials == 0 {
        return Err(SimError::NoTrials);
    }
    let goal = graph
        .index_of(solution.goal.as_str())
        .ok_or_else(|| SimError::UnknownCell(solution.goal.clone()))?;
    let start_idx = start_index(graph, solution, start)?;

    let mut costs = Vec::with_capacity(trials);
    let mut failures = 0usize;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, trial));
        let mut x = start_idx;
        let mut cost = 0.0;
        let mut steps = 0usize;
        while x != goal {
            if steps >= step_limit {
                failures += 1;
                break;
            }
            let step = sample_step(graph, solution, x, &mut rng)?;
            cost += step.cost;
            x = step.next;
            steps += 1;
        }
        costs.push(cost);
    }

    let n = trials as f64;
    let mean_cost = costs.iter().sum::<f64>() / n;
    let std_dev = if trials > 1 {
        (costs.iter().map(|c| (c - mean_cost).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SimSummary {
        trials,
        mean_cost,
        std_dev,
        std_err: std_dev / n.sqrt(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Cell;
    use crate::mdp::{SolveParams, Value};
    use crate::router::{solve, SolveMode};

    /// Three stay cells into a goal, unit costs.
    fn chain_fixture() -> (LaneGraph, Solution) {
        let ids = ["a", "b", "c", "g"];
        let cells: Vec<Cell> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let mut c = Cell::new(*id, 1.0, 1.0);
                if let Some(next) = ids.get(i + 1) {
                    c.successors = vec![CellId::from(*next)];
                }
                c
            })
            .collect();
        let graph = LaneGraph::build(cells).unwrap();
        let params = SolveParams::new(0.01, 5.0, 100.0).unwrap();
        let solution = solve(&graph, &"g".into(), &params, SolveMode::Strict).unwrap();
        (graph, solution)
    }

    /// Two lanes, goal at the end of the left lane; right-lane cells lane
    /// change.
    fn two_lane_fixture() -> (LaneGraph, Solution) {
        let n = 30;
        let mut cells = Vec::new();
        for i in 0..n {
            let mut right = Cell::new(format!("r{i:02}"), 10.0, 10.0);
            let mut left = Cell::new(format!("l{i:02}"), 10.0, 10.0);
            right.left = Some(format!("l{i:02}").into());
            left.right = Some(format!("r{i:02}").into());
            if i + 1 < n {
                right.successors = vec![format!("r{:02}", i + 1).into()];
                left.successors = vec![format!("l{:02}", i + 1).into()];
            }
            cells.push(right);
            cells.push(left);
        }
        let graph = LaneGraph::build(cells).unwrap();
        let params = SolveParams::new(0.01, 5.0, 100.0).unwrap();
        let solution = solve(
            &graph,
            &format!("l{:02}", n - 1).as_str().into(),
            &params,
            SolveMode::Strict,
        )
        .unwrap();
        (graph, solution)
    }

    #[test]
    fn deterministic_chain_sums_costs() {
        let (graph, solution) = chain_fixture();
        let trace = rollout(&graph, &solution, &"a".into(), 42, 100).unwrap();
        assert_eq!(trace.total_cost, 3.0);
        assert!(trace.reached_goal);
        assert_eq!(trace.steps_taken, 3);
        assert!(trace.steps.iter().all(|s| s.success));
    }

    #[test]
    fn start_at_goal_is_an_empty_trace() {
        let (graph, solution) = chain_fixture();
        let trace = rollout(&graph, &solution, &"g".into(), 7, 100).unwrap();
        assert_eq!(trace.total_cost, 0.0);
        assert!(trace.reached_goal);
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn same_seed_same_trace() {
        let (graph, solution) = two_lane_fixture();
        let a = rollout(&graph, &solution, &"r00".into(), 1234, 600).unwrap();
        let b = rollout(&graph, &solution, &"r00".into(), 1234, 600).unwrap();
        assert_eq!(a, b);
        let c = rollout(&graph, &solution, &"r00".into(), 1235, 600).unwrap();
        assert!(a != c || a.steps.iter().all(|s| s.action.kind == ActionKind::Stay));
    }

    #[test]
    fn unreachable_start_is_rejected() {
        let (graph, solution) = {
            let mut a = Cell::new("a", 1.0, 1.0);
            a.successors = vec!["g".into()];
            let graph =
                LaneGraph::build(vec![a, Cell::new("island", 1.0, 1.0), Cell::new("g", 1.0, 1.0)])
                    .unwrap();
            let params = SolveParams::new(0.01, 5.0, 100.0).unwrap();
            let solution = solve(&graph, &"g".into(), &params, SolveMode::Strict).unwrap();
            (graph, solution)
        };
        assert!(matches!(
            rollout(&graph, &solution, &"island".into(), 1, 10),
            Err(SimError::UnreachableStart(_))
        ));
        assert!(matches!(
            rollout(&graph, &solution, &"nope".into(), 1, 10),
            Err(SimError::UnknownCell(_))
        ));
    }

    #[test]
    fn deterministic_policy_estimate_is_exact() {
        let (graph, solution) = chain_fixture();
        let summary = estimate_cost(&graph, &solution, &"a".into(), 100, 9, 100).unwrap();
        assert_eq!(summary.mean_cost, 3.0);
        assert_eq!(summary.std_dev, 0.0);
        assert_eq!(summary.std_err, 0.0);
        assert_eq!(summary.failures, 0);
        assert_eq!(
            summary.mean_cost,
            solution.value_of(&graph, "a").unwrap().finite().unwrap()
        );
    }

    #[test]
    fn single_trial_has_zero_std_err() {
        let (graph, solution) = two_lane_fixture();
        let summary = estimate_cost(&graph, &solution, &"r00".into(), 1, 5, 600).unwrap();
        let trace = rollout(&graph, &solution, &"r00".into(), trial_seed(5, 0), 600).unwrap();
        assert_eq!(summary.mean_cost, trace.total_cost);
        assert_eq!(summary.std_err, 0.0);
        assert!(estimate_cost(&graph, &solution, &"r00".into(), 0, 5, 600).is_err());
    }

    #[test]
    fn stochastic_estimate_matches_cost_to_go() {
        let (graph, solution) = two_lane_fixture();
        let g_start = solution
            .value_of(&graph, "r00")
            .unwrap()
            .finite()
            .unwrap();
        let summary =
            estimate_cost(&graph, &solution, &"r00".into(), 10_000, 20260810, 600).unwrap();
        assert_eq!(summary.failures, 0);
        assert!(summary.std_err > 0.0);
        assert!(
            (summary.mean_cost - g_start).abs() <= 3.0 * summary.std_err,
            "mean {} vs g {} (3·std_err = {})",
            summary.mean_cost,
            g_start,
            3.0 * summary.std_err
        );
    }

    #[test]
    fn forced_lane_changes_always_move() {
        // Right lane dead-ends, so the solver forces out of it.
        let mut r0 = Cell::new("r0", 10.0, 10.0);
        r0.left = Some("l0".into());
        let mut l0 = Cell::new("l0", 10.0, 10.0);
        l0.right = Some("r0".into());
        l0.successors = vec!["g".into()];
        let graph = LaneGraph::build(vec![r0, l0, Cell::new("g", 1.0, 1.0)]).unwrap();
        let params = SolveParams::new(0.01, 5.0, 100.0).unwrap();
        let solution = solve(&graph, &"g".into(), &params, SolveMode::Strict).unwrap();
        assert_eq!(
            solution.action_of(&graph, "r0").map(|a| a.kind),
            Some(ActionKind::ForcedLaneChange)
        );
        for seed in 0..50 {
            let trace = rollout(&graph, &solution, &"r0".into(), seed, 10).unwrap();
            assert!(trace.reached_goal);
            assert_eq!(trace.steps[0].action.kind, ActionKind::ForcedLaneChange);
            assert_eq!(trace.steps.len(), 2);
        }
    }

    #[test]
    fn summary_serializes_with_short_field_names() {
        let summary = SimSummary {
            trials: 2,
            mean_cost: 1.5,
            std_dev: 0.5,
            std_err: 0.35,
            failures: 0,
        };
        let json = serde_json::to_string(&summary).unwrap();
        assert!(json.contains("\"mean\":1.5"));
        assert!(!json.contains("mean_cost"));
    }
}
