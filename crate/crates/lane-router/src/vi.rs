//! Reference value iteration solver.
//!
//! The ground-truth oracle for the Dijkstra-like pass, and the fallback
//! backend when that pass detects a non-monotone cost formulation. It
//! converges without any monotonicity assumption — including the large
//! forced-lane-change-cost regime where optimal policies contain cycles —
//! just slowly, which is fine for an oracle.
//!
//! Synchronous (Jacobi) Bellman backups from a pessimistic start: all cells
//! except the goal begin at `value_cap`, which stands in for ∞ during the
//! backups, and each sweep applies `g ← min_a q(x, a)` clamped to the cap.
//! The backup operator is monotone and nonexpansive in the max-norm, so
//! starting above the fixed point the iterates decrease pointwise and the
//! residual sequence is nonincreasing. Cells still at the cap on
//! termination are reported unreachable; forced lane changes guarantee
//! that every cell with any route to the goal ends well below it.

use thiserror::Error;

use crate::graph::{CellId, LaneGraph};
use crate::mdp::{
    self, ActionKind, ActionRef, SolveParams, Value, ValueFunction,
};
use crate::router::{Solution, SolveStats};

/// Value iteration configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViConfig {
    /// Stop once the max-norm change of a sweep is at most this.
    pub tolerance: f64,
    /// Abort with [`ViError::NoConvergence`] beyond this many sweeps.
    pub max_iterations: usize,
    /// Stand-in for ∞ during backups; values at or above it are reported
    /// unreachable. Orders of magnitude above any finite cost-to-go.
    pub value_cap: f64,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            tolerance: 1e-10,
            max_iterations: 1_000_000,
            value_cap: 1e12,
        }
    }
}

#[derive(Debug, Error)]
pub enum ViError {
    #[error("unknown goal cell {0}")]
    UnknownGoal(CellId),
    #[error("invalid value iteration config: {0}")]
    InvalidConfig(&'static str),
    #[error(
        "value iteration did not converge within {iterations} sweeps (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Per-run convergence data.
#[derive(Debug, Clone, PartialEq)]
pub struct ViDiagnostics {
    /// Number of sweeps that changed some value by more than the tolerance.
    pub iterations: usize,
    /// Max-norm residual of every sweep performed, in order.
    pub residuals: Vec<f64>,
}

/// Bellman backup on capped plain-f64 values; mirrors `mdp::q_ref` term
/// for term so converged values and the extracted policy tie out exactly
/// with the Dijkstra pass.
#[inline]
fn q_capped(graph: &LaneGraph, params: &SolveParams, g: &[f64], x: u32, a: ActionRef) -> f64 {
    let c = graph.cost(x);
    match a.kind {
        ActionKind::Stay => c + g[a.success as usize],
        ActionKind::LaneChange => {
            let g_ns = g[a.success as usize];
            let g_s = g[a.failure.expect("lane change has failure target") as usize];
            let length = graph.length(x);
            params.success_prob(length) * (params.lane_change_cost + c + g_ns)
                + params.fail_prob(length) * (c + g_s)
        }
        ActionKind::ForcedLaneChange => {
            params.lane_change_cost
                + c
                + params.fail_prob(graph.length(x)) * params.forced_lane_change_cost
                + g[a.success as usize]
        }
    }
}

/// Solve by synchronous Bellman backups. See the module docs.
pub fn value_iterate(
    graph: &LaneGraph,
    goal: &CellId,
    params: &SolveParams,
    cfg: &ViConfig,
) -> Result<Solution, ViError> {
    value_iterate_with_diagnostics(graph, goal, params, cfg).map(|(solution, _)| solution)
}

/// [`value_iterate`] plus the residual history.
pub fn value_iterate_with_diagnostics(
    graph: &LaneGraph,
    goal: &CellId,
    params: &SolveParams,
    cfg: &ViConfig,
) -> Result<(Solution, ViDiagnostics), ViError> {
    if !(cfg.tolerance.is_finite() && cfg.tolerance > 0.0) {
        return Err(ViError::InvalidConfig("tolerance must be > 0"));
    }
    if cfg.max_iterations == 0 {
        return Err(ViError::InvalidConfig("max_iterations must be >= 1"));
    }
    if !(cfg.value_cap.is_finite() && cfg.value_cap > 0.0) {
        return Err(ViError::InvalidConfig("value_cap must be > 0"));
    }
    let goal_idx = graph
        .index_of(goal.as_str())
        .ok_or_else(|| ViError::UnknownGoal(goal.clone()))?;

    let n = graph.len();
    let actions: Vec<Vec<ActionRef>> = (0..n as u32)
        .map(|x| mdp::enumerate_action_refs(graph, x))
        .collect();

    let mut g = vec![cfg.value_cap; n];
    g[goal_idx as usize] = 0.0;
    let mut next = vec![0.0; n];

    let mut iterations = 0usize;
    let mut residuals = Vec::new();
    loop {
        let mut residual = 0.0f64;
        for x in 0..n {
            if x as u32 == goal_idx {
                next[x] = 0.0;
                continue;
            }
            // Initializing at the cap clamps every backup: q-values above
            // the cap never replace it.
            let mut best = cfg.value_cap;
            for &a in &actions[x] {
                let q = q_capped(graph, params, &g, x as u32, a);
                if q < best {
                    best = q;
                }
            }
            next[x] = best;
            residual = residual.max((best - g[x]).abs());
        }
        std::mem::swap(&mut g, &mut next);
        residuals.push(residual);

        if residual <= cfg.tolerance {
            break;
        }
        iterations += 1;
        if iterations >= cfg.max_iterations {
            return Err(ViError::NoConvergence {
                iterations,
                residual,
            });
        }
    }

    let values = ValueFunction::from_values(
        g.iter()
            .map(|&v| {
                if v >= cfg.value_cap {
                    Value::Unreachable
                } else {
                    Value::Finite(v)
                }
            })
            .collect(),
    );
    let policy = mdp::extract_policy(graph, params, &values, goal_idx);
    let solution = Solution::new(
        goal.clone(),
        *params,
        values,
        policy,
        SolveStats::default(),
    );
    Ok((
        solution,
        ViDiagnostics {
            iterations,
            residuals,
        },
    ))
}
