//! Single-pass Dijkstra-like solver for the routing MDP.
//!
//! Values propagate backward from the goal. The solver keeps a priority
//! queue of *open* cells keyed by their provisional cost-to-go, repeatedly
//! finalizes ("closes") the minimum — ties broken by cell id — and relaxes
//! the closed cell's *children*: every cell-action pair with a nonzero
//! probability of arriving at it (see [`find_children`]).
//!
//! A single pass is optimal whenever the cost formulation is *monotone*:
//! the cost-to-go strictly decreases along every positive-probability
//! transition of the optimal policy, the stochastic analogue of nonnegative
//! edge weights. `c(x)/ℓ(x) ≥ α·c_flc` for all cells is a sufficient
//! condition ([`check_monotonicity_condition`]); with `c_flc = 1/α` it
//! reduces to requiring cost at least proportional to length.
//!
//! When the formulation is not monotone, a relaxation will eventually
//! improve an already-closed cell. The solver always detects this; the
//! [`SolveMode`] decides what happens next — abort (`Strict`, `Force`) or
//! discard the pass and re-solve with value iteration (`FallbackVi`).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::graph::{CellId, LaneGraph};
use crate::mdp::{
    self, Action, ActionKind, ActionRef, MdpError, SolveParams, Value, ValueFunction,
};
use crate::vi::{self, ViConfig, ViError};

/// Improvements of a closed cell smaller than this are floating-point
/// jitter between algebraically equal relaxations, not monotonicity
/// violations. Matches the value tolerances used by the test suite.
const REOPEN_SLACK: f64 = 1e-9;

/// What to do when the solve observes a non-monotone relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// Require the monotonicity precheck to pass before solving; abort on a
    /// runtime reopen (which the precheck makes impossible up to rounding).
    Strict,
    /// Skip the precheck, but still abort on a runtime reopen.
    Force,
    /// Skip the precheck; on a runtime reopen discard the pass and re-solve
    /// with value iteration, recording the reopen in the stats.
    FallbackVi,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("unknown goal cell {0}")]
    UnknownGoal(CellId),
    #[error(
        "monotonicity precheck failed: {} cell(s) violate c(x)/ℓ(x) ≥ α·c_flc (first: {})",
        .violating_cells.len(),
        .violating_cells.first().map_or("-", |c| c.as_str())
    )]
    PrecheckFailed { violating_cells: Vec<CellId> },
    #[error("non-monotone cost formulation: relaxation would improve closed cell {cell}")]
    NonMonotone { cell: CellId },
    #[error("value iteration fallback failed: {0}")]
    Fallback(#[from] ViError),
}

/// Result of [`check_monotonicity_condition`].
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityCheck {
    pub holds: bool,
    /// Cells with `c(x)/ℓ(x) < α·c_flc`, in id order.
    pub violating_cells: Vec<CellId>,
}

/// Check the sufficient monotonicity condition `c(x)/ℓ(x) ≥ α·c_flc` for
/// every cell.
pub fn check_monotonicity_condition(graph: &LaneGraph, params: &SolveParams) -> MonotonicityCheck {
    let threshold = params.alpha.per_meter() * params.forced_lane_change_cost;
    let violating_cells: Vec<CellId> = (0..graph.len() as u32)
        .filter(|&x| graph.cost(x) / graph.length(x) < threshold)
        .map(|x| graph.id(x).clone())
        .collect();
    MonotonicityCheck {
        holds: violating_cells.is_empty(),
        violating_cells,
    }
}

/// Solver instrumentation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveStats {
    /// Cells finalized by a queue pop. At most one per cell on monotone
    /// formulations; zero when value iteration produced the solution.
    pub pops: usize,
    /// Child relaxations evaluated across the whole pass.
    pub children_evaluated: usize,
    /// Whether a relaxation improving a closed cell was observed.
    pub reopen_detected: bool,
    /// The cell(s) whose reopen triggered the fallback; empty iff
    /// `reopen_detected` is false.
    pub reopened_cells: Vec<CellId>,
}

/// Optimal cost-to-go and policy for every cell, for one goal and one
/// parameter set. Immutable once returned.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub goal: CellId,
    pub params: SolveParams,
    /// Cost-to-go per cell, indexed like the graph.
    pub g: ValueFunction,
    pub(crate) policy: Vec<Option<ActionRef>>,
    pub stats: SolveStats,
}

impl Solution {
    pub(crate) fn new(
        goal: CellId,
        params: SolveParams,
        g: ValueFunction,
        policy: Vec<Option<ActionRef>>,
        stats: SolveStats,
    ) -> Self {
        Solution {
            goal,
            params,
            g,
            policy,
            stats,
        }
    }

    #[inline]
    pub fn value_at(&self, cell: u32) -> Value {
        self.g.get(cell)
    }

    /// Policy action in dense-index form; None at the goal and at
    /// unreachable cells.
    #[inline]
    pub fn action_at(&self, cell: u32) -> Option<ActionRef> {
        self.policy[cell as usize]
    }

    pub fn value_of(&self, graph: &LaneGraph, id: &str) -> Option<Value> {
        graph.index_of(id).map(|i| self.g.get(i))
    }

    pub fn action_of(&self, graph: &LaneGraph, id: &str) -> Option<Action> {
        let i = graph.index_of(id)?;
        self.policy[i as usize].map(|a| Action::from_ref(graph, a))
    }
}

/// The children of a just-closed cell `x`: every cell-action pair with a
/// nonzero probability of arriving at `x`, with q-values, keeping only the
/// lowest-q action per child cell.
///
/// Child families:
/// (a) a stay action from each predecessor of `x`;
/// (b) a forced lane change into `x` from each neighbor of each
///     predecessor;
/// (c) a lane change from a predecessor succeeding into a cell `x_s` next
///     to `x`'s lane and failing into `x`;
/// (d) a lane change from a neighbor succeeding into `x` and failing into
///     `x_s`.
///
/// Families (c) and (d) are emitted only once `x_s` is closed (or is `x`
/// itself), when both branch values are final; the pair reappears from
/// `x_s`'s own closure otherwise, so the union over a run covers every
/// child. The Bellman residual check in the acceptance suite verifies that
/// coverage independently.
pub fn find_children(
    graph: &LaneGraph,
    params: &SolveParams,
    x: &CellId,
    g: &ValueFunction,
    closed: impl Fn(&CellId) -> bool,
) -> Result<Vec<(CellId, Action, f64)>, MdpError> {
    let xi = graph
        .index_of(x.as_str())
        .ok_or_else(|| MdpError::UnknownCell(x.clone()))?;
    let mut out = Vec::new();
    find_children_into(graph, params, xi, g, |i| closed(graph.id(i)), &mut out);
    Ok(out
        .into_iter()
        .map(|(child, action, q)| (graph.id(child).clone(), Action::from_ref(graph, action), q))
        .collect())
}

fn find_children_into(
    graph: &LaneGraph,
    params: &SolveParams,
    x: u32,
    g: &ValueFunction,
    closed: impl Fn(u32) -> bool,
    out: &mut Vec<(u32, ActionRef, f64)>,
) {
    out.clear();
    if !g.get(x).is_finite() {
        return;
    }

    // Keep only the cheapest action per child; ties pick the canonically
    // smaller action.
    fn push(out: &mut Vec<(u32, ActionRef, f64)>, child: u32, action: ActionRef, q: f64) {
        match out.iter_mut().find(|(c, _, _)| *c == child) {
            Some(entry) => {
                if q < entry.2 || (q == entry.2 && action < entry.1) {
                    entry.1 = action;
                    entry.2 = q;
                }
            }
            None => out.push((child, action, q)),
        }
    }

    let relax = |out: &mut Vec<(u32, ActionRef, f64)>, child: u32, action: ActionRef| {
        if let Value::Finite(q) = mdp::q_ref(graph, params, g, child, action) {
            push(out, child, action, q);
        }
    };

    for &xp in graph.predecessors_of(x) {
        relax(
            out,
            xp,
            ActionRef {
                kind: ActionKind::Stay,
                success: x,
                failure: None,
            },
        );
        for xn in graph.neighbors_of(xp) {
            relax(
                out,
                xn,
                ActionRef {
                    kind: ActionKind::ForcedLaneChange,
                    success: x,
                    failure: None,
                },
            );
            for &xs in graph.successors_of(xn) {
                if !(xs == x || closed(xs)) {
                    continue;
                }
                relax(
                    out,
                    xp,
                    ActionRef {
                        kind: ActionKind::LaneChange,
                        success: xs,
                        failure: Some(x),
                    },
                );
                relax(
                    out,
                    xn,
                    ActionRef {
                        kind: ActionKind::LaneChange,
                        success: x,
                        failure: Some(xs),
                    },
                );
            }
        }
    }
}

struct QueueEntry {
    key: f64,
    cell: u32,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.cell == other.cell
    }
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse on (key, cell) so the smallest
        // key pops first, ties by smaller cell id.
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Compute the optimal cost-to-go and policy for every cell.
///
/// The queue is lazy: decreased cells are re-pushed and stale entries are
/// skipped on pop, so each cell is finalized exactly once on monotone
/// formulations. The returned policy is the canonical greedy argmin over
/// the full action set, which ties out bit-for-bit with the value
/// iteration oracle.
pub fn solve(
    graph: &LaneGraph,
    goal: &CellId,
    params: &SolveParams,
    mode: SolveMode,
) -> Result<Solution, SolveError> {
    let goal_idx = graph
        .index_of(goal.as_str())
        .ok_or_else(|| SolveError::UnknownGoal(goal.clone()))?;

    if mode == SolveMode::Strict {
        let check = check_monotonicity_condition(graph, params);
        if !check.holds {
            return Err(SolveError::PrecheckFailed {
                violating_cells: check.violating_cells,
            });
        }
    }

    let n = graph.len();
    let mut g = ValueFunction::unreachable(n);
    g.set(goal_idx, Value::Finite(0.0));
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    heap.push(QueueEntry {
        key: 0.0,
        cell: goal_idx,
    });

    let mut pops = 0usize;
    let mut children_evaluated = 0usize;
    let mut children = Vec::new();

    while let Some(QueueEntry { key, cell: x }) = heap.pop() {
        if closed[x as usize] {
            continue;
        }
        if let Value::Finite(current) = g.get(x) {
            if key > current {
                continue; // stale entry, a cheaper one is ahead
            }
        }
        closed[x as usize] = true;
        pops += 1;

        find_children_into(graph, params, x, &g, |i| closed[i as usize], &mut children);
        for &(child, _, q) in &children {
            children_evaluated += 1;
            match g.get(child) {
                Value::Unreachable => {
                    g.set(child, Value::Finite(q));
                    heap.push(QueueEntry { key: q, cell: child });
                }
                Value::Finite(current) if q < current => {
                    if !closed[child as usize] {
                        g.set(child, Value::Finite(q));
                        heap.push(QueueEntry { key: q, cell: child });
                    } else if q < current - REOPEN_SLACK {
                        // A closed cell just got cheaper: the cost
                        // formulation is not monotone.
                        let cell = graph.id(child).clone();
                        match mode {
                            SolveMode::Strict | SolveMode::Force => {
                                return Err(SolveError::NonMonotone { cell });
                            }
                            SolveMode::FallbackVi => {
                                let mut solution =
                                    vi::value_iterate(graph, goal, params, &ViConfig::default())?;
                                solution.stats = SolveStats {
                                    pops,
                                    children_evaluated,
                                    reopen_detected: true,
                                    reopened_cells: vec![cell],
                                };
                                return Ok(solution);
                            }
                        }
                    }
                }
                Value::Finite(_) => {}
            }
        }
    }

    let policy = mdp::extract_policy(graph, params, &g, goal_idx);
    Ok(Solution::new(
        goal.clone(),
        *params,
        g,
        policy,
        SolveStats {
            pops,
            children_evaluated,
            reopen_detected: false,
            reopened_cells: Vec::new(),
        },
    ))
}
