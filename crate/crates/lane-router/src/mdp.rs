//! The routing MDP over a lane graph: action enumeration, costs, transition
//! probabilities, and q-values.
//!
//! States are cells. From a cell `x` with traversal cost `c(x)`, length
//! `ℓ(x)`, and lane change success probability `f = f(ℓ(x))`:
//!
//! - **Stay** (one per successor `x_s`): moves to `x_s` with probability 1
//!   at cost `c(x)`.
//! - **LaneChange** (one per neighbor `n` and per pair
//!   `(x_s, x_ns) ∈ succ(x) × succ(n)`): moves to `x_ns` with probability
//!   `f` at cost `c_lc + c(x)`, otherwise continues in-lane to `x_s` at
//!   cost `c(x)`.
//! - **ForcedLaneChange** (one per neighbor `n` and per `x_ns ∈ succ(n)`):
//!   always moves to `x_ns`, at cost
//!   `c_lc + c(x) + (1 − f)·c_flc` — the surcharge is the expected penalty
//!   for forcing a change that would not have succeeded on its own.
//!
//! The q-value of an action is `Σ p·(cost + g(target))`; it is
//! [`Value::Unreachable`] as soon as any positive-probability target is
//! unreachable. Unreachable is an explicit sentinel, never an IEEE infinity
//! fed into arithmetic, so `∞·0` NaNs cannot occur.
//!
//! Action enumeration order is fixed — Stay before LaneChange before
//! ForcedLaneChange, then by (success, failure) target id — and argmin ties
//! resolve to the earliest action, making policies bit-reproducible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CellId, LaneGraph};
use crate::lane_change::{self, LaneChangeRate};

/// Errors from MDP-level queries.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("unknown cell id {0}")]
    UnknownCell(CellId),
    #[error("action is not valid for cell {0}")]
    InvalidAction(CellId),
}

/// Errors constructing [`SolveParams`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error(transparent)]
    Rate(#[from] crate::lane_change::ModelError),
    #[error("{0} must be a nonnegative finite number, got {1}")]
    NegativeCost(&'static str, f64),
}

/// Cost model parameters for one solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    /// Lane change success rate α.
    pub alpha: LaneChangeRate,
    /// Cost `c_lc` added to any lane change, forced or not.
    pub lane_change_cost: f64,
    /// Penalty `c_flc` weighting the forced lane change surcharge.
    pub forced_lane_change_cost: f64,
}

impl SolveParams {
    pub fn new(
        alpha: f64,
        lane_change_cost: f64,
        forced_lane_change_cost: f64,
    ) -> Result<Self, ParamError> {
        if !(lane_change_cost.is_finite() && lane_change_cost >= 0.0) {
            return Err(ParamError::NegativeCost("lane_change_cost", lane_change_cost));
        }
        if !(forced_lane_change_cost.is_finite() && forced_lane_change_cost >= 0.0) {
            return Err(ParamError::NegativeCost(
                "forced_lane_change_cost",
                forced_lane_change_cost,
            ));
        }
        Ok(SolveParams {
            alpha: LaneChangeRate::new(alpha)?,
            lane_change_cost,
            forced_lane_change_cost,
        })
    }

    /// `c_flc = 1/α`, the forced lane change cost used throughout the
    /// experiments when none is given explicitly.
    pub fn with_default_forced_cost(alpha: f64, lane_change_cost: f64) -> Result<Self, ParamError> {
        Self::new(alpha, lane_change_cost, 1.0 / alpha)
    }

    #[inline]
    pub(crate) fn success_prob(&self, length: f64) -> f64 {
        lane_change::prob(self.alpha.per_meter(), length)
    }

    #[inline]
    pub(crate) fn fail_prob(&self, length: f64) -> f64 {
        lane_change::fail_prob(self.alpha.per_meter(), length)
    }
}

/// Action kind; the declaration order is the tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Stay,
    LaneChange,
    ForcedLaneChange,
}

/// An action with targets as cell ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Action {
    pub kind: ActionKind,
    /// Target on success. For Stay this is the chosen successor.
    pub success: CellId,
    /// In-lane continuation when a lane change fails; present iff `kind`
    /// is [`ActionKind::LaneChange`].
    pub failure: Option<CellId>,
}

impl Action {
    pub(crate) fn from_ref(graph: &LaneGraph, a: ActionRef) -> Action {
        Action {
            kind: a.kind,
            success: graph.id(a.success).clone(),
            failure: a.failure.map(|f| graph.id(f).clone()),
        }
    }
}

/// The same action in dense-index form, used on solver hot paths.
///
/// Because cells are stored in id order, comparing indices is the same as
/// comparing ids; the derived ordering is the canonical tie order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ActionRef {
    pub kind: ActionKind,
    pub success: u32,
    pub failure: Option<u32>,
}

impl ActionRef {
    pub(crate) fn resolve(graph: &LaneGraph, action: &Action) -> Result<ActionRef, MdpError> {
        let resolve_id = |id: &CellId| {
            graph
                .index_of(id.as_str())
                .ok_or_else(|| MdpError::UnknownCell(id.clone()))
        };
        Ok(ActionRef {
            kind: action.kind,
            success: resolve_id(&action.success)?,
            failure: action.failure.as_ref().map(resolve_id).transpose()?,
        })
    }
}

/// One possible transition of an action.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub target: CellId,
    pub probability: f64,
    pub cost: f64,
}

/// A cost-to-go value: finite nonnegative, or unreachable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Finite(f64),
    Unreachable,
}

impl Value {
    pub fn finite(self) -> Option<f64> {
        match self {
            Value::Finite(v) => Some(v),
            Value::Unreachable => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Value::Finite(_))
    }
}

/// Cost-to-go per cell, indexed like the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    values: Vec<Value>,
}

impl ValueFunction {
    /// Every cell unreachable.
    pub fn unreachable(n: usize) -> Self {
        ValueFunction {
            values: vec![Value::Unreachable; n],
        }
    }

    pub fn from_values(values: Vec<Value>) -> Self {
        ValueFunction { values }
    }

    #[inline]
    pub fn get(&self, cell: u32) -> Value {
        self.values[cell as usize]
    }

    pub fn set(&mut self, cell: u32, value: Value) {
        self.values[cell as usize] = value;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Value> + '_ {
        self.values.iter().copied()
    }
}

/// Enumerate the actions available from a cell, in canonical order.
pub fn enumerate_actions(graph: &LaneGraph, cell: &CellId) -> Result<Vec<Action>, MdpError> {
    let x = graph
        .index_of(cell.as_str())
        .ok_or_else(|| MdpError::UnknownCell(cell.clone()))?;
    Ok(enumerate_action_refs(graph, x)
        .into_iter()
        .map(|a| Action::from_ref(graph, a))
        .collect())
}

/// Index form of [`enumerate_actions`]. Sorted by (kind, success, failure)
/// and deduplicated (the same lane change can be expressible via either
/// neighbor when a graph is degenerate).
pub fn enumerate_action_refs(graph: &LaneGraph, x: u32) -> Vec<ActionRef> {
    let mut actions = Vec::new();
    for &s in graph.successors_of(x) {
        actions.push(ActionRef {
            kind: ActionKind::Stay,
            success: s,
            failure: None,
        });
    }
    for n in graph.neighbors_of(x) {
        for &ns in graph.successors_of(n) {
            for &s in graph.successors_of(x) {
                actions.push(ActionRef {
                    kind: ActionKind::LaneChange,
                    success: ns,
                    failure: Some(s),
                });
            }
            actions.push(ActionRef {
                kind: ActionKind::ForcedLaneChange,
                success: ns,
                failure: None,
            });
        }
    }
    actions.sort();
    actions.dedup();
    actions
}

pub(crate) fn action_is_valid(graph: &LaneGraph, x: u32, a: ActionRef) -> bool {
    let in_succ = |t: u32| graph.successors_of(x).contains(&t);
    let in_neighbor_succ = |t: u32| {
        graph
            .neighbors_of(x)
            .any(|n| graph.successors_of(n).contains(&t))
    };
    match a.kind {
        ActionKind::Stay => a.failure.is_none() && in_succ(a.success),
        ActionKind::LaneChange => {
            a.failure.is_some_and(in_succ) && in_neighbor_succ(a.success)
        }
        ActionKind::ForcedLaneChange => a.failure.is_none() && in_neighbor_succ(a.success),
    }
}

/// The outcome distribution of an action taken from `cell`.
pub fn outcomes(
    graph: &LaneGraph,
    params: &SolveParams,
    cell: &CellId,
    action: &Action,
) -> Result<Vec<Outcome>, MdpError> {
    let x = graph
        .index_of(cell.as_str())
        .ok_or_else(|| MdpError::UnknownCell(cell.clone()))?;
    let a = ActionRef::resolve(graph, action)?;
    if !action_is_valid(graph, x, a) {
        return Err(MdpError::InvalidAction(cell.clone()));
    }
    let c = graph.cost(x);
    let length = graph.length(x);
    Ok(match a.kind {
        ActionKind::Stay => vec![Outcome {
            target: graph.id(a.success).clone(),
            probability: 1.0,
            cost: c,
        }],
        ActionKind::LaneChange => {
            let p_success = params.success_prob(length);
            let p_fail = params.fail_prob(length);
            vec![
                Outcome {
                    target: graph.id(a.success).clone(),
                    probability: p_success,
                    cost: params.lane_change_cost + c,
                },
                Outcome {
                    target: graph.id(a.failure.expect("lane change has failure target")).clone(),
                    probability: p_fail,
                    cost: c,
                },
            ]
        }
        ActionKind::ForcedLaneChange => vec![Outcome {
            target: graph.id(a.success).clone(),
            probability: 1.0,
            cost: params.lane_change_cost
                + c
                + params.fail_prob(length) * params.forced_lane_change_cost,
        }],
    })
}

/// Expected cost of taking `action` from `cell` and acting optimally after:
/// `Σ p·(cost + g(target))`, or Unreachable if any positive-probability
/// target is unreachable.
pub fn q_value(
    graph: &LaneGraph,
    params: &SolveParams,
    g: &ValueFunction,
    cell: &CellId,
    action: &Action,
) -> Result<Value, MdpError> {
    let x = graph
        .index_of(cell.as_str())
        .ok_or_else(|| MdpError::UnknownCell(cell.clone()))?;
    let a = ActionRef::resolve(graph, action)?;
    if !action_is_valid(graph, x, a) {
        return Err(MdpError::InvalidAction(cell.clone()));
    }
    Ok(q_ref(graph, params, g, x, a))
}

/// Hot-path q-value; the single implementation both solvers and the policy
/// extraction share, so equal values are bit-equal everywhere.
#[inline]
pub(crate) fn q_ref(
    graph: &LaneGraph,
    params: &SolveParams,
    g: &ValueFunction,
    x: u32,
    a: ActionRef,
) -> Value {
    let c = graph.cost(x);
    match a.kind {
        ActionKind::Stay => match g.get(a.success) {
            Value::Finite(gs) => Value::Finite(c + gs),
            Value::Unreachable => Value::Unreachable,
        },
        ActionKind::LaneChange => {
            let (Value::Finite(g_ns), Value::Finite(g_s)) = (
                g.get(a.success),
                g.get(a.failure.expect("lane change has failure target")),
            ) else {
                return Value::Unreachable;
            };
            let length = graph.length(x);
            let p_success = params.success_prob(length);
            let p_fail = params.fail_prob(length);
            Value::Finite(
                p_success * (params.lane_change_cost + c + g_ns) + p_fail * (c + g_s),
            )
        }
        ActionKind::ForcedLaneChange => match g.get(a.success) {
            Value::Finite(g_ns) => Value::Finite(
                params.lane_change_cost
                    + c
                    + params.fail_prob(graph.length(x)) * params.forced_lane_change_cost
                    + g_ns,
            ),
            Value::Unreachable => Value::Unreachable,
        },
    }
}

/// The canonical greedy action at `x`: the first action (in enumeration
/// order) attaining the minimum finite q-value, or None when no action has
/// a finite q-value.
pub(crate) fn greedy_action(
    graph: &LaneGraph,
    params: &SolveParams,
    g: &ValueFunction,
    x: u32,
) -> Option<(ActionRef, f64)> {
    let mut best: Option<(ActionRef, f64)> = None;
    for a in enumerate_action_refs(graph, x) {
        if let Value::Finite(q) = q_ref(graph, params, g, x, a) {
            if best.map_or(true, |(_, bq)| q < bq) {
                best = Some((a, q));
            }
        }
    }
    best
}

/// Extract the greedy policy from a value function. The goal and all
/// unreachable cells get no action.
pub(crate) fn extract_policy(
    graph: &LaneGraph,
    params: &SolveParams,
    g: &ValueFunction,
    goal: u32,
) -> Vec<Option<ActionRef>> {
    (0..graph.len() as u32)
        .map(|x| {
            if x == goal || !g.get(x).is_finite() {
                return None;
            }
            let chosen = greedy_action(graph, params, g, x);
            debug_assert!(
                chosen.is_some(),
                "cell {} has finite value but no finite action",
                graph.id(x)
            );
            chosen.map(|(a, _)| a)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Cell;

    /// x with one successor s; optional left neighbor n with successor ns.
    fn two_lane_cell() -> LaneGraph {
        let mut x = Cell::new("x", 100.0, 10.0);
        x.left = Some("n".into());
        x.successors = vec!["s".into()];
        let mut n = Cell::new("n", 100.0, 10.0);
        n.right = Some("x".into());
        n.successors = vec!["ns".into()];
        let s = Cell::new("s", 10.0, 10.0);
        let ns = Cell::new("ns", 10.0, 10.0);
        LaneGraph::build(vec![x, n, s, ns]).unwrap()
    }

    fn params() -> SolveParams {
        SolveParams::new(0.01, 5.0, 100.0).unwrap()
    }

    #[test]
    fn single_successor_no_neighbors_yields_one_stay() {
        let g = LaneGraph::build(vec![
            {
                let mut a = Cell::new("a", 10.0, 10.0);
                a.successors = vec!["b".into()];
                a
            },
            Cell::new("b", 10.0, 10.0),
        ])
        .unwrap();
        let actions = enumerate_actions(&g, &"a".into()).unwrap();
        assert_eq!(
            actions,
            vec![Action {
                kind: ActionKind::Stay,
                success: "b".into(),
                failure: None
            }]
        );
    }

    #[test]
    fn neighbor_adds_lane_change_and_forced_lane_change() {
        let g = two_lane_cell();
        let actions = enumerate_actions(&g, &"x".into()).unwrap();
        assert_eq!(
            actions,
            vec![
                Action {
                    kind: ActionKind::Stay,
                    success: "s".into(),
                    failure: None
                },
                Action {
                    kind: ActionKind::LaneChange,
                    success: "ns".into(),
                    failure: Some("s".into())
                },
                Action {
                    kind: ActionKind::ForcedLaneChange,
                    success: "ns".into(),
                    failure: None
                },
            ]
        );
    }

    #[test]
    fn fork_next_to_fork_yields_eight_actions() {
        // 2 successors and a right neighbor with 2 successors:
        // 2 Stay + 4 LaneChange + 2 ForcedLaneChange.
        let mut x = Cell::new("x", 10.0, 10.0);
        x.right = Some("n".into());
        x.successors = vec!["s1".into(), "s2".into()];
        let mut n = Cell::new("n", 10.0, 10.0);
        n.left = Some("x".into());
        n.successors = vec!["t1".into(), "t2".into()];
        let leaves = ["s1", "s2", "t1", "t2"].map(|id| Cell::new(id, 1.0, 1.0));
        let mut cells = vec![x, n];
        cells.extend(leaves);
        let g = LaneGraph::build(cells).unwrap();

        let actions = enumerate_actions(&g, &"x".into()).unwrap();
        assert_eq!(actions.len(), 8);
        let count = |kind: ActionKind| actions.iter().filter(|a| a.kind == kind).count();
        assert_eq!(count(ActionKind::Stay), 2);
        assert_eq!(count(ActionKind::LaneChange), 4);
        assert_eq!(count(ActionKind::ForcedLaneChange), 2);
        // Canonical order: kinds grouped, each kind sorted by targets.
        let mut sorted = actions.clone();
        sorted.sort();
        assert_eq!(actions, sorted);
    }

    #[test]
    fn goal_like_cells_still_enumerate() {
        let g = LaneGraph::build(vec![Cell::new("g", 1.0, 1.0)]).unwrap();
        assert!(enumerate_actions(&g, &"g".into()).unwrap().is_empty());
        assert!(matches!(
            enumerate_actions(&g, &"zz".into()),
            Err(MdpError::UnknownCell(_))
        ));
    }

    #[test]
    fn stay_outcome_is_deterministic() {
        let g = two_lane_cell();
        let action = Action {
            kind: ActionKind::Stay,
            success: "s".into(),
            failure: None,
        };
        let outs = outcomes(&g, &params(), &"x".into(), &action).unwrap();
        assert_eq!(
            outs,
            vec![Outcome {
                target: "s".into(),
                probability: 1.0,
                cost: 10.0
            }]
        );
    }

    #[test]
    fn lane_change_outcomes_split_on_success_probability() {
        let g = two_lane_cell();
        let action = Action {
            kind: ActionKind::LaneChange,
            success: "ns".into(),
            failure: Some("s".into()),
        };
        let outs = outcomes(&g, &params(), &"x".into(), &action).unwrap();
        assert_eq!(outs.len(), 2);
        assert!((outs[0].probability - 0.6321206).abs() < 1e-7);
        assert_eq!(outs[0].cost, 15.0);
        assert_eq!(outs[0].target, "ns".into());
        assert!((outs[1].probability - 0.3678794).abs() < 1e-7);
        assert_eq!(outs[1].cost, 10.0);
        assert_eq!(outs[1].target, "s".into());
        assert!((outs[0].probability + outs[1].probability - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn forced_lane_change_charges_expected_surcharge() {
        let g = two_lane_cell();
        let action = Action {
            kind: ActionKind::ForcedLaneChange,
            success: "ns".into(),
            failure: None,
        };
        let outs = outcomes(&g, &params(), &"x".into(), &action).unwrap();
        assert_eq!(outs.len(), 1);
        assert_eq!(outs[0].probability, 1.0);
        assert!((outs[0].cost - 51.78794).abs() < 1e-5);
        assert!((outs[0].cost - (15.0 + (-1.0f64).exp() * 100.0)).abs() < 1e-12);
    }

    #[test]
    fn invalid_action_is_rejected() {
        let g = two_lane_cell();
        let action = Action {
            kind: ActionKind::Stay,
            success: "ns".into(), // not a successor of x
            failure: None,
        };
        assert!(matches!(
            outcomes(&g, &params(), &"x".into(), &action),
            Err(MdpError::InvalidAction(_))
        ));
    }

    #[test]
    fn q_value_of_stay_is_cost_plus_value() {
        let g = two_lane_cell();
        let mut values = ValueFunction::unreachable(g.len());
        values.set(g.index_of("s").unwrap(), Value::Finite(5.0));
        let action = Action {
            kind: ActionKind::Stay,
            success: "s".into(),
            failure: None,
        };
        assert_eq!(
            q_value(&g, &params(), &values, &"x".into(), &action).unwrap(),
            Value::Finite(15.0)
        );
    }

    #[test]
    fn q_value_of_lane_change_mixes_branches() {
        let g = two_lane_cell();
        let mut values = ValueFunction::unreachable(g.len());
        values.set(g.index_of("ns").unwrap(), Value::Finite(3.0));
        values.set(g.index_of("s").unwrap(), Value::Finite(20.0));
        let action = Action {
            kind: ActionKind::LaneChange,
            success: "ns".into(),
            failure: Some("s".into()),
        };
        let q = q_value(&g, &params(), &values, &"x".into(), &action)
            .unwrap()
            .finite()
            .unwrap();
        assert!((q - 22.41455).abs() < 1e-5);
        let f = 1.0 - (-1.0f64).exp();
        assert!((q - (f * 18.0 + (1.0 - f) * 30.0)).abs() < 1e-12);
    }

    #[test]
    fn q_value_is_unreachable_when_any_branch_is() {
        let g = two_lane_cell();
        let mut values = ValueFunction::unreachable(g.len());
        values.set(g.index_of("ns").unwrap(), Value::Finite(3.0));
        // failure target "s" stays unreachable
        let action = Action {
            kind: ActionKind::LaneChange,
            success: "ns".into(),
            failure: Some("s".into()),
        };
        assert_eq!(
            q_value(&g, &params(), &values, &"x".into(), &action).unwrap(),
            Value::Unreachable
        );
    }

    #[test]
    fn q_value_is_monotone_in_target_values() {
        let g = two_lane_cell();
        let action = Action {
            kind: ActionKind::LaneChange,
            success: "ns".into(),
            failure: Some("s".into()),
        };
        let q_at = |g_ns: f64, g_s: f64| {
            let mut values = ValueFunction::unreachable(g.len());
            values.set(g.index_of("ns").unwrap(), Value::Finite(g_ns));
            values.set(g.index_of("s").unwrap(), Value::Finite(g_s));
            q_value(&g, &params(), &values, &"x".into(), &action)
                .unwrap()
                .finite()
                .unwrap()
        };
        assert!(q_at(3.0, 20.0) <= q_at(4.0, 20.0));
        assert!(q_at(3.0, 20.0) <= q_at(3.0, 21.0));
    }

    #[test]
    fn greedy_action_breaks_ties_by_enumeration_order() {
        // Both stays reach targets with equal value: the smaller success id
        // wins.
        let mut x = Cell::new("x", 10.0, 10.0);
        x.successors = vec!["b".into(), "a".into()];
        let g = LaneGraph::build(vec![x, Cell::new("a", 1.0, 1.0), Cell::new("b", 1.0, 1.0)])
            .unwrap();
        let mut values = ValueFunction::unreachable(g.len());
        values.set(g.index_of("a").unwrap(), Value::Finite(7.0));
        values.set(g.index_of("b").unwrap(), Value::Finite(7.0));
        let (a, q) = greedy_action(&g, &params(), &values, g.index_of("x").unwrap()).unwrap();
        assert_eq!(q, 17.0);
        assert_eq!(a.success, g.index_of("a").unwrap());
    }

    #[test]
    fn params_validate_costs() {
        assert!(SolveParams::new(0.01, -1.0, 0.0).is_err());
        assert!(SolveParams::new(0.01, 0.0, f64::NAN).is_err());
        assert!(SolveParams::new(0.0, 0.0, 0.0).is_err());
        let p = SolveParams::with_default_forced_cost(0.01, 5.0).unwrap();
        assert_eq!(p.forced_lane_change_cost, 100.0);
    }
}
