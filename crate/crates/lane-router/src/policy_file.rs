//! The policy JSON format: cost-to-go and chosen action per cell.
//!
//! ```json
//! { "version": 1, "goal": "l0_00499",
//!   "params": {"alpha": 0.01, "lane_change_cost": 5.0,
//!              "forced_lane_change_cost": 100.0},
//!   "cells": [
//!     {"id": "l1_00003", "g": 57.2,
//!      "action": {"kind": "lane_change", "success": "l0_00004",
//!                 "failure": "l1_00004"}},
//!     {"id": "zz", "g": null, "action": null} ] }
//! ```
//!
//! `"g": null` encodes an unreachable cell; `"failure"` is present only for
//! `"lane_change"`. Cells are written in id order with floats rounded to 9
//! significant digits, so files are byte-reproducible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CellId, LaneGraph};
use crate::jsonfmt::sig9;
use crate::mdp::{self, ActionKind, ActionRef, SolveParams, Value, ValueFunction};
use crate::router::{Solution, SolveStats};

#[derive(Debug, Error)]
pub enum PolicyFileError {
    #[error("malformed policy JSON: {0}")]
    Json(String),
    #[error("unsupported policy file version {0} (expected 1)")]
    UnknownVersion(u64),
    #[error("policy references unknown cell id {0}")]
    UnknownCell(CellId),
    #[error("policy lists cell {0} more than once")]
    DuplicateCell(CellId),
    #[error("policy action at {0} is not valid for the graph")]
    InvalidAction(CellId),
    #[error("goal cell {0} must have g = 0 and no action")]
    BadGoal(CellId),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    version: u64,
    goal: CellId,
    params: SolveParams,
    cells: Vec<PolicyCell>,
}

#[derive(Serialize, Deserialize)]
struct PolicyCell {
    id: CellId,
    g: Option<f64>,
    action: Option<PolicyAction>,
}

#[derive(Serialize, Deserialize)]
struct PolicyAction {
    kind: ActionKind,
    success: CellId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    failure: Option<CellId>,
}

/// Serialize a solution against its graph. Deterministic bytes.
pub fn write_policy(graph: &LaneGraph, solution: &Solution) -> String {
    let cells = (0..graph.len() as u32)
        .map(|i| PolicyCell {
            id: graph.id(i).clone(),
            g: solution.value_at(i).finite().map(sig9),
            action: solution.action_at(i).map(|a| PolicyAction {
                kind: a.kind,
                success: graph.id(a.success).clone(),
                failure: a.failure.map(|f| graph.id(f).clone()),
            }),
        })
        .collect();
    let file = PolicyFile {
        version: 1,
        goal: solution.goal.clone(),
        params: solution.params,
        cells,
    };
    let mut out = serde_json::to_string_pretty(&file).expect("policy serialization cannot fail");
    out.push('\n');
    out
}

/// Parse a policy file and bind it to `graph`, validating that every id
/// resolves and every action is one the graph actually offers. The stats
/// of a read-back solution are empty; they are not part of the format.
pub fn read_policy(graph: &LaneGraph, bytes: &[u8]) -> Result<Solution, PolicyFileError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| PolicyFileError::Json(format!("not UTF-8: {e}")))?;
    let file: PolicyFile =
        serde_json::from_str(text).map_err(|e| PolicyFileError::Json(e.to_string()))?;
    if file.version != 1 {
        return Err(PolicyFileError::UnknownVersion(file.version));
    }
    let goal_idx = graph
        .index_of(file.goal.as_str())
        .ok_or_else(|| PolicyFileError::UnknownCell(file.goal.clone()))?;

    let n = graph.len();
    let mut values = ValueFunction::unreachable(n);
    let mut policy: Vec<Option<ActionRef>> = vec![None; n];
    let mut seen = vec![false; n];
    for cell in &file.cells {
        let idx = graph
            .index_of(cell.id.as_str())
            .ok_or_else(|| PolicyFileError::UnknownCell(cell.id.clone()))?;
        if seen[idx as usize] {
            return Err(PolicyFileError::DuplicateCell(cell.id.clone()));
        }
        seen[idx as usize] = true;
        if let Some(g) = cell.g {
            values.set(idx, Value::Finite(g));
        }
        if let Some(action) = &cell.action {
            let resolve = |id: &CellId| {
                graph
                    .index_of(id.as_str())
                    .ok_or_else(|| PolicyFileError::UnknownCell(id.clone()))
            };
            let action_ref = ActionRef {
                kind: action.kind,
                success: resolve(&action.success)?,
                failure: action.failure.as_ref().map(resolve).transpose()?,
            };
            if !mdp::action_is_valid(graph, idx, action_ref) {
                return Err(PolicyFileError::InvalidAction(cell.id.clone()));
            }
            policy[idx as usize] = Some(action_ref);
        }
    }

    if values.get(goal_idx) != Value::Finite(0.0) || policy[goal_idx as usize].is_some() {
        return Err(PolicyFileError::BadGoal(file.goal.clone()));
    }

    Ok(Solution::new(
        file.goal,
        file.params,
        values,
        policy,
        SolveStats::default(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Cell;
    use crate::router::{solve, SolveMode};

    fn fixture() -> (LaneGraph, Solution) {
        let mut r0 = Cell::new("r0", 100.0, 10.0);
        r0.left = Some("l0".into());
        r0.successors = vec!["r1".into()];
        let mut l0 = Cell::new("l0", 100.0, 10.0);
        l0.right = Some("r0".into());
        l0.successors = vec!["l1".into()];
        let mut r1 = Cell::new("r1", 100.0, 10.0);
        r1.successors = vec!["l1".into()];
        let l1 = Cell::new("l1", 10.0, 10.0);
        let island = Cell::new("zz", 1.0, 1.0);
        let graph = LaneGraph::build(vec![r0, l0, r1, l1, island]).unwrap();
        let params = SolveParams::new(0.01, 5.0, 100.0).unwrap();
        let solution = solve(&graph, &"l1".into(), &params, SolveMode::Strict).unwrap();
        (graph, solution)
    }

    #[test]
    fn round_trips_by_value_and_by_byte() {
        let (graph, solution) = fixture();
        let text = write_policy(&graph, &solution);
        let read = read_policy(&graph, text.as_bytes()).unwrap();
        assert_eq!(read.goal, solution.goal);
        assert_eq!(read.params, solution.params);
        for i in 0..graph.len() as u32 {
            assert_eq!(read.action_at(i), solution.action_at(i));
            match (read.value_at(i), solution.value_at(i)) {
                (Value::Finite(a), Value::Finite(b)) => {
                    assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0))
                }
                (a, b) => assert_eq!(a, b),
            }
        }
        assert_eq!(write_policy(&graph, &read), text);
    }

    #[test]
    fn unreachable_cells_serialize_as_null() {
        let (graph, solution) = fixture();
        let text = write_policy(&graph, &solution);
        assert!(text.contains("\"id\": \"zz\""));
        let zz_line = text
            .lines()
            .skip_while(|l| !l.contains("\"zz\""))
            .find(|l| l.contains("\"g\""))
            .unwrap();
        assert!(zz_line.contains("null"));
    }

    #[test]
    fn rejects_bad_files() {
        let (graph, solution) = fixture();
        let text = write_policy(&graph, &solution);

        let bumped = text.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            read_policy(&graph, bumped.as_bytes()),
            Err(PolicyFileError::UnknownVersion(9))
        ));

        let unknown = text.replace("\"id\": \"zz\"", "\"id\": \"nope\"");
        assert!(matches!(
            read_policy(&graph, unknown.as_bytes()),
            Err(PolicyFileError::UnknownCell(_))
        ));

        // A stay action into a non-successor is structurally invalid.
        let invalid = text.replace(
            "\"success\": \"l1\"",
            "\"success\": \"r0\"",
        );
        assert!(matches!(
            read_policy(&graph, invalid.as_bytes()),
            Err(PolicyFileError::InvalidAction(_)) | Err(PolicyFileError::Json(_))
        ));

        assert!(read_policy(&graph, b"{not json").is_err());
    }

    #[test]
    fn goal_must_be_zero_without_action() {
        let (graph, solution) = fixture();
        let text = write_policy(&graph, &solution);
        let broken = text.replace("\"g\": 0.0", "\"g\": 3.5");
        assert!(matches!(
            read_policy(&graph, broken.as_bytes()),
            Err(PolicyFileError::BadGoal(_))
        ));
    }
}
