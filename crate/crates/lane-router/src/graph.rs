//! The lane graph: cells, neighbor and successor relations, validation, and
//! the graph JSON format.
//!
//! A lane graph is a directed graph whose vertices ("cells") each represent
//! a drivable portion of a lane. Cells relate to each other four ways: left
//! neighbor, right neighbor, successor, and predecessor. Neighbor relations
//! are one-to-one and symmetric (`x1 = lnb(x2) ⇔ x2 = rnb(x1)`); the
//! predecessor relation is derived as the transpose of the successor
//! relation and is never serialized.
//!
//! [`LaneGraph::build`] is total: any input list of cells either yields an
//! immutable graph satisfying every invariant, or a [`ValidationReport`]
//! listing *all* violations in deterministic order.
//!
//! Internally cells are stored sorted by id and addressed by dense `u32`
//! indices, so index order equals lexicographic id order. Solvers rely on
//! this for deterministic tie-breaking; the mapping never leaks into
//! outputs.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonfmt::sig9;

/// Identifier of a lane graph cell, unique within a graph.
///
/// Ids are strings so generators can emit readable names (`l0_00042`).
/// Ordering is lexicographic and total; all deterministic tie-breaking in
/// the solvers is by id order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(String);

impl CellId {
    pub fn new(id: impl Into<String>) -> Self {
        CellId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CellId {
    fn from(s: &str) -> Self {
        CellId(s.to_owned())
    }
}

impl From<String> for CellId {
    fn from(s: String) -> Self {
        CellId(s)
    }
}

/// One drivable lane segment, as supplied to [`LaneGraph::build`] and as
/// stored in the graph JSON format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: CellId,
    /// Length in meters; must be finite and > 0.
    pub length: f64,
    /// Cost of traversing the cell; must be finite and > 0.
    pub cost: f64,
    /// Left neighbor, reachable by a lane change along this cell's extent.
    pub left: Option<CellId>,
    /// Right neighbor.
    pub right: Option<CellId>,
    /// Cells reachable by continuing in the same lane.
    pub successors: Vec<CellId>,
    /// Optional layout hint for rendering: lane index, 0 = rightmost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane: Option<i32>,
    /// Optional layout hint for rendering: longitudinal position of the
    /// cell start, in meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

impl Cell {
    /// A cell with no neighbors, no successors, and no layout hints.
    pub fn new(id: impl Into<CellId>, length: f64, cost: f64) -> Self {
        Cell {
            id: id.into(),
            length,
            cost,
            left: None,
            right: None,
            successors: Vec::new(),
            lane: None,
            s: None,
        }
    }
}

/// A single validation rule violation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Rule name, e.g. `neighbor-asymmetry` or `nonpositive-length`.
    pub rule: String,
    /// The offending cell id(s); the first is the cell the rule fired on.
    pub cells: Vec<CellId>,
    pub message: String,
}

impl Violation {
    fn new(rule: &str, cells: Vec<CellId>, message: String) -> Self {
        Violation {
            rule: rule.to_owned(),
            cells,
            message,
        }
    }
}

/// Outcome of validating a cell list. `ok` holds exactly when `violations`
/// is empty; violations are sorted by (cell id, rule, message) so reports
/// are byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort_by(|a, b| {
            (a.cells.first(), &a.rule, &a.cells, &a.message).cmp(&(
                b.cells.first(),
                &b.rule,
                &b.cells,
                &b.message,
            ))
        });
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.rule, v.message)?;
        }
        Ok(())
    }
}

/// Errors reading the graph JSON format.
#[derive(Debug, Error)]
pub enum GraphFileError {
    #[error("malformed graph JSON: {0}")]
    Json(String),
    #[error("unsupported graph file version {0} (expected 1)")]
    UnknownVersion(u64),
    #[error("lane graph validation failed with {} violation(s)", .0.violations.len())]
    Validation(ValidationReport),
}

/// A validated, immutable lane graph with a derived predecessor index.
///
/// Safe to share across threads; all solver entry points take `&LaneGraph`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneGraph {
    /// Cells sorted by id, successors normalized to sorted order.
    cells: Vec<Cell>,
    index: HashMap<String, u32>,
    left: Vec<Option<u32>>,
    right: Vec<Option<u32>>,
    succs: Vec<Vec<u32>>,
    preds: Vec<Vec<u32>>,
}

impl LaneGraph {
    /// Validate a cell list and build the graph.
    ///
    /// On failure the report lists every violation found, not just the
    /// first, in deterministic order.
    pub fn build(cells: Vec<Cell>) -> Result<LaneGraph, ValidationReport> {
        let violations = validate(&cells);
        if !violations.is_empty() {
            return Err(ValidationReport::from_violations(violations));
        }

        let mut cells = cells;
        cells.sort_by(|a, b| a.id.cmp(&b.id));
        for cell in &mut cells {
            cell.successors.sort();
        }

        let index: HashMap<String, u32> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.as_str().to_owned(), i as u32))
            .collect();
        let resolve = |id: &CellId| index[id.as_str()];

        let n = cells.len();
        let mut left = vec![None; n];
        let mut right = vec![None; n];
        let mut succs = vec![Vec::new(); n];
        let mut preds = vec![Vec::new(); n];
        for (i, cell) in cells.iter().enumerate() {
            left[i] = cell.left.as_ref().map(resolve);
            right[i] = cell.right.as_ref().map(resolve);
            succs[i] = cell.successors.iter().map(resolve).collect();
            for &s in &succs[i] {
                preds[s as usize].push(i as u32);
            }
        }
        // Cells are visited in id order, so every predecessor list is
        // already sorted.

        Ok(LaneGraph {
            cells,
            index,
            left,
            right,
            succs,
            preds,
        })
    }

    /// Re-run validation on the stored cells. Always `ok` for a built graph.
    pub fn validate(&self) -> ValidationReport {
        ValidationReport::from_violations(validate(&self.cells))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells in id order. Index `i` in this slice is dense index `i`.
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Dense index of a cell id, if present.
    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn id(&self, i: u32) -> &CellId {
        &self.cells[i as usize].id
    }

    pub fn cell(&self, i: u32) -> &Cell {
        &self.cells[i as usize]
    }

    #[inline]
    pub fn length(&self, i: u32) -> f64 {
        self.cells[i as usize].length
    }

    #[inline]
    pub fn cost(&self, i: u32) -> f64 {
        self.cells[i as usize].cost
    }

    #[inline]
    pub fn left_of(&self, i: u32) -> Option<u32> {
        self.left[i as usize]
    }

    #[inline]
    pub fn right_of(&self, i: u32) -> Option<u32> {
        self.right[i as usize]
    }

    /// Left then right neighbor, when present.
    #[inline]
    pub fn neighbors_of(&self, i: u32) -> impl Iterator<Item = u32> + '_ {
        self.left[i as usize]
            .into_iter()
            .chain(self.right[i as usize])
    }

    #[inline]
    pub fn successors_of(&self, i: u32) -> &[u32] {
        &self.succs[i as usize]
    }

    /// Transpose of the successor relation, derived at build time.
    #[inline]
    pub fn predecessors_of(&self, i: u32) -> &[u32] {
        &self.preds[i as usize]
    }
}

fn validate(cells: &[Cell]) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut first_occurrence: HashMap<&str, &Cell> = HashMap::new();
    for cell in cells {
        if first_occurrence.insert(cell.id.as_str(), cell).is_some() {
            violations.push(Violation::new(
                "duplicate-id",
                vec![cell.id.clone()],
                format!("cell id {} appears more than once", cell.id),
            ));
        }
    }
    // Reference checks below resolve through the first occurrence of an id;
    // duplicate ids are already fatal on their own.
    let lookup = &first_occurrence;

    for cell in cells {
        if !(cell.length.is_finite() && cell.length > 0.0) {
            violations.push(Violation::new(
                "nonpositive-length",
                vec![cell.id.clone()],
                format!("cell {} has length {}, expected > 0", cell.id, cell.length),
            ));
        }
        if !(cell.cost.is_finite() && cell.cost > 0.0) {
            violations.push(Violation::new(
                "nonpositive-cost",
                vec![cell.id.clone()],
                format!("cell {} has cost {}, expected > 0", cell.id, cell.cost),
            ));
        }

        for (side, neighbor, reverse) in [
            ("left", &cell.left, false),
            ("right", &cell.right, true),
        ] {
            let Some(neighbor) = neighbor else { continue };
            if neighbor == &cell.id {
                violations.push(Violation::new(
                    "self-reference",
                    vec![cell.id.clone()],
                    format!("cell {} is its own {side} neighbor", cell.id),
                ));
                continue;
            }
            let Some(other) = lookup.get(neighbor.as_str()) else {
                violations.push(Violation::new(
                    "dangling-reference",
                    vec![cell.id.clone(), neighbor.clone()],
                    format!("cell {} references unknown {side} neighbor {neighbor}", cell.id),
                ));
                continue;
            };
            // x1 = lnb(x2) ⇔ x2 = rnb(x1), checked per declaration.
            let back = if reverse { &other.left } else { &other.right };
            if back.as_ref() != Some(&cell.id) {
                violations.push(Violation::new(
                    "neighbor-asymmetry",
                    vec![cell.id.clone(), neighbor.clone()],
                    format!(
                        "cell {} has {side} neighbor {neighbor}, but {neighbor}'s {} neighbor is {}",
                        cell.id,
                        if reverse { "left" } else { "right" },
                        back.as_ref().map_or("null", |id| id.as_str()),
                    ),
                ));
            }
        }

        let mut sorted = cell.successors.clone();
        sorted.sort();
        for pair in sorted.windows(2) {
            if pair[0] == pair[1] {
                violations.push(Violation::new(
                    "duplicate-successor",
                    vec![cell.id.clone(), pair[0].clone()],
                    format!("cell {} lists successor {} twice", cell.id, pair[0]),
                ));
            }
        }
        for successor in &cell.successors {
            if successor == &cell.id {
                violations.push(Violation::new(
                    "self-reference",
                    vec![cell.id.clone()],
                    format!("cell {} is its own successor", cell.id),
                ));
            } else if !lookup.contains_key(successor.as_str()) {
                violations.push(Violation::new(
                    "dangling-reference",
                    vec![cell.id.clone(), successor.clone()],
                    format!("cell {} references unknown successor {successor}", cell.id),
                ));
            }
        }
    }

    violations
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFileDe {
    version: u64,
    cells: Vec<serde_json::Value>,
}

#[derive(Serialize)]
struct GraphFileSer<'a> {
    version: u64,
    cells: Vec<CellSer<'a>>,
}

#[derive(Serialize)]
struct CellSer<'a> {
    id: &'a CellId,
    length: f64,
    cost: f64,
    left: &'a Option<CellId>,
    right: &'a Option<CellId>,
    successors: &'a [CellId],
    #[serde(skip_serializing_if = "Option::is_none")]
    lane: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
}

/// Parse the graph JSON format (UTF-8). Structurally valid input is handed
/// to [`LaneGraph::build`]; cell-level schema errors name the cell index.
pub fn parse_graph(bytes: &[u8]) -> Result<LaneGraph, GraphFileError> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| GraphFileError::Json(format!("not UTF-8: {e}")))?;
    let file: GraphFileDe =
        serde_json::from_str(text).map_err(|e| GraphFileError::Json(e.to_string()))?;
    if file.version != 1 {
        return Err(GraphFileError::UnknownVersion(file.version));
    }
    let cells = file
        .cells
        .into_iter()
        .enumerate()
        .map(|(i, value)| {
            serde_json::from_value::<Cell>(value)
                .map_err(|e| GraphFileError::Json(format!("cell {i}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    LaneGraph::build(cells).map_err(GraphFileError::Validation)
}

/// Serialize a graph to the JSON format: cells sorted by id, floats rounded
/// to 9 significant digits, predecessor index omitted. Byte-deterministic.
pub fn serialize_graph(graph: &LaneGraph) -> String {
    let file = GraphFileSer {
        version: 1,
        cells: graph
            .cells
            .iter()
            .map(|c| CellSer {
                id: &c.id,
                length: sig9(c.length),
                cost: sig9(c.cost),
                left: &c.left,
                right: &c.right,
                successors: &c.successors,
                lane: c.lane,
                s: c.s.map(sig9),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("graph serialization cannot fail");
    out.push('\n');
    out
}
