//! Parametric generators for the experiment road networks.
//!
//! Three families:
//!
//! - [`gen_highway_merge`]: a straight multi-lane highway with an on-ramp
//!   merging into the rightmost lane. Cell costs are `ℓ·σ` with
//!   `σ = 1 + m·c_left` for lane `m` (0 = rightmost), and every cell whose
//!   successor has multiple predecessors carries an extra `c_merge`.
//! - [`gen_two_route`]: a network with two routes to a goal in the
//!   top-right: a short interior road reachable only from a left turn
//!   lane, and a longer perimeter that needs no lane change. Reproduced
//!   topologically (route structure, lane counts, turn-lane constraints),
//!   not geometrically.
//! - [`gen_two_lane_straight`]: two parallel lanes with the goal at the end
//!   of the left lane and cost equal to length, the configuration with a
//!   closed-form cost-to-go along the right lane.
//!
//! Generators are deterministic: the same parameters serialize to
//! byte-identical graphs.

use thiserror::Error;

use crate::graph::{Cell, CellId, LaneGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{0} must be positive, got {1}")]
    NonpositiveParam(&'static str, f64),
    #[error("{0} = {1} is not divisible by cell_length {2}")]
    NotDivisible(&'static str, f64, f64),
    #[error("merge_position must lie strictly inside the road, got {0}")]
    MergeOutOfRange(f64),
    #[error("{0}")]
    Invalid(&'static str),
}

/// Number of cells, checking divisibility to 1e-9.
fn cell_count(name: &'static str, length: f64, cell_length: f64) -> Result<usize, ScenarioError> {
    if !(cell_length.is_finite() && cell_length > 0.0) {
        return Err(ScenarioError::NonpositiveParam("cell_length", cell_length));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(ScenarioError::NonpositiveParam(name, length));
    }
    let count = (length / cell_length).round();
    if (count * cell_length - length).abs() > 1e-9 || count < 1.0 {
        return Err(ScenarioError::NotDivisible(name, length, cell_length));
    }
    Ok(count as usize)
}

// ---------------------------------------------------------------------------
// Highway merge
// ---------------------------------------------------------------------------

/// Parameters of the highway merge scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeScenarioParams {
    pub n_lanes: usize,
    /// Cell length in meters.
    pub cell_length: f64,
    /// Distance from the start to the goal along the rightmost lane.
    pub road_length: f64,
    /// Where the on-ramp joins the rightmost lane, meters from the start.
    pub merge_position: f64,
    /// Length of the on-ramp.
    pub ramp_length: f64,
    /// Per-lane cost penalty factor: lane `m` costs `ℓ·(1 + m·c_left)`.
    pub c_left: f64,
    /// Extra cost on every cell routed into a multi-predecessor successor.
    pub c_merge: f64,
}

impl Default for MergeScenarioParams {
    /// Three 10 m-cell lanes, goal 5 km down, merge halfway, 20 m ramp.
    fn default() -> Self {
        MergeScenarioParams {
            n_lanes: 3,
            cell_length: 10.0,
            road_length: 5000.0,
            merge_position: 2500.0,
            ramp_length: 20.0,
            c_left: 0.1,
            c_merge: 0.0,
        }
    }
}

impl MergeScenarioParams {
    pub fn columns(&self) -> usize {
        (self.road_length / self.cell_length).round() as usize
    }

    /// Column of the merge cell: the rightmost-lane cell the ramp feeds.
    pub fn merge_column(&self) -> usize {
        (self.merge_position / self.cell_length).round() as usize
    }

    pub fn ramp_cells(&self) -> usize {
        (self.ramp_length / self.cell_length).round() as usize
    }

    /// Id of the cell in lane `m` (0 = rightmost) at `column`.
    pub fn lane_cell_id(&self, lane: usize, column: usize) -> CellId {
        CellId::new(format!("l{lane}_{column:05}"))
    }

    pub fn ramp_cell_id(&self, k: usize) -> CellId {
        CellId::new(format!("ramp_{k:05}"))
    }

    /// The last rightmost-lane cell.
    pub fn goal_id(&self) -> CellId {
        self.lane_cell_id(0, self.columns() - 1)
    }
}

/// Generate the highway merge lane graph. See the module docs for the cost
/// model.
pub fn gen_highway_merge(params: &MergeScenarioParams) -> Result<LaneGraph, ScenarioError> {
    if params.n_lanes == 0 {
        return Err(ScenarioError::Invalid("n_lanes must be at least 1"));
    }
    if !(params.c_left >= 0.0 && params.c_left.is_finite()) {
        return Err(ScenarioError::NonpositiveParam("c_left", params.c_left));
    }
    if !(params.c_merge >= 0.0 && params.c_merge.is_finite()) {
        return Err(ScenarioError::NonpositiveParam("c_merge", params.c_merge));
    }
    let columns = cell_count("road_length", params.road_length, params.cell_length)?;
    let ramp_cells = cell_count("ramp_length", params.ramp_length, params.cell_length)?;
    if !(params.merge_position.is_finite()
        && params.merge_position > 0.0
        && params.merge_position < params.road_length)
    {
        return Err(ScenarioError::MergeOutOfRange(params.merge_position));
    }
    let merge_column = cell_count("merge_position", params.merge_position, params.cell_length)?;
    if params.ramp_length > params.merge_position {
        return Err(ScenarioError::Invalid("ramp longer than merge_position"));
    }

    let mut cells = Vec::with_capacity(params.n_lanes * columns + ramp_cells);
    for lane in 0..params.n_lanes {
        let sigma = 1.0 + lane as f64 * params.c_left;
        for column in 0..columns {
            let mut cell = Cell::new(
                params.lane_cell_id(lane, column),
                params.cell_length,
                params.cell_length * sigma,
            );
            if lane + 1 < params.n_lanes {
                cell.left = Some(params.lane_cell_id(lane + 1, column));
            }
            if lane > 0 {
                cell.right = Some(params.lane_cell_id(lane - 1, column));
            }
            if column + 1 < columns {
                cell.successors = vec![params.lane_cell_id(lane, column + 1)];
            }
            cell.lane = Some(lane as i32);
            cell.s = Some(column as f64 * params.cell_length);
            cells.push(cell);
        }
    }
    let ramp_start = params.merge_position - params.ramp_length;
    for k in 0..ramp_cells {
        let mut cell = Cell::new(params.ramp_cell_id(k), params.cell_length, params.cell_length);
        cell.successors = vec![if k + 1 < ramp_cells {
            params.ramp_cell_id(k + 1)
        } else {
            params.lane_cell_id(0, merge_column)
        }];
        cell.lane = Some(-1);
        cell.s = Some(ramp_start + k as f64 * params.cell_length);
        cells.push(cell);
    }

    apply_merge_surcharge(&mut cells, params.c_merge);
    LaneGraph::build(cells).map_err(|_| ScenarioError::Invalid("generated graph failed validation"))
}

/// Add `c_merge` to every cell that has a successor with more than one
/// predecessor.
fn apply_merge_surcharge(cells: &mut [Cell], c_merge: f64) {
    if c_merge == 0.0 {
        return;
    }
    use std::collections::HashMap;
    let mut pred_count: HashMap<&str, usize> = HashMap::new();
    for cell in cells.iter() {
        for successor in &cell.successors {
            *pred_count.entry(successor.as_str()).or_default() += 1;
        }
    }
    let merge_targets: std::collections::HashSet<String> = pred_count
        .iter()
        .filter(|(_, &count)| count > 1)
        .map(|(id, _)| (*id).to_owned())
        .collect();
    for cell in cells.iter_mut() {
        if cell
            .successors
            .iter()
            .any(|s| merge_targets.contains(s.as_str()))
        {
            cell.cost += c_merge;
        }
    }
}

// ---------------------------------------------------------------------------
// Two-route network
// ---------------------------------------------------------------------------

/// Parameters of the two-route network, all lengths in cells.
///
/// ```text
///  start lanes   wl/wr ──┐ (approach, 2 lanes heading "south")
///    turn lane:  wl[last] ──► in  (interior road, 2 lanes "east")
///                 in[last] ──► e[east_merge_at] ──► … ──► goal
///    perimeter:  wr[last] ──► wd ──► pb ──► e[0] ──► … ──► goal
///    return loop: is[last] ──► sd ──► lb ──► nu ──► is[0]
/// ```
///
/// `wl` is the inner (left) lane of the approach and is a dedicated turn
/// lane: its last cell's only successor is the interior road. The interior
/// road's outer lane `is` curves away from the goal and returns to its own
/// start, which is what lets non-monotone cost settings produce cyclic
/// policies. All cells cost their length.
///
/// The defaults (10 m cells, lengths below) are not dictated by any source
/// network; they are the smallest dimensions for which the interior route
/// saves enough distance that the lane change trade-off flips well inside
/// the tested cost ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoRouteScenarioParams {
    pub cell_length: f64,
    /// Two-lane approach holding the start region.
    pub approach_len: usize,
    /// Interior road connecting the turn lane to the goal road.
    pub interior_len: usize,
    /// West road below the junction (perimeter, single lane).
    pub west_len: usize,
    /// Perimeter bottom road.
    pub bottom_len: usize,
    /// Goal road; the goal is its last cell.
    pub east_len: usize,
    /// Index on the goal road where the interior road merges in.
    pub east_merge_at: usize,
    /// Vertical legs of the interior return loop.
    pub loop_side_len: usize,
    /// Bottom leg of the interior return loop.
    pub loop_bottom_len: usize,
}

impl Default for TwoRouteScenarioParams {
    fn default() -> Self {
        TwoRouteScenarioParams {
            cell_length: 10.0,
            approach_len: 8,
            interior_len: 12,
            west_len: 12,
            bottom_len: 12,
            east_len: 20,
            east_merge_at: 12,
            loop_side_len: 6,
            loop_bottom_len: 12,
        }
    }
}

impl TwoRouteScenarioParams {
    pub fn approach_left_id(&self, i: usize) -> CellId {
        CellId::new(format!("wl_{i:03}"))
    }
    pub fn approach_right_id(&self, i: usize) -> CellId {
        CellId::new(format!("wr_{i:03}"))
    }
    pub fn interior_north_id(&self, i: usize) -> CellId {
        CellId::new(format!("in_{i:03}"))
    }
    pub fn interior_south_id(&self, i: usize) -> CellId {
        CellId::new(format!("is_{i:03}"))
    }
    pub fn west_down_id(&self, i: usize) -> CellId {
        CellId::new(format!("wd_{i:03}"))
    }
    pub fn perimeter_bottom_id(&self, i: usize) -> CellId {
        CellId::new(format!("pb_{i:03}"))
    }
    pub fn east_id(&self, i: usize) -> CellId {
        CellId::new(format!("e_{i:03}"))
    }
    pub fn loop_south_id(&self, i: usize) -> CellId {
        CellId::new(format!("sd_{i:03}"))
    }
    pub fn loop_bottom_id(&self, i: usize) -> CellId {
        CellId::new(format!("lb_{i:03}"))
    }
    pub fn loop_north_id(&self, i: usize) -> CellId {
        CellId::new(format!("nu_{i:03}"))
    }

    /// The start cell in the outer (right) lane.
    pub fn start_id(&self) -> CellId {
        self.approach_right_id(0)
    }

    pub fn goal_id(&self) -> CellId {
        self.east_id(self.east_len - 1)
    }
}

/// Generate the two-route network. See [`TwoRouteScenarioParams`].
pub fn gen_two_route(params: &TwoRouteScenarioParams) -> Result<LaneGraph, ScenarioError> {
    let p = params;
    if !(p.cell_length.is_finite() && p.cell_length > 0.0) {
        return Err(ScenarioError::NonpositiveParam("cell_length", p.cell_length));
    }
    for (name, len) in [
        ("approach_len", p.approach_len),
        ("interior_len", p.interior_len),
        ("west_len", p.west_len),
        ("bottom_len", p.bottom_len),
        ("east_len", p.east_len),
        ("loop_side_len", p.loop_side_len),
        ("loop_bottom_len", p.loop_bottom_len),
    ] {
        if len == 0 {
            return Err(ScenarioError::NonpositiveParam(name, 0.0));
        }
    }
    if p.east_merge_at == 0 || p.east_merge_at >= p.east_len {
        return Err(ScenarioError::Invalid(
            "east_merge_at must lie strictly inside the goal road",
        ));
    }
    if p.approach_len < 2 {
        return Err(ScenarioError::Invalid("approach_len must be at least 2"));
    }

    let cell = |id: CellId| Cell::new(id, p.cell_length, p.cell_length);
    let mut cells = Vec::new();

    // Two-lane approach; the inner lane is a dedicated left-turn lane.
    for i in 0..p.approach_len {
        let mut left = cell(p.approach_left_id(i));
        let mut right = cell(p.approach_right_id(i));
        left.right = Some(p.approach_right_id(i));
        right.left = Some(p.approach_left_id(i));
        left.successors = vec![if i + 1 < p.approach_len {
            p.approach_left_id(i + 1)
        } else {
            p.interior_north_id(0)
        }];
        right.successors = vec![if i + 1 < p.approach_len {
            p.approach_right_id(i + 1)
        } else {
            p.west_down_id(0)
        }];
        cells.push(left);
        cells.push(right);
    }

    // Interior road: the inner lane merges into the goal road, the outer
    // lane curves away into the return loop.
    for i in 0..p.interior_len {
        let mut north = cell(p.interior_north_id(i));
        let mut south = cell(p.interior_south_id(i));
        north.right = Some(p.interior_south_id(i));
        south.left = Some(p.interior_north_id(i));
        north.successors = vec![if i + 1 < p.interior_len {
            p.interior_north_id(i + 1)
        } else {
            p.east_id(p.east_merge_at)
        }];
        south.successors = vec![if i + 1 < p.interior_len {
            p.interior_south_id(i + 1)
        } else {
            p.loop_south_id(0)
        }];
        cells.push(north);
        cells.push(south);
    }

    // Single-lane chains: perimeter and return loop.
    let mut chain = |len: usize, id: &dyn Fn(usize) -> CellId, next: CellId| {
        for i in 0..len {
            let mut c = cell(id(i));
            c.successors = vec![if i + 1 < len { id(i + 1) } else { next.clone() }];
            cells.push(c);
        }
    };
    chain(p.west_len, &|i| p.west_down_id(i), p.perimeter_bottom_id(0));
    chain(p.bottom_len, &|i| p.perimeter_bottom_id(i), p.east_id(0));
    chain(p.loop_side_len, &|i| p.loop_south_id(i), p.loop_bottom_id(0));
    chain(p.loop_bottom_len, &|i| p.loop_bottom_id(i), p.loop_north_id(0));
    chain(
        p.loop_side_len,
        &|i| p.loop_north_id(i),
        p.interior_south_id(0),
    );

    // Goal road; its last cell is the goal and has no successors.
    for i in 0..p.east_len {
        let mut c = cell(p.east_id(i));
        if i + 1 < p.east_len {
            c.successors = vec![p.east_id(i + 1)];
        }
        cells.push(c);
    }

    LaneGraph::build(cells).map_err(|_| ScenarioError::Invalid("generated graph failed validation"))
}

// ---------------------------------------------------------------------------
// Two-lane straight road
// ---------------------------------------------------------------------------

pub fn straight_left_id(i: usize) -> CellId {
    CellId::new(format!("left_{i:05}"))
}

pub fn straight_right_id(i: usize) -> CellId {
    CellId::new(format!("right_{i:05}"))
}

/// Two parallel lanes of `length / cell_length` cells each, cost equal to
/// length, goal at the end of the **left** lane.
pub fn gen_two_lane_straight(length: f64, cell_length: f64) -> Result<LaneGraph, ScenarioError> {
    let count = cell_count("length", length, cell_length)?;
    let mut cells = Vec::with_capacity(2 * count);
    for i in 0..count {
        let mut left = Cell::new(straight_left_id(i), cell_length, cell_length);
        let mut right = Cell::new(straight_right_id(i), cell_length, cell_length);
        left.right = Some(straight_right_id(i));
        right.left = Some(straight_left_id(i));
        if i + 1 < count {
            left.successors = vec![straight_left_id(i + 1)];
            right.successors = vec![straight_right_id(i + 1)];
        }
        left.lane = Some(1);
        right.lane = Some(0);
        left.s = Some(i as f64 * cell_length);
        right.s = Some(i as f64 * cell_length);
        cells.push(left);
        cells.push(right);
    }
    LaneGraph::build(cells).map_err(|_| ScenarioError::Invalid("generated graph failed validation"))
}
