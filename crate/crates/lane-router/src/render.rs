//! Policy rendering: SVG arrows over the lane layout, or a plain table.
//!
//! SVG follows the drawing convention of the experiment figures: a solid
//! arrow from the beginning of a cell to the beginning of its action's
//! success target, plus a dashed arrow to the failure target for lane
//! changes. Unreachable cells are unmarked. SVG needs the generator-
//! provided layout hints (`lane`, `s`) on every cell; graphs without hints
//! render as an ASCII table instead.

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::LaneGraph;
use crate::mdp::{ActionKind, Value};
use crate::router::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Svg,
    Ascii,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("graph has no layout hints on cell {0}; use the ascii format")]
    MissingLayoutHints(String),
}

const LANE_HEIGHT: f64 = 16.0;
const MARGIN: f64 = 12.0;

/// Render a policy. Identical inputs produce identical bytes.
pub fn render_policy(
    graph: &LaneGraph,
    solution: &Solution,
    format: RenderFormat,
) -> Result<String, RenderError> {
    match format {
        RenderFormat::Svg => render_svg(graph, solution),
        RenderFormat::Ascii => Ok(render_ascii(graph, solution)),
    }
}

fn f(v: f64) -> String {
    format!("{v:.3}")
}

fn render_svg(graph: &LaneGraph, solution: &Solution) -> Result<String, RenderError> {
    let mut min_lane = i32::MAX;
    let mut max_lane = i32::MIN;
    let mut max_s = 0.0f64;
    for cell in graph.cells() {
        let (Some(lane), Some(s)) = (cell.lane, cell.s) else {
            return Err(RenderError::MissingLayoutHints(cell.id.to_string()));
        };
        min_lane = min_lane.min(lane);
        max_lane = max_lane.max(lane);
        max_s = max_s.max(s + cell.length);
    }
    if graph.is_empty() {
        min_lane = 0;
        max_lane = 0;
    }

    // Lane 0 (rightmost) at the bottom, higher lanes above.
    let y_of = |lane: i32| MARGIN + (max_lane - lane) as f64 * LANE_HEIGHT + LANE_HEIGHT / 2.0;
    let x_of = |s: f64| MARGIN + s;
    let width = max_s + 2.0 * MARGIN;
    let height = (max_lane - min_lane + 1) as f64 * LANE_HEIGHT + 2.0 * MARGIN;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {} {}">"#,
        f(width),
        f(height)
    );
    svg.push_str(
        "  <defs>\n    <marker id=\"arrow\" viewBox=\"0 0 8 8\" refX=\"7\" refY=\"4\" \
         markerWidth=\"6\" markerHeight=\"6\" orient=\"auto\">\n      <path d=\"M0,0 L8,4 L0,8 z\" \
         fill=\"#c01818\"/>\n    </marker>\n  </defs>\n",
    );

    // Cell outlines, in id order.
    for (i, cell) in graph.cells().iter().enumerate() {
        let lane = cell.lane.expect("checked above");
        let s = cell.s.expect("checked above");
        let reachable = solution.value_at(i as u32).is_finite();
        let _ = writeln!(
            svg,
            r##"  <rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="#b0b0b0" stroke-width="0.5"/>"##,
            f(x_of(s)),
            f(y_of(lane) - LANE_HEIGHT / 2.0),
            f(cell.length),
            f(LANE_HEIGHT),
            if reachable { "#f4f4f4" } else { "#dddddd" },
        );
    }

    // Policy arrows, in id order: solid success, dashed failure.
    for (i, cell) in graph.cells().iter().enumerate() {
        let Some(action) = solution.action_at(i as u32) else {
            continue;
        };
        let from = (
            x_of(cell.s.expect("checked above")),
            y_of(cell.lane.expect("checked above")),
        );
        let mut arrow = |target: u32, dashed: bool| {
            let target_cell = graph.cell(target);
            let to = (
                x_of(target_cell.s.expect("checked above")),
                y_of(target_cell.lane.expect("checked above")),
            );
            let dash = if dashed {
                " stroke-dasharray=\"4 3\""
            } else {
                ""
            };
            let _ = writeln!(
                svg,
                r##"  <line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#c01818" stroke-width="1.2"{} marker-end="url(#arrow)"/>"##,
                f(from.0),
                f(from.1),
                f(to.0),
                f(to.1),
                dash,
            );
        };
        arrow(action.success, false);
        if let Some(failure) = action.failure {
            arrow(failure, true);
        }
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn render_ascii(graph: &LaneGraph, solution: &Solution) -> String {
    // Adjacency order when layout hints exist (lane, then position),
    // otherwise id order; both are deterministic.
    let mut order: Vec<u32> = (0..graph.len() as u32).collect();
    order.sort_by(|&a, &b| {
        let ca = graph.cell(a);
        let cb = graph.cell(b);
        ca.lane
            .cmp(&cb.lane)
            .then_with(|| match (ca.s, cb.s) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (None, None) => std::cmp::Ordering::Equal,
                (None, Some(_)) => std::cmp::Ordering::Less,
                (Some(_), None) => std::cmp::Ordering::Greater,
            })
            .then_with(|| ca.id.cmp(&cb.id))
    });

    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:>12}  {:<18} {:<14} {}", "cell", "g", "action", "success", "failure");
    for i in order {
        let g = match solution.value_at(i) {
            Value::Finite(v) => format!("{v:.3}"),
            Value::Unreachable => "unreachable".to_owned(),
        };
        let (kind, success, failure) = match solution.action_at(i) {
            None => ("-".to_owned(), "-".to_owned(), "-".to_owned()),
            Some(a) => (
                match a.kind {
                    ActionKind::Stay => "stay".to_owned(),
                    ActionKind::LaneChange => "lane_change".to_owned(),
                    ActionKind::ForcedLaneChange => "forced_lane_change".to_owned(),
                },
                graph.id(a.success).to_string(),
                a.failure
                    .map_or_else(|| "-".to_owned(), |t| graph.id(t).to_string()),
            ),
        };
        let _ = writeln!(
            out,
            "{:<14} {:>12}  {:<18} {:<14} {}",
            graph.id(i).as_str(),
            g,
            kind,
            success,
            failure
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Cell;
    use crate::mdp::SolveParams;
    use crate::router::{solve, SolveMode};

    fn hinted_fixture() -> (LaneGraph, Solution) {
        let mut r0 = Cell::new("r0", 10.0, 10.0);
        r0.left = Some("l0".into());
        r0.successors = vec!["r1".into()];
        r0.lane = Some(0);
        r0.s = Some(0.0);
        let mut l0 = Cell::new("l0", 10.0, 10.0);
        l0.right = Some("r0".into());
        l0.successors = vec!["l1".into()];
        l0.lane = Some(1);
        l0.s = Some(0.0);
        let mut r1 = Cell::new("r1", 10.0, 10.0);
        r1.successors = vec!["l1".into()];
        r1.lane = Some(0);
        r1.s = Some(10.0);
        let mut l1 = Cell::new("l1", 10.0, 10.0);
        l1.lane = Some(1);
        l1.s = Some(10.0);
        let graph = LaneGraph::build(vec![r0, l0, r1, l1]).unwrap();
        let params = SolveParams::new(0.05, 1.0, 20.0).unwrap();
        let solution = solve(&graph, &"l1".into(), &params, SolveMode::Strict).unwrap();
        (graph, solution)
    }

    #[test]
    fn stay_renders_one_solid_arrow() {
        let mut a = Cell::new("a", 10.0, 10.0);
        a.successors = vec!["g".into()];
        a.lane = Some(0);
        a.s = Some(0.0);
        let mut g = Cell::new("g", 10.0, 10.0);
        g.lane = Some(0);
        g.s = Some(10.0);
        let graph = LaneGraph::build(vec![a, g]).unwrap();
        let params = SolveParams::new(0.01, 5.0, 100.0).unwrap();
        let solution = solve(&graph, &"g".into(), &params, SolveMode::Strict).unwrap();

        let svg = render_policy(&graph, &solution, RenderFormat::Svg).unwrap();
        assert_eq!(svg.matches("<line ").count(), 1);
        assert_eq!(svg.matches("stroke-dasharray").count(), 0);
    }

    #[test]
    fn lane_change_renders_solid_plus_dashed() {
        let (graph, solution) = hinted_fixture();
        // r0's optimal action is a lane change toward the goal lane.
        assert_eq!(
            solution.action_of(&graph, "r0").map(|a| a.kind),
            Some(ActionKind::LaneChange)
        );
        let svg = render_policy(&graph, &solution, RenderFormat::Svg).unwrap();
        // Three acting cells: r0 (lane change), l0 and r1 (stays).
        assert_eq!(svg.matches("<line ").count(), 4);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
    }

    #[test]
    fn rendering_is_deterministic() {
        let (graph, solution) = hinted_fixture();
        for format in [RenderFormat::Svg, RenderFormat::Ascii] {
            assert_eq!(
                render_policy(&graph, &solution, format).unwrap(),
                render_policy(&graph, &solution, format).unwrap()
            );
        }
    }

    #[test]
    fn svg_requires_layout_hints() {
        let mut a = Cell::new("a", 10.0, 10.0);
        a.successors = vec!["g".into()];
        let graph = LaneGraph::build(vec![a, Cell::new("g", 10.0, 10.0)]).unwrap();
        let params = SolveParams::new(0.01, 5.0, 100.0).unwrap();
        let solution = solve(&graph, &"g".into(), &params, SolveMode::Strict).unwrap();
        assert!(matches!(
            render_policy(&graph, &solution, RenderFormat::Svg),
            Err(RenderError::MissingLayoutHints(_))
        ));
        let table = render_policy(&graph, &solution, RenderFormat::Ascii).unwrap();
        assert!(table.contains("stay"));
        assert!(table.lines().count() >= 3);
    }
}
