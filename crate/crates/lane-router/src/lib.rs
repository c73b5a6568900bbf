//! Lane-level stochastic routing.
//!
//! Models a multi-lane road network as a lane graph, formulates routing to
//! a goal cell as an MDP whose lane change actions have stochastic
//! outcomes, and computes the optimal cost-to-go and lane change policy
//! for every cell in a single Dijkstra-like pass. A value iteration oracle
//! ([`vi`]) verifies the solver and backs it up when the cost formulation
//! is not monotone, and a Monte Carlo simulator ([`sim`]) replays policies
//! through the stochastic model.
//!
//! Typical use:
//!
//! ```
//! use lane_router::scenarios::{gen_highway_merge, MergeScenarioParams};
//! use lane_router::{solve, SolveMode, SolveParams};
//!
//! let params = MergeScenarioParams::default();
//! let graph = gen_highway_merge(&params).unwrap();
//! let costs = SolveParams::with_default_forced_cost(0.01, 5.0).unwrap();
//! let solution = solve(&graph, &params.goal_id(), &costs, SolveMode::Strict).unwrap();
//! assert!(solution.value_of(&graph, "l2_00000").unwrap().is_finite());
//! ```

pub mod cli;
pub mod graph;
mod jsonfmt;
pub mod lane_change;
pub mod mdp;
pub mod policy_file;
pub mod render;
pub mod router;
pub mod scenarios;
pub mod sim;
pub mod vi;

pub use graph::{parse_graph, serialize_graph, Cell, CellId, LaneGraph, ValidationReport};
pub use lane_change::{success_prob, LaneChangeRate};
pub use mdp::{
    enumerate_actions, outcomes, q_value, Action, ActionKind, ActionRef, Outcome, SolveParams,
    Value, ValueFunction,
};
pub use policy_file::{read_policy, write_policy};
pub use render::{render_policy, RenderFormat};
pub use router::{
    check_monotonicity_condition, find_children, solve, MonotonicityCheck, Solution, SolveError,
    SolveMode, SolveStats,
};
pub use sim::{estimate_cost, rollout, RolloutTrace, SimSummary};
pub use vi::{value_iterate, value_iterate_with_diagnostics, ViConfig, ViDiagnostics, ViError};
