//! Command-line front end: validate, generate, solve, simulate, render.
//!
//! Exit codes: 0 success; 1 usage error; 2 graph or input validation
//! failure; 3 monotonicity precheck failure (strict mode); 4 runtime
//! non-monotone reopen (strict/force); 5 I/O error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::graph::{parse_graph, serialize_graph, GraphFileError, LaneGraph};
use crate::mdp::SolveParams;
use crate::policy_file::{read_policy, write_policy};
use crate::render::{render_policy, RenderFormat};
use crate::router::{solve, Solution, SolveError, SolveMode};
use crate::scenarios::{
    gen_highway_merge, gen_two_lane_straight, gen_two_route, MergeScenarioParams,
    TwoRouteScenarioParams,
};
use crate::sim::{default_step_limit, estimate_cost};
use crate::vi::{value_iterate, ViConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_PRECHECK: i32 = 3;
pub const EXIT_NONMONOTONE: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Parser)]
#[command(
    name = "lane-router",
    about = "Lane-level stochastic routing on lane graphs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a graph file and print the validation report.
    Validate { graph: PathBuf },
    /// Generate a scenario graph.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Solve for the optimal policy with the single-pass router.
    Solve {
        graph: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Strict)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve with the value iteration oracle backend.
    Vi {
        graph: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iterations: usize,
        #[arg(long, default_value_t = 1e12)]
        value_cap: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Roll a policy out and print summary statistics as JSON.
    Simulate {
        graph: PathBuf,
        policy: PathBuf,
        #[arg(long)]
        start: String,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        /// Defaults to 10 times the cell count.
        #[arg(long)]
        step_limit: Option<usize>,
    },
    /// Render a policy as SVG or an ASCII table.
    Render {
        graph: PathBuf,
        policy: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ParamArgs {
    /// Goal cell id.
    #[arg(long)]
    goal: String,
    /// Lane change success rate per meter.
    #[arg(long)]
    alpha: f64,
    /// Lane change cost c_lc.
    #[arg(long)]
    clc: f64,
    /// Forced lane change cost c_flc; defaults to 1/alpha.
    #[arg(long)]
    cflc: Option<f64>,
}

impl ParamArgs {
    fn solve_params(&self) -> Result<SolveParams, String> {
        match self.cflc {
            Some(cflc) => SolveParams::new(self.alpha, self.clc, cflc),
            None => SolveParams::with_default_forced_cost(self.alpha, self.clc),
        }
        .map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Force,
    #[value(name = "fallback-vi")]
    FallbackVi,
}

impl From<ModeArg> for SolveMode {
    fn from(mode: ModeArg) -> SolveMode {
        match mode {
            ModeArg::Strict => SolveMode::Strict,
            ModeArg::Force => SolveMode::Force,
            ModeArg::FallbackVi => SolveMode::FallbackVi,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Svg,
    Ascii,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Multi-lane highway with an on-ramp merge.
    Merge {
        #[arg(long, default_value_t = 3)]
        lanes: usize,
        #[arg(long, default_value_t = 10.0)]
        cell_length: f64,
        #[arg(long, default_value_t = 5000.0)]
        road_length: f64,
        #[arg(long, default_value_t = 2500.0)]
        merge_position: f64,
        #[arg(long, default_value_t = 20.0)]
        ramp_length: f64,
        #[arg(long, default_value_t = 0.1)]
        c_left: f64,
        #[arg(long, default_value_t = 0.0)]
        c_merge: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-route network: short interior road vs. lane-change-free
    /// perimeter.
    Tworoute {
        #[arg(long, default_value_t = 10.0)]
        cell_length: f64,
        #[arg(long, default_value_t = 8)]
        approach: usize,
        #[arg(long, default_value_t = 12)]
        interior: usize,
        #[arg(long, default_value_t = 12)]
        west: usize,
        #[arg(long, default_value_t = 12)]
        bottom: usize,
        #[arg(long, default_value_t = 20)]
        east: usize,
        #[arg(long, default_value_t = 12)]
        east_merge: usize,
        #[arg(long, default_value_t = 6)]
        loop_side: usize,
        #[arg(long, default_value_t = 12)]
        loop_bottom: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two parallel lanes, goal at the end of the left lane.
    Straight {
        #[arg(long, default_value_t = 2000.0)]
        length: f64,
        #[arg(long, default_value_t = 0.5)]
        cell_length: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Run the CLI on the given argument list and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Validate { graph } => cmd_validate(&graph),
        Command::Gen(gen) => cmd_gen(gen),
        Command::Solve {
            graph,
            params,
            mode,
            out,
        } => cmd_solve(&graph, &params, mode.into(), &out),
        Command::Vi {
            graph,
            params,
            tolerance,
            max_iterations,
            value_cap,
            out,
        } => cmd_vi(&graph, &params, tolerance, max_iterations, value_cap, &out),
        Command::Simulate {
            graph,
            policy,
            start,
            trials,
            seed,
            step_limit,
        } => cmd_simulate(&graph, &policy, &start, trials, seed, step_limit),
        Command::Render {
            graph,
            policy,
            format,
            out,
        } => cmd_render(&graph, &policy, format, &out),
    }
}

fn fail(code: i32, message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    code
}

fn read_file(path: &Path) -> Result<Vec<u8>, i32> {
    std::fs::read(path).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), i32> {
    std::fs::write(path, contents)
        .map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<LaneGraph, i32> {
    let bytes = read_file(path)?;
    parse_graph(&bytes).map_err(|e| match &e {
        GraphFileError::Validation(report) => {
            eprintln!("error: {}: invalid lane graph", path.display());
            eprint!("{report}");
            EXIT_VALIDATION
        }
        _ => fail(EXIT_VALIDATION, format!("{}: {e}", path.display())),
    })
}

fn load_solution(graph: &LaneGraph, path: &Path) -> Result<Solution, i32> {
    let bytes = read_file(path)?;
    read_policy(graph, &bytes)
        .map_err(|e| fail(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn cmd_validate(path: &Path) -> i32 {
    let bytes = match read_file(path) {
        Ok(bytes) => bytes,
        Err(code) => return code,
    };
    match parse_graph(&bytes) {
        Ok(graph) => {
            let report = graph.validate();
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            EXIT_OK
        }
        Err(GraphFileError::Validation(report)) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            EXIT_VALIDATION
        }
        Err(e) => fail(EXIT_VALIDATION, format!("{}: {e}", path.display())),
    }
}

fn cmd_gen(gen: GenCommand) -> i32 {
    let (result, out) = match gen {
        GenCommand::Merge {
            lanes,
            cell_length,
            road_length,
            merge_position,
            ramp_length,
            c_left,
            c_merge,
            out,
        } => (
            gen_highway_merge(&MergeScenarioParams {
                n_lanes: lanes,
                cell_length,
                road_length,
                merge_position,
                ramp_length,
                c_left,
                c_merge,
            }),
            out,
        ),
        GenCommand::Tworoute {
            cell_length,
            approach,
            interior,
            west,
            bottom,
            east,
            east_merge,
            loop_side,
            loop_bottom,
            out,
        } => (
            gen_two_route(&TwoRouteScenarioParams {
                cell_length,
                approach_len: approach,
                interior_len: interior,
                west_len: west,
                bottom_len: bottom,
                east_len: east,
                east_merge_at: east_merge,
                loop_side_len: loop_side,
                loop_bottom_len: loop_bottom,
            }),
            out,
        ),
        GenCommand::Straight {
            length,
            cell_length,
            out,
        } => (gen_two_lane_straight(length, cell_length), out),
    };
    let graph = match result {
        Ok(graph) => graph,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    match write_file(&out, &serialize_graph(&graph)) {
        Ok(()) => EXIT_OK,
        Err(code) => code,
    }
}

fn cmd_solve(graph_path: &Path, args: &ParamArgs, mode: SolveMode, out: &Path) -> i32 {
    let graph = match load_graph(graph_path) {
        Ok(graph) => graph,
        Err(code) => return code,
    };
    let params = match args.solve_params() {
        Ok(params) => params,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let solution = match solve(&graph, &args.goal.as_str().into(), &params, mode) {
        Ok(solution) => solution,
        Err(e @ SolveError::UnknownGoal(_)) => return fail(EXIT_VALIDATION, e),
        Err(e @ SolveError::PrecheckFailed { .. }) => return fail(EXIT_PRECHECK, e),
        Err(e @ SolveError::NonMonotone { .. }) => return fail(EXIT_NONMONOTONE, e),
        Err(e @ SolveError::Fallback(_)) => return fail(EXIT_NONMONOTONE, e),
    };
    match write_file(out, &write_policy(&graph, &solution)) {
        Ok(()) => EXIT_OK,
        Err(code) => code,
    }
}

fn cmd_vi(
    graph_path: &Path,
    args: &ParamArgs,
    tolerance: f64,
    max_iterations: usize,
    value_cap: f64,
    out: &Path,
) -> i32 {
    let graph = match load_graph(graph_path) {
        Ok(graph) => graph,
        Err(code) => return code,
    };
    let params = match args.solve_params() {
        Ok(params) => params,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let cfg = ViConfig {
        tolerance,
        max_iterations,
        value_cap,
    };
    let solution = match value_iterate(&graph, &args.goal.as_str().into(), &params, &cfg) {
        Ok(solution) => solution,
        Err(e @ crate::vi::ViError::UnknownGoal(_)) => return fail(EXIT_VALIDATION, e),
        Err(e) => return fail(EXIT_USAGE, e),
    };
    match write_file(out, &write_policy(&graph, &solution)) {
        Ok(()) => EXIT_OK,
        Err(code) => code,
    }
}

fn cmd_simulate(
    graph_path: &Path,
    policy_path: &Path,
    start: &str,
    trials: usize,
    seed: u64,
    step_limit: Option<usize>,
) -> i32 {
    let graph = match load_graph(graph_path) {
        Ok(graph) => graph,
        Err(code) => return code,
    };
    let solution = match load_solution(&graph, policy_path) {
        Ok(solution) => solution,
        Err(code) => return code,
    };
    let step_limit = step_limit.unwrap_or_else(|| default_step_limit(&graph));
    match estimate_cost(&graph, &solution, &start.into(), trials, seed, step_limit) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string(&round_summary(summary)).expect("summary serializes")
            );
            EXIT_OK
        }
        Err(e) => fail(EXIT_VALIDATION, e),
    }
}

fn round_summary(mut summary: crate::sim::SimSummary) -> crate::sim::SimSummary {
    summary.mean_cost = crate::jsonfmt::sig9(summary.mean_cost);
    summary.std_dev = crate::jsonfmt::sig9(summary.std_dev);
    summary.std_err = crate::jsonfmt::sig9(summary.std_err);
    summary
}

fn cmd_render(graph_path: &Path, policy_path: &Path, format: FormatArg, out: &Path) -> i32 {
    let graph = match load_graph(graph_path) {
        Ok(graph) => graph,
        Err(code) => return code,
    };
    let solution = match load_solution(&graph, policy_path) {
        Ok(solution) => solution,
        Err(code) => return code,
    };
    let format = match format {
        FormatArg::Svg => RenderFormat::Svg,
        FormatArg::Ascii => RenderFormat::Ascii,
    };
    match render_policy(&graph, &solution, format) {
        Ok(rendered) => match write_file(out, &rendered) {
            Ok(()) => EXIT_OK,
            Err(code) => code,
        },
        Err(e) => fail(EXIT_VALIDATION, e),
    }
}
