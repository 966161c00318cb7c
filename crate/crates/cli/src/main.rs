use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod run;
mod scenario;

use run::{run_scenario, RunError, RunOptions};
use scenario::{FieldSpec, GridSpec, Point, Query, Scenario, ScenarioError, Targets, SCHEMA_VERSION};

const EXIT_VERIFICATION: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Caputo fractional differential equations: Mittag-Leffler evaluation,
/// trajectories, separation bounds, flows and the finite-time collapse
/// example.
#[derive(Debug, Parser)]
#[command(name = "caputo", version)]
struct Cli {
    /// Directory receiving one subdirectory per scenario.
    #[arg(long, global = true, env = "CAPUTO_OUT_DIR", default_value = "caputo-out")]
    out_dir: PathBuf,
    /// Overrides the tolerance of bounds, flow and invert queries.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Overrides the number of grid steps.
    #[arg(long, global = true)]
    grid_steps: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Runs a scenario file.
    Run { scenario: PathBuf },
    /// Tabulates E_{alpha,beta} on a segment of the complex plane.
    Ml {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Start point, `re` or `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        /// End point, `re` or `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        stop: String,
        #[arg(long, default_value_t = 11)]
        points: usize,
    },
    /// Solves the initial value problem from each --x0.
    Solve {
        #[command(flatten)]
        problem: Problem,
        #[arg(long = "x0", required = true, allow_hyphen_values = true)]
        x0: Vec<f64>,
    },
    /// Checks the separation rate estimates for two initial values.
    Bounds {
        #[command(flatten)]
        problem: Problem,
        #[arg(long = "x0", allow_hyphen_values = true)]
        x0: f64,
        #[arg(long = "y0", allow_hyphen_values = true)]
        y0: f64,
    },
    /// Evaluates the flow from time s to time t.
    Flow {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, required = true, allow_hyphen_values = true)]
        x: Vec<f64>,
    },
    /// Finds the initial value reaching x* at time t.
    Invert {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        t: f64,
        #[arg(long = "x-star", required = true, allow_hyphen_values = true)]
        x_star: Vec<f64>,
    },
    /// Builds the planar system whose solutions all vanish at one time.
    Counterexample {
        #[arg(long)]
        alpha: f64,
        /// Number of random unit initial values.
        #[arg(long, default_value_t = 8)]
        random_initials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest accepted |x(T)|/|x(0)|.
        #[arg(long)]
        collapse_tolerance: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FieldKind {
    Zero,
    Linear,
    Sine,
}

/// A scalar equation on [0, t_end].
#[derive(Debug, Args)]
struct Problem {
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = FieldKind::Linear)]
    field: FieldKind,
    /// Coefficient of the linear field.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    lambda: f64,
    /// Amplitude of the sine field.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
}

impl Problem {
    fn field(&self) -> FieldSpec {
        match self.field {
            FieldKind::Zero => FieldSpec::Zero { dimension: 1 },
            FieldKind::Linear => FieldSpec::Linear { lambda: self.lambda },
            FieldKind::Sine => FieldSpec::Sine {
                amplitude: self.amplitude,
            },
        }
    }
}

const ADHOC_STEPS: usize = 1024;

fn adhoc(name: &str, alpha: f64, field: FieldSpec, t_end: f64, initial_values: Vec<Vec<f64>>, query: Query) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        alpha,
        seed: 0,
        field,
        grid: GridSpec {
            t_end,
            n_steps: ADHOC_STEPS,
        },
        initial_values,
        queries: vec![query],
    }
}

fn parse_point(s: &str) -> Result<Point, ScenarioError> {
    let parts: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match parts.map_err(|e| ScenarioError::Parse(format!("bad point {s:?}: {e}")))?.as_slice() {
        [re] => Ok(Point::Real(*re)),
        [re, im] => Ok(Point::Complex([*re, *im])),
        _ => Err(ScenarioError::Parse(format!("bad point {s:?}: expected re or re,im"))),
    }
}

fn scenario_for(command: Command) -> Result<Scenario, ScenarioError> {
    Ok(match command {
        Command::Run { scenario } => {
            let text = fs::read_to_string(&scenario)
                .map_err(|e| ScenarioError::Parse(format!("cannot read {}: {e}", scenario.display())))?;
            Scenario::parse(&text)?
        }
        Command::Ml {
            alpha,
            beta,
            start,
            stop,
            points,
        } => {
            let query = Query::Ml {
                alpha: Some(alpha),
                beta,
                start: parse_point(&start)?,
                stop: parse_point(&stop)?,
                points,
            };
            // the scenario order only has to be valid; the query carries its own
            let order = if alpha > 0.0 && alpha < 1.0 { alpha } else { 0.5 };
            adhoc("ml", order, FieldSpec::Zero { dimension: 1 }, 1.0, vec![], query)
        }
        Command::Solve { problem, x0 } => {
            let iv = x0.into_iter().map(|x| vec![x]).collect();
            adhoc("solve", problem.alpha, problem.field(), problem.t_end, iv, Query::Solve)
        }
        Command::Bounds { problem, x0, y0 } => adhoc(
            "bounds",
            problem.alpha,
            problem.field(),
            problem.t_end,
            vec![vec![x0], vec![y0]],
            Query::Bounds { tolerance: None },
        ),
        Command::Flow { problem, s, t, x } => adhoc(
            "flow",
            problem.alpha,
            problem.field(),
            problem.t_end,
            vec![],
            Query::Flow {
                s,
                t,
                x,
                tolerance: None,
            },
        ),
        Command::Invert { problem, t, x_star } => adhoc(
            "invert",
            problem.alpha,
            problem.field(),
            problem.t_end,
            vec![],
            Query::Invert {
                t,
                x_star: Targets::Scalars(x_star),
                tolerance: None,
            },
        ),
        Command::Counterexample {
            alpha,
            random_initials,
            seed,
            collapse_tolerance,
        } => {
            let mut s = adhoc(
                "counterexample",
                alpha,
                FieldSpec::Counterexample,
                1.0,
                vec![],
                Query::Counterexample {
                    initials: vec![[1.0, 0.0], [0.0, 1.0]],
                    random_initials,
                    collapse_tolerance,
                },
            );
            s.seed = seed;
            s
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let options = RunOptions {
        out_dir: cli.out_dir,
        tolerance: cli.tolerance,
        grid_steps: cli.grid_steps,
    };
    let scenario = match scenario_for(cli.command) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match run_scenario(&scenario, &options) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFICATION)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                RunError::Scenario(_) => EXIT_INPUT,
                RunError::Numeric { .. } | RunError::Io { .. } => EXIT_NUMERIC,
            })
        }
    }
}
