//! Scenario execution and artifact emission.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use caputo_core::bounds::{check_separation, verify_bounds_with, LowerBound, DEFAULT_TOLERANCE};
use caputo_core::counterexample::{build_counterexample, fundamental_solutions, verify_collapse, CounterexampleSpec};
use caputo_core::flow::{
    evolution_map, flow_map, invert_evolution_1d, invert_evolution_triangular, solve_triangular, write_flow_csv, FlowQuery, FlowRecord,
    TriangularSystem,
};
use caputo_core::solver::{solve_ivp, volterra_residual, Grid, SolveError, VectorField};
use caputo_core::table::{fmt_f64, table_string};
use caputo_core::{ml_eval, Complex64, FractionalOrder, MlParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scenario::{FieldSpec, Query, Scenario, ScenarioError};

/// Default acceptance for inversion and flow residuals.
pub const DEFAULT_FLOW_TOLERANCE: f64 = 1e-8;

/// Default bound on ‖x(T)‖/‖x(0)‖ for the collapse check.
pub const DEFAULT_COLLAPSE_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("numerical failure in query {query} ({kind}): {message}")]
    Numeric {
        query: usize,
        kind: &'static str,
        message: String,
    },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub tolerance: Option<f64>,
    pub grid_steps: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub passed: bool,
    pub summary: String,
}

/// Writes via a temporary sibling and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    let io_err = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

enum Field {
    Vector(VectorField),
    Triangular(TriangularSystem, VectorField),
    Counterexample(Box<CounterexampleSpec>, VectorField),
}

impl Field {
    fn vector(&self) -> &VectorField {
        match self {
            Field::Vector(f) | Field::Triangular(_, f) | Field::Counterexample(_, f) => f,
        }
    }
}

struct Context<'a> {
    scenario: &'a Scenario,
    alpha: FractionalOrder,
    grid: Grid,
    field: Field,
    options: &'a RunOptions,
    dir: PathBuf,
    summary: String,
    passed: bool,
}

fn numeric(query: usize, kind: &'static str, e: impl ToString) -> RunError {
    RunError::Numeric {
        query,
        kind,
        message: e.to_string(),
    }
}

fn build_field(spec: &FieldSpec, alpha: FractionalOrder) -> Result<Field, RunError> {
    Ok(match spec {
        FieldSpec::Zero { dimension } => Field::Vector(VectorField::zero(*dimension)),
        FieldSpec::Linear { lambda } => Field::Vector(VectorField::scalar_linear(*lambda)),
        FieldSpec::Sine { amplitude } => {
            let a = *amplitude;
            Field::Vector(VectorField::new(1, move |_, x, out| out[0] = a * x[0].sin(), move |_| a.abs()))
        }
        FieldSpec::TriangularLinear { matrix } => {
            let system = TriangularSystem::linear(matrix.clone()).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            let f = system.to_vector_field();
            Field::Triangular(system, f)
        }
        FieldSpec::Counterexample => {
            let spec = build_counterexample(alpha).map_err(|e| numeric(0, "field", e))?;
            let f = spec.field();
            Field::Counterexample(Box::new(spec), f)
        }
    })
}

/// Runs every query, writes one artifact set per query and the summary
/// last.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<RunOutcome, RunError> {
    scenario.validate()?;
    if let Some(t) = options.tolerance {
        if !(t.is_finite() && t >= 0.0) {
            return Err(ScenarioError::Invalid(format!("--tolerance must be finite and nonnegative, got {t}")).into());
        }
    }
    let n_steps = options.grid_steps.unwrap_or(scenario.grid.n_steps);
    if n_steps < 2 {
        return Err(ScenarioError::Invalid(format!("grid steps must be at least 2, got {n_steps}")).into());
    }
    let alpha = FractionalOrder::new(scenario.alpha).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let grid = Grid::new(scenario.grid.t_end, n_steps).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    for q in &scenario.queries {
        if matches!(q, Query::Flow { .. } | Query::Invert { .. }) && options.tolerance == Some(0.0) {
            return Err(ScenarioError::Invalid("flow and invert queries need a positive --tolerance".into()).into());
        }
        let times: &[f64] = match q {
            Query::Flow { s, t, .. } => &[*s, *t],
            Query::Invert { t, .. } => &[*t],
            _ => &[],
        };
        if let Some(t) = times.iter().find(|&&t| grid.index_of(t).is_none()) {
            return Err(ScenarioError::Invalid(format!("time {t} is not a node of the {n_steps}-step grid")).into());
        }
    }
    let field = build_field(&scenario.field, alpha)?;
    let dir = options.out_dir.join(&scenario.name);
    fs::create_dir_all(&dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;

    let mut ctx = Context {
        scenario,
        alpha,
        grid,
        field,
        options,
        dir,
        summary: String::new(),
        passed: true,
    };
    let _ = writeln!(ctx.summary, "scenario: {}", scenario.name);
    let _ = writeln!(ctx.summary, "alpha: {}", fmt_f64(scenario.alpha));
    let _ = writeln!(ctx.summary, "grid: t_end = {}, n_steps = {}", fmt_f64(grid.t_end()), grid.n_steps());
    for (i, q) in scenario.queries.iter().enumerate() {
        let _ = writeln!(ctx.summary, "\n[query {} : {}]", i + 1, q.kind());
        let ok = match q {
            Query::Solve => ctx.solve(i)?,
            Query::Bounds { tolerance } => ctx.bounds(i, *tolerance)?,
            Query::Flow { s, t, x, tolerance } => ctx.flow(i, *s, *t, x, *tolerance)?,
            Query::Invert { t, x_star, tolerance } => ctx.invert(i, *t, &x_star.vectors(), *tolerance)?,
            Query::Counterexample {
                initials,
                random_initials,
                collapse_tolerance,
            } => ctx.counterexample(i, initials, *random_initials, *collapse_tolerance)?,
            Query::Ml {
                alpha,
                beta,
                start,
                stop,
                points,
            } => ctx.ml(i, alpha.unwrap_or(scenario.alpha), *beta, start.parts(), stop.parts(), *points)?,
        };
        let _ = writeln!(ctx.summary, "status: {}", if ok { "PASS" } else { "FAIL" });
        ctx.passed &= ok;
    }
    let _ = writeln!(ctx.summary, "\noverall: {}", if ctx.passed { "PASS" } else { "FAIL" });
    let summary_path = ctx.dir.join("summary.txt");
    write_atomic(&summary_path, ctx.summary.as_bytes())?;
    Ok(RunOutcome {
        passed: ctx.passed,
        summary: ctx.summary,
    })
}

impl Context<'_> {
    fn emit(&mut self, query: usize, suffix: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(format!("{:02}_{suffix}", query + 1));
        write_atomic(&path, contents.as_bytes())?;
        let _ = writeln!(self.summary, "wrote {}", path.file_name().unwrap_or_default().to_string_lossy());
        Ok(())
    }

    fn tolerance(&self, query_value: Option<f64>, default: f64) -> f64 {
        self.options.tolerance.or(query_value).unwrap_or(default)
    }

    fn solve(&mut self, i: usize) -> Result<bool, RunError> {
        let field = self.field.vector().clone();
        for (j, x0) in self.scenario.initial_values.iter().enumerate() {
            let traj = match solve_ivp(self.alpha, &field, x0, &self.grid) {
                Ok(t) => t,
                Err(SolveError::BlowUp { last_valid, partial }) => {
                    self.emit(i, &format!("solve_{}.csv", j + 1), &partial.to_csv())?;
                    return Err(numeric(i + 1, "solve", format!("blow-up after node {last_valid}")));
                }
                Err(e) => return Err(numeric(i + 1, "solve", e)),
            };
            let residual = volterra_residual(self.alpha, &field, &traj).map_err(|e| numeric(i + 1, "solve", e))?;
            let _ = writeln!(self.summary, "initial value {}: Volterra residual {}", j + 1, fmt_f64(residual));
            self.emit(i, &format!("solve_{}.csv", j + 1), &traj.to_csv())?;
        }
        Ok(true)
    }

    fn bounds(&mut self, i: usize, tolerance: Option<f64>) -> Result<bool, RunError> {
        let tol = self.tolerance(tolerance, DEFAULT_TOLERANCE);
        let field = self.field.vector().clone();
        let iv = &self.scenario.initial_values;
        let err = |e: SolveError| numeric(i + 1, "bounds", e);
        let t1 = solve_ivp(self.alpha, &field, &iv[0], &self.grid).map_err(err)?;
        let t2 = solve_ivp(self.alpha, &field, &iv[1], &self.grid).map_err(err)?;
        let mode = match (&self.field, field.dimension()) {
            (_, 1) => LowerBound::Scalar,
            (Field::Triangular(..), _) => LowerBound::Triangular,
            _ => LowerBound::Skip,
        };
        let report =
            verify_bounds_with(self.alpha, &t1, &t2, &field, tol, mode).map_err(|e| numeric(i + 1, "bounds", e))?;
        let mut ok = report.passed();
        self.summary.push_str(&report.summary());
        if field.dimension() == 1 {
            let sep = check_separation(&t1, &t2).map_err(|e| numeric(i + 1, "bounds", e))?;
            let _ = writeln!(
                self.summary,
                "separation: min gap {} at node {}, sign changes {}",
                fmt_f64(sep.min_gap),
                sep.min_gap_index,
                sep.sign_changes
            );
            if !sep.separated() {
                ok = false;
                let _ = writeln!(self.summary, "trajectories meet at node {}", sep.first_meet.unwrap_or(0));
            }
        }
        self.emit(i, "bounds.csv", &report.to_csv())?;
        Ok(ok)
    }

    fn flow(&mut self, i: usize, s: f64, t: f64, xs: &[f64], tolerance: Option<f64>) -> Result<bool, RunError> {
        let tol = self.tolerance(tolerance, DEFAULT_FLOW_TOLERANCE);
        let field = self.field.vector().clone();
        let mut records: Vec<FlowRecord> = Vec::with_capacity(xs.len());
        let mut ok = true;
        for &x in xs {
            let q = FlowQuery {
                s,
                t,
                x: vec![x],
                grid: self.grid,
            };
            let r = flow_map(self.alpha, &field, &q, tol).map_err(|e| numeric(i + 1, "flow", e))?;
            if r.residual > tol {
                ok = false;
            }
            records.push(r);
        }
        let worst = records.iter().map(|r| r.residual).fold(0.0, f64::max);
        let _ = writeln!(self.summary, "flow points: {}, worst inversion residual {}", records.len(), fmt_f64(worst));
        let mut buf = Vec::new();
        write_flow_csv(&mut buf, &records).map_err(|e| numeric(i + 1, "flow", e))?;
        self.emit(i, "flow.csv", &String::from_utf8_lossy(&buf))?;
        Ok(ok)
    }

    fn invert(&mut self, i: usize, t: f64, targets: &[Vec<f64>], tolerance: Option<f64>) -> Result<bool, RunError> {
        let tol = self.tolerance(tolerance, DEFAULT_FLOW_TOLERANCE);
        let mut rows = Vec::new();
        let mut ok = true;
        for x_star in targets {
            let inversions = match &self.field {
                Field::Triangular(system, _) => invert_evolution_triangular(self.alpha, system, t, x_star, &self.grid, tol),
                other => invert_evolution_1d(self.alpha, other.vector(), t, x_star[0], &self.grid, tol).map(|v| vec![v]),
            }
            .map_err(|e| numeric(i + 1, "invert", e))?;
            // independent forward check of the reconstructed initial value
            let x0: Vec<f64> = inversions.iter().map(|v| v.x0).collect();
            let forward = match &self.field {
                Field::Triangular(system, _) => {
                    let k = self.grid.index_of(t).unwrap_or(0);
                    solve_triangular(self.alpha, system, &x0, &self.grid).map(|tr| tr.state(k).to_vec())
                }
                other => evolution_map(self.alpha, other.vector(), t, &x0, &self.grid),
            }
            .map_err(|e| numeric(i + 1, "invert", e))?;
            for (c, inv) in inversions.iter().enumerate() {
                let round_trip = (forward[c] - x_star[c]).abs();
                if inv.residual > tol {
                    ok = false;
                }
                rows.push(vec![t, (c + 1) as f64, x_star[c], inv.x0, inv.residual, round_trip]);
            }
        }
        let worst = rows.iter().map(|r| r[4]).fold(0.0, f64::max);
        let _ = writeln!(self.summary, "targets: {}, worst residual {}", targets.len(), fmt_f64(worst));
        let csv = table_string(&["t", "coordinate", "x_star", "x0", "residual", "forward_residual"], rows);
        self.emit(i, "invert.csv", &csv)?;
        Ok(ok)
    }

    fn counterexample(
        &mut self,
        i: usize,
        initials: &[[f64; 2]],
        random: usize,
        collapse_tolerance: Option<f64>,
    ) -> Result<bool, RunError> {
        let limit = collapse_tolerance.unwrap_or(DEFAULT_COLLAPSE_TOLERANCE);
        let spec = match &self.field {
            Field::Counterexample(spec, _) => **spec,
            _ => build_counterexample(self.alpha).map_err(|e| numeric(i + 1, "counterexample", e))?,
        };
        let mut points = initials.to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(self.scenario.seed.wrapping_add(i as u64));
        for _ in 0..random {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            points.push([theta.cos(), theta.sin()]);
        }
        let grid = Grid::new(spec.t_collapse, self.grid.n_steps()).map_err(|e| numeric(i + 1, "counterexample", e))?;
        let report = verify_collapse(&spec, &points, &grid).map_err(|e| numeric(i + 1, "counterexample", e))?;
        let fs = fundamental_solutions(&spec, &grid.nodes()).map_err(|e| numeric(i + 1, "counterexample", e))?;
        let ok = report.max_ratio <= limit && spec.residual <= 1e-10;

        let mut text = spec.report();
        text.push('\n');
        text.push_str(&report.text());
        let _ = writeln!(text, "collapse tolerance: {}", fmt_f64(limit));
        self.summary.push_str(&text);
        self.emit(i, "counterexample.txt", &text)?;

        let mut buf = Vec::new();
        fs.write_csv(&mut buf).map_err(|e| numeric(i + 1, "counterexample", e))?;
        self.emit(i, "counterexample_fundamental.csv", &String::from_utf8_lossy(&buf))?;
        let rows = report.entries.iter().map(|e| {
            vec![e.initial[0], e.initial[1], e.at_collapse[0], e.at_collapse[1], e.ratio, e.analytic_gap]
        });
        let csv = table_string(&["x0_1", "x0_2", "xT_1", "xT_2", "ratio", "analytic_gap"], rows);
        self.emit(i, "counterexample_collapse.csv", &csv)?;
        for (j, traj) in report.trajectories.iter().enumerate() {
            self.emit(i, &format!("counterexample_traj_{}.csv", j + 1), &traj.to_csv())?;
        }
        Ok(ok)
    }

    fn ml(
        &mut self,
        i: usize,
        alpha: f64,
        beta: f64,
        start: (f64, f64),
        stop: (f64, f64),
        points: usize,
    ) -> Result<bool, RunError> {
        let params = MlParams::new(alpha, beta).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let table = ml_table(params, Complex64::new(start.0, start.1), Complex64::new(stop.0, stop.1), points)
            .map_err(|e| numeric(i + 1, "ml", e))?;
        let _ = writeln!(self.summary, "E_{{{},{}}} at {} points", fmt_f64(alpha), fmt_f64(beta), points);
        self.emit(i, "ml.csv", &table)?;
        Ok(true)
    }
}

/// Rows `z_re,z_im,E_re,E_im,err_est` on `points` equally spaced points
/// from `start` to `stop`.
pub fn ml_table(params: MlParams, start: Complex64, stop: Complex64, points: usize) -> Result<String, caputo_core::MlError> {
    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        let z = if points == 1 {
            start
        } else if k + 1 == points {
            stop
        } else {
            start + (stop - start) * (k as f64 / (points - 1) as f64)
        };
        let v = ml_eval(params, z)?;
        rows.push(vec![z.re, z.im, v.value.re, v.value.im, v.abs_error_estimate]);
    }
    Ok(table_string(&["z_re", "z_im", "E_re", "E_im", "err_est"], rows))
}
