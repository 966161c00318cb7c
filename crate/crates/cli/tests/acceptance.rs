//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use caputo_core::bounds::{check_separation, verify_bounds, verify_bounds_with, BoundReport, LowerBound};
use caputo_core::counterexample::{build_counterexample, fundamental_solutions, verify_collapse};
use caputo_core::flow::{
    evolution_map, flow_map, invert_evolution_1d, invert_evolution_triangular, solve_triangular, FlowQuery,
    TriangularSystem,
};
use caputo_core::mlf::ACCURACY;
use caputo_core::solver::{solve_ivp, spectral_norm, volterra_residual, Grid, Trajectory, VectorField};
use caputo_core::{ml_eval, ml_eval_real, Complex64, FractionalOrder, MlError, MlParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Residuals of solver outputs keyed by problem, then by grid size.
#[derive(Default)]
struct Residuals(BTreeMap<String, BTreeMap<usize, f64>>);

impl Residuals {
    fn record(&mut self, label: String, alpha: FractionalOrder, field: &VectorField, traj: &Trajectory) {
        let r = volterra_residual(alpha, field, traj).expect("dimensions match");
        self.0.entry(label).or_default().insert(traj.grid().n_steps(), r);
    }
}

fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

fn solve(alpha: FractionalOrder, field: &VectorField, x0: &[f64], grid: &Grid) -> Trajectory {
    solve_ivp(alpha, field, x0, grid).expect("solve succeeds")
}

/// Least-squares slope of −log2(err) against log2(n).
fn fitted_order(ns: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| -e.log2()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// f(t, x) = a(1 + sin(ωt)/2)·sin(bx + c) + dx + e·cos(ωt) with its exact
/// Lipschitz profile.
fn random_scalar_field<R: Rng>(rng: &mut R) -> VectorField {
    let a: f64 = rng.gen_range(-1.0..1.0);
    let b: f64 = rng.gen_range(0.5..2.0);
    let c: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let d: f64 = rng.gen_range(-1.0..1.0);
    let e: f64 = rng.gen_range(-1.0..1.0);
    let w: f64 = rng.gen_range(0.0..3.0);
    VectorField::new(
        1,
        move |t, x, out| out[0] = a * (1.0 + 0.5 * (w * t).sin()) * (b * x[0] + c).sin() + d * x[0] + e * (w * t).cos(),
        move |t| (a * b).abs() * (1.0 + 0.5 * (w * t).sin()) + d.abs(),
    )
}

/// f(t, x) = Ax + a(1 + sin(ωt)/2)·(sin x₂, sin x₁).
fn random_planar_field<R: Rng>(rng: &mut R) -> VectorField {
    let m: Vec<Vec<f64>> = (0..2).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let a: f64 = rng.gen_range(-1.0..1.0);
    let w: f64 = rng.gen_range(0.0..3.0);
    let norm = spectral_norm(&m);
    VectorField::new(
        2,
        move |t, x, out| {
            let s = a * (1.0 + 0.5 * (w * t).sin());
            out[0] = m[0][0] * x[0] + m[0][1] * x[1] + s * x[1].sin();
            out[1] = m[1][0] * x[0] + m[1][1] * x[1] + s * x[0].sin();
        },
        move |t| norm + a.abs() * (1.0 + 0.5 * (w * t).sin()),
    )
}

fn random_lower_triangular<R: Rng>(rng: &mut R, d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if j <= i { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect())
        .collect()
}

fn criterion_1() -> Outcome {
    let oracle_rounding = 4.0 * f64::EPSILON;
    let mut worst_rel: f64 = 0.0;
    let mut worst_est_ratio: f64 = 0.0;
    let mut failures = Vec::new();
    let mut overflow_rows = 0;

    let mut check = |label: &str, z: Complex64, params: MlParams, want: Option<Complex64>| match (ml_eval(params, z), want) {
        (Ok(v), Some(w)) => {
            let err = (v.value - w).norm();
            let scale = w.norm().max(1.0);
            worst_rel = worst_rel.max(err / scale);
            worst_est_ratio = worst_est_ratio.max(err / (v.abs_error_estimate + oracle_rounding * w.norm()));
            if err > ACCURACY * scale || err > v.abs_error_estimate + oracle_rounding * w.norm() {
                failures.push(format!("{label} z = {z}: error {err:e}, estimate {:e}", v.abs_error_estimate));
            }
        }
        (Err(MlError::Overflow { .. }), None) => overflow_rows += 1,
        (got, want) => failures.push(format!("{label} z = {z}: got {got:?}, oracle {want:?}")),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let exp = MlParams::new(1.0, 1.0).unwrap();
    for _ in 0..200 {
        let r = 30.0 * rng.gen::<f64>().sqrt();
        let th = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let z = Complex64::from_polar(r, th);
        check("exp", z, exp, Some(z.exp()));
    }
    let half = MlParams::new(0.5, 1.0).unwrap();
    for line in include_str!("../../core/tests/data/ml_half.csv").lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let want = v[2].is_finite().then(|| Complex64::new(v[2], v[3]));
        check("erfc", Complex64::new(v[0], v[1]), half, want);
    }
    let detail = format!(
        "400 points, worst error/max(1,|E|) {worst_rel:.2e}, worst error/estimate {worst_est_ratio:.2e}, \
         {overflow_rows} overflow rows reported as overflow{}",
        failures.first().map(|f| format!("; first failure: {f}")).unwrap_or_default()
    );
    Outcome::new(failures.is_empty(), detail)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = Vec::new();
    let mut overflowed = 0;
    let mut smallest = f64::INFINITY;
    for a in [0.3, 0.5, 0.8] {
        let p = MlParams::new(a, a).unwrap();
        for _ in 0..1000 {
            let s: f64 = rng.gen_range(-100.0..100.0);
            match ml_eval_real(p, s) {
                Ok(v) if v > 0.0 => smallest = smallest.min(v),
                // every term of the series is positive for s > 0
                Err(MlError::Overflow { .. }) if s > 0.0 => overflowed += 1,
                other => bad.push(format!("alpha {a}, s {s}: {other:?}")),
            }
        }
    }
    Outcome::new(
        bad.is_empty(),
        format!(
            "3000 samples, smallest value {smallest:.3e}, {overflowed} positive-axis samples beyond f64 range{}",
            bad.first().map(|b| format!("; {b}")).unwrap_or_default()
        ),
    )
}

fn criterion_3(residuals: &mut Residuals) -> Outcome {
    let ns: Vec<usize> = (8..=13).map(|p| 1 << p).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for a in [0.4, 0.8] {
        let alpha = order(a);
        let field = VectorField::scalar_linear(-1.0);
        let mut terminal = Vec::new();
        let mut max_node = Vec::new();
        for &n in &ns {
            let grid = Grid::new(1.0, n).unwrap();
            let traj = solve(alpha, &field, &[1.0], &grid);
            let exact: Vec<f64> = grid.nodes().iter().map(|&t| ml_eval_real(alpha.ml(), -t.powf(a)).unwrap()).collect();
            terminal.push((traj.last()[0] - exact[n]).abs());
            max_node.push(traj.states().iter().zip(&exact).map(|(x, e)| (x[0] - e).abs()).fold(0.0, f64::max));
            residuals.record(format!("decay alpha={a}"), alpha, &field, &traj);
        }
        let target = (1.0 + a).min(2.0);
        let p = fitted_order(&ns, &terminal);
        let q = fitted_order(&ns, &max_node);
        pass &= (p - target).abs() <= 0.25;
        parts.push(format!("alpha {a}: order at t_end {p:.3} (target {target}), max-node order {q:.3}"));
    }
    Outcome::new(pass, parts.join("; "))
}

struct Campaign {
    scalar: Vec<(BoundReport, usize)>,
    planar: Vec<BoundReport>,
}

fn bounds_campaign(residuals: &mut Residuals) -> Campaign {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 256;
    let grid = Grid::new(2.0, n).unwrap();
    let mut scalar = Vec::new();
    for i in 0..50 {
        let field = random_scalar_field(&mut rng);
        let alpha = order(rng.gen_range(0.2..0.95));
        let x0: f64 = rng.gen_range(-2.0..2.0);
        let y0 = x0 + rng.gen_range(0.01..1.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let x = solve(alpha, &field, &[x0], &grid);
        let y = solve(alpha, &field, &[y0], &grid);
        let report = verify_bounds(alpha, &x, &y, &field, 1e-2).unwrap();
        let sign_changes = check_separation(&x, &y).unwrap().sign_changes;
        residuals.record(format!("campaign scalar {i:02} alpha={:.3}", alpha.value()), alpha, &field, &x);
        residuals.record(format!("campaign scalar {i:02} alpha={:.3}", alpha.value()), alpha, &field, &solve(alpha, &field, &[x0], &Grid::new(2.0, 8 * n).unwrap()));
        scalar.push((report, sign_changes));
    }
    let mut planar = Vec::new();
    for i in 0..20 {
        let field = random_planar_field(&mut rng);
        let alpha = order(rng.gen_range(0.2..0.95));
        let x0 = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let y0 = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let x = solve(alpha, &field, &x0, &grid);
        let y = solve(alpha, &field, &y0, &grid);
        planar.push(verify_bounds(alpha, &x, &y, &field, 1e-2).unwrap());
        residuals.record(format!("campaign planar {i:02} alpha={:.3}", alpha.value()), alpha, &field, &x);
        residuals.record(format!("campaign planar {i:02} alpha={:.3}", alpha.value()), alpha, &field, &solve(alpha, &field, &x0, &Grid::new(2.0, 8 * n).unwrap()));
    }
    Campaign { scalar, planar }
}

fn criterion_4(c: &Campaign) -> Outcome {
    let crossings: usize = c.scalar.iter().map(|(_, s)| s).sum();
    let violations: usize = c.scalar.iter().map(|(r, _)| r.violations_lower).sum();
    let tightest = c
        .scalar
        .iter()
        .filter_map(|(r, _)| r.worst_lower.map(|(_, v)| v))
        .fold(f64::INFINITY, f64::min);
    Outcome::new(
        crossings == 0 && violations == 0,
        format!("50 fields: {crossings} sign changes, {violations} lower-estimate violations, min gap/lower {tightest:.4}"),
    )
}

fn criterion_5(c: &Campaign) -> Outcome {
    let scalar: usize = c.scalar.iter().map(|(r, _)| r.violations_upper).sum();
    let planar: usize = c.planar.iter().map(|r| r.violations_upper).sum();
    let worst = c
        .scalar
        .iter()
        .map(|(r, _)| r)
        .chain(&c.planar)
        .filter_map(|r| r.worst_upper.map(|(_, v)| v))
        .fold(0.0, f64::max);
    Outcome::new(
        scalar == 0 && planar == 0,
        format!("50 scalar fields: {scalar} violations; 20 planar fields: {planar} violations; max gap/upper {worst:.4}"),
    )
}

fn criterion_6(residuals: &mut Residuals) -> Outcome {
    let tol = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let grid = Grid::new(1.0, 64).unwrap();
    let mut worst_trip: f64 = 0.0;
    for i in 0..100 {
        let field = random_scalar_field(&mut rng);
        let alpha = order(rng.gen_range(0.2..0.95));
        let t = grid.node(rng.gen_range(1..=64));
        let x0 = rng.gen_range(-3.0..3.0);
        let x_star = evolution_map(alpha, &field, t, &[x0], &grid).unwrap()[0];
        let inv = invert_evolution_1d(alpha, &field, t, x_star, &grid, tol).unwrap();
        worst_trip = worst_trip.max((inv.x0 - x0).abs());
        if i < 5 {
            let label = format!("flow field {i} alpha={:.3}", alpha.value());
            residuals.record(label.clone(), alpha, &field, &solve(alpha, &field, &[x0], &grid));
            residuals.record(label, alpha, &field, &solve(alpha, &field, &[x0], &Grid::new(1.0, 512).unwrap()));
        }
    }
    let mut worst_flow: f64 = 0.0;
    for _ in 0..50 {
        let field = random_scalar_field(&mut rng);
        let alpha = order(rng.gen_range(0.2..0.95));
        let mut k: Vec<usize> = (0..3).map(|_| rng.gen_range(0..=64)).collect();
        k.sort_unstable();
        let (u, s, t) = (grid.node(k[0]), grid.node(k[1]), grid.node(k[2]));
        let x = rng.gen_range(-2.0..2.0);
        let q = |s, t, x| FlowQuery { s, t, x: vec![x], grid };
        let us = flow_map(alpha, &field, &q(u, s, x), tol).unwrap().x_out;
        let st = flow_map(alpha, &field, &q(s, t, us), tol).unwrap().x_out;
        let ut = flow_map(alpha, &field, &q(u, t, x), tol).unwrap().x_out;
        worst_flow = worst_flow.max((st - ut).abs());
    }
    let mut worst_linear: f64 = 0.0;
    for _ in 0..20 {
        let (p, q): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.0..3.0));
        let field = VectorField::new(1, move |t, x, out| out[0] = (p + (q * t).sin()) * x[0], move |_| p.abs() + 1.0);
        let alpha = order(rng.gen_range(0.2..0.95));
        let t = grid.node(rng.gen_range(1..=64));
        let (a, b, x, y): (f64, f64, f64, f64) = (
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        );
        let phi = |v: f64| evolution_map(alpha, &field, t, &[v], &grid).unwrap()[0];
        let lhs = phi(a * x + b * y);
        let rhs = a * phi(x) + b * phi(y);
        worst_linear = worst_linear.max((lhs - rhs).abs() / rhs.abs().max(lhs.abs()).max(1e-300));
    }
    Outcome::new(
        worst_trip <= 1e-6 && worst_flow <= 3e-6 && worst_linear <= 1e-8,
        format!(
            "round trip {worst_trip:.2e} (100 cases), flow defect {worst_flow:.2e} (50 triples), \
             linearity {worst_linear:.2e} relative (20 cases)"
        ),
    )
}

fn criterion_7(residuals: &mut Residuals) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let fine = Grid::new(1.0, 1 << 12).unwrap();
    let coarse = Grid::new(1.0, 1 << 9).unwrap();
    let mut worst_match = (0.0f64, 0.0);
    let mut over = 0;
    let mut lower_violations = 0;
    let mut tightest = f64::INFINITY;
    let mut worst_trip: f64 = 0.0;
    for i in 0..20 {
        let matrix = random_lower_triangular(&mut rng, 3);
        let system = TriangularSystem::linear(matrix).unwrap();
        let field = system.to_vector_field();
        let alpha = order(rng.gen_range(0.2..0.95));
        let x0: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y0: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();

        let coordinatewise = solve_triangular(alpha, &system, &x0, &fine).unwrap();
        let coupled = solve(alpha, &field, &x0, &fine);
        let gap = coordinatewise
            .states()
            .iter()
            .zip(coupled.states())
            .flat_map(|(p, q)| p.iter().zip(q).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if gap > 1e-4 {
            over += 1;
        }
        if gap > worst_match.0 {
            worst_match = (gap, alpha.value());
        }
        let label = format!("triangular {i:02} alpha={:.3}", alpha.value());
        residuals.record(label.clone(), alpha, &field, &coupled);
        residuals.record(label, alpha, &field, &solve(alpha, &field, &x0, &coarse));

        let y = solve_triangular(alpha, &system, &y0, &coarse).unwrap();
        let x = solve_triangular(alpha, &system, &x0, &coarse).unwrap();
        let zero = solve_triangular(alpha, &system, &[0.0; 3], &coarse).unwrap();
        for (a, b) in [(&x, &y), (&zero, &x)] {
            let report = verify_bounds_with(alpha, a, b, &field, 1e-2, LowerBound::Triangular).unwrap();
            lower_violations += report.violations_lower;
            if let Some((_, r)) = report.worst_lower {
                tightest = tightest.min(r);
            }
        }

        let inv = invert_evolution_triangular(alpha, &system, 1.0, x.last(), &coarse, 1e-9).unwrap();
        for (v, want) in inv.iter().zip(&x0) {
            worst_trip = worst_trip.max((v.x0 - want).abs());
        }
    }
    Outcome::new(
        over == 0 && lower_violations == 0 && worst_trip <= 1e-5,
        format!(
            "coordinate-wise vs coupled: {over} of 20 above 1e-4, worst {:.2e} at alpha {:.3}; {lower_violations} norm lower-estimate violations \
             (min gap/lower {tightest:.4}); inversion round trip {worst_trip:.2e}",
            worst_match.0, worst_match.1
        ),
    )
}

fn criterion_8(residuals: &mut Residuals) -> Outcome {
    let alpha = order(0.5);
    let spec = match build_counterexample(alpha) {
        Ok(s) => s,
        Err(e) => return Outcome::new(false, format!("construction failed: {e}")),
    };
    let oracle = Complex64::new(1.354_810_13, 1.991_466_84);
    let z_err = (spec.z_star - oracle).norm();
    let t_err = (spec.t_collapse - spec.z_star.norm_sqr()).abs();
    let fs = fundamental_solutions(&spec, &[0.0, spec.t_collapse]).unwrap();
    let start_ok = fs.x1(0) == [2.0, 0.0] && fs.x2(0) == [-0.0, 2.0];
    let end = fs.x1(1)[0].hypot(fs.x1(1)[1]).max(fs.x2(1)[0].hypot(fs.x2(1)[1]));

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let initials: Vec<[f64; 2]> = (0..8)
        .map(|_| {
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            [th.cos(), th.sin()]
        })
        .collect();
    let field = spec.field();
    let mut per_grid = Vec::new();
    for p in [10, 12, 14] {
        let grid = Grid::new(spec.t_collapse, 1 << p).unwrap();
        let report = verify_collapse(&spec, &initials, &grid).unwrap();
        per_grid.push(report.entries.iter().map(|e| e.ratio).collect::<Vec<f64>>());
        if p == 14 {
            residuals.record("counterexample".into(), alpha, &field, &report.trajectories[0]);
        }
    }
    let coarse = solve(alpha, &field, &initials[0], &Grid::new(spec.t_collapse, 1 << 11).unwrap());
    residuals.record("counterexample".into(), alpha, &field, &coarse);

    let max_at = |i: usize| per_grid[i].iter().copied().fold(0.0, f64::max);
    let decreasing = (0..8).all(|j| per_grid[0][j] > per_grid[1][j] && per_grid[1][j] > per_grid[2][j]);
    let pass = z_err <= 1e-6 && t_err <= 1e-5 && start_ok && end <= 1e-8 && max_at(2) <= 1e-2 && decreasing;
    Outcome::new(
        pass,
        format!(
            "z* = {:.10}{:+.10}i (oracle distance {z_err:.1e}), T = {:.8}, |x_i(T)| analytic {end:.1e}, \
             max collapse ratio {:.2e} / {:.2e} / {:.2e} at n = 2^10 / 2^12 / 2^14",
            spec.z_star.re,
            spec.z_star.im,
            spec.t_collapse,
            max_at(0),
            max_at(1),
            max_at(2)
        ),
    )
}

fn criterion_9(residuals: &Residuals) -> Outcome {
    let mut pairs = 0;
    let mut short = 0;
    let mut worst = (f64::INFINITY, String::new());
    for (label, by_n) in &residuals.0 {
        for (&n, &r) in by_n {
            if let Some(&r8) = by_n.get(&(8 * n)) {
                pairs += 1;
                let factor = if r8 == 0.0 { f64::INFINITY } else { r / r8 };
                if factor < 4.0 {
                    short += 1;
                }
                if factor < worst.0 {
                    worst = (factor, format!("{label}, n = {n}"));
                }
            }
        }
    }
    let alpha = order(0.6);
    let field = VectorField::scalar_linear(-1.0);
    let grid = Grid::new(1.0, 256).unwrap();
    let mut states = solve(alpha, &field, &[1.0], &grid).states().to_vec();
    states[128][0] += 0.1;
    let corrupted = volterra_residual(alpha, &field, &Trajectory::new(grid, states).unwrap()).unwrap();
    Outcome::new(
        pairs > 0 && worst.0 >= 4.0 && corrupted >= 0.05,
        format!(
            "{pairs} refinement pairs from criteria 3-8, {short} below 4, smallest reduction {:.2} ({}); \
             corrupted trajectory residual {corrupted:.3}",
            worst.0, worst.1
        ),
    )
}

fn cli_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn run_cli(out: &Path, scenario: &Path) -> Option<i32> {
    Command::new(env!("CARGO_BIN_EXE_caputo"))
        .arg("--out-dir")
        .arg(out)
        .arg("run")
        .arg(scenario)
        .env_remove("CAPUTO_OUT_DIR")
        .output()
        .expect("binary runs")
        .status
        .code()
}

fn files_under(dir: &Path, base: &Path, into: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files_under(&path, base, into);
        } else {
            into.insert(path.strip_prefix(base).unwrap().to_path_buf(), fs::read(&path).unwrap());
        }
    }
}

fn criterion_10() -> Outcome {
    let mut scenarios: Vec<PathBuf> = fs::read_dir(cli_dir().join("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    scenarios.sort();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut problems = Vec::new();
    for s in &scenarios {
        for dir in [a.path(), b.path()] {
            let code = run_cli(dir, s);
            if code != Some(0) {
                problems.push(format!("{} exited {code:?}", s.display()));
            }
        }
    }
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    files_under(a.path(), a.path(), &mut fa);
    files_under(b.path(), b.path(), &mut fb);
    let csvs = fa.keys().filter(|p| p.extension().is_some_and(|e| e == "csv")).count();
    if fa != fb {
        problems.push("outputs of the two runs differ".into());
    }

    let fixtures = cli_dir().join("tests/fixtures");
    let scratch = tempfile::tempdir().unwrap();
    for (file, want) in [("zero_slack.toml", 1), ("bad_schema.toml", 2), ("malformed.toml", 2), ("blow_up.toml", 3)] {
        let code = run_cli(scratch.path(), &fixtures.join(file));
        if code != Some(want) {
            problems.push(format!("{file} exited {code:?}, expected {want}"));
        }
    }
    Outcome::new(
        problems.is_empty() && csvs > 0,
        format!(
            "{} scenarios, {csvs} CSV files byte-identical across two runs, fixture exit codes 1/2/2/3{}",
            scenarios.len(),
            problems.first().map(|p| format!("; {p}")).unwrap_or_default()
        ),
    )
}

fn main() {
    let mut residuals = Residuals::default();
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut timed = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {n:>2} {}: {name} ({secs:.1} s): {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        results.push((n, name, outcome, secs));
    };
    timed(1, "Mittag-Leffler accuracy", &mut criterion_1);
    timed(2, "positivity of E_{a,a}", &mut criterion_2);
    timed(3, "solver order", &mut || criterion_3(&mut residuals));
    let campaign = bounds_campaign(&mut residuals);
    timed(4, "separation and lower estimate", &mut || criterion_4(&campaign));
    timed(5, "upper estimate", &mut || criterion_5(&campaign));
    timed(6, "flow construction", &mut || criterion_6(&mut residuals));
    timed(7, "triangular systems", &mut || criterion_7(&mut residuals));
    timed(8, "counterexample", &mut || criterion_8(&mut residuals));
    timed(9, "residual certification", &mut || criterion_9(&residuals));
    timed(10, "CLI determinism and exit codes", &mut criterion_10);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    let total: f64 = results.iter().map(|r| r.3).sum();
    println!("acceptance: {}/{} passed in {total:.1} s", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
