//! A planar linear Caputo system whose solutions all pass through the
//! origin at one finite time.
//!
//! Let z* be a non-real zero of E_α, φ = arg z*, λ = e^{iφ} and
//! T = |z*|^{1/α}, so that λT^α = z*. For the rotation-like matrix
//! A = [[cos φ, sin φ], [−sin φ, cos φ]] (eigenvalues λ, λ̄) the functions
//!
//! u(t) = E_α(λt^α) + E_α(λ̄t^α),  v(t) = i(E_α(λt^α) − E_α(λ̄t^α))
//!
//! give the real fundamental solutions x₁ = (u, v) and x₂ = (−v, u) of
//! ^C D^α x = A x. Both vanish at t = T, and so does every solution.

use std::fmt::Write as _;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::mlf::{ml_eval, FractionalOrder, MlError};
use crate::mlzeros::{smallest_upper_zero, MlZero, ZeroError};
use crate::solver::{solve_ivp, Grid, SolveError, Trajectory, VectorField};
use crate::table;

/// Largest tolerated imaginary residue of u and v.
pub const IMAGINARY_RESIDUE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CounterexampleError {
    #[error("zero search failed: {0}")]
    Zero(#[from] ZeroError),
    #[error("lambda T^alpha misses z* by {0:e}")]
    Inconsistent(f64),
    #[error("time {t} lies outside [0, 1.5 T] = [0, {limit}]")]
    OutOfRange { t: f64, limit: f64 },
    #[error("u or v has imaginary part {0:e}")]
    ImaginaryResidue(f64),
    #[error("the collapse time {0} is not a grid node")]
    CollapseOffGrid(f64),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Ml(#[from] MlError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleSpec {
    pub alpha: FractionalOrder,
    pub z_star: Complex64,
    /// arg z* in (−π, π]
    pub phi: f64,
    pub lambda: Complex64,
    pub a: [[f64; 2]; 2],
    /// Collapse time T = |z*|^{1/α}.
    pub t_collapse: f64,
    /// |E_α(z*)|
    pub residual: f64,
    /// |λT^α − z*|
    pub mismatch: f64,
}

/// Builds the system from the smallest zero of E_α in the upper half-plane.
pub fn build_counterexample(alpha: FractionalOrder) -> Result<CounterexampleSpec, CounterexampleError> {
    let zero = smallest_upper_zero(alpha)?;
    from_zero(alpha, &zero)
}

/// Builds the system from a given zero of E_α.
pub fn from_zero(alpha: FractionalOrder, zero: &MlZero) -> Result<CounterexampleSpec, CounterexampleError> {
    let z = zero.z_star;
    let phi = z.arg();
    let lambda = Complex64::from_polar(1.0, phi);
    let t_collapse = z.norm().powf(1.0 / alpha.value());
    let (s, c) = phi.sin_cos();
    let mismatch = (lambda * t_collapse.powf(alpha.value()) - z).norm();
    if mismatch > 1e-9 {
        return Err(CounterexampleError::Inconsistent(mismatch));
    }
    Ok(CounterexampleSpec {
        alpha,
        z_star: z,
        phi,
        lambda,
        a: [[c, s], [-s, c]],
        t_collapse,
        residual: zero.residual,
        mismatch,
    })
}

impl CounterexampleSpec {
    pub fn field(&self) -> VectorField {
        VectorField::linear(self.a.iter().map(|r| r.to_vec()).collect())
    }

    /// Plain-text description of the construction.
    pub fn report(&self) -> String {
        let f = table::fmt_f64;
        let mut s = String::new();
        let _ = writeln!(s, "alpha = {}", f(self.alpha.value()));
        let _ = writeln!(s, "z* = {} + {}i", f(self.z_star.re), f(self.z_star.im));
        let _ = writeln!(s, "|E_alpha(z*)| = {}", f(self.residual));
        let _ = writeln!(s, "phi = arg z* = {}", f(self.phi));
        let _ = writeln!(s, "lambda = {} + {}i", f(self.lambda.re), f(self.lambda.im));
        let _ = writeln!(s, "A = [[{}, {}], [{}, {}]]", f(self.a[0][0]), f(self.a[0][1]), f(self.a[1][0]), f(self.a[1][1]));
        let _ = writeln!(s, "T = |z*|^(1/alpha) = {}", f(self.t_collapse));
        let _ = writeln!(s, "|lambda T^alpha - z*| = {}", f(self.mismatch));
        s
    }
}

/// x₁ = (u, v) and x₂ = (−v, u) sampled at the given times.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSolutions {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FundamentalSolutions {
    pub fn x1(&self, k: usize) -> [f64; 2] {
        [self.u[k], self.v[k]]
    }

    pub fn x2(&self, k: usize) -> [f64; 2] {
        [-self.v[k], self.u[k]]
    }

    /// a·x₁ + b·x₂ with (a, b) = x(0)/2.
    pub fn combination(&self, x0: [f64; 2], k: usize) -> [f64; 2] {
        let (a, b) = (0.5 * x0[0], 0.5 * x0[1]);
        [a * self.u[k] - b * self.v[k], a * self.v[k] + b * self.u[k]]
    }

    /// CSV with header `t,u,v`.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        table::write_table(out, &["t", "u", "v"], (0..self.t.len()).map(|k| vec![self.t[k], self.u[k], self.v[k]]))
    }
}

pub fn fundamental_solutions(
    spec: &CounterexampleSpec,
    t_nodes: &[f64],
) -> Result<FundamentalSolutions, CounterexampleError> {
    let limit = 1.5 * spec.t_collapse;
    if let Some(&t) = t_nodes.iter().find(|&&t| !(0.0..=limit).contains(&t)) {
        return Err(CounterexampleError::OutOfRange { t, limit });
    }
    let params = spec.alpha.ml();
    let a = spec.alpha.value();
    let uv: Result<Vec<(f64, f64)>, CounterexampleError> = t_nodes
        .par_iter()
        .map(|&t| {
            let ta = if t == 0.0 { 0.0 } else { t.powf(a) };
            let e = ml_eval(params, spec.lambda * ta)?.value;
            let e_bar = ml_eval(params, spec.lambda.conj() * ta)?.value;
            let u = e + e_bar;
            let v = Complex64::new(0.0, 1.0) * (e - e_bar);
            let residue = u.im.abs().max(v.im.abs());
            if residue > IMAGINARY_RESIDUE {
                return Err(CounterexampleError::ImaginaryResidue(residue));
            }
            Ok((u.re, v.re))
        })
        .collect();
    let (u, v) = uv?.into_iter().unzip();
    Ok(FundamentalSolutions {
        t: t_nodes.to_vec(),
        u,
        v,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseEntry {
    pub initial: [f64; 2],
    pub at_collapse: [f64; 2],
    /// ‖x(T)‖ / ‖x(0)‖, zero for the zero initial value.
    pub ratio: f64,
    /// Max over nodes of ‖numerical − analytic‖.
    pub analytic_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseReport {
    pub n_steps: usize,
    pub t_collapse: f64,
    pub entries: Vec<CollapseEntry>,
    pub max_ratio: f64,
    /// Largest ‖x(T) − y(T)‖ over pairs of distinct initial values.
    pub max_terminal_spread: f64,
    pub trajectories: Vec<Trajectory>,
}

impl CollapseReport {
    pub fn text(&self) -> String {
        let f = table::fmt_f64;
        let mut s = String::new();
        let _ = writeln!(s, "grid steps: {}", self.n_steps);
        let _ = writeln!(s, "collapse time T = {}", f(self.t_collapse));
        for e in &self.entries {
            let _ = writeln!(
                s,
                "x(0) = ({}, {})  x(T) = ({}, {})  |x(T)|/|x(0)| = {}  max |numeric - analytic| = {}",
                f(e.initial[0]),
                f(e.initial[1]),
                f(e.at_collapse[0]),
                f(e.at_collapse[1]),
                f(e.ratio),
                f(e.analytic_gap)
            );
        }
        let _ = writeln!(s, "max collapse ratio: {}", f(self.max_ratio));
        let _ = writeln!(
            s,
            "distinct initial values reach points at most {} apart at t = T: the evolution map Phi(0, T) \
             is not injective there, and the terminal value problem x(T) = x* is not uniquely solvable",
            f(self.max_terminal_spread)
        );
        s
    }
}

/// Solves ^C D^α x = A x from each initial value up to T and compares
/// with the analytic solution a·x₁ + b·x₂.
pub fn verify_collapse(
    spec: &CounterexampleSpec,
    initials: &[[f64; 2]],
    grid: &Grid,
) -> Result<CollapseReport, CounterexampleError> {
    let k_t = grid
        .index_of(spec.t_collapse)
        .ok_or(CounterexampleError::CollapseOffGrid(spec.t_collapse))?;
    let nodes = grid.nodes();
    let fs = fundamental_solutions(spec, &nodes)?;
    let field = spec.field();
    let results: Result<Vec<(CollapseEntry, Trajectory)>, CounterexampleError> = initials
        .par_iter()
        .map(|&x0| {
            let traj = solve_ivp(spec.alpha, &field, &x0, grid)?;
            let xt = traj.state(k_t);
            let n0 = x0[0].hypot(x0[1]);
            let ratio = if n0 == 0.0 { 0.0 } else { xt[0].hypot(xt[1]) / n0 };
            let analytic_gap = (0..nodes.len())
                .map(|k| {
                    let a = fs.combination(x0, k);
                    let x = traj.state(k);
                    (x[0] - a[0]).hypot(x[1] - a[1])
                })
                .fold(0.0, f64::max);
            Ok((
                CollapseEntry {
                    initial: x0,
                    at_collapse: [xt[0], xt[1]],
                    ratio,
                    analytic_gap,
                },
                traj,
            ))
        })
        .collect();
    let (entries, trajectories): (Vec<_>, Vec<_>) = results?.into_iter().unzip();
    let max_ratio = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    let mut spread: f64 = 0.0;
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            if a.initial != b.initial {
                let d = (a.at_collapse[0] - b.at_collapse[0]).hypot(a.at_collapse[1] - b.at_collapse[1]);
                spread = spread.max(d);
            }
        }
    }
    Ok(CollapseReport {
        n_steps: grid.n_steps(),
        t_collapse: spec.t_collapse,
        entries,
        max_ratio,
        max_terminal_spread: spread,
        trajectories,
    })
}
