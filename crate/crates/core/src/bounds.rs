//! Separation and rate estimates for pairs of trajectories.
//!
//! For a field with Lipschitz profile L and M_t = max_{τ≤t} L(τ), two
//! solutions of a scalar equation satisfy
//!
//! |Δx₀|·E_α(−M_t t^α) ≤ |x₂(t) − x₁(t)| ≤ |Δx₀|·E_α(M_t t^α),
//!
//! and the upper estimate holds in any dimension with the Euclidean norm.
//! Scalar trajectories with distinct initial values never meet.

use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::mlf::{ml_eval_real, FractionalOrder, MlError};
use crate::solver::{Trajectory, VectorField};
use crate::table;

/// Samples of the Lipschitz profile per grid step.
pub const PROFILE_SAMPLES_PER_STEP: usize = 32;

/// Default relative slack for bound checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("time nodes must be finite and nondecreasing")]
    InvalidNodes,
    #[error("trajectories live on different grids")]
    GridMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("separation needs distinct initial values")]
    IdenticalInitialValues,
    #[error("tolerance must be finite and nonnegative, got {0}")]
    InvalidTolerance(f64),
    #[error(transparent)]
    Ml(#[from] MlError),
}

/// M_t = max_{0≤τ≤t} L(τ) at each node, from a running maximum over
/// [`PROFILE_SAMPLES_PER_STEP`] samples of every step.
pub fn running_lipschitz_max<L>(profile: L, t_nodes: &[f64]) -> Result<Vec<f64>, BoundsError>
where
    L: Fn(f64) -> f64,
{
    if t_nodes.iter().any(|t| !t.is_finite()) || t_nodes.windows(2).any(|w| w[1] < w[0]) {
        return Err(BoundsError::InvalidNodes);
    }
    let mut out = Vec::with_capacity(t_nodes.len());
    let Some(&first) = t_nodes.first() else {
        return Ok(out);
    };
    let mut m = profile(first);
    out.push(m);
    for w in t_nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        for j in 1..=PROFILE_SAMPLES_PER_STEP {
            let t = if j == PROFILE_SAMPLES_PER_STEP {
                b
            } else {
                a + (b - a) * j as f64 / PROFILE_SAMPLES_PER_STEP as f64
            };
            m = m.max(profile(t));
        }
        out.push(m);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    pub min_gap: f64,
    pub min_gap_index: usize,
    /// First node where the ordering of the initial values is lost.
    pub first_meet: Option<usize>,
    pub sign_changes: usize,
}

impl SeparationReport {
    pub fn separated(&self) -> bool {
        self.first_meet.is_none()
    }
}

fn same_grid(a: &Trajectory, b: &Trajectory) -> Result<(), BoundsError> {
    if a.grid() != b.grid() {
        return Err(BoundsError::GridMismatch);
    }
    if a.dimension() != b.dimension() {
        return Err(BoundsError::DimensionMismatch {
            expected: a.dimension(),
            got: b.dimension(),
        });
    }
    Ok(())
}

/// Minimum gap and ordering check for two scalar trajectories.
pub fn check_separation(traj1: &Trajectory, traj2: &Trajectory) -> Result<SeparationReport, BoundsError> {
    same_grid(traj1, traj2)?;
    if traj1.dimension() != 1 {
        return Err(BoundsError::DimensionMismatch {
            expected: 1,
            got: traj1.dimension(),
        });
    }
    let d0 = traj2.initial_value()[0] - traj1.initial_value()[0];
    if d0 == 0.0 {
        return Err(BoundsError::IdenticalInitialValues);
    }
    let sign = d0.signum();
    let mut report = SeparationReport {
        min_gap: f64::INFINITY,
        min_gap_index: 0,
        first_meet: None,
        sign_changes: 0,
    };
    let mut prev_sign = sign;
    for (k, (a, b)) in traj1.states().iter().zip(traj2.states()).enumerate() {
        let d = b[0] - a[0];
        if d.abs() < report.min_gap {
            report.min_gap = d.abs();
            report.min_gap_index = k;
        }
        let s = if d == 0.0 { 0.0 } else { d.signum() };
        if s != sign && report.first_meet.is_none() {
            report.first_meet = Some(k);
        }
        if s != prev_sign {
            report.sign_changes += 1;
        }
        prev_sign = s;
    }
    Ok(report)
}

/// Number of offending nodes listed in a summary.
const SUMMARY_VIOLATIONS: usize = 10;

/// Which lower estimate a report checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerBound {
    /// Scalar equations only.
    Scalar,
    /// The norm estimate claimed for triangular systems.
    Triangular,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub t_nodes: Vec<f64>,
    pub gap: Vec<f64>,
    pub lower_bound: Vec<f64>,
    pub upper_bound: Vec<f64>,
    pub violations_lower: usize,
    pub violations_upper: usize,
    pub tolerance_used: f64,
    pub lower_checked: bool,
    /// Node and ratio gap/lower of the worst lower-bound offender.
    pub worst_lower: Option<(usize, f64)>,
    /// Node and ratio gap/upper of the worst upper-bound offender.
    pub worst_upper: Option<(usize, f64)>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations_lower == 0 && self.violations_upper == 0
    }

    pub fn lower_violated(&self, k: usize) -> bool {
        self.lower_checked && self.gap[k] < (1.0 - self.tolerance_used) * self.lower_bound[k]
    }

    pub fn upper_violated(&self, k: usize) -> bool {
        let (g, up) = (self.gap[k], self.upper_bound[k]);
        if up == 0.0 {
            g > 0.0
        } else {
            up.is_finite() && g > (1.0 + self.tolerance_used) * up
        }
    }

    /// CSV with header `t,gap,lower,upper`.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let rows = (0..self.t_nodes.len())
            .map(|k| vec![self.t_nodes[k], self.gap[k], self.lower_bound[k], self.upper_bound[k]]);
        table::write_table(out, &["t", "gap", "lower", "upper"], rows)
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes: {}", self.t_nodes.len());
        let _ = writeln!(s, "tolerance: {}", table::fmt_f64(self.tolerance_used));
        let min_gap = self.gap.iter().copied().fold(f64::INFINITY, f64::min);
        let _ = writeln!(s, "min gap: {}", table::fmt_f64(min_gap));
        if self.lower_checked {
            let _ = writeln!(s, "lower-bound violations: {}", self.violations_lower);
            if let Some((k, r)) = self.worst_lower {
                let _ = writeln!(
                    s,
                    "  worst at t = {}: gap/lower = {}",
                    table::fmt_f64(self.t_nodes[k]),
                    table::fmt_f64(r)
                );
            }
        } else {
            let _ = writeln!(s, "lower bound: not checked");
        }
        let _ = writeln!(s, "upper-bound violations: {}", self.violations_upper);
        if let Some((k, r)) = self.worst_upper {
            let _ = writeln!(
                s,
                "  worst at t = {}: gap/upper = {}",
                table::fmt_f64(self.t_nodes[k]),
                table::fmt_f64(r)
            );
        }
        let listed: Vec<usize> = (0..self.gap.len())
            .filter(|&k| self.lower_violated(k) || self.upper_violated(k))
            .take(SUMMARY_VIOLATIONS)
            .collect();
        if !listed.is_empty() {
            let _ = writeln!(s, "violations (first {}):", listed.len());
        }
        for k in listed {
            let which = if self.lower_violated(k) { "lower" } else { "upper" };
            let _ = writeln!(
                s,
                "  {which} at t = {}: gap {} lower {} upper {}",
                table::fmt_f64(self.t_nodes[k]),
                table::fmt_f64(self.gap[k]),
                table::fmt_f64(self.lower_bound[k]),
                table::fmt_f64(self.upper_bound[k])
            );
        }
        let _ = writeln!(s, "status: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// E_α(s), saturating to +inf on overflow.
fn ml_or_inf(alpha: FractionalOrder, s: f64) -> Result<f64, MlError> {
    match ml_eval_real(alpha.ml(), s) {
        Err(MlError::Overflow { .. }) => Ok(f64::INFINITY),
        other => other,
    }
}

/// Lower and upper estimates per node for an initial gap `d0`.
pub fn bound_curves(
    alpha: FractionalOrder,
    d0: f64,
    t_nodes: &[f64],
    running_max: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), BoundsError> {
    let a = alpha.value();
    let pairs: Result<Vec<(f64, f64)>, MlError> = t_nodes
        .par_iter()
        .zip(running_max)
        .map(|(&t, &m)| {
            if t == 0.0 || m == 0.0 {
                return Ok((d0, d0));
            }
            let s = m * t.powf(a);
            Ok((d0 * ml_or_inf(alpha, -s)?, d0 * ml_or_inf(alpha, s)?))
        })
        .collect();
    Ok(pairs?.into_iter().unzip())
}

/// Per-node gap ‖x₂ − x₁‖ against both estimates, with relative slack
/// `tol`: a node violates the lower estimate if gap < (1 − tol)·lower and
/// the upper one if gap > (1 + tol)·upper. The lower estimate is checked
/// only for scalar trajectories.
pub fn verify_bounds(
    alpha: FractionalOrder,
    traj1: &Trajectory,
    traj2: &Trajectory,
    field: &VectorField,
    tol: f64,
) -> Result<BoundReport, BoundsError> {
    let mode = if traj1.dimension() == 1 {
        LowerBound::Scalar
    } else {
        LowerBound::Skip
    };
    verify_bounds_with(alpha, traj1, traj2, field, tol, mode)
}

pub fn verify_bounds_with(
    alpha: FractionalOrder,
    traj1: &Trajectory,
    traj2: &Trajectory,
    field: &VectorField,
    tol: f64,
    lower: LowerBound,
) -> Result<BoundReport, BoundsError> {
    same_grid(traj1, traj2)?;
    if traj1.dimension() != field.dimension() {
        return Err(BoundsError::DimensionMismatch {
            expected: field.dimension(),
            got: traj1.dimension(),
        });
    }
    if lower == LowerBound::Scalar && traj1.dimension() != 1 {
        return Err(BoundsError::DimensionMismatch {
            expected: 1,
            got: traj1.dimension(),
        });
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(BoundsError::InvalidTolerance(tol));
    }
    let t_nodes = traj1.grid().nodes();
    let profile = field.lipschitz_profile();
    let running = running_lipschitz_max(|t| profile(t), &t_nodes)?;
    let gap: Vec<f64> = traj1.states().iter().zip(traj2.states()).map(|(a, b)| norm_diff(a, b)).collect();
    let d0 = gap[0];
    let (mut lower_bound, upper_bound) = bound_curves(alpha, d0, &t_nodes, &running)?;
    let lower_checked = lower != LowerBound::Skip;
    if !lower_checked {
        lower_bound.iter_mut().for_each(|v| *v = 0.0);
    }

    let mut report = BoundReport {
        t_nodes,
        gap,
        lower_bound,
        upper_bound,
        violations_lower: 0,
        violations_upper: 0,
        tolerance_used: tol,
        lower_checked,
        worst_lower: None,
        worst_upper: None,
    };
    for k in 0..report.gap.len() {
        let g = report.gap[k];
        let lo = report.lower_bound[k];
        let up = report.upper_bound[k];
        if report.lower_violated(k) {
            report.violations_lower += 1;
        }
        if report.upper_violated(k) {
            report.violations_upper += 1;
        }
        if lower_checked && lo > 0.0 {
            let r = g / lo;
            if report.worst_lower.is_none_or(|(_, w)| r < w) {
                report.worst_lower = Some((k, r));
            }
        }
        if up > 0.0 && up.is_finite() {
            let r = g / up;
            if report.worst_upper.is_none_or(|(_, w)| r > w) {
                report.worst_upper = Some((k, r));
            }
        } else if up == 0.0 && g > 0.0 {
            report.violations_upper += 1;
        }
    }
    Ok(report)
}
