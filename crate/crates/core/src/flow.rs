//! Evolution maps Φ_{0,t} of Caputo equations and the two-parameter flow
//! Φ_{s,t} = Φ_{0,t} ∘ Φ_{0,s}⁻¹ they generate in one dimension and for
//! triangular systems.
//!
//! Scalar evolution maps are strictly increasing, so Φ_{0,t}⁻¹ is computed
//! by bisection. The initial bracket comes from the convergence-rate
//! estimate |Φ_{0,t}(x) − Φ_{0,t}(0)| ≥ |x|·E_α(−M_t t^α).

use std::io::{self, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::bounds::{running_lipschitz_max, BoundsError};
use crate::mlf::{ml_eval_real, FractionalOrder, MlError};
use crate::solver::{pece, solve_ivp, spectral_norm, Grid, Profile, SolveError, Trajectory, VectorField};
use crate::table;

/// Bracket doublings allowed beyond the a-priori radius.
pub const MAX_BRACKET_EXPANSIONS: usize = 60;

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("time {0} is not a grid node")]
    OffGrid(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix entry ({row}, {col}) above the diagonal is nonzero")]
    NotTriangular { row: usize, col: usize },
    #[error("tolerance must be finite and positive, got {0}")]
    InvalidTolerance(f64),
    #[error("no bracket found within radius {radius:e}")]
    BracketExhausted { radius: f64 },
    #[error("bisection stalled at residual {residual:e}")]
    NotConverged { residual: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Ml(#[from] MlError),
}

pub type Component = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// ^C D^α x_i = f_i(t, x_1, ..., x_i), i = 1..d, with one Lipschitz
/// profile shared by all components.
#[derive(Clone)]
pub struct TriangularSystem {
    components: Vec<Arc<Component>>,
    lipschitz: Arc<Profile>,
}

impl std::fmt::Debug for TriangularSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TriangularSystem").field("dimension", &self.dimension()).finish_non_exhaustive()
    }
}

impl TriangularSystem {
    /// Component i receives the slice (x_1, ..., x_i).
    pub fn new<L>(components: Vec<Arc<Component>>, lipschitz: L) -> Self
    where
        L: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        assert!(!components.is_empty(), "a triangular system needs at least one component");
        Self {
            components,
            lipschitz: Arc::new(lipschitz),
        }
    }

    /// x' = A x for a constant lower-triangular A, with L = ‖A‖₂.
    pub fn linear(matrix: Vec<Vec<f64>>) -> Result<Self, FlowError> {
        let d = matrix.len();
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != d {
                return Err(FlowError::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            if let Some(j) = (i + 1..d).find(|&j| row[j] != 0.0) {
                return Err(FlowError::NotTriangular { row: i, col: j });
            }
        }
        let norm = spectral_norm(&matrix);
        let components = matrix
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let coeffs: Vec<f64> = row[..=i].to_vec();
                Arc::new(move |_t: f64, x: &[f64]| coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                    as Arc<Component>
            })
            .collect();
        Ok(Self::new(components, move |_| norm))
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn lipschitz(&self, t: f64) -> f64 {
        (self.lipschitz)(t)
    }

    /// The same system as a coupled d-dimensional field.
    pub fn to_vector_field(&self) -> VectorField {
        let comps = self.components.clone();
        let profile = Arc::clone(&self.lipschitz);
        VectorField::new(
            self.dimension(),
            move |t, x, out| {
                for (i, f) in comps.iter().enumerate() {
                    out[i] = f(t, &x[..=i]);
                }
            },
            move |t| profile(t),
        )
    }
}

/// A flow evaluation Φ_{s,t}(x) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowQuery {
    pub s: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub grid: Grid,
}

fn node_index(grid: &Grid, t: f64) -> Result<usize, FlowError> {
    grid.index_of(t).ok_or(FlowError::OffGrid(t))
}

/// Φ_{0,t}(x0): the solver state at node t.
pub fn evolution_map(
    alpha: FractionalOrder,
    field: &VectorField,
    t: f64,
    x0: &[f64],
    grid: &Grid,
) -> Result<Vec<f64>, FlowError> {
    let k = node_index(grid, t)?;
    if x0.len() != field.dimension() {
        return Err(FlowError::DimensionMismatch {
            expected: field.dimension(),
            got: x0.len(),
        });
    }
    if k == 0 {
        return Ok(x0.to_vec());
    }
    let traj = solve_ivp(alpha, field, x0, &grid.prefix(k)?)?;
    Ok(traj.last().to_vec())
}

/// Result of inverting a scalar evolution map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub x0: f64,
    /// |Φ_{0,t}(x0) − x*|
    pub residual: f64,
    pub evaluations: usize,
}

/// Bisection for Φ(x0) = x* with Φ increasing. `contraction` is a lower
/// bound for the slope of Φ.
fn invert_monotone<P>(phi: P, x_star: f64, contraction: f64, tol: f64) -> Result<Inversion, FlowError>
where
    P: Fn(f64) -> Result<f64, FlowError>,
{
    if !(tol.is_finite() && tol > 0.0) {
        return Err(FlowError::InvalidTolerance(tol));
    }
    let mut evaluations = 1;
    let at_zero = phi(0.0)?;
    if (at_zero - x_star).abs() <= 0.0 {
        return Ok(Inversion {
            x0: 0.0,
            residual: 0.0,
            evaluations,
        });
    }
    // |x0| ≤ |x* − Φ(0)| / E_α(−M_t t^α), padded for discretisation error
    let mut radius = 1.1 * (x_star - at_zero).abs() / contraction + tol;
    let (mut lo, mut hi, mut f_lo, mut f_hi);
    let mut expansions = 0;
    loop {
        if x_star > at_zero {
            lo = 0.0;
            f_lo = at_zero;
            hi = radius;
            f_hi = phi(hi)?;
        } else {
            hi = 0.0;
            f_hi = at_zero;
            lo = -radius;
            f_lo = phi(lo)?;
        }
        evaluations += 1;
        if f_lo <= x_star && x_star <= f_hi {
            break;
        }
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS || !radius.is_finite() {
            return Err(FlowError::BracketExhausted { radius });
        }
        radius *= 2.0;
    }
    // the x-width that guarantees |x0 − x_true| ≤ tol and keeps the
    // slope bound meaningful
    let x_tol = tol * contraction.min(1.0);
    let mut best = if (f_lo - x_star).abs() < (f_hi - x_star).abs() {
        (lo, (f_lo - x_star).abs())
    } else {
        (hi, (f_hi - x_star).abs())
    };
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = phi(mid)?;
        evaluations += 1;
        let r = (f_mid - x_star).abs();
        if r < best.1 {
            best = (mid, r);
        }
        if f_mid < x_star {
            lo = mid;
        } else if f_mid > x_star {
            hi = mid;
        } else {
            return Ok(Inversion {
                x0: mid,
                residual: 0.0,
                evaluations,
            });
        }
        if hi - lo <= x_tol && best.1 <= tol {
            let x0 = 0.5 * (lo + hi);
            let residual = (phi(x0)? - x_star).abs();
            evaluations += 1;
            return Ok(if residual <= best.1 {
                Inversion {
                    x0,
                    residual,
                    evaluations,
                }
            } else {
                Inversion {
                    x0: best.0,
                    residual: best.1,
                    evaluations,
                }
            });
        }
    }
    if best.1 <= tol {
        return Ok(Inversion {
            x0: best.0,
            residual: best.1,
            evaluations,
        });
    }
    Err(FlowError::NotConverged { residual: best.1 })
}

/// E_α(−M_t t^α) on the grid up to node k.
fn contraction_factor(alpha: FractionalOrder, profile: &Profile, grid: &Grid, k: usize) -> Result<f64, FlowError> {
    let nodes: Vec<f64> = (0..=k).map(|j| grid.node(j)).collect();
    let m = *running_lipschitz_max(profile, &nodes)?.last().expect("at least one node");
    let t = grid.node(k);
    if m == 0.0 || t == 0.0 {
        return Ok(1.0);
    }
    Ok(ml_eval_real(alpha.ml(), -m * t.powf(alpha.value()))?)
}

/// Φ_{0,t}⁻¹(x*) for a scalar field.
pub fn invert_evolution_1d(
    alpha: FractionalOrder,
    field: &VectorField,
    t: f64,
    x_star: f64,
    grid: &Grid,
    tol: f64,
) -> Result<Inversion, FlowError> {
    if field.dimension() != 1 {
        return Err(FlowError::DimensionMismatch {
            expected: 1,
            got: field.dimension(),
        });
    }
    let k = node_index(grid, t)?;
    if k == 0 {
        return Ok(Inversion {
            x0: x_star,
            residual: 0.0,
            evaluations: 0,
        });
    }
    let prefix = grid.prefix(k)?;
    let profile = field.lipschitz_profile();
    let contraction = contraction_factor(alpha, &*profile, grid, k)?;
    invert_monotone(
        |x0| Ok(solve_ivp(alpha, field, &[x0], &prefix)?.last()[0]),
        x_star,
        contraction,
        tol,
    )
}

/// Φ_{s,t}(x) = Φ_{0,t}(Φ_{0,s}⁻¹(x)) for a scalar field, with the
/// inversion residual.
pub fn flow_map(alpha: FractionalOrder, field: &VectorField, query: &FlowQuery, tol: f64) -> Result<FlowRecord, FlowError> {
    if query.x.len() != 1 {
        return Err(FlowError::DimensionMismatch {
            expected: 1,
            got: query.x.len(),
        });
    }
    let inv = invert_evolution_1d(alpha, field, query.s, query.x[0], &query.grid, tol)?;
    let out = evolution_map(alpha, field, query.t, &[inv.x0], &query.grid)?;
    Ok(FlowRecord {
        s: query.s,
        t: query.t,
        x_in: query.x[0],
        x_out: out[0],
        residual: inv.residual,
    })
}

/// Restarts the equation at time s with x(s) = x and no memory of [0, s],
/// returning the state at t ≥ s. This is NOT the flow Φ_{s,t}.
pub fn restart_map(alpha: FractionalOrder, field: &VectorField, query: &FlowQuery) -> Result<Vec<f64>, FlowError> {
    let ks = node_index(&query.grid, query.s)?;
    let kt = node_index(&query.grid, query.t)?;
    if kt < ks {
        return Err(FlowError::OffGrid(query.t));
    }
    if kt == ks {
        return Ok(query.x.clone());
    }
    let s = query.s;
    let shifted = field.clone();
    let restarted = VectorField::new(field.dimension(), move |tau, x, out| shifted.eval(s + tau, x, out), |_| 0.0);
    let grid = Grid::new(query.grid.node(kt) - query.grid.node(ks), kt - ks)?;
    Ok(solve_ivp(alpha, &restarted, &query.x, &grid)?.last().to_vec())
}

/// One row of flow output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRecord {
    pub s: f64,
    pub t: f64,
    pub x_in: f64,
    pub x_out: f64,
    pub residual: f64,
}

/// CSV with header `s,t,x_in,x_out,residual`.
pub fn write_flow_csv<W: Write>(out: W, records: &[FlowRecord]) -> io::Result<()> {
    table::write_table(
        out,
        &["s", "t", "x_in", "x_out", "residual"],
        records.iter().map(|r| vec![r.s, r.t, r.x_in, r.x_out, r.residual]),
    )
}

/// Solves coordinate i with the already computed coordinates 1..i−1
/// substituted at the grid nodes.
fn solve_coordinate(
    alpha: FractionalOrder,
    system: &TriangularSystem,
    i: usize,
    known: &[Vec<f64>],
    x0: f64,
    grid: &Grid,
) -> Result<Vec<f64>, SolveError> {
    let f = &system.components[i];
    let mut args = vec![0.0; i + 1];
    let traj = pece(alpha, 1, &[x0], grid, |k, t, u, out| {
        for (a, coord) in args.iter_mut().zip(known) {
            *a = coord[k];
        }
        args[i] = u[0];
        out[0] = f(t, &args);
    })?;
    Ok(traj.component(0))
}

/// Coordinate-by-coordinate solution of a triangular system.
pub fn solve_triangular(
    alpha: FractionalOrder,
    system: &TriangularSystem,
    x0: &[f64],
    grid: &Grid,
) -> Result<Trajectory, FlowError> {
    let d = system.dimension();
    if x0.len() != d {
        return Err(FlowError::DimensionMismatch {
            expected: d,
            got: x0.len(),
        });
    }
    let mut coords: Vec<Vec<f64>> = Vec::with_capacity(d);
    for i in 0..d {
        let c = solve_coordinate(alpha, system, i, &coords, x0[i], grid)?;
        coords.push(c);
    }
    let states = (0..=grid.n_steps()).map(|k| coords.iter().map(|c| c[k]).collect()).collect();
    Ok(Trajectory::new(*grid, states)?)
}

/// Φ_{0,t}⁻¹(x*) for a triangular system, one coordinate at a time.
pub fn invert_evolution_triangular(
    alpha: FractionalOrder,
    system: &TriangularSystem,
    t: f64,
    x_star: &[f64],
    grid: &Grid,
    tol: f64,
) -> Result<Vec<Inversion>, FlowError> {
    let d = system.dimension();
    if x_star.len() != d {
        return Err(FlowError::DimensionMismatch {
            expected: d,
            got: x_star.len(),
        });
    }
    let k = node_index(grid, t)?;
    if k == 0 {
        return Ok(x_star
            .iter()
            .map(|&x| Inversion {
                x0: x,
                residual: 0.0,
                evaluations: 0,
            })
            .collect());
    }
    let prefix = grid.prefix(k)?;
    let contraction = contraction_factor(alpha, &*system.lipschitz, grid, k)?;
    let mut coords: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let inv = invert_monotone(
            |x0| {
                let c = solve_coordinate(alpha, system, i, &coords, x0, &prefix)?;
                Ok(*c.last().expect("nonempty"))
            },
            x_star[i],
            contraction,
            tol,
        )?;
        coords.push(solve_coordinate(alpha, system, i, &coords, inv.x0, &prefix)?);
        out.push(inv);
    }
    Ok(out)
}
