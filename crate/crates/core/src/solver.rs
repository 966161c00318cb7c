//! Caputo initial value problems in Volterra form,
//!
//! x(t) = x₀ + Γ(α)⁻¹ ∫₀ᵗ (t − τ)^{α−1} f(τ, x(τ)) dτ,
//!
//! solved on uniform grids by the fractional Adams predictor–corrector
//! (product-rectangle predictor, product-trapezoid corrector, one
//! correction per step).

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::table;
use crate::gamma::gamma;
use crate::mlf::{ml_eval, FractionalOrder, MlError};

/// States whose magnitude exceeds this are treated as blow-up.
pub const BLOW_UP_LIMIT: f64 = 1e30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial value is not finite")]
    NonFiniteInitial,
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("solution left the finite range after node {last_valid}")]
    BlowUp {
        last_valid: usize,
        partial: Box<Trajectory>,
    },
    #[error(transparent)]
    Ml(#[from] MlError),
}

/// Uniform grid t_k = k·h on [0, t_end].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t_end: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self, SolveError> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(SolveError::InvalidGrid(format!("t_end must be finite and positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(SolveError::InvalidGrid("n_steps must be positive".into()));
        }
        Ok(Self { t_end, n_steps })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn h(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            k as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.node(k)).collect()
    }

    /// Index of the node equal to `t` (up to 1e-9 of a step), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.h();
        let k = x.round();
        if k >= 0.0 && k <= self.n_steps as f64 && (x - k).abs() <= 1e-9 {
            Some(k as usize)
        } else {
            None
        }
    }

    /// The grid on [0, node(k)] with the same step.
    pub fn prefix(&self, k: usize) -> Result<Grid, SolveError> {
        if k == 0 || k > self.n_steps {
            return Err(SolveError::InvalidGrid(format!("prefix length {k} out of 1..={}", self.n_steps)));
        }
        Grid::new(self.node(k), k)
    }
}

pub type Rhs = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
pub type Profile = dyn Fn(f64) -> f64 + Send + Sync;

/// Right-hand side f(t, x) on ℝ^d together with a Lipschitz bound L(t).
#[derive(Clone)]
pub struct VectorField {
    dimension: usize,
    rhs: Arc<Rhs>,
    lipschitz: Arc<Profile>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField").field("dimension", &self.dimension).finish_non_exhaustive()
    }
}

impl VectorField {
    /// `rhs(t, x, out)` writes f(t, x) into `out`.
    pub fn new<F, L>(dimension: usize, rhs: F, lipschitz: L) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        L: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        assert!(dimension > 0, "a vector field needs at least one dimension");
        Self {
            dimension,
            rhs: Arc::new(rhs),
            lipschitz: Arc::new(lipschitz),
        }
    }

    pub fn zero(dimension: usize) -> Self {
        Self::new(dimension, |_, _, out| out.fill(0.0), |_| 0.0)
    }

    /// f(t, x) = λ x in one dimension.
    pub fn scalar_linear(lambda: f64) -> Self {
        Self::new(1, move |_, x, out| out[0] = lambda * x[0], move |_| lambda.abs())
    }

    /// f(t, x) = A x with a constant square matrix, L = ‖A‖₂.
    pub fn linear(matrix: Vec<Vec<f64>>) -> Self {
        let d = matrix.len();
        assert!(matrix.iter().all(|r| r.len() == d), "matrix must be square");
        let norm = spectral_norm(&matrix);
        Self::new(
            d,
            move |_, x, out| {
                for (o, row) in out.iter_mut().zip(&matrix) {
                    *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            },
            move |_| norm,
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.rhs)(t, x, out)
    }

    pub fn lipschitz(&self, t: f64) -> f64 {
        (self.lipschitz)(t)
    }

    pub fn lipschitz_profile(&self) -> Arc<Profile> {
        Arc::clone(&self.lipschitz)
    }
}

/// Largest singular value by power iteration on AᵀA.
pub fn spectral_norm(a: &[Vec<f64>]) -> f64 {
    let d = a.len();
    if d == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut sigma2 = 0.0;
    for _ in 0..500 {
        let av: Vec<f64> = a.iter().map(|r| r.iter().zip(&v).map(|(x, y)| x * y).sum()).collect();
        let mut w = vec![0.0; d];
        for (i, row) in a.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                w[j] += x * av[i];
            }
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        let next = n;
        v = w.into_iter().map(|x| x / n).collect();
        if (next - sigma2).abs() <= 1e-15 * next {
            sigma2 = next;
            break;
        }
        sigma2 = next;
    }
    // pad slightly so the bound dominates the true norm
    sigma2.sqrt() * (1.0 + 1e-12)
}

/// A solution sampled on a grid: one state per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(grid: Grid, states: Vec<Vec<f64>>) -> Result<Self, SolveError> {
        if states.len() != grid.n_steps + 1 {
            return Err(SolveError::InvalidTrajectory(format!(
                "{} states for {} nodes",
                states.len(),
                grid.n_steps + 1
            )));
        }
        let d = states[0].len();
        if d == 0 || states.iter().any(|s| s.len() != d) {
            return Err(SolveError::InvalidTrajectory("states have inconsistent dimension".into()));
        }
        Ok(Self { grid, states })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn initial_value(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn dimension(&self) -> usize {
        self.states[0].len()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectories are never empty")
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[c]).collect()
    }

    /// The state at the grid node equal to `t`.
    pub fn at(&self, t: f64) -> Option<&[f64]> {
        self.grid.index_of(t).map(|k| self.state(k))
    }

    pub fn csv_header(&self) -> Vec<String> {
        std::iter::once("t".to_string())
            .chain((1..=self.dimension()).map(|i| format!("x{i}")))
            .collect()
    }

    fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.states.iter().enumerate().map(|(k, s)| {
            let mut row = Vec::with_capacity(s.len() + 1);
            row.push(self.grid.node(k));
            row.extend_from_slice(s);
            row
        })
    }

    /// CSV with header `t,x1,...,xd`.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let header = self.csv_header();
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        table::write_table(out, &refs, self.rows())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// (m+1)^p − m^p without cancellation.
fn forward_difference(p: f64, m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let m = m as f64;
    m.powf(p) * (p * (1.0 / m).ln_1p()).exp_m1()
}

/// (m+1)^p − 2m^p + (m−1)^p without cancellation, m ≥ 1.
fn second_difference(p: f64, m: usize) -> f64 {
    if m < 32 {
        let m = m as f64;
        return (m + 1.0).powf(p) - 2.0 * m.powf(p) + (m - 1.0).powf(p);
    }
    // m^p · 2 Σ_{k even} C(p, k) m^{-k}
    let x = 1.0 / m as f64;
    let mut binom = 1.0;
    let mut xk = 1.0;
    let mut sum = 0.0;
    for k in 1..40 {
        binom *= (p - (k - 1) as f64) / k as f64;
        xk *= x;
        if k % 2 == 0 {
            let term = binom * xk;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
    }
    2.0 * (m as f64).powf(p) * sum
}

/// Fractional Adams convolution weights for one (α, N) pair.
struct AdamsWeights {
    /// b_m = (m+1)^α − m^α
    predictor: Vec<f64>,
    /// (m+1)^{α+1} − 2m^{α+1} + (m−1)^{α+1}, index m ≥ 1
    corrector: Vec<f64>,
    pred_scale: f64,
    corr_scale: f64,
    alpha: f64,
}

impl AdamsWeights {
    fn new(alpha: f64, grid: &Grid) -> Self {
        let n = grid.n_steps;
        let ha = grid.h().powf(alpha);
        let mut corrector = vec![0.0; n + 1];
        for (m, c) in corrector.iter_mut().enumerate().skip(1) {
            *c = second_difference(alpha + 1.0, m);
        }
        Self {
            predictor: (0..=n).map(|m| forward_difference(alpha, m)).collect(),
            corrector,
            pred_scale: ha / gamma(alpha + 1.0),
            corr_scale: ha / gamma(alpha + 2.0),
            alpha,
        }
    }

    /// Weight of f_0 in the corrector for step n → n+1.
    fn corrector_first(&self, n: usize) -> f64 {
        let a = self.alpha;
        let n = n as f64;
        n.powf(a + 1.0) - (n - a) * (n + 1.0).powf(a)
    }
}

/// Core PECE loop. `rhs(k, t_k, x, out)` receives the node index so that
/// callers can couple to data known only at nodes.
pub(crate) fn pece<F>(
    alpha: FractionalOrder,
    dimension: usize,
    x0: &[f64],
    grid: &Grid,
    mut rhs: F,
) -> Result<Trajectory, SolveError>
where
    F: FnMut(usize, f64, &[f64], &mut [f64]),
{
    if x0.len() != dimension {
        return Err(SolveError::DimensionMismatch {
            expected: dimension,
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NonFiniteInitial);
    }
    let n_steps = grid.n_steps;
    let w = AdamsWeights::new(alpha.value(), grid);
    let d = dimension;

    // history of f per component, contiguous in time
    let mut hist: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps + 1); d];
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut fbuf = vec![0.0; d];
    rhs(0, 0.0, x0, &mut fbuf);
    for c in 0..d {
        hist[c].push(fbuf[c]);
    }
    states.push(x0.to_vec());

    let mut xp = vec![0.0; d];
    let mut corr_hist = vec![0.0; d];
    for n in 0..n_steps {
        let t_next = grid.node(n + 1);
        let a0 = w.corrector_first(n);
        for c in 0..d {
            let f = &hist[c][..=n];
            let pred: f64 = f.iter().zip(w.predictor[..=n].iter().rev()).map(|(a, b)| a * b).sum();
            // j = 1..=n pairs with m = n − j + 1 = n..=1
            let corr: f64 = f[1..].iter().zip(w.corrector[1..=n].iter().rev()).map(|(a, b)| a * b).sum();
            xp[c] = x0[c] + w.pred_scale * pred;
            corr_hist[c] = a0 * f[0] + corr;
        }
        rhs(n + 1, t_next, &xp, &mut fbuf);
        let mut x = vec![0.0; d];
        for c in 0..d {
            x[c] = x0[c] + w.corr_scale * (fbuf[c] + corr_hist[c]);
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_LIMIT) {
            return Err(blow_up(grid, states));
        }
        rhs(n + 1, t_next, &x, &mut fbuf);
        if fbuf.iter().any(|v| !v.is_finite()) {
            states.push(x);
            return Err(blow_up(grid, states));
        }
        for c in 0..d {
            hist[c].push(fbuf[c]);
        }
        states.push(x);
    }
    Trajectory::new(*grid, states)
}

fn blow_up(grid: &Grid, states: Vec<Vec<f64>>) -> SolveError {
    let last_valid = states.len() - 1;
    let partial = match grid.prefix(last_valid) {
        Ok(g) => Trajectory::new(g, states).expect("prefix matches state count"),
        // nothing beyond the initial value: keep it on a one-step grid
        Err(_) => {
            let g = Grid::new(grid.h(), 1).expect("positive step");
            let s = states[0].clone();
            Trajectory::new(g, vec![s.clone(), s]).expect("two states for one step")
        }
    };
    SolveError::BlowUp {
        last_valid,
        partial: Box::new(partial),
    }
}

/// Solves ^C D^α x = f(t, x), x(0) = x0 on `grid`.
pub fn solve_ivp(alpha: FractionalOrder, field: &VectorField, x0: &[f64], grid: &Grid) -> Result<Trajectory, SolveError> {
    pece(alpha, field.dimension, x0, grid, |_, t, x, out| field.eval(t, x, out))
}

/// E_α(λ t^α) x0, the exact solution of ^C D^α x = λ x.
pub fn solve_linear_ml(alpha: FractionalOrder, lambda: Complex64, x0: Complex64, t: f64) -> Result<Complex64, MlError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(MlError::NonFiniteArgument(Complex64::new(t, 0.0)));
    }
    if t == 0.0 {
        return Ok(x0);
    }
    let e = ml_eval(alpha.ml(), lambda * t.powf(alpha.value()))?;
    Ok(e.value * x0)
}

/// b^p − a^p for 0 ≤ a < b without cancellation.
fn power_increment(p: f64, a: f64, b: f64) -> f64 {
    if a <= 0.0 {
        b.powf(p)
    } else {
        a.powf(p) * (p * ((b - a) / a).ln_1p()).exp_m1()
    }
}

/// ∫ s^{α−1} ψ(s) ds for a hat ψ on [m−1, m+1] (peak 1 at m), clipped to
/// [0, k], in units of the grid step.
fn hat_weight(alpha: f64, m: usize, k: usize) -> f64 {
    let m_f = m as f64;
    let g1 = |a: f64, b: f64| power_increment(alpha, a, b) / alpha;
    let g2 = |a: f64, b: f64| power_increment(alpha + 1.0, a, b) / (alpha + 1.0);
    let mut w = 0.0;
    if m >= 1 {
        // rising side: ψ = s − (m − 1)
        let a = m_f - 1.0;
        w += g2(a, m_f) - a * g1(a, m_f);
    }
    if m < k {
        // falling side: ψ = (m + 1) − s
        let b = m_f + 1.0;
        w += b * g1(m_f, b) - g2(m_f, b);
    }
    w
}

/// max_k |x(t_k) − x₀ − Γ(α)⁻¹ Q_k| where Q_k integrates the kernel
/// against the piecewise-linear interpolant of f(t_j, x(t_j)).
pub fn volterra_residual(alpha: FractionalOrder, field: &VectorField, traj: &Trajectory) -> Result<f64, SolveError> {
    let d = field.dimension;
    if traj.dimension() != d {
        return Err(SolveError::DimensionMismatch {
            expected: d,
            got: traj.dimension(),
        });
    }
    let a = alpha.value();
    let grid = traj.grid();
    let n = grid.n_steps;
    let scale = grid.h().powf(a) / gamma(a);
    let mut f: Vec<Vec<f64>> = vec![vec![0.0; n + 1]; d];
    let mut buf = vec![0.0; d];
    for k in 0..=n {
        field.eval(grid.node(k), traj.state(k), &mut buf);
        for c in 0..d {
            f[c][k] = buf[c];
        }
    }
    // interior hat weights depend only on the distance m = k − j
    let interior: Vec<f64> = (0..=n).map(|m| hat_weight(a, m, m + 1)).collect();
    let x0 = traj.initial_value();
    let mut worst: f64 = 0.0;
    for k in 1..=n {
        let edge_first = hat_weight(a, k, k);
        let edge_last = hat_weight(a, 0, k);
        for c in 0..d {
            let fc = &f[c];
            let mut q = edge_first * fc[0] + edge_last * fc[k];
            q += fc[1..k].iter().zip(interior[1..k].iter().rev()).map(|(x, w)| x * w).sum::<f64>();
            let r = traj.state(k)[c] - x0[c] - scale * q;
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}
