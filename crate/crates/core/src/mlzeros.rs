//! Complex zeros of the one-parameter Mittag-Leffler function E_α.
//!
//! Zeros are counted with the argument principle on circles and rectangles,
//! isolated by recursive subdivision and polished with Newton's method.
//! For 0 < α < 1, E_α has no real zeros, so zeros come in conjugate pairs.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::mlf::{ml_derivative, ml_eval, FractionalOrder, MlError};

/// Residual a zero must reach.
pub const ZERO_RESIDUAL: f64 = 1e-10;

/// Smallest |E_α| allowed on a counting contour.
pub const BOUNDARY_MIN_ABS: f64 = 1e-6;

const NEWTON_MAX_ITER: usize = 60;
const WINDING_MIN_NODES: usize = 64;
const WINDING_MAX_NODES: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZeroError {
    #[error("invalid search region: {0}")]
    InvalidRegion(String),
    #[error("E_alpha is too small on the contour (|E| = {min_abs:e} near {near})")]
    NearBoundary { min_abs: f64, near: Complex64 },
    #[error("winding number did not settle (last estimate {estimate})")]
    WindingUnresolved { estimate: Complex64 },
    #[error("Newton iteration from {seed} did not converge in {iterations} steps")]
    NewtonDiverged { seed: Complex64, iterations: usize },
    #[error("Newton converged to the real point {0}, but E_alpha has no real zeros for 0 < alpha < 1")]
    RealZero(Complex64),
    #[error("conjugate {0} of a zero is not a zero")]
    ConjugateMismatch(Complex64),
    #[error("no zero found within |z| <= {radius}")]
    NotFound { radius: f64 },
    #[error(transparent)]
    Ml(#[from] MlError),
}

/// Disk |z - center| < radius in which zeros are counted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroSearchRegion {
    pub center: Complex64,
    pub radius: f64,
    pub max_zeros: usize,
}

impl ZeroSearchRegion {
    pub fn new(center: Complex64, radius: f64, max_zeros: usize) -> Result<Self, ZeroError> {
        if !(center.re.is_finite() && center.im.is_finite()) {
            return Err(ZeroError::InvalidRegion(format!("centre {center} is not finite")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(ZeroError::InvalidRegion(format!("radius must be finite and positive, got {radius}")));
        }
        if max_zeros == 0 {
            return Err(ZeroError::InvalidRegion("max_zeros must be positive".into()));
        }
        Ok(Self {
            center,
            radius,
            max_zeros,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlZero {
    pub z_star: Complex64,
    /// |E_α(z_star)|
    pub residual: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Copy)]
enum Contour {
    Circle { center: Complex64, radius: f64 },
    Rect { lo: Complex64, hi: Complex64 },
}

impl Contour {
    /// Point and tangent at parameter s ∈ [0, 1).
    fn point(&self, s: f64) -> (Complex64, Complex64) {
        match *self {
            Contour::Circle { center, radius } => {
                let e = Complex64::from_polar(1.0, 2.0 * PI * s);
                (center + e * radius, Complex64::new(0.0, 2.0 * PI * radius) * e)
            }
            Contour::Rect { lo, hi } => {
                let w = hi.re - lo.re;
                let h = hi.im - lo.im;
                let perim = 2.0 * (w + h);
                let d = s * perim;
                if d < w {
                    (Complex64::new(lo.re + d, lo.im), Complex64::new(perim, 0.0))
                } else if d < w + h {
                    (Complex64::new(hi.re, lo.im + d - w), Complex64::new(0.0, perim))
                } else if d < 2.0 * w + h {
                    (Complex64::new(hi.re - (d - w - h), hi.im), Complex64::new(-perim, 0.0))
                } else {
                    (Complex64::new(lo.re, hi.im - (d - 2.0 * w - h)), Complex64::new(0.0, -perim))
                }
            }
        }
    }

    fn contains(&self, z: Complex64) -> bool {
        match *self {
            Contour::Circle { center, radius } => (z - center).norm() < radius,
            Contour::Rect { lo, hi } => z.re > lo.re && z.re < hi.re && z.im > lo.im && z.im < hi.im,
        }
    }

    fn center(&self) -> Complex64 {
        match *self {
            Contour::Circle { center, .. } => center,
            Contour::Rect { lo, hi } => (lo + hi) * 0.5,
        }
    }

    fn diameter(&self) -> f64 {
        match *self {
            Contour::Circle { radius, .. } => 2.0 * radius,
            Contour::Rect { lo, hi } => (hi - lo).norm(),
        }
    }

    // Rectangles have corners, so a trapezoid rule on them converges slowly;
    // only the phase count is used there.
    fn smooth(&self) -> bool {
        matches!(self, Contour::Circle { .. })
    }
}

struct Sample {
    e: Complex64,
    log_derivative: Complex64,
}

fn sample(alpha: FractionalOrder, contour: &Contour, n: usize) -> Result<Vec<Sample>, ZeroError> {
    let params = alpha.ml();
    (0..n)
        .into_par_iter()
        .map(|j| {
            let (z, dz) = contour.point(j as f64 / n as f64);
            let e = ml_eval(params, z)?.value;
            if e.norm() < BOUNDARY_MIN_ABS {
                return Err(ZeroError::NearBoundary {
                    min_abs: e.norm(),
                    near: z,
                });
            }
            let log_derivative = if contour.smooth() {
                ml_derivative(params, z)?.value / e * dz
            } else {
                Complex64::new(0.0, 0.0)
            };
            Ok(Sample { e, log_derivative })
        })
        .collect()
}

/// Net phase change of E along the sampled contour in turns, and the largest
/// single-step phase jump.
fn unwrapped_turns(samples: &[Sample]) -> (f64, f64) {
    let mut total = 0.0;
    let mut max_jump: f64 = 0.0;
    for j in 0..samples.len() {
        let a = samples[j].e;
        let b = samples[(j + 1) % samples.len()].e;
        let d = (b / a).arg();
        max_jump = max_jump.max(d.abs());
        total += d;
    }
    (total / (2.0 * PI), max_jump)
}

fn winding(alpha: FractionalOrder, contour: &Contour) -> Result<usize, ZeroError> {
    let mut n = WINDING_MIN_NODES;
    let mut previous: Option<i64> = None;
    loop {
        let samples = sample(alpha, contour, n)?;
        let (turns, max_jump) = unwrapped_turns(&samples);
        let phase_count = turns.round();
        // a phase step below π/4 cannot hide a full turn between nodes
        let phase_ok = max_jump < PI / 4.0 && (turns - phase_count).abs() < 1e-6;
        let count = if contour.smooth() {
            let integral: Complex64 = samples.iter().map(|s| s.log_derivative).sum::<Complex64>()
                / (n as f64 * Complex64::new(0.0, 2.0 * PI));
            let rounded = integral.re.round();
            let settled = (integral.re - rounded).abs() < 0.1 && integral.im.abs() < 0.1;
            if settled && phase_ok && rounded == phase_count {
                Some(rounded as i64)
            } else if n >= WINDING_MAX_NODES {
                return Err(ZeroError::WindingUnresolved { estimate: integral });
            } else {
                None
            }
        } else if phase_ok {
            Some(phase_count as i64)
        } else if n >= WINDING_MAX_NODES {
            return Err(ZeroError::WindingUnresolved {
                estimate: Complex64::new(turns, 0.0),
            });
        } else {
            None
        };
        if let Some(c) = count {
            // accept once two successive refinements agree
            if previous == Some(c) {
                return usize::try_from(c).map_err(|_| ZeroError::WindingUnresolved {
                    estimate: Complex64::new(c as f64, 0.0),
                });
            }
            previous = Some(c);
        } else {
            previous = None;
        }
        n *= 2;
    }
}

/// Number of zeros of E_α inside the region, counted with multiplicity.
pub fn count_zeros(alpha: FractionalOrder, region: &ZeroSearchRegion) -> Result<usize, ZeroError> {
    let n = winding(
        alpha,
        &Contour::Circle {
            center: region.center,
            radius: region.radius,
        },
    )?;
    Ok(n)
}

fn newton(alpha: FractionalOrder, seed: Complex64) -> Result<MlZero, ZeroError> {
    let params = alpha.ml();
    let mut z = seed;
    for it in 1..=NEWTON_MAX_ITER {
        let e = ml_eval(params, z)?.value;
        let d = ml_derivative(params, z)?.value;
        let mut step = e / d;
        // keep early steps from jumping to a far basin
        let cap = 0.5 * z.norm().max(1.0);
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) {
            break;
        }
        if step.norm() <= 4.0 * f64::EPSILON * z.norm().max(1.0) {
            let residual = ml_eval(params, z)?.value.norm();
            if residual <= ZERO_RESIDUAL {
                return Ok(MlZero {
                    z_star: z,
                    residual,
                    newton_iterations: it,
                });
            }
        }
        if it >= 3 && step.norm() <= 1e-13 * z.norm().max(1.0) {
            let residual = ml_eval(params, z)?.value.norm();
            if residual <= ZERO_RESIDUAL {
                return Ok(MlZero {
                    z_star: z,
                    residual,
                    newton_iterations: it,
                });
            }
        }
    }
    Err(ZeroError::NewtonDiverged {
        seed,
        iterations: NEWTON_MAX_ITER,
    })
}

/// Newton's method on E_α from `seed`. The conjugate of the result is
/// checked to be a zero as well.
pub fn find_zero(alpha: FractionalOrder, seed: Complex64) -> Result<MlZero, ZeroError> {
    let zero = newton(alpha, seed)?;
    if zero.z_star.im.abs() <= 1e-6 {
        return Err(ZeroError::RealZero(zero.z_star));
    }
    let conj = zero.z_star.conj();
    if ml_eval(alpha.ml(), conj)?.value.norm() > ZERO_RESIDUAL {
        return Err(ZeroError::ConjugateMismatch(conj));
    }
    Ok(zero)
}

fn split(contour: &Contour, frac: f64) -> [Contour; 4] {
    let Contour::Rect { lo, hi } = *contour else {
        unreachable!("only rectangles are subdivided")
    };
    let mx = lo.re + frac * (hi.re - lo.re);
    let my = lo.im + frac * (hi.im - lo.im);
    [
        Contour::Rect {
            lo,
            hi: Complex64::new(mx, my),
        },
        Contour::Rect {
            lo: Complex64::new(mx, lo.im),
            hi: Complex64::new(hi.re, my),
        },
        Contour::Rect {
            lo: Complex64::new(lo.re, my),
            hi: Complex64::new(mx, hi.im),
        },
        Contour::Rect {
            lo: Complex64::new(mx, my),
            hi,
        },
    ]
}

/// All zeros inside a rectangle already known to hold `count` of them.
fn isolate(alpha: FractionalOrder, cell: Contour, count: usize, depth: usize) -> Result<Vec<MlZero>, ZeroError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if count == 1 {
        if let Ok(z) = newton(alpha, cell.center()) {
            if cell.contains(z.z_star) {
                return Ok(vec![z]);
            }
        }
    }
    if depth > 40 || cell.diameter() < 1e-8 {
        // a multiple zero, or Newton keeps leaving the cell
        let z = newton(alpha, cell.center())?;
        return Ok(vec![z]);
    }
    let mut last_err = None;
    for frac in [0.5, 0.4617, 0.5383] {
        let children = split(&cell, frac);
        let counts: Result<Vec<usize>, ZeroError> = children.par_iter().map(|c| winding(alpha, c)).collect();
        match counts {
            Ok(counts) if counts.iter().sum::<usize>() == count => {
                let mut out = Vec::new();
                for (c, n) in children.iter().zip(counts) {
                    out.extend(isolate(alpha, *c, n, depth + 1)?);
                }
                return Ok(out);
            }
            Ok(counts) => {
                last_err = Some(ZeroError::WindingUnresolved {
                    estimate: Complex64::new(counts.iter().sum::<usize>() as f64, count as f64),
                })
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one split attempted"))
}

/// Largest radius on which E_α stays comfortably inside f64 range.
pub fn search_radius_limit(alpha: FractionalOrder) -> f64 {
    600f64.powf(alpha.value()).min(50.0)
}

/// The zero of E_α with positive imaginary part and smallest modulus.
///
/// A disk about the origin is grown by factors of 1.5 until it holds a
/// zero; the upper half of its bounding square is then subdivided until
/// every zero in it is isolated and polished.
pub fn smallest_upper_zero(alpha: FractionalOrder) -> Result<MlZero, ZeroError> {
    let limit = search_radius_limit(alpha);
    let mut radius: f64 = 1.0;
    loop {
        let region = ZeroSearchRegion::new(Complex64::new(0.0, 0.0), radius, usize::MAX)?;
        match count_zeros(alpha, &region) {
            Ok(n) if n > 0 => break,
            Ok(_) => {}
            Err(ZeroError::NearBoundary { .. }) => {
                radius *= 1.07;
                continue;
            }
            Err(e) => return Err(e),
        }
        if radius >= limit {
            return Err(ZeroError::NotFound { radius: limit });
        }
        radius = (radius * 1.5).min(limit);
    }

    // the real axis is zero-free, so the upper half-square carries half the zeros
    let mut side = radius;
    let (cell, count) = loop {
        let cell = Contour::Rect {
            lo: Complex64::new(-side, 0.0),
            hi: Complex64::new(side, side),
        };
        match winding(alpha, &cell) {
            Ok(n) => break (cell, n),
            Err(ZeroError::NearBoundary { .. }) => side *= 1.03,
            Err(e) => return Err(e),
        }
    };
    let zeros = isolate(alpha, cell, count, 0)?;
    let best = zeros
        .into_iter()
        .filter(|z| z.z_star.im > 0.0)
        .min_by(|a, b| a.z_star.norm().total_cmp(&b.z_star.norm()))
        .ok_or(ZeroError::NotFound { radius: side })?;
    find_zero(alpha, best.z_star)
}
