#![allow(dead_code)]

use caputo_core::solver::VectorField;
use rand::Rng;

/// f(t, x) = a(1 + sin(ωt)/2)·sin(bx + c) + dx + e·cos(ωt), with the exact
/// Lipschitz profile L(t) = |ab|(1 + sin(ωt)/2) + |d|.
#[derive(Debug, Clone, Copy)]
pub struct RandomField {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub omega: f64,
}

impl RandomField {
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        Self {
            a: rng.gen_range(-1.0..1.0),
            b: rng.gen_range(0.5..2.0),
            c: rng.gen_range(0.0..std::f64::consts::PI),
            d: rng.gen_range(-1.0..1.0),
            e: rng.gen_range(-1.0..1.0),
            omega: rng.gen_range(0.0..3.0),
        }
    }

    pub fn field(self) -> VectorField {
        let Self { a, b, c, d, e, omega } = self;
        VectorField::new(
            1,
            move |t, x, out| out[0] = a * (1.0 + 0.5 * (omega * t).sin()) * (b * x[0] + c).sin() + d * x[0] + e * (omega * t).cos(),
            move |t| (a * b).abs() * (1.0 + 0.5 * (omega * t).sin()) + d.abs(),
        )
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
