//! Numerical toolkit for Caputo fractional differential equations of order
//! α ∈ (0, 1) and the nonlocal dynamical systems they generate.
//!
//! * [`mlf`]: two-parameter Mittag-Leffler function and its derivative
//! * [`mlzeros`]: complex zeros of E_α via the argument principle
//! * [`solver`]: fractional Adams predictor–corrector on uniform grids
//! * [`bounds`]: separation, convergence-rate and divergence-rate checks
//! * [`flow`]: evolution maps, their inversion and the two-parameter flow
//! * [`counterexample`]: a planar linear system whose solutions all meet

mod gamma;
mod quad;

pub mod bounds;
pub mod counterexample;
pub mod flow;
pub mod mlf;
pub mod mlzeros;
pub mod solver;
pub mod table;

pub use gamma::{gamma, ln_gamma, rgamma};
pub use mlf::{
    ml_derivative, ml_eval, ml_eval_real, FractionalOrder, MlError, MlParams, MlValue, Regime,
};
pub use num_complex::Complex64;
