//! Two-parameter Mittag-Leffler function
//!
//! E_{α,β}(z) = Σ_{k≥0} z^k / Γ(αk + β)
//!
//! Three evaluation regimes, selected on w = |z|^{1/α}:
//!
//! * **series** for small w, with a ratio-test tail bound and a rounding
//!   allowance proportional to Σ|terms|;
//! * **integral**: the Hankel-contour representation
//!   E_{α,β}(z) = (2πiα)^{-1} ∫_γ exp(ζ^{1/α}) ζ^{(1-β)/α} / (ζ - z) dζ (+ residue)
//!   with γ two rays arg ζ = ±θ joined by an arc |ζ| = ε, integrated by
//!   adaptive Gauss–Kronrod;
//! * **asymptotic**: optimally truncated expansion in 1/z plus the
//!   exponential term inside the sector |arg z| < απ.
//!
//! Every regime returns a concrete error estimate. `ml_eval` refuses to
//! return a value whose estimate exceeds 1e-10·max(1, |E|).
//!
//! Values are computed for Im z ≥ 0 and conjugated, so conjugate symmetry
//! holds exactly.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::gamma::rgamma;
use crate::quad;

/// Relative accuracy target: |error| ≤ ACCURACY · max(1, |E|).
pub const ACCURACY: f64 = 1e-10;

const EPS: f64 = f64::EPSILON;

/// Above this w the optimally truncated asymptotic series is accurate to
/// roughly e^{-w}.
const ASYMPTOTIC_MIN_W: f64 = 45.0;

/// Terms the series may use before giving up.
const SERIES_MAX_TERMS: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlError {
    #[error("fractional order must satisfy 0 < alpha < 1, got {0}")]
    InvalidOrder(f64),
    #[error("Mittag-Leffler parameter alpha must be in (0, 2), got {0}")]
    InvalidAlpha(f64),
    #[error("Mittag-Leffler parameter beta must be finite, got {0}")]
    InvalidBeta(f64),
    #[error("argument is not finite: {0}")]
    NonFiniteArgument(Complex64),
    #[error("E_{{{alpha},{beta}}}({z}) overflows f64")]
    Overflow { alpha: f64, beta: f64, z: Complex64 },
    #[error("{regime:?} evaluation at z = {z} has error estimate {estimate:e}, above target {target:e}")]
    AccuracyNotMet {
        regime: Regime,
        z: Complex64,
        estimate: f64,
        target: f64,
    },
    #[error("real-axis evaluation left imaginary part {imag:e} (value {real})")]
    ImaginaryResidue { real: f64, imag: f64 },
}

/// Fractional order α ∈ (0, 1) shared by every Caputo computation.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self, MlError> {
        if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(MlError::InvalidOrder(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Parameters of the one-parameter function E_α = E_{α,1}.
    pub fn ml(self) -> MlParams {
        MlParams {
            alpha: self.0,
            beta: 1.0,
        }
    }

    /// Parameters of E_{α,α}.
    pub fn ml_alpha_alpha(self) -> MlParams {
        MlParams {
            alpha: self.0,
            beta: self.0,
        }
    }
}

/// Parameters (α, β) of E_{α,β}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlParams {
    alpha: f64,
    beta: f64,
}

impl MlParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, MlError> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 2.0) {
            return Err(MlError::InvalidAlpha(alpha));
        }
        if !beta.is_finite() {
            return Err(MlError::InvalidBeta(beta));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Series,
    Asymptotic,
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlValue {
    pub value: Complex64,
    pub abs_error_estimate: f64,
    pub regime: Regime,
}

fn tolerance_for(value: Complex64) -> f64 {
    ACCURACY * value.norm().max(1.0)
}

/// Evaluates E_{α,β}(z).
pub fn ml_eval(params: MlParams, z: Complex64) -> Result<MlValue, MlError> {
    let regime = select_regime(params, z)?;
    let v = ml_eval_regime(params, z, regime)?;
    let v = with_fallback(params, v, |r| ml_eval_regime(params, z, r));
    enforce_target(z, v)
}

/// Evaluates d/dz E_{α,β}(z) with the same accuracy contract as [`ml_eval`].
pub fn ml_derivative(params: MlParams, z: Complex64) -> Result<MlValue, MlError> {
    let regime = select_regime(params, z)?;
    let v = derivative_regime(params, z, regime)?;
    let v = with_fallback(params, v, |r| derivative_regime(params, z, r));
    enforce_target(z, v)
}

/// Retries on the contour integral when the selected regime misses the target.
fn with_fallback<F>(params: MlParams, v: MlValue, eval: F) -> MlValue
where
    F: Fn(Regime) -> Result<MlValue, MlError>,
{
    if v.abs_error_estimate <= tolerance_for(v.value) || v.regime == Regime::Integral || params.alpha > 1.0 {
        return v;
    }
    match eval(Regime::Integral) {
        Ok(alt) if alt.abs_error_estimate < v.abs_error_estimate => alt,
        _ => v,
    }
}

/// Evaluates E_{α,β}(s) for real s. The imaginary part must vanish to
/// 1e-12 relative.
pub fn ml_eval_real(params: MlParams, s: f64) -> Result<f64, MlError> {
    let v = ml_eval(params, Complex64::new(s, 0.0))?;
    if v.value.im.abs() > 1e-12 * v.value.re.abs().max(1.0) {
        return Err(MlError::ImaginaryResidue {
            real: v.value.re,
            imag: v.value.im,
        });
    }
    Ok(v.value.re)
}

fn enforce_target(z: Complex64, v: MlValue) -> Result<MlValue, MlError> {
    if !(v.value.re.is_finite() && v.value.im.is_finite()) {
        return Err(MlError::NonFiniteArgument(z));
    }
    let target = tolerance_for(v.value);
    if !(v.abs_error_estimate <= target) {
        return Err(MlError::AccuracyNotMet {
            regime: v.regime,
            z,
            estimate: v.abs_error_estimate,
            target,
        });
    }
    Ok(v)
}

fn check_argument(z: Complex64) -> Result<(), MlError> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(MlError::NonFiniteArgument(z))
    }
}

/// Largest w = |z|^{1/α} for which the series rounding allowance
/// (≈ eps · (2w/α + 4) · E_{α}(|z|)) stays two orders below the target.
fn series_fits(alpha: f64, w: f64) -> bool {
    let peak_terms = 2.0 * w / alpha + 4.0;
    let sum_abs = w.exp() / alpha.min(1.0);
    EPS * peak_terms * sum_abs <= 1e-2 * ACCURACY
}

fn select_regime(params: MlParams, z: Complex64) -> Result<Regime, MlError> {
    check_argument(z)?;
    let alpha = params.alpha;
    let w = z.norm().powf(1.0 / alpha);
    if series_fits(alpha, w) || alpha > 1.0 {
        Ok(Regime::Series)
    } else if w >= ASYMPTOTIC_MIN_W {
        Ok(Regime::Asymptotic)
    } else {
        Ok(Regime::Integral)
    }
}

/// Evaluates in a prescribed regime without enforcing the accuracy target.
/// The estimate is still reported honestly; used to compare regimes.
pub fn ml_eval_regime(params: MlParams, z: Complex64, regime: Regime) -> Result<MlValue, MlError> {
    check_argument(z)?;
    let upper = z.im < 0.0;
    let zz = if upper { z.conj() } else { z };
    let mut v = match regime {
        Regime::Series => series(params, zz, false)?,
        Regime::Integral => {
            if params.alpha > 1.0 {
                return Err(unsupported(z, regime));
            }
            integral(params, zz)?
        }
        Regime::Asymptotic => {
            if params.alpha > 1.0 {
                return Err(unsupported(z, regime));
            }
            asymptotic(params, zz)
        }
    };
    if !(v.value.re.is_finite() && v.value.im.is_finite()) {
        return Err(MlError::Overflow {
            alpha: params.alpha,
            beta: params.beta,
            z,
        });
    }
    if z.im == 0.0 {
        // E_{α,β} is real on the real axis
        v.value.im = 0.0;
    } else if upper {
        v.value = v.value.conj();
    }
    Ok(v)
}

// only the series is implemented for 1 < α < 2
fn unsupported(z: Complex64, regime: Regime) -> MlError {
    MlError::AccuracyNotMet {
        regime,
        z,
        estimate: f64::INFINITY,
        target: ACCURACY,
    }
}

fn derivative_regime(params: MlParams, z: Complex64, regime: Regime) -> Result<MlValue, MlError> {
    if regime == Regime::Series {
        check_argument(z)?;
        let upper = z.im < 0.0;
        let zz = if upper { z.conj() } else { z };
        let mut v = series(params, zz, true)?;
        if !(v.value.re.is_finite() && v.value.im.is_finite()) {
            return Err(MlError::Overflow {
                alpha: params.alpha,
                beta: params.beta,
                z,
            });
        }
        if z.im == 0.0 {
            v.value.im = 0.0;
        } else if upper {
            v.value = v.value.conj();
        }
        return Ok(v);
    }
    // d/dz E_{α,β}(z) = (E_{α,β-1}(z) - (β-1) E_{α,β}(z)) / (α z)
    let shifted = MlParams {
        alpha: params.alpha,
        beta: params.beta - 1.0,
    };
    let e_shift = ml_eval_regime(shifted, z, regime)?;
    let e = ml_eval_regime(params, z, regime)?;
    let scale = params.alpha * z.norm();
    let bm1 = params.beta - 1.0;
    let value = (e_shift.value - e.value * bm1) / (z * params.alpha);
    let err = (e_shift.abs_error_estimate + bm1.abs() * e.abs_error_estimate) / scale
        + 4.0 * EPS * (e_shift.value.norm() + bm1.abs() * e.value.norm()) / scale;
    Ok(MlValue {
        value,
        abs_error_estimate: err,
        regime,
    })
}

/// Taylor series of E_{α,β} (or of its derivative).
fn series(params: MlParams, z: Complex64, derivative: bool) -> Result<MlValue, MlError> {
    let MlParams { alpha, beta } = params;
    let r = z.norm();
    // coefficient index shift for the derivative: Σ (k+1) z^k / Γ(α(k+1)+β)
    let shift = if derivative { 1usize } else { 0 };
    let coef = |k: usize| -> f64 {
        let m = k + shift;
        let c = rgamma(alpha * m as f64 + beta);
        if derivative {
            m as f64 * c
        } else {
            c
        }
    };

    if r == 0.0 {
        let c = coef(0);
        return Ok(MlValue {
            value: Complex64::new(c, 0.0),
            abs_error_estimate: 2.0 * EPS * c.abs(),
            regime: Regime::Series,
        });
    }

    // Neumaier-compensated sum
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    let mut weighted_abs = 0.0;
    let mut zpow = Complex64::new(1.0, 0.0);
    let unit = z / r;
    let mut unit_pow = Complex64::new(1.0, 0.0);
    let mut log_mode = false;
    let mut prev_abs = f64::NAN;
    let mut tail_bound = f64::INFINITY;

    let mut k = 0usize;
    while k < SERIES_MAX_TERMS {
        let c = coef(k);
        let term = if log_mode {
            let m = k + shift;
            let x = alpha * m as f64 + beta;
            let (lg, sg) = crate::gamma::ln_gamma(x);
            let factor = if derivative { (m as f64).ln() } else { 0.0 };
            unit_pow * (sg * (k as f64 * r.ln() + factor - lg).exp())
        } else {
            zpow * c
        };
        let t_abs = term.norm();

        let new_sum = sum + term;
        for (s, t, cc) in [
            (sum.re, term.re, &mut comp.re),
            (sum.im, term.im, &mut comp.im),
        ] {
            let n = s + t;
            if s.abs() >= t.abs() {
                *cc += (s - n) + t;
            } else {
                *cc += (t - n) + s;
            }
        }
        sum = new_sum;
        weighted_abs += (4.0 + 2.0 * k as f64) * t_abs;

        // ratio test once the Gamma arguments are positive: |t_k / t_{k-1}|
        // is then nonincreasing in k
        let x_prev = alpha * (k + shift) as f64 + beta - alpha;
        if k > 0 && x_prev > 0.0 && prev_abs > 0.0 && t_abs > 0.0 {
            let ratio = t_abs / prev_abs;
            if ratio < 1.0 {
                // subsequent ratios are no larger than this one
                let next_bound = t_abs * ratio;
                let tail = next_bound / (1.0 - ratio);
                let scale = (sum + comp).norm().max(1.0);
                if tail <= 1e-3 * EPS * scale {
                    tail_bound = tail;
                    break;
                }
            }
        }
        prev_abs = t_abs;

        zpow *= z;
        unit_pow *= unit;
        if !log_mode && !(zpow.re.is_finite() && zpow.im.is_finite() && zpow.norm() < 1e280) {
            log_mode = true;
        }
        k += 1;
    }
    let value = sum + comp;
    if !tail_bound.is_finite() {
        return Ok(MlValue {
            value,
            abs_error_estimate: f64::INFINITY,
            regime: Regime::Series,
        });
    }
    // per-term rounding (powers, 1/Γ to ~1e-15) plus summation
    let rounding = 1e-15 * weighted_abs / 4.0 + EPS * weighted_abs + 2.0 * EPS * value.norm();
    Ok(MlValue {
        value,
        abs_error_estimate: tail_bound + rounding,
        regime: Regime::Series,
    })
}

/// ζ^p on the principal branch with ζ = ρ e^{iφ}.
fn polar_pow(rho: f64, phi: f64, p: f64) -> Complex64 {
    Complex64::from_polar(rho.powf(p), phi * p)
}

/// The exponential term (1/α) z^{(1-β)/α} exp(z^{1/α}).
fn exponential_term(alpha: f64, beta: f64, z: Complex64) -> Complex64 {
    let (r, phi) = z.to_polar();
    let s = polar_pow(r, phi, 1.0 / alpha);
    let pre = polar_pow(r, phi, (1.0 - beta) / alpha);
    // combine the exponent so large |s| and small prefactors do not over/underflow separately
    let log_mag = s.re + pre.norm().ln();
    let phase = s.im + pre.arg();
    Complex64::from_polar(log_mag.exp(), phase) / alpha
}

fn integral(params: MlParams, z: Complex64) -> Result<MlValue, MlError> {
    let MlParams { alpha, beta } = params;
    let (r, phi_z) = z.to_polar();
    let phi_z = phi_z.abs();
    if r == 0.0 {
        return series(params, z, false);
    }
    let sector = alpha * PI;
    let theta = if (phi_z - sector).abs() >= 0.2 * sector {
        sector
    } else {
        0.65 * sector
    };
    let eps_r = (0.5 * r).min(1.0);

    let residue = if phi_z < theta {
        exponential_term(alpha, beta, z)
    } else {
        Complex64::new(0.0, 0.0)
    };
    if !(residue.re.is_finite() && residue.im.is_finite()) {
        return Err(MlError::Overflow { alpha, beta, z });
    }
    let scale = residue.norm().max(1.0);
    let quad_tol = 1e-3 * ACCURACY * scale;

    let p = (1.0 - beta) / alpha;
    let inv_a = 1.0 / alpha;
    let norm_c = 1.0 / (2.0 * PI * alpha);

    // rays ζ = χ e^{±iθ}
    let ray_integrand = |chi: f64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for sgn in [1.0, -1.0] {
            let ang = sgn * theta;
            let zeta = Complex64::from_polar(chi, ang);
            let s = Complex64::from_polar(chi.powf(inv_a), ang * inv_a);
            let pre = polar_pow(chi, ang, p);
            let dir = Complex64::from_polar(1.0, ang);
            let val = s.exp() * pre * dir / (zeta - z);
            acc += val * sgn;
        }
        // divide by 2πiα
        acc * Complex64::new(0.0, -norm_c)
    };
    let decay = -(theta / alpha).cos();
    let chi_max = {
        let need = 46.0 + 2.0 * p.abs() + (1.0 + r).ln();
        (need / decay).powf(alpha).max(2.0 * r + 2.0)
    };
    let mut ray_value = Complex64::new(0.0, 0.0);
    let mut ray_err = 0.0;
    let mut ray_abs = 0.0;
    let mut converged = true;
    let mut cuts = vec![eps_r];
    if r > eps_r && r < chi_max {
        cuts.push(r);
    }
    cuts.push(chi_max);
    for w in cuts.windows(2) {
        let q = quad::integrate(ray_integrand, w[0], w[1], quad_tol / 2.0, 4000);
        ray_value += q.value;
        ray_err += q.error;
        ray_abs += q.abs_integral;
        converged &= q.converged;
    }

    // arc ζ = ε e^{iφ}, φ ∈ [-θ, θ]
    let arc_integrand = |ph: f64| -> Complex64 {
        let zeta = Complex64::from_polar(eps_r, ph);
        let s = Complex64::from_polar(eps_r.powf(inv_a), ph * inv_a);
        let pre = polar_pow(eps_r, ph, p + 1.0);
        s.exp() * pre / (zeta - z) * norm_c
    };
    let arc = quad::integrate(arc_integrand, -theta, theta, quad_tol / 2.0, 4000);
    converged &= arc.converged;

    let value = residue + ray_value + arc.value;
    let w = r.powf(inv_a);
    let rounding = 64.0 * EPS * (ray_abs + arc.abs_integral)
        + 8.0 * EPS * residue.norm() * (1.0 + w + p.abs() * r.ln().abs());
    let mut estimate = ray_err + arc.error + rounding;
    if !converged {
        estimate = estimate.max(f64::MIN_POSITIVE) * 10.0;
    }
    Ok(MlValue {
        value,
        abs_error_estimate: estimate,
        regime: Regime::Integral,
    })
}

fn asymptotic(params: MlParams, z: Complex64) -> MlValue {
    let MlParams { alpha, beta } = params;
    let (r, phi_z) = z.to_polar();
    let phi_z = phi_z.abs();
    let sector = alpha * PI;
    let w = r.powf(1.0 / alpha);

    let exp_term = if phi_z < sector {
        exponential_term(alpha, beta, z)
    } else {
        Complex64::new(0.0, 0.0)
    };
    // near the Stokes line the exponential is switched on smoothly; its
    // size bounds the uncertainty there
    let stokes = if (phi_z - sector).abs() < 0.3 * sector {
        let mag = (w * (phi_z / alpha).cos()).exp() * r.powf((1.0 - beta) / alpha) / alpha;
        mag
    } else {
        0.0
    };

    // 1/Γ(β-αk) oscillates through zeros; truncation is decided on the
    // envelope Γ(αk+1-β)/π · |z|^{-k}, which bounds |1/Γ(β-αk)| · |z|^{-k}
    // once β - αk < 0.
    let zinv = z.inv();
    let ln_r = r.ln();
    let mut zpow = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    let mut remainder = f64::INFINITY;
    let mut prev_env = f64::INFINITY;
    for k in 1..=20_000usize {
        zpow *= zinv;
        let x = beta - alpha * k as f64;
        let c = rgamma(x);
        let term = zpow * c;
        let env = if x <= 0.0 {
            let (lg, _) = crate::gamma::ln_gamma(1.0 - x);
            (lg - PI.ln() - k as f64 * ln_r).exp().max(term.norm())
        } else {
            term.norm()
        };
        if x <= 0.0 && env > prev_env {
            // optimal truncation: stop before the envelope grows
            remainder = env;
            break;
        }
        if env < 1e-3 * EPS * (sum + exp_term).norm().max(f64::MIN_POSITIVE) {
            remainder = env;
            break;
        }
        sum -= term;
        abs_sum += term.norm();
        if x <= 0.0 {
            prev_env = env;
        }
    }
    let value = exp_term + sum;
    let rounding = 8.0 * EPS * (abs_sum + exp_term.norm() * (1.0 + w));
    MlValue {
        value,
        abs_error_estimate: 2.0 * remainder + stokes + rounding,
        regime: Regime::Asymptotic,
    }
}
