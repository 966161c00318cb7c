//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    /// ∫|f|, used for rounding allowances.
    pub abs_integral: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    abs_value: f64,
}

fn kronrod15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Segment {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_k = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        let pair = f1 + f2;
        kron += pair * WGK[j];
        abs_k += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kron * half;
    let raw_err = ((kron - gauss) * half).norm();
    // QUADPACK-style rescaling of the Kronrod/Gauss difference
    let error = if raw_err > 0.0 {
        let scaled = (200.0 * raw_err / (abs_k * half.abs()).max(f64::MIN_POSITIVE)).powf(1.5);
        raw_err.max((abs_k * half.abs()) * scaled.min(1.0))
    } else {
        0.0
    };
    Segment {
        a,
        b,
        value,
        error,
        abs_value: abs_k * half.abs(),
    }
}

/// Integrates `f` over `[a, b]` until the summed error estimate drops below
/// `abs_tol`, or `max_segments` is reached.
pub(crate) fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_segments: usize,
) -> QuadResult {
    let mut segments = vec![kronrod15(&f, a, b)];
    loop {
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !error.is_finite() {
            return QuadResult {
                value: segments.iter().map(|s| s.value).sum(),
                error: f64::INFINITY,
                abs_integral: f64::INFINITY,
                converged: false,
            };
        }
        if error <= abs_tol || segments.len() >= max_segments {
            let value = segments.iter().map(|s| s.value).sum();
            let abs_integral = segments.iter().map(|s| s.abs_value).sum();
            return QuadResult {
                value,
                error,
                abs_integral,
                converged: error <= abs_tol,
            };
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, s)| if s.error > acc.1 { (i, s.error) } else { acc });
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            // interval cannot be split further in f64
            segments.push(seg);
            let value = segments.iter().map(|s| s.value).sum();
            let abs_integral = segments.iter().map(|s| s.abs_value).sum();
            return QuadResult {
                value,
                error,
                abs_integral,
                converged: false,
            };
        }
        segments.push(kronrod15(&f, seg.a, mid));
        segments.push(kronrod15(&f, mid, seg.b));
    }
}
