//! Globally adaptive 7/15-point Gauss-Kronrod quadrature and the tail rule
//! used to turn `int_0^inf` into a finite integral.

use crate::error::{Error, Result};

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

/// Gauss weights on the odd Kronrod nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Relative tolerance of every energy integral.
pub const DEFAULT_REL_TOL: f64 = 1e-8;
/// The tail rule truncates once the integrand is below this fraction of
/// its peak.
pub const TAIL_REL: f64 = 1e-10;
/// First horizon tried by the tail rule, in units of `1/gamma22`.
pub const TAIL_START: f64 = 20.0;
const MAX_DOUBLINGS: u32 = 40;
const MAX_INTERVALS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Segment { a, b, value, error }
}

/// Adaptive integration of `f` over consecutive breakpoints.
///
/// Subdivision always bisects the segment with the largest error estimate
/// until the summed estimate drops below `max(abs_tol, rel_tol |I|)`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    assert!(breaks.len() >= 2, "need at least one interval");
    let mut segs: Vec<Segment> = breaks.windows(2).map(|w| gk15(&f, w[0], w[1])).collect();
    loop {
        let value: f64 = segs.iter().map(|s| s.value).sum();
        let error: f64 = segs.iter().map(|s| s.error).sum();
        if value.is_finite() && error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadResult {
                value,
                error,
                intervals: segs.len(),
            });
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty");
        let s = segs[worst];
        let mid = 0.5 * (s.a + s.b);
        if !value.is_finite() || segs.len() >= MAX_INTERVALS || mid <= s.a || mid >= s.b {
            return Err(Error::Quadrature {
                a: breaks[0],
                b: *breaks.last().unwrap(),
                estimate: value,
                error,
                intervals: segs.len(),
            });
        }
        segs[worst] = gk15(&f, s.a, mid);
        segs.push(gk15(&f, mid, s.b));
    }
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<QuadResult> {
    integrate_with_breaks(f, &[a, b], rel_tol, abs_tol)
}

/// Breakpoints `0, s, 2s, 4s, ..., horizon` with `s = horizon / 2^k <= scale`.
///
/// Kernels have structure on the scale `1/gamma22` near the origin and
/// decay slowly for small intensities, so a dyadic partition keeps the
/// first Kronrod pass from stepping over the early transient.
pub fn dyadic_breaks(horizon: f64, scale: f64) -> Vec<f64> {
    let mut breaks = vec![horizon];
    let mut x = horizon;
    while x > scale {
        x *= 0.5;
        breaks.push(x);
    }
    breaks.push(0.0);
    breaks.reverse();
    breaks
}

/// Integration horizon and tail estimate for a decaying integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub t_max: f64,
    pub peak: f64,
    /// Largest `|f|` sampled in the last tenth of `[0, t_max]`.
    pub tail_max: f64,
}

impl Horizon {
    /// Bound on the neglected `int_{t_max}^inf |f|` for an integrand whose
    /// envelope decays at least at `rate`.
    pub fn tail_bound(&self, rate: f64) -> f64 {
        if rate > 0.0 {
            self.tail_max / rate
        } else {
            f64::INFINITY
        }
    }
}

const HORIZON_SAMPLES: usize = 64;

fn sampled_max<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    (0..=HORIZON_SAMPLES)
        .map(|k| f(a + (b - a) * k as f64 / HORIZON_SAMPLES as f64).abs())
        .fold(0.0, f64::max)
}

/// Doubles `t_max` from `start` until the integrand on `[0.9 t_max, t_max]`
/// stays below `rel` times its running peak.
pub fn find_horizon<F: Fn(f64) -> f64>(f: F, start: f64, rel: f64) -> Result<Horizon> {
    let mut t_max = start;
    let mut peak = 0.0f64;
    let mut lo = 0.0;
    for _ in 0..MAX_DOUBLINGS {
        // Finer sampling where the integrand is still rising.
        peak = peak.max(sampled_max(&f, lo, t_max)).max(sampled_max(&f, lo, lo + 0.05 * (t_max - lo)));
        let tail_max = sampled_max(&f, 0.9 * t_max, t_max);
        if peak == 0.0 || tail_max <= rel * peak {
            return Ok(Horizon { t_max, peak, tail_max });
        }
        lo = t_max;
        t_max *= 2.0;
    }
    Err(Error::Quadrature {
        a: 0.0,
        b: t_max,
        estimate: f64::NAN,
        error: f64::INFINITY,
        intervals: 0,
    })
}

/// `F(t_k) = int_0^{t_k} f(s) exp(-rate (t_k - s)) ds` on an increasing grid,
/// accumulated in one pass.
///
/// With `rate = 0` this is the plain running integral.
pub fn cumulative_damped<F: Fn(f64) -> f64>(f: F, rate: f64, times: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &t in times {
        if t < prev {
            return Err(Error::invalid("times", "must be non-decreasing and start at >= 0"));
        }
        if t > prev {
            let piece = integrate(|s| f(s) * (-rate * (t - s)).exp(), prev, t, rel_tol, 1e-300)?;
            acc = acc * (-rate * (t - prev)).exp() + piece.value;
            prev = t;
        }
        out.push(acc);
    }
    Ok(out)
}
