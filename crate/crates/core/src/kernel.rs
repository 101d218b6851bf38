//! The two time kernels `f_r` and `g_r` that shape every retrieved pulse.
//!
//! `f_r` solves the antisymmetric block of the readout equations (a damped
//! two-level oscillation); `g_r` solves the block that carries the
//! populations and is a sum of three exponentials whose rates are the roots
//! of
//!
//! ```text
//! y^3 + (I_t/2 - 1/4) y - I_t/8 = 0,      r = y - 1/2.
//! ```
//!
//! Both kernels depend on the reading fields only through the total
//! intensity `I_t`, and on time only through `gamma22 * t`.
//!
//! The cubic is solved with Cardano's formula in complex arithmetic: for
//! small `I_t` the discriminant is negative and the real roots come out of
//! complex intermediates. The first cube root `s` takes the principal
//! branch; its partner is fixed by `s v = -p/3`, which selects the
//! branch pairing that actually solves the cubic for every `I_t >= 0`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Roots closer than this (relative to the largest root) trigger the
/// perturbation of `I_t` before evaluating `g_r`.
pub const DEGENERATE_ROOT_GAP: f64 = 1e-8;
/// Relative shift applied to `I_t` when the root pair `r2, r3` coalesces.
pub const DEGENERATE_SHIFT: f64 = 1e-9;
/// Below this `|x|`, `sinh(x)/x` is evaluated from its Taylor series.
pub const SINHC_SERIES_CUTOFF: f64 = 1e-4;

/// Cubic roots and evaluators for `f_r`, `g_r` at fixed total intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutKernel {
    /// Total intensity requested by the caller.
    pub i_t: f64,
    pub gamma22: f64,
    /// `(r1, r2, r3)`, decay rates of `g_r` in units of `gamma22`.
    pub roots: [Complex64; 3],
    /// Cardano cube roots `(s, v)`.
    pub aux: [Complex64; 2],
    /// `true` when `roots` were computed at a slightly shifted `I_t` to
    /// step off the double root of the cubic.
    pub perturbed: bool,
    /// `sqrt(1 - 2 I_t)`, complex above `I_t = 1/2`.
    sqrt_term: Complex64,
    /// Weights of `exp(r1 t) - exp(r2 t)` and `exp(r1 t) - exp(r3 t)` in `g_r`.
    g_weights: [Complex64; 2],
}

fn principal_cbrt(z: Complex64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        return z;
    }
    let (r, theta) = z.to_polar();
    Complex64::from_polar(r.cbrt(), theta / 3.0)
}

/// Cardano cube roots `(s, v)` for total intensity `i_t`.
fn cardano(i_t: f64) -> (Complex64, Complex64) {
    let p = i_t / 2.0 - 0.25;
    let shifted = i_t / 3.0 - 1.0 / 6.0;
    let disc = shifted * shifted * shifted / 8.0 + i_t * i_t / 256.0;
    let sq = Complex64::new(disc, 0.0).sqrt();
    let half_q = Complex64::new(i_t / 16.0, 0.0);
    let s = principal_cbrt(half_q + sq);
    let v = if s.norm() > 0.0 {
        -p / (3.0 * s)
    } else {
        principal_cbrt(half_q - sq)
    };
    (s, v)
}

fn roots_from(s: Complex64, v: Complex64) -> [Complex64; 3] {
    let i = Complex64::i();
    let sum = s + v;
    let diff = (3f64.sqrt() / 2.0) * (s - v) * i;
    [sum - 0.5, -sum / 2.0 - 0.5 + diff, -sum / 2.0 - 0.5 - diff]
}

fn max_norm(r: &[Complex64; 3]) -> f64 {
    r.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Cardano roots and kernel coefficients at total intensity `i_t`.
pub fn build_kernel(i_t: f64, gamma22: f64) -> Result<ReadoutKernel> {
    if !i_t.is_finite() || i_t < 0.0 {
        return Err(Error::invalid("i_t", format!("must be finite and >= 0, got {i_t}")));
    }
    if !gamma22.is_finite() || gamma22 <= 0.0 {
        return Err(Error::invalid("gamma22", format!("must be > 0, got {gamma22}")));
    }

    let (mut s, mut v) = cardano(i_t);
    let mut roots = roots_from(s, v);
    let mut perturbed = false;
    if (roots[1] - roots[2]).norm() < DEGENERATE_ROOT_GAP * max_norm(&roots) {
        (s, v) = cardano(i_t * (1.0 + DEGENERATE_SHIFT));
        roots = roots_from(s, v);
        perturbed = true;
    }

    let [r1, r2, r3] = roots;
    let g_weights = [
        (2.0 * r3 + 2.0 * r1 + 1.0) / (2.0 * (r2 - r1) * (r2 - r3)),
        (2.0 * r2 + 2.0 * r1 + 1.0) / (2.0 * (r3 - r1) * (r3 - r2)),
    ];

    Ok(ReadoutKernel {
        i_t,
        gamma22,
        roots,
        aux: [s, v],
        perturbed,
        sqrt_term: Complex64::new(1.0 - 2.0 * i_t, 0.0).sqrt(),
        g_weights,
    })
}

impl ReadoutKernel {
    /// `f_r(t)` evaluated in complex arithmetic; the imaginary part is
    /// rounding residue.
    pub fn fr_complex(&self, t: f64) -> Complex64 {
        let tau = self.gamma22 * t;
        let w = self.sqrt_term;
        let x = w * (tau / 4.0);
        if x.norm() < SINHC_SERIES_CUTOFF {
            let x2 = x * x;
            let sinhc = 1.0 + x2 / 6.0 + x2 * x2 / 120.0;
            return tau * (-tau / 4.0).exp() * sinhc;
        }
        if x.re < 20.0 {
            return tau * (-tau / 4.0).exp() * x.sinh() / x;
        }
        // sinh overflows long before the product does.
        let grow = ((w - 1.0) * (tau / 4.0)).exp();
        let decay = ((-w - 1.0) * (tau / 4.0)).exp();
        (grow - decay) / (w / 2.0)
    }

    /// `g_r(t)` evaluated in complex arithmetic.
    pub fn gr_complex(&self, t: f64) -> Complex64 {
        let tau = self.gamma22 * t;
        let [r1, r2, r3] = self.roots;
        let e1 = (r1 * tau).exp();
        self.g_weights[0] * (e1 - (r2 * tau).exp()) + self.g_weights[1] * (e1 - (r3 * tau).exp())
    }

    pub fn fr(&self, t: f64) -> f64 {
        self.fr_complex(t).re
    }

    pub fn gr(&self, t: f64) -> f64 {
        self.gr_complex(t).re
    }

    /// Sum of the three roots; `-3/2` identically.
    pub fn root_sum(&self) -> Complex64 {
        self.roots.iter().sum()
    }

    /// Exponential rates of `f_r` in units of `gamma22`.
    pub fn fr_rates(&self) -> [Complex64; 2] {
        [(self.sqrt_term - 1.0) / 4.0, (-self.sqrt_term - 1.0) / 4.0]
    }

    /// Slowest decay rate (per unit time) among the exponentials of `f_r`
    /// and `g_r`. Zero when `i_t = 0`.
    pub fn slowest_decay_rate(&self) -> f64 {
        self.fr_rates()
            .iter()
            .chain(self.roots.iter())
            .map(|r| -r.re)
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
            * self.gamma22
    }

    /// Time after which both kernel envelopes have fallen by `rel` from
    /// order-one amplitude.
    pub fn envelope_horizon(&self, rel: f64) -> f64 {
        let rate = self.slowest_decay_rate();
        if rate == 0.0 {
            return f64::INFINITY;
        }
        -rel.ln() / rate
    }
}

pub fn eval_fr(kernel: &ReadoutKernel, t: f64) -> f64 {
    kernel.fr(t)
}

pub fn eval_gr(kernel: &ReadoutKernel, t: f64) -> f64 {
    kernel.gr(t)
}
