//! Closed-form readout: the symmetrized variables of both decoupled blocks,
//! the optical coherences, and the diffracted signals and energies.
//!
//! With `P = Omega_R' sigma_{1a,2}`, `Q = Omega_R sigma_{1b,2}` and
//! `T = Omega_R' Omega_R^* rho_{1a,1b}`, the readout equations split into a
//! block for the anti-Hermitian parts (`P - P^*`, ...) and a block for the
//! Hermitian parts together with the populations. Anti-Hermitian parts are
//! purely imaginary; they are stored here by their imaginary coefficient,
//! so `P - P^* = i * p_i`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{build_kernel, ReadoutKernel};
use crate::model::{IntensityParams, StoredState};
use crate::quad::{self, dyadic_breaks, find_horizon, integrate_with_breaks};

/// Samples in the default trace grid.
pub const DEFAULT_TRACE_POINTS: usize = 2001;
/// End of the default trace grid, in units of `1/gamma22`.
pub const DEFAULT_TRACE_END: f64 = 20.0;

/// Symmetrized readout variables at one instant.
///
/// `p_r = P + P^*`, `p_i = (P - P^*)/i`, likewise for `Q` and `T`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PQState {
    pub p_r: f64,
    pub p_i: f64,
    pub q_r: f64,
    pub q_i: f64,
    pub t_r: f64,
    pub t_i: f64,
    pub pop_a: f64,
    pub pop_b: f64,
}

impl PQState {
    pub fn from_complex(p: Complex64, q: Complex64, t: Complex64, pop_a: f64, pop_b: f64) -> Self {
        Self {
            p_r: 2.0 * p.re,
            p_i: 2.0 * p.im,
            q_r: 2.0 * q.re,
            q_i: 2.0 * q.im,
            t_r: 2.0 * t.re,
            t_i: 2.0 * t.im,
            pop_a,
            pop_b,
        }
    }

    pub fn p(&self) -> Complex64 {
        Complex64::new(self.p_r, self.p_i) / 2.0
    }

    pub fn q(&self) -> Complex64 {
        Complex64::new(self.q_r, self.q_i) / 2.0
    }
}

/// `T(0) = Omega_R' Omega_R^* rho_{1a,1b}(0)`; with both fields carrying the
/// factor `i` this is `|Omega_R| |Omega_R'| rho_{1a,1b}(0)`.
pub fn initial_t(intens: &IntensityParams, stored: &StoredState, gamma22: f64) -> Complex64 {
    let (r, rp) = intens.rabi(gamma22);
    r * rp * stored.coh
}

/// Anti-Hermitian block: `(p_i, q_i)` at time `t` from `t_i0 = (T - T^*)(0)/i`.
pub fn solve_system1(kernel: &ReadoutKernel, t_i0: f64, t: f64) -> (f64, f64) {
    let p_i = t_i0 * kernel.fr(t) / kernel.gamma22;
    (p_i, -p_i)
}

/// Hermitian block: `(p_r, q_r)` at time `t` from `t_r0 = (T + T^*)(0)`.
pub fn solve_system2(
    kernel: &ReadoutKernel,
    intens: &IntensityParams,
    stored: &StoredState,
    t_r0: f64,
    t: f64,
) -> (f64, f64) {
    let it = intens.i_t;
    if it == 0.0 {
        return (0.0, 0.0);
    }
    debug_assert!((kernel.i_t - it).abs() <= 1e-12 * it.max(1.0), "kernel built for another I_t");
    let g22 = kernel.gamma22;
    let diff = stored.population_difference();
    let t_r0 = t_r0 / (g22 * g22);
    let f_part = g22 * kernel.fr(t) * (intens.i_r * intens.i_rp / (4.0 * it) * diff + intens.i_d / it * t_r0);
    let g_common = g22 * kernel.gr(t) / (8.0 * it) * (it - intens.i_d * diff + 16.0 * t_r0);
    (f_part + g_common * intens.i_rp, -f_part + g_common * intens.i_r)
}

/// Full symmetrized state from the closed forms (populations and `T` are
/// not part of the closed-form solution and are left at zero).
pub fn pq_state(kernel: &ReadoutKernel, intens: &IntensityParams, stored: &StoredState, t: f64) -> PQState {
    let t0 = initial_t(intens, stored, kernel.gamma22);
    let (p_i, q_i) = solve_system1(kernel, 2.0 * t0.im, t);
    let (p_r, q_r) = solve_system2(kernel, intens, stored, 2.0 * t0.re, t);
    PQState {
        p_r,
        p_i,
        q_r,
        q_i,
        ..PQState::default()
    }
}

/// Optical coherences `(sigma_{1a,2}, sigma_{1b,2})` at time `t`.
///
/// A coherence whose driving field is off is reported as zero.
pub fn coherences(
    kernel: &ReadoutKernel,
    intens: &IntensityParams,
    stored: &StoredState,
    t: f64,
) -> (Complex64, Complex64) {
    let (r, rp) = intens.rabi(kernel.gamma22);
    let s = pq_state(kernel, intens, stored, t);
    let i = Complex64::i();
    let sigma_a = if rp > 0.0 { s.p() / (i * rp) } else { Complex64::default() };
    let sigma_b = if r > 0.0 { s.q() / (i * r) } else { Complex64::default() };
    (sigma_a, sigma_b)
}

/// Sampled diffracted signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTrace {
    pub times: Vec<f64>,
    pub s_d: Vec<f64>,
    pub s_dp: Vec<f64>,
    pub intens: IntensityParams,
    pub stored: StoredState,
}

impl PulseTrace {
    /// Trapezoidal energies of both channels over the sampled window.
    pub fn channel_energies(&self) -> (f64, f64) {
        (trapezoid(&self.times, &self.s_d), trapezoid(&self.times, &self.s_dp))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            s_d: self.s_d.iter().map(|v| v * c).collect(),
            s_dp: self.s_dp.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Retrieved energies of the two diffracted modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub u_d: f64,
    pub u_dp: f64,
    pub u_t: f64,
    pub quadrature_error: f64,
}

impl EnergyReport {
    pub fn new(u_d: f64, u_dp: f64, quadrature_error: f64) -> Self {
        Self {
            u_d,
            u_dp,
            u_t: u_d + u_dp,
            quadrature_error,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }
}

/// Uniform grid of `n` points on `[0, t_end]`.
pub fn uniform_times(t_end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Default trace grid: 2001 points on `[0, 20/gamma22]`.
pub fn default_times(gamma22: f64) -> Vec<f64> {
    uniform_times(DEFAULT_TRACE_END / gamma22, DEFAULT_TRACE_POINTS)
}

fn require_equal_populations(stored: &StoredState) -> Result<()> {
    if stored.has_equal_populations() {
        Ok(())
    } else {
        Err(Error::UnsupportedRegime(format!(
            "pulse signals assume equal writing drives (population difference {:.3e}); use solve_system2 for unequal populations",
            stored.population_difference()
        )))
    }
}

/// `(D, D')` field amplitudes without prefactors: `f I_R + g I_R'` and
/// `f I_R' + g I_R`.
fn mode_amplitudes(kernel: &ReadoutKernel, intens: &IntensityParams, t: f64) -> (f64, f64) {
    let f = kernel.fr(t);
    let g = kernel.gr(t);
    (f * intens.i_r + g * intens.i_rp, f * intens.i_rp + g * intens.i_r)
}

/// Diffracted signals for fast detectors on the grid `times`.
pub fn pulse_signals(
    intens: &IntensityParams,
    stored: &StoredState,
    times: &[f64],
    a_d: f64,
    a_dp: f64,
    gamma22: f64,
) -> Result<PulseTrace> {
    intens.validate()?;
    require_equal_populations(stored)?;
    if times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::invalid("times", "must be >= 0"));
    }
    let kernel = build_kernel(intens.i_t, gamma22)?;
    let (mut s_d, mut s_dp) = (Vec::with_capacity(times.len()), Vec::with_capacity(times.len()));
    let it2 = intens.i_t * intens.i_t;
    let vis = stored.visibility_factor();
    for &t in times {
        if intens.i_t == 0.0 {
            s_d.push(0.0);
            s_dp.push(0.0);
            continue;
        }
        let (d, dp) = mode_amplitudes(&kernel, intens, t);
        s_d.push(a_d * vis * intens.i_r / it2 * d * d);
        s_dp.push(a_dp * vis * intens.i_rp / it2 * dp * dp);
    }
    Ok(PulseTrace {
        times: times.to_vec(),
        s_d,
        s_dp,
        intens: *intens,
        stored: *stored,
    })
}

/// Energies in the two diffracted modes by adaptive quadrature of the
/// signals over `[0, T_max]`.
///
/// `T_max` comes from the tail rule ([`quad::find_horizon`]); the reported
/// error adds the Kronrod estimate and a bound on the truncated tail.
pub fn pulse_energies(
    intens: &IntensityParams,
    stored: &StoredState,
    b_d: f64,
    b_dp: f64,
    gamma22: f64,
) -> Result<EnergyReport> {
    intens.validate()?;
    require_equal_populations(stored)?;
    if intens.i_t == 0.0 {
        return Ok(EnergyReport::zero());
    }
    let kernel = build_kernel(intens.i_t, gamma22)?;
    let it2 = intens.i_t * intens.i_t;
    let vis = stored.visibility_factor();
    let w_d = b_d * vis * intens.i_r / it2;
    let w_dp = b_dp * vis * intens.i_rp / it2;
    let sd = |t: f64| {
        let (d, _) = mode_amplitudes(&kernel, intens, t);
        w_d * d * d
    };
    let sdp = |t: f64| {
        let (_, dp) = mode_amplitudes(&kernel, intens, t);
        w_dp * dp * dp
    };

    let horizon = find_horizon(|t| sd(t) + sdp(t), quad::TAIL_START / gamma22, quad::TAIL_REL)?;
    let breaks = dyadic_breaks(horizon.t_max, 1.0 / gamma22);
    let qd = integrate_with_breaks(sd, &breaks, quad::DEFAULT_REL_TOL, 0.0)?;
    let qdp = integrate_with_breaks(sdp, &breaks, quad::DEFAULT_REL_TOL, 0.0)?;
    let tail = horizon.tail_bound(2.0 * kernel.slowest_decay_rate());
    Ok(EnergyReport::new(qd.value, qdp.value, qd.error + qdp.error + tail))
}

/// Split-independent time integrals of the kernels at one total intensity.
///
/// Every energy in the model is a polynomial in `I_R`, `I_R'` with these
/// integrals as coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelMoments {
    pub i_t: f64,
    pub gamma22: f64,
    /// `int f_r^2 dt`
    pub ff: f64,
    /// `int f_r g_r dt`
    pub fg: f64,
    /// `int g_r^2 dt`
    pub gg: f64,
    /// `int (f_r - g_r)^2 dt`
    pub dd: f64,
    /// `int g_r dt`
    pub g: f64,
    pub error: f64,
}

/// Kernel integrals over `[0, inf)` with the same tail rule as
/// [`pulse_energies`].
pub fn kernel_moments(kernel: &ReadoutKernel) -> Result<KernelMoments> {
    let g22 = kernel.gamma22;
    if kernel.i_t == 0.0 {
        // f_r, g_r do not decay without light; every energy carries a factor
        // of the intensity and vanishes.
        return Ok(KernelMoments {
            i_t: 0.0,
            gamma22: g22,
            ff: 0.0,
            fg: 0.0,
            gg: 0.0,
            dd: 0.0,
            g: 0.0,
            error: 0.0,
        });
    }
    let horizon = find_horizon(
        |t| {
            let f = kernel.fr(t);
            let g = kernel.gr(t);
            f * f + g * g
        },
        quad::TAIL_START / g22,
        quad::TAIL_REL,
    )?;
    let breaks = dyadic_breaks(horizon.t_max, 1.0 / g22);
    let rtol = quad::DEFAULT_REL_TOL;
    let ff = integrate_with_breaks(|t| kernel.fr(t).powi(2), &breaks, rtol, 0.0)?;
    let gg = integrate_with_breaks(|t| kernel.gr(t).powi(2), &breaks, rtol, 0.0)?;
    let floor = 1e-12 * (ff.value + gg.value);
    let fg = integrate_with_breaks(|t| kernel.fr(t) * kernel.gr(t), &breaks, rtol, floor)?;
    let dd = integrate_with_breaks(|t| (kernel.fr(t) - kernel.gr(t)).powi(2), &breaks, rtol, floor)?;
    // g_r decays like its slowest root; its own horizon is longer than that
    // of g_r^2.
    let g_horizon = find_horizon(|t| kernel.gr(t), quad::TAIL_START / g22, quad::TAIL_REL)?;
    let g = integrate_with_breaks(
        |t| kernel.gr(t),
        &dyadic_breaks(g_horizon.t_max, 1.0 / g22),
        rtol,
        0.0,
    )?;
    let rate = kernel.slowest_decay_rate();
    Ok(KernelMoments {
        i_t: kernel.i_t,
        gamma22: g22,
        ff: ff.value,
        fg: fg.value,
        gg: gg.value,
        dd: dd.value,
        g: g.value,
        error: ff.error + fg.error + gg.error + dd.error + horizon.tail_bound(2.0 * rate),
    })
}

impl KernelMoments {
    pub fn compute(i_t: f64, gamma22: f64) -> Result<Self> {
        kernel_moments(&build_kernel(i_t, gamma22)?)
    }

    /// `int (a f + b g)^2 dt`.
    pub fn quadratic(&self, a: f64, b: f64) -> f64 {
        a * a * self.ff + 2.0 * a * b * self.fg + b * b * self.gg
    }

    /// Diffracted energies for a split of this moment set's total intensity.
    ///
    /// `i_r` must lie in `[0, i_t]`; the `R'` intensity is `i_t - i_r`.
    pub fn energies(&self, i_r: f64, b_d: f64, b_dp: f64, visibility: f64) -> EnergyReport {
        let it = self.i_t;
        if it == 0.0 {
            return EnergyReport::zero();
        }
        let i_rp = it - i_r;
        let it2 = it * it;
        let u_d = b_d * visibility * i_r / it2 * self.quadratic(i_r, i_rp);
        let u_dp = b_dp * visibility * i_rp / it2 * self.quadratic(i_rp, i_r);
        EnergyReport::new(u_d, u_dp, self.error * visibility * b_d.max(b_dp) * it)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StoredState;

    fn eq() -> StoredState {
        StoredState::equal_writing(1.0)
    }

    #[test]
    fn system1_is_antisymmetric() {
        let k = build_kernel(1.3, 1.0).unwrap();
        assert_eq!(solve_system1(&k, 0.0, 3.0), (0.0, 0.0));
        for &t in &[0.2, 1.0, 7.0] {
            let (p, q) = solve_system1(&k, 0.37, t);
            assert_eq!(p + q, 0.0);
        }
    }

    #[test]
    fn system2_without_r_prime() {
        let intens = IntensityParams::new(1.3, 0.0);
        let k = build_kernel(1.3, 1.0).unwrap();
        for &t in &[0.5, 2.0, 9.0] {
            assert_eq!(solve_system2(&k, &intens, &eq(), 0.0, t).0, 0.0);
        }
    }

    #[test]
    fn system2_ratio_for_equal_populations() {
        let intens = IntensityParams::new(0.4, 0.9);
        let k = build_kernel(intens.i_t, 1.0).unwrap();
        for &t in &[0.5, 2.0, 9.0] {
            let (p, q) = solve_system2(&k, &intens, &eq(), 0.0, t);
            assert!((p / q - 0.9 / 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn coherences_start_at_zero() {
        let intens = IntensityParams::new(0.6, 0.7);
        let k = build_kernel(intens.i_t, 1.0).unwrap();
        let (a, b) = coherences(&k, &intens, &eq().with_grating_phase(0.4), 0.0);
        assert!(a.norm() < 1e-15 && b.norm() < 1e-15);
    }

    #[test]
    fn equal_drives_give_equal_coherence_moduli() {
        let intens = IntensityParams::new(0.65, 0.65);
        let k = build_kernel(intens.i_t, 1.0).unwrap();
        for &t in &[0.3, 1.5, 6.0] {
            let (a, b) = coherences(&k, &intens, &eq(), t);
            assert!((a.norm() - b.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn coherence_missing_field_is_zero() {
        let intens = IntensityParams::new(0.0, 1.3);
        let k = build_kernel(1.3, 1.0).unwrap();
        let (_, b) = coherences(&k, &intens, &eq(), 2.0);
        assert_eq!(b, Complex64::default());
    }

    #[test]
    fn signals_without_r() {
        let intens = IntensityParams::new(0.0, 1.3);
        let trace = pulse_signals(&intens, &eq(), &default_times(1.0), 1.0, 1.0, 1.0).unwrap();
        assert!(trace.s_d.iter().all(|&v| v == 0.0));
        let k = build_kernel(1.3, 1.0).unwrap();
        for (t, s) in trace.times.iter().zip(&trace.s_dp).step_by(97) {
            // I_R'/I_t^2 |f I_R'|^2 = I_R' f^2
            assert!((s - 1.3 * k.fr(*t).powi(2)).abs() < 1e-13);
        }
    }

    #[test]
    fn signals_swap_under_exchange() {
        let times = default_times(1.0);
        let a = IntensityParams::new(0.4, 0.9);
        let ta = pulse_signals(&a, &eq(), &times, 1.0, 1.0, 1.0).unwrap();
        let tb = pulse_signals(&a.swapped(), &eq(), &times, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(ta.s_d, tb.s_dp);
        assert_eq!(ta.s_dp, tb.s_d);
        assert_eq!(ta.s_d[0], 0.0);
        assert!(ta.s_d.iter().chain(&ta.s_dp).all(|&v| v >= 0.0));
    }

    #[test]
    fn signals_reject_unequal_populations() {
        let stored = StoredState {
            pop_a: 0.2,
            pop_b: 0.8,
            coh: Complex64::new(-0.4, 0.0),
        };
        let r = pulse_signals(&IntensityParams::new(1.0, 1.0), &stored, &[0.0, 1.0], 1.0, 1.0, 1.0);
        assert!(matches!(r, Err(Error::UnsupportedRegime(_))));
        assert!(pulse_energies(&IntensityParams::new(1.0, 1.0), &stored, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn storage_decay_scales_signals() {
        let intens = IntensityParams::new(0.4, 0.9);
        let times = uniform_times(10.0, 11);
        let full = pulse_signals(&intens, &eq(), &times, 1.0, 1.0, 1.0).unwrap();
        let decayed = pulse_signals(&intens, &StoredState::equal_writing(0.5), &times, 1.0, 1.0, 1.0).unwrap();
        for (a, b) in full.s_d.iter().zip(&decayed.s_d) {
            assert!((0.25 * a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn energies_without_r() {
        let e = pulse_energies(&IntensityParams::new(0.0, 1.3), &eq(), 1.0, 1.0, 1.0).unwrap();
        assert_eq!(e.u_d, 0.0);
        assert_eq!(e.u_t, e.u_dp);
    }

    #[test]
    fn energies_exchange_symmetry() {
        let a = pulse_energies(&IntensityParams::new(0.3, 1.0), &eq(), 1.0, 1.0, 1.0).unwrap();
        let b = pulse_energies(&IntensityParams::new(1.0, 0.3), &eq(), 1.0, 1.0, 1.0).unwrap();
        assert!((a.u_d - b.u_dp).abs() < 1e-12 * a.u_d);
        assert!((a.u_t - b.u_t).abs() < 1e-8 * a.u_t);
    }

    #[test]
    fn moments_reproduce_direct_quadrature() {
        for &(it, ir) in &[(1.3, 0.0), (1.3, 0.65), (0.05, 0.01), (100.0, 30.0)] {
            let m = KernelMoments::compute(it, 1.0).unwrap();
            let via_moments = m.energies(ir, 1.0, 1.0, 1.0);
            let direct = pulse_energies(&IntensityParams::split(it, ir), &eq(), 1.0, 1.0, 1.0).unwrap();
            assert!(
                (via_moments.u_t - direct.u_t).abs() < 1e-7 * direct.u_t,
                "it={it}: {} vs {}",
                via_moments.u_t,
                direct.u_t
            );
        }
    }

    #[test]
    fn thirty_percent_dip_at_fit_intensity() {
        let m = KernelMoments::compute(1.3, 1.0).unwrap();
        let dip = 1.0 - m.energies(0.65, 1.0, 1.0, 1.0).u_t / m.energies(0.0, 1.0, 1.0, 1.0).u_t;
        assert!((dip - 0.2723).abs() < 1e-3, "dip {dip}");
    }
}
