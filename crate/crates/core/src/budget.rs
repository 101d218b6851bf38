//! Where the readout energy goes: spontaneous emission, stimulated emission
//! into the reading modes, and the non-phase-matched polarization.
//!
//! All proportionality constants are 1; the numbers are meaningful as
//! shapes and ratios.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernel::build_kernel;
use crate::model::IntensityParams;
use crate::quad::cumulative_damped;
use crate::readout::KernelMoments;

const CUMULATIVE_REL_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionBudget {
    /// `gamma22 * int rho22 dt` for the grating-averaged excited population.
    pub u_spont: f64,
    pub u_stim_r: f64,
    pub u_stim_rp: f64,
    pub u_stim_total: f64,
    pub u_npm_a: f64,
    pub u_npm_b: f64,
    pub u_npm_total: f64,
    pub intens: IntensityParams,
}

/// Grating-averaged excited population on an increasing grid,
/// `(gamma22 I_t / 8) int_0^t g_r(t') exp(-gamma22 (t - t')) dt'`.
///
/// Assumes equal writing drives; the result depends on `i_t` only.
pub fn excited_population_curve(i_t: f64, gamma22: f64, times: &[f64]) -> Result<Vec<f64>> {
    let kernel = build_kernel(i_t, gamma22)?;
    let scale = gamma22 * i_t / 8.0;
    if i_t == 0.0 {
        return Ok(vec![0.0; times.len()]);
    }
    let conv = cumulative_damped(|s| kernel.gr(s), gamma22, times, CUMULATIVE_REL_TOL)?;
    Ok(conv.into_iter().map(|c| scale * c).collect())
}

/// `(U_R, U_R', U_T^S) = (I_R, I_R', I_t) * int g_r^2 dt`.
pub fn stimulated_energies(intens: &IntensityParams, gamma22: f64) -> Result<(f64, f64, f64)> {
    intens.validate()?;
    let m = KernelMoments::compute(intens.i_t, gamma22)?;
    Ok(stimulated_from(&m, intens))
}

fn stimulated_from(m: &KernelMoments, intens: &IntensityParams) -> (f64, f64, f64) {
    (intens.i_r * m.gg, intens.i_rp * m.gg, intens.i_t * m.gg)
}

/// `U_a = I_R'^2 I_R / I_t^2 J`, `U_b = I_R^2 I_R' / I_t^2 J` and their sum
/// `I_R I_R' / I_t J`, with `J = int (f_r - g_r)^2 dt`.
pub fn nonphasematched_energies(intens: &IntensityParams, gamma22: f64) -> Result<(f64, f64, f64)> {
    intens.validate()?;
    let m = KernelMoments::compute(intens.i_t, gamma22)?;
    Ok(nonphasematched_from(&m, intens))
}

fn nonphasematched_from(m: &KernelMoments, intens: &IntensityParams) -> (f64, f64, f64) {
    let it = intens.i_t;
    if it == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let (ir, irp) = (intens.i_r, intens.i_rp);
    (
        irp * irp * ir / (it * it) * m.dd,
        ir * ir * irp / (it * it) * m.dd,
        ir * irp / it * m.dd,
    )
}

/// All channels for one split, from precomputed moments at its total
/// intensity.
pub fn budget_from_moments(m: &KernelMoments, intens: &IntensityParams) -> EmissionBudget {
    let (u_stim_r, u_stim_rp, u_stim_total) = stimulated_from(m, intens);
    let (u_npm_a, u_npm_b, u_npm_total) = nonphasematched_from(m, intens);
    EmissionBudget {
        u_spont: m.gamma22 * intens.i_t / 8.0 * m.g,
        u_stim_r,
        u_stim_rp,
        u_stim_total,
        u_npm_a,
        u_npm_b,
        u_npm_total,
        intens: *intens,
    }
}

pub fn full_budget(intens: &IntensityParams, gamma22: f64) -> Result<EmissionBudget> {
    intens.validate()?;
    let m = KernelMoments::compute(intens.i_t, gamma22)?;
    Ok(budget_from_moments(&m, intens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    /// `f_r - g_r` as a sum of five exponentials built directly from the
    /// cubic's roots and the quadratic's rates, then `int (f - g)^2` from
    /// `int e^{(a+b)t} = -1/(a+b)`.
    fn npm_integral_closed_form(i_t: f64) -> f64 {
        let k = build_kernel(i_t, 1.0).unwrap();
        let w = Complex64::new(1.0 - 2.0 * i_t, 0.0).sqrt();
        let mut terms: Vec<(Complex64, Complex64)> = vec![((w - 1.0) / 4.0, 2.0 / w), ((-w - 1.0) / 4.0, -2.0 / w)];
        let [r1, r2, r3] = k.roots;
        let c2 = (2.0 * r3 + 2.0 * r1 + 1.0) / (2.0 * (r2 - r1) * (r2 - r3));
        let c3 = (2.0 * r2 + 2.0 * r1 + 1.0) / (2.0 * (r3 - r1) * (r3 - r2));
        terms.push((r1, -(c2 + c3)));
        terms.push((r2, c2));
        terms.push((r3, c3));
        let mut sum = Complex64::default();
        for &(a, ca) in &terms {
            for &(b, cb) in &terms {
                sum -= ca * cb / (a + b);
            }
        }
        sum.re
    }

    #[test]
    fn npm_quadrature_matches_exponential_sum() {
        for &it in &[0.05, 1.3, 10.0] {
            let m = KernelMoments::compute(it, 1.0).unwrap();
            let want = npm_integral_closed_form(it);
            assert!(((m.dd - want) / want).abs() < 1e-7, "it={it}: {} vs {want}", m.dd);
        }
    }

    #[test]
    fn population_starts_empty() {
        let p = excited_population_curve(1.3, 1.0, &[0.0, 1.0]).unwrap();
        assert_eq!(p[0], 0.0);
        assert!(p[1] > 0.0);
    }

    #[test]
    fn zero_intensity_budget_vanishes() {
        let b = full_budget(&IntensityParams::new(0.0, 0.0), 1.0).unwrap();
        for v in [b.u_spont, b.u_stim_total, b.u_npm_total, b.u_npm_a] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn single_beam_has_no_npm_energy() {
        for intens in [IntensityParams::new(0.0, 1.3), IntensityParams::new(1.3, 0.0)] {
            let (a, b, t) = nonphasematched_energies(&intens, 1.0).unwrap();
            assert_eq!((a, b, t), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn stimulated_ratio_follows_intensities() {
        let (r, rp, t) = stimulated_energies(&IntensityParams::new(2.0, 8.0), 1.0).unwrap();
        assert!((r / rp - 0.25).abs() < 1e-14);
        assert!((r + rp - t).abs() < 1e-14 * t);
    }

    #[test]
    fn exchange_swaps_channels() {
        let a = full_budget(&IntensityParams::new(3.0, 7.0), 1.0).unwrap();
        let b = full_budget(&IntensityParams::new(7.0, 3.0), 1.0).unwrap();
        assert_eq!(a.u_stim_r, b.u_stim_rp);
        assert_eq!(a.u_npm_a, b.u_npm_b);
        assert_eq!(a.u_spont, b.u_spont);
    }

    #[test]
    fn npm_grows_toward_balance() {
        let m = KernelMoments::compute(100.0, 1.0).unwrap();
        let mid = budget_from_moments(&m, &IntensityParams::split(100.0, 50.0));
        let off = budget_from_moments(&m, &IntensityParams::split(100.0, 10.0));
        assert!(mid.u_npm_total > off.u_npm_total);
    }
}
