//! Direct integration of the readout Bloch equations and Fourier
//! decomposition over the grating phase.
//!
//! Nothing here uses the closed-form kernels; this module is the reference
//! the analytic readout is checked against.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::build_kernel;
use crate::model::{DriveConfig, IntensityParams, StoredState};
use crate::ode::{solve_dense, Stats, Tolerances};
use crate::quad::TAIL_REL;
use crate::readout::{EnergyReport, PQState};

pub const MIN_TOLERANCE: f64 = 1e-13;
pub const MAX_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_PHASES: usize = 16;
/// Slack allowed on `rho22 >= 0` and `|rho_ab| <= 1/2`.
pub const PHYSICALITY_SLACK: f64 = 1e-10;

/// Sampled solution of the readout equations at one grating phase.
#[derive(Debug, Clone)]
pub struct BlochTrajectory {
    pub times: Vec<f64>,
    pub rho_aa: Vec<f64>,
    pub rho_bb: Vec<f64>,
    pub sigma_a2: Vec<Complex64>,
    pub sigma_b2: Vec<Complex64>,
    pub rho_ab: Vec<Complex64>,
    pub drive: DriveConfig,
    pub stats: Stats,
}

// State layout: rho_aa, rho_bb, Re/Im sigma_{1a,2}, Re/Im sigma_{1b,2},
// Re/Im rho_{1a,1b}. rho22 = 1 - rho_aa - rho_bb.
type State = [f64; 8];

fn bloch_rhs(r: Complex64, rp: Complex64, gamma: f64) -> impl Fn(f64, &State) -> State {
    move |_, y| {
        let sa = Complex64::new(y[2], y[3]);
        let sb = Complex64::new(y[4], y[5]);
        let ab = Complex64::new(y[6], y[7]);
        let (aa, bb) = (y[0], y[1]);
        let e = 1.0 - aa - bb;
        let daa = -2.0 * (rp * sa).re + 0.5 * gamma * e;
        let dbb = -2.0 * (r * sb).re + 0.5 * gamma * e;
        let dsa = -rp.conj() * (e - aa) + r.conj() * ab - 0.5 * gamma * sa;
        let dsb = -r.conj() * (e - bb) + rp.conj() * ab.conj() - 0.5 * gamma * sb;
        let dab = -rp.conj() * sb.conj() - r * sa;
        [daa, dbb, dsa.re, dsa.im, dsb.re, dsb.im, dab.re, dab.im]
    }
}

fn check_tolerance(tol: f64) -> Result<()> {
    if (MIN_TOLERANCE..=MAX_TOLERANCE).contains(&tol) {
        Ok(())
    } else {
        Err(Error::invalid(
            "tolerance",
            format!("must lie in [{MIN_TOLERANCE:e}, {MAX_TOLERANCE:e}], got {tol:e}"),
        ))
    }
}

/// Integrates the readout equations from the stored state with empty
/// optical coherences and samples the result at `times`.
///
/// The stored coherence enters as `stored.coh * exp(i chi)` with
/// `chi = drive.grating_phase`; ground decay is neglected during readout.
pub fn integrate_bloch(
    drive: &DriveConfig,
    stored: &StoredState,
    times: &[f64],
    tolerance: f64,
) -> Result<BlochTrajectory> {
    drive.validate()?;
    check_tolerance(tolerance)?;
    if times.is_empty() || times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::invalid("times", "need at least one sample, all >= 0"));
    }
    let (r, rp) = drive.read_rabi();
    let ab0 = stored.coh * Complex64::from_polar(1.0, drive.grating_phase);
    let y0 = [stored.pop_a, stored.pop_b, 0.0, 0.0, 0.0, 0.0, ab0.re, ab0.im];
    let (ys, stats) = solve_dense(
        bloch_rhs(r, rp, drive.gamma22),
        0.0,
        y0,
        times,
        Tolerances::uniform(tolerance),
    )?;
    Ok(BlochTrajectory {
        times: times.to_vec(),
        rho_aa: ys.iter().map(|y| y[0]).collect(),
        rho_bb: ys.iter().map(|y| y[1]).collect(),
        sigma_a2: ys.iter().map(|y| Complex64::new(y[2], y[3])).collect(),
        sigma_b2: ys.iter().map(|y| Complex64::new(y[4], y[5])).collect(),
        rho_ab: ys.iter().map(|y| Complex64::new(y[6], y[7])).collect(),
        drive: *drive,
        stats,
    })
}

/// `n` evenly spaced samples on `[0, t_end]` (including both ends).
pub fn sample_grid(t_end: f64, n: usize) -> Vec<f64> {
    crate::readout::uniform_times(t_end, n)
}

impl BlochTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rho22(&self, k: usize) -> f64 {
        1.0 - self.rho_aa[k] - self.rho_bb[k]
    }

    /// Symmetrized variables built from the sampled density matrix.
    pub fn pq_state(&self, k: usize) -> PQState {
        let (r, rp) = self.drive.read_rabi();
        let p = rp * self.sigma_a2[k];
        let q = r * self.sigma_b2[k];
        let t = rp * r.conj() * self.rho_ab[k];
        PQState::from_complex(p, q, t, self.rho_aa[k], self.rho_bb[k])
    }

    /// Largest violation of `rho22 >= 0`, `rho22 <= 1`, populations in
    /// `[0, 1]` and `|rho_ab| <= 1/2`; zero for a physical trajectory.
    pub fn physicality_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.len() {
            let e = self.rho22(k);
            worst = worst
                .max(-e)
                .max(e - 1.0)
                .max(-self.rho_aa[k])
                .max(-self.rho_bb[k])
                .max(self.rho_aa[k] - 1.0)
                .max(self.rho_bb[k] - 1.0)
                .max(self.rho_ab[k].norm() - 0.5);
        }
        worst
    }

    pub fn is_physical(&self) -> bool {
        self.physicality_violation() <= PHYSICALITY_SLACK
    }
}

/// Harmonics `-1, 0, +1` over the grating phase of the two optical
/// coherences and of the excited population.
///
/// For a coherence sampled at `chi_k = 2 pi k / n`,
/// `h_m(t) = (1/n) sum_k sigma(t; chi_k) exp(-i m chi_k)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseHarmonics {
    pub times: Vec<f64>,
    pub n_phases: usize,
    /// Indexed by `m + 1`.
    pub sigma_a2: [Vec<Complex64>; 3],
    pub sigma_b2: [Vec<Complex64>; 3],
    pub rho22: [Vec<Complex64>; 3],
    /// Phase averages of `|sigma_{1a,2}|^2` and `|sigma_{1b,2}|^2`.
    pub power_a: Vec<f64>,
    pub power_b: Vec<f64>,
    /// Largest physicality violation over all phase points.
    pub physicality_violation: f64,
}

impl PhaseHarmonics {
    fn idx(m: i32) -> usize {
        assert!((-1..=1).contains(&m), "only harmonics -1, 0, +1 are kept");
        (m + 1) as usize
    }

    pub fn harmonic_a(&self, m: i32) -> &[Complex64] {
        &self.sigma_a2[Self::idx(m)]
    }

    pub fn harmonic_b(&self, m: i32) -> &[Complex64] {
        &self.sigma_b2[Self::idx(m)]
    }

    /// Component of `sigma_{1a,2}` that radiates the `D` field.
    pub fn phase_matched_a(&self) -> &[Complex64] {
        self.harmonic_a(1)
    }

    /// Component of `sigma_{1b,2}` that radiates the `D'` field. The
    /// `sigma_{1b,2}` equation is driven by the conjugate coherence, so the
    /// grating phase enters with the opposite sign.
    pub fn phase_matched_b(&self) -> &[Complex64] {
        self.harmonic_b(-1)
    }

    /// Non-phase-matched components of `(sigma_{1a,2}, sigma_{1b,2})`.
    pub fn non_phase_matched(&self) -> (&[Complex64], &[Complex64]) {
        (self.harmonic_a(-1), self.harmonic_b(1))
    }

    /// Phase-averaged excited population.
    pub fn mean_rho22(&self) -> Vec<f64> {
        self.rho22[1].iter().map(|z| z.re).collect()
    }

    /// Largest `sum_m |h_m|^2 - <|sigma|^2>` over both coherences and all
    /// times; non-positive up to rounding.
    pub fn parseval_excess(&self) -> f64 {
        let excess = |h: &[Vec<Complex64>; 3], p: &[f64]| {
            (0..p.len())
                .map(|k| h.iter().map(|v| v[k].norm_sqr()).sum::<f64>() - p[k])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        excess(&self.sigma_a2, &self.power_a).max(excess(&self.sigma_b2, &self.power_b))
    }
}

/// Runs [`integrate_bloch`] at `n_phases` evenly spaced grating phases and
/// decomposes the trajectories.
///
/// Phase points run in parallel; the reduction always visits them in index
/// order, so the output does not depend on scheduling.
pub fn phase_sweep(
    drive: &DriveConfig,
    stored: &StoredState,
    n_phases: usize,
    times: &[f64],
    tolerance: f64,
) -> Result<PhaseHarmonics> {
    if n_phases < 8 {
        return Err(Error::invalid("n_phases", format!("must be >= 8, got {n_phases}")));
    }
    let chis: Vec<f64> = (0..n_phases)
        .map(|k| std::f64::consts::TAU * k as f64 / n_phases as f64)
        .collect();
    let runs: Vec<BlochTrajectory> = chis
        .par_iter()
        .map(|&chi| {
            let d = DriveConfig {
                grating_phase: chi,
                ..*drive
            };
            integrate_bloch(&d, stored, times, tolerance)
        })
        .collect::<Result<_>>()?;

    let nt = times.len();
    let n = n_phases as f64;
    let zeros = || [vec![Complex64::default(); nt], vec![Complex64::default(); nt], vec![Complex64::default(); nt]];
    let (mut ha, mut hb, mut he) = (zeros(), zeros(), zeros());
    let mut power_a = vec![0.0; nt];
    let mut power_b = vec![0.0; nt];
    let mut violation = 0.0f64;
    for (run, &chi) in runs.iter().zip(&chis) {
        violation = violation.max(run.physicality_violation());
        for (slot, m) in [-1i32, 0, 1].iter().enumerate() {
            let w = Complex64::from_polar(1.0 / n, -(*m as f64) * chi);
            for k in 0..nt {
                ha[slot][k] += run.sigma_a2[k] * w;
                hb[slot][k] += run.sigma_b2[k] * w;
                he[slot][k] += run.rho22(k) * w;
            }
        }
        for k in 0..nt {
            power_a[k] += run.sigma_a2[k].norm_sqr() / n;
            power_b[k] += run.sigma_b2[k].norm_sqr() / n;
        }
    }
    Ok(PhaseHarmonics {
        times: times.to_vec(),
        n_phases,
        sigma_a2: ha,
        sigma_b2: hb,
        rho22: he,
        power_a,
        power_b,
        physicality_violation: violation,
    })
}

/// Sample count used by [`oracle_energy_grid`]; odd for Simpson's rule.
pub const ENERGY_GRID_POINTS: usize = 8001;

/// Integration window for oracle energies.
///
/// The signals decay at twice the slowest kernel rate; the window ends where
/// that envelope has dropped below the tail-rule fraction of its peak, with
/// the same `20/gamma22` floor as the analytic quadrature.
pub fn oracle_horizon(i_t: f64, gamma22: f64) -> Result<f64> {
    let kernel = build_kernel(i_t, gamma22)?;
    let rate = 2.0 * kernel.slowest_decay_rate();
    if rate == 0.0 {
        return Ok(20.0 / gamma22);
    }
    // Extra decade over the tail rule covers the algebraic prefactors.
    Ok((-(TAIL_REL * 0.1).ln() / rate).max(20.0 / gamma22))
}

pub fn oracle_energy_grid(i_t: f64, gamma22: f64) -> Result<Vec<f64>> {
    Ok(sample_grid(oracle_horizon(i_t, gamma22)?, ENERGY_GRID_POINTS))
}

fn simpson(times: &[f64], y: &[f64]) -> Result<f64> {
    let n = times.len();
    if n < 3 || n % 2 == 0 {
        return Err(Error::invalid("times", "Simpson's rule needs an odd number (>= 3) of samples"));
    }
    let h = (times[n - 1] - times[0]) / (n - 1) as f64;
    if times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::invalid("times", "Simpson's rule needs a uniform grid"));
    }
    let inner: f64 = (1..n - 1).map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * y[k]).sum();
    Ok(h / 3.0 * (y[0] + inner + y[n - 1]))
}

/// Energies of the `D` and `D'` pulses built from the phase-matched
/// harmonics, `S = 32 B |h|^2`, integrated with Simpson's rule over the
/// harmonic time grid.
///
/// The error estimate is the Simpson-trapezoid difference plus the last
/// sample times the window length.
pub fn oracle_energies(harmonics: &PhaseHarmonics, b_d: f64, b_dp: f64) -> Result<EnergyReport> {
    let sd: Vec<f64> = harmonics.phase_matched_a().iter().map(|h| 32.0 * b_d * h.norm_sqr()).collect();
    let sdp: Vec<f64> = harmonics.phase_matched_b().iter().map(|h| 32.0 * b_dp * h.norm_sqr()).collect();
    let t = &harmonics.times;
    let u_d = simpson(t, &sd)?;
    let u_dp = simpson(t, &sdp)?;
    let trap = crate::readout::trapezoid(t, &sd) + crate::readout::trapezoid(t, &sdp);
    let span = t[t.len() - 1] - t[0];
    let tail = (sd[sd.len() - 1] + sdp[sdp.len() - 1]) * span;
    Ok(EnergyReport::new(u_d, u_dp, (trap - u_d - u_dp).abs() + tail))
}

/// Drive configuration with equal writing drives and the given reading
/// intensities.
pub fn drive_for(intens: &IntensityParams, gamma22: f64) -> DriveConfig {
    DriveConfig::from_intensities(intens.i_r, intens.i_rp, gamma22)
}
