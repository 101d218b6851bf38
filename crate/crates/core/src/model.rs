//! Writing stage, storage and the dimensionless reading intensities.
//!
//! Every optical field carries the phase factor `i` at the spatial origin,
//! `Omega_X = i |Omega_X|`, so the steady-state coherence prepared by two
//! equal writing fields is `-1/2`. Observables only ever depend on squared
//! moduli, so this convention never shows up in a signal or an energy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratio `gamma_ground / gamma22` above which the stored-grating model is
/// flagged as outside its validity regime.
pub const GROUND_DECAY_VALIDITY_RATIO: f64 = 1e-2;

/// Field magnitudes, decay rates and storage time of one write/store/read run.
///
/// Rabi magnitudes and rates share the time unit of `gamma22`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub omega_w: f64,
    pub omega_wp: f64,
    pub omega_r: f64,
    pub omega_rp: f64,
    pub gamma22: f64,
    pub gamma_ground: f64,
    pub t_storage: f64,
    /// Phase of the stored coherence relative to the reading-field phase
    /// product. Only the Bloch oracle reads it.
    pub grating_phase: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            omega_w: 1.0,
            omega_wp: 1.0,
            omega_r: 0.0,
            omega_rp: 0.0,
            gamma22: 1.0,
            gamma_ground: 0.0,
            t_storage: 0.0,
            grating_phase: 0.0,
        }
    }
}

impl DriveConfig {
    /// Equal writing drives with the reading Rabi magnitudes chosen to give
    /// the requested saturation-unit intensities.
    pub fn from_intensities(i_r: f64, i_rp: f64, gamma22: f64) -> Self {
        Self {
            omega_r: rabi_from_intensity(i_r, gamma22),
            omega_rp: rabi_from_intensity(i_rp, gamma22),
            gamma22,
            ..Self::default()
        }
    }

    pub fn with_grating_phase(mut self, chi: f64) -> Self {
        self.grating_phase = chi.rem_euclid(std::f64::consts::TAU);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_w", self.omega_w),
            ("omega_wp", self.omega_wp),
            ("omega_r", self.omega_r),
            ("omega_rp", self.omega_rp),
            ("gamma_ground", self.gamma_ground),
            ("t_storage", self.t_storage),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !self.gamma22.is_finite() || self.gamma22 <= 0.0 {
            return Err(Error::invalid("gamma22", format!("must be > 0, got {}", self.gamma22)));
        }
        if !self.grating_phase.is_finite() {
            return Err(Error::invalid("grating_phase", "must be finite"));
        }
        Ok(())
    }

    /// `Some(message)` when the ground coherence decays too fast compared to
    /// the excited state for the stored-grating picture to hold.
    pub fn validity_warning(&self) -> Option<String> {
        (self.gamma_ground > GROUND_DECAY_VALIDITY_RATIO * self.gamma22).then(|| {
            format!(
                "gamma_ground/gamma22 = {:.3e} exceeds {:.0e}; ground coherence is not long-lived",
                self.gamma_ground / self.gamma22,
                GROUND_DECAY_VALIDITY_RATIO
            )
        })
    }

    /// Complex reading Rabi frequencies `(Omega_R, Omega_R')` at the origin.
    pub fn read_rabi(&self) -> (Complex64, Complex64) {
        (
            Complex64::new(0.0, self.omega_r),
            Complex64::new(0.0, self.omega_rp),
        )
    }

    pub fn intensities(&self) -> IntensityParams {
        intensity_params(self.omega_r, self.omega_rp, self.gamma22)
    }

    /// Steady state of the writing fields followed by storage decay.
    pub fn stored_state(&self) -> Result<StoredState> {
        let prep = prepare_steady_state(self.omega_w, self.omega_wp)?;
        Ok(decay_to_storage(&prep, self.gamma_ground, self.t_storage))
    }
}

/// `|Omega| = gamma22 * sqrt(I / 8)`.
pub fn rabi_from_intensity(intensity: f64, gamma22: f64) -> f64 {
    gamma22 * (intensity / 8.0).sqrt()
}

/// Ground-state density matrix at the end of the writing stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreparedEnsemble {
    pub pop_a: f64,
    pub pop_b: f64,
    pub coh: Complex64,
}

/// Ground-state density matrix when the reading fields switch on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoredState {
    pub pop_a: f64,
    pub pop_b: f64,
    pub coh: Complex64,
}

impl StoredState {
    /// Equal-population grating with coherence `-exp(-gamma t_s)/2`.
    pub fn equal_writing(decay_factor: f64) -> Self {
        Self {
            pop_a: 0.5,
            pop_b: 0.5,
            coh: Complex64::new(-0.5 * decay_factor, 0.0),
        }
    }

    /// `rho_aa - rho_bb`; storage leaves it equal to the prepared value.
    pub fn population_difference(&self) -> f64 {
        self.pop_a - self.pop_b
    }

    pub fn has_equal_populations(&self) -> bool {
        self.population_difference().abs() <= 1e-12
    }

    /// Same state with the coherence rotated to `|coh| e^{i chi}`.
    pub fn with_grating_phase(&self, chi: f64) -> Self {
        Self {
            coh: Complex64::from_polar(self.coh.norm(), chi),
            ..*self
        }
    }

    /// `4 |coh|^2`, which equals `exp(-2 gamma t_s)` for equal writing drives.
    pub fn visibility_factor(&self) -> f64 {
        4.0 * self.coh.norm_sqr()
    }
}

/// Dimensionless reading intensities in saturation units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityParams {
    pub i_r: f64,
    pub i_rp: f64,
    pub i_t: f64,
    pub i_d: f64,
}

impl IntensityParams {
    pub fn new(i_r: f64, i_rp: f64) -> Self {
        Self {
            i_r,
            i_rp,
            i_t: i_r + i_rp,
            i_d: i_r - i_rp,
        }
    }

    /// Split of a total intensity: `i_r` goes to `R`, the rest to `R'`.
    pub fn split(i_t: f64, i_r: f64) -> Self {
        Self::new(i_r, i_t - i_r)
    }

    /// From the ratio `I_R' / I_R` at fixed total intensity.
    pub fn from_ratio(i_t: f64, ratio: f64) -> Self {
        let i_r = i_t / (1.0 + ratio);
        Self::new(i_r, i_t - i_r)
    }

    /// `R <-> R'` exchange.
    pub fn swapped(&self) -> Self {
        Self::new(self.i_rp, self.i_r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.i_r.is_finite() && self.i_r >= 0.0) {
            return Err(Error::invalid("i_r", format!("must be >= 0, got {}", self.i_r)));
        }
        if !(self.i_rp.is_finite() && self.i_rp >= 0.0) {
            return Err(Error::invalid("i_rp", format!("must be >= 0, got {}", self.i_rp)));
        }
        Ok(())
    }

    /// Reading Rabi magnitudes `(|Omega_R|, |Omega_R'|)`.
    pub fn rabi(&self, gamma22: f64) -> (f64, f64) {
        (
            rabi_from_intensity(self.i_r, gamma22),
            rabi_from_intensity(self.i_rp, gamma22),
        )
    }
}

/// Resonant steady state under the two writing fields with no ground decay.
pub fn prepare_steady_state(omega_w: f64, omega_wp: f64) -> Result<PreparedEnsemble> {
    for (name, v) in [("omega_w", omega_w), ("omega_wp", omega_wp)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
        }
    }
    let w2 = omega_w * omega_w;
    let wp2 = omega_wp * omega_wp;
    let norm = w2 + wp2;
    if norm == 0.0 {
        return Err(Error::UndefinedSteadyState);
    }
    let w = Complex64::new(0.0, omega_w);
    let wp = Complex64::new(0.0, omega_wp);
    let coh = -(w.conj() * wp) / norm;
    let pop_a = w2 / norm;
    Ok(PreparedEnsemble {
        pop_a,
        pop_b: 1.0 - pop_a,
        coh,
    })
}

/// Relaxation of the excited state and ground coherence during storage.
pub fn decay_to_storage(prep: &PreparedEnsemble, gamma_ground: f64, t_storage: f64) -> StoredState {
    let diff = prep.pop_a - prep.pop_b;
    StoredState {
        pop_a: 0.5 + 0.5 * diff,
        pop_b: 0.5 - 0.5 * diff,
        coh: prep.coh * (-gamma_ground * t_storage).exp(),
    }
}

/// `I_X = 8 |Omega_X|^2 / gamma22^2`.
pub fn intensity_params(omega_r: f64, omega_rp: f64, gamma22: f64) -> IntensityParams {
    let g2 = gamma22 * gamma22;
    IntensityParams::new(8.0 * omega_r * omega_r / g2, 8.0 * omega_rp * omega_rp / g2)
}
