//! Pulse-pair retrieval from a coherence grating stored in a three-level
//! lambda ensemble.
//!
//! Two writing fields prepare a ground-state coherence grating; after a
//! storage time two counter-propagating reading fields convert it into a
//! pair of diffracted pulses `D` and `D'`. This crate provides
//!
//! * [`model`]: the writing-stage steady state and the stored state,
//! * [`kernel`]: the closed-form readout kernels `f_r`, `g_r`,
//! * [`readout`]: the analytic coherences, pulse signals and energies,
//! * [`oracle`]: a direct integration of the full readout Bloch equations
//!   with a Fourier decomposition over the grating phase,
//! * [`budget`]: spontaneous, stimulated and non-phase-matched channels,
//! * [`scan`]: energy-split scans, minimum detection, the asymptote curve,
//!   fitting of the total intensity and detector-response filtering,
//! * [`run`]: configuration echo and CSV/JSON output used by the CLI.
//!
//! All rates are in units of the excited-state decay rate `gamma22` unless a
//! function explicitly takes `gamma22` as an argument.

pub mod budget;
pub mod error;
pub mod kernel;
pub mod model;
pub mod ode;
pub mod oracle;
pub mod quad;
pub mod readout;
pub mod run;
pub mod scan;

pub use error::{Error, Result};
pub use kernel::{build_kernel, eval_fr, eval_gr, ReadoutKernel};
pub use model::{
    decay_to_storage, intensity_params, prepare_steady_state, DriveConfig, IntensityParams,
    PreparedEnsemble, StoredState,
};
