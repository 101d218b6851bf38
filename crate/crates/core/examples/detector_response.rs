//! Default pulse-shape traces as seen by a detector with a 0.5 us response time
//! (cesium D2 time scale).
use pulsepair::oracle::oracle_horizon;
use pulsepair::readout::{pulse_signals, uniform_times};
use pulsepair::scan::{detector_convolve, full_width_1e, micros_to_dimensionless, GAMMA22_CESIUM};
use pulsepair::{IntensityParams, StoredState};

fn main() -> pulsepair::Result<()> {
    let tau = micros_to_dimensionless(0.5, GAMMA22_CESIUM);
    let t_end = oracle_horizon(1.3, 1.0)?;
    let times = uniform_times(t_end, 8001);
    println!("tau_d = {tau:.3} / gamma22");
    for ratio in [0.02, 0.57, 1.04, 1.76] {
        let intens = IntensityParams::from_ratio(1.3, ratio);
        let fast = pulse_signals(&intens, &StoredState::equal_writing(1.0), &times, 1.0, 1.0, 1.0)?;
        let slow = detector_convolve(&fast, tau)?;
        let (ed, edp) = fast.channel_energies();
        let (sd, sdp) = slow.channel_energies();
        println!(
            "ratio {ratio}: width D {:.2} -> {:.2}, energy change D {:.1e}, D' {:.1e}",
            full_width_1e(&fast.times, &fast.s_d).unwrap_or(0.0),
            full_width_1e(&slow.times, &slow.s_d).unwrap_or(0.0),
            (sd - ed) / ed,
            (sdp - edp) / edp
        );
    }
    Ok(())
}
