//! Diffracted pulse pairs at I_t = 1.3 for the four read-intensity ratios of
//! the experiment, printed as a coarse table with the pulse energies.
use pulsepair::readout::{default_times, pulse_energies, pulse_signals};
use pulsepair::{IntensityParams, StoredState};

fn main() -> pulsepair::Result<()> {
    let stored = StoredState::equal_writing(1.0);
    let times = default_times(1.0);
    for ratio in [0.02, 0.57, 1.04, 1.76] {
        let intens = IntensityParams::from_ratio(1.3, ratio);
        let trace = pulse_signals(&intens, &stored, &times, 1.0, 1.0, 1.0)?;
        let e = pulse_energies(&intens, &stored, 1.0, 1.0, 1.0)?;
        println!("ratio I_R'/I_R = {ratio}: U_D = {:.5}, U_D' = {:.5}", e.u_d, e.u_dp);
        println!("{:>8} {:>12} {:>12}", "t", "S_D", "S_D'");
        for k in (0..times.len()).step_by(200) {
            println!("{:8.2} {:12.6} {:12.6}", trace.times[k], trace.s_d[k], trace.s_dp[k]);
        }
        println!();
    }
    Ok(())
}
