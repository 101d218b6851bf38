//! Energy channels versus split at fixed total intensity: the phase-matched
//! pair, spontaneous and stimulated emission, and the non-phase-matched term.
use pulsepair::budget::budget_from_moments;
use pulsepair::readout::KernelMoments;
use pulsepair::IntensityParams;

fn main() -> pulsepair::Result<()> {
    let it = 10.0;
    let m = KernelMoments::compute(it, 1.0)?;
    println!("{:>5} {:>9} {:>9} {:>9} {:>9}", "x", "U_T", "spont", "stim", "npm");
    for k in 0..=10 {
        let x = k as f64 / 10.0;
        let b = budget_from_moments(&m, &IntensityParams::split(it, x * it));
        let e = m.energies(x * it, 1.0, 1.0, 1.0);
        println!("{x:5.1} {:9.4} {:9.4} {:9.4} {:9.4}", e.u_t, b.u_spont, b.u_stim_total, b.u_npm_total);
    }
    Ok(())
}
