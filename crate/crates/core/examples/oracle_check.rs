//! Closed-form readout against direct integration of the Bloch equations,
//! pointwise and through the grating-phase harmonics.
use pulsepair::model::StoredState;
use pulsepair::run::oracle_check;
use pulsepair::IntensityParams;

fn main() -> pulsepair::Result<()> {
    let stored = StoredState::equal_writing(1.0);
    for (it, ratio) in [(0.5, 1.0), (1.3, 0.57), (10.0, 0.25)] {
        let r = oracle_check(&IntensityParams::from_ratio(it, ratio), &stored, 200, 16, 1e-10)?;
        println!("I_t = {it}, ratio = {ratio}");
        println!("  max |analytic - oracle| over P, Q: {:.2e}", r.max_pointwise());
        println!("  U_D : {:.10} vs {:.10}", r.u_d_analytic, r.u_d_oracle);
        println!("  U_D': {:.10} vs {:.10}", r.u_dp_analytic, r.u_dp_oracle);
    }
    Ok(())
}
