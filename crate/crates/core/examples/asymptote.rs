//! Balanced-to-single energy ratio from weak to very strong reading fields.
use pulsepair::scan::{asymptote_curve, log_grid};

fn main() -> pulsepair::Result<()> {
    for (it, ratio) in asymptote_curve(&log_grid(1e-3, 1e4, 15), 1.0)? {
        println!("I_t = {it:>10.4e}  U_T(I_t/2)/U_T(0) = {ratio:.5}");
    }
    Ok(())
}
