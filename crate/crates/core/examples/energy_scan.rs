//! Total retrieved energy versus the R intensity at several total
//! intensities, normalized to the single-read value.
use pulsepair::scan::{energy_scan, find_minimum};
use pulsepair::StoredState;

fn main() -> pulsepair::Result<()> {
    let stored = StoredState::equal_writing(1.0);
    for it in [0.01, 1.3, 10.0, 100.0] {
        let curve = energy_scan(it, 21, &stored, 1.0)?;
        let m = find_minimum(&curve);
        let row: Vec<String> = curve.points.iter().step_by(2).map(|p| format!("{:.3}", p.u_t)).collect();
        println!("I_t = {it:>6}: {}", row.join(" "));
        println!(
            "           minimum at I_R/I_t = {:.3}, U_T = {:.4}, interior: {}",
            m.i_r_star / it,
            m.u_t_star,
            m.has_interior_min
        );
    }
    Ok(())
}
