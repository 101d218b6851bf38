//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach stdout; exits nonzero on any FAIL.

use std::time::Instant;

use pulsepair::budget::{excited_population_curve, full_budget};
use pulsepair::oracle::{drive_for, integrate_bloch, oracle_energy_grid, phase_sweep, sample_grid};
use pulsepair::readout::{pq_state, pulse_energies, pulse_signals, uniform_times, KernelMoments};
use pulsepair::scan::{
    asymptote_curve, default_fit_splits, detector_convolve, energy_scan, find_minimum, fit_it, full_width_1e,
    log_grid, micros_to_dimensionless, synthetic_fit_data, GAMMA22_CESIUM,
};
use pulsepair::{build_kernel, IntensityParams, StoredState};

// Pinned tolerances.
const AC1_POINTWISE: f64 = 1e-8;
const AC1_ORACLE_TOL: f64 = 1e-10;
const AC1_SECONDS: f64 = 60.0;
const AC3_LO: f64 = 0.267;
const AC3_HI: f64 = 0.287;
const AC3_SECONDS: f64 = 120.0;
const AC4_LO: f64 = 0.25;
const AC4_HI: f64 = 0.35;
/// Frozen bound on `max|f_r - g_r| / max|f_r|` at `I_t = 0.01`.
const AC5_CALIBRATION: f64 = 0.01;
const AC5_FLATNESS: f64 = 0.01;
const AC6_SPREAD: f64 = 1e-12;
const AC6_RESIDUAL: f64 = 1e-6;
const AC8_ROOT_SUM: f64 = 1e-10;
const AC8_IMAG: f64 = 1e-12;
const AC8_ZERO_ROOTS: f64 = 1e-9;
const AC8_CONTINUITY: f64 = 1e-6;
const AC9_CLEAN: f64 = 1e-3;
const AC9_NOISY: f64 = 0.1;
const AC10_LOCK_REL: f64 = 1e-9;
const AC10_ENERGY_REL: f64 = 1e-9;

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn line(&mut self, id: &'static str, ok: bool, detail: String) {
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(id);
        }
    }
}

fn ac1(r: &mut Report) {
    let start = Instant::now();
    let stored = StoredState::equal_writing(1.0);
    let times = sample_grid(20.0, 200);
    let mut worst = 0.0f64;
    for it in [0.05, 0.5, 1.3, 10.0, 100.0] {
        let kernel = build_kernel(it, 1.0).unwrap();
        for split in [0.0, 0.25, 0.5, 0.9] {
            let intens = IntensityParams::split(it, split * it);
            let traj = integrate_bloch(&drive_for(&intens, 1.0), &stored, &times, AC1_ORACLE_TOL).unwrap();
            for (k, &t) in times.iter().enumerate() {
                let a = pq_state(&kernel, &intens, &stored, t);
                let o = traj.pq_state(k);
                for d in [a.p_r - o.p_r, a.p_i - o.p_i, a.q_r - o.q_r, a.q_i - o.q_i] {
                    worst = worst.max(d.abs());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    r.line(
        "AC1 oracle equivalence",
        worst < AC1_POINTWISE && secs < AC1_SECONDS,
        format!("max |analytic - oracle| = {worst:.2e} (< {AC1_POINTWISE:e}), {secs:.2} s (< {AC1_SECONDS} s)"),
    );
}

fn ac2(r: &mut Report) {
    let stored = StoredState::equal_writing(1.0);
    let mut ok = true;
    let mut detail = Vec::new();
    for it in [1.3, 10.0, 100.0] {
        let m = find_minimum(&energy_scan(it, 101, &stored, 1.0).unwrap());
        let step = it / 100.0;
        ok &= (m.i_r_star - it / 2.0).abs() <= step && m.has_interior_min;
        detail.push(format!("I_t={it}: I_R*={:.4} interior={}", m.i_r_star, m.has_interior_min));
    }
    let small = find_minimum(&energy_scan(0.01, 101, &stored, 1.0).unwrap());
    ok &= !small.has_interior_min;
    detail.push(format!("I_t=0.01: interior={}", small.has_interior_min));
    r.line("AC2 minimum location", ok, detail.join("; "));
}

fn ac3(r: &mut Report) {
    let start = Instant::now();
    let curve = asymptote_curve(&log_grid(1e-3, 1e4, 25), 1.0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let last = curve.last().unwrap().1;
    let monotone = curve.windows(2).all(|w| w[1].1 <= w[0].1);
    r.line(
        "AC3 asymptote",
        (AC3_LO..=AC3_HI).contains(&last) && monotone && secs < AC3_SECONDS,
        format!("ratio(1e4) = {last:.5} in [{AC3_LO}, {AC3_HI}], monotone={monotone}, {secs:.2} s"),
    );
}

fn ac4(r: &mut Report) {
    let curve = asymptote_curve(&[1.3], 1.0).unwrap();
    let dip = 1.0 - curve[0].1;
    r.line("AC4 dip at I_t = 1.3", (AC4_LO..=AC4_HI).contains(&dip), format!("1 - U_T(I_t/2)/U_T(0) = {dip:.4}"));
}

fn ac5(r: &mut Report) {
    let k = build_kernel(0.01, 1.0).unwrap();
    let ts = uniform_times(40.0, 40001);
    let max_f = ts.iter().map(|&t| k.fr(t).abs()).fold(0.0, f64::max);
    let max_d = ts.iter().map(|&t| (k.fr(t) - k.gr(t)).abs()).fold(0.0, f64::max);
    let rel = max_d / max_f;
    let curve = energy_scan(0.01, 101, &StoredState::equal_writing(1.0), 1.0).unwrap();
    let (lo, hi) = curve
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.u_t), b.max(p.u_t)));
    let spread = hi - lo;
    r.line(
        "AC5 small-intensity degeneracy",
        rel < AC5_CALIBRATION && spread < AC5_FLATNESS,
        format!("max|f-g|/max|f| = {rel:.3e} (< {AC5_CALIBRATION}), U_T spread = {spread:.3e} of U_T(0)"),
    );
}

fn ac6(r: &mut Report) {
    let times = uniform_times(20.0, 201);
    let base = excited_population_curve(10.0, 1.0, &times).unwrap();
    let mut spread = 0.0f64;
    let b0 = full_budget(&IntensityParams::split(10.0, 0.0), 1.0).unwrap();
    for x in [0.3, 0.5] {
        let b = full_budget(&IntensityParams::split(10.0, x * 10.0), 1.0).unwrap();
        spread = spread
            .max((b.u_spont - b0.u_spont).abs() / b0.u_spont)
            .max((b.u_stim_total - b0.u_stim_total).abs() / b0.u_stim_total);
    }
    // Oracle side: grating-averaged population at I_t = 1.3 for two splits.
    let stored = StoredState::equal_writing(1.0);
    let closed = excited_population_curve(1.3, 1.0, &times).unwrap();
    let peak_closed = closed.iter().cloned().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let mut scales = Vec::new();
    for x in [0.3, 0.5] {
        let intens = IntensityParams::split(1.3, x * 1.3);
        let h = phase_sweep(&drive_for(&intens, 1.0), &stored, 16, &times, 1e-10).unwrap();
        let o = h.mean_rho22();
        let scale = o.iter().zip(&closed).map(|(a, b)| a * b).sum::<f64>() / closed.iter().map(|c| c * c).sum::<f64>();
        let resid = o.iter().zip(&closed).map(|(a, b)| (a - scale * b).abs()).fold(0.0, f64::max);
        worst = worst.max(resid / (scale * peak_closed));
        scales.push(scale);
    }
    r.line(
        "AC6 total-intensity dependence",
        spread < AC6_SPREAD && worst < AC6_RESIDUAL && !base.is_empty(),
        format!("budget spread = {spread:.2e}, oracle <rho22> residual = {worst:.2e} (scales {:.8}, {:.8})", scales[0], scales[1]),
    );
}

fn ac7(r: &mut Report) {
    let mut ok = true;
    let mut detail = Vec::new();
    for it in [1.3, 10.0] {
        let m = KernelMoments::compute(it, 1.0).unwrap();
        let u: Vec<f64> = (0..=100)
            .map(|k| pulsepair::budget::budget_from_moments(&m, &IntensityParams::split(it, it * k as f64 / 100.0)).u_npm_total)
            .collect();
        let argmax = (0..u.len()).max_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap();
        let peak = u[argmax];
        let concave = u.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] <= 1e-12 * peak);
        ok &= argmax == 50 && concave;
        detail.push(format!("I_t={it}: argmax I_R/I_t={:.2} concave={concave}", argmax as f64 / 100.0));
    }
    r.line("AC7 non-phase-matched maximum", ok, detail.join("; "));
}

/// Zero of the cubic's discriminant, found by bisection.
fn double_root_intensity() -> f64 {
    let disc = |i: f64| (i / 3.0 - 1.0 / 6.0).powi(3) / 8.0 + i * i / 256.0;
    let (mut lo, mut hi) = (0.1, 0.3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if disc(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn ac8(r: &mut Report) {
    let mut sum_err = 0.0f64;
    let mut imag = 0.0f64;
    for it in std::iter::once(0.0).chain(log_grid(1e-4, 1e4, 161)) {
        let k = build_kernel(it, 1.0).unwrap();
        let s = k.root_sum();
        sum_err = sum_err.max((s.re + 1.5).abs()).max(s.im.abs());
        for j in 0..=60 {
            let t = j as f64 * 0.5;
            imag = imag.max(k.fr_complex(t).im.abs()).max(k.gr_complex(t).im.abs());
        }
    }
    let mut zero: Vec<f64> = build_kernel(0.0, 1.0).unwrap().roots.iter().map(|z| z.re).collect();
    zero.sort_by(f64::total_cmp);
    let zero_err = zero.iter().zip([-1.0, -0.5, 0.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let i0 = double_root_intensity();
    let at = build_kernel(i0, 1.0).unwrap();
    let mut jump = 0.0f64;
    for d in [-1e-7, 1e-7] {
        let near = build_kernel(i0 * (1.0 + d), 1.0).unwrap();
        for j in 0..=200 {
            let t = j as f64 * 0.1;
            jump = jump.max((at.gr(t) - near.gr(t)).abs());
        }
    }
    r.line(
        "AC8 kernel correctness",
        sum_err < AC8_ROOT_SUM && imag < AC8_IMAG && zero_err < AC8_ZERO_ROOTS && at.perturbed && jump < AC8_CONTINUITY,
        format!(
            "root-sum err {sum_err:.1e}, imag {imag:.1e}, I_t=0 roots err {zero_err:.1e}, perturbed at I0={i0:.8}: {}, g_r jump {jump:.1e}",
            at.perturbed
        ),
    );
}

fn ac9(r: &mut Report) {
    let splits = default_fit_splits();
    let clean = fit_it(&synthetic_fit_data(1.3, &splits, 0.0, 0, 1.0).unwrap(), (0.01, 100.0), 1.0).unwrap();
    let noisy = fit_it(&synthetic_fit_data(1.3, &splits, 0.02, 0, 1.0).unwrap(), (0.01, 100.0), 1.0).unwrap();
    r.line(
        "AC9 fit round-trip",
        (clean.i_t_hat - 1.3).abs() < AC9_CLEAN && (noisy.i_t_hat - 1.3).abs() < AC9_NOISY,
        format!(
            "noiseless {:.6}, 2% noise seed 0 {:.4} (over 200 seeds with 11 splits about 3 in 4 land within 0.1)",
            clean.i_t_hat, noisy.i_t_hat
        ),
    );
}

/// Energies and two signal samples per default pulse-shape panel, frozen after the
/// oracle check agreed with the closed forms to 1e-10.
const PANEL_LOCK: [(f64, [f64; 6]); 4] = [
    (0.02, [7.748049911793016, 0.08442812626350027, 0.7457687816795242, 1.8549362784724113, 0.01317326198132882, 0.017953007697741913]),
    (0.57, [4.049102571474105, 1.9356997724867409, 0.4638792854992576, 0.9571576678291985, 0.2552159168729365, 0.44452437570632164]),
    (1.04, [2.8356808280384325, 2.9865336666963245, 0.3503257145390205, 0.6617935269961651, 0.36526312995647525, 0.6984242204161011]),
    (1.76, [1.9308507752959814, 4.055718914615836, 0.25467226615901895, 0.4433622082552708, 0.4644610506689942, 0.9587705562671627]),
];

fn ac10(r: &mut Report) {
    let stored = StoredState::equal_writing(1.0);
    let mut lock = 0.0f64;
    for (ratio, want) in PANEL_LOCK {
        let intens = IntensityParams::from_ratio(1.3, ratio);
        let e = pulse_energies(&intens, &stored, 1.0, 1.0, 1.0).unwrap();
        let tr = pulse_signals(&intens, &stored, &[1.0, 3.0], 1.0, 1.0, 1.0).unwrap();
        let got = [e.u_d, e.u_dp, tr.s_d[0], tr.s_d[1], tr.s_dp[0], tr.s_dp[1]];
        for (g, w) in got.iter().zip(want) {
            lock = lock.max((g - w).abs() / w);
        }
    }
    let tau = micros_to_dimensionless(0.5, GAMMA22_CESIUM);
    let times = oracle_energy_grid(1.3, 1.0).unwrap();
    let mut energy = 0.0f64;
    let mut min_width = f64::INFINITY;
    for (ratio, _) in PANEL_LOCK {
        let tr = pulse_signals(&IntensityParams::from_ratio(1.3, ratio), &stored, &times, 1.0, 1.0, 1.0).unwrap();
        let out = detector_convolve(&tr, tau).unwrap();
        let (a, b) = tr.channel_energies();
        let (c, d) = out.channel_energies();
        energy = energy.max(((c - a) / a).abs()).max(((d - b) / b).abs());
        for y in [&out.s_d, &out.s_dp] {
            min_width = min_width.min(full_width_1e(&out.times, y).unwrap_or(0.0));
        }
    }
    r.line(
        "AC10 figure regeneration",
        lock < AC10_LOCK_REL && energy < AC10_ENERGY_REL && min_width >= tau,
        format!("lock drift {lock:.1e}, detector energy change {energy:.1e}, min width {min_width:.2} >= tau {tau:.2}"),
    );
}

fn main() {
    let mut r = Report { failed: Vec::new() };
    ac1(&mut r);
    ac2(&mut r);
    ac3(&mut r);
    ac4(&mut r);
    ac5(&mut r);
    ac6(&mut r);
    ac7(&mut r);
    ac8(&mut r);
    ac9(&mut r);
    ac10(&mut r);
    if !r.failed.is_empty() {
        eprintln!("failed: {}", r.failed.join(", "));
        std::process::exit(1);
    }
}
