//! Energy-split scans, the total-energy minimum,
//! the balanced-to-single ratio versus total intensity, fitting of `I_t` to
//! measured energies, and a detector response filter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IntensityParams, StoredState};
use crate::readout::{KernelMoments, PulseTrace};

/// Excited-state decay rate of the cesium D2 line, `2 pi * 5.2 MHz`, in 1/s.
pub const GAMMA22_CESIUM: f64 = std::f64::consts::TAU * 5.2e6;

/// An interior minimum must sit this far (relative to the endpoint value)
/// below both endpoints.
pub const DEFAULT_FLATNESS_TOL: f64 = 0.01;

pub const FIT_CANDIDATES: usize = 51;
pub const FIT_REL_TOL: f64 = 1e-4;

/// Converts a time in microseconds to units of `1/gamma22`.
pub fn micros_to_dimensionless(t_us: f64, gamma22_per_s: f64) -> f64 {
    t_us * 1e-6 * gamma22_per_s
}

pub fn dimensionless_to_micros(t: f64, gamma22_per_s: f64) -> f64 {
    t / gamma22_per_s * 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub i_r: f64,
    pub u_t: f64,
    pub u_d: f64,
    pub u_dp: f64,
}

/// Energies on a uniform `I_R` grid at fixed `I_t`, divided by `U_T` at
/// `I_R = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCurve {
    pub i_t: f64,
    pub points: Vec<ScanPoint>,
    /// Unnormalized `U_T(I_R = 0)`.
    pub normalization: f64,
}

fn check_scan_points(n: usize) -> Result<()> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::invalid("n_points", format!("must be odd and >= 3, got {n}")));
    }
    Ok(())
}

/// Scan of the retrieved energies over `I_R` in `[0, I_t]` with
/// `I_R' = I_t - I_R` and unit detection constants.
pub fn energy_scan(i_t: f64, n_points: usize, stored: &StoredState, gamma22: f64) -> Result<ScanCurve> {
    check_scan_points(n_points)?;
    if !(i_t > 0.0 && i_t.is_finite()) {
        return Err(Error::invalid("i_t", format!("must be > 0, got {i_t}")));
    }
    if !stored.has_equal_populations() {
        return Err(Error::UnsupportedRegime("energy scans assume equal writing drives".into()));
    }
    let m = KernelMoments::compute(i_t, gamma22)?;
    Ok(scan_from_moments(&m, n_points, stored.visibility_factor()))
}

fn scan_from_moments(m: &KernelMoments, n_points: usize, visibility: f64) -> ScanCurve {
    let i_t = m.i_t;
    let raw: Vec<_> = (0..n_points)
        .map(|k| {
            let i_r = i_t * k as f64 / (n_points - 1) as f64;
            (i_r, m.energies(i_r, 1.0, 1.0, visibility))
        })
        .collect();
    let norm = raw[0].1.u_t;
    ScanCurve {
        i_t,
        points: raw
            .into_iter()
            .map(|(i_r, e)| ScanPoint {
                i_r,
                u_t: e.u_t / norm,
                u_d: e.u_d / norm,
                u_dp: e.u_dp / norm,
            })
            .collect(),
        normalization: norm,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub i_r_star: f64,
    pub u_t_star: f64,
    pub has_interior_min: bool,
}

pub fn find_minimum(curve: &ScanCurve) -> Minimum {
    find_minimum_with_tol(curve, DEFAULT_FLATNESS_TOL)
}

/// Grid argmin of `u_t` refined by the parabola through its neighbours.
///
/// `has_interior_min` requires the refined minimum to lie below both
/// endpoints by more than `rel_tol` times the larger endpoint.
pub fn find_minimum_with_tol(curve: &ScanCurve, rel_tol: f64) -> Minimum {
    let pts = &curve.points;
    let n = pts.len();
    let j = (0..n)
        .min_by(|&a, &b| pts[a].u_t.total_cmp(&pts[b].u_t))
        .expect("non-empty scan");
    let (mut x, mut y) = (pts[j].i_r, pts[j].u_t);
    if j > 0 && j + 1 < n {
        let (y0, y1, y2) = (pts[j - 1].u_t, pts[j].u_t, pts[j + 1].u_t);
        let curv = y0 - 2.0 * y1 + y2;
        if curv > 0.0 {
            let h = pts[j + 1].i_r - pts[j].i_r;
            let d = 0.5 * (y0 - y2) / curv;
            x = pts[j].i_r + d * h;
            y = y1 - 0.25 * (y0 - y2) * d;
        }
    }
    let edge = pts[0].u_t.max(pts[n - 1].u_t);
    let floor = pts[0].u_t.min(pts[n - 1].u_t) - rel_tol * edge.abs();
    Minimum {
        i_r_star: x,
        u_t_star: y,
        has_interior_min: j > 0 && j + 1 < n && y < floor,
    }
}

/// `U_T(I_R = I_t/2) / U_T(I_R = 0)` for each total intensity, evaluated in
/// parallel and returned in input order.
pub fn asymptote_curve(i_t_list: &[f64], gamma22: f64) -> Result<Vec<(f64, f64)>> {
    if let Some(bad) = i_t_list.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::invalid("i_t", format!("must be > 0, got {bad}")));
    }
    i_t_list
        .par_iter()
        .map(|&it| {
            let m = KernelMoments::compute(it, gamma22)?;
            Ok((it, balanced_ratio(&m)))
        })
        .collect()
}

fn balanced_ratio(m: &KernelMoments) -> f64 {
    m.energies(0.5 * m.i_t, 1.0, 1.0, 1.0).u_t / m.energies(0.0, 1.0, 1.0, 1.0).u_t
}

/// Log-spaced grid of `n` points including both ends.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| match k {
            0 => lo,
            _ if k == n - 1 => hi,
            _ => (a + (b - a) * k as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// One measured split: `x = I_R / I_t` and the two channel energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub i_r_over_it: f64,
    pub u_d: f64,
    pub u_dp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub i_t_hat: f64,
    /// Per-channel scale constants, fitted linearly at every candidate.
    pub scale_d: f64,
    pub scale_dp: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    /// The coarse-grid optimum sat on a bound.
    pub at_boundary: bool,
}

struct Candidate {
    i_t: f64,
    scale_d: f64,
    scale_dp: f64,
    ss: f64,
}

fn fit_channel(model: &[f64], data: &[f64]) -> (f64, f64) {
    let mm: f64 = model.iter().map(|m| m * m).sum();
    let s = if mm > 0.0 {
        model.iter().zip(data).map(|(m, y)| m * y).sum::<f64>() / mm
    } else {
        0.0
    };
    let ss = model.iter().zip(data).map(|(m, y)| (y - s * m).powi(2)).sum();
    (s, ss)
}

fn evaluate_candidate(data: &[FitPoint], i_t: f64, gamma22: f64) -> Result<Candidate> {
    let m = KernelMoments::compute(i_t, gamma22)?;
    let (md, mdp): (Vec<f64>, Vec<f64>) = data
        .iter()
        .map(|p| {
            let e = m.energies(p.i_r_over_it * i_t, 1.0, 1.0, 1.0);
            (e.u_d, e.u_dp)
        })
        .unzip();
    let yd: Vec<f64> = data.iter().map(|p| p.u_d).collect();
    let ydp: Vec<f64> = data.iter().map(|p| p.u_dp).collect();
    let (scale_d, ssd) = fit_channel(&md, &yd);
    let (scale_dp, ssdp) = fit_channel(&mdp, &ydp);
    Ok(Candidate {
        i_t,
        scale_d,
        scale_dp,
        ss: ssd + ssdp,
    })
}

/// Least-squares estimate of the total intensity from energy data.
///
/// The scale constants of the two channels enter linearly and are solved in
/// closed form at every trial `I_t`. The outer search scans
/// [`FIT_CANDIDATES`] log-spaced values in `bounds` and refines the best
/// one by golden-section search in `ln I_t` to relative tolerance
/// [`FIT_REL_TOL`].
pub fn fit_it(data: &[FitPoint], bounds: (f64, f64), gamma22: f64) -> Result<FitResult> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid("i_t_bounds", format!("need 0 < lo < hi, got ({lo}, {hi})")));
    }
    if data.len() < 4 {
        return Err(Error::invalid("data", format!("need at least 4 points, got {}", data.len())));
    }
    for p in data {
        let ok = (0.0..=1.0).contains(&p.i_r_over_it) && p.u_d.is_finite() && p.u_dp.is_finite();
        if !ok {
            return Err(Error::invalid("data", format!("bad row {p:?}")));
        }
    }
    if data.iter().all(|p| p.u_d == 0.0 && p.u_dp == 0.0) {
        return Err(Error::DegenerateFit("all energies are zero".into()));
    }

    let grid = log_grid(lo, hi, FIT_CANDIDATES);
    let coarse: Vec<Candidate> = grid
        .par_iter()
        .map(|&it| evaluate_candidate(data, it, gamma22))
        .collect::<Result<_>>()?;
    let j = (0..coarse.len())
        .min_by(|&a, &b| coarse[a].ss.total_cmp(&coarse[b].ss))
        .expect("non-empty grid");
    let at_boundary = j == 0 || j == coarse.len() - 1;

    let mut a = grid[j.saturating_sub(1)].ln();
    let mut b = grid[(j + 1).min(grid.len() - 1)].ln();
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = evaluate_candidate(data, c.exp(), gamma22)?;
    let mut fd = evaluate_candidate(data, d.exp(), gamma22)?;
    let mut iterations = 0;
    while b - a > FIT_REL_TOL {
        iterations += 1;
        if fc.ss <= fd.ss {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = evaluate_candidate(data, c.exp(), gamma22)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = evaluate_candidate(data, d.exp(), gamma22)?;
        }
    }
    let best = [fc, fd, coarse.into_iter().nth(j).expect("index in range")]
        .into_iter()
        .min_by(|x, y| x.ss.total_cmp(&y.ss))
        .expect("three candidates");
    Ok(FitResult {
        i_t_hat: best.i_t,
        scale_d: best.scale_d,
        scale_dp: best.scale_dp,
        residual_norm: best.ss.sqrt(),
        iterations,
        at_boundary,
    })
}

/// The eleven splits `I_R / I_t = 0, 0.1, ..., 1`.
pub fn default_fit_splits() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Energies predicted at `i_t` (unit scales) with optional multiplicative
/// Gaussian noise of relative size `noise`, reproducible from `seed`.
pub fn synthetic_fit_data(i_t: f64, splits: &[f64], noise: f64, seed: u64, gamma22: f64) -> Result<Vec<FitPoint>> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid("noise", format!("must be >= 0, got {noise}")));
    }
    let m = KernelMoments::compute(i_t, gamma22)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).map_err(|e| Error::invalid("noise", e.to_string()))?;
    Ok(splits
        .iter()
        .map(|&x| {
            let e = m.energies(x * i_t, 1.0, 1.0, 1.0);
            FitPoint {
                i_r_over_it: x,
                u_d: e.u_d * (1.0 + normal.sample(&mut rng)),
                u_dp: e.u_dp * (1.0 + normal.sample(&mut rng)),
            }
        })
        .collect())
}

/// Output of the filter falls below this fraction of its peak before the
/// extended grid stops.
const FILTER_TAIL_REL: f64 = 1e-14;
const UNIFORM_GRID_TOL: f64 = 1e-9;

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::invalid("times", "need at least two samples"));
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let dev = times
        .windows(2)
        .map(|w| ((w[1] - w[0]) - h).abs() / h)
        .fold(0.0, f64::max);
    if !(h > 0.0) || dev > UNIFORM_GRID_TOL {
        return Err(Error::ResampleRequired(dev));
    }
    Ok(h)
}

/// Response of a unit-gain single-pole detector, `tau y' = x - y`, to the
/// piecewise-linear interpolant of `x`.
///
/// The detector starts at rest and the input is taken to return linearly to
/// zero one step after its last sample; the output grid is extended until
/// the response has decayed. For an input starting at zero the trapezoid
/// energy of the output equals that of the input plus `h x_last / 2`, the
/// area of the closing ramp.
pub fn filter_single_pole(x: &[f64], h: f64, tau: f64) -> Vec<f64> {
    if tau == 0.0 {
        return x.to_vec();
    }
    let a = (-h / tau).exp();
    // (1 - a)/(h/tau) without cancellation for h << tau.
    let beta = if h / tau < 1e-8 { 1.0 - 0.5 * h / tau } else { -(-h / tau).exp_m1() * tau / h };
    let mut y = Vec::with_capacity(x.len() + 16);
    let mut prev_x = 0.0;
    let mut cur = 0.0;
    let mut peak = 0.0f64;
    for &xi in x {
        if !y.is_empty() {
            cur = a * cur + prev_x * (beta - a) + xi * (1.0 - beta);
        }
        peak = peak.max(cur.abs());
        y.push(cur);
        prev_x = xi;
    }
    // Closing ramp to zero, then free decay.
    loop {
        cur = a * cur + prev_x * (beta - a);
        prev_x = 0.0;
        y.push(cur);
        if cur.abs() <= FILTER_TAIL_REL * peak || peak == 0.0 {
            break;
        }
    }
    y
}

/// Detector-filtered copy of a trace; `tau_d` in the trace's time units.
pub fn detector_convolve(trace: &PulseTrace, tau_d: f64) -> Result<PulseTrace> {
    if !(tau_d >= 0.0 && tau_d.is_finite()) {
        return Err(Error::invalid("tau_d", format!("must be >= 0, got {tau_d}")));
    }
    if tau_d == 0.0 {
        return Ok(trace.clone());
    }
    let h = uniform_step(&trace.times)?;
    let mut s_d = filter_single_pole(&trace.s_d, h, tau_d);
    let mut s_dp = filter_single_pole(&trace.s_dp, h, tau_d);
    let n = s_d.len().max(s_dp.len());
    s_d.resize(n, 0.0);
    s_dp.resize(n, 0.0);
    let t0 = trace.times[0];
    Ok(PulseTrace {
        times: (0..n).map(|k| t0 + h * k as f64).collect(),
        s_d,
        s_dp,
        intens: trace.intens,
        stored: trace.stored,
    })
}

/// Width of the region where `y >= max(y)/e`, with linear interpolation at
/// both crossings. `None` for an all-zero signal.
pub fn full_width_1e(times: &[f64], y: &[f64]) -> Option<f64> {
    let peak = y.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return None;
    }
    let level = peak / std::f64::consts::E;
    let cross = |k: usize| {
        let (y0, y1) = (y[k], y[k + 1]);
        times[k] + (level - y0) / (y1 - y0) * (times[k + 1] - times[k])
    };
    let first = y.iter().position(|&v| v >= level)?;
    let last = y.iter().rposition(|&v| v >= level)?;
    let start = if first == 0 { times[0] } else { cross(first - 1) };
    let end = if last + 1 == y.len() { times[last] } else { cross(last) };
    Some(end - start)
}

/// Intensity grid spelled `lo:hi:nlog` or `lo:hi:nlin`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::invalid("grid", format!("expected lo:hi:<n>log or lo:hi:<n>lin, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n_str = parts[2].trim();
    let (n, log) = if let Some(n) = n_str.strip_suffix("log") {
        (n, true)
    } else if let Some(n) = n_str.strip_suffix("lin") {
        (n, false)
    } else {
        (n_str, false)
    };
    let n: usize = n.parse().map_err(|_| bad())?;
    if n == 0 || !(hi >= lo) || (log && lo <= 0.0) {
        return Err(bad());
    }
    Ok(if log {
        log_grid(lo, hi, n)
    } else if n == 1 {
        vec![lo]
    } else {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    })
}

/// Split intensities of a pulse-pair run with ratio `I_R' / I_R`.
pub fn intensities_for_ratio(i_t: f64, ratio: f64) -> Result<IntensityParams> {
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(Error::invalid("ratio", format!("must be >= 0, got {ratio}")));
    }
    if !(i_t >= 0.0 && i_t.is_finite()) {
        return Err(Error::invalid("i_t", format!("must be >= 0, got {i_t}")));
    }
    Ok(IntensityParams::from_ratio(i_t, ratio))
}
