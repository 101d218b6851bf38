//! Command surface: argument types, the commands behind each subcommand and
//! the CSV/JSON writers with their metadata header.
//!
//! Every output begins with `#` lines carrying the crate version, the fully
//! resolved configuration as JSON, its SHA-256 and the unit mode. Output
//! routing (`--out`, `--json`) is not part of the configuration.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::budget::budget_from_moments;
use crate::error::{Error, Result};
use crate::kernel::build_kernel;
use crate::model::{DriveConfig, IntensityParams, StoredState};
use crate::oracle::{self, drive_for, integrate_bloch, oracle_energies, phase_sweep};
use crate::readout::{pq_state, pulse_energies, pulse_signals, uniform_times, KernelMoments};
use crate::scan::{
    self, asymptote_curve, detector_convolve, energy_scan, fit_it, intensities_for_ratio,
    parse_grid, synthetic_fit_data, FitPoint, GAMMA22_CESIUM,
};

pub const DEFAULT_RATIOS: [f64; 4] = [0.02, 0.57, 1.04, 1.76];
pub const FIT_INTENSITY: f64 = 1.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitMode {
    Dimensionless,
    Physical,
}

impl UnitMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            UnitMode::Dimensionless => "dimensionless",
            UnitMode::Physical => "physical",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pulsepair", version, about = "Pulse pairs retrieved from a stored coherence grating")]
pub struct Cli {
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write JSON instead of CSV.
    #[arg(long, global = true)]
    pub json: bool,
}

/// Storage and unit options shared by most subcommands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Ground coherence decay rate, units of gamma22.
    #[arg(long, default_value_t = 0.0)]
    pub gamma_ground: f64,
    /// Storage time, units of 1/gamma22.
    #[arg(long, default_value_t = 0.0)]
    pub t_storage: f64,
    /// Report times in microseconds using the cesium D2 decay rate.
    #[arg(long)]
    pub physical: bool,
}

impl CommonArgs {
    fn drive(&self) -> DriveConfig {
        DriveConfig {
            gamma_ground: self.gamma_ground,
            t_storage: self.t_storage,
            ..DriveConfig::default()
        }
    }

    fn stored(&self) -> Result<StoredState> {
        let d = self.drive();
        d.validate()?;
        d.stored_state()
    }

    fn warnings(&self) -> Vec<String> {
        self.drive().validity_warning().into_iter().collect()
    }
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Diffracted signals versus time for one or more intensity ratios.
    PulseShape(PulseShapeArgs),
    /// Normalized energies versus the R intensity at fixed total intensity.
    EnergyScan(EnergyScanArgs),
    /// Location and depth of the total-energy minimum versus total intensity.
    MinCurve(MinCurveArgs),
    /// Balanced-to-single total energy ratio versus total intensity.
    Asymptote(AsymptoteArgs),
    /// Fit the total intensity to measured channel energies.
    Fit(FitArgs),
    /// Compare the closed forms with direct integration of the Bloch equations.
    OracleCheck(OracleCheckArgs),
    /// Spontaneous, stimulated and non-phase-matched energies versus split.
    EmissionBudget(EmissionBudgetArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::PulseShape(_) => "pulse-shape",
            Command::EnergyScan(_) => "energy-scan",
            Command::MinCurve(_) => "min-curve",
            Command::Asymptote(_) => "asymptote",
            Command::Fit(_) => "fit",
            Command::OracleCheck(_) => "oracle-check",
            Command::EmissionBudget(_) => "emission-budget",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PulseShapeArgs {
    /// Total reading intensity in saturation units.
    #[arg(long = "it", default_value_t = FIT_INTENSITY)]
    pub i_t: f64,
    /// Intensity ratios I_R'/I_R (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = DEFAULT_RATIOS)]
    pub ratio: Vec<f64>,
    /// Samples per trace.
    #[arg(long, default_value_t = crate::readout::DEFAULT_TRACE_POINTS)]
    pub points: usize,
    /// End of the trace window, units of 1/gamma22.
    #[arg(long, default_value_t = crate::readout::DEFAULT_TRACE_END)]
    pub t_end: f64,
    /// Detector response time (1/gamma22, or microseconds with --physical).
    #[arg(long, default_value_t = 0.0)]
    pub tau_d: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnergyScanArgs {
    #[arg(long = "it", default_value_t = 100.0)]
    pub i_t: f64,
    /// Odd number of grid points over [0, I_t].
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MinCurveArgs {
    /// Total intensities as lo:hi:<n>log or lo:hi:<n>lin.
    #[arg(long, default_value = "1e-2:1e4:13log")]
    pub it_grid: String,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Relative depth below the endpoints required for an interior minimum.
    #[arg(long, default_value_t = scan::DEFAULT_FLATNESS_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AsymptoteArgs {
    #[arg(long, default_value = "1e-3:1e4:25log")]
    pub it_grid: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// CSV with columns i_r_over_it, u_d, u_dp (`#` lines ignored).
    #[arg(long, required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,
    /// Fit synthetic data generated at --it instead of reading --input.
    #[arg(long, conflicts_with = "input")]
    pub synthetic: bool,
    #[arg(long = "it", default_value_t = FIT_INTENSITY)]
    pub i_t: f64,
    /// Relative Gaussian noise on synthetic data.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Search interval for I_t as lo,hi.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.01, 100.0])]
    pub bounds: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OracleCheckArgs {
    #[arg(long = "it", default_value_t = FIT_INTENSITY)]
    pub i_t: f64,
    #[arg(long, default_value_t = 0.57, allow_hyphen_values = true)]
    pub ratio: f64,
    /// Integrator tolerance.
    #[arg(long, default_value_t = oracle::DEFAULT_TOLERANCE)]
    pub tol: f64,
    /// Sample times in [0, 20/gamma22].
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Grating phases for the harmonic decomposition.
    #[arg(long, default_value_t = oracle::DEFAULT_PHASES)]
    pub phases: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmissionBudgetArgs {
    #[arg(long = "it", default_value_t = FIT_INTENSITY)]
    pub i_t: f64,
    /// Grid points over I_R in [0, I_t].
    #[arg(long, default_value_t = 11)]
    pub points: usize,
}

/// Resolved configuration echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub units: UnitMode,
}

impl RunConfig {
    pub fn from_command(cmd: &Command) -> Self {
        let mut params = BTreeMap::new();
        if let serde_json::Value::Object(outer) = serde_json::to_value(cmd).expect("arguments serialize") {
            for (_, inner) in outer {
                flatten_into(&mut params, inner);
            }
        }
        let physical = matches!(params.get("physical"), Some(serde_json::Value::Bool(true)));
        RunConfig {
            subcommand: cmd.name().to_string(),
            params,
            units: if physical { UnitMode::Physical } else { UnitMode::Dimensionless },
        }
    }

    /// Canonical JSON: keys sorted, no whitespace.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.to_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn flatten_into(map: &mut BTreeMap<String, serde_json::Value>, v: serde_json::Value) {
    if let serde_json::Value::Object(obj) = v {
        for (k, val) in obj {
            if val.is_object() {
                flatten_into(map, val);
            } else {
                map.insert(k, val);
            }
        }
    }
}

/// Rows of formatted cells plus extra metadata lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| num(v)).collect());
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column by name; non-numeric cells become NaN.
    pub fn values(&self, name: &str) -> Vec<f64> {
        let Some(j) = self.column(name) else { return Vec::new() };
        self.rows.iter().map(|r| r[j].parse().unwrap_or(f64::NAN)).collect()
    }
}

/// Shortest round-trip representation.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn flag(b: bool) -> String {
    (if b { "1" } else { "0" }).to_string()
}

pub fn header_lines(config: &RunConfig, table: &Table) -> Vec<String> {
    let mut lines = vec![
        format!("pulsepair {}", env!("CARGO_PKG_VERSION")),
        format!("subcommand: {}", config.subcommand),
        format!("config: {}", config.to_json()),
        format!("config_sha256: {}", config.hash()),
        format!("units: {}", config.units.as_str()),
    ];
    lines.extend(table.notes.iter().cloned());
    lines
}

pub fn render_csv(config: &RunConfig, table: &Table) -> Result<String> {
    let mut out = String::new();
    for line in header_lines(config, table) {
        out.push_str("# ");
        out.push_str(&line);
        out.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))?);
    Ok(out)
}

pub fn render_json(config: &RunConfig, table: &Table) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        version: &'a str,
        config: &'a RunConfig,
        config_sha256: String,
        notes: &'a [String],
        columns: &'a [String],
        rows: &'a [Vec<String>],
    }
    let doc = Doc {
        version: env!("CARGO_PKG_VERSION"),
        config,
        config_sha256: config.hash(),
        notes: &table.notes,
        columns: &table.columns,
        rows: &table.rows,
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_output(config: &RunConfig, table: &Table, output: &OutputArgs) -> Result<()> {
    let text = if output.json {
        render_json(config, table)?
    } else {
        render_csv(config, table)?
    };
    match &output.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs one subcommand and returns its table.
pub fn execute(cmd: &Command) -> Result<Table> {
    match cmd {
        Command::PulseShape(a) => cmd_pulse_shape(a),
        Command::EnergyScan(a) => cmd_energy_scan(a),
        Command::MinCurve(a) => cmd_min_curve(a),
        Command::Asymptote(a) => cmd_asymptote(a),
        Command::Fit(a) => cmd_fit(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
        Command::EmissionBudget(a) => cmd_emission_budget(a),
    }
}

/// Parses, runs and writes; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let config = RunConfig::from_command(&cli.command);
    let result = execute(&cli.command).and_then(|t| write_output(&config, &t, &cli.output));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn cmd_pulse_shape(a: &PulseShapeArgs) -> Result<Table> {
    if a.points < 2 {
        return Err(Error::invalid("points", "need at least 2"));
    }
    if !(a.t_end > 0.0) {
        return Err(Error::invalid("t_end", "must be > 0"));
    }
    let stored = a.common.stored()?;
    let physical = a.common.physical;
    let tau = if physical { scan::micros_to_dimensionless(a.tau_d, GAMMA22_CESIUM) } else { a.tau_d };
    let mut t = Table::new(&["ratio", if physical { "time_us" } else { "time" }, "s_d", "s_dp"]);
    t.notes.extend(a.common.warnings());
    if physical {
        t.notes.push(format!("gamma22: {GAMMA22_CESIUM:?} 1/s"));
    }
    let times = uniform_times(a.t_end, a.points);
    for &ratio in &a.ratio {
        let intens = intensities_for_ratio(a.i_t, ratio)?;
        let trace = detector_convolve(&pulse_signals(&intens, &stored, &times, 1.0, 1.0, 1.0)?, tau)?;
        for k in 0..trace.times.len() {
            let time = if physical {
                scan::dimensionless_to_micros(trace.times[k], GAMMA22_CESIUM)
            } else {
                trace.times[k]
            };
            t.push_nums(&[ratio, time, trace.s_d[k], trace.s_dp[k]]);
        }
    }
    Ok(t)
}

pub fn cmd_energy_scan(a: &EnergyScanArgs) -> Result<Table> {
    let curve = energy_scan(a.i_t, a.points, &a.common.stored()?, 1.0)?;
    let mut t = Table::new(&["i_r", "i_r_over_it", "u_t", "u_d", "u_dp"]);
    t.notes.extend(a.common.warnings());
    t.notes.push(format!("normalization: {}", num(curve.normalization)));
    for p in &curve.points {
        t.push_nums(&[p.i_r, p.i_r / curve.i_t, p.u_t, p.u_d, p.u_dp]);
    }
    Ok(t)
}

pub fn cmd_min_curve(a: &MinCurveArgs) -> Result<Table> {
    let grid = parse_grid(&a.it_grid)?;
    let stored = a.common.stored()?;
    let mut t = Table::new(&["i_t", "i_r_star", "i_r_star_over_it", "u_t_star", "has_interior_min"]);
    t.notes.extend(a.common.warnings());
    for &it in &grid {
        let m = scan::find_minimum_with_tol(&energy_scan(it, a.points, &stored, 1.0)?, a.tol);
        t.push(vec![
            num(it),
            num(m.i_r_star),
            num(m.i_r_star / it),
            num(m.u_t_star),
            flag(m.has_interior_min),
        ]);
    }
    Ok(t)
}

pub fn cmd_asymptote(a: &AsymptoteArgs) -> Result<Table> {
    let mut t = Table::new(&["i_t", "ratio"]);
    for (it, r) in asymptote_curve(&parse_grid(&a.it_grid)?, 1.0)? {
        t.push_nums(&[it, r]);
    }
    Ok(t)
}

/// Reads `i_r_over_it, u_d, u_dp` rows; `#` lines and a header are skipped.
pub fn read_fit_csv(path: &Path) -> Result<Vec<FitPoint>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid("input", format!("missing column `{name}`")))
    };
    let (cx, cd, cdp) = (col("i_r_over_it")?, col("u_d")?, col("u_dp")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        let field = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::invalid("input", format!("bad number in row {:?}", rec)))
        };
        out.push(FitPoint {
            i_r_over_it: field(cx)?,
            u_d: field(cd)?,
            u_dp: field(cdp)?,
        });
    }
    Ok(out)
}

pub fn cmd_fit(a: &FitArgs) -> Result<Table> {
    let data = match (&a.input, a.synthetic) {
        (Some(path), false) => read_fit_csv(path)?,
        (None, true) => synthetic_fit_data(a.i_t, &scan::default_fit_splits(), a.noise, a.seed, 1.0)?,
        _ => return Err(Error::invalid("input", "give exactly one of --input and --synthetic")),
    };
    let r = fit_it(&data, (a.bounds[0], a.bounds[1]), 1.0)?;
    let mut t = Table::new(&["i_t_hat", "scale_d", "scale_dp", "residual_norm", "iterations", "at_boundary"]);
    t.notes.push("scales: fitted per channel by linear least squares at every trial I_t".into());
    if r.at_boundary {
        t.notes.push("warning: best coarse candidate lies on a search bound".into());
    }
    t.push(vec![
        num(r.i_t_hat),
        num(r.scale_d),
        num(r.scale_dp),
        num(r.residual_norm),
        r.iterations.to_string(),
        flag(r.at_boundary),
    ]);
    Ok(t)
}

/// Largest pointwise deviations between closed forms and the integrator,
/// plus the energies from both routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleReport {
    pub max_err_p_r: f64,
    pub max_err_p_i: f64,
    pub max_err_q_r: f64,
    pub max_err_q_i: f64,
    pub u_d_analytic: f64,
    pub u_dp_analytic: f64,
    pub u_d_oracle: f64,
    pub u_dp_oracle: f64,
}

impl OracleReport {
    pub fn max_pointwise(&self) -> f64 {
        self.max_err_p_r.max(self.max_err_p_i).max(self.max_err_q_r).max(self.max_err_q_i)
    }
}

/// Pointwise comparison on `points` samples of `[0, 20/gamma22]` at grating
/// phase zero, and energy comparison through the phase harmonics.
pub fn oracle_check(
    intens: &IntensityParams,
    stored: &StoredState,
    points: usize,
    phases: usize,
    tol: f64,
) -> Result<OracleReport> {
    let kernel = build_kernel(intens.i_t, 1.0)?;
    let times = uniform_times(crate::readout::DEFAULT_TRACE_END, points);
    let drive = drive_for(intens, 1.0);
    let traj = integrate_bloch(&drive, stored, &times, tol)?;
    let mut err = [0.0f64; 4];
    for (k, &t) in times.iter().enumerate() {
        let a = pq_state(&kernel, intens, stored, t);
        let o = traj.pq_state(k);
        for (e, d) in err
            .iter_mut()
            .zip([a.p_r - o.p_r, a.p_i - o.p_i, a.q_r - o.q_r, a.q_i - o.q_i])
        {
            *e = e.max(d.abs());
        }
    }
    let analytic = pulse_energies(intens, stored, 1.0, 1.0, 1.0)?;
    let grid = oracle::oracle_energy_grid(intens.i_t, 1.0)?;
    let h = phase_sweep(&drive, stored, phases, &grid, tol)?;
    let o = oracle_energies(&h, 1.0, 1.0)?;
    Ok(OracleReport {
        max_err_p_r: err[0],
        max_err_p_i: err[1],
        max_err_q_r: err[2],
        max_err_q_i: err[3],
        u_d_analytic: analytic.u_d,
        u_dp_analytic: analytic.u_dp,
        u_d_oracle: o.u_d,
        u_dp_oracle: o.u_dp,
    })
}

pub fn cmd_oracle_check(a: &OracleCheckArgs) -> Result<Table> {
    let intens = intensities_for_ratio(a.i_t, a.ratio)?;
    let r = oracle_check(&intens, &a.common.stored()?, a.points, a.phases, a.tol)?;
    let mut t = Table::new(&["quantity", "analytic", "oracle", "abs_error"]);
    t.notes.extend(a.common.warnings());
    t.notes.push(format!("max_pointwise_error: {}", num(r.max_pointwise())));
    for (name, e) in [
        ("p_r", r.max_err_p_r),
        ("p_i", r.max_err_p_i),
        ("q_r", r.max_err_q_r),
        ("q_i", r.max_err_q_i),
    ] {
        t.push(vec![format!("max_pointwise_{name}"), String::new(), String::new(), num(e)]);
    }
    for (name, x, y) in [("u_d", r.u_d_analytic, r.u_d_oracle), ("u_dp", r.u_dp_analytic, r.u_dp_oracle)] {
        t.push(vec![name.to_string(), num(x), num(y), num((x - y).abs())]);
    }
    Ok(t)
}

pub fn cmd_emission_budget(a: &EmissionBudgetArgs) -> Result<Table> {
    if a.points < 2 {
        return Err(Error::invalid("points", "need at least 2"));
    }
    if !(a.i_t >= 0.0 && a.i_t.is_finite()) {
        return Err(Error::invalid("i_t", "must be >= 0"));
    }
    let m = KernelMoments::compute(a.i_t, 1.0)?;
    let mut t = Table::new(&[
        "i_r",
        "i_rp",
        "u_d",
        "u_dp",
        "u_t",
        "u_spont",
        "u_stim_r",
        "u_stim_rp",
        "u_stim_total",
        "u_npm_a",
        "u_npm_b",
        "u_npm_total",
    ]);
    for k in 0..a.points {
        let i_r = a.i_t * k as f64 / (a.points - 1) as f64;
        let intens = IntensityParams::split(a.i_t, i_r);
        let b = budget_from_moments(&m, &intens);
        let e = m.energies(i_r, 1.0, 1.0, 1.0);
        t.push_nums(&[
            intens.i_r,
            intens.i_rp,
            e.u_d,
            e.u_dp,
            e.u_t,
            b.u_spont,
            b.u_stim_r,
            b.u_stim_rp,
            b.u_stim_total,
            b.u_npm_a,
            b.u_npm_b,
            b.u_npm_total,
        ]);
    }
    Ok(t)
}
