use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use mpt_core::config::RunConfig;
use mpt_core::dynamics::{
    find_equilibrium, local_operating_point, simulate as run_simulation, Timing, TrapFields,
};
use mpt_core::magnetostatics::{
    bias_field, calibration_tables, trap_curvature, trap_field_amplitude, write_calibration_csv,
    CalibrationSettings,
};
use mpt_core::secular::{
    hz, mathieu_q, predict as predict_modes, stability_check, OperatingPoint, PredictionRecord,
    Q_MATHIEU_BOUNDARY, Q_STABLE,
};
use mpt_core::spectral::{fit_lorentzian, fit_ringdown, power_spectrum, RingdownOptions};
use mpt_core::sweep::{
    reproduce_figure, run_sweep, write_sweep_outputs, FigureId, FigureOptions, FitsFile,
};
use mpt_core::Vector3;
use serde_json::{json, Value};

use crate::error::{CliError, IoContext};
use crate::DriveOverrides;

fn with_drive(cfg: &RunConfig, drive: &DriveOverrides) -> Result<RunConfig, CliError> {
    let mut cfg = cfg.clone();
    if let Some(f) = drive.frequency_hz {
        cfg.drive.frequency_hz = f;
    }
    if let Some(i) = drive.i_trap {
        cfg.drive.i_trap_a = i;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).at(&dir)?;
    cfg.write_resolved(&dir).at(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::numeric(e.to_string()))?;
    std::fs::write(path, text + "\n").at(path)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).at(path)?))
}

/// Operating point at the trapped equilibrium, or at the trap center when
/// none exists. The label says which.
fn model_operating_point(
    cfg: &RunConfig,
) -> Result<(OperatingPoint, Vector3<f64>, &'static str), CliError> {
    let setup = cfg.setup();
    let fields = setup.trap_fields()?;
    let offset = Vector3::from(setup.simulation.offset_force_n);
    let origin = Vector3::zeros();
    let (at, source) = match find_equilibrium(
        &fields,
        &setup.magnet,
        setup.simulation.gravity_on,
        &offset,
        &origin,
    ) {
        Ok(r) => (r, "equilibrium"),
        Err(e) => {
            log::warn!("{e}; evaluating at the trap center");
            (origin, "center")
        }
    };
    Ok((local_operating_point(&fields, &at)?, at, source))
}

fn operating_point(
    cfg: &RunConfig,
    b1pp: Option<f64>,
    b0: Option<f64>,
) -> Result<(OperatingPoint, &'static str), CliError> {
    let (mut op, _, source) = model_operating_point(cfg)?;
    let mut source = source;
    if let Some(c) = b1pp {
        if !(c.is_finite() && c >= 0.0) {
            return Err(CliError::config(format!(
                "--b1pp must be finite and >= 0, got {c}"
            )));
        }
        op.b1_curvature = c;
        source = "override";
    }
    if let Some(b) = b0 {
        if !(b.is_finite() && b >= 0.0) {
            return Err(CliError::config(format!(
                "--b0 must be finite and >= 0, got {b}"
            )));
        }
        op.b0 = b;
    }
    Ok((op, source))
}

pub fn field(
    cfg: &RunConfig,
    drive: &DriveOverrides,
    z_span: f64,
    points: usize,
    max_current: f64,
    current_steps: usize,
) -> Result<(), CliError> {
    if !(z_span.is_finite() && z_span > 0.0) || points < 2 {
        return Err(CliError::config("--z-span must be > 0 and --points >= 2"));
    }
    if !(max_current.is_finite() && max_current > 0.0) || current_steps < 2 {
        return Err(CliError::config(
            "--max-current must be > 0 and --current-steps >= 2",
        ));
    }
    let cfg = with_drive(cfg, drive)?;
    let dir = output_dir(&cfg)?;
    let setup = cfg.setup();
    let fields = setup.trap_fields()?;
    let drive = fields.drive;

    let path = dir.join("field_profile.csv");
    let mut out = create(&path)?;
    writeln!(
        out,
        "z_m,b0_z_T,b0_gradient_T_per_m,b1_z_T,b1_curvature_T_per_m2"
    )
    .at(&path)?;
    for k in 0..points {
        let z = -z_span + 2.0 * z_span * k as f64 / (points - 1) as f64;
        let r = Vector3::new(0.0, 0.0, z);
        let bias = bias_field(&fields.geom, &fields.bias, &r, true)?;
        let trap = trap_field_amplitude(&fields.geom, &drive, &r, false)?;
        let curvature = trap_curvature(&fields.geom, drive.i_trap, drive.xi, z)?;
        let gradient = bias.jacobian.map(|j| j[(2, 2)]).unwrap_or_default();
        writeln!(out, "{z},{},{gradient},{},{curvature}", bias.b.z, trap.b.z).at(&path)?;
    }
    out.flush().at(&path)?;

    let currents: Vec<f64> = (1..=current_steps)
        .map(|k| max_current * k as f64 / current_steps as f64)
        .collect();
    let settings = CalibrationSettings {
        xi: drive.xi,
        ..Default::default()
    };
    let rows = calibration_tables(&fields.geom, &currents, &settings)?;
    let path = dir.join("calibration.csv");
    let mut out = create(&path)?;
    write_calibration_csv(&rows, &mut out).at(&path)?;
    out.flush().at(&path)?;

    let center = local_operating_point(&fields, &Vector3::zeros())?;
    let summary = json!({
        "b0_T": center.b0,
        "b0_gradient_T_per_m": center.b0_gradient,
        "b1_curvature_T_per_m2": center.b1_curvature,
        "b1_curvature_per_ampere_T_per_m2_A": trap_curvature(&fields.geom, 1.0, drive.xi, 0.0)?,
        "i_top_A": fields.bias.i_top,
        "i_bottom_A": fields.bias.i_bottom,
        "i_trap_A": drive.i_trap,
        "xi": drive.xi,
    });
    write_json(&dir.join("field.json"), &summary)?;
    println!("{summary}");
    Ok(())
}

pub fn predict(
    cfg: &RunConfig,
    drive: &DriveOverrides,
    b1pp: Option<f64>,
    b0: Option<f64>,
) -> Result<(), CliError> {
    let cfg = with_drive(cfg, drive)?;
    let (op, source) = operating_point(&cfg, b1pp, b0)?;
    let record = PredictionRecord::from(&predict_modes(&op, &cfg.magnet));
    let mut value = serde_json::to_value(record).map_err(|e| CliError::numeric(e.to_string()))?;
    if let Value::Object(map) = &mut value {
        map.insert("frequency_hz".into(), json!(hz(op.omega_drive)));
        map.insert("b1_curvature_T_per_m2".into(), json!(op.b1_curvature));
        map.insert("b0_T".into(), json!(op.b0));
        map.insert("curvature_source".into(), json!(source));
    }
    println!("{value}");
    Ok(())
}

pub fn stability(
    cfg: &RunConfig,
    drive: &DriveOverrides,
    b1pp: Option<f64>,
) -> Result<(), CliError> {
    let cfg = with_drive(cfg, drive)?;
    let (op, source) = operating_point(&cfg, b1pp, None)?;
    let (q_z, q_xy) = mathieu_q(&op, &cfg.magnet);
    let class = stability_check(q_z);
    if q_z >= Q_STABLE {
        log::warn!("q_z = {q_z:.3} is outside the adiabatic range (q_z < {Q_STABLE})");
    }
    let value = json!({
        "q_z": q_z,
        "q_xy": q_xy,
        "stability": class.as_str(),
        "q_stable": Q_STABLE,
        "q_mathieu_boundary": Q_MATHIEU_BOUNDARY,
        "frequency_hz": hz(op.omega_drive),
        "b1_curvature_T_per_m2": op.b1_curvature,
        "curvature_source": source,
    });
    println!("{value}");
    Ok(())
}

pub fn simulate(cfg: &RunConfig, drive: &DriveOverrides) -> Result<(), CliError> {
    let cfg = with_drive(cfg, drive)?;
    let setup = cfg.setup();
    let fields: TrapFields = setup.trap_fields()?;
    let sim = setup.simulation;
    let offset = Vector3::from(sim.offset_force_n);
    let origin = if sim.initial.from_equilibrium {
        find_equilibrium(
            &fields,
            &setup.magnet,
            sim.gravity_on,
            &offset,
            &Vector3::zeros(),
        )?
    } else {
        Vector3::zeros()
    };
    let op = local_operating_point(&fields, &origin)?;
    let pred = predict_modes(&op, &setup.magnet);
    if pred.q_z >= Q_STABLE {
        log::warn!(
            "q_z = {:.3} is outside the adiabatic range (q_z < {Q_STABLE})",
            pred.q_z
        );
    }
    let timing = Timing::resolve(
        &sim,
        Some(op.omega_drive),
        hz(pred.omega_x),
        hz(pred.omega_beta),
    )?;
    log::info!(
        "simulating {} steps of {:.3e} s (q_z = {:.3})",
        timing.steps,
        timing.dt,
        pred.q_z
    );
    let traj = run_simulation(
        &sim.initial.state_at(origin),
        &fields,
        &setup.magnet,
        &sim,
        &timing,
    )?;

    let dir = output_dir(&cfg)?;
    let path = dir.join("trajectory.csv");
    let mut out = create(&path)?;
    traj.write_csv(&mut out).at(&path)?;
    out.flush().at(&path)?;
    let summary = json!({
        "equilibrium_m": [origin.x, origin.y, origin.z],
        "prediction": PredictionRecord::from(&pred),
        "dt_s": timing.dt,
        "steps": timing.steps,
        "sample_rate_hz": traj.sample_rate,
        "samples": traj.len(),
    });
    write_json(&dir.join("simulate.json"), &summary)?;
    println!("{summary}");
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Column to analyze (default: the first column after the time column).
    #[arg(long)]
    column: Option<String>,
    /// Time column used to infer the sample rate.
    #[arg(long, default_value = "t_s")]
    time_column: String,
    /// Sample rate (Hz); overrides the time column.
    #[arg(long)]
    sample_rate_hz: Option<f64>,
    /// Welch segment length in samples (default: whole trace).
    #[arg(long)]
    segment_length: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    /// Fit a Lorentzian in this window (Hz).
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    window: Option<Vec<f64>>,
    /// Fit an exponentially decaying oscillation.
    #[arg(long)]
    ringdown: bool,
    /// Fit only the decay envelope (needs --ringdown-frequency-hz).
    #[arg(long, requires = "ringdown")]
    envelope: bool,
    #[arg(long)]
    ringdown_frequency_hz: Option<f64>,
}

struct Columns {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_columns(path: &Path) -> Result<Columns, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .at(path)?;
    let names = reader
        .headers()
        .at(path)?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.at(path)?;
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    CliError::config(format!(
                        "{}: row {}: '{s}' is not a number",
                        path.display(),
                        line + 2
                    ))
                })
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        rows.push(row);
    }
    Ok(Columns { names, rows })
}

impl Columns {
    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }
}

pub fn analyze(cfg: &RunConfig, args: &AnalyzeArgs) -> Result<(), CliError> {
    let data = read_columns(&args.input)?;
    let time = data.index(&args.time_column);
    let column = match &args.column {
        Some(name) => data.index(name).ok_or_else(|| {
            CliError::config(format!(
                "column '{name}' not found in {}",
                args.input.display()
            ))
        })?,
        None => (0..data.names.len())
            .find(|&i| Some(i) != time)
            .ok_or_else(|| CliError::config("input has no data column"))?,
    };
    let trace = data.column(column);
    let sample_rate = match (args.sample_rate_hz, time) {
        (Some(r), _) => r,
        (None, Some(t)) => {
            let t = data.column(t);
            if t.len() < 2 {
                return Err(CliError::config(
                    "need at least two samples to infer the sample rate",
                ));
            }
            (t.len() - 1) as f64 / (t[t.len() - 1] - t[0])
        }
        (None, None) => {
            return Err(CliError::config(format!(
                "no '{}' column; pass --sample-rate-hz",
                args.time_column
            )))
        }
    };

    let segment = args.segment_length.unwrap_or(trace.len());
    let spectrum = power_spectrum(&trace, sample_rate, segment, args.overlap)?;
    let dir = output_dir(cfg)?;
    let path = dir.join("spectrum.csv");
    let mut out = create(&path)?;
    spectrum.write_csv(&mut out).at(&path)?;
    out.flush().at(&path)?;

    let mut summary = json!({
        "column": data.names[column],
        "samples": trace.len(),
        "sample_rate_hz": sample_rate,
        "resolution_hz": spectrum.resolution,
    });
    if let Some(w) = &args.window {
        let fit = fit_lorentzian(&spectrum, (w[0], w[1]))?;
        summary["lorentzian"] =
            serde_json::to_value(fit).map_err(|e| CliError::numeric(e.to_string()))?;
    }
    if args.ringdown {
        let options = RingdownOptions {
            envelope_only: args.envelope,
            frequency_hz: args.ringdown_frequency_hz,
        };
        let fit = fit_ringdown(&trace, sample_rate, &options)?;
        summary["ringdown"] =
            serde_json::to_value(fit).map_err(|e| CliError::numeric(e.to_string()))?;
    }
    write_json(&dir.join("analysis.json"), &summary)?;
    println!("{summary}");
    Ok(())
}

pub fn sweep(cfg: &RunConfig, workers: usize) -> Result<(), CliError> {
    let section = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("the configuration has no [sweep] section"))?;
    let plan = section.plan(cfg.setup());
    let result = run_sweep(&plan, workers)?;
    let fits = FitsFile::from_result(&result, None);
    let dir = cfg.output_dir.clone();
    write_sweep_outputs(&result, &fits, &dir)?;
    let escaped = result.points.iter().filter(|p| p.escaped).count();
    log::info!(
        "{} points written to {} ({escaped} escaped)",
        result.points.len(),
        dir.display()
    );
    Ok(())
}

pub fn figure(cfg: &RunConfig, id: FigureId, workers: usize) -> Result<(), CliError> {
    let opts = FigureOptions {
        workers,
        seed: cfg.seed,
    };
    let report = reproduce_figure(id, &cfg.output_dir, &opts)?;
    log::info!("{id} written to {}", cfg.output_dir.display());
    if let Some(fits) = &report.fits {
        for f in &fits.fits {
            log::info!(
                "{}: {:?} coefficient {:.6e}, R^2 {:.4}, free exponent {:.3}",
                f.mode,
                f.law,
                f.coefficient,
                f.r_squared,
                f.exponent
            );
        }
    }
    Ok(())
}
