use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use super::{Mode, SweepError, SweepPlan};
use crate::dynamics::{
    find_equilibrium, local_operating_point, simulate, DynamicsError, Timing, Trajectory,
};
use crate::secular::{hz, predict, Q_STABLE};
use crate::spectral::{
    power_spectrum, track_modes, ModeFit, ModeTrace, Spectrum, TrackInput, TrackStatus,
    TrackedMode, TrackedPoint,
};

/// Initial fit windows span this fraction either side of the prediction.
const INITIAL_WINDOW: f64 = 0.25;

/// Fit result of one mode at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeRecord {
    pub mode: Mode,
    pub status: TrackStatus,
    pub fit: Option<ModeFit>,
    /// Closed-form prediction at the local operating point (Hz).
    pub predicted_hz: Option<f64>,
}

/// Everything recorded at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub index: usize,
    pub param: f64,
    /// Mathieu parameter at the equilibrium (or at the origin without one).
    pub q_z: Option<f64>,
    /// True when the magnet left the escape radius or no trapped equilibrium exists.
    pub escaped: bool,
    pub failure: Option<String>,
    pub equilibrium_m: Option<[f64; 3]>,
    pub resolution_hz: Option<f64>,
    pub modes: Vec<ModeRecord>,
}

impl PointRecord {
    pub fn mode(&self, mode: Mode) -> Option<&ModeRecord> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    /// Fitted frequency of `mode` if it was tracked successfully.
    pub fn f0(&self, mode: Mode) -> Option<f64> {
        self.mode(mode).and_then(|m| m.fit).map(|f| f.f0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub plan: SweepPlan,
    pub points: Vec<PointRecord>,
    pub traces: Vec<(Mode, ModeTrace)>,
}

impl SweepResult {
    /// `(param, f0)` of the successful fits of `mode`, in grid order.
    pub fn successes(&self, mode: Mode) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.f0(mode).map(|f| (p.param, f)))
            .collect()
    }
}

/// Per-point output before tracking.
struct Evaluated {
    record: PointRecord,
    predicted_hz: Vec<Option<f64>>,
    /// One spectrum per plan mode.
    spectra: Option<Vec<Spectrum>>,
}

fn channel_series(traj: &Trajectory, origin: &Vector3<f64>, mode: Mode) -> Vec<f64> {
    match mode {
        Mode::X => traj.series(|s| s.position.x - origin.x),
        Mode::Y => traj.series(|s| s.position.y - origin.y),
        Mode::Z => traj.series(|s| s.position.z - origin.z),
        Mode::Beta => traj.series(|s| s.angles().1),
        Mode::Gamma => traj.series(|s| s.angles().2),
    }
}

fn evaluate(plan: &SweepPlan, index: usize) -> Evaluated {
    let param = plan.grid[index];
    let mut record = PointRecord {
        index,
        param,
        q_z: None,
        escaped: false,
        failure: None,
        equilibrium_m: None,
        resolution_hz: None,
        modes: Vec::new(),
    };
    let mut predicted_hz = vec![None; plan.modes.len()];
    let spectra = match simulate_point(plan, index, &mut record, &mut predicted_hz) {
        Ok(s) => Some(s),
        Err(e) => {
            record.escaped |= matches!(
                e,
                DynamicsError::Escape { .. } | DynamicsError::NoEquilibrium(_)
            );
            log::info!("{} = {param}: {e}", plan.axis.name());
            record.failure = Some(e.to_string());
            None
        }
    };
    Evaluated {
        record,
        predicted_hz,
        spectra,
    }
}

fn simulate_point(
    plan: &SweepPlan,
    index: usize,
    record: &mut PointRecord,
    predicted_hz: &mut [Option<f64>],
) -> Result<Vec<Spectrum>, DynamicsError> {
    let setup = plan.point_setup(index);
    let fields = setup
        .trap_fields()
        .map_err(|e| DynamicsError::InvalidConfig(e.to_string()))?;
    let magnet = &setup.magnet;
    let mut cfg = setup.simulation;
    if plan.modes.iter().any(Mode::is_librational) {
        cfg.resolve_libration = true;
    }
    let offset = Vector3::from(cfg.offset_force_n);
    let origin = Vector3::zeros();

    let equilibrium = if cfg.initial.from_equilibrium {
        match find_equilibrium(&fields, magnet, cfg.gravity_on, &offset, &origin) {
            Ok(r) => r,
            Err(e) => {
                record.q_z = Some(predict(&local_operating_point(&fields, &origin)?, magnet).q_z);
                return Err(e);
            }
        }
    } else {
        origin
    };
    record.equilibrium_m = Some([equilibrium.x, equilibrium.y, equilibrium.z]);

    let op = local_operating_point(&fields, &equilibrium)?;
    let pred = predict(&op, magnet);
    record.q_z = Some(pred.q_z);
    if pred.q_z >= Q_STABLE {
        log::warn!(
            "{} = {}: q_z = {:.3} is outside the adiabatic range (q_z < {Q_STABLE})",
            plan.axis.name(),
            plan.grid[index],
            pred.q_z
        );
    }
    for (slot, mode) in predicted_hz.iter_mut().zip(&plan.modes) {
        *slot = Some(hz(mode.predicted(&pred)));
    }
    let slowest = predicted_hz
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let timing = Timing::resolve(
        &cfg,
        Some(fields.drive.omega_drive),
        if slowest.is_finite() { slowest } else { 0.0 },
        hz(pred.omega_beta),
    )?;
    let init = cfg.initial.state_at(equilibrium);
    let traj = simulate(&init, &fields, magnet, &cfg, &timing)?;

    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    rng.set_stream(index as u64);
    let detection = setup.detection;
    let mut spectra = Vec::with_capacity(plan.modes.len());
    for mode in &plan.modes {
        let mut trace = channel_series(&traj, &equilibrium, *mode);
        let sigma = if mode.is_librational() {
            detection.angle_noise_rad
        } else {
            detection.position_noise_m
        };
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("finite noise level");
            for v in &mut trace {
                *v += normal.sample(&mut rng);
            }
        }
        let n = trace.len();
        let spec = power_spectrum(&trace, traj.sample_rate, n, 0.0).map_err(|e| {
            DynamicsError::InvalidConfig(format!("trace too short for a spectrum: {e}"))
        })?;
        record.resolution_hz = Some(spec.resolution);
        spectra.push(spec);
    }
    Ok(spectra)
}

/// Tracks one mode. Whenever the mode is lost (or the starting point cannot
/// be fitted) tracking restarts from the closed-form prediction at the next
/// point with a spectrum.
fn track_one(plan: &SweepPlan, evaluated: &[Evaluated], slot: usize) -> ModeTrace {
    let mode = plan.modes[slot];
    let hint = plan.axis.hint(mode);
    let inputs: Vec<TrackInput> = evaluated
        .iter()
        .map(|e| TrackInput {
            param: e.record.param,
            spectra: e.spectra.as_ref().map(|s| vec![s[slot].clone()]),
        })
        .collect();
    let unfitted = |inp: &TrackInput| TrackedPoint {
        param: inp.param,
        window: (0.0, 0.0),
        fit: None,
        status: if inp.spectra.is_some() {
            TrackStatus::Lost
        } else {
            TrackStatus::Missing
        },
    };
    let mut first_window = None;
    let mut points: Vec<TrackedPoint> = Vec::with_capacity(inputs.len());
    while points.len() < inputs.len() {
        let i = points.len();
        let center = evaluated[i].predicted_hz[slot].unwrap_or(0.0);
        if inputs[i].spectra.is_none() || center <= 0.0 {
            points.push(unfitted(&inputs[i]));
            continue;
        }
        let tracked = TrackedMode {
            channel: 0,
            window: (
                (1.0 - INITIAL_WINDOW) * center,
                (1.0 + INITIAL_WINDOW) * center,
            ),
            hint,
        };
        let Ok(mut traces) = track_modes(&inputs[i..], &[tracked]) else {
            log::info!(
                "mode {mode}: no acceptable peak near {center:.3} Hz at {} = {}",
                plan.axis.name(),
                inputs[i].param
            );
            points.push(unfitted(&inputs[i]));
            continue;
        };
        first_window.get_or_insert(tracked.window);
        let segment = traces.remove(0).points;
        // keep everything up to the first loss, then re-acquire there
        let keep = segment
            .iter()
            .position(|p| p.status == TrackStatus::Lost)
            .unwrap_or(segment.len());
        points.extend(segment.into_iter().take(keep));
    }
    ModeTrace {
        mode: TrackedMode {
            channel: 0,
            window: first_window.unwrap_or((0.0, 0.0)),
            hint,
        },
        points,
    }
}

/// Runs every grid point (concurrently, up to `workers` threads) and tracks
/// the plan's modes across the grid.
///
/// Points are independent simulations and are assembled by grid index, so
/// the result does not depend on scheduling. A point whose magnet escapes
/// or cannot be trapped is kept with `escaped = true`; only an invalid plan
/// fails the whole sweep.
pub fn run_sweep(plan: &SweepPlan, workers: usize) -> Result<SweepResult, SweepError> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SweepError::InvalidPlan(format!("cannot start {workers} workers: {e}")))?;
    let evaluated: Vec<Evaluated> = pool.install(|| {
        (0..plan.grid.len())
            .into_par_iter()
            .map(|i| evaluate(plan, i))
            .collect()
    });

    let traces: Vec<(Mode, ModeTrace)> = (0..plan.modes.len())
        .map(|slot| (plan.modes[slot], track_one(plan, &evaluated, slot)))
        .collect();

    let points = evaluated
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut record = e.record;
            record.modes = traces
                .iter()
                .zip(&e.predicted_hz)
                .map(|((mode, trace), predicted)| ModeRecord {
                    mode: *mode,
                    status: trace.points[i].status,
                    fit: trace.points[i].fit,
                    predicted_hz: *predicted,
                })
                .collect();
            record
        })
        .collect();
    Ok(SweepResult {
        plan: plan.clone(),
        points,
        traces,
    })
}
