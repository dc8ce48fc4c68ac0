//! Fixed-step RK4 integration of the coupled translational and rotational motion.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::forces::{point_dipole_load, volume_averaged_load, BodyLoad, CubeQuadrature};
use super::{DynamicsError, FieldSource, RigidState};
use crate::magnetostatics::OUTER_RADIUS;
use crate::secular::MagnetSpec;
use crate::STANDARD_GRAVITY;

pub const TRAJECTORY_HEADER: &str = "t_s,x_m,y_m,z_m,vx,vy,vz,alpha_rad,beta_rad,gamma_rad";

/// Largest allowed step as a fraction of the drive period.
const STEPS_PER_DRIVE_PERIOD: f64 = 100.0;
/// Steps per libration period when libration is resolved.
const STEPS_PER_LIBRATION_PERIOD: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForceModel {
    #[default]
    PointDipole,
    /// Gauss–Legendre average over the cube with `order` points per axis.
    FiniteVolume { order: usize },
}

/// Scalar moment of inertia used for the (isotropic) rotor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InertiaModel {
    /// `(2/5)·m·a²`, the inertia under which the small-angle libration
    /// frequency is `√(5/2 · B₀B_sat/(μ₀ρa²))`.
    #[default]
    SphereEquivalent,
    /// Solid cube about a face-normal axis, `m·a²/6`.
    Cube,
}

impl InertiaModel {
    pub fn moment_of_inertia(&self, spec: &MagnetSpec) -> f64 {
        let ma2 = spec.mass() * spec.edge * spec.edge;
        match self {
            InertiaModel::SphereEquivalent => 0.4 * ma2,
            InertiaModel::Cube => ma2 / 6.0,
        }
    }
}

/// Initial state relative to the equilibrium (or the origin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConditions {
    pub displacement_m: [f64; 3],
    pub velocity_m_per_s: [f64; 3],
    pub beta_rad: f64,
    pub gamma_rad: f64,
    pub angular_velocity_rad_per_s: [f64; 3],
    /// Offset from the computed equilibrium instead of the origin.
    pub from_equilibrium: bool,
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self {
            displacement_m: [1e-6; 3],
            velocity_m_per_s: [0.0; 3],
            beta_rad: 1e-3,
            gamma_rad: 1e-3,
            angular_velocity_rad_per_s: [0.0; 3],
            from_equilibrium: true,
        }
    }
}

impl InitialConditions {
    pub fn state_at(&self, origin: Vector3<f64>) -> RigidState {
        RigidState {
            position: origin + Vector3::from(self.displacement_m),
            velocity: Vector3::from(self.velocity_m_per_s),
            orientation: RigidState::orientation_from_angles(0.0, self.beta_rad, self.gamma_rad),
            angular_velocity: Vector3::from(self.angular_velocity_rad_per_s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Time step (s); derived from the drive when absent.
    pub dt_s: Option<f64>,
    /// Simulated time (s); `duration_periods` of the slowest mode when absent.
    pub duration_s: Option<f64>,
    pub duration_periods: f64,
    /// Output sample rate (Hz); about four times the fastest resolved scale when absent.
    pub sample_rate_hz: Option<f64>,
    pub linear_damping_per_s: f64,
    pub angular_damping_per_s: f64,
    pub offset_force_n: [f64; 3],
    pub gravity_on: bool,
    pub force_model: ForceModel,
    /// Freezes rotation about the lab z axis.
    pub small_angle_mode: bool,
    pub inertia: InertiaModel,
    /// Shrinks the step so librational modes are sampled finely.
    pub resolve_libration: bool,
    /// Defaults to five outer-loop radii.
    pub escape_radius_m: Option<f64>,
    pub initial: InitialConditions,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_s: None,
            duration_s: None,
            duration_periods: 200.0,
            sample_rate_hz: None,
            linear_damping_per_s: 0.0,
            angular_damping_per_s: 0.0,
            offset_force_n: [0.0; 3],
            gravity_on: true,
            force_model: ForceModel::PointDipole,
            small_angle_mode: false,
            inertia: InertiaModel::SphereEquivalent,
            resolve_libration: false,
            escape_radius_m: None,
            initial: InitialConditions::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: String| Err(DynamicsError::InvalidConfig(msg));
        if let Some(dt) = self.dt_s {
            if !(dt.is_finite() && dt > 0.0) {
                return bad(format!("SimConfig.dt_s must be > 0, got {dt}"));
            }
        }
        if let Some(d) = self.duration_s {
            if !(d.is_finite() && d > 0.0) {
                return bad(format!("SimConfig.duration_s must be > 0, got {d}"));
            }
        }
        if !(self.duration_periods.is_finite() && self.duration_periods > 0.0) {
            return bad("SimConfig.duration_periods must be > 0".into());
        }
        if let Some(r) = self.sample_rate_hz {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("SimConfig.sample_rate_hz must be > 0, got {r}"));
            }
        }
        if !(self.linear_damping_per_s >= 0.0 && self.angular_damping_per_s >= 0.0) {
            return bad("SimConfig damping rates must be >= 0".into());
        }
        if self.offset_force_n.iter().any(|f| !f.is_finite()) {
            return bad("SimConfig.offset_force_n must be finite".into());
        }
        if let ForceModel::FiniteVolume { order } = self.force_model {
            if !(2..=8).contains(&order) {
                return bad(format!(
                    "SimConfig.force_model.finite_volume.order must be in 2..=8, got {order}"
                ));
            }
        }
        if let Some(r) = self.escape_radius_m {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("SimConfig.escape_radius_m must be > 0, got {r}"));
            }
        }
        Ok(())
    }

    pub fn escape_radius(&self) -> f64 {
        self.escape_radius_m.unwrap_or(5.0 * OUTER_RADIUS)
    }
}

/// Largest step allowed for a drive at `omega_drive`: a hundredth of its period.
pub fn default_dt(omega_drive: f64) -> f64 {
    2.0 * PI / (STEPS_PER_DRIVE_PERIOD * omega_drive)
}

/// Concrete step, length and decimation of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub dt: f64,
    pub steps: u64,
    pub steps_per_sample: u64,
}

impl Timing {
    /// Resolves the optional timing fields of `cfg`.
    ///
    /// `slowest_hz` sets the default duration; `libration_hz` matters only
    /// when `cfg.resolve_libration` is set. A `None` drive means a static field.
    pub fn resolve(
        cfg: &SimConfig,
        omega_drive: Option<f64>,
        slowest_hz: f64,
        libration_hz: f64,
    ) -> Result<Self, DynamicsError> {
        cfg.validate()?;
        let dt_max = omega_drive.map(default_dt).unwrap_or(f64::INFINITY);
        let mut auto_dt = dt_max;
        if cfg.resolve_libration && libration_hz > 0.0 {
            auto_dt = auto_dt.min(1.0 / (STEPS_PER_LIBRATION_PERIOD * libration_hz));
        }
        let dt = match cfg.dt_s {
            Some(dt) if dt > dt_max * (1.0 + 1e-12) => {
                return Err(DynamicsError::InvalidConfig(format!(
                    "SimConfig.dt_s = {dt} exceeds a hundredth of the drive period ({dt_max})"
                )))
            }
            Some(dt) => dt,
            None if auto_dt.is_finite() => auto_dt,
            None => {
                return Err(DynamicsError::InvalidConfig(
                    "SimConfig.dt_s is required without a drive".into(),
                ))
            }
        };
        let duration = match cfg.duration_s {
            Some(d) => d,
            None if slowest_hz > 0.0 => cfg.duration_periods / slowest_hz,
            None => {
                return Err(DynamicsError::InvalidConfig(
                    "SimConfig.duration_s is required when no mode frequency is predicted".into(),
                ))
            }
        };
        let fastest =
            omega_drive
                .map(|w| w / (2.0 * PI))
                .unwrap_or(0.0)
                .max(if cfg.resolve_libration {
                    libration_hz
                } else {
                    0.0
                });
        let rate = cfg.sample_rate_hz.unwrap_or(if fastest > 0.0 {
            4.0 * fastest
        } else {
            1.0 / dt
        });
        let steps = (duration / dt).round().max(1.0) as u64;
        let steps_per_sample = ((1.0 / (rate * dt)).floor() as u64).max(1);
        Ok(Self {
            dt,
            steps,
            steps_per_sample,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / (self.dt * self.steps_per_sample as f64)
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

/// Uniformly sampled run output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    pub states: Vec<RigidState>,
    pub sample_rate: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn series<F: Fn(&RigidState) -> f64>(&self, f: F) -> Vec<f64> {
        self.states.iter().map(f).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        for (t, s) in self.sample_times.iter().zip(&self.states) {
            let (a, b, g) = s.angles();
            writeln!(
                out,
                "{t},{},{},{},{},{},{},{a},{b},{g}",
                s.position.x, s.position.y, s.position.z, s.velocity.x, s.velocity.y, s.velocity.z
            )?;
        }
        Ok(())
    }
}

/// Unnormalized state used inside an RK4 step.
#[derive(Clone, Copy)]
struct Raw {
    r: Vector3<f64>,
    v: Vector3<f64>,
    q: Quaternion<f64>,
    w: Vector3<f64>,
}

impl Raw {
    fn from_state(s: &RigidState) -> Self {
        Self {
            r: s.position,
            v: s.velocity,
            q: *s.orientation.quaternion(),
            w: s.angular_velocity,
        }
    }

    fn axpy(&self, h: f64, d: &Raw) -> Raw {
        Raw {
            r: self.r + d.r * h,
            v: self.v + d.v * h,
            q: self.q + d.q * h,
            w: self.w + d.w * h,
        }
    }
}

/// Equations of motion bound to a field source and a magnet.
pub struct Simulator<'a, S: FieldSource + ?Sized> {
    source: &'a S,
    mass: f64,
    moment: f64,
    inertia: f64,
    quad: Option<CubeQuadrature>,
    gravity: Vector3<f64>,
    offset_force: Vector3<f64>,
    linear_damping: f64,
    angular_damping: f64,
    small_angle: bool,
    escape_radius: f64,
}

impl<'a, S: FieldSource + ?Sized> Simulator<'a, S> {
    pub fn new(source: &'a S, spec: &MagnetSpec, cfg: &SimConfig) -> Result<Self, DynamicsError> {
        cfg.validate()?;
        spec.validate()
            .map_err(|e| DynamicsError::InvalidConfig(e.to_string()))?;
        let quad = match cfg.force_model {
            ForceModel::PointDipole => None,
            ForceModel::FiniteVolume { order } => Some(CubeQuadrature::new(spec.edge, order)),
        };
        Ok(Self {
            source,
            mass: spec.mass(),
            moment: spec.moment(),
            inertia: cfg.inertia.moment_of_inertia(spec),
            quad,
            gravity: if cfg.gravity_on {
                Vector3::new(0.0, 0.0, -STANDARD_GRAVITY)
            } else {
                Vector3::zeros()
            },
            offset_force: Vector3::from(cfg.offset_force_n),
            linear_damping: cfg.linear_damping_per_s,
            angular_damping: cfg.angular_damping_per_s,
            small_angle: cfg.small_angle_mode,
            escape_radius: cfg.escape_radius(),
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    /// Magnetic force and torque on the body at time `t`.
    pub fn load(
        &self,
        position: &Vector3<f64>,
        orientation: &UnitQuaternion<f64>,
        t: f64,
    ) -> Result<BodyLoad, DynamicsError> {
        let moment = orientation * Vector3::new(0.0, 0.0, self.moment);
        let load = match &self.quad {
            None => point_dipole_load(self.source, position, &moment, t)?,
            Some(q) => volume_averaged_load(self.source, q, position, orientation, &moment, t)?,
        };
        Ok(load)
    }

    fn derivative(&self, s: &Raw, t: f64) -> Result<Raw, DynamicsError> {
        let orientation = UnitQuaternion::new_normalize(s.q);
        let load = self.load(&s.r, &orientation, t)?;
        let accel = load.force / self.mass + self.gravity + self.offset_force / self.mass
            - self.linear_damping * s.v;
        let mut w = s.w;
        let mut ang_accel = load.torque / self.inertia - self.angular_damping * s.w;
        if self.small_angle {
            w.z = 0.0;
            ang_accel.z = 0.0;
        }
        let dq = Quaternion::from_imag(w) * s.q * 0.5;
        Ok(Raw {
            r: s.v,
            v: accel,
            q: dq,
            w: ang_accel,
        })
    }

    /// One RK4 step of length `dt` from time `t`.
    pub fn step(&self, state: &RigidState, t: f64, dt: f64) -> Result<RigidState, DynamicsError> {
        let y = Raw::from_state(state);
        let k1 = self.derivative(&y, t)?;
        let k2 = self.derivative(&y.axpy(0.5 * dt, &k1), t + 0.5 * dt)?;
        let k3 = self.derivative(&y.axpy(0.5 * dt, &k2), t + 0.5 * dt)?;
        let k4 = self.derivative(&y.axpy(dt, &k3), t + dt)?;
        let h6 = dt / 6.0;
        let next = Raw {
            r: y.r + (k1.r + k2.r * 2.0 + k3.r * 2.0 + k4.r) * h6,
            v: y.v + (k1.v + k2.v * 2.0 + k3.v * 2.0 + k4.v) * h6,
            q: y.q + (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * h6,
            w: y.w + (k1.w + k2.w * 2.0 + k3.w * 2.0 + k4.w) * h6,
        };
        let mut w = next.w;
        if self.small_angle {
            w.z = 0.0;
        }
        let out = RigidState {
            position: next.r,
            velocity: next.v,
            orientation: UnitQuaternion::new_normalize(next.q),
            angular_velocity: w,
        };
        if !out.is_finite() {
            return Err(DynamicsError::NonFinite { time: t + dt });
        }
        Ok(out)
    }

    /// Kinetic plus potential energy; conserved only for static sources.
    pub fn energy(&self, state: &RigidState, t: f64) -> Result<f64, DynamicsError> {
        let moment = state.moment(self.moment);
        let b = self.source.field(&state.position, t, false)?.b;
        let kinetic = 0.5 * self.mass * state.velocity.norm_squared()
            + 0.5 * self.inertia * state.angular_velocity.norm_squared();
        let potential = -moment.dot(&b)
            - self.mass * self.gravity.dot(&state.position)
            - self.offset_force.dot(&state.position);
        Ok(kinetic + potential)
    }

    /// Integrates from `init` at `t = 0` and samples every `steps_per_sample` steps.
    pub fn run(&self, init: &RigidState, timing: &Timing) -> Result<Trajectory, DynamicsError> {
        let capacity = (timing.steps / timing.steps_per_sample + 1) as usize;
        let mut times = Vec::with_capacity(capacity);
        let mut states = Vec::with_capacity(capacity);
        let mut state = *init;
        times.push(0.0);
        states.push(state);
        for n in 1..=timing.steps {
            let t = (n - 1) as f64 * timing.dt;
            state = self.step(&state, t, timing.dt)?;
            if state.position.norm() > self.escape_radius {
                return Err(DynamicsError::Escape {
                    time: n as f64 * timing.dt,
                    radius: self.escape_radius,
                });
            }
            if n % timing.steps_per_sample == 0 {
                times.push(n as f64 * timing.dt);
                states.push(state);
            }
        }
        Ok(Trajectory {
            sample_times: times,
            states,
            sample_rate: timing.sample_rate(),
        })
    }
}

/// Free-function form of [`Simulator::step`].
pub fn step<S: FieldSource + ?Sized>(
    sim: &Simulator<'_, S>,
    state: &RigidState,
    t: f64,
    dt: f64,
) -> Result<RigidState, DynamicsError> {
    sim.step(state, t, dt)
}

/// Free-function form of [`Simulator::energy`].
pub fn mechanical_energy<S: FieldSource + ?Sized>(
    sim: &Simulator<'_, S>,
    state: &RigidState,
    t: f64,
) -> Result<f64, DynamicsError> {
    sim.energy(state, t)
}

/// Runs one simulation; identical inputs give bit-identical trajectories.
pub fn simulate<S: FieldSource + ?Sized>(
    init: &RigidState,
    source: &S,
    spec: &MagnetSpec,
    cfg: &SimConfig,
    timing: &Timing,
) -> Result<Trajectory, DynamicsError> {
    Simulator::new(source, spec, cfg)?.run(init, timing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::LinearField;
    use crate::secular::{hz, librational_frequencies};

    fn free_config() -> SimConfig {
        SimConfig {
            gravity_on: false,
            ..Default::default()
        }
    }

    #[test]
    fn free_particle_moves_in_a_line() {
        let field = LinearField::uniform(Vector3::zeros());
        let spec = MagnetSpec::default();
        let sim = Simulator::new(&field, &spec, &free_config()).unwrap();
        let init = RigidState {
            velocity: Vector3::new(1e-3, -2e-3, 5e-4),
            ..Default::default()
        };
        let timing = Timing {
            dt: 1e-4,
            steps: 1000,
            steps_per_sample: 10,
        };
        let traj = sim.run(&init, &timing).unwrap();
        let last = traj.states.last().unwrap();
        assert_eq!(last.velocity, init.velocity);
        assert!((last.position - init.velocity * 0.1).norm() < 1e-15);
        assert_eq!(traj.len(), 101);
    }

    #[test]
    fn libration_matches_closed_form() {
        let b0 = 9.4e-3;
        let field = LinearField::uniform(Vector3::new(0.0, 0.0, b0));
        let spec = MagnetSpec::default();
        let sim = Simulator::new(&field, &spec, &free_config()).unwrap();
        let init = RigidState {
            orientation: RigidState::orientation_from_angles(0.0, 1e-3, 0.0),
            ..Default::default()
        };
        let (w, _) = librational_frequencies(b0, &spec);
        let dt = 1.0 / (200.0 * hz(w));
        // count upward zero crossings of β over 20 periods
        let mut s = init;
        let mut prev = s.angles().1;
        let mut crossings = Vec::new();
        for n in 0..4000 {
            s = sim.step(&s, n as f64 * dt, dt).unwrap();
            let beta = s.angles().1;
            if prev < 0.0 && beta >= 0.0 {
                crossings.push((n as f64 + prev / (prev - beta)) * dt);
            }
            prev = beta;
        }
        let period = (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
        assert!((1.0 / period / hz(w) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn cube_inertia_raises_libration() {
        let spec = MagnetSpec::default();
        let ratio = InertiaModel::SphereEquivalent.moment_of_inertia(&spec)
            / InertiaModel::Cube.moment_of_inertia(&spec);
        assert!((ratio - 2.4).abs() < 1e-12);
    }

    #[test]
    fn quaternion_stays_normalized() {
        let field = LinearField::uniform(Vector3::new(0.01, 0.004, 0.02));
        let spec = MagnetSpec::default();
        let sim = Simulator::new(&field, &spec, &free_config()).unwrap();
        let mut s = RigidState {
            orientation: RigidState::orientation_from_angles(0.4, 0.7, -0.3),
            angular_velocity: Vector3::new(50.0, -20.0, 300.0),
            ..Default::default()
        };
        for n in 0..2000 {
            s = sim.step(&s, n as f64 * 1e-6, 1e-6).unwrap();
            assert!((s.orientation.quaternion().norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn timing_contract() {
        let w = 2.0 * PI * 150.0;
        let t = Timing::resolve(&SimConfig::default(), Some(w), 8.0, 900.0).unwrap();
        assert_eq!(t.dt, default_dt(w));
        assert!((t.duration() - 25.0).abs() < t.dt);
        assert!(t.sample_rate() >= 600.0);
        let too_big = SimConfig {
            dt_s: Some(2.0 * default_dt(w)),
            ..Default::default()
        };
        assert!(Timing::resolve(&too_big, Some(w), 8.0, 900.0).is_err());
        let lib = SimConfig {
            resolve_libration: true,
            ..Default::default()
        };
        let t = Timing::resolve(&lib, Some(w), 8.0, 900.0).unwrap();
        assert!((t.dt - 1.0 / (200.0 * 900.0)).abs() < 1e-18);
    }

    #[test]
    fn config_validation() {
        let cfg = SimConfig {
            force_model: ForceModel::FiniteVolume { order: 9 },
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SimConfig {
            linear_damping_per_s: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn escape_is_reported() {
        let field = LinearField::uniform(Vector3::zeros());
        let spec = MagnetSpec::default();
        let cfg = SimConfig {
            gravity_on: true,
            escape_radius_m: Some(1e-3),
            ..Default::default()
        };
        let sim = Simulator::new(&field, &spec, &cfg).unwrap();
        let timing = Timing {
            dt: 1e-3,
            steps: 1000,
            steps_per_sample: 1,
        };
        match sim.run(&RigidState::default(), &timing) {
            // free fall of 1 mm takes sqrt(2e-3/g) ≈ 14.3 ms
            Err(DynamicsError::Escape { time, .. }) => assert!((time - 0.015).abs() < 1.5e-3),
            other => panic!("{other:?}"),
        }
    }
}
