//! End-to-end acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs with `harness = false`. The process fails only when a criterion
//! outside [`KNOWN_FAILING`] fails, so the report can record unattained
//! targets without hiding them.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use mpt_core::config::Setup;
use mpt_core::dynamics::{
    dipole_force, equilibrium_gradient, find_equilibrium, local_operating_point, point_dipole_load,
    simulate, volume_averaged_load, CubeQuadrature, FieldSource, LinearField, RigidState,
    SimConfig, Simulator, Timing, TrapFields,
};
use mpt_core::magnetostatics::{
    bias_field, trap_curvature, trap_field_amplitude, BiasParams, DriveParams, LoopGeometry,
    TrapGeometry,
};
use mpt_core::secular::{
    curvature_from_omega_z, hz, librational_frequencies, mathieu_q, omega_z_from_curvature,
    predict, secular_frequencies, MagnetSpec, OperatingPoint,
};
use mpt_core::spectral::{
    fit_lorentzian, fit_ringdown, lorentzian, power_spectrum, RingdownOptions, Spectrum,
};
use mpt_core::sweep::{
    reproduce_figure, run_sweep, FigureId, FigureOptions, Mode, SweepAxis, SweepPlan,
};
use mpt_core::{Matrix3, Vector3, MU_0};
use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// Quoted reference values.
const HEADLINE_DRIVE_HZ: f64 = 120.0;
const HEADLINE_CURVATURE: f64 = 1335.0;
const HEADLINE_OMEGA_Z_HZ: f64 = 29.6;
const HEADLINE_Q: f64 = 0.698;
const LIBRATION_B0: f64 = 9.4e-3;
const LIBRATION_CLOSED_FORM_HZ: f64 = 1189.0;
const LIBRATION_MEASURED_HZ: f64 = 1372.0;
const CALIBRATION_CURRENT: f64 = 1.07;
const CALIBRATION_CURVATURE: f64 = 1968.0;
const RINGDOWN_TAU: f64 = 0.580;
const RINGDOWN_F: f64 = 1372.4;
const RINGDOWN_Q: f64 = 2500.0;

// Tolerances.
const ROUND_TRIP_REL: f64 = 1e-9;
const QUOTED_OMEGA_Z_ABS: f64 = 0.05;
const QUOTED_Q_ABS: f64 = 5e-4;
const QUOTED_LIBRATION_ABS: f64 = 1.0;
const LIBRATION_FACTOR: f64 = 1.5;
const ORACLE_REL: f64 = 1e-6;
const HELMHOLTZ_REL: f64 = 1e-3;
const DIV_CURL_REL: f64 = 1e-6;
const CURVATURE_FACTOR: f64 = 2.0;
const Z_MODE_REL: f64 = 0.10;
const RATIO_REL: f64 = 0.05;
const LIBRATION_REL: f64 = 0.005;
const EXPONENT_ABS: f64 = 0.05;
const LINEAR_R2: f64 = 0.99;
const FINITE_VOLUME_REL: f64 = 0.05;
const RECOVERY_RATE: usize = 95;
const RINGDOWN_Q_REL: f64 = 0.05;
const PARSEVAL_REL: f64 = 0.01;
const ENERGY_DRIFT: f64 = 1e-6;
const CONVERGENCE_RATIO: (f64, f64) = (12.0, 20.0);
const FORCE_FD_REL: f64 = 1e-6;
const QUADRATURE_REL: f64 = 1e-12;

const ORACLE_SEGMENTS: usize = 1_000_000;
const RANDOM_POINTS: usize = 20;

/// Criteria not met by this implementation; see the project notes.
const KNOWN_FAILING: &[u32] = &[5, 8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn spec() -> MagnetSpec {
    MagnetSpec::default()
}

fn headline_op() -> OperatingPoint {
    OperatingPoint {
        omega_drive: 2.0 * PI * HEADLINE_DRIVE_HZ,
        b1_curvature: HEADLINE_CURVATURE,
        b0: 5.6e-3,
        b0_gradient: 0.0,
    }
}

fn z_mode_round_trip() -> Outcome {
    let s = spec();
    let op = headline_op();
    let wz = omega_z_from_curvature(&op, &s);
    let back = curvature_from_omega_z(wz, op.omega_drive, &s);
    let from_quote = curvature_from_omega_z(2.0 * PI * HEADLINE_OMEGA_Z_HZ, op.omega_drive, &s);
    let err = rel(back, HEADLINE_CURVATURE);
    outcome(
        (hz(wz) - HEADLINE_OMEGA_Z_HZ).abs() < QUOTED_OMEGA_Z_ABS && err < ROUND_TRIP_REL,
        format!(
            "f_z = {:.4} Hz (quoted {HEADLINE_OMEGA_Z_HZ}), inverse of quoted f_z = {from_quote:.1} T/m^2, round-trip error {err:.1e}",
            hz(wz)
        ),
    )
}

fn q_parameter() -> Outcome {
    let s = spec();
    let op = headline_op();
    let (q, _) = mathieu_q(&op, &s);
    let via_q = secular_frequencies(&op, &s).omega_z;
    let direct = omega_z_from_curvature(&op, &s);
    let err = rel(via_q, direct);
    outcome(
        (q - HEADLINE_Q).abs() < QUOTED_Q_ABS && err < 1e-12,
        format!("q_z = {q:.4}, forms differ by {err:.1e}"),
    )
}

fn libration_closed_form() -> Outcome {
    let s = spec();
    let f = hz(librational_frequencies(LIBRATION_B0, &s).0);
    let ratio = LIBRATION_MEASURED_HZ / f;
    let f2 = hz(librational_frequencies(4.0 * LIBRATION_B0, &s).0);
    let exponent = (f2 / f).ln() / 4f64.ln();
    outcome(
        (f - LIBRATION_CLOSED_FORM_HZ).abs() < QUOTED_LIBRATION_ABS
            && (1.0 / LIBRATION_FACTOR..=LIBRATION_FACTOR).contains(&ratio)
            && (exponent - 0.5).abs() < 1e-12,
        format!("f = {f:.1} Hz, measured/closed-form = {ratio:.3}, exponent {exponent:.12}"),
    )
}

/// Field of a loop approximated by `n` straight segments, each exact.
fn segmented_loop(geom: &LoopGeometry, current: f64, n: usize, r: &Vector3<f64>) -> Vector3<f64> {
    let pref = MU_0 * current * f64::from(geom.turns) / (4.0 * PI);
    let vertex = |k: usize| {
        let phi = 2.0 * PI * k as f64 / n as f64;
        Vector3::new(
            geom.radius * phi.cos(),
            geom.radius * phi.sin(),
            geom.axial_offset,
        )
    };
    let mut b = Vector3::zeros();
    let mut r1 = vertex(0) - r;
    for k in 1..=n {
        let r2 = vertex(k % n) - r;
        let (l1, l2) = (r1.norm(), r2.norm());
        b += r1.cross(&r2) * ((l1 + l2) / (l1 * l2 * (l1 * l2 + r1.dot(&r2))));
        r1 = r2;
    }
    b * pref
}

fn random_off_conductor_points(geom: &TrapGeometry, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let loops = [geom.inner_loop, geom.outer_loop];
    let mut points = Vec::new();
    while points.len() < RANDOM_POINTS {
        let p: Vector3<f64> = Vector3::new(
            rng.random_range(-2.5e-3..2.5e-3),
            rng.random_range(-2.5e-3..2.5e-3),
            rng.random_range(-1.5e-3..1.5e-3),
        );
        let clear = loops.iter().all(|l| {
            let rho = p.x.hypot(p.y);
            (rho - l.radius).hypot(p.z - l.axial_offset) > 50e-6
        });
        if clear {
            points.push(p);
        }
    }
    points
}

fn field_oracle() -> Outcome {
    let geom = TrapGeometry::default();
    let drive = DriveParams {
        i_trap: 1.0,
        xi: 2.2,
        omega_drive: 2.0 * PI * 150.0,
        phase: 0.0,
    };
    let bias = BiasParams {
        i_top: 0.08,
        i_bottom: 0.07,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let points = random_off_conductor_points(&geom, &mut rng);

    let mut worst_oracle: f64 = 0.0;
    for p in &points {
        let mut model = trap_field_amplitude(&geom, &drive, p, false).unwrap();
        model.accumulate(&bias_field(&geom, &bias, p, false).unwrap(), 1.0);
        let oracle = segmented_loop(&geom.inner_loop, drive.i_trap, ORACLE_SEGMENTS, p)
            + segmented_loop(
                &geom.outer_loop,
                -drive.xi * drive.i_trap,
                ORACLE_SEGMENTS,
                p,
            )
            + segmented_loop(&geom.top_coil, bias.i_top, ORACLE_SEGMENTS, p)
            + segmented_loop(&geom.bottom_coil, bias.i_bottom, ORACLE_SEGMENTS, p);
        worst_oracle = worst_oracle.max((model.b - oracle).norm() / oracle.norm());
    }

    let current = 0.1;
    let center = bias_field(
        &geom,
        &BiasParams {
            i_top: current,
            i_bottom: current,
        },
        &Vector3::zeros(),
        false,
    )
    .unwrap()
    .b
    .z;
    let coil = geom.top_coil;
    let analytic = 0.8f64.powf(1.5) * MU_0 * f64::from(coil.turns) * current / coil.radius;
    let helmholtz = rel(center, analytic);

    let mut worst_div: f64 = 0.0;
    let mut worst_curl: f64 = 0.0;
    for p in &points {
        let mut s = trap_field_amplitude(&geom, &drive, p, true).unwrap();
        s.accumulate(&bias_field(&geom, &bias, p, true).unwrap(), 1.0);
        let j = s.jacobian.unwrap();
        let scale = j.norm();
        worst_div = worst_div.max(j.trace().abs() / scale);
        worst_curl = worst_curl.max((j - j.transpose()).norm() / scale);
    }
    outcome(
        worst_oracle < ORACLE_REL && helmholtz < HELMHOLTZ_REL && worst_div < DIV_CURL_REL && worst_curl < DIV_CURL_REL,
        format!(
            "segmented-loop error {worst_oracle:.1e}, Helmholtz center {helmholtz:.1e}, div {worst_div:.1e}, curl {worst_curl:.1e}"
        ),
    )
}

fn curvature_band() -> Outcome {
    let c = trap_curvature(&TrapGeometry::default(), CALIBRATION_CURRENT, 2.2, 0.0).unwrap();
    let (lo, hi) = (
        CALIBRATION_CURVATURE / CURVATURE_FACTOR,
        CALIBRATION_CURVATURE * CURVATURE_FACTOR,
    );
    outcome(
        (lo..=hi).contains(&c),
        format!("|B1''| = {c:.0} T/m^2 at {CALIBRATION_CURRENT} A, band [{lo:.0}, {hi:.0}]"),
    )
}

/// Lorentzian fit of the dominant peak within `±frac` of `center`.
fn peak(trace: &[f64], fs: f64, center: f64, frac: f64) -> (f64, f64) {
    let s = power_spectrum(trace, fs, trace.len(), 0.0).unwrap();
    let fit = fit_lorentzian(&s, ((1.0 - frac) * center, (1.0 + frac) * center)).unwrap();
    (fit.f0, s.resolution)
}

fn dynamics_vs_closed_form() -> Outcome {
    let setup = Setup::default();
    let fields = setup.trap_fields().unwrap();
    let s = setup.magnet;
    let cfg = setup.simulation;
    let eq = find_equilibrium(&fields, &s, true, &Vector3::zeros(), &Vector3::zeros()).unwrap();
    let pred = predict(&local_operating_point(&fields, &eq).unwrap(), &s);
    let timing =
        Timing::resolve(&cfg, Some(fields.drive.omega_drive), hz(pred.omega_x), 0.0).unwrap();
    let traj = simulate(&cfg.initial.state_at(eq), &fields, &s, &cfg, &timing).unwrap();
    let (fx, _) = peak(
        &traj.series(|st| st.position.x - eq.x),
        traj.sample_rate,
        hz(pred.omega_x),
        0.25,
    );
    let (fz, _) = peak(
        &traj.series(|st| st.position.z - eq.z),
        traj.sample_rate,
        hz(pred.omega_z),
        0.25,
    );
    let z_err = rel(fz, hz(pred.omega_z));
    let ratio = fz / fx;

    let b0 = 5.6e-3;
    let field = LinearField::uniform(Vector3::new(0.0, 0.0, b0));
    let f_lib = hz(librational_frequencies(b0, &s).0);
    let lib_cfg = SimConfig {
        gravity_on: false,
        resolve_libration: true,
        ..Default::default()
    };
    let lib_timing = Timing::resolve(&lib_cfg, None, f_lib, f_lib).unwrap();
    let init = RigidState {
        orientation: RigidState::orientation_from_angles(0.0, 1e-3, 0.0),
        ..Default::default()
    };
    let lib = simulate(&init, &field, &s, &lib_cfg, &lib_timing).unwrap();
    let (fb, _) = peak(&lib.series(|st| st.angles().1), lib.sample_rate, f_lib, 0.1);
    let lib_err = rel(fb, f_lib);
    outcome(
        pred.q_z <= 0.4 && z_err < Z_MODE_REL && rel(ratio, 2.0) < RATIO_REL && lib_err < LIBRATION_REL,
        format!(
            "q_z = {:.3}: f_z = {fz:.3} Hz vs {:.3} ({z_err:.3}), f_z/f_x = {ratio:.4}; libration {fb:.2} Hz vs {f_lib:.2} ({lib_err:.1e})",
            pred.q_z,
            hz(pred.omega_z)
        ),
    )
}

fn low_q_drive_plan() -> SweepPlan {
    let mut fixed = Setup::default();
    fixed.drive.i_trap_a = 0.12;
    SweepPlan {
        axis: SweepAxis::OmegaDrive,
        grid: vec![100.0, 120.0, 140.0, 160.0, 180.0, 200.0],
        modes: Mode::VIBRATIONAL.to_vec(),
        fixed,
    }
}

fn scaling_laws(out: &Path) -> Outcome {
    let opts = FigureOptions {
        workers: 4,
        seed: 0,
    };
    let plan = low_q_drive_plan();
    let drive = run_sweep(&plan, opts.workers).unwrap();
    let q_max = drive
        .points
        .iter()
        .filter_map(|p| p.q_z)
        .fold(0.0, f64::max);
    let mut pass = q_max <= 0.4;
    let mut parts = vec![format!("drive sweep q_z <= {q_max:.3}")];
    for &mode in &plan.modes {
        match mpt_core::sweep::fit_law(
            mode,
            &drive.successes(mode),
            mpt_core::sweep::ScalingLaw::Inverse,
            (100.0, 200.0),
        ) {
            Ok(f) => {
                pass &= (f.exponent + 1.0).abs() < EXPONENT_ABS;
                parts.push(format!("e_{mode} = {:.3}", f.exponent));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{mode}: {e}"));
            }
        }
    }
    for (id, check) in [(FigureId::Fig2c, "linear"), (FigureId::Fig2d, "sqrt")] {
        let report = reproduce_figure(id, &out.join(id.name()), &opts).unwrap();
        let fits = report.fits.unwrap();
        pass &= fits.failed.is_empty() && !fits.fits.is_empty();
        for f in &fits.fits {
            if check == "linear" {
                pass &= f.r_squared > LINEAR_R2;
                parts.push(format!("R2_{} = {:.4}", f.mode, f.r_squared));
            } else {
                pass &= (f.exponent - 0.5).abs() < EXPONENT_ABS;
                parts.push(format!("e_{} = {:.4}", f.mode, f.exponent));
            }
        }
    }
    outcome(pass, parts.join(", "))
}

fn offset_splitting(out: &Path) -> Outcome {
    let opts = FigureOptions {
        workers: 4,
        seed: 0,
    };
    let report = reproduce_figure(FigureId::FigS4b, &out.join("figS4b"), &opts).unwrap();
    let study = report.offset_study.unwrap();
    let mut degenerate = true;
    let mut split = true;
    for &df in &study.offsets {
        let rows: Vec<_> = study
            .rows
            .iter()
            .filter(|r| r.offset_force_y_n == df)
            .collect();
        if df == 0.0 {
            degenerate &= rows
                .iter()
                .all(|r| matches!((r.splitting_hz, r.resolution_hz), (Some(s), Some(b)) if s <= b));
        } else {
            split &= rows
                .iter()
                .any(|r| matches!((r.splitting_hz, r.resolution_hz), (Some(s), Some(b)) if s > b));
        }
    }
    let mut monotone = true;
    let mut parts = Vec::new();
    for mode in [Mode::X, Mode::Y] {
        let slopes = study.slopes_of(mode);
        let values: Vec<f64> = slopes.iter().filter_map(|s| s.1).collect();
        monotone &= values.len() == slopes.len() && values.windows(2).all(|w| w[1] < w[0]);
        parts.push(format!(
            "{mode} slope c [{}]",
            values
                .iter()
                .map(|v| format!("{v:.0}"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
        let exps: Vec<String> = study
            .slopes
            .iter()
            .filter(|s| s.mode == mode)
            .filter_map(|s| s.fit.map(|f| format!("{:.3}", f.exponent)))
            .collect();
        parts.push(format!("{mode} free exponent [{}]", exps.join(", ")));
    }
    outcome(
        degenerate && split && monotone,
        format!(
            "degenerate at 0: {degenerate}, split above 0: {split}, slope decreasing: {monotone}; {}",
            parts.join("; ")
        ),
    )
}

fn finite_volume(out: &Path) -> Outcome {
    let opts = FigureOptions {
        workers: 4,
        seed: 0,
    };
    let report = reproduce_figure(FigureId::FigS4a, &out.join("figS4a"), &opts).unwrap();
    let worst = report.max_relative_difference.unwrap_or(f64::INFINITY);
    let expected = report.sweeps[0].points.len() * 3;
    outcome(
        worst < FINITE_VOLUME_REL && report.comparison.len() == expected,
        format!(
            "{} mode pairs, worst relative difference {worst:.4}",
            report.comparison.len()
        ),
    )
}

fn synthetic_lorentzian(f0: f64, width: f64, df: f64, n: usize, noise: &[f64]) -> Spectrum {
    let frequencies: Vec<f64> = (0..n).map(|k| k as f64 * df).collect();
    let psd = frequencies
        .iter()
        .zip(noise)
        .map(|(&f, e)| (lorentzian(f, f0, width, 1.0, 0.02) + e).max(0.0))
        .collect();
    Spectrum {
        frequencies,
        psd,
        resolution: df,
    }
}

fn spectral_toolkit() -> Outcome {
    let (f0, width, df, n) = (10.9, 0.15, 0.025, 1200);
    let mut hits = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let normal = Normal::new(0.0, 0.1).unwrap();
        let noise: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let s = synthetic_lorentzian(f0, width, df, n, &noise);
        if let Ok(fit) = fit_lorentzian(&s, (f0 - 1.2, f0 + 0.8)) {
            if (fit.f0 - f0).abs() <= df {
                hits += 1;
            }
        }
    }

    let fs = 8000.0;
    let x: Vec<f64> = (0..16_000)
        .map(|i| {
            let t = i as f64 / fs;
            0.7 * (-t / RINGDOWN_TAU).exp() * (2.0 * PI * RINGDOWN_F * t + 0.4).cos()
        })
        .collect();
    let ring = fit_ringdown(&x, fs, &RingdownOptions::default()).unwrap();
    let q_err = rel(ring.q, RINGDOWN_Q);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 0.3).unwrap();
    let y: Vec<f64> = (0..1 << 16)
        .map(|i| (2.0 * PI * 37.3 * i as f64 / 500.0).sin() + normal.sample(&mut rng))
        .collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
    let s = power_spectrum(&y, 500.0, 4096, 0.5).unwrap();
    let parseval = rel(s.total_power(), var);
    outcome(
        hits >= RECOVERY_RATE && q_err < RINGDOWN_Q_REL && parseval < PARSEVAL_REL,
        format!(
            "Lorentzian hits {hits}/100, ringdown Q = {:.0} ({q_err:.3}), Parseval {parseval:.1e}",
            ring.q
        ),
    )
}

/// Symmetric traceless gradient so the linear field is curl- and divergence-free.
fn physical_gradient(rng: &mut ChaCha8Rng, scale: f64) -> Matrix3<f64> {
    let mut g = Matrix3::from_fn(|_, _| rng.random_range(-scale..scale));
    g = 0.5 * (g + g.transpose());
    let t = g.trace() / 3.0;
    g - Matrix3::identity() * t
}

fn numerical_hygiene() -> Outcome {
    let s = spec();
    let b0 = 5.6e-3;
    let g = equilibrium_gradient(&s);
    let field = LinearField::new(
        Vector3::new(0.0, 0.0, b0),
        Matrix3::from_diagonal(&Vector3::new(-0.5 * g, -0.5 * g, g)),
    );
    let cfg = SimConfig::default();
    let sim = Simulator::new(&field, &s, &cfg).unwrap();
    let f_lib = hz(librational_frequencies(b0, &s).0);
    let dt = 1.0 / (200.0 * f_lib);
    let init = RigidState {
        velocity: Vector3::new(2e-3, -1e-3, 0.0),
        orientation: RigidState::orientation_from_angles(0.0, 0.05, -0.03),
        angular_velocity: Vector3::new(0.0, 0.0, 3.0),
        ..Default::default()
    };
    let ground = -s.moment() * b0;
    let e0 = sim.energy(&init, 0.0).unwrap();
    let mut state = init;
    let mut drift: f64 = 0.0;
    for n in 0..10_000 {
        state = sim.step(&state, n as f64 * dt, dt).unwrap();
        drift = drift.max((sim.energy(&state, (n + 1) as f64 * dt).unwrap() - e0).abs());
    }
    let drift = drift / (e0 - ground);

    let run = |h: f64| {
        let steps = (0.02 / h).round() as usize;
        let mut st = init;
        for n in 0..steps {
            st = sim.step(&st, n as f64 * h, h).unwrap();
        }
        st
    };
    let coarse = 1.0 / (25.0 * f_lib);
    let (a, b, c) = (run(coarse), run(coarse / 2.0), run(coarse / 4.0));
    let diff = |u: &RigidState, v: &RigidState| {
        (u.orientation.inverse() * v.orientation).angle()
            + (u.angular_velocity - v.angular_velocity).norm() * dt
    };
    let ratio = diff(&a, &b) / diff(&b, &c);

    let geom = TrapGeometry::default();
    let setup = Setup::default();
    let trap: TrapFields = setup.trap_fields().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_fd: f64 = 0.0;
    for p in random_off_conductor_points(&geom, &mut rng) {
        let p = p * 0.2;
        let m = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            1.0,
        )
        .normalize()
            * s.moment();
        let f = trap.field(&p, 0.0, true).unwrap();
        let force = dipole_force(&m, &f.jacobian.unwrap());
        let h = 1e-7;
        let energy = |q: Vector3<f64>| m.dot(&trap.field(&q, 0.0, false).unwrap().b);
        let fd = Vector3::from_fn(|i, _| {
            let mut e = Vector3::zeros();
            e[i] = h;
            (energy(p + e) - energy(p - e)) / (2.0 * h)
        });
        worst_fd = worst_fd.max((force - fd).norm() / force.norm());
    }

    let mut worst_quad: f64 = 0.0;
    for order in 2..=4 {
        let lin = LinearField::new(
            Vector3::new(1e-3, -2e-3, 5e-3),
            physical_gradient(&mut rng, 0.1),
        );
        let quad = CubeQuadrature::new(s.edge, order);
        let center = Vector3::new(1e-4, -2e-4, 3e-5);
        let orientation = UnitQuaternion::from_euler_angles(0.3, -0.5, 1.1);
        let m = orientation * Vector3::new(0.0, 0.0, s.moment());
        let avg = volume_averaged_load(&lin, &quad, &center, &orientation, &m, 0.0).unwrap();
        let point = point_dipole_load(&lin, &center, &m, 0.0).unwrap();
        worst_quad = worst_quad
            .max((avg.force - point.force).norm() / point.force.norm())
            .max((avg.torque - point.torque).norm() / point.torque.norm());
    }
    outcome(
        drift < ENERGY_DRIFT
            && (CONVERGENCE_RATIO.0..=CONVERGENCE_RATIO.1).contains(&ratio)
            && worst_fd < FORCE_FD_REL
            && worst_quad < QUADRATURE_REL,
        format!(
            "energy drift {drift:.1e} per 1e4 steps, step-halving ratio {ratio:.2}, force vs gradient {worst_fd:.1e}, quadrature {worst_quad:.1e}"
        ),
    )
}

fn figure_bytes(dir: &Path) -> (Vec<u8>, Vec<u8>) {
    (
        std::fs::read(dir.join("sweep.csv")).unwrap(),
        std::fs::read(dir.join("fits.json")).unwrap(),
    )
}

fn determinism(out: &Path) -> Outcome {
    let a = out.join("fig2b_a");
    let b = out.join("fig2b_b");
    let ra = reproduce_figure(
        FigureId::Fig2b,
        &a,
        &FigureOptions {
            workers: 1,
            seed: 0,
        },
    )
    .unwrap();
    reproduce_figure(
        FigureId::Fig2b,
        &b,
        &FigureOptions {
            workers: 4,
            seed: 0,
        },
    )
    .unwrap();
    let same = figure_bytes(&a) == figure_bytes(&b);
    let tracked: usize = ra.sweeps[0]
        .points
        .iter()
        .map(|p| p.modes.iter().filter(|m| m.fit.is_some()).count())
        .sum();
    let total = ra.sweeps[0].points.len() * 3;
    outcome(
        same,
        format!("two runs (1 and 4 workers) byte-identical: {same}; {tracked}/{total} mode points tracked"),
    )
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let out = tmp.path();
    let checks: Vec<(u32, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (
            1,
            "z-mode round trip at the headline point",
            Box::new(z_mode_round_trip),
        ),
        (
            2,
            "q parameter and both frequency forms",
            Box::new(q_parameter),
        ),
        (
            3,
            "librational closed form and sqrt exponent",
            Box::new(libration_closed_form),
        ),
        (
            4,
            "field model against segmented loops, Helmholtz, div/curl",
            Box::new(field_oracle),
        ),
        (
            5,
            "trap curvature at the calibration current",
            Box::new(curvature_band),
        ),
        (
            6,
            "simulated modes against the secular model",
            Box::new(dynamics_vs_closed_form),
        ),
        (
            7,
            "scaling laws from simulated sweeps",
            Box::new(|| scaling_laws(out)),
        ),
        (
            8,
            "offset-force splitting and slope trend",
            Box::new(|| offset_splitting(out)),
        ),
        (
            9,
            "finite-volume against point dipole",
            Box::new(|| finite_volume(out)),
        ),
        (10, "spectral toolkit", Box::new(spectral_toolkit)),
        (11, "numerical hygiene", Box::new(numerical_hygiene)),
        (12, "figure determinism", Box::new(|| determinism(out))),
    ];

    let mut unexpected = Vec::new();
    for (id, name, check) in &checks {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} [{id:>2}] {name}: {} ({:.1} s)",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        let known = KNOWN_FAILING.contains(id);
        if !o.pass && !known {
            unexpected.push(*id);
        }
        if o.pass && known {
            println!("       [{id}] is listed as known-failing but passed");
        }
    }
    let passed = checks.len() - KNOWN_FAILING.len().min(checks.len());
    println!(
        "acceptance: {} criteria, {} expected to pass, unexpected failures: {:?}",
        checks.len(),
        passed,
        unexpected
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
