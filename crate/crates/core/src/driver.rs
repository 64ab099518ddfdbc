//! Coupled melting run: per slab, solve the temperature field, recover the
//! solid-side flux on the source, update the velocity and translate the strip.
//!
//! The velocity computed from slab n moves the mesh in slab n+1.

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::cbf::{self, FluxOrientation};
use crate::ccm::{self, CcmError};
use crate::config::{ConfigError, Coupling, RunConfig};
use crate::mesh::{self, Mesh, MeshError};
use crate::motion::{self, MotionError, MotionState};
use crate::output::{self, CsvWriter};
use crate::stfem::{self, Dirichlet, SlabProblem};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("step {step}: {msg}")]
    Numerical { step: usize, msg: String },
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl DriverError {
    /// Process exit code: 2 for configuration or input problems, 3 for
    /// failures during the time loop.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Numerical { .. } => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// End of the slab, t_{n+1}.
    pub time: f64,
    /// Velocity computed from this slab, applied to the next one.
    pub velocity: f64,
    pub displacement: f64,
    /// Recovered q_s on the source surface (W/m², into the solid), before clamping.
    pub flux_avg: f64,
    pub flux_min: f64,
    pub flux_max: f64,
    pub slip_count: usize,
    /// q_s was negative and clamped to zero for the closure.
    pub clamped: bool,
    pub stalled: bool,
    pub solver_iterations: usize,
    pub closure_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorTraces {
    pub positions: Vec<mesh::Point>,
    /// Sample times, starting at t = 0.
    pub times: Vec<f64>,
    /// `values[i][k]`: sensor k at `times[i]`.
    pub values: Vec<Vec<Option<f64>>>,
}

impl SensorTraces {
    pub fn trace(&self, k: usize) -> Vec<Option<f64>> {
        self.values.iter().map(|row| row[k]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<StepRecord>,
    /// Velocity used in the first slab.
    pub initial_velocity: f64,
    pub u_eq: f64,
    pub sensors: SensorTraces,
    pub final_displacement: f64,
    /// Mean velocity over the last 10% of steps.
    pub mean_velocity_tail: f64,
    /// Largest |T − T_s| seen on `outer` nodes.
    pub far_field_deviation: f64,
    pub runtime: f64,
    pub final_field: Vec<f64>,
}

impl RunReport {
    /// First record time at which the velocity reaches `fraction` of U_eq.
    pub fn time_to_fraction(&self, fraction: f64) -> Option<f64> {
        self.records.iter().find(|r| r.velocity >= fraction * self.u_eq).map(|r| r.time)
    }
}

/// Loads the configured mesh (relative to the working directory) and runs.
pub fn run(cfg: &RunConfig) -> Result<RunReport, DriverError> {
    let mesh = mesh::load_mesh(&cfg.mesh.path)?;
    run_with_mesh(cfg, mesh)
}

fn numerical(step: usize) -> impl Fn(String) -> DriverError {
    move |msg| DriverError::Numerical { step, msg }
}

fn dirichlet_nodes(mesh: &Mesh, tags: &[String]) -> Result<Vec<usize>, DriverError> {
    let mut nodes = Vec::new();
    for tag in tags {
        if !mesh.has_tag(tag) {
            return Err(DriverError::Input(format!("mesh has no boundary tagged `{tag}`")));
        }
        nodes.extend(mesh.nodes_with_tag(tag));
    }
    nodes.sort_unstable();
    nodes.dedup();
    Ok(nodes)
}

pub fn run_with_mesh(cfg: &RunConfig, mut mesh: Mesh) -> Result<RunReport, DriverError> {
    let start = Instant::now();
    let diags = mesh::validate_mesh(&mesh);
    if !diags.is_empty() {
        let msg: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(DriverError::Input(msg.join("; ")));
    }
    let mut state = motion::init_motion(&mut mesh, cfg.mesh.direction).map_err(|e| DriverError::Input(e.to_string()))?;
    if !mesh.has_tag(&cfg.source.tip) {
        return Err(DriverError::Input(format!("mesh has no boundary tagged `{}`", cfg.source.tip)));
    }
    let fixed = dirichlet_nodes(&mesh, &cfg.source.dirichlet)?;
    let outer = mesh.nodes_with_tag("outer");
    let mat = cfg.solid();
    let closure = cfg.closure();
    let tol = cfg.numerics.secant_tol;
    let u_eq = ccm::u_equilibrium_with(&closure, tol).map_err(|e| DriverError::Input(e.to_string()))?;
    let t_s = cfg.material.t_s;
    let t_m = cfg.t_m;

    let dir = &cfg.output.directory;
    std::fs::create_dir_all(dir)?;
    let mut csv = CsvWriter::create(&dir.join(&cfg.output.csv), output::RUN_CSV_HEADER)?;
    let mut flux_csv = CsvWriter::create(&dir.join(&cfg.output.flux_csv), output::FLUX_CSV_HEADER)?;
    let mut sensor_csv = if cfg.output.sensors.is_empty() {
        None
    } else {
        Some(CsvWriter::create(
            &dir.join(&cfg.output.sensor_csv),
            &output::sensor_csv_header(cfg.output.sensors.len()),
        )?)
    };

    let mut field = vec![t_s; mesh.n_nodes()];
    for &v in &fixed {
        field[v] = t_m;
    }
    let mut sensors = SensorTraces { positions: cfg.output.sensors.clone(), times: Vec::new(), values: Vec::new() };
    let mut sample = |mesh: &Mesh, state: &MotionState, field: &[f64], t: f64, csv: &mut Option<CsvWriter>| {
        if sensors.positions.is_empty() {
            return Ok::<(), std::io::Error>(());
        }
        let v = output::sample_sensors(mesh, &state.active_elements, field, &sensors.positions);
        if let Some(w) = csv {
            w.row(&output::sensor_csv_row(t, &v))?;
        }
        sensors.times.push(t);
        sensors.values.push(v);
        Ok(())
    };
    sample(&mesh, &state, &field, 0.0, &mut sensor_csv)?;

    let mut u = match cfg.source.coupling {
        Coupling::Equilibrium => u_eq,
        Coupling::Transient => 0.0,
    };
    let initial_velocity = u;
    let mut records = Vec::with_capacity(cfg.n_steps);
    let mut far_field_deviation: f64 = 0.0;
    let mut warned = false;
    let dt = cfg.dt;

    for step in 0..cfg.n_steps {
        let fail = numerical(step);
        let t = (step + 1) as f64 * dt;
        let d = u * dt;
        let coords_new = state.displaced_coords(&mesh, d);
        let problem = SlabProblem {
            coords_old: mesh.nodes.clone(),
            coords_new,
            dt,
            trace_prev: field.clone(),
            dirichlet: vec![Dirichlet { nodes: fixed.clone(), value: t_m }],
            neumann: Vec::new(),
            active: state.active_elements.clone(),
        };
        let result = (|| {
            let sys = stfem::assemble_slab(&mesh, &problem, &mat).map_err(|e| e.to_string())?;
            let sol = stfem::solve_system(&sys, cfg.numerics.solver_tol, cfg.numerics.solver_max_iter)
                .map_err(|e| e.to_string())?;
            let flux = cbf::recover_flux(
                &mesh,
                &problem,
                &mat,
                &sys.dofs,
                &sol.coefficients,
                &cfg.source.tip,
                FluxOrientation::Inward,
                cfg.numerics.flux_averaging,
                t,
            )
            .map_err(|e| e.to_string())?;
            sol.top_into(&sys.dofs, &mut field);
            Ok::<_, String>((sol.iterations, flux))
        })();
        let (solver_iterations, flux) = match result {
            Ok(r) => r,
            Err(msg) => {
                dump_state(dir, &mesh, &field, &state, step);
                return Err(fail(msg));
            }
        };
        let q_s = flux.q_s_avg;
        if !q_s.is_finite() {
            dump_state(dir, &mesh, &field, &state, step);
            return Err(fail(format!("recovered flux is not finite ({q_s})")));
        }
        let clamped = q_s < 0.0;
        let (u_next, stalled, closure_iterations) = match cfg.source.coupling {
            Coupling::Equilibrium => (u, false, 0),
            Coupling::Transient => {
                let r = ccm::u_transient_with(&closure, q_s.max(0.0), tol).map_err(|e: CcmError| {
                    dump_state(dir, &mesh, &field, &state, step);
                    fail(e.to_string())
                })?;
                (r.velocity, r.stalled, r.iterations)
            }
        };

        let outcome = state.advance(&mut mesh, d).map_err(|e: MotionError| {
            dump_state(dir, &mesh, &field, &state, step);
            fail(e.to_string())
        })?;
        state.init_entering(&mesh, &outcome, &mut field, cfg.mesh.entering, t_s);
        for &v in &fixed {
            if state.active_nodes[v] {
                field[v] = t_m;
            }
        }

        for &v in &outer {
            if state.active_nodes[v] {
                far_field_deviation = far_field_deviation.max((field[v] - t_s).abs());
            }
        }
        if far_field_deviation > 0.1 && !warned {
            log::warn!(
                "step {step}: far-field boundary deviates {far_field_deviation:.3} K from T_s; the domain may be too small"
            );
            warned = true;
        }

        let rec = StepRecord {
            time: t,
            velocity: u_next,
            displacement: state.total_displacement,
            flux_avg: q_s,
            flux_min: flux.min(),
            flux_max: flux.max(),
            slip_count: state.slips,
            clamped,
            stalled,
            solver_iterations,
            closure_iterations,
        };
        csv.row(&output::run_csv_row(rec.time, rec.velocity, rec.displacement, rec.flux_avg, rec.slip_count))?;
        flux_csv.row(&format!(
            "{},{},{},{}",
            output::fmt_f64(t),
            output::fmt_f64(rec.flux_min),
            output::fmt_f64(rec.flux_max),
            output::fmt_f64(rec.flux_avg)
        ))?;
        sample(&mesh, &state, &field, t, &mut sensor_csv)?;
        if cfg.output.vtk_every > 0 && (step + 1) % cfg.output.vtk_every == 0 {
            output::write_vtk(&dir.join(output::vtk_name(step + 1)), &mesh, &field, &state.active_elements, &format!("ccmsim t = {t}"))?;
        }
        log::debug!(
            "step {step}: t = {t}, U = {u_next:.6e}, q_s = {q_s:.6e}, displacement = {:.6e}, slips = {}",
            state.total_displacement,
            state.slips
        );
        records.push(rec);
        u = u_next;
    }
    csv.finish()?;
    flux_csv.finish()?;
    if let Some(w) = sensor_csv {
        w.finish()?;
    }

    let clamps = records.iter().filter(|r| r.clamped).count();
    if clamps > 0 {
        log::info!("negative q_s clamped to zero in {clamps} of {} steps", records.len());
    }
    let tail = (cfg.n_steps / 10).max(1);
    let mean_velocity_tail = records[records.len() - tail..].iter().map(|r| r.velocity).sum::<f64>() / tail as f64;
    let report = RunReport {
        final_displacement: state.total_displacement,
        records,
        initial_velocity,
        u_eq,
        sensors,
        mean_velocity_tail,
        far_field_deviation,
        runtime: start.elapsed().as_secs_f64(),
        final_field: field,
    };
    log::info!(
        "finished {} steps in {:.2} s: displacement {:.6} m, mean tail velocity {:.6e} m/s (U_eq {:.6e})",
        cfg.n_steps,
        report.runtime,
        report.final_displacement,
        report.mean_velocity_tail,
        report.u_eq
    );
    Ok(report)
}

fn dump_state(dir: &Path, mesh: &Mesh, field: &[f64], state: &MotionState, step: usize) {
    let path = dir.join("failure_state.vtk");
    match output::write_vtk(&path, mesh, field, &state.active_elements, &format!("state before failed step {step}")) {
        Ok(()) => log::error!("step {step} failed; state written to {}", path.display()),
        Err(e) => log::error!("step {step} failed; could not write state dump: {e}"),
    }
}
