//! Analytical references and convergence harnesses.

use std::fmt::Write as _;
use std::time::Instant;

use thiserror::Error;

use crate::cbf::{self, series_flux_reference, series_terms, CbfError, FluxAveraging, FluxOrientation};
use crate::mesh::{Mesh, Point};
use crate::meshgen::{meshupdate_mesh, unit_square};
use crate::motion::{init_motion, EnteringRule, MotionError};
use crate::stfem::{self, Dirichlet, MaterialSolid, SlabProblem, StfemError};

/// Seed of the jittered static nodes in the mesh-update verification meshes.
pub const MESHUPDATE_SEED: u64 = 20_240_601;
pub const MESHUPDATE_VELOCITY: f64 = 0.005;
pub const MESHUPDATE_STEPS: usize = 20;

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("convergence rate needs at least two rows with distinct h")]
    TooFewRows,
    #[error("invalid case parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Stfem(#[from] StfemError),
    #[error(transparent)]
    Cbf(#[from] CbfError),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2SpatialAtT,
    MaxOverTimeL2,
    RelativeScalar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub h: f64,
    pub dt: f64,
    pub error: f64,
    pub runtime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub norm: NormKind,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    /// Rows are kept sorted by h, largest first.
    pub fn new(norm: NormKind, mut rows: Vec<ErrorRow>) -> Self {
        rows.sort_by(|a, b| b.h.total_cmp(&a.h));
        Self { norm, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,dt,error,runtime\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", r.h, r.dt, r.error, r.runtime);
        }
        s
    }
}

/// Least-squares slope of log(error) against log(h).
pub fn convergence_rate(table: &ErrorTable) -> Result<f64, VerificationError> {
    let pts: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.h.ln(), r.error.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 || pts.iter().all(|p| p.0 == pts[0].0) {
        return Err(VerificationError::TooFewRows);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Temperature of the unit-slab cooling problem with T(x, 0) = 1, insulated
/// at x = 0 and held at zero at x = 1.
pub fn series_temperature(x: f64, t: f64) -> Option<f64> {
    if !(t > 0.0) || !(0.0..=1.0).contains(&x) {
        return None;
    }
    Some(series_terms(t, |lambda| 2.0 / lambda, |n, lambda| {
        let s = if n % 2 == 1 { 2.0 } else { -2.0 };
        s * (lambda * x).cos() / lambda
    }))
}

const QP: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

pub fn l2_error_at(mesh: &Mesh, coords: &[Point], active: &[usize], field: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let mut sum = 0.0;
    for &t in active {
        let tri = mesh.triangles[t].nodes;
        let x = [coords[tri[0]], coords[tri[1]], coords[tri[2]]];
        let area = 0.5 * ((x[1][0] - x[0][0]) * (x[2][1] - x[0][1]) - (x[2][0] - x[0][0]) * (x[1][1] - x[0][1]));
        for l in &QP {
            let p = [
                l[0] * x[0][0] + l[1] * x[1][0] + l[2] * x[2][0],
                l[0] * x[0][1] + l[1] * x[1][1] + l[2] * x[2][1],
            ];
            let v = l[0] * field[tri[0]] + l[1] * field[tri[1]] + l[2] * field[tri[2]];
            sum += area / 3.0 * (v - exact(p)).powi(2);
        }
    }
    sum.sqrt()
}

/// L2 norm of (field − exact) over the active triangles.
pub fn l2_error(mesh: &Mesh, active: &[usize], field: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    l2_error_at(mesh, &mesh.nodes, active, field, exact)
}

/// L2 error divided by the L2 norm of the exact solution.
pub fn relative_l2_error(mesh: &Mesh, active: &[usize], field: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let zero = vec![0.0; mesh.nodes.len()];
    l2_error(mesh, active, field, &exact) / l2_error(mesh, active, &zero, &exact)
}

#[derive(Debug, Clone)]
pub struct CbfCase {
    pub h: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub flux: Vec<f64>,
    pub reference: Vec<f64>,
    pub relative_error: Vec<f64>,
    pub runtime: f64,
}

impl CbfCase {
    pub fn error_table(&self) -> ErrorTable {
        let rows = self
            .relative_error
            .iter()
            .map(|&e| ErrorRow { h: self.h, dt: self.dt, error: e, runtime: self.runtime })
            .collect();
        ErrorTable::new(NormKind::RelativeScalar, rows)
    }

    pub fn series_csv(&self) -> String {
        let mut s = String::from("time,flux,reference,relative_error\n");
        for i in 0..self.times.len() {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], self.flux[i], self.reference[i], self.relative_error[i]
            );
        }
        s
    }

    /// Relative error at the step closest to time `t`.
    pub fn error_at(&self, t: f64) -> f64 {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.relative_error[i]
    }
}

/// Unit square initially at T = 1, insulated except for T = 0 on the right
/// edge; the flux recovered on the right edge is compared with the series.
pub fn run_cbf_case(h: f64, dt: f64, n_steps: usize) -> Result<CbfCase, VerificationError> {
    if !(h > 0.0 && h <= 1.0) || !(dt > 0.0) || n_steps == 0 {
        return Err(VerificationError::Invalid(format!("h = {h}, dt = {dt}, steps = {n_steps}")));
    }
    let start = Instant::now();
    let n = (1.0 / h).round() as usize;
    let mesh = unit_square(n);
    let mat = MaterialSolid { rho_s: 1.0, cp_s: 1.0, kappa_s: 1.0, t_s_initial: 1.0 };
    let active: Vec<usize> = (0..mesh.n_triangles()).collect();
    let right = mesh.nodes_with_tag("right");
    let mut field = vec![1.0; mesh.n_nodes()];
    let mut case = CbfCase {
        h,
        dt,
        times: Vec::new(),
        flux: Vec::new(),
        reference: Vec::new(),
        relative_error: Vec::new(),
        runtime: 0.0,
    };
    for step in 0..n_steps {
        let t = (step + 1) as f64 * dt;
        let mut problem = SlabProblem::fixed(&mesh, dt, field.clone(), active.clone());
        problem.dirichlet.push(Dirichlet { nodes: right.clone(), value: 0.0 });
        let sys = stfem::assemble_slab(&mesh, &problem, &mat)?;
        let sol = stfem::solve_system(&sys, 1e-12, 10)?;
        let flux = cbf::recover_flux(
            &mesh,
            &problem,
            &mat,
            &sys.dofs,
            &sol.coefficients,
            "right",
            FluxOrientation::Outward,
            FluxAveraging::NodeMean,
            t,
        )?;
        sol.top_into(&sys.dofs, &mut field);
        let reference = series_flux_reference(t).expect("t > 0");
        case.times.push(t);
        case.flux.push(flux.q_s_avg);
        case.reference.push(reference);
        case.relative_error.push((flux.q_s_avg - reference).abs() / reference);
    }
    case.runtime = start.elapsed().as_secs_f64();
    Ok(case)
}

#[derive(Debug, Clone)]
pub struct MeshUpdateCase {
    pub h: f64,
    pub errors: Vec<f64>,
    pub max_error: f64,
    pub runtime: f64,
    pub slips: usize,
}

/// Linear steady field T = x on the unit square with a strip translating in
/// −y at `velocity`; returns the largest L2 error over the run.
pub fn run_meshupdate_case(h: f64, velocity: f64) -> Result<MeshUpdateCase, VerificationError> {
    if !(h > 0.0 && h <= 0.5) || !(velocity >= 0.0) {
        return Err(VerificationError::Invalid(format!("h = {h}, velocity = {velocity}")));
    }
    let start = Instant::now();
    let mut mesh = meshupdate_mesh(h, MESHUPDATE_SEED);
    let mut state = init_motion(&mut mesh, [0.0, -1.0])?;
    let mat = MaterialSolid { rho_s: 1.0, cp_s: 1.0, kappa_s: 1.0, t_s_initial: 1.0 };
    let left = mesh.nodes_with_tag("left");
    let right = mesh.nodes_with_tag("right");
    let mut field: Vec<f64> = mesh.nodes.iter().map(|p| p[0]).collect();
    let dt = 1.0;
    let mut errors = Vec::with_capacity(MESHUPDATE_STEPS);
    for _ in 0..MESHUPDATE_STEPS {
        let d = velocity * dt;
        let coords_new = state.displaced_coords(&mesh, d);
        let problem = SlabProblem {
            coords_old: mesh.nodes.clone(),
            coords_new: coords_new.clone(),
            dt,
            trace_prev: field.clone(),
            dirichlet: vec![
                Dirichlet { nodes: left.clone(), value: 0.0 },
                Dirichlet { nodes: right.clone(), value: 1.0 },
            ],
            neumann: Vec::new(),
            active: state.active_elements.clone(),
        };
        let sys = stfem::assemble_slab(&mesh, &problem, &mat)?;
        let sol = stfem::solve_system(&sys, 1e-12, 10)?;
        sol.top_into(&sys.dofs, &mut field);
        errors.push(l2_error_at(&mesh, &coords_new, &problem.active, &field, |p| p[0]));
        let outcome = state.advance(&mut mesh, d)?;
        state.init_entering(&mesh, &outcome, &mut field, EnteringRule::Copy, 0.0);
    }
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    Ok(MeshUpdateCase { h, errors, max_error, runtime: start.elapsed().as_secs_f64(), slips: state.slips })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_exact_powers() {
        let rows = |p: i32| {
            ErrorTable::new(
                NormKind::MaxOverTimeL2,
                [0.2, 0.1, 0.05].iter().map(|&h: &f64| ErrorRow { h, dt: 1.0, error: h.powi(p), runtime: 0.0 }).collect(),
            )
        };
        assert!((convergence_rate(&rows(1)).unwrap() - 1.0).abs() < 1e-12);
        assert!((convergence_rate(&rows(2)).unwrap() - 2.0).abs() < 1e-12);
        let one = ErrorTable::new(NormKind::MaxOverTimeL2, vec![ErrorRow { h: 0.1, dt: 1.0, error: 0.1, runtime: 0.0 }]);
        assert!(matches!(convergence_rate(&one), Err(VerificationError::TooFewRows)));
    }

    #[test]
    fn table_sorted_and_serialized() {
        let t = ErrorTable::new(
            NormKind::MaxOverTimeL2,
            vec![ErrorRow { h: 0.1, dt: 1.0, error: 0.5, runtime: 0.0 }, ErrorRow { h: 0.2, dt: 1.0, error: 1.0, runtime: 0.0 }],
        );
        assert_eq!(t.rows[0].h, 0.2);
        assert!(t.to_csv().starts_with("h,dt,error,runtime\n"));
    }

    #[test]
    fn l2_of_unit_offset() {
        let mesh = unit_square(3);
        let active: Vec<usize> = (0..mesh.n_triangles()).collect();
        let f: Vec<f64> = mesh.nodes.iter().map(|p| p[0] + 1.0).collect();
        assert!((l2_error(&mesh, &active, &f, |p| p[0]) - 1.0).abs() < 1e-14);
        let g: Vec<f64> = mesh.nodes.iter().map(|p| 2.0 * p[0] - p[1]).collect();
        assert!(l2_error(&mesh, &active, &g, |p| 2.0 * p[0] - p[1]) < 1e-14);
    }
}
