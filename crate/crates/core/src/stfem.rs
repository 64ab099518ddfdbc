//! Time-discontinuous prismatic space-time finite elements for the heat equation.
//!
//! Each slab is discretized with 6-node prisms: a linear triangle at the
//! bottom (t_n) and top (t_{n+1}) time levels, joined linearly in time. Node
//! motion between the two levels is part of the prism geometry, so mesh
//! velocity enters only through the space-time map.

use thiserror::Error;

use crate::mesh::{Mesh, Point};
use crate::sparse::{self, CsrMatrix, SolveError};

#[derive(Debug, Error)]
pub enum StfemError {
    #[error("degenerate prism on triangle {tri}: space-time Jacobian {det:e}")]
    Degenerate { tri: usize, det: f64 },
    #[error("invalid slab problem: {0}")]
    Invalid(String),
    #[error("boundary tag `{0}` not present on active elements")]
    MissingTag(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSolid {
    pub rho_s: f64,
    pub cp_s: f64,
    pub kappa_s: f64,
    pub t_s_initial: f64,
}

impl MaterialSolid {
    pub fn diffusivity(&self) -> f64 {
        self.kappa_s / (self.rho_s * self.cp_s)
    }

    pub fn heat_capacity(&self) -> f64 {
        self.rho_s * self.cp_s
    }

    pub fn validate(&self) -> Result<(), StfemError> {
        for (name, v) in [
            ("rho_s", self.rho_s),
            ("cp_s", self.cp_s),
            ("kappa_s", self.kappa_s),
            ("T_s", self.t_s_initial),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(StfemError::Invalid(format!("{name} must be positive, found {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    pub nodes: Vec<usize>,
    pub value: f64,
}

/// Prescribed heat flux into the domain (W/m²) on edges with `tag`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neumann {
    pub tag: String,
    pub flux: f64,
}

#[derive(Debug, Clone)]
pub struct SlabProblem {
    pub coords_old: Vec<Point>,
    pub coords_new: Vec<Point>,
    pub dt: f64,
    /// Nodal temperature at (t_n)⁻, indexed by node id.
    pub trace_prev: Vec<f64>,
    pub dirichlet: Vec<Dirichlet>,
    pub neumann: Vec<Neumann>,
    pub active: Vec<usize>,
}

impl SlabProblem {
    /// Slab on a fixed mesh.
    pub fn fixed(mesh: &Mesh, dt: f64, trace_prev: Vec<f64>, active: Vec<usize>) -> Self {
        Self {
            coords_old: mesh.nodes.clone(),
            coords_new: mesh.nodes.clone(),
            dt,
            trace_prev,
            dirichlet: Vec::new(),
            neumann: Vec::new(),
            active,
        }
    }

    fn validate(&self, mesh: &Mesh) -> Result<(), StfemError> {
        let n = mesh.nodes.len();
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(StfemError::Invalid(format!("dt must be positive, found {}", self.dt)));
        }
        if self.coords_old.len() != n || self.coords_new.len() != n || self.trace_prev.len() != n {
            return Err(StfemError::Invalid("coordinate or trace arrays do not match the mesh".into()));
        }
        let mut seen = vec![false; n];
        for bc in &self.dirichlet {
            for &v in &bc.nodes {
                if v >= n {
                    return Err(StfemError::Invalid(format!("Dirichlet node {v} out of range")));
                }
                if seen[v] {
                    return Err(StfemError::Invalid(format!("node {v} is in two Dirichlet sets")));
                }
                seen[v] = true;
            }
        }
        Ok(())
    }
}

/// Mapping of active nodes to unknowns: node `nodes[i]` owns rows 2i (bottom
/// level) and 2i+1 (top level).
#[derive(Debug, Clone)]
pub struct DofMap {
    pub nodes: Vec<usize>,
    pub index_of_node: Vec<Option<usize>>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, active: &[usize]) -> Self {
        let mut index_of_node = vec![None; mesh.nodes.len()];
        let mut flag = vec![false; mesh.nodes.len()];
        for &t in active {
            for &v in &mesh.triangles[t].nodes {
                flag[v] = true;
            }
        }
        let mut nodes = Vec::new();
        for (v, &f) in flag.iter().enumerate() {
            if f {
                index_of_node[v] = Some(nodes.len());
                nodes.push(v);
            }
        }
        Self { nodes, index_of_node }
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    /// (dof row, value) pairs replaced by identity rows.
    pub fixed: Vec<(usize, f64)>,
}

const TRI_QP: [[f64; 2]; 3] = [[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]];
const TRI_W: f64 = 1.0 / 6.0;

fn time_qp() -> [f64; 2] {
    let d = 0.5 / 3f64.sqrt();
    [0.5 - d, 0.5 + d]
}

/// Local prism matrix, indexed (2a + i, 2b + j) for spatial node a and time level i.
fn prism_matrix(x0: [Point; 3], x1: [Point; 3], dt: f64, diff: f64, tri: usize) -> Result<[[f64; 6]; 6], StfemError> {
    let mut k = [[0.0; 6]; 6];
    let w: [[f64; 2]; 3] = std::array::from_fn(|a| [(x1[a][0] - x0[a][0]) / dt, (x1[a][1] - x0[a][1]) / dt]);
    for &th in &time_qp() {
        let l = [1.0 - th, th];
        let dl = [-1.0 / dt, 1.0 / dt];
        let x: [Point; 3] = std::array::from_fn(|a| {
            [(1.0 - th) * x0[a][0] + th * x1[a][0], (1.0 - th) * x0[a][1] + th * x1[a][1]]
        });
        let det = (x[1][0] - x[0][0]) * (x[2][1] - x[0][1]) - (x[2][0] - x[0][0]) * (x[1][1] - x[0][1]);
        if !(det > 0.0) {
            return Err(StfemError::Degenerate { tri, det });
        }
        let grad: [[f64; 2]; 3] = std::array::from_fn(|a| {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            [(x[b][1] - x[c][1]) / det, (x[c][0] - x[b][0]) / det]
        });
        for qp in &TRI_QP {
            let n = [1.0 - qp[0] - qp[1], qp[0], qp[1]];
            let dq = TRI_W * 0.5 * det * dt;
            let wv = [
                n[0] * w[0][0] + n[1] * w[1][0] + n[2] * w[2][0],
                n[0] * w[0][1] + n[1] * w[1][1] + n[2] * w[2][1],
            ];
            let conv: [f64; 3] = std::array::from_fn(|b| wv[0] * grad[b][0] + wv[1] * grad[b][1]);
            for a in 0..3 {
                for b in 0..3 {
                    let gg = grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1];
                    for i in 0..2 {
                        for j in 0..2 {
                            let dtt = n[b] * dl[j] - conv[b] * l[j];
                            k[2 * a + i][2 * b + j] += dq * (n[a] * l[i] * dtt + diff * gg * l[i] * l[j]);
                        }
                    }
                }
            }
        }
    }
    Ok(k)
}

fn tri_coords(coords: &[Point], tri: [usize; 3]) -> [Point; 3] {
    [coords[tri[0]], coords[tri[1]], coords[tri[2]]]
}

/// Consistent P1 mass matrix of a triangle.
fn mass_matrix(x: [Point; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * ((x[1][0] - x[0][0]) * (x[2][1] - x[0][1]) - (x[2][0] - x[0][0]) * (x[1][1] - x[0][1]));
    std::array::from_fn(|a| std::array::from_fn(|b| area / 12.0 * if a == b { 2.0 } else { 1.0 }))
}

fn edge_length(p: Point, q: Point) -> f64 {
    ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
}

/// Neumann load per (node, level), divided by ρc.
fn neumann_loads(mesh: &Mesh, problem: &SlabProblem, mat: &MaterialSolid, active_nodes: &[Option<usize>]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for bc in &problem.neumann {
        if bc.flux == 0.0 {
            continue;
        }
        for [a, b] in mesh.edges_with_tag(&bc.tag) {
            if active_nodes[a].is_none() || active_nodes[b].is_none() {
                continue;
            }
            for &th in &time_qp() {
                let pa = lerp(problem.coords_old[a], problem.coords_new[a], th);
                let pb = lerp(problem.coords_old[b], problem.coords_new[b], th);
                let len = edge_length(pa, pb);
                let l = [1.0 - th, th];
                for (i, li) in l.iter().enumerate() {
                    let v = 0.5 * problem.dt * li * 0.5 * len * bc.flux / mat.heat_capacity();
                    out.push((a, i, v));
                    out.push((b, i, v));
                }
            }
        }
    }
    out
}

fn lerp(p: Point, q: Point, th: f64) -> Point {
    [(1.0 - th) * p[0] + th * q[0], (1.0 - th) * p[1] + th * q[1]]
}

/// Assembles the slab system over the active elements.
pub fn assemble_slab(mesh: &Mesh, problem: &SlabProblem, mat: &MaterialSolid) -> Result<LinearSystem, StfemError> {
    problem.validate(mesh)?;
    mat.validate()?;
    let dofs = DofMap::new(mesh, &problem.active);
    let nd = dofs.n_dofs();
    let diff = mat.diffusivity();
    let mut trip = Vec::with_capacity(problem.active.len() * 36);
    let mut rhs = vec![0.0; nd];
    for &t in &problem.active {
        let tri = mesh.triangles[t].nodes;
        let k = prism_matrix(
            tri_coords(&problem.coords_old, tri),
            tri_coords(&problem.coords_new, tri),
            problem.dt,
            diff,
            t,
        )?;
        let m = mass_matrix(tri_coords(&problem.coords_old, tri));
        let idx: [usize; 3] = std::array::from_fn(|a| dofs.index_of_node[tri[a]].unwrap());
        for a in 0..3 {
            for b in 0..3 {
                for i in 0..2 {
                    for j in 0..2 {
                        let mut v = k[2 * a + i][2 * b + j];
                        if i == 0 && j == 0 {
                            v += m[a][b];
                        }
                        trip.push((2 * idx[a] + i, 2 * idx[b] + j, v));
                    }
                }
                rhs[2 * idx[a]] += m[a][b] * problem.trace_prev[tri[b]];
            }
        }
    }
    for (v, i, load) in neumann_loads(mesh, problem, mat, &dofs.index_of_node) {
        rhs[2 * dofs.index_of_node[v].unwrap() + i] += load;
    }
    let mut matrix = CsrMatrix::from_triplets(nd, nd, trip);
    let mut fixed = Vec::new();
    for bc in &problem.dirichlet {
        for &v in &bc.nodes {
            if let Some(i) = dofs.index_of_node[v] {
                for lvl in 0..2 {
                    let r = 2 * i + lvl;
                    matrix.set_identity_row(r);
                    rhs[r] = bc.value;
                    fixed.push((r, bc.value));
                }
            }
        }
    }
    Ok(LinearSystem {
        matrix,
        rhs,
        dofs,
        fixed,
    })
}

#[derive(Debug, Clone)]
pub struct SlabSolution {
    /// Solution coefficients, two per active node (bottom, top).
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl SlabSolution {
    /// Writes the top-level values of active nodes into a nodal field.
    pub fn top_into(&self, dofs: &DofMap, field: &mut [f64]) {
        for (i, &v) in dofs.nodes.iter().enumerate() {
            field[v] = self.coefficients[2 * i + 1];
        }
    }
}

pub fn solve_system(sys: &LinearSystem, tol: f64, max_iter: usize) -> Result<SlabSolution, StfemError> {
    let sol = sparse::solve(&sys.matrix, &sys.rhs, tol, max_iter)?;
    let mut x = sol.x;
    for &(r, v) in &sys.fixed {
        x[r] = v;
    }
    Ok(SlabSolution {
        coefficients: x,
        iterations: sol.iterations,
        relative_residual: sol.relative_residual,
    })
}

/// Weak residual of the converged slab tested against the unconstrained
/// basis functions of boundary nodes.
#[derive(Debug, Clone)]
pub struct BoundaryResidual {
    pub nodes: Vec<usize>,
    /// Residual per node and time level, divided by the slab length.
    pub levels: Vec<[f64; 2]>,
}

impl BoundaryResidual {
    /// Residual against the time-constant test function, per node.
    pub fn per_node(&self) -> Vec<f64> {
        self.levels.iter().map(|r| r[0] + r[1]).collect()
    }
}

pub fn weak_residual_on_boundary(
    mesh: &Mesh,
    problem: &SlabProblem,
    mat: &MaterialSolid,
    dofs: &DofMap,
    solution: &[f64],
    tag: &str,
) -> Result<BoundaryResidual, StfemError> {
    let mut nodes: Vec<usize> = mesh
        .edges_with_tag(tag)
        .into_iter()
        .filter(|e| e.iter().all(|&v| dofs.index_of_node[v].is_some()))
        .flatten()
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    if nodes.is_empty() {
        return Err(StfemError::MissingTag(tag.to_string()));
    }
    let mut slot = vec![None; mesh.nodes.len()];
    for (k, &v) in nodes.iter().enumerate() {
        slot[v] = Some(k);
    }
    let diff = mat.diffusivity();
    let mut levels = vec![[0.0; 2]; nodes.len()];
    for &t in &problem.active {
        let tri = mesh.triangles[t].nodes;
        if tri.iter().all(|&v| slot[v].is_none()) {
            continue;
        }
        let k = prism_matrix(
            tri_coords(&problem.coords_old, tri),
            tri_coords(&problem.coords_new, tri),
            problem.dt,
            diff,
            t,
        )?;
        let m = mass_matrix(tri_coords(&problem.coords_old, tri));
        let u: [[f64; 2]; 3] = std::array::from_fn(|b| {
            let i = dofs.index_of_node[tri[b]].unwrap();
            [solution[2 * i], solution[2 * i + 1]]
        });
        for a in 0..3 {
            let Some(s) = slot[tri[a]] else { continue };
            for i in 0..2 {
                let mut r = 0.0;
                for b in 0..3 {
                    for j in 0..2 {
                        r += k[2 * a + i][2 * b + j] * u[b][j];
                    }
                    if i == 0 {
                        r += m[a][b] * (u[b][0] - problem.trace_prev[tri[b]]);
                    }
                }
                levels[s][i] += r;
            }
        }
    }
    for (v, i, load) in neumann_loads(mesh, problem, mat, &dofs.index_of_node) {
        if let Some(s) = slot[v] {
            levels[s][i] -= load;
        }
    }
    for r in &mut levels {
        r[0] /= problem.dt;
        r[1] /= problem.dt;
    }
    Ok(BoundaryResidual { nodes, levels })
}

/// ∫ T dΩ with the consistent linear-element mass.
pub fn integral(mesh: &Mesh, coords: &[Point], active: &[usize], field: &[f64]) -> f64 {
    active
        .iter()
        .map(|&t| {
            let tri = mesh.triangles[t].nodes;
            let x = tri_coords(coords, tri);
            let area = 0.5 * ((x[1][0] - x[0][0]) * (x[2][1] - x[0][1]) - (x[2][0] - x[0][0]) * (x[1][1] - x[0][1]));
            area * (field[tri[0]] + field[tri[1]] + field[tri[2]]) / 3.0
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgen::unit_square;

    fn unit_mat() -> MaterialSolid {
        MaterialSolid {
            rho_s: 1.0,
            cp_s: 1.0,
            kappa_s: 1.0,
            t_s_initial: 1.0,
        }
    }

    fn all(mesh: &Mesh) -> Vec<usize> {
        (0..mesh.n_triangles()).collect()
    }

    #[test]
    fn constant_is_preserved() {
        let mesh = unit_square(4);
        let p = SlabProblem::fixed(&mesh, 0.1, vec![3.5; mesh.n_nodes()], all(&mesh));
        let sys = assemble_slab(&mesh, &p, &unit_mat()).unwrap();
        let sol = solve_system(&sys, 1e-12, 5).unwrap();
        for v in sol.coefficients {
            assert!((v - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn prism_rows_annihilate_constants_in_time() {
        let x0 = [[0.0, 0.0], [1.0, 0.1], [0.2, 0.9]];
        let x1 = [[0.0, -0.3], [1.0, -0.2], [0.2, 0.6]];
        let k = prism_matrix(x0, x1, 0.7, 0.4, 0).unwrap();
        // A field constant in space and time has zero time derivative and gradient.
        for row in &k {
            assert!(row.iter().sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_prism_is_rejected() {
        let x0 = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let x1 = [[0.0, 0.0], [1.0, 0.0], [0.0, -1.0]];
        assert!(matches!(prism_matrix(x0, x1, 1.0, 1.0, 7), Err(StfemError::Degenerate { tri: 7, .. })));
    }

    #[test]
    fn dirichlet_sets_must_be_disjoint() {
        let mesh = unit_square(2);
        let mut p = SlabProblem::fixed(&mesh, 0.1, vec![0.0; mesh.n_nodes()], all(&mesh));
        p.dirichlet.push(Dirichlet { nodes: vec![0, 1], value: 1.0 });
        p.dirichlet.push(Dirichlet { nodes: vec![1], value: 2.0 });
        assert!(matches!(assemble_slab(&mesh, &p, &unit_mat()), Err(StfemError::Invalid(_))));
    }
}
