//! Shear-slip update of the moving strip with a virtual ring of recycled rows.
//!
//! Ring rows are addressed by their index in the strip layout. A slot is the
//! position of a row relative to the physical window: slots `0..=P` are the
//! physical node rows, larger slots are virtual. Between slips the strip
//! translates rigidly and the update layers shear; at a slip every row moves
//! down one slot and the update-layer triangles are reconnected one row over.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::mesh::{analyze_strip, signed_area, Axis, Mesh, Point, RegionRole, StripGeometry};

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("mesh has no strip layout")]
    NoStrip,
    #[error("invalid strip layout: {0}")]
    InvalidLayout(String),
    #[error("direction {0:?} is not aligned with the strip axis {1:?}")]
    Direction([f64; 2], Axis),
    #[error("invalid displacement increment {0}")]
    Displacement(f64),
    #[error("triangle {tri} degenerate after motion (signed area {area:e})")]
    Degenerate { tri: usize, area: f64 },
    #[error("non-conforming mesh: {0}")]
    NonConforming(String),
}

/// How nodes on a row that (re)enters the physical window are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnteringRule {
    /// Copy from the adjacent row inside the window, matching transverse position.
    Copy,
    /// Set to the far-field value.
    FarField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Vertex {
    Fixed(usize),
    Seam { seam: usize, slot: usize },
}

#[derive(Debug, Clone)]
pub struct MotionState {
    pub direction: [f64; 2],
    /// +1 when motion is along increasing axis coordinate, −1 otherwise.
    pub sign: f64,
    pub geometry: StripGeometry,
    pub slips: usize,
    pub offset: f64,
    pub initial_offset: f64,
    pub total_displacement: f64,
    /// Ring row index at each slot.
    pub cyclic_row_order: Vec<usize>,
    pub active_elements: Vec<usize>,
    pub active_nodes: Vec<bool>,
    templates: Vec<(usize, [Vertex; 3])>,
    strip_nodes: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdvanceOutcome {
    pub slips: usize,
    /// Nodes that became active in this advance, grouped by row with the row
    /// nearest the window interior first.
    pub entered_rows: Vec<Vec<usize>>,
}

impl AdvanceOutcome {
    pub fn entered_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.entered_rows.iter().flatten().copied()
    }
}

pub fn parse_direction(s: &str) -> Option<[f64; 2]> {
    match s.trim() {
        "+x" | "x" => Some([1.0, 0.0]),
        "-x" => Some([-1.0, 0.0]),
        "+y" | "y" => Some([0.0, 1.0]),
        "-y" => Some([0.0, -1.0]),
        _ => None,
    }
}

impl MotionState {
    pub fn n_rows(&self) -> usize {
        self.cyclic_row_order.len()
    }

    /// Index of the last physical slot.
    pub fn last_slot(&self) -> usize {
        self.geometry.n_physical_rows - 1
    }

    pub fn h_row(&self) -> f64 {
        self.geometry.h_row
    }

    fn slot_of_ring(&self, k: usize) -> usize {
        let m = self.n_rows();
        let fp = self.geometry.first_physical;
        let c = self.slips % m;
        if self.sign < 0.0 {
            (k + 2 * m - fp - c) % m
        } else {
            (k + m - fp + c) % m
        }
    }

    fn ring_of_slot(&self, q: usize) -> usize {
        let m = self.n_rows();
        let fp = self.geometry.first_physical;
        let c = self.slips % m;
        if self.sign < 0.0 {
            (q + fp + c) % m
        } else {
            (q + fp + m - c) % m
        }
    }

    /// Axis coordinate of the rows at slot `q` for a given offset.
    fn slot_coordinate(&self, q: usize, offset: f64) -> f64 {
        let m = self.n_rows() as f64;
        let g = if self.sign > 0.0 && q > self.last_slot() {
            q as f64 - m
        } else {
            q as f64
        };
        self.geometry.origin + g * self.geometry.h_row + self.sign * offset
    }

    /// Node coordinates with the strip displaced by `offset + d`, without slipping.
    pub fn displaced_coords(&self, mesh: &Mesh, d: f64) -> Vec<Point> {
        let mut coords = mesh.nodes.clone();
        self.place(&mut coords, self.offset + d);
        coords
    }

    fn place(&self, coords: &mut [Point], offset: f64) {
        let ai = self.geometry.axis.index();
        let coord_by_ring: Vec<f64> = (0..self.n_rows())
            .map(|k| self.slot_coordinate(self.slot_of_ring(k), offset))
            .collect();
        for &(n, k) in &self.strip_nodes {
            coords[n][ai] = coord_by_ring[k];
        }
    }

    fn rewire(&self, mesh: &mut Mesh) {
        for (t, tpl) in &self.templates {
            for (v, vert) in tpl.iter().enumerate() {
                mesh.triangles[*t].nodes[v] = match *vert {
                    Vertex::Fixed(n) => n,
                    Vertex::Seam { seam, slot } => {
                        self.geometry.seams[seam].moving_node_of_row[self.ring_of_slot(slot)]
                    }
                };
            }
        }
    }

    fn refresh_active(&mut self, mesh: &Mesh) {
        let last_band = self.last_slot() - 1;
        let mut active = Vec::with_capacity(mesh.triangles.len());
        for t in 0..mesh.triangles.len() {
            let on = match mesh.role(t) {
                RegionRole::Static | RegionRole::UpdateLayer => true,
                RegionRole::Moving | RegionRole::Virtual => match self.geometry.band_of_triangle[t] {
                    Some(lo) => self.slot_of_ring(lo) <= last_band,
                    None => false,
                },
            };
            if on {
                active.push(t);
            }
        }
        let mut nodes = vec![false; mesh.nodes.len()];
        for &t in &active {
            for &n in &mesh.triangles[t].nodes {
                nodes[n] = true;
            }
        }
        self.active_elements = active;
        self.active_nodes = nodes;
        self.cyclic_row_order = (0..self.n_rows()).map(|q| self.ring_of_slot(q)).collect();
    }

    fn check_positive(&self, mesh: &Mesh) -> Result<(), MotionError> {
        let scale = mesh.length_scale();
        for &t in &self.active_elements {
            let area = mesh.triangle_area(t);
            if area <= 1e-12 * scale * scale {
                return Err(MotionError::Degenerate { tri: t, area });
            }
        }
        Ok(())
    }

    fn check_seams(&self, mesh: &Mesh) -> Result<(), MotionError> {
        let ai = self.geometry.axis.index();
        let h = self.geometry.h_row;
        for (s, seam) in self.geometry.seams.iter().enumerate() {
            for (j, &sn) in seam.static_nodes.iter().enumerate() {
                let mn = seam.moving_node_of_row[self.ring_of_slot(j)];
                let gap = mesh.nodes[mn][ai] - mesh.nodes[sn][ai] - self.sign * self.offset;
                if gap.abs() > 1e-9 * h {
                    return Err(MotionError::NonConforming(format!(
                        "seam {s} row {j}: moving node {mn} misaligned by {gap:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Translates the strip by `d` along the direction, slipping whenever the
    /// accumulated offset reaches one row height.
    pub fn advance(&mut self, mesh: &mut Mesh, d: f64) -> Result<AdvanceOutcome, MotionError> {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(MotionError::Displacement(d));
        }
        if d == 0.0 {
            return Ok(AdvanceOutcome::default());
        }
        let h = self.geometry.h_row;
        let acc = self.offset + d;
        let mut n = (acc / h).floor();
        let mut rem = acc - n * h;
        if rem >= h * (1.0 - 1e-12) {
            n += 1.0;
            rem = 0.0;
        }
        let rem = rem.max(0.0);
        let n = n as usize;
        self.total_displacement += d;
        let was_active = self.active_nodes.clone();
        self.slips += n;
        self.offset = rem;
        let mut coords = std::mem::take(&mut mesh.nodes);
        self.place(&mut coords, self.offset);
        mesh.nodes = coords;
        let mut entered_rows = Vec::new();
        if n > 0 {
            self.rewire(mesh);
            self.refresh_active(mesh);
            // Rows entering the window, nearest the interior first.
            let p = self.last_slot();
            let slots: Vec<usize> = if self.sign < 0.0 {
                (0..=p).rev().collect()
            } else {
                (0..=p).collect()
            };
            for q in slots {
                let k = self.ring_of_slot(q);
                let row: Vec<usize> = mesh.strip.as_ref().unwrap().rows[k]
                    .nodes
                    .iter()
                    .copied()
                    .filter(|&v| self.active_nodes[v] && !was_active[v])
                    .collect();
                if !row.is_empty() {
                    entered_rows.push(row);
                }
            }
            entered_rows.reverse();
            self.check_seams(mesh)?;
        }
        self.check_positive(mesh)?;
        Ok(AdvanceOutcome {
            slips: n,
            entered_rows,
        })
    }

    /// Assigns values to newly activated nodes.
    pub fn init_entering(
        &self,
        mesh: &Mesh,
        outcome: &AdvanceOutcome,
        field: &mut [f64],
        rule: EnteringRule,
        far_field: f64,
    ) {
        let strip = mesh.strip.as_ref().expect("strip");
        let ti = self.geometry.axis.transverse();
        for row in &outcome.entered_rows {
            for &v in row {
                field[v] = far_field;
            }
            if rule == EnteringRule::FarField {
                continue;
            }
            let k = self.geometry.row_of_node[row[0]].expect("strip node");
            let q = self.slot_of_ring(k);
            let donor_slot = if self.sign < 0.0 {
                q.saturating_sub(1)
            } else {
                (q + 1).min(self.last_slot())
            };
            let donor_row = &strip.rows[self.ring_of_slot(donor_slot)].nodes;
            for &v in row {
                let x = mesh.nodes[v][ti];
                if let Some(&dn) = donor_row.iter().filter(|&&u| u != v).min_by(|&&a, &&b| {
                    (mesh.nodes[a][ti] - x)
                        .abs()
                        .total_cmp(&(mesh.nodes[b][ti] - x).abs())
                }) {
                    field[v] = field[dn];
                }
            }
        }
    }
}

/// Sets up the motion state: places all strip rows by slot, records the
/// update-layer templates and the initial active set.
pub fn init_motion(mesh: &mut Mesh, direction: [f64; 2]) -> Result<MotionState, MotionError> {
    if mesh.strip.is_none() {
        return Err(MotionError::NoStrip);
    }
    let mut diags = Vec::new();
    let geometry = analyze_strip(mesh, &mut diags);
    if !diags.is_empty() {
        let msg: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(MotionError::InvalidLayout(msg.join("; ")));
    }
    let geometry = geometry.ok_or_else(|| MotionError::InvalidLayout("empty layout".into()))?;
    let ai = geometry.axis.index();
    let norm = (direction[0].powi(2) + direction[1].powi(2)).sqrt();
    if (direction[1 - ai]).abs() > 1e-12 * norm || direction[ai] == 0.0 {
        return Err(MotionError::Direction(direction, geometry.axis));
    }
    let sign = direction[ai].signum();
    let m = mesh.strip.as_ref().unwrap().rows.len();

    let mut strip_nodes = Vec::new();
    for (n, r) in geometry.row_of_node.iter().enumerate() {
        if let Some(k) = r {
            strip_nodes.push((n, *k));
        }
    }

    let mut seam_slot: HashMap<usize, (usize, usize)> = HashMap::new();
    for (s, seam) in geometry.seams.iter().enumerate() {
        for (k, &n) in seam.moving_node_of_row.iter().enumerate() {
            let slot = (k + m - geometry.first_physical) % m;
            seam_slot.insert(n, (s, slot));
        }
    }
    let mut templates = Vec::new();
    for t in mesh.triangles_with_role(RegionRole::UpdateLayer) {
        let mut tpl = [Vertex::Fixed(0); 3];
        for (v, &n) in mesh.triangles[t].nodes.iter().enumerate() {
            tpl[v] = if geometry.row_of_node[n].is_none() {
                Vertex::Fixed(n)
            } else {
                match seam_slot.get(&n) {
                    Some(&(seam, slot)) if slot < geometry.n_physical_rows => {
                        Vertex::Seam { seam, slot }
                    }
                    _ => {
                        return Err(MotionError::InvalidLayout(format!(
                            "update-layer triangle {t} uses moving node {n} off the seam or outside the window"
                        )))
                    }
                }
            };
        }
        templates.push((t, tpl));
    }

    let mut state = MotionState {
        direction: [direction[0] / norm, direction[1] / norm],
        sign,
        geometry,
        slips: 0,
        offset: 0.0,
        initial_offset: 0.0,
        total_displacement: 0.0,
        cyclic_row_order: (0..m).collect(),
        active_elements: Vec::new(),
        active_nodes: Vec::new(),
        templates,
        strip_nodes,
    };
    let mut coords = std::mem::take(&mut mesh.nodes);
    state.place(&mut coords, 0.0);
    mesh.nodes = coords;
    state.refresh_active(mesh);
    state.check_seams(mesh)?;
    state.check_positive(mesh)?;
    Ok(state)
}

/// Verifies that the active triangles form a conforming mesh: every edge is
/// shared by at most two active triangles and no active node lies in the
/// interior of an edge used only once.
pub fn check_conformity(mesh: &Mesh, active: &[usize]) -> Result<(), MotionError> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    let mut nodes = HashSet::new();
    for &t in active {
        let tri = mesh.triangles[t].nodes;
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
            nodes.insert(a);
        }
    }
    if let Some((e, c)) = count.iter().find(|(_, &c)| c > 2) {
        return Err(MotionError::NonConforming(format!(
            "edge {e:?} shared by {c} active triangles"
        )));
    }
    // Bin active nodes on a uniform grid for the hanging-node test.
    let nodes: Vec<usize> = nodes.into_iter().collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &n in &nodes {
        for d in 0..2 {
            lo[d] = lo[d].min(mesh.nodes[n][d]);
            hi[d] = hi[d].max(mesh.nodes[n][d]);
        }
    }
    let side = ((nodes.len() as f64).sqrt().ceil() as usize).max(1);
    let cell = [
        ((hi[0] - lo[0]) / side as f64).max(f64::MIN_POSITIVE),
        ((hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE),
    ];
    let idx = |v: f64, d: usize| (((v - lo[d]) / cell[d]).floor().max(0.0) as usize).min(side - 1);
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); side * side];
    for &n in &nodes {
        let p = mesh.nodes[n];
        bins[idx(p[1], 1) * side + idx(p[0], 0)].push(n);
    }
    for (&(a, b), &c) in &count {
        if c != 1 {
            continue;
        }
        let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
        let len2 = (pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2);
        for j in idx(pa[1].min(pb[1]), 1)..=idx(pa[1].max(pb[1]), 1) {
            for i in idx(pa[0].min(pb[0]), 0)..=idx(pa[0].max(pb[0]), 0) {
                for &n in &bins[j * side + i] {
                    if n == a || n == b {
                        continue;
                    }
                    let p = mesh.nodes[n];
                    let cross = 2.0 * signed_area(pa, pb, p);
                    let t = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / len2;
                    if cross.abs() <= 1e-9 * len2 && t > 1e-9 && t < 1.0 - 1e-9 {
                        return Err(MotionError::NonConforming(format!(
                            "node {n} hangs on boundary edge ({a}, {b})"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}
