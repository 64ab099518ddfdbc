//! Unstructured triangular meshes partitioned for shear-slip motion.
//!
//! A mesh carries four region roles: the static solid, the moving strip that
//! hosts the heat source, the thin update layers that connect the two along
//! each seam, and the virtual rows that close the moving strip into a ring.
//! The strip layout (ordered node rows of uniform height) is stored with the
//! mesh and used by [`crate::motion`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// Relative tolerance for geometric predicates.
pub const GEOM_TOL: f64 = 1e-12;

pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("triangle {0} is not counter-clockwise (signed area {1:e})")]
    Orientation(usize, f64),
    #[error("dangling node: {0}")]
    DanglingNode(String),
    #[error("region {0} has no role assigned")]
    UnknownRegion(u32),
    #[error("unknown region role `{0}`")]
    UnknownRole(String),
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionRole {
    Static,
    Moving,
    UpdateLayer,
    Virtual,
}

impl RegionRole {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionRole::Static => "static",
            RegionRole::Moving => "moving",
            RegionRole::UpdateLayer => "update_layer",
            RegionRole::Virtual => "virtual",
        }
    }
}

impl FromStr for RegionRole {
    type Err = MeshError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(RegionRole::Static),
            "moving" => Ok(RegionRole::Moving),
            "update_layer" => Ok(RegionRole::UpdateLayer),
            "virtual" => Ok(RegionRole::Virtual),
            other => Err(MeshError::UnknownRole(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub region: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: String,
}

/// One node row of the moving strip. All nodes share the same coordinate
/// along the strip axis.
#[derive(Debug, Clone, PartialEq)]
pub struct StripRow {
    pub nodes: Vec<usize>,
    pub is_virtual: bool,
}

/// Row structure of the moving strip, listed in increasing axis coordinate.
/// The list is cyclic: the last row is followed by the first.
#[derive(Debug, Clone, PartialEq)]
pub struct StripLayout {
    pub h_row: f64,
    pub rows: Vec<StripRow>,
}

impl StripLayout {
    pub fn physical_rows(&self) -> impl Iterator<Item = (usize, &StripRow)> {
        self.rows.iter().enumerate().filter(|(_, r)| !r.is_virtual)
    }

    /// Map node id -> ring row index.
    pub fn row_of_node(&self, n_nodes: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; n_nodes];
        for (k, row) in self.rows.iter().enumerate() {
            for &n in &row.nodes {
                if n < n_nodes {
                    map[n] = Some(k);
                }
            }
        }
        map
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<Triangle>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub region_roles: BTreeMap<u32, RegionRole>,
    pub strip: Option<StripLayout>,
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn role(&self, tri: usize) -> RegionRole {
        self.region_roles[&self.triangles[tri].region]
    }

    pub fn triangle_area_with(&self, coords: &[Point], tri: usize) -> f64 {
        let [a, b, c] = self.triangles[tri].nodes;
        signed_area(coords[a], coords[b], coords[c])
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        self.triangle_area_with(&self.nodes, tri)
    }

    /// Characteristic length used to scale geometric tolerances.
    pub fn length_scale(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        ((hi[0] - lo[0]).max(hi[1] - lo[1])).max(f64::MIN_POSITIVE)
    }

    pub fn triangles_with_role(&self, role: RegionRole) -> Vec<usize> {
        (0..self.triangles.len())
            .filter(|&t| self.role(t) == role)
            .collect()
    }

    /// Node ids appearing on boundary edges with the given tag, sorted.
    pub fn nodes_with_tag(&self, tag: &str) -> Vec<usize> {
        let mut set: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.nodes)
            .collect();
        set.sort_unstable();
        set.dedup();
        set
    }

    pub fn edges_with_tag(&self, tag: &str) -> Vec<[usize; 2]> {
        self.boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .map(|e| e.nodes)
            .collect()
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.boundary_edges.iter().any(|e| e.tag == tag)
    }

    /// Checks the structural invariants that do not depend on the strip layout.
    /// Virtual triangles are exempt from the orientation check: their geometry
    /// is defined by the ring placement, see [`validate_mesh`].
    pub fn check_invariants(&self) -> Result<(), MeshError> {
        let n = self.nodes.len();
        let mut used = vec![false; n];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in &tri.nodes {
                if v >= n {
                    return Err(MeshError::DanglingNode(format!(
                        "triangle {t} references node {v} (only {n} nodes)"
                    )));
                }
                used[v] = true;
            }
            let role = self
                .region_roles
                .get(&tri.region)
                .ok_or(MeshError::UnknownRegion(tri.region))?;
            if *role != RegionRole::Virtual {
                let area = self.triangle_area(t);
                if area <= GEOM_TOL * self.length_scale().powi(2) {
                    return Err(MeshError::Orientation(t, area));
                }
            }
        }
        for e in &self.boundary_edges {
            for &v in &e.nodes {
                if v >= n {
                    return Err(MeshError::DanglingNode(format!(
                        "boundary edge ({}, {}) references node {v}",
                        e.nodes[0], e.nodes[1]
                    )));
                }
            }
        }
        if let Some(strip) = &self.strip {
            for row in &strip.rows {
                for &v in &row.nodes {
                    if v >= n {
                        return Err(MeshError::DanglingNode(format!(
                            "strip row references node {v}"
                        )));
                    }
                }
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::DanglingNode(format!(
                "node {v} is not used by any triangle"
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// File format

struct LineReader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
        }
    }

    /// Next non-empty line with comments stripped, as (1-based line number, tokens).
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.lines.by_ref() {
            let content = raw.split('#').next().unwrap_or("");
            let toks: Vec<&str> = content.split_whitespace().collect();
            if !toks.is_empty() {
                return Some((i + 1, toks));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), MeshError> {
        self.next().ok_or_else(|| MeshError::Parse {
            line: 0,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_num<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T, MeshError> {
    tok.parse().map_err(|_| MeshError::Parse {
        line,
        msg: format!("invalid {what} `{tok}`"),
    })
}

fn section_count(toks: &[&str], line: usize, name: &str) -> Result<usize, MeshError> {
    if toks.len() != 2 || toks[0] != name {
        return Err(MeshError::Parse {
            line,
            msg: format!("expected `{name} <count>`, found `{}`", toks.join(" ")),
        });
    }
    parse_num(toks[1], line, "count")
}

fn check_len(toks: &[&str], n: usize, line: usize, what: &str) -> Result<(), MeshError> {
    if toks.len() != n {
        return Err(MeshError::Parse {
            line,
            msg: format!("{what} line needs {n} fields, found {}", toks.len()),
        });
    }
    Ok(())
}

fn check_id(id: usize, expected: usize, line: usize, what: &str) -> Result<(), MeshError> {
    if id != expected {
        return Err(MeshError::Parse {
            line,
            msg: format!("{what} ids must be dense and 0-based: expected {expected}, found {id}"),
        });
    }
    Ok(())
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut rd = LineReader::new(text);
    let (line, toks) = rd.expect("header")?;
    if toks != ["CCMMESH", "1"] {
        return Err(MeshError::Parse {
            line,
            msg: "expected header `CCMMESH 1`".into(),
        });
    }

    let (line, toks) = rd.expect("NODES")?;
    let n_nodes = section_count(&toks, line, "NODES")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let (line, toks) = rd.expect("node")?;
        check_len(&toks, 3, line, "node")?;
        check_id(parse_num(toks[0], line, "node id")?, i, line, "node")?;
        let x: f64 = parse_num(toks[1], line, "coordinate")?;
        let y: f64 = parse_num(toks[2], line, "coordinate")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(MeshError::Parse {
                line,
                msg: "non-finite coordinate".into(),
            });
        }
        nodes.push([x, y]);
    }

    let (line, toks) = rd.expect("TRIANGLES")?;
    let n_tri = section_count(&toks, line, "TRIANGLES")?;
    let mut triangles = Vec::with_capacity(n_tri);
    for i in 0..n_tri {
        let (line, toks) = rd.expect("triangle")?;
        check_len(&toks, 5, line, "triangle")?;
        check_id(parse_num(toks[0], line, "triangle id")?, i, line, "triangle")?;
        let mut tri = [0usize; 3];
        for k in 0..3 {
            tri[k] = parse_num(toks[1 + k], line, "node index")?;
            if tri[k] >= n_nodes {
                return Err(MeshError::DanglingNode(format!(
                    "line {line}: triangle {i} references node {} (only {n_nodes} nodes)",
                    tri[k]
                )));
            }
        }
        triangles.push(Triangle {
            nodes: tri,
            region: parse_num(toks[4], line, "region id")?,
        });
    }

    let (line, toks) = rd.expect("BOUNDARY")?;
    let n_edges = section_count(&toks, line, "BOUNDARY")?;
    let mut boundary_edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let (line, toks) = rd.expect("boundary edge")?;
        check_len(&toks, 3, line, "boundary")?;
        let a: usize = parse_num(toks[0], line, "node index")?;
        let b: usize = parse_num(toks[1], line, "node index")?;
        if a >= n_nodes || b >= n_nodes {
            return Err(MeshError::DanglingNode(format!(
                "line {line}: boundary edge references node out of range"
            )));
        }
        boundary_edges.push(BoundaryEdge {
            nodes: [a, b],
            tag: toks[2].to_string(),
        });
    }

    let (line, toks) = rd.expect("REGION_ROLE")?;
    let n_roles = section_count(&toks, line, "REGION_ROLE")?;
    let mut region_roles = BTreeMap::new();
    for _ in 0..n_roles {
        let (line, toks) = rd.expect("region role")?;
        check_len(&toks, 2, line, "region role")?;
        let id: u32 = parse_num(toks[0], line, "region id")?;
        let role: RegionRole = toks[1].parse()?;
        region_roles.insert(id, role);
    }

    let strip = match rd.next() {
        None => None,
        Some((line, toks)) => {
            if toks.len() != 3 || toks[0] != "STRIP" {
                return Err(MeshError::Parse {
                    line,
                    msg: "expected `STRIP h_row=<value> rows=<count>`".into(),
                });
            }
            let h_row: f64 = key_value(toks[1], "h_row", line)?;
            let n_rows: usize = key_value(toks[2], "rows", line)?;
            let mut rows = Vec::with_capacity(n_rows);
            for i in 0..n_rows {
                let (line, toks) = rd.expect("strip row")?;
                let mut it = toks.iter().copied();
                let idx: usize = parse_num(it.next().unwrap(), line, "row index")?;
                check_id(idx, i, line, "row")?;
                let mut is_virtual = false;
                let mut row_nodes = Vec::new();
                for tok in it {
                    if tok == "V" {
                        is_virtual = true;
                    } else {
                        let n: usize = parse_num(tok, line, "node index")?;
                        if n >= n_nodes {
                            return Err(MeshError::DanglingNode(format!(
                                "line {line}: strip row references node {n}"
                            )));
                        }
                        row_nodes.push(n);
                    }
                }
                rows.push(StripRow {
                    nodes: row_nodes,
                    is_virtual,
                });
            }
            if let Some((line, _)) = rd.next() {
                return Err(MeshError::Parse {
                    line,
                    msg: "trailing content after STRIP section".into(),
                });
            }
            Some(StripLayout { h_row, rows })
        }
    };

    let mesh = Mesh {
        nodes,
        triangles,
        boundary_edges,
        region_roles,
        strip,
    };
    mesh.check_invariants()?;
    Ok(mesh)
}

fn key_value<T: FromStr>(tok: &str, key: &str, line: usize) -> Result<T, MeshError> {
    let v = tok
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| MeshError::Parse {
            line,
            msg: format!("expected `{key}=<value>`, found `{tok}`"),
        })?;
    parse_num(v, line, key)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let text = fs::read_to_string(path)?;
    parse_mesh(&text)
}

impl fmt::Display for Mesh {
    /// Serializes in the `CCMMESH 1` format. Coordinates use the shortest
    /// representation that round-trips exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CCMMESH 1")?;
        writeln!(f, "NODES {}", self.nodes.len())?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(f, "{i} {:?} {:?}", p[0], p[1])?;
        }
        writeln!(f, "TRIANGLES {}", self.triangles.len())?;
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(
                f,
                "{i} {} {} {} {}",
                t.nodes[0], t.nodes[1], t.nodes[2], t.region
            )?;
        }
        writeln!(f, "BOUNDARY {}", self.boundary_edges.len())?;
        for e in &self.boundary_edges {
            writeln!(f, "{} {} {}", e.nodes[0], e.nodes[1], e.tag)?;
        }
        writeln!(f, "REGION_ROLE {}", self.region_roles.len())?;
        for (id, role) in &self.region_roles {
            writeln!(f, "{id} {}", role.as_str())?;
        }
        if let Some(strip) = &self.strip {
            writeln!(f, "STRIP h_row={:?} rows={}", strip.h_row, strip.rows.len())?;
            for (i, row) in strip.rows.iter().enumerate() {
                write!(f, "{i}")?;
                if row.is_virtual {
                    write!(f, " V")?;
                }
                for n in &row.nodes {
                    write!(f, " {n}")?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    fs::write(path, mesh.to_string())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Strip geometry derived from the layout

/// Axis along which strip rows are stacked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
    pub fn transverse(self) -> usize {
        1 - self.index()
    }
}

/// One seam between the static region and the moving strip.
#[derive(Debug, Clone, PartialEq)]
pub struct Seam {
    /// Static seam nodes ordered along the axis.
    pub static_nodes: Vec<usize>,
    /// Transverse coordinate of the moving side of the update layer.
    pub moving_transverse: f64,
    /// For each ring row, the node of that row on the moving side of this seam.
    pub moving_node_of_row: Vec<usize>,
}

impl Seam {
    /// Static/moving node pairs in the unshifted configuration.
    pub fn node_pairs(&self, first_physical_row: usize) -> Vec<(usize, usize)> {
        let m = self.moving_node_of_row.len();
        self.static_nodes
            .iter()
            .enumerate()
            .map(|(j, &s)| (s, self.moving_node_of_row[(first_physical_row + j) % m]))
            .collect()
    }
}

/// Kinds of invariant violations reported by [`validate_mesh`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    Orientation,
    BoundaryEdge,
    RegionRole,
    UpdateLayer,
    IndexBounds,
    RowAlignment,
    RowHeight,
    SeamConformity,
    RingClosure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

/// Fully resolved strip structure: axis, row positions, band membership and seams.
#[derive(Debug, Clone)]
pub struct StripGeometry {
    pub axis: Axis,
    pub h_row: f64,
    /// Ring index of the first (lowest) physical row.
    pub first_physical: usize,
    pub n_physical_rows: usize,
    /// Axis coordinate of the first physical row in the file.
    pub origin: f64,
    /// Number of virtual rows placed above the physical window in the file
    /// (the rest sit below it).
    pub virtual_above: usize,
    pub row_of_node: Vec<Option<usize>>,
    /// Ring index of the lower row of the band each strip triangle belongs to.
    pub band_of_triangle: Vec<Option<usize>>,
    pub seams: Vec<Seam>,
}

impl StripGeometry {
    pub fn n_rows(&self) -> usize {
        self.row_of_node.iter().flatten().max().map_or(0, |m| m + 1)
    }
}

/// Resolve the strip geometry, collecting every violated invariant.
pub fn analyze_strip(mesh: &Mesh, diags: &mut Vec<Diagnostic>) -> Option<StripGeometry> {
    let push = |diags: &mut Vec<Diagnostic>, kind, message: String| {
        diags.push(Diagnostic { kind, message })
    };
    let strip = mesh.strip.as_ref()?;
    let n_nodes = mesh.nodes.len();
    let m = strip.rows.len();
    if m == 0 {
        push(diags, DiagnosticKind::RingClosure, "strip has zero rows".into());
        return None;
    }
    if !(strip.h_row > 0.0) {
        push(
            diags,
            DiagnosticKind::RowHeight,
            format!("h_row must be positive, found {}", strip.h_row),
        );
        return None;
    }
    let scale = mesh.length_scale();
    let tol = 1e-9 * strip.h_row.max(GEOM_TOL * scale);

    for row in &strip.rows {
        if row.nodes.iter().any(|&n| n >= n_nodes) {
            push(
                diags,
                DiagnosticKind::IndexBounds,
                "strip row node index out of range".into(),
            );
            return None;
        }
        if row.nodes.is_empty() {
            push(diags, DiagnosticKind::RowAlignment, "empty strip row".into());
            return None;
        }
    }

    // Axis: the coordinate shared by all nodes of a row.
    let spread = |row: &StripRow, d: usize| {
        let v: Vec<f64> = row.nodes.iter().map(|&n| mesh.nodes[n][d]).collect();
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let probe_row = strip
        .rows
        .iter()
        .max_by_key(|r| r.nodes.len())
        .expect("non-empty");
    let axis = if spread(probe_row, 1) <= spread(probe_row, 0) {
        Axis::Y
    } else {
        Axis::X
    };
    let ai = axis.index();
    for (k, row) in strip.rows.iter().enumerate() {
        if spread(row, ai) > tol {
            push(
                diags,
                DiagnosticKind::RowAlignment,
                format!("row {k} nodes do not share a common axis coordinate"),
            );
        }
    }

    let mut row_of_node = vec![None; n_nodes];
    for (k, row) in strip.rows.iter().enumerate() {
        for &n in &row.nodes {
            if row_of_node[n].is_some() {
                push(
                    diags,
                    DiagnosticKind::RowAlignment,
                    format!("node {n} appears in more than one strip row"),
                );
            }
            row_of_node[n] = Some(k);
        }
    }

    // Physical rows must be contiguous in the cyclic order.
    let phys: Vec<usize> = strip.physical_rows().map(|(k, _)| k).collect();
    if phys.len() < 2 {
        push(
            diags,
            DiagnosticKind::RingClosure,
            "strip needs at least two physical rows".into(),
        );
        return None;
    }
    if phys.len() == m {
        push(
            diags,
            DiagnosticKind::RingClosure,
            "strip has no virtual rows; the ring cannot close".into(),
        );
        return None;
    }
    let first_physical = (0..m)
        .find(|&k| !strip.rows[k].is_virtual && strip.rows[(k + m - 1) % m].is_virtual)
        .unwrap_or(0);
    let n_physical_rows = phys.len();
    for j in 0..n_physical_rows {
        if strip.rows[(first_physical + j) % m].is_virtual {
            push(
                diags,
                DiagnosticKind::RingClosure,
                "physical rows are not contiguous in the ring".into(),
            );
            return None;
        }
    }
    // Virtual rows are numbered after the physical window; those listed after
    // it in the file lie above, those wrapping to the start lie below.
    let virtual_above = (first_physical + n_physical_rows..m).count();

    let row_coord = |k: usize| mesh.nodes[strip.rows[k].nodes[0]][ai];
    let origin = row_coord(first_physical);
    let h = strip.h_row;
    // Consecutive file rows (non-wrapping pairs) must be exactly h_row apart.
    for k in 0..m - 1 {
        let gap = row_coord(k + 1) - row_coord(k);
        if (gap - h).abs() > tol {
            push(
                diags,
                DiagnosticKind::RowHeight,
                format!(
                    "non-uniform row height between rows {k} and {}: {gap} vs h_row {h}",
                    k + 1
                ),
            );
        }
    }

    // Band membership of strip triangles.
    let mut band_of_triangle = vec![None; mesh.triangles.len()];
    let mut band_has_triangle = vec![false; m];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let role = match mesh.region_roles.get(&tri.region) {
            Some(r) => *r,
            None => continue,
        };
        if !matches!(role, RegionRole::Moving | RegionRole::Virtual) {
            continue;
        }
        let rows: Vec<Option<usize>> = tri.nodes.iter().map(|&n| row_of_node[n]).collect();
        if rows.iter().any(|r| r.is_none()) {
            push(
                diags,
                DiagnosticKind::RowAlignment,
                format!("strip triangle {t} has a node outside the strip rows"),
            );
            continue;
        }
        let rows: Vec<usize> = rows.into_iter().flatten().collect();
        let band = rows
            .iter()
            .copied()
            .find(|&lo| rows.iter().all(|&r| r == lo || r == (lo + 1) % m));
        match band {
            Some(lo) if rows.iter().any(|&r| r != lo) => {
                band_of_triangle[t] = Some(lo);
                band_has_triangle[lo] = true;
            }
            _ => push(
                diags,
                DiagnosticKind::RowAlignment,
                format!("strip triangle {t} does not span two adjacent rows"),
            ),
        }
    }
    if !band_has_triangle[(m + first_physical - 1) % m] && !band_has_triangle[m - 1] {
        push(
            diags,
            DiagnosticKind::RingClosure,
            "no triangles close the ring between the last and first rows".into(),
        );
    }

    // Orientation of strip triangles in ring placement: each band is checked
    // with its upper row lifted to lower + h_row.
    for (t, band) in band_of_triangle.iter().enumerate() {
        let Some(lo) = *band else { continue };
        let mut pts = [[0.0; 2]; 3];
        for (i, &n) in mesh.triangles[t].nodes.iter().enumerate() {
            let mut p = mesh.nodes[n];
            let r = row_of_node[n].unwrap();
            p[ai] = if r == lo { 0.0 } else { h };
            pts[i] = p;
        }
        let area = signed_area(pts[0], pts[1], pts[2]);
        if area <= GEOM_TOL * scale * scale {
            push(
                diags,
                DiagnosticKind::Orientation,
                format!("strip triangle {t} is not counter-clockwise in ring placement"),
            );
        }
    }

    // Seams from update-layer triangles.
    let ul: Vec<usize> = mesh.triangles_with_role(RegionRole::UpdateLayer);
    let ti = axis.transverse();
    let mut static_by_line: BTreeMap<i64, (f64, HashSet<usize>, HashSet<usize>)> =
        BTreeMap::new();
    let key_of = |x: f64| (x / tol.max(1e-300)).round() as i64;
    // Group update-layer triangles by the transverse coordinate of their static nodes.
    for &t in &ul {
        let tri = mesh.triangles[t].nodes;
        let stat: Vec<usize> = tri.iter().copied().filter(|&n| row_of_node[n].is_none()).collect();
        let mov: Vec<usize> = tri.iter().copied().filter(|&n| row_of_node[n].is_some()).collect();
        if stat.is_empty() || mov.is_empty() {
            push(
                diags,
                DiagnosticKind::UpdateLayer,
                format!("update-layer triangle {t} does not touch both a static and a moving node"),
            );
            continue;
        }
        let xs = mesh.nodes[stat[0]][ti];
        let entry = static_by_line
            .entry(key_of(xs))
            .or_insert_with(|| (xs, HashSet::new(), HashSet::new()));
        entry.1.extend(stat);
        entry.2.extend(mov);
    }
    let mut seams = Vec::new();
    for (_, (_, stat, mov)) in static_by_line {
        let mut static_nodes: Vec<usize> = stat.into_iter().collect();
        static_nodes.sort_by(|&a, &b| mesh.nodes[a][ai].total_cmp(&mesh.nodes[b][ai]));
        let mov: Vec<usize> = mov.into_iter().collect();
        let moving_transverse = mesh.nodes[mov[0]][ti];
        if mov
            .iter()
            .any(|&n| (mesh.nodes[n][ti] - moving_transverse).abs() > tol)
        {
            push(
                diags,
                DiagnosticKind::UpdateLayer,
                "moving side of an update layer is not a straight seam".into(),
            );
        }
        let mut moving_node_of_row = Vec::with_capacity(m);
        for (k, row) in strip.rows.iter().enumerate() {
            match row
                .nodes
                .iter()
                .copied()
                .find(|&n| (mesh.nodes[n][ti] - moving_transverse).abs() <= tol)
            {
                Some(n) => moving_node_of_row.push(n),
                None => {
                    push(
                        diags,
                        DiagnosticKind::SeamConformity,
                        format!("row {k} has no node on the moving side of a seam"),
                    );
                    moving_node_of_row.push(usize::MAX);
                }
            }
        }
        if static_nodes.len() != n_physical_rows {
            push(
                diags,
                DiagnosticKind::SeamConformity,
                format!(
                    "seam has {} static nodes but the strip has {} physical rows",
                    static_nodes.len(),
                    n_physical_rows
                ),
            );
        }
        for (j, &s) in static_nodes.iter().enumerate() {
            let expect = origin + j as f64 * h;
            let got = mesh.nodes[s][ai];
            if (got - expect).abs() > tol {
                push(
                    diags,
                    DiagnosticKind::SeamConformity,
                    format!(
                        "static seam node {s} at axis coordinate {got} does not match row spacing (expected {expect})"
                    ),
                );
            }
        }
        seams.push(Seam {
            static_nodes,
            moving_transverse,
            moving_node_of_row,
        });
    }

    Some(StripGeometry {
        axis,
        h_row: h,
        first_physical,
        n_physical_rows,
        origin,
        virtual_above,
        row_of_node,
        band_of_triangle,
        seams,
    })
}

/// Reports every violated mesh and strip invariant. An empty report means the
/// mesh is valid.
pub fn validate_mesh(mesh: &Mesh) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let push = |diags: &mut Vec<Diagnostic>, kind, message: String| {
        diags.push(Diagnostic { kind, message })
    };
    let n = mesh.nodes.len();
    let scale = mesh.length_scale();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if tri.nodes.iter().any(|&v| v >= n) {
            push(
                &mut diags,
                DiagnosticKind::IndexBounds,
                format!("triangle {t} references a node out of range"),
            );
            continue;
        }
        match mesh.region_roles.get(&tri.region) {
            None => push(
                &mut diags,
                DiagnosticKind::RegionRole,
                format!("triangle {t} has region {} without a role", tri.region),
            ),
            Some(RegionRole::Virtual) => {}
            Some(_) => {
                let a = mesh.triangle_area(t);
                if a <= GEOM_TOL * scale * scale {
                    push(
                        &mut diags,
                        DiagnosticKind::Orientation,
                        format!("triangle {t} has non-positive signed area {a:e}"),
                    );
                }
            }
        }
    }

    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in &mesh.triangles {
        if tri.nodes.iter().any(|&v| v >= n) {
            continue;
        }
        for k in 0..3 {
            let (a, b) = (tri.nodes[k], tri.nodes[(k + 1) % 3]);
            *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    for e in &mesh.boundary_edges {
        let [a, b] = e.nodes;
        if a >= n || b >= n {
            push(
                &mut diags,
                DiagnosticKind::IndexBounds,
                format!("boundary edge ({a}, {b}) references a node out of range"),
            );
            continue;
        }
        let c = edge_count.get(&(a.min(b), a.max(b))).copied().unwrap_or(0);
        if c != 1 {
            push(
                &mut diags,
                DiagnosticKind::BoundaryEdge,
                format!(
                    "boundary edge ({a}, {b}) tagged `{}` belongs to {c} triangles",
                    e.tag
                ),
            );
        }
    }

    if mesh.strip.is_some() {
        let geom = analyze_strip(mesh, &mut diags);
        if let Some(g) = geom {
            for &t in &mesh.triangles_with_role(RegionRole::UpdateLayer) {
                let tri = mesh.triangles[t].nodes;
                let has_static = tri.iter().any(|&v| g.row_of_node[v].is_none());
                let has_moving = tri.iter().any(|&v| g.row_of_node[v].is_some());
                if !(has_static && has_moving) && !diags.iter().any(|d| d.kind == DiagnosticKind::UpdateLayer) {
                    push(
                        &mut diags,
                        DiagnosticKind::UpdateLayer,
                        format!("update-layer triangle {t} does not touch both sides"),
                    );
                }
            }
        }
    }
    diags
}

// ---------------------------------------------------------------------------
// Point location and interpolation

/// Barycentric coordinates of `p` with respect to triangle `tri`.
pub fn barycentric(coords: &[Point], tri: [usize; 3], p: Point) -> [f64; 3] {
    let (a, b, c) = (coords[tri[0]], coords[tri[1]], coords[tri[2]]);
    let area = signed_area(a, b, c);
    let l0 = signed_area(p, b, c) / area;
    let l1 = signed_area(a, p, c) / area;
    [l0, l1, 1.0 - l0 - l1]
}

fn accept(lambda: [f64; 3]) -> Option<[f64; 3]> {
    if lambda.iter().all(|&l| l >= -GEOM_TOL) {
        let mut l = lambda.map(|v| v.clamp(0.0, 1.0));
        let s: f64 = l.iter().sum();
        for v in &mut l {
            *v /= s;
        }
        Some(l)
    } else {
        None
    }
}

/// Finds an active triangle containing `p` by scanning all active triangles
/// in index order.
pub fn locate_point(mesh: &Mesh, active: &[usize], p: Point) -> Option<(usize, [f64; 3])> {
    if !p[0].is_finite() || !p[1].is_finite() {
        return None;
    }
    active.iter().find_map(|&t| {
        accept(barycentric(&mesh.nodes, mesh.triangles[t].nodes, p)).map(|l| (t, l))
    })
}

/// Barycentric-weighted value of a nodal field at a point of a triangle.
pub fn interpolate(mesh: &Mesh, field: &[f64], tri: usize, lambda: [f64; 3]) -> f64 {
    let n = mesh.triangles[tri].nodes;
    lambda[0] * field[n[0]] + lambda[1] * field[n[1]] + lambda[2] * field[n[2]]
}

/// Uniform background grid over the active triangles' bounding boxes.
pub struct PointLocator {
    lo: Point,
    cell: Point,
    dims: [usize; 2],
    bins: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh, active: &[usize]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for &t in active {
            for &n in &mesh.triangles[t].nodes {
                for d in 0..2 {
                    lo[d] = lo[d].min(mesh.nodes[n][d]);
                    hi[d] = hi[d].max(mesh.nodes[n][d]);
                }
            }
        }
        let side = ((active.len().max(1)) as f64).sqrt().ceil() as usize;
        let dims = [side.max(1), side.max(1)];
        let cell = [
            ((hi[0] - lo[0]) / dims[0] as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / dims[1] as f64).max(f64::MIN_POSITIVE),
        ];
        let mut bins = vec![Vec::new(); dims[0] * dims[1]];
        let clampi = |v: f64, d: usize| (v.floor().max(0.0) as usize).min(dims[d] - 1);
        for &t in active {
            let mut tlo = [f64::INFINITY; 2];
            let mut thi = [f64::NEG_INFINITY; 2];
            for &n in &mesh.triangles[t].nodes {
                for d in 0..2 {
                    tlo[d] = tlo[d].min(mesh.nodes[n][d]);
                    thi[d] = thi[d].max(mesh.nodes[n][d]);
                }
            }
            let i0 = clampi((tlo[0] - lo[0]) / cell[0], 0);
            let i1 = clampi((thi[0] - lo[0]) / cell[0], 0);
            let j0 = clampi((tlo[1] - lo[1]) / cell[1], 1);
            let j1 = clampi((thi[1] - lo[1]) / cell[1], 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * dims[0] + i].push(t);
                }
            }
        }
        Self { lo, cell, dims, bins }
    }

    pub fn locate(&self, mesh: &Mesh, p: Point) -> Option<(usize, [f64; 3])> {
        if !p[0].is_finite() || !p[1].is_finite() {
            return None;
        }
        let fi = (p[0] - self.lo[0]) / self.cell[0];
        let fj = (p[1] - self.lo[1]) / self.cell[1];
        if fi < -1e-9 || fj < -1e-9 || fi > self.dims[0] as f64 + 1e-9 || fj > self.dims[1] as f64 + 1e-9 {
            return None;
        }
        let i = (fi.floor().max(0.0) as usize).min(self.dims[0] - 1);
        let j = (fj.floor().max(0.0) as usize).min(self.dims[1] - 1);
        self.bins[j * self.dims[0] + i].iter().find_map(|&t| {
            accept(barycentric(&mesh.nodes, mesh.triangles[t].nodes, p)).map(|l| (t, l))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const UNIT_SQUARE: &str = "\
CCMMESH 1
# two triangles
NODES 4
0 0 0
1 1 0
2 1 1
3 0 1
TRIANGLES 2
0 0 1 2 0
1 0 2 3 0
BOUNDARY 4
0 1 bottom
1 2 right
2 3 top
3 0 left
REGION_ROLE 1
0 static
";

    #[test]
    fn minimal_square_loads() {
        let m = parse_mesh(UNIT_SQUARE).unwrap();
        assert_eq!(m.n_nodes(), 4);
        assert_eq!(m.n_triangles(), 2);
        assert!(validate_mesh(&m).is_empty());
        assert_eq!(m.nodes_with_tag("right"), vec![1, 2]);
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        let bad = UNIT_SQUARE.replace("0 0 1 2 0", "0 0 2 1 0");
        match parse_mesh(&bad) {
            Err(MeshError::Orientation(t, _)) => assert_eq!(t, 0),
            other => panic!("expected orientation error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let bad = UNIT_SQUARE.replace("2 1 1", "2 1 x");
        match parse_mesh(&bad) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn dangling_and_unknown_role() {
        let bad = UNIT_SQUARE.replace("1 0 2 3 0", "1 0 2 7 0");
        assert!(matches!(parse_mesh(&bad), Err(MeshError::DanglingNode(_))));
        let bad = UNIT_SQUARE.replace("0 static", "0 liquid");
        assert!(matches!(parse_mesh(&bad), Err(MeshError::UnknownRole(_))));
        let bad = UNIT_SQUARE.replace("0 static", "5 static");
        assert!(matches!(parse_mesh(&bad), Err(MeshError::UnknownRegion(0))));
        let bad = UNIT_SQUARE
            .replace("NODES 4", "NODES 5")
            .replace("3 0 1\n", "3 0 1\n4 2 2\n");
        assert!(matches!(parse_mesh(&bad), Err(MeshError::DanglingNode(_))));
    }

    #[test]
    fn round_trip_is_exact() {
        let mut m = parse_mesh(UNIT_SQUARE).unwrap();
        m.nodes[2] = [1.0 + 1e-15, 0.1 + 0.2];
        let again = parse_mesh(&m.to_string()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn centroid_location() {
        let m = parse_mesh(UNIT_SQUARE).unwrap();
        let c = [2.0 / 3.0, 1.0 / 3.0];
        let (t, l) = locate_point(&m, &[0, 1], c).unwrap();
        assert_eq!(t, 0);
        for v in l {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(locate_point(&m, &[0, 1], [1.5, 0.5]).is_none());
        let loc = PointLocator::new(&m, &[0, 1]);
        assert_eq!(loc.locate(&m, c).unwrap().0, 0);
    }

    #[test]
    fn interpolation_is_linear_exact() {
        let m = parse_mesh(UNIT_SQUARE).unwrap();
        let xs: Vec<f64> = m.nodes.iter().map(|p| p[0]).collect();
        let p = [0.3, 0.7];
        let (t, l) = locate_point(&m, &[0, 1], p).unwrap();
        assert!((interpolate(&m, &xs, t, l) - 0.3).abs() < 1e-12);
        assert!((interpolate(&m, &[4.0; 4], t, l) - 4.0).abs() < 1e-12);
    }
}
