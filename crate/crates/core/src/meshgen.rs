//! Generators for the structured-strip meshes used by the fixtures and the
//! verification cases.
//!
//! Geometry is built in local coordinates (s, a): `a` runs along the strip
//! axis, `s` across it. Every generated mesh is deterministic for a given
//! specification and seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{Axis, BoundaryEdge, Mesh, Point, RegionRole, StripLayout, StripRow, Triangle};

pub const REGION_STATIC: u32 = 0;
pub const REGION_MOVING: u32 = 1;
pub const REGION_UPDATE: u32 = 2;
pub const REGION_VIRTUAL: u32 = 3;

/// Structured n×n triangulation of the unit square with edge tags
/// `left`, `right`, `bottom`, `top`.
pub fn unit_square(n: usize) -> Mesh {
    let h = 1.0 / n as f64;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 * h, j as f64 * h]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push(Triangle { nodes: [a, b, c], region: REGION_STATIC });
            triangles.push(Triangle { nodes: [a, c, d], region: REGION_STATIC });
        }
    }
    let mut boundary_edges = Vec::new();
    for k in 0..n {
        boundary_edges.push(edge(id(k, 0), id(k + 1, 0), "bottom"));
        boundary_edges.push(edge(id(n, k), id(n, k + 1), "right"));
        boundary_edges.push(edge(id(k + 1, n), id(k, n), "top"));
        boundary_edges.push(edge(id(0, k + 1), id(0, k), "left"));
    }
    Mesh {
        nodes,
        triangles,
        boundary_edges,
        region_roles: BTreeMap::from([(REGION_STATIC, RegionRole::Static)]),
        strip: None,
    }
}

fn edge(a: usize, b: usize, tag: &str) -> BoundaryEdge {
    BoundaryEdge { nodes: [a, b], tag: tag.to_string() }
}

/// Points from `a` to `b` (inclusive) with spacing varying linearly from
/// about `h_a` at `a` to about `h_b` at `b`.
pub fn graded(a: f64, b: f64, h_a: f64, h_b: f64) -> Vec<f64> {
    let len = b - a;
    let n = ((2.0 * len / (h_a + h_b)).round() as usize).max(1);
    let raw: Vec<f64> = (0..n).map(|i| h_a + (h_b - h_a) * (i as f64 + 0.5) / n as f64).collect();
    let total: f64 = raw.iter().sum();
    let mut out = Vec::with_capacity(n + 1);
    let mut x = a;
    out.push(a);
    for (i, r) in raw.iter().enumerate() {
        x += r * len / total;
        out.push(if i + 1 == n { b } else { x });
    }
    out
}

/// Uniform points from `a` to `b` (inclusive) with spacing at most `h`.
pub fn uniform(a: f64, b: f64, h: f64) -> Vec<f64> {
    let n = (((b - a) / h) - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect()
}

/// Concatenates point lists that share their end points.
pub fn join(parts: &[Vec<f64>]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for p in parts {
        for &v in p {
            if out.last().map_or(true, |&l| (v - l).abs() > 1e-12) {
                out.push(v);
            }
        }
    }
    out
}

/// Static block beside the strip. `cols` is ordered from the seam outward.
#[derive(Debug, Clone)]
pub struct StaticSide {
    pub cols: Vec<f64>,
    /// Tag on the outermost column.
    pub outer_tag: String,
    /// Width of the update layer between the static seam and the strip.
    pub layer_width: f64,
}

/// Rectangular hole in the strip spanning physical rows `row_lo..=row_hi`.
#[derive(Debug, Clone)]
pub struct HoleSpec {
    pub s_lo: f64,
    pub s_hi: f64,
    pub row_lo: usize,
    pub row_hi: usize,
    pub tag_lo: String,
    pub tag_hi: String,
    pub side_tag: String,
}

#[derive(Debug, Clone)]
pub struct StripSpec {
    pub axis: Axis,
    /// Sign of the motion along the axis; virtual rows are placed on the
    /// trailing side of the physical window (above for −1, below for +1).
    pub sign: f64,
    pub a0: f64,
    pub h_row: f64,
    /// Number of physical node rows.
    pub n_physical: usize,
    pub n_virtual: usize,
    /// Transverse coordinates of the strip columns, ascending.
    pub strip_cols: Vec<f64>,
    pub low_static: Option<StaticSide>,
    pub high_static: Option<StaticSide>,
    pub hole: Option<HoleSpec>,
    /// Tags for the static block edges at the lowest and highest rows.
    pub end_tags: [String; 2],
    /// Relative jitter applied to interior static nodes.
    pub jitter: f64,
    pub seed: u64,
}

struct Builder {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
    edges: Vec<BoundaryEdge>,
}

impl Builder {
    fn node(&mut self, s: f64, a: f64) -> usize {
        self.nodes.push([s, a]);
        self.nodes.len() - 1
    }
    fn tri(&mut self, a: usize, b: usize, c: usize, region: u32) {
        self.triangles.push(Triangle { nodes: [a, b, c], region });
    }
    /// Quad (p00, p10, p11, p01) counter-clockwise in (s, a).
    fn quad(&mut self, p00: usize, p10: usize, p11: usize, p01: usize, region: u32) {
        self.tri(p00, p10, p11, region);
        self.tri(p00, p11, p01, region);
    }
}

pub fn build_strip_mesh(spec: &StripSpec) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = Builder { nodes: Vec::new(), triangles: Vec::new(), edges: Vec::new() };
    let p = spec.n_physical;
    let h = spec.h_row;
    let row_a = |j: usize| spec.a0 + j as f64 * h;

    // Static blocks: node grid [row][col] with col 0 at the seam.
    let mut static_seams: Vec<(bool, Vec<usize>)> = Vec::new();
    for (low, side) in [(true, &spec.low_static), (false, &spec.high_static)] {
        let Some(side) = side else { continue };
        let nc = side.cols.len();
        let mut ids = vec![vec![0usize; nc]; p];
        for j in 0..p {
            for c in 0..nc {
                let mut s = side.cols[c];
                let mut a = row_a(j);
                let interior = c > 0 && c + 1 < nc && j > 0 && j + 1 < p;
                if interior && spec.jitter > 0.0 {
                    let ds = (side.cols[c] - side.cols[c - 1]).abs().min((side.cols[c + 1] - side.cols[c]).abs());
                    let lim = spec.jitter * ds.min(h);
                    s += rng.gen_range(-lim..=lim);
                    a += rng.gen_range(-lim..=lim);
                }
                ids[j][c] = b.node(s, a);
            }
        }
        for j in 0..p - 1 {
            for c in 0..nc - 1 {
                // Ascending-s order of the two columns.
                let (l, r) = if low { (c + 1, c) } else { (c, c + 1) };
                if (j + c) % 2 == 0 {
                    b.quad(ids[j][l], ids[j][r], ids[j + 1][r], ids[j + 1][l], REGION_STATIC);
                } else {
                    let (p00, p10, p11, p01) = (ids[j][l], ids[j][r], ids[j + 1][r], ids[j + 1][l]);
                    b.tri(p00, p10, p01, REGION_STATIC);
                    b.tri(p10, p11, p01, REGION_STATIC);
                }
            }
            b.edges.push(if low {
                edge(ids[j + 1][nc - 1], ids[j][nc - 1], &side.outer_tag)
            } else {
                edge(ids[j][nc - 1], ids[j + 1][nc - 1], &side.outer_tag)
            });
        }
        for c in 0..nc - 1 {
            b.edges.push(edge(ids[0][c], ids[0][c + 1], &spec.end_tags[0]));
            b.edges.push(edge(ids[p - 1][c], ids[p - 1][c + 1], &spec.end_tags[1]));
        }
        static_seams.push((low, (0..p).map(|j| ids[j][0]).collect()));
    }

    // Strip rows in file order: virtual rows go on the trailing side.
    let nv = spec.n_virtual;
    let m = p + nv;
    let first_physical = if spec.sign > 0.0 { nv } else { 0 };
    let ring_a = |k: usize| spec.a0 + (k as f64 - first_physical as f64) * h;
    let hole_rows = spec.hole.as_ref().map(|ho| (first_physical + ho.row_lo, first_physical + ho.row_hi));
    let in_hole_gap = |k: usize, s: f64| match (&spec.hole, hole_rows) {
        (Some(ho), Some((lo, hi))) => k > lo && k < hi && s > ho.s_lo + 1e-12 && s < ho.s_hi - 1e-12,
        _ => false,
    };
    let cols = &spec.strip_cols;
    let mut row_ids: Vec<Vec<Option<usize>>> = Vec::with_capacity(m);
    for k in 0..m {
        let mut ids = Vec::with_capacity(cols.len());
        for &s in cols {
            ids.push(if in_hole_gap(k, s) { None } else { Some(b.node(s, ring_a(k))) });
        }
        row_ids.push(ids);
    }
    let is_physical = |k: usize| k >= first_physical && k < first_physical + p;
    for k in 0..m {
        let k1 = (k + 1) % m;
        let region = if is_physical(k) && is_physical(k1) && k1 != first_physical {
            REGION_MOVING
        } else {
            REGION_VIRTUAL
        };
        for i in 0..cols.len() - 1 {
            if let (Some(ho), Some((lo, hi))) = (&spec.hole, hole_rows) {
                if k >= lo && k < hi && cols[i] >= ho.s_lo - 1e-12 && cols[i + 1] <= ho.s_hi + 1e-12 {
                    continue;
                }
            }
            let ids = (row_ids[k][i], row_ids[k][i + 1], row_ids[k1][i + 1], row_ids[k1][i]);
            let (Some(p00), Some(p10), Some(p11), Some(p01)) = ids else {
                panic!("strip cell ({k}, {i}) touches a missing node");
            };
            if (k + i) % 2 == 0 {
                b.quad(p00, p10, p11, p01, region);
            } else {
                b.tri(p00, p10, p01, region);
                b.tri(p10, p11, p01, region);
            }
        }
    }
    if let (Some(ho), Some((lo, hi))) = (&spec.hole, hole_rows) {
        let inside: Vec<usize> = (0..cols.len())
            .filter(|&i| cols[i] >= ho.s_lo - 1e-12 && cols[i] <= ho.s_hi + 1e-12)
            .collect();
        let (i_lo, i_hi) = (inside[0], *inside.last().unwrap());
        for w in inside.windows(2) {
            // The hole lies above row lo and below row hi in (s, a).
            b.edges.push(edge(row_ids[lo][w[1]].unwrap(), row_ids[lo][w[0]].unwrap(), &ho.tag_lo));
            b.edges.push(edge(row_ids[hi][w[0]].unwrap(), row_ids[hi][w[1]].unwrap(), &ho.tag_hi));
        }
        for k in lo..hi {
            b.edges.push(edge(row_ids[k][i_lo].unwrap(), row_ids[k + 1][i_lo].unwrap(), &ho.side_tag));
            b.edges.push(edge(row_ids[k + 1][i_hi].unwrap(), row_ids[k][i_hi].unwrap(), &ho.side_tag));
        }
    }

    // Update layers connect static seam node j with strip rows j and j + 1.
    for (low, seam) in &static_seams {
        let col = if *low { 0 } else { cols.len() - 1 };
        for j in 0..p - 1 {
            let (s0, s1) = (seam[j], seam[j + 1]);
            let m0 = row_ids[first_physical + j][col].unwrap();
            let m1 = row_ids[first_physical + j + 1][col].unwrap();
            if *low {
                b.tri(s0, m0, s1, REGION_UPDATE);
                b.tri(s1, m0, m1, REGION_UPDATE);
            } else {
                b.tri(s0, s1, m0, REGION_UPDATE);
                b.tri(s1, m1, m0, REGION_UPDATE);
            }
        }
    }

    let rows: Vec<StripRow> = (0..m)
        .map(|k| StripRow {
            nodes: row_ids[k].iter().flatten().copied().collect(),
            is_virtual: !is_physical(k),
        })
        .collect();

    // Map local (s, a) to (x, y). Swapping the axes mirrors the plane, so the
    // vertex order is reversed to keep counter-clockwise orientation.
    let nodes: Vec<Point> = match spec.axis {
        Axis::Y => b.nodes,
        Axis::X => b.nodes.iter().map(|&[s, a]| [a, s]).collect(),
    };
    let mut triangles = b.triangles;
    if spec.axis == Axis::X {
        for t in &mut triangles {
            t.nodes.swap(1, 2);
        }
    }
    let mut region_roles = BTreeMap::from([(REGION_MOVING, RegionRole::Moving), (REGION_VIRTUAL, RegionRole::Virtual)]);
    if !static_seams.is_empty() {
        region_roles.insert(REGION_STATIC, RegionRole::Static);
        region_roles.insert(REGION_UPDATE, RegionRole::UpdateLayer);
    }
    Mesh {
        nodes,
        triangles,
        boundary_edges: b.edges,
        region_roles,
        strip: Some(StripLayout { h_row: h, rows }),
    }
}

/// Unit square with a vertical strip 0.3 < x < 0.7 that moves in −y. Rows are
/// h/2 apart; interior static nodes are jittered with the given seed.
pub fn meshupdate_mesh(h: f64, seed: u64) -> Mesh {
    let h_row = h / 2.0;
    let n_rows = (1.0 / h_row).round() as usize + 1;
    let w = h / 4.0;
    let static_cols = |from: f64, to: f64| {
        let n = ((from - to).abs() / h).ceil().max(1.0) as usize;
        (0..=n).map(|i| from + (to - from) * i as f64 / n as f64).collect::<Vec<_>>()
    };
    build_strip_mesh(&StripSpec {
        axis: Axis::Y,
        sign: -1.0,
        a0: 0.0,
        h_row,
        n_physical: n_rows,
        n_virtual: 2,
        strip_cols: uniform(0.3 + w, 0.7 - w, h_row),
        low_static: Some(StaticSide { cols: static_cols(0.3, 0.0), outer_tag: "left".into(), layer_width: w }),
        high_static: Some(StaticSide { cols: static_cols(0.7, 1.0), outer_tag: "right".into(), layer_width: w }),
        hole: None,
        end_tags: ["bottom".into(), "top".into()],
        jitter: 0.2,
        seed,
    })
}

/// Planar probe geometry: a rectangular hole of half-width `r` with its tip
/// at y = 0, inside a strip moving in −y.
#[derive(Debug, Clone)]
pub struct ProbeSpec {
    pub r: f64,
    pub y_bottom: f64,
    pub y_top: f64,
    pub h_row: f64,
    /// Half-width of the static seam.
    pub seam: f64,
    pub layer_width: f64,
    pub half_width: f64,
    /// Column spacing inside the strip.
    pub dx: f64,
    /// Spacing of the outermost static column.
    pub dx_far: f64,
    pub n_virtual: usize,
}

impl ProbeSpec {
    /// About 10k active nodes, for long equilibrium runs.
    pub fn coarse() -> Self {
        Self {
            r: 0.08,
            y_bottom: -1.0,
            y_top: 0.2,
            h_row: 0.005,
            seam: 0.16,
            layer_width: 0.005,
            half_width: 0.4,
            dx: 0.01,
            dx_far: 0.08,
            n_virtual: 2,
        }
    }

    /// Finer rows near the tip, for the start-up transient.
    pub fn ramp() -> Self {
        Self {
            r: 0.08,
            y_bottom: -0.25,
            y_top: 0.05,
            h_row: 0.001,
            seam: 0.1,
            layer_width: 0.002,
            half_width: 0.3,
            dx: 0.004,
            dx_far: 0.06,
            n_virtual: 2,
        }
    }
}

pub fn probe_mesh(spec: &ProbeSpec) -> Mesh {
    let n_cells = ((spec.y_top - spec.y_bottom) / spec.h_row).round() as usize;
    let tip_row = ((0.0 - spec.y_bottom) / spec.h_row).round() as usize;
    let edge_s = spec.seam - spec.layer_width;
    let strip_cols = join(&[
        uniform(-edge_s, -spec.r, spec.dx),
        uniform(-spec.r, spec.r, spec.dx),
        uniform(spec.r, edge_s, spec.dx),
    ]);
    let outward = graded(spec.seam, spec.half_width, spec.dx, spec.dx_far);
    let inward: Vec<f64> = outward.iter().map(|v| -v).collect();
    build_strip_mesh(&StripSpec {
        axis: Axis::Y,
        sign: -1.0,
        a0: spec.y_bottom,
        h_row: spec.h_row,
        n_physical: n_cells + 1,
        n_virtual: spec.n_virtual,
        strip_cols,
        low_static: Some(StaticSide { cols: inward, outer_tag: "outer".into(), layer_width: spec.layer_width }),
        high_static: Some(StaticSide { cols: outward, outer_tag: "outer".into(), layer_width: spec.layer_width }),
        hole: Some(HoleSpec {
            s_lo: -spec.r,
            s_hi: spec.r,
            row_lo: tip_row,
            row_hi: n_cells,
            tag_lo: "tip".into(),
            tag_hi: "side".into(),
            side_tag: "side".into(),
        }),
        end_tags: ["outer".into(), "top".into()],
        jitter: 0.0,
        seed: 0,
    })
}

/// Wax block 0.2 m × 0.1 m with a rectangular rod in a strip y < 0.07 that
/// moves in +x. The rod's leading face (x = 0.07) is tagged `tip`, the other
/// faces `side`.
pub fn hotwire_mesh() -> Mesh {
    let h_row: f64 = 0.001;
    let seam = 0.07;
    let w = 0.001;
    let (rod_lo, rod_hi) = (0.027, 0.043);
    let fine = 0.001;
    let strip_cols = join(&[
        graded(0.0, rod_lo - 0.005, 0.003, 0.001),
        uniform(rod_lo - 0.005, rod_lo, fine),
        uniform(rod_lo, rod_hi, fine),
        uniform(rod_hi, rod_hi + 0.005, fine),
        graded(rod_hi + 0.005, seam - w, 0.001, 0.002),
    ]);
    let static_cols = graded(seam, 0.1, 0.002, 0.008);
    let n_cells = (0.2 / h_row).round() as usize;
    build_strip_mesh(&StripSpec {
        axis: Axis::X,
        sign: 1.0,
        a0: 0.0,
        h_row,
        n_physical: n_cells + 1,
        n_virtual: 2,
        strip_cols,
        low_static: None,
        high_static: Some(StaticSide { cols: static_cols, outer_tag: "outer".into(), layer_width: w }),
        hole: Some(HoleSpec {
            s_lo: rod_lo,
            s_hi: rod_hi,
            row_lo: (0.01 / h_row).round() as usize,
            row_hi: (0.07 / h_row).round() as usize,
            tag_lo: "side".into(),
            tag_hi: "tip".into(),
            side_tag: "side".into(),
        }),
        end_tags: ["outer".into(), "outer".into()],
        jitter: 0.0,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_mesh;

    #[test]
    fn unit_square_is_valid() {
        let m = unit_square(3);
        assert_eq!(m.n_nodes(), 16);
        assert_eq!(m.n_triangles(), 18);
        assert!(validate_mesh(&m).is_empty());
    }

    #[test]
    fn graded_points_hit_ends() {
        let g = graded(0.0, 1.0, 0.1, 0.3);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let u = uniform(0.3, 0.7, 0.1);
        assert_eq!(u.len(), 5);
    }

    #[test]
    fn meshupdate_meshes_are_valid() {
        for h in [0.2, 0.1] {
            let m = meshupdate_mesh(h, 7);
            let d = validate_mesh(&m);
            assert!(d.is_empty(), "{d:?}");
        }
    }
}
