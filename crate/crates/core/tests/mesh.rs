use std::collections::BTreeSet;

use ccmsim::mesh::{
    interpolate, load_mesh, locate_point, parse_mesh, validate_mesh, write_mesh, DiagnosticKind, Mesh, MeshError,
    Point, PointLocator, RegionRole,
};
use ccmsim::meshgen::{meshupdate_mesh, probe_mesh, unit_square, ProbeSpec};
use ccmsim::motion::init_motion;
use proptest::prelude::*;

const TWO_TRIANGLES: &str = "\
CCMMESH 1
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

/// Containment by edge cross products, written independently of the library.
fn inside(m: &Mesh, t: usize, p: Point) -> bool {
    let n = m.triangles[t].nodes;
    (0..3).all(|k| {
        let a = m.nodes[n[k]];
        let b = m.nodes[n[(k + 1) % 3]];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        cross >= -1e-12
    })
}

fn area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[test]
fn two_triangle_file_loads() {
    let m = parse_mesh(TWO_TRIANGLES).unwrap();
    assert_eq!((m.n_nodes(), m.n_triangles()), (4, 2));
    assert!(validate_mesh(&m).is_empty());
    let tags: BTreeSet<&str> = m.boundary_edges.iter().map(|e| e.tag.as_str()).collect();
    assert_eq!(tags, BTreeSet::from(["bottom", "left", "right", "top"]));
}

#[test]
fn clockwise_triangle_names_its_index() {
    let bad = TWO_TRIANGLES.replace("1 0 2 3 0", "1 0 3 2 0");
    match parse_mesh(&bad) {
        Err(e @ MeshError::Orientation(1, _)) => assert!(e.to_string().contains("triangle 1")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn probe_mesh_has_all_four_roles() {
    let m = probe_mesh(&ProbeSpec::coarse());
    assert!(validate_mesh(&m).is_empty());
    let roles: BTreeSet<RegionRole> = m.region_roles.values().copied().collect();
    assert_eq!(
        roles,
        BTreeSet::from([RegionRole::Static, RegionRole::Moving, RegionRole::UpdateLayer, RegionRole::Virtual])
    );
    for role in roles {
        assert!(!m.triangles_with_role(role).is_empty(), "{role:?}");
    }
    assert!(m.has_tag("tip") && m.has_tag("side"));
}

#[test]
fn uneven_row_spacing_is_diagnosed() {
    let mut m = meshupdate_mesh(0.25, 1);
    let strip = m.strip.clone().unwrap();
    let row = &strip.rows[strip.rows.len() / 2];
    for &n in &row.nodes {
        m.nodes[n][1] += 0.3 * strip.h_row;
    }
    let diags = validate_mesh(&m);
    assert!(diags.iter().any(|d| d.kind == DiagnosticKind::RowHeight), "{diags:?}");
}

#[test]
fn seam_misalignment_is_diagnosed() {
    let mut m = meshupdate_mesh(0.25, 1);
    let strip = m.strip.clone().unwrap();
    let in_strip: BTreeSet<usize> = strip.rows.iter().flat_map(|r| r.nodes.iter().copied()).collect();
    // Static node in the update layer next to an interior row.
    let layer = m.triangles_with_role(RegionRole::UpdateLayer);
    let target = layer
        .iter()
        .flat_map(|&t| m.triangles[t].nodes)
        .find(|n| !in_strip.contains(n) && m.nodes[*n][1] > 0.2 && m.nodes[*n][1] < 0.8)
        .unwrap();
    m.nodes[target][1] += 0.01 * strip.h_row;
    let diags = validate_mesh(&m);
    assert!(diags.iter().any(|d| d.kind == DiagnosticKind::SeamConformity), "{diags:?}");
}

#[test]
fn file_round_trip() {
    let m = probe_mesh(&ProbeSpec::ramp());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ramp.mesh");
    write_mesh(&m, &path).unwrap();
    assert_eq!(load_mesh(&path).unwrap(), m);
}

#[test]
fn footprint_points_are_gaps() {
    let mut m = probe_mesh(&ProbeSpec::coarse());
    let st = init_motion(&mut m, [0.0, -1.0]).unwrap();
    let loc = PointLocator::new(&m, &st.active_elements);
    assert!(loc.locate(&m, [0.0, 0.05]).is_none());
    assert!(loc.locate(&m, [0.5, 0.0]).is_none());
    assert!(loc.locate(&m, [f64::NAN, 0.0]).is_none());
    let (t, l) = loc.locate(&m, [0.09, -0.08]).unwrap();
    assert!(inside(&m, t, [0.09, -0.08]));
    assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-14);
}

fn jittered_square(n: usize, jitter: &[f64]) -> Mesh {
    let mut m = unit_square(n);
    let h = 1.0 / n as f64;
    for (k, p) in m.nodes.iter_mut().enumerate() {
        let (i, j) = (k % (n + 1), k / (n + 1));
        if i > 0 && i < n && j > 0 && j < n {
            p[0] += 0.3 * h * jitter[(2 * k) % jitter.len()];
            p[1] += 0.3 * h * jitter[(2 * k + 1) % jitter.len()];
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_preserves_everything(n in 1usize..6, jitter in prop::collection::vec(-1.0f64..1.0, 8)) {
        let m = jittered_square(n, &jitter);
        prop_assert_eq!(parse_mesh(&m.to_string()).unwrap(), m);
    }

    #[test]
    fn location_matches_brute_force(px in -0.1f64..1.1, py in -0.1f64..1.1, jitter in prop::collection::vec(-1.0f64..1.0, 8)) {
        let m = jittered_square(5, &jitter);
        let all: Vec<usize> = (0..m.n_triangles()).collect();
        let p = [px, py];
        let oracle: Vec<usize> = all.iter().copied().filter(|&t| inside(&m, t, p)).collect();
        let scan = locate_point(&m, &all, p);
        let grid = PointLocator::new(&m, &all).locate(&m, p);
        prop_assert_eq!(scan.is_some(), !oracle.is_empty());
        prop_assert_eq!(grid.is_some(), !oracle.is_empty());
        for (t, l) in scan.into_iter().chain(grid) {
            prop_assert!(oracle.contains(&t));
            // Barycentrics as sub-triangle area ratios.
            let n = m.triangles[t].nodes;
            let (a, b, c) = (m.nodes[n[0]], m.nodes[n[1]], m.nodes[n[2]]);
            let whole = area(a, b, c);
            let want = [area(p, b, c) / whole, area(a, p, c) / whole, area(a, b, p) / whole];
            for k in 0..3 {
                prop_assert!((l[k] - want[k]).abs() < 1e-9, "{:?} vs {:?}", l, want);
            }
        }
    }

    #[test]
    fn linear_fields_interpolate_exactly(px in 0.0f64..1.0, py in 0.0f64..1.0, c in prop::array::uniform3(-10.0f64..10.0)) {
        let m = jittered_square(4, &[0.3, -0.7, 0.5, 0.1]);
        let all: Vec<usize> = (0..m.n_triangles()).collect();
        let field: Vec<f64> = m.nodes.iter().map(|q| c[0] + c[1] * q[0] + c[2] * q[1]).collect();
        let (t, l) = locate_point(&m, &all, [px, py]).unwrap();
        let want = c[0] + c[1] * px + c[2] * py;
        prop_assert!((interpolate(&m, &field, t, l) - want).abs() < 1e-10);
    }
}
