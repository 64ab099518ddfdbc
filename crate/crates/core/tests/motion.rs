use ccmsim::mesh::{Mesh, RegionRole};
use ccmsim::meshgen::{hotwire_mesh, meshupdate_mesh, probe_mesh, unit_square, ProbeSpec};
use ccmsim::motion::{check_conformity, init_motion, EnteringRule, MotionError, MotionState};
use proptest::prelude::*;

const DOWN: [f64; 2] = [0.0, -1.0];

fn active_area(mesh: &Mesh, st: &MotionState) -> f64 {
    st.active_elements.iter().map(|&t| mesh.triangle_area(t)).sum()
}

fn static_nodes(st: &MotionState) -> Vec<usize> {
    st.geometry
        .row_of_node
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_none())
        .map(|(n, _)| n)
        .collect()
}

#[test]
fn zero_displacement_is_identity() {
    let mut mesh = meshupdate_mesh(0.1, 7);
    let st = init_motion(&mut mesh, DOWN).unwrap();
    let before = mesh.clone();
    let coords = st.displaced_coords(&mesh, 0.0);
    assert_eq!(coords, mesh.nodes);
    let mut st2 = st.clone();
    let out = st2.advance(&mut mesh, 0.0).unwrap();
    assert_eq!(out.slips, 0);
    assert_eq!(mesh.nodes, before.nodes);
    assert_eq!(mesh.triangles, before.triangles);
    assert_eq!(st2.active_elements, st.active_elements);
}

#[test]
fn sub_row_advances_slip_once() {
    // h_row = 0.01
    let mut mesh = meshupdate_mesh(0.02, 3);
    let mut st = init_motion(&mut mesh, DOWN).unwrap();
    assert!((st.h_row() - 0.01).abs() < 1e-15);
    let slips: Vec<usize> = (0..3).map(|_| st.advance(&mut mesh, 0.004).unwrap().slips).collect();
    assert_eq!(slips, vec![0, 0, 1]);
    assert!((st.offset - 0.002).abs() < 1e-12, "offset {}", st.offset);
    assert!((st.total_displacement - 0.012).abs() < 1e-15);
}

#[test]
fn twenty_steps_keep_the_mesh_conforming() {
    let mut mesh = meshupdate_mesh(0.1, 11);
    let mut st = init_motion(&mut mesh, DOWN).unwrap();
    for _ in 0..20 {
        st.advance(&mut mesh, 0.005).unwrap();
        check_conformity(&mesh, &st.active_elements).unwrap();
        assert!((active_area(&mesh, &st) - 1.0).abs() < 1e-12);
    }
    assert!((st.total_displacement - 0.1).abs() < 1e-12);
    let covered = st.slips as f64 * st.h_row() + st.offset;
    assert!((covered - 0.1).abs() < 1e-12);
}

#[test]
fn one_slip_rotates_the_ring_by_one() {
    let mut mesh = meshupdate_mesh(0.25, 1);
    let mut st = init_motion(&mut mesh, DOWN).unwrap();
    let m = st.n_rows();
    let before = st.cyclic_row_order.clone();
    let out = st.advance(&mut mesh, st.h_row()).unwrap();
    assert_eq!(out.slips, 1);
    let after = &st.cyclic_row_order;
    let fwd = (0..m).all(|q| after[q] == before[(q + 1) % m]);
    let back = (0..m).all(|q| after[q] == before[(q + m - 1) % m]);
    assert!(fwd || back, "{before:?} -> {after:?}");
}

#[test]
fn full_cycle_restores_the_ring() {
    let mut mesh = meshupdate_mesh(0.25, 5);
    let mut st = init_motion(&mut mesh, DOWN).unwrap();
    let m = st.n_rows();
    let order = st.cyclic_row_order.clone();
    let tris = mesh.triangles.clone();
    let active = st.active_elements.clone();
    for _ in 0..m {
        assert_eq!(st.advance(&mut mesh, st.h_row()).unwrap().slips, 1);
    }
    assert_eq!(st.cyclic_row_order, order);
    assert_eq!(mesh.triangles, tris);
    assert_eq!(st.active_elements, active);
}

#[test]
fn whole_slips_preserve_update_layer_areas() {
    let mut mesh = meshupdate_mesh(0.1, 9);
    let mut st = init_motion(&mut mesh, DOWN).unwrap();
    let layer = mesh.triangles_with_role(RegionRole::UpdateLayer);
    assert!(!layer.is_empty());
    let areas: Vec<f64> = layer.iter().map(|&t| mesh.triangle_area(t)).collect();
    st.advance(&mut mesh, st.h_row() * 0.4).unwrap();
    st.advance(&mut mesh, st.h_row() * 0.6).unwrap();
    assert_eq!(st.slips, 1);
    for (&t, a) in layer.iter().zip(&areas) {
        assert!((mesh.triangle_area(t) - a).abs() < 1e-12 * a.abs().max(1e-6), "triangle {t}");
    }
}

#[test]
fn static_nodes_are_bit_identical() {
    let mut mesh = meshupdate_mesh(0.1, 2);
    let mut st = init_motion(&mut mesh, DOWN).unwrap();
    let fixed = static_nodes(&st);
    let before: Vec<_> = fixed.iter().map(|&n| mesh.nodes[n]).collect();
    for d in [0.013, 0.05, 0.0, 0.071, 0.2] {
        st.advance(&mut mesh, d).unwrap();
    }
    let after: Vec<_> = fixed.iter().map(|&n| mesh.nodes[n]).collect();
    assert_eq!(before, after);
}

#[test]
fn initial_active_set_excludes_virtual_rows() {
    let mut mesh = probe_mesh(&ProbeSpec::coarse());
    let n_virtual = mesh.triangles_with_role(RegionRole::Virtual).len();
    assert!(n_virtual > 0);
    let st = init_motion(&mut mesh, DOWN).unwrap();
    assert_eq!(st.active_elements.len(), mesh.n_triangles() - n_virtual);
    for &t in &st.active_elements {
        assert_ne!(mesh.role(t), RegionRole::Virtual);
    }
}

#[test]
fn hotwire_accepts_positive_x_only() {
    let mut mesh = hotwire_mesh();
    assert!(init_motion(&mut mesh.clone(), [1.0, 0.0]).is_ok());
    assert!(matches!(init_motion(&mut mesh, DOWN), Err(MotionError::Direction(..))));
}

#[test]
fn bad_inputs_are_rejected() {
    let mut square = unit_square(2);
    assert!(matches!(init_motion(&mut square, DOWN), Err(MotionError::NoStrip)));
    let mut mesh = meshupdate_mesh(0.25, 1);
    let mut st = init_motion(&mut mesh, DOWN).unwrap();
    assert!(matches!(st.advance(&mut mesh, -1e-3), Err(MotionError::Displacement(_))));
    assert!(matches!(st.advance(&mut mesh, f64::NAN), Err(MotionError::Displacement(_))));
}

#[test]
fn entering_rows_are_initialized() {
    for rule in [EnteringRule::FarField, EnteringRule::Copy] {
        let mut mesh = meshupdate_mesh(0.1, 4);
        let mut st = init_motion(&mut mesh, DOWN).unwrap();
        // Field that varies only across the strip, so a copy from the adjacent
        // row reproduces it exactly.
        let mut field: Vec<f64> = mesh.nodes.iter().map(|p| 1.0 + p[0]).collect();
        let out = st.advance(&mut mesh, st.h_row()).unwrap();
        let entered: Vec<usize> = out.entered_nodes().collect();
        assert!(!entered.is_empty());
        for &v in &entered {
            field[v] = f64::NAN;
        }
        st.init_entering(&mesh, &out, &mut field, rule, -5.0);
        for &v in &entered {
            let want = match rule {
                EnteringRule::FarField => -5.0,
                EnteringRule::Copy => 1.0 + mesh.nodes[v][0],
            };
            assert!((field[v] - want).abs() < 1e-12, "{rule:?} node {v}: {}", field[v]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_advances_keep_invariants(fracs in prop::collection::vec(0.0f64..1.7, 1..12), seed in 0u64..100) {
        let mut mesh = meshupdate_mesh(0.2, seed);
        let mut st = init_motion(&mut mesh, DOWN).unwrap();
        let fixed = static_nodes(&st);
        let before: Vec<_> = fixed.iter().map(|&n| mesh.nodes[n]).collect();
        let h = st.h_row();
        let mut total = 0.0;
        for f in fracs {
            let d = f * h;
            total += d;
            st.advance(&mut mesh, d).unwrap();
            check_conformity(&mesh, &st.active_elements).unwrap();
            for &t in &st.active_elements {
                prop_assert!(mesh.triangle_area(t) > 0.0);
            }
            prop_assert!((active_area(&mesh, &st) - 1.0).abs() < 1e-12);
            prop_assert!(st.offset >= 0.0 && st.offset < h);
        }
        prop_assert!((st.slips as f64 * h + st.offset - total).abs() < 1e-12);
        let after: Vec<_> = fixed.iter().map(|&n| mesh.nodes[n]).collect();
        prop_assert_eq!(before, after);
    }
}
