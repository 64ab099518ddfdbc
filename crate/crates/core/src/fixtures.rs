//! Fixture meshes and run configurations shipped under `fixtures/`.
//!
//! The files are generated by the `ccmsim-fixtures` binary; a test checks
//! that the checked-in copies match this module byte for byte.

use std::f64::consts::PI;

use crate::mesh::Mesh;
use crate::meshgen::{hotwire_mesh, probe_mesh, ProbeSpec};

/// F_ex (N) that makes the temperature-controlled closure give
/// U = 2.6872e-4 m/s for the ice constants and T_w = 353 K. Obtained with
/// `ccm::calibrate_f_ex`; not a measured value.
pub const PROBE_F_EX_CALIBRATED: f64 = 18.125631345963537;
pub const PROBE_R: f64 = 0.08;
/// Sensors at 1, 3 and 5 cm from the probe wall, 8 cm below the initial tip.
pub const PROBE_SENSORS: &str = "0.09 -0.08; 0.11 -0.08; 0.13 -0.08";

pub fn probe_tip_area() -> f64 {
    PI * PROBE_R * PROBE_R
}

pub fn meshes() -> Vec<(&'static str, Mesh)> {
    vec![
        ("probe_coarse.mesh", probe_mesh(&ProbeSpec::coarse())),
        ("probe_ramp.mesh", probe_mesh(&ProbeSpec::ramp())),
        ("hotwire.mesh", hotwire_mesh()),
    ]
}

fn ice(source: &str, time: &str, mesh: &str, output: &str) -> String {
    format!(
        "\
[material]
rho_s = 921.3
cp_s = 1877.2
kappa_s = 2.5428
T_s = 210.0
rho_l = 1000.0
cp_l = 4200.0
kappa_l = 0.6
mu_l = 0.0013

[melting]
h_m = 333700.0
T_m = 273.0

[source]
{source}
R = {PROBE_R:?}
tip_area = {:?}
tip = tip
dirichlet = tip

[time]
{time}

[mesh]
path = fixtures/meshes/{mesh}
direction = -y
entering = far_field

[numerics]
solver_tol = 1e-10
flux_averaging = node_mean

[output]
{output}
",
        probe_tip_area()
    )
}

fn power_q_h(watts: f64) -> f64 {
    watts / probe_tip_area()
}

pub fn configs() -> Vec<(&'static str, String)> {
    let calibrated = format!("F_ex = {PROBE_F_EX_CALIBRATED:?}");
    vec![
        (
            "probe_equilibrium.ini",
            ice(
                &format!("mode = temperature\ncoupling = equilibrium\nT_w = 353.0\n{calibrated}"),
                "dt = 15.0\nn_steps = 200",
                "probe_coarse.mesh",
                &format!("directory = out/probe_equilibrium\nvtk_every = 20\ncsv = run.csv\nsensors = {PROBE_SENSORS}"),
            ),
        ),
        (
            "probe_transient.ini",
            ice(
                &format!("mode = temperature\ncoupling = transient\nT_w = 353.0\n{calibrated}"),
                "dt = 15.0\nn_steps = 200",
                "probe_coarse.mesh",
                &format!("directory = out/probe_transient\nvtk_every = 20\ncsv = run.csv\nsensors = {PROBE_SENSORS}"),
            ),
        ),
        (
            "ramp_1kw.ini",
            ice(
                &format!("mode = power\ncoupling = transient\nq_h = {:?}\nmass = 25.0\ngravity = 3.7", power_q_h(1000.0)),
                "dt = 2.0\nn_steps = 180",
                "probe_ramp.mesh",
                "directory = out/ramp_1kw\nvtk_every = 30\ncsv = run.csv",
            ),
        ),
        (
            "ramp_3kw.ini",
            ice(
                &format!("mode = power\ncoupling = transient\nq_h = {:?}\nmass = 25.0\ngravity = 3.7", power_q_h(3000.0)),
                "dt = 2.0\nn_steps = 180",
                "probe_ramp.mesh",
                "directory = out/ramp_3kw\nvtk_every = 30\ncsv = run.csv",
            ),
        ),
        (
            "probe_sensors.ini",
            ice(
                &format!("mode = power\ncoupling = equilibrium\nq_h = {:?}\nmass = 25.0\ngravity = 3.7", power_q_h(1000.0)),
                "dt = 15.0\nn_steps = 200",
                "probe_coarse.mesh",
                &format!("directory = out/probe_sensors\nvtk_every = 20\ncsv = run.csv\nsensors = {PROBE_SENSORS}"),
            ),
        ),
        ("hotwire.ini", HOTWIRE.to_string()),
    ]
}

/// Wax block cut by a heated rod pushed in +x. The closure uses half the
/// 1.6 cm leading face as R; T_m is held on every rod edge.
const HOTWIRE: &str = "\
[material]
rho_s = 775.0
cp_s = 2674.0
kappa_s = 0.13
T_s = 298.8
rho_l = 775.0
cp_l = 2674.0
kappa_l = 0.13
mu_l = 0.00279

[melting]
h_m = 221000.0
T_m = 325.0

[source]
mode = temperature
coupling = transient
T_w = 335.34
F_ex = 60.0
R = 0.008
tip_area = 0.016
tip = tip
dirichlet = tip, side

[time]
dt = 2.0
n_steps = 180

[mesh]
path = fixtures/meshes/hotwire.mesh
direction = +x
entering = far_field

[numerics]
solver_tol = 1e-10
flux_averaging = node_mean

[output]
directory = out/hotwire
vtk_every = 30
csv = run.csv
";
