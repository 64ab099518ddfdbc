//! Run outputs: per-step CSV rows, sensor traces and legacy VTK snapshots.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::mesh::{interpolate, Mesh, Point, PointLocator};

pub const RUN_CSV_HEADER: &str = "time,velocity,displacement,flux_avg,slip_count";
pub const FLUX_CSV_HEADER: &str = "time,flux_min,flux_max,flux_avg";

/// `{:.16e}` keeps 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn run_csv_row(time: f64, velocity: f64, displacement: f64, flux_avg: f64, slip_count: usize) -> String {
    format!(
        "{},{},{},{},{}",
        fmt_f64(time),
        fmt_f64(velocity),
        fmt_f64(displacement),
        fmt_f64(flux_avg),
        slip_count
    )
}

pub fn sensor_csv_header(n: usize) -> String {
    let mut s = String::from("time");
    for i in 0..n {
        s.push_str(&format!(",sensor_{i}"));
    }
    s
}

pub fn sensor_csv_row(time: f64, values: &[Option<f64>]) -> String {
    let mut s = fmt_f64(time);
    for v in values {
        s.push(',');
        if let Some(v) = v {
            s.push_str(&fmt_f64(*v));
        }
    }
    s
}

/// Line-oriented CSV file with a fixed header.
pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &str) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{header}")?;
        Ok(Self { out })
    }

    pub fn row(&mut self, line: &str) -> io::Result<()> {
        writeln!(self.out, "{line}")
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Temperature at fixed points, interpolated linearly over the active
/// triangles; points outside them (e.g. inside the source) give `None`.
pub fn sample_sensors(mesh: &Mesh, active: &[usize], field: &[f64], sensors: &[Point]) -> Vec<Option<f64>> {
    if sensors.is_empty() {
        return Vec::new();
    }
    let locator = PointLocator::new(mesh, active);
    sensors
        .iter()
        .map(|&p| locator.locate(mesh, p).map(|(t, l)| interpolate(mesh, field, t, l)))
        .collect()
}

/// Legacy ASCII VTK unstructured grid with every triangle, the nodal
/// temperature and a per-cell activity flag.
pub fn write_vtk(path: &Path, mesh: &Mesh, field: &[f64], active: &[usize], title: &str) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let n = mesh.nodes.len();
    let m = mesh.triangles.len();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.replace('\n', " "))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n} double")?;
    for p in &mesh.nodes {
        writeln!(out, "{} {} 0", fmt_f64(p[0]), fmt_f64(p[1]))?;
    }
    writeln!(out, "CELLS {m} {}", 4 * m)?;
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t.nodes[0], t.nodes[1], t.nodes[2])?;
    }
    writeln!(out, "CELL_TYPES {m}")?;
    for _ in 0..m {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {n}")?;
    writeln!(out, "SCALARS temperature double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in field {
        writeln!(out, "{}", fmt_f64(*v))?;
    }
    let mut flag = vec![0u8; m];
    for &t in active {
        flag[t] = 1;
    }
    writeln!(out, "CELL_DATA {m}")?;
    writeln!(out, "SCALARS active int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for f in flag {
        writeln!(out, "{f}")?;
    }
    out.flush()
}

pub fn vtk_name(step: usize) -> String {
    format!("step_{step:06}.vtk")
}
