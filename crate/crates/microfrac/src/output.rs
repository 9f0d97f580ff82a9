//! Result output: load-displacement CSV series, legacy-VTK field
//! snapshots, and section sampling helpers.

use crate::assembly::State;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::solver::StepRecord;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub const LODI_HEADER: &str = "step,displacement_mm,load_kN,iterations,residual_ratio";

/// Incremental CSV writer; each accepted step is flushed immediately so a
/// failed run leaves the partial series on disk.
pub struct LodiWriter {
    out: BufWriter<File>,
}

impl LodiWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{LODI_HEADER}")?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn append(&mut self, r: &StepRecord) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{}",
            r.step,
            r.displacement,
            r.reaction / 1000.0,
            r.iterations,
            r.residual_ratio
        )?;
        self.out.flush()?;
        Ok(())
    }
}

/// Write the whole series at once.
pub fn write_lodi_csv(records: &[StepRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config("refusing to write an empty load-displacement series".into()));
    }
    let mut w = LodiWriter::create(path)?;
    for r in records {
        w.append(r)?;
    }
    Ok(())
}

/// ASCII legacy-VTK unstructured-grid snapshot: displacement and
/// micromorphic fields on points, phase-field and driving energy on cells.
pub fn write_field_snapshot(mesh: &Mesh, state: &State, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let n = mesh.num_nodes();
    let m = mesh.num_elements();
    writeln!(out, "# vtk DataFile Version 2.0")?;
    writeln!(out, "microfrac step {}", state.time_step)?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n} float")?;
    for node in mesh.nodes() {
        writeln!(out, "{} {} 0", node[0], node[1])?;
    }
    writeln!(out, "CELLS {m} {}", 4 * m)?;
    for e in mesh.elements() {
        writeln!(out, "3 {} {} {}", e[0], e[1], e[2])?;
    }
    writeln!(out, "CELL_TYPES {m}")?;
    for _ in 0..m {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {n}")?;
    writeln!(out, "VECTORS displacement float")?;
    for i in 0..n {
        writeln!(out, "{} {} 0", state.u[2 * i], state.u[2 * i + 1])?;
    }
    writeln!(out, "SCALARS micromorphic float 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for i in 0..n {
        writeln!(out, "{}", state.d[i])?;
    }
    writeln!(out, "CELL_DATA {m}")?;
    writeln!(out, "SCALARS phase_field float 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for e in 0..m {
        writeln!(out, "{}", state.phi_old[e])?;
    }
    writeln!(out, "SCALARS driving_energy float 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for e in 0..m {
        writeln!(out, "{}", state.psi[e])?;
    }
    out.flush()?;
    Ok(())
}

/// Sample the committed phase-field and the interpolated micromorphic field
/// at element centroids near the vertical section x = x0, sorted by height.
/// Returns (y, phi, d) triples.
pub fn section_profile(
    mesh: &Mesh,
    state: &State,
    x0: f64,
    half_width: f64,
) -> Vec<(f64, f64, f64)> {
    let mut rows: Vec<(f64, f64, f64)> = (0..mesh.num_elements())
        .filter_map(|e| {
            let c = mesh.element_centroid(e);
            if (c[0] - x0).abs() > half_width {
                return None;
            }
            let conn = mesh.element(e);
            let d = (state.d[conn[0]] + state.d[conn[1]] + state.d[conn[2]]) / 3.0;
            Some((c[1], state.phi_old[e], d))
        })
        .collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_sent_mesh;
    use crate::solver::StepRecord;

    fn record(step: usize) -> StepRecord {
        StepRecord {
            step,
            displacement: step as f64 * 1e-4,
            reaction: 250.0 * step as f64,
            iterations: 3,
            residual_ratio: 1e-4,
        }
    }

    #[test]
    fn lodi_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lodi.csv");
        write_lodi_csv(&[record(1), record(2)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), LODI_HEADER);
        let first = lines.next().unwrap();
        assert!(first.starts_with("1,0.0001,0.25,3,"), "{first}");
    }

    #[test]
    fn empty_series_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_lodi_csv(&[], &dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn snapshot_counts_match_mesh() {
        let mesh = generate_sent_mesh(0.25).unwrap();
        let state = State::new(&mesh);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.vtk");
        write_field_snapshot(&mesh, &state, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains(&format!("POINTS {} float", mesh.num_nodes())));
        assert!(text.contains(&format!("CELLS {} {}", mesh.num_elements(), 4 * mesh.num_elements())));
        assert!(text.contains(&format!("POINT_DATA {}", mesh.num_nodes())));
        assert!(text.contains(&format!("CELL_DATA {}", mesh.num_elements())));
        // Zero state: all phase-field values are exactly zero.
        let after = text.split("SCALARS phase_field float 1").nth(1).unwrap();
        let zeros = after
            .lines()
            .skip(1)
            .take(mesh.num_elements())
            .all(|l| l.trim() == "0");
        assert!(zeros);
    }

    #[test]
    fn section_sampling_sorted_and_near_section() {
        let mesh = generate_sent_mesh(0.2).unwrap();
        let state = State::new(&mesh);
        let rows = section_profile(&mesh, &state, 0.75, 0.1);
        assert!(!rows.is_empty());
        for w in rows.windows(2) {
            assert!(w[0].0 <= w[1].0);
        }
    }
}
