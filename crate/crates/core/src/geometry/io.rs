//! Plain-text voxel grid files.
//!
//! ```text
//! voxelgrid 1
//! # comment lines start with '#'
//! dims 34 34 34
//! spacing_m 1.25e-8
//! origin_m 0 0 0
//! declared_mass_kg 1.5e-11      (optional)
//! data
//! <nx·ny·nz densities in kg/m³, whitespace separated, x slowest, z fastest>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::VoxelGrid;
use crate::error::{Error, Result};

const MAGIC: &str = "voxelgrid 1";

pub fn parse_voxel_grid(text: &str) -> Result<VoxelGrid> {
    let bad = |msg: String| Error::GridFormat(msg);
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some(MAGIC) {
        return Err(bad(format!("first line must be `{MAGIC}`")));
    }
    let mut dims = None;
    let mut spacing = None;
    let mut origin = None;
    let mut declared = None;
    for line in lines.by_ref() {
        let mut words = line.split_whitespace();
        let key = words.next().unwrap_or_default();
        let values: Vec<&str> = words.collect();
        let floats = |n: usize| -> Result<Vec<f64>> {
            if values.len() != n {
                return Err(bad(format!("`{key}` expects {n} value(s)")));
            }
            values
                .iter()
                .map(|v| v.parse::<f64>().map_err(|e| bad(format!("`{key}`: {e}"))))
                .collect()
        };
        match key {
            "dims" => {
                if values.len() != 3 {
                    return Err(bad("`dims` expects 3 values".into()));
                }
                let d: Vec<usize> = values
                    .iter()
                    .map(|v| v.parse::<usize>().map_err(|e| bad(format!("`dims`: {e}"))))
                    .collect::<Result<_>>()?;
                dims = Some([d[0], d[1], d[2]]);
            }
            "spacing_m" => spacing = Some(floats(1)?[0]),
            "origin_m" => {
                let o = floats(3)?;
                origin = Some([o[0], o[1], o[2]]);
            }
            "declared_mass_kg" => declared = Some(floats(1)?[0]),
            "data" => break,
            other => return Err(bad(format!("unknown header key `{other}`"))),
        }
    }
    let dims = dims.ok_or_else(|| bad("missing `dims`".into()))?;
    let spacing = spacing.ok_or_else(|| bad("missing `spacing_m`".into()))?;
    let origin = origin.unwrap_or([0.0; 3]);
    let densities: Vec<f64> = lines
        .flat_map(str::split_whitespace)
        .map(|v| v.parse::<f64>().map_err(|e| bad(format!("density `{v}`: {e}"))))
        .collect::<Result<_>>()?;
    VoxelGrid::new(dims, spacing, origin, densities, declared)
}

pub fn format_voxel_grid(grid: &VoxelGrid) -> String {
    let [nx, ny, nz] = grid.dims();
    let o = grid.origin();
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "dims {nx} {ny} {nz}");
    let _ = writeln!(s, "spacing_m {:e}", grid.spacing());
    let _ = writeln!(s, "origin_m {:e} {:e} {:e}", o[0], o[1], o[2]);
    if let Some(m) = grid.declared_mass() {
        let _ = writeln!(s, "declared_mass_kg {m:e}");
    }
    let _ = writeln!(s, "data");
    for row in grid.densities().chunks(nz) {
        let line: Vec<String> = row.iter().map(|d| format!("{d:e}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn read_voxel_grid(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    parse_voxel_grid(&std::fs::read_to_string(path)?)
}

pub fn write_voxel_grid(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_voxel_grid(grid))?;
    Ok(())
}
