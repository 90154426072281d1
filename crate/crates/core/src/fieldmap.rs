//! Field-map artifacts: a CSV of per-area values always, plus an SVG
//! choropleth when the region is a lattice.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::region::Region;

/// Five-stop viridis ramp, linearly interpolated.
const VIRIDIS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn viridis(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * 4.0;
    let i = (t.floor() as usize).min(3);
    let w = t - i as f64;
    let c: Vec<u8> = (0..3)
        .map(|k| (VIRIDIS[i][k] * (1.0 - w) + VIRIDIS[i + 1][k] * w).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Write `<base>.csv` (`id,x,y,value`) and, for lattice regions,
/// `<base>.svg`. Returns the written paths.
pub fn export_field_map(
    region: &Region,
    values: &[f64],
    base: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    assert_eq!(values.len(), region.len(), "one value per area");
    if let Some(dir) = base.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = Vec::new();

    let csv_path = base.with_extension("csv");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
        writeln!(f, "id,x,y,value")?;
        for (unit, v) in region.units().iter().zip(values) {
            writeln!(f, "{},{},{},{}", unit.id, unit.centroid_x, unit.centroid_y, v)?;
        }
    }
    out.push(csv_path);

    if let Some((rows, cols)) = region.lattice_shape() {
        let svg_path = base.with_extension("svg");
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        const CELL: usize = 20;
        let mut f = std::io::BufWriter::new(std::fs::File::create(&svg_path)?);
        writeln!(
            f,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            cols * CELL,
            rows * CELL,
            cols * CELL,
            rows * CELL
        )?;
        for r in 0..rows {
            for c in 0..cols {
                let v = values[r * cols + c];
                let t = if range > 0.0 { (v - min) / range } else { 0.5 };
                // Row 0 at the bottom so the picture matches centroid axes.
                writeln!(
                    f,
                    r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"><title>{v}</title></rect>"#,
                    c * CELL,
                    (rows - 1 - r) * CELL,
                    viridis(t),
                )?;
            }
        }
        writeln!(f, "</svg>")?;
        out.push(svg_path);
    }
    Ok(out)
}
