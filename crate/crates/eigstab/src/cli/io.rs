//! Deterministic CSV and VTK legacy ASCII writers.
//!
//! All floating-point output goes through C-style scientific formatting with
//! a fixed digit count, LF line endings and a fixed column order, so a given
//! configuration produces byte-identical files on every run.

use std::io::Write;
use std::path::Path;

use crate::cli::CliError;
use crate::fem::FEFunction;
use crate::mesh::TriMesh;

/// C-style `%.*e` formatting: fixed precision mantissa, sign and two-digit
/// exponent (`1.2345678901e+02`).
pub fn format_sci(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let raw = format!("{:.*e}", precision, x);
    let (mantissa, exponent) = raw.split_once('e').expect("float format has exponent");
    let exp: i32 = exponent.parse().expect("exponent parses");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

/// CSV numbers use 10 fractional digits; VTK fields carry 17 significant
/// digits (full double round trip).
pub fn csv_num(x: f64) -> String {
    format_sci(x, 10)
}

fn vtk_num(x: f64) -> String {
    format_sci(x, 16)
}

/// Writes a CSV file: `#`-prefixed header comments, one column-name row, the
/// data rows, and optional `#`-prefixed footer comments.
pub fn write_csv(
    path: &Path,
    comments: &[String],
    columns: &[&str],
    rows: &[Vec<String>],
    footers: &[String],
) -> Result<(), CliError> {
    let mut text = String::new();
    for c in comments {
        text.push_str("# ");
        text.push_str(c);
        text.push('\n');
    }
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        text.push_str(&row.join(","));
        text.push('\n');
    }
    for f in footers {
        text.push_str("# ");
        text.push_str(f);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Writes a mesh with any number of nodal scalar fields as VTK legacy ASCII
/// (version 3.0, `UNSTRUCTURED_GRID`, triangle cells).
pub fn write_vtk(
    path: &Path,
    title: &str,
    mesh: &TriMesh,
    fields: &[(&str, &FEFunction)],
) -> Result<(), CliError> {
    let mut text = String::new();
    text.push_str("# vtk DataFile Version 3.0\n");
    text.push_str(title);
    text.push('\n');
    text.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");

    text.push_str(&format!("POINTS {} double\n", mesh.num_nodes()));
    for p in mesh.nodes() {
        text.push_str(&format!(
            "{} {} {}\n",
            vtk_num(p.x),
            vtk_num(p.y),
            vtk_num(0.0)
        ));
    }
    text.push_str(&format!(
        "CELLS {} {}\n",
        mesh.num_elements(),
        4 * mesh.num_elements()
    ));
    for el in mesh.elements() {
        text.push_str(&format!("3 {} {} {}\n", el[0], el[1], el[2]));
    }
    text.push_str(&format!("CELL_TYPES {}\n", mesh.num_elements()));
    for _ in 0..mesh.num_elements() {
        text.push_str("5\n");
    }
    if !fields.is_empty() {
        text.push_str(&format!("POINT_DATA {}\n", mesh.num_nodes()));
        for (name, f) in fields {
            assert!(
                std::ptr::eq(f.mesh(), mesh),
                "field {name} lives on a different mesh"
            );
            text.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
            for v in f.values() {
                text.push_str(&vtk_num(*v));
                text.push('\n');
            }
        }
    }
    write_atomic(path, text.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    Ok(())
}
