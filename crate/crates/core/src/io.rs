//! CSV output at full double precision with a dot decimal separator.

use crate::geometry::{RadialField, SphereField, VectorField};
use std::io::{Result, Write};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_rows<W: Write, R: AsRef<[f64]>>(mut w: W, header: &str, rows: impl IntoIterator<Item = R>) -> Result<()> {
    writeln!(w, "{header}")?;
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|&x| format_value(x)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Columns `r,v1,v2,v3`.
pub fn write_sphere_field(w: impl Write, v: &SphereField) -> Result<()> {
    let rows = v.grid.nodes().iter().zip(&v.samples).map(|(&r, s)| [r, s[0], s[1], s[2]]);
    write_rows(w, "r,v1,v2,v3", rows)
}

/// Columns `r,x1,x2,x3`.
pub fn write_vector_field(w: impl Write, f: &VectorField) -> Result<()> {
    let rows = f.grid.nodes().iter().zip(&f.values).map(|(&r, s)| [r, s[0], s[1], s[2]]);
    write_rows(w, "r,x1,x2,x3", rows)
}

/// Columns `<var>,re_<name>,im_<name>`.
pub fn write_radial_field(w: impl Write, f: &RadialField, var: &str, name: &str) -> Result<()> {
    let rows = f.grid.nodes().iter().zip(&f.values).map(|(&r, z)| [r, z.re, z.im]);
    write_rows(w, &format!("{var},re_{name},im_{name}"), rows)
}
