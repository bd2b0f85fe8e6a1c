//! Plain-text node, value, and diagnostic files.
//!
//! Point and vector files hold one entry per line as 2 or 3 whitespace
//! separated numbers; blank lines and lines starting with `#` are skipped.

use std::io::{BufRead, Write};

use nalgebra::Vector3;

use crate::cover::Cover;
use crate::error::{Error, Result};
use crate::pum::PumApproximant;

/// Reads 2- or 3-component rows; 2-component rows get `z = 0`. All rows
/// must have the same width.
pub fn read_vectors<R: BufRead>(reader: R) -> Result<Vec<Vector3<f64>>> {
    let mut out = Vec::new();
    let mut width = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let vals = t
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: format!("'{s}': {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if !(vals.len() == 2 || vals.len() == 3) {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 2 or 3 columns, found {}", vals.len()),
            });
        }
        if *width.get_or_insert(vals.len()) != vals.len() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "column count differs from earlier rows".into(),
            });
        }
        out.push(Vector3::new(vals[0], vals[1], vals.get(2).copied().unwrap_or(0.0)));
    }
    Ok(out)
}

pub fn read_vectors_file(path: &std::path::Path) -> Result<Vec<Vector3<f64>>> {
    let f = std::fs::File::open(path)?;
    read_vectors(std::io::BufReader::new(f))
}

/// Writes `dim` components per row at full precision.
pub fn write_vectors<W: Write>(mut w: W, rows: &[Vector3<f64>], dim: usize) -> Result<()> {
    for v in rows {
        let cols: Vec<String> = (0..dim).map(|k| format!("{:.17e}", v[k])).collect();
        writeln!(w, "{}", cols.join(" "))?;
    }
    Ok(())
}

/// One line per patch: `xi_x xi_y xi_z rho n_members`.
pub fn write_cover<W: Write>(mut w: W, cover: &Cover) -> Result<()> {
    for p in cover.patches() {
        writeln!(
            w,
            "{:.17e} {:.17e} {:.17e} {:.17e} {}",
            p.center.x,
            p.center.y,
            p.center.z,
            p.radius,
            p.members.len()
        )?;
    }
    Ok(())
}

/// One line per glue edge: `l k x y z r_i c_i residual_i`.
pub fn write_glue<W: Write>(mut w: W, pum: &PumApproximant) -> Result<()> {
    let res = &pum.shifts().residual;
    for (i, e) in pum.graph().edges.iter().enumerate() {
        let c = pum.fits()[e.k].eval_potential(&e.point) - pum.fits()[e.l].eval_potential(&e.point);
        writeln!(
            w,
            "{} {} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            e.l, e.k, e.point.x, e.point.y, e.point.z, e.r, c, res[i]
        )?;
    }
    Ok(())
}

/// One line per point: coordinates, potential, field components.
pub fn write_evaluations<W: Write>(
    mut w: W,
    points: &[Vector3<f64>],
    potentials: &[f64],
    fields: &[Vector3<f64>],
    dim: usize,
) -> Result<()> {
    writeln!(w, "# x[{dim}] potential field[{dim}]")?;
    for ((x, p), f) in points.iter().zip(potentials).zip(fields) {
        let mut cols: Vec<String> = (0..dim).map(|k| format!("{:.17e}", x[k])).collect();
        cols.push(format!("{p:.17e}"));
        cols.extend((0..dim).map(|k| format!("{:.17e}", f[k])));
        writeln!(w, "{}", cols.join(" "))?;
    }
    Ok(())
}
