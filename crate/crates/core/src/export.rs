//! Mesh and residual files.
//!
//! Mesh CSV columns: Re z_1, Im z_1, …, Re z_n, Im z_n, s_or_y, theta.
//! Rows are written in the order given, with every float in `{:.17e}` so
//! that a file read back reproduces the same doubles.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::geometry::{immerse, PointResiduals, QuadricPoint, SolitonCurve};
use crate::reduced_ode::fmt;

/// One vertex of a sampled soliton.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshRow {
    pub z: Vec<Complex64>,
    pub t: f64,
    pub theta: f64,
}

/// ι(x, t) for every t in `ts` (outer) and x in `xs` (inner).
pub fn mesh_grid<Cv: SolitonCurve + ?Sized>(curve: &Cv, xs: &[QuadricPoint], ts: &[f64]) -> Result<Vec<MeshRow>> {
    let mut rows = Vec::with_capacity(xs.len() * ts.len());
    for &t in ts {
        for x in xs {
            let p = immerse(curve, x, t)?;
            rows.push(MeshRow {
                z: p.z,
                t,
                theta: p.theta,
            });
        }
    }
    Ok(rows)
}

/// ι(x, t) at paired samples.
pub fn mesh_samples<Cv: SolitonCurve + ?Sized>(curve: &Cv, samples: &[(QuadricPoint, f64)]) -> Result<Vec<MeshRow>> {
    samples
        .iter()
        .map(|(x, t)| {
            let p = immerse(curve, x, *t)?;
            Ok(MeshRow {
                z: p.z,
                t: *t,
                theta: p.theta,
            })
        })
        .collect()
}

pub fn mesh_header(n: usize) -> String {
    let mut cols = Vec::with_capacity(2 * n + 2);
    for j in 1..=n {
        cols.push(format!("re_z{j}"));
        cols.push(format!("im_z{j}"));
    }
    cols.push("s_or_y".into());
    cols.push("theta".into());
    cols.join(",")
}

pub fn write_mesh_csv<W: Write>(rows: &[MeshRow], mut out: W) -> std::io::Result<()> {
    let n = rows.first().map_or(0, |r| r.z.len());
    writeln!(out, "{}", mesh_header(n))?;
    for r in rows {
        let mut cells = Vec::with_capacity(2 * n + 2);
        for z in &r.z {
            cells.push(fmt(z.re));
            cells.push(fmt(z.im));
        }
        cells.push(fmt(r.t));
        cells.push(fmt(r.theta));
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Parse a mesh CSV written by [`write_mesh_csv`].
pub fn read_mesh_csv<R: BufRead>(input: R) -> Result<Vec<MeshRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let width = match reader.headers() {
        Ok(h) => h.len(),
        Err(e) => return invalid(format!("mesh header: {e}")),
    };
    if width < 4 || width % 2 != 0 {
        return invalid(format!("mesh has {width} columns, expected 2n + 2"));
    }
    let n = (width - 2) / 2;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => return invalid(format!("mesh row {}: {e}", i + 1)),
        };
        let vals = rec
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>();
        let vals = match vals {
            Ok(v) if v.len() == width => v,
            _ => return invalid(format!("mesh row {}: expected {width} numbers", i + 1)),
        };
        rows.push(MeshRow {
            z: (0..n).map(|j| Complex64::new(vals[2 * j], vals[2 * j + 1])).collect(),
            t: vals[2 * n],
            theta: vals[2 * n + 1],
        });
    }
    Ok(rows)
}

/// Linear map ℝ²ⁿ → ℝ³ for PLY output, one row per output axis, acting on
/// (Re z_1, Im z_1, …).
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub rows: [Vec<f64>; 3],
}

impl Projection {
    /// (Re z_1, Im z_1, Re z_2); for n = 1 the third axis is 0.
    pub fn leading(n: usize) -> Self {
        let unit = |k: usize| {
            let mut v = vec![0.0; 2 * n];
            if k < 2 * n {
                v[k] = 1.0;
            }
            v
        };
        Self {
            rows: [unit(0), unit(1), unit(2)],
        }
    }

    /// Parse "a,b,…;c,d,…;e,f,…".
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .split(';')
            .map(|r| r.split(',').map(|c| c.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .or_else(|e| invalid(format!("projection: {e}")))?;
        if rows.len() != 3 || rows.iter().any(|r| r.len() != 2 * n) {
            return invalid(format!("projection needs 3 rows of {} numbers", 2 * n));
        }
        let mut it = rows.into_iter();
        Ok(Self {
            rows: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
        })
    }

    pub fn apply(&self, z: &[Complex64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, row) in self.rows.iter().enumerate() {
            out[k] = z
                .iter()
                .enumerate()
                .map(|(j, zj)| row[2 * j] * zj.re + row[2 * j + 1] * zj.im)
                .sum();
        }
        out
    }
}

/// ASCII PLY vertex cloud with properties x, y, z, t, theta.
pub fn write_ply<W: Write>(rows: &[MeshRow], projection: &Projection, mut out: W) -> std::io::Result<()> {
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", rows.len())?;
    for p in ["x", "y", "z", "t", "theta"] {
        writeln!(out, "property double {p}")?;
    }
    writeln!(out, "end_header")?;
    for r in rows {
        let [x, y, z] = projection.apply(&r.z);
        writeln!(out, "{} {} {} {} {}", fmt(x), fmt(y), fmt(z), fmt(r.t), fmt(r.theta))?;
    }
    Ok(())
}

/// Columns: point_id, s_or_y, lagrangian_residual, angle_residual, soliton_residual.
pub fn write_residual_csv<W: Write>(points: &[PointResiduals], mut out: W) -> std::io::Result<()> {
    writeln!(out, "point_id,s_or_y,lagrangian_residual,angle_residual,soliton_residual")?;
    for (i, p) in points.iter().enumerate() {
        writeln!(out, "{i},{},{},{},{}", fmt(p.t), fmt(p.lagrangian), fmt(p.angle), fmt(p.soliton))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<MeshRow> {
        vec![
            MeshRow {
                z: vec![Complex64::new(0.1, -0.2), Complex64::new(1.0 / 3.0, 2.0f64.sqrt())],
                t: -0.5,
                theta: 1.25,
            },
            MeshRow {
                z: vec![Complex64::new(-7e-12, 3e5), Complex64::new(0.0, -0.0)],
                t: 2.0,
                theta: -3.0,
            },
        ]
    }

    #[test]
    fn mesh_round_trip_is_exact() {
        let rows = sample_rows();
        let mut buf = Vec::new();
        write_mesh_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("re_z1,im_z1,re_z2,im_z2,s_or_y,theta\n"));
        let back = read_mesh_csv(&buf[..]).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn bad_mesh_is_rejected() {
        assert!(read_mesh_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
        assert!(read_mesh_csv("a,b,c,d\n1,2,x,4\n".as_bytes()).is_err());
    }

    #[test]
    fn ply_header_and_projection() {
        let rows = sample_rows();
        let proj = Projection::parse("1,0,0,0;0,0,1,0;0,1,0,1", 2).unwrap();
        let p = proj.apply(&rows[0].z);
        assert_eq!(p, [0.1, 1.0 / 3.0, -0.2 + 2.0f64.sqrt()]);
        let mut buf = Vec::new();
        write_ply(&rows, &Projection::leading(2), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("element vertex 2\n"));
        assert_eq!(text.lines().count(), 2 + 1 + 5 + 1 + 2);
        assert!(Projection::parse("1,0;0,1", 2).is_err());
    }
}
