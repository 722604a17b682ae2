use std::fs;
use std::io::Write;
use std::path::Path;

use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

/// Reads a triangle mesh in OFF format. A mesh whose `z` coordinates are all zero is planar.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_off(&text, path)
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    write_off(mesh, &mut file)?;
    file.flush()?;
    Ok(())
}

/// Writes OFF with 17 significant digits, enough to round-trip every `f64`.
pub fn write_off<W: Write>(mesh: &TriMesh, out: &mut W) -> Result<()> {
    writeln!(out, "OFF")?;
    writeln!(
        out,
        "{} {} {}",
        mesh.vertex_count(),
        mesh.face_count(),
        mesh.edges().len()
    )?;
    for v in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

pub fn parse_off(text: &str, path: &Path) -> Result<TriMesh> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let mut counts_line = None;
    if header != "OFF" {
        match header.strip_prefix("OFF") {
            Some(rest) if !rest.trim().is_empty() => counts_line = Some((ln, rest.trim())),
            _ => return Err(err(ln, format!("expected OFF header, found {header:?}"))),
        }
    }
    let (ln, counts) = match counts_line {
        Some(c) => c,
        None => lines.next().ok_or_else(|| err(ln, "missing counts line".into()))?,
    };
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(ln, format!("bad count {t:?}"))))
        .collect::<Result<_>>()?;
    if counts.len() < 2 {
        return Err(err(ln, "counts line needs vertex and face counts".into()));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(ln, format!("expected {nv} vertices, file ended early")))?;
        let xs: Vec<f64> = l
            .split_whitespace()
            .take(3)
            .map(|t| t.parse().map_err(|_| err(ln, format!("bad coordinate {t:?}"))))
            .collect::<Result<_>>()?;
        if xs.len() != 3 {
            return Err(err(ln, "vertex needs three coordinates".into()));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(err(ln, "non-finite coordinate".into()));
        }
        vertices.push(Vec3::new(xs[0], xs[1], xs[2]));
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(ln, format!("expected {nf} faces, file ended early")))?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .take(4)
            .map(|t| t.parse().map_err(|_| err(ln, format!("bad index {t:?}"))))
            .collect::<Result<_>>()?;
        if ids.first() != Some(&3) || ids.len() != 4 {
            return Err(err(ln, "only triangular faces are supported".into()));
        }
        faces.push([ids[1], ids[2], ids[3]]);
    }

    let dim = if vertices.iter().all(|v| v.z == 0.0) { 2 } else { 3 };
    TriMesh::new(vertices, faces, dim)
}
