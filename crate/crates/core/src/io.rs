//! Text formats: XYZ and ASCII PLY point clouds, and the `.tet` mesh format.
//!
//! All floats are written with 17 significant digits so a write/read cycle
//! reproduces every coordinate bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, TetMesh, Vec3};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, s: &str) -> Result<()> {
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Path of the sidecar file carrying a cloud's class label.
pub fn label_path(path: &Path) -> PathBuf {
    path.with_extension("label")
}

fn parse_xyz_line(line: &str, lineno: usize) -> Result<Vec3> {
    let mut it = line.split_whitespace();
    let mut coords = [0.0; 3];
    for c in coords.iter_mut() {
        let tok = it.next().ok_or_else(|| Error::Parse {
            line: lineno,
            message: format!("expected 3 coordinates, got '{line}'"),
        })?;
        let value: f64 = tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("'{tok}' is not a number"),
        })?;
        *c = value;
        if !value.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("non-finite coordinate '{tok}'"),
            });
        }
    }
    Ok(Vec3::new(coords[0], coords[1], coords[2]))
}

fn parse_xyz(text: &str) -> Result<Vec<Vec3>> {
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        pts.push(parse_xyz_line(t, i + 1)?);
    }
    Ok(pts)
}

fn parse_ply(text: &str) -> Result<Vec<Vec3>> {
    struct Element {
        name: String,
        count: usize,
        props: Vec<String>,
    }
    let mut lines = text.lines().enumerate();
    let mut elements: Vec<Element> = Vec::new();
    let mut header_done = false;
    for (i, line) in lines.by_ref() {
        let lineno = i + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["ply"] if lineno == 1 => {}
            _ if lineno == 1 => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing 'ply' magic".into(),
                })
            }
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("unsupported PLY format '{fmt}'"),
                    });
                }
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad element count '{count}'"),
                })?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", ..] => {
                let name = toks.last().unwrap().to_string();
                match elements.last_mut() {
                    Some(e) => e.props.push(name),
                    None => {
                        return Err(Error::Parse {
                            line: lineno,
                            message: "property before element".into(),
                        })
                    }
                }
            }
            ["property", _ty, name] => match elements.last_mut() {
                Some(e) => e.props.push(name.to_string()),
                None => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "property before element".into(),
                    })
                }
            },
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unexpected header line '{line}'"),
                })
            }
        }
    }
    if !header_done {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: "missing end_header".into(),
        });
    }
    let mut pts = Vec::new();
    for el in &elements {
        let axis = |n: &str| el.props.iter().position(|p| p == n);
        let is_vertex = el.name == "vertex";
        let idx = if is_vertex {
            match (axis("x"), axis("y"), axis("z")) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                _ => {
                    return Err(Error::Parse {
                        line: 1,
                        message: "vertex element lacks x/y/z".into(),
                    })
                }
            }
        } else {
            None
        };
        for _ in 0..el.count {
            let (i, line) = lines.next().ok_or_else(|| Error::Parse {
                line: text.lines().count(),
                message: format!("truncated '{}' element data", el.name),
            })?;
            if let Some(idx) = idx {
                let toks: Vec<&str> = line.split_whitespace().collect();
                let mut c = [0.0; 3];
                for (k, &j) in idx.iter().enumerate() {
                    let tok = toks.get(j).ok_or_else(|| Error::Parse {
                        line: i + 1,
                        message: "too few vertex properties".into(),
                    })?;
                    c[k] = tok.parse().map_err(|_| Error::Parse {
                        line: i + 1,
                        message: format!("'{tok}' is not a number"),
                    })?;
                }
                pts.push(Vec3::new(c[0], c[1], c[2]));
            }
        }
    }
    Ok(pts)
}

/// Reads an XYZ or ASCII PLY cloud. A sibling `.label` file, when present,
/// supplies the class label.
pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let points = if text.starts_with("ply") {
        parse_ply(&text)?
    } else {
        parse_xyz(&text)?
    };
    if points.len() < 4 {
        return Err(Error::DegenerateCloud(points.len()));
    }
    let lp = label_path(path);
    let label = if lp.exists() {
        Some(read_to_string(&lp)?.trim().to_string()).filter(|s| !s.is_empty())
    } else {
        None
    };
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(PointCloud {
        points,
        label,
        source_id,
    })
}

/// Writes the cloud as XYZ plus a `.label` sidecar when it has a label.
pub fn save_xyz(pc: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::with_capacity(pc.len() * 72);
    for p in &pc.points {
        let _ = writeln!(s, "{} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z));
    }
    write_string(path, &s)?;
    if let Some(label) = &pc.label {
        write_string(&label_path(path), &format!("{label}\n"))?;
    }
    Ok(())
}

/// Serializes a mesh in the `.tet` format: a `tet <nv> <nc>` header, one
/// `x y z source` line per vertex, one line of four indices per cell.
pub fn tet_to_string(mesh: &TetMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tet {} {}", mesh.vertices.len(), mesh.cells.len());
    for (p, src) in mesh.vertices.iter().zip(&mesh.retained_map) {
        let _ = writeln!(s, "{} {} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z), src);
    }
    for c in &mesh.cells {
        let _ = writeln!(s, "{} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    s
}

pub fn parse_tet(text: &str) -> Result<TetMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::MeshFormat("empty file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let (nv, nc) = match h.as_slice() {
        ["tet", nv, nc] => (
            nv.parse::<usize>()
                .map_err(|_| Error::MeshFormat(format!("bad vertex count '{nv}'")))?,
            nc.parse::<usize>()
                .map_err(|_| Error::MeshFormat(format!("bad cell count '{nc}'")))?,
        ),
        _ => return Err(Error::MeshFormat(format!("bad header '{header}'"))),
    };
    let mut vertices = Vec::with_capacity(nv);
    let mut retained_map = Vec::with_capacity(nv);
    for k in 0..nv {
        let (i, line) = lines
            .next()
            .ok_or_else(|| Error::MeshFormat(format!("expected {nv} vertices, found {k}")))?;
        let p = parse_xyz_line(line, i + 1)?;
        let src = match line.split_whitespace().nth(3) {
            Some(tok) => tok
                .parse()
                .map_err(|_| Error::MeshFormat(format!("line {}: bad source index '{tok}'", i + 1)))?,
            None => k,
        };
        vertices.push(p);
        retained_map.push(src);
    }
    let mut cells = Vec::with_capacity(nc);
    for k in 0..nc {
        let (i, line) = lines
            .next()
            .ok_or_else(|| Error::MeshFormat(format!("expected {nc} cells, found {k}")))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(Error::MeshFormat(format!(
                "line {}: expected 4 indices, got {}",
                i + 1,
                toks.len()
            )));
        }
        let mut cell = [0usize; 4];
        for (c, tok) in cell.iter_mut().zip(&toks) {
            *c = tok
                .parse()
                .map_err(|_| Error::MeshFormat(format!("line {}: bad index '{tok}'", i + 1)))?;
            if *c >= nv {
                return Err(Error::MeshFormat(format!(
                    "line {}: index {} out of range for {nv} vertices",
                    i + 1,
                    *c
                )));
            }
        }
        cells.push(cell);
    }
    if let Some((i, _)) = lines.next() {
        return Err(Error::MeshFormat(format!(
            "line {}: trailing data after {nc} cells",
            i + 1
        )));
    }
    Ok(TetMesh {
        vertices,
        cells,
        retained_map,
    })
}

pub fn save_tet(mesh: &TetMesh, path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &tet_to_string(mesh))
}

pub fn load_tet(path: impl AsRef<Path>) -> Result<TetMesh> {
    let path = path.as_ref();
    parse_tet(&read_to_string(path)?)
}

/// Writes the mesh and reads it straight back.
pub fn tet_mesh_roundtrip(mesh: &TetMesh, path: impl AsRef<Path>) -> Result<TetMesh> {
    save_tet(mesh, path.as_ref())?;
    load_tet(path)
}
