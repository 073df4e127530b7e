use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{RalError, TriangleMesh};
use crate::geometry::Vec3;

fn parse_err(path: &str, reason: impl Into<String>) -> RalError {
    RalError::Parse { path: path.to_string(), reason: reason.into() }
}

/// ASCII OBJ: `v` and `f` records; polygons are fan-triangulated, other
/// records ignored.
pub fn parse_obj(name: &str, text: &str) -> Result<TriangleMesh, RalError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let at = |reason: String| parse_err(&format!("{name}:{}", ln + 1), reason);
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| at(format!("{s:?}: {e}"))))
                    .collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(at("vertex needs 3 coordinates".into()));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|tok| {
                        let head = tok.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|e| at(format!("{tok:?}: {e}")))?;
                        let n = vertices.len() as i64;
                        let k = if i > 0 { i - 1 } else { n + i };
                        if i == 0 || k < 0 || k >= n {
                            return Err(at(format!("index {i} out of range")));
                        }
                        Ok(k as usize)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(at("face needs at least 3 vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(name, vertices, triangles)
}

pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = format!("o {}\n", mesh.name);
    for v in mesh.world_vertices() {
        let _ = writeln!(out, "v {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

/// Binary STL. Coincident corners are merged by exact bit pattern.
pub fn parse_stl_binary(name: &str, bytes: &[u8]) -> Result<TriangleMesh, RalError> {
    if bytes.len() < 84 {
        return Err(parse_err(name, "shorter than the 84-byte header"));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().expect("4 bytes")) as usize;
    let need = 84 + count * 50;
    if bytes.len() < need {
        return Err(parse_err(name, format!("{count} triangles need {need} bytes, have {}", bytes.len())));
    }
    let f = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as f64;
    let mut index: HashMap<[u64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(count);
    for t in 0..count {
        let base = 84 + t * 50 + 12;
        let mut tri = [0usize; 3];
        for (c, slot) in tri.iter_mut().enumerate() {
            let o = base + c * 12;
            let v = Vec3::new(f(o), f(o + 4), f(o + 8));
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            *slot = *index.entry(key).or_insert_with(|| {
                vertices.push(v);
                vertices.len() - 1
            });
        }
        triangles.push(tri);
    }
    TriangleMesh::new(name, vertices, triangles)
}

pub fn write_stl_binary(mesh: &TriangleMesh) -> Vec<u8> {
    let w = mesh.world_vertices();
    let mut out = vec![0u8; 80];
    out.extend((mesh.triangles.len() as u32).to_le_bytes());
    for t in &mesh.triangles {
        let n = (w[t[1]] - w[t[0]]).cross(&(w[t[2]] - w[t[0]])).try_normalize(0.0).unwrap_or_default();
        for v in std::iter::once(&n).chain(t.iter().map(|&i| &w[i])) {
            for x in v.iter() {
                out.extend((*x as f32).to_le_bytes());
            }
        }
        out.extend(0u16.to_le_bytes());
    }
    out
}

/// Loads `.obj` or `.stl` by extension; the mesh is named after the file stem.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh, RalError> {
    let shown = path.display().to_string();
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string();
    let ext = path.extension().and_then(|s| s.to_str()).map(str::to_ascii_lowercase);
    let bytes = fs::read(path).map_err(|e| parse_err(&shown, e.to_string()))?;
    match ext.as_deref() {
        Some("obj") => {
            let text = String::from_utf8(bytes).map_err(|e| parse_err(&shown, e.to_string()))?;
            parse_obj(&name, &text)
        }
        Some("stl") => parse_stl_binary(&name, &bytes),
        _ => Err(parse_err(&shown, "expected .obj or .stl")),
    }
}

/// Every mesh file in `dir`, in file-name order.
pub fn load_mesh_dir(dir: &Path) -> Result<Vec<TriangleMesh>, RalError> {
    let shown = dir.display().to_string();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| parse_err(&shown, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(p.extension().and_then(|s| s.to_str()).map(str::to_ascii_lowercase).as_deref(), Some("obj" | "stl"))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| load_mesh(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ral::{fixtures, mesh_volume};

    #[test]
    fn obj_round_trip_preserves_volume() {
        let cube = fixtures::unit_cube();
        let back = parse_obj("cube", &write_obj(&cube)).unwrap();
        assert_eq!(back.triangles.len(), 12);
        assert!((mesh_volume(&back).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn obj_quads_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4/1 -3/2 -2/3 -1/4\n";
        let m = parse_obj("q", text).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(parse_obj("bad", "v 0 0\n").is_err());
        assert!(parse_obj("bad", "v 0 0 0\nf 1 2 3\n").is_err());
    }

    #[test]
    fn stl_round_trip_merges_corners() {
        let cube = fixtures::unit_cube();
        let back = parse_stl_binary("cube", &write_stl_binary(&cube)).unwrap();
        assert_eq!(back.vertices.len(), 8);
        assert!((mesh_volume(&back).unwrap() - 1.0).abs() < 1e-6);
        assert!(parse_stl_binary("short", &[0u8; 40]).is_err());
    }
}
