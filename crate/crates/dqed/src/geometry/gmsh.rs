//! Gmsh ASCII reader (v2.2 and v4.1) and v2.2 writer, restricted to linear
//! tetrahedra and triangles.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mesh::VolumeMesh;
use super::vec3::Vec3;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    /// Detect from the `$MeshFormat` header.
    Auto,
    Msh22,
    Msh41,
    /// JSON dump produced by [`crate::geometry::MeshDump`].
    Json,
}

const GMSH_LINE: i64 = 1;
const GMSH_TRIANGLE: i64 = 2;
const GMSH_TET: i64 = 4;
const GMSH_POINT: i64 = 15;

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(s: &'a str) -> Self {
        Lines { it: s.lines().enumerate(), line: 0 }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        for (i, l) in self.it.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Ok(t);
            }
        }
        Err(Error::Parse { line: self.line, msg: "unexpected end of file".into() })
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, msg: msg.into() }
    }

    fn expect(&mut self, tag: &str) -> Result<()> {
        let l = self.next_line()?;
        if l != tag {
            return Err(self.err(format!("expected {tag}, found {l}")));
        }
        Ok(())
    }

    fn next_nums<T: std::str::FromStr>(&mut self) -> Result<Vec<T>> {
        let s = self.next_line()?;
        nums(self, s)
    }

    fn skip_section(&mut self, name: &str) -> Result<()> {
        let end = format!("$End{}", &name[1..]);
        loop {
            if self.next_line()? == end {
                return Ok(());
            }
        }
    }
}

fn nums<T: std::str::FromStr>(l: &Lines, s: &str) -> Result<Vec<T>> {
    s.split_whitespace().map(|w| w.parse::<T>().map_err(|_| l.err(format!("bad number '{w}'")))).collect()
}

struct Raw {
    nodes: Vec<Vec3>,
    tets: Vec<[usize; 4]>,
    triangles: usize,
}

/// Parses a mesh file into a validated [`VolumeMesh`].
pub fn parse_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<VolumeMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh_str(&text, format)
}

pub fn parse_mesh_str(text: &str, format: MeshFormat) -> Result<VolumeMesh> {
    if format == MeshFormat::Json || (format == MeshFormat::Auto && text.trim_start().starts_with('{')) {
        let dump: super::mesh::MeshDump =
            serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        return dump.to_mesh();
    }
    let raw = parse_gmsh(text, format)?;
    if raw.tets.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: format!("no tetrahedra found ({} triangles present)", raw.triangles),
        });
    }
    VolumeMesh::new(raw.nodes, raw.tets)
}

fn parse_gmsh(text: &str, format: MeshFormat) -> Result<Raw> {
    let mut l = Lines::new(text);
    l.expect("$MeshFormat")?;
    let header = l.next_line()?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() < 3 {
        return Err(l.err("malformed $MeshFormat header"));
    }
    let version = match h[0] {
        "2.2" => MeshFormat::Msh22,
        "4.1" => MeshFormat::Msh41,
        v => return Err(l.err(format!("unsupported Gmsh version {v}"))),
    };
    if format != MeshFormat::Auto && format != version {
        return Err(l.err(format!("file is {:?}, requested {:?}", version, format)));
    }
    if h[1] != "0" {
        return Err(l.err("binary Gmsh files are not supported"));
    }
    l.expect("$EndMeshFormat")?;

    let mut tags: HashMap<usize, usize> = HashMap::new();
    let mut nodes: Vec<Vec3> = Vec::new();
    let mut tets: Vec<[usize; 4]> = Vec::new();
    let mut triangles = 0usize;
    let mut elem_nodes: Vec<(usize, Vec<usize>, i64)> = Vec::new();

    while let Ok(section) = l.next_line() {
        match section {
            "$Nodes" if version == MeshFormat::Msh22 => {
                let n: usize = l.next_line()?.parse().map_err(|_| l.err("bad node count"))?;
                for _ in 0..n {
                    let line = l.next_line()?;
                    let mut w = line.split_whitespace();
                    let tag: usize = w.next().and_then(|x| x.parse().ok()).ok_or_else(|| l.err("bad node tag"))?;
                    let c: Vec<f64> = nums(&l, &w.collect::<Vec<_>>().join(" "))?;
                    if c.len() != 3 {
                        return Err(l.err("node needs three coordinates"));
                    }
                    tags.insert(tag, nodes.len());
                    nodes.push([c[0], c[1], c[2]]);
                }
                l.expect("$EndNodes")?;
            }
            "$Nodes" => {
                let head: Vec<usize> = l.next_nums()?;
                if head.len() != 4 {
                    return Err(l.err("malformed $Nodes header"));
                }
                for _ in 0..head[0] {
                    let bh: Vec<i64> = l.next_nums()?;
                    if bh.len() != 4 {
                        return Err(l.err("malformed node block header"));
                    }
                    let parametric = bh[2] != 0;
                    let count = bh[3] as usize;
                    let mut block_tags = Vec::with_capacity(count);
                    for _ in 0..count {
                        let t: usize = l.next_line()?.parse().map_err(|_| l.err("bad node tag"))?;
                        block_tags.push(t);
                    }
                    for t in block_tags {
                        let c: Vec<f64> = l.next_nums()?;
                        let need = if parametric { 3 + bh[0].max(0) as usize } else { 3 };
                        if c.len() != need {
                            return Err(l.err("wrong number of node coordinates"));
                        }
                        tags.insert(t, nodes.len());
                        nodes.push([c[0], c[1], c[2]]);
                    }
                }
                l.expect("$EndNodes")?;
            }
            "$Elements" if version == MeshFormat::Msh22 => {
                let n: usize = l.next_line()?.parse().map_err(|_| l.err("bad element count"))?;
                for _ in 0..n {
                    let v: Vec<i64> = l.next_nums()?;
                    if v.len() < 3 {
                        return Err(l.err("malformed element"));
                    }
                    let (ty, ntags) = (v[1], v[2] as usize);
                    let conn: Vec<usize> = v.iter().skip(3 + ntags).map(|&x| x as usize).collect();
                    elem_nodes.push((l.line, conn, ty));
                }
                l.expect("$EndElements")?;
            }
            "$Elements" => {
                let head: Vec<usize> = l.next_nums()?;
                if head.len() != 4 {
                    return Err(l.err("malformed $Elements header"));
                }
                for _ in 0..head[0] {
                    let bh: Vec<i64> = l.next_nums()?;
                    if bh.len() != 4 {
                        return Err(l.err("malformed element block header"));
                    }
                    for _ in 0..bh[3] {
                        let v: Vec<usize> = l.next_nums()?;
                        if v.is_empty() {
                            return Err(l.err("empty element line"));
                        }
                        elem_nodes.push((l.line, v[1..].to_vec(), bh[2]));
                    }
                }
                l.expect("$EndElements")?;
            }
            s if s.starts_with('$') => l.skip_section(s)?,
            s => return Err(l.err(format!("unexpected line '{s}'"))),
        }
    }

    for (line, conn, ty) in elem_nodes {
        let err = |msg: String| Error::Parse { line, msg };
        let map = |c: &[usize]| -> Result<Vec<usize>> {
            c.iter().map(|t| tags.get(t).copied().ok_or_else(|| err(format!("unknown node tag {t}")))).collect()
        };
        match ty {
            GMSH_TET => {
                if conn.len() != 4 {
                    return Err(err("tetrahedron needs 4 nodes".into()));
                }
                let m = map(&conn)?;
                tets.push([m[0], m[1], m[2], m[3]]);
            }
            GMSH_TRIANGLE => {
                if conn.len() != 3 {
                    return Err(err("triangle needs 3 nodes".into()));
                }
                map(&conn)?;
                triangles += 1;
            }
            GMSH_POINT | GMSH_LINE => {}
            other => return Err(err(format!("unsupported element type {other}"))),
        }
    }
    Ok(Raw { nodes, tets, triangles })
}

/// Writes a Gmsh 2.2 ASCII file with the boundary triangles and the tetrahedra.
pub fn write_msh22(mesh: &VolumeMesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.nodes.len());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{} {:?} {:?} {:?}", i + 1, p[0], p[1], p[2]);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let tris = &mesh.boundary.triangles;
    let _ = writeln!(s, "{}", tris.len() + mesh.tets.len());
    let mut id = 1;
    for t in tris {
        let _ = writeln!(s, "{id} 2 2 1 1 {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        id += 1;
    }
    for t in &mesh.tets {
        let _ = writeln!(s, "{id} 4 2 1 1 {} {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1, t[3] + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}

/// Writes a Gmsh 4.1 ASCII file (single volume entity).
pub fn write_msh41(mesh: &VolumeMesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n$Nodes\n");
    let n = mesh.nodes.len();
    let _ = writeln!(s, "1 {n} 1 {n}\n3 1 0 {n}");
    for i in 0..n {
        let _ = writeln!(s, "{}", i + 1);
    }
    for p in &mesh.nodes {
        let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let m = mesh.tets.len();
    let _ = writeln!(s, "1 {m} 1 {m}\n3 1 4 {m}");
    for (i, t) in mesh.tets.iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {} {}", i + 1, t[0] + 1, t[1] + 1, t[2] + 1, t[3] + 1);
    }
    s.push_str("$EndElements\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_TET_22: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n$Elements\n2\n1 15 2 0 1 1\n2 4 2 1 1 1 2 3 4\n$EndElements\n";

    #[test]
    fn reads_single_tet_v22() {
        let m = parse_mesh_str(ONE_TET_22, MeshFormat::Auto).unwrap();
        assert_eq!(m.tets.len(), 1);
        assert_eq!(m.boundary.len(), 4);
        assert!((m.volumes[0] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_wrong_version_request() {
        assert!(matches!(parse_mesh_str(ONE_TET_22, MeshFormat::Msh41), Err(Error::Parse { .. })));
    }

    #[test]
    fn rejects_unsupported_element() {
        let bad = ONE_TET_22.replace("2 4 2 1 1 1 2 3 4", "2 5 2 1 1 1 2 3 4 1 2 3 4");
        assert!(matches!(parse_mesh_str(&bad, MeshFormat::Auto), Err(Error::Parse { .. })));
    }

    #[test]
    fn reads_v41_with_entities() {
        let text = "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n$Entities\n0 0 0 1\n1 0 0 0 1 1 1 0 0\n$EndEntities\n$Nodes\n1 4 1 4\n3 1 0 4\n1\n2\n3\n4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n$EndNodes\n$Elements\n1 1 1 1\n3 1 4 1\n1 1 2 3 4\n$EndElements\n";
        let m = parse_mesh_str(text, MeshFormat::Auto).unwrap();
        assert_eq!(m.tets, vec![[0, 1, 2, 3]]);
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let cut = &ONE_TET_22[..ONE_TET_22.len() - 20];
        assert!(matches!(parse_mesh_str(cut, MeshFormat::Auto), Err(Error::Parse { .. })));
    }
}
