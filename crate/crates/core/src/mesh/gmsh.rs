//! ASCII Gmsh MSH 2.2 reader and writer (2D triangles and quadrilaterals).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{CellKind, Mesh2D};

const TYPE_LINE: u32 = 1;
const TYPE_TRIANGLE: u32 = 2;
const TYPE_QUAD: u32 = 3;
const TYPE_POINT: u32 = 15;

pub fn load_gmsh_mesh(path: impl AsRef<Path>) -> Result<Mesh2D> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gmsh(&text, path)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: PathBuf,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some(t);
            }
        }
        None
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn expect_next(&mut self, what: &str) -> Result<&'a str> {
        match self.next() {
            Some(l) => Ok(l),
            None => Err(self.err(format!("unexpected end of file, expected {what}"))),
        }
    }

    fn expect_tag(&mut self, tag: &str) -> Result<()> {
        let l = self.expect_next(tag)?;
        if l != tag {
            return Err(self.err(format!("expected `{tag}`, found `{l}`")));
        }
        Ok(())
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let l = self.expect_next(what)?;
        l.parse::<usize>()
            .map_err(|_| self.err(format!("invalid {what} `{l}`")))
    }
}

fn field<T: std::str::FromStr>(lines: &Lines, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| lines.err(format!("missing {what}")))?;
    tok.parse::<T>()
        .map_err(|_| lines.err(format!("invalid {what} `{tok}`")))
}

/// Parses MSH 2.2 text; `path` is only used in error messages.
pub fn parse_gmsh(text: &str, path: &Path) -> Result<Mesh2D> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path: path.to_path_buf(),
        line: 0,
    };
    let mut nodes: Option<(Vec<[f64; 2]>, HashMap<u64, usize>)> = None;
    let mut elements: Option<Vec<Vec<usize>>> = None;
    let mut saw_format = false;

    while let Some(l) = lines.next() {
        match l {
            "$MeshFormat" => {
                let header = lines.expect_next("format header")?;
                let mut it = header.split_whitespace();
                let version: String = field(&lines, it.next(), "version")?;
                let file_type: u32 = field(&lines, it.next(), "file type")?;
                let _: u32 = field(&lines, it.next(), "data size")?;
                if !version.starts_with("2.2") {
                    return Err(lines.err(format!("unsupported MSH version {version}, expected 2.2")));
                }
                if file_type != 0 {
                    return Err(lines.err("binary MSH files are not supported"));
                }
                lines.expect_tag("$EndMeshFormat")?;
                saw_format = true;
            }
            "$Nodes" => {
                if !saw_format {
                    return Err(lines.err("$Nodes before $MeshFormat"));
                }
                let n = lines.count("node count")?;
                let mut coords = Vec::with_capacity(n);
                let mut index = HashMap::with_capacity(n);
                for _ in 0..n {
                    let row = lines.expect_next("node")?;
                    let mut it = row.split_whitespace();
                    let id: u64 = field(&lines, it.next(), "node id")?;
                    let x: f64 = field(&lines, it.next(), "x coordinate")?;
                    let y: f64 = field(&lines, it.next(), "y coordinate")?;
                    let z: f64 = field(&lines, it.next(), "z coordinate")?;
                    if z != 0.0 {
                        return Err(lines.err(format!("node {id} has nonzero z = {z}")));
                    }
                    if index.insert(id, coords.len()).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    coords.push([x, y]);
                }
                lines.expect_tag("$EndNodes")?;
                nodes = Some((coords, index));
            }
            "$Elements" => {
                let Some((_, index)) = nodes.as_ref() else {
                    return Err(lines.err("$Elements before $Nodes"));
                };
                let n = lines.count("element count")?;
                let mut elems = Vec::with_capacity(n);
                for _ in 0..n {
                    let row = lines.expect_next("element")?;
                    let toks: Vec<&str> = row.split_whitespace().collect();
                    let mut it = toks.iter().copied();
                    let id: u64 = field(&lines, it.next(), "element id")?;
                    let ty: u32 = field(&lines, it.next(), "element type")?;
                    let ntags: usize = field(&lines, it.next(), "tag count")?;
                    for _ in 0..ntags {
                        let _: i64 = field(&lines, it.next(), "tag")?;
                    }
                    let nv = match ty {
                        TYPE_TRIANGLE => 3,
                        TYPE_QUAD => 4,
                        TYPE_LINE | TYPE_POINT => continue,
                        other => {
                            return Err(lines.err(format!(
                                "element {id} has unsupported type {other}; only 2D triangles (2) and quadrilaterals (3) are accepted"
                            )))
                        }
                    };
                    let mut verts = Vec::with_capacity(nv);
                    for _ in 0..nv {
                        let node: u64 = field(&lines, it.next(), "element node")?;
                        match index.get(&node) {
                            Some(&v) => verts.push(v),
                            None => {
                                return Err(lines.err(format!(
                                    "element {id} references undefined node {node}"
                                )))
                            }
                        }
                    }
                    if it.next().is_some() {
                        return Err(lines.err(format!("element {id} has trailing fields")));
                    }
                    elems.push(verts);
                }
                lines.expect_tag("$EndElements")?;
                elements = Some(elems);
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                // Unknown section (e.g. $PhysicalNames): skip to its end marker.
                let end = format!("$End{}", &s[1..]);
                loop {
                    let l = lines.expect_next(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => return Err(lines.err(format!("unexpected line `{other}`"))),
        }
    }

    if !saw_format {
        return Err(lines.err("missing $MeshFormat section"));
    }
    let (coords, _) = nodes.ok_or_else(|| lines.err("missing $Nodes section"))?;
    let elems = elements.ok_or_else(|| lines.err("missing $Elements section"))?;
    if elems.is_empty() {
        return Err(lines.err("no triangle or quadrilateral elements"));
    }
    Mesh2D::new(coords, elems).map_err(|e| lines.err(e.to_string()))
}

/// MSH 2.2 text for `mesh`; node and element ids are 1-based positions.
pub fn write_gmsh_string(mesh: &Mesh2D) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.n_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {:e} {:e} 0", i + 1, p[0], p[1]);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(s, "{}", mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let ty = match mesh.kind(e) {
            CellKind::Triangle => TYPE_TRIANGLE,
            CellKind::Quadrilateral => TYPE_QUAD,
        };
        let _ = write!(s, "{} {} 2 0 0", e + 1, ty);
        for &v in mesh.element(e) {
            let _ = write!(s, " {}", v + 1);
        }
        s.push('\n');
    }
    s.push_str("$EndElements\n");
    s
}

pub fn write_gmsh(mesh: &Mesh2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_gmsh_string(mesh)).map_err(|e| Error::io(path, e))
}
