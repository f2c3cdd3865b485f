use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Velocity,
    Pressure,
}

impl FieldKind {
    fn as_str(self) -> &'static str {
        match self {
            FieldKind::Velocity => "velocity",
            FieldKind::Pressure => "pressure",
        }
    }
}

/// Identifies the space a coefficient vector belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceTag {
    pub kind: FieldKind,
    pub degree: usize,
    pub n_dofs: usize,
    pub mesh_checksum: String,
}

/// Coefficient vector of a discrete field at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCoefficients {
    pub tag: SpaceTag,
    pub coeffs: Vec<f64>,
    pub time: f64,
}

impl FieldCoefficients {
    pub fn new(tag: SpaceTag, coeffs: Vec<f64>, time: f64) -> Self {
        assert_eq!(tag.n_dofs, coeffs.len(), "coefficient count must match the space");
        FieldCoefficients { tag, coeffs, time }
    }

    /// CSV layout: three `# key,value` header lines, a column header, then
    /// one `index,value` row per coefficient.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# field,{},degree,{}", self.tag.kind.as_str(), self.tag.degree);
        let _ = writeln!(s, "# mesh_checksum,{}", self.tag.mesh_checksum);
        let _ = writeln!(s, "# time,{:e}", self.time);
        s.push_str("index,value\n");
        for (i, c) in self.coeffs.iter().enumerate() {
            let _ = writeln!(s, "{i},{c:e}");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut kind = None;
        let mut degree = None;
        let mut checksum = None;
        let mut time = None;
        let mut coeffs = Vec::new();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix("# ") {
                let parts: Vec<&str> = meta.split(',').collect();
                match parts.as_slice() {
                    ["field", k, "degree", d] => {
                        kind = Some(match *k {
                            "velocity" => FieldKind::Velocity,
                            "pressure" => FieldKind::Pressure,
                            other => return Err(perr(ln, format!("unknown field kind `{other}`"))),
                        });
                        degree = Some(d.parse::<usize>().map_err(|_| perr(ln, format!("invalid degree `{d}`")))?);
                    }
                    ["mesh_checksum", c] => checksum = Some(c.to_string()),
                    ["time", t] => time = Some(t.parse::<f64>().map_err(|_| perr(ln, format!("invalid time `{t}`")))?),
                    _ => return Err(perr(ln, format!("unrecognized header `{line}`"))),
                }
                continue;
            }
            if !header_seen {
                if line != "index,value" {
                    return Err(perr(ln, "expected column header `index,value`".into()));
                }
                header_seen = true;
                continue;
            }
            let (idx, val) = line
                .split_once(',')
                .ok_or_else(|| perr(ln, "expected `index,value`".into()))?;
            let idx: usize = idx.parse().map_err(|_| perr(ln, format!("invalid index `{idx}`")))?;
            if idx != coeffs.len() {
                return Err(perr(ln, format!("index {idx} out of sequence")));
            }
            coeffs.push(val.parse::<f64>().map_err(|_| perr(ln, format!("invalid value `{val}`")))?);
        }
        let missing = |what: &str| perr(1, format!("missing `{what}` header"));
        let tag = SpaceTag {
            kind: kind.ok_or_else(|| missing("field"))?,
            degree: degree.ok_or_else(|| missing("field"))?,
            n_dofs: coeffs.len(),
            mesh_checksum: checksum.ok_or_else(|| missing("mesh_checksum"))?,
        };
        Ok(FieldCoefficients {
            tag,
            coeffs,
            time: time.ok_or_else(|| missing("time"))?,
        })
    }
}
