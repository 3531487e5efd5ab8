//! Plain-text point set formats: XYZ, CSV and ASCII PLY.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::points::PointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Xyz,
    Csv,
    PlyAscii,
}

impl FileFormat {
    /// Infers the format from `.xyz`, `.csv` or `.ply` (case-insensitive).
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "xyz" | "txt" => Ok(FileFormat::Xyz),
            "csv" => Ok(FileFormat::Csv),
            "ply" => Ok(FileFormat::PlyAscii),
            _ => Err(Error::UnsupportedFormat(format!(
                "cannot infer format of {}",
                path.display()
            ))),
        }
    }

    /// `explicit` if given, else inferred from the extension.
    pub fn resolve(path: &Path, explicit: Option<FileFormat>) -> Result<Self> {
        explicit.map_or_else(|| Self::from_path(path), Ok)
    }
}

impl FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xyz" => Ok(FileFormat::Xyz),
            "csv" => Ok(FileFormat::Csv),
            "ply" => Ok(FileFormat::PlyAscii),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

pub fn read_points(path: impl AsRef<Path>, format: Option<FileFormat>) -> Result<PointSet> {
    let path = path.as_ref();
    let format = FileFormat::resolve(path, format)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| match format {
        FileFormat::PlyAscii => Error::UnsupportedFormat("binary PLY is not supported".into()),
        _ => Error::Parse {
            path: path.into(),
            line: 0,
            message: "file is not valid UTF-8".into(),
        },
    })?;
    parse_points(&text, format, path)
}

/// Parses already-loaded text. `path` is only used in error messages.
pub fn parse_points(text: &str, format: FileFormat, path: &Path) -> Result<PointSet> {
    match format {
        FileFormat::Xyz => parse_rows(text, path, |line| {
            let line = line.split('#').next().unwrap_or("");
            line.split_whitespace().map(str::to_owned).collect()
        }, false),
        FileFormat::Csv => parse_rows(text, path, |line| {
            if line.trim().is_empty() {
                Vec::new()
            } else {
                line.split(',').map(|f| f.trim().to_owned()).collect()
            }
        }, true),
        FileFormat::PlyAscii => parse_ply(text, path),
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        message: message.into(),
    }
}

fn parse_rows(
    text: &str,
    path: &Path,
    split: impl Fn(&str) -> Vec<String>,
    header_allowed: bool,
) -> Result<PointSet> {
    let mut dim = None;
    let mut coords = Vec::new();
    let mut first_row = true;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let fields = split(line);
        if fields.is_empty() {
            continue;
        }
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        if first_row && header_allowed && parsed.iter().any(Option::is_none) {
            first_row = false;
            continue;
        }
        first_row = false;
        let mut row = Vec::with_capacity(fields.len());
        for (field, value) in fields.iter().zip(parsed) {
            match value {
                Some(v) if v.is_finite() => row.push(v),
                _ => return Err(parse_error(path, lineno, format!("invalid number '{field}'"))),
            }
        }
        match dim {
            None => {
                if !(2..=3).contains(&row.len()) {
                    return Err(parse_error(
                        path,
                        lineno,
                        format!("expected 2 or 3 coordinates, found {}", row.len()),
                    ));
                }
                dim = Some(row.len());
            }
            Some(d) if d != row.len() => {
                return Err(Error::MixedDimensions {
                    path: path.into(),
                    line: lineno,
                    expected: d,
                    found: row.len(),
                })
            }
            Some(_) => {}
        }
        coords.extend(row);
    }
    let dim = dim.ok_or_else(|| parse_error(path, 0, "no points found"))?;
    PointSet::new(dim, coords)
}

struct PlyElement {
    name: String,
    count: usize,
    /// Name and whether it is a list property.
    properties: Vec<(String, bool)>,
}

fn parse_ply(text: &str, path: &Path) -> Result<PointSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_error(path, 1, "missing 'ply' magic line")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_done = false;
    for (lineno, line) in lines.by_ref() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["format", "ascii", _] => {}
            ["format", kind, ..] => {
                return Err(Error::UnsupportedFormat(format!("PLY format '{kind}' is not supported")))
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_error(path, lineno, format!("bad element count '{count}'")))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", _, _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_error(path, lineno, "property before element"))?;
                el.properties.push((name.to_string(), true));
            }
            ["property", _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_error(path, lineno, "property before element"))?;
                el.properties.push((name.to_string(), false));
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(parse_error(path, lineno, format!("unrecognized header line '{line}'"))),
        }
    }
    if !header_done {
        return Err(parse_error(path, 0, "missing end_header"));
    }

    let mut coords = Vec::new();
    let mut dim = 0;
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty());
    for el in &elements {
        let axes: Vec<Option<usize>> = ["x", "y", "z"]
            .iter()
            .map(|axis| el.properties.iter().position(|(n, _)| n == axis))
            .collect();
        let is_vertex = el.name == "vertex";
        if is_vertex {
            dim = match axes.as_slice() {
                [Some(_), Some(_), Some(_)] => 3,
                [Some(_), Some(_), None] => 2,
                _ => return Err(parse_error(path, 0, "vertex element lacks x/y properties")),
            };
            if el.properties[..].iter().any(|(_, list)| *list) {
                return Err(parse_error(path, 0, "list properties on vertices are not supported"));
            }
        }
        for _ in 0..el.count {
            let (lineno, line) = body
                .next()
                .ok_or_else(|| parse_error(path, 0, format!("unexpected end of {} data", el.name)))?;
            if !is_vertex {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != el.properties.len() {
                return Err(parse_error(
                    path,
                    lineno,
                    format!("expected {} values, found {}", el.properties.len(), fields.len()),
                ));
            }
            for pos in axes.iter().take(dim).flatten() {
                let v: f64 = fields[*pos]
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| parse_error(path, lineno, format!("invalid number '{}'", fields[*pos])))?;
                coords.push(v);
            }
        }
    }
    if dim == 0 {
        return Err(parse_error(path, 0, "no vertex element"));
    }
    PointSet::new(dim, coords)
}

/// Serializes with 17 significant digits, one point per line.
pub fn format_points(ps: &PointSet, format: FileFormat) -> Result<String> {
    let mut out = String::new();
    let sep = match format {
        FileFormat::Csv => ",",
        _ => " ",
    };
    match format {
        FileFormat::Xyz => {}
        FileFormat::Csv => {
            let names = ["x", "y", "z"];
            let header: Vec<String> = (0..ps.dim())
                .map(|k| names.get(k).map_or_else(|| format!("c{k}"), |n| n.to_string()))
                .collect();
            out.push_str(&header.join(","));
            out.push('\n');
        }
        FileFormat::PlyAscii => {
            if ps.dim() != 3 {
                return Err(Error::UnsupportedDimension {
                    dim: ps.dim(),
                    format: "PLY",
                });
            }
            let _ = write!(
                out,
                "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
                ps.len()
            );
        }
    }
    for p in ps.iter() {
        for (k, v) in p.iter().enumerate() {
            if k > 0 {
                out.push_str(sep);
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_points(ps: &PointSet, path: impl AsRef<Path>, format: Option<FileFormat>) -> Result<()> {
    let path = path.as_ref();
    let text = format_points(ps, FileFormat::resolve(path, format)?)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads `i j` index pairs, one per line; `#` comments and blank lines are
/// skipped.
pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split([' ', '\t', ',']).filter(|f| !f.is_empty()).collect();
        match fields.as_slice() {
            [] => {}
            [a, b] => match (a.parse(), b.parse()) {
                (Ok(a), Ok(b)) => pairs.push((a, b)),
                _ => return Err(parse_error(path, idx + 1, format!("invalid index pair '{line}'"))),
            },
            _ => return Err(parse_error(path, idx + 1, "expected two indices")),
        }
    }
    Ok(pairs)
}

pub fn write_pairs(pairs: &[(usize, usize)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (a, b) in pairs {
        let _ = writeln!(out, "{a} {b}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
