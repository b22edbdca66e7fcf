//! ASCII PLY.
//!
//! Reads the `vertex` element's `x`, `y`, `z` (any numeric type), optional
//! `red`/`green`/`blue` (uchar scaled to `[0, 1]`, float types taken as-is)
//! and an optional integer `part_label`. Other elements are skipped. Binary
//! PLY is rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Attributes, PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    Int,
    UChar,
    Float,
}

fn scalar_type(name: &str) -> Option<Scalar> {
    Some(match name {
        "uchar" | "uint8" => Scalar::UChar,
        "char" | "int8" | "short" | "int16" | "ushort" | "uint16" | "int" | "int32" | "uint" | "uint32" => {
            Scalar::Int
        }
        "float" | "float32" | "double" | "float64" => Scalar::Float,
        _ => return None,
    })
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, kind: Scalar },
    List,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::format(path, "file is not ASCII text (binary PLY is not supported)"))?;
    parse_ply(&text, path)
}

/// Parses PLY text; `origin` only labels error messages.
pub fn parse_ply(text: &str, origin: &Path) -> Result<PointCloud> {
    let err = |line: usize, msg: String| match line {
        0 => Error::format(origin, msg),
        _ => Error::format(origin, format!("line {line}: {msg}")),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(err(1, "missing 'ply' magic".into())),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let Some((no, line)) = lines.next() else {
            return Err(err(0, "unexpected end of file inside header".into()));
        };
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                match words.next() {
                    Some("ascii") => {}
                    Some(other) => return Err(err(no, format!("unsupported format '{other}' (only ascii)"))),
                    None => return Err(err(no, "format line without a format".into())),
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let (Some(name), Some(count)) = (words.next(), words.next()) else {
                    return Err(err(no, "element needs a name and a count".into()));
                };
                let count = count
                    .parse()
                    .map_err(|_| err(no, format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let Some(element) = elements.last_mut() else {
                    return Err(err(no, "property before any element".into()));
                };
                let prop = match (words.next(), words.next(), words.next(), words.next()) {
                    (Some("list"), Some(_), Some(_), Some(_)) => Property::List,
                    (Some(ty), Some(name), None, None) => Property::Scalar {
                        name: name.to_string(),
                        kind: scalar_type(ty).ok_or_else(|| err(no, format!("unknown property type '{ty}'")))?,
                    },
                    _ => return Err(err(no, format!("malformed property line '{line}'"))),
                };
                element.properties.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(err(no, format!("unexpected header keyword '{other}'"))),
        }
    }
    if !saw_format {
        return Err(err(0, "header has no format line".into()));
    }

    let mut cloud = None;
    for element in &elements {
        if element.name != "vertex" {
            for _ in 0..element.count {
                if lines.next().is_none() {
                    return Err(err(0, format!("file ends inside element '{}'", element.name)));
                }
            }
            continue;
        }
        let column = |name: &str| {
            element.properties.iter().position(|p| matches!(p, Property::Scalar { name: n, .. } if n == name))
        };
        if element.properties.iter().any(|p| matches!(p, Property::List)) {
            return Err(err(0, "list properties on vertices are not supported".into()));
        }
        let xyz = match (column("x"), column("y"), column("z")) {
            (Some(x), Some(y), Some(z)) => [x, y, z],
            _ => return Err(err(0, "vertex element lacks x/y/z properties".into())),
        };
        let rgb = match (column("red"), column("green"), column("blue")) {
            (Some(r), Some(g), Some(b)) => Some([r, g, b]),
            _ => None,
        };
        let label_col = column("part_label");
        let kinds: Vec<Scalar> = element
            .properties
            .iter()
            .map(|p| match p {
                Property::Scalar { kind, .. } => *kind,
                Property::List => Scalar::Float,
            })
            .collect();

        let mut positions = Vec::with_capacity(element.count);
        let mut colors = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..element.count {
            let Some((no, line)) = lines.next() else {
                return Err(err(0, format!("expected {} vertices, file ended early", element.count)));
            };
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|w| w.parse::<f64>().map_err(|_| err(no, format!("bad number '{w}'"))))
                .collect::<Result<_>>()?;
            if values.len() != element.properties.len() {
                return Err(err(
                    no,
                    format!("expected {} values, found {}", element.properties.len(), values.len()),
                ));
            }
            let p = Vec3::new(values[xyz[0]], values[xyz[1]], values[xyz[2]]);
            if !p.iter().all(|c| c.is_finite()) {
                return Err(err(no, "non-finite coordinate".into()));
            }
            positions.push(p);
            if let Some(rgb) = rgb {
                for c in rgb {
                    colors.push(if kinds[c] == Scalar::UChar { values[c] / 255.0 } else { values[c] });
                }
            }
            if let Some(l) = label_col {
                let v = values[l];
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(err(no, format!("part_label must be a non-negative integer, got {v}")));
                }
                labels.push(v as u32);
            }
        }
        let mut c = PointCloud::new(positions).map_err(|e| err(0, e.to_string()))?;
        if rgb.is_some() {
            c = c.with_attributes(Attributes::new(3, colors).map_err(|e| err(0, e.to_string()))?)?;
        }
        if label_col.is_some() {
            c = c.with_part_labels(labels)?;
        }
        cloud = Some(c);
    }
    cloud.ok_or_else(|| err(0, "no vertex element".into()))
}

/// Serializes a cloud as ASCII PLY. Coordinates are written as `double` in
/// shortest round-trip form, so reading them back is exact; colors are
/// quantized to `uchar`.
pub fn to_ply_string(cloud: &PointCloud) -> Result<String> {
    if let Some(a) = cloud.attributes() {
        if a.dim() != 3 {
            return Err(Error::param(format!(
                "PLY output supports 3-channel (RGB) attributes only, got {}",
                a.dim()
            )));
        }
    }
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\ncomment pointmorph\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.attributes().is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if cloud.part_labels().is_some() {
        out.push_str("property int part_label\n");
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.positions().iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(a) = cloud.attributes() {
            for v in a.row(i) {
                let _ = write!(out, " {}", (v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        if let Some(labels) = cloud.part_labels() {
            let _ = write!(out, " {}", labels[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_ply_string(cloud)?).map_err(|e| Error::io(path, e))
}
