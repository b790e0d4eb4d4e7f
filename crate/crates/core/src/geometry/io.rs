//! Plain-text point cloud formats.
//!
//! * XYZ: one `x y z` triple per line, whitespace separated, `#` starts a
//!   comment. An optional fourth integer column carries the point label
//!   (0 clean, 1 added, 2 perturbed).
//! * PLY: ASCII only. The `vertex` element must provide `x`, `y`, `z`; an
//!   optional integer `label` property is honoured, other properties and
//!   elements are skipped.
//!
//! Writers emit the shortest decimal form that reads back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Label, PointCloud, Vec3};
use crate::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(line, format!("invalid number `{tok}`")))
}

fn parse_label(tok: &str, line: usize) -> Result<Label> {
    let code = tok
        .parse::<f64>()
        .ok()
        .filter(|v| v.fract() == 0.0 && (0.0..=255.0).contains(v))
        .and_then(|v| Label::from_code(v as u8));
    code.ok_or_else(|| parse_err(line, format!("invalid label `{tok}`")))
}

fn build(points: Vec<Vec3>, labels: Vec<Label>, labelled: bool) -> Result<PointCloud> {
    if labelled {
        PointCloud::with_labels(points, labels)
    } else {
        PointCloud::new(points)
    }
}

pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut labelled: Option<bool> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let has_label = match toks.len() {
            3 => false,
            4 => true,
            n => return Err(parse_err(line_no, format!("expected 3 or 4 columns, found {n}"))),
        };
        if *labelled.get_or_insert(has_label) != has_label {
            return Err(parse_err(line_no, "inconsistent column count"));
        }
        points.push(Vec3::new(
            parse_f64(toks[0], line_no)?,
            parse_f64(toks[1], line_no)?,
            parse_f64(toks[2], line_no)?,
        ));
        if has_label {
            labels.push(parse_label(toks[3], line_no)?);
        }
    }
    build(points, labels, labelled.unwrap_or(false))
}

pub fn to_xyz_string(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 48);
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{:e} {:e} {:e}", p.x, p.y, p.z);
        if cloud.labels().is_some() {
            let _ = write!(out, " {}", cloud.label(i).code());
        }
        out.push('\n');
    }
    out
}

pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_err(1, "missing `ply` magic")),
    }
    // (name, count, property names)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut header_done = false;
    for (n, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(parse_err(n, format!("unsupported format `{other}`")));
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_err(n, format!("invalid element count `{count}`")))?;
                elements.push((name.to_string(), count, Vec::new()));
            }
            ["property", "list", ..] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(n, "property before element"))?;
                el.2.push(String::from("<list>"));
            }
            ["property", _ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(n, "property before element"))?;
                el.2.push(name.to_string());
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(parse_err(n, format!("unrecognised header line `{line}`"))),
        }
    }
    if !header_done {
        return Err(parse_err(0, "missing end_header"));
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut labelled = false;
    for (name, count, props) in &elements {
        if name != "vertex" {
            for _ in 0..*count {
                lines.next().ok_or_else(|| parse_err(0, "truncated body"))?;
            }
            continue;
        }
        if props.iter().any(|p| p == "<list>") {
            return Err(parse_err(0, "list properties on vertex are not supported"));
        }
        let find = |key: &str| props.iter().position(|p| p == key);
        let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(parse_err(0, "vertex element lacks x, y or z")),
        };
        let il = find("label");
        labelled = il.is_some();
        for _ in 0..*count {
            let (n, line) = lines.next().ok_or_else(|| parse_err(0, "truncated body"))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != props.len() {
                return Err(parse_err(
                    n,
                    format!("expected {} values, found {}", props.len(), toks.len()),
                ));
            }
            points.push(Vec3::new(
                parse_f64(toks[ix], n)?,
                parse_f64(toks[iy], n)?,
                parse_f64(toks[iz], n)?,
            ));
            if let Some(il) = il {
                labels.push(parse_label(toks[il], n)?);
            }
        }
    }
    build(points, labels, labelled)
}

pub fn to_ply_string(cloud: &PointCloud) -> String {
    let labelled = cloud.labels().is_some();
    let mut out = String::with_capacity(128 + cloud.len() * 48);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if labelled {
        out.push_str("property uchar label\n");
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{:e} {:e} {:e}", p.x, p.y, p.z);
        if labelled {
            let _ = write!(out, " {}", cloud.label(i).code());
        }
        out.push('\n');
    }
    out
}

fn is_ply(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"))
}

/// Reads a cloud, choosing the format from the file extension (`.ply` or XYZ).
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    if is_ply(path) {
        parse_ply(&text)
    } else {
        parse_xyz(&text)
    }
}

/// Writes a cloud, choosing the format from the file extension (`.ply` or XYZ).
pub fn write_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    let text = if is_ply(path) {
        to_ply_string(cloud)
    } else {
        to_xyz_string(cloud)
    };
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_with_comments() {
        let cloud = parse_xyz("# header\n1 2 3\n\n  4.5 -6 7e-1 # trailing\n").unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.points()[1], Vec3::new(4.5, -6.0, 0.7));
        assert!(cloud.labels().is_none());
    }

    #[test]
    fn xyz_errors_carry_line() {
        match parse_xyz("1 2 3\n1 two 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_xyz("1 2\n").is_err());
        assert!(parse_xyz("1 2 3\n1 2 3 0\n").is_err());
    }

    #[test]
    fn labelled_round_trip() {
        let cloud = PointCloud::with_labels(
            vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(-1.0, 1e-7, 2.5)],
            vec![Label::Clean, Label::Added],
        )
        .unwrap();
        for text in [to_xyz_string(&cloud), to_ply_string(&cloud)] {
            let back = if text.starts_with("ply") {
                parse_ply(&text).unwrap()
            } else {
                parse_xyz(&text).unwrap()
            };
            assert_eq!(back.labels(), cloud.labels());
            assert_eq!(back.points(), cloud.points());
        }
    }

    #[test]
    fn ply_with_extra_properties_and_faces() {
        let text = "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\nproperty float nx\n\
                    property float x\nproperty float y\nproperty float z\nelement face 1\n\
                    property list uchar int vertex_indices\nend_header\n9 1 2 3\n9 4 5 6\n3 0 1 1\n";
        let cloud = parse_ply(text).unwrap();
        assert_eq!(cloud.points(), &[Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn ply_rejects_binary() {
        assert!(parse_ply("ply\nformat binary_little_endian 1.0\nend_header\n").is_err());
    }
}
