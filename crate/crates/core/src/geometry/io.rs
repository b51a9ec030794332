//! ASCII OFF and PLY readers and writers.
//!
//! Coordinates are written with Rust's shortest round-trip float formatting,
//! so a save/load cycle reproduces every vertex exactly. Polygons with more
//! than three corners are fan-triangulated on load. A file without faces
//! loads as a [`PointCloud`].

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{PointCloud, Shape, TriangleMesh, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeFormat {
    Off,
    Ply,
}

impl ShapeFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("off") => Ok(ShapeFormat::Off),
            Some("ply") => Ok(ShapeFormat::Ply),
            _ => Err(Error::InvalidArgument(format!(
                "cannot infer shape format from {}; expected .off or .ply",
                path.display()
            ))),
        }
    }
}

impl FromStr for ShapeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(ShapeFormat::Off),
            "ply" => Ok(ShapeFormat::Ply),
            other => Err(Error::InvalidArgument(format!("unknown shape format '{other}'"))),
        }
    }
}

pub fn load_shape(path: &Path, format: ShapeFormat) -> Result<Shape> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("shape")
        .to_string();
    let parsed = match format {
        ShapeFormat::Off => parse_off(&text, &id),
        ShapeFormat::Ply => parse_ply(&text, &id),
    };
    parsed.map_err(|e| e.context(path.display().to_string()))
}

pub fn save_shape(shape: &Shape, path: &Path, format: ShapeFormat) -> Result<()> {
    let text = match format {
        ShapeFormat::Off => write_off(shape),
        ShapeFormat::Ply => write_ply(shape),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-empty, comment-stripped lines paired with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_num<T: FromStr>(token: &str, line: usize, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {what} from '{token}'")))
}

fn parse_coord(token: &str, line: usize) -> Result<f64> {
    let v: f64 = parse_num(token, line, "coordinate")?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite coordinate '{token}'")));
    }
    Ok(v)
}

fn push_polygon(
    faces: &mut Vec<[usize; 3]>,
    indices: &[usize],
    n_vertices: usize,
    line: usize,
) -> Result<()> {
    if indices.len() < 3 {
        return Err(Error::parse(
            line,
            format!("face has {} corners, need at least 3", indices.len()),
        ));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= n_vertices) {
        return Err(Error::parse(
            line,
            format!("face index {bad} out of range for {n_vertices} vertices"),
        ));
    }
    for w in 1..indices.len() - 1 {
        let f = [indices[0], indices[w], indices[w + 1]];
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            return Err(Error::parse(line, format!("degenerate face {f:?}")));
        }
        faces.push(f);
    }
    Ok(())
}

fn finish(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, id: &str) -> Result<Shape> {
    if faces.is_empty() {
        Ok(Shape::Cloud(PointCloud::new(vertices, id)?))
    } else {
        Ok(Shape::Mesh(TriangleMesh::new(vertices, faces, id)?))
    }
}

fn parse_off(text: &str, id: &str) -> Result<Shape> {
    let mut lines = content_lines(text);
    let (mut line_no, mut line) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty OFF file"))?;
    if let Some(rest) = line.strip_prefix("OFF") {
        let rest = rest.trim();
        if rest.is_empty() {
            (line_no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(line_no, "missing OFF counts line"))?;
        } else {
            line = rest;
        }
    }
    let counts: Vec<usize> = line
        .split_whitespace()
        .map(|t| parse_num(t, line_no, "element count"))
        .collect::<Result<_>>()?;
    if counts.len() < 2 {
        return Err(Error::parse(
            line_no,
            "OFF header needs vertex and face counts",
        ));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse(line_no, format!("expected {nv} vertices")))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(Error::parse(ln, "vertex needs 3 coordinates"));
        }
        vertices.push(Vec3::new(
            parse_coord(t[0], ln)?,
            parse_coord(t[1], ln)?,
            parse_coord(t[2], ln)?,
        ));
        line_no = ln;
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse(line_no, format!("expected {nf} faces")))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        let count: usize = parse_num(t[0], ln, "face corner count")?;
        if t.len() < count + 1 {
            return Err(Error::parse(ln, format!("face lists fewer than {count} indices")));
        }
        let idx: Vec<usize> = t[1..=count]
            .iter()
            .map(|s| parse_num(s, ln, "face index"))
            .collect::<Result<_>>()?;
        push_polygon(&mut faces, &idx, nv, ln)?;
        line_no = ln;
    }
    finish(vertices, faces, id)
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    /// Property names in declaration order; list properties are flagged.
    properties: Vec<(String, bool)>,
}

fn parse_ply(text: &str, id: &str) -> Result<Shape> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        Some((ln, _)) => return Err(Error::parse(ln, "missing 'ply' magic")),
        None => return Err(Error::parse(1, "empty PLY file")),
    }

    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_end = None;
    for (ln, l) in lines.by_ref() {
        let t: Vec<&str> = l.split_whitespace().collect();
        match t.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                if t.get(1) != Some(&"ascii") {
                    return Err(Error::parse(
                        ln,
                        format!("only ascii PLY is supported, got '{l}'"),
                    ));
                }
            }
            Some("element") => {
                if t.len() != 3 {
                    return Err(Error::parse(ln, "malformed element line"));
                }
                elements.push(PlyElement {
                    name: t[1].to_string(),
                    count: parse_num(t[2], ln, "element count")?,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(ln, "property before any element"))?;
                let is_list = t.get(1) == Some(&"list");
                let name = t
                    .last()
                    .filter(|_| t.len() >= if is_list { 5 } else { 3 })
                    .ok_or_else(|| Error::parse(ln, "malformed property line"))?;
                el.properties.push((name.to_string(), is_list));
            }
            Some("end_header") => {
                header_end = Some(ln);
                break;
            }
            Some(other) => {
                return Err(Error::parse(ln, format!("unexpected header keyword '{other}'")))
            }
        }
    }
    let mut line_no =
        header_end.ok_or_else(|| Error::parse(1, "PLY header has no end_header"))?;

    let mut body = lines.filter(|(_, l)| !l.is_empty());
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        let pos = |name: &str| el.properties.iter().position(|(p, _)| p == name);
        for _ in 0..el.count {
            let (ln, l) = body.next().ok_or_else(|| {
                Error::parse(line_no, format!("expected {} '{}' records", el.count, el.name))
            })?;
            line_no = ln;
            let t: Vec<&str> = l.split_whitespace().collect();
            match el.name.as_str() {
                "vertex" => {
                    let (Some(x), Some(y), Some(z)) = (pos("x"), pos("y"), pos("z")) else {
                        return Err(Error::parse(ln, "vertex element lacks x/y/z properties"));
                    };
                    if el.properties.iter().any(|(_, list)| *list) {
                        return Err(Error::parse(ln, "list properties on vertices are not supported"));
                    }
                    if t.len() < el.properties.len() {
                        return Err(Error::parse(ln, "vertex record is too short"));
                    }
                    vertices.push(Vec3::new(
                        parse_coord(t[x], ln)?,
                        parse_coord(t[y], ln)?,
                        parse_coord(t[z], ln)?,
                    ));
                }
                "face" => {
                    if el.properties.len() != 1 || !el.properties[0].1 {
                        return Err(Error::parse(
                            ln,
                            "face element must have exactly one list property",
                        ));
                    }
                    let n_vertices = vertices.len();
                    let count: usize = parse_num(
                        t.first().copied().unwrap_or(""),
                        ln,
                        "face corner count",
                    )?;
                    if t.len() < count + 1 {
                        return Err(Error::parse(ln, "face record is too short"));
                    }
                    let idx: Vec<usize> = t[1..=count]
                        .iter()
                        .map(|s| parse_num(s, ln, "face index"))
                        .collect::<Result<_>>()?;
                    push_polygon(&mut faces, &idx, n_vertices, ln)?;
                }
                _ => {}
            }
        }
    }
    finish(vertices, faces, id)
}

fn write_off(shape: &Shape) -> String {
    let (verts, faces): (&[Vec3], &[[usize; 3]]) = match shape {
        Shape::Mesh(m) => (m.vertices(), m.faces()),
        Shape::Cloud(c) => (c.points(), &[]),
    };
    let mut out = format!("OFF\n{} {} 0\n", verts.len(), faces.len());
    for v in verts {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for f in faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}

fn write_ply(shape: &Shape) -> String {
    let (verts, faces): (&[Vec3], &[[usize; 3]]) = match shape {
        Shape::Mesh(m) => (m.vertices(), m.faces()),
        Shape::Cloud(c) => (c.points(), &[]),
    };
    let mut out = String::from("ply\nformat ascii 1.0\n");
    let _ = write!(
        out,
        "element vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        verts.len()
    );
    if !faces.is_empty() {
        let _ = write!(
            out,
            "element face {}\nproperty list uchar int vertex_indices\n",
            faces.len()
        );
    }
    out.push_str("end_header\n");
    for v in verts {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for f in faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_off_mesh() {
        let shape = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n", "t").unwrap();
        let mesh = shape.as_mesh().unwrap();
        assert_eq!(mesh.n_vertices(), 3);
        assert_eq!(mesh.n_faces(), 1);
    }

    #[test]
    fn off_without_magic_and_with_comments() {
        let text = "# tri\n3 1 0\n0 0 0 # a\n1 0 0\n\n0 1 0\n3 0 1 2\n";
        assert_eq!(parse_off(text, "t").unwrap().as_mesh().unwrap().n_faces(), 1);
    }

    #[test]
    fn off_index_out_of_range_names_line() {
        let err = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n", "t").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 6);
                assert!(message.contains("out of range"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn off_non_finite_coordinate() {
        let err = parse_off("OFF\n3 1 0\n0 0 0\n1 nan 0\n0 1 0\n3 0 1 2\n", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err:?}");
    }

    #[test]
    fn off_malformed_header() {
        assert!(matches!(
            parse_off("OFF\nthree 1 0\n", "t"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn zero_faces_is_a_cloud() {
        let shape = parse_off("OFF\n2 0 0\n0 0 0\n1 2 3\n", "c").unwrap();
        assert!(matches!(shape, Shape::Cloud(ref c) if c.n_points() == 2));
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let shape = parse_off(text, "q").unwrap();
        assert_eq!(shape.as_mesh().unwrap().faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn ply_with_extra_properties() {
        let text = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 3\nproperty float x\n\
                    property float y\nproperty float z\nproperty uchar red\n\
                    element face 1\nproperty list uchar int vertex_index\nend_header\n\
                    0 0 0 255\n1 0 0 0\n0 1 0 3\n3 0 1 2\n";
        let shape = parse_ply(text, "p").unwrap();
        let mesh = shape.as_mesh().unwrap();
        assert_eq!(mesh.vertices()[1], Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(mesh.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn binary_ply_is_rejected() {
        let text = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(matches!(parse_ply(text, "p"), Err(Error::Parse { line: 2, .. })));
    }
}
