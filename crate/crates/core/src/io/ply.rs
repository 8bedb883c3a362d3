//! PLY reader (ascii and binary, either endianness) and a binary
//! little-endian writer for `x y z` float32 plus an optional `label` uchar.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Bit set in the label byte for edge points.
pub const LABEL_EDGE: u8 = 1;
/// Bit set in the label byte for corner points.
pub const LABEL_CORNER: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct PlyCloud {
    pub points: Vec<Point3>,
    pub labels: Option<Vec<u8>>,
}

pub fn write_ply(mut w: impl Write, points: &[Point3], labels: Option<&[u8]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != points.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                actual: l.len(),
            });
        }
    }
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        points.len()
    );
    if labels.is_some() {
        header.push_str("property uchar label\n");
    }
    header.push_str("end_header\n");
    let record = if labels.is_some() { 13 } else { 12 };
    let mut buf = Vec::with_capacity(header.len() + record * points.len());
    buf.extend_from_slice(header.as_bytes());
    for (i, p) in points.iter().enumerate() {
        for c in [p.x, p.y, p.z] {
            let f = c as f32;
            if !f.is_finite() {
                return Err(Error::InvalidInput(format!("vertex {i} does not fit in f32")));
            }
            buf.extend_from_slice(&f.to_le_bytes());
        }
        if let Some(l) = labels {
            buf.push(l[i]);
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], fmt: Format) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let mut a = [0u8; $n];
                a.copy_from_slice(&b[..$n]);
                (if fmt == Format::Big {
                    <$t>::from_be_bytes(a)
                } else {
                    <$t>::from_le_bytes(a)
                }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => num!(i16, 2),
            Scalar::U16 => num!(u16, 2),
            Scalar::I32 => num!(i32, 4),
            Scalar::U32 => num!(u32, 4),
            Scalar::F32 => num!(f32, 4),
            Scalar::F64 => num!(f64, 8),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn perr(msg: impl Into<String>) -> Error {
    Error::Parse(format!("ply: {}", msg.into()))
}

/// Parses a PLY file and returns the `vertex` element's `x y z` (and
/// `label`, when present).
pub fn read_ply(bytes: &[u8]) -> Result<PlyCloud> {
    const END: &[u8] = b"end_header";
    let header_end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| perr("missing end_header"))?;
    let mut body_start = header_end + END.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) != Some(&b'\n') {
        return Err(perr("end_header must end its line"));
    }
    body_start += 1;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| perr("header is not utf-8"))?;
    let mut lines = header.lines().map(str::trim);
    if lines.next() != Some("ply") {
        return Err(perr("missing magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::Little,
                    "binary_big_endian" => Format::Big,
                    _ => return Err(perr(format!("unknown format {f}"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| perr("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, _name] => {
                let el = elements.last_mut().ok_or_else(|| perr("property before element"))?;
                el.props.push(Property::List {
                    count: Scalar::parse(c).ok_or_else(|| perr("bad list count type"))?,
                    item: Scalar::parse(i).ok_or_else(|| perr("bad list item type"))?,
                });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| perr("property before element"))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty).ok_or_else(|| perr(format!("bad type {ty}")))?,
                });
            }
            _ => return Err(perr(format!("unrecognised header line '{line}'"))),
        }
    }
    let format = format.ok_or_else(|| perr("missing format line"))?;
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| perr("no vertex element"))?;
    let find = |name: &str| {
        elements[vertex_pos].props.iter().position(
            |p| matches!(p, Property::Scalar { name: n, .. } if n == name),
        )
    };
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(perr("vertex element lacks x/y/z")),
    };
    let il = find("label");

    let body = &bytes[body_start..];
    let mut reader: Box<dyn RecordReader> = match format {
        Format::Ascii => Box::new(AsciiReader::new(body)?),
        _ => Box::new(BinaryReader {
            body,
            pos: 0,
            fmt: format,
        }),
    };
    let mut points = Vec::new();
    let mut labels = il.map(|_| Vec::new());
    for (ei, el) in elements.iter().enumerate() {
        if ei > vertex_pos {
            break;
        }
        if el.props.is_empty() {
            continue;
        }
        // Each record takes at least one byte, which bounds any allocation.
        if el.count > body.len() {
            return Err(perr("element count exceeds file size"));
        }
        if ei == vertex_pos {
            points.reserve(el.count);
        }
        for _ in 0..el.count {
            let mut values = Vec::with_capacity(el.props.len());
            for prop in &el.props {
                match *prop {
                    Property::Scalar { ty, .. } => values.push(reader.scalar(ty)?),
                    Property::List { count, item } => {
                        let n = reader.scalar(count)?;
                        if !(n >= 0.0 && n <= body.len() as f64) {
                            return Err(perr("bad list length"));
                        }
                        for _ in 0..n as usize {
                            reader.scalar(item)?;
                        }
                        values.push(n);
                    }
                }
            }
            if ei == vertex_pos {
                let p = Point3::new(values[ix], values[iy], values[iz]);
                if !crate::geometry::is_finite_point(&p) {
                    return Err(perr("non-finite vertex"));
                }
                points.push(p);
                if let (Some(l), Some(i)) = (labels.as_mut(), il) {
                    let v = values[i];
                    if !(0.0..=255.0).contains(&v) {
                        return Err(perr("label out of range"));
                    }
                    l.push(v as u8);
                }
            }
        }
    }
    Ok(PlyCloud { points, labels })
}

trait RecordReader {
    fn scalar(&mut self, ty: Scalar) -> Result<f64>;
}

struct BinaryReader<'a> {
    body: &'a [u8],
    pos: usize,
    fmt: Format,
}

impl RecordReader for BinaryReader<'_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let end = self.pos + ty.size();
        let b = self.body.get(self.pos..end).ok_or_else(|| perr("truncated body"))?;
        self.pos = end;
        Ok(ty.decode(b, self.fmt))
    }
}

struct AsciiReader<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl<'a> AsciiReader<'a> {
    fn new(body: &'a [u8]) -> Result<Self> {
        let text = std::str::from_utf8(body).map_err(|_| perr("ascii body is not utf-8"))?;
        Ok(Self {
            tokens: text.split_ascii_whitespace(),
        })
    }
}

impl RecordReader for AsciiReader<'_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let tok = self.tokens.next().ok_or_else(|| perr("truncated body"))?;
        let v: f64 = tok.parse().map_err(|_| perr(format!("bad number '{tok}'")))?;
        match ty {
            Scalar::F32 | Scalar::F64 => Ok(v),
            _ if v.fract() == 0.0 => Ok(v),
            _ => Err(perr("non-integer value for integer property")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_with_labels() {
        let pts = vec![Point3::new(0.5, -1.25, 3.0), Point3::new(1e-3, 2.0, -7.5)];
        let labels = vec![LABEL_EDGE, LABEL_EDGE | LABEL_CORNER];
        let mut buf = Vec::new();
        write_ply(&mut buf, &pts, Some(&labels)).unwrap();
        let back = read_ply(&buf).unwrap();
        assert_eq!(back.labels.unwrap(), labels);
        for (a, b) in pts.iter().zip(&back.points) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn ascii_with_faces_and_extra_props() {
        let text = "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 1\n1 0 0 1\n0 1 0 1\n3 0 1 2\n";
        let c = read_ply(text.as_bytes()).unwrap();
        assert_eq!(c.points.len(), 3);
        assert_eq!(c.points[1], Point3::new(1.0, 0.0, 0.0));
        assert!(c.labels.is_none());
    }

    #[test]
    fn big_endian_doubles() {
        let mut buf = b"ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nend_header\n".to_vec();
        for v in [1.5f64, -2.0, 0.25] {
            buf.extend_from_slice(&v.to_be_bytes());
        }
        let c = read_ply(&buf).unwrap();
        assert_eq!(c.points, vec![Point3::new(1.5, -2.0, 0.25)]);
    }

    #[test]
    fn truncated_and_malformed_inputs_fail() {
        let mut buf = Vec::new();
        write_ply(&mut buf, &[Point3::new(1., 2., 3.)], None).unwrap();
        assert!(read_ply(&buf[..buf.len() - 1]).is_err());
        assert!(read_ply(b"ply\nformat ascii 1.0\nelement vertex 99999999999\nproperty float x\nproperty float y\nproperty float z\nend_header\n").is_err());
        assert!(read_ply(b"not a ply").is_err());
        assert!(read_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n").is_err());
    }

    #[test]
    fn coordinates_beyond_f32_are_refused() {
        let mut buf = Vec::new();
        let err = write_ply(&mut buf, &[Point3::new(1e300, 0.0, 0.0)], None).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }
}
