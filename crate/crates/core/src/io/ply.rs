//! Minimal PLY reader/writer for ASCII and binary little-endian vertex data.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, ScalarType::F32 | ScalarType::F64)
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: ScalarType },
    List { name: String, count: ScalarType, item: ScalarType },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    num_classes: Option<u32>,
    /// Number of header lines, including `end_header`.
    lines: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn read_header<R: BufRead>(reader: &mut R) -> Result<Header> {
    let mut line_no = 0usize;
    let mut buf = String::new();
    let mut next_line = |reader: &mut R, line_no: &mut usize| -> Result<Option<String>> {
        buf.clear();
        let n = reader
            .read_line(&mut buf)
            .map_err(|e| parse_err(*line_no + 1, format!("read failure: {e}")))?;
        if n == 0 {
            return Ok(None);
        }
        *line_no += 1;
        Ok(Some(buf.trim_end_matches(['\n', '\r']).to_string()))
    };

    match next_line(reader, &mut line_no)? {
        Some(l) if l.trim() == "ply" => {}
        _ => return Err(parse_err(1, "missing 'ply' magic")),
    }

    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut num_classes = None;
    loop {
        let Some(line) = next_line(reader, &mut line_no)? else {
            return Err(parse_err(line_no, "unexpected end of file before end_header"));
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first().copied() {
            None => continue,
            Some("end_header") => break,
            Some("comment") => {
                if tokens.get(1) == Some(&"num_classes") {
                    let c = tokens
                        .get(2)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(line_no, "bad num_classes comment"))?;
                    num_classes = Some(c);
                }
            }
            Some("obj_info") => {}
            Some("format") => {
                format = Some(match tokens.get(1).copied() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                    Some(other) => {
                        return Err(Error::Unsupported(format!("PLY format '{other}'")))
                    }
                    None => return Err(parse_err(line_no, "format line without a format")),
                });
            }
            Some("element") => {
                if tokens.len() != 3 {
                    return Err(parse_err(line_no, "expected 'element <name> <count>'"));
                }
                let count = tokens[2]
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad element count '{}'", tokens[2])))?;
                elements.push(Element {
                    name: tokens[1].to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before any element"))?;
                let ty = |name: &str| {
                    ScalarType::parse(name)
                        .ok_or_else(|| Error::Unsupported(format!("property type '{name}'")))
                };
                let prop = match tokens.as_slice() {
                    ["property", "list", count, item, name] => Property::List {
                        name: name.to_string(),
                        count: ty(count)?,
                        item: ty(item)?,
                    },
                    ["property", t, name] => Property::Scalar {
                        name: name.to_string(),
                        ty: ty(t)?,
                    },
                    _ => return Err(parse_err(line_no, "malformed property line")),
                };
                element.properties.push(prop);
            }
            Some(other) => {
                return Err(parse_err(line_no, format!("unknown header keyword '{other}'")))
            }
        }
    }
    let format = format.ok_or_else(|| parse_err(line_no, "header has no format line"))?;
    Ok(Header {
        format,
        elements,
        num_classes,
        lines: line_no,
    })
}

/// Where each recognised vertex channel sits among the vertex properties.
#[derive(Default)]
struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<[usize; 3]>,
    intensity: Option<usize>,
    label: Option<usize>,
}

fn vertex_layout(element: &Element) -> Result<VertexLayout> {
    let find = |names: &[&str]| {
        element
            .properties
            .iter()
            .position(|p| names.contains(&p.name()))
    };
    let scalar_ty = |i: usize| match &element.properties[i] {
        Property::Scalar { ty, .. } => Ok(*ty),
        Property::List { name, .. } => Err(Error::Unsupported(format!(
            "list property '{name}' on vertex element"
        ))),
    };
    let mut layout = VertexLayout::default();
    for (a, name) in ["x", "y", "z"].iter().enumerate() {
        layout.xyz[a] = find(&[name])
            .ok_or_else(|| Error::Unsupported(format!("vertex element lacks '{name}'")))?;
        scalar_ty(layout.xyz[a])?;
    }
    let rgb = [find(&["red"]), find(&["green"]), find(&["blue"])];
    if let [Some(r), Some(g), Some(b)] = rgb {
        for i in [r, g, b] {
            if scalar_ty(i)? != ScalarType::U8 {
                return Err(Error::Unsupported(format!(
                    "color property '{}' must be uchar",
                    element.properties[i].name()
                )));
            }
        }
        layout.rgb = Some([r, g, b]);
    }
    if let Some(i) = find(&["intensity"]) {
        scalar_ty(i)?;
        layout.intensity = Some(i);
    }
    if let Some(i) = find(&["label", "class"]) {
        if !scalar_ty(i)?.is_integer() {
            return Err(Error::Unsupported(format!(
                "label property '{}' must be an integer type",
                element.properties[i].name()
            )));
        }
        layout.label = Some(i);
    }
    Ok(layout)
}

struct CloudBuilder {
    layout: VertexLayout,
    positions: Vec<[f64; 3]>,
    colors: Vec<[f64; 3]>,
    intensity: Vec<f64>,
    labels: Vec<u32>,
}

impl CloudBuilder {
    fn new(layout: VertexLayout, n: usize) -> Self {
        CloudBuilder {
            positions: Vec::with_capacity(n),
            colors: Vec::with_capacity(if layout.rgb.is_some() { n } else { 0 }),
            intensity: Vec::new(),
            labels: Vec::new(),
            layout,
        }
    }

    fn push(&mut self, row: &[f64], line: usize) -> Result<()> {
        let l = &self.layout;
        self.positions
            .push([row[l.xyz[0]], row[l.xyz[1]], row[l.xyz[2]]]);
        if let Some([r, g, b]) = l.rgb {
            self.colors
                .push([row[r] / 255.0, row[g] / 255.0, row[b] / 255.0]);
        }
        if let Some(i) = l.intensity {
            self.intensity.push(row[i]);
        }
        if let Some(i) = l.label {
            let v = row[i];
            if v < 0.0 {
                return Err(parse_err(line, format!("negative label {v}")));
            }
            self.labels.push(v as u32);
        }
        Ok(())
    }

    fn finish(self, num_classes: Option<u32>) -> Result<PointCloud> {
        let has_labels = self.layout.label.is_some();
        let inferred = self.labels.iter().max().map_or(0, |&m| m + 1);
        let cloud = PointCloud {
            positions: self.positions,
            colors: self.layout.rgb.map(|_| self.colors),
            intensity: self.layout.intensity.map(|_| self.intensity),
            labels: has_labels.then_some(self.labels),
            num_classes: if has_labels {
                num_classes.unwrap_or(inferred).max(inferred)
            } else {
                0
            },
        };
        cloud.validate()?;
        Ok(cloud)
    }
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply_from(BufReader::new(file))
}

pub fn read_ply_from<R: BufRead>(mut reader: R) -> Result<PointCloud> {
    let header = read_header(&mut reader)?;
    let vertex_idx = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::invalid("PLY has no vertex element"))?;
    let vertex = &header.elements[vertex_idx];
    if vertex.count == 0 {
        return Err(Error::invalid("PLY vertex element is empty"));
    }
    let mut builder = CloudBuilder::new(vertex_layout(vertex)?, vertex.count);
    match header.format {
        PlyFormat::Ascii => read_ascii_body(&mut reader, &header, vertex_idx, &mut builder)?,
        PlyFormat::BinaryLittleEndian => {
            read_binary_body(&mut reader, &header, vertex_idx, &mut builder)?
        }
    }
    builder.finish(header.num_classes)
}

fn read_ascii_body<R: BufRead>(
    reader: &mut R,
    header: &Header,
    vertex_idx: usize,
    builder: &mut CloudBuilder,
) -> Result<()> {
    let mut line_no = header.lines;
    let mut lines = reader.lines();
    let mut row = Vec::new();
    for element in &header.elements[..=vertex_idx] {
        let is_vertex = element.name == "vertex";
        for _ in 0..element.count {
            let line = loop {
                line_no += 1;
                match lines.next() {
                    Some(Ok(l)) if l.trim().is_empty() => continue,
                    Some(Ok(l)) => break l,
                    Some(Err(e)) => return Err(parse_err(line_no, format!("read failure: {e}"))),
                    None => {
                        return Err(parse_err(
                            line_no,
                            format!("unexpected end of file in element '{}'", element.name),
                        ))
                    }
                }
            };
            if !is_vertex {
                continue;
            }
            row.clear();
            let mut tokens = line.split_whitespace();
            for prop in &element.properties {
                let tok = tokens.next().ok_or_else(|| {
                    parse_err(line_no, format!("missing value for '{}'", prop.name()))
                })?;
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad number '{tok}'")))?;
                row.push(v);
            }
            builder.push(&row, line_no)?;
        }
    }
    Ok(())
}

fn read_binary_body<R: Read>(
    reader: &mut R,
    header: &Header,
    vertex_idx: usize,
    builder: &mut CloudBuilder,
) -> Result<()> {
    let mut data = Vec::new();
    reader
        .read_to_end(&mut data)
        .map_err(|e| parse_err(header.lines, format!("read failure: {e}")))?;
    let truncated = || parse_err(header.lines, "binary body is truncated");
    let mut offset = 0usize;
    for element in &header.elements[..vertex_idx] {
        for _ in 0..element.count {
            for prop in &element.properties {
                match prop {
                    Property::Scalar { ty, .. } => offset += ty.size(),
                    Property::List { count, item, .. } => {
                        let bytes = data.get(offset..offset + count.size()).ok_or_else(truncated)?;
                        let n = count.decode_le(bytes) as usize;
                        offset += count.size() + n * item.size();
                    }
                }
            }
        }
    }
    let vertex = &header.elements[vertex_idx];
    let types: Vec<ScalarType> = vertex
        .properties
        .iter()
        .map(|p| match p {
            Property::Scalar { ty, .. } => *ty,
            Property::List { .. } => unreachable!("rejected by vertex_layout"),
        })
        .collect();
    let stride: usize = types.iter().map(|t| t.size()).sum();
    let body = data
        .get(offset..offset + stride * vertex.count)
        .ok_or_else(truncated)?;
    let mut row = vec![0.0; types.len()];
    for chunk in body.chunks_exact(stride) {
        let mut at = 0;
        for (slot, ty) in row.iter_mut().zip(&types) {
            *slot = ty.decode_le(&chunk[at..]);
            at += ty.size();
        }
        builder.push(&row, header.lines)?;
    }
    Ok(())
}

pub fn write_ply(path: impl AsRef<Path>, cloud: &PointCloud, format: PlyFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_ply_to(&mut w, cloud, format)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn color_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Positions and intensity are written as doubles so they survive a
/// round trip exactly; colors are quantized to 8 bits.
pub fn write_ply_to<W: Write>(w: &mut W, cloud: &PointCloud, format: PlyFormat) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    match format {
        PlyFormat::Ascii => writeln!(w, "format ascii 1.0")?,
        PlyFormat::BinaryLittleEndian => writeln!(w, "format binary_little_endian 1.0")?,
    }
    if cloud.labels.is_some() {
        writeln!(w, "comment num_classes {}", cloud.num_classes)?;
    }
    writeln!(w, "element vertex {}", cloud.len())?;
    for a in ["x", "y", "z"] {
        writeln!(w, "property double {a}")?;
    }
    if cloud.colors.is_some() {
        for c in ["red", "green", "blue"] {
            writeln!(w, "property uchar {c}")?;
        }
    }
    if cloud.intensity.is_some() {
        writeln!(w, "property double intensity")?;
    }
    if cloud.labels.is_some() {
        writeln!(w, "property uint label")?;
    }
    writeln!(w, "end_header")?;

    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        let rgb = cloud.colors.as_ref().map(|c| c[i].map(color_byte));
        let intensity = cloud.intensity.as_ref().map(|v| v[i]);
        let label = cloud.labels.as_ref().map(|l| l[i]);
        match format {
            PlyFormat::Ascii => {
                write!(w, "{} {} {}", p[0], p[1], p[2])?;
                if let Some([r, g, b]) = rgb {
                    write!(w, " {r} {g} {b}")?;
                }
                if let Some(v) = intensity {
                    write!(w, " {v}")?;
                }
                if let Some(l) = label {
                    write!(w, " {l}")?;
                }
                writeln!(w)?;
            }
            PlyFormat::BinaryLittleEndian => {
                for c in p {
                    w.write_all(&c.to_le_bytes())?;
                }
                if let Some(rgb) = rgb {
                    w.write_all(&rgb)?;
                }
                if let Some(v) = intensity {
                    w.write_all(&v.to_le_bytes())?;
                }
                if let Some(l) = label {
                    w.write_all(&l.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}
