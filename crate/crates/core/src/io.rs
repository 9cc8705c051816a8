//! File formats: point clouds, images, diagrams and feature vectors.
//!
//! Data goes to headered or header-less CSV, metadata to JSON. Floats are
//! written in shortest round-trip form so outputs are byte-reproducible.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoding::FeatureVector;
use crate::error::{Error, Result};
use crate::persistence::{Diagram, Grid, InfinitePolicy, PointCloud};

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

fn reader(input: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input)
}

/// Numeric rows of a CSV file. A first row that does not parse as numbers is
/// treated as a header and returned separately.
type Rows = Vec<Vec<f64>>;

fn numeric_rows(input: impl Read, source: &str) -> Result<(Option<Vec<String>>, Rows)> {
    let mut header = None;
    let mut rows = Vec::new();
    for (k, record) in reader(input).records().enumerate() {
        let record = record.map_err(|e| parse_err(source, e.to_string()))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if rows.is_empty() && header.is_none() => {
                header = Some(record.iter().map(str::to_string).collect());
            }
            Err(e) => return Err(parse_err(format!("{source}:{line}"), e.to_string())),
        }
    }
    Ok((header, rows))
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

/// One point per row, one column per coordinate.
pub fn read_point_cloud(input: impl Read, source: &str) -> Result<PointCloud> {
    let (_, rows) = numeric_rows(input, source)?;
    PointCloud::new(rows).map_err(|e| parse_err(source, e.to_string()))
}

pub fn read_point_cloud_file(path: &Path) -> Result<PointCloud> {
    read_point_cloud(fs::File::open(path)?, &source_name(path))
}

pub fn write_point_cloud(cloud: &PointCloud, mut out: impl Write) -> Result<()> {
    for p in cloud.points() {
        let row: Vec<String> = p.iter().map(f64::to_string).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// A grayscale image from a CSV grid or an 8-bit PGM (`P2` or `P5`).
pub fn read_image(bytes: &[u8], source: &str) -> Result<Grid> {
    let rows = if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        read_pgm(bytes, source)?
    } else {
        numeric_rows(bytes, source)?.1
    };
    Grid::new(rows).map_err(|e| parse_err(source, e.to_string()))
}

pub fn read_image_file(path: &Path) -> Result<Grid> {
    read_image(&fs::read(path)?, &source_name(path))
}

fn read_pgm(bytes: &[u8], source: &str) -> Result<Vec<Vec<f64>>> {
    // Header tokens: magic, width, height, maxval; '#' starts a comment.
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(source, "truncated PGM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let num = |i: usize, what: &str| -> Result<usize> {
        tokens[i]
            .parse()
            .map_err(|_| parse_err(source, format!("bad PGM {what} '{}'", tokens[i])))
    };
    let (width, height, maxval) = (num(1, "width")?, num(2, "height")?, num(3, "maxval")?);
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(
            source,
            format!("only 8-bit PGM is supported, maxval {maxval}"),
        ));
    }
    let values: Vec<f64> = if tokens[0] == "P5" {
        let data = bytes
            .get(pos + 1..pos + 1 + width * height)
            .ok_or_else(|| parse_err(source, "truncated PGM data"))?;
        data.iter().map(|&b| b as f64).collect()
    } else {
        let text = String::from_utf8_lossy(&bytes[pos..]);
        let v: Vec<f64> = text
            .split_ascii_whitespace()
            .take(width * height)
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(source, format!("bad PGM sample '{t}'")))
            })
            .collect::<Result<_>>()?;
        if v.len() < width * height {
            return Err(parse_err(source, "truncated PGM data"));
        }
        v
    };
    Ok(values.chunks(width.max(1)).map(<[f64]>::to_vec).collect())
}

pub const DIAGRAM_HEADER: &str = "dim,birth,persistence";

/// Rows `dim,birth,persistence`, with header.
pub fn write_diagrams(diagrams: &[Diagram], mut out: impl Write) -> Result<()> {
    writeln!(out, "{DIAGRAM_HEADER}")?;
    for d in diagrams {
        for p in &d.points {
            writeln!(out, "{},{},{}", d.dim, p[0], p[1])?;
        }
    }
    Ok(())
}

/// Reads a diagram CSV, grouping points by homology dimension (ascending).
pub fn read_diagrams(input: impl Read, source: &str) -> Result<Vec<Diagram>> {
    let (_, rows) = numeric_rows(input, source)?;
    let mut out: Vec<Diagram> = Vec::new();
    for (k, r) in rows.iter().enumerate() {
        let location = format!("{source}: data row {}", k + 1);
        if r.len() != 3 {
            return Err(parse_err(
                location,
                format!(
                    "expected 3 columns (dim,birth,persistence), got {}",
                    r.len()
                ),
            ));
        }
        if r[0] < 0.0 || r[0].fract() != 0.0 {
            return Err(parse_err(
                location,
                format!("dimension {} is not a non-negative integer", r[0]),
            ));
        }
        if !r[1].is_finite() || !(r[2] > 0.0) || !r[2].is_finite() {
            return Err(parse_err(
                location,
                "birth must be finite and persistence finite and positive",
            ));
        }
        let dim = r[0] as usize;
        match out.iter_mut().find(|d| d.dim == dim) {
            Some(d) => d.points.push([r[1], r[2]]),
            None => out.push(Diagram::new(dim, vec![[r[1], r[2]]])),
        }
    }
    out.sort_by_key(|d| d.dim);
    Ok(out)
}

/// The diagram of dimension `dim` in a diagram CSV file; empty if absent.
pub fn read_diagram_file(path: &Path, dim: usize) -> Result<Diagram> {
    let all = read_diagrams(fs::File::open(path)?, &source_name(path))?;
    Ok(all
        .into_iter()
        .find(|d| d.dim == dim)
        .unwrap_or_else(|| Diagram::empty(dim)))
}

/// JSON form of a diagram with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramDocument {
    pub source: String,
    pub filtration: String,
    pub policy: InfinitePolicy,
    pub diagrams: Vec<Diagram>,
}

/// Feature rows: an optional leading `label` column, then `f0..f{N-1}`.
pub fn write_features(
    features: &[FeatureVector],
    labels: Option<&[usize]>,
    mut out: impl Write,
) -> Result<()> {
    let n = features.first().map_or(0, FeatureVector::len);
    if let Some(f) = features.iter().find(|f| f.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    if let Some(l) = labels {
        if l.len() != features.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} feature rows",
                l.len(),
                features.len()
            )));
        }
    }
    let mut header: Vec<String> = labels.map(|_| "label".to_string()).into_iter().collect();
    header.extend((0..n).map(|i| format!("f{i}")));
    writeln!(out, "{}", header.join(","))?;
    for (k, f) in features.iter().enumerate() {
        let mut row: Vec<String> = labels.map(|l| l[k].to_string()).into_iter().collect();
        row.extend(f.values.iter().map(f64::to_string));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Feature rows and labels (if the file has a `label` column).
pub fn read_features(input: impl Read, source: &str) -> Result<(Rows, Option<Vec<usize>>)> {
    let (header, rows) = numeric_rows(input, source)?;
    let labeled = header
        .as_ref()
        .is_some_and(|h| h.first().is_some_and(|c| c == "label"));
    let width = rows.first().map_or(0, Vec::len);
    let mut x = Vec::with_capacity(rows.len());
    let mut y = Vec::new();
    for (k, r) in rows.into_iter().enumerate() {
        let location = format!("{source}: data row {}", k + 1);
        if r.len() != width {
            return Err(parse_err(
                location,
                format!("expected {width} columns, got {}", r.len()),
            ));
        }
        if labeled {
            let l = r[0];
            if l < 0.0 || l.fract() != 0.0 {
                return Err(parse_err(
                    location,
                    format!("label {l} is not a non-negative integer"),
                ));
            }
            y.push(l as usize);
            x.push(r[1..].to_vec());
        } else {
            x.push(r);
        }
    }
    Ok((x, labeled.then_some(y)))
}

pub fn write_json<T: Serialize>(value: &T, mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
