//! On-disk formats.
//!
//! Embeddings use a fixed little-endian binary layout:
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"CORREMB1"
//! 8       4     n      u32 LE, rows
//! 12      4     d      u32 LE, columns
//! 16      1     dtype  0 = f32, 1 = f64
//! 17      ...   n*d values, row-major, LE
//! ```
//!
//! Item ids live in a sibling text file, one UTF-8 id per LF-terminated line.
//! Annotations and rental histories are JSONL; weights are a JSON object;
//! published result tables ship as TSV fixtures.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simcore::{EmbeddingSet, VectorSet};
use crate::tagspace::{check_annotation_ids, ItemAnnotation};
use crate::weighting::{CategoryWeights, RentalHistory};

pub const MAGIC: &[u8; 8] = b"CORREMB1";
pub const HEADER_LEN: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            other => Err(Error::BadDtype(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingFileHeader {
    pub n: u32,
    pub d: u32,
    pub dtype: Dtype,
}

impl EmbeddingFileHeader {
    pub fn payload_len(&self) -> usize {
        self.n as usize * self.d as usize * self.dtype.width()
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..8].copy_from_slice(MAGIC);
        out[8..12].copy_from_slice(&self.n.to_le_bytes());
        out[12..16].copy_from_slice(&self.d.to_le_bytes());
        out[16] = self.dtype as u8;
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedPayload { expected: HEADER_LEN, found: bytes.len() });
        }
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let dtype = Dtype::from_byte(bytes[16])?;
        if n < 2 {
            return Err(Error::InvalidInput(format!("n >= 2 required, header says {n}")));
        }
        Ok(EmbeddingFileHeader { n, d, dtype })
    }
}

/// Serializes the matrix of `set`. With [`Dtype::F32`] values are narrowed.
pub fn encode_embeddings(set: &VectorSet, dtype: Dtype) -> Result<Vec<u8>> {
    let n = u32::try_from(set.len()).map_err(|_| Error::InvalidInput("too many rows".into()))?;
    let d = u32::try_from(set.dim()).map_err(|_| Error::InvalidInput("dimension too large".into()))?;
    let header = EmbeddingFileHeader { n, d, dtype };
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len());
    out.extend_from_slice(&header.to_bytes());
    match dtype {
        Dtype::F32 => set.data().iter().for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        Dtype::F64 => set.data().iter().for_each(|&v| out.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(out)
}

/// Parses header and payload, widening f32 values to f64.
pub fn decode_embeddings(bytes: &[u8]) -> Result<(EmbeddingFileHeader, Vec<f64>)> {
    let header = EmbeddingFileHeader::parse(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let expected = header.payload_len();
    if payload.len() < expected {
        return Err(Error::TruncatedPayload { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(Error::InvalidInput(format!(
            "{} trailing bytes after a {expected}-byte payload",
            payload.len() - expected
        )));
    }
    let values = match header.dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Ok((header, values))
}

/// One id per line. A final trailing LF is optional; empty lines are rejected.
pub fn parse_ids(text: &str, label: &str) -> Result<Vec<String>> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split('\n')
        .enumerate()
        .map(|(i, line)| {
            if line.is_empty() {
                Err(Error::Parse { path: label.into(), line: i + 1, message: "empty item id".into() })
            } else {
                Ok(line.to_string())
            }
        })
        .collect()
}

pub fn format_ids(ids: &[String]) -> String {
    let mut out = String::new();
    for id in ids {
        out.push_str(id);
        out.push('\n');
    }
    out
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: impl AsRef<Path>, ids_path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let (path, ids_path) = (path.as_ref(), ids_path.as_ref());
    let (header, values) = decode_embeddings(&read_bytes(path)?)?;
    let ids = parse_ids(&read_text(ids_path)?, &ids_path.display().to_string())?;
    if ids.len() != header.n as usize {
        return Err(Error::IdCountMismatch { expected: header.n as usize, found: ids.len() });
    }
    VectorSet::new(ids, header.d as usize, values)
}

pub fn write_embeddings(
    path: impl AsRef<Path>,
    ids_path: impl AsRef<Path>,
    set: &EmbeddingSet,
    dtype: Dtype,
) -> Result<()> {
    write_atomic(path, &encode_embeddings(set, dtype)?)?;
    write_atomic(ids_path, format_ids(set.item_ids()).as_bytes())
}

/// Headerless CSV, one row per item: `item_id,v1,...,vd`.
pub fn read_embeddings_csv(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings_csv(file, &path.display().to_string())
}

pub fn parse_embeddings_csv<R: Read>(reader: R, label: &str) -> Result<EmbeddingSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        let err = |message: String| Error::Parse { path: label.into(), line, message };
        let id = rec.get(0).filter(|s| !s.is_empty()).ok_or_else(|| err("missing item id".into()))?;
        let d = rec.len() - 1;
        if *dim.get_or_insert(d) != d {
            return Err(err(format!("expected {} values, found {d}", dim.unwrap())));
        }
        for field in rec.iter().skip(1) {
            data.push(field.parse::<f64>().map_err(|e| err(format!("{field:?}: {e}")))?);
        }
        ids.push(id.to_string());
    }
    VectorSet::new(ids, dim.unwrap_or(0), data)
}

/// Tab-separated `item_id\tv1\t...\tvd` rows for external projection tools.
pub fn format_embeddings_tsv(set: &EmbeddingSet) -> String {
    let mut out = String::new();
    for (id, row) in set.item_ids().iter().zip(set.rows()) {
        out.push_str(id);
        for v in row {
            out.push('\t');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

fn parse_jsonl<T: DeserializeOwned, R: BufRead>(reader: R, label: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: label.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

fn format_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_annotations<R: BufRead>(reader: R, label: &str) -> Result<Vec<ItemAnnotation>> {
    let anns = parse_jsonl(reader, label)?;
    check_annotation_ids(&anns)?;
    Ok(anns)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<ItemAnnotation>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(BufReader::new(file), &path.display().to_string())
}

pub fn format_annotations(annotations: &[ItemAnnotation]) -> Result<String> {
    format_jsonl(annotations)
}

pub fn write_annotations(path: impl AsRef<Path>, annotations: &[ItemAnnotation]) -> Result<()> {
    write_atomic(path, format_annotations(annotations)?.as_bytes())
}

pub fn parse_histories<R: BufRead>(reader: R, label: &str) -> Result<Vec<RentalHistory>> {
    parse_jsonl(reader, label)
}

pub fn read_histories(path: impl AsRef<Path>) -> Result<Vec<RentalHistory>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_histories(BufReader::new(file), &path.display().to_string())
}

pub fn format_histories(histories: &[RentalHistory]) -> Result<String> {
    format_jsonl(histories)
}

pub fn write_histories(path: impl AsRef<Path>, histories: &[RentalHistory]) -> Result<()> {
    write_atomic(path, format_histories(histories)?.as_bytes())
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<CategoryWeights> {
    let path = path.as_ref();
    let w: CategoryWeights = serde_json::from_str(&read_text(path)?)?;
    if let Some((c, v)) = w.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("weight for {c:?} is {v}, outside [0, 1]")));
    }
    Ok(w)
}

pub fn write_weights(path: impl AsRef<Path>, weights: &CategoryWeights) -> Result<()> {
    let mut s = serde_json::to_string_pretty(weights)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failed write never leaves a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Published per-model result table, bundled verbatim.
pub const TABLE2_TSV: &str = include_str!("../fixtures/table2.tsv");
/// Penultimate-layer results, bundled verbatim.
pub const TABLE3_TSV: &str = include_str!("../fixtures/table3.tsv");

/// Model names of the control rows in the output-layer table.
pub const CONTROL_MODELS: [&str; 2] = ["random", "random shuffle"];

/// A TSV table keyed by its first (`model`) column. Cells are kept as text;
/// [`Fixture::numeric`] parses on demand and treats `N/A` as missing.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<FixtureRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureRecord {
    pub model: String,
    pub cells: Vec<String>,
}

impl Fixture {
    pub fn parse(name: &str, tsv: &str) -> Result<Fixture> {
        let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(tsv.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("model") {
            return Err(Error::InvalidInput(format!("fixture {name}: first column must be \"model\"")));
        }
        let columns = headers.iter().skip(1).map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| {
                let r = r?;
                Ok(FixtureRecord {
                    model: r[0].to_string(),
                    cells: r.iter().skip(1).map(str::to_string).collect(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Fixture { name: name.to_string(), columns, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Fixture> {
        let path = path.as_ref();
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("fixture");
        Fixture::parse(name, &read_text(path)?)
    }

    /// `table2`, `table3`, or a path to a TSV file.
    pub fn load(name_or_path: &str) -> Result<Fixture> {
        match name_or_path {
            "table2" => Fixture::parse("table2", TABLE2_TSV),
            "table3" => Fixture::parse("table3", TABLE3_TSV),
            path => Fixture::read(path),
        }
    }

    pub fn column_index(&self, column: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| Error::UnknownColumn(column.to_string()))
    }

    pub fn numeric(&self, row: &FixtureRecord, column: usize) -> Option<f64> {
        row.cells.get(column).and_then(|c| c.trim().parse::<f64>().ok())
    }

    /// Inner join on model name. Columns of `other` are prefixed with
    /// `"{other.name}."`; row order follows `self`.
    pub fn join(&self, other: &Fixture) -> Fixture {
        let columns = self
            .columns
            .iter()
            .cloned()
            .chain(other.columns.iter().map(|c| format!("{}.{c}", other.name)))
            .collect();
        let rows = self
            .rows
            .iter()
            .filter_map(|r| {
                let o = other.rows.iter().find(|o| o.model == r.model)?;
                Some(FixtureRecord {
                    model: r.model.clone(),
                    cells: r.cells.iter().chain(&o.cells).cloned().collect(),
                })
            })
            .collect();
        Fixture { name: format!("{}+{}", self.name, other.name), columns, rows }
    }
}

/// One row of the output-layer results table.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureRow {
    pub model: String,
    pub acc1: f64,
    pub acc5: f64,
    pub corrembed: f64,
    pub unweighted: f64,
    pub random: f64,
    pub shuffled: f64,
}

impl FixtureRow {
    pub fn from_fixture(f: &Fixture) -> Result<Vec<FixtureRow>> {
        let cols = ["acc1", "acc5", "corrembed", "unweighted", "random", "shuffled"]
            .map(|c| f.column_index(c));
        let cols: Vec<usize> = cols.into_iter().collect::<Result<_>>()?;
        f.rows
            .iter()
            .map(|r| {
                let v = |i: usize| {
                    f.numeric(r, cols[i]).ok_or_else(|| {
                        Error::InvalidInput(format!("{}: non-numeric {:?}", r.model, f.columns[cols[i]]))
                    })
                };
                Ok(FixtureRow {
                    model: r.model.clone(),
                    acc1: v(0)?,
                    acc5: v(1)?,
                    corrembed: v(2)?,
                    unweighted: v(3)?,
                    random: v(4)?,
                    shuffled: v(5)?,
                })
            })
            .collect()
    }
}
