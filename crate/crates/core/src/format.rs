//! On-disk encodings of generated batches and training windows.
//!
//! Raw series layout: a 16-byte header (`"SRSM"`, version `u16`, rows `u32`,
//! length `u32`, 2 reserved bytes) followed by `rows · length` little-endian
//! `f32` values, row-major.
//!
//! Raw window layout: a 20-byte header (`"SRSW"`, version `u16`, 2 reserved
//! bytes, records `u32`, context `u32`, target `u32`) followed per record by
//! `pad_len: u32`, the context and the target as little-endian `f32`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::TrainingWindow;

pub const SERIES_MAGIC: [u8; 4] = *b"SRSM";
pub const WINDOW_MAGIC: [u8; 4] = *b"SRSW";
pub const FORMAT_VERSION: u16 = 1;
pub const SERIES_HEADER_LEN: usize = 16;
pub const WINDOW_HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Jsonl,
    Raw,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            "raw" | "raw_f32le" => Ok(Self::Raw),
            other => Err(Error::Parameter(format!("unknown format {other:?}"))),
        }
    }
}

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesHeader {
    pub version: u16,
    pub rows: u32,
    pub len: u32,
}

impl SeriesHeader {
    pub fn new(rows: usize, len: usize) -> Result<Self> {
        Ok(Self {
            version: FORMAT_VERSION,
            rows: to_u32(rows, "row count")?,
            len: to_u32(len, "series length")?,
        })
    }

    pub fn encode(&self) -> [u8; SERIES_HEADER_LEN] {
        let mut out = [0u8; SERIES_HEADER_LEN];
        out[..4].copy_from_slice(&SERIES_MAGIC);
        out[4..6].copy_from_slice(&self.version.to_le_bytes());
        out[6..10].copy_from_slice(&self.rows.to_le_bytes());
        out[10..14].copy_from_slice(&self.len.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < SERIES_HEADER_LEN {
            return format_err("truncated header");
        }
        if bytes[..4] != SERIES_MAGIC {
            return format_err("bad magic, expected SRSM");
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return format_err(format!("unsupported version {version}"));
        }
        Ok(Self {
            version,
            rows: u32::from_le_bytes(bytes[6..10].try_into().unwrap()),
            len: u32::from_le_bytes(bytes[10..14].try_into().unwrap()),
        })
    }

    pub fn payload_bytes(&self) -> usize {
        self.rows as usize * self.len as usize * 4
    }
}

/// Rows decoded from any of the series encodings.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSeries {
    pub rows: usize,
    pub len: usize,
    /// Row-major values.
    pub values: Vec<f32>,
}

impl DecodedSeries {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.len..(i + 1) * self.len]
    }
}

pub fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Writes a header; rows are appended with [`write_f32s`].
pub fn write_series_header<W: Write>(w: &mut W, rows: usize, len: usize) -> Result<()> {
    w.write_all(&SeriesHeader::new(rows, len)?.encode())?;
    Ok(())
}

pub fn decode_raw_series(bytes: &[u8]) -> Result<DecodedSeries> {
    let header = SeriesHeader::decode(bytes)?;
    let payload = &bytes[SERIES_HEADER_LEN..];
    if payload.len() != header.payload_bytes() {
        return format_err(format!(
            "payload has {} bytes, header promises {}",
            payload.len(),
            header.payload_bytes()
        ));
    }
    Ok(DecodedSeries {
        rows: header.rows as usize,
        len: header.len as usize,
        values: payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    })
}

/// One comma-separated line per row.
pub fn write_csv_rows<W: Write>(w: &mut W, values: &[f32], len: usize) -> Result<()> {
    for row in values.chunks_exact(len) {
        let mut line = String::with_capacity(len * 12);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub batch: u64,
    pub row: usize,
    pub values: Vec<f32>,
}

/// One JSON object per row.
pub fn write_jsonl_rows<W: Write>(w: &mut W, batch: u64, values: &[f32], len: usize) -> Result<()> {
    for (row, chunk) in values.chunks_exact(len).enumerate() {
        let rec = SeriesRecord {
            batch,
            row,
            values: chunk.to_vec(),
        };
        serde_json::to_writer(&mut *w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn collect_rows(rows: Vec<Vec<f32>>) -> Result<DecodedSeries> {
    let len = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != len) {
        return format_err(format!("row {i} has {} values, expected {len}", rows[i].len()));
    }
    Ok(DecodedSeries {
        rows: rows.len(),
        len,
        values: rows.into_iter().flatten().collect(),
    })
}

pub fn decode_csv_series<R: BufRead>(reader: R) -> Result<DecodedSeries> {
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                field
                    .trim()
                    .parse::<f32>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))
            })
            .collect::<Result<Vec<f32>>>()?;
        rows.push(row);
    }
    collect_rows(rows)
}

pub fn decode_jsonl_series<R: BufRead>(reader: R) -> Result<DecodedSeries> {
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SeriesRecord =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
        rows.push(rec.values);
    }
    collect_rows(rows)
}

/// Recognizes raw input by its magic and jsonl by a leading `{`; anything
/// else non-empty is taken as csv.
pub fn detect_format(bytes: &[u8]) -> Result<OutputFormat> {
    if bytes.starts_with(&SERIES_MAGIC) {
        return Ok(OutputFormat::Raw);
    }
    match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'{') => Ok(OutputFormat::Jsonl),
        Some(_) => Ok(OutputFormat::Csv),
        None => format_err("empty input"),
    }
}

/// Decodes a series file in any of the output formats.
pub fn decode_series(bytes: &[u8]) -> Result<DecodedSeries> {
    match detect_format(bytes)? {
        OutputFormat::Raw => decode_raw_series(bytes),
        OutputFormat::Jsonl => decode_jsonl_series(bytes),
        OutputFormat::Csv => decode_csv_series(bytes),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowHeader {
    pub version: u16,
    pub records: u32,
    pub context: u32,
    pub target: u32,
}

impl WindowHeader {
    pub fn new(records: usize, context: usize, target: usize) -> Result<Self> {
        Ok(Self {
            version: FORMAT_VERSION,
            records: to_u32(records, "record count")?,
            context: to_u32(context, "context length")?,
            target: to_u32(target, "target length")?,
        })
    }

    pub fn encode(&self) -> [u8; WINDOW_HEADER_LEN] {
        let mut out = [0u8; WINDOW_HEADER_LEN];
        out[..4].copy_from_slice(&WINDOW_MAGIC);
        out[4..6].copy_from_slice(&self.version.to_le_bytes());
        out[8..12].copy_from_slice(&self.records.to_le_bytes());
        out[12..16].copy_from_slice(&self.context.to_le_bytes());
        out[16..20].copy_from_slice(&self.target.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < WINDOW_HEADER_LEN {
            return format_err("truncated header");
        }
        if bytes[..4] != WINDOW_MAGIC {
            return format_err("bad magic, expected SRSW");
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return format_err(format!("unsupported version {version}"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        Ok(Self {
            version,
            records: word(8),
            context: word(12),
            target: word(16),
        })
    }

    fn record_bytes(&self) -> usize {
        4 + 4 * (self.context as usize + self.target as usize)
    }
}

pub fn write_window_header<W: Write>(w: &mut W, records: usize, context: usize, target: usize) -> Result<()> {
    w.write_all(&WindowHeader::new(records, context, target)?.encode())?;
    Ok(())
}

pub fn write_raw_window<W: Write>(w: &mut W, window: &TrainingWindow) -> Result<()> {
    w.write_all(&to_u32(window.pad_len, "pad length")?.to_le_bytes())?;
    let values: Vec<f32> = window.context.iter().chain(&window.target).map(|&v| v as f32).collect();
    write_f32s(w, &values)
}

/// A window with `f32` payload, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub context: Vec<f32>,
    pub pad_len: usize,
    pub target: Vec<f32>,
}

impl From<&TrainingWindow> for WindowRecord {
    fn from(w: &TrainingWindow) -> Self {
        Self {
            context: w.context.iter().map(|&v| v as f32).collect(),
            pad_len: w.pad_len,
            target: w.target.iter().map(|&v| v as f32).collect(),
        }
    }
}

pub fn write_jsonl_window<W: Write>(w: &mut W, window: &TrainingWindow) -> Result<()> {
    serde_json::to_writer(&mut *w, &WindowRecord::from(window))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn decode_raw_windows(bytes: &[u8]) -> Result<Vec<WindowRecord>> {
    let header = WindowHeader::decode(bytes)?;
    let payload = &bytes[WINDOW_HEADER_LEN..];
    let rec = header.record_bytes();
    if payload.len() != rec * header.records as usize {
        return format_err(format!(
            "payload has {} bytes, header promises {}",
            payload.len(),
            rec * header.records as usize
        ));
    }
    let ctx = header.context as usize;
    Ok(payload
        .chunks_exact(rec)
        .map(|chunk| {
            let pad_len = u32::from_le_bytes(chunk[..4].try_into().unwrap()) as usize;
            let mut values = chunk[4..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
            let context = values.by_ref().take(ctx).collect();
            WindowRecord {
                context,
                pad_len,
                target: values.collect(),
            }
        })
        .collect())
}

pub fn decode_jsonl_windows<R: BufRead>(reader: R) -> Result<Vec<WindowRecord>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}
