//! Binary line-embedding files.
//!
//! Layout (little-endian):
//! - magic: `b"LEMB"`
//! - version: u32 = 1
//! - dim: u32
//! - count: u64
//! - count × dim × f32
//!
//! A sidecar `<path>.idx.jsonl` maps each email id to its rows with records
//! `{"id": str, "start": int, "n": int}`; ranges are in order and do not
//! overlap.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"LEMB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 20;

#[derive(Debug, Error)]
pub enum LembError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad magic {found:?}, expected \"LEMB\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported version {found}, expected {VERSION}")]
    Version { found: u32 },
    #[error("dimension must be positive")]
    ZeroDim,
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("{extra} unexpected trailing bytes after {count} rows")]
    TrailingBytes { count: u64, extra: u64 },
    #[error("{path}:{line}: {source}")]
    IndexParse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("index entry {id:?} covers rows {start}..{end} but the file holds {count} rows")]
    IndexOutOfRange {
        id: String,
        start: u64,
        end: u64,
        count: u64,
    },
    #[error("index entry {id:?} starts at {start}, before the previous range ends at {prev_end}")]
    IndexOverlap { id: String, start: u64, prev_end: u64 },
    #[error("index lists id {0:?} twice")]
    DuplicateId(String),
    #[error("row of length {found} written to a file of dimension {dim}")]
    RowDim { dim: usize, found: usize },
}

/// Rows `start..start + n` of an embedding file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRange {
    pub start: u64,
    pub n: u64,
}

#[derive(Serialize, Deserialize)]
struct IndexRecord {
    id: String,
    start: u64,
    n: u64,
}

pub fn index_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".idx.jsonl");
    PathBuf::from(s)
}

/// A fully loaded embedding file with its index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    dim: usize,
    count: u64,
    data: Vec<f32>,
    index: IndexMap<String, RowRange>,
}

impl EmbeddingFile {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn index(&self) -> &IndexMap<String, RowRange> {
        &self.index
    }

    pub fn row(&self, i: u64) -> Option<&[f32]> {
        if i >= self.count {
            return None;
        }
        let start = i as usize * self.dim;
        Some(&self.data[start..start + self.dim])
    }

    pub fn range(&self, id: &str) -> Option<RowRange> {
        self.index.get(id).copied()
    }

    /// All rows of one email, in order.
    pub fn rows(&self, id: &str) -> Option<impl Iterator<Item = &[f32]>> {
        let r = self.range(id)?;
        Some((r.start..r.start + r.n).map(move |i| self.row(i).expect("validated range")))
    }
}

/// Parse the fixed header, returning `(dim, count)`.
pub fn parse_header(header: &[u8]) -> Result<(usize, u64), LembError> {
    if (header.len() as u64) < HEADER_LEN {
        return Err(LembError::Truncated {
            expected: HEADER_LEN,
            found: header.len() as u64,
        });
    }
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(LembError::BadMagic { found: magic });
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(LembError::Version { found: version });
    }
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(LembError::ZeroDim);
    }
    let count = u64::from_le_bytes(header[12..20].try_into().unwrap());
    Ok((dim, count))
}

/// Load an embedding file and its sidecar index, validating both.
pub fn load_embedding_file(path: &Path) -> Result<EmbeddingFile, LembError> {
    let io_err = |p: &Path| {
        let p = p.to_owned();
        move |source| LembError::Io { path: p, source }
    };
    let mut f = File::open(path).map_err(io_err(path))?;
    let file_len = f.metadata().map_err(io_err(path))?.len();

    let mut header = [0u8; HEADER_LEN as usize];
    let got = read_up_to(&mut f, &mut header).map_err(io_err(path))?;
    let (dim, count) = parse_header(&header[..got])?;

    let expected = count
        .checked_mul(dim as u64 * 4)
        .and_then(|b| b.checked_add(HEADER_LEN))
        .unwrap_or(u64::MAX);
    if file_len < expected {
        return Err(LembError::Truncated {
            expected,
            found: file_len,
        });
    }
    if file_len > expected {
        return Err(LembError::TrailingBytes {
            count,
            extra: file_len - expected,
        });
    }

    let mut bytes = Vec::with_capacity((expected - HEADER_LEN) as usize);
    f.read_to_end(&mut bytes).map_err(io_err(path))?;
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let idx_path = index_path(path);
    let idx_file = File::open(&idx_path).map_err(io_err(&idx_path))?;
    let mut index = IndexMap::new();
    let mut prev_end = 0u64;
    for (i, line) in BufReader::new(idx_file).lines().enumerate() {
        let line = line.map_err(io_err(&idx_path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: IndexRecord =
            serde_json::from_str(&line).map_err(|source| LembError::IndexParse {
                path: idx_path.clone(),
                line: i + 1,
                source,
            })?;
        let end = rec.start.saturating_add(rec.n);
        if end > count {
            return Err(LembError::IndexOutOfRange {
                id: rec.id,
                start: rec.start,
                end,
                count,
            });
        }
        if rec.start < prev_end {
            return Err(LembError::IndexOverlap {
                id: rec.id,
                start: rec.start,
                prev_end,
            });
        }
        prev_end = end;
        if index.contains_key(&rec.id) {
            return Err(LembError::DuplicateId(rec.id));
        }
        index.insert(
            rec.id,
            RowRange {
                start: rec.start,
                n: rec.n,
            },
        );
    }

    Ok(EmbeddingFile {
        dim,
        count,
        data,
        index,
    })
}

fn read_up_to(f: &mut File, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match f.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

/// Streaming writer. Rows go to a temporary file; `finish` patches the row
/// count into the header and moves the matrix and its index into place.
/// Dropping an unfinished writer leaves no output behind.
pub struct LembWriter {
    path: PathBuf,
    dim: usize,
    count: u64,
    rows: BufWriter<tempfile::NamedTempFile>,
    index: Vec<IndexRecord>,
}

impl LembWriter {
    pub fn create(path: &Path, dim: usize) -> Result<Self, LembError> {
        if dim == 0 {
            return Err(LembError::ZeroDim);
        }
        let io_err = |source| LembError::Io {
            path: path.to_owned(),
            source,
        };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
        let mut rows = BufWriter::new(tmp);
        rows.write_all(&MAGIC).map_err(io_err)?;
        rows.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
        rows.write_all(&(dim as u32).to_le_bytes()).map_err(io_err)?;
        rows.write_all(&0u64.to_le_bytes()).map_err(io_err)?;
        Ok(Self {
            path: path.to_owned(),
            dim,
            count: 0,
            rows,
            index: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Append one email's rows.
    pub fn push_email<R: AsRef<[f32]>>(&mut self, id: &str, rows: &[R]) -> Result<(), LembError> {
        if self.index.iter().any(|r| r.id == id) {
            return Err(LembError::DuplicateId(id.to_owned()));
        }
        for row in rows {
            let row = row.as_ref();
            if row.len() != self.dim {
                return Err(LembError::RowDim {
                    dim: self.dim,
                    found: row.len(),
                });
            }
        }
        for row in rows {
            for x in row.as_ref() {
                self.rows
                    .write_all(&x.to_le_bytes())
                    .map_err(|source| LembError::Io {
                        path: self.path.clone(),
                        source,
                    })?;
            }
        }
        self.index.push(IndexRecord {
            id: id.to_owned(),
            start: self.count,
            n: rows.len() as u64,
        });
        self.count += rows.len() as u64;
        Ok(())
    }

    pub fn finish(self) -> Result<(), LembError> {
        let io_err = |path: &Path| {
            let p = path.to_owned();
            move |source| LembError::Io { path: p, source }
        };
        let path = self.path;
        let mut tmp = self
            .rows
            .into_inner()
            .map_err(|e| LembError::Io {
                path: path.clone(),
                source: e.into_error(),
            })?;
        let f = tmp.as_file_mut();
        f.seek(SeekFrom::Start(12)).map_err(io_err(&path))?;
        f.write_all(&self.count.to_le_bytes()).map_err(io_err(&path))?;
        f.sync_all().map_err(io_err(&path))?;

        let idx_path = index_path(&path);
        crate::io_util::write_atomic(&idx_path, |f| {
            let mut w = BufWriter::new(f);
            for rec in &self.index {
                serde_json::to_writer(&mut w, rec)?;
                w.write_all(b"\n")?;
            }
            w.flush()
        })
        .map_err(io_err(&idx_path))?;
        tmp.persist(&path)
            .map_err(|e| LembError::Io {
                path: path.clone(),
                source: e.error,
            })?;
        Ok(())
    }
}

/// Write a complete embedding file from `(id, rows)` pairs.
pub fn write_embedding_file<'a, I, R>(path: &Path, dim: usize, emails: I) -> Result<(), LembError>
where
    I: IntoIterator<Item = (&'a str, &'a [R])>,
    R: AsRef<[f32]> + 'a,
{
    let mut w = LembWriter::create(path, dim)?;
    for (id, rows) in emails {
        w.push_email(id, rows)?;
    }
    w.finish()
}
