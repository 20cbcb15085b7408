//! File ingestion and persistence: delimited ratings tables, id/index
//! maps, binary model and matrix files, and JSON reports.
//!
//! Model and matrix files use a fixed 8-byte magic, a format version,
//! and raw little-endian 64-bit payloads, so numeric round trips are
//! bitwise exact. Reports are pretty-printed JSON with stable key
//! order; identical reports serialize to identical bytes.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{binarize, Interaction};
use crate::models::{Hyperparameters, ModelKind, TrainedModel};
use crate::{Dense, Real, Sparse};

const MODEL_MAGIC: &[u8; 8] = b"OCCFMDL1";
const SPARSE_MAGIC: &[u8; 8] = b"OCCFSPM1";
const FORMAT_VERSION: u32 = 1;

/// One parsed ratings row, still carrying external ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingRow {
    pub user: String,
    pub item: String,
    pub rating: f64,
    pub timestamp: Option<i64>,
}

pub type RatingsTable = Vec<RatingRow>;

/// How a delimited ratings file is laid out.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatDescriptor {
    pub delimiter: char,
    pub has_header: bool,
    pub user_col: usize,
    pub item_col: usize,
    pub rating_col: usize,
    pub timestamp_col: Option<usize>,
}

impl Default for FormatDescriptor {
    /// Tab-separated `user item rating timestamp` without a header.
    fn default() -> Self {
        Self {
            delimiter: '\t',
            has_header: false,
            user_col: 0,
            item_col: 1,
            rating_col: 2,
            timestamp_col: Some(3),
        }
    }
}

impl FormatDescriptor {
    fn required_fields(&self) -> usize {
        let mut max = self.user_col.max(self.item_col).max(self.rating_col);
        if let Some(t) = self.timestamp_col {
            max = max.max(t);
        }
        max + 1
    }
}

/// Parses a delimited ratings file. Every row parses or the error
/// names the offending line.
pub fn load_ratings(path: &Path, fmt: &FormatDescriptor) -> Result<RatingsTable> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let path_str = path.display().to_string();
    let mut rows = Vec::new();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path_str.clone(),
        line,
        message,
    };

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.is_empty() {
            continue;
        }
        if fmt.has_header && idx == 0 {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(fmt.delimiter).collect();
        if fields.len() < fmt.required_fields() {
            return Err(parse_err(
                line_no,
                format!(
                    "expected at least {} fields, found {}",
                    fmt.required_fields(),
                    fields.len()
                ),
            ));
        }
        let rating: f64 = fields[fmt.rating_col]
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad rating {:?}", fields[fmt.rating_col])))?;
        if rating.is_nan() {
            return Err(parse_err(line_no, "rating is NaN".into()));
        }
        let timestamp = match fmt.timestamp_col {
            Some(col) => Some(fields[col].trim().parse::<i64>().map_err(|_| {
                parse_err(line_no, format!("bad timestamp {:?}", fields[col]))
            })?),
            None => None,
        };
        rows.push(RatingRow {
            user: fields[fmt.user_col].trim().to_string(),
            item: fields[fmt.item_col].trim().to_string(),
            rating,
            timestamp,
        });
    }
    Ok(rows)
}

/// Dense external-id to internal-index bijection, in first-appearance
/// order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    to_index: HashMap<String, usize>,
    ids: Vec<String>,
}

impl IdMap {
    pub fn get_or_insert(&mut self, id: &str) -> usize {
        if let Some(&idx) = self.to_index.get(id) {
            return idx;
        }
        let idx = self.ids.len();
        self.ids.push(id.to_string());
        self.to_index.insert(id.to_string(), idx);
        idx
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.to_index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn from_ids(ids: Vec<String>) -> Result<Self> {
        let mut to_index = HashMap::with_capacity(ids.len());
        for (idx, id) in ids.iter().enumerate() {
            if to_index.insert(id.clone(), idx).is_some() {
                return Err(Error::InvalidInput(format!("duplicate id {id:?}")));
            }
        }
        Ok(Self { to_index, ids })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndexMaps {
    pub users: IdMap,
    pub items: IdMap,
}

/// Counters from matrix construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BuildStats {
    /// Rows referencing ids missing from reused maps.
    pub dropped_unseen: usize,
    /// Repeated `(user, item)` pairs collapsed into one entry.
    pub duplicates_collapsed: usize,
}

/// Binarizes, maps ids to dense indices (first-appearance order), and
/// collapses duplicate pairs, keeping each pair's first occurrence.
///
/// With `maps` given, the maps are frozen: rows with unseen users or
/// items are dropped and counted instead of extending the index space.
pub fn build_interactions(
    table: &RatingsTable,
    threshold: f64,
    maps: Option<&IndexMaps>,
) -> Result<(Vec<Interaction>, IndexMaps, BuildStats)> {
    let kept = binarize(table, threshold);
    if kept.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no interactions survive the rating threshold {threshold}"
        )));
    }
    let frozen = maps.is_some();
    let mut maps = maps.cloned().unwrap_or_default();
    let mut stats = BuildStats::default();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut interactions = Vec::with_capacity(kept.len());

    for row in kept {
        let (user, item) = if frozen {
            match (maps.users.get(&row.user), maps.items.get(&row.item)) {
                (Some(u), Some(i)) => (u, i),
                _ => {
                    stats.dropped_unseen += 1;
                    continue;
                }
            }
        } else {
            (
                maps.users.get_or_insert(&row.user),
                maps.items.get_or_insert(&row.item),
            )
        };
        if !seen.insert((user, item)) {
            stats.duplicates_collapsed += 1;
            continue;
        }
        interactions.push(Interaction {
            user,
            item,
            timestamp: row.timestamp,
        });
    }
    if interactions.is_empty() {
        return Err(Error::InvalidInput(
            "no interactions left after id mapping".into(),
        ));
    }
    Ok((interactions, maps, stats))
}

/// [`build_interactions`] followed by matrix assembly: a binary
/// interaction matrix with one entry per surviving `(user, item)`.
pub fn build_matrix(
    table: &RatingsTable,
    threshold: f64,
    maps: Option<&IndexMaps>,
) -> Result<(Sparse, IndexMaps, BuildStats)> {
    let (interactions, maps, stats) = build_interactions(table, threshold, maps)?;
    let triplets: Vec<(usize, usize, Real)> = interactions
        .iter()
        .map(|i| (i.user, i.item, 1.0))
        .collect();
    let matrix = Sparse::from_triplets(maps.users.len(), maps.items.len(), &triplets)?;
    Ok((matrix, maps, stats))
}

// ---------------------------------------------------------------------------
// Binary model files
// ---------------------------------------------------------------------------

struct BinWriter<W: Write>(W);

impl<W: Write> BinWriter<W> {
    fn u32(&mut self, v: u32) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn matrix(&mut self, m: &Dense) -> io::Result<()> {
        self.u64(m.rows() as u64)?;
        self.u64(m.cols() as u64)?;
        for &v in m.as_slice() {
            self.f64(v)?;
        }
        Ok(())
    }
}

struct BinReader<R: Read>(R);

impl<R: Read> BinReader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.0.read_exact(&mut buf).map_err(map_eof)?;
        Ok(buf)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn usize(&mut self) -> Result<usize> {
        Ok(self.u64()? as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn matrix(&mut self) -> Result<Dense> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let count = rows.checked_mul(cols).ok_or_else(|| {
            Error::Format(format!("implausible matrix header {rows}x{cols}"))
        })?;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(self.f64()?);
        }
        Dense::from_vec(rows, cols, data)
    }
}

fn map_eof(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Format("unexpected end of file".into())
    } else {
        Error::Io(e)
    }
}

fn kind_code(kind: ModelKind) -> u8 {
    ModelKind::ALL.iter().position(|&k| k == kind).unwrap() as u8
}

/// Serializes a model; [`load_model`] restores every numeric payload
/// bitwise.
pub fn save_model(model: &TrainedModel<Real>, path: &Path) -> Result<()> {
    model.check_fields().map_err(|e| {
        Error::InvalidInput(format!("refusing to save inconsistent model: {e}"))
    })?;
    let mut w = BinWriter(BufWriter::new(File::create(path)?));
    w.0.write_all(MODEL_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.0.write_all(&[kind_code(model.kind)])?;
    let flags = (model.item_embedding.is_some() as u8)
        | (model.weights.is_some() as u8) << 1
        | (model.user_factor.is_some() as u8) << 2
        | (model.item_ids.is_some() as u8) << 3;
    w.0.write_all(&[flags])?;

    w.u64(model.hyper.k as u64)?;
    w.f64(model.hyper.beta)?;
    w.f64(model.hyper.alpha)?;
    w.f64(model.hyper.lambda)?;
    w.u64(model.hyper.power_iterations as u64)?;
    w.u64(model.hyper.seed)?;

    w.u64(model.pop_counts.len() as u64)?;
    for &c in &model.pop_counts {
        w.u64(c)?;
    }
    for matrix in [&model.item_embedding, &model.weights, &model.user_factor]
        .into_iter()
        .flatten()
    {
        w.matrix(matrix)?;
    }
    if let Some(ids) = &model.item_ids {
        for id in ids {
            w.u32(id.len() as u32)?;
            w.0.write_all(id.as_bytes())?;
        }
    }
    w.0.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel<Real>> {
    let mut r = BinReader(BufReader::new(File::open(path)?));
    let magic: [u8; 8] = r.bytes()?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format(format!(
            "{} is not a model file (bad magic)",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "model format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let kind_byte = r.bytes::<1>()?[0] as usize;
    let kind = *ModelKind::ALL
        .get(kind_byte)
        .ok_or_else(|| Error::Format(format!("unknown model kind code {kind_byte}")))?;
    let flags = r.bytes::<1>()?[0];

    let hyper = Hyperparameters {
        k: r.usize()?,
        beta: r.f64()?,
        alpha: r.f64()?,
        lambda: r.f64()?,
        power_iterations: r.usize()?,
        seed: r.u64()?,
    };
    let n_items = r.usize()?;
    let mut pop_counts = Vec::with_capacity(n_items.min(1 << 24));
    for _ in 0..n_items {
        pop_counts.push(r.u64()?);
    }
    let item_embedding = (flags & 1 != 0).then(|| r.matrix()).transpose()?;
    let weights = (flags & 2 != 0).then(|| r.matrix()).transpose()?;
    let user_factor = (flags & 4 != 0).then(|| r.matrix()).transpose()?;
    let item_ids = if flags & 8 != 0 {
        let mut ids = Vec::with_capacity(n_items.min(1 << 24));
        for _ in 0..n_items {
            let len = r.u32()? as usize;
            let mut buf = vec![0u8; len];
            r.0.read_exact(&mut buf).map_err(map_eof)?;
            ids.push(
                String::from_utf8(buf)
                    .map_err(|_| Error::Format("item id is not valid UTF-8".into()))?,
            );
        }
        Some(ids)
    } else {
        None
    };

    let model = TrainedModel {
        kind,
        item_embedding,
        weights,
        user_factor,
        pop_counts,
        hyper,
        item_ids,
    };
    model.check_fields()?;
    Ok(model)
}

// ---------------------------------------------------------------------------
// Binary sparse matrix files
// ---------------------------------------------------------------------------

pub fn save_sparse(matrix: &Sparse, path: &Path) -> Result<()> {
    let mut w = BinWriter(BufWriter::new(File::create(path)?));
    w.0.write_all(SPARSE_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u64(matrix.rows() as u64)?;
    w.u64(matrix.cols() as u64)?;
    w.u64(matrix.nnz() as u64)?;
    let (row_ptr, col_idx, values) = matrix.csr_parts();
    for &p in row_ptr {
        w.u64(p as u64)?;
    }
    for &c in col_idx {
        w.u64(c as u64)?;
    }
    for &v in values {
        w.f64(v)?;
    }
    w.0.flush()?;
    Ok(())
}

pub fn load_sparse(path: &Path) -> Result<Sparse> {
    let mut r = BinReader(BufReader::new(File::open(path)?));
    let magic: [u8; 8] = r.bytes()?;
    if &magic != SPARSE_MAGIC {
        return Err(Error::Format(format!(
            "{} is not a sparse matrix file (bad magic)",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "matrix format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let rows = r.usize()?;
    let cols = r.usize()?;
    let nnz = r.usize()?;
    let mut row_ptr = Vec::with_capacity((rows + 1).min(1 << 24));
    for _ in 0..=rows {
        row_ptr.push(r.usize()?);
    }
    let mut col_idx = Vec::with_capacity(nnz.min(1 << 24));
    for _ in 0..nnz {
        col_idx.push(r.usize()?);
    }
    let mut values = Vec::with_capacity(nnz.min(1 << 24));
    for _ in 0..nnz {
        values.push(r.f64()?);
    }
    Sparse::from_csr(rows, cols, row_ptr, col_idx, values)
}

// ---------------------------------------------------------------------------
// Index map files and JSON reports
// ---------------------------------------------------------------------------

/// Writes `users.txt` and `items.txt`, one external id per line in
/// index order.
pub fn save_index_maps(maps: &IndexMaps, dir: &Path) -> Result<()> {
    for (name, map) in [("users.txt", &maps.users), ("items.txt", &maps.items)] {
        let mut out = BufWriter::new(File::create(dir.join(name))?);
        for id in map.ids() {
            writeln!(out, "{id}")?;
        }
        out.flush()?;
    }
    Ok(())
}

pub fn load_index_maps(dir: &Path) -> Result<IndexMaps> {
    let read = |name: &str| -> Result<IdMap> {
        let file = File::open(dir.join(name))?;
        let ids: Vec<String> = BufReader::new(file).lines().collect::<io::Result<_>>()?;
        IdMap::from_ids(ids)
    };
    Ok(IndexMaps {
        users: read("users.txt")?,
        items: read("items.txt")?,
    })
}

/// Renders a report as pretty-printed JSON with a trailing newline.
/// Serialization is deterministic, so identical reports are
/// byte-identical.
pub fn render_report<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Writes a report to `path`, or to stdout when `path` is `None`.
pub fn write_report<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = render_report(value)?;
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        None => {
            io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
