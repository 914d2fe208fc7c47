//! Streaming readers for SoR dump corpora and platform exports.
//!
//! Rows are validated one at a time; malformed rows go to a
//! [`QuarantineSink`] and never abort the run. Only I/O failures and a
//! wrong header row are fatal. Corpus files are read in lexicographic
//! file-name order and rows in file order, so record sequences and
//! manifests are reproducible.

use std::fs::File;
use std::io::{self, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sor_model::{
    validate_record, CategoryTaxonomy, QuarantineEntry, QuarantineReason, SorRecord, SOR_COLUMNS,
};
use crate::verify::{validate_event, ModerationEvent, EXPORT_COLUMNS};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: header does not match the expected columns (expected `{expected}`, found `{found}`)")]
    Header { path: String, expected: String, found: String },
    #[error("{0}: not a directory")]
    NotADirectory(String),
    #[error("quarantine log: {0}")]
    Quarantine(io::Error),
}

/// One line of the quarantine log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineRecord {
    pub file: String,
    /// 1-based index of the data row within its file (header excluded).
    pub row_number: u64,
    pub reason: QuarantineReason,
    pub field: Option<String>,
    pub raw_row: Vec<String>,
}

/// Destination for quarantined rows.
pub trait QuarantineSink {
    fn push(&mut self, record: QuarantineRecord) -> io::Result<()>;
}

impl QuarantineSink for Vec<QuarantineRecord> {
    fn push(&mut self, record: QuarantineRecord) -> io::Result<()> {
        Vec::push(self, record);
        Ok(())
    }
}

impl<S: QuarantineSink + ?Sized> QuarantineSink for &mut S {
    fn push(&mut self, record: QuarantineRecord) -> io::Result<()> {
        (**self).push(record)
    }
}

/// Discards quarantined rows; the manifest still counts them.
#[derive(Debug, Default, Clone, Copy)]
pub struct DiscardQuarantine;

impl QuarantineSink for DiscardQuarantine {
    fn push(&mut self, _record: QuarantineRecord) -> io::Result<()> {
        Ok(())
    }
}

/// Writes one JSON object per quarantined row.
pub struct JsonLinesQuarantine<W: Write> {
    out: W,
}

impl<W: Write> JsonLinesQuarantine<W> {
    pub fn new(out: W) -> Self {
        JsonLinesQuarantine { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> QuarantineSink for JsonLinesQuarantine<W> {
    fn push(&mut self, record: QuarantineRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, &record)?;
        self.out.write_all(b"\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    #[serde(with = "crate::timefmt::serde_date")]
    pub min: NaiveDate,
    #[serde(with = "crate::timefmt::serde_date")]
    pub max: NaiveDate,
}

impl DateRange {
    pub(crate) fn include(range: &mut Option<DateRange>, date: NaiveDate) {
        match range {
            Some(r) => {
                r.min = r.min.min(date);
                r.max = r.max.max(date);
            }
            None => *range = Some(DateRange { min: date, max: date }),
        }
    }
}

/// Totals for one ingestion run. For SoR corpora `date_range` spans
/// `application_date`; for platform exports the date of `moderated_at`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub files: Vec<String>,
    pub record_count: u64,
    pub quarantine_count: u64,
    pub date_range: Option<DateRange>,
}

impl CorpusManifest {
    pub fn rows_read(&self) -> u64 {
        self.record_count + self.quarantine_count
    }

    /// Associative merge; `other`'s files follow `self`'s.
    pub fn merge(&mut self, other: &CorpusManifest) {
        self.files.extend(other.files.iter().cloned());
        self.record_count += other.record_count;
        self.quarantine_count += other.quarantine_count;
        if let Some(r) = other.date_range {
            DateRange::include(&mut self.date_range, r.min);
            DateRange::include(&mut self.date_range, r.max);
        }
    }
}

/// A CSV row format this module can stream.
pub trait RowSchema {
    type Item;
    const COLUMNS: &'static [&'static str];

    fn validate(row: &csv::StringRecord, taxonomy: &CategoryTaxonomy) -> Result<Self::Item, QuarantineEntry>;
    fn date(item: &Self::Item) -> NaiveDate;
}

/// The SoR dump format.
pub enum SorDump {}

impl RowSchema for SorDump {
    type Item = SorRecord;
    const COLUMNS: &'static [&'static str] = &SOR_COLUMNS;

    fn validate(row: &csv::StringRecord, taxonomy: &CategoryTaxonomy) -> Result<SorRecord, QuarantineEntry> {
        validate_record(row, taxonomy)
    }

    fn date(item: &SorRecord) -> NaiveDate {
        item.application_date
    }
}

/// The platform export format.
pub enum PlatformExport {}

impl RowSchema for PlatformExport {
    type Item = ModerationEvent;
    const COLUMNS: &'static [&'static str] = &EXPORT_COLUMNS;

    fn validate(row: &csv::StringRecord, taxonomy: &CategoryTaxonomy) -> Result<ModerationEvent, QuarantineEntry> {
        validate_event(row, taxonomy)
    }

    fn date(item: &ModerationEvent) -> NaiveDate {
        item.moderated_at.date_naive()
    }
}

struct OpenFile {
    name: String,
    reader: csv::Reader<File>,
    row_number: u64,
}

/// Single-pass reader over a list of CSV files of one [`RowSchema`].
pub struct CsvStream<'t, K: RowSchema, S: QuarantineSink> {
    taxonomy: &'t CategoryTaxonomy,
    pending: std::vec::IntoIter<PathBuf>,
    current: Option<OpenFile>,
    sink: S,
    manifest: CorpusManifest,
    bytes: csv::ByteRecord,
    failed: bool,
    _schema: PhantomData<K>,
}

/// Streaming reader over a SoR dump corpus.
pub type CorpusReader<'t, S> = CsvStream<'t, SorDump, S>;
/// Streaming reader over a platform export.
pub type ExportReader<'t, S> = CsvStream<'t, PlatformExport, S>;

fn io_error(path: &Path, source: io::Error) -> IngestError {
    IngestError::Io { path: path.display().to_string(), source }
}

fn csv_error(path: &str, err: csv::Error) -> IngestError {
    let source = match err.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::new(io::ErrorKind::InvalidData, format!("{other:?}")),
    };
    IngestError::Io { path: path.to_string(), source }
}

fn open_file<K: RowSchema>(path: &Path) -> Result<OpenFile, IngestError> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(file);
    let header = reader.byte_headers().map_err(|e| csv_error(&name, e))?.clone();
    // a zero-byte file is an empty shard
    let empty = header.is_empty() || (header.len() == 1 && header[0].is_empty());
    let matches = header.len() == K::COLUMNS.len()
        && header.iter().zip(K::COLUMNS).all(|(h, c)| h == c.as_bytes());
    if !(matches || empty) {
        return Err(IngestError::Header {
            path: name,
            expected: K::COLUMNS.join(","),
            found: header.iter().map(String::from_utf8_lossy).collect::<Vec<_>>().join(","),
        });
    }
    Ok(OpenFile { name, reader, row_number: 0 })
}

/// `*.csv` files directly inside `dir`, sorted by file name.
pub fn list_corpus_files(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    if !dir.is_dir() {
        return Err(IngestError::NotADirectory(dir.display().to_string()));
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_error(dir, e))? {
        let entry = entry.map_err(|e| io_error(dir, e))?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Opens every dump file in `dir` for streaming.
pub fn open_corpus<'t, S: QuarantineSink>(
    dir: &Path,
    taxonomy: &'t CategoryTaxonomy,
    sink: S,
) -> Result<CorpusReader<'t, S>, IngestError> {
    Ok(CsvStream::new(list_corpus_files(dir)?, taxonomy, sink))
}

/// Opens one platform export file for streaming.
pub fn open_platform_export<'t, S: QuarantineSink>(
    path: &Path,
    taxonomy: &'t CategoryTaxonomy,
    sink: S,
) -> Result<ExportReader<'t, S>, IngestError> {
    if !path.is_file() {
        return Err(io_error(path, io::Error::new(io::ErrorKind::NotFound, "no such file")));
    }
    Ok(CsvStream::new(vec![path.to_path_buf()], taxonomy, sink))
}

impl<'t, K: RowSchema, S: QuarantineSink> CsvStream<'t, K, S> {
    pub fn new(files: Vec<PathBuf>, taxonomy: &'t CategoryTaxonomy, sink: S) -> Self {
        let manifest = CorpusManifest {
            files: files.iter().map(|p| p.display().to_string()).collect(),
            ..CorpusManifest::default()
        };
        CsvStream {
            taxonomy,
            pending: files.into_iter(),
            current: None,
            sink,
            manifest,
            bytes: csv::ByteRecord::new(),
            failed: false,
            _schema: PhantomData,
        }
    }

    /// Totals so far; exact once the stream is exhausted.
    pub fn manifest(&self) -> &CorpusManifest {
        &self.manifest
    }

    pub fn finish(self) -> (CorpusManifest, S) {
        (self.manifest, self.sink)
    }

    fn quarantine(&mut self, file: String, row_number: u64, entry: QuarantineEntry) -> Result<(), IngestError> {
        self.manifest.quarantine_count += 1;
        self.sink
            .push(QuarantineRecord {
                file,
                row_number,
                reason: entry.reason,
                field: entry.field,
                raw_row: entry.raw_row,
            })
            .map_err(IngestError::Quarantine)
    }

    fn next_item(&mut self) -> Result<Option<K::Item>, IngestError> {
        loop {
            let Some(open) = self.current.as_mut() else {
                match self.pending.next() {
                    Some(path) => {
                        self.current = Some(open_file::<K>(&path)?);
                        continue;
                    }
                    None => return Ok(None),
                }
            };
            let more = match open.reader.read_byte_record(&mut self.bytes) {
                Ok(more) => more,
                Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => {
                    return Err(csv_error(&open.name, e));
                }
                Err(e) => {
                    open.row_number += 1;
                    let (name, n) = (open.name.clone(), open.row_number);
                    let entry = QuarantineEntry {
                        reason: QuarantineReason::MalformedRow,
                        field: None,
                        detail: e.to_string(),
                        raw_row: Vec::new(),
                    };
                    self.quarantine(name, n, entry)?;
                    continue;
                }
            };
            if !more {
                self.current = None;
                continue;
            }
            open.row_number += 1;
            let (name, n) = (open.name.as_str(), open.row_number);
            let outcome = if self.bytes.len() > K::COLUMNS.len() {
                Err(malformed(&self.bytes, format!(
                    "row has {} cells, header has {}",
                    self.bytes.len(),
                    K::COLUMNS.len()
                )))
            } else {
                match csv::StringRecord::from_byte_record(std::mem::take(&mut self.bytes)) {
                    Ok(row) => {
                        let outcome = K::validate(&row, self.taxonomy);
                        self.bytes = row.into_byte_record();
                        outcome
                    }
                    Err(e) => {
                        self.bytes = e.into_byte_record();
                        Err(malformed(&self.bytes, "row is not valid UTF-8".to_string()))
                    }
                }
            };
            match outcome {
                Ok(item) => {
                    self.manifest.record_count += 1;
                    DateRange::include(&mut self.manifest.date_range, K::date(&item));
                    return Ok(Some(item));
                }
                Err(entry) => {
                    let name = name.to_string();
                    self.quarantine(name, n, entry)?;
                }
            }
        }
    }
}

fn malformed(bytes: &csv::ByteRecord, detail: String) -> QuarantineEntry {
    QuarantineEntry {
        reason: QuarantineReason::MalformedRow,
        field: None,
        detail,
        raw_row: bytes.iter().map(|c| String::from_utf8_lossy(c).into_owned()).collect(),
    }
}

impl<K: RowSchema, S: QuarantineSink> Iterator for CsvStream<'_, K, S> {
    type Item = Result<K::Item, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_item() {
            Ok(item) => item.map(Ok),
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Result of a parallel fold over a corpus.
#[derive(Debug)]
pub struct FoldOutput<A> {
    pub value: A,
    pub manifest: CorpusManifest,
    /// Quarantined rows in file order, then row order.
    pub quarantine: Vec<QuarantineRecord>,
}

/// Folds every valid record of the corpus in `dir`, one file per task on
/// the current rayon pool. Per-file partial results are merged in file
/// order, so the output does not depend on scheduling.
pub fn par_fold_corpus<A, I, F, M>(
    dir: &Path,
    taxonomy: &CategoryTaxonomy,
    init: I,
    fold: F,
    merge: M,
) -> Result<FoldOutput<A>, IngestError>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &SorRecord) + Sync,
    M: Fn(&mut A, A),
{
    let files = list_corpus_files(dir)?;
    let parts = files
        .into_par_iter()
        .map(|path| {
            let mut quarantine = Vec::new();
            let mut acc = init();
            let mut stream = CorpusReader::new(vec![path], taxonomy, &mut quarantine);
            for rec in stream.by_ref() {
                fold(&mut acc, &rec?);
            }
            let manifest = stream.finish().0;
            Ok((acc, manifest, quarantine))
        })
        .collect::<Result<Vec<_>, IngestError>>()?;

    let mut out = FoldOutput { value: init(), manifest: CorpusManifest::default(), quarantine: Vec::new() };
    for (acc, manifest, quarantine) in parts {
        merge(&mut out.value, acc);
        out.manifest.merge(&manifest);
        out.quarantine.extend(quarantine);
    }
    Ok(out)
}
