//! Parser for the XML-era weekly files.
//!
//! A weekly file is thousands of standalone documents concatenated together.
//! [`DocumentSplitter`] cuts it into [`XmlDocSlice`]s in one pass; each slice
//! is then parsed independently against the era's [`ElementMapping`], in
//! parallel batches when [`Exec::Parallel`] is selected.

mod dom;
mod mapping;
mod split;

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read};

use serde::Serialize;
use thiserror::Error;

pub use dom::{parse_document, DomError, Element, Node, ParsedDoc};
pub use mapping::{mapping_for, ElementMapping, FieldMapping, KeepIf, MappingError, MappingFields, Source, TextRule};
pub use split::{root_name, DocumentSplitter, SplitError, XmlDocSlice};

use crate::exec::Exec;
use crate::model::{CalendarDate, IpcCode, PatentRecord, RecordError, SourceFormat};

const MAX_STORED_ISSUES: usize = 1000;
const PARALLEL_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordFailure {
    #[error("document is truncated")]
    Truncated,
    #[error(transparent)]
    Malformed(#[from] DomError),
    #[error("root element <{found}> does not match the mapping (expected <{expected}>)")]
    WrongRoot { expected: String, found: String },
    #[error("no document number; record skipped")]
    MissingWku,
    #[error("no valid issue date: {0}")]
    BadIssueDate(String),
    #[error(transparent)]
    Invalid(#[from] RecordError),
}

/// A record-level failure; parsing continues with the next document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("document {ordinal}: {failure}")]
pub struct XmlRecordError {
    pub ordinal: usize,
    pub failure: RecordFailure,
}

#[derive(Debug, Clone)]
pub struct ParsedGrant {
    pub record: PatentRecord,
    pub warnings: Vec<String>,
}

/// Maps one document to a record.
pub fn parse_grant_xml(doc: &XmlDocSlice, mapping: &ElementMapping) -> Result<ParsedGrant, XmlRecordError> {
    let fail = |failure: RecordFailure| XmlRecordError {
        ordinal: doc.ordinal,
        failure,
    };
    if doc.truncated {
        return Err(fail(RecordFailure::Truncated));
    }
    let parsed = parse_document(&doc.bytes).map_err(|e| fail(e.into()))?;
    let root = &parsed.root;
    if root.name != mapping.root {
        return Err(fail(RecordFailure::WrongRoot {
            expected: mapping.root.clone(),
            found: root.name.clone(),
        }));
    }
    let mut warnings = parsed.warnings;
    let fields = &mapping.fields;
    let single = |field: &FieldMapping| mapping.extract(field, root).into_iter().next().unwrap_or_default();

    let wku = single(&fields.wku);
    if wku.trim().is_empty() {
        return Err(fail(RecordFailure::MissingWku));
    }
    let issue_raw = single(&fields.issue_date);
    let issue_date = CalendarDate::parse(&issue_raw).map_err(|e| fail(RecordFailure::BadIssueDate(e.to_string())))?;
    let app_raw = single(&fields.app_date);
    let app_date = if app_raw.is_empty() {
        None
    } else {
        match CalendarDate::parse(&app_raw) {
            Ok(d) => Some(d),
            Err(e) => {
                warnings.push(format!("application date {e}; stored as absent"));
                None
            }
        }
    };
    let mut ipc_codes = Vec::new();
    for raw in mapping.extract(&fields.ipc_codes, root) {
        match IpcCode::parse(&raw) {
            Ok(code) => ipc_codes.push(code),
            Err(e) => warnings.push(e.to_string()),
        }
    }
    let record = PatentRecord::builder(wku, issue_date)
        .title(single(&fields.title))
        .app_date(app_date)
        .inventors(mapping.extract(&fields.inventors, root))
        .assignees(mapping.extract(&fields.assignees, root))
        .ipc_codes(ipc_codes)
        .references(mapping.extract(&fields.references, root))
        .claims(mapping.extract(&fields.claims, root).join("\n"))
        .build()
        .map_err(|e| fail(e.into()))?;
    if record.claims().is_empty() {
        warnings.push(crate::model::NO_CLAIMS.to_string());
    }
    Ok(ParsedGrant { record, warnings })
}

/// Guesses the era of an XML document from its root element.
pub fn sniff_format(bytes: &[u8]) -> Option<SourceFormat> {
    match root_name(bytes)? {
        b"us-patent-grant" => Some(SourceFormat::Xml4),
        b"PATDOC" => Some(SourceFormat::Xml2),
        _ => None,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct XmlParseReport {
    pub slices: u64,
    pub records_emitted: u64,
    pub record_errors: u64,
    pub warning_count: u64,
    /// First 1000 record-level errors, as `(ordinal, message)`.
    pub errors: Vec<(usize, String)>,
    /// First 1000 field-level warnings, as `(ordinal, message)`.
    pub warnings: Vec<(usize, String)>,
}

/// Iterator of records over a concatenated XML weekly stream. Only fatal
/// (stream-level) errors are yielded; record-level errors go to the report.
pub struct XmlGrantParser<'m, R> {
    splitter: DocumentSplitter<R>,
    mapping: &'m ElementMapping,
    exec: Exec,
    ready: VecDeque<PatentRecord>,
    pending_error: Option<SplitError>,
    report: XmlParseReport,
    exhausted: bool,
}

pub fn parse_xml_stream<R: Read>(input: R, mapping: &ElementMapping, exec: Exec) -> XmlGrantParser<'_, BufReader<R>> {
    XmlGrantParser::new(BufReader::with_capacity(1 << 16, input), mapping, exec)
}

impl<'m, R: BufRead> XmlGrantParser<'m, R> {
    pub fn new(reader: R, mapping: &'m ElementMapping, exec: Exec) -> Self {
        XmlGrantParser {
            splitter: DocumentSplitter::new(reader),
            mapping,
            exec,
            ready: VecDeque::new(),
            pending_error: None,
            report: XmlParseReport::default(),
            exhausted: false,
        }
    }

    pub fn report(&self) -> &XmlParseReport {
        &self.report
    }

    pub fn into_report(self) -> XmlParseReport {
        self.report
    }

    /// Whitespace preceding the first document.
    pub fn leading(&self) -> &[u8] {
        self.splitter.leading()
    }

    /// Splits the next batch of documents and parses them.
    fn fill(&mut self) {
        let batch_size = if self.exec.is_parallel() { PARALLEL_BATCH } else { 1 };
        let mut batch = Vec::with_capacity(batch_size);
        while batch.len() < batch_size {
            match self.splitter.next() {
                Some(Ok(slice)) => batch.push(slice),
                Some(Err(e)) => {
                    self.exhausted = true;
                    self.pending_error = Some(e);
                    break;
                }
                None => {
                    self.exhausted = true;
                    break;
                }
            }
        }
        self.report.slices += batch.len() as u64;
        let mapping = self.mapping;
        let results = self
            .exec
            .map(batch, |slice| (slice.ordinal, parse_grant_xml(&slice, mapping)));
        for (ordinal, result) in results {
            match result {
                Ok(parsed) => {
                    self.report.records_emitted += 1;
                    for w in parsed.warnings {
                        self.report.warning_count += 1;
                        if self.report.warnings.len() < MAX_STORED_ISSUES {
                            self.report.warnings.push((ordinal, w));
                        }
                    }
                    self.ready.push_back(parsed.record);
                }
                Err(e) => {
                    self.report.record_errors += 1;
                    if self.report.errors.len() < MAX_STORED_ISSUES {
                        self.report.errors.push((e.ordinal, e.failure.to_string()));
                    }
                }
            }
        }
    }
}

impl<R: BufRead> Iterator for XmlGrantParser<'_, R> {
    type Item = Result<PatentRecord, SplitError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(record) = self.ready.pop_front() {
                return Some(Ok(record));
            }
            if let Some(e) = self.pending_error.take() {
                return Some(Err(e));
            }
            if self.exhausted {
                return None;
            }
            self.fill();
        }
    }
}
