//! Streaming parser for the 1976-2001 fixed-tag full-text weekly files.
//!
//! Each line carries a tag in columns 1-4 and its value from column 6; a line
//! with a blank tag continues the previous field. Patents start at `PATN`
//! section headers and are emitted one at a time, so memory is bounded by the
//! largest single patent.

mod tags;

use std::fmt;
use std::io::{self, BufRead, BufReader, Read};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::model::{CalendarDate, IpcCode, PatentRecord, NO_CLAIMS};
use tags::{SectionKind, SectionSpec, Target};

/// Stored warning messages are capped; the count keeps going.
const MAX_STORED_WARNINGS: usize = 1000;

#[derive(Debug, Error)]
pub enum ApsError {
    #[error("failed to read fixed-tag input: {0}")]
    Io(#[from] io::Error),
}

/// Single-byte decoding applied to each input line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TextEncoding {
    #[default]
    Latin1,
    /// UTF-8, with invalid sequences replaced.
    Utf8,
}

impl TextEncoding {
    fn decode(self, bytes: &[u8]) -> String {
        match self {
            TextEncoding::Latin1 => bytes.iter().map(|&b| b as char).collect(),
            TextEncoding::Utf8 => String::from_utf8_lossy(bytes).into_owned(),
        }
    }
}

impl FromStr for TextEncoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "latin1" | "latin-1" | "iso-8859-1" | "iso8859-1" => Ok(TextEncoding::Latin1),
            "utf8" | "utf-8" => Ok(TextEncoding::Utf8),
            other => Err(format!("unsupported encoding {other:?} (expected latin1 or utf8)")),
        }
    }
}

impl fmt::Display for TextEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TextEncoding::Latin1 => "latin1",
            TextEncoding::Utf8 => "utf8",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ApsOptions {
    pub encoding: TextEncoding,
    /// Issue date used when a record's ISD is missing or invalid, normally the
    /// grant Tuesday of the week being parsed. Without it such records are skipped.
    pub fallback_issue_date: Option<CalendarDate>,
}

/// One physical line split into tag and value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApsLine {
    /// Columns 1-4, right-trimmed; empty for a continuation line.
    pub tag: String,
    /// Everything after column 5, right-trimmed.
    pub value: String,
    pub is_continuation: bool,
    pub raw: String,
}

impl ApsLine {
    pub fn parse(raw: &str) -> ApsLine {
        let head: String = raw.chars().take(4).collect();
        let value: String = raw.chars().skip(5).collect();
        let tag = head.trim().to_string();
        ApsLine {
            is_continuation: tag.is_empty(),
            tag,
            value: value.trim_end().to_string(),
            raw: raw.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ApsParseReport {
    pub records_emitted: u64,
    pub records_skipped: u64,
    pub patn_headers: u64,
    pub lines_read: u64,
    pub skipped_fields: u64,
    pub warning_count: u64,
    /// `(line_number, message)`, capped at the first 1000.
    pub warnings: Vec<(u64, String)>,
}

impl ApsParseReport {
    fn warn(&mut self, line: u64, message: impl Into<String>) {
        self.warning_count += 1;
        if self.warnings.len() < MAX_STORED_WARNINGS {
            self.warnings.push((line, message.into()));
        }
    }
}

/// Raw values gathered for one PATN section.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Draft {
    pub header_line: u64,
    pub wku: String,
    pub title: String,
    pub app_date: String,
    pub issue_date: String,
    pub inventors: Vec<String>,
    pub assignees: Vec<String>,
    pub ipc: Vec<(u64, String)>,
    pub references: Vec<String>,
    pub claim_lines: Vec<String>,
    pending_claim_number: Option<String>,
}

impl Draft {
    fn apply(&mut self, target: Target, value: &str, line: u64) {
        match target {
            Target::Wku => self.wku.push_str(value),
            Target::Title => self.title.push_str(value),
            Target::AppDate => self.app_date.push_str(value),
            Target::IssueDate => self.issue_date.push_str(value),
            Target::Inventor => self.inventors.push(value.to_string()),
            Target::Assignee => self.assignees.push(value.to_string()),
            Target::Ipc => self.ipc.push((line, value.to_string())),
            Target::Reference => self.references.push(value.to_string()),
            Target::ClaimNumber => {
                self.flush_claim_number();
                self.pending_claim_number = Some(value.trim().to_string());
            }
            Target::ClaimText => {
                let text = match self.pending_claim_number.take() {
                    Some(num) if !num.is_empty() => format!("{num} {}", value.trim_start()),
                    _ => value.to_string(),
                };
                self.claim_lines.push(text);
            }
            Target::Ignore => {}
        }
    }

    fn continue_field(&mut self, target: Target, value: &str) {
        fn append(s: &mut String, value: &str) {
            if !s.is_empty() {
                s.push(' ');
            }
            s.push_str(value.trim());
        }
        match target {
            Target::Wku => self.wku.push_str(value.trim()),
            Target::AppDate => self.app_date.push_str(value.trim()),
            Target::IssueDate => self.issue_date.push_str(value.trim()),
            Target::Title => append(&mut self.title, value),
            Target::Inventor => self.inventors.last_mut().into_iter().for_each(|s| append(s, value)),
            Target::Assignee => self.assignees.last_mut().into_iter().for_each(|s| append(s, value)),
            Target::Ipc => self.ipc.last_mut().into_iter().for_each(|(_, s)| append(s, value)),
            Target::Reference => self.references.last_mut().into_iter().for_each(|s| append(s, value)),
            Target::ClaimNumber => {
                if let Some(num) = self.pending_claim_number.as_mut() {
                    append(num, value);
                }
            }
            Target::ClaimText => self.claim_lines.push(value.to_string()),
            Target::Ignore => {}
        }
    }

    fn flush_claim_number(&mut self) {
        if let Some(num) = self.pending_claim_number.take() {
            if !num.is_empty() {
                self.claim_lines.push(num);
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Section {
    /// Before the first PATN.
    Outside,
    Known(&'static SectionSpec),
    Unknown,
}

/// Section state machine behind [`ApsParser`].
#[derive(Debug)]
pub struct SectionMachine {
    section: Section,
    draft: Option<Draft>,
    last_target: Option<Target>,
    report: ApsParseReport,
}

impl Default for SectionMachine {
    fn default() -> Self {
        SectionMachine {
            section: Section::Outside,
            draft: None,
            last_target: None,
            report: ApsParseReport::default(),
        }
    }
}

impl SectionMachine {
    pub fn report(&self) -> &ApsParseReport {
        &self.report
    }

    /// Switches to the section named by `tag`. A PATN header returns the
    /// pending draft (if any) and starts a fresh one; an unrecognized header
    /// enters a skip state that lasts until the next section boundary.
    pub fn dispatch_section(&mut self, tag: &str, line: u64) -> Option<Draft> {
        self.last_target = None;
        match tags::section(tag) {
            Some(spec) if spec.kind == SectionKind::Patent => {
                self.report.patn_headers += 1;
                self.section = Section::Known(spec);
                self.draft.replace(Draft {
                    header_line: line,
                    ..Draft::default()
                })
            }
            Some(spec) => {
                self.section = Section::Known(spec);
                None
            }
            None => {
                self.report.skipped_fields += 1;
                self.report.warn(line, format!("unknown section {tag:?} skipped"));
                self.section = Section::Unknown;
                None
            }
        }
    }

    /// Feeds one line; returns a completed draft when a PATN header closes one.
    pub fn feed(&mut self, line: &ApsLine, line_no: u64) -> Option<Draft> {
        if line.is_continuation {
            if let (Some(target), Some(draft)) = (self.last_target, self.draft.as_mut()) {
                draft.continue_field(target, &line.value);
            }
            return None;
        }
        if self.is_section_header(line) {
            return self.dispatch_section(&line.tag, line_no);
        }
        let tag = line.tag.as_str();
        let target = match self.section {
            Section::Unknown => Some(Target::Ignore),
            Section::Outside if tags::FILE_HEADER_TAGS.contains(&tag) => Some(Target::Ignore),
            Section::Outside => {
                self.report.skipped_fields += 1;
                self.report
                    .warn(line_no, format!("field {tag:?} outside any patent skipped"));
                None
            }
            Section::Known(spec) => {
                let target = spec.target(tag);
                if target.is_none() {
                    self.report.skipped_fields += 1;
                    self.report
                        .warn(line_no, format!("unknown tag {tag:?} in {} skipped", spec.name));
                }
                target
            }
        };
        self.last_target = target;
        if let (Some(target), Some(draft)) = (target, self.draft.as_mut()) {
            draft.apply(target, &line.value, line_no);
        }
        None
    }

    fn is_section_header(&self, line: &ApsLine) -> bool {
        if tags::section(&line.tag).is_some() {
            return true;
        }
        if !line.value.trim().is_empty() || tags::FILE_HEADER_TAGS.contains(&line.tag.as_str()) {
            return false;
        }
        match self.section {
            Section::Known(spec) => spec.kind != SectionKind::Opaque && spec.target(&line.tag).is_none(),
            Section::Outside => true,
            Section::Unknown => false,
        }
    }

    /// Takes the pending draft at end of input.
    pub fn finish(&mut self) -> Option<Draft> {
        self.last_target = None;
        self.section = Section::Outside;
        self.draft.take()
    }

    /// Turns a completed draft into a record, or counts it as skipped.
    pub fn complete(&mut self, mut draft: Draft, fallback_issue_date: Option<CalendarDate>) -> Option<PatentRecord> {
        let at = draft.header_line;
        draft.flush_claim_number();
        if draft.wku.trim().is_empty() {
            self.report.records_skipped += 1;
            self.report.warn(at, "patent section without WKU skipped");
            return None;
        }
        let wku = draft.wku.trim().to_string();
        let issue_date = match CalendarDate::parse(&draft.issue_date) {
            Ok(d) => d,
            Err(e) => match fallback_issue_date {
                Some(d) => {
                    self.report.skipped_fields += 1;
                    self.report
                        .warn(at, format!("{wku}: issue date {e}; using week grant date {d}"));
                    d
                }
                None => {
                    self.report.records_skipped += 1;
                    self.report.warn(at, format!("{wku}: issue date {e}; record skipped"));
                    return None;
                }
            },
        };
        let app_date = if draft.app_date.trim().is_empty() {
            None
        } else {
            match CalendarDate::parse(&draft.app_date) {
                Ok(d) => Some(d),
                Err(e) => {
                    self.report.skipped_fields += 1;
                    self.report
                        .warn(at, format!("{wku}: application date {e}; stored as absent"));
                    None
                }
            }
        };
        let mut ipc_codes = Vec::with_capacity(draft.ipc.len());
        for (line, raw) in &draft.ipc {
            match IpcCode::parse(&normalize_icl(raw)) {
                Ok(code) => ipc_codes.push(code),
                Err(e) => {
                    self.report.skipped_fields += 1;
                    self.report.warn(*line, format!("{wku}: {e}"));
                }
            }
        }
        let built = PatentRecord::builder(wku, issue_date)
            .title(draft.title)
            .app_date(app_date)
            .inventors(draft.inventors)
            .assignees(draft.assignees)
            .ipc_codes(ipc_codes)
            .references(draft.references)
            .claims(draft.claim_lines.join("\n"))
            .build();
        match built {
            Ok(record) => {
                if record.claims().is_empty() {
                    self.report.warn(at, format!("{}: {NO_CLAIMS}", record.wku()));
                }
                self.report.records_emitted += 1;
                Some(record)
            }
            Err(e) => {
                self.report.records_skipped += 1;
                self.report.warn(at, format!("record skipped: {e}"));
                None
            }
        }
    }
}

/// Rewrites the fixed-width ICL layout (subclass in columns 1-4, main group
/// right-aligned in 5-7, subgroup after) to the slash form: `A61K 3166` becomes
/// `A61K 31/66`. Values already containing a slash pass through.
pub fn normalize_icl(raw: &str) -> String {
    let t = raw.trim();
    if t.contains('/') || !t.is_ascii() || t.len() < 6 {
        return t.to_string();
    }
    let (head, rest) = t.split_at(4);
    let hb = head.as_bytes();
    let looks_like_subclass =
        hb[0].is_ascii_alphabetic() && hb[1].is_ascii_digit() && hb[2].is_ascii_digit() && hb[3].is_ascii_alphabetic();
    if !looks_like_subclass || !rest.bytes().all(|b| b.is_ascii_digit() || b == b' ') {
        return t.to_string();
    }
    let (group, sub) = rest.split_at(3);
    let (group, sub) = (group.trim(), sub.trim());
    if group.is_empty() || sub.is_empty() || group.contains(' ') || sub.contains(' ') {
        return t.to_string();
    }
    format!("{head} {group}/{sub}")
}

/// Iterator of records over a fixed-tag text stream.
pub struct ApsParser<R> {
    reader: R,
    options: ApsOptions,
    machine: SectionMachine,
    buf: Vec<u8>,
    line_no: u64,
    done: bool,
}

/// Parses a fixed-tag stream lazily; inspect [`ApsParser::report`] after
/// draining the iterator.
pub fn parse_aps_stream<R: Read>(input: R, options: ApsOptions) -> ApsParser<BufReader<R>> {
    ApsParser::new(BufReader::with_capacity(1 << 16, input), options)
}

impl<R: BufRead> ApsParser<R> {
    pub fn new(reader: R, options: ApsOptions) -> Self {
        ApsParser {
            reader,
            options,
            machine: SectionMachine::default(),
            buf: Vec::new(),
            line_no: 0,
            done: false,
        }
    }

    pub fn report(&self) -> &ApsParseReport {
        self.machine.report()
    }

    pub fn into_report(self) -> ApsParseReport {
        self.machine.report
    }
}

impl<R: BufRead> Iterator for ApsParser<R> {
    type Item = Result<PatentRecord, ApsError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => {
                    self.done = true;
                    return Some(Err(ApsError::Io(e)));
                }
                Ok(0) => {
                    self.done = true;
                    let draft = self.machine.finish()?;
                    return self.machine.complete(draft, self.options.fallback_issue_date).map(Ok);
                }
                Ok(_) => {}
            }
            self.line_no += 1;
            self.machine.report.lines_read += 1;
            let mut bytes = self.buf.as_slice();
            while let [rest @ .., b'\n' | b'\r'] = bytes {
                bytes = rest;
            }
            let line = ApsLine::parse(&self.options.encoding.decode(bytes));
            if let Some(draft) = self.machine.feed(&line, self.line_no) {
                if let Some(record) = self.machine.complete(draft, self.options.fallback_issue_date) {
                    return Some(Ok(record));
                }
            }
        }
        None
    }
}
