use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use thiserror::Error;

use crate::aps::{parse_aps_stream, ApsOptions, TextEncoding};
use crate::exec::Exec;
use crate::fetch::{open_archive, FetchError};
use crate::model::{CalendarDate, PatentRecord, SourceFormat};
use crate::xml::{mapping_for, parse_xml_stream, sniff_format};

/// How many parser warnings each source keeps verbatim.
const SAMPLE_WARNINGS: usize = 5;

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub encoding: TextEncoding,
    pub fallback_issue_date: Option<CalendarDate>,
    pub exec: Exec,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub records: u64,
    /// Records (APS sections or XML documents) that could not be converted.
    pub skipped: u64,
    pub warnings: u64,
    pub sample_warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("{0}")]
    Parse(String),
    #[error("cannot tell the input format; pass an explicit era")]
    UnknownFormat,
    #[error(transparent)]
    Archive(#[from] FetchError),
    /// The sink failed; fatal for the whole run.
    #[error("writing output failed: {0}")]
    Sink(#[source] io::Error),
}

/// Guesses the era from the first bytes of a decompressed weekly file.
pub fn sniff_era(head: &[u8]) -> Option<SourceFormat> {
    let start = head.iter().position(|b| !b.is_ascii_whitespace())?;
    let head = head[start..].strip_prefix(b"\xEF\xBB\xBF").unwrap_or(&head[start..]);
    if head.starts_with(b"<") {
        return sniff_format(head);
    }
    let tag = head.get(..4)?;
    (tag == b"PATN" || tag == b"HHHH").then_some(SourceFormat::Aps)
}

/// Parses one decompressed weekly stream, handing each record to `emit` in
/// file order.
pub fn parse_source<R: Read>(
    input: R,
    format: SourceFormat,
    options: &ParseOptions,
    mut emit: impl FnMut(PatentRecord) -> io::Result<()>,
) -> Result<ParseStats, SourceError> {
    let mut stats = ParseStats::default();
    match format {
        SourceFormat::Aps => {
            let aps_options = ApsOptions {
                encoding: options.encoding,
                fallback_issue_date: options.fallback_issue_date,
            };
            let mut parser = parse_aps_stream(input, aps_options);
            for item in parser.by_ref() {
                let record = item.map_err(|e| SourceError::Parse(e.to_string()))?;
                emit(record).map_err(SourceError::Sink)?;
            }
            let report = parser.into_report();
            stats.records = report.records_emitted;
            stats.skipped = report.records_skipped;
            stats.warnings = report.warning_count;
            stats.sample_warnings = report
                .warnings
                .iter()
                .take(SAMPLE_WARNINGS)
                .map(|(line, w)| format!("line {line}: {w}"))
                .collect();
        }
        SourceFormat::Xml2 | SourceFormat::Xml4 => {
            let mapping = mapping_for(format).map_err(|e| SourceError::Parse(e.to_string()))?;
            let mut parser = parse_xml_stream(input, mapping, options.exec);
            for item in parser.by_ref() {
                let record = item.map_err(|e| SourceError::Parse(e.to_string()))?;
                emit(record).map_err(SourceError::Sink)?;
            }
            let report = parser.into_report();
            stats.records = report.records_emitted;
            stats.skipped = report.record_errors;
            stats.warnings = report.warning_count + report.record_errors;
            stats.sample_warnings = report
                .errors
                .iter()
                .chain(&report.warnings)
                .take(SAMPLE_WARNINGS)
                .map(|(doc, w)| format!("document {doc}: {w}"))
                .collect();
        }
    }
    Ok(stats)
}

/// A local input file, decompressed if it is a zip archive.
pub fn open_input(path: &Path) -> Result<Box<dyn Read + Send>, SourceError> {
    let io_err = |source| {
        SourceError::Archive(FetchError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let mut file = File::open(path).map_err(io_err)?;
    let mut magic = [0u8; 4];
    let n = read_up_to(&mut file, &mut magic).map_err(io_err)?;
    if n == 4 && magic == *b"PK\x03\x04" {
        return Ok(Box::new(open_archive(path)?));
    }
    Ok(Box::new(File::open(path).map_err(io_err)?))
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Buffers `input` and resolves its era, sniffing when `era` is not given.
pub fn with_era<R: Read>(input: R, era: Option<SourceFormat>) -> Result<(BufReader<R>, SourceFormat), SourceError> {
    let mut reader = BufReader::with_capacity(1 << 16, input);
    if let Some(era) = era {
        return Ok((reader, era));
    }
    let head = reader.fill_buf().map_err(|e| SourceError::Parse(e.to_string()))?;
    let era = sniff_era(head).ok_or(SourceError::UnknownFormat)?;
    Ok((reader, era))
}
