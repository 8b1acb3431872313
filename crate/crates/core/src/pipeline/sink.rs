use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{PatentRecord, RecordError, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" | "ndjson" => Ok(OutputFormat::Jsonl),
            other => Err(format!("unknown output format {other:?} (expected csv or jsonl)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        })
    }
}

/// Counts bytes that reach the underlying writer.
pub struct CountingWriter<W> {
    inner: W,
    count: u64,
}

impl<W> CountingWriter<W> {
    pub fn new(inner: W) -> Self {
        CountingWriter { inner, count: 0 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.count += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Destination for converted records. Writes are serialized by the caller.
pub trait RecordSink {
    fn write_record(&mut self, record: &PatentRecord) -> io::Result<()>;
    /// Flushes and returns the total bytes written so far.
    fn flush(&mut self) -> io::Result<u64>;
}

pub struct CsvSink<W: Write> {
    writer: csv::Writer<CountingWriter<W>>,
}

impl<W: Write> CsvSink<W> {
    /// Writes the header immediately unless `append` is set.
    pub fn new(out: W, append: bool) -> io::Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(CountingWriter::new(out));
        if !append {
            writer.write_record(CSV_HEADER)?;
        }
        Ok(CsvSink { writer })
    }

    pub fn into_inner(self) -> io::Result<W> {
        let counting = self.writer.into_inner().map_err(|e| e.into_error())?;
        Ok(counting.inner)
    }
}

impl<W: Write> RecordSink for CsvSink<W> {
    fn write_record(&mut self, record: &PatentRecord) -> io::Result<()> {
        self.writer.write_record(record.to_csv_row())?;
        Ok(())
    }

    fn flush(&mut self) -> io::Result<u64> {
        self.writer.flush()?;
        Ok(self.writer.get_ref().count())
    }
}

pub struct JsonlSink<W: Write> {
    writer: io::BufWriter<CountingWriter<W>>,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        JsonlSink {
            writer: io::BufWriter::new(CountingWriter::new(out)),
        }
    }

    pub fn into_inner(self) -> io::Result<W> {
        let counting = self.writer.into_inner().map_err(|e| e.into_error())?;
        Ok(counting.inner)
    }
}

impl<W: Write> RecordSink for JsonlSink<W> {
    fn write_record(&mut self, record: &PatentRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.writer, record)?;
        self.writer.write_all(b"\n")
    }

    fn flush(&mut self) -> io::Result<u64> {
        self.writer.flush()?;
        Ok(self.writer.get_ref().count())
    }
}

/// A boxed sink for `format`.
pub fn sink_for<'w, W: Write + 'w>(format: OutputFormat, out: W, append: bool) -> io::Result<Box<dyn RecordSink + 'w>> {
    Ok(match format {
        OutputFormat::Csv => Box::new(CsvSink::new(out, append)?),
        OutputFormat::Jsonl => Box::new(JsonlSink::new(out)),
    })
}

fn drain<S: RecordSink, I: IntoIterator<Item = PatentRecord>>(mut sink: S, records: I) -> io::Result<u64> {
    for r in records {
        sink.write_record(&r)?;
    }
    sink.flush()
}

/// Header plus one row per record. Returns the bytes written.
pub fn write_csv<I: IntoIterator<Item = PatentRecord>, W: Write>(records: I, out: W) -> io::Result<u64> {
    drain(CsvSink::new(out, false)?, records)
}

/// One JSON object per line. Returns the bytes written.
pub fn write_jsonl<I: IntoIterator<Item = PatentRecord>, W: Write>(records: I, out: W) -> io::Result<u64> {
    drain(JsonlSink::new(out), records)
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected CSV header {0:?}")]
    Header(Vec<String>),
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("row {row}: {source}")]
    Record {
        row: usize,
        #[source]
        source: RecordError,
    },
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<PatentRecord>, ReadError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(ReadError::Header(header));
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let fields: Vec<&str> = row.iter().collect();
        records.push(PatentRecord::from_csv_row(&fields).map_err(|source| ReadError::Record { row: i + 1, source })?);
    }
    Ok(records)
}

pub fn read_jsonl<R: Read>(input: R) -> Result<Vec<PatentRecord>, ReadError> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| ReadError::Json {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Reads converter output, choosing CSV or JSONL from the first byte.
pub fn read_records_from<R: Read>(input: R) -> Result<Vec<PatentRecord>, ReadError> {
    let mut input = BufReader::new(input);
    let is_json = input.fill_buf()?.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{');
    if is_json {
        read_jsonl(input)
    } else {
        read_csv(input)
    }
}

pub fn read_records(path: &Path) -> Result<Vec<PatentRecord>, ReadError> {
    read_records_from(File::open(path)?)
}
