//! Week-range runs: resolve, fetch, parse and serialize, with a summary.
//!
//! Weeks are processed in windows of `jobs`; within a window they are fetched
//! and parsed concurrently, then written to the sink in ascending week order.

mod sink;
mod source;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

pub use sink::{
    read_csv, read_jsonl, read_records, read_records_from, sink_for, write_csv, write_jsonl, CountingWriter, CsvSink,
    JsonlSink, OutputFormat, ReadError, RecordSink,
};
pub use source::{open_input, parse_source, sniff_era, with_era, ParseOptions, ParseStats, SourceError};

use crate::aps::TextEncoding;
use crate::exec::Exec;
use crate::fetch::{
    resolve_plan, CacheEntry, CountingReader, FetchError, FetchPlan, Fetcher, NamingTemplates, DEFAULT_BASE_URL,
};
use crate::model::{PatentRecord, SourceFormat, WeekSpec};

/// Receives one-line progress messages.
pub type Progress = Arc<dyn Fn(&str) + Send + Sync>;

#[derive(Clone)]
pub struct PipelineConfig {
    pub base_url: String,
    pub templates: NamingTemplates,
    /// Weeks fetched and parsed concurrently.
    pub jobs: usize,
    pub encoding: TextEncoding,
    pub exec: Exec,
    pub progress: Option<Progress>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            base_url: DEFAULT_BASE_URL.to_string(),
            templates: NamingTemplates::default(),
            jobs: 4,
            encoding: TextEncoding::default(),
            exec: Exec::default(),
            progress: None,
        }
    }
}

impl PipelineConfig {
    fn report(&self, message: &str) {
        if let Some(progress) = &self.progress {
            progress(message);
        }
    }

    pub fn plan(&self, week: WeekSpec) -> FetchPlan {
        resolve_plan(week, &self.base_url, &self.templates)
    }
}

/// Where week archives come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeekSource {
    /// Use the cache, downloading what is missing.
    Download,
    /// Use the cache only; missing weeks fail.
    CacheOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceStats {
    /// Week label (`1976-wk01`) or input path.
    pub source: String,
    pub week: Option<WeekSpec>,
    pub format: SourceFormat,
    pub compressed_bytes: u64,
    pub decompressed_bytes: u64,
    pub records: u64,
    pub skipped: u64,
    pub warnings: u64,
    pub output_bytes: u64,
    pub sample_warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceFailure {
    pub source: String,
    pub reason: String,
}

/// Outcome of a run. Weeks and local input files are both counted as
/// "weeks" here.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub weeks_requested: usize,
    pub weeks_fetched: usize,
    pub weeks_failed: Vec<SourceFailure>,
    pub records_written: u64,
    pub records_skipped: u64,
    pub warnings_total: u64,
    /// Records whose WKU was already written earlier in the run.
    pub duplicate_wkus: u64,
    /// Includes the CSV header.
    pub output_bytes: u64,
    pub input_bytes_compressed: u64,
    pub input_bytes_decompressed: u64,
    /// `output_bytes / input_bytes_decompressed`.
    pub size_ratio: Option<f64>,
    pub sources: Vec<SourceStats>,
}

impl RunSummary {
    pub fn is_partial(&self) -> bool {
        !self.weeks_failed.is_empty()
    }

    fn add(&mut self, stats: SourceStats) {
        self.weeks_fetched += 1;
        self.records_written += stats.records;
        self.records_skipped += stats.skipped;
        self.warnings_total += stats.warnings;
        self.input_bytes_compressed += stats.compressed_bytes;
        self.input_bytes_decompressed += stats.decompressed_bytes;
        self.sources.push(stats);
    }

    fn fail(&mut self, source: String, reason: String) {
        self.weeks_failed.push(SourceFailure { source, reason });
    }

    fn finish(&mut self, output_bytes: u64) {
        self.output_bytes = output_bytes;
        self.size_ratio =
            (self.input_bytes_decompressed > 0).then(|| output_bytes as f64 / self.input_bytes_decompressed as f64);
    }

    pub fn write_json<W: io::Write>(&self, out: W) -> io::Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Human-readable table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<28} {:>6} {:>10} {:>8} {:>8} {:>12} {:>12} {:>12}",
            "source", "era", "records", "skipped", "warnings", "zip bytes", "raw bytes", "out bytes"
        );
        for s in &self.sources {
            let _ = writeln!(
                out,
                "{:<28} {:>6} {:>10} {:>8} {:>8} {:>12} {:>12} {:>12}",
                s.source,
                s.format.name(),
                s.records,
                s.skipped,
                s.warnings,
                s.compressed_bytes,
                s.decompressed_bytes,
                s.output_bytes
            );
        }
        for f in &self.weeks_failed {
            let _ = writeln!(out, "{:<28} FAILED: {}", f.source, f.reason);
        }
        let _ = writeln!(
            out,
            "{} of {} succeeded, {} failed; {} records written, {} skipped, {} warnings, {} duplicate WKUs",
            self.weeks_fetched,
            self.weeks_requested,
            self.weeks_failed.len(),
            self.records_written,
            self.records_skipped,
            self.warnings_total,
            self.duplicate_wkus
        );
        if let Some(ratio) = self.size_ratio {
            let _ = writeln!(
                out,
                "output {} bytes = {:.1}% of {} decompressed input bytes",
                self.output_bytes,
                ratio * 100.0,
                self.input_bytes_decompressed
            );
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no weeks requested")]
    NoWeeks,
    #[error("no input files given")]
    NoInputs,
    #[error("writing output failed: {0}")]
    Sink(#[source] io::Error),
    #[error("every requested input failed:{}", render_failures(&.0.weeks_failed))]
    AllFailed(Box<RunSummary>),
}

fn render_failures(failures: &[SourceFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("\n  {}: {}", f.source, f.reason))
        .collect()
}

struct WeekBatch {
    stats: SourceStats,
    records: Vec<PatentRecord>,
}

fn locate(
    week: WeekSpec,
    fetcher: &Fetcher,
    config: &PipelineConfig,
    mode: WeekSource,
) -> Result<(FetchPlan, CacheEntry), String> {
    let plan = config.plan(week);
    let entry = match mode {
        WeekSource::Download => fetcher.fetch(&plan).map_err(|e| e.to_string())?,
        WeekSource::CacheOnly => fetcher
            .lookup(&plan)
            .map_err(|e| e.to_string())?
            .ok_or_else(|| FetchError::NotCached(plan.url.clone()).to_string())?,
    };
    Ok((plan, entry))
}

fn process_week(
    week: WeekSpec,
    fetcher: &Fetcher,
    config: &PipelineConfig,
    mode: WeekSource,
) -> Result<WeekBatch, String> {
    let (plan, entry) = locate(week, fetcher, config, mode)?;
    config.report(&format!("{week}: parsing {}", entry.cache_path.display()));
    let mut counted = CountingReader::new(fetcher.open(&entry).map_err(|e| e.to_string())?);
    let options = ParseOptions {
        encoding: config.encoding,
        fallback_issue_date: Some(plan.issue_date),
        exec: config.exec,
    };
    let mut records = Vec::new();
    let parsed = parse_source(&mut counted, plan.format, &options, |r| {
        records.push(r);
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    Ok(WeekBatch {
        stats: SourceStats {
            source: week.to_string(),
            week: Some(week),
            format: plan.format,
            compressed_bytes: entry.byte_size,
            decompressed_bytes: counted.count(),
            records: parsed.records,
            skipped: parsed.skipped,
            warnings: parsed.warnings,
            output_bytes: 0,
            sample_warnings: parsed.sample_warnings,
        },
        records,
    })
}

fn sorted_weeks(weeks: &[WeekSpec]) -> Result<Vec<WeekSpec>, PipelineError> {
    if weeks.is_empty() {
        return Err(PipelineError::NoWeeks);
    }
    let mut weeks = weeks.to_vec();
    weeks.sort();
    weeks.dedup();
    Ok(weeks)
}

fn conclude(summary: RunSummary) -> Result<RunSummary, PipelineError> {
    if summary.weeks_fetched == 0 && summary.weeks_requested > 0 {
        return Err(PipelineError::AllFailed(Box::new(summary)));
    }
    Ok(summary)
}

/// Fetches, parses and writes every week in `weeks`, in ascending order.
/// A failing week is recorded in the summary and the run continues.
pub fn get_bulk_patent_data(
    weeks: &[WeekSpec],
    sink: &mut dyn RecordSink,
    fetcher: &Fetcher,
    config: &PipelineConfig,
    mode: WeekSource,
) -> Result<RunSummary, PipelineError> {
    let weeks = sorted_weeks(weeks)?;
    let mut summary = RunSummary {
        weeks_requested: weeks.len(),
        ..RunSummary::default()
    };
    let mut seen: HashSet<String> = HashSet::new();
    let mut written = sink.flush().map_err(PipelineError::Sink)?;
    let jobs = config.jobs.max(1);
    for window in weeks.chunks(jobs) {
        let results = config.exec.with_threads(jobs, || {
            config.exec.map(window.to_vec(), |week| {
                (week, process_week(week, fetcher, config, mode))
            })
        });
        for (week, result) in results {
            match result {
                Ok(batch) => {
                    let mut stats = batch.stats;
                    for record in &batch.records {
                        if !seen.insert(record.wku().to_string()) {
                            summary.duplicate_wkus += 1;
                        }
                        sink.write_record(record).map_err(PipelineError::Sink)?;
                    }
                    let now = sink.flush().map_err(PipelineError::Sink)?;
                    stats.output_bytes = now - written;
                    written = now;
                    config.report(&format!("{week}: {} records", stats.records));
                    summary.add(stats);
                }
                Err(reason) => {
                    config.report(&format!("{week}: failed: {reason}"));
                    summary.fail(week.to_string(), reason);
                }
            }
        }
    }
    summary.finish(written);
    conclude(summary)
}

/// Populates the cache for `weeks` without parsing.
pub fn fetch_weeks(
    weeks: &[WeekSpec],
    fetcher: &Fetcher,
    config: &PipelineConfig,
) -> Result<RunSummary, PipelineError> {
    let weeks = sorted_weeks(weeks)?;
    let mut summary = RunSummary {
        weeks_requested: weeks.len(),
        ..RunSummary::default()
    };
    let jobs = config.jobs.max(1);
    let results = config.exec.with_threads(jobs, || {
        config.exec.map(weeks.clone(), |week| {
            (week, locate(week, fetcher, config, WeekSource::Download))
        })
    });
    for (week, result) in results {
        match result {
            Ok((plan, entry)) => {
                config.report(&format!("{week}: cached {}", entry.cache_path.display()));
                summary.add(SourceStats {
                    source: week.to_string(),
                    week: Some(week),
                    format: plan.format,
                    compressed_bytes: entry.byte_size,
                    decompressed_bytes: 0,
                    records: 0,
                    skipped: 0,
                    warnings: 0,
                    output_bytes: 0,
                    sample_warnings: Vec::new(),
                });
            }
            Err(reason) => {
                config.report(&format!("{week}: failed: {reason}"));
                summary.fail(week.to_string(), reason);
            }
        }
    }
    summary.finish(0);
    conclude(summary)
}

/// Converts local weekly files (raw or zipped), in the order given. The era
/// is sniffed per file unless `era` is set.
pub fn convert_files(
    inputs: &[PathBuf],
    era: Option<SourceFormat>,
    sink: &mut dyn RecordSink,
    config: &PipelineConfig,
) -> Result<RunSummary, PipelineError> {
    if inputs.is_empty() {
        return Err(PipelineError::NoInputs);
    }
    let mut summary = RunSummary {
        weeks_requested: inputs.len(),
        ..RunSummary::default()
    };
    let mut seen: HashSet<String> = HashSet::new();
    let mut written = sink.flush().map_err(PipelineError::Sink)?;
    for path in inputs {
        let label = path.display().to_string();
        match convert_one(path, era, sink, config, &mut seen) {
            Ok((mut stats, duplicates)) => {
                let now = sink.flush().map_err(PipelineError::Sink)?;
                stats.output_bytes = now - written;
                written = now;
                summary.duplicate_wkus += duplicates;
                config.report(&format!("{label}: {} records", stats.records));
                summary.add(stats);
            }
            Err(SourceError::Sink(e)) => return Err(PipelineError::Sink(e)),
            Err(e) => {
                config.report(&format!("{label}: failed: {e}"));
                summary.fail(label, e.to_string());
            }
        }
    }
    summary.finish(written);
    conclude(summary)
}

fn convert_one(
    path: &Path,
    era: Option<SourceFormat>,
    sink: &mut dyn RecordSink,
    config: &PipelineConfig,
    seen: &mut HashSet<String>,
) -> Result<(SourceStats, u64), SourceError> {
    let compressed = std::fs::metadata(path)
        .map_err(|source| {
            SourceError::Archive(FetchError::Io {
                path: path.to_path_buf(),
                source,
            })
        })?
        .len();
    let mut counted = CountingReader::new(open_input(path)?);
    let (reader, format) = with_era(&mut counted, era)?;
    let options = ParseOptions {
        encoding: config.encoding,
        fallback_issue_date: None,
        exec: config.exec,
    };
    let mut duplicates = 0;
    let parsed = parse_source(reader, format, &options, |record| {
        if !seen.insert(record.wku().to_string()) {
            duplicates += 1;
        }
        sink.write_record(&record)
    })?;
    let stats = SourceStats {
        source: path.display().to_string(),
        week: None,
        format,
        compressed_bytes: compressed,
        decompressed_bytes: counted.count(),
        records: parsed.records,
        skipped: parsed.skipped,
        warnings: parsed.warnings,
        output_bytes: 0,
        sample_warnings: parsed.sample_warnings,
    };
    Ok((stats, duplicates))
}
