mod args;

use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;

use args::{Analysis, CacheArgs, Cli, Command, ConvertArgs, FetchArgs, GetArgs, OutputArgs, StatsArgs};
use patentbulk_core::analytics::{self, write_table};
use patentbulk_core::fetch::{DefaultTransport, Fetcher, RetryPolicy};
use patentbulk_core::pipeline::{
    convert_files, fetch_weeks, get_bulk_patent_data, read_records, read_records_from, sink_for, PipelineConfig,
    PipelineError, RunSummary, WeekSource,
};
use patentbulk_core::Exec;

/// Exit status for a run where some weeks failed but output was written.
const EXIT_PARTIAL: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(EXIT_PARTIAL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

enum Outcome {
    Complete,
    Partial,
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Fetch(a) => fetch(cli, a),
        Command::Convert(a) => convert(cli, a),
        Command::Get(a) => get(cli, a),
        Command::Stats(a) => stats(cli, a).map(|()| Outcome::Complete),
    }
}

fn exec(cli: &Cli) -> Exec {
    if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn pipeline_config(cli: &Cli, cache: &CacheArgs, output: Option<&OutputArgs>) -> PipelineConfig {
    let mut config = PipelineConfig {
        base_url: cache.base_url.clone(),
        jobs: cache.jobs.max(1),
        exec: exec(cli),
        ..PipelineConfig::default()
    };
    if let Some(output) = output {
        config.encoding = output.encoding;
    }
    if !cli.quiet {
        config.progress = Some(Arc::new(|message: &str| eprintln!("{message}")));
    }
    config
}

fn fetcher(cache: &CacheArgs, retries: u32) -> Fetcher {
    let retry = RetryPolicy {
        attempts: retries.max(1),
        ..RetryPolicy::default()
    };
    Fetcher::new(
        &cache.cache_dir,
        Arc::new(DefaultTransport::new(Duration::from_secs(120))),
        retry,
    )
}

fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn open_output(path: &Path, append: bool) -> Result<Box<dyn Write>> {
    if is_stdio(path) {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let file = if append {
        OpenOptions::new().create(true).append(true).open(path)
    } else {
        File::create(path)
    }
    .with_context(|| format!("cannot open output {}", path.display()))?;
    Ok(Box::new(BufWriter::new(file)))
}

/// Runs `body` against a sink on the configured output and reports the result.
fn with_sink(
    cli: &Cli,
    output: &OutputArgs,
    body: impl FnOnce(&mut dyn patentbulk_core::pipeline::RecordSink) -> Result<RunSummary, PipelineError>,
) -> Result<Outcome> {
    let out = open_output(&output.output, output.append)?;
    let mut sink = sink_for(output.format, out, output.append)
        .with_context(|| format!("cannot write to {}", output.output.display()))?;
    let result = body(sink.as_mut());
    let flushed = sink.flush();
    drop(sink);
    let summary = match result {
        Ok(summary) => summary,
        Err(PipelineError::Sink(e)) => {
            return Err(anyhow!(e))
                .with_context(|| format!("writing {} failed; output is partial", output.output.display()))
        }
        Err(e) => {
            if let PipelineError::AllFailed(summary) = &e {
                write_summary_json(summary, output.summary_json.as_deref())?;
            }
            return Err(e.into());
        }
    };
    flushed.with_context(|| format!("writing {} failed; output is partial", output.output.display()))?;
    report(cli, &summary, output.summary_json.as_deref())
}

fn write_summary_json(summary: &RunSummary, path: Option<&Path>) -> Result<()> {
    if let Some(path) = path {
        File::create(path)
            .and_then(|file| {
                let mut w = BufWriter::new(file);
                summary.write_json(&mut w)?;
                w.write_all(b"\n")?;
                w.flush()
            })
            .with_context(|| format!("cannot write summary {}", path.display()))?;
    }
    Ok(())
}

fn report(cli: &Cli, summary: &RunSummary, json: Option<&Path>) -> Result<Outcome> {
    write_summary_json(summary, json)?;
    if !cli.quiet {
        eprint!("{}", summary.render_table());
        if cli.verbose {
            for s in &summary.sources {
                for w in &s.sample_warnings {
                    eprintln!("{}: warning: {w}", s.source);
                }
            }
        }
    }
    for failure in &summary.weeks_failed {
        eprintln!("error: {}: {}", failure.source, failure.reason);
    }
    Ok(if summary.is_partial() {
        Outcome::Partial
    } else {
        Outcome::Complete
    })
}

fn fetch(cli: &Cli, a: &FetchArgs) -> Result<Outcome> {
    let weeks = a.weeks.resolve().map_err(|e| anyhow!(e))?;
    let config = pipeline_config(cli, &a.cache, None);
    let summary = fetch_weeks(&weeks, &fetcher(&a.cache, a.download.retries), &config)?;
    report(cli, &summary, a.summary_json.as_deref())
}

fn convert(cli: &Cli, a: &ConvertArgs) -> Result<Outcome> {
    let config = pipeline_config(cli, &a.cache, Some(&a.output));
    if !a.input.is_empty() {
        let era = a.format_era.map(Into::into);
        let inputs: Vec<PathBuf> = a.input.clone();
        return with_sink(cli, &a.output, |sink| convert_files(&inputs, era, sink, &config));
    }
    if a.weeks.is_empty() {
        bail!("convert needs either --input files or --years/--weeks of cached archives");
    }
    let weeks = a.weeks.resolve().map_err(|e| anyhow!(e))?;
    let fetcher = fetcher(&a.cache, 1);
    with_sink(cli, &a.output, |sink| {
        get_bulk_patent_data(&weeks, sink, &fetcher, &config, WeekSource::CacheOnly)
    })
}

fn get(cli: &Cli, a: &GetArgs) -> Result<Outcome> {
    let weeks = a.weeks.resolve().map_err(|e| anyhow!(e))?;
    let config = pipeline_config(cli, &a.cache, Some(&a.output));
    let fetcher = fetcher(&a.cache, a.download.retries);
    with_sink(cli, &a.output, |sink| {
        get_bulk_patent_data(&weeks, sink, &fetcher, &config, WeekSource::Download)
    })
}

fn stats(cli: &Cli, a: &StatsArgs) -> Result<()> {
    let records = if is_stdio(&a.input) {
        read_records_from(io::stdin().lock()).context("cannot read records from standard input")?
    } else {
        read_records(&a.input).with_context(|| format!("cannot read records from {}", a.input.display()))?
    };
    let exec = exec(cli);
    let top = NonZeroUsize::new(a.top as usize).context("--top must be at least 1")?;
    let mut out = open_output(&a.output, false)?;
    let written = match a.analysis {
        Analysis::Weekly => write_table(
            &analytics::weekly_counts(&records, analytics::week_of_issue, exec),
            &mut out,
        ),
        Analysis::Classes => write_table(&analytics::top_ipc_subclasses(&records, top, exec), &mut out),
        Analysis::LagByClass => {
            let table = analytics::lag_stats_by_class(&records, top, exec);
            note_lag_quality(cli, &table);
            write_table(&table.rows, &mut out)
        }
        Analysis::LagByYear => {
            let table = analytics::lag_stats_by_year(&records, exec);
            note_lag_quality(cli, &table);
            if let (Some(delta), false) = (analytics::median_delta(&table, 1980, 1976), cli.quiet) {
                eprintln!("median lag 1980 minus 1976: {delta:+} days");
            }
            write_table(&table.rows, &mut out)
        }
    };
    written
        .and_then(|()| out.flush().map_err(Into::into))
        .with_context(|| format!("cannot write {}", a.output.display()))
}

fn note_lag_quality(cli: &Cli, table: &analytics::LagTable) {
    if !cli.quiet {
        eprintln!(
            "{} records without an application date; {} negative lags excluded from quartiles",
            table.records_without_app_date, table.negative_lags
        );
    }
}
