use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use patentbulk_core::aps::TextEncoding;
use patentbulk_core::model::{grant_weeks_in_year, WeekError, WeekSpec, FIRST_YEAR};
use patentbulk_core::pipeline::OutputFormat;
use patentbulk_core::SourceFormat;

/// Download USPTO weekly bulk patent grant files and convert them into one
/// tidy table.
#[derive(Debug, Parser)]
#[command(name = "patentbulk", version)]
pub struct Cli {
    /// Suppress progress messages and the run summary on standard error.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    /// Also print sample parser warnings for each input.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    /// Run every stage on the current thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download weekly archives into the cache without converting them.
    Fetch(FetchArgs),
    /// Convert cached weeks or local files to CSV or JSONL.
    Convert(ConvertArgs),
    /// Fetch and convert a range of weeks in one step.
    Get(GetArgs),
    /// Summarize converted output.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct WeekArgs {
    /// Grant years, e.g. 1976-1980 or 1976,1978 (inclusive).
    #[arg(long, value_name = "RANGE")]
    pub years: Option<String>,

    /// Grant weeks within each year, e.g. 1-8 (inclusive). Defaults to every
    /// grant week of the year.
    #[arg(long, value_name = "RANGE", requires = "years")]
    pub weeks: Option<String>,
}

#[derive(Debug, Args)]
pub struct CacheArgs {
    /// Directory holding downloaded archives.
    #[arg(
        long,
        env = "PATENTBULK_CACHE_DIR",
        default_value = "patentbulk-cache",
        value_name = "DIR"
    )]
    pub cache_dir: PathBuf,

    /// Root of the bulk-data directory tree.
    #[arg(long, env = "PATENTBULK_BASE_URL", default_value = patentbulk_core::fetch::DEFAULT_BASE_URL, value_name = "URL")]
    pub base_url: String,

    /// Weeks fetched and parsed concurrently.
    #[arg(long, default_value_t = 4, value_name = "N")]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct DownloadArgs {
    /// Download attempts per archive (network errors and 5xx only).
    #[arg(long, default_value_t = 3, value_name = "N")]
    pub retries: u32,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file, or - for standard output.
    #[arg(short, long, default_value = "-", value_name = "PATH")]
    pub output: PathBuf,

    /// Output format.
    #[arg(long, default_value = "csv", value_parser = parse_output_format, value_name = "csv|jsonl")]
    pub format: OutputFormat,

    /// Append to the output file instead of overwriting it; no CSV header is written.
    #[arg(long)]
    pub append: bool,

    /// Character encoding of fixed-tag (1976-2001) files.
    #[arg(long, default_value = "latin1", value_parser = parse_encoding, value_name = "latin1|utf8")]
    pub encoding: TextEncoding,

    /// Also write the run summary as JSON to this file.
    #[arg(long, value_name = "PATH")]
    pub summary_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[command(flatten)]
    pub weeks: WeekArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    #[command(flatten)]
    pub download: DownloadArgs,
    /// Also write the run summary as JSON to this file.
    #[arg(long, value_name = "PATH")]
    pub summary_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Local weekly files (raw or zipped) to convert instead of cached weeks.
    #[arg(long, value_name = "PATH", num_args = 1.., conflicts_with = "years")]
    pub input: Vec<PathBuf>,

    /// Era of the --input files; detected from content when omitted.
    #[arg(long, value_enum, requires = "input")]
    pub format_era: Option<Era>,

    #[command(flatten)]
    pub weeks: WeekArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GetArgs {
    #[command(flatten)]
    pub weeks: WeekArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    #[command(flatten)]
    pub download: DownloadArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Era {
    /// Fixed-tag text, 1976-2001.
    Aps,
    /// XML, 2002-2004.
    Xml2,
    /// XML, 2005 onward.
    Xml4,
}

impl From<Era> for SourceFormat {
    fn from(era: Era) -> SourceFormat {
        match era {
            Era::Aps => SourceFormat::Aps,
            Era::Xml2 => SourceFormat::Xml2,
            Era::Xml4 => SourceFormat::Xml4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Analysis {
    /// Records per grant week.
    Weekly,
    /// Most frequent IPC subclasses.
    Classes,
    /// Filing-to-grant lag quartiles per top IPC subclass.
    LagByClass,
    /// Filing-to-grant lag quartiles per issue year.
    LagByYear,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(value_enum)]
    pub analysis: Analysis,

    /// Converted CSV or JSONL file, or - for standard input.
    #[arg(short, long, value_name = "PATH")]
    pub input: PathBuf,

    /// Number of subclasses for classes and lag-by-class.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..), value_name = "K")]
    pub top: u32,

    /// Output file for the table, or - for standard output.
    #[arg(short, long, default_value = "-", value_name = "PATH")]
    pub output: PathBuf,
}

fn parse_output_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

fn parse_encoding(s: &str) -> Result<TextEncoding, String> {
    s.parse()
}

/// Parses `A-B[,C]...`: comma-separated numbers or inclusive ranges.
pub fn parse_range(spec: &str) -> Result<Vec<u32>, String> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim) {
        let number = |s: &str| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| format!("invalid number {s:?} in range {spec:?}"))
        };
        match item.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (number(a)?, number(b)?);
                if a > b {
                    return Err(format!("descending range {item:?} in {spec:?}"));
                }
                out.extend(a..=b);
            }
            None => out.push(number(item)?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

impl WeekArgs {
    pub fn is_empty(&self) -> bool {
        self.years.is_none()
    }

    /// The requested weeks, validated against each year's grant calendar.
    pub fn resolve(&self) -> Result<Vec<WeekSpec>, String> {
        let years = self.years.as_deref().ok_or("--years is required")?;
        let years = parse_range(years)?;
        let explicit = self.weeks.as_deref().map(parse_range).transpose()?;
        let mut out = Vec::new();
        for year in years {
            let year = i32::try_from(year).map_err(|_| format!("year {year} out of range"))?;
            if year < FIRST_YEAR {
                return Err(WeekError::YearBeforeCoverage(year).to_string());
            }
            let weeks = match &explicit {
                Some(w) => w.clone(),
                None => (1..=grant_weeks_in_year(year)).collect(),
            };
            for week in weeks {
                out.push(WeekSpec::new(year, week).map_err(|e| e.to_string())?);
            }
        }
        if out.is_empty() {
            return Err("the week selection is empty".into());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1976-1980").unwrap(), [1976, 1977, 1978, 1979, 1980]);
        assert_eq!(parse_range("1-3,8, 2").unwrap(), [1, 2, 3, 8]);
        assert_eq!(parse_range("5").unwrap(), [5]);
        assert!(parse_range("3-1").is_err());
        assert!(parse_range("a-b").is_err());
        assert!(parse_range("").is_err());
    }

    #[test]
    fn week_selection() {
        let w = WeekArgs {
            years: Some("1976-1977".into()),
            weeks: Some("1-2".into()),
        };
        let weeks = w.resolve().unwrap();
        assert_eq!(weeks.len(), 4);
        assert_eq!(weeks[3], WeekSpec::new(1977, 2).unwrap());
        let all = WeekArgs {
            years: Some("1976".into()),
            weeks: None,
        };
        assert_eq!(all.resolve().unwrap().len(), 52);
        let early = WeekArgs {
            years: Some("1975".into()),
            weeks: None,
        };
        assert!(early.resolve().unwrap_err().contains("1975"));
        let late = WeekArgs {
            years: Some("1976".into()),
            weeks: Some("53".into()),
        };
        assert!(late.resolve().is_err());
    }

    #[test]
    fn definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
