//! Locating, downloading and caching the weekly bulk archives.

mod archive;
mod transport;

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use archive::{open_archive, verify_zip, ArchiveStream, CountingReader};
#[cfg(feature = "http")]
pub use transport::HttpTransport;
pub use transport::{DefaultTransport, FileTransport, Transport, TransportError};

use crate::model::{CalendarDate, SourceFormat, WeekSpec};

pub const DEFAULT_BASE_URL: &str = "https://bulkdata.uspto.gov/data/patent/grant/redbook/fulltext";

const SIDECAR_SUFFIX: &str = ".entry.json";
const PARTIAL_PREFIX: &str = ".partial-";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("{url}: HTTP status {status}")]
    Status { url: String, status: u16 },
    #[error("{url}: {message}")]
    Network { url: String, message: String },
    #[error("{}: corrupt or unreadable archive: {message}", path.display())]
    Integrity { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0} is not in the cache")]
    NotCached(String),
}

/// File-name templates per era, relative to the base URL. Placeholders:
/// `{yyyy}`, `{yy}`, `{mm}`, `{dd}` (grant date) and `{ww}` (week index).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamingTemplates {
    pub aps: String,
    pub xml2: String,
    pub xml4: String,
}

impl Default for NamingTemplates {
    fn default() -> Self {
        NamingTemplates {
            aps: "{yyyy}/pftaps{yyyy}{mm}{dd}_wk{ww}.zip".into(),
            xml2: "{yyyy}/pg{yy}{mm}{dd}.zip".into(),
            xml4: "{yyyy}/ipg{yy}{mm}{dd}.zip".into(),
        }
    }
}

impl NamingTemplates {
    fn for_format(&self, format: SourceFormat) -> &str {
        match format {
            SourceFormat::Aps => &self.aps,
            SourceFormat::Xml2 => &self.xml2,
            SourceFormat::Xml4 => &self.xml4,
        }
    }

    pub fn render(&self, week: WeekSpec, date: CalendarDate) -> String {
        self.for_format(week.format())
            .replace("{yyyy}", &format!("{:04}", date.year()))
            .replace("{yy}", &format!("{:02}", date.year() % 100))
            .replace("{mm}", &format!("{:02}", date.month()))
            .replace("{dd}", &format!("{:02}", date.day()))
            .replace("{ww}", &format!("{:02}", week.week()))
    }
}

/// Where one week's archive lives upstream and in the cache.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FetchPlan {
    pub week: WeekSpec,
    pub format: SourceFormat,
    pub url: String,
    /// Cache location relative to the cache directory: the file name.
    pub cache_path: PathBuf,
    pub issue_date: CalendarDate,
}

pub fn resolve_plan(week: WeekSpec, base_url: &str, templates: &NamingTemplates) -> FetchPlan {
    let issue_date = week.grant_tuesday();
    let relative = templates.render(week, issue_date);
    let file_name = relative.rsplit('/').next().unwrap_or(&relative).to_string();
    FetchPlan {
        week,
        format: week.format(),
        url: format!("{}/{}", base_url.trim_end_matches('/'), relative),
        cache_path: PathBuf::from(file_name),
        issue_date,
    }
}

/// A verified archive in the cache, persisted as a JSON sidecar next to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub cache_path: PathBuf,
    pub source_url: String,
    pub byte_size: u64,
    /// Lowercase hex SHA-256 of the file.
    pub content_digest: String,
    /// RFC 3339, UTC.
    pub retrieved_at: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub fn file_digest(path: &Path) -> io::Result<String> {
    let mut hasher = HashingWriter {
        inner: io::sink(),
        hasher: Sha256::new(),
    };
    io::copy(&mut fs::File::open(path)?, &mut hasher)?;
    Ok(hex::encode(hasher.hasher.finalize()))
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Downloads archives into a cache directory.
///
/// Entries only appear under their final name after the whole archive has
/// been downloaded and verified; concurrent fetches of one entry download it
/// once.
pub struct Fetcher {
    cache_dir: PathBuf,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    locks: Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>,
}

impl Fetcher {
    pub fn new(cache_dir: impl Into<PathBuf>, transport: Arc<dyn Transport>, retry: RetryPolicy) -> Self {
        Fetcher {
            cache_dir: cache_dir.into(),
            transport,
            retry,
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    fn data_path(&self, plan: &FetchPlan) -> PathBuf {
        self.cache_dir.join(&plan.cache_path)
    }

    fn sidecar_path(data: &Path) -> PathBuf {
        let mut name = data.file_name().unwrap_or_default().to_os_string();
        name.push(SIDECAR_SUFFIX);
        data.with_file_name(name)
    }

    fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FetchError + '_ {
        move |source| FetchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn entry_lock(&self, path: &Path) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|p| p.into_inner());
        locks.entry(path.to_path_buf()).or_default().clone()
    }

    /// Returns the cached entry for `plan` if present and intact, without
    /// any network access. A data file without a sidecar is verified and
    /// adopted; a corrupt one is removed.
    pub fn lookup(&self, plan: &FetchPlan) -> Result<Option<CacheEntry>, FetchError> {
        let data = self.data_path(plan);
        let lock = self.entry_lock(&data);
        let _guard = lock.lock().unwrap_or_else(|p| p.into_inner());
        self.lookup_locked(plan, &data)
    }

    fn lookup_locked(&self, plan: &FetchPlan, data: &Path) -> Result<Option<CacheEntry>, FetchError> {
        let meta = match fs::metadata(data) {
            Ok(m) => m,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Self::io_err(data)(e)),
        };
        let sidecar = Self::sidecar_path(data);
        let recorded: Option<CacheEntry> = fs::read(&sidecar)
            .ok()
            .and_then(|bytes| serde_json::from_slice(&bytes).ok());
        let digest = file_digest(data).map_err(Self::io_err(data))?;
        if let Some(entry) = recorded {
            if entry.byte_size == meta.len() && entry.content_digest == digest {
                return Ok(Some(entry));
            }
        } else if verify_zip(data).is_ok() {
            let entry = CacheEntry {
                cache_path: plan.cache_path.clone(),
                source_url: plan.url.clone(),
                byte_size: meta.len(),
                content_digest: digest,
                retrieved_at: now_rfc3339(),
            };
            self.write_sidecar(data, &entry)?;
            return Ok(Some(entry));
        }
        // corrupt: drop it so the next fetch starts clean
        let _ = fs::remove_file(&sidecar);
        fs::remove_file(data).map_err(Self::io_err(data))?;
        Ok(None)
    }

    fn write_sidecar(&self, data: &Path, entry: &CacheEntry) -> Result<(), FetchError> {
        let path = Self::sidecar_path(data);
        let mut tmp = tempfile::Builder::new()
            .prefix(PARTIAL_PREFIX)
            .tempfile_in(&self.cache_dir)
            .map_err(Self::io_err(&self.cache_dir))?;
        serde_json::to_writer_pretty(&mut tmp, entry).map_err(|e| Self::io_err(&path)(e.into()))?;
        tmp.persist(&path).map_err(|e| Self::io_err(&path)(e.error))?;
        Ok(())
    }

    /// Returns the cache entry for `plan`, downloading it first if needed.
    pub fn fetch(&self, plan: &FetchPlan) -> Result<CacheEntry, FetchError> {
        fs::create_dir_all(&self.cache_dir).map_err(Self::io_err(&self.cache_dir))?;
        let data = self.data_path(plan);
        let lock = self.entry_lock(&data);
        let _guard = lock.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(entry) = self.lookup_locked(plan, &data)? {
            return Ok(entry);
        }
        let (tmp, byte_size, digest) = self.download(plan)?;
        if let Err(e) = verify_zip(tmp.path()) {
            // the temporary file is removed on drop
            return Err(match e {
                FetchError::Integrity { message, .. } => FetchError::Integrity {
                    path: PathBuf::from(&plan.url),
                    message,
                },
                other => other,
            });
        }
        tmp.persist(&data).map_err(|e| Self::io_err(&data)(e.error))?;
        let entry = CacheEntry {
            cache_path: plan.cache_path.clone(),
            source_url: plan.url.clone(),
            byte_size,
            content_digest: digest,
            retrieved_at: now_rfc3339(),
        };
        self.write_sidecar(&data, &entry)?;
        Ok(entry)
    }

    fn download(&self, plan: &FetchPlan) -> Result<(tempfile::NamedTempFile, u64, String), FetchError> {
        let mut backoff = self.retry.initial_backoff;
        let attempts = self.retry.attempts.max(1);
        let mut attempt = 1;
        loop {
            let tmp = tempfile::Builder::new()
                .prefix(PARTIAL_PREFIX)
                .tempfile_in(&self.cache_dir)
                .map_err(Self::io_err(&self.cache_dir))?;
            let mut sink = HashingWriter {
                inner: io::BufWriter::new(tmp),
                hasher: Sha256::new(),
            };
            let result = self.transport.get(&plan.url, &mut sink).and_then(|n| {
                sink.flush().map_err(TransportError::Sink)?;
                Ok(n)
            });
            match result {
                Ok(n) => {
                    let digest = hex::encode(sink.hasher.finalize());
                    let tmp = sink
                        .inner
                        .into_inner()
                        .map_err(|e| Self::io_err(&self.cache_dir)(e.into_error()))?;
                    return Ok((tmp, n, digest));
                }
                Err(e) if e.is_retryable() && attempt < attempts => {
                    drop(sink);
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                Err(TransportError::Status(status)) => {
                    return Err(FetchError::Status {
                        url: plan.url.clone(),
                        status,
                    })
                }
                Err(TransportError::Network(message)) => {
                    return Err(FetchError::Network {
                        url: plan.url.clone(),
                        message,
                    })
                }
                Err(TransportError::Sink(source)) => {
                    return Err(FetchError::Io {
                        path: self.cache_dir.clone(),
                        source,
                    })
                }
            }
        }
    }

    /// Opens the cached archive for `entry` as one decompressed stream.
    pub fn open(&self, entry: &CacheEntry) -> Result<ArchiveStream, FetchError> {
        open_archive(&self.cache_dir.join(&entry.cache_path))
    }
}
