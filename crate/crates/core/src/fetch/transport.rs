use std::io::{self, Write};
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("network error: {0}")]
    Network(String),
    /// Writing the body to the local sink failed.
    #[error("local write failed: {0}")]
    Sink(#[source] io::Error),
}

impl TransportError {
    /// Transport failures and server errors are worth another attempt; a 404
    /// is not.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Status(code) => (500..600).contains(code),
            TransportError::Network(_) => true,
            TransportError::Sink(_) => false,
        }
    }
}

/// Fetches one URL, streaming the body into `sink`. Returns the body length.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, sink: &mut dyn Write) -> Result<u64, TransportError>;
}

fn copy_body(body: &mut dyn io::Read, sink: &mut dyn Write) -> Result<u64, TransportError> {
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = match body.read(&mut buf) {
            Ok(0) => return Ok(total),
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(TransportError::Network(e.to_string())),
        };
        sink.write_all(&buf[..n]).map_err(TransportError::Sink)?;
        total += n as u64;
    }
}

/// Serves `file://` URLs from the local filesystem. A missing file is a 404.
#[derive(Debug, Default, Clone, Copy)]
pub struct FileTransport;

impl Transport for FileTransport {
    fn get(&self, url: &str, sink: &mut dyn Write) -> Result<u64, TransportError> {
        let path = url
            .strip_prefix("file://")
            .ok_or_else(|| TransportError::Network(format!("not a file URL: {url}")))?;
        let mut file = match std::fs::File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(TransportError::Status(404)),
            Err(e) => return Err(TransportError::Network(e.to_string())),
        };
        copy_body(&mut file, sink)
    }
}

#[cfg(feature = "http")]
pub struct HttpTransport {
    agent: ureq::Agent,
}

#[cfg(feature = "http")]
impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_connect(Some(timeout))
            .timeout_recv_response(Some(timeout))
            .user_agent(concat!("patentbulk/", env!("CARGO_PKG_VERSION")))
            .build();
        HttpTransport { agent: config.into() }
    }
}

#[cfg(feature = "http")]
impl Transport for HttpTransport {
    fn get(&self, url: &str, sink: &mut dyn Write) -> Result<u64, TransportError> {
        let response = self.agent.get(url).call().map_err(|e| match e {
            ureq::Error::StatusCode(code) => TransportError::Status(code),
            other => TransportError::Network(other.to_string()),
        })?;
        let mut body = response.into_body().into_reader();
        copy_body(&mut body, sink)
    }
}

/// Dispatches on the URL scheme: `file://` locally, anything else over HTTP
/// when the `http` feature is enabled.
pub struct DefaultTransport {
    file: FileTransport,
    #[cfg(feature = "http")]
    http: HttpTransport,
}

impl DefaultTransport {
    #[cfg_attr(not(feature = "http"), allow(unused_variables))]
    pub fn new(timeout: Duration) -> Self {
        DefaultTransport {
            file: FileTransport,
            #[cfg(feature = "http")]
            http: HttpTransport::new(timeout),
        }
    }
}

impl Default for DefaultTransport {
    fn default() -> Self {
        DefaultTransport::new(Duration::from_secs(60))
    }
}

impl Transport for DefaultTransport {
    fn get(&self, url: &str, sink: &mut dyn Write) -> Result<u64, TransportError> {
        if url.starts_with("file://") {
            return self.file.get(url, sink);
        }
        #[cfg(feature = "http")]
        return self.http.get(url, sink);
        #[cfg(not(feature = "http"))]
        Err(TransportError::Network(format!("built without HTTP support: {url}")))
    }
}
