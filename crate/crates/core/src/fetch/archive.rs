use std::fs::File;
use std::io::{self, BufReader, Read, Seek};
use std::path::Path;
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread::JoinHandle;

use zip::ZipArchive;

use super::FetchError;

const CHUNK: usize = 1 << 16;
/// Chunks buffered between the decompressing thread and the reader.
const IN_FLIGHT: usize = 8;

fn integrity(path: &Path, message: impl ToString) -> FetchError {
    FetchError::Integrity {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Names of the file members, in archive order, after checking that none is
/// encrypted.
fn data_members<R: Read + Seek>(archive: &mut ZipArchive<R>, path: &Path) -> Result<Vec<usize>, FetchError> {
    let mut members = Vec::new();
    for i in 0..archive.len() {
        let file = archive.by_index_raw(i).map_err(|e| integrity(path, e))?;
        if file.encrypted() {
            let name = file.name().map(|n| n.into_owned()).unwrap_or_else(|_| format!("#{i}"));
            return Err(integrity(path, format!("member {name} is encrypted")));
        }
        if file.is_file() {
            members.push(i);
        }
    }
    if members.is_empty() {
        return Err(integrity(path, "archive has no file members"));
    }
    Ok(members)
}

fn open_zip(path: &Path) -> Result<ZipArchive<BufReader<File>>, FetchError> {
    let file = File::open(path).map_err(|source| FetchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ZipArchive::new(BufReader::new(file)).map_err(|e| integrity(path, e))
}

/// Decompresses every member to check CRCs. Returns the total decompressed size.
pub fn verify_zip(path: &Path) -> Result<u64, FetchError> {
    let mut archive = open_zip(path)?;
    let members = data_members(&mut archive, path)?;
    let mut total = 0;
    for i in members {
        let mut member = archive.by_index(i).map_err(|e| integrity(path, e))?;
        total += io::copy(&mut member, &mut io::sink()).map_err(|e| integrity(path, e))?;
    }
    Ok(total)
}

/// The file members of an archive as one byte stream, in member order.
/// Decompression runs on a helper thread; memory use is bounded by a few
/// 64 KiB chunks regardless of member size.
pub struct ArchiveStream {
    members: Vec<String>,
    rx: Receiver<io::Result<Vec<u8>>>,
    chunk: Vec<u8>,
    pos: usize,
    worker: Option<JoinHandle<()>>,
    done: bool,
}

impl ArchiveStream {
    pub fn member_names(&self) -> &[String] {
        &self.members
    }
}

impl Read for ArchiveStream {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        while self.pos == self.chunk.len() {
            if self.done {
                return Ok(0);
            }
            match self.rx.recv() {
                Ok(Ok(chunk)) => {
                    self.chunk = chunk;
                    self.pos = 0;
                }
                Ok(Err(e)) => {
                    self.done = true;
                    return Err(e);
                }
                Err(_) => {
                    self.done = true;
                    if let Some(worker) = self.worker.take() {
                        let _ = worker.join();
                    }
                }
            }
        }
        let n = buf.len().min(self.chunk.len() - self.pos);
        buf[..n].copy_from_slice(&self.chunk[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

/// Opens a cached archive for streaming. Structure and encryption are
/// checked before any byte is returned.
pub fn open_archive(path: &Path) -> Result<ArchiveStream, FetchError> {
    let mut archive = open_zip(path)?;
    let indices = data_members(&mut archive, path)?;
    let mut members = Vec::with_capacity(indices.len());
    for &i in &indices {
        let member = archive.by_index_raw(i).map_err(|e| integrity(path, e))?;
        members.push(member.name().map_err(|e| integrity(path, e))?.into_owned());
    }
    let (tx, rx) = sync_channel(IN_FLIGHT);
    let worker = std::thread::spawn(move || {
        for i in indices {
            let mut member = match archive.by_index(i) {
                Ok(m) => m,
                Err(e) => {
                    let _ = tx.send(Err(io::Error::new(io::ErrorKind::InvalidData, e)));
                    return;
                }
            };
            loop {
                let mut chunk = vec![0u8; CHUNK];
                match member.read(&mut chunk) {
                    Ok(0) => break,
                    Ok(n) => {
                        chunk.truncate(n);
                        if tx.send(Ok(chunk)).is_err() {
                            return; // reader dropped
                        }
                    }
                    Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        return;
                    }
                }
            }
        }
    });
    Ok(ArchiveStream {
        members,
        rx,
        chunk: Vec::new(),
        pos: 0,
        worker: Some(worker),
        done: false,
    })
}

/// Counts bytes passing through a reader.
pub struct CountingReader<R> {
    inner: R,
    count: u64,
}

impl<R> CountingReader<R> {
    pub fn new(inner: R) -> Self {
        CountingReader { inner, count: 0 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.count += n as u64;
        Ok(n)
    }
}
