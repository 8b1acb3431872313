use std::io::{self, BufRead};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("no XML documents found (is this an XML-era weekly file?)")]
    NoDocuments,
    #[error("failed to read XML input: {0}")]
    Io(#[from] io::Error),
}

/// Exactly one document cut out of a concatenated weekly file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlDocSlice {
    pub bytes: Vec<u8>,
    /// Position within the weekly file, from 0.
    pub ordinal: usize,
    /// Set when the root element is never closed (typically a cut-off final document).
    pub truncated: bool,
}

const PROLOG: &[u8] = b"<?xml";

/// Splits a concatenated multi-document stream at XML declarations that start
/// a line. Every input byte ends up in exactly one slice, except whitespace
/// before the first declaration, which is kept in [`DocumentSplitter::leading`].
pub struct DocumentSplitter<R> {
    reader: R,
    line: Vec<u8>,
    /// Bytes read ahead that begin the next document.
    carry: Option<Vec<u8>>,
    leading: Vec<u8>,
    started: bool,
    emitted: usize,
    done: bool,
}

impl<R: BufRead> DocumentSplitter<R> {
    pub fn new(reader: R) -> Self {
        DocumentSplitter {
            reader,
            line: Vec::new(),
            carry: None,
            leading: Vec::new(),
            started: false,
            emitted: 0,
            done: false,
        }
    }

    /// Whitespace found before the first document.
    pub fn leading(&self) -> &[u8] {
        &self.leading
    }

    pub fn slices_emitted(&self) -> usize {
        self.emitted
    }

    fn read_line(&mut self) -> io::Result<bool> {
        self.line.clear();
        loop {
            match self.reader.read_until(b'\n', &mut self.line) {
                Ok(n) => return Ok(n > 0),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            }
        }
    }

    fn emit(&mut self, bytes: Vec<u8>) -> XmlDocSlice {
        let truncated = !is_closed(&bytes);
        let slice = XmlDocSlice {
            bytes,
            ordinal: self.emitted,
            truncated,
        };
        self.emitted += 1;
        slice
    }
}

impl<R: BufRead> Iterator for DocumentSplitter<R> {
    type Item = Result<XmlDocSlice, SplitError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut doc = self.carry.take().unwrap_or_default();
        loop {
            match self.read_line() {
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                Ok(false) => {
                    self.done = true;
                    if !self.started {
                        // whatever was read is whitespace only
                        return Some(Err(SplitError::NoDocuments));
                    }
                    return Some(Ok(self.emit(doc)));
                }
                Ok(true) => {}
            }
            let starts_doc = self.line.starts_with(PROLOG);
            if !self.started {
                if starts_doc || !self.line.iter().all(u8::is_ascii_whitespace) {
                    self.started = true;
                    doc.extend_from_slice(&self.line);
                } else {
                    self.leading.extend_from_slice(&self.line);
                }
                continue;
            }
            if starts_doc && !doc.is_empty() {
                self.carry = Some(std::mem::take(&mut self.line));
                return Some(Ok(self.emit(doc)));
            }
            doc.extend_from_slice(&self.line);
        }
    }
}

/// Name of the first element in `bytes`, skipping declarations, comments and DOCTYPE.
pub fn root_name(bytes: &[u8]) -> Option<&[u8]> {
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'<' {
            match bytes.get(i + 1) {
                Some(b'?') | Some(b'!') => {}
                Some(_) => {
                    let start = i + 1;
                    let end = bytes[start..]
                        .iter()
                        .position(|b| b.is_ascii_whitespace() || *b == b'>' || *b == b'/')
                        .map(|p| start + p)?;
                    return (end > start).then(|| &bytes[start..end]);
                }
                None => return None,
            }
        }
        i += 1;
    }
    None
}

fn is_closed(bytes: &[u8]) -> bool {
    let Some(name) = root_name(bytes) else {
        return false;
    };
    let end = bytes
        .iter()
        .rposition(|b| !b.is_ascii_whitespace())
        .map_or(0, |p| p + 1);
    let body = &bytes[..end];
    if body.ends_with(b"/>") && body.len() >= 2 {
        // a self-closing root: `<root .../>` is the last tag
        if let Some(open) = body.iter().rposition(|b| *b == b'<') {
            return body[open + 1..].starts_with(name);
        }
    }
    let mut close = Vec::with_capacity(name.len() + 3);
    close.extend_from_slice(b"</");
    close.extend_from_slice(name);
    if !body.ends_with(b">") {
        return false;
    }
    let trimmed = body[..body.len() - 1].trim_ascii_end();
    trimmed.ends_with(&close)
}
