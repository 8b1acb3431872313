//! Minimal element tree for one grant document.

use quick_xml::events::Event;
use quick_xml::Reader;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomError {
    #[error("malformed XML at byte {position}: {message}")]
    Malformed { position: u64, message: String },
    #[error("document ends inside <{0}>")]
    Truncated(String),
    #[error("document has no root element")]
    NoRoot,
    #[error("content after the root element")]
    MultipleRoots,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Element(Element),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub children: Vec<Node>,
    /// Pre-order position in the document, for restoring document order.
    pub order: usize,
}

impl Element {
    fn new(name: &str, order: usize) -> Element {
        Element {
            name: name.to_string(),
            children: Vec::new(),
            order,
        }
    }

    pub fn child_elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|n| match n {
            Node::Element(e) => Some(e),
            Node::Text(_) => None,
        })
    }

    /// All descendants reached by following `path` (`/`-separated child
    /// names), in document order. An empty path yields `self`.
    pub fn select<'a>(&'a self, path: &str) -> Vec<&'a Element> {
        let mut current = vec![self];
        for step in path.split('/').filter(|s| !s.is_empty()) {
            current = current
                .into_iter()
                .flat_map(|e| e.child_elements().filter(move |c| c.name == step))
                .collect();
        }
        current
    }

    pub fn first(&self, path: &str) -> Option<&Element> {
        self.select(path).into_iter().next()
    }

    /// Concatenated descendant text.
    pub fn text(&self) -> String {
        let mut out = String::new();
        self.collect_text(&mut out);
        out
    }

    fn collect_text(&self, out: &mut String) {
        for child in &self.children {
            match child {
                Node::Text(t) => out.push_str(t),
                Node::Element(e) => e.collect_text(out),
            }
        }
    }

    fn push_text(&mut self, text: &str) {
        if let Some(Node::Text(last)) = self.children.last_mut() {
            last.push_str(text);
        } else {
            self.children.push(Node::Text(text.to_string()));
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParsedDoc {
    pub root: Element,
    pub warnings: Vec<String>,
}

fn predefined(name: &str) -> Option<char> {
    Some(match name {
        "lt" => '<',
        "gt" => '>',
        "amp" => '&',
        "apos" => '\'',
        "quot" => '"',
        _ => return None,
    })
}

pub fn parse_document(bytes: &[u8]) -> Result<ParsedDoc, DomError> {
    let mut reader = Reader::from_reader(bytes);
    let mut buf = Vec::new();
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    let mut warnings = Vec::new();
    let mut order = 0usize;
    let malformed = |reader: &Reader<&[u8]>, message: String| DomError::Malformed {
        position: reader.error_position(),
        message,
    };

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| malformed(&reader, e.to_string()))?;
        match event {
            Event::Start(e) => {
                if root.is_some() {
                    return Err(DomError::MultipleRoots);
                }
                stack.push(Element::new(e.name().as_ref(), order));
                order += 1;
            }
            Event::Empty(e) => {
                let el = Element::new(e.name().as_ref(), order);
                order += 1;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(Node::Element(el)),
                    None if root.is_none() => root = Some(el),
                    None => return Err(DomError::MultipleRoots),
                }
            }
            Event::End(_) => {
                let el = stack
                    .pop()
                    .ok_or_else(|| malformed(&reader, "unmatched end tag".into()))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(Node::Element(el)),
                    None => root = Some(el),
                }
            }
            Event::Text(t) => {
                if let Some(current) = stack.last_mut() {
                    current.push_text(&t.xml10_content());
                } else if !t.xml10_content().trim().is_empty() {
                    return Err(malformed(&reader, "text outside the root element".into()));
                }
            }
            Event::CData(c) => {
                if let Some(current) = stack.last_mut() {
                    current.push_text(&c.xml10_content());
                }
            }
            Event::GeneralRef(r) => {
                let resolved = if r.is_char_ref() {
                    match r.resolve_char_ref() {
                        Ok(Some(c)) => c.to_string(),
                        _ => {
                            warnings.push(format!("invalid character reference &{};", &*r));
                            format!("[{}]", &*r)
                        }
                    }
                } else if let Some(c) = predefined(&r) {
                    c.to_string()
                } else {
                    warnings.push(format!("unresolved entity &{};", &*r));
                    format!("[{}]", &*r)
                };
                if let Some(current) = stack.last_mut() {
                    current.push_text(&resolved);
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if let Some(open) = stack.pop() {
        return Err(DomError::Truncated(open.name));
    }
    root.map(|root| ParsedDoc { root, warnings }).ok_or(DomError::NoRoot)
}
