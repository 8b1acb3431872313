//! Table-driven element mappings from XML grant documents to record fields.
//!
//! Mappings are TOML files (see `mappings/` in this crate). Each of the nine
//! record fields lists one or more sources: an element path relative to the
//! document root, plus optional sub-paths (`parts`) or a `template` used to
//! assemble the value from child elements.

use std::path::Path;
use std::sync::OnceLock;

use serde::Deserialize;
use thiserror::Error;

use super::dom::Element;
use crate::model::SourceFormat;

const XML2_TOML: &str = include_str!("../../mappings/xml2.toml");
const XML4_TOML: &str = include_str!("../../mappings/xml4.toml");

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("{0} is not an XML format; fixed-tag files use the APS parser")]
    NotXml(SourceFormat),
    #[error("invalid mapping table: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid mapping table: {0}")]
    Invalid(String),
    #[error("cannot read mapping table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextRule {
    /// Whitespace collapsed to single spaces.
    #[default]
    Collapsed,
    /// Line structure rebuilt from `breaks` elements.
    Preserved,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeepIf {
    pub path: String,
    pub values: Vec<String>,
    #[serde(default)]
    pub absent_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub path: String,
    #[serde(default)]
    pub parts: Vec<String>,
    #[serde(default = "default_joiner")]
    pub joiner: String,
    pub template: Option<String>,
    pub keep_if: Option<KeepIf>,
}

fn default_joiner() -> String {
    ", ".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMapping {
    #[serde(default)]
    pub repeated: bool,
    #[serde(default)]
    pub text: TextRule,
    #[serde(default)]
    pub breaks: Vec<String>,
    pub sources: Vec<Source>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingFields {
    pub wku: FieldMapping,
    pub title: FieldMapping,
    pub app_date: FieldMapping,
    pub issue_date: FieldMapping,
    pub inventors: FieldMapping,
    pub assignees: FieldMapping,
    pub ipc_codes: FieldMapping,
    pub references: FieldMapping,
    pub claims: FieldMapping,
}

impl MappingFields {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &FieldMapping)> {
        [
            ("wku", &self.wku),
            ("title", &self.title),
            ("app_date", &self.app_date),
            ("issue_date", &self.issue_date),
            ("inventors", &self.inventors),
            ("assignees", &self.assignees),
            ("ipc_codes", &self.ipc_codes),
            ("references", &self.references),
            ("claims", &self.claims),
        ]
        .into_iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementMapping {
    pub format: SourceFormat,
    pub root: String,
    pub fields: MappingFields,
}

impl ElementMapping {
    pub fn from_toml_str(text: &str) -> Result<ElementMapping, MappingError> {
        let mapping: ElementMapping = toml::from_str(text)?;
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn from_path(path: &Path) -> Result<ElementMapping, MappingError> {
        let text = std::fs::read_to_string(path).map_err(|source| MappingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<(), MappingError> {
        if !self.format.is_xml() {
            return Err(MappingError::NotXml(self.format));
        }
        for (name, field) in self.fields.iter() {
            if field.sources.is_empty() {
                return Err(MappingError::Invalid(format!("field {name} has no sources")));
            }
            let must_repeat = matches!(name, "inventors" | "assignees" | "ipc_codes" | "references");
            let must_single = matches!(name, "wku" | "title" | "app_date" | "issue_date");
            if (must_repeat && !field.repeated) || (must_single && field.repeated) {
                return Err(MappingError::Invalid(format!(
                    "field {name} has the wrong multiplicity"
                )));
            }
            for s in &field.sources {
                if s.template.is_some() && !s.parts.is_empty() {
                    return Err(MappingError::Invalid(format!(
                        "field {name}: source {} sets both parts and template",
                        s.path
                    )));
                }
            }
        }
        Ok(())
    }

    /// Values for one field, in document order across all sources.
    pub fn extract(&self, field: &FieldMapping, root: &Element) -> Vec<String> {
        let mut found: Vec<(usize, String)> = Vec::new();
        for source in &field.sources {
            for el in root.select(&source.path) {
                if let Some(keep) = &source.keep_if {
                    let kept = match el.first(&keep.path) {
                        Some(e) => keep.values.iter().any(|v| v == e.text().trim()),
                        None => keep.absent_ok,
                    };
                    if !kept {
                        continue;
                    }
                }
                let value = source_value(source, field, el);
                if !value.is_empty() {
                    found.push((el.order, value));
                }
            }
        }
        found.sort_by_key(|(order, _)| *order);
        let values = found.into_iter().map(|(_, v)| v);
        if field.repeated {
            values.collect()
        } else {
            values.take(1).collect()
        }
    }
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn source_value(source: &Source, field: &FieldMapping, el: &Element) -> String {
    let sub_text = |path: &str| el.first(path).map(|e| collapse(&e.text())).unwrap_or_default();
    if let Some(template) = &source.template {
        return collapse(&render_template(template, sub_text));
    }
    if !source.parts.is_empty() {
        let parts: Vec<String> = source
            .parts
            .iter()
            .map(|p| sub_text(p))
            .filter(|t| !t.is_empty())
            .collect();
        return parts.join(&source.joiner);
    }
    match field.text {
        TextRule::Collapsed => collapse(&el.text()),
        TextRule::Preserved => {
            let mut lines = Vec::new();
            let mut current = String::new();
            assemble_lines(el, &field.breaks, &mut lines, &mut current);
            flush_line(&mut lines, &mut current);
            lines.join("\n")
        }
    }
}

/// Replaces each `{sub/path}` with the collapsed text of that child element.
fn render_template(template: &str, mut lookup: impl FnMut(&str) -> String) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        match rest[open..].find('}') {
            Some(close) => {
                out.push_str(&lookup(&rest[open + 1..open + close]));
                rest = &rest[open + close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn flush_line(lines: &mut Vec<String>, current: &mut String) {
    let line = collapse(current);
    if !line.is_empty() {
        lines.push(line);
    }
    current.clear();
}

fn assemble_lines(el: &Element, breaks: &[String], lines: &mut Vec<String>, current: &mut String) {
    for child in &el.children {
        match child {
            super::dom::Node::Text(t) => current.push_str(t),
            super::dom::Node::Element(e) => {
                let is_break = breaks.contains(&e.name);
                if is_break {
                    flush_line(lines, current);
                }
                assemble_lines(e, breaks, lines, current);
                if is_break {
                    flush_line(lines, current);
                }
            }
        }
    }
}

/// The shipped mapping table for an XML era.
pub fn mapping_for(format: SourceFormat) -> Result<&'static ElementMapping, MappingError> {
    static XML2: OnceLock<ElementMapping> = OnceLock::new();
    static XML4: OnceLock<ElementMapping> = OnceLock::new();
    let (cell, text) = match format {
        SourceFormat::Aps => return Err(MappingError::NotXml(format)),
        SourceFormat::Xml2 => (&XML2, XML2_TOML),
        SourceFormat::Xml4 => (&XML4, XML4_TOML),
    };
    if let Some(m) = cell.get() {
        return Ok(m);
    }
    let parsed = ElementMapping::from_toml_str(text)?;
    Ok(cell.get_or_init(|| parsed))
}
