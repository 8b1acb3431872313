use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::multivalue::sanitize_field;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IpcError {
    #[error("empty IPC code")]
    Empty,
    #[error("IPC code {0:?} does not start with a section letter A-H")]
    NoSection(String),
    #[error("IPC code {0:?} lacks a two-digit class")]
    NoClass(String),
}

/// An International Patent Classification symbol.
///
/// Canonical form: section, class and subclass run together, then one space
/// and the group text when present (`C07D 295/12`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IpcCode {
    section: char,
    class_num: String,
    subclass: Option<char>,
    remainder: String,
}

impl IpcCode {
    /// Parses the spellings found across eras: `C07D 295/12`, `C07D295/12`,
    /// bare `A01B`, and the XML form with a leading edition digit (`7C07D 295/12`).
    pub fn parse(raw: &str) -> Result<IpcCode, IpcError> {
        let text = sanitize_field(raw, false);
        if text.is_empty() {
            return Err(IpcError::Empty);
        }
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        // edition marker, only when a section letter follows
        if chars.len() > 1 && chars[0].is_ascii_digit() && is_section(chars[1]) {
            i = 1;
        }
        let section = match chars.get(i) {
            Some(&c) if is_section(c) => c.to_ascii_uppercase(),
            _ => return Err(IpcError::NoSection(raw.to_string())),
        };
        i += 1;
        let class_num: String = match (chars.get(i), chars.get(i + 1)) {
            (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => [*a, *b].iter().collect(),
            _ => return Err(IpcError::NoClass(raw.to_string())),
        };
        i += 2;
        let subclass = match chars.get(i) {
            Some(c) if c.is_ascii_alphabetic() => {
                i += 1;
                Some(c.to_ascii_uppercase())
            }
            _ => None,
        };
        let remainder: String = chars[i..].iter().collect::<String>().trim().to_string();
        Ok(IpcCode {
            section,
            class_num,
            subclass,
            remainder,
        })
    }

    pub fn section(&self) -> char {
        self.section
    }

    pub fn class_num(&self) -> &str {
        &self.class_num
    }

    pub fn subclass(&self) -> Option<char> {
        self.subclass
    }

    pub fn remainder(&self) -> &str {
        &self.remainder
    }

    /// Four-character subclass key such as `C07D`, when the code has a subclass.
    pub fn subclass_key(&self) -> Option<String> {
        self.subclass
            .map(|s| format!("{}{}{}", self.section, self.class_num, s))
    }
}

fn is_section(c: char) -> bool {
    matches!(c.to_ascii_uppercase(), 'A'..='H')
}

impl fmt::Display for IpcCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.section, self.class_num)?;
        if let Some(s) = self.subclass {
            write!(f, "{s}")?;
        }
        if !self.remainder.is_empty() {
            write!(f, " {}", self.remainder)?;
        }
        Ok(())
    }
}

impl FromStr for IpcCode {
    type Err = IpcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IpcCode::parse(s)
    }
}

impl Serialize for IpcCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IpcCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        IpcCode::parse(&s).map_err(serde::de::Error::custom)
    }
}
