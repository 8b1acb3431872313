use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::date::{CalendarDate, DateError};
use super::ipc::{IpcCode, IpcError};
use super::multivalue::{join_multivalue, sanitize_field, split_multivalue, JoinError};

/// Warning for records kept without claims text, which is how withdrawn
/// patents usually appear in the weekly files.
pub const NO_CLAIMS: &str = "no claims text (possibly withdrawn); kept";

/// Column order of the canonical CSV schema.
pub const CSV_HEADER: [&str; 9] = [
    "wku",
    "title",
    "app_date",
    "issue_date",
    "inventors",
    "assignees",
    "ipc_codes",
    "references",
    "claims",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("record has an empty WKU")]
    EmptyWku,
    #[error("row has {0} columns, expected 9")]
    ColumnCount(usize),
    #[error("column {column}: {source}")]
    Date {
        column: &'static str,
        #[source]
        source: DateError,
    },
    #[error("column ipc_codes: {0}")]
    Ipc(#[from] IpcError),
    #[error("multi-valued column: {0}")]
    Join(#[from] JoinError),
}

/// One granted patent in the nine-column rectangular schema.
///
/// Only constructible through [`RecordBuilder`] (or deserialization, which
/// goes through it), so every instance is sanitized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRecord")]
pub struct PatentRecord {
    wku: String,
    title: String,
    app_date: Option<CalendarDate>,
    issue_date: CalendarDate,
    inventors: Vec<String>,
    assignees: Vec<String>,
    ipc_codes: Vec<IpcCode>,
    references: Vec<String>,
    claims: String,
}

impl PatentRecord {
    pub fn builder(wku: impl Into<String>, issue_date: CalendarDate) -> RecordBuilder {
        RecordBuilder {
            wku: wku.into(),
            title: String::new(),
            app_date: None,
            issue_date,
            inventors: Vec::new(),
            assignees: Vec::new(),
            ipc_codes: Vec::new(),
            references: Vec::new(),
            claims: String::new(),
        }
    }

    pub fn wku(&self) -> &str {
        &self.wku
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn app_date(&self) -> Option<CalendarDate> {
        self.app_date
    }

    pub fn issue_date(&self) -> CalendarDate {
        self.issue_date
    }

    pub fn inventors(&self) -> &[String] {
        &self.inventors
    }

    pub fn assignees(&self) -> &[String] {
        &self.assignees
    }

    pub fn ipc_codes(&self) -> &[IpcCode] {
        &self.ipc_codes
    }

    pub fn references(&self) -> &[String] {
        &self.references
    }

    pub fn claims(&self) -> &str {
        &self.claims
    }

    /// The nine CSV cells, lists joined with the multi-value delimiter.
    pub fn to_csv_row(&self) -> [String; 9] {
        let ipc: Vec<String> = self.ipc_codes.iter().map(IpcCode::to_string).collect();
        let join = |xs: &[String]| join_multivalue(xs).expect("record values are sanitized");
        [
            self.wku.clone(),
            self.title.clone(),
            self.app_date.map(|d| d.to_string()).unwrap_or_default(),
            self.issue_date.to_string(),
            join(&self.inventors),
            join(&self.assignees),
            join(&ipc),
            join(&self.references),
            self.claims.clone(),
        ]
    }

    pub fn from_csv_row<S: AsRef<str>>(row: &[S]) -> Result<PatentRecord, RecordError> {
        if row.len() != CSV_HEADER.len() {
            return Err(RecordError::ColumnCount(row.len()));
        }
        let cell = |i: usize| row[i].as_ref();
        let date = |i: usize, column: &'static str| {
            CalendarDate::parse(cell(i)).map_err(|source| RecordError::Date { column, source })
        };
        let app_date = if cell(2).is_empty() {
            None
        } else {
            Some(date(2, "app_date")?)
        };
        let ipc_codes = split_multivalue(cell(6))
            .iter()
            .map(|s| IpcCode::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        PatentRecord::builder(cell(0), date(3, "issue_date")?)
            .title(cell(1))
            .app_date(app_date)
            .inventors(split_multivalue(cell(4)))
            .assignees(split_multivalue(cell(5)))
            .ipc_codes(ipc_codes)
            .references(split_multivalue(cell(7)))
            .claims(cell(8))
            .build()
    }
}

/// Collects raw source values and sanitizes them into a [`PatentRecord`].
#[derive(Debug, Clone)]
pub struct RecordBuilder {
    wku: String,
    title: String,
    app_date: Option<CalendarDate>,
    issue_date: CalendarDate,
    inventors: Vec<String>,
    assignees: Vec<String>,
    ipc_codes: Vec<IpcCode>,
    references: Vec<String>,
    claims: String,
}

impl RecordBuilder {
    pub fn title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn app_date(mut self, date: Option<CalendarDate>) -> Self {
        self.app_date = date;
        self
    }

    pub fn inventors<I: IntoIterator<Item = S>, S: Into<String>>(mut self, names: I) -> Self {
        self.inventors.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn assignees<I: IntoIterator<Item = S>, S: Into<String>>(mut self, names: I) -> Self {
        self.assignees.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn ipc_codes<I: IntoIterator<Item = IpcCode>>(mut self, codes: I) -> Self {
        self.ipc_codes.extend(codes);
        self
    }

    pub fn references<I: IntoIterator<Item = S>, S: Into<String>>(mut self, refs: I) -> Self {
        self.references.extend(refs.into_iter().map(Into::into));
        self
    }

    pub fn claims(mut self, claims: impl Into<String>) -> Self {
        self.claims = claims.into();
        self
    }

    /// Sanitizes every field, drops empty list values and repeated IPC codes,
    /// and rejects an empty WKU.
    pub fn build(self) -> Result<PatentRecord, RecordError> {
        let wku = sanitize_field(&self.wku, false);
        if wku.is_empty() {
            return Err(RecordError::EmptyWku);
        }
        let clean_list = |xs: Vec<String>| -> Vec<String> {
            xs.iter()
                .map(|x| sanitize_field(x, false))
                .filter(|x| !x.is_empty())
                .collect()
        };
        let mut ipc_codes: Vec<IpcCode> = Vec::with_capacity(self.ipc_codes.len());
        for code in self.ipc_codes {
            if !ipc_codes.contains(&code) {
                ipc_codes.push(code);
            }
        }
        Ok(PatentRecord {
            wku,
            title: sanitize_field(&self.title, false),
            app_date: self.app_date,
            issue_date: self.issue_date,
            inventors: clean_list(self.inventors),
            assignees: clean_list(self.assignees),
            ipc_codes,
            references: clean_list(self.references),
            claims: sanitize_field(&self.claims, true),
        })
    }
}

#[derive(Deserialize)]
struct RawRecord {
    wku: String,
    title: String,
    app_date: Option<CalendarDate>,
    issue_date: CalendarDate,
    inventors: Vec<String>,
    assignees: Vec<String>,
    ipc_codes: Vec<IpcCode>,
    references: Vec<String>,
    claims: String,
}

impl TryFrom<RawRecord> for PatentRecord {
    type Error = RecordError;

    fn try_from(raw: RawRecord) -> Result<Self, Self::Error> {
        PatentRecord::builder(raw.wku, raw.issue_date)
            .title(raw.title)
            .app_date(raw.app_date)
            .inventors(raw.inventors)
            .assignees(raw.assignees)
            .ipc_codes(raw.ipc_codes)
            .references(raw.references)
            .claims(raw.claims)
            .build()
    }
}
