//! Field-tag inventory of the fixed-tag full-text format.
//!
//! Each section header maps its field tags to a capture target. Tags absent
//! from a section's list are unknown and get counted as skipped fields.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Wku,
    Title,
    AppDate,
    IssueDate,
    Inventor,
    Assignee,
    Ipc,
    Reference,
    ClaimNumber,
    ClaimText,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionKind {
    /// PATN: opens a new record and carries its bibliographic fields.
    Patent,
    /// A section whose listed tags are captured or knowingly ignored.
    Captured,
    /// Recognized so its contents are skipped silently.
    Opaque,
}

#[derive(Debug)]
pub struct SectionSpec {
    pub name: &'static str,
    pub kind: SectionKind,
    pub fields: &'static [(&'static str, Target)],
}

impl SectionSpec {
    pub fn target(&self, tag: &str) -> Option<Target> {
        match self.kind {
            SectionKind::Opaque => Some(Target::Ignore),
            _ => self.fields.iter().find(|(t, _)| *t == tag).map(|(_, target)| *target),
        }
    }
}

use Target::*;

const CLAIM_FIELDS: &[(&str, Target)] = &[
    ("NUM", ClaimNumber),
    ("PAR", ClaimText),
    ("PAC", ClaimText),
    ("PAL", ClaimText),
    ("PA0", ClaimText),
    ("PA1", ClaimText),
    ("PA2", ClaimText),
    ("PA3", ClaimText),
    ("PA4", ClaimText),
    ("PA5", ClaimText),
    ("PA6", ClaimText),
    ("PA7", ClaimText),
    ("PA8", ClaimText),
    ("PA9", ClaimText),
    ("TBL", ClaimText),
    ("EQU", ClaimText),
    ("CLM", ClaimText),
    ("STM", Ignore),
    ("NCL", Ignore),
];

const fn opaque(name: &'static str) -> SectionSpec {
    SectionSpec {
        name,
        kind: SectionKind::Opaque,
        fields: &[],
    }
}

pub static SECTIONS: &[SectionSpec] = &[
    SectionSpec {
        name: "PATN",
        kind: SectionKind::Patent,
        fields: &[
            ("WKU", Wku),
            ("TTL", Title),
            ("APD", AppDate),
            ("ISD", IssueDate),
            ("SRC", Ignore),
            ("APN", Ignore),
            ("APT", Ignore),
            ("PBL", Ignore),
            ("ART", Ignore),
            ("NCL", Ignore),
            ("ECL", Ignore),
            ("EXP", Ignore),
            ("EXA", Ignore),
            ("NDR", Ignore),
            ("NFG", Ignore),
            ("DCD", Ignore),
            ("NPS", Ignore),
            ("TRM", Ignore),
        ],
    },
    SectionSpec {
        name: "INVT",
        kind: SectionKind::Captured,
        fields: &[
            ("NAM", Inventor),
            ("STR", Ignore),
            ("CTY", Ignore),
            ("STA", Ignore),
            ("CNT", Ignore),
            ("ZIP", Ignore),
            ("R47", Ignore),
            ("ITX", Ignore),
        ],
    },
    SectionSpec {
        name: "ASSG",
        kind: SectionKind::Captured,
        fields: &[
            ("NAM", Assignee),
            ("STR", Ignore),
            ("CTY", Ignore),
            ("STA", Ignore),
            ("CNT", Ignore),
            ("ZIP", Ignore),
            ("COD", Ignore),
            ("ITX", Ignore),
        ],
    },
    SectionSpec {
        name: "CLAS",
        kind: SectionKind::Captured,
        fields: &[
            ("ICL", Ipc),
            ("OCL", Ignore),
            ("XCL", Ignore),
            ("UCL", Ignore),
            ("DCL", Ignore),
            ("EDF", Ignore),
            ("FSC", Ignore),
            ("FSS", Ignore),
        ],
    },
    SectionSpec {
        name: "UREF",
        kind: SectionKind::Captured,
        fields: &[
            ("PNO", Reference),
            ("ISD", Ignore),
            ("NAM", Ignore),
            ("OCL", Ignore),
            ("XCL", Ignore),
            ("UCL", Ignore),
        ],
    },
    SectionSpec {
        name: "CLMS",
        kind: SectionKind::Captured,
        fields: CLAIM_FIELDS,
    },
    SectionSpec {
        name: "DCLM",
        kind: SectionKind::Captured,
        fields: CLAIM_FIELDS,
    },
    opaque("ABST"),
    opaque("BSUM"),
    opaque("DETD"),
    opaque("DRWD"),
    opaque("DRPD"),
    opaque("GOVT"),
    opaque("PARN"),
    opaque("OREF"),
    opaque("FREF"),
    opaque("PRIR"),
    opaque("REIS"),
    opaque("RLAP"),
    opaque("LREP"),
    opaque("PCTA"),
];

/// Tags tolerated before the first PATN (the weekly file header record).
pub const FILE_HEADER_TAGS: &[&str] = &["HHHH"];

pub fn section(tag: &str) -> Option<&'static SectionSpec> {
    SECTIONS.iter().find(|s| s.name == tag)
}
