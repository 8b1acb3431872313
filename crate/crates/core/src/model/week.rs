use std::fmt;
use std::str::FromStr;

use chrono::Weekday;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::date::CalendarDate;

/// First year covered by the weekly grant files.
pub const FIRST_YEAR: i32 = 1976;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeekError {
    #[error("year {0} predates bulk data coverage (first year is {FIRST_YEAR})")]
    YearBeforeCoverage(i32),
    #[error("invalid week {week} for {year}: that year has {available} grant Tuesdays")]
    InvalidWeek { year: i32, week: u32, available: u32 },
}

/// Era of a weekly bulk file, which decides the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    /// Fixed-tag full text, 1976 through 2001.
    Aps,
    /// Numbered-tag XML, 2002 through 2004.
    Xml2,
    /// `us-patent-grant` XML, 2005 onward.
    Xml4,
}

impl SourceFormat {
    pub fn for_year(year: i32) -> SourceFormat {
        match year {
            ..=2001 => SourceFormat::Aps,
            2002..=2004 => SourceFormat::Xml2,
            _ => SourceFormat::Xml4,
        }
    }

    pub fn is_xml(self) -> bool {
        !matches!(self, SourceFormat::Aps)
    }

    pub fn name(self) -> &'static str {
        match self {
            SourceFormat::Aps => "aps",
            SourceFormat::Xml2 => "xml2",
            SourceFormat::Xml4 => "xml4",
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SourceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aps" | "txt" => Ok(SourceFormat::Aps),
            "xml2" => Ok(SourceFormat::Xml2),
            "xml4" => Ok(SourceFormat::Xml4),
            other => Err(format!("unknown source format {other:?} (expected aps, xml2 or xml4)")),
        }
    }
}

/// All grant Tuesdays of `year`, in calendar order.
pub fn grant_tuesdays(year: i32) -> impl Iterator<Item = CalendarDate> {
    let first = CalendarDate::from_ymd(year, 1, 1).ok();
    std::iter::successors(first, |d| d.succ())
        .take_while(move |d| d.year() == year)
        .filter(|d| d.weekday() == Weekday::Tue)
}

pub fn grant_weeks_in_year(year: i32) -> u32 {
    grant_tuesdays(year).count() as u32
}

/// One weekly bulk file, identified by year and 1-based grant-week index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeekSpec {
    year: i32,
    week: u32,
}

impl WeekSpec {
    pub fn new(year: i32, week: u32) -> Result<Self, WeekError> {
        if year < FIRST_YEAR {
            return Err(WeekError::YearBeforeCoverage(year));
        }
        let available = grant_weeks_in_year(year);
        if week == 0 || week > available {
            return Err(WeekError::InvalidWeek { year, week, available });
        }
        Ok(WeekSpec { year, week })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn week(&self) -> u32 {
        self.week
    }

    pub fn format(&self) -> SourceFormat {
        SourceFormat::for_year(self.year)
    }

    /// The week-th grant Tuesday of the year.
    pub fn grant_tuesday(&self) -> CalendarDate {
        grant_tuesdays(self.year)
            .nth(self.week as usize - 1)
            .expect("week index validated at construction")
    }

    /// The grant week a date belongs to: the number of grant Tuesdays in its
    /// year on or before it, with dates before the first Tuesday folded into
    /// week 1.
    pub fn containing(date: CalendarDate) -> WeekSpec {
        let first = grant_tuesdays(date.year()).next().expect("every year has a Tuesday");
        let week = first.days_until(date).max(0) / 7 + 1;
        WeekSpec {
            year: date.year(),
            week: week as u32,
        }
    }
}

impl fmt::Display for WeekSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-wk{:02}", self.year, self.week)
    }
}
