use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DateError {
    #[error("malformed date {0:?}: expected YYYY-MM-DD or YYYYMMDD")]
    Malformed(String),
    #[error("{0:?} is not a valid calendar date")]
    OutOfRange(String),
}

/// A validated Gregorian calendar date.
///
/// Accepts both the ISO `YYYY-MM-DD` form and the compact `YYYYMMDD` form used
/// by the bulk files; always displays as ISO.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CalendarDate(NaiveDate);

impl CalendarDate {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Result<Self, DateError> {
        NaiveDate::from_ymd_opt(year, month, day)
            .filter(|d| (0..=9999).contains(&d.year()))
            .map(CalendarDate)
            .ok_or_else(|| DateError::OutOfRange(format!("{year:04}-{month:02}-{day:02}")))
    }

    pub fn parse(raw: &str) -> Result<Self, DateError> {
        let s = raw.trim();
        let b = s.as_bytes();
        let digits = |r: std::ops::Range<usize>| -> Option<u32> {
            let part = &b[r];
            if part.iter().all(u8::is_ascii_digit) {
                std::str::from_utf8(part).ok()?.parse().ok()
            } else {
                None
            }
        };
        let parts = match b.len() {
            10 if b[4] == b'-' && b[7] == b'-' => (digits(0..4), digits(5..7), digits(8..10)),
            8 => (digits(0..4), digits(4..6), digits(6..8)),
            _ => return Err(DateError::Malformed(raw.to_string())),
        };
        match parts {
            (Some(y), Some(m), Some(d)) => {
                Self::from_ymd(y as i32, m, d).map_err(|_| DateError::OutOfRange(raw.to_string()))
            }
            _ => Err(DateError::Malformed(raw.to_string())),
        }
    }

    pub fn year(&self) -> i32 {
        self.0.year()
    }

    pub fn month(&self) -> u32 {
        self.0.month()
    }

    pub fn day(&self) -> u32 {
        self.0.day()
    }

    pub fn weekday(&self) -> Weekday {
        self.0.weekday()
    }

    /// Day of the year, 1-based.
    pub fn ordinal(&self) -> u32 {
        self.0.ordinal()
    }

    /// Signed number of days from `self` to `later`.
    pub fn days_until(&self, later: CalendarDate) -> i64 {
        (later.0 - self.0).num_days()
    }

    pub fn succ(&self) -> Option<CalendarDate> {
        self.0.succ_opt().map(CalendarDate)
    }

    /// The date `days` later (or earlier, if negative), within years 0-9999.
    pub fn add_days(&self, days: i64) -> Option<CalendarDate> {
        let shifted = self.0.checked_add_signed(chrono::TimeDelta::try_days(days)?)?;
        (0..=9999).contains(&shifted.year()).then_some(CalendarDate(shifted))
    }

    /// Compact `YYYYMMDD` form.
    pub fn compact(&self) -> String {
        format!("{:04}{:02}{:02}", self.year(), self.month(), self.day())
    }
}

impl fmt::Display for CalendarDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year(), self.month(), self.day())
    }
}

impl FromStr for CalendarDate {
    type Err = DateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CalendarDate::parse(s)
    }
}

impl Serialize for CalendarDate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CalendarDate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CalendarDate::parse(&s).map_err(serde::de::Error::custom)
    }
}
