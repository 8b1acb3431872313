//! Grouped summaries over converted records: weekly issuance counts, IPC
//! subclass frequencies and application-to-grant lag statistics.
//!
//! All tables are plain vectors of rows, ready to be written as CSV with
//! [`write_table`].

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::num::NonZeroUsize;

use serde::Serialize;

use crate::exec::Exec;
use crate::model::{PatentRecord, WeekSpec};

/// Quantile convention used for every lag table.
pub const QUARTILE_RULE: &str = "tukey-hinges";

/// Days from filing to grant. Negative values are returned unchanged.
pub fn lag_days(record: &PatentRecord) -> Option<i64> {
    record.app_date().map(|app| app.days_until(record.issue_date()))
}

/// The grant week of a record, derived from its issue date.
pub fn week_of_issue(record: &PatentRecord) -> (i32, u32) {
    let w = WeekSpec::containing(record.issue_date());
    (w.year(), w.week())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeeklyCount {
    pub year: i32,
    pub week: u32,
    pub count: usize,
}

pub fn weekly_counts<F>(records: &[PatentRecord], week_of: F, exec: Exec) -> Vec<WeeklyCount>
where
    F: Fn(&PatentRecord) -> (i32, u32) + Sync + Send,
{
    exec.count(records, |r| [week_of(r)])
        .into_iter()
        .map(|((year, week), count)| WeeklyCount { year, week, count })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassCount {
    pub subclass_key: String,
    pub count: usize,
}

/// Distinct subclass keys on one record.
fn subclass_keys(record: &PatentRecord) -> BTreeSet<String> {
    record.ipc_codes().iter().filter_map(|c| c.subclass_key()).collect()
}

/// Most frequent subclasses, counting each record once per distinct subclass.
/// Ordered by count descending, then key.
pub fn top_ipc_subclasses(records: &[PatentRecord], k: NonZeroUsize, exec: Exec) -> Vec<ClassCount> {
    let mut counts: Vec<ClassCount> = exec
        .count(records, subclass_keys)
        .into_iter()
        .map(|(subclass_key, count)| ClassCount { subclass_key, count })
        .collect();
    // keys arrive sorted, so a stable sort on count keeps ties lexicographic
    counts.sort_by_key(|c| std::cmp::Reverse(c.count));
    counts.truncate(k.get());
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub min: i64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: i64,
}

fn median_of_sorted(v: &[i64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0
    }
}

/// Five-number summary with Tukey hinges: q1 and q3 are the medians of the
/// lower and upper halves, each half including the median when `n` is odd.
pub fn quartiles(values: &[i64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    let half = n.div_ceil(2);
    Some(Quartiles {
        min: v[0],
        q1: median_of_sorted(&v[..half]),
        median: median_of_sorted(&v),
        q3: median_of_sorted(&v[n - half..]),
        max: v[n - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagStats {
    pub group_key: String,
    /// Lags entering the quartiles (non-negative ones).
    pub count: usize,
    pub min: i64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: i64,
    /// Lags below zero, excluded from the quartiles.
    pub negative_lags: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LagTable {
    pub rows: Vec<LagStats>,
    pub records_without_app_date: usize,
    /// All negative lags, including those in groups with no usable lag.
    pub negative_lags: usize,
}

impl LagTable {
    pub fn get(&self, key: &str) -> Option<&LagStats> {
        self.rows.iter().find(|r| r.group_key == key)
    }
}

/// Lag statistics per group. A record contributes its lag once to every key
/// `keys_of` yields. Groups without a non-negative lag are omitted.
pub fn lag_stats_by<F, I>(records: &[PatentRecord], keys_of: F, exec: Exec) -> LagTable
where
    F: Fn(&PatentRecord) -> I + Sync + Send,
    I: IntoIterator<Item = String>,
{
    let groups = exec.group(records, |r| {
        let lag = lag_days(r);
        keys_of(r).into_iter().map(move |k| (k, lag)).collect::<Vec<_>>()
    });
    let mut table = LagTable {
        records_without_app_date: records.iter().filter(|r| r.app_date().is_none()).count(),
        ..LagTable::default()
    };
    for (group_key, lags) in groups {
        let (usable, negative): (Vec<i64>, Vec<i64>) = lags.into_iter().flatten().partition(|d| *d >= 0);
        table.negative_lags += negative.len();
        if let Some(q) = quartiles(&usable) {
            table.rows.push(LagStats {
                group_key,
                count: usable.len(),
                min: q.min,
                q1: q.q1,
                median: q.median,
                q3: q.q3,
                max: q.max,
                negative_lags: negative.len(),
            });
        }
    }
    table
}

/// Lag statistics per issue year.
pub fn lag_stats_by_year(records: &[PatentRecord], exec: Exec) -> LagTable {
    lag_stats_by(records, |r| [r.issue_date().year().to_string()], exec)
}

/// Lag statistics per subclass, restricted to the `top` most frequent
/// subclasses. Rows follow the frequency ranking.
pub fn lag_stats_by_class(records: &[PatentRecord], top: NonZeroUsize, exec: Exec) -> LagTable {
    let ranking: Vec<String> = top_ipc_subclasses(records, top, exec)
        .into_iter()
        .map(|c| c.subclass_key)
        .collect();
    let keep: BTreeSet<&String> = ranking.iter().collect();
    let mut table = lag_stats_by(
        records,
        |r| subclass_keys(r).into_iter().filter(|k| keep.contains(k)),
        exec,
    );
    let rank: BTreeMap<&String, usize> = ranking.iter().enumerate().map(|(i, k)| (k, i)).collect();
    table.rows.sort_by_key(|row| rank[&row.group_key]);
    table
}

/// Median of `later` minus median of `earlier`, when both years have rows.
pub fn median_delta(by_year: &LagTable, later: i32, earlier: i32) -> Option<f64> {
    let m = |y: i32| by_year.get(&y.to_string()).map(|r| r.median);
    Some(m(later)? - m(earlier)?)
}

/// A row of a plot-ready output table.
pub trait TableRow {
    const HEADER: &'static [&'static str];
    fn cells(&self) -> Vec<String>;
}

impl TableRow for WeeklyCount {
    const HEADER: &'static [&'static str] = &["year", "week", "count"];
    fn cells(&self) -> Vec<String> {
        vec![self.year.to_string(), self.week.to_string(), self.count.to_string()]
    }
}

impl TableRow for ClassCount {
    const HEADER: &'static [&'static str] = &["subclass", "count"];
    fn cells(&self) -> Vec<String> {
        vec![self.subclass_key.clone(), self.count.to_string()]
    }
}

impl TableRow for LagStats {
    const HEADER: &'static [&'static str] = &[
        "group",
        "count",
        "min",
        "q1",
        "median",
        "q3",
        "max",
        "negative_lags",
        "quartile_rule",
    ];
    fn cells(&self) -> Vec<String> {
        vec![
            self.group_key.clone(),
            self.count.to_string(),
            self.min.to_string(),
            self.q1.to_string(),
            self.median.to_string(),
            self.q3.to_string(),
            self.max.to_string(),
            self.negative_lags.to_string(),
            QUARTILE_RULE.to_string(),
        ]
    }
}

pub fn write_table<T: TableRow, W: Write>(rows: &[T], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(T::HEADER)?;
    for row in rows {
        w.write_record(row.cells())?;
    }
    w.flush()?;
    Ok(())
}
