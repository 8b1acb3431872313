#![allow(dead_code)]

pub mod checks;

use std::io::{self, Cursor, Read, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use patentbulk_core::fetch::{Transport, TransportError};
use patentbulk_core::model::{CalendarDate, IpcCode, PatentRecord};
use proptest::prelude::*;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read_fixture(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).unwrap()
}

pub fn zip_bytes(members: &[(&str, &[u8])]) -> Vec<u8> {
    let mut w = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let opts = zip::write::SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
    for (name, data) in members {
        w.start_file(*name, opts).unwrap();
        w.write_all(data).unwrap();
    }
    w.finish().unwrap().into_inner()
}

/// Serves canned bodies by URL suffix and records every request.
#[derive(Default)]
pub struct FakeTransport {
    pub routes: Vec<(String, Vec<u8>)>,
    pub calls: AtomicUsize,
    pub log: Mutex<Vec<String>>,
}

impl FakeTransport {
    pub fn new(routes: Vec<(&str, Vec<u8>)>) -> Self {
        FakeTransport {
            routes: routes.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            ..FakeTransport::default()
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for FakeTransport {
    fn get(&self, url: &str, sink: &mut dyn Write) -> Result<u64, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(url.to_string());
        let (_, body) = self
            .routes
            .iter()
            .find(|(suffix, _)| url.ends_with(suffix))
            .ok_or(TransportError::Status(404))?;
        sink.write_all(body).map_err(TransportError::Sink)?;
        Ok(body.len() as u64)
    }
}

/// An endless-looking reader that repeats `body` after a one-off `head`
/// until `total` bytes have been produced, cutting only at body boundaries.
pub struct RepeatReader {
    head: Vec<u8>,
    body: Vec<u8>,
    copies_left: u64,
    current: Cursor<Vec<u8>>,
    started: bool,
}

impl RepeatReader {
    pub fn new(head: Vec<u8>, body: Vec<u8>, total: u64) -> Self {
        let copies = total.saturating_sub(head.len() as u64).div_ceil(body.len() as u64);
        RepeatReader {
            head,
            body,
            copies_left: copies,
            current: Cursor::new(Vec::new()),
            started: false,
        }
    }

    pub fn copies(head_len: usize, body_len: usize, total: u64) -> u64 {
        total.saturating_sub(head_len as u64).div_ceil(body_len as u64)
    }
}

impl Read for RepeatReader {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        loop {
            let n = self.current.read(buf)?;
            if n > 0 {
                return Ok(n);
            }
            if !self.started {
                self.started = true;
                self.current = Cursor::new(self.head.clone());
            } else if self.copies_left > 0 {
                self.copies_left -= 1;
                self.current = Cursor::new(self.body.clone());
            } else {
                return Ok(0);
            }
        }
    }
}

// ---- record generators ----

fn text_item() -> impl Strategy<Value = String> {
    // commas, quotes, delimiters, tabs and newlines all need care downstream
    proptest::string::string_regex("[A-Za-z0-9 ,;\"'\\-\t\n.éü&]{0,24}").unwrap()
}

fn claim_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        proptest::string::string_regex("[A-Za-z0-9 ,;:\"'().\\-]{0,40}").unwrap(),
        0..5,
    )
    .prop_map(|lines| lines.join("\n"))
}

pub fn date_between(from_year: i32, to_year: i32) -> impl Strategy<Value = CalendarDate> {
    (from_year..=to_year, 1u32..=12, 1u32..=28).prop_map(|(y, m, d)| CalendarDate::from_ymd(y, m, d).unwrap())
}

pub fn ipc_code() -> impl Strategy<Value = IpcCode> {
    (
        prop::sample::select(vec!['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H']),
        0u32..100,
        prop::option::of(prop::sample::select(vec!['B', 'C', 'D', 'K', 'N'])),
        prop::option::of((1u32..1000, 0u32..100)),
    )
        .prop_map(|(section, class, subclass, group)| {
            let mut raw = format!("{section}{class:02}");
            if let Some(s) = subclass {
                raw.push(s);
                if let Some((g, sg)) = group {
                    raw.push_str(&format!(" {g}/{sg:02}"));
                }
            }
            IpcCode::parse(&raw).unwrap()
        })
}

pub fn record() -> impl Strategy<Value = PatentRecord> {
    (
        "[A-Z0-9]{1,9}",
        text_item(),
        prop::option::of(date_between(1960, 2020)),
        date_between(1976, 2020),
        prop::collection::vec(text_item(), 0..4),
        prop::collection::vec(text_item(), 0..3),
        prop::collection::vec(ipc_code(), 0..4),
        prop::collection::vec("[0-9]{7}", 0..5),
        claim_text(),
    )
        .prop_map(|(wku, title, app, issue, inventors, assignees, ipc, refs, claims)| {
            PatentRecord::builder(wku, issue)
                .title(title)
                .app_date(app)
                .inventors(inventors)
                .assignees(assignees)
                .ipc_codes(ipc)
                .references(refs)
                .claims(claims)
                .build()
                .unwrap()
        })
}

/// Records drawn from a small pool of subclasses and 1976-1981 grant dates,
/// so groups are well populated.
pub fn analytics_record() -> impl Strategy<Value = PatentRecord> {
    let subclasses = vec![
        "C07D", "C07C", "A61K", "B65D", "H01L", "G06F", "A01B", "F16K", "C08L", "B01J", "E21B", "H04N",
    ];
    (
        "[0-9]{7}",
        prop::option::of(date_between(1968, 1981)),
        date_between(1976, 1981),
        prop::collection::vec((prop::sample::select(subclasses), 1u32..20), 0..4),
    )
        .prop_map(|(wku, app, issue, codes)| {
            PatentRecord::builder(wku, issue)
                .app_date(app)
                .ipc_codes(
                    codes
                        .into_iter()
                        .map(|(sc, g)| IpcCode::parse(&format!("{sc} {g}/00")).unwrap()),
                )
                .build()
                .unwrap()
        })
}

// ---- independent calendar arithmetic for oracles ----

/// Days since 1970-01-01 (proleptic Gregorian), by the civil-from-days inverse.
pub fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146097 + doe - 719468
}

pub fn day_number(date: CalendarDate) -> i64 {
    days_from_civil(date.year() as i64, date.month() as i64, date.day() as i64)
}

/// Zeller's congruence; 0 = Saturday ... 3 = Tuesday.
pub fn zeller(y: i64, m: i64, d: i64) -> i64 {
    let (y, m) = if m < 3 { (y - 1, m + 12) } else { (y, m) };
    let k = y % 100;
    let j = y / 100;
    (d + 13 * (m + 1) / 5 + k + k / 4 + j / 4 + 5 * j) % 7
}

/// Grant week of a date: 1 + whole weeks since the year's first Tuesday,
/// with earlier days folded into week 1.
pub fn oracle_week(date: CalendarDate) -> (i32, u32) {
    let y = date.year() as i64;
    let first_tuesday = (1..=7).find(|d| zeller(y, 1, *d) == 3).unwrap();
    let since = day_number(date) - days_from_civil(y, 1, first_tuesday);
    let week = if since < 0 { 1 } else { since / 7 + 1 };
    (date.year(), week as u32)
}
