//! Criterion checks shared by the acceptance runner and the topical tests.
//! Each returns a short detail line on success and a reason on failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::{Arc, Barrier, Mutex};
use std::time::{Duration, Instant};

use patentbulk_core::analytics::{self, LagTable};
use patentbulk_core::aps::{parse_aps_stream, ApsOptions};
use patentbulk_core::exec::Exec;
use patentbulk_core::fetch::{
    resolve_plan, FetchError, Fetcher, NamingTemplates, RetryPolicy, Transport, TransportError,
};
use patentbulk_core::model::{join_multivalue, split_multivalue, PatentRecord, SourceFormat, WeekSpec};
use patentbulk_core::pipeline::{read_csv, read_jsonl, write_csv, write_jsonl};
use patentbulk_core::xml::{mapping_for, parse_xml_stream, DocumentSplitter};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use super::{analytics_record, day_number, oracle_week, read_fixture, record, zip_bytes, FakeTransport};

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn parse_aps(bytes: &[u8]) -> Vec<PatentRecord> {
    parse_aps_stream(bytes, ApsOptions::default())
        .collect::<Result<_, _>>()
        .unwrap()
}

fn first_difference(a: &[u8], b: &[u8]) -> String {
    let at = a
        .iter()
        .zip(b)
        .position(|(x, y)| x != y)
        .unwrap_or(a.len().min(b.len()));
    let show = |s: &[u8]| String::from_utf8_lossy(&s[at.saturating_sub(20)..(at + 20).min(s.len())]).into_owned();
    format!(
        "first difference at byte {at}: got {:?}, expected {:?}",
        show(a),
        show(b)
    )
}

pub fn fixture_goldens() -> Check {
    let started = Instant::now();
    let records = parse_aps(&read_fixture("aps_two_patents.txt"));
    ensure!(records.len() == 2, "expected 2 records, got {}", records.len());
    let mut csv = Vec::new();
    write_csv(records.clone(), &mut csv).map_err(|e| e.to_string())?;
    let golden_csv = read_fixture("aps_two_patents.csv");
    ensure!(
        csv == golden_csv,
        "CSV mismatch, {}",
        first_difference(&csv, &golden_csv)
    );
    let mut jsonl = Vec::new();
    write_jsonl(records, &mut jsonl).map_err(|e| e.to_string())?;
    let golden_jsonl = read_fixture("aps_two_patents.jsonl");
    ensure!(
        jsonl == golden_jsonl,
        "JSONL mismatch, {}",
        first_difference(&jsonl, &golden_jsonl)
    );
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "CSV {} B and JSONL {} B byte-identical in {elapsed:?}",
        csv.len(),
        jsonl.len()
    ))
}

pub fn era_equivalence() -> Check {
    let started = Instant::now();
    let aps = parse_aps(&read_fixture("era/patent.txt"));
    let xml = |file: &str, format: SourceFormat| -> Vec<PatentRecord> {
        let bytes = read_fixture(file);
        parse_xml_stream(&bytes[..], mapping_for(format).unwrap(), Exec::Sequential)
            .collect::<Result<_, _>>()
            .unwrap()
    };
    let xml2 = xml("era/patent_xml2.xml", SourceFormat::Xml2);
    let xml4 = xml("era/patent_xml4.xml", SourceFormat::Xml4);
    ensure!(
        aps.len() == 1 && xml2.len() == 1 && xml4.len() == 1,
        "record counts {} {} {}",
        aps.len(),
        xml2.len(),
        xml4.len()
    );
    ensure!(aps[0] == xml2[0], "APS and XML2 differ:\n{:?}\n{:?}", aps[0], xml2[0]);
    ensure!(aps[0] == xml4[0], "APS and XML4 differ:\n{:?}\n{:?}", aps[0], xml4[0]);
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("three encodings of {} agree in {elapsed:?}", aps[0].wku()))
}

pub fn serialization_round_trip(record_cases: u32, list_cases: u32) -> Check {
    let mut runner = TestRunner::new(Config {
        cases: record_cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&prop::collection::vec(record(), 1..4), |records| {
            let mut csv = Vec::new();
            write_csv(records.clone(), &mut csv).unwrap();
            prop_assert_eq!(&read_csv(&csv[..]).unwrap(), &records);
            let mut jsonl = Vec::new();
            write_jsonl(records.clone(), &mut jsonl).unwrap();
            prop_assert_eq!(&read_jsonl(&jsonl[..]).unwrap(), &records);
            Ok(())
        })
        .map_err(|e| format!("record round trip: {e}"))?;
    let item = "[A-Za-z0-9,;.'\" ]{0,12}".prop_map(|s| {
        let s = s.replace("; ", ", ");
        s.trim().to_string()
    });
    let mut runner = TestRunner::new(Config {
        cases: list_cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(
            &prop::collection::vec(item.prop_filter("non-empty", |s| !s.is_empty()), 0..6),
            |items| {
                let joined = join_multivalue(&items).unwrap();
                prop_assert_eq!(split_multivalue(&joined), items);
                Ok(())
            },
        )
        .map_err(|e| format!("multivalue: {e}"))?;
    Ok(format!(
        "{record_cases} record batches via CSV and JSONL, {list_cases} lists via split/join"
    ))
}

/// One generated APS section and whether it should be emitted.
fn aps_section() -> impl Strategy<Value = (String, bool)> {
    (0u8..4, "[0-9]{6,9}", "[A-Za-z ]{1,30}", 0u8..3).prop_map(|(kind, wku, title, extra)| {
        let mut s = String::from("PATN\n");
        let emitted = match kind {
            0 => {
                s.push_str(&format!("TTL  {title}\nISD  19760106\n"));
                false // no WKU
            }
            1 => {
                s.push_str(&format!("WKU  {wku}\nTTL  {title}\nISD  1976XX06\n"));
                false // bad issue date, no fallback
            }
            _ => {
                s.push_str(&format!(
                    "WKU  {wku}\nTTL  {title}\n     continued\nISD  19760106\nAPD  19750101\n"
                ));
                true
            }
        };
        for i in 0..extra {
            s.push_str(&format!("INVT\nNAM  Person{i}; A\nUREF\nPNO  {:07}\n", i));
        }
        s.push_str("CLMS\nNUM  1.\nPAR  A claim.\n");
        (s, emitted)
    })
}

fn xml_document() -> impl Strategy<Value = (String, bool)> {
    (0u8..5, "[0-9]{7,8}").prop_map(|(kind, num)| {
        let good = format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!DOCTYPE us-patent-grant SYSTEM \"g.dtd\" [ ]>\n\
             <us-patent-grant><us-bibliographic-data-grant><publication-reference><document-id>\
             <doc-number>{num}</doc-number><date>20100105</date></document-id></publication-reference>\
             </us-bibliographic-data-grant></us-patent-grant>\n"
        );
        match kind {
            0 => (
                "<?xml version=\"1.0\"?>\n<us-patent-grant><a></b></us-patent-grant>\n".to_string(),
                false,
            ),
            1 => ("<?xml version=\"1.0\"?>\n<us-patent-grant/>\n".to_string(), false),
            _ => (good, true),
        }
    })
}

pub fn count_conservation(cases: u32) -> Check {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&prop::collection::vec(aps_section(), 0..30), |sections| {
            let mut text = String::from("HHHHHT  APS1\n");
            for (s, _) in &sections {
                text.push_str(s);
            }
            let mut parser = parse_aps_stream(text.as_bytes(), ApsOptions::default());
            let records: Vec<_> = parser.by_ref().collect::<Result<_, _>>().unwrap();
            let report = parser.into_report();
            prop_assert_eq!(report.patn_headers, sections.len() as u64);
            prop_assert_eq!(report.records_emitted + report.records_skipped, report.patn_headers);
            prop_assert_eq!(records.len(), sections.iter().filter(|(_, ok)| *ok).count());
            Ok(())
        })
        .map_err(|e| format!("APS: {e}"))?;
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(
            &(
                prop::collection::vec(xml_document(), 1..30),
                "[ \n]{0,3}",
                any::<bool>(),
            ),
            |(docs, lead, cut_last)| {
                let mut text: String = lead.clone();
                for (d, _) in &docs {
                    text.push_str(d);
                }
                if cut_last {
                    text.truncate(text.len() - 10);
                }
                let prologs = text.lines().filter(|l| l.trim_start().starts_with("<?xml")).count();
                let mut splitter = DocumentSplitter::new(text.as_bytes());
                let slices: Vec<_> = splitter.by_ref().collect::<Result<_, _>>().unwrap();
                prop_assert_eq!(slices.len(), prologs);
                let mut rebuilt = splitter.leading().to_vec();
                for s in &slices {
                    rebuilt.extend_from_slice(&s.bytes);
                }
                prop_assert_eq!(&rebuilt[..], text.as_bytes());
                let mapping = mapping_for(SourceFormat::Xml4).unwrap();
                let mut parser = parse_xml_stream(text.as_bytes(), mapping, Exec::Parallel);
                let records: Vec<_> = parser.by_ref().collect::<Result<_, _>>().unwrap();
                let report = parser.into_report();
                prop_assert_eq!(report.slices as usize, prologs);
                prop_assert_eq!(report.records_emitted + report.record_errors, report.slices);
                let expected =
                    docs.iter().filter(|(_, ok)| *ok).count() - usize::from(cut_last && docs.last().unwrap().1);
                prop_assert_eq!(records.len(), expected);
                Ok(())
            },
        )
        .map_err(|e| format!("XML: {e}"))?;
    Ok(format!(
        "{cases} APS streams and {cases} XML streams conserve counts and bytes"
    ))
}

// ---- brute-force analytics oracle ----

/// (key, count, min, q1, median, q3, max, negatives)
type LagRow = (String, usize, i64, f64, f64, f64, i64, usize);

fn oracle_lag(r: &PatentRecord) -> Option<i64> {
    r.app_date().map(|a| day_number(r.issue_date()) - day_number(a))
}

fn oracle_subclasses(r: &PatentRecord) -> Vec<String> {
    let mut keys: Vec<String> = Vec::new();
    for code in r.ipc_codes() {
        let canonical = code.to_string();
        if canonical.len() >= 4 && canonical.as_bytes()[3].is_ascii_alphabetic() {
            let key = canonical[..4].to_string();
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    keys
}

fn oracle_median(sorted: &[i64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[(n - 1) / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// (count, min, q1, median, q3, max, negatives) per key, by full sort.
fn oracle_lag_table(records: &[PatentRecord], keys_of: impl Fn(&PatentRecord) -> Vec<String>) -> Vec<LagRow> {
    let mut keys: Vec<String> = Vec::new();
    for r in records {
        for k in keys_of(r) {
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    keys.sort();
    let mut rows = Vec::new();
    for key in keys {
        let mut lags = Vec::new();
        let mut negatives = 0;
        for r in records {
            if keys_of(r).contains(&key) {
                match oracle_lag(r) {
                    Some(l) if l >= 0 => lags.push(l),
                    Some(_) => negatives += 1,
                    None => {}
                }
            }
        }
        if lags.is_empty() {
            continue;
        }
        lags.sort();
        let n = lags.len();
        let lower = &lags[..n.div_ceil(2)];
        let upper = &lags[n / 2..];
        rows.push((
            key,
            n,
            lags[0],
            oracle_median(lower),
            oracle_median(&lags),
            oracle_median(upper),
            lags[n - 1],
            negatives,
        ));
    }
    rows
}

fn flatten(t: &LagTable) -> Vec<LagRow> {
    t.rows
        .iter()
        .map(|r| {
            (
                r.group_key.clone(),
                r.count,
                r.min,
                r.q1,
                r.median,
                r.q3,
                r.max,
                r.negative_lags,
            )
        })
        .collect()
}

fn compare_analytics(records: &[PatentRecord], exec: Exec) -> Result<(), String> {
    // weekly counts
    let mut weeks: Vec<(i32, u32)> = Vec::new();
    for r in records {
        let w = oracle_week(r.issue_date());
        if !weeks.contains(&w) {
            weeks.push(w);
        }
    }
    weeks.sort();
    let expected: Vec<(i32, u32, usize)> = weeks
        .iter()
        .map(|w| {
            (
                w.0,
                w.1,
                records.iter().filter(|r| oracle_week(r.issue_date()) == *w).count(),
            )
        })
        .collect();
    let got: Vec<(i32, u32, usize)> = analytics::weekly_counts(records, analytics::week_of_issue, exec)
        .into_iter()
        .map(|c| (c.year, c.week, c.count))
        .collect();
    ensure!(got == expected, "weekly counts differ:\n{got:?}\n{expected:?}");
    ensure!(
        got.iter().map(|c| c.2).sum::<usize>() == records.len(),
        "weekly counts do not conserve records"
    );

    // top subclasses
    let mut all: Vec<String> = Vec::new();
    for r in records {
        for k in oracle_subclasses(r) {
            if !all.contains(&k) {
                all.push(k);
            }
        }
    }
    let mut counted: Vec<(String, usize)> = all
        .into_iter()
        .map(|k| {
            let n = records.iter().filter(|r| oracle_subclasses(r).contains(&k)).count();
            (k, n)
        })
        .collect();
    counted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    for k in [1usize, 3, 10, 50] {
        let got: Vec<(String, usize)> = analytics::top_ipc_subclasses(records, NonZeroUsize::new(k).unwrap(), exec)
            .into_iter()
            .map(|c| (c.subclass_key, c.count))
            .collect();
        let want: Vec<(String, usize)> = counted.iter().take(k).cloned().collect();
        ensure!(got == want, "top-{k} differ:\n{got:?}\n{want:?}");
    }

    // lag days
    for r in records {
        ensure!(analytics::lag_days(r) == oracle_lag(r), "lag differs for {}", r.wku());
    }

    // lag stats by year and by top-10 class
    let by_year = oracle_lag_table(records, |r| vec![r.issue_date().year().to_string()]);
    ensure!(
        flatten(&analytics::lag_stats_by_year(records, exec)) == by_year,
        "lag by year differs"
    );
    let top10: BTreeSet<String> = counted.iter().take(10).map(|c| c.0.clone()).collect();
    let mut by_class = oracle_lag_table(records, |r| {
        oracle_subclasses(r).into_iter().filter(|k| top10.contains(k)).collect()
    });
    let rank: BTreeMap<&String, usize> = counted.iter().enumerate().map(|(i, c)| (&c.0, i)).collect();
    by_class.sort_by_key(|row| rank[&row.0]);
    let got = flatten(&analytics::lag_stats_by_class(
        records,
        NonZeroUsize::new(10).unwrap(),
        exec,
    ));
    ensure!(got == by_class, "lag by class differs:\n{got:?}\n{by_class:?}");
    Ok(())
}

pub fn analytics_oracle(n: usize, seed_cases: u32) -> Check {
    // hand-computed quartile examples
    let q = analytics::quartiles(&[5]).ok_or("no quartiles for [5]")?;
    ensure!(
        (q.min, q.q1, q.median, q.q3, q.max) == (5, 5.0, 5.0, 5.0, 5),
        "singleton quartiles {q:?}"
    );
    let q = analytics::quartiles(&[1, 2, 3, 4]).ok_or("no quartiles")?;
    ensure!((q.q1, q.median, q.q3) == (1.5, 2.5, 3.5), "[1,2,3,4] quartiles {q:?}");

    let mut runner = TestRunner::new(Config {
        cases: seed_cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&prop::collection::vec(analytics_record(), n), |records| {
            for exec in [Exec::Sequential, Exec::Parallel] {
                if let Err(e) = compare_analytics(&records, exec) {
                    return Err(TestCaseError::fail(e));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{seed_cases} samples of {n} records match the brute-force oracle exactly"
    ))
}

// ---- fetch atomicity ----

/// Writes half of `body`, waits at `barrier` twice (so the test can inspect
/// the cache mid-download), then fails as if the connection dropped.
struct StallingTransport {
    body: Vec<u8>,
    barrier: Arc<Barrier>,
}

impl Transport for StallingTransport {
    fn get(&self, _url: &str, sink: &mut dyn Write) -> Result<u64, TransportError> {
        sink.write_all(&self.body[..self.body.len() / 2])
            .map_err(TransportError::Sink)?;
        sink.flush().map_err(TransportError::Sink)?;
        self.barrier.wait();
        self.barrier.wait();
        Err(TransportError::Network("connection reset".into()))
    }
}

/// Panics mid-body, standing in for a killed download.
struct PanickingTransport(Vec<u8>);

const KILLED: &str = "download killed";

/// Keeps the deliberate panic out of the test output.
fn quiet_killed_panics() {
    static INSTALLED: std::sync::Once = std::sync::Once::new();
    INSTALLED.call_once(|| {
        let previous = std::panic::take_hook();
        std::panic::set_hook(Box::new(move |info| {
            if info.payload().downcast_ref::<&str>() != Some(&KILLED) {
                previous(info);
            }
        }));
    });
}

impl Transport for PanickingTransport {
    fn get(&self, _url: &str, sink: &mut dyn Write) -> Result<u64, TransportError> {
        sink.write_all(&self.0[..self.0.len() / 3])
            .map_err(TransportError::Sink)?;
        std::panic::panic_any(KILLED);
    }
}

/// File names in `dir` that look like finished entries (not temporaries).
pub fn visible_entries(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = match fs::read_dir(dir) {
        Ok(entries) => entries
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect(),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => panic!("{e}"),
    };
    names.retain(|n| !n.starts_with('.'));
    names.sort();
    names
}

pub fn fetch_atomicity() -> Check {
    let week = WeekSpec::new(1976, 1).unwrap();
    let plan = resolve_plan(week, "https://example.test", &NamingTemplates::default());
    let body = zip_bytes(&[("pftaps19760106_wk01.txt", &read_fixture("aps_two_patents.txt"))]);
    let no_retry = RetryPolicy {
        attempts: 1,
        initial_backoff: Duration::ZERO,
    };

    // stalled mid-stream: nothing visible while the body is half written
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let barrier = Arc::new(Barrier::new(2));
    let fetcher = Arc::new(Fetcher::new(
        dir.path(),
        Arc::new(StallingTransport {
            body: body.clone(),
            barrier: barrier.clone(),
        }),
        no_retry,
    ));
    let handle = {
        let (fetcher, plan) = (fetcher.clone(), plan.clone());
        std::thread::spawn(move || fetcher.fetch(&plan))
    };
    barrier.wait();
    let mid = visible_entries(dir.path());
    let partial_bytes: u64 = fs::read_dir(dir.path())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().metadata().unwrap().len())
        .sum();
    barrier.wait();
    let result = handle.join().map_err(|_| "fetch thread panicked".to_string())?;
    ensure!(mid.is_empty(), "visible mid-download: {mid:?}");
    ensure!(partial_bytes > 0, "download was not actually in progress");
    ensure!(
        matches!(result, Err(FetchError::Network { .. })),
        "unexpected result {result:?}"
    );
    ensure!(
        visible_entries(dir.path()).is_empty(),
        "visible after failure: {:?}",
        visible_entries(dir.path())
    );

    // killed mid-stream
    quiet_killed_panics();
    let fetcher = Fetcher::new(dir.path(), Arc::new(PanickingTransport(body.clone())), no_retry);
    let killed = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| fetcher.fetch(&plan)));
    ensure!(killed.is_err(), "download was not interrupted");
    ensure!(
        visible_entries(dir.path()).is_empty(),
        "visible after kill: {:?}",
        visible_entries(dir.path())
    );
    ensure!(
        fetcher.lookup(&plan).map_err(|e| e.to_string())?.is_none(),
        "lookup found an entry after kill"
    );

    // truncated archive: integrity error, no entry
    let truncated = Arc::new(FakeTransport::new(vec![(
        "pftaps19760106_wk01.zip",
        body[..body.len() / 2].to_vec(),
    )]));
    let fetcher = Fetcher::new(dir.path(), truncated, no_retry);
    let result = fetcher.fetch(&plan);
    ensure!(
        matches!(result, Err(FetchError::Integrity { .. })),
        "truncated zip gave {result:?}"
    );
    ensure!(
        fs::read_dir(dir.path()).map_err(|e| e.to_string())?.count() == 0,
        "files left after integrity failure"
    );

    // idempotence: concurrent and repeated fetches download once
    let transport = Arc::new(FakeTransport::new(vec![("pftaps19760106_wk01.zip", body.clone())]));
    let fetcher = Arc::new(Fetcher::new(dir.path(), transport.clone(), no_retry));
    let entries: Mutex<Vec<_>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..8 {
            s.spawn(|| entries.lock().unwrap().push(fetcher.fetch(&plan)));
        }
    });
    let entries = entries.into_inner().unwrap();
    let first = entries[0].as_ref().map_err(|e| e.to_string())?.clone();
    ensure!(
        entries.iter().all(|e| e.as_ref().ok() == Some(&first)),
        "concurrent fetches disagree"
    );
    let listing = visible_entries(dir.path());
    let again = fetcher.fetch(&plan).map_err(|e| e.to_string())?;
    ensure!(again == first, "second fetch returned a different entry");
    ensure!(visible_entries(dir.path()) == listing, "second fetch changed the cache");
    ensure!(
        transport.calls() == 1,
        "{} network requests for one entry",
        transport.calls()
    );
    Ok(format!(
        "no visible partial entry; {} cached files after 9 fetches, 1 request",
        listing.len()
    ))
}
