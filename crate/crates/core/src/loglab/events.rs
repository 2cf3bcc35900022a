use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::{normalize_query, Error, Month, Result};

use super::MonthlyVolumeTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthKey {
    pub year: i32,
    pub month: Month,
}

impl MonthKey {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("expected YYYY-MM, got {s:?}"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month: u8 = m.parse().map_err(|_| bad())?;
        Ok(Self {
            year,
            month: Month::new(month)?,
        })
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month.get())
    }
}

/// A pre-aggregated count of one query in one calendar month.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEvent {
    pub query: String,
    pub month_key: MonthKey,
    pub count: u64,
}

impl LogEvent {
    pub fn new(query: &str, year: i32, month: u8, count: u64) -> Result<Self> {
        let query = normalize_query(query);
        if query.is_empty() {
            return Err(Error::EmptyQuery);
        }
        if count == 0 {
            return Err(Error::InvalidConfig("event count must be >= 1".into()));
        }
        Ok(Self {
            query,
            month_key: MonthKey {
                year,
                month: Month::new(month)?,
            },
            count,
        })
    }

    /// Parses one TSV line. Blank lines and `#` comments yield `None`.
    pub fn parse_line(line: &str) -> Result<Option<Self>, String> {
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            return Ok(None);
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            ));
        }
        let key = MonthKey::parse(fields[1]).map_err(|e| e.to_string())?;
        let count: u64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| format!("count is not a positive integer: {:?}", fields[2]))?;
        LogEvent::new(fields[0], key.year, key.month.get(), count)
            .map(Some)
            .map_err(|e| e.to_string())
    }

    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}", self.query, self.month_key, self.count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedLine {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for MalformedLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub table: MonthlyVolumeTable,
    pub events: usize,
    pub malformed: Vec<MalformedLine>,
}

/// Parses every line, collecting malformed ones instead of failing.
pub fn parse_events<R: Read>(source: R) -> (Vec<LogEvent>, Vec<MalformedLine>) {
    let mut events = Vec::new();
    let mut malformed = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let parsed = line
            .map_err(|e| e.to_string())
            .and_then(|l| LogEvent::parse_line(&l));
        match parsed {
            Ok(Some(ev)) => events.push(ev),
            Ok(None) => {}
            Err(reason) => malformed.push(MalformedLine {
                line: line_no,
                reason,
            }),
        }
    }
    (events, malformed)
}

/// Events of several files, in file order. Errors if none is valid.
pub fn read_event_files<P: AsRef<Path>>(
    paths: &[P],
) -> Result<(Vec<LogEvent>, Vec<MalformedLine>)> {
    if paths.is_empty() {
        return Err(Error::Empty("input file list"));
    }
    let mut events = Vec::new();
    let mut malformed = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        let (ev, bad) = parse_events(file);
        events.extend(ev);
        malformed.extend(bad.into_iter().map(|mut m| {
            m.reason = format!("{}: {}", path.display(), m.reason);
            m
        }));
    }
    if events.is_empty() {
        return Err(Error::NoEvents {
            diagnostics: malformed.iter().map(ToString::to_string).collect(),
        });
    }
    Ok((events, malformed))
}

/// Sums event counts per (query, calendar month). Malformed lines are
/// collected in the report; only a source with no valid line is an error.
pub fn ingest_events<R: Read>(source: R) -> Result<IngestReport> {
    let (events, malformed) = parse_events(source);
    if events.is_empty() {
        return Err(Error::NoEvents {
            diagnostics: malformed.iter().map(ToString::to_string).collect(),
        });
    }
    let mut table = MonthlyVolumeTable::default();
    for ev in &events {
        table.add_event(ev);
    }
    Ok(IngestReport {
        table,
        events: events.len(),
        malformed,
    })
}

/// Ingests several files as one stream.
pub fn ingest_files<P: AsRef<Path>>(paths: &[P]) -> Result<IngestReport> {
    if paths.is_empty() {
        return Err(Error::Empty("input file list"));
    }
    let mut table = MonthlyVolumeTable::default();
    let mut events = 0;
    let mut malformed = Vec::new();
    let mut diagnostics = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        match ingest_events(file) {
            Ok(report) => {
                table.add_table(&report.table);
                events += report.events;
                malformed.extend(report.malformed.into_iter().map(|mut m| {
                    m.reason = format!("{}: {}", path.display(), m.reason);
                    m
                }));
            }
            Err(Error::NoEvents { diagnostics: d }) => {
                diagnostics.extend(d.into_iter().map(|d| format!("{}: {d}", path.display())));
            }
            Err(e) => return Err(e),
        }
    }
    if events == 0 {
        return Err(Error::NoEvents { diagnostics });
    }
    Ok(IngestReport {
        table,
        events,
        malformed,
    })
}

impl IngestReport {
    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let text: String = lines.into_iter().flat_map(|l| [l, "\n"]).collect();
        ingest_events(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_aggregation() {
        let r = IngestReport::from_lines(["winter hats\t2022-01\t10", "winter hats\t2022-01\t5"])
            .unwrap();
        let m1 = Month::JANUARY;
        assert_eq!(r.table.count("winter hats", m1), 15);
        assert_eq!(r.table.month_total(m1), 15);
    }

    #[test]
    fn single_event_month_totals() {
        let r = IngestReport::from_lines(["gloves\t2022-07\t3"]).unwrap();
        for m in Month::all() {
            let expect = if m.get() == 7 { 3 } else { 0 };
            assert_eq!(r.table.month_total(m), expect);
        }
        assert_eq!(r.table.years().collect::<Vec<_>>(), vec![2022]);
    }

    #[test]
    fn malformed_lines_are_reported_not_fatal() {
        let r = IngestReport::from_lines([
            "# header comment",
            "a\t2022-01\t1",
            "missing fields",
            "b\t2022-13\t1",
            "c\t2022-02\t0",
            "d\t22-02\t4",
            "!!!\t2022-02\t4",
            "",
        ])
        .unwrap();
        assert_eq!(r.events, 1);
        let lines: Vec<usize> = r.malformed.iter().map(|m| m.line).collect();
        assert_eq!(lines, vec![3, 4, 5, 6, 7]);
    }

    #[test]
    fn empty_source_is_an_error_with_diagnostics() {
        let err = ingest_events(&b""[..]).unwrap_err();
        assert!(matches!(err, Error::NoEvents { ref diagnostics } if diagnostics.is_empty()));
        let err = ingest_events(&b"junk line\n"[..]).unwrap_err();
        match err {
            Error::NoEvents { diagnostics } => assert!(diagnostics[0].starts_with("line 1:")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn queries_are_normalized() {
        let r = IngestReport::from_lines(["Winter  Hats\t2022-01\t1", "winter hats\t2023-01\t2"])
            .unwrap();
        assert_eq!(r.table.count("winter hats", Month::JANUARY), 3);
        assert_eq!(r.table.len(), 1);
    }
}
