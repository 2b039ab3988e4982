//! Calendar dimension: one record per day with period attributes and
//! last-day-of-period flags.
//!
//! Two hierarchies are navigable: year → semester → quarter → month → day and
//! ISO year → ISO week → day. Weeks follow ISO-8601 (Monday to Sunday) and do
//! not nest inside months.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2199;

pub const TIME_TABLE_HEADER: [&str; 12] = [
    "date",
    "iso_week_year",
    "iso_week_no",
    "month",
    "quarter",
    "semester",
    "year",
    "eow",
    "eom",
    "eoq",
    "eos",
    "eoy",
];

#[derive(Debug, Error)]
pub enum TimeError {
    #[error("date {0} outside supported range {MIN_YEAR}-{MAX_YEAR}")]
    OutOfRange(NaiveDate),
    #[error("year {0} outside supported range {MIN_YEAR}-{MAX_YEAR}")]
    YearOutOfRange(i32),
    #[error("inverted year range {first}..{last}")]
    InvertedRange { first: i32, last: i32 },
    #[error("time table is empty")]
    Empty,
    #[error("time table line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("time table line {line}: expected {expected}, found {found}")]
    NotContiguous {
        line: usize,
        expected: NaiveDate,
        found: NaiveDate,
    },
    #[error("time table line {line}: attributes disagree with the calendar for {date}")]
    Inconsistent { line: usize, date: NaiveDate },
    #[error("time table I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("time table CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Granularity of a time cell; each grain is also a level of one of the two
/// calendar hierarchies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeGrain {
    Day,
    Week,
    Month,
    Quarter,
    Semester,
    Year,
    IsoYear,
}

impl TimeGrain {
    pub const ALL: [TimeGrain; 7] = [
        TimeGrain::Day,
        TimeGrain::Week,
        TimeGrain::Month,
        TimeGrain::Quarter,
        TimeGrain::Semester,
        TimeGrain::Year,
        TimeGrain::IsoYear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimeGrain::Day => "day",
            TimeGrain::Week => "week",
            TimeGrain::Month => "month",
            TimeGrain::Quarter => "quarter",
            TimeGrain::Semester => "semester",
            TimeGrain::Year => "year",
            TimeGrain::IsoYear => "iso_year",
        }
    }

    /// Parent in the calendar hierarchy; `day` rolls up to `month` unless
    /// `via_week` is set.
    pub fn parent(self, via_week: bool) -> Option<TimeGrain> {
        match self {
            TimeGrain::Day if via_week => Some(TimeGrain::Week),
            TimeGrain::Day => Some(TimeGrain::Month),
            TimeGrain::Week => Some(TimeGrain::IsoYear),
            TimeGrain::Month => Some(TimeGrain::Quarter),
            TimeGrain::Quarter => Some(TimeGrain::Semester),
            TimeGrain::Semester => Some(TimeGrain::Year),
            TimeGrain::Year | TimeGrain::IsoYear => None,
        }
    }

    pub fn child(self) -> Option<TimeGrain> {
        match self {
            TimeGrain::Year => Some(TimeGrain::Semester),
            TimeGrain::Semester => Some(TimeGrain::Quarter),
            TimeGrain::Quarter => Some(TimeGrain::Month),
            TimeGrain::Month | TimeGrain::Week => Some(TimeGrain::Day),
            TimeGrain::IsoYear => Some(TimeGrain::Week),
            TimeGrain::Day => None,
        }
    }
}

impl fmt::Display for TimeGrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for TimeGrain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TimeGrain::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown time grain `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeRecord {
    pub date: NaiveDate,
    pub iso_week_year: i32,
    pub iso_week_no: u32,
    pub month: u32,
    pub quarter: u32,
    pub semester: u32,
    pub year: i32,
    pub is_last_day_of_week: bool,
    pub is_last_day_of_month: bool,
    pub is_last_day_of_quarter: bool,
    pub is_last_day_of_semester: bool,
    pub is_last_day_of_year: bool,
}

impl TimeRecord {
    /// Member label of this day at `grain`. Labels sort chronologically.
    pub fn label(&self, grain: TimeGrain) -> String {
        match grain {
            TimeGrain::Day => self.date.format("%Y-%m-%d").to_string(),
            TimeGrain::Week => format!("{:04}-W{:02}", self.iso_week_year, self.iso_week_no),
            TimeGrain::Month => format!("{:04}-{:02}", self.year, self.month),
            TimeGrain::Quarter => format!("{:04}-Q{}", self.year, self.quarter),
            TimeGrain::Semester => format!("{:04}-S{}", self.year, self.semester),
            TimeGrain::Year => format!("{:04}", self.year),
            TimeGrain::IsoYear => format!("{:04}", self.iso_week_year),
        }
    }

    pub fn is_last_day_of(&self, grain: TimeGrain) -> bool {
        match grain {
            TimeGrain::Day => true,
            TimeGrain::Week => self.is_last_day_of_week,
            TimeGrain::Month => self.is_last_day_of_month,
            TimeGrain::Quarter => self.is_last_day_of_quarter,
            TimeGrain::Semester => self.is_last_day_of_semester,
            TimeGrain::Year => self.is_last_day_of_year,
            // the last day of ISO week 52/53 is the last Sunday of the ISO year
            TimeGrain::IsoYear => {
                self.is_last_day_of_week
                    && (self.date + chrono::Days::new(1)).iso_week().year() != self.iso_week_year
            }
        }
    }
}

/// Computes the calendar attributes of `date`.
pub fn time_attributes(date: NaiveDate) -> Result<TimeRecord, TimeError> {
    if !(MIN_YEAR..=MAX_YEAR).contains(&date.year()) {
        return Err(TimeError::OutOfRange(date));
    }
    let next = date + chrono::Days::new(1);
    let iso = date.iso_week();
    let month = date.month();
    let quarter = (month - 1) / 3 + 1;
    let semester = if month <= 6 { 1 } else { 2 };
    let next_quarter = (next.month() - 1) / 3 + 1;
    let year_changes = next.year() != date.year();
    Ok(TimeRecord {
        date,
        iso_week_year: iso.year(),
        iso_week_no: iso.week(),
        month,
        quarter,
        semester,
        year: date.year(),
        is_last_day_of_week: date.weekday() == Weekday::Sun,
        is_last_day_of_month: next.month() != month,
        is_last_day_of_quarter: year_changes || next_quarter != quarter,
        is_last_day_of_semester: year_changes || (month == 6 && next.month() == 7),
        is_last_day_of_year: year_changes,
    })
}

/// Contiguous, ascending, non-empty sequence of days.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTable {
    records: Vec<TimeRecord>,
}

impl TimeTable {
    /// Table covering `first..=last`.
    pub fn from_range(first: NaiveDate, last: NaiveDate) -> Result<Self, TimeError> {
        if last < first {
            return Err(TimeError::InvertedRange {
                first: first.year(),
                last: last.year(),
            });
        }
        let records = first
            .iter_days()
            .take_while(|d| *d <= last)
            .map(time_attributes)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { records })
    }

    pub fn records(&self) -> &[TimeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.records[0].date
    }

    pub fn last_date(&self) -> NaiveDate {
        self.records[self.records.len() - 1].date
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.index_of(date).is_some()
    }

    /// Position of `date` in the table.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.first_date()).num_days();
        (offset >= 0 && (offset as usize) < self.records.len()).then_some(offset as usize)
    }

    pub fn get(&self, date: NaiveDate) -> Option<&TimeRecord> {
        self.index_of(date).map(|i| &self.records[i])
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TimeError> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(TIME_TABLE_HEADER)?;
        let flag = |b: bool| if b { "1" } else { "0" };
        for r in &self.records {
            out.write_record([
                r.date.format("%Y-%m-%d").to_string().as_str(),
                &r.iso_week_year.to_string(),
                &r.iso_week_no.to_string(),
                &r.month.to_string(),
                &r.quarter.to_string(),
                &r.semester.to_string(),
                &r.year.to_string(),
                flag(r.is_last_day_of_week),
                flag(r.is_last_day_of_month),
                flag(r.is_last_day_of_quarter),
                flag(r.is_last_day_of_semester),
                flag(r.is_last_day_of_year),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    /// Reads a table and checks every record against the calendar.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, TimeError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != TIME_TABLE_HEADER {
            return Err(TimeError::Parse {
                line: 1,
                message: format!("expected header {}", TIME_TABLE_HEADER.join(",")),
            });
        }
        let mut records: Vec<TimeRecord> = Vec::new();
        for (idx, row) in rdr.records().enumerate() {
            let line = idx + 2;
            let row = row?;
            let parsed = parse_time_row(&row).map_err(|message| TimeError::Parse { line, message })?;
            if let Some(prev) = records.last() {
                let expected = prev.date + chrono::Days::new(1);
                if parsed.date != expected {
                    return Err(TimeError::NotContiguous {
                        line,
                        expected,
                        found: parsed.date,
                    });
                }
            }
            if time_attributes(parsed.date)? != parsed {
                return Err(TimeError::Inconsistent {
                    line,
                    date: parsed.date,
                });
            }
            records.push(parsed);
        }
        if records.is_empty() {
            return Err(TimeError::Empty);
        }
        Ok(Self { records })
    }

    pub fn load(path: &Path) -> Result<Self, TimeError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), TimeError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn parse_time_row(row: &csv::StringRecord) -> Result<TimeRecord, String> {
    if row.len() != TIME_TABLE_HEADER.len() {
        return Err(format!("expected {} fields, found {}", TIME_TABLE_HEADER.len(), row.len()));
    }
    fn num<T: FromStr>(row: &csv::StringRecord, i: usize) -> Result<T, String> {
        row[i]
            .parse()
            .map_err(|_| format!("bad {} {:?}", TIME_TABLE_HEADER[i], &row[i]))
    }
    fn flag(row: &csv::StringRecord, i: usize) -> Result<bool, String> {
        match &row[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(format!("bad {} flag {other:?}", TIME_TABLE_HEADER[i])),
        }
    }
    let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
        .map_err(|_| format!("bad date {:?}", &row[0]))?;
    Ok(TimeRecord {
        date,
        iso_week_year: num(row, 1)?,
        iso_week_no: num(row, 2)?,
        month: num(row, 3)?,
        quarter: num(row, 4)?,
        semester: num(row, 5)?,
        year: num(row, 6)?,
        is_last_day_of_week: flag(row, 7)?,
        is_last_day_of_month: flag(row, 8)?,
        is_last_day_of_quarter: flag(row, 9)?,
        is_last_day_of_semester: flag(row, 10)?,
        is_last_day_of_year: flag(row, 11)?,
    })
}

fn check_year(year: i32) -> Result<(), TimeError> {
    if (MIN_YEAR..=MAX_YEAR).contains(&year) {
        Ok(())
    } else {
        Err(TimeError::YearOutOfRange(year))
    }
}

/// Builds a table from Jan 1 of `first_year` through Dec 31 of `last_year`.
pub fn build_time_table(first_year: i32, last_year: i32) -> Result<TimeTable, TimeError> {
    if first_year > last_year {
        return Err(TimeError::InvertedRange {
            first: first_year,
            last: last_year,
        });
    }
    check_year(first_year)?;
    check_year(last_year)?;
    let first = NaiveDate::from_ymd_opt(first_year, 1, 1).expect("valid date");
    let last = NaiveDate::from_ymd_opt(last_year, 12, 31).expect("valid date");
    TimeTable::from_range(first, last)
}

/// Appends days through Dec 31 of `new_last_year`; existing records are kept
/// as they are. No-op when the table already reaches that year.
pub fn extend_time_table(table: &TimeTable, new_last_year: i32) -> Result<TimeTable, TimeError> {
    let last = table.last_date();
    if new_last_year <= last.year() {
        return Ok(table.clone());
    }
    check_year(new_last_year)?;
    let target = NaiveDate::from_ymd_opt(new_last_year, 12, 31).expect("valid date");
    let mut records = table.records.clone();
    for date in (last + chrono::Days::new(1)).iter_days().take_while(|d| *d <= target) {
        records.push(time_attributes(date)?);
    }
    Ok(TimeTable { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn year_end_attributes() {
        let r = time_attributes(d(2016, 12, 31)).unwrap();
        assert_eq!((r.quarter, r.semester, r.month, r.year), (4, 2, 12, 2016));
        assert!(r.is_last_day_of_month && r.is_last_day_of_quarter);
        assert!(r.is_last_day_of_semester && r.is_last_day_of_year);
        // Saturday
        assert!(!r.is_last_day_of_week);
        assert_eq!((r.iso_week_year, r.iso_week_no), (2016, 52));
    }

    #[test]
    fn leap_day() {
        let r = time_attributes(d(2012, 2, 29)).unwrap();
        assert_eq!(r.month, 2);
        assert!(r.is_last_day_of_month);
        assert!(!r.is_last_day_of_quarter);
        assert!(!time_attributes(d(2012, 2, 28)).unwrap().is_last_day_of_month);
    }

    #[test]
    fn mid_year() {
        let r = time_attributes(d(2009, 7, 1)).unwrap();
        assert_eq!((r.quarter, r.semester), (3, 2));
        assert!(!(r.is_last_day_of_week
            || r.is_last_day_of_month
            || r.is_last_day_of_quarter
            || r.is_last_day_of_semester
            || r.is_last_day_of_year));
        assert!(time_attributes(d(2009, 6, 30)).unwrap().is_last_day_of_semester);
    }

    #[test]
    fn iso_week_crossing_year() {
        let r = time_attributes(d(2016, 1, 3)).unwrap();
        assert_eq!((r.iso_week_year, r.iso_week_no), (2015, 53));
        assert!(r.is_last_day_of_week);
        assert!(r.is_last_day_of(TimeGrain::IsoYear));
        assert_eq!(r.label(TimeGrain::Week), "2015-W53");
        assert_eq!(r.label(TimeGrain::Year), "2016");
        assert_eq!(r.label(TimeGrain::IsoYear), "2015");
    }

    #[test]
    fn rejects_unsupported_dates() {
        assert!(time_attributes(d(1899, 12, 31)).is_err());
        assert!(time_attributes(d(2200, 1, 1)).is_err());
        assert!(build_time_table(2016, 2009).is_err());
        assert!(build_time_table(2199, 2200).is_err());
    }

    #[test]
    fn table_sizes() {
        assert_eq!(build_time_table(2009, 2016).unwrap().len(), 2922);
        assert_eq!(build_time_table(2017, 2017).unwrap().len(), 365);
        assert_eq!(build_time_table(2012, 2012).unwrap().len(), 366);
    }

    #[test]
    fn extension() {
        let t = build_time_table(2009, 2016).unwrap();
        assert_eq!(extend_time_table(&t, 2017).unwrap().len(), 2922 + 365);
        assert_eq!(extend_time_table(&t, 2016).unwrap(), t);
        assert_eq!(extend_time_table(&t, 2010).unwrap(), t);
        let t15 = build_time_table(2015, 2015).unwrap();
        assert_eq!(extend_time_table(&t15, 2016).unwrap().len(), 365 + 366);
    }

    #[test]
    fn per_year_flag_counts() {
        let t = build_time_table(2009, 2016).unwrap();
        for year in 2009..=2016 {
            let rs: Vec<_> = t.records().iter().filter(|r| r.year == year).collect();
            let count = |f: fn(&TimeRecord) -> bool| rs.iter().filter(|r| f(r)).count();
            assert_eq!(count(|r| r.is_last_day_of_month), 12);
            assert_eq!(count(|r| r.is_last_day_of_quarter), 4);
            assert_eq!(count(|r| r.is_last_day_of_semester), 2);
            assert_eq!(count(|r| r.is_last_day_of_year), 1);
        }
    }

    #[test]
    fn flags_match_next_day() {
        let t = build_time_table(2009, 2016).unwrap();
        for w in t.records().windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert_eq!(a.is_last_day_of_week, a.iso_week_no != b.iso_week_no);
            assert_eq!(a.is_last_day_of_month, a.month != b.month);
            assert_eq!(a.is_last_day_of_quarter, a.quarter != b.quarter);
            assert_eq!(a.is_last_day_of_semester, a.semester != b.semester);
            assert_eq!(a.is_last_day_of_year, a.year != b.year);
            assert_eq!(a.is_last_day_of(TimeGrain::IsoYear), a.iso_week_year != b.iso_week_year);
            for g in TimeGrain::ALL {
                assert_eq!(a.is_last_day_of(g), a.label(g) != b.label(g), "{g} at {}", a.date);
            }
        }
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let t = build_time_table(2015, 2016).unwrap();
        let text = t.to_csv_string();
        assert!(text.starts_with("date,iso_week_year,iso_week_no,month,quarter,semester,year,eow,eom,eoq,eos,eoy\n"));
        assert!(text.contains("\n2016-12-31,2016,52,12,4,2,2016,0,1,1,1,1\n"));
        assert_eq!(TimeTable::read_csv(text.as_bytes()).unwrap(), t);

        let gap = text.replacen("2015-01-02,2015,1,1,1,1,2015,0,0,0,0,0\n", "", 1);
        assert!(matches!(
            TimeTable::read_csv(gap.as_bytes()),
            Err(TimeError::NotContiguous { line: 3, .. })
        ));
        let wrong = text.replacen("2015-01-31,2015,5,1,1,1,2015,0,1", "2015-01-31,2015,5,1,1,1,2015,0,0", 1);
        assert!(matches!(
            TimeTable::read_csv(wrong.as_bytes()),
            Err(TimeError::Inconsistent { .. })
        ));
    }

    proptest! {
        #[test]
        fn build_then_extend_equals_build(a in 1990i32..2030, b_off in 0i32..5, c_off in 0i32..5) {
            let b = a + b_off;
            let c = b + c_off;
            let direct = build_time_table(a, c).unwrap();
            let extended = extend_time_table(&build_time_table(a, b).unwrap(), c).unwrap();
            prop_assert_eq!(direct, extended);
        }

        #[test]
        fn quarter_and_semester_rules(offset in 0u64..(300 * 366)) {
            let date = d(1900, 1, 1) + chrono::Days::new(offset);
            prop_assume!(date.year() <= MAX_YEAR);
            let r = time_attributes(date).unwrap();
            prop_assert_eq!(r.quarter, r.month.div_ceil(3));
            prop_assert_eq!(r.semester == 1, r.month <= 6);
        }
    }
}
