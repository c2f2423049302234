//! Canonical CSV ingestion of per-house half-hourly load and PV series, and
//! slicing into per-day instances.
//!
//! The canonical file is long-form, one row per house and interval:
//!
//! ```text
//! house_id,date,interval,load_kwh,pv_kwh
//! 2,2010-07-01,1,0.520,0.000
//! ```
//!
//! Energies are stored as integer watt-hours. Inputs are limited to three
//! decimal places of kWh so the conversion is exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use chrono::NaiveDate;
use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub const DEFAULT_STEPS_PER_DAY: usize = 48;
pub const DEFAULT_STEP_MINUTES: u32 = 30;
pub const CANONICAL_HEADER: [&str; 5] = ["house_id", "date", "interval", "load_kwh", "pv_kwh"];

/// N·T·max-entry must stay below this so every in-scope sum fits comfortably
/// in 64-bit arithmetic.
pub const OVERFLOW_BOUND: i128 = 1 << 40;

/// Non-negative energy per interval, in watt-hours.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EnergyWh(pub i64);

impl EnergyWh {
    /// Parses a kWh decimal with at most three fractional digits.
    pub fn parse_kwh(text: &str) -> Result<Self, KwhParseError> {
        let s = text.trim();
        if s.starts_with('-') {
            return Err(KwhParseError::Negative);
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(KwhParseError::Malformed);
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(KwhParseError::Malformed);
        }
        if frac_part.len() > 3 {
            return Err(KwhParseError::Precision);
        }
        let whole: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| KwhParseError::Malformed)?
        };
        let mut frac: i64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| KwhParseError::Malformed)?
        };
        for _ in frac_part.len()..3 {
            frac *= 10;
        }
        whole
            .checked_mul(1000)
            .and_then(|w| w.checked_add(frac))
            .map(EnergyWh)
            .ok_or(KwhParseError::Malformed)
    }

    /// Formats as kWh with exactly three decimals.
    pub fn to_kwh_string(self) -> String {
        format!("{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KwhParseError {
    Malformed,
    Negative,
    Precision,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header: expected `{}`, found `{found}`", CANONICAL_HEADER.join(","))]
    Header { found: String },
    #[error("row {row}: malformed ({reason})")]
    Malformed { row: u64, reason: String },
    #[error("row {row}: duplicate entry for house {house}, date {date}, interval {interval}")]
    Duplicate {
        row: u64,
        house: String,
        date: NaiveDate,
        interval: usize,
    },
    #[error("row {row}: interval {interval} outside 1..={steps}")]
    IntervalRange {
        row: u64,
        interval: usize,
        steps: usize,
    },
    #[error("row {row}: {field} `{value}` has more than 3 decimals, precision would be lost")]
    Precision {
        row: u64,
        field: &'static str,
        value: String,
    },
    #[error("row {row}: {field} `{value}` is negative")]
    Negative {
        row: u64,
        field: &'static str,
        value: String,
    },
    #[error("invalid selection: {0}")]
    Selection(String),
}

/// One house's load and generation for one day.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseDayRecord {
    pub house_id: String,
    pub date: NaiveDate,
    pub load: Vec<EnergyWh>,
    pub gen: Vec<EnergyWh>,
}

/// A (house, date) pair that did not have all intervals present.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncompleteRecord {
    pub house_id: String,
    pub date: NaiveDate,
    pub intervals_present: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub steps_per_day: usize,
    pub records: BTreeMap<(String, NaiveDate), HouseDayRecord>,
    /// Records dropped for missing intervals.
    pub incomplete: Vec<IncompleteRecord>,
}

impl Dataset {
    pub fn empty(steps_per_day: usize) -> Self {
        Self {
            steps_per_day,
            records: BTreeMap::new(),
            incomplete: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Earliest and latest date present.
    pub fn span(&self) -> Option<(NaiveDate, NaiveDate)> {
        let mut dates = self.records.keys().map(|(_, d)| *d);
        let first = dates.next()?;
        Some(dates.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d))))
    }

    pub fn house_ids(&self) -> BTreeSet<&str> {
        self.records.keys().map(|(h, _)| h.as_str()).collect()
    }

    pub fn get(&self, house: &str, date: NaiveDate) -> Option<&HouseDayRecord> {
        self.records.get(&(house.to_string(), date))
    }
}

fn row_error(row: u64, field: &'static str, value: &str, e: KwhParseError) -> IngestError {
    match e {
        KwhParseError::Negative => IngestError::Negative {
            row,
            field,
            value: value.to_string(),
        },
        KwhParseError::Precision => IngestError::Precision {
            row,
            field,
            value: value.to_string(),
        },
        KwhParseError::Malformed => IngestError::Malformed {
            row,
            reason: format!("{field} `{value}` is not a decimal number"),
        },
    }
}

type PartialDay = (Vec<Option<EnergyWh>>, Vec<Option<EnergyWh>>);

/// Parses the canonical long-form CSV. Row numbers in errors are 1-based file
/// lines (the header is line 1).
pub fn parse_canonical_csv<R: Read>(
    stream: R,
    steps_per_day: usize,
) -> Result<Dataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(stream);

    let header = rdr.headers().map_err(|e| IngestError::Malformed {
        row: 1,
        reason: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != CANONICAL_HEADER {
        return Err(IngestError::Header {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut partial: BTreeMap<(String, NaiveDate), PartialDay> = BTreeMap::new();
    for result in rdr.records() {
        let record = result.map_err(|e| IngestError::Malformed {
            row: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() != CANONICAL_HEADER.len() {
            return Err(IngestError::Malformed {
                row,
                reason: format!("expected 5 fields, found {}", record.len()),
            });
        }
        let house = record[0].to_string();
        if house.is_empty() {
            return Err(IngestError::Malformed {
                row,
                reason: "empty house_id".into(),
            });
        }
        let date = NaiveDate::parse_from_str(&record[1], "%Y-%m-%d").map_err(|_| {
            IngestError::Malformed {
                row,
                reason: format!("date `{}` is not YYYY-MM-DD", &record[1]),
            }
        })?;
        let interval: usize = record[2].parse().map_err(|_| IngestError::Malformed {
            row,
            reason: format!("interval `{}` is not an integer", &record[2]),
        })?;
        if interval == 0 || interval > steps_per_day {
            return Err(IngestError::IntervalRange {
                row,
                interval,
                steps: steps_per_day,
            });
        }
        let load = EnergyWh::parse_kwh(&record[3])
            .map_err(|e| row_error(row, "load_kwh", &record[3], e))?;
        let gen =
            EnergyWh::parse_kwh(&record[4]).map_err(|e| row_error(row, "pv_kwh", &record[4], e))?;

        let slot = partial
            .entry((house.clone(), date))
            .or_insert_with(|| (vec![None; steps_per_day], vec![None; steps_per_day]));
        let k = interval - 1;
        if slot.0[k].is_some() {
            return Err(IngestError::Duplicate {
                row,
                house,
                date,
                interval,
            });
        }
        slot.0[k] = Some(load);
        slot.1[k] = Some(gen);
    }

    let mut ds = Dataset::empty(steps_per_day);
    for ((house, date), (load, gen)) in partial {
        let present = load.iter().filter(|x| x.is_some()).count();
        if present < steps_per_day {
            debug!("dropping incomplete record {house} {date}: {present}/{steps_per_day}");
            ds.incomplete.push(IncompleteRecord {
                house_id: house,
                date,
                intervals_present: present,
            });
            continue;
        }
        let record = HouseDayRecord {
            house_id: house.clone(),
            date,
            load: load.into_iter().flatten().collect(),
            gen: gen.into_iter().flatten().collect(),
        };
        ds.records.insert((house, date), record);
    }
    Ok(ds)
}

/// Writes the dataset in canonical form, ordered by house, date, interval.
pub fn write_canonical_csv<W: Write>(ds: &Dataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", CANONICAL_HEADER.join(","))?;
    for rec in ds.records.values() {
        for (k, (l, g)) in rec.load.iter().zip(&rec.gen).enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                rec.house_id,
                rec.date.format("%Y-%m-%d"),
                k + 1,
                l.to_kwh_string(),
                g.to_kwh_string()
            )?;
        }
    }
    Ok(())
}

/// One day's load and generation matrices for a fixed, sorted set of houses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayInstance {
    pub date: NaiveDate,
    pub house_ids: Vec<String>,
    pub load: Matrix<i64>,
    pub gen: Matrix<i64>,
    pub step_minutes: u32,
}

impl DayInstance {
    /// Builds an instance, reordering rows so house ids are sorted.
    pub fn new(
        date: NaiveDate,
        house_ids: Vec<String>,
        load: Vec<Vec<i64>>,
        gen: Vec<Vec<i64>>,
    ) -> Option<Self> {
        if house_ids.len() != load.len() || house_ids.len() != gen.len() {
            return None;
        }
        let mut rows: Vec<(String, Vec<i64>, Vec<i64>)> = house_ids
            .into_iter()
            .zip(load)
            .zip(gen)
            .map(|((h, l), g)| (h, l, g))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let house_ids = rows.iter().map(|r| r.0.clone()).collect();
        let load = Matrix::from_rows(rows.iter().map(|r| r.1.clone()).collect())?;
        let gen = Matrix::from_rows(rows.into_iter().map(|r| r.2).collect())?;
        if !load.same_shape(&gen) {
            return None;
        }
        Some(Self {
            date,
            house_ids,
            load,
            gen,
            step_minutes: DEFAULT_STEP_MINUTES,
        })
    }

    /// Synthetic instance with ids `h01`, `h02`, ... on 2000-01-01.
    pub fn synthetic(load: Vec<Vec<i64>>, gen: Vec<Vec<i64>>) -> Self {
        let ids = (1..=load.len()).map(|i| format!("h{i:02}")).collect();
        let date = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        Self::new(date, ids, load, gen).expect("rectangular synthetic instance")
    }

    pub fn num_houses(&self) -> usize {
        self.load.rows()
    }

    pub fn num_steps(&self) -> usize {
        self.load.cols()
    }

    /// The single-house restriction used by self-consumption.
    pub fn house(&self, i: usize) -> DayInstance {
        DayInstance {
            date: self.date,
            house_ids: vec![self.house_ids[i].clone()],
            load: self.load.select_row(i),
            gen: self.gen.select_row(i),
            step_minutes: self.step_minutes,
        }
    }
}

/// Days for which every requested house has a complete record, plus the dates
/// that had to be skipped.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CohortSelection {
    pub days: Vec<DayInstance>,
    pub skipped: Vec<NaiveDate>,
}

pub fn select_cohort(
    ds: &Dataset,
    ids: &[String],
    start: NaiveDate,
    end: NaiveDate,
) -> Result<CohortSelection, IngestError> {
    if ids.is_empty() {
        return Err(IngestError::Selection("no house ids given".into()));
    }
    let mut sorted: Vec<String> = ids.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(IngestError::Selection("house ids must be distinct".into()));
    }
    if start > end {
        return Err(IngestError::Selection(format!("start {start} after end {end}")));
    }

    let mut out = CohortSelection::default();
    let mut date = start;
    loop {
        let recs: Option<Vec<&HouseDayRecord>> =
            sorted.iter().map(|h| ds.get(h, date)).collect();
        match recs {
            Some(recs) => {
                let load = recs
                    .iter()
                    .map(|r| r.load.iter().map(|e| e.0).collect())
                    .collect();
                let gen = recs
                    .iter()
                    .map(|r| r.gen.iter().map(|e| e.0).collect())
                    .collect();
                let day = DayInstance::new(date, sorted.clone(), load, gen)
                    .expect("records share the dataset's step count");
                out.days.push(day);
            }
            None => out.skipped.push(date),
        }
        if date == end {
            break;
        }
        date = date.succ_opt().expect("date within chrono range");
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DayViolation {
    ZeroHouses,
    ZeroSteps,
    ShapeMismatch,
    DuplicateHouse(String),
    NegativeEntry { house: usize, step: usize },
    OverflowBound,
}

impl fmt::Display for DayViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DayViolation::ZeroHouses => write!(f, "zero houses"),
            DayViolation::ZeroSteps => write!(f, "zero time steps"),
            DayViolation::ShapeMismatch => write!(f, "load and generation shapes differ"),
            DayViolation::DuplicateHouse(h) => write!(f, "duplicate house {h}"),
            DayViolation::NegativeEntry { house, step } => {
                write!(f, "negative entry, house {}, step {}", house + 1, step + 1)
            }
            DayViolation::OverflowBound => write!(f, "overflow bound"),
        }
    }
}

/// Lists everything that would make the day unsolvable. Empty means fine.
pub fn validate_day(d: &DayInstance) -> Vec<DayViolation> {
    let mut out = Vec::new();
    if d.num_houses() == 0 {
        out.push(DayViolation::ZeroHouses);
    }
    if d.num_steps() == 0 {
        out.push(DayViolation::ZeroSteps);
    }
    if !d.load.same_shape(&d.gen) || d.house_ids.len() != d.load.rows() {
        out.push(DayViolation::ShapeMismatch);
        return out;
    }
    let mut seen = BTreeSet::new();
    for h in &d.house_ids {
        if !seen.insert(h) {
            out.push(DayViolation::DuplicateHouse(h.clone()));
        }
    }
    let mut max_entry: i64 = 0;
    for m in [&d.load, &d.gen] {
        for i in 0..m.rows() {
            for (t, &x) in m.row(i).iter().enumerate() {
                if x < 0 {
                    out.push(DayViolation::NegativeEntry { house: i, step: t });
                }
                max_entry = max_entry.max(x);
            }
        }
    }
    let n = d.num_houses().max(1) as i128;
    let t = d.num_steps().max(1) as i128;
    if n * t * max_entry as i128 >= OVERFLOW_BOUND {
        out.push(DayViolation::OverflowBound);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn one_day_csv(house: &str, day: &str, first: &str) -> String {
        let mut s = String::from("house_id,date,interval,load_kwh,pv_kwh\n");
        s.push_str(&format!("{house},{day},1,{first},0.000\n"));
        for k in 2..=48 {
            s.push_str(&format!("{house},{day},{k},0,0\n"));
        }
        s
    }

    #[test]
    fn single_record_converts_to_wh() {
        let ds = parse_canonical_csv(one_day_csv("h1", "2010-07-01", "0.520").as_bytes(), 48)
            .unwrap();
        assert_eq!(ds.len(), 1);
        let rec = ds.get("h1", date("2010-07-01")).unwrap();
        assert_eq!(rec.load[0], EnergyWh(520));
        assert!(rec.gen.iter().all(|g| g.0 == 0));
    }

    #[test]
    fn header_only_is_empty() {
        let ds = parse_canonical_csv("house_id,date,interval,load_kwh,pv_kwh\n".as_bytes(), 48)
            .unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.span(), None);
    }

    #[test]
    fn four_decimals_is_precision_error() {
        let err = parse_canonical_csv(one_day_csv("h1", "2010-07-01", "0.5204").as_bytes(), 48)
            .unwrap_err();
        match err {
            IngestError::Precision { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn error_paths() {
        let hdr = "house_id,date,interval,load_kwh,pv_kwh\n";
        let dup = format!("{hdr}a,2010-07-01,1,1,1\na,2010-07-01,1,1,1\n");
        assert!(matches!(
            parse_canonical_csv(dup.as_bytes(), 48),
            Err(IngestError::Duplicate { row: 3, .. })
        ));
        let range = format!("{hdr}a,2010-07-01,49,1,1\n");
        assert!(matches!(
            parse_canonical_csv(range.as_bytes(), 48),
            Err(IngestError::IntervalRange { interval: 49, .. })
        ));
        let neg = format!("{hdr}a,2010-07-01,1,-0.1,1\n");
        assert!(matches!(
            parse_canonical_csv(neg.as_bytes(), 48),
            Err(IngestError::Negative { field: "load_kwh", .. })
        ));
        let bad = format!("{hdr}a,2010-07-01,1,1e3,1\n");
        assert!(matches!(
            parse_canonical_csv(bad.as_bytes(), 48),
            Err(IngestError::Malformed { row: 2, .. })
        ));
        let short = format!("{hdr}a,2010-07-01,1\n");
        assert!(matches!(
            parse_canonical_csv(short.as_bytes(), 48),
            Err(IngestError::Malformed { row: 2, .. })
        ));
        let baddate = format!("{hdr}a,01/07/2010,1,1,1\n");
        assert!(parse_canonical_csv(baddate.as_bytes(), 48).is_err());
        assert!(matches!(
            parse_canonical_csv("a,b,c\n".as_bytes(), 48),
            Err(IngestError::Header { .. })
        ));
    }

    #[test]
    fn crlf_and_incomplete_records() {
        let s = "house_id,date,interval,load_kwh,pv_kwh\r\na,2010-07-01,1,1.5,.25\r\na,2010-07-01,2,2,0\r\nb,2010-07-01,1,1,1\r\n";
        let ds = parse_canonical_csv(s.as_bytes(), 2).unwrap();
        assert_eq!(ds.len(), 1);
        let rec = ds.get("a", date("2010-07-01")).unwrap();
        assert_eq!(rec.load, vec![EnergyWh(1500), EnergyWh(2000)]);
        assert_eq!(rec.gen[0], EnergyWh(250));
        assert_eq!(ds.incomplete.len(), 1);
        assert_eq!(ds.incomplete[0].house_id, "b");
    }

    #[test]
    fn kwh_parse_forms() {
        assert_eq!(EnergyWh::parse_kwh("12"), Ok(EnergyWh(12000)));
        assert_eq!(EnergyWh::parse_kwh("0.5"), Ok(EnergyWh(500)));
        assert_eq!(EnergyWh::parse_kwh("3."), Ok(EnergyWh(3000)));
        assert_eq!(EnergyWh::parse_kwh("."), Err(KwhParseError::Malformed));
        assert_eq!(EnergyWh::parse_kwh("1,5"), Err(KwhParseError::Malformed));
        assert_eq!(EnergyWh(1234).to_kwh_string(), "1.234");
        assert_eq!(EnergyWh(5).to_kwh_string(), "0.005");
    }

    fn two_house_dataset() -> Dataset {
        let mut s = String::from("house_id,date,interval,load_kwh,pv_kwh\n");
        for (h, days) in [("z9", 2), ("a1", 3)] {
            for d in 1..=days {
                for k in 1..=2 {
                    s.push_str(&format!("{h},2010-07-0{d},{k},{d}.{k},0.1\n"));
                }
            }
        }
        parse_canonical_csv(s.as_bytes(), 2).unwrap()
    }

    #[test]
    fn cohort_sorted_and_skips_missing_dates() {
        let ds = two_house_dataset();
        let ids = vec!["z9".to_string(), "a1".to_string()];
        let sel = select_cohort(&ds, &ids, date("2010-07-01"), date("2010-07-03")).unwrap();
        assert_eq!(sel.days.len(), 2);
        assert_eq!(sel.skipped, vec![date("2010-07-03")]);
        assert_eq!(sel.days[0].house_ids, vec!["a1", "z9"]);
        assert_eq!(sel.days[0].load.row(0), &[1100, 1200]);
        assert!(sel.days[0].date < sel.days[1].date);
    }

    #[test]
    fn cohort_singleton_and_absent() {
        let ds = two_house_dataset();
        let one = select_cohort(&ds, &["a1".into()], date("2010-07-02"), date("2010-07-02"))
            .unwrap();
        assert_eq!(one.days.len(), 1);
        assert_eq!(one.days[0].num_houses(), 1);
        let none = select_cohort(&ds, &["q".into()], date("2010-07-01"), date("2010-07-03"))
            .unwrap();
        assert!(none.days.is_empty());
        assert_eq!(none.skipped.len(), 3);
        assert!(select_cohort(&ds, &[], date("2010-07-01"), date("2010-07-01")).is_err());
        assert!(
            select_cohort(&ds, &["a1".into()], date("2010-07-02"), date("2010-07-01")).is_err()
        );
    }

    #[test]
    fn validate_day_reports() {
        let ok = DayInstance::synthetic(vec![vec![1; 48]; 10], vec![vec![1; 48]; 10]);
        assert!(validate_day(&ok).is_empty());

        let mut empty_t = DayInstance::synthetic(vec![vec![]], vec![vec![]]);
        empty_t.step_minutes = 30;
        assert_eq!(validate_day(&empty_t), vec![DayViolation::ZeroSteps]);
        assert_eq!(validate_day(&empty_t)[0].to_string(), "zero time steps");

        let big = DayInstance::synthetic(vec![vec![1 << 41]], vec![vec![0]]);
        let v = validate_day(&big);
        assert_eq!(v, vec![DayViolation::OverflowBound]);
        assert_eq!(v[0].to_string(), "overflow bound");

        let neg = DayInstance::synthetic(vec![vec![-1, 0]], vec![vec![0, 0]]);
        assert_eq!(
            validate_day(&neg),
            vec![DayViolation::NegativeEntry { house: 0, step: 0 }]
        );
    }
}
