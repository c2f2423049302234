//! Reliability indices (% load met, % PV utilization, houses supplied) and
//! their daily/monthly/whole-run aggregation.
//!
//! All sums are kept as exact integers; fractions only appear at the edges,
//! and the CSV writers format percentages from the exact ratios.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::DayInstance;
use crate::matrix::Matrix;
use crate::model::{objective_coefficients, ModelError, StrategyKind, StrategySpec, SwitchMatrix};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("dimension mismatch: switch matrix is {0}x{1}, load is {2}x{3}")]
pub struct DimensionMismatch(pub usize, pub usize, pub usize, pub usize);

impl From<DimensionMismatch> for ModelError {
    fn from(e: DimensionMismatch) -> Self {
        ModelError::Dimension(e.to_string())
    }
}

/// `Y = U ∘ L`.
pub fn supplied_load(u: &SwitchMatrix, load: &Matrix<i64>) -> Result<Matrix<i64>, DimensionMismatch> {
    if u.houses() != load.rows() || u.steps() != load.cols() {
        return Err(DimensionMismatch(u.houses(), u.steps(), load.rows(), load.cols()));
    }
    let mut y = Matrix::zeros(load.rows(), load.cols());
    for i in 0..load.rows() {
        for t in 0..load.cols() {
            y.set(i, t, u.get(i, t) as i64 * load.get(i, t));
        }
    }
    Ok(y)
}

fn ratio(num: i64, den: i64, if_empty: f64) -> f64 {
    if den == 0 {
        if_empty
    } else {
        num as f64 / den as f64
    }
}

/// Per-house `Σ_t y / Σ_t l`; a house with no load counts as fully met.
pub fn load_met_fraction(y: &Matrix<i64>, load: &Matrix<i64>) -> Vec<f64> {
    (0..load.rows())
        .map(|i| {
            let l = load.row_sum(i);
            if l == 0 {
                log::debug!("house {} has zero load; load met taken as 1", i + 1);
            }
            ratio(y.row_sum(i), l, 1.0)
        })
        .collect()
}

/// `Σ y / Σ g`, or 0 when there is no generation.
pub fn pv_utilization(y: &Matrix<i64>, gen: &Matrix<i64>) -> f64 {
    let g = gen.total();
    if g == 0 {
        log::debug!("zero generation; utilization taken as 0");
    }
    ratio(y.total(), g, 0.0)
}

/// Total generation over total load, the ratio behind the printed
/// utilization formula. 0 when there is no load.
pub fn generation_to_load_ratio(gen: &Matrix<i64>, load: &Matrix<i64>) -> f64 {
    ratio(gen.total(), load.total(), 0.0)
}

/// The strategy's objective at `u`, from the switching matrix directly.
/// Self-consumption is scored as supplied energy.
pub fn strategy_objective(u: &SwitchMatrix, d: &DayInstance, s: &StrategySpec) -> Result<i128, ModelError> {
    let coef = objective_coefficients(d, s)?;
    if u.houses() != coef.rows() || u.steps() != coef.cols() {
        return Err(DimensionMismatch(u.houses(), u.steps(), coef.rows(), coef.cols()).into());
    }
    let mut total = 0i128;
    for i in 0..coef.rows() {
        for t in 0..coef.cols() {
            total += u.get(i, t) as i128 * *coef.get(i, t) as i128;
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DayStatus {
    Solved,
    Infeasible,
    LimitExceeded,
}

impl DayStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DayStatus::Solved => "Solved",
            DayStatus::Infeasible => "Infeasible",
            DayStatus::LimitExceeded => "LimitExceeded",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayResult {
    pub date: NaiveDate,
    pub strategy: StrategyKind,
    pub house_ids: Vec<String>,
    pub supplied_wh: Vec<i64>,
    pub load_wh: Vec<i64>,
    pub gen_wh: Vec<i64>,
    pub total_gen_wh: i64,
    pub houses_supplied: usize,
    pub status: DayStatus,
}

impl DayResult {
    pub fn solved(d: &DayInstance, strategy: StrategyKind, u: &SwitchMatrix) -> Result<Self, DimensionMismatch> {
        let y = supplied_load(u, &d.load)?;
        let n = d.num_houses();
        Ok(Self {
            date: d.date,
            strategy,
            house_ids: d.house_ids.clone(),
            supplied_wh: (0..n).map(|i| y.row_sum(i)).collect(),
            load_wh: (0..n).map(|i| d.load.row_sum(i)).collect(),
            gen_wh: (0..n).map(|i| d.gen.row_sum(i)).collect(),
            total_gen_wh: d.gen.total(),
            houses_supplied: (0..n).filter(|&i| u.row(i).contains(&1)).count(),
            status: DayStatus::Solved,
        })
    }

    /// A day without a schedule: nothing supplied, no house counted.
    pub fn unsolved(d: &DayInstance, strategy: StrategyKind, status: DayStatus) -> Self {
        let n = d.num_houses();
        Self {
            date: d.date,
            strategy,
            house_ids: d.house_ids.clone(),
            supplied_wh: vec![0; n],
            load_wh: (0..n).map(|i| d.load.row_sum(i)).collect(),
            gen_wh: (0..n).map(|i| d.gen.row_sum(i)).collect(),
            total_gen_wh: d.gen.total(),
            houses_supplied: 0,
            status,
        }
    }

    pub fn is_solved(&self) -> bool {
        self.status == DayStatus::Solved
    }

    pub fn total_supplied(&self) -> i64 {
        self.supplied_wh.iter().sum()
    }

    pub fn total_load(&self) -> i64 {
        self.load_wh.iter().sum()
    }
}

/// `(k, days with houses_supplied ≥ k)` for k = N down to 0.
pub fn houses_supplied_histogram(results: &[DayResult]) -> Vec<(usize, usize)> {
    let n = results.iter().map(|r| r.house_ids.len()).max().unwrap_or(0);
    (0..=n)
        .rev()
        .map(|k| {
            let days = results
                .iter()
                .filter(|r| r.is_solved() && r.houses_supplied >= k || k == 0)
                .count();
            (k, days)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Granularity {
    Daily,
    Monthly,
    /// One period covering every date in the results.
    Annual,
}

/// Exact sums over the solved days of one period and strategy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSummary {
    pub label: String,
    pub strategy: StrategyKind,
    pub house_ids: Vec<String>,
    pub days_counted: usize,
    pub unsolved_days: Vec<NaiveDate>,
    pub supplied_wh: Vec<i64>,
    pub load_wh: Vec<i64>,
    pub gen_wh: i64,
    pub houses_supplied_sum: usize,
}

impl PeriodSummary {
    pub fn house_load_met_pct(&self) -> Vec<f64> {
        self.supplied_wh
            .iter()
            .zip(&self.load_wh)
            .map(|(&y, &l)| 100.0 * ratio(y, l, 1.0))
            .collect()
    }

    pub fn cohort_supplied(&self) -> i64 {
        self.supplied_wh.iter().sum()
    }

    pub fn cohort_load(&self) -> i64 {
        self.load_wh.iter().sum()
    }

    pub fn cohort_load_met_pct(&self) -> f64 {
        100.0 * ratio(self.cohort_supplied(), self.cohort_load(), 1.0)
    }

    pub fn pv_utilization_pct(&self) -> f64 {
        100.0 * ratio(self.cohort_supplied(), self.gen_wh, 0.0)
    }

    pub fn mean_houses_supplied(&self) -> f64 {
        if self.days_counted == 0 {
            0.0
        } else {
            self.houses_supplied_sum as f64 / self.days_counted as f64
        }
    }
}

fn period_label(date: NaiveDate, g: Granularity, span: (NaiveDate, NaiveDate)) -> String {
    match g {
        Granularity::Daily => date.to_string(),
        Granularity::Monthly => format!("{:04}-{:02}", date.year(), date.month()),
        Granularity::Annual => format!("{}..{}", span.0, span.1),
    }
}

/// Summaries ordered by (period, strategy).
pub fn aggregate(results: &[DayResult], g: Granularity) -> Vec<PeriodSummary> {
    let (Some(lo), Some(hi)) = (
        results.iter().map(|r| r.date).min(),
        results.iter().map(|r| r.date).max(),
    ) else {
        return Vec::new();
    };
    let mut groups: BTreeMap<(String, StrategyKind), PeriodSummary> = BTreeMap::new();
    for r in results {
        let label = period_label(r.date, g, (lo, hi));
        let n = r.house_ids.len();
        let s = groups
            .entry((label.clone(), r.strategy))
            .or_insert_with(|| PeriodSummary {
                label,
                strategy: r.strategy,
                house_ids: r.house_ids.clone(),
                days_counted: 0,
                unsolved_days: Vec::new(),
                supplied_wh: vec![0; n],
                load_wh: vec![0; n],
                gen_wh: 0,
                houses_supplied_sum: 0,
            });
        if !r.is_solved() {
            s.unsolved_days.push(r.date);
            continue;
        }
        s.days_counted += 1;
        for i in 0..n.min(s.supplied_wh.len()) {
            s.supplied_wh[i] += r.supplied_wh[i];
            s.load_wh[i] += r.load_wh[i];
        }
        s.gen_wh += r.total_gen_wh;
        s.houses_supplied_sum += r.houses_supplied;
    }
    groups.into_values().collect()
}

/// `100·num/den` with two decimals, rounded half to even.
pub fn format_pct(num: i64, den: i64) -> String {
    format_decimal2(100 * num as i128, den as i128)
}

/// `num/den` with two decimals, rounded half to even. `den > 0`.
pub fn format_decimal2(num: i128, den: i128) -> String {
    let hundredths = crate::model::round_half_even(num * 100, den);
    let sign = if hundredths < 0 { "-" } else { "" };
    let h = hundredths.abs();
    format!("{sign}{}.{:02}", h / 100, h % 100)
}

fn pct_or(num: i64, den: i64, if_empty: &str) -> String {
    if den == 0 {
        if_empty.to_string()
    } else {
        format_pct(num, den)
    }
}

fn house_columns(prefix: &str, ids: &[String]) -> Vec<String> {
    ids.iter().map(|h| format!("{prefix}{h}")).collect()
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .flexible(true)
        .from_writer(out)
}

/// One row per day and strategy; percentage fields are empty on unsolved days.
pub fn write_metrics_daily<W: Write>(results: &[DayResult], out: W) -> csv::Result<()> {
    let mut w = csv_writer(out);
    let ids = results.first().map(|r| r.house_ids.clone()).unwrap_or_default();
    let mut header = vec!["date".to_string(), "strategy".to_string()];
    header.extend(house_columns("load_met_pct_", &ids));
    header.extend(
        [
            "cohort_load_met_pct",
            "pv_utilization_pct",
            "gen_to_load_pct",
            "houses_supplied",
            "status",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in results {
        let mut row = vec![r.date.to_string(), r.strategy.to_string()];
        let solved = r.is_solved();
        let cell = |s: String| if solved { s } else { String::new() };
        for (&y, &l) in r.supplied_wh.iter().zip(&r.load_wh) {
            row.push(cell(pct_or(y, l, "100.00")));
        }
        row.push(cell(pct_or(r.total_supplied(), r.total_load(), "100.00")));
        row.push(cell(pct_or(r.total_supplied(), r.total_gen_wh, "0.00")));
        row.push(pct_or(r.total_gen_wh, r.total_load(), "0.00"));
        row.push(r.houses_supplied.to_string());
        row.push(r.status.as_str().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_period<W: Write>(summaries: &[PeriodSummary], out: W) -> csv::Result<()> {
    let mut w = csv_writer(out);
    let ids = summaries.first().map(|s| s.house_ids.clone()).unwrap_or_default();
    let mut header = vec![
        "period".to_string(),
        "strategy".to_string(),
        "days_solved".to_string(),
        "days_unsolved".to_string(),
    ];
    header.extend(house_columns("load_met_pct_", &ids));
    header.extend(
        [
            "cohort_load_met_pct",
            "pv_utilization_pct",
            "gen_to_load_pct",
            "mean_houses_supplied",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for s in summaries {
        let mut row = vec![
            s.label.clone(),
            s.strategy.to_string(),
            s.days_counted.to_string(),
            s.unsolved_days.len().to_string(),
        ];
        for (&y, &l) in s.supplied_wh.iter().zip(&s.load_wh) {
            row.push(pct_or(y, l, "100.00"));
        }
        row.push(pct_or(s.cohort_supplied(), s.cohort_load(), "100.00"));
        row.push(pct_or(s.cohort_supplied(), s.gen_wh, "0.00"));
        row.push(pct_or(s.gen_wh, s.cohort_load(), "0.00"));
        row.push(if s.days_counted == 0 {
            "0.00".to_string()
        } else {
            format_decimal2(s.houses_supplied_sum as i128, s.days_counted as i128)
        });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Histogram rows for every strategy present, in strategy order.
pub fn write_histogram<W: Write>(results: &[DayResult], out: W) -> csv::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["strategy", "houses_supplied_at_least", "days"])?;
    let mut by_kind: BTreeMap<StrategyKind, Vec<DayResult>> = BTreeMap::new();
    for r in results {
        by_kind.entry(r.strategy).or_default().push(r.clone());
    }
    for (kind, rs) in by_kind {
        for (k, days) in houses_supplied_histogram(&rs) {
            w.write_record([kind.to_string(), k.to_string(), days.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
