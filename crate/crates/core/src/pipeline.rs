//! End-to-end runs: ingest, per-day programs, exact solves, post-solve
//! validation, and report files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Datelike, NaiveDate};
use log::{debug, info, warn};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::exec;
use crate::ingest::{parse_canonical_csv, select_cohort, validate_day, DayInstance, IngestError};
use crate::metrics::{
    aggregate, format_decimal2, format_pct, write_histogram, write_metrics_daily,
    write_metrics_period, DayResult, DayStatus, Granularity, PeriodSummary,
};
use crate::model::{
    build_program, check_feasible, self_consumption_programs, ModelError, StrategyKind,
    StrategySpec, SwitchMatrix,
};
use crate::solver::{
    brute_force, solve_with, BinaryProgram, Engine, SolveLimits, SolveResult, SolveStatus,
    SolverError,
};

/// Programs with more u-variables than this are not cross-checked by
/// enumeration.
pub const ORACLE_MAX_U_VARS: usize = 20;

pub const REPORT_FILES: [&str; 7] = [
    "schedule.csv",
    "metrics_daily.csv",
    "metrics_period.csv",
    "histogram.csv",
    "fig4_daily_house_load_met.csv",
    "fig5_monthly.csv",
    "fig6_annual_house_load_met.csv",
];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read data file {path}: {source}")]
    DataIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("data error: {0}")]
    Ingest(#[from] IngestError),
    #[error("data error: {0}")]
    Data(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("internal consistency failure: {0}")]
    Consistency(String),
}

impl PipelineError {
    /// 1 for configuration, data and output problems, 2 when the solver's
    /// answer fails its own checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Consistency(_) => 2,
            _ => 1,
        }
    }
}

fn consistency(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Consistency(e.to_string())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OracleTally {
    pub agreed: usize,
    pub skipped: usize,
}

/// One (day, strategy) task after solving and validation.
#[derive(Clone, Debug, PartialEq)]
pub struct DayOutcome {
    pub result: DayResult,
    pub schedule: Option<SwitchMatrix>,
    pub objective_value: Option<i64>,
    pub nodes_explored: u64,
    pub oracle: OracleTally,
}

/// Solver settings shared by every task of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveSettings {
    pub limits: SolveLimits,
    pub engine: Engine,
    pub oracle_check: bool,
    /// Where oracle disagreements are dumped; nothing is written when `None`.
    pub dump_dir: Option<PathBuf>,
}

fn oracle_compare(
    p: &BinaryProgram,
    got: &SolveResult,
    label: &str,
    settings: &SolveSettings,
    tally: &mut OracleTally,
) -> Result<(), PipelineError> {
    if !settings.oracle_check {
        return Ok(());
    }
    let k = p.u_order().len();
    if k > ORACLE_MAX_U_VARS || got.status == SolveStatus::LimitExceeded {
        debug!("{label}: oracle skipped ({k} u-variables, status {:?})", got.status);
        tally.skipped += 1;
        return Ok(());
    }
    let want = brute_force(p).map_err(consistency)?;
    let agree = want.status == got.status
        && want.objective_value == got.objective_value
        && want.assignment == got.assignment;
    if agree {
        tally.agreed += 1;
        return Ok(());
    }
    let mut msg = format!(
        "{label}: solver and enumeration disagree (solver {:?} {:?}, enumeration {:?} {:?})",
        got.status, got.objective_value, want.status, want.objective_value
    );
    if let Some(dir) = &settings.dump_dir {
        let path = dir.join(format!("oracle_mismatch_{}.txt", label.replace([' ', '/'], "_")));
        let body = format!(
            "{}\nsolver: {got:?}\nenumeration: {want:?}\n",
            p.to_text()
        );
        if std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, body)).is_ok() {
            msg.push_str(&format!("; program dumped to {}", path.display()));
        }
    }
    Err(PipelineError::Consistency(msg))
}

/// Solves one day under one strategy and validates the answer. Self-consumption
/// solves one single-house program per house and stacks the rows.
pub fn solve_day(
    d: &DayInstance,
    spec: &StrategySpec,
    settings: &SolveSettings,
) -> Result<DayOutcome, PipelineError> {
    let label = format!("{} {}", d.date, spec.kind);
    let programs = match spec.kind {
        StrategyKind::SelfConsumption => self_consumption_programs(d, spec),
        _ => build_program(d, spec).map(|p| vec![p]),
    }
    .map_err(|e| match e {
        ModelError::InvalidDay(_) => PipelineError::Data(format!("{label}: {e}")),
        _ => PipelineError::Config(ConfigError::Invalid {
            key: "strategies",
            value: spec.kind.to_string(),
            reason: e.to_string(),
        }),
    })?;
    let houses_per_program = if programs.len() == 1 { d.num_houses() } else { 1 };

    let mut oracle = OracleTally::default();
    let mut nodes = 0u64;
    let mut status = SolveStatus::Optimal;
    let mut objective = 0i64;
    let mut parts = Vec::with_capacity(programs.len());
    for p in &programs {
        let r = solve_with(p, &settings.limits, settings.engine).map_err(|e| match e {
            SolverError::Malformed(_) => consistency(format!("{label}: {e}")),
            _ => PipelineError::Data(format!("{label}: {e}")),
        })?;
        oracle_compare(p, &r, &label, settings, &mut oracle)?;
        nodes += r.nodes_explored;
        match r.status {
            SolveStatus::Optimal => {
                let a = r.assignment.as_deref().ok_or_else(|| {
                    consistency(format!("{label}: optimal result without an assignment"))
                })?;
                let u = SwitchMatrix::from_assignment(houses_per_program, d.num_steps(), a)
                    .ok_or_else(|| consistency(format!("{label}: assignment has wrong length")))?;
                objective += r.objective_value.unwrap_or(0);
                parts.push(u);
            }
            SolveStatus::Infeasible => status = SolveStatus::Infeasible,
            SolveStatus::LimitExceeded if status == SolveStatus::Optimal => {
                status = SolveStatus::LimitExceeded
            }
            SolveStatus::LimitExceeded => {}
        }
    }

    if status != SolveStatus::Optimal {
        let day_status = match status {
            SolveStatus::Infeasible => DayStatus::Infeasible,
            _ => DayStatus::LimitExceeded,
        };
        info!("{label}: {}", day_status.as_str());
        return Ok(DayOutcome {
            result: DayResult::unsolved(d, spec.kind, day_status),
            schedule: None,
            objective_value: None,
            nodes_explored: nodes,
            oracle,
        });
    }

    let u = SwitchMatrix::stack(&parts)
        .ok_or_else(|| consistency(format!("{label}: schedules have mismatched shapes")))?;
    let violations = check_feasible(&u, d, spec);
    if let Some(v) = violations.first() {
        return Err(consistency(format!(
            "{label}: solver schedule violates {v} ({} violations)",
            violations.len()
        )));
    }
    let recomputed = crate::metrics::strategy_objective(&u, d, spec).map_err(consistency)?;
    if recomputed != objective as i128 {
        return Err(consistency(format!(
            "{label}: reported objective {objective} but schedule scores {recomputed}"
        )));
    }
    let result = DayResult::solved(d, spec.kind, &u).map_err(consistency)?;
    Ok(DayOutcome {
        result,
        schedule: Some(u),
        objective_value: Some(objective),
        nodes_explored: nodes,
        oracle,
    })
}

/// Solves every (day, strategy) pair on `jobs` workers. Output is ordered by
/// date, then strategy, whatever order the tasks finish in.
pub fn solve_days(
    days: &[DayInstance],
    specs: &[StrategySpec],
    settings: &SolveSettings,
    jobs: usize,
) -> Result<Vec<DayOutcome>, PipelineError> {
    let mut tasks: Vec<(&DayInstance, &StrategySpec)> = days
        .iter()
        .flat_map(|d| specs.iter().map(move |s| (d, s)))
        .collect();
    tasks.sort_by_key(|(d, s)| (d.date, s.kind));
    exec::map_ordered(&tasks, jobs, |(d, s)| solve_day(d, s, settings))
        .into_iter()
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| PipelineError::Output {
            path: path.to_path_buf(),
            source,
        })
}

fn csv_failure(path: &Path, e: csv::Error) -> PipelineError {
    PipelineError::Output {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn write_csv_file(
    path: &Path,
    f: impl FnOnce(BufWriter<File>) -> csv::Result<()>,
) -> Result<(), PipelineError> {
    f(create(path)?).map_err(|e| csv_failure(path, e))
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// `house_id,date,strategy,step_1..step_T`, one row per house of every
/// solved (day, strategy).
pub fn write_schedules<W: Write>(outcomes: &[DayOutcome], out: W) -> csv::Result<()> {
    let mut w = csv_writer(out);
    let steps = outcomes
        .iter()
        .find_map(|o| o.schedule.as_ref().map(|u| u.steps()))
        .unwrap_or(0);
    let mut header = vec!["house_id".to_string(), "date".into(), "strategy".into()];
    header.extend((1..=steps).map(|t| format!("step_{t}")));
    w.write_record(&header)?;
    for o in outcomes {
        let Some(u) = &o.schedule else { continue };
        for (i, h) in o.result.house_ids.iter().enumerate() {
            let mut row = vec![h.clone(), o.result.date.to_string(), o.result.strategy.to_string()];
            row.extend(u.row(i).iter().map(|b| b.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One schedule read back from `schedule.csv`, rows in file order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredSchedule {
    pub house_ids: Vec<String>,
    pub u: SwitchMatrix,
}

pub fn read_schedules<R: Read>(
    input: R,
) -> Result<BTreeMap<(NaiveDate, StrategyKind), StoredSchedule>, String> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows: BTreeMap<(NaiveDate, StrategyKind), (Vec<String>, Vec<Vec<u8>>)> =
        BTreeMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = n + 2;
        let field = |k: usize| rec.get(k).ok_or(format!("line {line}: too few fields"));
        let date: NaiveDate = field(1)?.parse().map_err(|e| format!("line {line}: {e}"))?;
        let kind: StrategyKind = field(2)?.parse().map_err(|e| format!("line {line}: {e}"))?;
        let bits = rec
            .iter()
            .skip(3)
            .map(|b| match b {
                "0" => Ok(0),
                "1" => Ok(1),
                _ => Err(format!("line {line}: `{b}` is not 0 or 1")),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        let e = rows.entry((date, kind)).or_default();
        e.0.push(field(0)?.to_string());
        e.1.push(bits);
    }
    rows.into_iter()
        .map(|(k, (house_ids, bits))| {
            let u = SwitchMatrix::from_rows(bits).ok_or(format!("{} {}: ragged rows", k.0, k.1))?;
            Ok((k, StoredSchedule { house_ids, u }))
        })
        .collect()
}

fn strategies_in(results: &[DayResult]) -> Vec<StrategyKind> {
    results.iter().map(|r| r.strategy).collect::<BTreeSet<_>>().into_iter().collect()
}

fn pct_cell(num: i64, den: i64, if_empty: &str) -> String {
    if den == 0 {
        if_empty.to_string()
    } else {
        format_pct(num, den)
    }
}

/// Per-house daily % load met, one column per strategy.
pub fn write_fig4<W: Write>(results: &[DayResult], out: W) -> csv::Result<()> {
    let kinds = strategies_in(results);
    let mut w = csv_writer(out);
    let mut header = vec!["date".to_string(), "house_id".into()];
    header.extend(kinds.iter().map(|k| k.to_string()));
    w.write_record(&header)?;
    let mut by_date: BTreeMap<NaiveDate, BTreeMap<StrategyKind, &DayResult>> = BTreeMap::new();
    for r in results {
        by_date.entry(r.date).or_default().insert(r.strategy, r);
    }
    for (date, day) in by_date {
        let Some(first) = day.values().next() else { continue };
        for (i, h) in first.house_ids.iter().enumerate() {
            let mut row = vec![date.to_string(), h.clone()];
            for k in &kinds {
                row.push(match day.get(k) {
                    Some(r) if r.is_solved() => pct_cell(r.supplied_wh[i], r.load_wh[i], "100.00"),
                    _ => String::new(),
                });
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Monthly cohort % load met per strategy, with the month's average daily
/// cohort load and generation.
pub fn write_fig5<W: Write>(results: &[DayResult], out: W) -> csv::Result<()> {
    let kinds = strategies_in(results);
    let monthly = aggregate(results, Granularity::Monthly);
    let mut energy: BTreeMap<String, BTreeMap<NaiveDate, (i64, i64)>> = BTreeMap::new();
    for r in results {
        let month = format!("{:04}-{:02}", r.date.year(), r.date.month());
        energy
            .entry(month)
            .or_default()
            .insert(r.date, (r.total_load(), r.total_gen_wh));
    }
    let mut w = csv_writer(out);
    let mut header = vec!["month".to_string()];
    header.extend(kinds.iter().map(|k| format!("cohort_load_met_pct_{k}")));
    header.extend(["avg_daily_load_wh", "avg_daily_gen_wh"].map(String::from));
    w.write_record(&header)?;
    for (month, days) in energy {
        let mut row = vec![month.clone()];
        for k in &kinds {
            row.push(
                monthly
                    .iter()
                    .find(|s| s.label == month && s.strategy == *k && s.days_counted > 0)
                    .map(|s| pct_cell(s.cohort_supplied(), s.cohort_load(), "100.00"))
                    .unwrap_or_default(),
            );
        }
        let n = days.len() as i128;
        let load: i128 = days.values().map(|e| e.0 as i128).sum();
        let gen: i128 = days.values().map(|e| e.1 as i128).sum();
        row.push(format_decimal2(load, n));
        row.push(format_decimal2(gen, n));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-house % load met over the whole run, one column per strategy.
pub fn write_fig6<W: Write>(results: &[DayResult], out: W) -> csv::Result<()> {
    let annual = aggregate(results, Granularity::Annual);
    let mut w = csv_writer(out);
    let mut header = vec!["house_id".to_string()];
    header.extend(annual.iter().map(|s| s.strategy.to_string()));
    w.write_record(&header)?;
    let ids = annual.first().map(|s| s.house_ids.clone()).unwrap_or_default();
    for (i, h) in ids.iter().enumerate() {
        let mut row = vec![h.clone()];
        for s in &annual {
            row.push(if s.days_counted == 0 {
                String::new()
            } else {
                pct_cell(s.supplied_wh[i], s.load_wh[i], "100.00")
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the three plot-data series into `out_dir`.
pub fn emit_plot_data(results: &[DayResult], out_dir: &Path) -> Result<(), PipelineError> {
    let files: [(&str, fn(&[DayResult], BufWriter<File>) -> csv::Result<()>); 3] = [
        (REPORT_FILES[4], write_fig4),
        (REPORT_FILES[5], write_fig5),
        (REPORT_FILES[6], write_fig6),
    ];
    for (name, f) in files {
        let path = out_dir.join(name);
        write_csv_file(&path, |w| f(results, w))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SummaryMetadata {
    tool: &'static str,
    version: &'static str,
    generated_at: String,
    wall_seconds: f64,
}

#[derive(Debug, Serialize)]
struct AnnualFigures {
    period: String,
    days_solved: usize,
    cohort_load_met_pct: Option<f64>,
    pv_utilization_pct: Option<f64>,
    mean_houses_supplied: Option<f64>,
    house_load_met_pct: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct StrategySummary {
    strategy: String,
    days: usize,
    infeasible_days: Vec<NaiveDate>,
    limit_exceeded_days: Vec<NaiveDate>,
    nodes_explored: u64,
    annual: AnnualFigures,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    metadata: SummaryMetadata,
    config: &'a RunConfig,
    days_selected: usize,
    skipped_dates: &'a [NaiveDate],
    records: usize,
    oracle: OracleTally,
    strategies: Vec<StrategySummary>,
}

fn parse_pct(s: String) -> f64 {
    s.parse().expect("formatted percentage")
}

fn annual_figures(s: &PeriodSummary) -> AnnualFigures {
    let solved = s.days_counted > 0;
    let when = |v: String| solved.then(|| parse_pct(v));
    AnnualFigures {
        period: s.label.clone(),
        days_solved: s.days_counted,
        cohort_load_met_pct: when(pct_cell(s.cohort_supplied(), s.cohort_load(), "100.00")),
        pv_utilization_pct: when(pct_cell(s.cohort_supplied(), s.gen_wh, "0.00")),
        mean_houses_supplied: when(format_decimal2(
            s.houses_supplied_sum as i128,
            s.days_counted.max(1) as i128,
        )),
        house_load_met_pct: if solved {
            s.house_ids
                .iter()
                .zip(s.supplied_wh.iter().zip(&s.load_wh))
                .map(|(h, (&y, &l))| (h.clone(), parse_pct(pct_cell(y, l, "100.00"))))
                .collect()
        } else {
            BTreeMap::new()
        },
    }
}

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub days: usize,
    pub skipped_dates: Vec<NaiveDate>,
    pub outcomes: Vec<DayOutcome>,
    pub oracle: OracleTally,
}

impl RunReport {
    pub fn results(&self) -> Vec<DayResult> {
        self.outcomes.iter().map(|o| o.result.clone()).collect()
    }
}

/// Writes every report file plus `summary.json`.
pub fn write_reports(
    cfg: &RunConfig,
    report: &RunReport,
    wall_seconds: f64,
) -> Result<(), PipelineError> {
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Output {
        path: dir.clone(),
        source,
    })?;
    let results = report.results();
    write_csv_file(&dir.join(REPORT_FILES[0]), |w| write_schedules(&report.outcomes, w))?;
    write_csv_file(&dir.join(REPORT_FILES[1]), |w| write_metrics_daily(&results, w))?;
    write_csv_file(&dir.join(REPORT_FILES[2]), |w| {
        let mut periods = aggregate(&results, Granularity::Monthly);
        periods.extend(aggregate(&results, Granularity::Annual));
        write_metrics_period(&periods, w)
    })?;
    write_csv_file(&dir.join(REPORT_FILES[3]), |w| write_histogram(&results, w))?;
    emit_plot_data(&results, dir)?;

    let annual = aggregate(&results, Granularity::Annual);
    let strategies = annual
        .iter()
        .map(|s| {
            let mine = report.outcomes.iter().filter(|o| o.result.strategy == s.strategy);
            let days_with = |status: DayStatus| {
                mine.clone()
                    .filter(|o| o.result.status == status)
                    .map(|o| o.result.date)
                    .collect()
            };
            StrategySummary {
                strategy: s.strategy.to_string(),
                days: mine.clone().count(),
                infeasible_days: days_with(DayStatus::Infeasible),
                limit_exceeded_days: days_with(DayStatus::LimitExceeded),
                nodes_explored: mine.clone().map(|o| o.nodes_explored).sum(),
                annual: annual_figures(s),
            }
        })
        .collect();
    let summary = Summary {
        metadata: SummaryMetadata {
            tool: "pvshare",
            version: env!("CARGO_PKG_VERSION"),
            generated_at: chrono::Utc::now().to_rfc3339(),
            wall_seconds,
        },
        config: cfg,
        days_selected: report.days,
        skipped_dates: &report.skipped_dates,
        records: report.outcomes.len(),
        oracle: report.oracle,
        strategies,
    };
    let path = dir.join("summary.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &summary)
        .map_err(std::io::Error::other)
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|source| PipelineError::Output { path, source })
}

/// Loads the data, selects the cohort and solves every (day, strategy).
pub fn execute(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    let file = File::open(&cfg.data_path).map_err(|source| PipelineError::DataIo {
        path: cfg.data_path.clone(),
        source,
    })?;
    let ds = parse_canonical_csv(std::io::BufReader::new(file), cfg.steps_per_day)?;
    for inc in &ds.incomplete {
        warn!(
            "house {} on {} has {} of {} intervals; record dropped",
            inc.house_id, inc.date, inc.intervals_present, cfg.steps_per_day
        );
    }
    let sel = select_cohort(&ds, &cfg.house_ids, cfg.start, cfg.end)?;
    if sel.days.is_empty() {
        return Err(PipelineError::Data(format!(
            "no date in {}..{} has complete records for every selected house",
            cfg.start, cfg.end
        )));
    }
    for d in &sel.days {
        if let Some(v) = validate_day(d).first() {
            return Err(PipelineError::Data(format!("{}: {v}", d.date)));
        }
    }
    if !sel.skipped.is_empty() {
        warn!("{} dates skipped for missing data", sel.skipped.len());
    }
    info!(
        "{} days x {} strategies",
        sel.days.len(),
        cfg.strategies.len()
    );

    let specs: Vec<StrategySpec> = cfg.strategies.iter().map(|&k| cfg.spec(k)).collect();
    let settings = SolveSettings {
        limits: cfg.limits,
        engine: cfg.engine,
        oracle_check: cfg.oracle_check,
        dump_dir: Some(cfg.out_dir.clone()),
    };
    let outcomes = solve_days(&sel.days, &specs, &settings, cfg.jobs)?;
    let oracle = outcomes.iter().fold(OracleTally::default(), |acc, o| OracleTally {
        agreed: acc.agreed + o.oracle.agreed,
        skipped: acc.skipped + o.oracle.skipped,
    });
    if cfg.oracle_check {
        info!(
            "oracle agreement on {} programs ({} too large or unsolved, skipped)",
            oracle.agreed, oracle.skipped
        );
    }
    Ok(RunReport {
        days: sel.days.len(),
        skipped_dates: sel.skipped,
        outcomes,
        oracle,
    })
}

/// [`execute`] followed by [`write_reports`].
pub fn run(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    let started = Instant::now();
    let report = execute(cfg)?;
    write_reports(cfg, &report, started.elapsed().as_secs_f64())?;
    Ok(report)
}
