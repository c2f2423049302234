mod common;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use proptest::prelude::*;
use pvshare_core::ingest::{parse_canonical_csv, select_cohort, HouseDayRecord};
use pvshare_core::metrics::{
    aggregate, houses_supplied_histogram, load_met_fraction, pv_utilization, strategy_objective,
    supplied_load, DayResult, Granularity,
};
use pvshare_core::model::{build_program, check_feasible, derive_startstop, UpDownForm};
use pvshare_core::pipeline::{solve_day, SolveSettings};
use pvshare_core::solver::{lp_relax, solve_with, Engine, LpRelaxation};
use pvshare_core::{
    brute_force, solve, BinaryProgram, Dataset, DayInstance, EnergyWh, SolveLimits, SolveStatus,
    StrategyKind, StrategySpec, SwitchMatrix,
};

use StrategyKind::*;

const SHARING: [StrategyKind; 6] = [A, B, C, APlus, BPlus, CPlus];

fn matrix(n: usize, t: usize, hi: i64) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(0..=hi, t), n)
}

/// Small day with up/down times valid for it.
fn small_case() -> impl Strategy<Value = (DayInstance, usize, usize)> {
    (1usize..=3, 1usize..=5).prop_flat_map(|(n, t)| {
        (matrix(n, t, 4000), matrix(n, t, 4000), 1..=t.min(3), 1..=t.min(3))
            .prop_map(|(l, g, up, down)| (DayInstance::synthetic(l, g), up, down))
    })
}

fn switch_rows(n: usize, t: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(0u8..=1, t), n)
}

fn optimum(d: &DayInstance, kind: StrategyKind, up: usize, down: usize) -> Option<(i64, SwitchMatrix)> {
    let o = solve_day(d, &StrategySpec::new(kind, up, down), &SolveSettings::default()).unwrap();
    Some((o.objective_value?, o.schedule?))
}

fn energy(d: &DayInstance, u: &SwitchMatrix) -> i64 {
    supplied_load(u, &d.load).unwrap().total()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn startstop_satisfies_linking(rows in (1usize..4, 1usize..8).prop_flat_map(|(n, t)| switch_rows(n, t))) {
        let u = SwitchMatrix::from_rows(rows).unwrap();
        let ss = derive_startstop(&u);
        for i in 0..u.houses() {
            prop_assert_eq!((*ss.v.get(i, 0), *ss.w.get(i, 0)), (0, 0));
            for t in 1..u.steps() {
                let (v, w) = (*ss.v.get(i, t) as i32, *ss.w.get(i, t) as i32);
                prop_assert_eq!(v - w, u.get(i, t) as i32 - u.get(i, t - 1) as i32);
                prop_assert!(v + w <= 1);
            }
        }
    }

    #[test]
    fn check_feasible_matches_run_lengths(
        (d, up, down) in small_case(),
        kind in prop::sample::select(StrategyKind::ALL.to_vec()),
        seed in any::<u64>(),
    ) {
        let (n, t) = (d.num_houses(), d.num_steps());
        let rows: Vec<Vec<u8>> = (0..n)
            .map(|i| (0..t).map(|k| ((seed >> ((i * t + k) % 64)) & 1) as u8).collect())
            .collect();
        let u = SwitchMatrix::from_rows(rows.clone()).unwrap();
        let empty = check_feasible(&u, &d, &StrategySpec::new(kind, up, down)).is_empty();
        prop_assert_eq!(empty, common::admissible(&d, kind, &rows, up, down));
    }

    #[test]
    fn solver_matches_independent_enumeration(
        (d, up, down) in small_case(),
        kind in prop::sample::select(StrategyKind::ALL.to_vec()),
    ) {
        prop_assume!(d.num_houses() * d.num_steps() <= 15);
        let want = common::enumerate(&d, kind, up, down);
        let o = solve_day(&d, &StrategySpec::new(kind, up, down), &SolveSettings::default()).unwrap();
        match want {
            None => prop_assert!(o.schedule.is_none()),
            Some((v, rows)) => {
                prop_assert_eq!(o.objective_value.map(i128::from), Some(v));
                prop_assert_eq!(o.schedule, Some(SwitchMatrix::from_rows(rows).unwrap()));
            }
        }
    }

    #[test]
    fn objective_matches_independent_formula(
        (d, up, down) in small_case(),
        kind in prop::sample::select(SHARING.to_vec()),
    ) {
        if let Some((value, u)) = optimum(&d, kind, up, down) {
            let rows: Vec<Vec<u8>> = (0..u.houses()).map(|i| u.row(i).to_vec()).collect();
            prop_assert_eq!(value as i128, common::objective(&d, kind, &rows, 1_000_000));
            prop_assert_eq!(
                strategy_objective(&u, &d, &StrategySpec::new(kind, up, down)).unwrap(),
                value as i128
            );
        }
    }

    #[test]
    fn daily_connection_never_helps((d, up, down) in small_case()) {
        for (with, without) in [(A, B), (APlus, BPlus)] {
            let b = optimum(&d, without, up, down).expect("all-off is feasible").0;
            if let Some((a, _)) = optimum(&d, with, up, down) {
                prop_assert!(a <= b);
            }
        }
    }

    #[test]
    fn energy_optimum_dominates((d, up, down) in small_case()) {
        let (c, _) = optimum(&d, C, up, down).unwrap();
        for kind in [A, B] {
            if let Some((_, u)) = optimum(&d, kind, up, down) {
                prop_assert!(energy(&d, &u) <= c);
            }
        }
        let (_, selfu) = optimum(&d, SelfConsumption, up, down).unwrap();
        prop_assert!(energy(&d, &selfu) <= c);
    }

    #[test]
    fn optimal_schedules_respect_indices((d, up, down) in small_case(), kind in prop::sample::select(StrategyKind::ALL.to_vec())) {
        if let Some((_, u)) = optimum(&d, kind, up, down) {
            let y = supplied_load(&u, &d.load).unwrap();
            for t in 0..d.num_steps() {
                prop_assert!(y.col_sum(t) <= d.gen.col_sum(t));
            }
            prop_assert!(pv_utilization(&y, &d.gen) <= 1.0);
            let met = load_met_fraction(&y, &d.load);
            for (i, f) in met.iter().enumerate() {
                prop_assert!((0.0..=1.0).contains(f));
                let full = (0..d.num_steps()).all(|t| *d.load.get(i, t) == 0 || u.get(i, t) == 1);
                prop_assert_eq!(*f == 1.0, full);
            }
        }
    }

    #[test]
    fn engines_agree_with_brute_force(
        (d, up, down) in small_case(),
        kind in prop::sample::select(SHARING.to_vec()),
        literal in any::<bool>(),
    ) {
        let mut s = StrategySpec::new(kind, up, down);
        if literal {
            s.updown = UpDownForm::Literal;
        }
        let p = build_program(&d, &s).unwrap();
        let want = brute_force(&p).unwrap();
        for engine in [Engine::StageSweep, Engine::LpBranchAndBound] {
            let got = solve_with(&p, &SolveLimits::default(), engine).unwrap();
            prop_assert_eq!(got.status, want.status);
            prop_assert_eq!(got.objective_value, want.objective_value);
            prop_assert_eq!(&got.assignment, &want.assignment);
            if let (Some(v), Some(b)) = (got.objective_value, got.best_bound) {
                prop_assert!(b <= v as f64 + 1.0);
            }
        }
    }

    #[test]
    fn solve_is_deterministic((d, up, down) in small_case(), kind in prop::sample::select(SHARING.to_vec())) {
        let p = build_program(&d, &StrategySpec::new(kind, up, down)).unwrap();
        let text = p.to_text();
        let reparsed: BinaryProgram = text.parse().unwrap();
        prop_assert_eq!(&reparsed, &p);
        for engine in [Engine::StageSweep, Engine::LpBranchAndBound] {
            let a = solve_with(&p, &SolveLimits::default(), engine).unwrap();
            let b = solve_with(&reparsed, &SolveLimits::default(), engine).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn lp_bound_covers_every_completion(
        (d, up, down) in small_case(),
        kind in prop::sample::select(SHARING.to_vec()),
        fix_mask in any::<u32>(),
        fix_vals in any::<u32>(),
    ) {
        prop_assume!(d.num_houses() * d.num_steps() <= 12);
        let p = build_program(&d, &StrategySpec::new(kind, up, down)).unwrap();
        let u_vars = p.u_order();
        let fixings: Vec<(usize, bool)> = u_vars
            .iter()
            .enumerate()
            .filter(|(k, _)| fix_mask >> k & 1 == 1)
            .map(|(k, &j)| (j, fix_vals >> k & 1 == 1))
            .collect();
        let mut best: Option<i128> = None;
        for mask in 0u32..1 << u_vars.len() {
            let consistent = fixings.iter().all(|&(j, v)| {
                let k = u_vars.iter().position(|&x| x == j).unwrap();
                (mask >> k & 1 == 1) == v
            });
            if !consistent {
                continue;
            }
            let mut x = vec![0i64; p.num_vars];
            for (k, &j) in u_vars.iter().enumerate() {
                x[j] = (mask >> k & 1) as i64;
            }
            p.complete_startstop(&mut x);
            if p.constraints.iter().all(|c| c.is_satisfied(&x)) {
                best = best.max(Some(p.objective_at(&x)));
            }
        }
        match (lp_relax(&p, &fixings).unwrap(), best) {
            (LpRelaxation::Optimal { bound, .. }, Some(v)) => prop_assert!(bound + 1e-6 >= v as f64),
            (LpRelaxation::Infeasible, Some(v)) => prop_assert!(false, "LP infeasible but {} reachable", v),
            _ => {}
        }
    }

    #[test]
    fn histogram_is_non_increasing(counts in prop::collection::vec(0usize..=10, 1..40)) {
        let d = DayInstance::synthetic(vec![vec![1]; 10], vec![vec![1]; 10]);
        let results: Vec<DayResult> = counts
            .iter()
            .map(|&c| {
                let rows = (0..10).map(|i| vec![(i < c) as u8]).collect();
                DayResult::solved(&d, B, &SwitchMatrix::from_rows(rows).unwrap()).unwrap()
            })
            .collect();
        let h = houses_supplied_histogram(&results);
        prop_assert_eq!(h.len(), 11);
        prop_assert!(h.windows(2).all(|w| w[0].1 <= w[1].1));
        prop_assert_eq!(h.last().unwrap(), &(0, counts.len()));
        for &(k, days) in &h {
            prop_assert_eq!(days, counts.iter().filter(|&&c| c >= k).count());
        }
    }

    #[test]
    fn daily_aggregate_reproduces_the_day((d, up, down) in small_case()) {
        let (_, u) = optimum(&d, C, up, down).unwrap();
        let r = DayResult::solved(&d, C, &u).unwrap();
        let s = &aggregate(std::slice::from_ref(&r), Granularity::Daily)[0];
        let y = supplied_load(&u, &d.load).unwrap();
        prop_assert_eq!(s.label.clone(), d.date.to_string());
        prop_assert_eq!(&s.supplied_wh, &r.supplied_wh);
        prop_assert_eq!(s.gen_wh, d.gen.total());
        let met = load_met_fraction(&y, &d.load);
        for (a, b) in s.house_load_met_pct().iter().zip(&met) {
            prop_assert!((a - 100.0 * b).abs() < 1e-9);
        }
        prop_assert!((s.pv_utilization_pct() - 100.0 * pv_utilization(&y, &d.gen)).abs() < 1e-9);
        prop_assert_eq!(s.houses_supplied_sum, r.houses_supplied);
    }
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    let record = (0usize..4, 0u64..5, prop::collection::vec((0i64..100_000, 0i64..100_000), 4));
    prop::collection::vec(record, 0..10).prop_map(|recs| {
        let mut ds = Dataset::empty(4);
        let base = NaiveDate::from_ymd_opt(2010, 7, 1).unwrap();
        for (h, day, vals) in recs {
            let house = format!("house{h}");
            let date = base + chrono::Days::new(day);
            ds.records.insert(
                (house.clone(), date),
                HouseDayRecord {
                    house_id: house,
                    date,
                    load: vals.iter().map(|v| EnergyWh(v.0)).collect(),
                    gen: vals.iter().map(|v| EnergyWh(v.1)).collect(),
                },
            );
        }
        ds
    })
}

/// Sum of a kWh column in Wh, from the text alone.
fn text_sum_wh(csv: &str, col: usize) -> i64 {
    csv.lines()
        .skip(1)
        .map(|l| {
            let field = l.split(',').nth(col).unwrap();
            let (whole, frac) = field.split_once('.').unwrap_or((field, ""));
            let frac = format!("{frac:0<3}");
            whole.parse::<i64>().unwrap() * 1000 + frac.parse::<i64>().unwrap()
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_csv_round_trips(ds in dataset_strategy()) {
        let mut buf = Vec::new();
        pvshare_core::ingest::write_canonical_csv(&ds, &mut buf).unwrap();
        let back = parse_canonical_csv(buf.as_slice(), 4).unwrap();
        prop_assert_eq!(&back, &ds);

        let text = String::from_utf8(buf).unwrap();
        let parsed_load: i64 = back.records.values().flat_map(|r| r.load.iter().map(|e| e.0)).sum();
        prop_assert_eq!(parsed_load, text_sum_wh(&text, 3));
    }

    #[test]
    fn cohort_rows_follow_sorted_ids(ds in dataset_strategy(), rotate in 0usize..50) {
        let mut buf = Vec::new();
        pvshare_core::ingest::write_canonical_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        if !lines.is_empty() {
            let k = rotate % lines.len();
            lines.rotate_left(k);
            lines.reverse();
        }
        let shuffled = std::iter::once(header).chain(lines).collect::<Vec<_>>().join("\n");
        let back = parse_canonical_csv(shuffled.as_bytes(), 4).unwrap();
        prop_assert_eq!(&back, &ds);

        let ids: Vec<String> = vec!["house3".into(), "house0".into(), "house2".into()];
        let start = NaiveDate::from_ymd_opt(2010, 7, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2010, 7, 5).unwrap();
        let sel = select_cohort(&back, &ids, start, end).unwrap();
        prop_assert_eq!(sel.days.len() + sel.skipped.len(), 5);
        let mut by_date: BTreeMap<NaiveDate, usize> = BTreeMap::new();
        for (h, date) in back.records.keys() {
            if ids.contains(h) {
                *by_date.entry(*date).or_default() += 1;
            }
        }
        for day in &sel.days {
            prop_assert_eq!(&day.house_ids, &vec!["house0".to_string(), "house2".into(), "house3".into()]);
            prop_assert_eq!(by_date.get(&day.date), Some(&3));
            for (i, h) in day.house_ids.iter().enumerate() {
                let rec = back.get(h, day.date).unwrap();
                prop_assert!(rec.load.iter().map(|e| e.0).eq(day.load.row(i).iter().copied()));
            }
        }
    }
}

#[test]
fn random_days_solve_optimally_with_default_limits() {
    let mut r = common::rng(11);
    for _ in 0..50 {
        let (d, up, down) = common::small_instance(&mut r);
        for kind in SHARING {
            let p = build_program(&d, &StrategySpec::new(kind, up, down)).unwrap();
            let res = solve(&p, &SolveLimits::default()).unwrap();
            assert_ne!(res.status, SolveStatus::LimitExceeded);
        }
    }
}
