#![allow(dead_code)]

use pvshare_core::{DayInstance, StrategyKind, SwitchMatrix};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// N=2, T=4, one house with loads equal to its PV, one with double.
pub fn share_2x4() -> DayInstance {
    DayInstance::synthetic(vec![vec![1000; 4], vec![2000; 4]], vec![vec![1000; 4]; 2])
}

/// A 10-house, 48-step summer day. Evening and overnight steps have no PV,
/// and on most daylight steps pooled PV covers the pooled load, so the power
/// constraint is tight on roughly half the steps.
pub fn summer_day(seed: u64) -> DayInstance {
    let mut r = rng(seed);
    let (n, t) = (10, 48);
    let mut load = vec![vec![0i64; t]; n];
    let mut gen = vec![vec![0i64; t]; n];
    for i in 0..n {
        let peak = if r.gen_bool(0.2) { 0.0 } else { r.gen_range(1500.0..3500.0) };
        let base = r.gen_range(100.0..300.0);
        let evening = r.gen_range(300.0..1500.0);
        let morning = r.gen_range(100.0..800.0);
        for k in 0..t {
            let x = k as f64;
            let sun = (std::f64::consts::PI * (x - 10.0) / 28.0).sin().max(0.0);
            gen[i][k] = (peak * sun * r.gen_range(0.7..1.0)) as i64;
            load[i][k] = (base
                + evening * (-((x - 38.0) / 3.0).powi(2)).exp()
                + morning * (-((x - 15.0) / 2.0).powi(2)).exp()
                + r.gen_range(0.0..200.0)) as i64;
        }
    }
    DayInstance::synthetic(load, gen)
}

/// Steps where pooled PV is short of pooled load.
pub fn binding_steps(d: &DayInstance) -> usize {
    (0..d.num_steps())
        .filter(|&t| d.gen.col_sum(t) < d.load.col_sum(t))
        .count()
}

/// Random instance with N ≤ 3, T ≤ 6 and m⁺, m⁻ ∈ {1,2,3} (capped at T).
pub fn small_instance(r: &mut impl Rng) -> (DayInstance, usize, usize) {
    let n = r.gen_range(1..=3);
    let t = r.gen_range(1..=6);
    let mut m = || -> Vec<Vec<i64>> {
        (0..n)
            .map(|_| (0..t).map(|_| r.gen_range(0..=4000)).collect())
            .collect()
    };
    let load = m();
    let gen = m();
    let up = r.gen_range(1..=3usize).min(t);
    let down = r.gen_range(1..=3usize).min(t);
    (DayInstance::synthetic(load, gen), up, down)
}

pub fn u_matrix(d: &DayInstance, assignment: &[u8]) -> SwitchMatrix {
    SwitchMatrix::from_assignment(d.num_houses(), d.num_steps(), assignment).unwrap()
}

/// Canonical CSV text holding every house-day of `days`.
pub fn canonical_csv(days: &[DayInstance]) -> String {
    use pvshare_core::ingest::{write_canonical_csv, HouseDayRecord};
    use pvshare_core::EnergyWh;
    let steps = days.first().map_or(48, |d| d.num_steps());
    let mut ds = pvshare_core::Dataset::empty(steps);
    for d in days {
        for (i, h) in d.house_ids.iter().enumerate() {
            let rec = HouseDayRecord {
                house_id: h.clone(),
                date: d.date,
                load: d.load.row(i).iter().map(|&e| EnergyWh(e)).collect(),
                gen: d.gen.row(i).iter().map(|&e| EnergyWh(e)).collect(),
            };
            ds.records.insert((h.clone(), d.date), rec);
        }
    }
    let mut buf = Vec::new();
    write_canonical_csv(&ds, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

/// `count` consecutive summer days starting 2011-01-01.
pub fn summer_days(first_seed: u64, count: usize) -> Vec<DayInstance> {
    let start = chrono::NaiveDate::from_ymd_opt(2011, 1, 1).unwrap();
    (0..count)
        .map(|k| {
            let mut d = summer_day(first_seed + k as u64);
            d.date = start + chrono::Days::new(k as u64);
            d
        })
        .collect()
}

/// Run-length reading of the switching rules, written independently of the
/// window inequalities: every on-run opened by a start-up lasts at least
/// `up` steps inside the day, every off-run opened by a shut-down lasts at
/// least `down` steps, and runs already in progress at the first step are
/// free.
pub fn runs_ok(row: &[u8], up: usize, down: usize) -> bool {
    let t = row.len();
    let mut k = 1;
    while k < t {
        if row[k] != row[k - 1] {
            let need = if row[k] == 1 { up } else { down };
            let len = row[k..].iter().take_while(|&&b| b == row[k]).count();
            if len < need {
                return false;
            }
            k += len;
        } else {
            k += 1;
        }
    }
    true
}

/// Objective of `kind` at `u`, straight from the definitions.
pub fn objective(d: &DayInstance, kind: StrategyKind, u: &[Vec<u8>], scale: i64) -> i128 {
    let n = d.num_houses();
    let weight = |i: usize| -> i128 {
        let (g, l) = (d.gen.row_sum(i) as i128, d.load.row_sum(i) as i128);
        if l == 0 {
            return 0;
        }
        // Round scale·g/l half to even.
        let num = scale as i128 * g;
        let (q, r) = (num / l, num % l);
        match (2 * r).cmp(&l) {
            std::cmp::Ordering::Less => q,
            std::cmp::Ordering::Greater => q + 1,
            std::cmp::Ordering::Equal => q + (q & 1),
        }
    };
    let mut total = 0i128;
    for i in 0..n {
        for (t, &b) in u[i].iter().enumerate() {
            let l = *d.load.get(i, t) as i128;
            total += b as i128
                * match kind {
                    StrategyKind::A | StrategyKind::B => scale as i128,
                    StrategyKind::C | StrategyKind::SelfConsumption => l,
                    StrategyKind::APlus | StrategyKind::BPlus => weight(i),
                    StrategyKind::CPlus => weight(i) * l,
                };
        }
    }
    total
}

/// Whether `u` is an admissible schedule for `kind` under run-length rules.
pub fn admissible(d: &DayInstance, kind: StrategyKind, u: &[Vec<u8>], up: usize, down: usize) -> bool {
    let n = d.num_houses();
    if !u.iter().all(|row| runs_ok(row, up, down)) {
        return false;
    }
    for t in 0..d.num_steps() {
        if kind == StrategyKind::SelfConsumption {
            if (0..n).any(|i| u[i][t] as i64 * d.load.get(i, t) > *d.gen.get(i, t)) {
                return false;
            }
        } else {
            let used: i64 = (0..n).map(|i| u[i][t] as i64 * d.load.get(i, t)).sum();
            if used > d.gen.col_sum(t) {
                return false;
            }
        }
    }
    if matches!(kind, StrategyKind::A | StrategyKind::APlus) {
        return u.iter().all(|row| row.contains(&1));
    }
    true
}

/// Exhaustive optimum over all switching matrices, ties broken towards the
/// lexicographically greatest (house, step) bit string. `None` if nothing is
/// admissible. Limited to 20 cells.
pub fn enumerate(d: &DayInstance, kind: StrategyKind, up: usize, down: usize) -> Option<(i128, Vec<Vec<u8>>)> {
    let (n, t) = (d.num_houses(), d.num_steps());
    let cells = n * t;
    assert!(cells <= 20, "independent oracle limited to 20 cells");
    // Descending masks visit lexicographically greater strings first, so
    // only strict improvements replace the incumbent.
    let mut best: Option<(i128, Vec<Vec<u8>>)> = None;
    for mask in (0u32..1 << cells).rev() {
        let u: Vec<Vec<u8>> = (0..n)
            .map(|i| {
                (0..t)
                    .map(|k| ((mask >> (cells - 1 - (i * t + k))) & 1) as u8)
                    .collect()
            })
            .collect();
        if !admissible(d, kind, &u, up, down) {
            continue;
        }
        let v = objective(d, kind, &u, 1_000_000);
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, u));
        }
    }
    best
}
