mod common;

use pvshare_core::metrics::{load_met_fraction, pv_utilization, supplied_load};
use pvshare_core::model::{build_program, check_feasible, ConstraintFamily};
use pvshare_core::pipeline::{solve_day, write_fig4, SolveSettings};
use pvshare_core::solver::{lp_relax, LpRelaxation};
use pvshare_core::{
    brute_force, solve, DayInstance, SolveLimits, SolveStatus, StrategyKind, StrategySpec,
    SwitchMatrix,
};

use StrategyKind::*;

fn oracle_u(d: &DayInstance, kind: StrategyKind, up: usize, down: usize) -> SwitchMatrix {
    let (_, u) = common::enumerate(d, kind, up, down).expect("admissible schedule exists");
    SwitchMatrix::from_rows(u).unwrap()
}

fn solved_u(d: &DayInstance, kind: StrategyKind, up: usize, down: usize) -> SwitchMatrix {
    let o = solve_day(d, &StrategySpec::new(kind, up, down), &SolveSettings::default()).unwrap();
    o.schedule.expect("solved")
}

#[test]
fn share_2x4_kind_c_supplies_house_two_all_day() {
    let d = common::share_2x4();
    let u = oracle_u(&d, C, 2, 1);
    assert_eq!(u.row(0), &[0, 0, 0, 0]);
    assert_eq!(u.row(1), &[1, 1, 1, 1]);
    assert_eq!(solved_u(&d, C, 2, 1), u);

    let y = supplied_load(&u, &d.load).unwrap();
    assert_eq!(y.row(0), &[0, 0, 0, 0]);
    assert_eq!(y.row(1), &[2000, 2000, 2000, 2000]);
    assert_eq!(load_met_fraction(&y, &d.load), vec![0.0, 1.0]);
    assert_eq!(pv_utilization(&y, &d.gen), 1.0);
}

#[test]
fn share_2x4_kind_b_four_on_steps() {
    let d = common::share_2x4();
    let (value, _) = common::enumerate(&d, B, 2, 1).unwrap();
    assert_eq!(value, 4 * 1_000_000);
    let p = build_program(&d, &StrategySpec::new(B, 2, 1)).unwrap();
    assert_eq!(p.num_vars, 24);
    let r = solve(&p, &SolveLimits::default()).unwrap();
    assert_eq!(r.objective_value, Some(4_000_000));
    match lp_relax(&p, &[]).unwrap() {
        LpRelaxation::Optimal { bound, .. } => assert!(bound >= 4_000_000.0 - 1e-6),
        other => panic!("{other:?}"),
    }
}

#[test]
fn share_2x4_kind_a_alternates_between_houses() {
    let d = common::share_2x4();
    let u = oracle_u(&d, A, 2, 1);
    assert_eq!(u.row(0), &[1, 1, 0, 0]);
    assert_eq!(u.row(1), &[0, 0, 1, 1]);
    assert_eq!(solved_u(&d, A, 2, 1), u);
    let y = supplied_load(&u, &d.load).unwrap();
    assert_eq!(y.total(), 6000);
    assert_eq!(load_met_fraction(&y, &d.load), vec![0.5, 0.5]);
    assert_eq!(pv_utilization(&y, &d.gen), 0.75);
}

#[test]
fn share_2x4_self_consumption() {
    let d = common::share_2x4();
    for (i, want) in [(0, 4000), (1, 0)] {
        let (v, _) = common::enumerate(&d.house(i), C, 2, 1).unwrap();
        assert_eq!(v, want);
    }
    let u = solved_u(&d, SelfConsumption, 2, 1);
    assert_eq!(supplied_load(&u, &d.load).unwrap().total(), 4000);
}

#[test]
fn fig4_values_for_share_2x4() {
    let d = common::share_2x4();
    let o = solve_day(&d, &StrategySpec::new(C, 2, 1), &SolveSettings::default()).unwrap();
    let mut buf = Vec::new();
    write_fig4(&[o.result], &mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "date,house_id,C\n2000-01-01,h01,0.00\n2000-01-01,h02,100.00\n"
    );
}

#[test]
fn min_up_fixture_has_no_usable_midday_surplus() {
    let d = DayInstance::synthetic(vec![vec![1000; 4]], vec![vec![0, 2000, 2000, 0]]);
    let (v, u) = common::enumerate(&d, C, 3, 1).unwrap();
    assert_eq!((v, u), (0, vec![vec![0, 0, 0, 0]]));
    let p = build_program(&d, &StrategySpec::new(C, 3, 1)).unwrap();
    let r = brute_force(&p).unwrap();
    assert_eq!(r.objective_value, Some(0));
    assert_eq!(r.assignment, Some(vec![0; 4]));
}

#[test]
fn check_feasible_short_run_after_start_up() {
    let d = DayInstance::synthetic(vec![vec![1000; 4]], vec![vec![5000; 4]]);
    let u = SwitchMatrix::from_rows(vec![vec![0, 1, 1, 0]]).unwrap();
    let v = check_feasible(&u, &d, &StrategySpec::new(C, 3, 1));
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].family, ConstraintFamily::MinUp);
    assert_eq!(v[0].to_string(), "min-up, house 1, step 4");
    assert!(!common::runs_ok(u.row(0), 3, 1));
}

#[test]
fn tiny_program_examples() {
    let d = DayInstance::synthetic(vec![vec![1000, 1000]], vec![vec![1000, 1000]]);
    let c = build_program(&d, &StrategySpec::new(C, 1, 1)).unwrap();
    assert_eq!(c.num_vars, 6);
    assert_eq!(solve(&c, &SolveLimits::default()).unwrap().objective_value, Some(2000));
    let a = build_program(&d, &StrategySpec::new(A, 1, 1)).unwrap();
    assert_eq!(a.constraints.len(), c.constraints.len() + 1);
}

#[test]
fn daily_connection_without_generation_is_infeasible() {
    let d = DayInstance::synthetic(vec![vec![1000; 4]], vec![vec![0; 4]]);
    assert!(common::enumerate(&d, A, 1, 1).is_none());
    let p = build_program(&d, &StrategySpec::new(A, 1, 1)).unwrap();
    assert_eq!(solve(&p, &SolveLimits::default()).unwrap().status, SolveStatus::Infeasible);
    assert_eq!(brute_force(&p).unwrap().status, SolveStatus::Infeasible);
}

#[test]
fn unpowered_house_stays_off_alone() {
    let d = DayInstance::synthetic(vec![vec![300, 300, 300]], vec![vec![0, 0, 0]]);
    assert_eq!(solved_u(&d, SelfConsumption, 1, 1).row(0), &[0, 0, 0]);
}
