//! Exact 0-1 solvers for labelled programs, plus an exhaustive enumerator
//! used as an independent oracle.
//!
//! Two exact engines are available. The default sweeps the steps in order
//! and merges partial schedules that leave the same obligations behind.
//! The alternative is depth-first branch-and-bound over the LP relaxation.
//! All three return the same optimum when several exist: the
//! lexicographically greatest u-assignment in (house, step) order, with 1
//! ranked above 0.
//!
//! The branch-and-bound branches on the first free u-variable in that order,
//! trying 1 before 0, so subtrees are visited in decreasing lexicographic
//! order. A subtree whose bound merely ties the incumbent is skipped only if
//! every assignment in it is lexicographically smaller.

pub mod program;
pub(crate) mod simplex;
mod sweep;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use program::{
    apply_startstop, BinaryProgram, Constraint, ProgramParseError, Relation, Role, StartStopLink,
    VarLabel,
};
use simplex::{LpStatus, Simplex};

const INTEGRALITY_TOL: f64 = 1e-6;
pub const MAX_BRUTE_FORCE_VARS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveLimits {
    pub max_nodes: u64,
    pub max_seconds: f64,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            max_nodes: 10_000_000,
            max_seconds: 60.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Engine {
    #[default]
    StageSweep,
    LpBranchAndBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    LimitExceeded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// u-values in (house, step) order. For `LimitExceeded` this is the best
    /// incumbent found, if any.
    pub assignment: Option<Vec<u8>>,
    pub objective_value: Option<i64>,
    pub nodes_explored: u64,
    /// Proven upper bound on the optimum, rounded down to the objective's
    /// granularity.
    pub best_bound: Option<f64>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("brute force limited to {MAX_BRUTE_FORCE_VARS} u-variables, program has {0}")]
    TooLarge(usize),
    #[error("objective value {0} does not fit in 64 bits")]
    Overflow(i128),
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

fn objective_granularity(p: &BinaryProgram) -> i64 {
    let g = p.objective.iter().fold(0, |g, &c| gcd(g, c));
    if g == 0 {
        1
    } else {
        g
    }
}

/// Largest multiple of one objective unit that the LP value can still reach.
fn bound_cap(lp_value: f64) -> i64 {
    let tol = 1e-6 + 1e-9 * lp_value.abs();
    (lp_value + tol).floor() as i64
}

/// Full 0/1 vector for a u-assignment, with v/w derived from it.
fn expand(num_vars: usize, links: &[StartStopLink], u_order: &[usize], u: &[u8]) -> Vec<i64> {
    let mut x = vec![0i64; num_vars];
    for (&j, &b) in u_order.iter().zip(u) {
        x[j] = b as i64;
    }
    apply_startstop(links, &mut x);
    x
}

fn feasible(p: &BinaryProgram, x: &[i64]) -> bool {
    p.constraints.iter().all(|c| c.is_satisfied(x))
}

/// Result of solving one LP relaxation.
#[derive(Clone, Debug, PartialEq)]
pub enum LpRelaxation {
    Optimal { bound: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// Solves the LP relaxation with every variable in `[0, 1]`, except the
/// given variables which are fixed to 0 or 1. The bound is in objective
/// units.
pub fn lp_relax(p: &BinaryProgram, fixings: &[(usize, bool)]) -> Result<LpRelaxation, SolverError> {
    p.check_well_formed().map_err(SolverError::Malformed)?;
    let g = objective_granularity(p);
    let mut lp = Simplex::new(p, g);
    for &(j, v) in fixings {
        if j >= p.num_vars {
            return Err(SolverError::Malformed(format!("fixing refers to x{j}")));
        }
        let (lo, hi) = lp.base_bounds(j);
        let val = if v { 1.0 } else { 0.0 };
        if val < lo - 1e-9 || val > hi + 1e-9 {
            return Ok(LpRelaxation::Infeasible);
        }
        lp.set_bounds(j, val, val);
    }
    let mut status = lp.optimize();
    if status == LpStatus::Stalled {
        lp.cold_start(Some(lp.structural_bounds()));
        lp.iteration_cap = u64::MAX;
        status = lp.optimize();
    }
    Ok(match status {
        LpStatus::Optimal => LpRelaxation::Optimal {
            bound: lp.objective() * g as f64,
            point: lp.values().to_vec(),
        },
        LpStatus::Infeasible => LpRelaxation::Infeasible,
        LpStatus::Unbounded | LpStatus::Stalled => LpRelaxation::Unbounded,
    })
}

struct Node {
    depth: usize,
    value: bool,
    /// Parent's bound cap; children cannot exceed it.
    cap: Option<i64>,
}

fn lex_below(prefix: &[bool], incumbent: &[u8]) -> bool {
    for (&a, &b) in prefix.iter().zip(incumbent) {
        match (a as u8).cmp(&b) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Exact optimum with the default engine. Deterministic: the same program
/// always yields the same assignment and node count, unless the time limit
/// intervenes.
pub fn solve(p: &BinaryProgram, lim: &SolveLimits) -> Result<SolveResult, SolverError> {
    solve_with(p, lim, Engine::default())
}

pub fn solve_with(
    p: &BinaryProgram,
    lim: &SolveLimits,
    engine: Engine,
) -> Result<SolveResult, SolverError> {
    p.check_well_formed().map_err(SolverError::Malformed)?;
    match engine {
        Engine::StageSweep => solve_sweep(p, lim),
        Engine::LpBranchAndBound => solve_branch_and_bound(p, lim),
    }
}

fn to_i64(v: i128) -> Result<i64, SolverError> {
    i64::try_from(v).map_err(|_| SolverError::Overflow(v))
}

fn solve_sweep(p: &BinaryProgram, lim: &SolveLimits) -> Result<SolveResult, SolverError> {
    let deadline = Instant::now().checked_add(Duration::from_secs_f64(lim.max_seconds.clamp(0.0, 1e9)));
    let out = sweep::sweep(p, lim.max_nodes, deadline);
    let value = out.value.map(to_i64).transpose()?;
    let status = match out.status {
        sweep::SweepStatus::Optimal => SolveStatus::Optimal,
        sweep::SweepStatus::Infeasible => SolveStatus::Infeasible,
        sweep::SweepStatus::LimitExceeded => SolveStatus::LimitExceeded,
    };
    let best_bound = match status {
        SolveStatus::Optimal => value.map(|v| v as f64),
        _ => out.bound.map(|b| b as f64),
    };
    Ok(SolveResult {
        status,
        assignment: out.assignment,
        objective_value: value,
        nodes_explored: out.states,
        best_bound,
    })
}

fn solve_branch_and_bound(p: &BinaryProgram, lim: &SolveLimits) -> Result<SolveResult, SolverError> {
    let started = Instant::now();
    let deadline = Duration::from_secs_f64(lim.max_seconds.max(0.0));
    let g = objective_granularity(p);
    let u_order = p.u_order();
    let k = u_order.len();
    let links = p.startstop_links();
    let mut lp = Simplex::new(p, g);

    let mut incumbent: Option<(i64, Vec<u8>)> = None;
    let mut nodes = 0u64;
    let mut path: Vec<bool> = Vec::with_capacity(k);
    let mut applied: Vec<Option<bool>> = vec![None; k];
    let mut stack = vec![Node {
        depth: 0,
        value: false,
        cap: None,
    }];
    let mut retried_cold = false;

    let finish = |status: SolveStatus,
                  incumbent: Option<(i64, Vec<u8>)>,
                  nodes: u64,
                  open_cap: Option<i64>| {
        let inc_val = incumbent.as_ref().map(|i| i.0);
        let best = match (inc_val, open_cap) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let (assignment, value) = match incumbent {
            Some((v, u)) => (Some(u), Some(v * g)),
            None => (None, None),
        };
        SolveResult {
            status,
            assignment,
            objective_value: value,
            nodes_explored: nodes,
            best_bound: best.map(|b| (b as f64) * g as f64),
        }
    };

    while let Some(node) = stack.pop() {
        if nodes >= lim.max_nodes || started.elapsed() > deadline {
            stack.push(node);
            let open = stack.iter().filter_map(|n| n.cap).max();
            let open = if stack.iter().any(|n| n.cap.is_none()) {
                None
            } else {
                open
            };
            return Ok(finish(SolveStatus::LimitExceeded, incumbent, nodes, open));
        }
        path.truncate(node.depth.saturating_sub(1));
        if node.depth > 0 {
            path.push(node.value);
        }
        if let (Some(cap), Some((inc, inc_u))) = (node.cap, incumbent.as_ref()) {
            if cap < *inc || (cap == *inc && lex_below(&path, inc_u)) {
                continue;
            }
        }

        // Move the LP to this node's fixings.
        let mut admissible = true;
        for pos in 0..k {
            let want = path.get(pos).copied();
            if applied[pos] == want {
                continue;
            }
            let j = u_order[pos];
            let (lo, hi) = lp.base_bounds(j);
            match want {
                None => lp.set_bounds(j, lo, hi),
                Some(v) => {
                    let val = if v { 1.0 } else { 0.0 };
                    if val < lo - 1e-9 || val > hi + 1e-9 {
                        admissible = false;
                    }
                    lp.set_bounds(j, val, val);
                }
            }
            applied[pos] = want;
        }
        if !admissible {
            continue;
        }

        nodes += 1;
        let mut status = lp.optimize();
        if status == LpStatus::Stalled && !retried_cold {
            retried_cold = true;
            lp.cold_start(Some(lp.structural_bounds()));
            status = lp.optimize();
        }
        let bound = match status {
            LpStatus::Optimal => lp.objective(),
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded | LpStatus::Stalled => {
                return Ok(finish(SolveStatus::LimitExceeded, incumbent, nodes, None));
            }
        };
        let cap = bound_cap(bound);
        if let Some((inc, inc_u)) = incumbent.as_ref() {
            if cap < *inc || (cap == *inc && lex_below(&path, inc_u)) {
                continue;
            }
        }

        let integral = u_order.iter().all(|&j| {
            let v = lp.value(j);
            v.abs() <= INTEGRALITY_TOL || (v - 1.0).abs() <= INTEGRALITY_TOL
        });
        if integral {
            let u: Vec<u8> = u_order
                .iter()
                .map(|&j| (lp.value(j) > 0.5) as u8)
                .collect();
            let x = expand(p.num_vars, &links, &u_order, &u);
            if feasible(p, &x) {
                let val = (p.objective_at(&x) / g as i128) as i64;
                let better = match incumbent.as_ref() {
                    None => true,
                    Some((inc, inc_u)) => val > *inc || (val == *inc && u > *inc_u),
                };
                if better {
                    incumbent = Some((val, u));
                }
            }
        }

        if node.depth == k {
            continue;
        }
        stack.push(Node {
            depth: node.depth + 1,
            value: false,
            cap: Some(cap),
        });
        stack.push(Node {
            depth: node.depth + 1,
            value: true,
            cap: Some(cap),
        });
    }

    let status = if incumbent.is_some() {
        SolveStatus::Optimal
    } else {
        SolveStatus::Infeasible
    };
    Ok(finish(status, incumbent, nodes, None))
}

/// Exhaustive enumeration of every u-assignment, in decreasing
/// lexicographic order, keeping the first maximum.
pub fn brute_force(p: &BinaryProgram) -> Result<SolveResult, SolverError> {
    p.check_well_formed().map_err(SolverError::Malformed)?;
    let u_order = p.u_order();
    let k = u_order.len();
    if k > MAX_BRUTE_FORCE_VARS {
        return Err(SolverError::TooLarge(k));
    }
    let links = p.startstop_links();
    let mut best: Option<(i128, u64)> = None;
    let mut x = vec![0i64; p.num_vars];
    let total: u64 = 1 << k;
    for mask in (0..total).rev() {
        for (pos, &j) in u_order.iter().enumerate() {
            x[j] = ((mask >> (k - 1 - pos)) & 1) as i64;
        }
        apply_startstop(&links, &mut x);
        let val = p.objective_at(&x);
        // Later masks are lexicographically smaller, so only a strict
        // improvement can replace the incumbent.
        if best.is_some_and(|(b, _)| val <= b) || !feasible(p, &x) {
            continue;
        }
        best = Some((val, mask));
    }
    Ok(match best {
        Some((val, mask)) => {
            let assignment = (0..k)
                .map(|pos| ((mask >> (k - 1 - pos)) & 1) as u8)
                .collect();
            SolveResult {
                status: SolveStatus::Optimal,
                assignment: Some(assignment),
                objective_value: Some(val as i64),
                nodes_explored: total,
                best_bound: Some(val as f64),
            }
        }
        None => SolveResult {
            status: SolveStatus::Infeasible,
            assignment: None,
            objective_value: None,
            nodes_explored: total,
            best_bound: None,
        },
    })
}
