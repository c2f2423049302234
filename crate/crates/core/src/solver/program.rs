//! Generic 0-1 linear maximization programs with integer data.
//!
//! The text dump is one item per line:
//!
//! ```text
//! binprog 3
//! var x0 u 0 0
//! var x1 v 0 0
//! var x2 w 0 0
//! max: +1 x0
//! c0: +1 x1 -1 x2 = 0
//! c1: +2 x0 <= 1
//! end
//! ```
//!
//! House and step indices in `var` lines are zero-based.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
        })
    }
}

/// `Σ coef·x  REL  rhs`, with sparse terms sorted by variable index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub terms: Vec<(usize, i64)>,
    pub relation: Relation,
    pub rhs: i64,
}

impl Constraint {
    /// Merges duplicate variables and drops zero coefficients.
    pub fn new(mut terms: Vec<(usize, i64)>, relation: Relation, rhs: i64) -> Self {
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, i64)> = Vec::with_capacity(terms.len());
        for (j, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|t| t.1 != 0);
        Self {
            terms: merged,
            relation,
            rhs,
        }
    }

    pub fn le(terms: Vec<(usize, i64)>, rhs: i64) -> Self {
        Self::new(terms, Relation::Le, rhs)
    }

    pub fn eq(terms: Vec<(usize, i64)>, rhs: i64) -> Self {
        Self::new(terms, Relation::Eq, rhs)
    }

    pub fn lhs(&self, x: &[i64]) -> i128 {
        self.terms
            .iter()
            .map(|&(j, a)| a as i128 * x[j] as i128)
            .sum()
    }

    pub fn is_satisfied(&self, x: &[i64]) -> bool {
        let lhs = self.lhs(x);
        match self.relation {
            Relation::Le => lhs <= self.rhs as i128,
            Relation::Eq => lhs == self.rhs as i128,
        }
    }
}

/// What a variable stands for: switch state, start-up or shut-down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    U,
    V,
    W,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::U => "u",
            Role::V => "v",
            Role::W => "w",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarLabel {
    pub role: Role,
    pub house: usize,
    pub step: usize,
}

/// `max objective·x` over binary x subject to integer linear constraints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryProgram {
    pub num_vars: usize,
    pub objective: Vec<i64>,
    pub constraints: Vec<Constraint>,
    pub labels: Vec<VarLabel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StartStopLink {
    pub var: usize,
    pub role: Role,
    pub cur: Option<usize>,
    pub prev: Option<usize>,
}

pub fn apply_startstop(links: &[StartStopLink], x: &mut [i64]) {
    for l in links {
        let cur = l.cur.map_or(0, |j| x[j]);
        let prev = l.prev.map_or(0, |j| x[j]);
        x[l.var] = match l.role {
            Role::V => (cur - prev).max(0),
            Role::W => (prev - cur).max(0),
            Role::U => x[l.var],
        };
    }
}

impl BinaryProgram {
    pub fn objective_at(&self, x: &[i64]) -> i128 {
        self.objective
            .iter()
            .zip(x)
            .map(|(&c, &v)| c as i128 * v as i128)
            .sum()
    }

    /// Indices of u-variables in (house, step) order.
    pub fn u_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.num_vars)
            .filter(|&j| self.labels[j].role == Role::U)
            .collect();
        idx.sort_by_key(|&j| (self.labels[j].house, self.labels[j].step));
        idx
    }

    /// Structural checks: lengths agree, indices in range, labels unique.
    pub fn check_well_formed(&self) -> Result<(), String> {
        if self.objective.len() != self.num_vars || self.labels.len() != self.num_vars {
            return Err("objective/labels length differs from num_vars".into());
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if let Some(&(j, _)) = c.terms.iter().find(|t| t.0 >= self.num_vars) {
                return Err(format!("constraint {k} references x{j}"));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for l in &self.labels {
            if !seen.insert((l.role, l.house, l.step)) {
                return Err(format!(
                    "label {} {} {} used twice",
                    l.role.as_str(),
                    l.house,
                    l.step
                ));
            }
        }
        Ok(())
    }

    /// For each v/w variable: its index, role, and the u indices of the same
    /// house at that step and the step before (absent when not in the
    /// program; at step 0 the previous state is the current one).
    pub fn startstop_links(&self) -> Vec<StartStopLink> {
        let mut u = std::collections::HashMap::new();
        for (j, l) in self.labels.iter().enumerate() {
            if l.role == Role::U {
                u.insert((l.house, l.step), j);
            }
        }
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.role != Role::U)
            .map(|(j, l)| {
                let cur = u.get(&(l.house, l.step)).copied();
                let prev = if l.step == 0 {
                    cur
                } else {
                    u.get(&(l.house, l.step - 1)).copied()
                };
                StartStopLink {
                    var: j,
                    role: l.role,
                    cur,
                    prev,
                }
            })
            .collect()
    }

    /// Fills v/w values from u according to the start-up/shut-down
    /// definitions; u values are taken from `x` as given.
    pub fn complete_startstop(&self, x: &mut [i64]) {
        apply_startstop(&self.startstop_links(), x);
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "binprog {}", self.num_vars).unwrap();
        for (j, l) in self.labels.iter().enumerate() {
            writeln!(s, "var x{j} {} {} {}", l.role.as_str(), l.house, l.step).unwrap();
        }
        s.push_str("max:");
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0 {
                write!(s, " {c:+} x{j}").unwrap();
            }
        }
        s.push('\n');
        for (k, c) in self.constraints.iter().enumerate() {
            write!(s, "c{k}:").unwrap();
            for &(j, a) in &c.terms {
                write!(s, " {a:+} x{j}").unwrap();
            }
            writeln!(s, " {} {}", c.relation, c.rhs).unwrap();
        }
        s.push_str("end\n");
        s
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ProgramParseError {
    pub line: usize,
    pub msg: String,
}

fn var_index(tok: &str, line: usize) -> Result<usize, ProgramParseError> {
    tok.strip_prefix('x')
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| ProgramParseError {
            line,
            msg: format!("bad variable `{tok}`"),
        })
}

fn parse_terms(toks: &[&str], line: usize) -> Result<Vec<(usize, i64)>, ProgramParseError> {
    if !toks.len().is_multiple_of(2) {
        return Err(ProgramParseError {
            line,
            msg: "terms must be `coef xN` pairs".into(),
        });
    }
    toks.chunks(2)
        .map(|pair| {
            let a: i64 = pair[0].parse().map_err(|_| ProgramParseError {
                line,
                msg: format!("bad coefficient `{}`", pair[0]),
            })?;
            Ok((var_index(pair[1], line)?, a))
        })
        .collect()
}

impl FromStr for BinaryProgram {
    type Err = ProgramParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |line: usize, msg: &str| ProgramParseError {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (ln, first) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let num_vars: usize = first
            .strip_prefix("binprog ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| err(ln, "expected `binprog N`"))?;

        let mut labels: Vec<Option<VarLabel>> = vec![None; num_vars];
        let mut objective = vec![0i64; num_vars];
        let mut constraints = Vec::new();
        let mut ended = false;
        for (ln, line) in lines {
            if ended {
                return Err(err(ln, "content after `end`"));
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[0] {
                "end" => ended = true,
                "var" => {
                    if toks.len() != 5 {
                        return Err(err(ln, "expected `var xJ ROLE HOUSE STEP`"));
                    }
                    let j = var_index(toks[1], ln)?;
                    let role = match toks[2] {
                        "u" => Role::U,
                        "v" => Role::V,
                        "w" => Role::W,
                        _ => return Err(err(ln, "role must be u, v or w")),
                    };
                    let house = toks[3].parse().map_err(|_| err(ln, "bad house"))?;
                    let step = toks[4].parse().map_err(|_| err(ln, "bad step"))?;
                    let slot = labels.get_mut(j).ok_or_else(|| err(ln, "index out of range"))?;
                    *slot = Some(VarLabel { role, house, step });
                }
                "max:" => {
                    for (j, a) in parse_terms(&toks[1..], ln)? {
                        *objective
                            .get_mut(j)
                            .ok_or_else(|| err(ln, "index out of range"))? += a;
                    }
                }
                head if head.starts_with('c') && head.ends_with(':') => {
                    if toks.len() < 3 {
                        return Err(err(ln, "constraint needs `REL rhs`"));
                    }
                    let rhs: i64 = toks[toks.len() - 1]
                        .parse()
                        .map_err(|_| err(ln, "bad right-hand side"))?;
                    let relation = match toks[toks.len() - 2] {
                        "<=" => Relation::Le,
                        "=" => Relation::Eq,
                        _ => return Err(err(ln, "relation must be <= or =")),
                    };
                    let terms = parse_terms(&toks[1..toks.len() - 2], ln)?;
                    if terms.iter().any(|t| t.0 >= num_vars) {
                        return Err(err(ln, "index out of range"));
                    }
                    constraints.push(Constraint::new(terms, relation, rhs));
                }
                _ => return Err(err(ln, "unrecognized line")),
            }
        }
        if !ended {
            return Err(err(0, "missing `end`"));
        }
        let labels = labels
            .into_iter()
            .enumerate()
            .map(|(j, l)| l.ok_or_else(|| err(0, &format!("x{j} has no label"))))
            .collect::<Result<Vec<_>, _>>()?;
        let p = BinaryProgram {
            num_vars,
            objective,
            constraints,
            labels,
        };
        p.check_well_formed().map_err(|m| err(0, &m))?;
        Ok(p)
    }
}
