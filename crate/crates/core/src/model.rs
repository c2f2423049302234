//! Binary scheduling programs for one day of an islanded microgrid.
//!
//! Variables are laid out as u (switch state), then v (start-ups), then w
//! (shut-downs), each block in (house, step) order. Supplied load is not a
//! variable: it is `u·l` and is rebuilt after solving.
//!
//! Minimum up/down time uses the standard inequalities
//! `Σ_{window} v ≤ u_t` and `Σ_{window} w ≤ 1 − u_t` over windows truncated
//! at the start of the day. [`UpDownForm::Literal`] keeps the opposite-sign
//! variant (`u_t ≤ Σ v`, `1 − u_t ≤ Σ w`, only for `t ≥ m`) for comparison.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{validate_day, DayInstance};
use crate::matrix::Matrix;
use crate::solver::{BinaryProgram, Constraint, Role, VarLabel};

pub const DEFAULT_WEIGHT_SCALE: i64 = 1_000_000;
pub const DEFAULT_MIN_UP: usize = 3;
pub const DEFAULT_MIN_DOWN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    A,
    B,
    C,
    APlus,
    BPlus,
    CPlus,
    /// Isolated self-consumption: every house solved alone under kind C.
    SelfConsumption,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::A,
        StrategyKind::B,
        StrategyKind::C,
        StrategyKind::APlus,
        StrategyKind::BPlus,
        StrategyKind::CPlus,
        StrategyKind::SelfConsumption,
    ];

    pub fn requires_daily_connection(self) -> bool {
        matches!(self, StrategyKind::A | StrategyKind::APlus)
    }

    pub fn is_weighted(self) -> bool {
        matches!(
            self,
            StrategyKind::APlus | StrategyKind::BPlus | StrategyKind::CPlus
        )
    }

    /// Energy objective (C family) rather than on-step count (A/B family).
    pub fn counts_energy(self) -> bool {
        matches!(
            self,
            StrategyKind::C | StrategyKind::CPlus | StrategyKind::SelfConsumption
        )
    }

    pub fn unweighted(self) -> StrategyKind {
        match self {
            StrategyKind::APlus => StrategyKind::A,
            StrategyKind::BPlus => StrategyKind::B,
            StrategyKind::CPlus => StrategyKind::C,
            other => other,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::A => "A",
            StrategyKind::B => "B",
            StrategyKind::C => "C",
            StrategyKind::APlus => "A+",
            StrategyKind::BPlus => "B+",
            StrategyKind::CPlus => "C+",
            StrategyKind::SelfConsumption => "SELF",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown strategy `{0}` (expected A, B, C, A+, B+, C+ or SELF)")]
pub struct UnknownStrategy(pub String);

impl FromStr for StrategyKind {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "A" => StrategyKind::A,
            "B" => StrategyKind::B,
            "C" => StrategyKind::C,
            "A+" | "A_PLUS" => StrategyKind::APlus,
            "B+" | "B_PLUS" => StrategyKind::BPlus,
            "C+" | "C_PLUS" => StrategyKind::CPlus,
            "SELF" => StrategyKind::SelfConsumption,
            _ => return Err(UnknownStrategy(s.to_string())),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UpDownForm {
    #[default]
    Corrected,
    Literal,
}

/// Where per-house fairness weights come from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightSource {
    /// Daily PV generation over daily load, quantized to `1/weight_scale`.
    #[default]
    PvToLoadRatio,
    /// Every house weighted `weight_scale`.
    Uniform,
    /// Explicit per-house integer weights.
    Fixed(Vec<i64>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub min_up: usize,
    pub min_down: usize,
    pub weight_scale: i64,
    pub weights: WeightSource,
    pub updown: UpDownForm,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind, min_up: usize, min_down: usize) -> Self {
        Self {
            kind,
            min_up,
            min_down,
            weight_scale: DEFAULT_WEIGHT_SCALE,
            weights: WeightSource::default(),
            updown: UpDownForm::default(),
        }
    }

    pub fn with_kind(&self, kind: StrategyKind) -> Self {
        Self {
            kind,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid day: {0}")]
    InvalidDay(String),
    #[error("minimum up time {min_up} / down time {min_down} must be within 1..={steps}")]
    UpDownRange {
        min_up: usize,
        min_down: usize,
        steps: usize,
    },
    #[error("weight scale must be positive")]
    WeightScale,
    #[error("{0} fixed weights given for {1} houses")]
    WeightCount(usize, usize),
    #[error("self-consumption is solved one house at a time")]
    SelfConsumption,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Rounds `num/den` to the nearest integer, ties to even. `den > 0`.
pub(crate) fn round_half_even(num: i128, den: i128) -> i128 {
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// One weight per house: `round_half_even(scale · Σg / Σl)`, or 0 for a
/// house without load.
pub fn fairness_weights(d: &DayInstance, scale: i64) -> Vec<i64> {
    (0..d.num_houses())
        .map(|i| {
            let load = d.load.row_sum(i) as i128;
            if load == 0 {
                return 0;
            }
            let gen = d.gen.row_sum(i) as i128;
            round_half_even(scale as i128 * gen, load) as i64
        })
        .collect()
}

/// Weights actually used by a weighted strategy.
pub fn resolve_weights(d: &DayInstance, s: &StrategySpec) -> Result<Vec<i64>, ModelError> {
    if s.weight_scale <= 0 {
        return Err(ModelError::WeightScale);
    }
    let n = d.num_houses();
    match &s.weights {
        WeightSource::PvToLoadRatio => Ok(fairness_weights(d, s.weight_scale)),
        WeightSource::Uniform => Ok(vec![s.weight_scale; n]),
        WeightSource::Fixed(w) if w.len() == n => Ok(w.clone()),
        WeightSource::Fixed(w) => Err(ModelError::WeightCount(w.len(), n)),
    }
}

/// Objective coefficient on `u_{i,t}` for the given strategy.
pub(crate) fn objective_coefficients(
    d: &DayInstance,
    s: &StrategySpec,
) -> Result<Matrix<i64>, ModelError> {
    let (n, t) = (d.num_houses(), d.num_steps());
    let weights = if s.kind.is_weighted() {
        Some(resolve_weights(d, s)?)
    } else {
        None
    };
    let mut c = Matrix::zeros(n, t);
    for i in 0..n {
        for k in 0..t {
            let base = if s.kind.counts_energy() {
                *d.load.get(i, k)
            } else {
                1
            };
            let factor = match &weights {
                Some(w) => w[i],
                None if s.kind.counts_energy() => 1,
                None => s.weight_scale,
            };
            c.set(i, k, base * factor);
        }
    }
    Ok(c)
}

fn check_spec(d: &DayInstance, s: &StrategySpec) -> Result<(), ModelError> {
    let v = validate_day(d);
    if !v.is_empty() {
        let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
        return Err(ModelError::InvalidDay(msgs.join("; ")));
    }
    let steps = d.num_steps();
    if s.min_up == 0 || s.min_down == 0 || s.min_up > steps || s.min_down > steps {
        return Err(ModelError::UpDownRange {
            min_up: s.min_up,
            min_down: s.min_down,
            steps,
        });
    }
    if s.weight_scale <= 0 {
        return Err(ModelError::WeightScale);
    }
    Ok(())
}

/// Variable index helpers for an N×T day.
#[derive(Clone, Copy, Debug)]
pub struct VarLayout {
    pub houses: usize,
    pub steps: usize,
}

impl VarLayout {
    pub fn u(&self, i: usize, t: usize) -> usize {
        i * self.steps + t
    }
    pub fn v(&self, i: usize, t: usize) -> usize {
        self.houses * self.steps + i * self.steps + t
    }
    pub fn w(&self, i: usize, t: usize) -> usize {
        2 * self.houses * self.steps + i * self.steps + t
    }
    pub fn num_vars(&self) -> usize {
        3 * self.houses * self.steps
    }
}

fn window(t: usize, m: usize) -> std::ops::RangeInclusive<usize> {
    (t + 1).saturating_sub(m)..=t
}

/// Steps too close to the end of the day for a run of `m` to fit.
fn late_steps(steps: usize, m: usize) -> std::ops::Range<usize> {
    (steps + 1).saturating_sub(m).max(1)..steps
}

/// The sharing program for strategies A, B, C and their weighted variants.
pub fn build_program(d: &DayInstance, s: &StrategySpec) -> Result<BinaryProgram, ModelError> {
    if s.kind == StrategyKind::SelfConsumption {
        return Err(ModelError::SelfConsumption);
    }
    check_spec(d, s)?;
    let (n, steps) = (d.num_houses(), d.num_steps());
    let lay = VarLayout { houses: n, steps };

    let mut labels = Vec::with_capacity(lay.num_vars());
    for role in [Role::U, Role::V, Role::W] {
        for house in 0..n {
            for step in 0..steps {
                labels.push(VarLabel { role, house, step });
            }
        }
    }

    let mut cons = Vec::new();
    for i in 0..n {
        for t in 0..steps {
            match s.updown {
                UpDownForm::Corrected => {
                    let mut up: Vec<_> = window(t, s.min_up).map(|h| (lay.v(i, h), 1)).collect();
                    up.push((lay.u(i, t), -1));
                    cons.push(Constraint::le(up, 0));
                    let mut down: Vec<_> =
                        window(t, s.min_down).map(|h| (lay.w(i, h), 1)).collect();
                    down.push((lay.u(i, t), 1));
                    cons.push(Constraint::le(down, 1));
                }
                UpDownForm::Literal => {
                    if t + 1 >= s.min_up {
                        let mut up: Vec<_> =
                            window(t, s.min_up).map(|h| (lay.v(i, h), -1)).collect();
                        up.push((lay.u(i, t), 1));
                        cons.push(Constraint::le(up, 0));
                    }
                    if t + 1 >= s.min_down {
                        let mut down: Vec<_> =
                            window(t, s.min_down).map(|h| (lay.w(i, h), -1)).collect();
                        down.push((lay.u(i, t), -1));
                        cons.push(Constraint::le(down, -1));
                    }
                }
            }
        }
        cons.push(Constraint::eq(vec![(lay.v(i, 0), 1)], 0));
        cons.push(Constraint::eq(vec![(lay.w(i, 0), 1)], 0));
        if s.updown == UpDownForm::Corrected {
            // A start-up (shut-down) must leave room for a full run before
            // the day ends.
            for t in late_steps(steps, s.min_up) {
                cons.push(Constraint::eq(vec![(lay.v(i, t), 1)], 0));
            }
            for t in late_steps(steps, s.min_down) {
                cons.push(Constraint::eq(vec![(lay.w(i, t), 1)], 0));
            }
        }
        for t in 1..steps {
            cons.push(Constraint::eq(
                vec![
                    (lay.v(i, t), 1),
                    (lay.w(i, t), -1),
                    (lay.u(i, t), -1),
                    (lay.u(i, t - 1), 1),
                ],
                0,
            ));
            cons.push(Constraint::le(vec![(lay.v(i, t), 1), (lay.w(i, t), 1)], 1));
        }
    }
    for t in 0..steps {
        let terms = (0..n).map(|i| (lay.u(i, t), *d.load.get(i, t))).collect();
        cons.push(Constraint::le(terms, d.gen.col_sum(t)));
    }
    if s.kind.requires_daily_connection() {
        for i in 0..n {
            let terms = (0..steps).map(|t| (lay.u(i, t), -1)).collect();
            cons.push(Constraint::le(terms, -1));
        }
    }

    let coef = objective_coefficients(d, s)?;
    let mut objective = vec![0i64; lay.num_vars()];
    for i in 0..n {
        for t in 0..steps {
            objective[lay.u(i, t)] = *coef.get(i, t);
        }
    }
    Ok(BinaryProgram {
        num_vars: lay.num_vars(),
        objective,
        constraints: cons,
        labels,
    })
}

/// One kind-C program per house, each seeing only that house's load and PV.
pub fn self_consumption_programs(
    d: &DayInstance,
    s: &StrategySpec,
) -> Result<Vec<BinaryProgram>, ModelError> {
    check_spec(d, s)?;
    let spec = s.with_kind(StrategyKind::C);
    (0..d.num_houses())
        .map(|i| build_program(&d.house(i), &spec))
        .collect()
}

/// Binary N×T switching matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwitchMatrix(pub Matrix<u8>);

impl SwitchMatrix {
    pub fn zeros(houses: usize, steps: usize) -> Self {
        Self(Matrix::zeros(houses, steps))
    }

    pub fn from_rows(rows: Vec<Vec<u8>>) -> Option<Self> {
        let m = Matrix::from_rows(rows)?;
        m.as_slice().iter().all(|&b| b <= 1).then_some(Self(m))
    }

    /// From a u-assignment in (house, step) order.
    pub fn from_assignment(houses: usize, steps: usize, u: &[u8]) -> Option<Self> {
        if u.len() != houses * steps {
            return None;
        }
        Self::from_rows(u.chunks(steps.max(1)).map(<[u8]>::to_vec).collect::<Vec<_>>())
            .or_else(|| (houses == 0 || steps == 0).then(|| Self::zeros(houses, steps)))
    }

    pub fn houses(&self) -> usize {
        self.0.rows()
    }

    pub fn steps(&self) -> usize {
        self.0.cols()
    }

    pub fn get(&self, i: usize, t: usize) -> u8 {
        *self.0.get(i, t)
    }

    pub fn row(&self, i: usize) -> &[u8] {
        self.0.row(i)
    }

    pub fn assignment(&self) -> Vec<u8> {
        self.0.as_slice().to_vec()
    }

    /// Stacks rows of several switch matrices with equal step counts.
    pub fn stack(parts: &[SwitchMatrix]) -> Option<Self> {
        let rows: Vec<Vec<u8>> = parts.iter().flat_map(|p| p.0.row_vecs()).collect();
        if rows.is_empty() {
            return Some(Self::zeros(0, 0));
        }
        Self::from_rows(rows)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartStopMatrices {
    pub v: Matrix<u8>,
    pub w: Matrix<u8>,
}

pub fn derive_startstop(u: &SwitchMatrix) -> StartStopMatrices {
    let (n, steps) = (u.houses(), u.steps());
    let mut v = Matrix::zeros(n, steps);
    let mut w = Matrix::zeros(n, steps);
    for i in 0..n {
        for t in 1..steps {
            let (prev, cur) = (u.get(i, t - 1), u.get(i, t));
            v.set(i, t, cur.saturating_sub(prev));
            w.set(i, t, prev.saturating_sub(cur));
        }
    }
    StartStopMatrices { v, w }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintFamily {
    Power,
    MinUp,
    MinDown,
    Linking,
    DailyConnection,
    Dimension,
}

/// A violated constraint; house and step are zero-based, printed one-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub family: ConstraintFamily,
    pub house: Option<usize>,
    pub step: Option<usize>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.family {
            ConstraintFamily::Power => "power",
            ConstraintFamily::MinUp => "min-up",
            ConstraintFamily::MinDown => "min-down",
            ConstraintFamily::Linking => "start/stop linking",
            ConstraintFamily::DailyConnection => "minimum daily connection",
            ConstraintFamily::Dimension => "dimension mismatch",
        };
        f.write_str(name)?;
        if let Some(i) = self.house {
            write!(f, ", house {}", i + 1)?;
        }
        if let Some(t) = self.step {
            write!(f, ", step {}", t + 1)?;
        }
        Ok(())
    }
}

/// Evaluates every constraint of the strategy's program at `u` (with v/w
/// derived from it) in exact integer arithmetic. For self-consumption the
/// power constraint is per house.
pub fn check_feasible(u: &SwitchMatrix, d: &DayInstance, s: &StrategySpec) -> Vec<Violation> {
    let (n, steps) = (d.num_houses(), d.num_steps());
    let viol = |family, house, step| Violation { family, house, step };
    if u.houses() != n || u.steps() != steps {
        return vec![viol(ConstraintFamily::Dimension, None, None)];
    }
    let ss = derive_startstop(u);
    let mut out = Vec::new();
    for i in 0..n {
        for t in 0..steps {
            let ui = u.get(i, t) as i64;
            let sum_v: i64 = window(t, s.min_up).map(|h| *ss.v.get(i, h) as i64).sum();
            let sum_w: i64 = window(t, s.min_down).map(|h| *ss.w.get(i, h) as i64).sum();
            let (v, w) = (*ss.v.get(i, t) as i64, *ss.w.get(i, t) as i64);
            let (up_ok, down_ok) = match s.updown {
                UpDownForm::Corrected => (
                    sum_v <= ui && (v == 0 || !late_steps(steps, s.min_up).contains(&t)),
                    sum_w <= 1 - ui && (w == 0 || !late_steps(steps, s.min_down).contains(&t)),
                ),
                UpDownForm::Literal => (
                    t + 1 < s.min_up || ui <= sum_v,
                    t + 1 < s.min_down || 1 - ui <= sum_w,
                ),
            };
            if !up_ok {
                out.push(viol(ConstraintFamily::MinUp, Some(i), Some(t)));
            }
            if !down_ok {
                out.push(viol(ConstraintFamily::MinDown, Some(i), Some(t)));
            }
            let linked = if t == 0 {
                v == 0 && w == 0
            } else {
                v - w == ui - u.get(i, t - 1) as i64 && v + w <= 1
            };
            if !linked {
                out.push(viol(ConstraintFamily::Linking, Some(i), Some(t)));
            }
        }
    }
    for t in 0..steps {
        if s.kind == StrategyKind::SelfConsumption {
            for i in 0..n {
                if u.get(i, t) as i64 * d.load.get(i, t) > *d.gen.get(i, t) {
                    out.push(viol(ConstraintFamily::Power, Some(i), Some(t)));
                }
            }
        } else {
            let used: i128 = (0..n)
                .map(|i| u.get(i, t) as i128 * *d.load.get(i, t) as i128)
                .sum();
            if used > d.gen.col_sum(t) as i128 {
                out.push(viol(ConstraintFamily::Power, None, Some(t)));
            }
        }
    }
    if s.kind.requires_daily_connection() {
        for i in 0..n {
            if u.row(i).iter().all(|&b| b == 0) {
                out.push(viol(ConstraintFamily::DailyConnection, Some(i), None));
            }
        }
    }
    out
}

/// A solved day under one strategy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub u: SwitchMatrix,
    pub startstop: StartStopMatrices,
    pub supplied: Matrix<i64>,
    pub objective_value: i64,
    pub strategy: StrategySpec,
}

impl Schedule {
    pub fn new(
        u: SwitchMatrix,
        d: &DayInstance,
        strategy: StrategySpec,
        objective_value: i64,
    ) -> Result<Self, ModelError> {
        let supplied = crate::metrics::supplied_load(&u, &d.load)?;
        Ok(Self {
            startstop: derive_startstop(&u),
            u,
            supplied,
            objective_value,
            strategy,
        })
    }
}
