//! Dense bounded-variable simplex over the LP relaxation of a
//! [`BinaryProgram`].
//!
//! The tableau is kept in dictionary form: every basic variable is written as
//! `x_B = d + Σ T·x_N` over the current nonbasic variables, with the objective
//! as one extra row. Each constraint row gets a slack `s = b - a·x` bounded to
//! `[0, ∞)` (`<=`) or `[0, 0]` (`=`), so the all-slack basis is a valid start.
//!
//! Cold starts run a primal phase 1 (sum of infeasibilities) followed by
//! primal phase 2. After bound changes the basis is kept; if it is still dual
//! feasible a dual simplex pass restores primal feasibility first. Pricing is
//! Dantzig's rule, falling back to Bland's smallest-index rule whenever a run
//! of degenerate pivots could cycle.

use super::program::{BinaryProgram, Relation};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const DEGENERATE_STREAK: u32 = 50;
const REFRESH_EVERY: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Loc {
    Basic(usize),
    Nonbasic(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration cap hit; the caller should rebuild from scratch.
    Stalled,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pricing {
    Dantzig,
    Bland,
}

pub(crate) struct Simplex {
    n: usize,
    m: usize,
    width: usize,
    tab: Vec<f64>,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
    loc: Vec<Loc>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Bounds implied by singleton rows, before any branching fixings.
    base_lower: Vec<f64>,
    base_upper: Vec<f64>,
    at_upper: Vec<bool>,
    x: Vec<f64>,
    rows: Vec<(Vec<(usize, f64)>, f64, Relation)>,
    cost: Vec<f64>,
    /// Some constraint has no variables and a violated right-hand side.
    trivially_infeasible: bool,
    pivots: u64,
    pub(crate) iteration_cap: u64,
}

impl Simplex {
    /// Builds the relaxation with every variable in `[0, 1]` and the objective
    /// divided by `scale`.
    pub(crate) fn new(p: &BinaryProgram, scale: i64) -> Self {
        let n = p.num_vars;
        let mut base_lower = vec![0.0f64; n];
        let mut base_upper = vec![1.0f64; n];
        let mut rows = Vec::new();
        let mut trivially_infeasible = false;
        for c in &p.constraints {
            match c.terms.len() {
                0 => {
                    let ok = match c.relation {
                        Relation::Le => 0 <= c.rhs,
                        Relation::Eq => c.rhs == 0,
                    };
                    trivially_infeasible |= !ok;
                }
                1 => {
                    let (j, a) = c.terms[0];
                    let v = c.rhs as f64 / a as f64;
                    if c.relation == Relation::Eq || a > 0 {
                        base_upper[j] = base_upper[j].min(v);
                    }
                    if c.relation == Relation::Eq || a < 0 {
                        base_lower[j] = base_lower[j].max(v);
                    }
                }
                _ => {
                    let maxabs = c.terms.iter().map(|t| t.1.abs()).max().unwrap_or(1) as f64;
                    let terms = c.terms.iter().map(|&(j, a)| (j, a as f64 / maxabs)).collect();
                    rows.push((terms, c.rhs as f64 / maxabs, c.relation));
                }
            }
        }
        for j in 0..n {
            if base_lower[j] > base_upper[j] + PRIMAL_TOL {
                trivially_infeasible = true;
            }
        }
        let cost = p.objective.iter().map(|&c| c as f64 / scale as f64).collect();
        let m = rows.len();
        let mut s = Simplex {
            n,
            m,
            width: n + 1,
            tab: Vec::new(),
            basis: Vec::new(),
            nonbasic: Vec::new(),
            loc: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            base_lower,
            base_upper,
            at_upper: Vec::new(),
            x: Vec::new(),
            rows,
            cost,
            trivially_infeasible,
            pivots: 0,
            iteration_cap: 200_000,
        };
        s.cold_start(None);
        s
    }

    /// Resets to the slack basis, keeping the given structural bounds (or the
    /// base bounds when `None`).
    pub(crate) fn cold_start(&mut self, bounds: Option<(Vec<f64>, Vec<f64>)>) {
        let (n, m, width) = (self.n, self.m, self.width);
        self.tab = vec![0.0; (m + 1) * width];
        for (r, (terms, rhs, _)) in self.rows.iter().enumerate() {
            for &(j, a) in terms {
                self.tab[r * width + j] = -a;
            }
            self.tab[r * width + n] = *rhs;
        }
        for j in 0..n {
            self.tab[m * width + j] = self.cost[j];
        }
        self.basis = (n..n + m).collect();
        self.nonbasic = (0..n).collect();
        self.loc = (0..n)
            .map(Loc::Nonbasic)
            .chain((0..m).map(Loc::Basic))
            .collect();
        let (lo, hi) = bounds.unwrap_or_else(|| (self.base_lower.clone(), self.base_upper.clone()));
        self.lower = lo;
        self.upper = hi;
        for (_, _, rel) in &self.rows {
            self.lower.push(0.0);
            self.upper.push(match rel {
                Relation::Le => f64::INFINITY,
                Relation::Eq => 0.0,
            });
        }
        self.at_upper = vec![false; n + m];
        self.x = vec![0.0; n + m];
        for j in 0..n {
            self.x[j] = self.lower[j];
        }
        self.recompute_basics();
    }

    pub(crate) fn base_bounds(&self, j: usize) -> (f64, f64) {
        (self.base_lower[j], self.base_upper[j])
    }

    pub(crate) fn structural_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower[..self.n].to_vec(), self.upper[..self.n].to_vec())
    }

    pub(crate) fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub(crate) fn objective(&self) -> f64 {
        let row = &self.tab[self.m * self.width..];
        row[self.n]
            + self
                .nonbasic
                .iter()
                .enumerate()
                .map(|(c, &k)| row[c] * self.x[k])
                .sum::<f64>()
    }

    /// Changes the bounds of a structural variable, keeping the basis.
    pub(crate) fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        if self.lower[j] == lo && self.upper[j] == hi {
            return;
        }
        self.lower[j] = lo;
        self.upper[j] = hi;
        if let Loc::Nonbasic(c) = self.loc[j] {
            let old = self.x[j];
            let (new, up) = if lo == hi {
                (lo, false)
            } else if old >= hi {
                (hi, true)
            } else if old <= lo {
                (lo, false)
            } else if self.at_upper[j] {
                (hi, true)
            } else {
                (lo, false)
            };
            self.at_upper[j] = up;
            self.x[j] = new;
            let delta = new - old;
            if delta != 0.0 {
                for r in 0..self.m {
                    let a = self.tab[r * self.width + c];
                    if a != 0.0 {
                        self.x[self.basis[r]] += a * delta;
                    }
                }
            }
        }
    }

    fn recompute_basics(&mut self) {
        let w = self.width;
        for r in 0..self.m {
            let row = &self.tab[r * w..(r + 1) * w];
            let mut v = row[self.n];
            for (c, &k) in self.nonbasic.iter().enumerate() {
                if row[c] != 0.0 {
                    v += row[c] * self.x[k];
                }
            }
            self.x[self.basis[r]] = v;
        }
    }

    fn infeasibility(&self, k: usize) -> f64 {
        let v = self.x[k];
        if v < self.lower[k] - PRIMAL_TOL {
            v - self.lower[k]
        } else if v > self.upper[k] + PRIMAL_TOL {
            v - self.upper[k]
        } else {
            0.0
        }
    }

    fn primal_feasible(&self) -> bool {
        self.basis.iter().all(|&k| self.infeasibility(k) == 0.0)
    }

    fn is_fixed(&self, k: usize) -> bool {
        self.upper[k] - self.lower[k] <= PRIMAL_TOL
    }

    fn dual_feasible(&self) -> bool {
        let obj = &self.tab[self.m * self.width..];
        self.nonbasic.iter().enumerate().all(|(c, &k)| {
            self.is_fixed(k)
                || if self.at_upper[k] {
                    obj[c] >= -DUAL_TOL
                } else {
                    obj[c] <= DUAL_TOL
                }
        })
    }

    /// Exchanges basic row `p` with nonbasic column `q`.
    fn pivot(&mut self, p: usize, q: usize) {
        let w = self.width;
        let piv = self.tab[p * w + q];
        let mut nz: Vec<(usize, f64)> = Vec::new();
        {
            let row = &mut self.tab[p * w..(p + 1) * w];
            for (j, v) in row.iter_mut().enumerate() {
                if j == q {
                    *v = 1.0 / piv;
                } else if *v != 0.0 {
                    *v = -*v / piv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                        continue;
                    }
                }
                if *v != 0.0 {
                    nz.push((j, *v));
                }
            }
        }
        for r in 0..=self.m {
            if r == p {
                continue;
            }
            let f = self.tab[r * w + q];
            if f == 0.0 {
                continue;
            }
            self.tab[r * w + q] = 0.0;
            let row = &mut self.tab[r * w..(r + 1) * w];
            for &(j, v) in &nz {
                let nv = row[j] + f * v;
                row[j] = if nv.abs() < DROP_TOL { 0.0 } else { nv };
            }
        }
        let entering = self.nonbasic[q];
        let leaving = self.basis[p];
        self.basis[p] = entering;
        self.nonbasic[q] = leaving;
        self.loc[entering] = Loc::Basic(p);
        self.loc[leaving] = Loc::Nonbasic(q);
        self.pivots += 1;
        if self.pivots.is_multiple_of(REFRESH_EVERY) {
            self.recompute_basics();
        }
    }

    /// Moves nonbasic column `q` by `delta`, updating basic values.
    fn shift(&mut self, q: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        let k = self.nonbasic[q];
        self.x[k] += delta;
        for r in 0..self.m {
            let a = self.tab[r * self.width + q];
            if a != 0.0 {
                self.x[self.basis[r]] += a * delta;
            }
        }
    }

    /// Solves from the current basis and bounds.
    pub(crate) fn optimize(&mut self) -> LpStatus {
        if self.trivially_infeasible {
            return LpStatus::Infeasible;
        }
        for j in 0..self.n {
            if self.lower[j] > self.upper[j] + PRIMAL_TOL {
                return LpStatus::Infeasible;
            }
        }
        let start = self.pivots;
        self.recompute_basics();
        if !self.primal_feasible() && self.dual_feasible() {
            match self.dual_simplex(start) {
                LpStatus::Infeasible => return LpStatus::Infeasible,
                LpStatus::Stalled => return LpStatus::Stalled,
                _ => {}
            }
        }
        self.recompute_basics();
        if !self.primal_feasible() {
            match self.primal(true, start) {
                LpStatus::Optimal => {}
                other => return other,
            }
            self.recompute_basics();
            if !self.primal_feasible() {
                return LpStatus::Infeasible;
            }
        }
        let status = self.primal(false, start);
        self.recompute_basics();
        status
    }

    /// Primal simplex. In phase 1 the objective is the sum of
    /// infeasibilities and `Optimal` means no further reduction is possible.
    fn primal(&mut self, phase_one: bool, start: u64) -> LpStatus {
        let w = self.width;
        let mut pricing = Pricing::Dantzig;
        let mut degenerate = 0u32;
        let mut price = vec![0.0; self.n];
        loop {
            if self.pivots - start > self.iteration_cap {
                return LpStatus::Stalled;
            }
            if phase_one {
                if self.primal_feasible() {
                    return LpStatus::Optimal;
                }
                price.iter_mut().for_each(|v| *v = 0.0);
                for r in 0..self.m {
                    let inf = self.infeasibility(self.basis[r]);
                    if inf == 0.0 {
                        continue;
                    }
                    let sigma = if inf < 0.0 { 1.0 } else { -1.0 };
                    let row = &self.tab[r * w..r * w + self.n];
                    for (c, &a) in row.iter().enumerate() {
                        if a != 0.0 {
                            price[c] += sigma * a;
                        }
                    }
                }
            } else {
                price.copy_from_slice(&self.tab[self.m * w..self.m * w + self.n]);
            }

            // Entering column.
            let mut best: Option<(usize, f64)> = None;
            for (c, &d) in price.iter().enumerate() {
                let k = self.nonbasic[c];
                if self.is_fixed(k) {
                    continue;
                }
                let dir = if !self.at_upper[k] && d > DUAL_TOL {
                    1.0
                } else if self.at_upper[k] && d < -DUAL_TOL {
                    -1.0
                } else {
                    continue;
                };
                match pricing {
                    Pricing::Bland => {
                        if best.is_none_or(|(bc, _)| k < self.nonbasic[bc]) {
                            best = Some((c, dir));
                        }
                    }
                    Pricing::Dantzig => {
                        let better = match best {
                            None => true,
                            Some((bc, _)) => {
                                let (a, b) = (d.abs(), price[bc].abs());
                                a > b || (a == b && k < self.nonbasic[bc])
                            }
                        };
                        if better {
                            best = Some((c, dir));
                        }
                    }
                }
            }
            let Some((q, dir)) = best else {
                return LpStatus::Optimal;
            };
            let entering = self.nonbasic[q];

            // Ratio test; ties go to the smallest variable index.
            let mut step = self.upper[entering] - self.lower[entering];
            let mut leave: Option<(usize, bool)> = None;
            for r in 0..self.m {
                let a = self.tab[r * w + q] * dir;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let k = self.basis[r];
                let (v, lo, hi) = (self.x[k], self.lower[k], self.upper[k]);
                let (limit, to_upper) = if phase_one && v < lo - PRIMAL_TOL {
                    if a > 0.0 {
                        ((lo - v) / a, false)
                    } else {
                        continue;
                    }
                } else if phase_one && v > hi + PRIMAL_TOL {
                    if a < 0.0 {
                        ((v - hi) / -a, true)
                    } else {
                        continue;
                    }
                } else if a > 0.0 {
                    if hi.is_infinite() {
                        continue;
                    }
                    (((hi - v) / a).max(0.0), true)
                } else {
                    (((v - lo) / -a).max(0.0), false)
                };
                let take = match leave {
                    None => limit < step,
                    Some((br, _)) => {
                        limit < step - 1e-12 || (limit <= step + 1e-12 && k < self.basis[br])
                    }
                };
                if take {
                    step = step.min(limit);
                    leave = Some((r, to_upper));
                }
            }
            if step.is_infinite() {
                return LpStatus::Unbounded;
            }
            if step <= 1e-12 {
                degenerate += 1;
                if degenerate >= DEGENERATE_STREAK {
                    pricing = Pricing::Bland;
                }
            } else {
                degenerate = 0;
                pricing = Pricing::Dantzig;
            }
            self.shift(q, dir * step);
            match leave {
                None => {
                    // Bound flip.
                    let up = dir > 0.0;
                    self.at_upper[entering] = up;
                    self.x[entering] = if up {
                        self.upper[entering]
                    } else {
                        self.lower[entering]
                    };
                    self.pivots += 1;
                }
                Some((p, to_upper)) => {
                    let k = self.basis[p];
                    self.x[k] = if to_upper { self.upper[k] } else { self.lower[k] };
                    self.at_upper[k] = to_upper && self.upper[k].is_finite();
                    self.pivot(p, q);
                }
            }
        }
    }

    /// Dual simplex from a dual feasible basis.
    fn dual_simplex(&mut self, start: u64) -> LpStatus {
        let w = self.width;
        let mut pricing = Pricing::Dantzig;
        let mut degenerate = 0u32;
        loop {
            if self.pivots - start > self.iteration_cap {
                return LpStatus::Stalled;
            }
            let mut pick: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let k = self.basis[r];
                let inf = self.infeasibility(k);
                if inf == 0.0 {
                    continue;
                }
                let better = match (pick, pricing) {
                    (None, _) => true,
                    (Some((br, _)), Pricing::Bland) => k < self.basis[br],
                    (Some((br, bi)), Pricing::Dantzig) => {
                        inf.abs() > bi.abs() || (inf.abs() == bi.abs() && k < self.basis[br])
                    }
                };
                if better {
                    pick = Some((r, inf));
                }
            }
            let Some((p, inf)) = pick else {
                return LpStatus::Optimal;
            };
            let leaving = self.basis[p];
            let raise = inf < 0.0;
            let target = if raise {
                self.lower[leaving]
            } else {
                self.upper[leaving]
            };

            let obj = self.m * w;
            let mut best: Option<(usize, f64)> = None;
            for c in 0..self.n {
                let a = self.tab[p * w + c];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let k = self.nonbasic[c];
                if self.is_fixed(k) {
                    continue;
                }
                let up = self.at_upper[k];
                let usable = if raise {
                    (a > 0.0 && !up) || (a < 0.0 && up)
                } else {
                    (a < 0.0 && !up) || (a > 0.0 && up)
                };
                if !usable {
                    continue;
                }
                let ratio = self.tab[obj + c].abs() / a.abs();
                let take = match best {
                    None => true,
                    Some((bc, br)) => {
                        ratio < br - 1e-12 || (ratio <= br + 1e-12 && k < self.nonbasic[bc])
                    }
                };
                if take {
                    best = Some((c, ratio));
                }
            }
            let Some((q, ratio)) = best else {
                return LpStatus::Infeasible;
            };
            if ratio <= 1e-12 {
                degenerate += 1;
                if degenerate >= DEGENERATE_STREAK {
                    pricing = Pricing::Bland;
                }
            } else {
                degenerate = 0;
                pricing = Pricing::Dantzig;
            }
            let a = self.tab[p * w + q];
            let delta = (target - self.x[leaving]) / a;
            self.shift(q, delta);
            self.x[leaving] = target;
            self.at_upper[leaving] = !raise && self.upper[leaving].is_finite();
            self.pivot(p, q);
        }
    }
}
