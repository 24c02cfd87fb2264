//! Bounded-variable revised simplex with exact vertex duals.
//!
//! The program is brought to the form `A x - r = 0` with one logical variable `r_i` per row,
//! bounded according to the row sense. The basis inverse is kept explicitly (column-major)
//! and updated by elementary row operations; it is rebuilt periodically by a block
//! factorization that exploits the unit columns of basic logicals. Phase 1 minimizes the sum
//! of artificial variables added for rows the starting point violates.
//!
//! Row duals are reported as `∂objective/∂rhs`. For the balance rows of the equilibrium
//! model that is the marginal price of electricity, non-negative whenever the price-setting
//! unit has a non-negative marginal cost.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LinearProgram, LpError, Sense, Tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility, relative to `max(1, |bound|)`.
    pub feasibility: f64,
    /// Reduced-cost tolerance, relative to `max(1, |c_j|)`.
    pub optimality: f64,
    /// Smallest acceptable pivot magnitude.
    pub pivot: f64,
    pub max_iterations: usize,
    /// Minimum updates between refactorizations; large bases use half their row count, since
    /// the dense rebuild is cubic.
    pub refactor_interval: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-9,
            optimality: 1e-9,
            pivot: 1e-9,
            max_iterations: 2_000_000,
            refactor_interval: 100,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub phase1_iterations: usize,
    pub refactorizations: usize,
    pub wall_time_secs: f64,
}

/// Primal and dual result of a solve, aligned with the columns and rows of the program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// `∂objective/∂rhs` per row.
    pub dual: Vec<f64>,
    /// `c_j - Σ_i dual_i a_ij` per column.
    pub reduced_costs: Vec<f64>,
    pub stats: SolverStats,
}

impl Solution {
    fn empty(status: Status, lp: &LinearProgram, stats: SolverStats) -> Self {
        Solution {
            status,
            objective: f64::NAN,
            primal: vec![f64::NAN; lp.num_columns()],
            dual: vec![f64::NAN; lp.num_rows()],
            reduced_costs: vec![f64::NAN; lp.num_columns()],
            stats,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, lp: &LinearProgram, tag: &Tag) -> Option<f64> {
        lp.column_index(tag).map(|c| self.primal[c])
    }

    pub fn row_dual(&self, lp: &LinearProgram, tag: &Tag) -> Option<f64> {
        lp.row_index(tag).map(|r| self.dual[r])
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid program: {0}")]
    Structure(#[from] LpError),
    #[error("numerical breakdown after {iterations} iterations: {reason} (residual {residual:e})")]
    Numerical {
        iterations: usize,
        reason: &'static str,
        residual: f64,
    },
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("solution file: {0}")]
    Io(#[from] io::Error),
    #[error("solution file line {line}: unmatched tag `{name}`")]
    UnmatchedTag { line: usize, name: String },
    #[error("solution file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("solution file has no dual section; it cannot be used for price or theorem checks")]
    MissingDuals,
    #[error("solution file lacks a value for `{0}`")]
    MissingEntry(String),
}

/// Solve to optimality with the bundled simplex.
pub fn solve(lp: &LinearProgram, tol: &Tolerances) -> Result<Solution, SolveError> {
    lp.check()?;
    let start = Instant::now();
    let mut spx = Simplex::new(lp, *tol);
    let status = spx.run()?;
    let mut stats = SolverStats {
        iterations: spx.iterations,
        phase1_iterations: spx.phase1_iterations,
        refactorizations: spx.refactorizations,
        wall_time_secs: 0.0,
    };
    let sol = match status {
        Status::Optimal => {
            let primal = spx.x[..lp.num_columns()].to_vec();
            let dual = spx.y.clone();
            let reduced_costs = reduced_costs(lp, &dual);
            stats.wall_time_secs = start.elapsed().as_secs_f64();
            Solution {
                status,
                objective: lp.objective_value(&primal),
                primal,
                dual,
                reduced_costs,
                stats,
            }
        }
        other => {
            stats.wall_time_secs = start.elapsed().as_secs_f64();
            Solution::empty(other, lp, stats)
        }
    };
    Ok(sol)
}

/// `c - Aᵀ y`.
pub fn reduced_costs(lp: &LinearProgram, dual: &[f64]) -> Vec<f64> {
    let aty = lp.transpose_product(dual);
    lp.columns().iter().zip(aty).map(|(c, v)| c.cost - v).collect()
}

struct Csc {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Csc {
    fn from_lp(lp: &LinearProgram) -> Self {
        let n = lp.num_columns();
        let mut counts = vec![0usize; n + 1];
        for &(_, c, _) in lp.entries() {
            counts[c + 1] += 1;
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let mut fill = counts.clone();
        let nnz = lp.entries().len();
        let mut idx = vec![0; nnz];
        let mut val = vec![0.0; nnz];
        // entries keep insertion order within a column, which fixes the pivoting sequence
        for &(r, c, v) in lp.entries() {
            idx[fill[c]] = r;
            val[fill[c]] = v;
            fill[c] += 1;
        }
        Csc { ptr: counts, idx, val }
    }
}

const NONE: usize = usize::MAX;

/// Stalled iterations before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

struct Simplex {
    m: usize,
    n: usize,
    a: Csc,
    /// Row and sign of each artificial column.
    art: Vec<(usize, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    real_cost: Vec<f64>,
    x: Vec<f64>,
    head: Vec<usize>,
    pos: Vec<usize>,
    /// Column-major: `binv[i * m + p]` is row `p`, column `i` of `B⁻¹`.
    binv: Vec<f64>,
    y: Vec<f64>,
    tol: Tolerances,
    iterations: usize,
    phase1_iterations: usize,
    refactorizations: usize,
    since_refactor: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved(f64),
}

impl Simplex {
    fn new(lp: &LinearProgram, tol: Tolerances) -> Self {
        let m = lp.num_rows();
        let n = lp.num_columns();
        let a = Csc::from_lp(lp);
        let mut lower = Vec::with_capacity(n + 2 * m);
        let mut upper = Vec::with_capacity(n + 2 * m);
        let mut real_cost = Vec::with_capacity(n + 2 * m);
        let mut x = Vec::with_capacity(n + 2 * m);
        for c in lp.columns() {
            lower.push(c.lower);
            upper.push(c.upper);
            real_cost.push(c.cost);
            x.push(if c.lower.is_finite() {
                c.lower
            } else if c.upper.is_finite() {
                c.upper
            } else {
                0.0
            });
        }
        let mut act = vec![0.0; m];
        for (j, &xj) in x.iter().enumerate().take(n) {
            if xj != 0.0 {
                for k in a.ptr[j]..a.ptr[j + 1] {
                    act[a.idx[k]] += a.val[k] * xj;
                }
            }
        }
        let mut head = vec![NONE; m];
        let mut binv = vec![0.0; m * m];
        let mut art = Vec::new();
        let mut art_value = Vec::new();
        for (i, row) in lp.rows().iter().enumerate() {
            let (lo, up) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            lower.push(lo);
            upper.push(up);
            real_cost.push(0.0);
            let slack = tol.feasibility * row.rhs.abs().max(1.0);
            if act[i] >= lo - slack && act[i] <= up + slack {
                x.push(act[i]);
                head[i] = n + i;
                binv[i * m + i] = -1.0;
            } else {
                let bound = if act[i] < lo { lo } else { up };
                x.push(bound);
                let sign = if bound > act[i] { 1.0 } else { -1.0 };
                head[i] = NONE - 1 - art.len(); // patched below
                art.push((i, sign));
                art_value.push((bound - act[i]).abs());
                binv[i * m + i] = sign;
            }
        }
        let total = n + m + art.len();
        for (k, &(i, _)) in art.iter().enumerate() {
            head[i] = n + m + k;
            lower.push(0.0);
            upper.push(f64::INFINITY);
            real_cost.push(0.0);
            x.push(art_value[k]);
        }
        let mut pos = vec![NONE; total];
        for (p, &v) in head.iter().enumerate() {
            pos[v] = p;
        }
        let mut cost = vec![0.0; total];
        for k in 0..art.len() {
            cost[n + m + k] = 1.0;
        }
        let mut spx = Simplex {
            m,
            n,
            a,
            art,
            lower,
            upper,
            cost,
            real_cost,
            x,
            head,
            pos,
            binv,
            y: vec![0.0; m],
            tol,
            iterations: 0,
            phase1_iterations: 0,
            refactorizations: 0,
            since_refactor: 0,
        };
        spx.compute_duals();
        spx
    }

    fn total(&self) -> usize {
        self.lower.len()
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for k in self.a.ptr[j]..self.a.ptr[j + 1] {
                f(self.a.idx[k], self.a.val[k]);
            }
        } else if j < self.n + self.m {
            f(j - self.n, -1.0);
        } else {
            let (i, s) = self.art[j - self.n - self.m];
            f(i, s);
        }
    }

    fn run(&mut self) -> Result<Status, SolveError> {
        if !self.art.is_empty() {
            if let Step::Unbounded = self.phase()? {
                return Err(SolveError::Numerical {
                    iterations: self.iterations,
                    reason: "phase 1 unbounded",
                    residual: f64::NAN,
                });
            }
            self.phase1_iterations = self.iterations;
            let infeasibility: f64 = (self.n + self.m..self.total()).map(|j| self.x[j]).sum();
            let scale = self
                .lower
                .iter()
                .chain(&self.upper)
                .skip(self.n)
                .filter(|v| v.is_finite())
                .fold(1.0f64, |a, v| a.max(v.abs()));
            if infeasibility > 1e2 * self.tol.feasibility * scale {
                return Ok(Status::Infeasible);
            }
            for j in self.n + self.m..self.total() {
                self.upper[j] = 0.0;
                if self.pos[j] == NONE {
                    self.x[j] = 0.0;
                }
            }
        }
        self.cost = self.real_cost.clone();
        self.refactor()?;
        match self.phase()? {
            Step::Unbounded => Ok(Status::Unbounded),
            _ => Ok(Status::Optimal),
        }
    }

    /// Iterate with the current cost vector until optimal or unbounded.
    fn phase(&mut self) -> Result<Step, SolveError> {
        let mut bland = false;
        let mut stalled = 0usize;
        let mut confirmed = false;
        loop {
            if self.iterations >= self.tol.max_iterations {
                return Err(SolveError::IterationLimit(self.iterations));
            }
            if self.since_refactor >= self.tol.refactor_interval.max(self.m / 2) {
                self.refactor()?;
            }
            match self.iterate(bland)? {
                Step::Optimal => {
                    if confirmed || self.since_refactor == 0 && self.refactorizations > 0 {
                        self.check_primal()?;
                        return Ok(Step::Optimal);
                    }
                    // re-verify optimality on a fresh factorization
                    self.refactor()?;
                    confirmed = true;
                }
                Step::Unbounded => return Ok(Step::Unbounded),
                Step::Moved(improvement) => {
                    confirmed = false;
                    self.iterations += 1;
                    self.since_refactor += 1;
                    if improvement > 1e-12 {
                        stalled = 0;
                        bland = false;
                    } else {
                        stalled += 1;
                        if stalled > STALL_LIMIT {
                            bland = true;
                        }
                    }
                }
            }
        }
    }

    fn check_primal(&self) -> Result<(), SolveError> {
        let mut worst = 0.0f64;
        for &b in &self.head {
            let v = self.x[b];
            let viol = (self.lower[b] - v).max(v - self.upper[b]).max(0.0);
            worst = worst.max(viol / self.lower[b].abs().max(self.upper[b].abs()).clamp(1.0, 1e12));
        }
        if worst > 1e-6 {
            return Err(SolveError::Numerical {
                iterations: self.iterations,
                reason: "primal infeasibility after refactorization",
                residual: worst,
            });
        }
        Ok(())
    }

    /// Reduced cost and the scale its tolerance is relative to.
    fn reduced_cost(&self, j: usize) -> (f64, f64) {
        let mut dot = 0.0;
        self.for_column(j, |i, v| dot += self.y[i] * v);
        (self.cost[j] - dot, self.cost[j].abs().max(1.0))
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.total() {
            if self.pos[j] != NONE {
                continue;
            }
            let (lo, up) = (self.lower[j], self.upper[j]);
            if lo == up {
                continue;
            }
            let (d, scale) = self.reduced_cost(j);
            let tol = self.tol.optimality * scale;
            let xj = self.x[j];
            let can_increase = xj < up;
            let can_decrease = xj > lo;
            let eligible = (d < -tol && can_increase) || (d > tol && can_decrease);
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            let score = d.abs();
            if score > best_score {
                best_score = score;
                best = Some((j, d));
            }
        }
        best
    }

    fn ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        self.for_column(q, |i, v| {
            let col = &self.binv[i * m..(i + 1) * m];
            for (a, b) in alpha.iter_mut().zip(col) {
                *a += v * b;
            }
        });
        alpha
    }

    fn iterate(&mut self, bland: bool) -> Result<Step, SolveError> {
        let Some((q, d_q)) = self.choose_entering(bland) else {
            return Ok(Step::Optimal);
        };
        let dir = if d_q < 0.0 { 1.0 } else { -1.0 };
        let alpha = self.ftran(q);

        // ratio test
        let piv = self.tol.pivot;
        let feas = self.tol.feasibility;
        let mut theta_max = f64::INFINITY;
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() <= piv {
                continue;
            }
            let b = self.head[p];
            let rate = -dir * a;
            let relaxed = if rate < 0.0 && self.lower[b].is_finite() {
                (self.x[b] - self.lower[b] + feas * self.lower[b].abs().max(1.0)) / -rate
            } else if rate > 0.0 && self.upper[b].is_finite() {
                (self.upper[b] - self.x[b] + feas * self.upper[b].abs().max(1.0)) / rate
            } else {
                continue;
            };
            theta_max = theta_max.min(relaxed);
        }
        let range = self.upper[q] - self.lower[q];

        let mut leave: Option<(usize, f64)> = None;
        if bland {
            let mut best = f64::INFINITY;
            for (p, &a) in alpha.iter().enumerate() {
                if a.abs() <= piv {
                    continue;
                }
                let b = self.head[p];
                let rate = -dir * a;
                let ratio = if rate < 0.0 && self.lower[b].is_finite() {
                    (self.x[b] - self.lower[b]) / -rate
                } else if rate > 0.0 && self.upper[b].is_finite() {
                    (self.upper[b] - self.x[b]) / rate
                } else {
                    continue;
                };
                let ratio = ratio.max(0.0);
                let better = match leave {
                    None => true,
                    Some((lp, _)) => ratio < best || (ratio == best && b < self.head[lp]),
                };
                if better {
                    best = ratio;
                    leave = Some((p, ratio));
                }
            }
        } else if theta_max.is_finite() {
            let mut best_alpha = 0.0;
            for (p, &a) in alpha.iter().enumerate() {
                if a.abs() <= piv {
                    continue;
                }
                let b = self.head[p];
                let rate = -dir * a;
                let ratio = if rate < 0.0 && self.lower[b].is_finite() {
                    (self.x[b] - self.lower[b]) / -rate
                } else if rate > 0.0 && self.upper[b].is_finite() {
                    (self.upper[b] - self.x[b]) / rate
                } else {
                    continue;
                };
                if ratio <= theta_max && a.abs() > best_alpha {
                    best_alpha = a.abs();
                    leave = Some((p, ratio.max(0.0)));
                }
            }
        }

        let flip = range.is_finite()
            && match leave {
                None => true,
                Some((_, ratio)) => range <= ratio || (!bland && range <= theta_max),
            };
        if flip {
            let step = range;
            for (p, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let b = self.head[p];
                    self.x[b] -= dir * step * a;
                }
            }
            self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            return Ok(Step::Moved(d_q.abs() * step));
        }
        let Some((r, step)) = leave else {
            return Ok(Step::Unbounded);
        };

        for (p, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let b = self.head[p];
                self.x[b] -= dir * step * a;
            }
        }
        self.x[q] += dir * step;
        let leaving = self.head[r];
        let rate = -dir * alpha[r];
        self.x[leaving] = if rate < 0.0 { self.lower[leaving] } else { self.upper[leaving] };
        if leaving >= self.n + self.m {
            // an artificial that left never comes back
            self.upper[leaving] = 0.0;
            self.x[leaving] = 0.0;
        }

        // dual update with the old row r of B⁻¹
        let m = self.m;
        let pivot = alpha[r];
        let theta_d = d_q / pivot;
        for i in 0..m {
            let rho = self.binv[i * m + r];
            if rho != 0.0 {
                self.y[i] += theta_d * rho;
            }
        }

        // B⁻¹ ← E B⁻¹
        let nz: Vec<usize> = (0..m).filter(|&p| p != r && alpha[p] != 0.0).collect();
        for i in 0..m {
            let col = &mut self.binv[i * m..(i + 1) * m];
            let v = col[r];
            if v == 0.0 {
                continue;
            }
            let v = v / pivot;
            col[r] = v;
            for &p in &nz {
                col[p] -= alpha[p] * v;
            }
        }

        self.pos[leaving] = NONE;
        self.pos[q] = r;
        self.head[r] = q;
        Ok(Step::Moved(d_q.abs() * step))
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        for i in 0..m {
            let col = &self.binv[i * m..(i + 1) * m];
            self.y[i] = self.head.iter().zip(col).map(|(&b, v)| self.cost[b] * v).sum();
        }
    }

    /// Rebuild `B⁻¹` from scratch, then recompute basic values and duals.
    fn refactor(&mut self) -> Result<(), SolveError> {
        let m = self.m;
        self.refactorizations += 1;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        // unit columns (logicals and artificials) versus structural basics
        let mut unit_of_row = vec![NONE; m];
        let mut unit_value = vec![0.0; m];
        let mut structural = Vec::new();
        for (p, &b) in self.head.iter().enumerate() {
            if b < self.n {
                structural.push(p);
            } else {
                let (i, v) = if b < self.n + self.m {
                    (b - self.n, -1.0)
                } else {
                    self.art[b - self.n - self.m]
                };
                if unit_of_row[i] != NONE {
                    return Err(self.singular());
                }
                unit_of_row[i] = p;
                unit_value[i] = v;
            }
        }
        let free_rows: Vec<usize> = (0..m).filter(|&i| unit_of_row[i] == NONE).collect();
        let k = structural.len();
        if free_rows.len() != k {
            return Err(self.singular());
        }
        let mut local = vec![NONE; m];
        for (a, &i) in free_rows.iter().enumerate() {
            local[i] = a;
        }
        let mut b11 = DMatrix::<f64>::zeros(k, k);
        for (a, &p) in structural.iter().enumerate() {
            self.for_column(self.head[p], |i, v| {
                if local[i] != NONE {
                    b11[(local[i], a)] = v;
                }
            });
        }
        let inv11 = if k > 0 {
            b11.try_inverse().ok_or_else(|| self.singular())?
        } else {
            DMatrix::zeros(0, 0)
        };

        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for (a, &p) in structural.iter().enumerate() {
            for (b, &i) in free_rows.iter().enumerate() {
                self.binv[i * m + p] = inv11[(a, b)];
            }
        }
        for i in 0..m {
            let u = unit_of_row[i];
            if u != NONE {
                self.binv[i * m + u] = 1.0 / unit_value[i];
            }
        }
        // unit rows: -(1/s) · B21 · B11⁻¹
        for (a, &p) in structural.iter().enumerate() {
            let mut coupling = Vec::new();
            self.for_column(self.head[p], |i, v| {
                if unit_of_row[i] != NONE {
                    coupling.push((unit_of_row[i], v / unit_value[i]));
                }
            });
            for (u, w) in coupling {
                for (b, &i) in free_rows.iter().enumerate() {
                    self.binv[i * m + u] -= w * inv11[(a, b)];
                }
            }
        }

        // x_B = -B⁻¹ Σ_N a_j x_j
        let mut rhs = vec![0.0; m];
        for j in 0..self.total() {
            if self.pos[j] == NONE && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_column(j, |i, v| rhs[i] += v * xj);
            }
        }
        let mut xb = vec![0.0; m];
        for (i, &r) in rhs.iter().enumerate() {
            if r != 0.0 {
                let col = &self.binv[i * m..(i + 1) * m];
                for (x, b) in xb.iter_mut().zip(col) {
                    *x -= b * r;
                }
            }
        }
        for (p, v) in xb.into_iter().enumerate() {
            self.x[self.head[p]] = v;
        }
        self.compute_duals();
        Ok(())
    }

    fn singular(&self) -> SolveError {
        SolveError::Numerical {
            iterations: self.iterations,
            reason: "singular basis",
            residual: f64::NAN,
        }
    }
}

/// Write the canonical solution file: `col <name> <value>` and `row <name> <dual>` lines.
pub fn write_solution_file<W: Write>(lp: &LinearProgram, sol: &Solution, mut out: W) -> io::Result<()> {
    writeln!(out, "# status {:?}", sol.status)?;
    writeln!(out, "# objective {}", sol.objective)?;
    for (c, v) in lp.columns().iter().zip(&sol.primal) {
        writeln!(out, "col {} {}", c.tag, v)?;
    }
    for (r, v) in lp.rows().iter().zip(&sol.dual) {
        writeln!(out, "row {} {}", r.tag, v)?;
    }
    Ok(())
}

/// Read a solution produced by an external solver for `lp` and bring it under the same
/// contract as [`solve`]. Reduced costs are recomputed from the duals.
pub fn solve_external(lp: &LinearProgram, solution_file: &Path) -> Result<Solution, SolveError> {
    let file = fs::File::open(solution_file)?;
    read_solution(lp, io::BufReader::new(file))
}

pub fn read_solution<R: BufRead>(lp: &LinearProgram, input: R) -> Result<Solution, SolveError> {
    let mut primal = vec![f64::NAN; lp.num_columns()];
    let mut dual = vec![f64::NAN; lp.num_rows()];
    let mut saw_dual = false;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(SolveError::Parse {
                line: lineno,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let value: f64 = fields[2].parse().map_err(|_| SolveError::Parse {
            line: lineno,
            message: format!("invalid number `{}`", fields[2]),
        })?;
        let unmatched = || SolveError::UnmatchedTag {
            line: lineno,
            name: fields[1].to_string(),
        };
        match fields[0] {
            "col" => primal[lp.find_column(fields[1]).ok_or_else(unmatched)?] = value,
            "row" => {
                dual[lp.find_row(fields[1]).ok_or_else(unmatched)?] = value;
                saw_dual = true;
            }
            other => {
                return Err(SolveError::Parse {
                    line: lineno,
                    message: format!("unknown record `{other}`"),
                })
            }
        }
    }
    if !saw_dual && lp.num_rows() > 0 {
        return Err(SolveError::MissingDuals);
    }
    if let Some(c) = primal.iter().position(|v| v.is_nan()) {
        return Err(SolveError::MissingEntry(lp.columns()[c].tag.to_string()));
    }
    if let Some(r) = dual.iter().position(|v| v.is_nan()) {
        return Err(SolveError::MissingEntry(lp.rows()[r].tag.to_string()));
    }
    let reduced = reduced_costs(lp, &dual);
    Ok(Solution {
        status: Status::Optimal,
        objective: lp.objective_value(&primal),
        primal,
        dual,
        reduced_costs: reduced,
        stats: SolverStats::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Family;

    fn col(lp: &mut LinearProgram, name: &str, lo: f64, up: f64, c: f64) -> usize {
        lp.add_column(Tag::fixed(Family::Capacity, name), lo, up, c).unwrap()
    }

    fn row(lp: &mut LinearProgram, name: &str, sense: Sense, rhs: f64) -> usize {
        lp.add_row(Tag::fixed(Family::Potential, name), sense, rhs).unwrap()
    }

    #[test]
    fn single_lower_bound_row() {
        let mut lp = LinearProgram::new("t");
        let x = col(&mut lp, "x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let r = row(&mut lp, "r", Sense::Ge, 3.0);
        lp.add_entry(r, x, 1.0);
        let sol = solve(&lp, &Tolerances::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.primal[x] - 3.0).abs() < 1e-12);
        assert!((sol.dual[r] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_lp() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  →  x=2, y=6, duals (0, 1.5, 1)
        let mut lp = LinearProgram::new("t");
        let x = col(&mut lp, "x", 0.0, f64::INFINITY, -3.0);
        let y = col(&mut lp, "y", 0.0, f64::INFINITY, -5.0);
        let r1 = row(&mut lp, "r1", Sense::Le, 4.0);
        let r2 = row(&mut lp, "r2", Sense::Le, 12.0);
        let r3 = row(&mut lp, "r3", Sense::Le, 18.0);
        lp.add_entry(r1, x, 1.0);
        lp.add_entry(r2, y, 2.0);
        lp.add_entry(r3, x, 3.0);
        lp.add_entry(r3, y, 2.0);
        let sol = solve(&lp, &Tolerances::default()).unwrap();
        assert!((sol.objective + 36.0).abs() < 1e-9);
        assert!((sol.primal[x] - 2.0).abs() < 1e-9);
        assert!((sol.primal[y] - 6.0).abs() < 1e-9);
        assert!(sol.dual[r1].abs() < 1e-9);
        assert!((sol.dual[r2] + 1.5).abs() < 1e-9);
        assert!((sol.dual[r3] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new("t");
        let x = col(&mut lp, "x", 0.0, 1.0, 1.0);
        let r = row(&mut lp, "r", Sense::Ge, 2.0);
        lp.add_entry(r, x, 1.0);
        assert_eq!(solve(&lp, &Tolerances::default()).unwrap().status, Status::Infeasible);

        let mut lp = LinearProgram::new("t");
        let x = col(&mut lp, "x", 0.0, f64::INFINITY, -1.0);
        let r = row(&mut lp, "r", Sense::Ge, 2.0);
        lp.add_entry(r, x, 1.0);
        assert_eq!(solve(&lp, &Tolerances::default()).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn bounded_variables_flip() {
        // min -x - y with x, y ∈ [0, 1], x + y ≤ 1.5
        let mut lp = LinearProgram::new("t");
        let x = col(&mut lp, "x", 0.0, 1.0, -1.0);
        let y = col(&mut lp, "y", 0.0, 1.0, -1.0);
        let r = row(&mut lp, "r", Sense::Le, 1.5);
        lp.add_entry(r, x, 1.0);
        lp.add_entry(r, y, 1.0);
        let sol = solve(&lp, &Tolerances::default()).unwrap();
        assert!((sol.objective + 1.5).abs() < 1e-12);
        assert!((sol.dual[r] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn solution_file_round_trip() {
        let mut lp = LinearProgram::new("t");
        let x = col(&mut lp, "x", 0.0, f64::INFINITY, 2.0);
        let r = row(&mut lp, "r", Sense::Ge, 3.0);
        lp.add_entry(r, x, 1.0);
        let sol = solve(&lp, &Tolerances::default()).unwrap();
        let mut buf = Vec::new();
        write_solution_file(&lp, &sol, &mut buf).unwrap();
        let back = read_solution(&lp, buf.as_slice()).unwrap();
        assert_eq!(back.primal, sol.primal);
        assert_eq!(back.dual, sol.dual);
        assert_eq!(back.reduced_costs, sol.reduced_costs);

        let err = read_solution(&lp, "col cap.nope 1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("unmatched tag"));
        let err = read_solution(&lp, "col cap.x 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SolveError::MissingDuals));
    }
}
