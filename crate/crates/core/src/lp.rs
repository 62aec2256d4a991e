//! Bounded-variable primal simplex.
//!
//! Problems are `min c'x` subject to `row_lo <= A x <= row_hi` and
//! `lo <= x <= hi`. Every row gets a bounded logical column so all rows
//! become equalities `A x - s = 0`. The starting basis takes, row by row, a
//! column singleton whose value stays within its bounds; rows without one get
//! an artificial column and a phase-one objective drives those to zero.
//!
//! The basis inverse is kept explicitly (column-major) and updated with
//! product-form pivots. Pricing is Dantzig's rule with ties resolved by the
//! smallest column index; after a run of degenerate pivots the solver falls
//! back to Bland's rule until progress resumes.

use thiserror::Error;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 40;
const REFACTOR_EVERY: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("no feasible point; rows {rows:?} cannot be satisfied")]
    Infeasible { rows: Vec<usize> },
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("column {column} has empty bound interval [{lower}, {upper}]")]
    BadBounds { column: usize, lower: f64, upper: f64 },
}

/// A linear program in bounded-row form.
#[derive(Clone, Debug, Default)]
pub struct Problem {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    columns: Vec<Vec<(usize, f64)>>,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
}

impl Problem {
    pub fn new() -> Problem {
        Problem::default()
    }

    pub fn num_columns(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_lower.len()
    }

    pub fn add_column(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.columns.push(Vec::new());
        self.cost.len() - 1
    }

    /// Adds `lower <= sum(coef * x[col]) <= upper`.
    pub fn add_row(&mut self, lower: f64, upper: f64, entries: &[(usize, f64)]) -> usize {
        let row = self.row_lower.len();
        self.row_lower.push(lower);
        self.row_upper.push(upper);
        for &(col, coef) in entries {
            if coef != 0.0 {
                self.columns[col].push((row, coef));
            }
        }
        row
    }

    /// Row activities `A x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.num_rows()];
        for (j, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                act[r] += v * x[j];
            }
        }
        act
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn solve(&self) -> Result<Solution, LpError> {
        for j in 0..self.num_columns() {
            if self.lower[j] > self.upper[j] {
                return Err(LpError::BadBounds { column: j, lower: self.lower[j], upper: self.upper[j] });
            }
        }
        for i in 0..self.num_rows() {
            if self.row_lower[i] > self.row_upper[i] {
                return Err(LpError::Infeasible { rows: vec![i] });
            }
        }
        let mut simplex = Simplex::new(self);
        simplex.run()?;
        let x: Vec<f64> = simplex.x[..self.num_columns()].to_vec();
        Ok(Solution { objective: self.objective(&x), x, iterations: simplex.iterations })
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Simplex {
    m: usize,
    structural: usize,
    columns: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    phase_one_cost: Vec<f64>,
    artificial_start: usize,
    x: Vec<f64>,
    basis: Vec<usize>,
    /// basic position of each column, `usize::MAX` when nonbasic
    position: Vec<usize>,
    /// basis inverse, column-major: entry (i, k) at `k * m + i`
    binv: Vec<f64>,
    reduced: Vec<f64>,
    iterations: usize,
    pivots_since_refactor: usize,
}

fn initial_value(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

impl Simplex {
    fn new(p: &Problem) -> Simplex {
        let m = p.num_rows();
        let n = p.num_columns();
        let mut columns = p.columns.clone();
        let mut lo = p.lower.clone();
        let mut hi = p.upper.clone();
        let mut cost = p.cost.clone();
        for i in 0..m {
            columns.push(vec![(i, -1.0)]);
            lo.push(p.row_lower[i]);
            hi.push(p.row_upper[i]);
            cost.push(0.0);
        }
        let mut x: Vec<f64> = (0..n + m).map(|j| initial_value(lo[j], hi[j])).collect();

        // singleton columns per row, in column order
        let mut singletons: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in columns.iter().enumerate() {
            if col.len() == 1 {
                singletons[col[0].0].push(j);
            }
        }
        let mut residual = vec![0.0; m];
        for (j, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                residual[r] += v * x[j];
            }
        }

        let artificial_start = n + m;
        let mut basis = vec![usize::MAX; m];
        let mut diag = vec![1.0; m];
        for i in 0..m {
            for &c in &singletons[i] {
                let coef = columns[c][0].1;
                let value = x[c] - residual[i] / coef;
                let tol = PRIMAL_TOL * (1.0 + value.abs());
                if value >= lo[c] - tol && value <= hi[c] + tol {
                    x[c] = value.clamp(lo[c], hi[c]);
                    basis[i] = c;
                    diag[i] = coef;
                    break;
                }
            }
            if basis[i] == usize::MAX {
                let sign = if residual[i] > 0.0 { -1.0 } else { 1.0 };
                columns.push(vec![(i, sign)]);
                lo.push(0.0);
                hi.push(f64::INFINITY);
                cost.push(0.0);
                x.push(residual[i].abs());
                basis[i] = columns.len() - 1;
                diag[i] = sign;
            }
        }
        let total = columns.len();
        let mut phase_one_cost = vec![0.0; total];
        for c in phase_one_cost.iter_mut().skip(artificial_start) {
            *c = 1.0;
        }
        let mut position = vec![usize::MAX; total];
        for (i, &c) in basis.iter().enumerate() {
            position[c] = i;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0 / diag[i];
        }
        Simplex {
            m,
            structural: n,
            columns,
            lo,
            hi,
            cost,
            phase_one_cost,
            artificial_start,
            x,
            basis,
            position,
            binv,
            reduced: vec![0.0; total],
            iterations: 0,
            pivots_since_refactor: 0,
        }
    }

    fn run(&mut self) -> Result<(), LpError> {
        let infeasibility: f64 = self.x[self.artificial_start..].iter().sum();
        if infeasibility > PRIMAL_TOL {
            let costs = self.phase_one_cost.clone();
            self.optimize(&costs)?;
            let rows: Vec<usize> = (self.artificial_start..self.columns.len())
                .filter(|&c| self.x[c] > 1e-7 * (1.0 + self.scale()))
                .map(|c| self.columns[c][0].0)
                .collect();
            if !rows.is_empty() {
                let mut rows = rows;
                rows.sort_unstable();
                return Err(LpError::Infeasible { rows });
            }
        }
        for c in self.artificial_start..self.columns.len() {
            self.hi[c] = 0.0;
            if self.position[c] == usize::MAX {
                self.x[c] = 0.0;
            }
        }
        let costs = self.cost.clone();
        self.optimize(&costs)?;
        self.polish();
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.x[..self.structural].iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    fn compute_reduced_costs(&mut self, costs: &[f64]) {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, yk) in y.iter_mut().enumerate() {
            let col = &self.binv[k * m..(k + 1) * m];
            *yk = self.basis.iter().zip(col).map(|(&b, v)| costs[b] * v).sum();
        }
        for j in 0..self.columns.len() {
            self.reduced[j] = if self.position[j] != usize::MAX {
                0.0
            } else {
                costs[j] - self.columns[j].iter().map(|&(r, v)| y[r] * v).sum::<f64>()
            };
        }
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.columns.len() {
            if self.position[j] != usize::MAX || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced[j];
            let dir = if d < -DUAL_TOL && self.x[j] < self.hi[j] {
                1.0
            } else if d > DUAL_TOL && self.x[j] > self.lo[j] {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn ftran(&self, col: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(r, v) in &self.columns[col] {
            let src = &self.binv[r * m..(r + 1) * m];
            for (a, s) in alpha.iter_mut().zip(src) {
                *a += s * v;
            }
        }
        alpha
    }

    fn optimize(&mut self, costs: &[f64]) -> Result<(), LpError> {
        let limit = 50 * (self.m + self.columns.len()) + 1000;
        self.compute_reduced_costs(costs);
        let mut degenerate = 0usize;
        loop {
            if self.iterations > limit {
                return Err(LpError::IterationLimit(limit));
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let Some((q, dir)) = self.price(bland).or_else(|| {
                // confirm optimality against freshly computed duals
                self.compute_reduced_costs(costs);
                self.price(bland)
            }) else {
                return Ok(());
            };
            self.iterations += 1;
            let alpha = self.ftran(q);

            // ratio test
            let mut theta = if self.lo[q].is_finite() && self.hi[q].is_finite() {
                self.hi[q] - self.lo[q]
            } else {
                f64::INFINITY
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let rate = -dir * a;
                let (room, bound) = if rate < 0.0 {
                    (self.x[b] - self.lo[b], self.lo[b])
                } else {
                    (self.hi[b] - self.x[b], self.hi[b])
                };
                if !bound.is_finite() {
                    continue;
                }
                let step = room.max(0.0) / rate.abs();
                let better = match leave {
                    None => step < theta,
                    Some((r, _)) => {
                        if step < theta - 1e-12 {
                            true
                        } else if step <= theta + 1e-12 {
                            if bland {
                                b < self.basis[r]
                            } else {
                                a.abs() > alpha[r].abs()
                                    || (a.abs() == alpha[r].abs() && b < self.basis[r])
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = step.min(theta);
                    leave = Some((i, bound));
                }
            }
            if !theta.is_finite() {
                return Err(LpError::Unbounded);
            }
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            self.x[q] += dir * theta;
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= dir * theta * a;
                }
            }
            let Some((r, bound)) = leave else {
                // bound flip
                self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                continue;
            };
            let leaving = self.basis[r];
            self.x[leaving] = bound;
            self.pivot(q, r, &alpha);
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor();
                self.compute_reduced_costs(costs);
            }
        }
    }

    fn pivot(&mut self, q: usize, r: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        let leaving = self.basis[r];
        // reduced-cost update through the pivot row
        let rho: Vec<f64> = (0..m).map(|k| self.binv[k * m + r]).collect();
        let dq = self.reduced[q];
        let ratio = dq / ar;
        for j in 0..self.columns.len() {
            if self.position[j] != usize::MAX || j == q {
                continue;
            }
            let arj: f64 = self.columns[j].iter().map(|&(row, v)| rho[row] * v).sum();
            if arj != 0.0 {
                self.reduced[j] -= ratio * arj;
            }
        }
        self.reduced[q] = 0.0;
        self.reduced[leaving] = -ratio;

        for k in 0..m {
            let col = &mut self.binv[k * m..(k + 1) * m];
            let f = col[r] / ar;
            if f == 0.0 {
                continue;
            }
            for (c, a) in col.iter_mut().zip(alpha) {
                *c -= f * a;
            }
            col[r] = f;
        }
        self.basis[r] = q;
        self.position[q] = r;
        self.position[leaving] = usize::MAX;
        self.pivots_since_refactor += 1;
    }

    /// Recomputes the basis inverse by Gauss-Jordan elimination and the
    /// basic values from the nonbasic ones.
    fn refactor(&mut self) {
        let m = self.m;
        // row-major working copies of B and I
        let mut b = vec![0.0; m * m];
        for (k, &c) in self.basis.iter().enumerate() {
            for &(r, v) in &self.columns[c] {
                b[r * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let p = (k..m)
                .max_by(|&a, &c| b[a * m + k].abs().total_cmp(&b[c * m + k].abs()))
                .expect("nonempty");
            if p != k {
                for j in 0..m {
                    b.swap(k * m + j, p * m + j);
                    inv.swap(k * m + j, p * m + j);
                }
            }
            let piv = b[k * m + k];
            for j in 0..m {
                b[k * m + j] /= piv;
                inv[k * m + j] /= piv;
            }
            for i in 0..m {
                let f = b[i * m + k];
                if i == k || f == 0.0 {
                    continue;
                }
                for j in 0..m {
                    b[i * m + j] -= f * b[k * m + j];
                    inv[i * m + j] -= f * inv[k * m + j];
                }
            }
        }
        // inv is B^-1 row-major, store column-major
        for i in 0..m {
            for k in 0..m {
                self.binv[k * m + i] = inv[i * m + k];
            }
        }
        self.pivots_since_refactor = 0;
        self.recompute_basics();
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for (j, col) in self.columns.iter().enumerate() {
            if self.position[j] == usize::MAX {
                for &(r, v) in col {
                    rhs[r] -= v * self.x[j];
                }
            }
        }
        let mut xb = vec![0.0; m];
        for (k, &rk) in rhs.iter().enumerate() {
            if rk != 0.0 {
                for (xi, bi) in xb.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *xi += bi * rk;
                }
            }
        }
        for (i, &c) in self.basis.iter().enumerate() {
            self.x[c] = xb[i];
        }
    }

    /// Removes accumulated drift from the basic values.
    fn polish(&mut self) {
        let m = self.m;
        if m == 0 {
            return;
        }
        let residual_norm = |s: &Simplex| {
            let mut res = vec![0.0; m];
            for (j, col) in s.columns.iter().enumerate() {
                for &(r, v) in col {
                    res[r] += v * s.x[j];
                }
            }
            res
        };
        let res = residual_norm(self);
        // one step of iterative refinement with the current inverse
        let mut dx = vec![0.0; m];
        for (k, &rk) in res.iter().enumerate() {
            if rk != 0.0 {
                for (d, bi) in dx.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *d += bi * rk;
                }
            }
        }
        for (i, &c) in self.basis.iter().enumerate() {
            self.x[c] -= dx[i];
        }
        let worst = residual_norm(self).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if worst > 1e-9 {
            self.refactor();
        }
        for &c in &self.basis {
            self.x[c] = self.x[c].clamp(self.lo[c], self.hi[c]);
        }
    }
}
