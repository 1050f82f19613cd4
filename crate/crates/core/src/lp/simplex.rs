//! Dense revised simplex for bounded variables.
//!
//! Every row owns a slack column (`<=` rows) and an artificial column fixed
//! at zero. Phase 1 minimizes the sum of bound infeasibilities of the basic
//! variables, which works both from the trivial slack/artificial basis and
//! from an arbitrary warm-start basis. Pricing is Dantzig's rule and falls
//! back to Bland's rule after a run of degenerate pivots.

use super::problem::{Basis, LPSolution, LinearProgram, LpStatus, Sense, VarStatus};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_STREAK: usize = 50;

/// Solves `lp` from the trivial basis.
pub fn solve(lp: &LinearProgram) -> LPSolution {
    solve_warm(lp, None)
}

/// Solves `lp`, starting from `warm` when it matches the program's shape.
/// A warm basis that turns out singular is discarded in favour of a cold start.
pub fn solve_warm(lp: &LinearProgram, warm: Option<&Basis>) -> LPSolution {
    if let Err(e) = lp.validate() {
        log::debug!("rejecting malformed LP: {e}");
        return failure(LpStatus::NumericFailure, 0);
    }
    let mut s = Simplex::build(lp);
    let warm_ok = match warm {
        Some(b) if b.rows == s.m && b.status.len() == s.ncols => {
            s.load_basis(b);
            s.refactor()
        }
        _ => false,
    };
    if !warm_ok {
        s.cold_basis();
        if !s.refactor() {
            return failure(LpStatus::NumericFailure, 0);
        }
    }
    let status = s.run();
    if status != LpStatus::Optimal {
        return failure(status, s.iterations);
    }
    let x: Vec<f64> = s.x[..s.n_struct].to_vec();
    LPSolution {
        status,
        objective: lp.objective_value(&x),
        x: Some(x),
        iterations: s.iterations,
        basis: Some(Basis {
            rows: s.m,
            status: s.status.clone(),
        }),
    }
}

fn failure(status: LpStatus, iterations: usize) -> LPSolution {
    LPSolution {
        status,
        objective: f64::NAN,
        x: None,
        iterations,
        basis: None,
    }
}

enum Leaving {
    BoundFlip,
    Row { row: usize, to_upper: bool },
}

struct Simplex {
    m: usize,
    n_struct: usize,
    ncols: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    b: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    head: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    /// Row-major explicit inverse of the basis matrix.
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    max_iterations: usize,
}

impl Simplex {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let me = lp.eq_constraints().len();
        let ml = lp.le_constraints().len();
        let m = me + ml;
        let ncols = n + ml + m;

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut b = Vec::with_capacity(m);
        for (r, row) in lp.eq_constraints().iter().chain(lp.le_constraints()).enumerate() {
            let mut coeffs = row.coeffs.clone();
            coeffs.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < coeffs.len() {
                let j = coeffs[k].0;
                let mut v = 0.0;
                while k < coeffs.len() && coeffs[k].0 == j {
                    v += coeffs[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    cols[j].push((r, v));
                }
            }
            b.push(row.rhs);
        }

        let mut col_start = Vec::with_capacity(ncols + 1);
        let mut col_row = Vec::new();
        let mut col_val = Vec::new();
        col_start.push(0);
        for col in &cols {
            for &(r, v) in col {
                col_row.push(r);
                col_val.push(v);
            }
            col_start.push(col_row.len());
        }
        // slacks, then artificials
        for r in (me..m).chain(0..m) {
            col_row.push(r);
            col_val.push(1.0);
            col_start.push(col_row.len());
        }

        let sign = match lp.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost: Vec<f64> = lp.objective().iter().map(|c| sign * c).collect();
        cost.resize(ncols, 0.0);
        let mut lower = lp.lower().to_vec();
        let mut upper = lp.upper().to_vec();
        lower.extend(std::iter::repeat(0.0).take(ml));
        upper.extend(std::iter::repeat(f64::INFINITY).take(ml));
        lower.extend(std::iter::repeat(0.0).take(m));
        upper.extend(std::iter::repeat(0.0).take(m));

        Self {
            m,
            n_struct: n,
            ncols,
            col_start,
            col_row,
            col_val,
            b,
            cost,
            lower,
            upper,
            head: vec![0; m],
            status: vec![VarStatus::AtLower; ncols],
            x: vec![0.0; ncols],
            binv: vec![0.0; m * m],
            iterations: 0,
            since_refactor: 0,
            max_iterations: 10_000 + 50 * (m + ncols),
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.col_start[j], self.col_start[j + 1]);
        self.col_row[s..e].iter().copied().zip(self.col_val[s..e].iter().copied())
    }

    fn resting_status(&self, j: usize) -> VarStatus {
        if self.lower[j].is_finite() {
            VarStatus::AtLower
        } else if self.upper[j].is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Free
        }
    }

    fn cold_basis(&mut self) {
        let n = self.n_struct;
        let ml = self.ncols - n - self.m;
        let me = self.m - ml;
        for j in 0..self.ncols {
            self.status[j] = self.resting_status(j);
        }
        for r in 0..self.m {
            let j = if r >= me { n + (r - me) } else { n + ml + r };
            self.head[r] = j;
            self.status[j] = VarStatus::Basic(r);
        }
    }

    fn load_basis(&mut self, basis: &Basis) {
        let mut seen = 0;
        for (j, st) in basis.status.iter().enumerate() {
            let st = match *st {
                VarStatus::Basic(r) if r < self.m => {
                    self.head[r] = j;
                    seen += 1;
                    VarStatus::Basic(r)
                }
                VarStatus::AtUpper if self.upper[j].is_finite() => VarStatus::AtUpper,
                VarStatus::AtLower if self.lower[j].is_finite() => VarStatus::AtLower,
                _ => self.resting_status(j),
            };
            self.status[j] = st;
        }
        if seen != self.m {
            self.cold_basis();
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lower[j],
            VarStatus::AtUpper => self.upper[j],
            VarStatus::Free | VarStatus::Basic(_) => 0.0,
        }
    }

    /// Recomputes the basis inverse and the primal values from scratch.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        self.since_refactor = 0;
        let mut dense = vec![0.0; m * m];
        for (k, &j) in self.head.iter().enumerate() {
            for (r, v) in self.column(j) {
                dense[r * m + k] = v;
            }
        }
        match invert(&dense, m) {
            Some(inv) => self.binv = inv,
            None => return false,
        }
        let mut rhs = self.b.clone();
        for j in 0..self.ncols {
            if matches!(self.status[j], VarStatus::Basic(_)) {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                for (r, a) in self.column(j) {
                    rhs[r] -= a * v;
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            self.x[self.head[k]] = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        }
        true
    }

    fn basic_infeasibility(&self, k: usize) -> f64 {
        let j = self.head[k];
        let v = self.x[j];
        if v < self.lower[j] - PRIMAL_TOL {
            -1.0
        } else if v > self.upper[j] + PRIMAL_TOL {
            1.0
        } else {
            0.0
        }
    }

    fn run(&mut self) -> LpStatus {
        let m = self.m;
        let mut fresh = true;
        let mut degenerate = 0usize;
        let mut alpha = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut basic_cost = vec![0.0; m];

        loop {
            if self.iterations >= self.max_iterations {
                log::warn!("simplex hit the iteration cap ({})", self.max_iterations);
                return LpStatus::NumericFailure;
            }

            let mut phase_one = false;
            for (k, c) in basic_cost.iter_mut().enumerate() {
                let d = self.basic_infeasibility(k);
                if d != 0.0 {
                    phase_one = true;
                }
                *c = d;
            }
            if !phase_one {
                for (k, c) in basic_cost.iter_mut().enumerate() {
                    *c = self.cost[self.head[k]];
                }
            }

            for (i, yi) in y.iter_mut().enumerate() {
                *yi = (0..m).map(|k| basic_cost[k] * self.binv[k * m + i]).sum();
            }

            let bland = degenerate > DEGENERATE_STREAK;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.ncols {
                let st = self.status[j];
                if matches!(st, VarStatus::Basic(_)) || self.lower[j] == self.upper[j] {
                    continue;
                }
                let base = if phase_one { 0.0 } else { self.cost[j] };
                let reduced = base - self.column(j).map(|(r, a)| y[r] * a).sum::<f64>();
                let dir = match st {
                    VarStatus::AtLower if reduced < -DUAL_TOL => 1.0,
                    VarStatus::AtUpper if reduced > DUAL_TOL => -1.0,
                    VarStatus::Free if reduced.abs() > DUAL_TOL => -reduced.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if reduced.abs() > best {
                    best = reduced.abs();
                    entering = Some((j, dir));
                }
            }

            let Some((q, dir)) = entering else {
                if !fresh {
                    if !self.refactor() {
                        return LpStatus::NumericFailure;
                    }
                    fresh = true;
                    continue;
                }
                return if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };

            alpha.iter_mut().for_each(|a| *a = 0.0);
            for (r, a) in self.column(q) {
                for (k, ak) in alpha.iter_mut().enumerate() {
                    *ak += self.binv[k * m + r] * a;
                }
            }

            let mut theta = self.upper[q] - self.lower[q];
            let mut leaving = Leaving::BoundFlip;
            let mut leave_pivot = 0.0f64;
            for k in 0..m {
                let a = alpha[k];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let delta = -dir * a;
                let j = self.head[k];
                let (v, lo, hi) = (self.x[j], self.lower[j], self.upper[j]);
                let (limit, to_upper) = if phase_one && v < lo - PRIMAL_TOL {
                    if delta > 0.0 {
                        ((lo - v) / delta, false)
                    } else {
                        continue;
                    }
                } else if phase_one && v > hi + PRIMAL_TOL {
                    if delta < 0.0 {
                        ((v - hi) / -delta, true)
                    } else {
                        continue;
                    }
                } else if delta < 0.0 {
                    if !lo.is_finite() {
                        continue;
                    }
                    ((v - lo).max(0.0) / -delta, false)
                } else {
                    if !hi.is_finite() {
                        continue;
                    }
                    ((hi - v).max(0.0) / delta, true)
                };
                let better = if limit < theta - 1e-12 {
                    true
                } else if limit <= theta + 1e-12 {
                    match leaving {
                        Leaving::BoundFlip => false,
                        Leaving::Row { row, .. } => {
                            if bland {
                                j < self.head[row]
                            } else {
                                a.abs() > leave_pivot
                            }
                        }
                    }
                } else {
                    false
                };
                if better {
                    theta = limit;
                    leaving = Leaving::Row { row: k, to_upper };
                    leave_pivot = a.abs();
                }
            }

            if !theta.is_finite() {
                return if phase_one {
                    LpStatus::NumericFailure
                } else {
                    LpStatus::Unbounded
                };
            }

            self.iterations += 1;
            degenerate = if theta <= 1e-12 { degenerate + 1 } else { 0 };
            fresh = false;

            let step = dir * theta;
            self.x[q] += step;
            for k in 0..m {
                let j = self.head[k];
                self.x[j] -= step * alpha[k];
            }

            match leaving {
                Leaving::BoundFlip => {
                    self.status[q] = if dir > 0.0 {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.x[q] = self.nonbasic_value(q);
                }
                Leaving::Row { row, to_upper } => {
                    let out = self.head[row];
                    self.status[out] = if to_upper && self.lower[out] != self.upper[out] {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.x[out] = self.nonbasic_value(out);
                    self.head[row] = q;
                    self.status[q] = VarStatus::Basic(row);

                    let piv = alpha[row];
                    let (before, rest) = self.binv.split_at_mut(row * m);
                    let (pivot_row, after) = rest.split_at_mut(m);
                    pivot_row.iter_mut().for_each(|v| *v /= piv);
                    for (k, chunk) in before.chunks_mut(m).enumerate() {
                        let f = alpha[k];
                        if f != 0.0 {
                            chunk.iter_mut().zip(pivot_row.iter()).for_each(|(c, p)| *c -= f * p);
                        }
                    }
                    for (k, chunk) in after.chunks_mut(m).enumerate() {
                        let f = alpha[row + 1 + k];
                        if f != 0.0 {
                            chunk.iter_mut().zip(pivot_row.iter()).for_each(|(c, p)| *c -= f * p);
                        }
                    }

                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY {
                        if !self.refactor() {
                            return LpStatus::NumericFailure;
                        }
                        fresh = true;
                    }
                }
            }
        }
    }
}

/// Gauss-Jordan inversion with partial pivoting of a row-major `n x n` matrix.
fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut work = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, work[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs < SINGULAR_TOL * scale {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                work.swap(col * n + k, pivot_row * n + k);
                inv.swap(col * n + k, pivot_row * n + k);
            }
        }
        let p = work[col * n + col];
        for k in 0..n {
            work[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work[r * n + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                work[r * n + k] -= f * work[col * n + k];
                inv[r * n + k] -= f * inv[col * n + k];
            }
        }
    }
    Some(inv)
}
