//! Non-bilocality quantifier.
//!
//! Bilocality forces a joint distribution `q(a0,a1,b0,b1,c0,c1)` whose
//! `A-C` marginal factorizes. For a fixed value `ν` of the marginal mass
//! `q_{a0=0,a1=0}`, Alice's marginal over `(a0, a1)` is pinned to
//! `f(ν)` and the factorization defect `sum |q_{a,c} - f_a(ν) q_c|` becomes
//! linear in `q`. The quantifier is half the minimum of that defect over a
//! uniform grid of `ν` between the smallest and largest attainable mass.
//!
//! The behavior `p = A q` never needs its own variables: non-negativity and
//! normalization of `p` follow from those of `q`, and every correlator
//! constraint `M_cor p = v` is written directly as a row on `q`.

use rayon::prelude::*;

use super::problem::{Basis, LinearProgram, LpStatus, Sense};
use super::simplex::{solve, solve_warm};
use crate::error::{Error, Result};
use crate::scenario::{joint_outcome, TripartiteCorrelators, JOINT_SIZE};

/// Per-ν optimum at or below this value certifies bilocality.
pub const ZERO_OBJECTIVE: f64 = 1e-9;

pub const DEFAULT_GRID: usize = 1000;

const T_COUNT: usize = 16;

/// What the bilocal program is told about the behavior under test.
#[derive(Debug, Clone, PartialEq)]
pub enum BilocalInput {
    /// All eight `<A_x B_y C_z>` plus `<A_0>, <A_1>` (10 features).
    Full(TripartiteCorrelators),
    /// Only `(I, J, <A_0>, <A_1>)` (4 features); the eight correlators stay free.
    Aggregate { i: f64, j: f64, a0: f64, a1: f64 },
}

impl BilocalInput {
    pub fn aggregate(features: [f64; 4]) -> Self {
        BilocalInput::Aggregate {
            i: features[0],
            j: features[1],
            a0: features[2],
            a1: features[3],
        }
    }

    pub fn alice_marginals(&self) -> (f64, f64) {
        match self {
            BilocalInput::Full(t) => (t.a_marg[0], t.a_marg[1]),
            BilocalInput::Aggregate { a0, a1, .. } => (*a0, *a1),
        }
    }

    /// Equality rows on the joint distribution, including normalization.
    fn rows(&self) -> Vec<(Vec<(usize, f64)>, f64)> {
        let sign = |o: usize| if o == 0 { 1.0 } else { -1.0 };
        let corr_row = |x: usize, y: usize, z: usize| -> Vec<f64> {
            (0..JOINT_SIZE)
                .map(|j| {
                    sign(joint_outcome(j, 0, x)) * sign(joint_outcome(j, 1, y)) * sign(joint_outcome(j, 2, z))
                })
                .collect()
        };
        let marg_row = |x: usize| -> Vec<(usize, f64)> {
            (0..JOINT_SIZE).map(|j| (j, sign(joint_outcome(j, 0, x)))).collect()
        };
        let sparse = |dense: Vec<f64>| -> Vec<(usize, f64)> {
            dense.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect()
        };

        let mut rows = vec![((0..JOINT_SIZE).map(|j| (j, 1.0)).collect(), 1.0)];
        match self {
            BilocalInput::Full(t) => {
                for x in 0..2 {
                    for y in 0..2 {
                        for z in 0..2 {
                            rows.push((sparse(corr_row(x, y, z)), t.get(x, y, z)));
                        }
                    }
                }
                rows.push((marg_row(0), t.a_marg[0]));
                rows.push((marg_row(1), t.a_marg[1]));
            }
            BilocalInput::Aggregate { i, j, a0, a1 } => {
                let mut irow = vec![0.0; JOINT_SIZE];
                let mut jrow = vec![0.0; JOINT_SIZE];
                for x in 0..2 {
                    for z in 0..2 {
                        let s = if (x + z) % 2 == 0 { 1.0 } else { -1.0 };
                        for (k, v) in corr_row(x, 0, z).into_iter().enumerate() {
                            irow[k] += 0.25 * v;
                        }
                        for (k, v) in corr_row(x, 1, z).into_iter().enumerate() {
                            jrow[k] += 0.25 * s * v;
                        }
                    }
                }
                rows.push((sparse(irow), *i));
                rows.push((sparse(jrow), *j));
                rows.push((marg_row(0), *a0));
                rows.push((marg_row(1), *a1));
            }
        }
        rows
    }
}

fn alice_block(j: usize) -> usize {
    joint_outcome(j, 0, 0) * 2 + joint_outcome(j, 0, 1)
}

fn charlie_block(j: usize) -> usize {
    joint_outcome(j, 2, 0) * 2 + joint_outcome(j, 2, 1)
}

fn base_program(input: &BilocalInput, extra_vars: usize) -> LinearProgram {
    let mut lp = LinearProgram::new(JOINT_SIZE + extra_vars);
    for (row, rhs) in input.rows() {
        lp.add_eq(row, rhs);
    }
    lp
}

fn nu_selector() -> Vec<(usize, f64)> {
    (0..JOINT_SIZE)
        .filter(|&j| alice_block(j) == 0)
        .map(|j| (j, 1.0))
        .collect()
}

/// Whether some joint distribution over `(a0,a1,b0,b1,c0,c1)` reproduces
/// the given correlators.
pub fn nbl_feasibility(input: &BilocalInput) -> Result<bool> {
    let sol = solve(&base_program(input, 0));
    match sol.status {
        LpStatus::Optimal => Ok(true),
        LpStatus::Infeasible => Ok(false),
        s => Err(Error::Numeric(format!("feasibility program: {s}"))),
    }
}

/// Smallest and largest attainable `q_{a0=0,a1=0}`.
pub fn nu_bounds(input: &BilocalInput) -> Result<(f64, f64)> {
    let mut lp = base_program(input, 0);
    for (j, v) in nu_selector() {
        lp.set_objective(j, v);
    }
    let (lo, _) = solve(&lp).into_optimal("nu_min program").map_err(|e| match e {
        Error::Domain(_) => Error::Domain(
            "no joint distribution reproduces these correlators; resample the point".into(),
        ),
        other => other,
    })?;
    lp.set_sense(Sense::Maximize);
    let (hi, _) = solve(&lp).into_optimal("nu_max program")?;
    let lo = lo.clamp(0.0, 1.0);
    Ok((lo, hi.clamp(lo, 1.0)))
}

/// Alice's marginal `(f00, f01, f10, f11)` over `(a0, a1)` when
/// `q_{00} = ν`, given `<A_0> = a0` and `<A_1> = a1`.
pub fn marginal_qfunctions(a0: f64, a1: f64, nu: f64) -> [f64; 4] {
    let f00 = nu;
    let f01 = (a0 + 1.0) / 2.0 - nu;
    let f10 = (a1 + 1.0) / 2.0 - nu;
    [f00, f01, f10, 1.0 - f00 - f01 - f10]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Ascending ν, each program warm-started from the previous basis, with
    /// early exit on a zero objective.
    Sequential,
    /// Independent cold solves in parallel.
    Parallel,
}

#[derive(Debug, Clone)]
pub struct NBLResult {
    pub nbl: f64,
    pub nu_grid_size: usize,
    pub argmin_nu: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    /// Number of per-ν programs actually solved.
    pub solves: usize,
    /// `(ν, per-ν optimum)` pairs when tracing is enabled.
    pub trace: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct NblOracle {
    pub grid: usize,
    pub mode: SweepMode,
    pub trace: bool,
}

impl Default for NblOracle {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            mode: SweepMode::Sequential,
            trace: false,
        }
    }
}

impl NblOracle {
    pub fn with_grid(grid: usize) -> Self {
        Self {
            grid,
            ..Self::default()
        }
    }

    /// Program for a fixed `ν`: variables are the 64 joint entries followed
    /// by 16 slack magnitudes `t_{a0 a1 c0 c1}`.
    pub fn program(&self, input: &BilocalInput, nu: f64) -> LinearProgram {
        let (a0, a1) = input.alice_marginals();
        let f = marginal_qfunctions(a0, a1, nu);
        let mut lp = base_program(input, T_COUNT);
        lp.add_eq(nu_selector(), nu);
        for k in 0..T_COUNT {
            let (ab, cb) = (k / 4, k % 4);
            let t = JOINT_SIZE + k;
            lp.set_objective(t, 1.0);
            let mut row = Vec::with_capacity(17);
            for j in (0..JOINT_SIZE).filter(|&j| charlie_block(j) == cb) {
                let w = if alice_block(j) == ab { 1.0 - f[ab] } else { -f[ab] };
                row.push((j, w));
            }
            let mut up = row.clone();
            up.push((t, -1.0));
            let mut down: Vec<(usize, f64)> = row.into_iter().map(|(j, w)| (j, -w)).collect();
            down.push((t, -1.0));
            lp.add_le(up, 0.0);
            lp.add_le(down, 0.0);
        }
        lp
    }

    fn grid_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.grid <= 1 || hi - lo <= 1e-12 {
            return vec![lo];
        }
        let step = (hi - lo) / (self.grid - 1) as f64;
        (0..self.grid)
            .map(|k| if k + 1 == self.grid { hi } else { lo + step * k as f64 })
            .collect()
    }

    pub fn distance(&self, input: &BilocalInput) -> Result<NBLResult> {
        if self.grid == 0 {
            return Err(Error::Usage("ν grid must have at least one point".into()));
        }
        let (nu_min, nu_max) = nu_bounds(input)?;
        let grid = self.grid_points(nu_min, nu_max);

        let mut best = f64::INFINITY;
        let mut argmin = nu_min;
        let mut solves = 0;
        let mut trace = self.trace.then(Vec::new);
        let mut numeric_failures = 0;

        match self.mode {
            SweepMode::Sequential => {
                let mut basis: Option<Basis> = None;
                for &nu in &grid {
                    let sol = solve_warm(&self.program(input, nu), basis.as_ref());
                    solves += 1;
                    match sol.status {
                        LpStatus::Optimal => {
                            if let Some(tr) = trace.as_mut() {
                                tr.push((nu, sol.objective));
                            }
                            if sol.objective < best {
                                best = sol.objective;
                                argmin = nu;
                            }
                            basis = sol.basis;
                            if best <= ZERO_OBJECTIVE {
                                break;
                            }
                        }
                        LpStatus::Infeasible => {}
                        _ => numeric_failures += 1,
                    }
                }
            }
            SweepMode::Parallel => {
                let values: Vec<(f64, LpStatus, f64)> = grid
                    .par_iter()
                    .map(|&nu| {
                        let sol = solve(&self.program(input, nu));
                        (nu, sol.status, sol.objective)
                    })
                    .collect();
                solves = values.len();
                for (nu, status, obj) in values {
                    match status {
                        LpStatus::Optimal => {
                            if let Some(tr) = trace.as_mut() {
                                tr.push((nu, obj));
                            }
                            if obj < best {
                                best = obj;
                                argmin = nu;
                            }
                        }
                        LpStatus::Infeasible => {}
                        _ => numeric_failures += 1,
                    }
                }
            }
        }

        if !best.is_finite() {
            return Err(if numeric_failures > 0 {
                Error::Numeric(format!("{numeric_failures} per-ν programs failed"))
            } else {
                Error::Domain("no ν on the grid admits a feasible program; resample the point".into())
            });
        }
        let nbl = if best <= ZERO_OBJECTIVE { 0.0 } else { (best / 2.0).min(0.5) };
        Ok(NBLResult {
            nbl,
            nu_grid_size: grid.len(),
            argmin_nu: argmin,
            nu_min,
            nu_max,
            solves,
            trace,
        })
    }
}

/// NBL of the 10-feature description with a `grid`-point ν sweep.
pub fn nbl_distance(t: &TripartiteCorrelators, grid: usize) -> Result<NBLResult> {
    NblOracle::with_grid(grid).distance(&BilocalInput::Full(t.clone()))
}

/// NBL of the 4-feature description `(I, J, <A_0>, <A_1>)`.
pub fn nbl_distance_ij(features: [f64; 4], grid: usize) -> Result<NBLResult> {
    NblOracle::with_grid(grid).distance(&BilocalInput::aggregate(features))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn werner(v: f64) -> TripartiteCorrelators {
        let h = v * v / 2.0;
        let mut abc = [0.0; 8];
        for x in 0..2 {
            for z in 0..2 {
                let s = if (x + z) % 2 == 0 { 1.0 } else { -1.0 };
                abc[x * 4 + z] = h;
                abc[x * 4 + 2 + z] = s * h;
            }
        }
        TripartiteCorrelators::new(abc, [0.0; 2]).unwrap()
    }

    #[test]
    fn qfunctions_examples() {
        assert_eq!(marginal_qfunctions(1.0, 1.0, 1.0), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(marginal_qfunctions(0.0, 0.0, 0.25), [0.25; 4]);
        for &(a0, a1, nu) in &[(0.3, -0.7, 0.1), (-1.0, 0.2, 0.0), (0.9, 0.9, 0.8)] {
            let s: f64 = marginal_qfunctions(a0, a1, nu).iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn feasibility_examples() {
        let zero = TripartiteCorrelators::new([0.0; 8], [0.0; 2]).unwrap();
        assert!(nbl_feasibility(&BilocalInput::Full(zero)).unwrap());
        for joint in [0, 17, 42, 63] {
            let det = TripartiteCorrelators::deterministic(joint);
            assert!(nbl_feasibility(&BilocalInput::Full(det)).unwrap());
        }
        // <A0 B0 C0> = 1 and <A0> = 1 force b0 c0 = +1 while <A0 B0 C1> = -1
        // and <A1 B0 C1> = 1, <A1 B0 C0> = -1 together with <A1> = 1 contradict.
        let mut abc = [0.0; 8];
        abc[0] = 1.0;
        abc[1] = -1.0;
        abc[4] = -1.0;
        abc[5] = -1.0;
        let bad = TripartiteCorrelators::new(abc, [1.0, 1.0]).unwrap();
        assert!(!nbl_feasibility(&BilocalInput::Full(bad)).unwrap());
    }

    #[test]
    fn nu_bounds_examples() {
        let zero = BilocalInput::Full(TripartiteCorrelators::new([0.0; 8], [0.0; 2]).unwrap());
        let (lo, hi) = nu_bounds(&zero).unwrap();
        assert!(lo < 0.25 && hi > 0.25);
        // a0 = a1 = 0 is joint index 0 with all other outcomes 0 too
        let (lo, hi) = nu_bounds(&BilocalInput::Full(TripartiteCorrelators::deterministic(0))).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        // a0 = a1 = 1
        let (lo, hi) = nu_bounds(&BilocalInput::Full(TripartiteCorrelators::deterministic(0b110000))).unwrap();
        assert!(lo.abs() < 1e-12 && hi.abs() < 1e-12);
    }

    #[test]
    fn werner_points() {
        let r = nbl_distance(&werner(1.0), DEFAULT_GRID).unwrap();
        assert!((r.nbl - 0.5).abs() < 2e-3, "{}", r.nbl);
        let r = nbl_distance(&werner(0.5), DEFAULT_GRID).unwrap();
        assert_eq!(r.nbl, 0.0);
        assert!(r.solves < r.nu_grid_size);
        let r = nbl_distance(&werner(0.85), 200).unwrap();
        assert!((r.nbl - (0.85f64.powi(2) - 0.5)).abs() < 2e-3, "{}", r.nbl);
    }

    #[test]
    fn aggregate_mode_matches_werner() {
        let v: f64 = 0.9;
        let h = v * v / 2.0;
        let r = nbl_distance_ij([h, h, 0.0, 0.0], 200).unwrap();
        assert!((r.nbl - (v * v - 0.5)).abs() < 2e-3, "{}", r.nbl);
    }

    #[test]
    fn parallel_sweep_agrees_with_sequential() {
        let input = BilocalInput::Full(werner(0.8));
        let seq = NblOracle::with_grid(50).distance(&input).unwrap();
        let par = NblOracle {
            grid: 50,
            mode: SweepMode::Parallel,
            trace: false,
        }
        .distance(&input)
        .unwrap();
        assert!((seq.nbl - par.nbl).abs() < 1e-9);
    }

    #[test]
    fn infeasible_point_is_domain_error() {
        let mut abc = [0.0; 8];
        abc[0] = 1.0;
        abc[1] = -1.0;
        abc[4] = -1.0;
        abc[5] = -1.0;
        let bad = TripartiteCorrelators::new(abc, [1.0, 1.0]).unwrap();
        assert!(matches!(nbl_distance(&bad, 10), Err(Error::Domain(_))));
    }
}
