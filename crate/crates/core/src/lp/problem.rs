use std::fmt;
use std::io::{self, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// One linear row `sum_j coeffs[j].1 * x[coeffs[j].0]` compared against `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// A linear program with equality rows, `<=` rows and per-variable bounds.
///
/// Variables default to `[0, +inf)`. Infinite bounds are represented by
/// `f64::INFINITY` / `f64::NEG_INFINITY`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    sense: Sense,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    eq: Vec<Constraint>,
    le: Vec<Constraint>,
    names: Option<Vec<String>>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            sense: Sense::Minimize,
            objective: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            eq: Vec::new(),
            le: Vec::new(),
            names: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn set_sense(&mut self, sense: Sense) -> &mut Self {
        self.sense = sense;
        self
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) -> &mut Self {
        self.objective[var] = coeff;
        self
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn set_names(&mut self, names: Vec<String>) -> &mut Self {
        self.names = Some(names);
        self
    }

    pub fn eq_constraints(&self) -> &[Constraint] {
        &self.eq
    }

    pub fn le_constraints(&self) -> &[Constraint] {
        &self.le
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.eq.push(Constraint { coeffs, rhs });
        self.eq.len() - 1
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.le.push(Constraint { coeffs, rhs });
        self.le.len() - 1
    }

    /// Adds `sum coeffs >= rhs`, stored as a negated `<=` row.
    pub fn add_ge(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        let neg = coeffs.into_iter().map(|(j, v)| (j, -v)).collect();
        self.add_le(neg, -rhs)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Usage("bound vectors do not match variable count".into()));
        }
        if let Some(c) = self.objective.iter().find(|c| !c.is_finite()) {
            return Err(Error::Usage(format!("non-finite objective coefficient {c}")));
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] || self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(Error::Usage(format!(
                    "variable {j} has empty bound interval [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(Error::Usage(format!("variable {j} has an unattainable bound")));
            }
        }
        for row in self.eq.iter().chain(&self.le) {
            if !row.rhs.is_finite() {
                return Err(Error::Usage(format!("non-finite right-hand side {}", row.rhs)));
            }
            for &(j, v) in &row.coeffs {
                if j >= n {
                    return Err(Error::Usage(format!("row references variable {j} of {n}")));
                }
                if !v.is_finite() {
                    return Err(Error::Usage(format!("non-finite coefficient {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at point `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let row_value = |r: &Constraint| -> f64 { r.coeffs.iter().map(|&(j, v)| v * x[j]).sum() };
        let mut worst: f64 = 0.0;
        for r in &self.eq {
            worst = worst.max((row_value(r) - r.rhs).abs());
        }
        for r in &self.le {
            worst = worst.max(row_value(r) - r.rhs);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    fn var_name(&self, j: usize) -> String {
        match &self.names {
            Some(names) => names[j].clone(),
            None => format!("x{j}"),
        }
    }

    /// Writes the program in the CPLEX LP text format for cross-checking
    /// against external solvers.
    pub fn write_lp_format<W: Write>(&self, mut w: W) -> io::Result<()> {
        let term = |v: f64, j: usize, first: bool| -> String {
            let sign = if v < 0.0 { "-" } else if first { "" } else { "+" };
            format!("{sign} {:.17e} {}", v.abs(), self.var_name(j))
        };
        let line = |coeffs: &[(usize, f64)]| -> String {
            if coeffs.is_empty() {
                return "0 x0".to_string();
            }
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &(j, v))| term(v, j, k == 0))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(
            w,
            "{}",
            match self.sense {
                Sense::Minimize => "Minimize",
                Sense::Maximize => "Maximize",
            }
        )?;
        let obj: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| (j, *c))
            .collect();
        writeln!(w, " obj: {}", line(&obj))?;
        writeln!(w, "Subject To")?;
        for (i, r) in self.eq.iter().enumerate() {
            writeln!(w, " e{i}: {} = {:.17e}", line(&r.coeffs), r.rhs)?;
        }
        for (i, r) in self.le.iter().enumerate() {
            writeln!(w, " l{i}: {} <= {:.17e}", line(&r.coeffs), r.rhs)?;
        }
        writeln!(w, "Bounds")?;
        for j in 0..self.num_vars() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let name = self.var_name(j);
            match (lo.is_finite(), hi.is_finite()) {
                (false, false) => writeln!(w, " {name} free")?,
                (true, false) => writeln!(w, " {name} >= {lo:.17e}")?,
                (false, true) => writeln!(w, " -inf <= {name} <= {hi:.17e}")?,
                (true, true) => writeln!(w, " {lo:.17e} <= {name} <= {hi:.17e}")?,
            }
        }
        writeln!(w, "End")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericFailure,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::NumericFailure => "numeric-failure",
        };
        f.write_str(s)
    }
}

/// Position of each internal column (structural, slack, artificial) relative
/// to the basis. Reusable as a warm start for a program of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub(crate) rows: usize,
    pub(crate) status: Vec<VarStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarStatus {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

#[derive(Debug, Clone)]
pub struct LPSolution {
    pub status: LpStatus,
    /// Objective in the program's own sense; NaN unless optimal.
    pub objective: f64,
    /// Primal values of the structural variables; present iff optimal.
    pub x: Option<Vec<f64>>,
    pub iterations: usize,
    pub basis: Option<Basis>,
}

impl LPSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Converts non-optimal outcomes into errors.
    pub fn into_optimal(self, context: &str) -> Result<(f64, Vec<f64>)> {
        match (self.status, self.x) {
            (LpStatus::Optimal, Some(x)) => Ok((self.objective, x)),
            (LpStatus::Infeasible, _) => Err(Error::Domain(format!("{context}: infeasible"))),
            (status, _) => Err(Error::Numeric(format!("{context}: {status}"))),
        }
    }
}
