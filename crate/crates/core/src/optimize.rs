//! Derivative-free minimization (Nelder–Mead) over small real vectors.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;

use crate::error::{Error, Result};

struct Objective<F> {
    f: F,
}

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let v = (self.f)(p);
        // keep the simplex away from NaN regions instead of aborting
        Ok(if v.is_finite() { v } else { f64::MAX })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Edge length of the initial simplex.
    pub step: f64,
    pub max_iters: u64,
    /// Stop once the standard deviation of simplex costs falls below this.
    pub tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            step: 0.3,
            max_iters: 4000,
            tolerance: 1e-13,
        }
    }
}

/// Minimizes `f` starting from `x0`; returns the best point and its value.
pub fn minimize<F>(f: F, x0: &[f64], opts: NelderMeadOptions) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += opts.step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(opts.tolerance)
        .map_err(|e| Error::Numeric(format!("Nelder-Mead setup: {e}")))?;
    let res = Executor::new(Objective { f }, solver)
        .configure(|state| state.max_iters(opts.max_iters))
        .run()
        .map_err(|e| Error::Numeric(format!("Nelder-Mead: {e}")))?;
    let state = res.state();
    let best = state
        .get_best_param()
        .cloned()
        .ok_or_else(|| Error::Numeric("Nelder-Mead produced no iterate".into()))?;
    Ok((best, state.get_best_cost()))
}

/// Runs [`minimize`] from every start, restarting once from each local
/// optimum, and keeps the overall best.
pub fn minimize_multistart<F>(f: F, starts: &[Vec<f64>], opts: NelderMeadOptions) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let (x, _) = minimize(&f, s, opts)?;
        let (x, v) = minimize(&f, &x, NelderMeadOptions { step: opts.step * 0.1, ..opts })?;
        if best.as_ref().map_or(true, |b| v < b.1) {
            best = Some((x, v));
        }
    }
    best.ok_or_else(|| Error::Usage("no starting points".into()))
}
