use super::problem::{LinearProgram, LpStatus};
use super::simplex::solve;
use crate::error::{Error, Result};
use crate::scenario::{
    bipartite_index, build_correlator_map, build_strategy_matrix, CorrelatorMap, CorrelatorVector,
    StrategyMatrix,
};

/// Normalized trace distance from a correlator point to the local set.
#[derive(Debug, Clone)]
pub struct NLResult {
    pub nl: f64,
    /// Weights of the deterministic strategies in the closest local behavior.
    pub weights: Vec<f64>,
    /// No-signaling completion of the correlators attaining the minimum.
    pub completion: Vec<f64>,
    pub iterations: usize,
}

/// Reusable NL oracle for a fixed number of settings `m`.
///
/// The program has variables `(t, λ, q)`: it minimizes `sum t` subject to
/// `-t <= q - Aλ <= t`, `λ` in the simplex, `q` a normalized no-signaling
/// behavior with non-negative entries, and `M_cor q = c`.
#[derive(Debug, Clone)]
pub struct NlOracle {
    m: usize,
    strategies: StrategyMatrix,
    cmap: CorrelatorMap,
}

impl NlOracle {
    pub fn new(m: usize) -> Result<Self> {
        Ok(Self {
            m,
            strategies: build_strategy_matrix(m)?,
            cmap: build_correlator_map(m)?,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn build_lp(&self, c: &CorrelatorVector) -> LinearProgram {
        let m = self.m;
        let n = 4 * m * m;
        let l = self.strategies.cols();
        let (t0, l0, q0) = (0, n, n + l);
        let mut lp = LinearProgram::new(2 * n + l);
        for j in 0..n {
            lp.set_objective(t0 + j, 1.0);
        }

        // strategies supported on each behavior row
        let mut support: Vec<Vec<usize>> = vec![Vec::new(); n];
        for col in 0..l {
            for x in 0..m {
                for y in 0..m {
                    let a = self.strategies.alice_outcome(col, x);
                    let b = self.strategies.bob_outcome(col, y);
                    support[bipartite_index(m, a, b, x, y)].push(col);
                }
            }
        }
        for (j, cols) in support.iter().enumerate() {
            let mut up = vec![(q0 + j, 1.0), (t0 + j, -1.0)];
            let mut down = vec![(q0 + j, -1.0), (t0 + j, -1.0)];
            for &col in cols {
                up.push((l0 + col, -1.0));
                down.push((l0 + col, 1.0));
            }
            lp.add_le(up, 0.0);
            lp.add_le(down, 0.0);
        }

        lp.add_eq((0..l).map(|i| (l0 + i, 1.0)).collect(), 1.0);
        for x in 0..m {
            for y in 0..m {
                let block = (0..4).map(|ab| (q0 + bipartite_index(m, ab / 2, ab % 2, x, y), 1.0));
                lp.add_eq(block.collect(), 1.0);
            }
        }
        // no-signaling: Bob's marginal independent of x, Alice's of y
        for b in 0..2 {
            for y in 0..m {
                for x in 1..m {
                    let mut row = Vec::with_capacity(4);
                    for a in 0..2 {
                        row.push((q0 + bipartite_index(m, a, b, x, y), 1.0));
                        row.push((q0 + bipartite_index(m, a, b, 0, y), -1.0));
                    }
                    lp.add_eq(row, 0.0);
                }
            }
        }
        for a in 0..2 {
            for x in 0..m {
                for y in 1..m {
                    let mut row = Vec::with_capacity(4);
                    for b in 0..2 {
                        row.push((q0 + bipartite_index(m, a, b, x, y), 1.0));
                        row.push((q0 + bipartite_index(m, a, b, x, 0), -1.0));
                    }
                    lp.add_eq(row, 0.0);
                }
            }
        }
        for x in 0..m {
            for y in 0..m {
                let row = self
                    .cmap
                    .row(x, y)
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(j, w)| (q0 + j, *w))
                    .collect();
                lp.add_eq(row, c.get(x, y));
            }
        }
        lp
    }

    pub fn distance(&self, c: &CorrelatorVector) -> Result<NLResult> {
        if c.m() != self.m {
            return Err(Error::Usage(format!(
                "oracle built for m = {}, got correlators for m = {}",
                self.m,
                c.m()
            )));
        }
        let lp = self.build_lp(c);
        let sol = solve(&lp);
        let iterations = sol.iterations;
        if sol.status == LpStatus::Infeasible {
            return Err(Error::Numeric(
                "NL program reported infeasible for an in-range correlator point".into(),
            ));
        }
        let (value, x) = sol.into_optimal("NL program")?;
        let n = 4 * self.m * self.m;
        let l = self.strategies.cols();
        let nl = (value / (2.0 * (self.m * self.m) as f64)).max(0.0);
        Ok(NLResult {
            nl,
            weights: x[n..n + l].to_vec(),
            completion: x[n + l..].to_vec(),
            iterations,
        })
    }
}

/// `NL(c) = 1/(2 m^2) min_{p local} sum |q - p|`.
pub fn nl_distance(c: &CorrelatorVector, m: usize) -> Result<NLResult> {
    NlOracle::new(m)?.distance(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{behavior_from_correlators, BipartiteBehavior};

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn cv(v: &[f64]) -> CorrelatorVector {
        CorrelatorVector::from_values(v.to_vec()).unwrap()
    }

    // NL for m = 2 has the closed form max(0, CHSH - 2) / 8: per (x, y) block
    // sum |q - p| >= |c_xy - c'_xy|, so the l1 distance is at least the CHSH
    // excess, and moving a single correlator attains it.
    const NL_PR: f64 = 0.25;
    const NL_TSIRELSON: f64 = 0.103_553_390_593_273_8; // (2 sqrt 2 - 2) / 8

    #[test]
    fn deterministic_points_are_local() {
        let a = build_strategy_matrix(2).unwrap();
        for col in 0..a.cols() {
            let r = nl_distance(&cv(&a.correlators(col)), 2).unwrap();
            assert!(r.nl < 1e-9, "column {col}: {}", r.nl);
        }
    }

    #[test]
    fn pr_box_golden_value() {
        let r = nl_distance(&cv(&[1.0, 1.0, 1.0, -1.0]), 2).unwrap();
        assert!((r.nl - NL_PR).abs() < 1e-9, "{}", r.nl);
        let w: f64 = r.weights.iter().sum();
        assert!((w - 1.0).abs() < 1e-9);
        assert!(r.weights.iter().all(|v| *v >= -1e-9));
        BipartiteBehavior::new(2, r.completion).unwrap().check(1e-8).unwrap();
    }

    #[test]
    fn tsirelson_point_between_local_and_pr() {
        let r = nl_distance(&cv(&[S, S, S, -S]), 2).unwrap();
        assert!((r.nl - NL_TSIRELSON).abs() < 1e-9, "{}", r.nl);
        assert!(r.nl > 0.0 && r.nl < NL_PR);
    }

    #[test]
    fn canonical_completion_is_feasible_for_m3() {
        let c = cv(&[0.9, -0.8, 0.7, 0.1, 0.5, -0.95, 1.0, -1.0, 0.3]);
        let b = behavior_from_correlators(&c);
        b.check(1e-12).unwrap();
        let r = nl_distance(&c, 3).unwrap();
        assert!(r.nl >= 0.0 && r.nl <= 1.0);
    }

    #[test]
    fn wrong_m_rejected() {
        let oracle = NlOracle::new(3).unwrap();
        assert!(oracle.distance(&cv(&[0.0; 4])).is_err());
    }
}
