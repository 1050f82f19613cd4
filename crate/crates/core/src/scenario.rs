//! Bell-scenario algebra.
//!
//! Index conventions shared by every module:
//!
//! * bipartite behaviors are flat vectors indexed row-major by `(a, b, x, y)`,
//!   i.e. `((a * 2 + b) * m + x) * m + y`;
//! * correlators `<A_x B_y>` are indexed row-major by `(x, y)`;
//! * local deterministic strategies are columns ordered lexicographically by
//!   the truth tables `(f_a(0), .., f_a(m-1))` then `(f_b(0), .., f_b(m-1))`;
//! * outcome `0` corresponds to the eigenvalue `+1`, so `<A> = 1` means
//!   `p(0|x) = 1`;
//! * the tripartite joint distribution over `(a0, a1, b0, b1, c0, c1)` is
//!   indexed with `a0` as the most significant bit.

use crate::error::{Error, Result};

/// Entries this far outside `[-1, 1]` are clamped instead of rejected.
const RANGE_SLACK: f64 = 1e-9;

pub const MIN_SETTINGS: usize = 2;
pub const MAX_STRATEGY_SETTINGS: usize = 6;

fn check_range(values: &mut [f64], what: &str) -> Result<()> {
    for (i, v) in values.iter_mut().enumerate() {
        if !v.is_finite() || v.abs() > 1.0 + RANGE_SLACK {
            return Err(Error::Usage(format!(
                "{what} entry {i} = {v} is outside [-1, 1]"
            )));
        }
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(())
}

/// Full-correlator vector `<A_x B_y>` of a bipartite scenario with `m`
/// dichotomic settings per party.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorVector {
    m: usize,
    values: Vec<f64>,
}

impl CorrelatorVector {
    pub fn new(m: usize, mut values: Vec<f64>) -> Result<Self> {
        if m < MIN_SETTINGS {
            return Err(Error::Config(format!("m = {m} must be at least 2")));
        }
        if values.len() != m * m {
            return Err(Error::Usage(format!(
                "expected {} correlators for m = {m}, got {}",
                m * m,
                values.len()
            )));
        }
        check_range(&mut values, "correlator")?;
        Ok(Self { m, values })
    }

    /// Infers `m` from the length, which must be a perfect square.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let m = (values.len() as f64).sqrt().round() as usize;
        Self::new(m, values)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[x * self.m + y]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Relabels the outcomes of Alice's setting `x` (flips the sign of row `x`).
    pub fn flip_alice(&self, x: usize) -> Self {
        let mut out = self.clone();
        for y in 0..self.m {
            out.values[x * self.m + y] *= -1.0;
        }
        out
    }

    /// Relabels the outcomes of Bob's setting `y` (flips the sign of column `y`).
    pub fn flip_bob(&self, y: usize) -> Self {
        let mut out = self.clone();
        for x in 0..self.m {
            out.values[x * self.m + y] *= -1.0;
        }
        out
    }

    /// Exchanges the roles of the two parties.
    pub fn swap_parties(&self) -> Self {
        let m = self.m;
        let values = (0..m * m).map(|i| self.get(i % m, i / m)).collect();
        Self { m, values }
    }

    /// Relabels settings: new row `x` is old row `alice[x]`, new column `y`
    /// is old column `bob[y]`.
    pub fn permute_settings(&self, alice: &[usize], bob: &[usize]) -> Self {
        let m = self.m;
        let values = (0..m * m)
            .map(|i| self.get(alice[i / m], bob[i % m]))
            .collect();
        Self { m, values }
    }
}

#[inline]
pub fn bipartite_index(m: usize, a: usize, b: usize, x: usize, y: usize) -> usize {
    ((a * 2 + b) * m + x) * m + y
}

/// Conditional distribution `p(ab|xy)` for binary outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteBehavior {
    m: usize,
    p: Vec<f64>,
}

impl BipartiteBehavior {
    pub fn new(m: usize, p: Vec<f64>) -> Result<Self> {
        if m < MIN_SETTINGS || p.len() != 4 * m * m {
            return Err(Error::Usage(format!(
                "behavior for m = {m} needs {} entries, got {}",
                4 * m * m,
                p.len()
            )));
        }
        Ok(Self { m, p })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[bipartite_index(self.m, a, b, x, y)]
    }

    /// Alice's marginal `p(a|x)` as seen from setting pair `(x, y)`.
    pub fn alice_marginal(&self, a: usize, x: usize, y: usize) -> f64 {
        self.get(a, 0, x, y) + self.get(a, 1, x, y)
    }

    pub fn bob_marginal(&self, b: usize, x: usize, y: usize) -> f64 {
        self.get(0, b, x, y) + self.get(1, b, x, y)
    }

    /// Checks non-negativity, normalization and no-signaling within `tol`.
    pub fn check(&self, tol: f64) -> std::result::Result<(), String> {
        let m = self.m;
        if let Some(v) = self.p.iter().find(|v| **v < -tol) {
            return Err(format!("negative probability {v}"));
        }
        for x in 0..m {
            for y in 0..m {
                let s: f64 = (0..4).map(|ab| self.get(ab / 2, ab % 2, x, y)).sum();
                if (s - 1.0).abs() > tol {
                    return Err(format!("block ({x},{y}) sums to {s}"));
                }
            }
        }
        for x in 0..m {
            for y in 0..m {
                for o in 0..2 {
                    let da = self.alice_marginal(o, x, y) - self.alice_marginal(o, x, 0);
                    let db = self.bob_marginal(o, x, y) - self.bob_marginal(o, 0, y);
                    if da.abs() > tol || db.abs() > tol {
                        return Err(format!("signaling at settings ({x},{y})"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// 0/1 matrix of all local deterministic strategies.
#[derive(Debug, Clone)]
pub struct StrategyMatrix {
    m: usize,
    rows: usize,
    cols: usize,
    entries: Vec<u8>,
}

impl StrategyMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.entries[row * self.cols + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| f64::from(self.get(r, col))).collect()
    }

    /// Outcome of Alice's deterministic function for strategy `col` at setting `x`.
    pub fn alice_outcome(&self, col: usize, x: usize) -> usize {
        let fa = col >> self.m;
        (fa >> (self.m - 1 - x)) & 1
    }

    pub fn bob_outcome(&self, col: usize, y: usize) -> usize {
        let fb = col & ((1 << self.m) - 1);
        (fb >> (self.m - 1 - y)) & 1
    }

    /// Correlators `<A_x B_y>` of the deterministic strategy in column `col`.
    pub fn correlators(&self, col: usize) -> Vec<f64> {
        let m = self.m;
        (0..m * m)
            .map(|i| {
                let s = self.alice_outcome(col, i / m) ^ self.bob_outcome(col, i % m);
                if s == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    }
}

pub fn build_strategy_matrix(m: usize) -> Result<StrategyMatrix> {
    if !(MIN_SETTINGS..=MAX_STRATEGY_SETTINGS).contains(&m) {
        return Err(Error::Config(format!(
            "strategy matrix needs 2 <= m <= 6, got {m}"
        )));
    }
    let rows = 4 * m * m;
    let cols = 1usize << (2 * m);
    let mut sm = StrategyMatrix {
        m,
        rows,
        cols,
        entries: vec![0; rows * cols],
    };
    for col in 0..cols {
        for x in 0..m {
            for y in 0..m {
                let a = sm.alice_outcome(col, x);
                let b = sm.bob_outcome(col, y);
                sm.entries[bipartite_index(m, a, b, x, y) * cols + col] = 1;
            }
        }
    }
    Ok(sm)
}

/// Linear map from a behavior vector to its full correlators.
#[derive(Debug, Clone)]
pub struct CorrelatorMap {
    m: usize,
    matrix: Vec<f64>,
}

impl CorrelatorMap {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Row `(x, y)` of the map, length `4 m^2`.
    pub fn row(&self, x: usize, y: usize) -> &[f64] {
        let n = 4 * self.m * self.m;
        let r = x * self.m + y;
        &self.matrix[r * n..(r + 1) * n]
    }

    pub fn apply(&self, behavior: &BipartiteBehavior) -> Vec<f64> {
        let m = self.m;
        (0..m * m)
            .map(|r| {
                self.row(r / m, r % m)
                    .iter()
                    .zip(behavior.probabilities())
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect()
    }
}

pub fn build_correlator_map(m: usize) -> Result<CorrelatorMap> {
    if m < MIN_SETTINGS {
        return Err(Error::Config(format!("m = {m} must be at least 2")));
    }
    let n = 4 * m * m;
    let mut matrix = vec![0.0; m * m * n];
    for x in 0..m {
        for y in 0..m {
            for a in 0..2 {
                for b in 0..2 {
                    let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    matrix[(x * m + y) * n + bipartite_index(m, a, b, x, y)] = sign;
                }
            }
        }
    }
    Ok(CorrelatorMap { m, matrix })
}

/// Canonical no-signaling completion with unbiased marginals:
/// `p(ab|xy) = (1 + (-1)^(a+b) c_xy) / 4`.
pub fn behavior_from_correlators(c: &CorrelatorVector) -> BipartiteBehavior {
    let m = c.m();
    let mut p = vec![0.0; 4 * m * m];
    for x in 0..m {
        for y in 0..m {
            let cxy = c.get(x, y);
            for a in 0..2 {
                for b in 0..2 {
                    let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    p[bipartite_index(m, a, b, x, y)] = (1.0 + sign * cxy) / 4.0;
                }
            }
        }
    }
    BipartiteBehavior { m, p }
}

/// The four CHSH expressions obtained by placing the minus sign on each
/// correlator in turn, in absolute value.
pub fn chsh_symmetries(c: &CorrelatorVector) -> Result<[f64; 4]> {
    if c.m() != 2 {
        return Err(Error::Usage(format!(
            "CHSH symmetries need m = 2, got m = {}",
            c.m()
        )));
    }
    let v = c.values();
    let total: f64 = v.iter().sum();
    Ok([
        (total - 2.0 * v[0]).abs(),
        (total - 2.0 * v[1]).abs(),
        (total - 2.0 * v[2]).abs(),
        (total - 2.0 * v[3]).abs(),
    ])
}

pub fn max_chsh(c: &CorrelatorVector) -> Result<f64> {
    Ok(chsh_symmetries(c)?.into_iter().fold(0.0, f64::max))
}

/// Tripartite full correlators `<A_x B_y C_z>` (indexed `x*4 + y*2 + z`)
/// plus Alice's marginals `<A_0>, <A_1>`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripartiteCorrelators {
    pub abc: [f64; 8],
    pub a_marg: [f64; 2],
}

impl TripartiteCorrelators {
    pub fn new(abc: [f64; 8], a_marg: [f64; 2]) -> Result<Self> {
        let mut all = [0.0; 10];
        all[..8].copy_from_slice(&abc);
        all[8..].copy_from_slice(&a_marg);
        Self::from_features(&all)
    }

    /// Builds from the 10-feature layout `(<A0B0C0>, .., <A1B1C1>, <A0>, <A1>)`.
    pub fn from_features(f: &[f64]) -> Result<Self> {
        if f.len() != 10 {
            return Err(Error::Usage(format!(
                "tripartite correlators need 10 values, got {}",
                f.len()
            )));
        }
        let mut v = f.to_vec();
        check_range(&mut v, "tripartite correlator")?;
        let mut abc = [0.0; 8];
        abc.copy_from_slice(&v[..8]);
        Ok(Self {
            abc,
            a_marg: [v[8], v[9]],
        })
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.abc[x * 4 + y * 2 + z]
    }

    pub fn features(&self) -> Vec<f64> {
        self.abc.iter().chain(self.a_marg.iter()).copied().collect()
    }

    /// The 4-feature view `(I, J, <A0>, <A1>)`.
    pub fn ij_features(&self) -> [f64; 4] {
        let (i, j) = ij_functionals(self);
        [i, j, self.a_marg[0], self.a_marg[1]]
    }

    /// Correlators of a deterministic joint assignment `(a0,a1,b0,b1,c0,c1)`.
    pub fn deterministic(joint: usize) -> Self {
        let o = |bit: usize| if (joint >> bit) & 1 == 0 { 1.0 } else { -1.0 };
        let a = [o(5), o(4)];
        let b = [o(3), o(2)];
        let c = [o(1), o(0)];
        let mut abc = [0.0; 8];
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    abc[x * 4 + y * 2 + z] = a[x] * b[y] * c[z];
                }
            }
        }
        Self { abc, a_marg: a }
    }
}

/// Number of entries of the joint distribution over `(a0,a1,b0,b1,c0,c1)`.
pub const JOINT_SIZE: usize = 64;

/// Bit of outcome `o_s` for party `party` (0 = A, 1 = B, 2 = C) and setting `s`
/// inside a joint index.
#[inline]
pub fn joint_outcome(joint: usize, party: usize, setting: usize) -> usize {
    let bit = 5 - (2 * party + setting);
    (joint >> bit) & 1
}

#[inline]
pub fn tripartite_index(a: usize, b: usize, c: usize, x: usize, y: usize, z: usize) -> usize {
    ((((a * 2 + b) * 2 + c) * 2 + x) * 2 + y) * 2 + z
}

/// Conditional distribution `p(abc|xyz)` for binary outcomes and settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TripartiteBehavior {
    p: Vec<f64>,
}

impl TripartiteBehavior {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() != 64 {
            return Err(Error::Usage(format!(
                "tripartite behavior needs 64 entries, got {}",
                p.len()
            )));
        }
        Ok(Self { p })
    }

    /// Deterministic marginalization of a joint distribution over
    /// `(a0,a1,b0,b1,c0,c1)`.
    pub fn from_joint(q: &[f64]) -> Result<Self> {
        if q.len() != JOINT_SIZE {
            return Err(Error::Usage(format!(
                "joint distribution needs 64 entries, got {}",
                q.len()
            )));
        }
        let mut p = vec![0.0; 64];
        for (j, &w) in q.iter().enumerate() {
            for x in 0..2 {
                for y in 0..2 {
                    for z in 0..2 {
                        let a = joint_outcome(j, 0, x);
                        let b = joint_outcome(j, 1, y);
                        let c = joint_outcome(j, 2, z);
                        p[tripartite_index(a, b, c, x, y, z)] += w;
                    }
                }
            }
        }
        Ok(Self { p })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, a: usize, b: usize, c: usize, x: usize, y: usize, z: usize) -> f64 {
        self.p[tripartite_index(a, b, c, x, y, z)]
    }

    pub fn check(&self, tol: f64) -> std::result::Result<(), String> {
        if let Some(v) = self.p.iter().find(|v| **v < -tol) {
            return Err(format!("negative probability {v}"));
        }
        for s in 0..8 {
            let (x, y, z) = (s >> 2, (s >> 1) & 1, s & 1);
            let total: f64 = (0..8)
                .map(|o| self.get(o >> 2, (o >> 1) & 1, o & 1, x, y, z))
                .sum();
            if (total - 1.0).abs() > tol {
                return Err(format!("settings ({x},{y},{z}) sum to {total}"));
            }
        }
        Ok(())
    }

    /// `<A_x B_y C_z>` and `<A_x>` (the latter read at `y = z = 0`).
    pub fn correlators(&self) -> TripartiteCorrelators {
        let sign = |o: usize| if o == 0 { 1.0 } else { -1.0 };
        let mut abc = [0.0; 8];
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    abc[x * 4 + y * 2 + z] = (0..8)
                        .map(|o| {
                            let (a, b, c) = (o >> 2, (o >> 1) & 1, o & 1);
                            sign(a) * sign(b) * sign(c) * self.get(a, b, c, x, y, z)
                        })
                        .sum();
                }
            }
        }
        let mut a_marg = [0.0; 2];
        for (x, am) in a_marg.iter_mut().enumerate() {
            *am = (0..8)
                .map(|o| {
                    let (a, b, c) = (o >> 2, (o >> 1) & 1, o & 1);
                    sign(a) * self.get(a, b, c, x, 0, 0)
                })
                .sum();
        }
        TripartiteCorrelators { abc, a_marg }
    }
}

/// `I = 1/4 sum_{x,z} <A_x B_0 C_z>` and
/// `J = 1/4 sum_{x,z} (-1)^(x+z) <A_x B_1 C_z>`.
pub fn ij_functionals(t: &TripartiteCorrelators) -> (f64, f64) {
    let mut i = 0.0;
    let mut j = 0.0;
    for x in 0..2 {
        for z in 0..2 {
            let sign = if (x + z) % 2 == 0 { 1.0 } else { -1.0 };
            i += t.get(x, 0, z);
            j += sign * t.get(x, 1, z);
        }
    }
    (i / 4.0, j / 4.0)
}

/// Left-hand side of the bilocality inequality `sqrt|I| + sqrt|J| <= 1`.
pub fn bilocal_inequality_value(i: f64, j: f64) -> f64 {
    i.abs().sqrt() + j.abs().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn cv(v: &[f64]) -> CorrelatorVector {
        CorrelatorVector::from_values(v.to_vec()).unwrap()
    }

    #[test]
    fn strategy_matrix_shapes() {
        let a2 = build_strategy_matrix(2).unwrap();
        assert_eq!((a2.rows(), a2.cols()), (16, 16));
        let a3 = build_strategy_matrix(3).unwrap();
        assert_eq!((a3.rows(), a3.cols()), (36, 64));
        assert!(build_strategy_matrix(1).is_err());
        assert!(build_strategy_matrix(7).is_err());
    }

    #[test]
    fn strategy_columns_are_deterministic_behaviors() {
        for m in 2..=4 {
            let a = build_strategy_matrix(m).unwrap();
            for col in 0..a.cols() {
                let b = BipartiteBehavior::new(m, a.column(col)).unwrap();
                b.check(0.0).unwrap();
                for x in 0..m {
                    for y in 0..m {
                        let ones: u8 = (0..4).map(|ab| a.get(bipartite_index(m, ab / 2, ab % 2, x, y), col)).sum();
                        assert_eq!(ones, 1);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_zero_strategy_column() {
        let a = build_strategy_matrix(2).unwrap();
        for row in 0..16 {
            let expected = u8::from(row < 4); // a = 0, b = 0 rows come first
            assert_eq!(a.get(row, 0), expected, "row {row}");
        }
    }

    #[test]
    fn correlator_map_examples() {
        let map = build_correlator_map(2).unwrap();
        let white = BipartiteBehavior::new(2, vec![0.25; 16]).unwrap();
        assert_eq!(map.apply(&white), vec![0.0; 4]);

        let mut det = vec![0.0; 16];
        for x in 0..2 {
            for y in 0..2 {
                det[bipartite_index(2, 0, 0, x, y)] = 1.0;
            }
        }
        let det = BipartiteBehavior::new(2, det).unwrap();
        assert_eq!(map.apply(&det), vec![1.0; 4]);

        let mut pr = vec![0.0; 16];
        for (a, b, x, y) in itertools_4() {
            if (a ^ b) == (x & y) {
                pr[bipartite_index(2, a, b, x, y)] = 0.5;
            }
        }
        let pr = BipartiteBehavior::new(2, pr).unwrap();
        pr.check(1e-15).unwrap();
        assert_eq!(map.apply(&pr), vec![1.0, 1.0, 1.0, -1.0]);
    }

    fn itertools_4() -> impl Iterator<Item = (usize, usize, usize, usize)> {
        (0..16).map(|i| (i >> 3, (i >> 2) & 1, (i >> 1) & 1, i & 1))
    }

    #[test]
    fn canonical_completion_examples() {
        let b = behavior_from_correlators(&cv(&[0.0; 4]));
        assert!(b.probabilities().iter().all(|p| *p == 0.25));

        let pr = behavior_from_correlators(&cv(&[1.0, 1.0, 1.0, -1.0]));
        for (a, b, x, y) in itertools_4() {
            let expect = if (a ^ b) == (x & y) { 0.5 } else { 0.0 };
            assert_eq!(pr.get(a, b, x, y), expect);
        }

        let perfect = behavior_from_correlators(&cv(&[1.0; 4]));
        for x in 0..2 {
            for y in 0..2 {
                assert_eq!(perfect.get(0, 0, x, y), 0.5);
                assert_eq!(perfect.get(1, 1, x, y), 0.5);
            }
        }
    }

    #[test]
    fn chsh_examples() {
        // minus sign on c00, c01, c10, c11 in turn
        assert_eq!(chsh_symmetries(&cv(&[1.0, 1.0, 1.0, -1.0])).unwrap(), [0.0, 0.0, 0.0, 4.0]);
        let t = chsh_symmetries(&cv(&[S, S, S, -S])).unwrap();
        let expect = [0.0, 0.0, 0.0, 2.0 * 2f64.sqrt()];
        for (a, b) in t.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(chsh_symmetries(&cv(&[0.0; 4])).unwrap(), [0.0; 4]);
        assert!(chsh_symmetries(&cv(&[0.0; 9])).is_err());
    }

    #[test]
    fn ij_examples() {
        let ones = TripartiteCorrelators::new([1.0; 8], [0.0; 2]).unwrap();
        assert_eq!(ij_functionals(&ones), (1.0, 0.0));

        let v2 = 0.7 * 0.7;
        let mut abc = [0.0; 8];
        for x in 0..2 {
            for z in 0..2 {
                let sign = if (x + z) % 2 == 0 { 1.0 } else { -1.0 };
                abc[x * 4 + z] = v2;
                abc[x * 4 + 2 + z] = sign * v2;
            }
        }
        let (i, j) = ij_functionals(&TripartiteCorrelators::new(abc, [0.0; 2]).unwrap());
        assert!((i - v2).abs() < 1e-15 && (j - v2).abs() < 1e-15);

        let zero = TripartiteCorrelators::new([0.0; 8], [0.0; 2]).unwrap();
        assert_eq!(ij_functionals(&zero), (0.0, 0.0));
    }

    #[test]
    fn inequality_value_examples() {
        assert_eq!(bilocal_inequality_value(1.0, 0.0), 1.0);
        assert!((bilocal_inequality_value(0.5, 0.5) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(bilocal_inequality_value(0.0, 0.0), 0.0);
        assert_eq!(bilocal_inequality_value(-0.3, 0.2), bilocal_inequality_value(0.3, -0.2));
    }

    #[test]
    fn joint_marginalization_matches_deterministic_correlators() {
        for joint in 0..JOINT_SIZE {
            let mut q = vec![0.0; JOINT_SIZE];
            q[joint] = 1.0;
            let p = TripartiteBehavior::from_joint(&q).unwrap();
            p.check(0.0).unwrap();
            assert_eq!(p.correlators(), TripartiteCorrelators::deterministic(joint));
        }
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(CorrelatorVector::new(2, vec![1.5, 0.0, 0.0, 0.0]).is_err());
        assert!(CorrelatorVector::new(2, vec![0.0; 3]).is_err());
        let c = CorrelatorVector::new(2, vec![1.0 + 1e-12, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
    }
}
