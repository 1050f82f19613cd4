//! Born-rule correlators for projective qubit measurements.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::optimize::{minimize_multistart, NelderMeadOptions};
use crate::scenario::{max_chsh, CorrelatorVector, TripartiteCorrelators};

type C64 = Complex<f64>;

/// Unit Bloch vector `(x, y, z)` of a dichotomic observable `n . sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bloch(pub [f64; 3]);

impl Bloch {
    pub const Z: Bloch = Bloch([0.0, 0.0, 1.0]);
    pub const X: Bloch = Bloch([1.0, 0.0, 0.0]);

    /// Direction in the X-Z plane at `angle` from the Z axis towards X.
    pub fn xz(angle: f64) -> Self {
        Bloch([angle.sin(), 0.0, angle.cos()])
    }

    pub fn from_angles(polar: f64, azimuth: f64) -> Self {
        Bloch([polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()])
    }

    fn check(&self) -> Result<()> {
        let n2: f64 = self.0.iter().map(|v| v * v).sum();
        if !n2.is_finite() || (n2 - 1.0).abs() > 1e-9 {
            return Err(Error::Usage(format!("Bloch vector {:?} is not a unit vector", self.0)));
        }
        Ok(())
    }

    fn observable(&self) -> DMatrix<C64> {
        let [x, y, z] = self.0;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(z, 0.0),
                C64::new(x, -y),
                C64::new(x, y),
                C64::new(-z, 0.0),
            ],
        )
    }
}

/// Pure two-qubit state `cos θ |00> + sin θ |11>` measured with one Bloch
/// direction per setting and party.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSettings {
    pub theta: f64,
    pub alice: Vec<Bloch>,
    pub bob: Vec<Bloch>,
}

/// Measurement directions for the two-source swap network. Bob measures the
/// product observable `bob[y][0] ⊗ bob[y][1]` on his two qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapSettings {
    pub alice: [Bloch; 2],
    pub bob: [[Bloch; 2]; 2],
    pub charlie: [Bloch; 2],
}

impl SwapSettings {
    /// End parties measure `(Z ± X)/√2`, the middle party `Z⊗Z` and `X⊗X`;
    /// this maximizes `sqrt|I| + sqrt|J|` for two maximally entangled sources.
    pub fn standard() -> Self {
        let plus = Bloch::xz(FRAC_PI_4);
        let minus = Bloch::xz(-FRAC_PI_4);
        SwapSettings {
            alice: [plus, minus],
            bob: [[Bloch::Z, Bloch::Z], [Bloch::X, Bloch::X]],
            charlie: [plus, minus],
        }
    }

    /// All eight directions restricted to the X-Z plane, in the order
    /// `alice[0..2], bob[0][0..2], bob[1][0..2], charlie[0..2]`.
    pub fn from_xz_angles(a: &[f64]) -> Self {
        SwapSettings {
            alice: [Bloch::xz(a[0]), Bloch::xz(a[1])],
            bob: [[Bloch::xz(a[2]), Bloch::xz(a[3])], [Bloch::xz(a[4]), Bloch::xz(a[5])]],
            charlie: [Bloch::xz(a[6]), Bloch::xz(a[7])],
        }
    }

    fn check(&self) -> Result<()> {
        self.alice
            .iter()
            .chain(self.bob.iter().flatten())
            .chain(self.charlie.iter())
            .try_for_each(Bloch::check)
    }
}

fn identity2() -> DMatrix<C64> {
    DMatrix::identity(2, 2)
}

fn kron_all(ops: &[DMatrix<C64>]) -> DMatrix<C64> {
    ops.iter()
        .skip(1)
        .fold(ops[0].clone(), |acc, op| acc.kronecker(op))
}

fn expectation(op: &DMatrix<C64>, rho: &DMatrix<C64>) -> f64 {
    (op * rho).trace().re
}

/// Density matrix of `cos θ |00> + sin θ |11>`.
pub fn pure_state(theta: f64) -> DMatrix<C64> {
    let mut psi = DMatrix::<C64>::zeros(4, 1);
    psi[(0, 0)] = C64::new(theta.cos(), 0.0);
    psi[(3, 0)] = C64::new(theta.sin(), 0.0);
    &psi * psi.adjoint()
}

/// `v |Φ+><Φ+| + (1 - v) 1/4`.
pub fn werner_state(v: f64) -> DMatrix<C64> {
    pure_state(FRAC_PI_4) * C64::new(v, 0.0) + DMatrix::identity(4, 4) * C64::new((1.0 - v) / 4.0, 0.0)
}

/// Exact `<A_x B_y> = Tr[(a_x.σ ⊗ b_y.σ) ρ]` for the pure state of `q`.
pub fn quantum_bipartite_correlators(q: &QuantumSettings, m: usize) -> Result<CorrelatorVector> {
    if q.alice.len() != m || q.bob.len() != m {
        return Err(Error::Usage(format!(
            "need {m} Bloch vectors per party, got {} and {}",
            q.alice.len(),
            q.bob.len()
        )));
    }
    q.alice.iter().chain(&q.bob).try_for_each(Bloch::check)?;
    let rho = pure_state(q.theta);
    let mut values = Vec::with_capacity(m * m);
    for a in &q.alice {
        for b in &q.bob {
            values.push(expectation(&a.observable().kronecker(&b.observable()), &rho));
        }
    }
    CorrelatorVector::new(m, values)
}

/// Local expectation values `(<A_x>, <B_y>)` of the pure state.
pub fn quantum_marginals(q: &QuantumSettings) -> (Vec<f64>, Vec<f64>) {
    let rho = pure_state(q.theta);
    let a = q
        .alice
        .iter()
        .map(|n| expectation(&n.observable().kronecker(&identity2()), &rho))
        .collect();
    let b = q
        .bob
        .iter()
        .map(|n| expectation(&identity2().kronecker(&n.observable()), &rho))
        .collect();
    (a, b)
}

/// Correlators of the network `A - ρ_AB - B - ρ_BC - C` with qubits ordered
/// `(A, B1, B2, C)`.
pub fn swap_correlators(
    rho_ab: &DMatrix<C64>,
    rho_bc: &DMatrix<C64>,
    s: &SwapSettings,
) -> Result<TripartiteCorrelators> {
    s.check()?;
    let rho = rho_ab.kronecker(rho_bc);
    let mut abc = [0.0; 8];
    for x in 0..2 {
        for y in 0..2 {
            for z in 0..2 {
                let op = kron_all(&[
                    s.alice[x].observable(),
                    s.bob[y][0].observable(),
                    s.bob[y][1].observable(),
                    s.charlie[z].observable(),
                ]);
                abc[x * 4 + y * 2 + z] = expectation(&op, &rho);
            }
        }
    }
    let mut a_marg = [0.0; 2];
    for (x, am) in a_marg.iter_mut().enumerate() {
        let op = kron_all(&[s.alice[x].observable(), identity2(), identity2(), identity2()]);
        *am = expectation(&op, &rho);
    }
    TripartiteCorrelators::new(abc, a_marg)
}

/// Both sources emit the Werner state of visibility `v`.
pub fn quantum_swap_correlators(v: f64, s: &SwapSettings) -> Result<TripartiteCorrelators> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Usage(format!("visibility {v} outside [0, 1]")));
    }
    let rho = werner_state(v);
    swap_correlators(&rho, &rho, s)
}

/// Both sources emit `cos θ |00> + sin θ |11>`.
pub fn quantum_swap_nonmax(theta: f64, s: &SwapSettings) -> Result<TripartiteCorrelators> {
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(Error::Usage(format!("theta {theta} outside (0, π/2)")));
    }
    let rho = pure_state(theta);
    swap_correlators(&rho, &rho, s)
}

/// Largest CHSH value attainable with `cos θ |00> + sin θ |11>`.
pub fn chsh_closed_form(theta: f64) -> f64 {
    2.0 * (1.0 + (2.0 * theta).sin().powi(2)).sqrt()
}

fn settings_from_angles(theta: f64, p: &[f64]) -> QuantumSettings {
    QuantumSettings {
        theta,
        alice: vec![Bloch::xz(p[0]), Bloch::xz(p[1])],
        bob: vec![Bloch::xz(p[2]), Bloch::xz(p[3])],
    }
}

/// X-Z plane settings maximizing the CHSH value of the pure state, found by
/// multi-start Nelder–Mead and checked against the closed form.
pub fn chsh_optimal_settings(theta: f64) -> Result<QuantumSettings> {
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(Error::Usage(format!("theta {theta} outside (0, π/2)")));
    }
    let value = |p: &[f64]| -> f64 {
        quantum_bipartite_correlators(&settings_from_angles(theta, p), 2)
            .and_then(|c| max_chsh(&c))
            .unwrap_or(0.0)
    };
    let starts: Vec<Vec<f64>> = [0.1, 0.9, 1.7, 2.5]
        .iter()
        .map(|&s| vec![s, s + PI / 3.0, s + 0.4, s - 0.8])
        .collect();
    let (p, neg) = minimize_multistart(|p| -value(p), &starts, NelderMeadOptions::default())?;
    let target = chsh_closed_form(theta);
    if -neg < target - 1e-6 {
        return Err(Error::Numeric(format!(
            "CHSH maximization stalled at {} (closed form {target}) for theta {theta}; angles {p:?}",
            -neg
        )));
    }
    Ok(settings_from_angles(theta, &p))
}
