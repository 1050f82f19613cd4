//! Ridge-regularized polynomial least squares used as the member filter
//! reference.

use bellnet_core::{Error, Result};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1};

use crate::mlp::Xy;

pub const DEFAULT_DEGREE: usize = 4;
pub const DEFAULT_RIDGE: f64 = 1e-8;
/// Largest number of monomials fitted before falling back to degree 2.
pub const DEFAULT_TERM_CAP: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyBaseline {
    pub degree: usize,
    /// Each monomial as the multiset of feature indices it multiplies; the
    /// empty monomial is the intercept.
    pub terms: Vec<Vec<usize>>,
    pub coef: Vec<f64>,
}

/// All monomials of total degree `<= degree` in `k` variables, lowest degree first.
pub fn monomials(k: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..degree {
        let mut next = Vec::new();
        for t in &frontier {
            let start = t.last().copied().unwrap_or(0);
            for i in start..k {
                let mut u = t.clone();
                u.push(i);
                next.push(u);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Number of monomials of degree `<= degree` in `k` variables, `C(k + d, d)`.
pub fn monomial_count(k: usize, degree: usize) -> usize {
    (1..=degree).fold(1usize, |acc, i| acc * (k + i) / i)
}

fn design(x: &Array2<f64>, terms: &[Vec<usize>]) -> Array2<f64> {
    let mut d = Array2::ones((x.nrows(), terms.len()));
    for (r, row) in x.rows().into_iter().enumerate() {
        for (c, t) in terms.iter().enumerate() {
            d[(r, c)] = t.iter().map(|&i| row[i]).product();
        }
    }
    d
}

impl PolyBaseline {
    pub fn fit(data: &Xy, degree: usize, ridge: f64, term_cap: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Usage("cannot fit a baseline on no data".into()));
        }
        let k = data.width();
        let mut degree = degree;
        if monomial_count(k, degree) > term_cap {
            log::warn!(
                "degree-{degree} expansion of {k} features needs {} terms (cap {term_cap}); using degree 2",
                monomial_count(k, degree)
            );
            degree = 2;
        }
        let terms = monomials(k, degree);
        let p = terms.len();
        let n = data.len() as f64;
        let a = design(&data.x, &terms);
        let gram = a.t().dot(&a) / n;
        let rhs = a.t().dot(&data.y) / n;
        let mut g = DMatrix::from_fn(p, p, |i, j| gram[(i, j)]);
        for i in 0..p {
            g[(i, i)] += ridge;
        }
        let b = DVector::from_iterator(p, rhs.iter().copied());
        let coef = match g.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => g
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::Numeric("baseline normal equations are singular".into()))?,
        };
        Ok(Self {
            degree,
            terms,
            coef: coef.iter().copied().collect(),
        })
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        self.terms
            .iter()
            .zip(&self.coef)
            .map(|(t, c)| c * t.iter().map(|&i| x[i]).product::<f64>())
            .sum()
    }

    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }
}

pub fn mean_absolute_error(pred: ArrayView1<f64>, target: ArrayView1<f64>) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(target.iter()).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64
}

/// Fits on `train` and returns the model with its mean absolute error on `test`.
pub fn fit_poly_baseline(train: &Xy, test: &Xy, degree: usize) -> Result<(PolyBaseline, f64)> {
    let model = PolyBaseline::fit(train, degree, DEFAULT_RIDGE, DEFAULT_TERM_CAP)?;
    let mae = mean_absolute_error(model.predict(&test.x).view(), test.y.view());
    Ok((model, mae))
}
