//! Multivariate polynomials with exact gradients and Hessians.
//!
//! Everything downstream that needs derivatives of a Hamiltonian or of a vector
//! field gets them by term-by-term differentiation of these polynomials, never by
//! finite differences.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One monomial `coeff * prod_i x_i^{exps[i]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub exps: Vec<u32>,
}

/// A polynomial on `R^dim` stored as a list of monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.exps.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.exps.len(),
                });
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            dim,
            terms: vec![Monomial {
                coeff: c,
                exps: vec![0; dim],
            }],
        }
    }

    /// The coordinate function `x_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut exps = vec![0; dim];
        exps[i] = 1;
        Self {
            dim,
            terms: vec![Monomial { coeff: 1.0, exps }],
        }
    }

    /// Convenience builder from `(coeff, exps)` pairs.
    pub fn from_terms(dim: usize, terms: &[(f64, &[u32])]) -> Result<Self> {
        Self::new(
            dim,
            terms
                .iter()
                .map(|(c, e)| Monomial {
                    coeff: *c,
                    exps: e.to_vec(),
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff == 0.0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|t| t.coeff != 0.0)
            .map(|t| t.exps.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        for t in &self.terms {
            let mut v = t.coeff;
            for (i, &e) in t.exps.iter().enumerate() {
                v *= powi(x[i], e);
            }
            acc += v;
        }
        acc
    }

    /// Exact partial derivative `d/dx_i`.
    pub fn partial(&self, i: usize) -> Self {
        let mut terms = Vec::new();
        for t in &self.terms {
            let e = t.exps[i];
            if e == 0 || t.coeff == 0.0 {
                continue;
            }
            let mut exps = t.exps.clone();
            exps[i] = e - 1;
            terms.push(Monomial {
                coeff: t.coeff * e as f64,
                exps,
            });
        }
        Self {
            dim: self.dim,
            terms,
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for t in &self.terms {
            if t.coeff == 0.0 {
                continue;
            }
            for i in 0..self.dim {
                let e = t.exps[i];
                if e == 0 {
                    continue;
                }
                let mut v = t.coeff * e as f64 * powi(x[i], e - 1);
                for (j, &ej) in t.exps.iter().enumerate() {
                    if j != i {
                        v *= powi(x[j], ej);
                    }
                }
                g[i] += v;
            }
        }
        g
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim;
        let mut h = DMatrix::zeros(d, d);
        for t in &self.terms {
            if t.coeff == 0.0 {
                continue;
            }
            for i in 0..d {
                let ei = t.exps[i];
                if ei == 0 {
                    continue;
                }
                // diagonal entry d^2/dx_i^2
                if ei >= 2 {
                    let mut v = t.coeff * (ei * (ei - 1)) as f64 * powi(x[i], ei - 2);
                    for (j, &ej) in t.exps.iter().enumerate() {
                        if j != i {
                            v *= powi(x[j], ej);
                        }
                    }
                    h[(i, i)] += v;
                }
                // off-diagonal d^2/dx_i dx_j, j > i
                for j in (i + 1)..d {
                    let ej = t.exps[j];
                    if ej == 0 {
                        continue;
                    }
                    let mut v =
                        t.coeff * (ei * ej) as f64 * powi(x[i], ei - 1) * powi(x[j], ej - 1);
                    for (l, &el) in t.exps.iter().enumerate() {
                        if l != i && l != j {
                            v *= powi(x[l], el);
                        }
                    }
                    h[(i, j)] += v;
                    h[(j, i)] += v;
                }
            }
        }
        h
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| Monomial {
                    coeff: c * t.coeff,
                    exps: t.exps.clone(),
                })
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self {
            dim: self.dim,
            terms,
        }
        .compacted())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let exps = a.exps.iter().zip(&b.exps).map(|(x, y)| x + y).collect();
                terms.push(Monomial {
                    coeff: a.coeff * b.coeff,
                    exps,
                });
            }
        }
        Ok(Self {
            dim: self.dim,
            terms,
        }
        .compacted())
    }

    /// The composition `x -> p(M x)` with a linear map, expanded exactly.
    pub fn compose_linear(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: m.nrows(),
            });
        }
        let rows: Vec<Polynomial> = (0..self.dim)
            .map(|i| {
                let terms = (0..self.dim)
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| {
                        let mut exps = vec![0; self.dim];
                        exps[j] = 1;
                        Monomial {
                            coeff: m[(i, j)],
                            exps,
                        }
                    })
                    .collect();
                Polynomial {
                    dim: self.dim,
                    terms,
                }
            })
            .collect();
        let mut acc = Polynomial::zero(self.dim);
        for t in &self.terms {
            if t.coeff == 0.0 {
                continue;
            }
            let mut term = Polynomial::constant(self.dim, t.coeff);
            for (i, &e) in t.exps.iter().enumerate() {
                for _ in 0..e {
                    term = term.mul(&rows[i])?;
                }
            }
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    /// Merge duplicate exponent patterns and drop zero terms.
    pub fn compacted(&self) -> Self {
        let mut merged: Vec<Monomial> = Vec::new();
        for t in &self.terms {
            if let Some(m) = merged.iter_mut().find(|m| m.exps == t.exps) {
                m.coeff += t.coeff;
            } else {
                merged.push(t.clone());
            }
        }
        merged.retain(|m| m.coeff != 0.0);
        Self {
            dim: self.dim,
            terms: merged,
        }
    }
}

/// A univariate polynomial in one scalar (used for time weights and radial profiles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPoly {
    /// Coefficients in increasing degree order.
    pub coeffs: Vec<f64>,
}

impl ScalarPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn eval(&self, t: f64) -> f64 {
        // Horner
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::constant(0.0);
        }
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| i as f64 * c)
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::constant(0.0);
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Self { coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|i| {
                self.coeffs.get(i).copied().unwrap_or(0.0)
                    - other.coeffs.get(i).copied().unwrap_or(0.0)
            })
            .collect();
        Self { coeffs }
    }
}

#[inline]
fn powi(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(e as i32),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(p: &Polynomial, x: &DVector<f64>, h: f64) -> DVector<f64> {
        let mut g = DVector::zeros(p.dim());
        for i in 0..p.dim() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            g[i] = (p.eval(&xp) - p.eval(&xm)) / (2.0 * h);
        }
        g
    }

    fn fd_hessian(p: &Polynomial, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
        let d = p.dim();
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let gp = fd_gradient(p, &xp, h);
            let gm = fd_gradient(p, &xm, h);
            for i in 0..d {
                m[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        m
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        // H = p1^2 q2 + 0.5 |x|^2 - 3 p1 q1 p2 on R^4
        let p = Polynomial::from_terms(
            4,
            &[
                (1.0, &[2, 0, 0, 1]),
                (0.5, &[2, 0, 0, 0]),
                (0.5, &[0, 2, 0, 0]),
                (0.5, &[0, 0, 2, 0]),
                (0.5, &[0, 0, 0, 2]),
                (-3.0, &[1, 1, 1, 0]),
            ],
        )
        .unwrap();
        for _ in 0..20 {
            let x = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let g = p.gradient(&x);
            let gfd = fd_gradient(&p, &x, 1e-5);
            assert!((g - &gfd).amax() <= 1e-6 * (1.0 + gfd.amax()));
            let h = p.hessian(&x);
            let hfd = fd_hessian(&p, &x, 1e-4);
            assert!((h - &hfd).amax() <= 1e-5 * (1.0 + hfd.amax()));
        }
    }

    #[test]
    fn mul_and_add_agree_with_pointwise() {
        let a = Polynomial::from_terms(2, &[(2.0, &[1, 0]), (1.0, &[0, 2])]).unwrap();
        let b = Polynomial::from_terms(2, &[(1.0, &[1, 1]), (-1.0, &[0, 0])]).unwrap();
        let prod = a.mul(&b).unwrap();
        let sum = a.add(&b).unwrap();
        let x = DVector::from_vec(vec![0.7, -1.3]);
        assert!((prod.eval(&x) - a.eval(&x) * b.eval(&x)).abs() < 1e-14);
        assert!((sum.eval(&x) - (a.eval(&x) + b.eval(&x))).abs() < 1e-14);
    }

    #[test]
    fn compose_linear_matches_pointwise() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = Polynomial::from_terms(
            4,
            &[
                (1.0, &[2, 0, 0, 1]),
                (-0.5, &[1, 1, 1, 0]),
                (2.0, &[0, 0, 0, 3]),
            ],
        )
        .unwrap();
        let m = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let composed = p.compose_linear(&m).unwrap();
        for _ in 0..20 {
            let x = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let direct = p.eval(&(&m * &x));
            assert!((composed.eval(&x) - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn scalar_poly_horner_and_derivative() {
        let p = ScalarPoly::new(vec![1.0, -2.0, 3.0]); // 1 - 2t + 3t^2
        assert!((p.eval(0.5) - (1.0 - 1.0 + 0.75)).abs() < 1e-15);
        let d = p.derivative();
        assert_eq!(d.coeffs, vec![-2.0, 6.0]);
    }
}
