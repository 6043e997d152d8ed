//! Scalar mode symbols
//!
//! ```text
//! l_n(lambda) = lambda^2 + a_n^2 + b_n - a_n^2 K^(lambda) - b_n Q^(lambda)
//! ```
//!
//! and their pole-cleared polynomial form
//! `p_n(lambda) = l_n(lambda) * prod_k (lambda + gamma_k)`. With `b_n = 0`
//! this is the classical symbol of the projected equation; the `b_n` terms
//! are the diagonal restriction of the full operator symbol.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, Which};
use crate::operator::OperatorSpec;

/// Largest kernel size for which the monomial expansion is produced.
pub const MAX_POLY_TERMS: usize = 40;

#[derive(Debug, Clone, Copy)]
pub struct ModeSymbol<'a> {
    pub n: usize,
    pub a_sq: f64,
    pub b: f64,
    pub kernel: &'a KernelSpec,
}

impl<'a> ModeSymbol<'a> {
    pub fn new(n: usize, a_sq: f64, b: f64, kernel: &'a KernelSpec) -> Self {
        assert!(
            a_sq > 0.0 && b >= 0.0,
            "a_sq must be positive and b nonnegative"
        );
        Self { n, a_sq, b, kernel }
    }

    /// Symbol of mode `n` (1-based) of `op`.
    pub fn for_mode(op: &OperatorSpec, n: usize, kernel: &'a KernelSpec) -> Self {
        let m = op.mode(n);
        Self::new(n, m.a * m.a, m.b, kernel)
    }

    pub fn a(&self) -> f64 {
        self.a_sq.sqrt()
    }

    pub fn eval(&self, lambda: Complex64) -> Result<Complex64> {
        self.kernel.check_pole(lambda)?;
        Ok(self.eval_unchecked(lambda))
    }

    pub(crate) fn eval_unchecked(&self, lambda: Complex64) -> Complex64 {
        let k = self.kernel.laplace_hat_unchecked(lambda, Which::K);
        let q = if self.b == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            self.kernel.laplace_hat_unchecked(lambda, Which::Q)
        };
        lambda * lambda + self.a_sq + self.b - k * self.a_sq - q * self.b
    }

    /// `l_n'(lambda) = 2 lambda + sum_k (a^2 c_k + b d_k) / (lambda + gamma_k)^2`.
    pub fn derivative(&self, lambda: Complex64) -> Result<Complex64> {
        self.kernel.check_pole(lambda)?;
        Ok(self.derivative_unchecked(lambda))
    }

    pub(crate) fn derivative_unchecked(&self, lambda: Complex64) -> Complex64 {
        let memory: Complex64 = self
            .kernel
            .terms()
            .iter()
            .map(|t| {
                let z = lambda + t.gamma;
                (self.a_sq * t.c + self.b * t.d) / (z * z)
            })
            .sum();
        2.0 * lambda + memory
    }

    /// Expands `l_n(lambda) prod_k (lambda + gamma_k)` in the monomial basis.
    pub fn to_polynomial(&self) -> Result<PolySymbol> {
        let terms = self.kernel.terms();
        if terms.len() > MAX_POLY_TERMS {
            return Err(Error::ConditioningRefusal {
                terms: terms.len(),
                limit: MAX_POLY_TERMS,
            });
        }
        // descending coefficients
        let product = |skip: Option<usize>| {
            let mut acc = vec![1.0];
            for (j, t) in terms.iter().enumerate() {
                if Some(j) == skip {
                    continue;
                }
                acc = mul_linear(&acc, t.gamma);
            }
            acc
        };
        let full = product(None);
        let quad = [1.0, 0.0, self.a_sq + self.b];
        let mut coeffs = convolve(&quad, &full);
        let degree = coeffs.len() - 1;
        for (k, t) in terms.iter().enumerate() {
            let w = self.a_sq * t.c + self.b * t.d;
            if w == 0.0 {
                continue;
            }
            let partial = product(Some(k));
            let offset = degree - (partial.len() - 1);
            for (i, p) in partial.iter().enumerate() {
                coeffs[offset + i] -= w * p;
            }
        }
        Ok(PolySymbol { coeffs })
    }
}

/// Multiplies a descending-order polynomial by `(x + root_shift)`.
fn mul_linear(p: &[f64], shift: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (i, &c) in p.iter().enumerate() {
        out[i] += c;
        out[i + 1] += c * shift;
    }
    out
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monic polynomial, coefficients in descending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySymbol {
    pub coeffs: Vec<f64>,
}

impl PolySymbol {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }
}
