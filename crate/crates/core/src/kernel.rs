//! Exponential-sum (Prony) memory kernels.
//!
//! A kernel pair is stored on a shared decay grid:
//!
//! ```text
//! K(t) = sum_j c_j exp(-gamma_j t),   Q(t) = sum_j d_j exp(-gamma_j t)
//! ```
//!
//! with `c_j > 0`, `d_j >= 0` and `0 < gamma_1 < gamma_2 < ...`. A term with
//! `d_j = 0` simply means the rate is absent from `Q`. Infinite families
//! are handled by truncation at construction time (see
//! [`KernelSpec::truncated_family`]).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect_increasing;

/// Relative guard around the poles `-gamma_j`.
pub const POLE_TOL: f64 = 1e-12;
/// Absolute tolerance on the real zeros of `g`.
pub const ZERO_TOL: f64 = 1e-13;
pub const ZERO_MAX_ITER: usize = 200;
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub c: f64,
    #[serde(default)]
    pub d: f64,
    pub gamma: f64,
}

/// Selects which of the two kernels sharing the decay grid to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    K,
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    terms: Vec<KernelTerm>,
    /// Set when the terms are a finite truncation of an infinite family.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDiagnostics {
    pub k_at_zero: f64,
    pub q_at_zero: f64,
    pub stability_index: f64,
    pub q_index: f64,
    pub classification: Stability,
}

/// Finite-data report on the growth conditions imposed on infinite decay
/// families. Nothing here can decide the conditions; it only reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub j_max: usize,
    /// `max_{k <= j_max} gamma_k (gamma_{k+1} - gamma_k)`.
    pub running_max_gap_product: f64,
    pub argmax_k: usize,
    /// `sum_{j <= j_max} gamma_j^{-3/2}`.
    pub partial_sum_inv_three_halves: f64,
    /// True when `gamma_k (gamma_{k+1} - gamma_k)` never decreases in `k`.
    pub monotone_growth: bool,
}

pub(crate) fn validate_terms(terms: &[KernelTerm]) -> std::result::Result<(), (usize, String)> {
    for (j, t) in terms.iter().enumerate() {
        if !(t.c.is_finite() && t.c > 0.0) {
            return Err((j, format!("term {j}: c must be positive, got {}", t.c)));
        }
        if !(t.d.is_finite() && t.d >= 0.0) {
            return Err((j, format!("term {j}: d must be nonnegative, got {}", t.d)));
        }
        if !(t.gamma.is_finite() && t.gamma > 0.0) {
            return Err((
                j,
                format!("term {j}: gamma must be positive, got {}", t.gamma),
            ));
        }
        if j > 0 && t.gamma <= terms[j - 1].gamma {
            return Err((
                j,
                format!(
                    "term {j}: gamma must be strictly increasing ({} after {})",
                    t.gamma,
                    terms[j - 1].gamma
                ),
            ));
        }
    }
    Ok(())
}

impl KernelSpec {
    pub fn new(terms: Vec<KernelTerm>) -> Result<Self> {
        validate_terms(&terms).map_err(|(_, msg)| Error::InvalidKernel(msg))?;
        Ok(Self {
            terms,
            truncated: false,
        })
    }

    /// Kernel-free degenerate case.
    pub fn empty() -> Self {
        Self {
            terms: Vec::new(),
            truncated: false,
        }
    }

    /// `K`-only kernel (`d_j = 0`).
    pub fn from_k(c: &[f64], gamma: &[f64]) -> Result<Self> {
        Self::from_kq(c, &vec![0.0; c.len()], gamma)
    }

    pub fn from_kq(c: &[f64], d: &[f64], gamma: &[f64]) -> Result<Self> {
        if c.len() != gamma.len() || d.len() != gamma.len() {
            return Err(Error::InvalidKernel(format!(
                "weight/rate length mismatch: c={}, d={}, gamma={}",
                c.len(),
                d.len(),
                gamma.len()
            )));
        }
        let terms = c
            .iter()
            .zip(d)
            .zip(gamma)
            .map(|((&c, &d), &gamma)| KernelTerm { c, d, gamma })
            .collect();
        Self::new(terms)
    }

    /// First `n_terms` members of an infinite family given by a rule
    /// `j -> (c_j, d_j, gamma_j)`, `j = 1, 2, ...`.
    pub fn truncated_family<F>(rule: F, n_terms: usize) -> Result<Self>
    where
        F: Fn(usize) -> (f64, f64, f64),
    {
        let terms = (1..=n_terms)
            .map(|j| {
                let (c, d, gamma) = rule(j);
                KernelTerm { c, d, gamma }
            })
            .collect();
        let mut spec = Self::new(terms)?;
        spec.truncated = true;
        Ok(spec)
    }

    /// Parses `{"terms":[{"c":..,"d":..,"gamma":..}, ..]}`. Violations are
    /// reported with the line of the offending term.
    pub fn from_json_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            terms: Vec<KernelTerm>,
            #[serde(default)]
            truncated: bool,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Config {
            line: e.line(),
            message: e.to_string(),
        })?;
        if let Err((j, message)) = validate_terms(&raw.terms) {
            let line = crate::config::locate_array_element(text, "terms", j).unwrap_or(0);
            return Err(Error::Config { line, message });
        }
        Ok(Self {
            terms: raw.terms,
            truncated: raw.truncated,
        })
    }

    /// Marks the kernel as a truncation of an infinite family.
    pub fn into_truncated(mut self) -> Self {
        self.truncated = true;
        self
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn gammas(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|t| t.gamma)
    }

    fn weight(term: &KernelTerm, which: Which) -> f64 {
        match which {
            Which::K => term.c,
            Which::Q => term.d,
        }
    }

    /// `K(t)` or `Q(t)`.
    pub fn eval(&self, t: f64, which: Which) -> f64 {
        debug_assert!(t >= 0.0);
        self.terms
            .iter()
            .map(|term| Self::weight(term, which) * (-term.gamma * t).exp())
            .sum()
    }

    pub fn at_zero(&self, which: Which) -> f64 {
        self.terms.iter().map(|t| Self::weight(t, which)).sum()
    }

    pub(crate) fn check_pole(&self, lambda: Complex64) -> Result<()> {
        for (j, term) in self.terms.iter().enumerate() {
            if (lambda + term.gamma).norm() < POLE_TOL * term.gamma.max(1.0) {
                return Err(Error::PoleEvaluation {
                    lambda,
                    index: j + 1,
                    pole: -term.gamma,
                });
            }
        }
        Ok(())
    }

    /// Laplace transform `sum_j w_j / (lambda + gamma_j)`.
    pub fn laplace_hat(&self, lambda: Complex64, which: Which) -> Result<Complex64> {
        self.check_pole(lambda)?;
        Ok(self.laplace_hat_unchecked(lambda, which))
    }

    pub(crate) fn laplace_hat_unchecked(&self, lambda: Complex64, which: Which) -> Complex64 {
        self.terms
            .iter()
            .map(|t| Self::weight(t, which) / (lambda + t.gamma))
            .sum()
    }

    pub fn diagnostics(&self, boundary_tol: f64) -> KernelDiagnostics {
        assert!(boundary_tol > 0.0, "boundary_tol must be positive");
        let stability_index: f64 = self.terms.iter().map(|t| t.c / t.gamma).sum();
        let q_index: f64 = self.terms.iter().map(|t| t.d / t.gamma).sum();
        let classification = if (stability_index - 1.0).abs() <= boundary_tol {
            Stability::Boundary
        } else if stability_index < 1.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        };
        KernelDiagnostics {
            k_at_zero: self.at_zero(Which::K),
            q_at_zero: self.at_zero(Which::Q),
            stability_index,
            q_index,
            classification,
        }
    }

    /// `g(lambda) = 1 - sum_k c_k / (lambda + gamma_k)` on the real line.
    pub fn g_eval(&self, lambda: f64) -> Result<f64> {
        self.check_pole(Complex64::new(lambda, 0.0))?;
        Ok(self.g_unchecked(lambda))
    }

    fn g_unchecked(&self, lambda: f64) -> f64 {
        1.0 - self
            .terms
            .iter()
            .map(|t| t.c / (lambda + t.gamma))
            .sum::<f64>()
    }

    /// Real zeros `x_1 > x_2 > ... > x_N` of `g`, one per pole interval.
    ///
    /// `x_k` lies in `(-gamma_k, -gamma_{k-1})` for `k >= 2` and `x_1` in
    /// `(-gamma_1, inf)`; `g` increases strictly on each interval.
    pub fn g_real_zeros(&self) -> Result<Vec<f64>> {
        if self.terms.is_empty() {
            return Err(Error::InvalidKernel(
                "g has no real zeros for an empty kernel".into(),
            ));
        }
        let mut zeros = Vec::with_capacity(self.terms.len());
        for k in 0..self.terms.len() {
            let gk = self.terms[k].gamma;
            let lo = -gk + 1e-10 * (1.0 + gk);
            let hi = if k == 0 {
                let mut step = 1.0;
                let mut hi = -gk + step;
                let mut tries = 0;
                while self.g_unchecked(hi) <= 0.0 {
                    step *= 2.0;
                    hi = -gk + step;
                    tries += 1;
                    if tries > ZERO_MAX_ITER {
                        return Err(Error::BracketFailure {
                            lo,
                            hi,
                            f_lo: self.g_unchecked(lo),
                            f_hi: self.g_unchecked(hi),
                        });
                    }
                }
                hi
            } else {
                let gp = self.terms[k - 1].gamma;
                -gp - 1e-10 * (1.0 + gp)
            };
            let (f_lo, f_hi) = (self.g_unchecked(lo), self.g_unchecked(hi));
            if !(f_lo < 0.0 && f_hi > 0.0) {
                return Err(Error::BracketFailure { lo, hi, f_lo, f_hi });
            }
            zeros.push(bisect_increasing(
                |x| self.g_unchecked(x),
                lo,
                hi,
                ZERO_TOL,
                ZERO_MAX_ITER,
            ));
        }
        Ok(zeros)
    }
}

/// Diagnostics for a parametric decay family `gamma_j = rule(j)`, `j >= 1`.
pub fn asymptotic_diagnostics<F: Fn(usize) -> f64>(rule: F, j_max: usize) -> AsymptoticReport {
    assert!(j_max >= 2, "j_max must be at least 2");
    let mut running = f64::NEG_INFINITY;
    let mut argmax = 1;
    let mut prev_product = f64::NEG_INFINITY;
    let mut monotone = true;
    let mut partial = 0.0;
    for k in 1..=j_max {
        let g = rule(k);
        let product = g * (rule(k + 1) - g);
        if product > running {
            running = product;
            argmax = k;
        }
        if product < prev_product {
            monotone = false;
        }
        prev_product = product;
        partial += g.powf(-1.5);
    }
    AsymptoticReport {
        j_max,
        running_max_gap_product: running,
        argmax_k: argmax,
        partial_sum_inv_three_halves: partial,
        monotone_growth: monotone,
    }
}
