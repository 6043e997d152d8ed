//! Diagonal operator models, modal data vectors and forcing.
//!
//! `A` and `B` act diagonally on a shared orthonormal eigenbasis `e_n`:
//! `A e_n = a_n e_n`, `B e_n = b_n e_n`, so `A_0^2 = A^2 + B` has diagonal
//! `a_n^2 + b_n`. Eigenvalues may repeat.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the `f_n(0) = 0` admissibility constraint.
pub const FORCING_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorModel {
    /// `A^2 y = -y''` on `(0, pi)` with Dirichlet ends; eigenvalues `a_n = n`.
    Dirichlet1d,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub a: f64,
    pub b: f64,
}

impl Mode {
    /// Diagonal entry of `A_0^2`.
    pub fn a0_sq(&self) -> f64 {
        self.a * self.a + self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    modes: Vec<Mode>,
    kappa: f64,
    model: OperatorModel,
}

impl OperatorSpec {
    pub fn explicit(a: &[f64], b: &[f64], kappa: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        if a.is_empty() {
            return Err(Error::InvalidOperator("at least one mode required".into()));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidOperator(format!(
                "kappa must lie in (0, 1), got {kappa}"
            )));
        }
        for (i, (&an, &bn)) in a.iter().zip(b).enumerate() {
            let n = i + 1;
            if !(an.is_finite() && an > 0.0) {
                return Err(Error::InvalidOperator(format!(
                    "a_{n} must be positive, got {an}"
                )));
            }
            if i > 0 && an < a[i - 1] {
                return Err(Error::InvalidOperator(format!(
                    "a_n must be nondecreasing: a_{n} = {an} < a_{} = {}",
                    n - 1,
                    a[i - 1]
                )));
            }
            if !(bn.is_finite() && bn >= 0.0) {
                return Err(Error::InvalidOperator(format!(
                    "b_{n} must be nonnegative, got {bn}"
                )));
            }
            if bn > kappa * an * an {
                return Err(Error::InvalidOperator(format!(
                    "b_{n} = {bn} exceeds kappa * a_{n}^2 = {}",
                    kappa * an * an
                )));
            }
        }
        Ok(Self {
            modes: a.iter().zip(b).map(|(&a, &b)| Mode { a, b }).collect(),
            kappa,
            model: OperatorModel::Explicit,
        })
    }

    /// `a_n = n`, `b_n = 0`; eigenfunctions `sqrt(2/pi) sin(n x)`.
    pub fn dirichlet_laplacian_1d(n_max: usize) -> Self {
        assert!(n_max >= 1, "n_max must be at least 1");
        Self {
            modes: (1..=n_max)
                .map(|n| Mode {
                    a: n as f64,
                    b: 0.0,
                })
                .collect(),
            kappa: 0.5,
            model: OperatorModel::Dirichlet1d,
        }
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, n: usize) -> Mode {
        self.modes[n - 1]
    }

    pub fn n_max(&self) -> usize {
        self.modes.len()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn model(&self) -> OperatorModel {
        self.model
    }

    pub fn has_zero_b(&self) -> bool {
        self.modes.iter().all(|m| m.b == 0.0)
    }

    /// First `n` modes of this operator.
    pub fn truncate(&self, n: usize) -> Self {
        Self {
            modes: self.modes[..n.min(self.modes.len())].to_vec(),
            kappa: self.kappa,
            model: self.model,
        }
    }

    /// `(sum_n (a_n^2 + b_n)^beta |v_n|^2)^{1/2}`, the norm of `H_beta`.
    pub fn h_beta_norm(&self, v: &ModeVector, beta: f64) -> Result<f64> {
        if v.len() != self.modes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.modes.len(),
                got: v.len(),
            });
        }
        Ok(v.0
            .iter()
            .zip(&self.modes)
            .map(|(x, m)| m.a0_sq().powf(beta) * x * x)
            .sum::<f64>()
            .sqrt())
    }
}

/// Modal coefficients `v_n = (v, e_n)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeVector(pub Vec<f64>);

impl ModeVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Unit vector `e_n` (1-based) of length `len`.
    pub fn basis(n: usize, len: usize) -> Self {
        let mut v = vec![0.0; len];
        v[n - 1] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Component `n` (1-based); zero past the end.
    pub fn get(&self, n: usize) -> f64 {
        self.0.get(n - 1).copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|x| x * s).collect())
    }

    /// Pads with zeros or truncates to `len`.
    pub fn resized(&self, len: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(len, 0.0);
        Self(v)
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// One term `alpha * t^m * exp(mu t)` of an exponential polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpPolyTerm {
    pub alpha: f64,
    pub m: u32,
    pub mu: f64,
}

impl ExpPolyTerm {
    pub fn new(alpha: f64, m: u32, mu: f64) -> Self {
        Self { alpha, m, mu }
    }

    /// `d^order/dt^order` of the term, by Leibniz on `t^m` and `exp(mu t)`.
    pub fn derivative(&self, t: f64, order: u32) -> f64 {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=order {
            // j derivatives on t^m, the rest on exp(mu t)
            if j > self.m {
                break;
            }
            let mut falling = 1.0;
            for i in 0..j {
                falling *= (self.m - i) as f64;
            }
            let power = self.m - j;
            let tp = if power == 0 {
                1.0
            } else {
                t.powi(power as i32)
            };
            acc += binom * falling * tp * self.mu.powi((order - j) as i32);
            binom = binom * (order - j) as f64 / (j + 1) as f64;
        }
        self.alpha * acc * (self.mu * t).exp()
    }
}

/// Sampled forcing on a shared time grid; evaluation is approximate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledForcing {
    pub t: Vec<f64>,
    /// `values[n-1][i] = f_n(t_i)`.
    pub values: Vec<Vec<f64>>,
}

/// Per-mode forcing `f_n(t)`. Modes past the listed ones are unforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingSpec {
    ExpPoly(Vec<Vec<ExpPolyTerm>>),
    Sampled(SampledForcing),
}

impl Default for ForcingSpec {
    fn default() -> Self {
        ForcingSpec::ExpPoly(Vec::new())
    }
}

impl ForcingSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Closed-form forcing; rejects any mode with `f_n(0) != 0`.
    pub fn exp_poly(modes: Vec<Vec<ExpPolyTerm>>) -> Result<Self> {
        let spec = ForcingSpec::ExpPoly(modes);
        spec.validate()?;
        Ok(spec)
    }

    /// The same term set on modes `1..=n_modes`.
    pub fn uniform(terms: &[ExpPolyTerm], n_modes: usize) -> Result<Self> {
        Self::exp_poly(vec![terms.to_vec(); n_modes])
    }

    pub fn sampled(t: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let spec = ForcingSpec::Sampled(SampledForcing { t, values });
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ForcingSpec::ExpPoly(modes) => {
                for (i, terms) in modes.iter().enumerate() {
                    for term in terms {
                        if !(term.alpha.is_finite() && term.mu.is_finite()) {
                            return Err(Error::InvalidForcing(format!(
                                "mode {}: non-finite term {term:?}",
                                i + 1
                            )));
                        }
                    }
                    let at_zero: f64 = terms.iter().filter(|t| t.m == 0).map(|t| t.alpha).sum();
                    if at_zero.abs() > FORCING_ZERO_TOL {
                        return Err(Error::InvalidForcing(format!(
                            "mode {}: f_n(0) = {at_zero} but f(0) = 0 is required",
                            i + 1
                        )));
                    }
                }
            }
            ForcingSpec::Sampled(s) => {
                if s.t.len() < 2 {
                    return Err(Error::InvalidForcing(
                        "sampled grid needs two points".into(),
                    ));
                }
                if s.t[0] != 0.0 {
                    return Err(Error::InvalidForcing(
                        "sampled grid must start at t = 0".into(),
                    ));
                }
                if s.t.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidForcing(
                        "sampled grid must be strictly increasing".into(),
                    ));
                }
                for (i, row) in s.values.iter().enumerate() {
                    if row.len() != s.t.len() {
                        return Err(Error::DimensionMismatch {
                            expected: s.t.len(),
                            got: row.len(),
                        });
                    }
                    if row[0].abs() > FORCING_ZERO_TOL {
                        return Err(Error::InvalidForcing(format!(
                            "mode {}: f_n(0) = {} but f(0) = 0 is required",
                            i + 1,
                            row[0]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ForcingSpec::ExpPoly(modes) => modes
                .iter()
                .all(|terms| terms.iter().all(|t| t.alpha == 0.0)),
            ForcingSpec::Sampled(s) => s.values.iter().all(|row| row.iter().all(|&v| v == 0.0)),
        }
    }

    pub fn is_approximate(&self) -> bool {
        matches!(self, ForcingSpec::Sampled(_))
    }

    /// Closed-form terms for mode `n`, if any.
    pub fn terms(&self, n: usize) -> Option<&[ExpPolyTerm]> {
        match self {
            ForcingSpec::ExpPoly(modes) => Some(modes.get(n - 1).map_or(&[][..], |v| v.as_slice())),
            ForcingSpec::Sampled(_) => None,
        }
    }

    /// Multiplies every mode by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            ForcingSpec::ExpPoly(modes) => ForcingSpec::ExpPoly(
                modes
                    .iter()
                    .map(|terms| {
                        terms
                            .iter()
                            .map(|t| ExpPolyTerm {
                                alpha: t.alpha * s,
                                ..*t
                            })
                            .collect()
                    })
                    .collect(),
            ),
            ForcingSpec::Sampled(f) => ForcingSpec::Sampled(SampledForcing {
                t: f.t.clone(),
                values: f
                    .values
                    .iter()
                    .map(|row| row.iter().map(|v| v * s).collect())
                    .collect(),
            }),
        }
    }

    /// `f_n^{(order)}(t)`. Closed-form terms support any order; the sampled
    /// fallback uses linear interpolation (order 0) and the segment slope
    /// (order 1).
    pub fn eval(&self, n: usize, t: f64, order: u32) -> Result<f64> {
        match self {
            ForcingSpec::ExpPoly(modes) => Ok(modes
                .get(n - 1)
                .map(|terms| terms.iter().map(|term| term.derivative(t, order)).sum())
                .unwrap_or(0.0)),
            ForcingSpec::Sampled(s) => {
                let lo = s.t[0];
                let hi = *s.t.last().unwrap();
                if !(t >= lo && t <= hi) {
                    return Err(Error::OutOfGrid { t, lo, hi });
                }
                let Some(row) = s.values.get(n - 1) else {
                    return Ok(0.0);
                };
                let i = match s.t.partition_point(|&x| x <= t) {
                    0 => 0,
                    p if p >= s.t.len() => s.t.len() - 2,
                    p => p - 1,
                };
                let h = s.t[i + 1] - s.t[i];
                let slope = (row[i + 1] - row[i]) / h;
                match order {
                    0 => Ok(row[i] + slope * (t - s.t[i])),
                    1 => Ok(slope),
                    _ => Err(Error::InvalidForcing(
                        "sampled forcing supports derivative orders 0 and 1 only".into(),
                    )),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_eigenvalues() {
        let op = OperatorSpec::dirichlet_laplacian_1d(3);
        let a: Vec<f64> = op.modes().iter().map(|m| m.a).collect();
        assert_eq!(a, vec![1.0, 2.0, 3.0]);
        assert!(op.has_zero_b());
        assert_eq!(OperatorSpec::dirichlet_laplacian_1d(1).mode(1).a, 1.0);
        assert_eq!(OperatorSpec::dirichlet_laplacian_1d(64).mode(64).a, 64.0);
    }

    #[test]
    fn h_beta_examples() {
        let op = OperatorSpec::dirichlet_laplacian_1d(2);
        assert_eq!(op.h_beta_norm(&ModeVector::basis(1, 2), 2.0).unwrap(), 1.0);
        assert_eq!(op.h_beta_norm(&ModeVector::zeros(2), 3.0).unwrap(), 0.0);
        let v = ModeVector(vec![1.0, 1.0]);
        assert!((op.h_beta_norm(&v, 1.0).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            op.h_beta_norm(&ModeVector::zeros(3), 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn explicit_operator_validation() {
        assert!(OperatorSpec::explicit(&[1.0, 2.0], &[0.1, 0.5], 0.5).is_ok());
        assert!(OperatorSpec::explicit(&[2.0, 1.0], &[0.0, 0.0], 0.5).is_err());
        assert!(OperatorSpec::explicit(&[1.0], &[0.9], 0.5).is_err());
        assert!(OperatorSpec::explicit(&[1.0], &[0.0], 1.0).is_err());
        assert!(OperatorSpec::explicit(&[0.0], &[0.0], 0.5).is_err());
        // repeated eigenvalues are allowed
        assert!(OperatorSpec::explicit(&[1.0, 1.0, 2.0], &[0.0; 3], 0.5).is_ok());
    }

    #[test]
    fn forcing_examples() {
        let f = ForcingSpec::uniform(&[ExpPolyTerm::new(1.0, 1, 0.0)], 1).unwrap();
        assert_eq!(f.eval(1, 2.0, 0).unwrap(), 2.0);
        assert_eq!(f.eval(1, 2.0, 1).unwrap(), 1.0);
        let f = ForcingSpec::uniform(
            &[
                ExpPolyTerm::new(1.0, 0, -1.0),
                ExpPolyTerm::new(-1.0, 0, -2.0),
            ],
            1,
        )
        .unwrap();
        assert_eq!(f.eval(1, 0.0, 0).unwrap(), 0.0);
        assert_eq!(f.eval(2, 1.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn forcing_rejects_nonzero_start() {
        let err = ForcingSpec::uniform(&[ExpPolyTerm::new(1.0, 0, -1.0)], 2).unwrap_err();
        assert!(matches!(err, Error::InvalidForcing(_)));
        assert!(ForcingSpec::sampled(vec![0.0, 1.0], vec![vec![0.5, 1.0]]).is_err());
    }

    #[test]
    fn exp_poly_derivatives_match_finite_differences() {
        let term = ExpPolyTerm::new(1.3, 3, -0.7);
        let h = 1e-5;
        for &t in &[0.3, 1.0, 2.5] {
            for order in 0..3 {
                let fd =
                    (term.derivative(t + h, order) - term.derivative(t - h, order)) / (2.0 * h);
                let exact = term.derivative(t, order + 1);
                assert!(
                    (fd - exact).abs() < 1e-7 * (1.0 + exact.abs()),
                    "order {order} t {t}"
                );
            }
        }
    }

    #[test]
    fn sampled_forcing_interpolates() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let values = vec![t.iter().map(|x| 2.0 * x).collect()];
        let f = ForcingSpec::sampled(t, values).unwrap();
        assert!(f.is_approximate());
        assert!((f.eval(1, 0.55, 0).unwrap() - 1.1).abs() < 1e-14);
        assert!((f.eval(1, 0.55, 1).unwrap() - 2.0).abs() < 1e-12);
        assert!((f.eval(1, 1.0, 0).unwrap() - 2.0).abs() < 1e-14);
        assert!(matches!(f.eval(1, 1.5, 0), Err(Error::OutOfGrid { .. })));
    }
}
