//! Residue-series solutions.
//!
//! Each mode is a finite sum over the zeros of its symbol:
//! `u_n(t) = sum_r (phi1 + r phi0) e^{r t} / l_n'(r) + sum_r F_r(t) / l_n'(r)`
//! with `F_r(t) = int_0^t f_n(s) e^{r (t - s)} ds`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::linspace;
use crate::operator::{ExpPolyTerm, ForcingSpec, ModeVector, OperatorModel};
use crate::spectrum::SpectrumReport;

/// Below this `|mu - lambda|` the convolution uses its confluent limit.
pub const CONFLUENCE_TOL: f64 = 1e-8;
const SAMPLED_STEP: f64 = 0.01;
const SAMPLED_MAX_STEPS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub enum ModeForcing {
    None,
    ExpPoly(Vec<ExpPolyTerm>),
    Sampled { t: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSeries {
    pub n: usize,
    pub a_sq: f64,
    pub roots: Vec<Complex64>,
    /// `1 / l_n'(root)`.
    pub weights: Vec<Complex64>,
    /// `(phi1 + root phi0) / l_n'(root)`.
    pub coefficients: Vec<Complex64>,
    pub phi0: f64,
    pub phi1: f64,
    pub forcing: ModeForcing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSeries {
    pub modes: Vec<ModeSeries>,
    pub model: OperatorModel,
    pub truncated_kernel: bool,
}

fn check_data_fits(report: &SpectrumReport, v: &ModeVector) -> Result<()> {
    let n_modes = report.spectra.len();
    match v.0.iter().skip(n_modes).position(|&x| x != 0.0) {
        Some(i) => Err(Error::MissingSpectrum(n_modes + i + 1)),
        None => Ok(()),
    }
}

fn assemble(
    report: &SpectrumReport,
    phi0: &ModeVector,
    phi1: &ModeVector,
    f: &ForcingSpec,
) -> Result<SolutionSeries> {
    check_data_fits(report, phi0)?;
    check_data_fits(report, phi1)?;
    f.validate()?;
    let modes = report
        .spectra
        .iter()
        .map(|s| {
            let n = s.n;
            let roots = s.roots();
            let (p0, p1) = (phi0.get(n), phi1.get(n));
            let coefficients = roots
                .iter()
                .zip(&s.residue_weights)
                .map(|(&r, &w)| (p1 + r * p0) * w)
                .collect();
            let forcing = match f {
                ForcingSpec::ExpPoly(_) => {
                    let terms = f.terms(n).unwrap_or(&[]);
                    if terms.iter().all(|t| t.alpha == 0.0) {
                        ModeForcing::None
                    } else {
                        ModeForcing::ExpPoly(terms.to_vec())
                    }
                }
                ForcingSpec::Sampled(sf) => match sf.values.get(n - 1) {
                    Some(row) if row.iter().any(|&v| v != 0.0) => ModeForcing::Sampled {
                        t: sf.t.clone(),
                        values: row.clone(),
                    },
                    _ => ModeForcing::None,
                },
            };
            ModeSeries {
                n,
                a_sq: s.a * s.a,
                roots,
                weights: s.residue_weights.clone(),
                coefficients,
                phi0: p0,
                phi1: p1,
                forcing,
            }
        })
        .collect();
    Ok(SolutionSeries {
        modes,
        model: report.model,
        truncated_kernel: report.truncated_kernel,
    })
}

/// Series for initial data `(phi0, phi1)` and no forcing.
pub fn homogeneous_series(
    report: &SpectrumReport,
    phi0: &ModeVector,
    phi1: &ModeVector,
) -> Result<SolutionSeries> {
    assemble(report, phi0, phi1, &ForcingSpec::zero())
}

/// Series for forcing `f` and zero initial data.
pub fn forced_series(report: &SpectrumReport, f: &ForcingSpec) -> Result<SolutionSeries> {
    assemble(report, &ModeVector::default(), &ModeVector::default(), f)
}

/// Superposition of the two: initial data and forcing together.
pub fn full_series(
    report: &SpectrumReport,
    phi0: &ModeVector,
    phi1: &ModeVector,
    f: &ForcingSpec,
) -> Result<SolutionSeries> {
    assemble(report, phi0, phi1, f)
}

/// `int_0^t tau^m e^{s tau} d tau`.
pub fn moment_integral(m: u32, s: Complex64, t: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let mf = m as f64;
    if s.norm() < CONFLUENCE_TOL {
        return Complex64::new(t.powi(m as i32 + 1) / (mf + 1.0), 0.0);
    }
    if s.norm() * t < mf + 2.0 {
        // sum_j s^j t^{m+j+1} / (j! (m+j+1))
        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(t.powi(m as i32 + 1), 0.0);
        for j in 0..200 {
            let term = pow / (mf + j as f64 + 1.0);
            sum += term;
            if term.norm() <= 1e-17 * sum.norm() {
                break;
            }
            pow *= s * t / (j as f64 + 1.0);
        }
        return sum;
    }
    let est = (s * t).exp();
    let mut acc = (est - 1.0) / s;
    let mut tp = 1.0;
    for k in 1..=m {
        tp *= t;
        acc = (tp * est - k as f64 * acc) / s;
    }
    acc
}

/// `int_0^t f(tau) e^{lambda (t - tau)} d tau` for an exponential polynomial.
pub fn exp_poly_convolution(terms: &[ExpPolyTerm], lambda: Complex64, t: f64) -> Complex64 {
    let e = (lambda * t).exp();
    terms
        .iter()
        .map(|term| term.alpha * e * moment_integral(term.m, term.mu - lambda, t))
        .sum()
}

fn interp(t: &[f64], v: &[f64], x: f64) -> (f64, f64) {
    let i = match t.partition_point(|&s| s <= x) {
        0 => 0,
        p if p >= t.len() => t.len() - 2,
        p => p - 1,
    };
    let slope = (v[i + 1] - v[i]) / (t[i + 1] - t[i]);
    (v[i] + slope * (x - t[i]), slope)
}

fn sampled_convolution(ts: &[f64], vs: &[f64], lambda: Complex64, t: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let want = (t * lambda.norm().max(1.0) / SAMPLED_STEP).ceil() as usize;
    let steps = want.clamp(16, SAMPLED_MAX_STEPS);
    let h = t / steps as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..=steps {
        let tau = i as f64 * h;
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        sum += w * interp(ts, vs, tau).0 * (lambda * (t - tau)).exp();
    }
    sum * h
}

impl ModeSeries {
    fn forcing_value(&self, t: f64, order: u32) -> Result<f64> {
        Ok(match &self.forcing {
            ModeForcing::None => 0.0,
            ModeForcing::ExpPoly(terms) => terms.iter().map(|term| term.derivative(t, order)).sum(),
            ModeForcing::Sampled { t: ts, values } => {
                let (lo, hi) = (ts[0], *ts.last().unwrap());
                if !(t >= lo && t <= hi) {
                    return Err(Error::OutOfGrid { t, lo, hi });
                }
                let (v, slope) = interp(ts, values, t);
                if order == 0 {
                    v
                } else {
                    slope
                }
            }
        })
    }

    fn convolution(&self, lambda: Complex64, t: f64) -> Result<Complex64> {
        Ok(match &self.forcing {
            ModeForcing::None => Complex64::new(0.0, 0.0),
            ModeForcing::ExpPoly(terms) => exp_poly_convolution(terms, lambda, t),
            ModeForcing::Sampled { t: ts, values } => {
                let hi = *ts.last().unwrap();
                if t > hi {
                    return Err(Error::OutOfGrid { t, lo: ts[0], hi });
                }
                sampled_convolution(ts, values, lambda, t)
            }
        })
    }

    /// `u_n^{(p)}(t)` before discarding the imaginary part.
    pub fn eval_complex(&self, t: f64, p: u32) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&r, &c) in self.roots.iter().zip(&self.coefficients) {
            if c != Complex64::new(0.0, 0.0) {
                acc += c * r.powu(p) * (r * t).exp();
            }
        }
        if self.forcing != ModeForcing::None {
            let (f0, f1) = match p {
                0 => (0.0, 0.0),
                1 => (self.forcing_value(t, 0)?, 0.0),
                _ => (self.forcing_value(t, 0)?, self.forcing_value(t, 1)?),
            };
            for (&r, &w) in self.roots.iter().zip(&self.weights) {
                let conv = self.convolution(r, t)?;
                let term = match p {
                    0 => conv,
                    1 => f0 + r * conv,
                    _ => f1 + r * f0 + r * r * conv,
                };
                acc += w * term;
            }
        }
        Ok(acc)
    }

    /// Smallest `C` with `|u_n(t)| <= C e^{max Re root * t}`, from coefficient moduli.
    pub fn envelope(&self) -> (f64, f64) {
        let rate = self
            .roots
            .iter()
            .map(|r| r.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let c = self.coefficients.iter().map(|c| c.norm()).sum();
        (c, rate)
    }
}

fn check_domain(s: &SolutionSeries, t: f64, p: u32) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::DomainRestriction(format!(
            "series evaluated at negative time {t}"
        )));
    }
    if p > 2 {
        return Err(Error::DomainRestriction(format!(
            "derivative order {p} not supported"
        )));
    }
    if p == 2 && t == 0.0 && s.truncated_kernel {
        return Err(Error::DomainRestriction(
            "second derivative at t = 0 is not available for a truncated infinite kernel".into(),
        ));
    }
    Ok(())
}

/// `{u_n^{(p)}(t)}` for `p` in `0..=2`.
pub fn eval_series(s: &SolutionSeries, t: f64, p: u32) -> Result<ModeVector> {
    check_domain(s, t, p)?;
    s.modes
        .iter()
        .map(|m| m.eval_complex(t, p).map(|z| z.re))
        .collect::<Result<Vec<_>>>()
        .map(ModeVector)
}

/// As [`eval_series`] but keeps the imaginary parts, for realness checks.
pub fn eval_series_complex(s: &SolutionSeries, t: f64, p: u32) -> Result<Vec<Complex64>> {
    check_domain(s, t, p)?;
    s.modes.iter().map(|m| m.eval_complex(t, p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBoundReport {
    pub p: u32,
    /// `sup_t ||u^{(p)}(t)||^2_{H_{2-p}}` over the grid.
    pub sup_lhs: f64,
    pub argmax_t: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub zero_data: bool,
}

fn weighted_sq(s: &SolutionSeries, v: impl Fn(&ModeSeries) -> f64, beta: i32) -> f64 {
    s.modes
        .iter()
        .map(|m| m.a_sq.powi(beta) * v(m).powi(2))
        .sum()
}

/// `||A^{2-p} f^{(p)}||^2` in `L_{2,gamma}`, trapezoid on `[0, horizon]`.
fn forcing_l2_sq(s: &SolutionSeries, gamma: f64, p: u32, horizon: f64) -> Result<f64> {
    let ts = linspace(0.0, horizon, 4001);
    let mut vals = Vec::with_capacity(ts.len());
    for &t in &ts {
        let mut acc = 0.0;
        for m in &s.modes {
            acc += m.a_sq.powi(2 - p as i32) * m.forcing_value(t, p)?.powi(2);
        }
        vals.push((-2.0 * gamma * t).exp() * acc);
    }
    Ok(crate::numeric::trapezoid(&ts, &vals))
}

/// Left side of the termwise-differentiated series estimates against the
/// data norms on the right; the constant is unknown so only the ratio is
/// reported.
pub fn series_norm_bounds(
    s: &SolutionSeries,
    t_grid: &[f64],
    gamma: f64,
    p: u32,
) -> Result<NormBoundReport> {
    let beta = 2 - p.min(2) as i32;
    let mut sup_lhs = 0.0;
    let mut argmax_t = t_grid.first().copied().unwrap_or(0.0);
    for &t in t_grid {
        let v = eval_series(s, t, p)?;
        let lhs: f64 = s
            .modes
            .iter()
            .zip(&v.0)
            .map(|(m, x)| m.a_sq.powi(beta) * x * x)
            .sum();
        if lhs > sup_lhs {
            sup_lhs = lhs;
            argmax_t = t;
        }
    }
    let mut rhs = weighted_sq(s, |m| m.phi1, 1) + weighted_sq(s, |m| m.phi0, 2);
    let forced = s.modes.iter().any(|m| m.forcing != ModeForcing::None);
    if forced {
        let horizon = s
            .modes
            .iter()
            .find_map(|m| match &m.forcing {
                ModeForcing::Sampled { t, .. } => Some(*t.last().unwrap()),
                _ => None,
            })
            .unwrap_or_else(|| (30.0 / gamma.max(0.15)).min(200.0));
        rhs += forcing_l2_sq(s, gamma, p, horizon)?;
        if p >= 1 {
            rhs += weighted_sq(s, |m| m.forcing_value(0.0, 0).unwrap_or(0.0), beta);
        }
        if p == 2 {
            rhs += weighted_sq(s, |m| m.forcing_value(0.0, 1).unwrap_or(0.0), 0);
        }
    }
    let zero_data = rhs == 0.0 && sup_lhs == 0.0;
    let ratio = if zero_data { 0.0 } else { sup_lhs / rhs };
    Ok(NormBoundReport {
        p,
        sup_lhs,
        argmax_t,
        rhs,
        ratio,
        zero_data,
    })
}

/// `u(x, t) = sum_n u_n(t) sqrt(2/pi) sin(n x)`.
pub fn evaluate_physical(s: &SolutionSeries, x_grid: &[f64], t: f64) -> Result<Vec<f64>> {
    if s.model != OperatorModel::Dirichlet1d {
        return Err(Error::ModelMismatch);
    }
    let u = eval_series(s, t, 0)?;
    let scale = (2.0 / std::f64::consts::PI).sqrt();
    Ok(x_grid
        .iter()
        .map(|&x| {
            s.modes
                .iter()
                .zip(&u.0)
                .map(|(m, un)| un * scale * (m.n as f64 * x).sin())
                .sum()
        })
        .collect())
}
