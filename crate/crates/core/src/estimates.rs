//! Numerical checks of the Laplace-domain resolvent bounds and of the
//! weighted-norm solvability estimate.
//!
//! Operator bounds are checked entrywise on the diagonal model: for each
//! `lambda` and each mode, `a_0^2 = a_n^2 + b_n` is a scalar.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::companion::companion_roots;
use crate::config::ProblemInstance;
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, Which};
use crate::numeric::{decay_exponent, linspace, logspace, trapezoid};
use crate::operator::{ExpPolyTerm, ForcingSpec, ModeVector, OperatorSpec};
use crate::oracle::integrate_mode;
use crate::series::{eval_series, full_series};
use crate::spectrum::full_spectrum;
use crate::symbol::{ModeSymbol, MAX_POLY_TERMS};

/// Upper end of the contraction-weight search.
pub const GAMMA_SEARCH_LIMIT: f64 = 1e3;

/// Exponential weight and truncation of the infinite-time norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormSpec {
    pub gamma: f64,
    pub horizon: f64,
    pub step: f64,
    /// Bound on the exponential growth rate of the integrand's square root,
    /// used for the tail certificate.
    #[serde(default)]
    pub growth_rate: f64,
}

/// Samples of `u` and `u''` for every mode on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrace {
    pub t: Vec<f64>,
    /// `u[n-1][i]`.
    pub u: Vec<Vec<f64>>,
    pub u2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub norm: f64,
    /// Bound on the squared-norm contribution of `[T, inf)`.
    pub tail: f64,
}

/// `(int_0^T e^{-2 gamma t} (||u''||^2 + ||A_0^2 u||^2) dt)^{1/2}` with a
/// tail certificate `B / (2 (gamma - sigma))`, `B` the largest weighted
/// integrand over the last tenth of the horizon.
pub fn weighted_sobolev_norm(
    trace: &SolutionTrace,
    op: &OperatorSpec,
    w: &WeightedNormSpec,
) -> Result<WeightedNorm> {
    if !(w.gamma >= 0.0) {
        return Err(Error::DomainRestriction(format!(
            "weight must be nonnegative, got {}",
            w.gamma
        )));
    }
    let covered = trace.t.last().copied().unwrap_or(0.0);
    if trace.t.first() != Some(&0.0) || covered < w.horizon * (1.0 - 1e-12) {
        return Err(Error::DomainRestriction(format!(
            "trace covers [0, {covered}] but the horizon is {}",
            w.horizon
        )));
    }
    if trace.u.len() > op.n_max() || trace.u.len() != trace.u2.len() {
        return Err(Error::DimensionMismatch {
            expected: op.n_max(),
            got: trace.u.len(),
        });
    }
    let end = trace.t.partition_point(|&t| t <= w.horizon * (1.0 + 1e-12));
    let ts = &trace.t[..end];
    let integrand: Vec<f64> = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut s = 0.0;
            for (n, (u, u2)) in trace.u.iter().zip(&trace.u2).enumerate() {
                let a0_sq = op.mode(n + 1).a0_sq();
                s += u2[i] * u2[i] + a0_sq * a0_sq * u[i] * u[i];
            }
            (-2.0 * w.gamma * t).exp() * s
        })
        .collect();
    let norm_sq = trapezoid(ts, &integrand);
    let norm = norm_sq.sqrt();
    let t_tail = 0.9 * w.horizon;
    let b = ts
        .iter()
        .zip(&integrand)
        .filter(|(t, _)| **t >= t_tail)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    let tail = if b == 0.0 {
        0.0
    } else if w.gamma <= w.growth_rate {
        f64::INFINITY
    } else {
        b / (2.0 * (w.gamma - w.growth_rate))
    };
    if tail > 1e-2 * norm_sq {
        return Err(Error::InsufficientHorizon { tail, norm });
    }
    Ok(WeightedNorm { norm, tail })
}

/// Largest real part over all zeros of every mode symbol, `B` included.
pub fn growth_rate(op: &OperatorSpec, kernel: &KernelSpec) -> Result<f64> {
    if op.has_zero_b() {
        return Ok(full_spectrum(op, kernel)?.aggregate.verdict.max_re);
    }
    if kernel.len() > MAX_POLY_TERMS {
        return Err(Error::ConditioningRefusal {
            terms: kernel.len(),
            limit: MAX_POLY_TERMS,
        });
    }
    let mut rate = f64::NEG_INFINITY;
    for n in 1..=op.n_max() {
        let sym = ModeSymbol::for_mode(op, n, kernel);
        for r in companion_roots(&sym.to_polynomial()?)? {
            rate = rate.max(r.re);
        }
    }
    Ok(rate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityRatio {
    pub ratio: f64,
    pub solution_norm: f64,
    pub forcing_norm: f64,
    pub data_norm: f64,
    pub tail: f64,
    pub zero_data: bool,
    /// `series` for `B = 0`, `oracle` otherwise.
    pub source: String,
}

fn check_admissible(p: &ProblemInstance) -> Result<()> {
    p.forcing
        .validate()
        .map_err(|e| Error::InadmissibleProblem(e.to_string()))?;
    for (name, v) in [("phi0", &p.phi0), ("phi1", &p.phi1)] {
        if v.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::InadmissibleProblem(format!(
                "{name} has non-finite entries"
            )));
        }
        if v.len() > p.operator.n_max() && v.0[p.operator.n_max()..].iter().any(|&x| x != 0.0) {
            return Err(Error::InadmissibleProblem(format!(
                "{name} has data beyond the {} resolved modes",
                p.operator.n_max()
            )));
        }
    }
    Ok(())
}

/// `u` and `u''` on `[0, horizon]` with step `step`.
pub fn solution_trace(p: &ProblemInstance, step: f64) -> Result<(SolutionTrace, &'static str)> {
    let n_max = p.operator.n_max();
    let phi0 = p.phi0.resized(n_max);
    let phi1 = p.phi1.resized(n_max);
    if p.operator.has_zero_b() {
        let report = full_spectrum(&p.operator, &p.kernel)?;
        let s = full_series(&report, &phi0, &phi1, &p.forcing)?;
        let steps = ((p.horizon / step).round() as usize).max(1);
        let t = linspace(0.0, p.horizon, steps + 1);
        let mut u = vec![Vec::with_capacity(t.len()); n_max];
        let mut u2 = vec![Vec::with_capacity(t.len()); n_max];
        for &ti in &t {
            let v0 = eval_series(&s, ti, 0)?;
            let v2 = eval_series(&s, ti.max(if s.truncated_kernel { 1e-12 } else { 0.0 }), 2)?;
            for n in 0..n_max {
                u[n].push(v0.0[n]);
                u2[n].push(v2.0[n]);
            }
        }
        return Ok((SolutionTrace { t, u, u2 }, "series"));
    }
    let traces = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let sym = ModeSymbol::for_mode(&p.operator, n, &p.kernel);
            let dt = step.min(0.05 / sym.a().max(p.kernel.gammas().fold(1.0, f64::max)));
            let tr = integrate_mode(&sym, phi0.get(n), phi1.get(n), &p.forcing, p.horizon, dt)?;
            let u2: Vec<f64> = (0..tr.len())
                .map(|i| -> Result<f64> {
                    Ok(
                        p.forcing.eval(n, tr.t[i], 0)? - sym.a_sq * tr.u[i] - sym.b * tr.u[i]
                            + tr.memory(&sym, i),
                    )
                })
                .collect::<Result<_>>()?;
            Ok((tr.t, tr.u, u2))
        })
        .collect::<Result<Vec<_>>>()?;
    // modes may use different steps; interpolate onto the coarsest grid
    let (t_ref, _, _) = traces
        .iter()
        .min_by_key(|(t, _, _)| t.len())
        .expect("at least one mode");
    let t = t_ref.clone();
    let resample = |ts: &[f64], ys: &[f64]| -> Vec<f64> {
        t.iter()
            .map(|&x| {
                let i = ts.partition_point(|&s| s <= x).clamp(1, ts.len() - 1) - 1;
                let h = ts[i + 1] - ts[i];
                ys[i] + (ys[i + 1] - ys[i]) * (x - ts[i]) / h
            })
            .collect()
    };
    let u = traces.iter().map(|(ts, u, _)| resample(ts, u)).collect();
    let u2 = traces.iter().map(|(ts, _, u2)| resample(ts, u2)).collect();
    Ok((SolutionTrace { t, u, u2 }, "oracle"))
}

/// `||f'||_{L_{2,gamma}}` on the trace grid.
fn forcing_derivative_norm(p: &ProblemInstance, t: &[f64], gamma: f64) -> Result<f64> {
    if p.forcing.is_zero() {
        return Ok(0.0);
    }
    let vals = t
        .iter()
        .map(|&ti| {
            let mut s = 0.0;
            for n in 1..=p.operator.n_max() {
                s += p.forcing.eval(n, ti, 1)?.powi(2);
            }
            Ok((-2.0 * gamma * ti).exp() * s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid(t, &vals).sqrt())
}

/// `||u||_{W^2_{2,gamma}} / (||f'||_{L_{2,gamma}} + ||A_0^2 phi0|| + ||A_0 phi1||)`.
pub fn solvability_ratio(p: &ProblemInstance, gamma: f64) -> Result<SolvabilityRatio> {
    check_admissible(p)?;
    let n_max = p.operator.n_max();
    let data_norm = p.operator.h_beta_norm(&p.phi0.resized(n_max), 2.0)?
        + p.operator.h_beta_norm(&p.phi1.resized(n_max), 1.0)?;
    if data_norm == 0.0 && p.forcing.is_zero() {
        return Ok(SolvabilityRatio {
            ratio: 0.0,
            solution_norm: 0.0,
            forcing_norm: 0.0,
            data_norm: 0.0,
            tail: 0.0,
            zero_data: true,
            source: "none".into(),
        });
    }
    let sigma = growth_rate(&p.operator, &p.kernel)?;
    let (trace, source) = solution_trace(p, p.step)?;
    let spec = WeightedNormSpec {
        gamma,
        horizon: p.horizon,
        step: p.step,
        growth_rate: sigma,
    };
    let w = weighted_sobolev_norm(&trace, &p.operator, &spec)?;
    let forcing_norm = forcing_derivative_norm(p, &trace.t, gamma)?;
    let rhs = forcing_norm + data_norm;
    Ok(SolvabilityRatio {
        ratio: w.norm / rhs,
        solution_norm: w.norm,
        forcing_norm,
        data_norm,
        tail: w.tail,
        zero_data: false,
        source: source.into(),
    })
}

/// Sampled region of the right half-plane `Re lambda > gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl LambdaGrid {
    /// Log-spaced `Re` in `[gamma + 1e-3, 1e3]`, lin-spaced `Im` in `[-1e3, 1e3]`.
    pub fn standard(gamma: f64, n_re: usize, n_im: usize) -> Self {
        Self {
            re: logspace(gamma + 1e-3, 1e3, n_re),
            im: linspace(-1e3, 1e3, n_im),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.re
            .iter()
            .flat_map(move |&x| self.im.iter().map(move |&y| Complex64::new(x, y)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// Largest `lhs / rhs` (or the quantity itself for reported sups).
    pub sup: f64,
    pub argmax_lambda: [f64; 2],
    pub argmax_n: usize,
    pub violations: usize,
    pub pass: bool,
}

impl BoundCheck {
    fn new() -> Self {
        Self {
            sup: f64::NEG_INFINITY,
            argmax_lambda: [f64::NAN, f64::NAN],
            argmax_n: 0,
            violations: 0,
            pass: true,
        }
    }

    fn record(&mut self, value: f64, lambda: Complex64, n: usize) {
        if value > self.sup || self.sup.is_nan() {
            self.sup = value;
            self.argmax_lambda = [lambda.re, lambda.im];
            self.argmax_n = n;
        }
    }

    fn merge(mut self, other: BoundCheck) -> BoundCheck {
        if other.sup > self.sup {
            self.sup = other.sup;
            self.argmax_lambda = other.argmax_lambda;
            self.argmax_n = other.argmax_n;
        }
        self.violations += other.violations;
        self.pass &= other.pass;
        self
    }
}

/// First violated hard inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub bound: String,
    pub lambda: [f64; 2],
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub gamma: f64,
    pub points: usize,
    /// `|lambda / (lambda^2 + a_0^2)| <= 1 / Re lambda`; sup of the ratio.
    pub resolvent: BoundCheck,
    /// `Re lambda |a_0^2 / (lambda (lambda^2 + a_0^2))| <= 3`.
    pub smoothing: BoundCheck,
    /// `|K^(lambda)| <= K(0) / |lambda|`; sup of the ratio.
    pub kernel_k: BoundCheck,
    /// `|Q^(lambda)| <= Q(0) / |lambda|`; sup of the ratio.
    pub kernel_q: BoundCheck,
    /// `(a_n^2 + gamma_j^2)^{-2} <= (gamma_j a_n)^{-2}`; sup of the ratio.
    pub decay_rates: BoundCheck,
    /// `max_n |K^ a_n^2 + Q^ b_n| / |lambda^2 + a_0^2|`.
    pub memory_operator: BoundCheck,
    /// Least `Re lambda` in the grid above which every sampled `||V||` is below 1.
    pub memory_contraction_re: Option<f64>,
    pub first_violation: Option<Violation>,
}

impl LemmaReport {
    pub fn hard_bounds_hold(&self) -> bool {
        self.resolvent.pass && self.kernel_k.pass && self.kernel_q.pass && self.decay_rates.pass
    }
}

struct Accum {
    resolvent: BoundCheck,
    smoothing: BoundCheck,
    kernel_k: BoundCheck,
    kernel_q: BoundCheck,
    memory: BoundCheck,
    first: Option<Violation>,
}

fn hard(
    check: &mut BoundCheck,
    first: &mut Option<Violation>,
    name: &str,
    lhs: f64,
    rhs: f64,
    lambda: Complex64,
    n: usize,
) {
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    check.record(ratio, lambda, n);
    if !(lhs <= rhs) {
        check.violations += 1;
        check.pass = false;
        if first.is_none() {
            *first = Some(Violation {
                bound: name.into(),
                lambda: [lambda.re, lambda.im],
                n,
                lhs,
                rhs,
            });
        }
    }
}

/// Evaluates every scalarized bound at every grid point and mode.
pub fn lemma_bound_report(
    kernel: &KernelSpec,
    op: &OperatorSpec,
    grid: &LambdaGrid,
    gamma: f64,
) -> Result<LemmaReport> {
    if let Some(&x) = grid.re.iter().find(|&&x| !(x > gamma)) {
        return Err(Error::DomainRestriction(format!(
            "grid point Re lambda = {x} not above gamma = {gamma}"
        )));
    }
    let k0 = kernel.at_zero(Which::K);
    let q0 = kernel.at_zero(Which::Q);
    let modes = op.modes();
    // per-row accumulation so that rows can run in parallel
    let rows: Vec<(f64, Accum)> = grid
        .re
        .par_iter()
        .map(|&x| {
            let mut acc = Accum {
                resolvent: BoundCheck::new(),
                smoothing: BoundCheck::new(),
                kernel_k: BoundCheck::new(),
                kernel_q: BoundCheck::new(),
                memory: BoundCheck::new(),
                first: None,
            };
            let mut row_max_v: f64 = 0.0;
            for &y in &grid.im {
                let lambda = Complex64::new(x, y);
                let kh = kernel.laplace_hat_unchecked(lambda, Which::K);
                let qh = kernel.laplace_hat_unchecked(lambda, Which::Q);
                let modulus = lambda.norm();
                hard(
                    &mut acc.kernel_k,
                    &mut acc.first,
                    "kernel_k",
                    kh.norm(),
                    k0 / modulus,
                    lambda,
                    0,
                );
                hard(
                    &mut acc.kernel_q,
                    &mut acc.first,
                    "kernel_q",
                    qh.norm(),
                    q0 / modulus,
                    lambda,
                    0,
                );
                let mut v_max: f64 = 0.0;
                let mut v_arg = 0;
                for (i, m) in modes.iter().enumerate() {
                    let n = i + 1;
                    let a0_sq = m.a0_sq();
                    let denom = lambda * lambda + a0_sq;
                    let r = (lambda / denom).norm();
                    hard(
                        &mut acc.resolvent,
                        &mut acc.first,
                        "resolvent",
                        r,
                        1.0 / x,
                        lambda,
                        n,
                    );
                    let s = x * (a0_sq / (lambda * denom)).norm();
                    acc.smoothing.record(s, lambda, n);
                    let v = (kh * m.a * m.a + qh * m.b).norm() / denom.norm();
                    if v > v_max {
                        v_max = v;
                        v_arg = n;
                    }
                }
                acc.memory.record(v_max, lambda, v_arg);
                row_max_v = row_max_v.max(v_max);
            }
            (row_max_v, acc)
        })
        .collect();

    let mut decay_rates = BoundCheck::new();
    let mut first: Option<Violation> = None;
    for (i, m) in modes.iter().enumerate() {
        for t in kernel.terms() {
            let lhs = (m.a * m.a + t.gamma * t.gamma).powi(-2);
            let rhs = (t.gamma * m.a).powi(-2);
            hard(
                &mut decay_rates,
                &mut first,
                "decay_rates",
                lhs,
                rhs,
                Complex64::new(0.0, 0.0),
                i + 1,
            );
        }
    }
    if kernel.is_empty() {
        decay_rates.sup = 0.0;
    }

    let mut resolvent = BoundCheck::new();
    let mut smoothing = BoundCheck::new();
    let mut kernel_k = BoundCheck::new();
    let mut kernel_q = BoundCheck::new();
    let mut memory = BoundCheck::new();
    let mut row_sups = Vec::with_capacity(rows.len());
    for (row_max, acc) in rows {
        resolvent = resolvent.merge(acc.resolvent);
        smoothing = smoothing.merge(acc.smoothing);
        kernel_k = kernel_k.merge(acc.kernel_k);
        kernel_q = kernel_q.merge(acc.kernel_q);
        memory = memory.merge(acc.memory);
        if first.is_none() {
            first = acc.first;
        }
        row_sups.push(row_max);
    }
    smoothing.pass = smoothing.sup <= 3.0;
    memory.pass = memory.sup.is_finite();
    // least sampled Re above which every row stays below 1
    let mut memory_contraction_re = None;
    for (i, &x) in grid.re.iter().enumerate().rev() {
        if row_sups[i] < 1.0 {
            memory_contraction_re = Some(x);
        } else {
            break;
        }
    }
    Ok(LemmaReport {
        gamma,
        points: grid.re.len() * grid.im.len(),
        resolvent,
        smoothing,
        kernel_k,
        kernel_q,
        decay_rates,
        memory_operator: memory,
        memory_contraction_re,
        first_violation: first,
    })
}

/// As [`lemma_bound_report`] but fails on the first violated hard inequality.
pub fn lemma_bound_scan(
    kernel: &KernelSpec,
    op: &OperatorSpec,
    grid: &LambdaGrid,
    gamma: f64,
) -> Result<LemmaReport> {
    let report = lemma_bound_report(kernel, op, grid, gamma)?;
    if let Some(v) = &report.first_violation {
        return Err(Error::AssertionFailure {
            bound: v.bound.clone(),
            lambda: Complex64::new(v.lambda[0], v.lambda[1]),
            mode: v.n,
            lhs: v.lhs,
            rhs: v.rhs,
        });
    }
    Ok(report)
}

/// `|K^(lambda) a^2 + Q^(lambda) b| / |lambda^2 + a^2 + b|` for one mode.
fn memory_entry(kernel: &KernelSpec, a_sq: f64, b: f64, lambda: Complex64) -> f64 {
    let kh = kernel.laplace_hat_unchecked(lambda, Which::K);
    let qh = kernel.laplace_hat_unchecked(lambda, Which::Q);
    (kh * a_sq + qh * b).norm() / (lambda * lambda + a_sq + b).norm()
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2)
}

/// `sup_nu max_n ||V(gamma + i nu)||`, sampled densely around each `a_0` and
/// refined by golden-section search near the sampled maximum.
pub fn line_sup(kernel: &KernelSpec, op: &OperatorSpec, gamma: f64) -> f64 {
    if kernel.is_empty() {
        return 0.0;
    }
    op.modes()
        .par_iter()
        .map(|m| {
            let a0 = m.a0_sq().sqrt();
            let f = |nu: f64| memory_entry(kernel, m.a * m.a, m.b, Complex64::new(gamma, nu));
            let width = 4.0 * (gamma + kernel.terms()[kernel.len() - 1].gamma + 1.0);
            let hi = a0 + width;
            let nus = linspace(0.0, hi, 801);
            let (mut best_i, mut best) = (0, f(0.0));
            for (i, &nu) in nus.iter().enumerate().skip(1) {
                let v = f(nu);
                if v > best {
                    best = v;
                    best_i = i;
                }
            }
            let lo = nus[best_i.saturating_sub(1)];
            let up = nus[(best_i + 1).min(nus.len() - 1)];
            // beyond the sampled range the entry decays like |lambda|^{-3}
            best.max(golden_max(f, lo, up)).max(f(a0))
        })
        .reduce(|| 0.0, f64::max)
}

/// Least weight `gamma` at which the sampled sup of `||V||` over
/// `Re lambda = gamma` drops below 1. The line sup is nonincreasing in
/// `gamma` (maximum modulus on the analytic right half-plane), so bisection
/// applies.
pub fn contraction_threshold(kernel: &KernelSpec, op: &OperatorSpec) -> Result<f64> {
    if kernel.is_empty() {
        return Ok(0.0);
    }
    let s = |g: f64| line_sup(kernel, op, g);
    if s(GAMMA_SEARCH_LIMIT) >= 1.0 {
        return Err(Error::NotFound {
            limit: GAMMA_SEARCH_LIMIT,
        });
    }
    let mut hi = 1.0;
    while s(hi) >= 1.0 {
        hi = (2.0 * hi).min(GAMMA_SEARCH_LIMIT);
    }
    let lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    if lo == 0.0 && s(0.0) < 1.0 {
        return Ok(0.0);
    }
    // s is nonincreasing: keep s(lo) >= 1 > s(hi)
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1e-9 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if s(mid) < 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `max_n ||V(x)||` on the real axis.
pub fn memory_norm_real(kernel: &KernelSpec, op: &OperatorSpec, x: f64) -> f64 {
    op.modes()
        .iter()
        .map(|m| memory_entry(kernel, m.a * m.a, m.b, Complex64::new(x, 0.0)))
        .fold(0.0, f64::max)
}

/// Fit window `[c/2, 2c]` with `c = sqrt(gamma_N a_max)`: the regime between
/// the kernel and operator scales where `||V||` behaves like `1/Re lambda`.
/// Below it `K^` is still flat, above it `||V||` falls off like `Re^{-3}`.
pub fn memory_decay_window(kernel: &KernelSpec, op: &OperatorSpec) -> (f64, f64) {
    let gamma_n = kernel.gammas().fold(0.0, f64::max);
    let a_max = op
        .modes()
        .iter()
        .map(|m| m.a0_sq().sqrt())
        .fold(0.0, f64::max);
    let c = (gamma_n * a_max).sqrt();
    (0.5 * c, 2.0 * c)
}

/// Decay exponent of `max_n ||V||` along `Im lambda = 0` over `window`.
pub fn memory_decay_exponent(
    kernel: &KernelSpec,
    op: &OperatorSpec,
    window: (f64, f64),
    points: usize,
) -> f64 {
    let xs = logspace(window.0, window.1, points);
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| memory_norm_real(kernel, op, x))
        .collect();
    decay_exponent(&xs, &ys)
}

/// Random admissible data for a fixed kernel and operator.
///
/// Data decay in `n` fast enough to lie in the required spaces. Each mode
/// draws from the stream in order, so the leading modes agree across
/// different `n_max` for the same seed.
pub fn random_problem(
    kernel: &KernelSpec,
    op: &OperatorSpec,
    seed: u64,
    horizon: f64,
    step: f64,
) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu1 = -rng.gen_range(0.5..2.0);
    let mu2 = mu1 - rng.gen_range(0.5..2.0);
    let n_max = op.n_max();
    let mut phi0 = Vec::with_capacity(n_max);
    let mut phi1 = Vec::with_capacity(n_max);
    let mut forcing = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let nf = n as f64;
        phi0.push(rng.gen_range(-1.0..1.0) / nf.powi(3));
        phi1.push(rng.gen_range(-1.0..1.0) / nf.powi(2));
        let alpha = rng.gen_range(-1.0..1.0) / nf.powi(2);
        forcing.push(vec![
            ExpPolyTerm::new(alpha, 0, mu1),
            ExpPolyTerm::new(-alpha, 0, mu2),
        ]);
    }
    ProblemInstance {
        kernel: kernel.clone(),
        operator: op.clone(),
        phi0: ModeVector(phi0),
        phi1: ModeVector(phi1),
        forcing: ForcingSpec::ExpPoly(forcing),
        gamma: None,
        horizon,
        dt: 1e-3,
        step,
        samples: 101,
        seed,
        problems: 1,
    }
}

impl ProblemInstance {
    /// Same problem with `(phi0, phi1, f)` multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            phi0: self.phi0.scaled(s),
            phi1: self.phi1.scaled(s),
            forcing: self.forcing.scaled(s),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalD {
    pub gamma: f64,
    pub count: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub ratios: Vec<f64>,
}

/// Solvability ratios over `count` random problems; the max is the
/// empirical constant.
pub fn empirical_d(
    kernel: &KernelSpec,
    op: &OperatorSpec,
    gamma: f64,
    count: usize,
    seed: u64,
    horizon: f64,
    step: f64,
) -> Result<EmpiricalD> {
    let ratios = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let p = random_problem(kernel, op, seed.wrapping_add(i), horizon, step);
            solvability_ratio(&p, gamma).map(|r| r.ratio)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    Ok(EmpiricalD {
        gamma,
        count,
        max_ratio,
        mean_ratio,
        ratios,
    })
}
