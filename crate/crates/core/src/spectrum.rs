//! Zeros of the mode symbols.
//!
//! For `b_n = 0` every symbol has `N` real zeros, one in each interval
//! `(-gamma_k, x_k)` where `x_k` are the real zeros of `g`, plus one
//! complex-conjugate pair near `+-i a_n - K(0)/2`. Real zeros are found by
//! sign change on the pole-cleared polynomial, the pair by Newton on the
//! rational symbol; [`companion_roots`](crate::companion::companion_roots)
//! provides an independent check of both.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::companion::companion_roots;
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, Stability, Which, DEFAULT_BOUNDARY_TOL};
use crate::numeric::{decay_exponent, illinois};
use crate::operator::{OperatorModel, OperatorSpec};
use crate::symbol::{ModeSymbol, MAX_POLY_TERMS};

pub const REAL_ROOT_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-9;
pub const VIETA_TOL: f64 = 1e-8;
pub const NEWTON_MAX_ITER: usize = 100;
const DEFLATION_TOL: f64 = 1e-8;

/// How a root was located.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RootCertificate {
    /// Sign change of `p_n` on `(lo, hi)`.
    Bracket { lo: f64, hi: f64 },
    /// Converged Newton iterate with final `|l_n|`.
    Newton { residual: f64, iterations: usize },
    /// Taken from the companion-matrix eigenvalues after Newton failed.
    Companion { residual: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub n: usize,
    pub a: f64,
    /// `lambda_{k,n}`, `k = 1..N`, in decreasing order.
    pub real_roots: Vec<f64>,
    /// `(lambda^+, lambda^-)` with `Im lambda^+ > 0`.
    pub complex_pair: (Complex64, Complex64),
    /// `1 / l_n'(root)` in the order of [`ModeSpectrum::roots`].
    pub residue_weights: Vec<Complex64>,
    pub certificates: Vec<RootCertificate>,
    /// `|l_n(root)|` in the order of [`ModeSpectrum::roots`].
    pub residuals: Vec<f64>,
}

impl ModeSpectrum {
    /// Real roots, then `lambda^+`, then `lambda^-`.
    pub fn roots(&self) -> Vec<Complex64> {
        self.real_roots
            .iter()
            .map(|&r| Complex64::new(r, 0.0))
            .chain([self.complex_pair.0, self.complex_pair.1])
            .collect()
    }

    pub fn max_re(&self) -> f64 {
        self.real_roots
            .iter()
            .copied()
            .chain([self.complex_pair.0.re])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `|sum(roots) + sum(gamma_k)|`.
    pub fn vieta_error(&self, kernel: &KernelSpec) -> f64 {
        let sum: f64 =
            self.real_roots.iter().sum::<f64>() + self.complex_pair.0.re + self.complex_pair.1.re;
        (sum + kernel.gammas().sum::<f64>()).abs()
    }

    /// Checks every structural invariant; returns human-readable violations.
    pub fn verify(&self, kernel: &KernelSpec, xs: &[f64]) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.n;
        let big_n = kernel.len();
        if self.real_roots.len() + 2 != big_n + 2 {
            out.push(format!(
                "mode {n}: {} roots, expected {}",
                self.real_roots.len() + 2,
                big_n + 2
            ));
        }
        for (k, (&lam, t)) in self.real_roots.iter().zip(kernel.terms()).enumerate() {
            let x = xs[k];
            if !(-t.gamma < lam && lam < x) {
                out.push(format!(
                    "mode {n}: interlacing violated for k={}: {} < {lam} < {x} fails",
                    k + 1,
                    -t.gamma
                ));
            }
        }
        let (plus, minus) = self.complex_pair;
        if !(plus.im > 0.0) || minus != plus.conj() {
            out.push(format!(
                "mode {n}: complex pair {plus}, {minus} not conjugate"
            ));
        }
        let tol = RESIDUAL_TOL * (self.a * self.a).max(1.0);
        for (root, res) in self.roots().iter().zip(&self.residuals) {
            if !(*res <= tol) {
                out.push(format!("mode {n}: |l({root})| = {res:e} > {tol:e}"));
            }
        }
        let sum_gamma: f64 = kernel.gammas().sum();
        let vieta = self.vieta_error(kernel);
        if !(vieta <= VIETA_TOL * (1.0 + sum_gamma)) {
            out.push(format!("mode {n}: Vieta sum off by {vieta:e}"));
        }
        out
    }
}

fn require_zero_b(sym: &ModeSymbol<'_>) -> Result<()> {
    if sym.b != 0.0 {
        return Err(Error::RequiresZeroB("spectrum requires B=0".into()));
    }
    Ok(())
}

/// One real zero of `l_n` in each `(-gamma_k, x_k)`.
pub fn real_roots(sym: &ModeSymbol<'_>, xs: &[f64]) -> Result<Vec<(f64, RootCertificate)>> {
    require_zero_b(sym)?;
    let kernel = sym.kernel;
    if xs.len() != kernel.len() {
        return Err(Error::DimensionMismatch {
            expected: kernel.len(),
            got: xs.len(),
        });
    }
    let poly = if kernel.len() <= MAX_POLY_TERMS {
        Some(sym.to_polynomial()?)
    } else {
        None
    };
    let f = |x: f64| match &poly {
        Some(p) => p.eval(x),
        None => sym.eval_unchecked(Complex64::new(x, 0.0)).re,
    };
    kernel
        .terms()
        .iter()
        .zip(xs)
        .map(|(t, &x)| {
            let eps = 1e-10 * (1.0 + t.gamma);
            let lo = -t.gamma + eps;
            let hi = x - eps;
            let (f_lo, f_hi) = (f(lo), f(hi));
            if !(lo < hi) || f_lo == 0.0 || f_hi == 0.0 || f_lo.signum() == f_hi.signum() {
                return Err(Error::BracketFailure { lo, hi, f_lo, f_hi });
            }
            let root = illinois(f, lo, hi, f_lo, f_hi, REAL_ROOT_TOL, 400);
            Ok((root, RootCertificate::Bracket { lo, hi }))
        })
        .collect()
}

fn newton(
    sym: &ModeSymbol<'_>,
    seed: Complex64,
) -> std::result::Result<(Complex64, usize), Vec<Complex64>> {
    let tol = RESIDUAL_TOL * sym.a_sq.max(1.0);
    let mut z = seed;
    let mut trajectory = vec![z];
    for it in 0..NEWTON_MAX_ITER {
        let f = sym.eval_unchecked(z);
        if f.norm() <= tol {
            // a few extra steps while the residual keeps shrinking
            let mut res = f.norm();
            for _ in 0..3 {
                let next = z - sym.eval_unchecked(z) / sym.derivative_unchecked(z);
                let r = sym.eval_unchecked(next).norm();
                if r < res {
                    z = next;
                    res = r;
                } else {
                    break;
                }
            }
            return Ok((z, it));
        }
        let d = sym.derivative_unchecked(z);
        z -= f / d;
        trajectory.push(z);
        if !(z.re.is_finite() && z.im.is_finite()) || z.im <= 0.0 {
            return Err(trajectory);
        }
    }
    Err(trajectory)
}

/// The complex-conjugate zero pair `(lambda^+, lambda^-)`.
pub fn complex_pair(sym: &ModeSymbol<'_>) -> Result<((Complex64, Complex64), RootCertificate)> {
    require_zero_b(sym)?;
    let a = sym.a();
    let k0 = sym.kernel.at_zero(Which::K);
    let mut last_trajectory = Vec::new();
    for seed in [Complex64::new(-0.5 * k0, a), Complex64::new(0.0, a)] {
        match newton(sym, seed) {
            Ok((z, iterations)) => {
                let residual = sym.eval_unchecked(z).norm();
                return Ok((
                    (z, z.conj()),
                    RootCertificate::Newton {
                        residual,
                        iterations,
                    },
                ));
            }
            Err(traj) => last_trajectory = traj,
        }
    }
    if sym.kernel.len() <= MAX_POLY_TERMS {
        let roots = companion_roots(&sym.to_polynomial()?)?;
        if let Some(z) = roots
            .into_iter()
            .filter(|z| z.im > 0.0)
            .max_by(|x, y| x.im.total_cmp(&y.im))
        {
            let residual = sym.eval_unchecked(z).norm();
            return Ok(((z, z.conj()), RootCertificate::Companion { residual }));
        }
    }
    Err(Error::NewtonDivergence {
        mode: sym.n,
        trajectory: last_trajectory,
    })
}

/// Full spectrum of a single symbol given the zeros of `g`.
pub fn mode_spectrum(sym: &ModeSymbol<'_>, xs: &[f64]) -> Result<ModeSpectrum> {
    let reals = real_roots(sym, xs)?;
    let (pair, pair_cert) = complex_pair(sym)?;
    for (r, _) in &reals {
        if (pair.0 - r).norm() < DEFLATION_TOL {
            return Err(Error::Mode {
                mode: sym.n,
                message: format!("complex root {} coincides with real root {r}", pair.0),
            });
        }
    }
    let real_roots: Vec<f64> = reals.iter().map(|(r, _)| *r).collect();
    let mut certificates: Vec<RootCertificate> = reals.iter().map(|(_, c)| *c).collect();
    certificates.push(pair_cert);
    certificates.push(pair_cert);
    let roots: Vec<Complex64> = real_roots
        .iter()
        .map(|&r| Complex64::new(r, 0.0))
        .chain([pair.0, pair.1])
        .collect();
    let residue_weights = roots
        .iter()
        .map(|&z| 1.0 / sym.derivative_unchecked(z))
        .collect();
    let residuals = roots
        .iter()
        .map(|&z| sym.eval_unchecked(z).norm())
        .collect();
    Ok(ModeSpectrum {
        n: sym.n,
        a: sym.a(),
        real_roots,
        complex_pair: pair,
        residue_weights,
        certificates,
        residuals,
    })
}

/// Approach of `lambda_{k,n}` to its accumulation point `x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accumulation {
    pub k: usize,
    pub x_k: f64,
    pub last_root: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub a_values: Vec<f64>,
    /// Decay exponent of `|Re lambda^+ + K(0)/2|`.
    pub re_exponent: f64,
    /// Decay exponent of `|Im lambda^+ - a_n|`.
    pub im_exponent: f64,
    /// Decay exponent of `|lambda_{1,n} - x_1|`; absent for empty kernels.
    pub real_root_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub stability_index: f64,
    pub classification: Stability,
    pub max_re: f64,
    pub left_half_plane: bool,
    /// `left_half_plane == (stability_index < 1)`.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumAggregate {
    pub verdict: Verdict,
    pub g_zeros: Vec<f64>,
    pub worst_residual: f64,
    pub worst_relative_residual: f64,
    pub worst_vieta_error: f64,
    pub accumulation: Vec<Accumulation>,
    pub fit: Option<AsymptoticFit>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub spectra: Vec<ModeSpectrum>,
    pub aggregate: SpectrumAggregate,
    pub model: OperatorModel,
    /// The kernel is a truncation of an infinite family.
    pub truncated_kernel: bool,
}

/// Mode-by-mode spectrum for an operator with `B = 0`.
pub fn full_spectrum(op: &OperatorSpec, kernel: &KernelSpec) -> Result<SpectrumReport> {
    if !op.has_zero_b() {
        return Err(Error::RequiresZeroB("spectrum requires B=0".into()));
    }
    let xs = if kernel.is_empty() {
        Vec::new()
    } else {
        kernel.g_real_zeros()?
    };
    let spectra: Vec<ModeSpectrum> = (1..=op.n_max())
        .into_par_iter()
        .map(|n| {
            let sym = ModeSymbol::for_mode(op, n, kernel);
            mode_spectrum(&sym, &xs).map_err(|e| e.at_mode(n))
        })
        .collect::<Result<_>>()?;

    let diag = kernel.diagnostics(DEFAULT_BOUNDARY_TOL);
    let max_re = spectra
        .iter()
        .map(ModeSpectrum::max_re)
        .fold(f64::NEG_INFINITY, f64::max);
    let left_half_plane = max_re < 0.0;
    let mut violations: Vec<String> = spectra.iter().flat_map(|s| s.verify(kernel, &xs)).collect();
    let consistent = left_half_plane == (diag.stability_index < 1.0);
    if !consistent && diag.classification != Stability::Boundary {
        violations.push(format!(
            "stability verdict mismatch: index {} but max Re = {max_re}",
            diag.stability_index
        ));
    }
    let worst_residual = spectra
        .iter()
        .flat_map(|s| s.residuals.iter().copied())
        .fold(0.0, f64::max);
    let worst_relative_residual = spectra
        .iter()
        .flat_map(|s| s.residuals.iter().map(move |r| r / (s.a * s.a).max(1.0)))
        .fold(0.0, f64::max);
    let worst_vieta_error = spectra
        .iter()
        .map(|s| s.vieta_error(kernel))
        .fold(0.0, f64::max);
    let accumulation = match spectra.last() {
        Some(last) => xs
            .iter()
            .zip(&last.real_roots)
            .enumerate()
            .map(|(k, (&x_k, &root))| Accumulation {
                k: k + 1,
                x_k,
                last_root: root,
                gap: (root - x_k).abs(),
            })
            .collect(),
        None => Vec::new(),
    };
    let mut ladder: Vec<f64> = spectra.iter().map(|s| s.a).filter(|&a| a >= 8.0).collect();
    ladder.dedup();
    let fit = if ladder.len() >= 3 {
        asymptotic_fit(kernel, &ladder).ok()
    } else {
        None
    };
    Ok(SpectrumReport {
        spectra,
        aggregate: SpectrumAggregate {
            verdict: Verdict {
                stability_index: diag.stability_index,
                classification: diag.classification,
                max_re,
                left_half_plane,
                consistent,
            },
            g_zeros: xs,
            worst_residual,
            worst_relative_residual,
            worst_vieta_error,
            accumulation,
            fit,
            violations,
        },
        model: op.model(),
        truncated_kernel: kernel.is_truncated(),
    })
}

/// Log-log decay exponents of the three asymptotic remainders over a
/// ladder of eigenvalues `a`.
pub fn asymptotic_fit(kernel: &KernelSpec, a_values: &[f64]) -> Result<AsymptoticFit> {
    let xs = if kernel.is_empty() {
        Vec::new()
    } else {
        kernel.g_real_zeros()?
    };
    let half_k0 = 0.5 * kernel.at_zero(Which::K);
    let mut re_err = Vec::new();
    let mut im_err = Vec::new();
    let mut real_err = Vec::new();
    for (i, &a) in a_values.iter().enumerate() {
        let sym = ModeSymbol::new(i + 1, a * a, 0.0, kernel);
        let s = mode_spectrum(&sym, &xs)?;
        re_err.push((s.complex_pair.0.re + half_k0).abs());
        im_err.push((s.complex_pair.0.im - a).abs());
        if let (Some(&r), Some(&x)) = (s.real_roots.first(), xs.first()) {
            real_err.push((r - x).abs());
        }
    }
    Ok(AsymptoticFit {
        a_values: a_values.to_vec(),
        re_exponent: decay_exponent(a_values, &re_err),
        im_exponent: decay_exponent(a_values, &im_err),
        real_root_exponent: (!real_err.is_empty()).then(|| decay_exponent(a_values, &real_err)),
    })
}

/// Writes `n,kind,re,im` rows; returns the number of data rows.
///
/// `kind` is `real:k` for the `k`-th real root, `complex+` or `complex-`.
pub fn write_spectrum_csv<W: Write>(spectra: &[ModeSpectrum], mut w: W) -> std::io::Result<usize> {
    writeln!(w, "n,kind,re,im")?;
    let mut rows = 0;
    for s in spectra {
        for (k, r) in s.real_roots.iter().enumerate() {
            writeln!(w, "{},real:{},{},{}", s.n, k + 1, r, 0.0)?;
            rows += 1;
        }
        let (p, m) = s.complex_pair;
        writeln!(w, "{},complex+,{},{}", s.n, p.re, p.im)?;
        writeln!(w, "{},complex-,{},{}", s.n, m.re, m.im)?;
        rows += 2;
    }
    Ok(rows)
}

pub fn emit_spectrum_csv(spectra: &[ModeSpectrum], path: &Path) -> Result<usize> {
    let file = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(file);
    let rows = write_spectrum_csv(spectra, &mut buf)?;
    buf.flush()?;
    Ok(rows)
}
