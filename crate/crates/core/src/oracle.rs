//! Reference time-steppers for a single mode.
//!
//! [`integrate_mode`] embeds the exponential memory in `N` auxiliary states
//! `w_k(t) = int_0^t e^{-gamma_k (t-s)} u(s) ds` and runs classical RK4.
//! [`integrate_quadrature`] evaluates the convolution directly by the
//! trapezoid rule inside a Heun step, so the two share no code path beyond
//! the forcing evaluation.

use std::io::Write;

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, Which};
use crate::operator::ForcingSpec;
use crate::symbol::ModeSymbol;

pub const STEP_GUARD: f64 = 0.1;

/// Time trace of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub n: usize,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `w[k][i]` is the `k`-th memory state at `t[i]`.
    pub w: Vec<Vec<f64>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.t.get(1).copied().unwrap_or(0.0) - self.t[0]
    }

    /// `a^2 sum c_k w_k + b sum d_k w_k` at sample `i`.
    pub fn memory(&self, sym: &ModeSymbol<'_>, i: usize) -> f64 {
        sym.kernel
            .terms()
            .iter()
            .zip(&self.w)
            .map(|(term, w)| (sym.a_sq * term.c + sym.b * term.d) * w[i])
            .sum()
    }

    /// Writes `t,u,v,w_1..w_N` rows; returns the number of data rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<usize> {
        write!(out, "t,u,v")?;
        for k in 1..=self.w.len() {
            write!(out, ",w_{k}")?;
        }
        writeln!(out)?;
        for i in 0..self.t.len() {
            write!(out, "{},{},{}", self.t[i], self.u[i], self.v[i])?;
            for w in &self.w {
                write!(out, ",{}", w[i])?;
            }
            writeln!(out)?;
        }
        Ok(self.t.len())
    }
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::DomainRestriction(format!(
            "integration needs dt > 0 and T > 0, got dt = {dt}, T = {t_end}"
        )));
    }
    Ok(((t_end / dt).round() as usize).max(1))
}

fn guard(sym: &ModeSymbol<'_>, dt: f64) -> Result<()> {
    let gamma_max = sym.kernel.gammas().fold(0.0, f64::max);
    let product = dt * gamma_max.max(sym.a());
    if product > STEP_GUARD {
        return Err(Error::StepSizeTooLarge { dt, product });
    }
    Ok(())
}

/// RK4 on the augmented state `(u, v, w_1..w_N)` with step `T / round(T / dt)`.
pub fn integrate_mode(
    sym: &ModeSymbol<'_>,
    phi0: f64,
    phi1: f64,
    f: &ForcingSpec,
    t_end: f64,
    dt: f64,
) -> Result<Trace> {
    guard(sym, dt)?;
    let steps = step_count(t_end, dt)?;
    let h = t_end / steps as f64;
    let n = sym.n;
    let big_n = sym.kernel.len();
    let gammas: Vec<f64> = sym.kernel.gammas().collect();
    let weights: Vec<f64> = sym
        .kernel
        .terms()
        .iter()
        .map(|t| sym.a_sq * t.c + sym.b * t.d)
        .collect();
    let a0_sq = sym.a_sq + sym.b;
    let dim = big_n + 2;

    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let mem: f64 = weights.iter().zip(&y[2..]).map(|(c, w)| c * w).sum();
        dy[0] = y[1];
        dy[1] = f.eval(n, t, 0)? - a0_sq * y[0] + mem;
        for k in 0..big_n {
            dy[k + 2] = -gammas[k] * y[k + 2] + y[0];
        }
        Ok(())
    };

    let mut trace = Trace {
        n,
        t: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        w: vec![Vec::with_capacity(steps + 1); big_n],
    };
    let mut y = vec![0.0; dim];
    y[0] = phi0;
    y[1] = phi1;
    let push = |trace: &mut Trace, t: f64, y: &[f64]| {
        trace.t.push(t);
        trace.u.push(y[0]);
        trace.v.push(y[1]);
        for k in 0..big_n {
            trace.w[k].push(y[k + 2]);
        }
    };
    push(&mut trace, 0.0, &y);
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    let mut tmp = vec![0.0; dim];
    for i in 0..steps {
        let t = i as f64 * h;
        rhs(t, &y, &mut k1)?;
        for j in 0..dim {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2)?;
        for j in 0..dim {
            tmp[j] = y[j] + 0.5 * h * k2[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3)?;
        for j in 0..dim {
            tmp[j] = y[j] + h * k3[j];
        }
        rhs(t + h, &tmp, &mut k4)?;
        for j in 0..dim {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        push(&mut trace, (i + 1) as f64 * h, &y);
    }
    Ok(trace)
}

/// Heun's method with the memory integral `int_0^t [a^2 K + b Q](t-s) u(s) ds`
/// evaluated by the trapezoid rule at every stage. Work is quadratic in the
/// number of steps; meant for short horizons.
pub fn integrate_quadrature(
    sym: &ModeSymbol<'_>,
    phi0: f64,
    phi1: f64,
    f: &ForcingSpec,
    t_end: f64,
    dt: f64,
) -> Result<Trace> {
    guard(sym, dt)?;
    let steps = step_count(t_end, dt)?;
    let h = t_end / steps as f64;
    let n = sym.n;
    let kernel: &KernelSpec = sym.kernel;
    let big_n = kernel.len();
    let a0_sq = sym.a_sq + sym.b;
    let kk: Vec<f64> = (0..=steps)
        .map(|m| {
            let tau = m as f64 * h;
            sym.a_sq * kernel.eval(tau, Which::K) + sym.b * kernel.eval(tau, Which::Q)
        })
        .collect();
    let mut u = Vec::with_capacity(steps + 1);
    let mut v = Vec::with_capacity(steps + 1);
    u.push(phi0);
    v.push(phi1);

    // trapezoid memory at t_j from u[0..j] and the value `last` at t_j
    let memory = |u: &[f64], j: usize, last: f64| -> f64 {
        if j == 0 {
            return 0.0;
        }
        let mut s = 0.5 * kk[j] * u[0] + 0.5 * kk[0] * last;
        for m in 1..j {
            s += kk[j - m] * u[m];
        }
        h * s
    };

    for i in 0..steps {
        let t = i as f64 * h;
        let acc = f.eval(n, t, 0)? - a0_sq * u[i] + memory(&u, i, u[i]);
        let u_star = u[i] + h * v[i];
        let v_star = v[i] + h * acc;
        let acc_star = f.eval(n, t + h, 0)? - a0_sq * u_star + memory(&u, i + 1, u_star);
        u.push(u[i] + 0.5 * h * (v[i] + v_star));
        v.push(v[i] + 0.5 * h * (acc + acc_star));
    }

    let t: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    // memory states by the recursive trapezoid rule, for trace output only
    let w = kernel
        .gammas()
        .map(|g| {
            let decay = (-g * h).exp();
            let mut w = Vec::with_capacity(steps + 1);
            w.push(0.0);
            for i in 0..steps {
                let prev = w[i];
                w.push(decay * prev + 0.5 * h * (decay * u[i] + u[i + 1]));
            }
            w
        })
        .collect::<Vec<_>>();
    debug_assert_eq!(w.len(), big_n);
    Ok(Trace { n, t, u, v, w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{decay_exponent, trapezoid};

    fn k1() -> KernelSpec {
        KernelSpec::from_k(&[1.0], &[2.0]).unwrap()
    }

    #[test]
    fn harmonic_oscillator() {
        let k = KernelSpec::empty();
        let sym = ModeSymbol::new(1, 1.0, 0.0, &k);
        let tr = integrate_mode(&sym, 1.0, 0.0, &ForcingSpec::zero(), 1.0, 1e-3).unwrap();
        assert_eq!(tr.len(), 1001);
        assert!((tr.u[1000] - 1f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn zero_data_zero_trace() {
        let k = k1();
        let sym = ModeSymbol::new(1, 4.0, 0.0, &k);
        let tr = integrate_mode(&sym, 0.0, 0.0, &ForcingSpec::zero(), 2.0, 1e-2).unwrap();
        assert!(tr.u.iter().chain(&tr.v).chain(&tr.w[0]).all(|&x| x == 0.0));
        let tq = integrate_quadrature(&sym, 0.0, 0.0, &ForcingSpec::zero(), 2.0, 1e-2).unwrap();
        assert!(tq.u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn step_guard() {
        let k = k1();
        let sym = ModeSymbol::new(1, 400.0, 0.0, &k);
        let err = integrate_mode(&sym, 1.0, 0.0, &ForcingSpec::zero(), 1.0, 1e-2).unwrap_err();
        assert!(matches!(err, Error::StepSizeTooLarge { .. }));
        assert!(integrate_mode(&sym, 1.0, 0.0, &ForcingSpec::zero(), 1.0, 5e-3).is_ok());
    }

    #[test]
    fn rk4_order_four() {
        let k = KernelSpec::empty();
        let sym = ModeSymbol::new(1, 1.0, 0.0, &k);
        let dts = [1e-2, 5e-3, 2.5e-3];
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let tr = integrate_mode(&sym, 1.0, 0.0, &ForcingSpec::zero(), 5.0, dt).unwrap();
                tr.t.iter()
                    .zip(&tr.u)
                    .map(|(t, u)| (u - t.cos()).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let slope = -decay_exponent(&dts, &errs);
        assert!((3.5..=4.5).contains(&slope), "slope {slope}");
    }

    #[test]
    fn memory_states_match_trapezoid() {
        let k = KernelSpec::from_k(&[0.5, 0.5], &[1.0, 3.0]).unwrap();
        let sym = ModeSymbol::new(1, 1.0, 0.0, &k);
        let tr = integrate_mode(&sym, 1.0, 0.0, &ForcingSpec::zero(), 5.0, 1e-3).unwrap();
        let h = tr.step();
        for t_check in [1.0, 2.0, 5.0] {
            let i = (t_check / h).round() as usize;
            for (k_idx, gamma) in [1.0, 3.0].into_iter().enumerate() {
                let ys: Vec<f64> = (0..=i)
                    .map(|j| (-gamma * (tr.t[i] - tr.t[j])).exp() * tr.u[j])
                    .collect();
                let quad = trapezoid(&tr.t[..=i], &ys);
                assert!(
                    (quad - tr.w[k_idx][i]).abs() < 1e-6,
                    "t={t_check} k={k_idx}"
                );
            }
        }
    }

    #[test]
    fn quadrature_oracle_agrees_and_is_second_order() {
        let k = k1();
        let sym = ModeSymbol::new(1, 1.0, 0.0, &k);
        let f = ForcingSpec::zero();
        let reference = integrate_mode(&sym, 1.0, 0.0, &f, 2.0, 1e-4).unwrap();
        let dts = [4e-3, 2e-3, 1e-3];
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let tq = integrate_quadrature(&sym, 1.0, 0.0, &f, 2.0, dt).unwrap();
                let stride = (dt / 1e-4).round() as usize;
                tq.u.iter()
                    .enumerate()
                    .map(|(i, u)| (u - reference.u[i * stride]).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[2] < 1e-4, "dt=1e-3 disagreement {}", errs[2]);
        let slope = -decay_exponent(&dts, &errs);
        assert!((1.7..=2.3).contains(&slope), "slope {slope}");
    }
}
