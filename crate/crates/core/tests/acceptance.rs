//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use viscospectral::companion::companion_roots;
use viscospectral::estimates::{
    contraction_threshold, empirical_d, lemma_bound_report, memory_decay_exponent,
    memory_decay_window, random_problem, solvability_ratio, LambdaGrid,
};
use viscospectral::kernel::{KernelSpec, Which};
use viscospectral::numeric::{decay_exponent, linspace};
use viscospectral::operator::{ExpPolyTerm, ForcingSpec, ModeVector, OperatorSpec};
use viscospectral::oracle::{integrate_mode, integrate_quadrature};
use viscospectral::series::{eval_series, forced_series, full_series, homogeneous_series};
use viscospectral::spectrum::{asymptotic_fit, emit_spectrum_csv, full_spectrum, ModeSpectrum};
use viscospectral::symbol::ModeSymbol;

const LADDER: [f64; 5] = [8.0, 16.0, 32.0, 64.0, 128.0];

fn k1() -> KernelSpec {
    KernelSpec::from_k(&[1.0], &[2.0]).unwrap()
}

fn k2() -> KernelSpec {
    KernelSpec::from_k(&[0.5, 0.5], &[1.0, 3.0]).unwrap()
}

fn k3() -> KernelSpec {
    KernelSpec::from_k(&[2.0], &[1.0]).unwrap()
}

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn interlacing_violations(spectra: &[ModeSpectrum], kernel: &KernelSpec) -> (usize, usize) {
    let xs = kernel.g_real_zeros().unwrap();
    let mut roots = 0;
    let mut bad = 0;
    for s in spectra {
        for (k, (&lam, term)) in s.real_roots.iter().zip(kernel.terms()).enumerate() {
            roots += 1;
            if !(-term.gamma < lam && lam < xs[k]) {
                bad += 1;
            }
        }
    }
    (bad, roots)
}

fn criterion_1() -> Verdict {
    let op = OperatorSpec::dirichlet_laplacian_1d(64);
    let mut total_bad = 0;
    let mut total_roots = 0;
    for kernel in [k1(), k2()] {
        let report = full_spectrum(&op, &kernel).unwrap();
        let (bad, roots) = interlacing_violations(&report.spectra, &kernel);
        total_bad += bad;
        total_roots += roots;
    }
    verdict(
        total_bad == 0 && total_roots == 64 * 3,
        format!("{total_bad} violations over {total_roots} real roots (K1, K2, n <= 64)"),
    )
}

/// Largest distance from a root in `a` to its nearest neighbour in `b`, both ways.
fn hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one_way = |x: &[Complex64], y: &[Complex64]| {
        x.iter()
            .map(|p| {
                y.iter()
                    .map(|q| (p - q).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn criterion_2() -> Verdict {
    let op = OperatorSpec::dirichlet_laplacian_1d(64);
    let mut worst_match: f64 = 0.0;
    let mut worst_vieta: f64 = 0.0;
    let mut count_ok = true;
    let mut vieta_ok = true;
    for kernel in [k1(), k2()] {
        let report = full_spectrum(&op, &kernel).unwrap();
        let sum_gamma: f64 = kernel.gammas().sum();
        for s in &report.spectra {
            let sym = ModeSymbol::for_mode(&op, s.n, &kernel);
            let oracle = companion_roots(&sym.to_polynomial().unwrap()).unwrap();
            let roots = s.roots();
            count_ok &= roots.len() == kernel.len() + 2 && oracle.len() == roots.len();
            worst_match = worst_match.max(hausdorff(&roots, &oracle));
            let sum: Complex64 = roots.iter().sum();
            let err = (sum.re + sum_gamma).abs().max(sum.im.abs());
            worst_vieta = worst_vieta.max(err / (1.0 + sum_gamma));
            vieta_ok &= err <= 1e-8 * (1.0 + sum_gamma);
        }
    }
    verdict(
        worst_match <= 1e-7 && vieta_ok && count_ok,
        format!("max root distance to companion oracle {worst_match:.2e}, max relative Vieta error {worst_vieta:.2e}, counts ok: {count_ok}"),
    )
}

fn criterion_3() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, kernel) in [("K1", k1()), ("K2", k2())] {
        let fit = asymptotic_fit(&kernel, &LADDER).unwrap();
        let real = fit.real_root_exponent.unwrap();
        pass &= (1.7..=2.3).contains(&fit.re_exponent)
            && (0.7..=1.3).contains(&fit.im_exponent)
            && (1.7..=2.3).contains(&real);
        parts.push(format!(
            "{name}: Re {:.3}, Im {:.3}, real root {:.3}",
            fit.re_exponent, fit.im_exponent, real
        ));
    }
    verdict(pass, format!("slopes {}", parts.join("; ")))
}

fn criterion_4() -> Verdict {
    let stable = full_spectrum(&OperatorSpec::dirichlet_laplacian_1d(32), &k1()).unwrap();
    let max_re = stable.aggregate.verdict.max_re;
    let unstable = full_spectrum(&OperatorSpec::dirichlet_laplacian_1d(128), &k3()).unwrap();
    let all_positive = unstable.spectra.iter().all(|s| s.real_roots[0] > 0.0);
    let x1 = k3().g_real_zeros().unwrap()[0];
    let gap = (unstable.spectra[127].real_roots[0] - x1).abs();
    verdict(
        max_re < 0.0 && all_positive && gap < 1e-3 && (x1 - 1.0).abs() < 1e-12,
        format!("K1 max Re = {max_re:.4}; K3 lambda_1n > 0 for all n: {all_positive}, |lambda_1,128 - x_1| = {gap:.2e}"),
    )
}

fn sup_diff(series: &[f64], oracle: &[f64]) -> f64 {
    series
        .iter()
        .zip(oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn criterion_5() -> Verdict {
    let kernel = k1();
    let a: Vec<f64> = (1..=8).map(|n| n as f64).collect();
    let op = OperatorSpec::explicit(&a, &[0.0; 8], 0.5).unwrap();
    let report = full_spectrum(&op, &kernel).unwrap();
    let ones = ModeVector(vec![1.0; 8]);
    let zeros = ModeVector::zeros(8);
    let f = ForcingSpec::uniform(
        &[
            ExpPolyTerm::new(1.0, 0, -1.0),
            ExpPolyTerm::new(-1.0, 0, -2.0),
        ],
        8,
    )
    .unwrap();
    let hom = homogeneous_series(&report, &ones, &zeros).unwrap();
    let forced = forced_series(&report, &f).unwrap();
    let zero_f = ForcingSpec::zero();
    let mut worst_hom: f64 = 0.0;
    let mut worst_forced: f64 = 0.0;
    for n in 1..=8 {
        let sym = ModeSymbol::for_mode(&op, n, &kernel);
        let tr = integrate_mode(&sym, 1.0, 0.0, &zero_f, 5.0, 1e-4).unwrap();
        let s: Vec<f64> =
            tr.t.iter()
                .map(|&t| hom.modes[n - 1].eval_complex(t, 0).unwrap().re)
                .collect();
        worst_hom = worst_hom.max(sup_diff(&s, &tr.u));
        let tr = integrate_mode(&sym, 0.0, 0.0, &f, 5.0, 1e-4).unwrap();
        let s: Vec<f64> =
            tr.t.iter()
                .map(|&t| forced.modes[n - 1].eval_complex(t, 0).unwrap().re)
                .collect();
        worst_forced = worst_forced.max(sup_diff(&s, &tr.u));
    }

    // RK4 against the undamped closed form
    let empty = KernelSpec::empty();
    let osc = ModeSymbol::new(1, 1.0, 0.0, &empty);
    let dts = [1e-2, 5e-3, 2.5e-3];
    let rk_errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let tr = integrate_mode(&osc, 1.0, 0.0, &zero_f, 5.0, dt).unwrap();
            let exact: Vec<f64> = tr.t.iter().map(|t| t.cos()).collect();
            sup_diff(&exact, &tr.u)
        })
        .collect();
    let rk_slope = -decay_exponent(&dts, &rk_errs);

    // trapezoid-memory Heun against fine RK4
    let sym = ModeSymbol::new(1, 1.0, 0.0, &kernel);
    let reference = integrate_mode(&sym, 1.0, 0.0, &zero_f, 2.0, 1e-4).unwrap();
    let qdts = [4e-3, 2e-3, 1e-3];
    let q_errs: Vec<f64> = qdts
        .iter()
        .map(|&dt| {
            let tq = integrate_quadrature(&sym, 1.0, 0.0, &zero_f, 2.0, dt).unwrap();
            let stride = (dt / 1e-4).round() as usize;
            let r: Vec<f64> = (0..tq.len()).map(|i| reference.u[i * stride]).collect();
            sup_diff(&tq.u, &r)
        })
        .collect();
    let q_slope = -decay_exponent(&qdts, &q_errs);

    verdict(
        worst_hom <= 1e-6 && worst_forced <= 1e-6 && (3.5..=4.5).contains(&rk_slope) && (1.5..=2.5).contains(&q_slope),
        format!(
            "sup|series - rk4| homogeneous {worst_hom:.2e}, forced {worst_forced:.2e}; rk4 order {rk_slope:.2}, quadrature order {q_slope:.2} (disagreement {:.2e} at dt=1e-3)",
            q_errs[2]
        ),
    )
}

fn seeded_data(n: usize, seed: u64) -> (ModeVector, ModeVector) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let phi0 = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let phi1 = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (ModeVector(phi0), ModeVector(phi1))
}

fn criterion_6() -> Verdict {
    let kernels = [
        k1(),
        k2(),
        KernelSpec::from_k(&[0.3, 0.2, 0.25, 0.1], &[0.5, 1.5, 4.0, 9.0]).unwrap(),
    ];
    let op = OperatorSpec::dirichlet_laplacian_1d(32);
    let mut worst_u: f64 = 0.0;
    let mut worst_v: f64 = 0.0;
    for (i, kernel) in kernels.iter().enumerate() {
        let report = full_spectrum(&op, kernel).unwrap();
        let (phi0, phi1) = seeded_data(32, i as u64);
        let s = homogeneous_series(&report, &phi0, &phi1).unwrap();
        let u0 = eval_series(&s, 0.0, 0).unwrap();
        let v0 = eval_series(&s, 0.0, 1).unwrap();
        worst_u = worst_u.max(sup_diff(&u0.0, &phi0.0));
        worst_v = worst_v.max(sup_diff(&v0.0, &phi1.0));
    }
    verdict(
        worst_u <= 1e-8 && worst_v <= 1e-8,
        format!("max |u(0) - phi0| = {worst_u:.2e}, max |u'(0) - phi1| = {worst_v:.2e} (3 kernels, 32 modes)"),
    )
}

fn criterion_7() -> Verdict {
    let a: Vec<f64> = (1..=8).map(|n| n as f64).collect();
    let op = OperatorSpec::explicit(&a, &[0.0; 8], 0.5).unwrap();
    let f = ForcingSpec::uniform(
        &[
            ExpPolyTerm::new(1.0, 0, -1.0),
            ExpPolyTerm::new(-1.0, 0, -2.0),
        ],
        8,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for kernel in [k1(), k2()] {
        let report = full_spectrum(&op, &kernel).unwrap();
        let (phi0, phi1) = seeded_data(8, 7);
        let s = full_series(&report, &phi0, &phi1, &f).unwrap();
        for n in 1..=8 {
            let sym = ModeSymbol::for_mode(&op, n, &kernel);
            let tr = integrate_mode(&sym, phi0.get(n), phi1.get(n), &f, 5.0, 1e-4).unwrap();
            let h = tr.step();
            for t in linspace(0.1, 5.0, 20) {
                let i = (t / h).round() as usize;
                let ti = tr.t[i];
                let m = &s.modes[n - 1];
                let u = m.eval_complex(ti, 0).unwrap().re;
                let u2 = m.eval_complex(ti, 2).unwrap().re;
                let residual = u2 + sym.a_sq * u - tr.memory(&sym, i) - f.eval(n, ti, 0).unwrap();
                worst = worst.max(residual.abs());
            }
        }
    }
    verdict(
        worst <= 1e-6,
        format!("max |u'' + a^2 u - memory - f| = {worst:.2e} at 20 times in [0.1, 5]"),
    )
}

fn criterion_8() -> Verdict {
    let with_q = KernelSpec::from_kq(&[0.4, 0.3], &[0.2, 0.5], &[1.0, 2.5]).unwrap();
    let a: Vec<f64> = (1..=32).map(|n| n as f64).collect();
    let b: Vec<f64> = a.iter().map(|x| 0.25 * x * x).collect();
    let op_b = OperatorSpec::explicit(&a, &b, 0.5).unwrap();
    let op = OperatorSpec::dirichlet_laplacian_1d(32);
    let cases = [(k1(), op.clone()), (k2(), op), (with_q, op_b)];
    let mut violations = 0;
    let mut points = 0;
    let mut smoothing: f64 = 0.0;
    for (kernel, op) in &cases {
        let gamma = contraction_threshold(kernel, op).unwrap();
        let grid = LambdaGrid::standard(gamma, 101, 101);
        let r = lemma_bound_report(kernel, op, &grid, gamma).unwrap();
        violations += r.resolvent.violations
            + r.kernel_k.violations
            + r.kernel_q.violations
            + r.decay_rates.violations;
        points += r.points;
        smoothing = smoothing.max(r.smoothing.sup);
    }
    verdict(
        violations == 0,
        format!("{violations} violations of the exact inequalities over {points} grid points x modes (3 cases); smoothing sup {smoothing:.3} (<= 3)"),
    )
}

fn criterion_9() -> Verdict {
    let kernel = k1();
    let op32 = OperatorSpec::dirichlet_laplacian_1d(32);
    let op16 = OperatorSpec::dirichlet_laplacian_1d(16);
    let gamma_star = contraction_threshold(&kernel, &op32).unwrap();
    let window = memory_decay_window(&kernel, &op32);
    let exponent = memory_decay_exponent(&kernel, &op32, window, 9);
    let gamma = gamma_star + 1.0;
    let d32 = empirical_d(&kernel, &op32, gamma, 50, 0, 10.0, 0.01).unwrap();
    let d16 = empirical_d(&kernel, &op16, gamma, 50, 0, 10.0, 0.01).unwrap();
    let mut worst_scale: f64 = 0.0;
    for seed in 0..50 {
        let p = random_problem(&kernel, &op32, seed, 10.0, 0.01);
        let base = solvability_ratio(&p, gamma).unwrap().ratio;
        for s in [0.25, 3.0] {
            let r = solvability_ratio(&p.scaled(s), gamma).unwrap().ratio;
            worst_scale = worst_scale.max((r - base).abs() / base);
        }
    }
    let change = (d32.max_ratio - d16.max_ratio).abs() / d16.max_ratio;
    let finite = d32.ratios.iter().chain(&d16.ratios).all(|r| r.is_finite());
    verdict(
        gamma_star.is_finite()
            && gamma_star > 0.0
            && (0.8..=1.2).contains(&exponent)
            && finite
            && worst_scale <= 1e-10
            && change < 0.2,
        format!(
            "gamma* = {gamma_star:.6}; ||V|| decay exponent {exponent:.3} on Re in [{:.1}, {:.1}]; empirical d = {:.4} (n<=32) vs {:.4} (n<=16), change {:.1}%; scale invariance {worst_scale:.1e}",
            window.0,
            window.1,
            d32.max_ratio,
            d16.max_ratio,
            100.0 * change
        ),
    )
}

fn criterion_10() -> Verdict {
    let kernel = k2();
    let op = OperatorSpec::dirichlet_laplacian_1d(64);
    let report = full_spectrum(&op, &kernel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectrum.csv");
    let rows = emit_spectrum_csv(&report.spectra, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header_ok = lines.next() == Some("n,kind,re,im");
    let xs = kernel.g_real_zeros().unwrap();
    let half_k0 = 0.5 * kernel.at_zero(Which::K);
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); 2];
    let mut branch = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let re: f64 = f[2].parse().unwrap();
        let im: f64 = f[3].parse().unwrap();
        match f[1] {
            "real:1" => columns[0].push(re),
            "real:2" => columns[1].push(re),
            "complex+" => branch.push((re, im)),
            _ => {}
        }
    }
    let mut ok = header_ok && rows == 64 * 4 && branch.len() == 64;
    let mut detail = Vec::new();
    for (k, col) in columns.iter().enumerate() {
        let last_gap = (col[63] - xs[k]).abs();
        let shrinking = col
            .windows(2)
            .all(|w| (w[1] - xs[k]).abs() < (w[0] - xs[k]).abs());
        ok &= col.len() == 64 && shrinking && last_gap < 1e-3;
        detail.push(format!(
            "column {} -> x_{} = {:.6}, gap at n=64 {last_gap:.1e}",
            k + 1,
            k + 1,
            xs[k]
        ));
    }
    let branch_gap = (branch[63].0 + half_k0).abs();
    ok &= branch_gap < 1e-3 && branch.iter().all(|(_, im)| *im > 0.0);
    detail.push(format!("|Re lambda+ + K(0)/2| at n=64 {branch_gap:.1e}"));
    verdict(ok, format!("{rows} rows; {}", detail.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("interlacing", criterion_1),
        ("root completeness", criterion_2),
        ("asymptotics", criterion_3),
        ("stability dichotomy", criterion_4),
        ("series-oracle equivalence", criterion_5),
        ("initial-condition residues", criterion_6),
        ("equation residual", criterion_7),
        ("exact scalar inequalities", criterion_8),
        ("contraction and solvability", criterion_9),
        ("spectrum figure data", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let status = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {name}: {status} ({}) [{:.1}s]",
            i + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
