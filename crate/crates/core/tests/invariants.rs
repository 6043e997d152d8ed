use num_complex::Complex64;
use proptest::prelude::*;
use viscospectral::companion::companion_roots;
use viscospectral::kernel::KernelSpec;
use viscospectral::operator::{ForcingSpec, ModeVector, OperatorSpec};
use viscospectral::oracle::integrate_mode;
use viscospectral::series::{eval_series, homogeneous_series};
use viscospectral::spectrum::full_spectrum;
use viscospectral::symbol::ModeSymbol;

/// Kernels with 1-4 terms, distinct rates and stability index below one.
fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    prop::collection::vec((0.05f64..1.0, 0.2f64..6.0), 1..=4).prop_filter_map("rates", |pairs| {
        let mut gammas: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        gammas.sort_by(f64::total_cmp);
        if gammas.windows(2).any(|w| w[1] - w[0] < 0.1) {
            return None;
        }
        let index: f64 = pairs.iter().zip(&gammas).map(|(p, g)| p.0 / g).sum();
        let scale = if index >= 0.9 { 0.9 / index } else { 1.0 };
        let c: Vec<f64> = pairs.iter().map(|p| p.0 * scale).collect();
        KernelSpec::from_k(&c, &gammas).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn real_roots_interlace(kernel in kernel_strategy(), n_max in 1usize..24) {
        let op = OperatorSpec::dirichlet_laplacian_1d(n_max);
        let report = full_spectrum(&op, &kernel).unwrap();
        let xs = kernel.g_real_zeros().unwrap();
        for s in &report.spectra {
            prop_assert_eq!(s.real_roots.len(), kernel.len());
            for (k, (&lam, t)) in s.real_roots.iter().zip(kernel.terms()).enumerate() {
                prop_assert!(-t.gamma < lam && lam < xs[k], "n={} k={} lam={}", s.n, k, lam);
            }
        }
    }

    #[test]
    fn roots_match_companion(kernel in kernel_strategy(), a in 0.3f64..40.0) {
        let op = OperatorSpec::explicit(&[a], &[0.0], 0.5).unwrap();
        let report = full_spectrum(&op, &kernel).unwrap();
        let sym = ModeSymbol::for_mode(&op, 1, &kernel);
        let oracle = companion_roots(&sym.to_polynomial().unwrap()).unwrap();
        let roots = report.spectra[0].roots();
        prop_assert_eq!(roots.len(), oracle.len());
        for r in &roots {
            let d = oracle.iter().map(|q| (r - q).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-7 * (1.0 + r.norm()), "root {} off by {}", r, d);
        }
        let sum: Complex64 = roots.iter().sum();
        let sum_gamma: f64 = kernel.gammas().sum();
        prop_assert!((sum.re + sum_gamma).abs() < 1e-8 * (1.0 + sum_gamma));
    }

    #[test]
    fn series_reproduces_data_and_oracle(
        kernel in kernel_strategy(),
        a in 0.5f64..6.0,
        phi0 in -1.0f64..1.0,
        phi1 in -1.0f64..1.0,
    ) {
        let op = OperatorSpec::explicit(&[a], &[0.0], 0.5).unwrap();
        let report = full_spectrum(&op, &kernel).unwrap();
        let s = homogeneous_series(&report, &ModeVector(vec![phi0]), &ModeVector(vec![phi1])).unwrap();
        prop_assert!((eval_series(&s, 0.0, 0).unwrap().get(1) - phi0).abs() < 1e-9);
        prop_assert!((eval_series(&s, 0.0, 1).unwrap().get(1) - phi1).abs() < 1e-9);

        let sym = ModeSymbol::for_mode(&op, 1, &kernel);
        let gmax = kernel.gammas().fold(a, f64::max);
        let dt = 0.02 / gmax;
        let tr = integrate_mode(&sym, phi0, phi1, &ForcingSpec::zero(), 2.0, dt).unwrap();
        for (i, &t) in tr.t.iter().enumerate().step_by(10) {
            let u = s.modes[0].eval_complex(t, 0).unwrap();
            prop_assert!(u.im.abs() < 1e-10);
            prop_assert!((u.re - tr.u[i]).abs() < 1e-6, "t={} series={} oracle={}", t, u.re, tr.u[i]);
        }
    }
}
