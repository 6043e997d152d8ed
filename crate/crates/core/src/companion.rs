//! All roots of a monic real polynomial as eigenvalues of its companion
//! matrix, by balancing followed by the Francis double-shift QR iteration
//! on the (already upper Hessenberg) companion form.
//!
//! This is the cross-check oracle for the bracketing/Newton spectrum
//! solver; it never consults the rational symbol.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::symbol::{PolySymbol, MAX_POLY_TERMS};

const RADIX: f64 = 2.0;
const MAX_ITS: usize = 60;

/// 1-based square matrix; row/column 0 are unused padding.
struct Mat {
    n: usize,
    data: Vec<f64>,
}

impl Mat {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; (n + 1) * (n + 1)],
        }
    }
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.n + 1) + j]
    }
    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * (self.n + 1) + j] = v;
    }
    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * (self.n + 1) + j] += v;
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

fn balance(a: &mut Mat) {
    let n = a.n;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += a.at(j, i).abs();
                    r += a.at(i, j).abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        let v = a.at(i, j) * g;
                        a.set(i, j, v);
                    }
                    for j in 1..=n {
                        let v = a.at(j, i) * f;
                        a.set(j, i, v);
                    }
                }
            }
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix (destroys `a`).
fn hqr(a: &mut Mat) -> Result<Vec<Complex64>> {
    let n = a.n;
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a.at(i, j).abs();
        }
    }
    let mut nn = n as isize;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l >= 2 {
                let mut s = a.at(l - 1, l - 1).abs() + a.at(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a.at(l, l - 1).abs() + s == s {
                    a.set(l, l - 1, 0.0);
                    break;
                }
                l -= 1;
            }
            let mut x = a.at(nu, nu);
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
            } else {
                let mut y = a.at(nu - 1, nu - 1);
                let mut w = a.at(nu, nu - 1) * a.at(nu - 1, nu);
                if l == nu - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[nu - 1] = x + z;
                        wr[nu] = x + z;
                        if z != 0.0 {
                            wr[nu] = x - w / z;
                        }
                        wi[nu - 1] = 0.0;
                        wi[nu] = 0.0;
                    } else {
                        wr[nu - 1] = x + p;
                        wr[nu] = x + p;
                        wi[nu - 1] = -z;
                        wi[nu] = z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITS {
                        return Err(Error::ConvergenceFailure { degree: n });
                    }
                    if its == 10 || its == 20 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nu {
                            a.add(i, i, -x);
                        }
                        let s = a.at(nu, nu - 1).abs() + a.at(nu - 1, nu - 2).abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nu - 2;
                    let mut z;
                    loop {
                        z = a.at(m, m);
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a.at(m + 1, m) + a.at(m, m + 1);
                        q = a.at(m + 1, m + 1) - z - r - s;
                        r = a.at(m + 2, m + 1);
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a.at(m, m - 1).abs() * (q.abs() + r.abs());
                        let v = p.abs()
                            * (a.at(m - 1, m - 1).abs() + z.abs() + a.at(m + 1, m + 1).abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nu {
                        a.set(i, i - 2, 0.0);
                        if i != m + 2 {
                            a.set(i, i - 3, 0.0);
                        }
                    }
                    let mut k = m;
                    while k < nu {
                        if k != m {
                            p = a.at(k, k - 1);
                            q = a.at(k + 1, k - 1);
                            r = 0.0;
                            if k != nu - 1 {
                                r = a.at(k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    let v = -a.at(k, k - 1);
                                    a.set(k, k - 1, v);
                                }
                            } else {
                                a.set(k, k - 1, -s * x);
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                let mut pp = a.at(k, j) + q * a.at(k + 1, j);
                                if k != nu - 1 {
                                    pp += r * a.at(k + 2, j);
                                    a.add(k + 2, j, -pp * z);
                                }
                                a.add(k + 1, j, -pp * y);
                                a.add(k, j, -pp * x);
                            }
                            let mmin = if nu < k + 3 { nu } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * a.at(i, k) + y * a.at(i, k + 1);
                                if k != nu - 1 {
                                    pp += z * a.at(i, k + 2);
                                    a.add(i, k + 2, -pp * r);
                                }
                                a.add(i, k + 1, -pp * q);
                                a.add(i, k, -pp);
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 1 || l as isize >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

/// Roots of `poly`, sorted by real part then imaginary part.
pub fn companion_roots(poly: &PolySymbol) -> Result<Vec<Complex64>> {
    let degree = poly.degree();
    if degree > MAX_POLY_TERMS + 2 {
        return Err(Error::ConditioningRefusal {
            terms: degree.saturating_sub(2),
            limit: MAX_POLY_TERMS,
        });
    }
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = poly.coeffs[0];
    let mut a = Mat::zeros(degree);
    for k in 1..=degree {
        a.set(1, k, -poly.coeffs[k] / lead);
    }
    for j in 2..=degree {
        a.set(j, j - 1, 1.0);
    }
    balance(&mut a);
    let mut roots = hqr(&mut a)?;
    for z in roots.iter_mut() {
        *z = polish(poly, *z);
    }
    roots.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(roots)
}

/// A few Newton steps on the polynomial itself; kept only while the
/// residual shrinks.
fn polish(poly: &PolySymbol, mut z: Complex64) -> Complex64 {
    let deriv: Vec<f64> = poly
        .coeffs
        .iter()
        .enumerate()
        .take(poly.degree())
        .map(|(i, &c)| c * (poly.degree() - i) as f64)
        .collect();
    let dpoly = PolySymbol::new(deriv);
    let real = z.im == 0.0;
    let mut res = poly.eval_complex(z).norm();
    for _ in 0..4 {
        let d = dpoly.eval_complex(z);
        if d.norm() == 0.0 {
            break;
        }
        let mut next = z - poly.eval_complex(z) / d;
        if real {
            next.im = 0.0;
        }
        let next_res = poly.eval_complex(next).norm();
        if next_res < res {
            z = next;
            res = next_res;
        } else {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn quadratic_pair() {
        let roots = companion_roots(&PolySymbol::new(vec![1.0, 0.0, 4.0])).unwrap();
        assert_eq!(roots.len(), 2);
        assert!(close(roots[0], Complex64::new(0.0, -2.0), 1e-12));
        assert!(close(roots[1], Complex64::new(0.0, 2.0), 1e-12));
    }

    #[test]
    fn cubic_with_one_real_root() {
        // independent check: bisection on p(x) = x^3 + 2x^2 + x + 1 in (-2, -1)
        let p = PolySymbol::new(vec![1.0, 2.0, 1.0, 1.0]);
        let oracle = crate::numeric::bisect_increasing(|x| p.eval(x), -2.0, -1.0, 1e-15, 200);
        let roots = companion_roots(&p).unwrap();
        let real: Vec<_> = roots.iter().filter(|z| z.im == 0.0).collect();
        assert_eq!(real.len(), 1);
        assert!((real[0].re - oracle).abs() < 1e-12);
        assert!((oracle + 1.754877666).abs() < 1e-8);
        let pair: Vec<_> = roots.iter().filter(|z| z.im != 0.0).collect();
        assert_eq!(pair.len(), 2);
        assert!(close(*pair[0], pair[1].conj(), 1e-12));
    }

    #[test]
    fn unstable_cubic_has_positive_root() {
        let p = PolySymbol::new(vec![1.0, 1.0, 1.0, -1.0]);
        let oracle = crate::numeric::bisect_increasing(|x| p.eval(x), 0.0, 1.0, 1e-15, 200);
        let roots = companion_roots(&p).unwrap();
        let real: Vec<_> = roots.iter().filter(|z| z.im == 0.0).collect();
        assert_eq!(real.len(), 1);
        assert!((real[0].re - oracle).abs() < 1e-12);
        assert!((oracle - 0.543689).abs() < 1e-6);
    }

    #[test]
    fn recovers_prescribed_roots() {
        // (x+1)(x+2)(x+3)(x^2 + 2x + 5)
        let mut c = vec![1.0];
        for r in [1.0, 2.0, 3.0] {
            let mut out = vec![0.0; c.len() + 1];
            for (i, &v) in c.iter().enumerate() {
                out[i] += v;
                out[i + 1] += v * r;
            }
            c = out;
        }
        let q = [1.0, 2.0, 5.0];
        let mut full = vec![0.0; c.len() + 2];
        for (i, &x) in c.iter().enumerate() {
            for (j, &y) in q.iter().enumerate() {
                full[i + j] += x * y;
            }
        }
        let roots = companion_roots(&PolySymbol::new(full)).unwrap();
        let expected = [
            Complex64::new(-3.0, 0.0),
            Complex64::new(-2.0, 0.0),
            Complex64::new(-1.0, -2.0),
            Complex64::new(-1.0, 2.0),
            Complex64::new(-1.0, 0.0),
        ];
        for e in expected {
            assert!(roots.iter().any(|r| close(*r, e, 1e-10)), "missing {e}");
        }
    }
}
