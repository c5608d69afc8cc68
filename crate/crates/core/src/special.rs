//! Special functions: Gauss–Legendre rules, cylindrical and spherical Bessel
//! functions of integer order, and Bessel zeros.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Gauss–Legendre nodes (ascending) and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = (b - a) / 2.0;
    let mid = (b + a) / 2.0;
    let m = n.div_ceil(2);
    for i in 0..m {
        // Root i of P_n, counted from the right end.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = mid - half * z;
        x[n - 1 - i] = mid + half * z;
        w[i] = half * wi;
        w[n - 1 - i] = half * wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Legendre polynomials `P_0(t) ..= P_lmax(t)`.
pub fn legendre_all(lmax: usize, t: f64) -> Vec<f64> {
    let mut p = vec![0.0; lmax + 1];
    p[0] = 1.0;
    if lmax >= 1 {
        p[1] = t;
    }
    for l in 2..=lmax {
        let lf = l as f64;
        p[l] = ((2.0 * lf - 1.0) * t * p[l - 1] - (lf - 1.0) * p[l - 2]) / lf;
    }
    p
}

const RESCALE_AT: f64 = 1e250;
const RESCALE_BY: f64 = 1e-250;

/// Cylindrical Bessel functions `J_0(x) ..= J_nmax(x)` by Miller's backward
/// recurrence normalized with `J_0 + 2 Σ J_2k = 1`.
pub fn bessel_j_all(nmax: usize, x: f64, out: &mut [f64]) {
    assert!(out.len() > nmax);
    let x_abs = x.abs();
    out[..=nmax].fill(0.0);
    if x_abs < 1e-300 {
        out[0] = 1.0;
        return;
    }
    let top = nmax.max(x_abs.ceil() as usize);
    let mut m = top + 40 + (6.0 * x_abs.cbrt()).ceil() as usize;
    if m % 2 == 1 {
        m += 1;
    }
    let mut jp = 0.0; // J_{k+1}
    let mut jk = 1e-300; // J_k at k = m
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        let jm = (2.0 * k as f64 / x_abs) * jk - jp;
        jp = jk;
        jk = jm;
        let idx = k - 1;
        if idx <= nmax {
            out[idx] = jk;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * jk;
        }
        if jk.abs() > RESCALE_AT {
            jk *= RESCALE_BY;
            jp *= RESCALE_BY;
            norm *= RESCALE_BY;
            for v in out[..=nmax.min(m)].iter_mut() {
                *v *= RESCALE_BY;
            }
        }
    }
    norm += jk;
    for v in out[..=nmax].iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (n, v) in out[..=nmax].iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
}

/// `J_n(x)` for a single order.
pub fn bessel_j(n: usize, x: f64) -> f64 {
    let mut buf = vec![0.0; n + 1];
    bessel_j_all(n, x, &mut buf);
    buf[n]
}

/// Spherical Bessel functions `j_0(x) ..= j_lmax(x)` for `x ≥ 0`.
pub fn spherical_bessel_all(lmax: usize, x: f64, out: &mut [f64]) {
    assert!(out.len() > lmax);
    assert!(x >= 0.0, "spherical Bessel argument must be non-negative");
    out[..=lmax].fill(0.0);
    if x < 1e-300 {
        out[0] = 1.0;
        return;
    }
    if x < 1e-4 {
        // Leading two series terms are exact to double precision here.
        let mut lead = 1.0;
        for l in 0..=lmax {
            if l > 0 {
                lead *= x / (2 * l + 1) as f64;
            }
            out[l] = lead * (1.0 - x * x / (2.0 * (2 * l + 3) as f64));
            if lead == 0.0 {
                break;
            }
        }
        return;
    }
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    if lmax == 0 {
        out[0] = j0;
        return;
    }
    let start = lmax.max(x.ceil() as usize) + 40 + (6.0 * x.cbrt()).ceil() as usize;
    let mut jp = 0.0;
    let mut jk = 1e-300;
    let mut j0_raw = 0.0;
    let mut j1_raw = 0.0;
    for k in (1..=start).rev() {
        let jm = ((2 * k + 1) as f64 / x) * jk - jp;
        jp = jk;
        jk = jm;
        let idx = k - 1;
        if idx <= lmax {
            out[idx] = jk;
        }
        if idx == 1 {
            j1_raw = jk;
        }
        if idx == 0 {
            j0_raw = jk;
        }
        if jk.abs() > RESCALE_AT {
            jk *= RESCALE_BY;
            jp *= RESCALE_BY;
            j1_raw *= RESCALE_BY;
            for v in out[..=lmax].iter_mut() {
                *v *= RESCALE_BY;
            }
        }
    }
    let scale = if j0.abs() >= j1.abs() {
        j0 / j0_raw
    } else {
        j1 / j1_raw
    };
    for v in out[..=lmax].iter_mut() {
        *v *= scale;
    }
}

/// McMahon's large-argument estimate of the `m`-th positive zero of `J_n`.
pub fn mcmahon_zero(n: usize, m: usize) -> f64 {
    let mu = 4.0 * (n * n) as f64;
    let beta = (m as f64 + n as f64 / 2.0 - 0.25) * PI;
    beta - (mu - 1.0) / (8.0 * beta) - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * (8.0 * beta).powi(3))
}

/// The first `count` positive zeros of `J_n`, bracketed by a sign-change scan
/// and refined by bisection.
pub fn bessel_j_zeros(n: usize, count: usize) -> Result<Vec<f64>> {
    let mut zeros = Vec::with_capacity(count);
    if count == 0 {
        return Ok(zeros);
    }
    // The first zero of J_n exceeds n, and consecutive zeros are more than
    // pi/2 apart, so a 0.05 step never skips one.
    let limit = mcmahon_zero(n, count).max(n as f64) + 10.0 * PI + n as f64;
    let step = 0.05;
    let mut buf = vec![0.0; n + 1];
    let mut eval = |x: f64| {
        bessel_j_all(n, x, &mut buf);
        buf[n]
    };
    let mut a = (n as f64).max(step);
    let mut fa = eval(a);
    while zeros.len() < count {
        let b = a + step;
        if b > limit {
            return Err(Error::Basis(format!(
                "zero search for J_{n} found {} of {count} zeros below {limit:.3}",
                zeros.len()
            )));
        }
        let fb = eval(b);
        if fb == 0.0 {
            zeros.push(b);
            a = b + step / 2.0;
            fa = eval(a);
            continue;
        }
        if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            while hi - lo > 1e-13 * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                let fm = eval(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if flo * fm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    Ok(zeros)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(10, 0.0, 2.0);
        // Degree 19 is the highest degree integrated exactly by 10 nodes.
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(19)).sum();
        let exact = 2f64.powi(20) / 20.0;
        assert!((approx - exact).abs() / exact < 1e-13);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_large_order_weights_sum() {
        let (x, w) = gauss_legendre(400, -1.0, 1.0);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn bessel_j_reference_values() {
        // Values from standard tables.
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((bessel_j(5, 10.0) - (-0.234_061_528_186_793_7)).abs() < 1e-13);
        assert!((bessel_j(0, 50.0) - 0.055_812_327_669_251_86).abs() < 1e-13);
        assert_eq!(bessel_j(3, 0.0), 0.0);
        assert_eq!(bessel_j(0, 0.0), 1.0);
    }

    #[test]
    fn bessel_j_matches_series_for_small_argument() {
        // J_n(x) ~ (x/2)^n / n! for small x.
        let x = 1e-3;
        let got = bessel_j(4, x);
        let want = (x / 2.0f64).powi(4) / 24.0 * (1.0 - x * x / 20.0);
        assert!((got - want).abs() / want < 1e-10);
    }

    #[test]
    fn spherical_bessel_closed_forms() {
        let mut out = [0.0; 4];
        for &x in &[0.3, 1.0, 3.0, 7.5, 40.0] {
            spherical_bessel_all(3, x, &mut out);
            let (s, c) = (f64::sin(x), f64::cos(x));
            let j0 = s / x;
            let j1 = s / (x * x) - c / x;
            let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
            assert!((out[0] - j0).abs() < 1e-14, "j0 at {x}");
            assert!((out[1] - j1).abs() < 1e-14, "j1 at {x}");
            assert!((out[2] - j2).abs() < 1e-13, "j2 at {x}");
        }
    }

    #[test]
    fn spherical_bessel_small_argument_and_origin() {
        let mut out = [0.0; 3];
        spherical_bessel_all(2, 0.0, &mut out);
        assert_eq!(out, [1.0, 0.0, 0.0]);
        spherical_bessel_all(2, 1e-5, &mut out);
        assert!((out[2] - 1e-10 / 15.0).abs() < 1e-22);
    }

    #[test]
    fn bessel_zeros_reference_values() {
        let z0 = bessel_j_zeros(0, 3).unwrap();
        assert!((z0[0] - 2.404_825_557_695_773).abs() < 1e-11);
        assert!((z0[2] - 8.653_727_912_911_013).abs() < 1e-11);
        let z5 = bessel_j_zeros(5, 1).unwrap();
        assert!((z5[0] - 8.771_483_815_959_954).abs() < 1e-11);
    }

    #[test]
    fn legendre_values() {
        let p = legendre_all(3, 0.5);
        assert!((p[2] - (-0.125)).abs() < 1e-15);
        assert!((p[3] - (-0.4375)).abs() < 1e-15);
    }
}
