//! Wigner D matrices under the convention `(R·Y)(ξ) = Y(Rᵀξ)`, so that
//! `R·Y_ℓ^m = Σ_{m′} D^ℓ_{m′m}(R) Y_ℓ^{m′}` with
//! `D^ℓ_{m′m} = e^{−im′α} d^ℓ_{m′m}(β) e^{−imγ}` for ZYZ Euler angles.

use super::rotation::Rotation;
use num_complex::Complex64;

/// Square `(2ℓ+1)²` matrix stored row-major by `(m′ + ℓ, m + ℓ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerMatrix {
    pub l: usize,
    pub data: Vec<Complex64>,
}

impl WignerMatrix {
    pub fn get(&self, mp: i64, m: i64) -> Complex64 {
        let n = 2 * self.l + 1;
        let l = self.l as i64;
        self.data[(mp + l) as usize * n + (m + l) as usize]
    }

    pub fn dim(&self) -> usize {
        2 * self.l + 1
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Little-d matrices `d^ℓ(β)` for `ℓ ≤ lmax`, via the three-term recurrence
/// in `ℓ` for interior entries and closed forms on the border.
pub fn little_d_all(lmax: usize, beta: f64) -> Vec<Vec<f64>> {
    let (s, c) = (beta / 2.0).sin_cos();
    let cb = beta.cos();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(lmax + 1);
    for l in 0..=lmax {
        let n = 2 * l + 1;
        let li = l as i64;
        let mut d = vec![0.0; n * n];
        let at = |mp: i64, m: i64| (mp + li) as usize * n + (m + li) as usize;
        if l == 0 {
            d[0] = 1.0;
            out.push(d);
            continue;
        }
        for m in -li..=li {
            let up = (li + m) as i32;
            let dn = (li - m) as i32;
            let b = binomial(2 * l, (li + m) as usize).sqrt();
            let sign = if (li - m) % 2 == 0 { 1.0 } else { -1.0 };
            // Top and bottom rows.
            d[at(li, m)] = sign * b * c.powi(up) * s.powi(dn);
            d[at(-li, m)] = b * c.powi(dn) * s.powi(up);
            // Right and left columns, indexed by the row m′ = m here.
            let sign_l = if (li + m) % 2 == 0 { 1.0 } else { -1.0 };
            d[at(m, li)] = b * c.powi(up) * s.powi(dn);
            d[at(m, -li)] = sign_l * b * c.powi(dn) * s.powi(up);
        }
        if l == 1 {
            d[at(0, 0)] = cb;
            out.push(d);
            continue;
        }
        let lf = l as f64;
        let prev = &out[l - 1];
        let prev2 = &out[l - 2];
        let n1 = 2 * l - 1;
        let n2 = 2 * l - 3;
        for mp in -(li - 1)..=(li - 1) {
            for m in -(li - 1)..=(li - 1) {
                let (mf, mpf) = (m as f64, mp as f64);
                let d1 = prev[(mp + li - 1) as usize * n1 + (m + li - 1) as usize];
                let d2 = if mp.abs() <= li - 2 && m.abs() <= li - 2 {
                    prev2[(mp + li - 2) as usize * n2 + (m + li - 2) as usize]
                } else {
                    0.0
                };
                let pre = lf * (2.0 * lf - 1.0) / ((lf * lf - mf * mf) * (lf * lf - mpf * mpf)).sqrt();
                let a = cb - mf * mpf / (lf * (lf - 1.0));
                let bcoef = (((lf - 1.0) * (lf - 1.0) - mf * mf) * ((lf - 1.0) * (lf - 1.0) - mpf * mpf)).sqrt()
                    / ((lf - 1.0) * (2.0 * lf - 1.0));
                d[at(mp, m)] = pre * (a * d1 - bcoef * d2);
            }
        }
        out.push(d);
    }
    out
}

/// `D^ℓ(R)` for every `ℓ ≤ lmax`.
pub fn wigner_d_all(lmax: usize, rot: &Rotation) -> Vec<WignerMatrix> {
    let (alpha, beta, gamma) = rot.euler_zyz();
    let small = little_d_all(lmax, beta);
    small
        .into_iter()
        .enumerate()
        .map(|(l, d)| {
            let n = 2 * l + 1;
            let li = l as i64;
            let ea: Vec<Complex64> = (-li..=li).map(|m| Complex64::from_polar(1.0, -(m as f64) * alpha)).collect();
            let eg: Vec<Complex64> = (-li..=li).map(|m| Complex64::from_polar(1.0, -(m as f64) * gamma)).collect();
            let mut data = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    data[i * n + j] = ea[i] * d[i * n + j] * eg[j];
                }
            }
            WignerMatrix { l, data }
        })
        .collect()
}

/// `D^ℓ(R)` for a single degree.
pub fn wigner_d(l: usize, rot: &Rotation) -> WignerMatrix {
    wigner_d_all(l, rot).pop().expect("at least one degree")
}
