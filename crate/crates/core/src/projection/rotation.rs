use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A rotation stored as a unit quaternion `(w, x, y, z)` with its matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rotation {
    q: [f64; 4],
    r: [[f64; 3]; 3],
}

impl From<[f64; 4]> for Rotation {
    fn from(q: [f64; 4]) -> Self {
        Rotation::from_quaternion(q)
    }
}

impl From<Rotation> for [f64; 4] {
    fn from(r: Rotation) -> Self {
        r.q
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self::from_quaternion([1.0, 0.0, 0.0, 0.0])
    }

    /// Normalizes `q` and caches the matrix.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(n > 0.0, "zero quaternion");
        let [w, x, y, z] = q.map(|v| v / n);
        let r = [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ];
        Self { q: [w, x, y, z], r }
    }

    /// Rotation by `angle` about a unit `axis`.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (s, c) = (angle / 2.0).sin_cos();
        Self::from_quaternion([c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n])
    }

    /// `R_z(α) R_y(β) R_z(γ)`.
    pub fn from_euler_zyz(alpha: f64, beta: f64, gamma: f64) -> Self {
        let a = Self::from_axis_angle([0.0, 0.0, 1.0], alpha);
        let b = Self::from_axis_angle([0.0, 1.0, 0.0], beta);
        let g = Self::from_axis_angle([0.0, 0.0, 1.0], gamma);
        a.compose(&b).compose(&g)
    }

    /// Haar-random rotation from a normalized Gaussian quaternion.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            if q.iter().map(|v| v * v).sum::<f64>() > 1e-20 {
                return Self::from_quaternion(q);
            }
        }
    }

    pub fn quaternion(&self) -> [f64; 4] {
        self.q
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.r
    }

    /// Row `i` of the matrix; row 3 is the viewing direction.
    pub fn row(&self, i: usize) -> [f64; 3] {
        self.r[i]
    }

    /// `self · other`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let [a1, b1, c1, d1] = self.q;
        let [a2, b2, c2, d2] = other.q;
        Rotation::from_quaternion([
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ])
    }

    pub fn inverse(&self) -> Rotation {
        let [w, x, y, z] = self.q;
        Rotation::from_quaternion([w, -x, -y, -z])
    }

    /// `R v`.
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| self.r[i][0] * v[0] + self.r[i][1] * v[1] + self.r[i][2] * v[2])
    }

    /// `Rᵀ v`.
    pub fn apply_transpose(&self, v: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| self.r[0][i] * v[0] + self.r[1][i] * v[1] + self.r[2][i] * v[2])
    }

    /// Euler angles `(α, β, γ)` with `R = R_z(α) R_y(β) R_z(γ)`. At gimbal
    /// lock the third angle is folded into the first and set to zero.
    pub fn euler_zyz(&self) -> (f64, f64, f64) {
        let r = &self.r;
        let cb = r[2][2].clamp(-1.0, 1.0);
        let sb = (r[0][2] * r[0][2] + r[1][2] * r[1][2]).sqrt();
        if sb < 1e-12 {
            if cb > 0.0 {
                (r[1][0].atan2(r[0][0]), 0.0, 0.0)
            } else {
                ((-r[1][0]).atan2(-r[0][0]), std::f64::consts::PI, 0.0)
            }
        } else {
            let beta = sb.atan2(cb);
            (r[1][2].atan2(r[0][2]), beta, r[2][1].atan2(-r[2][0]))
        }
    }

    /// Largest deviation of `RᵀR` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| self.r[k][i] * self.r[k][j]).sum();
                worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.r;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }
}

/// `n` i.i.d. Haar rotations from a single seeded stream.
pub fn sample_uniform_rotations(n: usize, seed: u64) -> Vec<Rotation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Rotation::random(&mut rng)).collect()
}
