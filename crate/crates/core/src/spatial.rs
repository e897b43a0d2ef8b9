//! Three-dimensional vectors, 3×3 matrices and the handful of rotation
//! utilities the dynamics need.
//!
//! Everything here is a `Copy` value type. Matrices are stored row-major.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance from the rotation group (Frobenius) beyond which a matrix is
/// rejected by [`orthonormalize`] as not being a drifted rotation.
pub const ROTATION_REPAIR_LIMIT: f64 = 1e-3;

/// Orthonormality tolerance for matrices tagged as rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Projection onto the ground plane (z dropped).
    pub fn horizontal(self) -> Vec3 {
        Vec3::new(self.x, self.y, 0.0)
    }

    /// Euclidean distance between the ground-plane projections.
    pub fn planar_distance(self, o: Vec3) -> f64 {
        (self - o).horizontal().norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn outer(self, o: Vec3) -> Mat3 {
        Mat3::from_rows([
            [self.x * o.x, self.x * o.y, self.x * o.z],
            [self.y * o.x, self.y * o.y, self.y * o.z],
            [self.z * o.x, self.z * o.y, self.z * o.z],
        ])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3 {
    pub rows: [[f64; 3]; 3],
}

impl Default for Mat3 {
    fn default() -> Self {
        Mat3::IDENTITY
    }
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };
    pub const ZERO: Mat3 = Mat3 {
        rows: [[0.0; 3]; 3],
    };

    pub const fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self { rows }
    }

    pub fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Mat3::from_rows([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    pub fn diagonal(d: Vec3) -> Self {
        Mat3::from_rows([[d.x, 0.0, 0.0], [0.0, d.y, 0.0], [0.0, 0.0, d.z]])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.rows[0][j], self.rows[1][j], self.rows[2][j])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.rows[i])
    }

    pub fn transpose(&self) -> Mat3 {
        let r = &self.rows;
        Mat3::from_rows([
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ])
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    pub fn trace(&self) -> f64 {
        self.rows[0][0] + self.rows[1][1] + self.rows[2][2]
    }

    /// Transposed cofactor matrix; `adj(A)·A = det(A)·I`.
    pub fn adjugate(&self) -> Mat3 {
        let r = &self.rows;
        Mat3::from_rows([
            [
                r[1][1] * r[2][2] - r[1][2] * r[2][1],
                r[0][2] * r[2][1] - r[0][1] * r[2][2],
                r[0][1] * r[1][2] - r[0][2] * r[1][1],
            ],
            [
                r[1][2] * r[2][0] - r[1][0] * r[2][2],
                r[0][0] * r[2][2] - r[0][2] * r[2][0],
                r[0][2] * r[1][0] - r[0][0] * r[1][2],
            ],
            [
                r[1][0] * r[2][1] - r[1][1] * r[2][0],
                r[0][1] * r[2][0] - r[0][0] * r[2][1],
                r[0][0] * r[1][1] - r[0][1] * r[1][0],
            ],
        ])
    }

    /// Closed-form inverse, `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Mat3> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(self.adjugate() * (1.0 / det))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|v| v.is_finite())
    }

    /// `‖MᵀM − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.transpose() * *self - Mat3::IDENTITY).frobenius_norm()
    }

    pub fn is_rotation(&self, tol: f64) -> bool {
        self.is_finite()
            && self.orthonormality_error() <= tol
            && (self.determinant() - 1.0).abs() <= tol
    }

    /// Cholesky factorisation succeeds iff the (symmetric) matrix is positive definite.
    pub fn is_positive_definite(&self) -> bool {
        let a = &self.rows;
        let l00 = a[0][0];
        if l00 <= 0.0 {
            return false;
        }
        let l00 = l00.sqrt();
        let l10 = a[1][0] / l00;
        let l20 = a[2][0] / l00;
        let d1 = a[1][1] - l10 * l10;
        if d1 <= 0.0 {
            return false;
        }
        let l11 = d1.sqrt();
        let l21 = (a[2][1] - l20 * l10) / l11;
        a[2][2] - l20 * l20 - l21 * l21 > 0.0
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.rows[i][j] += o.rows[i][j];
            }
        }
        out
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        self + o * -1.0
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, k: f64) -> Mat3 {
        let mut out = self;
        out.rows.iter_mut().flatten().for_each(|v| *v *= k);
        out
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                out.rows[i][j] = (0..3).map(|k| self.rows[i][k] * o.rows[k][j]).sum();
            }
        }
        out
    }
}

/// Cross-product matrix: `skew(v) * w == v.cross(w)`.
pub fn skew(v: Vec3) -> Mat3 {
    Mat3::from_rows([[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]])
}

/// Rotation by `angle` about the ground z axis.
pub fn rotation_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::from_rows([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
}

/// Rotation by `angle` about the x axis.
pub fn rotation_x(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::from_rows([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
}

/// Rotation by `angle` about the y axis.
pub fn rotation_y(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::from_rows([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
}

/// Rotation vector to matrix (Rodrigues).
pub fn rotation_from_vector(v: Vec3) -> Mat3 {
    let angle = v.norm();
    if angle < 1e-300 {
        return Mat3::IDENTITY;
    }
    let k = skew(v * (1.0 / angle));
    Mat3::IDENTITY + k * angle.sin() + (k * k) * (1.0 - angle.cos())
}

/// Inverse of [`rotation_from_vector`] for rotation angles below π.
pub fn rotation_vector(m: &Mat3) -> Vec3 {
    let r = &m.rows;
    let axis = Vec3::new(r[2][1] - r[1][2], r[0][2] - r[2][0], r[1][0] - r[0][1]);
    let sin = 0.5 * axis.norm();
    let cos = 0.5 * (m.trace() - 1.0);
    let angle = sin.atan2(cos);
    if sin < 1e-12 {
        // small-angle limit of angle/sin
        return axis * 0.5;
    }
    axis * (0.5 * angle / sin)
}

/// Projects a drifted rotation back onto the rotation group via the polar
/// decomposition (Newton iteration `Q ← (Q + Q⁻ᵀ)/2`).
pub fn orthonormalize(m: &Mat3) -> Result<Mat3> {
    if !m.is_finite() {
        return Err(Error::DegenerateInput(
            "matrix has non-finite entries".into(),
        ));
    }
    let det = m.determinant();
    if det <= 1e-12 {
        return Err(Error::DegenerateInput(format!(
            "matrix is rank deficient or improper (det = {det:e})"
        )));
    }
    let mut q = *m;
    for _ in 0..32 {
        let inv_t = match q.inverse() {
            Some(inv) => inv.transpose(),
            None => return Err(Error::DegenerateInput("matrix became singular".into())),
        };
        let next = (q + inv_t) * 0.5;
        let delta = (next - q).frobenius_norm();
        q = next;
        if delta < 1e-15 {
            break;
        }
    }
    Ok(q)
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn skew_of_zero_is_zero() {
        assert_eq!(skew(Vec3::ZERO), Mat3::ZERO);
    }

    #[test]
    fn skew_unit_axis() {
        assert_eq!(skew(Vec3::Z) * Vec3::X, Vec3::Y);
    }

    #[test]
    fn rotation_z_cases() {
        assert_eq!(rotation_z(0.0), Mat3::IDENTITY);
        assert!(close(rotation_z(FRAC_PI_2) * Vec3::X, Vec3::Y, 1e-15));
        assert!(rotation_z(1.234).is_rotation(1e-14));
    }

    #[test]
    fn orthonormalize_identity_is_fixed() {
        assert_eq!(orthonormalize(&Mat3::IDENTITY).unwrap(), Mat3::IDENTITY);
    }

    #[test]
    fn orthonormalize_rejects_rank_deficient() {
        let m = Mat3::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]);
        assert!(matches!(orthonormalize(&m), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn orthonormalize_recovers_perturbed_rotation() {
        let r = rotation_from_vector(Vec3::new(0.3, -1.1, 0.7));
        let noise = Mat3::from_rows([
            [0.4e-6, -0.7e-6, 0.1e-6],
            [0.9e-6, 0.2e-6, -0.5e-6],
            [-0.3e-6, 0.6e-6, 0.8e-6],
        ]);
        let q = orthonormalize(&(r + noise)).unwrap();
        assert!((q - r).frobenius_norm() < 2e-6);
        assert!(q.orthonormality_error() < 1e-12);
    }

    #[test]
    fn rotation_vector_round_trip() {
        let v = Vec3::new(0.2, -0.4, 1.3);
        assert!(close(rotation_vector(&rotation_from_vector(v)), v, 1e-14));
        let small = Vec3::new(1e-9, -2e-9, 3e-9);
        assert!(close(
            rotation_vector(&rotation_from_vector(small)),
            small,
            1e-20
        ));
    }

    #[test]
    fn inverse_and_positive_definiteness() {
        let a = Mat3::from_rows([[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]]);
        let inv = a.inverse().unwrap();
        assert!((a * inv - Mat3::IDENTITY).frobenius_norm() < 1e-15);
        assert!(a.is_positive_definite());
        assert!(!(a * -1.0).is_positive_definite());
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn skew_matches_cross_formula(v in vec3(), w in vec3()) {
            // independent component formula for v × w
            let expected = Vec3::new(v[1] * w[2] - v[2] * w[1], v[2] * w[0] - v[0] * w[2], v[0] * w[1] - v[1] * w[0]);
            prop_assert!(close(skew(v) * w, expected, 1e-12));
            prop_assert!(close(skew(v) * w, -(skew(w) * v), 1e-12));
            prop_assert_eq!(skew(v).transpose(), skew(v) * -1.0);
        }

        #[test]
        fn rotation_z_group_law(a in -7.0..7.0f64, b in -7.0..7.0f64, v in vec3()) {
            let lhs = rotation_z(a) * rotation_z(b);
            prop_assert!((lhs - rotation_z(a + b)).frobenius_norm() < 1e-13);
            prop_assert_eq!((rotation_z(a) * v).z, v.z);
        }

        #[test]
        fn orthonormalize_is_idempotent(v in vec3(), n in prop::array::uniform9(-1e-4..1e-4f64)) {
            let r = rotation_from_vector(v * 0.3);
            let noisy = r + Mat3::from_rows([[n[0], n[1], n[2]], [n[3], n[4], n[5]], [n[6], n[7], n[8]]]);
            let q = orthonormalize(&noisy).unwrap();
            prop_assert!(q.orthonormality_error() < 1e-12);
            prop_assert!((q.determinant() - 1.0).abs() < 1e-12);
            let qq = orthonormalize(&q).unwrap();
            prop_assert!((qq - q).frobenius_norm() < 1e-14);
        }
    }
}
