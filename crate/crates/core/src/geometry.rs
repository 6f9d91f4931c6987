//! Low-level 3D geometry: angles between atoms, rotations and rigid frames.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Cross products and arm lengths below this norm are treated as collinear.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Tolerance used when validating orthonormality and determinant.
pub const ROTATION_TOL: f64 = 1e-9;

/// Maps an angle onto (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let two_pi = 2.0 * PI;
    let mut y = x % two_pi;
    if y <= -PI {
        y += two_pi;
    } else if y > PI {
        y -= two_pi;
    }
    y
}

/// Signed dihedral angle of the four points `a-b-c-d`, in (-pi, pi].
///
/// Computed as `atan2(b2 . (n1 x n2), n1 . n2)` with unit bond direction `b2 = c - b`
/// and unit normals of the planes `(a, b, c)` and `(b, c, d)`.
pub fn dihedral(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> Result<f64> {
    let b1 = b - a;
    let b2 = c - b;
    let b3 = d - c;
    let b2_norm = b2.norm();
    if b2_norm < DEGENERACY_EPS {
        return Err(Error::DegenerateGeometry(
            "central bond of dihedral has zero length".into(),
        ));
    }
    let n1 = b1.cross(&b2);
    let n2 = b2.cross(&b3);
    let (n1_norm, n2_norm) = (n1.norm(), n2.norm());
    if n1_norm < DEGENERACY_EPS || n2_norm < DEGENERACY_EPS {
        return Err(Error::DegenerateGeometry(
            "collinear atoms in dihedral".into(),
        ));
    }
    let n1 = n1 / n1_norm;
    let n2 = n2 / n2_norm;
    let b2_hat = b2 / b2_norm;
    let y = b2_hat.dot(&n1.cross(&n2));
    let x = n1.dot(&n2);
    Ok(wrap_angle(y.atan2(x)))
}

/// Angle at `b` between the arms `b->a` and `b->c`, in [0, pi].
pub fn bond_angle(a: &Vec3, b: &Vec3, c: &Vec3) -> Result<f64> {
    let u = a - b;
    let v = c - b;
    let (nu, nv) = (u.norm(), v.norm());
    if nu < DEGENERACY_EPS || nv < DEGENERACY_EPS {
        return Err(Error::DegenerateGeometry(
            "bond angle arm has zero length".into(),
        ));
    }
    let cos = (u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(cos.acos())
}

/// A proper rotation matrix (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates orthonormality and determinant to [`ROTATION_TOL`].
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry".into()));
        }
        let gram = m.transpose() * m - Matrix3::identity();
        let worst = gram.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if worst > ROTATION_TOL {
            return Err(Error::InvalidRotation(format!(
                "m^T m deviates from identity by {worst:e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidRotation(format!("determinant is {det}")));
        }
        Ok(Rotation(m))
    }

    /// Wraps a matrix the caller already knows to be a rotation.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Projects an approximately orthonormal matrix onto SO(3) via SVD.
    pub fn from_matrix_nearest(m: Matrix3<f64>) -> Result<Self> {
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::InvalidRotation("SVD failed".into())),
        };
        let mut d = Matrix3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Rotation::new(u * d * v_t)
    }

    /// Rotation by `angle` radians about the x, y or z axis (0, 1, 2).
    pub fn about_axis(axis: usize, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let m = match axis {
            0 => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            1 => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            2 => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            _ => panic!("axis index {axis} out of range"),
        };
        Rotation(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Frobenius distance between two rotation matrices.
    pub fn frobenius_distance(&self, other: &Rotation) -> f64 {
        (self.0 - other.0).norm()
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// Rigid transform `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Frame {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Frame {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Frame::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation.apply(p) + self.translation
    }

    /// `self * other`: applies `other` first.
    pub fn compose(&self, other: &Frame) -> Frame {
        Frame {
            rotation: self.rotation * other.rotation,
            translation: self.apply(&other.translation),
        }
    }

    pub fn inverse(&self) -> Frame {
        let rt = self.rotation.transpose();
        Frame {
            rotation: rt,
            translation: -rt.apply(&self.translation),
        }
    }
}
