//! SO(3) exponential and logarithm maps, geodesics and the conditional rotation velocity.
//!
//! Tangent vectors are axis-angle 3-vectors; the metric on them is the plain dot product.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{Rotation, Vec3};

/// Below this angle the Rodrigues coefficients switch to their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Within this distance of pi the logarithm recovers the axis from the symmetric part.
const NEAR_PI: f64 = 1e-4;

/// Smallest flow time accepted by [`so3_velocity`].
pub const MIN_FLOW_TIME: f64 = 1e-9;

/// Axis-angle element of so(3), in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector(pub Vec3);

impl TangentVector {
    pub fn zero() -> Self {
        TangentVector(Vec3::zeros())
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        TangentVector(self.0 * s)
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }
}

pub fn hat(w: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Rodrigues formula `I + A [w] + B [w]^2`.
pub fn exp_map(omega: &TangentVector) -> Rotation {
    let w = omega.0;
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(&w);
    Rotation::from_matrix_unchecked(Matrix3::identity() + k * a + k * k * b)
}

/// Principal logarithm, `|omega|` in [0, pi].
///
/// At exactly pi the axis sign is ambiguous; the component along the largest diagonal
/// entry of `(R + I) / 2` is made non-negative.
pub fn log_map(r: &Rotation) -> TangentVector {
    let m = r.matrix();
    let w = vee(&(m - m.transpose())) * 0.5;
    let sin = w.norm();
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = sin.atan2(cos);

    if theta < SMALL_ANGLE {
        return TangentVector(w * (1.0 + theta * theta / 6.0));
    }
    if std::f64::consts::PI - theta > NEAR_PI {
        return TangentVector(w * (theta / sin));
    }

    // (R + R^T)/2 = cos I + (1 - cos) a a^T
    let sym = (m + m.transpose()) * 0.5;
    let aat = (sym - Matrix3::identity() * cos) / (1.0 - cos);
    let k = (0..3)
        .max_by(|&i, &j| aat[(i, i)].total_cmp(&aat[(j, j)]))
        .unwrap_or(0);
    let mut axis = aat.column(k).into_owned() / aat[(k, k)].max(0.0).sqrt();
    axis.normalize_mut();
    let sign_ref = if sin > 1e-15 { axis.dot(&w) } else { axis[k] };
    if sign_ref < 0.0 {
        axis = -axis;
    }
    TangentVector(axis * theta)
}

/// Geodesic distance (rotation angle of `r0^T r1`).
pub fn geodesic_distance(r0: &Rotation, r1: &Rotation) -> f64 {
    log_map(&(&r0.transpose() * r1)).norm()
}

/// `r_t = r0 exp(t log(r0^T r1))`.
pub fn geodesic_interp(r0: &Rotation, r1: &Rotation, t: f64) -> Result<Rotation> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            value: t,
            min: 0.0,
            max: 1.0,
        });
    }
    if t == 0.0 {
        return Ok(*r0);
    }
    if t == 1.0 {
        return Ok(*r1);
    }
    let rel = log_map(&(&r0.transpose() * r1));
    Ok(r0 * &exp_map(&rel.scale(t)))
}

/// Conditional velocity `log(r_t^T r0) / t`, expressed in the body frame of `r_t`.
pub fn so3_velocity(rt: &Rotation, r0: &Rotation, t: f64) -> Result<TangentVector> {
    if t < MIN_FLOW_TIME {
        return Err(Error::NearZeroTime(t));
    }
    Ok(log_map(&(&rt.transpose() * r0)).scale(1.0 / t))
}

/// Haar-uniform rotation from a normalized Gaussian quaternion.
pub fn sample_uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let norm2: f64 = q.iter().map(|v| v * v).sum();
        if norm2 < 1e-12 {
            continue;
        }
        let uq = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
        return Rotation::from_matrix_unchecked(uq.to_rotation_matrix().into_inner());
    }
}
