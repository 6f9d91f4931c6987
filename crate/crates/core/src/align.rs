//! Rigid superposition (Kabsch) and RMSD.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{Frame, Rotation, Vec3};

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64
}

/// Proper rigid transform that best maps `mobile` onto `reference` in the
/// least-squares sense. Reflections are excluded by flipping the weakest singular
/// direction when needed.
pub fn kabsch_superpose(mobile: &[Vec3], reference: &[Vec3]) -> Result<Frame> {
    if mobile.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            expected: reference.len(),
            found: mobile.len(),
        });
    }
    if mobile.is_empty() {
        return Err(Error::InvalidParameter("cannot superpose empty point sets".into()));
    }
    let cm = centroid(mobile);
    let cr = centroid(reference);
    let mut h = Matrix3::zeros();
    for (m, r) in mobile.iter().zip(reference) {
        h += (m - cm) * (r - cr).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateGeometry("SVD did not converge".into())),
    };
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = Rotation::from_matrix_unchecked(v * d * u.transpose());
    let t = cr - r.apply(&cm);
    Ok(Frame::new(r, t))
}

/// Plain RMSD without superposition.
pub fn rmsd(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum();
    Ok((s / a.len() as f64).sqrt())
}

/// Minimal RMSD over proper rigid motions of `a` onto `b`.
pub fn kabsch_rmsd(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 points, got {}",
            a.len()
        )));
    }
    let f = kabsch_superpose(a, b)?;
    let moved: Vec<Vec3> = a.iter().map(|p| f.apply(p)).collect();
    rmsd(&moved, b)
}
