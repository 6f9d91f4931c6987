//! Conditional flow-matching regression targets and reference loss kernels.
//!
//! Everything here is a forward evaluation; sampling `t`, `s` and mapping predicted
//! frames to atoms is left to the caller.

use crate::backbone::{chain_frames, nerf_reconstruct, BackboneCoords, IdealGeometry};
use crate::dynamics::{Trajectory, Variant};
use crate::error::{Error, Result};
use crate::geometry::{Rotation, Vec3};
use crate::so3::{geodesic_interp, so3_velocity, TangentVector};

/// Backbone atoms `{N, CA, C, O}` per residue, as fed to the structure losses.
pub type AtomSet = BackboneCoords;

/// Flow time above which the auxiliary losses are switched on.
pub const AUXILIARY_LOSS_CUTOFF: f64 = 0.75;

pub const DEFAULT_LAMBDA: f64 = 0.25;

/// Distogram gating distance in Angstrom (0.6 nm).
pub const DEFAULT_DISTOGRAM_THRESHOLD: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityMethod {
    FiniteDifference,
    CubicSpline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityTarget {
    pub translation_velocity: Vec<Vec3>,
    /// Body-frame rotation targets; absent for CA-only (Cartesian) trajectories.
    pub rotation_velocity: Option<Vec<TangentVector>>,
    pub flow_time: f64,
}

/// CA positions of every stored state, reconstructing angular states.
pub fn ca_track(traj: &Trajectory, geom: &IdealGeometry) -> Result<Vec<Vec<Vec3>>> {
    traj.states
        .iter()
        .map(|s| match traj.variant {
            Variant::Cartesian => Ok(s
                .positions
                .chunks_exact(3)
                .map(|c| Vec3::new(c[0], c[1], c[2]))
                .collect()),
            Variant::Angular => Ok(nerf_reconstruct(&s.angular_chain()?, geom)?.ca_positions()),
        })
        .collect()
}

/// Second derivatives of a natural cubic spline through `(xs, ys)`.
fn natural_spline_moments(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior unknowns M_1..M_{n-2}.
    let k = n - 2;
    let mut c_prime = vec![0.0; k];
    let mut d_prime = vec![0.0; k];
    for i in 0..k {
        let j = i + 1;
        let h0 = xs[j] - xs[j - 1];
        let h1 = xs[j + 1] - xs[j];
        let diag = 2.0 * (h0 + h1);
        let rhs = 6.0 * ((ys[j + 1] - ys[j]) / h1 - (ys[j] - ys[j - 1]) / h0);
        if i == 0 {
            c_prime[i] = h1 / diag;
            d_prime[i] = rhs / diag;
        } else {
            let denom = diag - h0 * c_prime[i - 1];
            c_prime[i] = h1 / denom;
            d_prime[i] = (rhs - h0 * d_prime[i - 1]) / denom;
        }
    }
    for i in (0..k).rev() {
        let next = if i + 1 < k { m[i + 2] } else { 0.0 };
        m[i + 1] = d_prime[i] - c_prime[i] * next;
    }
    m
}

fn spline_derivative(xs: &[f64], ys: &[f64], moments: &[f64], j: usize, x: f64) -> f64 {
    let h = xs[j + 1] - xs[j];
    let a = xs[j + 1] - x;
    let b = x - xs[j];
    -moments[j] * a * a / (2.0 * h) + moments[j + 1] * b * b / (2.0 * h) + (ys[j + 1] - ys[j]) / h
        - (moments[j + 1] - moments[j]) * h / 6.0
}

/// Time derivative of the CA positions with respect to flow time at `t`.
pub fn r3_velocity_at(
    traj: &Trajectory,
    t: f64,
    method: VelocityMethod,
    geom: &IdealGeometry,
) -> Result<Vec<Vec3>> {
    if !(0.0..=1.0).contains(&t) || !t.is_finite() {
        return Err(Error::OutOfRange {
            value: t,
            min: 0.0,
            max: 1.0,
        });
    }
    let n_steps = traj.n_steps();
    if n_steps == 0 {
        return Err(Error::InvalidParameter(
            "velocity needs at least two stored states".into(),
        ));
    }
    // Ascending flow-time grid: index k holds state n_steps - k.
    let track = ca_track(traj, geom)?;
    let grid: Vec<f64> = (0..=n_steps).map(|k| traj.flow_time_of(n_steps - k)).collect();
    let series = |k: usize| &track[n_steps - k];
    let j = grid
        .windows(2)
        .position(|w| t >= w[0] && t < w[1])
        .unwrap_or(n_steps - 1);

    let n_res = traj.n_residues;
    match method {
        VelocityMethod::FiniteDifference => {
            let dt = traj.dt();
            Ok((0..n_res)
                .map(|r| (series(j + 1)[r] - series(j)[r]) / dt)
                .collect())
        }
        VelocityMethod::CubicSpline => {
            let mut out = vec![Vec3::zeros(); n_res];
            let mut ys = vec![0.0; n_steps + 1];
            for (r, o) in out.iter_mut().enumerate() {
                for axis in 0..3 {
                    for (k, y) in ys.iter_mut().enumerate() {
                        *y = series(k)[r][axis];
                    }
                    let m = natural_spline_moments(&grid, &ys);
                    o[axis] = spline_derivative(&grid, &ys, &m, j, t);
                }
            }
            Ok(out)
        }
    }
}

/// Geodesic point `r_t` between prior `r0` and data `r1` and its regression target.
pub fn so3_targets_for_pair(r0: &Rotation, r1: &Rotation, t: f64) -> Result<(Rotation, TangentVector)> {
    let rt = geodesic_interp(r0, r1, t)?;
    let target = so3_velocity(&rt, r0, t)?;
    Ok((rt, target))
}

/// Translation and rotation targets at flow time `t`, with the prior end as `r0` and
/// the data end as `r1` for every residue frame.
pub fn velocity_targets(
    traj: &Trajectory,
    t: f64,
    method: VelocityMethod,
    geom: &IdealGeometry,
) -> Result<VelocityTarget> {
    let translation_velocity = r3_velocity_at(traj, t, method, geom)?;
    let rotation_velocity = match traj.variant {
        Variant::Cartesian => None,
        Variant::Angular => {
            let data = nerf_reconstruct(&traj.states[0].angular_chain()?, geom)?;
            let prior = nerf_reconstruct(&traj.states[traj.n_steps()].angular_chain()?, geom)?;
            let f1 = chain_frames(&data)?;
            let f0 = chain_frames(&prior)?;
            Some(
                f0.iter()
                    .zip(&f1)
                    .map(|(a, b)| so3_targets_for_pair(&a.rotation, &b.rotation, t).map(|(_, v)| v))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    };
    Ok(VelocityTarget {
        translation_velocity,
        rotation_velocity,
        flow_time: t,
    })
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::ShapeMismatch { expected, found });
    }
    Ok(())
}

/// Mean squared Euclidean error over residues.
pub fn cfm_loss_r3(predicted: &[Vec3], target: &[Vec3]) -> Result<f64> {
    check_len(target.len(), predicted.len())?;
    if target.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = predicted
        .iter()
        .zip(target)
        .map(|(p, q)| (p - q).norm_squared())
        .sum();
    Ok(s / target.len() as f64)
}

/// Mean squared axis-angle error over residues.
pub fn cfm_loss_so3(predicted: &[TangentVector], target: &[TangentVector]) -> Result<f64> {
    check_len(target.len(), predicted.len())?;
    if target.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = predicted
        .iter()
        .zip(target)
        .map(|(p, q)| (p.0 - q.0).norm_squared())
        .sum();
    Ok(s / target.len() as f64)
}

/// `1/(4N) sum_n sum_atoms |a - a_hat|^2`.
pub fn lookahead_loss(pred_atoms: &AtomSet, true_atoms: &AtomSet) -> Result<f64> {
    check_len(true_atoms.len(), pred_atoms.len())?;
    if true_atoms.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = pred_atoms
        .all_atoms()
        .iter()
        .zip(true_atoms.all_atoms())
        .map(|(p, q)| (p - q).norm_squared())
        .sum();
    Ok(s / (4.0 * true_atoms.len() as f64))
}

/// Backbone MSE on terminal atoms; the same kernel as [`lookahead_loss`].
pub fn bb_loss(pred_atoms: &AtomSet, true_atoms: &AtomSet) -> Result<f64> {
    lookahead_loss(pred_atoms, true_atoms)
}

/// Squared error of all pairwise atom distances whose true distance is under
/// `threshold`, normalized by `Z = (gated ordered pairs) - N`.
pub fn distogram_loss(pred_atoms: &AtomSet, true_atoms: &AtomSet, threshold: f64) -> Result<f64> {
    check_len(true_atoms.len(), pred_atoms.len())?;
    let t = true_atoms.all_atoms();
    let p = pred_atoms.all_atoms();
    let mut numerator = 0.0;
    let mut gated: i64 = 0;
    for i in 0..t.len() {
        for j in 0..t.len() {
            let d_true = (t[i] - t[j]).norm();
            if d_true < threshold {
                let d_pred = (p[i] - p[j]).norm();
                numerator += (d_true - d_pred).powi(2);
                gated += 1;
            }
        }
    }
    let z = gated - true_atoms.len() as i64;
    if z <= 0 {
        return Err(Error::DegenerateNormalizer(z));
    }
    Ok(numerator / z as f64)
}

/// The individual loss terms combined by [`total_loss`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossTerms {
    pub so3: f64,
    pub r3: f64,
    pub lookahead: f64,
    pub bb: f64,
    pub distogram: f64,
}

/// `so3 + r3 + lookahead + lambda 1(t > 0.75) (bb + distogram)`.
pub fn total_loss(terms: &LossTerms, t: f64, lambda: f64) -> f64 {
    let base = terms.so3 + terms.r3 + terms.lookahead;
    if t > AUXILIARY_LOSS_CUTOFF {
        base + lambda * (terms.bb + terms.distogram)
    } else {
        base
    }
}
