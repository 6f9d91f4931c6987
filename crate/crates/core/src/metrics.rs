//! Trajectory diagnostics: steric collisions, energies, RMSD and timing.

use std::time::Instant;

use crate::backbone::{nerf_reconstruct, AngularChain, IdealGeometry};
use crate::dynamics::{rebuild_model, simulate, ForceModel, PotentialParams, SimConfig, Trajectory};
use crate::error::{Error, Result};
use crate::flow::ca_track;
use crate::geometry::Vec3;

pub use crate::align::kabsch_rmsd;

/// CA-CA distance under which two residues clash, Angstrom.
pub const DEFAULT_COLLISION_THRESHOLD: f64 = 4.0;
/// Sequence separations up to this value are never counted.
pub const DEFAULT_COLLISION_WINDOW: usize = 1;

/// Number of residue pairs with `|i - j| > window` and CA distance below `threshold`.
pub fn collision_count(ca: &[Vec3], threshold: f64, window: usize) -> usize {
    let t2 = threshold * threshold;
    let mut count = 0;
    for i in 0..ca.len() {
        for j in (i + window + 1)..ca.len() {
            if (ca[i] - ca[j]).norm_squared() < t2 {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionProfile {
    pub threshold: f64,
    pub window: usize,
    /// Count per stored state, in trajectory order (flow time 1 first).
    pub counts: Vec<usize>,
}

impl CollisionProfile {
    /// Largest increase between consecutive states; zero for a non-increasing profile.
    pub fn max_increase(&self) -> usize {
        self.counts
            .windows(2)
            .map(|w| w[1].saturating_sub(w[0]))
            .max()
            .unwrap_or(0)
    }
}

pub fn trajectory_collisions(
    traj: &Trajectory,
    threshold: f64,
    window: usize,
    geom: &IdealGeometry,
) -> Result<CollisionProfile> {
    let counts = ca_track(traj, geom)?
        .iter()
        .map(|ca| collision_count(ca, threshold, window))
        .collect();
    Ok(CollisionProfile {
        threshold,
        window,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPoint {
    pub flow_time: f64,
    pub potential: f64,
    pub kinetic: f64,
}

impl EnergyPoint {
    pub fn total(&self) -> f64 {
        self.potential + self.kinetic
    }
}

/// Energies of every stored state under `params`, with the target replayed from the
/// trajectory seed.
pub fn energy_profile(
    traj: &Trajectory,
    params: &PotentialParams,
    geom: &IdealGeometry,
) -> Result<Vec<EnergyPoint>> {
    let model = rebuild_model(traj, params, geom)?;
    energy_profile_with(traj, model.as_ref())
}

/// Potential, kinetic and total energy of every stored state under `model`.
pub fn energy_profile_with<M: ForceModel + ?Sized>(
    traj: &Trajectory,
    model: &M,
) -> Result<Vec<EnergyPoint>> {
    if model.dim() != traj.state_dim() {
        return Err(Error::ShapeMismatch {
            expected: traj.state_dim(),
            found: model.dim(),
        });
    }
    traj.states
        .iter()
        .map(|s| {
            Ok(EnergyPoint {
                flow_time: s.flow_time,
                potential: model.potential(&s.positions)?,
                kinetic: s.kinetic_energy(),
            })
        })
        .collect()
}

/// Right-handed alpha helix (phi -57, psi -47 degrees) with ideal bond angles.
pub fn synthetic_helix(n_residues: usize, geom: &IdealGeometry) -> Result<AngularChain> {
    let theta1 = geom.ideal_theta1();
    AngularChain::uniform(
        n_residues,
        [
            (-57.0f64).to_radians(),
            (-47.0f64).to_radians(),
            std::f64::consts::PI,
            theta1,
            116.2f64.to_radians(),
            121.7f64.to_radians(),
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRecord {
    pub n_residues: usize,
    pub median_seconds: f64,
    pub repeats: usize,
}

/// Wall-clock median of `repeats` full simulations per chain length.
pub fn runtime_benchmark(
    lengths: &[usize],
    params: &PotentialParams,
    config: &SimConfig,
    geom: &IdealGeometry,
    repeats: usize,
) -> Result<Vec<BenchRecord>> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be positive".into()));
    }
    let mut out = Vec::with_capacity(lengths.len());
    for &n in lengths {
        let chain = synthetic_helix(n, geom)?;
        // sanity-check the synthetic chain once before timing it
        nerf_reconstruct(&chain, geom)?;
        let mut times = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let start = Instant::now();
            simulate(&chain, params, config, geom, "bench")?;
            times.push(start.elapsed().as_secs_f64());
        }
        times.sort_by(f64::total_cmp);
        log::debug!("length {n}: {times:?}");
        out.push(BenchRecord {
            n_residues: n,
            median_seconds: times[repeats / 2],
            repeats,
        });
    }
    Ok(out)
}

/// Least-squares slope of `log(time)` against `log(length)`.
pub fn scaling_exponent(records: &[BenchRecord]) -> Result<f64> {
    if records.len() < 2 {
        return Err(Error::InvalidParameter("need at least two lengths".into()));
    }
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| ((r.n_residues as f64).ln(), r.median_seconds.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("lengths must differ".into()));
    }
    Ok(sxy / sxx)
}
