use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::align::kabsch_superpose;
use crate::backbone::{nerf_reconstruct, AngularChain, BackboneCoords, IdealGeometry};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec3};

use super::potential::{AngularModel, CartesianModel, ForceModel};
use super::{flow_time_at, Integrator, PhaseState, PotentialParams, SimConfig, Trajectory, Variant};

/// Generator used by every simulation; seeded only from the config seed.
pub fn trajectory_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, sigma: f64) -> Vec<f64> {
    (0..len)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn zero_undefined(v: &mut [f64]) {
    let n = v.len() / 6;
    for (idx, a) in v.iter_mut().enumerate() {
        if !AngularChain::slot_defined(n, idx / 6, idx % 6) {
            *a = 0.0;
        }
    }
}

/// Draws target angles `~ N(mu_beta, sigma_beta^2)`, wrapped onto (-pi, pi].
pub fn angular_target<R: Rng + ?Sized>(
    n_residues: usize,
    config: &SimConfig,
    rng: &mut R,
) -> Result<AngularChain> {
    let noise = gaussian_vec(rng, 6 * n_residues, config.sigma_beta);
    let angles = noise
        .iter()
        .enumerate()
        .map(|(idx, e)| wrap_angle(config.mu_beta[idx % 6] + e))
        .collect();
    AngularChain::from_flat(angles)
}

/// Draws a strand target and expresses its CA atoms in the frame of `start`.
///
/// With `align_cartesian_target` the target is Kabsch-superposed on `start`;
/// otherwise it is only translated onto the centroid of `start`.
pub fn cartesian_target<R: Rng + ?Sized>(
    start: &[Vec3],
    config: &SimConfig,
    geom: &IdealGeometry,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let z = angular_target(start.len(), config, rng)?;
    let ca = nerf_reconstruct(&z, geom)?.ca_positions();
    let placed: Vec<Vec3> = if config.align_cartesian_target {
        let f = kabsch_superpose(&ca, start)?;
        ca.iter().map(|p| f.apply(p)).collect()
    } else {
        let n = start.len() as f64;
        let shift = start.iter().fold(Vec3::zeros(), |a, p| a + p) / n
            - ca.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
        ca.iter().map(|p| p + shift).collect()
    };
    Ok(placed.iter().flat_map(|p| [p.x, p.y, p.z]).collect())
}

/// Prior sample at flow time 0: strand angles with Gaussian spread and Gaussian velocities.
pub fn sample_prior<R: Rng + ?Sized>(
    n_residues: usize,
    config: &SimConfig,
    rng: &mut R,
) -> Result<PhaseState> {
    if n_residues < 2 {
        return Err(Error::InvalidChain(format!(
            "need at least 2 residues, got {n_residues}"
        )));
    }
    let z = angular_target(n_residues, config, rng)?;
    let mut v = gaussian_vec(rng, 6 * n_residues, config.sigma_v);
    zero_undefined(&mut v);
    PhaseState::new(z.into_inner(), v, 0.0)
}

fn step_index(flow_time: f64, n_steps: usize) -> usize {
    ((1.0 - flow_time) * n_steps as f64).round() as usize
}

fn advance<M: ForceModel + ?Sized>(
    state: &PhaseState,
    model: &M,
    dt: f64,
    integrator: Integrator,
    next_time: f64,
    step: usize,
) -> Result<PhaseState> {
    let gamma = model.gamma();
    let mut z: Vec<f64> = state
        .positions
        .iter()
        .zip(&state.velocities)
        .map(|(x, v)| x + v * dt)
        .collect();
    model.project(&mut z);
    let force = match integrator {
        Integrator::ExplicitEuler => model.gradient(&state.positions),
        Integrator::SemiImplicitEuler => model.gradient(&z),
    }
    .map_err(|e| match e {
        Error::DegenerateGeometry(_) | Error::InvalidChain(_) => Error::NonFiniteState { step },
        other => other,
    })?;
    let mut v: Vec<f64> = state
        .velocities
        .iter()
        .zip(&force)
        .map(|(v, f)| v - f * dt - gamma * v * dt)
        .collect();
    model.project_velocity(&mut v);
    let next = PhaseState {
        positions: z,
        velocities: v,
        flow_time: next_time,
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteState { step });
    }
    Ok(next)
}

/// One integrator step; flow time decreases by `dt`.
pub fn step<M: ForceModel + ?Sized>(state: &PhaseState, model: &M, config: &SimConfig) -> Result<PhaseState> {
    let s = step_index(state.flow_time, config.n_steps);
    if s >= config.n_steps {
        return Err(Error::OutOfRange {
            value: state.flow_time,
            min: config.dt(),
            max: 1.0,
        });
    }
    advance(
        state,
        model,
        config.dt(),
        config.integrator,
        flow_time_at(s + 1, config.n_steps),
        s + 1,
    )
}

fn integrate<M: ForceModel>(start: PhaseState, model: &M, config: &SimConfig) -> Result<Vec<PhaseState>> {
    let mut states = Vec::with_capacity(config.n_steps + 1);
    states.push(start);
    for s in 1..=config.n_steps {
        let next = advance(
            &states[s - 1],
            model,
            config.dt(),
            config.integrator,
            flow_time_at(s, config.n_steps),
            s,
        )?;
        states.push(next);
    }
    Ok(states)
}

/// Forward unfolding in angle space.
///
/// The generator is seeded from `config.seed`; the target angles are drawn first,
/// then the initial velocities, so the target can be regenerated with
/// [`angular_target`] from the same seed.
pub fn simulate(
    data_chain: &AngularChain,
    params: &PotentialParams,
    config: &SimConfig,
    geom: &IdealGeometry,
    source_id: &str,
) -> Result<Trajectory> {
    config.validate()?;
    let n = data_chain.len();
    let mut rng = trajectory_rng(config.seed);
    let target = angular_target(n, config, &mut rng)?;
    let mut v = gaussian_vec(&mut rng, 6 * n, config.sigma_v);
    zero_undefined(&mut v);
    let model = AngularModel::new(target, params.clone(), geom.clone())?;
    let start = PhaseState::new(data_chain.as_slice().to_vec(), v, 1.0)?;
    let states = integrate(start, &model, config)?;
    Ok(Trajectory {
        variant: Variant::Angular,
        n_residues: n,
        config: SimConfig {
            variant: Variant::Angular,
            ..config.clone()
        },
        params: params.clone(),
        source_id: source_id.to_string(),
        states,
    })
}

/// Forward unfolding of CA coordinates with analytic Cartesian forces.
///
/// Coordinates are used as given; callers wanting translation invariance center first.
pub fn simulate_cartesian(
    coords: &BackboneCoords,
    params: &PotentialParams,
    config: &SimConfig,
    geom: &IdealGeometry,
    source_id: &str,
) -> Result<Trajectory> {
    config.validate()?;
    let n = coords.len();
    if n < 3 {
        return Err(Error::InvalidChain(format!(
            "Cartesian unfolding needs at least 3 residues, got {n}"
        )));
    }
    let start = coords.ca_positions();
    let mut rng = trajectory_rng(config.seed);
    let target = cartesian_target(&start, config, geom, &mut rng)?;
    let v = gaussian_vec(&mut rng, 3 * n, config.sigma_v);
    let model = CartesianModel::new(target, params.clone())?;
    let first = PhaseState::new(coords.ca_flat(), v, 1.0)?;
    let states = integrate(first, &model, config)?;
    Ok(Trajectory {
        variant: Variant::Cartesian,
        n_residues: n,
        config: SimConfig {
            variant: Variant::Cartesian,
            ..config.clone()
        },
        params: params.clone(),
        source_id: source_id.to_string(),
        states,
    })
}

/// Rebuilds the force model of a trajectory by replaying the target draw from its
/// seed, with potential parameters `params`.
pub fn rebuild_model(
    traj: &Trajectory,
    params: &PotentialParams,
    geom: &IdealGeometry,
) -> Result<Box<dyn ForceModel>> {
    let first = traj
        .states
        .first()
        .ok_or_else(|| Error::InvalidParameter("trajectory has no states".into()))?;
    let mut rng = trajectory_rng(traj.config.seed);
    Ok(match traj.variant {
        Variant::Angular => {
            let target = angular_target(traj.n_residues, &traj.config, &mut rng)?;
            Box::new(AngularModel::new(target, params.clone(), geom.clone())?)
        }
        Variant::Cartesian => {
            let start: Vec<Vec3> = first
                .positions
                .chunks_exact(3)
                .map(|c| Vec3::new(c[0], c[1], c[2]))
                .collect();
            let target = cartesian_target(&start, &traj.config, geom, &mut rng)?;
            Box::new(CartesianModel::new(target, params.clone())?)
        }
    })
}

/// Samples the forward transition at flow time `t`: the mean is the linear
/// interpolation of the two stored states bracketing `t`, plus isotropic noise.
pub fn sample_transition<R: Rng + ?Sized>(
    traj: &Trajectory,
    t: f64,
    sigma_z: f64,
    sigma_v: f64,
    rng: &mut R,
) -> Result<PhaseState> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            value: t,
            min: 0.0,
            max: 1.0,
        });
    }
    let n_steps = traj.n_steps();
    let s_real = (1.0 - t) * n_steps as f64;
    let lo = (s_real.floor() as usize).min(n_steps);
    let hi = (lo + 1).min(n_steps);
    let frac = if hi == lo { 0.0 } else { s_real - lo as f64 };
    let (a, b) = (&traj.states[lo], &traj.states[hi]);
    let angular = traj.variant == Variant::Angular;
    let n = traj.n_residues;
    let defined = |idx: usize| !angular || AngularChain::slot_defined(n, idx / 6, idx % 6);

    let lerp = |x: &[f64], y: &[f64], wrap: bool| -> Vec<f64> {
        x.iter()
            .zip(y)
            .map(|(p, q)| {
                if frac == 0.0 {
                    *p
                } else if wrap {
                    wrap_angle(p + frac * wrap_angle(q - p))
                } else {
                    p + frac * (q - p)
                }
            })
            .collect()
    };
    let mut pos = lerp(&a.positions, &b.positions, angular);
    let mut vel = lerp(&a.velocities, &b.velocities, false);
    for (idx, (p, v)) in pos.iter_mut().zip(vel.iter_mut()).enumerate() {
        let dz: f64 = rng.sample(StandardNormal);
        let dv: f64 = rng.sample(StandardNormal);
        if !defined(idx) {
            continue;
        }
        if sigma_z != 0.0 {
            *p += sigma_z * dz;
            if angular {
                *p = wrap_angle(*p);
            }
        }
        if sigma_v != 0.0 {
            *v += sigma_v * dv;
        }
    }
    PhaseState::new(pos, vel, t)
}
