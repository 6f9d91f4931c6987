//! Damped second-order unfolding dynamics.
//!
//! A folded chain at flow time 1 is driven towards an extended beta-strand target by
//!
//! ```text
//! dz/dt = v
//! dv/dt = -grad U(z) - gamma v,     U = k1 U_target + k2 U_repulsion(nerf(z))
//! ```
//!
//! integrated with a fixed step `dt = 1 / n_steps`. Simulation step `s` is stored at
//! flow time `1 - s / n_steps`, so the data sits at `t = 1` and the prior at `t = 0`.

mod potential;
mod simulate;

pub use potential::{
    grad_potential, grad_repulsion, total_potential, u_repulsion, u_target, AngularModel,
    CartesianModel, ForceModel,
};
pub use simulate::{
    angular_target, cartesian_target, rebuild_model, sample_prior, sample_transition, simulate,
    simulate_cartesian, step, trajectory_rng,
};

use std::f64::consts::PI;

use crate::backbone::AngularChain;
use crate::error::{Error, Result};

/// Which coordinates a trajectory evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Angular,
    Cartesian,
}

impl Variant {
    pub fn tag(self) -> u8 {
        match self {
            Variant::Angular => 0,
            Variant::Cartesian => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Variant::Angular),
            1 => Some(Variant::Cartesian),
            _ => None,
        }
    }

    /// Number of position values per residue.
    pub fn width(self) -> usize {
        match self {
            Variant::Angular => 6,
            Variant::Cartesian => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// `z += v dt` then `v -= (grad U(z_old) + gamma v) dt`.
    ExplicitEuler,
    /// Like explicit Euler, with the force evaluated at the updated position.
    SemiImplicitEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepulsionAtoms {
    CaOnly,
    Backbone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialParams {
    pub k1: f64,
    pub k2: f64,
    pub gamma: f64,
    /// Softening length added to every pair distance in the repulsion, Angstrom.
    pub epsilon: f64,
    /// Use the wrapped angular difference in the target term (raw difference when false).
    pub wrap_target: bool,
    pub repulsion_atoms: RepulsionAtoms,
}

impl Default for PotentialParams {
    fn default() -> Self {
        PotentialParams {
            k1: 1.0,
            k2: 1.0,
            gamma: 1.0,
            epsilon: 1e-6,
            wrap_target: true,
            repulsion_atoms: RepulsionAtoms::CaOnly,
        }
    }
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.k1, self.k2, self.gamma, self.epsilon]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.k1 < 0.0 || self.k2 < 0.0 || self.epsilon < 0.0 {
            return Err(Error::InvalidParameter(
                "k1, k2 and epsilon must be finite and non-negative".into(),
            ));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter("gamma must be positive".into()));
        }
        Ok(())
    }
}

/// Extended beta-strand angles: phi -139, psi 135, omega 180 degrees and
/// bond angles 111.0, 116.2, 121.7 degrees.
pub fn default_beta_angles() -> [f64; 6] {
    [
        (-139.0f64).to_radians(),
        135.0f64.to_radians(),
        PI,
        111.0f64.to_radians(),
        116.2f64.to_radians(),
        121.7f64.to_radians(),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_steps: usize,
    pub sigma_beta: f64,
    pub sigma_v: f64,
    pub sigma_z: f64,
    pub seed: u64,
    pub variant: Variant,
    pub integrator: Integrator,
    /// Mean of the prior / target angles, per residue.
    pub mu_beta: [f64; 6],
    /// Kabsch-align the Cartesian target onto the starting pose.
    pub align_cartesian_target: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_steps: 100,
            sigma_beta: 0.01,
            sigma_v: 0.1,
            sigma_z: 0.01,
            seed: 0,
            variant: Variant::Angular,
            integrator: Integrator::ExplicitEuler,
            mu_beta: default_beta_angles(),
            align_cartesian_target: true,
        }
    }
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::InvalidParameter("n_steps must be at least 2".into()));
        }
        let sigmas = [self.sigma_beta, self.sigma_v, self.sigma_z];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidParameter(
                "standard deviations must be finite and non-negative".into(),
            ));
        }
        if self.mu_beta.iter().any(|a| !(*a > -PI && *a <= PI)) {
            return Err(Error::InvalidParameter("mu_beta angles must lie in (-pi, pi]".into()));
        }
        Ok(())
    }
}

/// Positions and velocities at one flow time.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    /// Six angles per residue (angular) or CA coordinates (Cartesian), flat.
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub flow_time: f64,
}

impl PhaseState {
    pub fn new(positions: Vec<f64>, velocities: Vec<f64>, flow_time: f64) -> Result<Self> {
        if positions.len() != velocities.len() {
            return Err(Error::ShapeMismatch {
                expected: positions.len(),
                found: velocities.len(),
            });
        }
        if !(0.0..=1.0).contains(&flow_time) {
            return Err(Error::OutOfRange {
                value: flow_time,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(PhaseState {
            positions,
            velocities,
            flow_time,
        })
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.velocities.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.positions
            .iter()
            .chain(&self.velocities)
            .all(|v| v.is_finite())
    }

    /// Interprets angular positions as a chain.
    pub fn angular_chain(&self) -> Result<AngularChain> {
        AngularChain::from_flat(self.positions.clone())
    }
}

/// One forward simulation, ordered from the data end (`t = 1`) to the prior end (`t = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub variant: Variant,
    pub n_residues: usize,
    pub config: SimConfig,
    pub params: PotentialParams,
    pub source_id: String,
    pub states: Vec<PhaseState>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn dt(&self) -> f64 {
        self.config.dt()
    }

    /// Flow time of stored state `s`.
    pub fn flow_time_of(&self, s: usize) -> f64 {
        flow_time_at(s, self.n_steps())
    }

    pub fn state_dim(&self) -> usize {
        self.n_residues * self.variant.width()
    }

    /// Checks shapes, ordering of flow times and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::InvalidParameter("trajectory has no states".into()));
        }
        let dim = self.state_dim();
        for (s, st) in self.states.iter().enumerate() {
            if st.positions.len() != dim || st.velocities.len() != dim {
                return Err(Error::ShapeMismatch {
                    expected: dim,
                    found: st.positions.len().min(st.velocities.len()),
                });
            }
            if !st.is_finite() {
                return Err(Error::NonFiniteState { step: s });
            }
            if st.flow_time != self.flow_time_of(s) {
                return Err(Error::InvalidParameter(format!(
                    "state {s} has flow time {} instead of {}",
                    st.flow_time,
                    self.flow_time_of(s)
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn flow_time_at(step: usize, n_steps: usize) -> f64 {
    if n_steps == 0 {
        return 1.0;
    }
    if step == n_steps {
        return 0.0;
    }
    1.0 - step as f64 / n_steps as f64
}
