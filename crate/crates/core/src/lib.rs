//! Physics-driven backbone unfolding trajectories and flow-matching targets.
//!
//! A protein backbone is represented either by six internal angles per residue
//! ([`AngularChain`]) or by atom coordinates ([`BackboneCoords`]). Forward dynamics
//! pull a folded chain towards an extended strand while a soft Coulomb term keeps
//! distant residues apart; the resulting trajectories provide regression targets
//! for a conditional flow-matching generator.

pub mod align;
pub mod backbone;
pub mod dynamics;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod so3;

pub use backbone::{
    extract_angles, nerf_reconstruct, AngularChain, BackboneCoords, BackboneResidue,
    IdealGeometry,
};
pub use dynamics::{PhaseState, PotentialParams, SimConfig, Trajectory, Variant};
pub use error::{Error, Result};
pub use geometry::{Frame, Rotation, Vec3};
