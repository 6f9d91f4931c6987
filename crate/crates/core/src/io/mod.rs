//! File formats: PDB backbones, binary trajectories, run configs and CSV tables.

mod config;
mod pdb;
mod tables;
mod trajectory;

pub use config::{parse_variant, RunConfig, KEYS as CONFIG_KEYS};
pub use pdb::{parse_pdb_backbone, write_pdb};
pub use tables::{
    angles_from_csv, angles_to_csv, bench_to_csv, collisions_to_csv, energy_to_csv, ANGLES_HEADER,
};
pub use trajectory::{
    decode_trajectory, encode_trajectory, read_trajectory, trajectory_to_csv, write_trajectory,
    FORMAT_VERSION, MAGIC,
};
