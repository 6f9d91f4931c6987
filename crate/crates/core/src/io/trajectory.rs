//! Binary trajectory files.
//!
//! ```text
//! header  "UFTR" | version u16 | variant u8 | n_residues u32 | n_steps u32 | dt f64 | seed u64
//!         | k1 k2 gamma epsilon sigma_beta sigma_v sigma_z (f64) | source_id (u32 length + UTF-8)
//! body    n_steps + 1 frames: positions, [angular: validity mask, ceil(6N/8) bytes], velocities
//! footer  CRC32 of the body, u32
//! ```
//!
//! All integers and floats are little-endian. Mask bit `k` (LSB first within each byte)
//! is set when flat angle slot `k` is defined.

use std::fs;
use std::path::Path;

use crate::backbone::AngularChain;
use crate::dynamics::{PhaseState, PotentialParams, SimConfig, Trajectory, Variant};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"UFTR";
pub const FORMAT_VERSION: u16 = 1;

fn mask_bytes(n_residues: usize) -> Vec<u8> {
    let mask = AngularChain::mask_for(n_residues);
    let mut out = vec![0u8; mask.len().div_ceil(8)];
    for (k, defined) in mask.iter().enumerate() {
        if *defined {
            out[k / 8] |= 1 << (k % 8);
        }
    }
    out
}

fn put_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes a trajectory; the in-memory layout must already be consistent.
pub fn encode_trajectory(traj: &Trajectory) -> Result<Vec<u8>> {
    traj.validate()?;
    let n_res = u32::try_from(traj.n_residues)
        .map_err(|_| Error::InvalidParameter("too many residues".into()))?;
    let n_steps = u32::try_from(traj.n_steps())
        .map_err(|_| Error::InvalidParameter("too many steps".into()))?;
    let source = traj.source_id.as_bytes();
    let source_len = u32::try_from(source.len())
        .map_err(|_| Error::InvalidParameter("source id too long".into()))?;

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(traj.variant.tag());
    buf.extend_from_slice(&n_res.to_le_bytes());
    buf.extend_from_slice(&n_steps.to_le_bytes());
    buf.extend_from_slice(&traj.dt().to_le_bytes());
    buf.extend_from_slice(&traj.config.seed.to_le_bytes());
    let p = &traj.params;
    let c = &traj.config;
    put_f64s(
        &mut buf,
        &[p.k1, p.k2, p.gamma, p.epsilon, c.sigma_beta, c.sigma_v, c.sigma_z],
    );
    buf.extend_from_slice(&source_len.to_le_bytes());
    buf.extend_from_slice(source);

    let body_start = buf.len();
    let mask = (traj.variant == Variant::Angular).then(|| mask_bytes(traj.n_residues));
    for s in &traj.states {
        put_f64s(&mut buf, &s.positions);
        if let Some(m) = &mask {
            buf.extend_from_slice(m);
        }
        put_f64s(&mut buf, &s.velocities);
    }
    let crc = crc32fast::hash(&buf[body_start..]);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::CorruptFile {
                offset: self.pos as u64,
                reason: format!("truncated while reading {what}"),
            });
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const K: usize>(&mut self, what: &str) -> Result<[u8; K]> {
        Ok(self.take(K, what)?.try_into().expect("length checked"))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array(what)?))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(n * 8, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
}

fn corrupt(offset: usize, reason: impl Into<String>) -> Error {
    Error::CorruptFile {
        offset: offset as u64,
        reason: reason.into(),
    }
}

/// Parses a trajectory file image; any inconsistency is an error, never a partial result.
///
/// Settings that the header does not carry (integrator, target mean, repulsion atom
/// set, target wrapping and alignment) come back at their defaults.
pub fn decode_trajectory(bytes: &[u8]) -> Result<Trajectory> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(corrupt(0, "bad magic, not a trajectory file"));
    }
    let version = u16::from_le_bytes(cur.array("version")?);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let tag_at = cur.pos;
    let tag = cur.array::<1>("variant")?[0];
    let variant =
        Variant::from_tag(tag).ok_or_else(|| corrupt(tag_at, format!("unknown variant tag {tag}")))?;
    let n_res = cur.u32("residue count")? as usize;
    let steps_at = cur.pos;
    let n_steps = cur.u32("step count")? as usize;
    if n_steps < 1 {
        return Err(corrupt(steps_at, "trajectory needs at least one step"));
    }
    let dt_at = cur.pos;
    let dt = cur.f64("dt")?;
    let seed = u64::from_le_bytes(cur.array("seed")?);
    let block = cur.f64s(7, "parameter block")?;
    let source_len = cur.u32("source id length")? as usize;
    let source_at = cur.pos;
    let source_id = std::str::from_utf8(cur.take(source_len, "source id")?)
        .map_err(|_| corrupt(source_at, "source id is not UTF-8"))?
        .to_string();

    let config = SimConfig {
        n_steps,
        sigma_beta: block[4],
        sigma_v: block[5],
        sigma_z: block[6],
        seed,
        variant,
        ..SimConfig::default()
    };
    if dt.to_bits() != config.dt().to_bits() {
        return Err(corrupt(dt_at, format!("dt {dt} does not match {n_steps} steps")));
    }
    let params = PotentialParams {
        k1: block[0],
        k2: block[1],
        gamma: block[2],
        epsilon: block[3],
        ..PotentialParams::default()
    };

    let dim = n_res
        .checked_mul(variant.width())
        .ok_or_else(|| corrupt(steps_at, "state size overflows"))?;
    if dim.saturating_mul(16) > bytes.len() {
        return Err(corrupt(bytes.len(), "file too short for one frame"));
    }
    let mask = (variant == Variant::Angular).then(|| mask_bytes(n_res));
    let frame_len = dim * 16 + mask.as_ref().map_or(0, Vec::len);
    let body_start = cur.pos;
    let expected_end = (n_steps + 1)
        .checked_mul(frame_len)
        .and_then(|b| b.checked_add(body_start + 4));
    match expected_end {
        Some(end) if end == bytes.len() => {}
        Some(end) if end > bytes.len() => {
            return Err(corrupt(bytes.len(), format!("file truncated, expected {end} bytes")))
        }
        _ => {
            return Err(corrupt(
                body_start,
                format!("frame count does not match header ({} frames)", n_steps + 1),
            ))
        }
    }
    let footer_at = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[footer_at..].try_into().expect("4 bytes"));
    let actual = crc32fast::hash(&bytes[body_start..footer_at]);
    if stored != actual {
        return Err(corrupt(
            footer_at,
            format!("CRC mismatch: stored {stored:08x}, computed {actual:08x}"),
        ));
    }

    let mut states = Vec::with_capacity(n_steps + 1);
    for s in 0..=n_steps {
        let positions = cur.f64s(dim, "positions")?;
        if let Some(m) = &mask {
            let at = cur.pos;
            if cur.take(m.len(), "validity mask")? != m.as_slice() {
                return Err(corrupt(at, "validity mask does not match residue count"));
            }
        }
        let velocities = cur.f64s(dim, "velocities")?;
        states.push(PhaseState {
            positions,
            velocities,
            flow_time: crate::dynamics::flow_time_at(s, n_steps),
        });
    }
    let traj = Trajectory {
        variant,
        n_residues: n_res,
        config,
        params,
        source_id,
        states,
    };
    traj.validate()
        .map_err(|e| corrupt(body_start, format!("inconsistent trajectory: {e}")))?;
    Ok(traj)
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    fs::write(path, encode_trajectory(traj)?)?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    decode_trajectory(&fs::read(path)?)
}

/// Long-format text dump `state,flow_time,field,index,value` for inspection.
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let mut out = String::from("state,flow_time,field,index,value\n");
    for (s, st) in traj.states.iter().enumerate() {
        for (field, values) in [("z", &st.positions), ("v", &st.velocities)] {
            for (k, v) in values.iter().enumerate() {
                out.push_str(&format!("{s},{:.16e},{field},{k},{v:.16e}\n", st.flow_time));
            }
        }
    }
    out
}
