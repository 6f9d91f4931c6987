//! Backbone representations and the conversions between them.
//!
//! Three views of the same chain are supported:
//!
//! * [`BackboneCoords`]: Cartesian positions of N, CA, C and O per residue (Angstrom).
//! * [`AngularChain`]: six internal angles per residue, `(phi, psi, omega, theta1, theta2, theta3)`.
//! * [`Frame`]: one rigid transform per residue mapping idealized Alanine atoms onto the residue.
//!
//! Angle index conventions for residue `i` (all but `theta1` need residue `i + 1`):
//!
//! | angle    | atoms                                  |
//! |----------|----------------------------------------|
//! | `phi`    | dihedral `C_i, N_i+1, CA_i+1, C_i+1`   |
//! | `psi`    | dihedral `N_i, CA_i, C_i, N_i+1`       |
//! | `omega`  | dihedral `CA_i, C_i, N_i+1, CA_i+1`    |
//! | `theta1` | angle `N_i, CA_i, C_i`                 |
//! | `theta2` | angle `CA_i, C_i, N_i+1`               |
//! | `theta3` | angle `C_i, N_i+1, CA_i+1`             |
//!
//! Angles that would need a successor are undefined on the last residue. They are stored
//! as `0.0` and reported as invalid by [`AngularChain::is_defined`].

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{bond_angle, dihedral, Frame, Rotation, Vec3, DEGENERACY_EPS};

pub const PHI: usize = 0;
pub const PSI: usize = 1;
pub const OMEGA: usize = 2;
pub const THETA1: usize = 3;
pub const THETA2: usize = 4;
pub const THETA3: usize = 5;

pub const ANGLES_PER_RESIDUE: usize = 6;
pub const ANGLE_NAMES: [&str; 6] = ["phi", "psi", "omega", "theta1", "theta2", "theta3"];

/// Idealized residue geometry (Alanine reference atoms) plus the bond lengths used by
/// reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealGeometry {
    pub n_star: Vec3,
    pub ca_star: Vec3,
    pub c_star: Vec3,
    pub o_star: Vec3,
    /// Translation of the oxygen torsion frame.
    pub x_phi: Vec3,
    /// C-N peptide bond length.
    pub peptide_bond: f64,
    /// Unit-circle torsion used to place O during reconstruction.
    pub oxygen_torsion: (f64, f64),
}

impl Default for IdealGeometry {
    fn default() -> Self {
        IdealGeometry {
            n_star: Vec3::new(-0.525, 1.363, 0.0),
            ca_star: Vec3::new(0.0, 0.0, 0.0),
            c_star: Vec3::new(1.526, 0.0, 0.0),
            o_star: Vec3::new(0.627, 1.062, 0.0),
            x_phi: Vec3::new(1.526, 0.0, 0.0),
            peptide_bond: 1.329,
            oxygen_torsion: (1.0, 0.0),
        }
    }
}

impl IdealGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.ca_star != Vec3::zeros() {
            return Err(Error::InvalidParameter("ca_star must be the origin".into()));
        }
        if self.c_star.y != 0.0 || self.c_star.z != 0.0 || self.c_star.x <= 0.0 {
            return Err(Error::InvalidParameter(
                "c_star must lie on the positive x axis".into(),
            ));
        }
        if self.n_star.z != 0.0 || self.n_star.y <= 0.0 {
            return Err(Error::InvalidParameter(
                "n_star must lie in the upper xy half-plane".into(),
            ));
        }
        if !(self.peptide_bond > 0.0) {
            return Err(Error::InvalidParameter("peptide bond must be positive".into()));
        }
        check_unit_circle(self.oxygen_torsion)
    }

    pub fn n_ca_bond(&self) -> f64 {
        (self.n_star - self.ca_star).norm()
    }

    pub fn ca_c_bond(&self) -> f64 {
        (self.c_star - self.ca_star).norm()
    }

    /// The N-CA-C angle implied by the reference atoms.
    pub fn ideal_theta1(&self) -> f64 {
        self.n_star.y.atan2(self.n_star.x)
    }
}

/// Per-residue six-angle internal coordinates, flat storage of `6 * len` radians.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularChain {
    angles: Vec<f64>,
}

impl AngularChain {
    /// Builds a chain, zeroing the undefined slots of the last residue.
    pub fn new(residues: &[[f64; 6]]) -> Result<Self> {
        Self::from_flat(residues.iter().flatten().copied().collect())
    }

    pub fn from_flat(mut angles: Vec<f64>) -> Result<Self> {
        if !angles.len().is_multiple_of(ANGLES_PER_RESIDUE) {
            return Err(Error::InvalidChain(format!(
                "{} values is not a multiple of six",
                angles.len()
            )));
        }
        let n = angles.len() / ANGLES_PER_RESIDUE;
        if n < 2 {
            return Err(Error::InvalidChain(format!(
                "need at least 2 residues, got {n}"
            )));
        }
        for (idx, a) in angles.iter_mut().enumerate() {
            let (res, k) = (idx / 6, idx % 6);
            if !Self::slot_defined(n, res, k) {
                *a = 0.0;
                continue;
            }
            if !(a.is_finite() && *a > -PI && *a <= PI) {
                return Err(Error::InvalidChain(format!(
                    "residue {res} {} = {a} outside (-pi, pi]",
                    ANGLE_NAMES[k]
                )));
            }
        }
        Ok(AngularChain { angles })
    }

    /// Same residue angles repeated `n` times.
    pub fn uniform(n: usize, residue: [f64; 6]) -> Result<Self> {
        Self::from_flat(residue.iter().copied().cycle().take(6 * n).collect())
    }

    pub fn len(&self) -> usize {
        self.angles.len() / ANGLES_PER_RESIDUE
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.angles
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.angles
    }

    pub fn get(&self, residue: usize, angle: usize) -> f64 {
        self.angles[residue * ANGLES_PER_RESIDUE + angle]
    }

    pub fn residue(&self, i: usize) -> [f64; 6] {
        let mut out = [0.0; 6];
        out.copy_from_slice(&self.angles[i * 6..i * 6 + 6]);
        out
    }

    pub fn is_defined(&self, residue: usize, angle: usize) -> bool {
        Self::slot_defined(self.len(), residue, angle)
    }

    /// Whether slot `angle` of `residue` carries data in a chain of `n` residues.
    pub fn slot_defined(n: usize, residue: usize, angle: usize) -> bool {
        residue + 1 < n || angle == THETA1
    }

    /// Validity mask over the flat storage.
    pub fn mask_for(n: usize) -> Vec<bool> {
        (0..n * ANGLES_PER_RESIDUE)
            .map(|idx| Self::slot_defined(n, idx / 6, idx % 6))
            .collect()
    }

    pub fn mask(&self) -> Vec<bool> {
        Self::mask_for(self.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackboneResidue {
    pub n: Vec3,
    pub ca: Vec3,
    pub c: Vec3,
    pub o: Vec3,
}

impl BackboneResidue {
    pub fn atoms(&self) -> [Vec3; 4] {
        [self.n, self.ca, self.c, self.o]
    }

    fn map(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        BackboneResidue {
            n: f(&self.n),
            ca: f(&self.ca),
            c: f(&self.c),
            o: f(&self.o),
        }
    }
}

/// Cartesian backbone, one record of N, CA, C, O per residue.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneCoords {
    pub residues: Vec<BackboneResidue>,
}

impl BackboneCoords {
    pub fn new(residues: Vec<BackboneResidue>) -> Result<Self> {
        for (i, r) in residues.iter().enumerate() {
            if r.atoms().iter().any(|a| a.iter().any(|v| !v.is_finite())) {
                return Err(Error::InvalidParameter(format!(
                    "residue {i} has non-finite coordinates"
                )));
            }
        }
        Ok(BackboneCoords { residues })
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn ca_positions(&self) -> Vec<Vec3> {
        self.residues.iter().map(|r| r.ca).collect()
    }

    /// Flat `[x0, y0, z0, x1, ...]` of the CA atoms.
    pub fn ca_flat(&self) -> Vec<f64> {
        self.residues
            .iter()
            .flat_map(|r| [r.ca.x, r.ca.y, r.ca.z])
            .collect()
    }

    /// All atoms in N, CA, C, O order per residue.
    pub fn all_atoms(&self) -> Vec<Vec3> {
        self.residues.iter().flat_map(|r| r.atoms()).collect()
    }

    pub fn translated(&self, t: &Vec3) -> Self {
        self.transformed(&Frame::new(Rotation::identity(), *t))
    }

    pub fn transformed(&self, f: &Frame) -> Self {
        BackboneCoords {
            residues: self.residues.iter().map(|r| r.map(|p| f.apply(p))).collect(),
        }
    }
}

/// Reads the six internal angles of every residue.
pub fn extract_angles(coords: &BackboneCoords) -> Result<AngularChain> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::InvalidChain(format!(
            "need at least 2 residues, got {n}"
        )));
    }
    let r = &coords.residues;
    let mut angles = vec![0.0; n * ANGLES_PER_RESIDUE];
    for i in 0..n {
        let at = |e: Error| match e {
            Error::DegenerateGeometry(reason) => Error::DegenerateResidue { residue: i, reason },
            other => other,
        };
        let out = &mut angles[i * 6..i * 6 + 6];
        out[THETA1] = bond_angle(&r[i].n, &r[i].ca, &r[i].c).map_err(at)?;
        if i + 1 == n {
            continue;
        }
        let next = &r[i + 1];
        out[PSI] = dihedral(&r[i].n, &r[i].ca, &r[i].c, &next.n).map_err(at)?;
        out[PHI] = dihedral(&r[i].c, &next.n, &next.ca, &next.c).map_err(at)?;
        out[OMEGA] = dihedral(&r[i].ca, &r[i].c, &next.n, &next.ca).map_err(at)?;
        out[THETA2] = bond_angle(&r[i].ca, &r[i].c, &next.n).map_err(at)?;
        out[THETA3] = bond_angle(&r[i].c, &next.n, &next.ca).map_err(at)?;
    }
    AngularChain::from_flat(angles)
}

/// NeRF placement of `d` given the three preceding atoms, the `c-d` bond length,
/// the `b-c-d` bond angle and the `a-b-c-d` torsion.
fn place_atom(a: &Vec3, b: &Vec3, c: &Vec3, bond: f64, angle: f64, torsion: f64) -> Vec3 {
    let bc = (c - b).normalize();
    let n = (b - a).cross(&bc).normalize();
    let m = n.cross(&bc);
    let (sa, ca) = angle.sin_cos();
    let (st, ct) = torsion.sin_cos();
    c + bc * (-bond * ca) + m * (bond * sa * ct) + n * (bond * sa * st)
}

/// Reconstructs the backbone from internal angles using idealized bond lengths.
///
/// Residue 0 keeps `CA` at the origin and `C` at `c_star`; `N` sits at distance
/// `|n_star|` in the xy plane at angle `theta1_0` from the x axis, so a chain with the
/// ideal `theta1_0` starts exactly on the identity frame. Every later atom is placed by
/// sequential NeRF extension; O comes from each residue's frame.
pub fn nerf_reconstruct(chain: &AngularChain, geom: &IdealGeometry) -> Result<BackboneCoords> {
    geom.validate()?;
    let n = chain.len();
    let (b_nca, b_cac, b_cn) = (geom.n_ca_bond(), geom.ca_c_bond(), geom.peptide_bond);

    let mut atoms: Vec<[Vec3; 3]> = Vec::with_capacity(n);
    let (s1, c1) = chain.get(0, THETA1).sin_cos();
    atoms.push([Vec3::new(b_nca * c1, b_nca * s1, 0.0), geom.ca_star, geom.c_star]);

    for i in 0..n.saturating_sub(1) {
        let [n_i, ca_i, c_i] = atoms[i];
        let z = chain.residue(i);
        let n_next = place_atom(&n_i, &ca_i, &c_i, b_cn, z[THETA2], z[PSI]);
        let ca_next = place_atom(&ca_i, &c_i, &n_next, b_nca, z[THETA3], z[OMEGA]);
        let c_next = place_atom(
            &c_i,
            &n_next,
            &ca_next,
            b_cac,
            chain.get(i + 1, THETA1),
            z[PHI],
        );
        atoms.push([n_next, ca_next, c_next]);
    }

    let residues = atoms
        .into_iter()
        .map(|[n_a, ca_a, c_a]| {
            let frame = atoms_to_frame(&n_a, &ca_a, &c_a)?;
            Ok(BackboneResidue {
                n: n_a,
                ca: ca_a,
                c: c_a,
                o: oxygen_from_frame(&frame, geom.oxygen_torsion, geom),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    BackboneCoords::new(residues)
}

fn check_unit_circle(varphi: (f64, f64)) -> Result<()> {
    let r2 = varphi.0 * varphi.0 + varphi.1 * varphi.1;
    if !((r2 - 1.0).abs() <= 1e-9) {
        return Err(Error::InvalidTorsion(varphi.0, varphi.1));
    }
    Ok(())
}

fn oxygen_from_frame(frame: &Frame, varphi: (f64, f64), geom: &IdealGeometry) -> Vec3 {
    let (c, s) = varphi;
    let r_x = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
    frame.apply(&(r_x * geom.o_star + geom.x_phi))
}

/// Gram-Schmidt frame from three backbone atoms: `e1` along `C - CA`, `e2` from the
/// orthogonalized `N - CA`, `e3 = e1 x e2`; translation is `CA`.
pub fn atoms_to_frame(n: &Vec3, ca: &Vec3, c: &Vec3) -> Result<Frame> {
    let v1 = c - ca;
    let v2 = n - ca;
    let v1_norm = v1.norm();
    if v1_norm < DEGENERACY_EPS {
        return Err(Error::DegenerateGeometry("C coincides with CA".into()));
    }
    let e1 = v1 / v1_norm;
    let u2 = v2 - e1 * e1.dot(&v2);
    let u2_norm = u2.norm();
    if u2_norm < DEGENERACY_EPS {
        return Err(Error::DegenerateGeometry("N, CA and C are collinear".into()));
    }
    let e2 = u2 / u2_norm;
    let e3 = e1.cross(&e2);
    let r = Matrix3::from_columns(&[e1, e2, e3]);
    Ok(Frame::new(Rotation::from_matrix_unchecked(r), *ca))
}

/// Maps a residue frame and oxygen torsion onto `[N, CA, C, O]` using the ideal geometry.
pub fn frame_to_atoms(
    frame: &Frame,
    varphi: (f64, f64),
    geom: &IdealGeometry,
) -> Result<BackboneResidue> {
    check_unit_circle(varphi)?;
    Ok(BackboneResidue {
        n: frame.apply(&geom.n_star),
        ca: frame.apply(&geom.ca_star),
        c: frame.apply(&geom.c_star),
        o: oxygen_from_frame(frame, varphi, geom),
    })
}

/// Residue frames of a whole chain.
pub fn chain_frames(coords: &BackboneCoords) -> Result<Vec<Frame>> {
    coords
        .residues
        .iter()
        .map(|r| atoms_to_frame(&r.n, &r.ca, &r.c))
        .collect()
}

/// Translates the chain so the mean CA position is the origin.
pub fn center_chain(coords: &BackboneCoords) -> BackboneCoords {
    if coords.is_empty() {
        return coords.clone();
    }
    let sum = coords
        .residues
        .iter()
        .fold(Vec3::zeros(), |acc, r| acc + r.ca);
    let mean = sum / coords.len() as f64;
    coords.translated(&-mean)
}

/// Pulls a gradient with respect to atom positions back onto the internal angles.
///
/// `atom_grad[i]` holds `dU/dx` for `[N, CA, C, O]` of residue `i`. Perturbing any
/// angle rigidly rotates every atom placed after it about a fixed axis through a
/// pivot, so `dU/d(angle) = axis . sum_k (x_k - pivot) x g_k` over the moved atoms.
/// Suffix sums of forces and torques make the whole pass linear in chain length.
pub fn angle_gradient_from_atoms(
    coords: &BackboneCoords,
    atom_grad: &[[Vec3; 4]],
) -> Result<Vec<f64>> {
    let n = coords.len();
    if atom_grad.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: atom_grad.len(),
        });
    }
    let r = &coords.residues;

    // suffix_force[i] = sum over residues >= i; suffix_torque likewise of x cross g.
    let mut suffix_force = vec![Vec3::zeros(); n + 1];
    let mut suffix_torque = vec![Vec3::zeros(); n + 1];
    for i in (0..n).rev() {
        let mut f = Vec3::zeros();
        let mut t = Vec3::zeros();
        for (x, g) in r[i].atoms().iter().zip(atom_grad[i].iter()) {
            f += g;
            t += x.cross(g);
        }
        suffix_force[i] = suffix_force[i + 1] + f;
        suffix_torque[i] = suffix_torque[i + 1] + t;
    }

    let torque = |axis: Vec3, pivot: &Vec3, force: &Vec3, tq: &Vec3| -> f64 {
        let norm = axis.norm();
        if norm < DEGENERACY_EPS {
            return 0.0;
        }
        (axis / norm).dot(&(tq - pivot.cross(force)))
    };

    let mut grad = vec![0.0; n * ANGLES_PER_RESIDUE];
    for i in 0..n {
        let g = &mut grad[i * 6..i * 6 + 6];
        let res = &r[i];
        g[THETA1] = if i == 0 {
            // only N_0 moves when theta1_0 opens the seed residue
            let axis = (res.c - res.ca).cross(&(res.n - res.ca));
            let gn = atom_grad[0][0];
            torque(axis, &res.ca, &gn, &res.n.cross(&gn))
        } else {
            let [_, _, gc, go] = atom_grad[i];
            let f = suffix_force[i + 1] + gc + go;
            let t = suffix_torque[i + 1] + res.c.cross(&gc) + res.o.cross(&go);
            let axis = (res.n - res.ca).cross(&(res.c - res.ca));
            torque(axis, &res.ca, &f, &t)
        };
        if i + 1 == n {
            continue;
        }
        let next = &r[i + 1];
        let (f, t) = (&suffix_force[i + 1], &suffix_torque[i + 1]);
        g[PSI] = torque(res.c - res.ca, &res.c, f, t);
        g[THETA2] = torque((res.ca - res.c).cross(&(next.n - res.c)), &res.c, f, t);
        g[OMEGA] = torque(next.n - res.c, &next.n, f, t);
        g[THETA3] = torque((res.c - next.n).cross(&(next.ca - next.n)), &next.n, f, t);
        g[PHI] = torque(next.ca - next.n, &next.ca, f, t);
    }
    Ok(grad)
}
