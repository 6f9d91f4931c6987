use crate::backbone::{angle_gradient_from_atoms, nerf_reconstruct, AngularChain, IdealGeometry};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec3};

use super::{PotentialParams, RepulsionAtoms};

/// Something the integrator can push around: a potential, its gradient and a
/// projection back onto the valid state space.
pub trait ForceModel {
    fn dim(&self) -> usize;
    fn potential(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn gamma(&self) -> f64;
    /// Applied to positions after every update.
    fn project(&self, _x: &mut [f64]) {}
    /// Applied to velocities after every update.
    fn project_velocity(&self, _v: &mut [f64]) {}
}

fn angle_diff(a: f64, b: f64, wrap: bool) -> f64 {
    if wrap {
        wrap_angle(a - b)
    } else {
        a - b
    }
}

/// `1/2 sum_i diff(z_i, target_i)^2` over the defined angles.
pub fn u_target(z: &AngularChain, target: &AngularChain, wrap: bool) -> Result<f64> {
    if z.len() != target.len() {
        return Err(Error::ShapeMismatch {
            expected: z.len(),
            found: target.len(),
        });
    }
    let mask = z.mask();
    Ok(0.5
        * z.as_slice()
            .iter()
            .zip(target.as_slice())
            .zip(&mask)
            .filter(|(_, m)| **m)
            .map(|((a, b), _)| angle_diff(*a, *b, wrap).powi(2))
            .sum::<f64>())
}

/// `1/2 sum_{i != j} 1 / (|x_i - x_j| + epsilon)`, i.e. once per unordered pair.
pub fn u_repulsion(points: &[Vec3], epsilon: f64) -> f64 {
    let mut e = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            e += 1.0 / ((points[i] - points[j]).norm() + epsilon);
        }
    }
    e
}

/// Gradient of [`u_repulsion`] with respect to every point.
///
/// Coincident points contribute no force (the direction is undefined).
pub fn grad_repulsion(points: &[Vec3], epsilon: f64) -> Vec<Vec3> {
    let n = points.len();
    let mut g = vec![Vec3::zeros(); n];
    for i in 0..n {
        let pi = points[i];
        let mut gi = Vec3::zeros();
        for j in i + 1..n {
            let d = pi - points[j];
            let r = d.norm();
            if r == 0.0 {
                continue;
            }
            let s = r + epsilon;
            let f = d / (r * s * s);
            gi -= f;
            g[j] += f;
        }
        g[i] += gi;
    }
    g
}

/// Angular potential `k1 U_target(z) + k2 U_repulsion(nerf(z))`.
#[derive(Debug, Clone)]
pub struct AngularModel {
    pub target: AngularChain,
    pub params: PotentialParams,
    pub geom: IdealGeometry,
}

impl AngularModel {
    pub fn new(target: AngularChain, params: PotentialParams, geom: IdealGeometry) -> Result<Self> {
        params.validate()?;
        geom.validate()?;
        Ok(AngularModel {
            target,
            params,
            geom,
        })
    }

    fn chain(&self, z: &[f64]) -> Result<AngularChain> {
        if z.len() != self.target.as_slice().len() {
            return Err(Error::ShapeMismatch {
                expected: self.target.as_slice().len(),
                found: z.len(),
            });
        }
        AngularChain::from_flat(z.to_vec())
    }

    fn repulsion_points(&self, z: &AngularChain) -> Result<Vec<Vec3>> {
        let coords = nerf_reconstruct(z, &self.geom)?;
        Ok(match self.params.repulsion_atoms {
            RepulsionAtoms::CaOnly => coords.ca_positions(),
            RepulsionAtoms::Backbone => coords.all_atoms(),
        })
    }
}

impl ForceModel for AngularModel {
    fn dim(&self) -> usize {
        self.target.as_slice().len()
    }

    fn potential(&self, z: &[f64]) -> Result<f64> {
        total_potential(&self.chain(z)?, &self.target, &self.params, &self.geom)
    }

    fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        grad_potential(&self.chain(z)?, &self.target, &self.params, &self.geom)
    }

    fn gamma(&self) -> f64 {
        self.params.gamma
    }

    fn project(&self, z: &mut [f64]) {
        let n = z.len() / 6;
        for (idx, a) in z.iter_mut().enumerate() {
            *a = if AngularChain::slot_defined(n, idx / 6, idx % 6) {
                wrap_angle(*a)
            } else {
                0.0
            };
        }
    }

    fn project_velocity(&self, v: &mut [f64]) {
        let n = v.len() / 6;
        for (idx, a) in v.iter_mut().enumerate() {
            if !AngularChain::slot_defined(n, idx / 6, idx % 6) {
                *a = 0.0;
            }
        }
    }
}

pub fn total_potential(
    z: &AngularChain,
    target: &AngularChain,
    params: &PotentialParams,
    geom: &IdealGeometry,
) -> Result<f64> {
    let mut u = params.k1 * u_target(z, target, params.wrap_target)?;
    if params.k2 != 0.0 {
        let model = AngularModel {
            target: target.clone(),
            params: params.clone(),
            geom: geom.clone(),
        };
        u += params.k2 * u_repulsion(&model.repulsion_points(z)?, params.epsilon);
    }
    Ok(u)
}

/// Exact gradient of [`total_potential`] over the flat angle storage.
///
/// The repulsion part is pulled back through the reconstruction with
/// [`angle_gradient_from_atoms`]. Undefined slots get zero.
pub fn grad_potential(
    z: &AngularChain,
    target: &AngularChain,
    params: &PotentialParams,
    geom: &IdealGeometry,
) -> Result<Vec<f64>> {
    if z.len() != target.len() {
        return Err(Error::ShapeMismatch {
            expected: z.len(),
            found: target.len(),
        });
    }
    let mask = z.mask();
    let mut grad: Vec<f64> = z
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .zip(&mask)
        .map(|((a, b), m)| {
            if *m {
                params.k1 * angle_diff(*a, *b, params.wrap_target)
            } else {
                0.0
            }
        })
        .collect();

    if params.k2 != 0.0 {
        let coords = nerf_reconstruct(z, geom)?;
        let atom_grad: Vec<[Vec3; 4]> = match params.repulsion_atoms {
            RepulsionAtoms::CaOnly => grad_repulsion(&coords.ca_positions(), params.epsilon)
                .into_iter()
                .map(|g| [Vec3::zeros(), g, Vec3::zeros(), Vec3::zeros()])
                .collect(),
            RepulsionAtoms::Backbone => grad_repulsion(&coords.all_atoms(), params.epsilon)
                .chunks_exact(4)
                .map(|c| [c[0], c[1], c[2], c[3]])
                .collect(),
        };
        let rep = angle_gradient_from_atoms(&coords, &atom_grad)?;
        for ((g, r), m) in grad.iter_mut().zip(rep).zip(&mask) {
            if *m {
                *g += params.k2 * r;
            }
        }
    }
    Ok(grad)
}

/// Cartesian potential over flat CA coordinates:
/// `k1/2 |x - x_target|^2 + k2 U_repulsion(x)`.
#[derive(Debug, Clone)]
pub struct CartesianModel {
    pub target: Vec<f64>,
    pub params: PotentialParams,
}

fn as_points(x: &[f64]) -> Vec<Vec3> {
    x.chunks_exact(3)
        .map(|c| Vec3::new(c[0], c[1], c[2]))
        .collect()
}

impl CartesianModel {
    pub fn new(target: Vec<f64>, params: PotentialParams) -> Result<Self> {
        params.validate()?;
        if !target.len().is_multiple_of(3) {
            return Err(Error::InvalidParameter(
                "Cartesian target length must be a multiple of 3".into(),
            ));
        }
        Ok(CartesianModel { target, params })
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.target.len() {
            return Err(Error::ShapeMismatch {
                expected: self.target.len(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

impl ForceModel for CartesianModel {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn potential(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let attract: f64 = x
            .iter()
            .zip(&self.target)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            * 0.5;
        Ok(self.params.k1 * attract + self.params.k2 * u_repulsion(&as_points(x), self.params.epsilon))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut g: Vec<f64> = x
            .iter()
            .zip(&self.target)
            .map(|(a, b)| self.params.k1 * (a - b))
            .collect();
        if self.params.k2 != 0.0 {
            for (i, r) in grad_repulsion(&as_points(x), self.params.epsilon)
                .iter()
                .enumerate()
            {
                for k in 0..3 {
                    g[3 * i + k] += self.params.k2 * r[k];
                }
            }
        }
        Ok(g)
    }

    fn gamma(&self) -> f64 {
        self.params.gamma
    }
}
