#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use unfoldsim::backbone::{nerf_reconstruct, AngularChain, IdealGeometry};
use unfoldsim::geometry::wrap_angle;
use unfoldsim::so3::sample_uniform_rotation;
use unfoldsim::{BackboneCoords, Frame, Vec3};

/// Random but chemically plausible chain: free phi/psi, near-trans omega and bond
/// angles within 0.15 rad of their ideal values.
pub fn random_chain<R: Rng>(rng: &mut R, n: usize) -> AngularChain {
    let rows: Vec<[f64; 6]> = (0..n)
        .map(|_| {
            let phi = rng.random_range(-PI..PI);
            let psi = rng.random_range(-PI..PI);
            let omega = wrap_angle(PI + 0.1 * rng.sample::<f64, _>(StandardNormal));
            let t1 = 111.0f64.to_radians() + rng.random_range(-0.15..0.15);
            let t2 = 116.2f64.to_radians() + rng.random_range(-0.15..0.15);
            let t3 = 121.7f64.to_radians() + rng.random_range(-0.15..0.15);
            [phi, psi, omega, t1, t2, t3]
        })
        .collect();
    AngularChain::new(&rows).unwrap()
}

pub fn random_vec<R: Rng>(rng: &mut R, scale: f64) -> Vec3 {
    if scale == 0.0 {
        return Vec3::zeros();
    }
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

pub fn random_frame<R: Rng>(rng: &mut R, scale: f64) -> Frame {
    Frame::new(sample_uniform_rotation(rng), random_vec(rng, scale))
}

pub fn random_coords<R: Rng>(rng: &mut R, n: usize) -> BackboneCoords {
    let chain = random_chain(rng, n);
    let c = nerf_reconstruct(&chain, &IdealGeometry::default()).unwrap();
    c.transformed(&random_frame(rng, 20.0))
}

/// Largest wrapped difference over the defined slots of two chains.
pub fn max_angle_diff(a: &AngularChain, b: &AngularChain) -> f64 {
    assert_eq!(a.len(), b.len());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .zip(a.mask())
        .filter(|(_, m)| *m)
        .map(|((x, y), _)| wrap_angle(x - y).abs())
        .fold(0.0, f64::max)
}
