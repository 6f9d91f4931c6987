mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_chain, random_coords, random_vec};
use unfoldsim::backbone::{center_chain, nerf_reconstruct, AngularChain, IdealGeometry};
use unfoldsim::dynamics::{
    angular_target, grad_potential, rebuild_model, sample_prior, sample_transition, simulate,
    simulate_cartesian, total_potential, trajectory_rng, u_repulsion, AngularModel,
    CartesianModel, ForceModel, Integrator, PotentialParams, RepulsionAtoms, SimConfig,
};
use unfoldsim::geometry::wrap_angle;
use unfoldsim::metrics::{collision_count, energy_profile_with};
use unfoldsim::{Trajectory, Variant, Vec3};

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central differences of `f` at every defined slot, wrapping the perturbed angle.
fn finite_difference(z: &AngularChain, h: f64, f: impl Fn(&AngularChain) -> f64) -> Vec<f64> {
    let mask = z.mask();
    (0..z.as_slice().len())
        .map(|k| {
            if !mask[k] {
                return 0.0;
            }
            let shifted = |d: f64| {
                let mut v = z.as_slice().to_vec();
                v[k] = wrap_angle(v[k] + d);
                AngularChain::from_flat(v).unwrap()
            };
            (f(&shifted(h)) - f(&shifted(-h))) / (2.0 * h)
        })
        .collect()
}

fn assert_gradient_matches(analytic: &[f64], numeric: &[f64], rel: f64) {
    for (k, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let scale = a.abs().max(n.abs());
        if scale > 1e-8 {
            assert!(
                (a - n).abs() <= rel * scale,
                "slot {k}: analytic {a}, finite difference {n}"
            );
        }
    }
}

fn check_angular_gradient(seed: u64, atoms: RepulsionAtoms, wrap: bool) {
    let mut rng = seeded(seed);
    let n = rng.random_range(2..=32);
    let z = random_chain(&mut rng, n);
    let target = random_chain(&mut rng, n);
    let params = PotentialParams {
        k1: rng.random_range(0.1..5.0),
        k2: rng.random_range(0.1..5.0),
        repulsion_atoms: atoms,
        wrap_target: wrap,
        ..PotentialParams::default()
    };
    let g = IdealGeometry::default();
    let analytic = grad_potential(&z, &target, &params, &g).unwrap();
    let numeric = finite_difference(&z, 1e-5, |c| total_potential(c, &target, &params, &g).unwrap());
    for (k, m) in z.mask().iter().enumerate() {
        if !m {
            assert_eq!(analytic[k], 0.0);
        }
    }
    assert_gradient_matches(&analytic, &numeric, 1e-5);
}

#[test]
fn angular_gradient_matches_finite_differences() {
    for seed in 0..100 {
        check_angular_gradient(seed, RepulsionAtoms::CaOnly, true);
    }
}

#[test]
fn backbone_repulsion_gradient_matches_finite_differences() {
    for seed in 100..130 {
        check_angular_gradient(seed, RepulsionAtoms::Backbone, true);
    }
}

#[test]
fn raw_target_gradient_matches_finite_differences() {
    for seed in 200..220 {
        check_angular_gradient(seed, RepulsionAtoms::CaOnly, false);
    }
}

#[test]
fn repulsion_only_gradient_at_the_target() {
    // straight-ish strand at its own target: only the pulled-back repulsion remains
    let g = IdealGeometry::default();
    let z = AngularChain::uniform(12, unfoldsim::dynamics::default_beta_angles()).unwrap();
    let params = PotentialParams {
        k2: 3.0,
        ..PotentialParams::default()
    };
    let full = grad_potential(&z, &z, &params, &g).unwrap();
    let rep_only = grad_potential(&z, &z, &PotentialParams { k1: 0.0, k2: 1.0, ..params.clone() }, &g).unwrap();
    for (a, b) in full.iter().zip(&rep_only) {
        assert!((a - 3.0 * b).abs() <= 1e-12 * a.abs().max(1.0));
    }
    let numeric = finite_difference(&z, 1e-5, |c| total_potential(c, &z, &params, &g).unwrap());
    assert_gradient_matches(&full, &numeric, 1e-5);
}

#[test]
fn pure_repulsion_equals_direct_evaluation() {
    let g = IdealGeometry::default();
    let z = AngularChain::uniform(20, unfoldsim::dynamics::default_beta_angles()).unwrap();
    let params = PotentialParams {
        k1: 0.0,
        ..PotentialParams::default()
    };
    let ca = nerf_reconstruct(&z, &g).unwrap().ca_positions();
    let mut direct = 0.0;
    for i in 0..ca.len() {
        for j in 0..ca.len() {
            if i != j {
                direct += 0.5 / ((ca[i] - ca[j]).norm() + params.epsilon);
            }
        }
    }
    let u = total_potential(&z, &random_chain(&mut seeded(3), 20), &params, &g).unwrap();
    assert!((u - direct).abs() < 1e-12 * direct);
    let zero = PotentialParams {
        k1: 0.0,
        k2: 0.0,
        ..params
    };
    assert_eq!(total_potential(&z, &z, &zero, &g).unwrap(), 0.0);
}

#[test]
fn cartesian_gradient_matches_finite_differences() {
    let mut rng = seeded(17);
    for _ in 0..50 {
        let n = rng.random_range(3..30);
        let x: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-15.0..15.0)).collect();
        let target: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-15.0..15.0)).collect();
        let model = CartesianModel::new(
            target,
            PotentialParams {
                k1: rng.random_range(0.1..3.0),
                k2: rng.random_range(0.1..30.0),
                ..PotentialParams::default()
            },
        )
        .unwrap();
        let analytic = model.gradient(&x).unwrap();
        let h = 1e-5;
        let g_max = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for k in 0..x.len() {
            let mut p = x.clone();
            let mut m = x.clone();
            p[k] += h;
            m[k] -= h;
            let fd = (model.potential(&p).unwrap() - model.potential(&m).unwrap()) / (2.0 * h);
            // cancellation in the difference quotient scales with the largest component
            assert!((fd - analytic[k]).abs() <= 1e-6 * g_max, "{k}: {fd} vs {}", analytic[k]);
        }
    }
}

#[test]
fn repulsion_falls_with_distance() {
    let mut rng = seeded(4);
    for _ in 0..200 {
        let a = random_vec(&mut rng, 5.0);
        let dir = random_vec(&mut rng, 1.0).normalize();
        let r = rng.random_range(0.5..20.0);
        let near = u_repulsion(&[a, a + dir * r], 1e-6);
        let far = u_repulsion(&[a, a + dir * (r + 1e-3)], 1e-6);
        assert!(far < near);
    }
}

/// Closed-form endpoint of x'' = -k x - g x' after time `tau`.
fn damped_oscillator(x0: f64, v0: f64, k: f64, g: f64, tau: f64) -> f64 {
    let disc = k - g * g / 4.0;
    let decay = (-g * tau / 2.0).exp();
    if disc > 0.0 {
        let w = disc.sqrt();
        decay * (x0 * (w * tau).cos() + (v0 + g * x0 / 2.0) / w * (w * tau).sin())
    } else if disc < 0.0 {
        let w = (-disc).sqrt();
        decay * (x0 * (w * tau).cosh() + (v0 + g * x0 / 2.0) / w * (w * tau).sinh())
    } else {
        decay * (x0 + (v0 + g * x0 / 2.0) * tau)
    }
}

fn oscillator_setup(n_steps: usize) -> (Trajectory, AngularChain) {
    let mu = [0.4, -0.3, 0.9, 1.9, 2.0, 2.1];
    let config = SimConfig {
        n_steps,
        sigma_beta: 0.0,
        sigma_v: 0.2,
        seed: 8,
        mu_beta: mu,
        ..SimConfig::default()
    };
    let params = PotentialParams {
        k1: 4.0,
        k2: 0.0,
        gamma: 1.5,
        ..PotentialParams::default()
    };
    let offsets = [0.3, -0.5, 0.2, 0.1, -0.25, 0.4];
    let rows: Vec<[f64; 6]> = (0..2)
        .map(|_| std::array::from_fn(|k| mu[k] + offsets[k]))
        .collect();
    let data = AngularChain::new(&rows).unwrap();
    let g = IdealGeometry::default();
    let traj = simulate(&data, &params, &config, &g, "oscillator").unwrap();
    let target = angular_target(2, &config, &mut trajectory_rng(config.seed)).unwrap();
    (traj, target)
}

fn oscillator_error(n_steps: usize) -> f64 {
    let (traj, target) = oscillator_setup(n_steps);
    let start = &traj.states[0];
    let end = traj.states.last().unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..12 {
        if !AngularChain::slot_defined(2, k / 6, k % 6) {
            continue;
        }
        let x0 = wrap_angle(start.positions[k] - target.as_slice()[k]);
        let exact = damped_oscillator(x0, start.velocities[k], 4.0, 1.5, 1.0);
        let got = wrap_angle(end.positions[k] - target.as_slice()[k]);
        worst = worst.max((got - exact).abs());
    }
    worst
}

#[test]
fn damped_oscillator_endpoint_is_first_order() {
    let e1 = oscillator_error(100);
    let e2 = oscillator_error(200);
    let e4 = oscillator_error(400);
    assert!(e1 < 0.05, "endpoint error {e1}");
    let (r1, r2) = (e1 / e2, e2 / e4);
    assert!((1.6..=2.4).contains(&r1), "ratio {r1}");
    assert!((1.6..=2.4).contains(&r2), "ratio {r2}");
}

#[test]
fn high_drag_moves_towards_the_target() {
    let g = IdealGeometry::default();
    let mut rng = seeded(12);
    for _ in 0..5 {
        let data = random_chain(&mut rng, 15);
        let config = SimConfig {
            seed: rng.random(),
            ..SimConfig::default()
        };
        let params = PotentialParams {
            k2: 0.0,
            gamma: 0.5 / config.dt(),
            k1: 5.0,
            ..PotentialParams::default()
        };
        let traj = simulate(&data, &params, &config, &g, "drag").unwrap();
        let target = angular_target(15, &config, &mut trajectory_rng(config.seed)).unwrap();
        let rms = |z: &[f64]| {
            let mask = target.mask();
            let s: f64 = z
                .iter()
                .zip(target.as_slice())
                .zip(&mask)
                .filter(|(_, m)| **m)
                .map(|((a, b), _)| wrap_angle(a - b).powi(2))
                .sum();
            s.sqrt()
        };
        assert!(rms(&traj.states.last().unwrap().positions) < rms(&traj.states[0].positions));
    }
}

#[test]
fn cartesian_run_converges_with_high_drag() {
    let g = IdealGeometry::default();
    let mut rng = seeded(21);
    let coords = center_chain(&random_coords(&mut rng, 20));
    let config = SimConfig {
        variant: Variant::Cartesian,
        ..SimConfig::default()
    };
    let params = PotentialParams {
        k1: 5.0,
        k2: 0.0,
        gamma: 0.5 / config.dt(),
        ..PotentialParams::default()
    };
    let traj = simulate_cartesian(&coords, &params, &config, &g, "c").unwrap();
    let model = rebuild_model(&traj, &params, &g).unwrap();
    let e0 = model.potential(&traj.states[0].positions).unwrap();
    let e1 = model.potential(&traj.states.last().unwrap().positions).unwrap();
    assert!(e1 < e0);
}

#[test]
fn cartesian_runs_are_translation_equivariant() {
    let g = IdealGeometry::default();
    let mut rng = seeded(22);
    let coords = random_coords(&mut rng, 12);
    let t = random_vec(&mut rng, 30.0);
    let config = SimConfig {
        n_steps: 40,
        ..SimConfig::default()
    };
    let params = PotentialParams::default();
    let a = simulate_cartesian(&coords, &params, &config, &g, "a").unwrap();
    let b = simulate_cartesian(&coords.translated(&t), &params, &config, &g, "b").unwrap();
    for (sa, sb) in a.states.iter().zip(&b.states) {
        for (k, (pa, pb)) in sa.positions.iter().zip(&sb.positions).enumerate() {
            assert!((pb - pa - t[k % 3]).abs() < 1e-8);
        }
        for (va, vb) in sa.velocities.iter().zip(&sb.velocities) {
            assert!((va - vb).abs() < 1e-8);
        }
    }
}

#[test]
fn semi_implicit_energy_dissipates() {
    let g = IdealGeometry::default();
    let mut rng = seeded(31);
    for _ in 0..4 {
        let n = rng.random_range(8..30);
        let data = random_chain(&mut rng, n);
        let config = SimConfig {
            integrator: Integrator::SemiImplicitEuler,
            n_steps: 400,
            seed: rng.random(),
            ..SimConfig::default()
        };
        let params = PotentialParams::default();
        let traj = simulate(&data, &params, &config, &g, "energy").unwrap();
        let model = rebuild_model(&traj, &params, &g).unwrap();
        let energy: Vec<f64> = energy_profile_with(&traj, model.as_ref())
            .unwrap()
            .iter()
            .map(|e| e.total())
            .collect();
        let slack = 1e-3 * energy[0];
        let burn_in = config.n_steps / 10;
        for s in burn_in..energy.len() - 1 {
            assert!(
                energy[s + 1] <= energy[s] + slack,
                "step {s}: {} -> {}",
                energy[s],
                energy[s + 1]
            );
        }
    }
}

#[test]
fn simulations_are_deterministic() {
    let g = IdealGeometry::default();
    let data = random_chain(&mut seeded(5), 10);
    let config = SimConfig {
        seed: 99,
        ..SimConfig::default()
    };
    let a = simulate(&data, &PotentialParams::default(), &config, &g, "x").unwrap();
    let b = simulate(&data, &PotentialParams::default(), &config, &g, "x").unwrap();
    assert_eq!(a, b);
    let c = simulate(&data, &PotentialParams::default(), &SimConfig { seed: 100, ..config }, &g, "x").unwrap();
    assert_ne!(a, c);
}

#[test]
fn prior_mean_matches_mu_beta() {
    let config = SimConfig::default();
    let mut rng = seeded(41);
    let draws = 10_000;
    let n = 3;
    let mut sums = vec![0.0; 6 * n];
    for _ in 0..draws {
        let p = sample_prior(n, &config, &mut rng).unwrap();
        assert_eq!(p.flow_time, 0.0);
        for (k, z) in p.positions.iter().enumerate() {
            if AngularChain::slot_defined(n, k / 6, k % 6) {
                sums[k] += wrap_angle(z - config.mu_beta[k % 6]);
            } else {
                assert_eq!(*z, 0.0);
            }
        }
    }
    for (k, s) in sums.iter().enumerate() {
        if AngularChain::slot_defined(n, k / 6, k % 6) {
            let bias = s / draws as f64;
            assert!(bias.abs() < 3.0 * config.sigma_beta / (draws as f64).sqrt(), "slot {k}: {bias}");
        } else {
            assert_eq!(*s, 0.0);
        }
    }
}

#[test]
fn degenerate_prior_is_exact() {
    let config = SimConfig {
        sigma_beta: 0.0,
        sigma_v: 0.0,
        ..SimConfig::default()
    };
    let p = sample_prior(4, &config, &mut seeded(1)).unwrap();
    let expected = AngularChain::uniform(4, config.mu_beta).unwrap();
    assert_eq!(p.positions, expected.as_slice());
    assert!(p.velocities.iter().all(|v| *v == 0.0));
}

#[test]
fn beta_strand_prior_has_no_collisions() {
    let g = IdealGeometry::default();
    let config = SimConfig::default();
    let mut rng = seeded(2);
    for n in [10, 50, 116, 200] {
        let p = sample_prior(n, &config, &mut rng).unwrap();
        let ca = nerf_reconstruct(&p.angular_chain().unwrap(), &g).unwrap().ca_positions();
        assert_eq!(collision_count(&ca, 4.0, 1), 0, "length {n}");
    }
}

fn small_trajectory() -> Trajectory {
    let g = IdealGeometry::default();
    let data = random_chain(&mut seeded(6), 6);
    let config = SimConfig {
        n_steps: 20,
        seed: 4,
        ..SimConfig::default()
    };
    simulate(&data, &PotentialParams::default(), &config, &g, "t").unwrap()
}

#[test]
fn transition_on_grid_and_midpoint() {
    let traj = small_trajectory();
    let mut rng = seeded(0);
    let s = sample_transition(&traj, traj.flow_time_of(7), 0.0, 0.0, &mut rng).unwrap();
    assert_eq!(s.positions, traj.states[7].positions);
    assert_eq!(s.velocities, traj.states[7].velocities);

    let t_mid = 0.5 * (traj.flow_time_of(7) + traj.flow_time_of(8));
    let m = sample_transition(&traj, t_mid, 0.0, 0.0, &mut rng).unwrap();
    for k in 0..m.positions.len() {
        let (a, b) = (traj.states[7].positions[k], traj.states[8].positions[k]);
        assert!((wrap_angle(m.positions[k] - (a + 0.5 * wrap_angle(b - a)))).abs() < 1e-12);
        let (va, vb) = (traj.states[7].velocities[k], traj.states[8].velocities[k]);
        assert!((m.velocities[k] - 0.5 * (va + vb)).abs() < 1e-12);
    }
}

#[test]
fn transition_noise_has_the_requested_spread() {
    let traj = small_trajectory();
    let mut rng = seeded(9);
    let t = 0.43;
    let mean = sample_transition(&traj, t, 0.0, 0.0, &mut rng).unwrap();
    let draws = 10_000;
    let dim = mean.positions.len();
    let mut sq = vec![0.0; dim];
    let mut sqv = vec![0.0; dim];
    for _ in 0..draws {
        let s = sample_transition(&traj, t, 0.01, 0.05, &mut rng).unwrap();
        for k in 0..dim {
            sq[k] += wrap_angle(s.positions[k] - mean.positions[k]).powi(2);
            sqv[k] += (s.velocities[k] - mean.velocities[k]).powi(2);
        }
    }
    for k in 0..dim {
        if !AngularChain::slot_defined(6, k / 6, k % 6) {
            assert_eq!(sq[k], 0.0);
            continue;
        }
        let sd = (sq[k] / draws as f64).sqrt();
        let sdv = (sqv[k] / draws as f64).sqrt();
        assert!((sd / 0.01 - 1.0).abs() < 0.05, "slot {k}: {sd}");
        assert!((sdv / 0.05 - 1.0).abs() < 0.05, "slot {k}: {sdv}");
    }
}

#[test]
fn fixed_point_stays_put() {
    let g = IdealGeometry::default();
    let config = SimConfig {
        sigma_beta: 0.0,
        sigma_v: 0.0,
        n_steps: 10,
        ..SimConfig::default()
    };
    let target = angular_target(5, &config, &mut trajectory_rng(0)).unwrap();
    let params = PotentialParams {
        k2: 0.0,
        ..PotentialParams::default()
    };
    let traj = simulate(&target, &params, &config, &g, "fixed").unwrap();
    let model = AngularModel::new(target.clone(), params, g).unwrap();
    let energies = energy_profile_with(&traj, &model).unwrap();
    for (s, st) in traj.states.iter().enumerate() {
        assert_eq!(st.positions, target.as_slice());
        assert_eq!(energies[s].total(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_time_runs_from_one_to_zero(n_steps in 2usize..60, seed in any::<u64>()) {
        let g = IdealGeometry::default();
        let data = random_chain(&mut seeded(seed), 4);
        let config = SimConfig { n_steps, seed, ..SimConfig::default() };
        let traj = simulate(&data, &PotentialParams::default(), &config, &g, "p").unwrap();
        prop_assert_eq!(traj.states.len(), n_steps + 1);
        prop_assert_eq!(traj.states[0].flow_time, 1.0);
        prop_assert_eq!(traj.states[n_steps].flow_time, 0.0);
        for w in traj.states.windows(2) {
            prop_assert!(w[1].flow_time < w[0].flow_time);
        }
        for st in &traj.states {
            for (k, z) in st.positions.iter().enumerate() {
                prop_assert!(*z > -PI && *z <= PI);
                if !AngularChain::slot_defined(4, k / 6, k % 6) {
                    prop_assert_eq!(*z, 0.0);
                    prop_assert_eq!(st.velocities[k], 0.0);
                }
            }
        }
    }

    #[test]
    fn gradient_vanishes_on_masked_slots(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = seeded(seed);
        let z = random_chain(&mut rng, n);
        let t = random_chain(&mut rng, n);
        let g = IdealGeometry::default();
        let grad = grad_potential(&z, &t, &PotentialParams::default(), &g).unwrap();
        for (k, m) in z.mask().iter().enumerate() {
            if !m {
                prop_assert_eq!(grad[k], 0.0);
            }
        }
        let _ = Vec3::zeros();
    }
}
