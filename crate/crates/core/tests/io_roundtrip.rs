mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_chain, random_coords};
use unfoldsim::backbone::{extract_angles, nerf_reconstruct, AngularChain, IdealGeometry};
use unfoldsim::dynamics::{simulate, simulate_cartesian, PhaseState, PotentialParams, SimConfig};
use unfoldsim::io::{
    angles_from_csv, angles_to_csv, decode_trajectory, encode_trajectory, parse_pdb_backbone,
    read_trajectory, write_pdb, write_trajectory, RunConfig, CONFIG_KEYS, FORMAT_VERSION,
};
use unfoldsim::{Error, Trajectory, Variant};

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Arbitrary payloads, including values a simulation would never produce.
fn random_raw_trajectory(rng: &mut ChaCha8Rng) -> Trajectory {
    let variant = if rng.random_bool(0.5) {
        Variant::Angular
    } else {
        Variant::Cartesian
    };
    let n_res = rng.random_range(1..20);
    let n_steps = rng.random_range(1..15);
    let config = SimConfig {
        n_steps,
        variant,
        seed: rng.random(),
        sigma_beta: rng.random_range(0.0..0.1),
        sigma_v: rng.random_range(0.0..1.0),
        sigma_z: rng.random_range(0.0..0.1),
        ..SimConfig::default()
    };
    let params = PotentialParams {
        k1: rng.random_range(0.0..10.0),
        k2: rng.random_range(0.0..10.0),
        gamma: rng.random_range(0.0..5.0),
        epsilon: rng.random_range(1e-9..1e-3),
        ..PotentialParams::default()
    };
    let dim = n_res * variant.width();
    let mask = AngularChain::mask_for(n_res);
    let specials = [-0.0, f64::MIN_POSITIVE, 5e-324, 1e300, -1e-300];
    let value = |k: usize, rng: &mut ChaCha8Rng| {
        if variant == Variant::Angular && !mask[k] {
            return 0.0;
        }
        if rng.random_bool(0.05) {
            specials[rng.random_range(0..specials.len())]
        } else if variant == Variant::Angular {
            rng.random_range(-3.0..3.0)
        } else {
            rng.random_range(-50.0..50.0)
        }
    };
    let states = (0..=n_steps)
        .map(|s| {
            let t = if s == n_steps { 0.0 } else { 1.0 - s as f64 / n_steps as f64 };
            let pos = (0..dim).map(|k| value(k, rng)).collect();
            let vel = (0..dim).map(|k| value(k, rng)).collect();
            PhaseState::new(pos, vel, t).unwrap()
        })
        .collect();
    let source_id: String = (0..rng.random_range(0..12))
        .map(|_| ['a', 'ß', '7', '/', '漢', ' '][rng.random_range(0..6)])
        .collect();
    Trajectory {
        variant,
        n_residues: n_res,
        config,
        params,
        source_id,
        states,
    }
}

fn assert_bitwise_equal(a: &Trajectory, b: &Trajectory) {
    assert_eq!(a.variant, b.variant);
    assert_eq!(a.n_residues, b.n_residues);
    assert_eq!(a.source_id, b.source_id);
    assert_eq!(a.config.seed, b.config.seed);
    assert_eq!(a.states.len(), b.states.len());
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.flow_time.to_bits(), y.flow_time.to_bits());
        for (p, q) in x.positions.iter().zip(&y.positions) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
        for (p, q) in x.velocities.iter().zip(&y.velocities) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
    }
    for (p, q) in [
        (a.params.k1, b.params.k1),
        (a.params.k2, b.params.k2),
        (a.params.gamma, b.params.gamma),
        (a.params.epsilon, b.params.epsilon),
        (a.config.sigma_beta, b.config.sigma_beta),
        (a.config.sigma_v, b.config.sigma_v),
        (a.config.sigma_z, b.config.sigma_z),
    ] {
        assert_eq!(p.to_bits(), q.to_bits());
    }
}

#[test]
fn fifty_random_trajectories_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded(90);
    let g = IdealGeometry::default();
    for i in 0..50 {
        let traj = match i % 3 {
            0 => random_raw_trajectory(&mut rng),
            1 => {
                let n = rng.random_range(2..12);
                let config = SimConfig {
                    n_steps: rng.random_range(2..30),
                    seed: rng.random(),
                    ..SimConfig::default()
                };
                simulate(&random_chain(&mut rng, n), &PotentialParams::default(), &config, &g, "sim").unwrap()
            }
            _ => {
                let n = rng.random_range(3..12);
                let config = SimConfig {
                    n_steps: rng.random_range(2..30),
                    seed: rng.random(),
                    variant: Variant::Cartesian,
                    ..SimConfig::default()
                };
                simulate_cartesian(&random_coords(&mut rng, n), &PotentialParams::default(), &config, &g, "cart").unwrap()
            }
        };
        let path = dir.path().join(format!("t{i}.uftr"));
        write_trajectory(&traj, &path).unwrap();
        let back = read_trajectory(&path).unwrap();
        assert_bitwise_equal(&traj, &back);
        assert_eq!(encode_trajectory(&back).unwrap(), std::fs::read(&path).unwrap());
    }
}

fn sample_bytes() -> Vec<u8> {
    let mut rng = seeded(91);
    let g = IdealGeometry::default();
    let config = SimConfig {
        n_steps: 8,
        ..SimConfig::default()
    };
    let traj = simulate(&random_chain(&mut rng, 5), &PotentialParams::default(), &config, &g, "c").unwrap();
    encode_trajectory(&traj).unwrap()
}

#[test]
fn bit_flips_in_checked_regions_fail_closed() {
    let bytes = sample_bytes();
    // magic, version, variant, sizes and dt are structural; the body and footer are
    // covered by the checksum
    let structural = 0..23;
    let source_len = u32::from_le_bytes(bytes[79..83].try_into().unwrap()) as usize;
    let body = 83 + source_len..bytes.len();
    for i in structural.chain(body) {
        let mut bad = bytes.clone();
        bad[i] ^= 0x10;
        match decode_trajectory(&bad) {
            Err(Error::CorruptFile { .. }) | Err(Error::UnsupportedVersion { .. }) => {}
            Ok(_) => panic!("flip at byte {i} decoded"),
            Err(e) => panic!("flip at byte {i} gave {e}"),
        }
    }
}

#[test]
fn header_values_are_stored_verbatim() {
    // seed and parameters sit outside the checksum; a flip there changes the value read
    let bytes = sample_bytes();
    let mut bad = bytes.clone();
    bad[23] ^= 0x01;
    let a = decode_trajectory(&bytes).unwrap();
    let b = decode_trajectory(&bad).unwrap();
    assert_eq!(a.config.seed ^ 1, b.config.seed);
    assert_eq!(a.states, b.states);
}

#[test]
fn truncation_fails_closed() {
    let bytes = sample_bytes();
    for len in (0..bytes.len()).step_by(7).chain([bytes.len() - 1]) {
        assert!(
            matches!(decode_trajectory(&bytes[..len]), Err(Error::CorruptFile { .. })),
            "length {len}"
        );
    }
    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(decode_trajectory(&long), Err(Error::CorruptFile { .. })));
}

#[test]
fn newer_version_is_named_in_the_error() {
    let mut bytes = sample_bytes();
    bytes[4..6].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    match decode_trajectory(&bytes) {
        Err(Error::UnsupportedVersion { found, supported }) => {
            assert_eq!(found, FORMAT_VERSION + 1);
            assert_eq!(supported, FORMAT_VERSION);
            let msg = Error::UnsupportedVersion { found, supported }.to_string();
            assert!(msg.contains(&found.to_string()) && msg.contains(&supported.to_string()));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_trajectory(&dir.path().join("nope.uftr")), Err(Error::Io(_))));
}

const FIXTURE: &str = "\
HEADER    TEST FIXTURE
ATOM      1  N   ALA A   1      11.104   6.134  -6.504  1.00  0.00           N
ATOM      2  CA  ALA A   1      11.639   6.071  -5.147  1.00  0.00           C
ATOM      3  C   ALA A   1      13.144   5.877  -5.157  1.00  0.00           C
ATOM      4  O   ALA A   1      13.714   5.440  -6.161  1.00  0.00           O
ATOM      5  CB  ALA A   1      11.299   7.323  -4.349  1.00  0.00           C
ATOM      6  N   GLY A   2      13.789   6.209  -4.040  1.00  0.00           N
ATOM      7  CA  GLY A   2      15.228   6.052  -3.935  1.00  0.00           C
ATOM      8  C   GLY A   2      15.709   4.638  -3.656  1.00  0.00           C
ATOM      9  O   GLY A   2      14.917   3.718  -3.466  1.00  0.00           O
TER
END
";

#[test]
fn fixture_parses_to_exact_coordinates() {
    let c = parse_pdb_backbone(FIXTURE, None).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(c.residues[0].n, unfoldsim::Vec3::new(11.104, 6.134, -6.504));
    assert_eq!(c.residues[1].o, unfoldsim::Vec3::new(14.917, 3.718, -3.466));
    let z = extract_angles(&c).unwrap();
    assert_eq!(z.len(), 2);
}

#[test]
fn pdb_errors_name_the_line() {
    let missing = FIXTURE.replace("ATOM      9  O   GLY A   2      14.917   3.718  -3.466  1.00  0.00           O\n", "");
    assert!(matches!(
        parse_pdb_backbone(&missing, None),
        Err(Error::IncompleteResidue { index: 1, .. })
    ));
    let garbled = FIXTURE.replace("13.789", "13.7x9");
    assert!(matches!(parse_pdb_backbone(&garbled, None), Err(Error::MalformedRecord { line: 7, .. })));
    let het = "HETATM    1  O   HOH A   1       1.000   2.000   3.000  1.00  0.00           O\nEND\n";
    assert!(matches!(parse_pdb_backbone(het, None), Err(Error::EmptyChain)));
    assert!(matches!(parse_pdb_backbone(FIXTURE, Some('B')), Err(Error::EmptyChain)));
}

#[test]
fn written_pdb_reads_back_to_the_millinagstrom() {
    let mut rng = seeded(92);
    let g = IdealGeometry::default();
    for n in [2usize, 9, 40] {
        let c = nerf_reconstruct(&random_chain(&mut rng, n), &g).unwrap();
        let back = parse_pdb_backbone(&write_pdb(&c), None).unwrap();
        for (a, b) in c.all_atoms().iter().zip(back.all_atoms()) {
            assert!((a - b).amax() <= 5e-4 + 1e-12);
        }
    }
}

#[test]
fn angle_tables_round_trip_exactly() {
    let mut rng = seeded(93);
    for n in [2usize, 3, 33] {
        let z = random_chain(&mut rng, n);
        let text = angles_to_csv(&z);
        assert_eq!(angles_from_csv(&text).unwrap(), z);
        assert!(!text.contains('\r'));
    }
    assert!(matches!(
        angles_from_csv("residue,phi,psi,omega,theta1,theta2,theta3\n0,1,2,3,oops,5,6\n"),
        Err(Error::MalformedRecord { line: 2, .. })
    ));
}

#[test]
fn config_text_round_trips_and_rejects_unknown_keys() {
    let cfg = RunConfig::parse("seed = 5\nk2 = 2.5 # stronger repulsion\nvariant = cartesian\n").unwrap();
    assert_eq!(cfg.sim.seed, 5);
    assert_eq!(cfg.params.k2, 2.5);
    assert_eq!(cfg.sim.variant, Variant::Cartesian);
    assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    let (_, defaulted) = RunConfig::parse_reporting(&cfg.to_text()).unwrap();
    assert!(defaulted.is_empty());
    let (_, defaulted) = RunConfig::parse_reporting("").unwrap();
    assert_eq!(defaulted.len(), CONFIG_KEYS.len());
    assert!(matches!(RunConfig::parse("seed = 1\nbogus = 2\n"), Err(Error::Config { line: 2, .. })));
    assert!(matches!(RunConfig::parse("seed = 1\nseed = 2\n"), Err(Error::Config { line: 2, .. })));
    assert!(matches!(RunConfig::parse("k1 = fast\n"), Err(Error::Config { line: 1, .. })));
}
