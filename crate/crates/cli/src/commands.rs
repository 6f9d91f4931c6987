use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use tempfile::NamedTempFile;

use unfoldsim::backbone::{center_chain, extract_angles, nerf_reconstruct, AngularChain, IdealGeometry};
use unfoldsim::dynamics::{
    sample_transition, simulate, simulate_cartesian, trajectory_rng, Trajectory, Variant,
};
use unfoldsim::flow::{velocity_targets, VelocityMethod};
use unfoldsim::geometry::wrap_angle;
use unfoldsim::io::{
    angles_from_csv, angles_to_csv, bench_to_csv, encode_trajectory, parse_pdb_backbone,
    read_trajectory, trajectory_to_csv, write_pdb, RunConfig, MAGIC,
};
use unfoldsim::metrics::{energy_profile, kabsch_rmsd, runtime_benchmark, trajectory_collisions};

use crate::{Command, FormatArg, MethodArg, VariantArg};

pub const SEED_ENV: &str = "UNFOLDSIM_SEED";

/// Bad combination of arguments; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            input,
            config,
            out,
            variant,
            seed,
            jobs,
            format,
            chain,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.sim.seed = resolve_seed(seed, cfg.sim.seed)?;
            if let Some(v) = variant {
                cfg.sim.variant = match v {
                    VariantArg::Angular => Variant::Angular,
                    VariantArg::Cartesian => Variant::Cartesian,
                };
            }
            if let Some(j) = jobs {
                if j == 0 {
                    return Err(usage("--jobs must be positive"));
                }
                cfg.jobs = j;
            }
            run_simulate(&input, &out, &cfg, format, chain)
        }
        Command::Angles { pdb, out, chain } => {
            let coords = read_pdb(&pdb, chain)?;
            let angles = extract_angles(&coords)
                .with_context(|| format!("extracting angles from {}", pdb.display()))?;
            write_atomic(&out, angles_to_csv(&angles).as_bytes())
        }
        Command::Reconstruct { angles, out } => {
            let text = read_text(&angles)?;
            let chain = angles_from_csv(&text).with_context(|| format!("reading {}", angles.display()))?;
            let coords = nerf_reconstruct(&chain, &IdealGeometry::default())?;
            write_atomic(&out, write_pdb(&coords).as_bytes())
        }
        Command::Metrics {
            trajectory,
            collisions,
            energy,
            rmsd_against,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let traj = load_trajectory(&trajectory)?;
            let table = metrics_table(&traj, &cfg, collisions, energy, rmsd_against.as_deref())?;
            write_atomic(&out, table.as_bytes())
        }
        Command::FmTarget {
            trajectory,
            t,
            method,
            out,
        } => {
            let traj = load_trajectory(&trajectory)?;
            if !(0.0..=1.0).contains(&t) {
                return Err(usage(format!("--t must lie in [0, 1], got {t}")));
            }
            let method = match method {
                MethodArg::Spline => VelocityMethod::CubicSpline,
                MethodArg::Fd => VelocityMethod::FiniteDifference,
            };
            write_atomic(&out, fm_target_table(&traj, t, method)?.as_bytes())
        }
        Command::Validate { path } => validate(&path),
        Command::Bench {
            lengths,
            config,
            repeats,
            out,
        } => {
            if lengths.iter().any(|&n| n < 2) {
                return Err(usage("every length must be at least 2"));
            }
            let cfg = load_config(config.as_deref())?;
            let repeats = repeats.unwrap_or(cfg.bench_repeats);
            if repeats == 0 {
                return Err(usage("--repeats must be positive"));
            }
            let records = runtime_benchmark(
                &lengths,
                &cfg.params,
                &cfg.sim,
                &IdealGeometry::default(),
                repeats,
            )?;
            for r in &records {
                log::info!("length {}: median {:.4} s", r.n_residues, r.median_seconds);
            }
            write_atomic(&out, bench_to_csv(&records).as_bytes())
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_pdb(path: &Path, chain: Option<char>) -> Result<unfoldsim::BackboneCoords> {
    let text = read_text(path)?;
    parse_pdb_backbone(&text, chain).with_context(|| format!("parsing {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = read_text(p)?;
            RunConfig::parse(&text).with_context(|| format!("in config {}", p.display()))
        }
    }
}

fn load_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory(path).with_context(|| format!("reading trajectory {}", path.display()))
}

/// Flag, then environment, then config file.
fn resolve_seed(flag: Option<u64>, from_config: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(from_config),
    }
}

/// Writes through a temporary file in the target directory, then renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn simulate_one(pdb: &Path, cfg: &RunConfig, chain: Option<char>) -> Result<Trajectory> {
    let coords = read_pdb(pdb, chain)?;
    let geom = IdealGeometry::default();
    let source_id = pdb
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let traj = match cfg.sim.variant {
        Variant::Angular => {
            let angles = extract_angles(&coords)?;
            simulate(&angles, &cfg.params, &cfg.sim, &geom, &source_id)?
        }
        Variant::Cartesian => {
            simulate_cartesian(&center_chain(&coords), &cfg.params, &cfg.sim, &geom, &source_id)?
        }
    };
    Ok(traj)
}

fn encode(traj: &Trajectory, format: FormatArg) -> Result<Vec<u8>> {
    Ok(match format {
        FormatArg::Binary => encode_trajectory(traj)?,
        FormatArg::Csv => trajectory_to_csv(traj).into_bytes(),
    })
}

fn run_simulate(
    input: &Path,
    out: &Path,
    cfg: &RunConfig,
    format: FormatArg,
    chain: Option<char>,
) -> Result<()> {
    if !input.is_dir() {
        if out.is_dir() {
            return Err(usage(format!(
                "{} is a directory; give an output file for a single input",
                out.display()
            )));
        }
        let traj = simulate_one(input, cfg, chain)
            .with_context(|| format!("simulating {}", input.display()))?;
        return write_atomic(out, &encode(&traj, format)?);
    }

    if out.exists() && !out.is_dir() {
        return Err(usage(format!(
            "{} exists and is not a directory",
            out.display()
        )));
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut inputs: Vec<PathBuf> = fs::read_dir(input)
        .with_context(|| format!("listing {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pdb")))
        .collect();
    inputs.sort();
    if inputs.is_empty() {
        bail!("no .pdb files in {}", input.display());
    }
    let ext = match format {
        FormatArg::Binary => "uftr",
        FormatArg::Csv => "csv",
    };
    let next = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    let workers = cfg.jobs.min(inputs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(pdb) = inputs.get(i) else { break };
                let stem = pdb.file_stem().unwrap_or_default().to_string_lossy();
                let target = out.join(format!("{stem}.{ext}"));
                let result = simulate_one(pdb, cfg, chain)
                    .and_then(|t| encode(&t, format))
                    .and_then(|bytes| write_atomic(&target, &bytes));
                match result {
                    Ok(()) => log::info!("wrote {}", target.display()),
                    Err(e) => failures
                        .lock()
                        .expect("worker panicked")
                        .push(format!("{}: {e:#}", pdb.display())),
                }
            });
        }
    });
    let failures = failures.into_inner().expect("worker panicked");
    if !failures.is_empty() {
        bail!(
            "{} of {} inputs failed:\n  {}",
            failures.len(),
            inputs.len(),
            failures.join("\n  ")
        );
    }
    Ok(())
}

/// The file does not carry the target mean, integrator or repulsion settings; take
/// them from the run config.
fn with_unstored_settings(traj: &Trajectory, cfg: &RunConfig) -> Trajectory {
    let mut t = traj.clone();
    t.config.mu_beta = cfg.sim.mu_beta;
    t.config.integrator = cfg.sim.integrator;
    t.config.align_cartesian_target = cfg.sim.align_cartesian_target;
    t.params.wrap_target = cfg.params.wrap_target;
    t.params.repulsion_atoms = cfg.params.repulsion_atoms;
    t
}

fn metrics_table(
    traj: &Trajectory,
    cfg: &RunConfig,
    collisions: bool,
    energy: bool,
    rmsd_against: Option<&Path>,
) -> Result<String> {
    let geom = IdealGeometry::default();
    let traj = with_unstored_settings(traj, cfg);
    let collisions = collisions || (!energy && rmsd_against.is_none());
    let mut header = vec!["step"];
    let counts = if collisions {
        header.push("collisions");
        Some(trajectory_collisions(&traj, cfg.collision_threshold, cfg.collision_window, &geom)?.counts)
    } else {
        None
    };
    let energies = if energy {
        header.extend(["flow_time", "potential", "kinetic", "total"]);
        Some(energy_profile(&traj, &traj.params, &geom)?)
    } else {
        None
    };
    let rmsds = match rmsd_against {
        Some(p) => {
            header.push("rmsd");
            let reference = read_pdb(p, None)?.ca_positions();
            let track = unfoldsim::flow::ca_track(&traj, &geom)?;
            Some(
                track
                    .iter()
                    .map(|ca| kabsch_rmsd(ca, &reference))
                    .collect::<unfoldsim::Result<Vec<_>>>()
                    .with_context(|| format!("comparing against {}", p.display()))?,
            )
        }
        None => None,
    };

    let mut out = header.join(",");
    out.push('\n');
    for s in 0..traj.states.len() {
        write!(out, "{s}")?;
        if let Some(c) = &counts {
            write!(out, ",{}", c[s])?;
        }
        if let Some(e) = &energies {
            let e = e[s];
            write!(
                out,
                ",{:.16e},{:.16e},{:.16e},{:.16e}",
                e.flow_time,
                e.potential,
                e.kinetic,
                e.total()
            )?;
        }
        if let Some(r) = &rmsds {
            write!(out, ",{:.16e}", r[s])?;
        }
        out.push('\n');
    }
    Ok(out)
}

fn fm_target_table(traj: &Trajectory, t: f64, method: VelocityMethod) -> Result<String> {
    let geom = IdealGeometry::default();
    let mut rng = trajectory_rng(traj.config.seed);
    let state = sample_transition(traj, t, 0.0, 0.0, &mut rng)?;
    let ca: Vec<unfoldsim::Vec3> = match traj.variant {
        Variant::Angular => nerf_reconstruct(&state.angular_chain()?, &geom)?.ca_positions(),
        Variant::Cartesian => state
            .positions
            .chunks_exact(3)
            .map(|c| unfoldsim::Vec3::new(c[0], c[1], c[2]))
            .collect(),
    };
    let targets = velocity_targets(traj, t, method, &geom)?;
    let mut out = String::from("residue,t,x,y,z,vx,vy,vz,wx,wy,wz\n");
    for (i, (x, v)) in ca.iter().zip(&targets.translation_velocity).enumerate() {
        write!(
            out,
            "{i},{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            x.x, x.y, x.z, v.x, v.y, v.z
        )?;
        match &targets.rotation_velocity {
            Some(w) => {
                let w = w[i].as_vec();
                writeln!(out, ",{:.16e},{:.16e},{:.16e}", w.x, w.y, w.z)?;
            }
            None => out.push_str(",,,\n"),
        }
    }
    Ok(out)
}

fn validate(path: &Path) -> Result<()> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(MAGIC) {
        let traj = read_trajectory(path).with_context(|| format!("validating {}", path.display()))?;
        validate_trajectory(&traj).with_context(|| format!("validating {}", path.display()))?;
        println!(
            "ok: trajectory, {} residues, {} steps, variant {:?}",
            traj.n_residues,
            traj.n_steps(),
            traj.variant
        );
        return Ok(());
    }
    let text = String::from_utf8(bytes)
        .map_err(|_| anyhow::anyhow!("{} is neither a trajectory nor a text PDB", path.display()))?;
    let coords = parse_pdb_backbone(&text, None).with_context(|| format!("parsing {}", path.display()))?;
    let angles = extract_angles(&coords).with_context(|| format!("validating {}", path.display()))?;
    let rebuilt = extract_angles(&nerf_reconstruct(&angles, &IdealGeometry::default())?)?;
    let worst = max_angle_deviation(&angles, &rebuilt);
    if worst > 1e-6 {
        bail!("angle round trip deviates by {worst:.3e} rad");
    }
    println!(
        "ok: pdb, {} residues, angle round trip within {worst:.1e} rad",
        coords.len()
    );
    Ok(())
}

fn max_angle_deviation(a: &AngularChain, b: &AngularChain) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| wrap_angle(x - y).abs())
        .fold(0.0, f64::max)
}

fn validate_trajectory(traj: &Trajectory) -> Result<()> {
    traj.validate()?;
    if traj.variant == Variant::Angular {
        let n = traj.n_residues;
        for (s, st) in traj.states.iter().enumerate() {
            for (k, (z, v)) in st.positions.iter().zip(&st.velocities).enumerate() {
                if !AngularChain::slot_defined(n, k / 6, k % 6) {
                    if *z != 0.0 || *v != 0.0 {
                        bail!("state {s}: undefined slot {k} is not zero");
                    }
                } else if !(*z > -std::f64::consts::PI && *z <= std::f64::consts::PI) {
                    bail!("state {s}: angle slot {k} = {z} outside (-pi, pi]");
                }
            }
        }
        nerf_reconstruct(&traj.states[0].angular_chain()?, &IdealGeometry::default())?;
    }
    Ok(())
}
