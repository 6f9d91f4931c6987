//! Flat `key = value` run configuration.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::dynamics::{Integrator, PotentialParams, RepulsionAtoms, SimConfig, Variant};
use crate::error::{Error, Result};
use crate::flow::{DEFAULT_DISTOGRAM_THRESHOLD, DEFAULT_LAMBDA};
use crate::metrics::{DEFAULT_COLLISION_THRESHOLD, DEFAULT_COLLISION_WINDOW};

/// Every recognised key, in the order they are written out.
pub const KEYS: [&str; 21] = [
    "n_steps",
    "sigma_beta",
    "sigma_v",
    "sigma_z",
    "seed",
    "variant",
    "integrator",
    "mu_beta",
    "align_cartesian_target",
    "k1",
    "k2",
    "gamma",
    "epsilon",
    "wrap_target",
    "repulsion_atoms",
    "collision_threshold",
    "collision_window",
    "distogram_threshold",
    "lambda",
    "bench_repeats",
    "jobs",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub params: PotentialParams,
    pub collision_threshold: f64,
    pub collision_window: usize,
    pub distogram_threshold: f64,
    pub lambda: f64,
    pub bench_repeats: usize,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sim: SimConfig::default(),
            params: PotentialParams::default(),
            collision_threshold: DEFAULT_COLLISION_THRESHOLD,
            collision_window: DEFAULT_COLLISION_WINDOW,
            distogram_threshold: DEFAULT_DISTOGRAM_THRESHOLD,
            lambda: DEFAULT_LAMBDA,
            bench_repeats: 3,
            jobs: 1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        reason: format!("cannot parse {value:?} for {key}"),
    })
}

fn parse_bool(value: &str, line: usize, key: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config {
            line,
            reason: format!("{key} must be true or false, got {value:?}"),
        }),
    }
}

pub fn parse_variant(value: &str) -> Option<Variant> {
    match value {
        "angular" => Some(Variant::Angular),
        "cartesian" => Some(Variant::Cartesian),
        _ => None,
    }
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Angular => "angular",
        Variant::Cartesian => "cartesian",
    }
}

impl RunConfig {
    /// Parses the text form. Keys left out keep their defaults and are reported once
    /// through the logger.
    pub fn parse(text: &str) -> Result<Self> {
        let (cfg, defaulted) = Self::parse_reporting(text)?;
        if !defaulted.is_empty() {
            log::info!("config keys using defaults: {}", defaulted.join(", "));
        }
        Ok(cfg)
    }

    /// Like [`RunConfig::parse`], returning the defaulted keys instead of logging them.
    pub fn parse_reporting(text: &str) -> Result<(Self, Vec<&'static str>)> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                reason: format!("expected key = value, got {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let Some(known) = KEYS.iter().find(|k| **k == key) else {
                return Err(Error::Config {
                    line,
                    reason: format!("unknown key {key:?}"),
                });
            };
            if !seen.insert(*known) {
                return Err(Error::Config {
                    line,
                    reason: format!("duplicate key {key:?}"),
                });
            }
            cfg.set(key, value, line)?;
        }
        cfg.validate().map_err(|e| Error::Config {
            line: 0,
            reason: e.to_string(),
        })?;
        let defaulted = KEYS.iter().copied().filter(|k| !seen.contains(k)).collect();
        Ok((cfg, defaulted))
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let s = &mut self.sim;
        let p = &mut self.params;
        match key {
            "n_steps" => s.n_steps = parse_num(value, line, key)?,
            "sigma_beta" => s.sigma_beta = parse_num(value, line, key)?,
            "sigma_v" => s.sigma_v = parse_num(value, line, key)?,
            "sigma_z" => s.sigma_z = parse_num(value, line, key)?,
            "seed" => s.seed = parse_num(value, line, key)?,
            "variant" => {
                s.variant = parse_variant(value).ok_or_else(|| Error::Config {
                    line,
                    reason: format!("variant must be angular or cartesian, got {value:?}"),
                })?
            }
            "integrator" => {
                s.integrator = match value {
                    "explicit_euler" => Integrator::ExplicitEuler,
                    "semi_implicit_euler" => Integrator::SemiImplicitEuler,
                    _ => {
                        return Err(Error::Config {
                            line,
                            reason: format!(
                                "integrator must be explicit_euler or semi_implicit_euler, got {value:?}"
                            ),
                        })
                    }
                }
            }
            "mu_beta" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|v| parse_num(v.trim(), line, key))
                    .collect::<Result<_>>()?;
                s.mu_beta = parts.try_into().map_err(|_| Error::Config {
                    line,
                    reason: "mu_beta needs six comma-separated angles in radians".into(),
                })?;
            }
            "align_cartesian_target" => s.align_cartesian_target = parse_bool(value, line, key)?,
            "k1" => p.k1 = parse_num(value, line, key)?,
            "k2" => p.k2 = parse_num(value, line, key)?,
            "gamma" => p.gamma = parse_num(value, line, key)?,
            "epsilon" => p.epsilon = parse_num(value, line, key)?,
            "wrap_target" => p.wrap_target = parse_bool(value, line, key)?,
            "repulsion_atoms" => {
                p.repulsion_atoms = match value {
                    "ca" => RepulsionAtoms::CaOnly,
                    "backbone" => RepulsionAtoms::Backbone,
                    _ => {
                        return Err(Error::Config {
                            line,
                            reason: format!("repulsion_atoms must be ca or backbone, got {value:?}"),
                        })
                    }
                }
            }
            "collision_threshold" => self.collision_threshold = parse_num(value, line, key)?,
            "collision_window" => self.collision_window = parse_num(value, line, key)?,
            "distogram_threshold" => self.distogram_threshold = parse_num(value, line, key)?,
            "lambda" => self.lambda = parse_num(value, line, key)?,
            "bench_repeats" => self.bench_repeats = parse_num(value, line, key)?,
            "jobs" => self.jobs = parse_num(value, line, key)?,
            _ => unreachable!("key checked against KEYS"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.params.validate()?;
        if !(self.collision_threshold > 0.0) || self.collision_window < 1 {
            return Err(Error::InvalidParameter(
                "collision_threshold must be positive and collision_window at least 1".into(),
            ));
        }
        if !(self.distogram_threshold > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(
                "distogram_threshold must be positive and lambda non-negative".into(),
            ));
        }
        if self.bench_repeats == 0 || self.jobs == 0 {
            return Err(Error::InvalidParameter(
                "bench_repeats and jobs must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Text form with every key; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let s = &self.sim;
        let p = &self.params;
        let mu: Vec<String> = s.mu_beta.iter().map(|a| format!("{a:?}")).collect();
        let mut out = String::new();
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("infallible");
        put("n_steps", s.n_steps.to_string());
        put("sigma_beta", format!("{:?}", s.sigma_beta));
        put("sigma_v", format!("{:?}", s.sigma_v));
        put("sigma_z", format!("{:?}", s.sigma_z));
        put("seed", s.seed.to_string());
        put("variant", variant_name(s.variant).into());
        put(
            "integrator",
            match s.integrator {
                Integrator::ExplicitEuler => "explicit_euler",
                Integrator::SemiImplicitEuler => "semi_implicit_euler",
            }
            .into(),
        );
        put("mu_beta", mu.join(","));
        put("align_cartesian_target", s.align_cartesian_target.to_string());
        put("k1", format!("{:?}", p.k1));
        put("k2", format!("{:?}", p.k2));
        put("gamma", format!("{:?}", p.gamma));
        put("epsilon", format!("{:?}", p.epsilon));
        put("wrap_target", p.wrap_target.to_string());
        put(
            "repulsion_atoms",
            match p.repulsion_atoms {
                RepulsionAtoms::CaOnly => "ca",
                RepulsionAtoms::Backbone => "backbone",
            }
            .into(),
        );
        put("collision_threshold", format!("{:?}", self.collision_threshold));
        put("collision_window", self.collision_window.to_string());
        put("distogram_threshold", format!("{:?}", self.distogram_threshold));
        put("lambda", format!("{:?}", self.lambda));
        put("bench_repeats", self.bench_repeats.to_string());
        put("jobs", self.jobs.to_string());
        out
    }
}
