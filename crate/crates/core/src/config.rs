//! Scenario documents, validation, and built-in presets.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cbt::GroupPartition;
use crate::collision::PotentialParams;
use crate::dynamics::{RobotParams, RobotState};
use crate::error::{Error, Result};
use crate::reference::CentroidTrajectory;
use crate::sim::{IntegratorSettings, Scheme};
use crate::smc::{BlockGains, ControllerGains};

pub const CONFIG_VERSION: u32 = 1;

/// Starting poses of the robots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConditions {
    Explicit { states: Vec<RobotState> },
    /// Formation basis shifted by `offset`, each robot moved by a uniform
    /// draw from a disk of radius `jitter`. Robots start at rest.
    BasisPlusOffset {
        offset: [f64; 2],
        jitter: f64,
        heading: f64,
    },
    /// Positions uniform in a disk, headings uniform, at rest.
    Random { center: [f64; 2], radius: f64 },
}

/// Desired formation geometry `ξ`, one planar point per robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Formation {
    /// Three equilateral triangles of side `b` whose centroids form an
    /// equilateral triangle of side `a`. Requires the partition `[3, 3, 3]`.
    NestedTriangles { a: f64, b: f64 },
    Explicit { basis: Vec<[f64; 2]> },
}

impl Formation {
    /// Stacked basis of length `2n`.
    pub fn basis(&self, partition: &GroupPartition) -> Result<DVector<f64>> {
        match self {
            Formation::NestedTriangles { a, b } => {
                if partition.sizes() != [3, 3, 3] {
                    return Err(Error::config(
                        "formation",
                        "nested_triangles requires the partition [3, 3, 3]",
                    ));
                }
                if !(a.is_finite() && *a > 0.0 && b.is_finite() && *b > 0.0) {
                    return Err(Error::config("formation", "sides a and b must be finite and > 0"));
                }
                Ok(DVector::from_vec(nested_triangles(*a, *b)))
            }
            Formation::Explicit { basis } => {
                if basis.len() != partition.robots() {
                    return Err(Error::config(
                        "formation.basis",
                        format!("{} points for {} robots", basis.len(), partition.robots()),
                    ));
                }
                if basis.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::config("formation.basis", "coordinates must be finite"));
                }
                Ok(DVector::from_vec(basis.iter().flatten().copied().collect()))
            }
        }
    }
}

fn nested_triangles(a: f64, b: f64) -> Vec<f64> {
    let r3 = 3f64.sqrt();
    let low = -r3 * a / 6.0;
    let top = r3 * a / 3.0;
    vec![
        a / 2.0 + b / 2.0,
        low - r3 * b / 6.0,
        a / 2.0 - b / 2.0,
        low - r3 * b / 6.0,
        a / 2.0,
        low + r3 * b / 3.0,
        -a / 2.0 + b / 2.0,
        low - r3 * b / 6.0,
        -a / 2.0 - b / 2.0,
        low - r3 * b / 6.0,
        -a / 2.0,
        low + r3 * b / 3.0,
        b / 2.0,
        top - r3 * b / 6.0,
        -b / 2.0,
        top - r3 * b / 6.0,
        0.0,
        top + r3 * b / 3.0,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionSettings {
    pub enabled: bool,
    /// Run even when the reaching gains fail the collision-mode condition.
    #[serde(default)]
    pub override_gain_check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSettings {
    /// Threshold on block norms, in m.
    pub tolerance: f64,
    /// A crossing counts once the norm stays below the threshold this long (s).
    pub hold: f64,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self {
            tolerance: 0.05,
            hold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    pub directory: String,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            directory: "out".into(),
        }
    }
}

/// A complete, versioned scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub name: String,
    /// Seed for randomized initial conditions.
    pub seed: u64,
    pub partition: GroupPartition,
    pub robots: Vec<RobotParams>,
    pub initial_conditions: InitialConditions,
    pub formation: Formation,
    pub trajectory: CentroidTrajectory,
    pub gains: ControllerGains,
    pub potential: PotentialParams,
    pub collision: CollisionSettings,
    pub integrator: IntegratorSettings,
    pub convergence: ConvergenceSettings,
    pub outputs: OutputSettings,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        self.partition.validate()?;
        let n = self.partition.robots();
        if self.robots.len() != n {
            return Err(Error::config(
                "robots",
                format!("{} entries for {n} robots in the partition", self.robots.len()),
            ));
        }
        for (i, r) in self.robots.iter().enumerate() {
            r.validate(&format!("robots[{i}]"))?;
        }
        self.formation.basis(&self.partition)?;
        self.initial_states()?;
        self.gains.validate()?;
        self.potential.validate()?;
        self.integrator.validate()?;
        self.trajectory.validate(self.integrator.duration)?;
        let c = &self.convergence;
        if !(c.tolerance.is_finite() && c.tolerance > 0.0) {
            return Err(Error::config("convergence.tolerance", "must be finite and > 0"));
        }
        if !(c.hold.is_finite() && c.hold >= 0.0) {
            return Err(Error::config("convergence.hold", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Resolves the initial conditions; deterministic for a given seed.
    pub fn initial_states(&self) -> Result<Vec<RobotState>> {
        let n = self.partition.robots();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        match &self.initial_conditions {
            InitialConditions::Explicit { states } => {
                if states.len() != n {
                    return Err(Error::config(
                        "initial_conditions.states",
                        format!("{} states for {n} robots", states.len()),
                    ));
                }
                if let Some(i) = states.iter().position(|s| !s.is_finite()) {
                    return Err(Error::config(
                        format!("initial_conditions.states[{i}]"),
                        "entries must be finite",
                    ));
                }
                Ok(states.clone())
            }
            InitialConditions::BasisPlusOffset { offset, jitter, heading } => {
                if !(jitter.is_finite() && *jitter >= 0.0) || !heading.is_finite() {
                    return Err(Error::config(
                        "initial_conditions",
                        "jitter must be >= 0 and heading finite",
                    ));
                }
                let basis = self.formation.basis(&self.partition)?;
                Ok((0..n)
                    .map(|i| {
                        let p = Vector2::new(basis[2 * i] + offset[0], basis[2 * i + 1] + offset[1]);
                        RobotState::at_rest(p + disk_sample(&mut rng, *jitter), *heading)
                    })
                    .collect())
            }
            InitialConditions::Random { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::config("initial_conditions.radius", "must be finite and > 0"));
                }
                let c = Vector2::new(center[0], center[1]);
                Ok((0..n)
                    .map(|_| {
                        let p = c + disk_sample(&mut rng, *radius);
                        RobotState::at_rest(p, rng.gen_range(-PI..PI))
                    })
                    .collect())
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn disk_sample(rng: &mut ChaCha8Rng, radius: f64) -> Vector2<f64> {
    if radius == 0.0 {
        return Vector2::zeros();
    }
    let r = radius * rng.gen::<f64>().sqrt();
    let a = rng.gen_range(-PI..PI);
    Vector2::new(r * a.cos(), r * a.sin())
}

/// Reads and validates a scenario document.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_json(&text)
}

pub const PRESETS: [&str; 2] = ["paper_3x3", "head_on"];

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "paper_3x3" => Some(preset_paper_scenario()),
        "head_on" => Some(preset_head_on()),
        _ => None,
    }
}

/// Nine robots in three triangular groups (`b = 7 m`, `a = 20 m`) tracking
/// `z_c = [t; 30·sin(0.1·t)]` with `s = r = c = 1`, `δ = 1`, `ε₁ = ε₂ = 0.1`.
pub fn preset_paper_scenario() -> ScenarioConfig {
    ScenarioConfig {
        version: CONFIG_VERSION,
        name: "paper_3x3".into(),
        seed: 7,
        partition: GroupPartition::new(vec![3, 3, 3]).expect("valid partition"),
        robots: vec![RobotParams::default(); 9],
        initial_conditions: InitialConditions::Random {
            center: [-10.0, 0.0],
            radius: 10.0,
        },
        formation: Formation::NestedTriangles { a: 20.0, b: 7.0 },
        trajectory: CentroidTrajectory::default_sine_track(),
        gains: ControllerGains {
            slope: BlockGains::uniform(1.0),
            reach: BlockGains::uniform(1.0),
            eps1: 0.1,
            eps2: 0.1,
            boundary_layer: 0.1,
            margin: BlockGains::uniform(0.1),
        },
        potential: PotentialParams::default(),
        collision: CollisionSettings::default(),
        integrator: IntegratorSettings {
            scheme: Scheme::Rk4,
            step: 1e-3,
            duration: 20.0,
            record_stride: 1,
        },
        convergence: ConvergenceSettings::default(),
        outputs: OutputSettings::default(),
    }
}

/// Two groups of two robots that must swap sides along the same lanes.
/// Without avoidance the lanes nearly coincide and robots brush past each
/// other; the preset exercises the collision-mode laws.
pub fn preset_head_on() -> ScenarioConfig {
    let basis = vec![[-6.0, -2.0], [-6.0, 2.0], [6.0, -2.0], [6.0, 2.0]];
    let lane = 0.1;
    let starts = [[6.0, -2.0 + lane], [6.0, 2.0 + lane], [-6.0, -2.0], [-6.0, 2.0]];
    ScenarioConfig {
        version: CONFIG_VERSION,
        name: "head_on".into(),
        seed: 0,
        partition: GroupPartition::new(vec![2, 2]).expect("valid partition"),
        robots: vec![RobotParams::default(); 4],
        initial_conditions: InitialConditions::Explicit {
            states: starts
                .iter()
                .map(|p| RobotState::at_rest(Vector2::new(p[0], p[1]), 0.0))
                .collect(),
        },
        formation: Formation::Explicit { basis },
        trajectory: CentroidTrajectory::Stationary {
            position: [0.0, lane / 2.0],
        },
        // A gentler inter-group slope keeps the swap speed low enough for the
        // repulsion to steer the oncoming robots apart.
        gains: ControllerGains {
            slope: BlockGains {
                inter: 0.5,
                ..BlockGains::uniform(1.0)
            },
            reach: BlockGains {
                inter: 2.5,
                ..BlockGains::uniform(1.0)
            },
            boundary_layer: 0.1,
            ..ControllerGains::default()
        },
        potential: PotentialParams {
            approach_speed: 1.5,
            ..PotentialParams::default()
        },
        collision: CollisionSettings::default(),
        integrator: IntegratorSettings::default(),
        convergence: ConvergenceSettings::default(),
        outputs: OutputSettings::default(),
    }
}
