//! Scenario files: TOML documents describing a team, its waypoints, the
//! certificate to enforce and the simulation settings.
//!
//! Robot numbers in files are 1-based, matching atom labels such as `B12`.
//!
//! ```toml
//! [team]
//! n = 2
//! max_accel = 2.0
//! max_speed = 0.5
//! d_s = 0.15
//! d_c = 0.6
//!
//! [initial]
//! positions = [[-0.5, 0.0], [0.5, 0.0]]
//!
//! [waypoints]
//! paths = [[[0.5, 0.0]], [[-0.5, 0.0]]]
//!
//! [certificate]
//! kind = "safety"
//!
//! [sim]
//! duration = 10.0
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::barrier::ClassKappa;
use crate::certificates::{AllowableGraphSet, Arena, ConnectivityGraph, TeamParams};
use crate::controller::{ControllerGains, WaypointPlan};
use crate::sim::{CertificateSpec, SimConfig, DEFAULT_DT};
use crate::state::EnsembleState;
use crate::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamSection {
    pub n: usize,
    pub max_accel: f64,
    pub max_speed: f64,
    pub d_s: f64,
    pub d_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub positions: Vec<[f64; 2]>,
    /// Zero for every robot when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocities: Option<Vec<[f64; 2]>>,
}

fn default_arrival_radius() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSection {
    #[serde(default = "default_arrival_radius")]
    pub arrival_radius: f64,
    #[serde(default = "default_true")]
    pub hold_at_final: bool,
    /// One list of `[x, y]` waypoints per robot.
    pub paths: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CertificateSection {
    None {},
    Safety {},
    Static {
        #[serde(default)]
        edges: Vec<[usize; 2]>,
        #[serde(default)]
        or_groups: Vec<Vec<[usize; 2]>>,
    },
    Dynamic {
        graphs: Vec<Vec<[usize; 2]>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub kp: f64,
    pub kd: f64,
}

impl Default for GainsSection {
    fn default() -> Self {
        let g = ControllerGains::default();
        Self { kp: g.kp, kd: g.kd }
    }
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Sampling region and sample count for validity audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub x: [f64; 2],
    pub y: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

/// The on-disk document, section by section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub team: TeamSection,
    pub initial: InitialSection,
    pub waypoints: WaypointSection,
    pub certificate: CertificateSection,
    #[serde(default)]
    pub alpha: ClassKappa,
    #[serde(default)]
    pub gains: GainsSection,
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSection>,
}

/// A parsed and validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub config: SimConfig,
    pub arena: Arena,
    pub samples: usize,
}

fn zero_based(edge: [usize; 2], n: usize) -> Result<(usize, usize)> {
    let [i, j] = edge;
    if i == 0 || j == 0 || i > n || j > n {
        return Err(Error::config(format!(
            "edge [{i}, {j}] must name robots 1..={n}"
        )));
    }
    Ok((i - 1, j - 1))
}

fn one_based((i, j): (usize, usize)) -> [usize; 2] {
    [i + 1, j + 1]
}

fn graph(n: usize, edges: &[[usize; 2]]) -> Result<ConnectivityGraph> {
    let edges = edges.iter().map(|&e| zero_based(e, n)).collect::<Result<Vec<_>>>()?;
    ConnectivityGraph::new(n, edges).map_err(into_config)
}

fn into_config(e: Error) -> Error {
    match e {
        Error::InvalidInput(msg) => Error::Config(msg),
        other => other,
    }
}

/// Bounding box of the initial positions and waypoints, padded by `D_c`.
fn default_arena(config: &SimConfig) -> Arena {
    let points = config
        .initial
        .positions
        .iter()
        .chain(config.plan.waypoints.iter().flatten());
    let (mut x, mut y) = ([f64::INFINITY, f64::NEG_INFINITY], [f64::INFINITY, f64::NEG_INFINITY]);
    for p in points {
        x = [x[0].min(p[0]), x[1].max(p[0])];
        y = [y[0].min(p[1]), y[1].max(p[1])];
    }
    let pad = config.params.connectivity_distance;
    Arena {
        x: [x[0] - pad, x[1] + pad],
        y: [y[0] - pad, y[1] + pad],
    }
}

impl ScenarioFile {
    pub fn into_scenario(self, fallback_name: &str) -> Result<Scenario> {
        let n = self.team.n;
        let params = TeamParams {
            robot_count: n,
            max_accel: self.team.max_accel,
            max_speed: self.team.max_speed,
            safety_distance: self.team.d_s,
            connectivity_distance: self.team.d_c,
        };
        params.validate().map_err(into_config)?;

        let check_len = |what: &str, len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(Error::config(format!("{what} lists {len} robots, team has n = {n}")))
            }
        };
        check_len("initial.positions", self.initial.positions.len())?;
        let velocities = match self.initial.velocities {
            Some(v) => {
                check_len("initial.velocities", v.len())?;
                v
            }
            None => vec![[0.0; 2]; n],
        };
        check_len("waypoints.paths", self.waypoints.paths.len())?;
        let initial = EnsembleState::new(self.initial.positions, velocities).map_err(into_config)?;

        let plan = WaypointPlan {
            waypoints: self.waypoints.paths,
            arrival_radius: self.waypoints.arrival_radius,
            hold_at_final: self.waypoints.hold_at_final,
        };

        let certificate = match self.certificate {
            CertificateSection::None {} => CertificateSpec::None,
            CertificateSection::Safety {} => CertificateSpec::Safety,
            CertificateSection::Static { edges, or_groups } => CertificateSpec::Static {
                graph: graph(n, &edges)?,
                or_groups: or_groups
                    .iter()
                    .map(|g| {
                        if g.is_empty() {
                            return Err(Error::config("certificate.or_groups contains an empty group"));
                        }
                        g.iter().map(|&e| zero_based(e, n)).collect()
                    })
                    .collect::<Result<_>>()?,
            },
            CertificateSection::Dynamic { graphs } => CertificateSpec::Dynamic {
                graphs: AllowableGraphSet::new(
                    graphs.iter().map(|g| graph(n, g)).collect::<Result<_>>()?,
                )
                .map_err(into_config)?,
            },
        };

        let config = SimConfig {
            dt: self.sim.dt,
            duration: self.sim.duration,
            params,
            plan,
            certificate,
            alpha: self.alpha,
            gains: ControllerGains {
                kp: self.gains.kp,
                kd: self.gains.kd,
            },
            initial,
            seed: self.sim.seed,
        };
        config.validate().map_err(into_config)?;
        // builds the tree once so malformed graphs surface at load time
        config.certificate.build(&config.params).map_err(into_config)?;

        let (arena, samples) = match self.check {
            Some(c) => {
                if !(c.x[0] < c.x[1] && c.y[0] < c.y[1]) {
                    return Err(Error::config("check.x and check.y must be increasing intervals"));
                }
                (Arena { x: c.x, y: c.y }, c.samples.unwrap_or(DEFAULT_SAMPLES))
            }
            None => (default_arena(&config), DEFAULT_SAMPLES),
        };

        Ok(Scenario {
            name: self.name.unwrap_or_else(|| fallback_name.to_string()),
            description: self.description,
            config,
            arena,
            samples,
        })
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        let c = &s.config;
        let certificate = match &c.certificate {
            CertificateSpec::None => CertificateSection::None {},
            CertificateSpec::Safety => CertificateSection::Safety {},
            CertificateSpec::Static { graph, or_groups } => CertificateSection::Static {
                edges: graph.edges().map(one_based).collect(),
                or_groups: or_groups
                    .iter()
                    .map(|g| g.iter().copied().map(one_based).collect())
                    .collect(),
            },
            CertificateSpec::Dynamic { graphs } => CertificateSection::Dynamic {
                graphs: graphs
                    .graphs()
                    .iter()
                    .map(|g| g.edges().map(one_based).collect())
                    .collect(),
            },
        };
        ScenarioFile {
            name: Some(s.name.clone()),
            description: s.description.clone(),
            team: TeamSection {
                n: c.params.robot_count,
                max_accel: c.params.max_accel,
                max_speed: c.params.max_speed,
                d_s: c.params.safety_distance,
                d_c: c.params.connectivity_distance,
            },
            initial: InitialSection {
                positions: c.initial.positions.clone(),
                velocities: Some(c.initial.velocities.clone()),
            },
            waypoints: WaypointSection {
                arrival_radius: c.plan.arrival_radius,
                hold_at_final: c.plan.hold_at_final,
                paths: c.plan.waypoints.clone(),
            },
            certificate,
            alpha: c.alpha,
            gains: GainsSection {
                kp: c.gains.kp,
                kd: c.gains.kd,
            },
            sim: SimSection {
                dt: c.dt,
                duration: c.duration,
                seed: c.seed,
            },
            check: Some(CheckSection {
                x: s.arena.x,
                y: s.arena.y,
                samples: Some(s.samples),
            }),
        }
    }
}

impl Scenario {
    /// Parses TOML text; `fallback_name` is used when the document has no `name`.
    pub fn from_toml_str(text: &str, fallback_name: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::config(format!("{fallback_name}: {e}")))?;
        file.into_scenario(fallback_name)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        let file: ScenarioFile = toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        file.into_scenario(&stem)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&ScenarioFile::from(self))
            .map_err(|e| Error::config(format!("cannot serialize scenario {}: {e}", self.name)))
    }
}
