use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::episode::{cost_to_goal, goal_set, EpisodeSettings};
use super::mapgen::{generate_map, MapGenError, Preset};
use crate::detection::{DetectionError, DetectorStats, LikelihoodConvention, ScoreDistribution};
use crate::domain::{DomainError, PlannerVariant, RewardSpec, Scenario, Target};
use crate::environment::{FovParams, GridMap, ParseError, Pose, World, WorldError};
use crate::pomcp::{PomcpError, PomdpConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("scenario `{scenario}`: {message}")]
    Scenario { scenario: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("map: {0}")]
    Map(#[from] ParseError),
    #[error("map generation: {0}")]
    MapGen(#[from] MapGenError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Planner(#[from] PomcpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub delta_theta: u16,
}

impl Default for MapSection {
    fn default() -> Self {
        MapSection { delta_theta: 90 }
    }
}

/// Parameters for a generated map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    pub width: usize,
    pub height: usize,
    pub rooms: usize,
    pub density: f64,
}

/// Default detector profile for targets that do not override it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub precision: f64,
    pub recall: f64,
    pub fp_rate: f64,
    pub sigma: f64,
    pub likelihood_convention: LikelihoodConvention,
    pub score_min: f64,
    pub score_max: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let scores = ScoreDistribution::default();
        DetectorSection {
            precision: 1.0,
            recall: 1.0,
            fp_rate: 0.0,
            sigma: 1.0,
            likelihood_convention: LikelihoodConvention::Figure,
            score_min: scores.min,
            score_max: scores.max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExitSection {
    pub c: u32,
}

impl Default for ExitSection {
    fn default() -> Self {
        ExitSection { c: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub episode_cap: usize,
    pub d_goal: f64,
    /// Half-open `a..b`, inclusive `a..=b`, or a single seed.
    pub seeds: String,
    pub variants: Vec<PlannerVariant>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            episode_cap: 200,
            d_goal: 2.0,
            seeds: "0..10".into(),
            variants: PlannerVariant::ALL.to_vec(),
        }
    }
}

pub type PomcpSection = PomdpConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub x: usize,
    pub y: usize,
    pub theta: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub id: Option<String>,
    /// Candidate index, in row-major order of the `o` cells.
    pub location: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fp_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// Map file, relative to the config file.
    pub map: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub generation: Option<GenerationSection>,
    #[serde(default)]
    pub map_seed: u64,
    pub start: Option<StartSpec>,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    /// Additional targets drawn among solvable candidates.
    #[serde(default)]
    pub random_targets: usize,
}

/// Where a scenario's map comes from, after resolving defaults.
#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    File(PathBuf),
    Preset(Preset, u64),
    Generated(GenerationSection, u64),
}

/// A whole suite file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub map: MapSection,
    pub generation: Option<GenerationSection>,
    pub fov: FovParams,
    pub pomcp: PomcpSection,
    pub detector: DetectorSection,
    pub rewards: RewardSpec,
    pub exit: ExitSection,
    pub protocol: ProtocolSection,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioSpec>,
    /// Directory that relative map paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Parses `a..b`, `a..=b` or `n` into a half-open range.
pub fn parse_seeds(text: &str) -> Result<Range<u64>, ConfigError> {
    let bad = || ConfigError::Invalid(format!("seed range `{text}` (expected a..b, a..=b or n)"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..=") {
        let (a, b) = (num(a)?, num(b)?);
        b.checked_add(1).filter(|&e| e > a).map(|e| a..e).ok_or_else(bad)
    } else if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        (a <= b).then_some(a..b).ok_or_else(bad)
    } else {
        let n = num(text)?;
        Ok(n..n + 1)
    }
}

impl SuiteConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: SuiteConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml_str(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pomcp.validate()?;
        self.rewards.validate()?;
        self.fov.validate().map_err(WorldError::from)?;
        self.detector_stats(None).validate()?;
        if self.protocol.episode_cap == 0 {
            return Err(ConfigError::Invalid("episode_cap must be >= 1".into()));
        }
        if !(self.detector.sigma > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "sigma {} must be positive",
                self.detector.sigma
            )));
        }
        if self.exit.c == 0 {
            return Err(ConfigError::Invalid("exit.c must be >= 1".into()));
        }
        parse_seeds(&self.protocol.seeds)?;
        let mut names: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(ConfigError::Invalid(format!("duplicate scenario name `{}`", w[0])));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Result<Range<u64>, ConfigError> {
        parse_seeds(&self.protocol.seeds)
    }

    pub fn episode_settings(&self) -> EpisodeSettings {
        EpisodeSettings {
            pomcp: self.pomcp.clone(),
            sigma: self.detector.sigma,
            convention: self.detector.likelihood_convention,
            exit_c: self.exit.c,
            d_goal: self.protocol.d_goal,
            record_fields: false,
        }
    }

    fn detector_stats(&self, target: Option<&TargetSpec>) -> DetectorStats {
        let d = &self.detector;
        DetectorStats {
            precision: target.and_then(|t| t.precision).unwrap_or(d.precision),
            recall: target.and_then(|t| t.recall).unwrap_or(d.recall),
            fp_rate: target.and_then(|t| t.fp_rate).unwrap_or(d.fp_rate),
            scores: ScoreDistribution {
                min: d.score_min,
                max: d.score_max,
            },
        }
    }

    pub fn map_source(&self, spec: &ScenarioSpec) -> Result<MapSource, ConfigError> {
        if let Some(path) = &spec.map {
            return Ok(MapSource::File(self.base_dir.join(path)));
        }
        if let Some(p) = spec.preset {
            return Ok(MapSource::Preset(p, spec.map_seed));
        }
        match spec.generation.or(self.generation) {
            Some(g) => Ok(MapSource::Generated(g, spec.map_seed)),
            None => Err(ConfigError::Scenario {
                scenario: spec.name.clone(),
                message: "needs one of map, preset or generation".into(),
            }),
        }
    }

    fn load_map(&self, spec: &ScenarioSpec) -> Result<GridMap, ConfigError> {
        Ok(match self.map_source(spec)? {
            MapSource::File(path) => {
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path, source })?;
                GridMap::parse(&text)?
            }
            MapSource::Preset(p, seed) => p.generate(seed)?,
            MapSource::Generated(g, seed) => generate_map(g.width, g.height, g.rooms, g.density, seed)?,
        })
    }

    /// Resolves one scenario: builds the world and checks that every target
    /// can be found and reached.
    pub fn build_scenario(&self, spec: &ScenarioSpec) -> Result<Scenario, ConfigError> {
        let fail = |message: String| ConfigError::Scenario {
            scenario: spec.name.clone(),
            message,
        };
        let world = World::build(self.load_map(spec)?, self.map.delta_theta, self.fov)?;
        let k = world.num_locations();
        let start_pose = match spec.start {
            Some(s) => {
                let p = Pose::new(s.x, s.y, s.theta);
                world
                    .graph
                    .node_id(&p)
                    .ok_or_else(|| fail(format!("start {p:?} is not a pose of the map")))?;
                Some(p)
            }
            None => None,
        };
        let solvable = |location: usize| {
            let goal = goal_set(&world, location, self.protocol.d_goal);
            if goal.is_empty() {
                return false;
            }
            let cost = cost_to_goal(&world.graph, &goal);
            match start_pose {
                Some(p) => cost[world.graph.node_id(&p).expect("checked above")].is_some(),
                None => (0..world.graph.len()).any(|i| cost[i].is_some() && !world.visibility.get(i, location)),
            }
        };

        let mut targets = Vec::new();
        for t in &spec.targets {
            if t.location >= k {
                return Err(fail(format!(
                    "target location {} but the map has {k} candidates",
                    t.location
                )));
            }
            if !solvable(t.location) {
                return Err(fail(format!(
                    "target location {} has no reachable goal pose",
                    t.location
                )));
            }
            let stats = self.detector_stats(Some(t));
            stats.validate()?;
            targets.push(Target {
                id: t.id.clone().unwrap_or_else(|| format!("loc{}", t.location)),
                location: t.location,
                stats,
            });
        }
        if spec.random_targets > 0 {
            let mut pool: Vec<usize> = (0..k)
                .filter(|&j| targets.iter().all(|t| t.location != j) && solvable(j))
                .collect();
            if pool.len() < spec.random_targets {
                return Err(fail(format!(
                    "{} random targets requested, {} candidates qualify",
                    spec.random_targets,
                    pool.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.map_seed);
            rng.set_stream(1);
            pool.shuffle(&mut rng);
            pool.truncate(spec.random_targets);
            pool.sort_unstable();
            for location in pool {
                targets.push(Target {
                    id: format!("loc{location}"),
                    location,
                    stats: self.detector_stats(None),
                });
            }
        }
        if targets.is_empty() {
            return Err(fail("no targets".into()));
        }
        Ok(Scenario {
            name: spec.name.clone(),
            world,
            targets,
            start_pose,
            rewards: self.rewards,
            episode_cap: self.protocol.episode_cap,
        })
    }

    pub fn build_scenarios(&self) -> Result<Vec<Scenario>, ConfigError> {
        self.scenarios.iter().map(|s| self.build_scenario(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("0..10").unwrap(), 0..10);
        assert_eq!(parse_seeds("3..=5").unwrap(), 3..6);
        assert_eq!(parse_seeds("7").unwrap(), 7..8);
        assert_eq!(parse_seeds("4..4").unwrap(), 4..4);
        assert!(parse_seeds("5..2").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let c = SuiteConfig::from_toml_str("").unwrap();
        assert_eq!(c.protocol.episode_cap, 200);
        assert_eq!(c.exit.c, 10);
        assert_eq!(c.map.delta_theta, 90);
        assert_eq!(c.pomcp, PomdpConfig::default());
        assert!(c.scenarios.is_empty());
    }

    #[test]
    fn full_file() {
        let text = r#"
            [map]
            delta_theta = 90

            [fov]
            half_angle = 45.0
            max_range = 4.0

            [pomcp]
            simulations = 128
            particles = 64

            [detector]
            precision = 0.8
            recall = 0.8
            fp_rate = 0.05

            [rewards]
            r_found = 50.0

            [exit]
            c = 3

            [protocol]
            episode_cap = 40
            seeds = "0..=1"
            variants = ["pomp", "pomp-be-pd"]

            [[scenario]]
            name = "gen"
            preset = "easy"
            map_seed = 2
            random_targets = 2

            [[scenario]]
            name = "fixed"
            generation = { width = 10, height = 10, rooms = 1, density = 0.3 }
            targets = [{ id = "cup", location = 0, recall = 1.0 }]
        "#;
        let c = SuiteConfig::from_toml_str(text).unwrap();
        assert_eq!(c.pomcp.num_simulations, 128);
        assert_eq!(c.pomcp.gamma, PomdpConfig::default().gamma);
        assert_eq!(c.rewards.r_step, -1.0);
        assert_eq!(
            c.protocol.variants,
            vec![PlannerVariant::Pomp, PlannerVariant::PompBePd]
        );
        let s = c.build_scenarios().unwrap();
        assert_eq!(s[0].targets.len(), 2);
        assert_eq!(s[1].targets[0].id, "cup");
        assert_eq!(s[1].targets[0].stats.recall, 1.0);
        assert_eq!(s[1].targets[0].stats.precision, 0.8);
        assert_eq!(s[1].episode_cap, 40);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            SuiteConfig::from_toml_str("[pomcp]\nbogus = 1"),
            Err(ConfigError::Toml(_))
        ));
        assert!(SuiteConfig::from_toml_str("[protocol]\nepisode_cap = 0").is_err());
        assert!(SuiteConfig::from_toml_str("[rewards]\nr_revisit = 5.0").is_err());
        let c = SuiteConfig::from_toml_str("[[scenario]]\nname = \"a\"\ntargets = [{ location = 0 }]").unwrap();
        assert!(matches!(c.build_scenarios(), Err(ConfigError::Scenario { .. })));
    }
}
