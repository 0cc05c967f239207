//! The search POMDP: hidden state, simulator, revisit memory, the
//! elimination set and the step-by-step exploration loop.
//!
//! The agent pose is fully observed; only the target location is hidden.
//! Beliefs are particle sets over [`AvsState`] whose poses all agree.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{
    check_exit, step_likelihood, update_posterior, Detection, DetectionError, Detector, DetectorStats, ExitThreshold,
    Frame, LikelihoodConvention, ProbabilityField,
};
use crate::environment::{Action, NodeId, Pose, PoseGraph, VisibilityMatrix, World};
use crate::pomcp::{Belief, GenerativeModel, Plan, Pomcp, PomcpError, PomdpConfig, Step};

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("every candidate location has been ruled out")]
    EmptyEliminationSet,
    #[error("invalid rewards: {0}")]
    InvalidRewards(String),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Planner(#[from] PomcpError),
}

/// Hidden state: agent pose node and target candidate index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AvsState {
    pub pose: NodeId,
    pub target: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AvsObservation {
    pub seen: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSpec {
    pub r_found: f64,
    pub r_step: f64,
    pub r_revisit: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec {
            r_found: 100.0,
            r_step: -1.0,
            r_revisit: -10.0,
        }
    }
}

impl RewardSpec {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.r_found > 0.0 && 0.0 > self.r_step && self.r_step > self.r_revisit {
            Ok(())
        } else {
            Err(DomainError::InvalidRewards(format!(
                "need r_found > 0 > r_step > r_revisit, got {} / {} / {}",
                self.r_found, self.r_step, self.r_revisit
            )))
        }
    }

    /// Largest reward magnitude, a natural scale for the UCT constant.
    pub fn max_abs(&self) -> f64 {
        self.r_found.abs().max(self.r_step.abs()).max(self.r_revisit.abs())
    }
}

/// Poses visited in the real world during one episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitedMemory {
    visited: Vec<bool>,
    count: usize,
}

impl VisitedMemory {
    pub fn new(num_poses: usize) -> Self {
        VisitedMemory {
            visited: vec![false; num_poses],
            count: 0,
        }
    }

    /// Returns true if `pose` was not in memory before.
    pub fn insert(&mut self, pose: NodeId) -> bool {
        let fresh = !self.visited[pose];
        if fresh {
            self.visited[pose] = true;
            self.count += 1;
        }
        fresh
    }

    pub fn contains(&self, pose: NodeId) -> bool {
        self.visited[pose]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn clear(&mut self) {
        self.visited.fill(false);
        self.count = 0;
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.visited.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i)
    }
}

/// Candidate locations not yet ruled out by a negative frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationSet {
    member: Vec<bool>,
    len: usize,
}

impl EliminationSet {
    pub fn full(k: usize) -> Self {
        EliminationSet {
            member: vec![true; k],
            len: k,
        }
    }

    pub fn from_locations(k: usize, locations: &[usize]) -> Self {
        let mut member = vec![false; k];
        for &j in locations {
            member[j] = true;
        }
        let len = member.iter().filter(|&&m| m).count();
        EliminationSet { member, len }
    }

    pub fn contains(&self, location: usize) -> bool {
        self.member.get(location).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Size of the underlying location universe.
    pub fn universe(&self) -> usize {
        self.member.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.member.iter().enumerate().filter(|(_, &m)| m).map(|(j, _)| j)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn remove_all(&mut self, locations: &[usize]) {
        for &j in locations {
            if std::mem::replace(&mut self.member[j], false) {
                self.len -= 1;
            }
        }
    }
}

/// Elimination-set update for one frame: a negative frame removes its view,
/// a detection removes nothing.
pub fn update_pp(pp: &EliminationSet, fov: &[usize], detection: Option<&Detection>) -> EliminationSet {
    let mut next = pp.clone();
    if detection.is_none() {
        next.remove_all(fov);
    }
    next
}

/// Initial belief: every particle at `pose`, targets uniform over `0..k`.
pub fn init_belief<R: Rng + ?Sized>(pose: NodeId, k: usize, num_particles: usize, rng: &mut R) -> Belief<AvsState> {
    assert!(k > 0 && num_particles > 0);
    (0..num_particles)
        .map(|_| AvsState {
            pose,
            target: rng.random_range(0..k),
        })
        .collect()
}

/// Belief at `pose` with targets uniform over the surviving locations.
pub fn resample_belief_be<R: Rng + ?Sized>(
    pp: &EliminationSet,
    pose: NodeId,
    num_particles: usize,
    rng: &mut R,
) -> Result<Belief<AvsState>, DomainError> {
    let alive = pp.to_vec();
    if alive.is_empty() {
        return Err(DomainError::EmptyEliminationSet);
    }
    Ok((0..num_particles.max(1))
        .map(|_| AvsState {
            pose,
            target: alive[rng.random_range(0..alive.len())],
        })
        .collect())
}

/// Actions whose edge exists at `node`, in ordinal order. Rotations always
/// qualify.
pub fn legal_actions(graph: &PoseGraph, node: NodeId) -> Vec<Action> {
    graph.out_edges(node).map(|(a, _)| a).collect()
}

/// Simulator transition. An illegal action leaves the pose unchanged.
pub fn generative_step(
    graph: &PoseGraph,
    visibility: &VisibilityMatrix,
    state: &AvsState,
    action: Action,
    memory: &VisitedMemory,
    rewards: &RewardSpec,
) -> Step<AvsState, AvsObservation> {
    let pose = graph.edge(state.pose, action).unwrap_or(state.pose);
    let seen = visibility.get(pose, state.target);
    let reward = if seen {
        rewards.r_found
    } else if memory.contains(pose) {
        rewards.r_revisit
    } else {
        rewards.r_step
    };
    Step {
        next_state: AvsState {
            pose,
            target: state.target,
        },
        observation: AvsObservation { seen },
        reward,
        terminal: seen,
    }
}

/// [`GenerativeModel`] over a fixed world and a frozen memory snapshot.
#[derive(Debug, Clone, Copy)]
pub struct AvsModel<'a> {
    pub graph: &'a PoseGraph,
    pub visibility: &'a VisibilityMatrix,
    pub memory: &'a VisitedMemory,
    pub rewards: RewardSpec,
}

impl GenerativeModel for AvsModel<'_> {
    type State = AvsState;
    type Action = Action;
    type Observation = AvsObservation;

    fn step<R: Rng + ?Sized>(&self, state: &AvsState, action: Action, _rng: &mut R) -> Step<AvsState, AvsObservation> {
        generative_step(self.graph, self.visibility, state, action, self.memory, &self.rewards)
    }

    fn legal_actions(&self, state: &AvsState) -> Vec<Action> {
        legal_actions(self.graph, state.pose)
    }

    fn sample_rollout_action<R: Rng + ?Sized>(&self, state: &AvsState, rng: &mut R) -> Option<Action> {
        let n = self.graph.out_edges(state.pose).count();
        let pick = rng.random_range(0..n);
        self.graph.out_edges(state.pose).nth(pick).map(|(a, _)| a)
    }
}

/// One searchable object: its true location and its detector profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub id: String,
    pub location: usize,
    pub stats: DetectorStats,
}

/// A world with its targets and episode protocol; one episode searches one
/// target.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub world: World,
    pub targets: Vec<Target>,
    /// Fixed start, or sampled per seed when absent.
    pub start_pose: Option<Pose>,
    pub rewards: RewardSpec,
    pub episode_cap: usize,
}

/// The four planner modes: belief update strategy crossed with exit rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlannerVariant {
    #[serde(rename = "pomp")]
    Pomp,
    #[serde(rename = "pomp-be")]
    PompBe,
    #[serde(rename = "pomp-pd")]
    PompPd,
    #[serde(rename = "pomp-be-pd")]
    PompBePd,
}

impl PlannerVariant {
    pub const ALL: [PlannerVariant; 4] = [
        PlannerVariant::Pomp,
        PlannerVariant::PompBe,
        PlannerVariant::PompPd,
        PlannerVariant::PompBePd,
    ];

    /// Belief replaced by uniform-over-pp after every real step.
    pub fn exploration_belief(self) -> bool {
        matches!(self, PlannerVariant::PompBe | PlannerVariant::PompBePd)
    }

    /// Exit on the posterior threshold instead of the first detection.
    pub fn probabilistic_exit(self) -> bool {
        matches!(self, PlannerVariant::PompPd | PlannerVariant::PompBePd)
    }

    pub fn name(self) -> &'static str {
        match self {
            PlannerVariant::Pomp => "pomp",
            PlannerVariant::PompBe => "pomp-be",
            PlannerVariant::PompPd => "pomp-pd",
            PlannerVariant::PompBePd => "pomp-be-pd",
        }
    }
}

impl fmt::Display for PlannerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown planner variant `{0}` (expected pomp, pomp-be, pomp-pd or pomp-be-pd)")]
pub struct UnknownVariant(pub String);

impl FromStr for PlannerVariant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlannerVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownVariant(s.to_string()))
    }
}

/// Per-episode search settings shared by every step.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    pub variant: PlannerVariant,
    pub pomcp: PomdpConfig,
    pub rewards: RewardSpec,
    pub sigma: f64,
    pub convention: LikelihoodConvention,
    pub threshold: ExitThreshold,
    /// F1 of the detector, as believed by the filter.
    pub f1: f64,
}

/// What one real step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub action: Action,
    pub pose: NodeId,
    pub observation: AvsObservation,
    pub detection: Option<Detection>,
    /// Location handed to docking when the exit rule fired.
    pub exit: Option<usize>,
}

/// Real-world exploration state of one episode.
#[derive(Debug, Clone)]
pub struct Exploration<'w> {
    world: &'w World,
    params: &'w SearchParams,
    pose: NodeId,
    memory: VisitedMemory,
    pp: EliminationSet,
    field: ProbabilityField,
    belief: Belief<AvsState>,
    steps: usize,
}

impl<'w> Exploration<'w> {
    pub fn new<R: Rng + ?Sized>(world: &'w World, params: &'w SearchParams, start: NodeId, rng: &mut R) -> Self {
        let k = world.num_locations();
        let mut memory = VisitedMemory::new(world.graph.len());
        memory.insert(start);
        Exploration {
            world,
            params,
            pose: start,
            memory,
            pp: EliminationSet::full(k),
            field: ProbabilityField::uniform(k),
            belief: init_belief(start, k, params.pomcp.particles, rng),
            steps: 0,
        }
    }

    pub fn pose(&self) -> NodeId {
        self.pose
    }

    pub fn memory(&self) -> &VisitedMemory {
        &self.memory
    }

    pub fn pp(&self) -> &EliminationSet {
        &self.pp
    }

    pub fn field(&self) -> &ProbabilityField {
        &self.field
    }

    pub fn belief(&self) -> &Belief<AvsState> {
        &self.belief
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Plans, acts, observes and updates every estimate once.
    ///
    /// `planner_rng` drives the tree search and belief sampling,
    /// `detector_rng` only the detector, so variants that plan differently
    /// still face the same detector stream at equal step counts.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        detector: &mut dyn Detector,
        true_location: usize,
        planner_rng: &mut R,
        detector_rng: &mut dyn RngCore,
    ) -> Result<StepOutcome, DomainError> {
        let world = self.world;
        let params = self.params;
        let model = AvsModel {
            graph: &world.graph,
            visibility: &world.visibility,
            memory: &self.memory,
            rewards: params.rewards,
        };
        let Plan { action, tree } = Pomcp::new(&model, &params.pomcp).plan(&self.belief, planner_rng)?;

        let pose = world
            .graph
            .edge(self.pose, action)
            .expect("planner picks legal actions");
        self.pose = pose;
        self.steps += 1;

        let fov = world.visibility.visible_from(pose);
        let detection = detector.detect(
            &Frame {
                step: self.steps,
                fov,
                true_location,
            },
            detector_rng,
        );
        let likelihood = step_likelihood(
            fov,
            detection.as_ref(),
            params.f1,
            params.sigma,
            &world.map,
            params.convention,
        )?;
        self.field = update_posterior(&self.field, &likelihood)?;
        self.pp.remove_all(if detection.is_none() { fov } else { &[] });

        let observation = AvsObservation {
            seen: detection.is_some(),
        };
        let n = params.pomcp.particles;
        self.belief = if params.variant.exploration_belief() {
            drop(tree);
            resample_belief_be(&self.pp, pose, n, planner_rng)?
        } else {
            let mut refill = None;
            let belief = tree.advance(
                action,
                observation,
                params.pomcp.particle_floor(),
                || match resample_belief_be(&self.pp, pose, n, planner_rng) {
                    Ok(b) => b,
                    Err(e) => {
                        refill = Some(e);
                        Belief::new(Vec::new())
                    }
                },
            );
            if let Some(e) = refill {
                return Err(e);
            }
            belief
        };
        self.memory.insert(pose);

        let exit = if params.variant.probabilistic_exit() {
            check_exit(&self.field, world.visibility.row(pose), &params.threshold)
        } else {
            detection.map(|d| d.location)
        };
        Ok(StepOutcome {
            action,
            pose,
            observation,
            detection,
            exit,
        })
    }
}
