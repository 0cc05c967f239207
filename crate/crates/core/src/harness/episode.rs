use std::collections::VecDeque;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detection::{
    Detection, Detector, ExitThreshold, Frame, LikelihoodConvention, ProbabilityField, SimulatedDetector,
};
use crate::docking::{destination_pose, execute_docking, shortest_path, DockingError};
use crate::domain::{Exploration, PlannerVariant, Scenario, SearchParams};
use crate::environment::{NodeId, Pose, PoseGraph, World};
use crate::pomcp::PomdpConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureClass {
    /// Exit fired with the true target outside the exit-pose view.
    Localisation,
    /// Exit fired correctly but the agent did not arrive.
    Docking,
    Other,
}

impl FailureClass {
    pub fn name(self) -> &'static str {
        match self {
            FailureClass::Localisation => "localisation",
            FailureClass::Docking => "docking",
            FailureClass::Other => "other",
        }
    }
}

/// What the episode knew when exploration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FailureContext {
    pub exit_fired: bool,
    /// True target visible from the pose at which exit fired.
    pub target_in_exit_view: bool,
}

pub fn classify_failure(ctx: FailureContext) -> FailureClass {
    match (ctx.exit_fired, ctx.target_in_exit_view) {
        (true, false) => FailureClass::Localisation,
        (true, true) => FailureClass::Docking,
        (false, _) => FailureClass::Other,
    }
}

/// Poses at which stopping counts as success for one target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalPoseSet {
    member: Vec<bool>,
    nodes: Vec<NodeId>,
}

impl GoalPoseSet {
    pub fn contains(&self, node: NodeId) -> bool {
        self.member[node]
    }

    /// Ascending node ids.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Observers of `location` whose cell lies within `d_goal` cells of it.
pub fn goal_set(world: &World, location: usize, d_goal: f64) -> GoalPoseSet {
    let cell = world.map.candidate_cell(location);
    let mut member = vec![false; world.graph.len()];
    let mut nodes = Vec::new();
    for &node in world.visibility.observers(location) {
        if world.graph.pose(node).distance_to(cell) <= d_goal + 1e-9 {
            member[node] = true;
            nodes.push(node);
        }
    }
    nodes.sort_unstable();
    GoalPoseSet { member, nodes }
}

pub fn judge_success(final_pose: NodeId, goal: &GoalPoseSet) -> bool {
    goal.contains(final_pose)
}

/// Action count from every node to the nearest goal pose, by breadth-first
/// search over reversed edges.
pub fn cost_to_goal(graph: &PoseGraph, goal: &GoalPoseSet) -> Vec<Option<usize>> {
    let mut dist = vec![None; graph.len()];
    let mut queue = VecDeque::new();
    for &g in goal.nodes() {
        dist[g] = Some(0);
        queue.push_back(g);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued nodes are labelled");
        for &(u, _) in graph.in_edges(v) {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Uniform over poses that can reach the goal set and do not already see
/// the target.
pub fn sample_start<R: Rng + ?Sized>(
    world: &World,
    location: usize,
    cost: &[Option<usize>],
    rng: &mut R,
) -> Option<NodeId> {
    let eligible: Vec<NodeId> = (0..world.graph.len())
        .filter(|&i| cost[i].is_some() && !world.visibility.get(i, location))
        .collect();
    (!eligible.is_empty()).then(|| eligible[rng.random_range(0..eligible.len())])
}

/// Independent start, planner and detector streams for one episode. The
/// variant is not an input, so all variants share starts and detector draws.
pub fn episode_streams(seed: u64, target_index: usize) -> [ChaCha8Rng; 3] {
    std::array::from_fn(|s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(target_index as u64 * 3 + s as u64);
        rng
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSettings {
    pub pomcp: PomdpConfig,
    pub sigma: f64,
    pub convention: LikelihoodConvention,
    /// Exit constant; clamped to the number of candidates.
    pub exit_c: u32,
    pub d_goal: f64,
    /// Keep the posterior after every real step.
    pub record_fields: bool,
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        EpisodeSettings {
            pomcp: PomdpConfig::default(),
            sigma: 1.0,
            convention: LikelihoodConvention::Figure,
            exit_c: 10,
            d_goal: 2.0,
            record_fields: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub scenario: String,
    pub target: String,
    pub variant: PlannerVariant,
    pub seed: u64,
    pub success: bool,
    /// Real steps, exploration plus docking.
    pub steps_taken: usize,
    /// Fewest actions from the start to any goal pose.
    pub shortest_possible: usize,
    pub failure_class: Option<FailureClass>,
    pub exit_step: Option<usize>,
    pub exit_location: Option<usize>,
    pub docking_steps: usize,
    /// Start pose followed by the pose after every step.
    pub trajectory: Vec<Pose>,
    pub detector_calls: usize,
    /// Posterior after each exploration step, when recorded.
    pub fields: Vec<ProbabilityField>,
    /// Why the episode stopped early, if it did not end normally.
    pub error: Option<String>,
}

struct Counting<'d> {
    inner: &'d mut dyn Detector,
    calls: usize,
}

impl Detector for Counting<'_> {
    fn detect(&mut self, frame: &Frame<'_>, rng: &mut dyn RngCore) -> Option<Detection> {
        self.calls += 1;
        self.inner.detect(frame, rng)
    }
}

/// Runs one episode with the detector simulated from the target's stats.
pub fn run_episode(
    scenario: &Scenario,
    target_index: usize,
    variant: PlannerVariant,
    seed: u64,
    settings: &EpisodeSettings,
) -> EpisodeResult {
    let mut detector = SimulatedDetector {
        stats: scenario.targets[target_index].stats,
    };
    run_episode_with(scenario, target_index, variant, seed, settings, &mut detector)
}

/// Runs one episode against an arbitrary detector: exploration until the
/// exit rule fires or the cap is hit, then docking, then judgment.
pub fn run_episode_with(
    scenario: &Scenario,
    target_index: usize,
    variant: PlannerVariant,
    seed: u64,
    settings: &EpisodeSettings,
    detector: &mut dyn Detector,
) -> EpisodeResult {
    let world = &scenario.world;
    let target = &scenario.targets[target_index];
    let truth = target.location;
    let cap = scenario.episode_cap;
    let [mut start_rng, mut planner_rng, mut detector_rng] = episode_streams(seed, target_index);

    let mut result = EpisodeResult {
        scenario: scenario.name.clone(),
        target: target.id.clone(),
        variant,
        seed,
        success: false,
        steps_taken: 0,
        shortest_possible: 0,
        failure_class: Some(FailureClass::Other),
        exit_step: None,
        exit_location: None,
        docking_steps: 0,
        trajectory: Vec::new(),
        detector_calls: 0,
        fields: Vec::new(),
        error: None,
    };

    let goal = goal_set(world, truth, settings.d_goal);
    let cost = cost_to_goal(&world.graph, &goal);
    let start = match scenario.start_pose {
        Some(p) => world.graph.node_id(&p),
        None => sample_start(world, truth, &cost, &mut start_rng),
    };
    let Some(start) = start else {
        result.error = Some("no admissible start pose".into());
        return result;
    };
    result.trajectory.push(world.graph.pose(start));
    let Some(shortest) = cost[start] else {
        result.error = Some("goal set unreachable from the start pose".into());
        return result;
    };
    result.shortest_possible = shortest;

    let k = world.num_locations();
    let threshold = ExitThreshold::new(settings.exit_c.clamp(1, k as u32), k).expect("c clamped to 1..=k");
    let params = SearchParams {
        variant,
        pomcp: settings.pomcp.clone(),
        rewards: scenario.rewards,
        sigma: settings.sigma,
        convention: settings.convention,
        threshold,
        f1: target.stats.f1(),
    };
    let mut exploration = Exploration::new(world, &params, start, &mut planner_rng);
    let mut counting = Counting {
        inner: detector,
        calls: 0,
    };

    let mut exit = None;
    while exploration.steps() < cap {
        match exploration.step(&mut counting, truth, &mut planner_rng, &mut detector_rng) {
            Ok(outcome) => {
                result.trajectory.push(world.graph.pose(outcome.pose));
                if settings.record_fields {
                    result.fields.push(exploration.field().clone());
                }
                if let Some(location) = outcome.exit {
                    exit = Some((location, outcome.pose));
                    break;
                }
            }
            Err(e) => {
                result.error = Some(e.to_string());
                break;
            }
        }
    }
    result.detector_calls = counting.calls;
    let explored = exploration.steps();
    result.steps_taken = explored;

    let Some((location, exit_pose)) = exit else {
        return result;
    };
    result.exit_step = Some(explored);
    result.exit_location = Some(location);
    let ctx = FailureContext {
        exit_fired: true,
        target_in_exit_view: world.visibility.get(exit_pose, truth),
    };

    let here = world.graph.pose(exit_pose);
    let plan = destination_pose(location, &world.graph, &world.visibility, &world.map)
        .and_then(|dst| shortest_path(&world.graph, here, dst));
    let plan = match plan {
        Ok(plan) => plan,
        Err(e) => {
            result.error = Some(e.to_string());
            result.failure_class = Some(classify_failure(ctx));
            return result;
        }
    };
    let remaining = cap - explored;
    match execute_docking(&plan, &world.graph, here, remaining) {
        Ok(traj) => {
            result.docking_steps = traj.len();
            result.trajectory.extend(traj);
        }
        Err(DockingError::CapExceeded { .. }) => {
            // The agent drives until the cap stops it.
            result.docking_steps = remaining;
            result
                .trajectory
                .extend(plan.path.iter().take(remaining).map(|(_, p)| *p));
            result.error = Some("episode cap reached while docking".into());
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result.steps_taken = explored + result.docking_steps;

    let last = *result.trajectory.last().expect("start pose recorded");
    let final_node = world.graph.node_id(&last).expect("trajectory stays on the graph");
    result.success = result.error.is_none() && judge_success(final_node, &goal);
    result.failure_class = (!result.success).then(|| classify_failure(ctx));
    result
}
