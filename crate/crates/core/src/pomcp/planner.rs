use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::belief::Belief;
use super::tree::{uct_select, SearchTree, TreeNodeId};

/// Outcome of one generative-model call.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<S, O> {
    pub next_state: S,
    pub observation: O,
    pub reward: f64,
    pub terminal: bool,
}

/// Black-box simulator consumed by the planner.
///
/// `step` must be a pure function of its inputs and the random stream, and
/// `legal_actions` must be non-empty for every reachable non-terminal state.
pub trait GenerativeModel {
    type State: Clone;
    type Action: Copy + Ord + Debug;
    type Observation: Copy + Eq + Debug;

    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: Self::Action,
        rng: &mut R,
    ) -> Step<Self::State, Self::Observation>;

    fn legal_actions(&self, state: &Self::State) -> Vec<Self::Action>;

    /// Rollout policy. Uniform over legal actions unless overridden.
    fn sample_rollout_action<R: Rng + ?Sized>(&self, state: &Self::State, rng: &mut R) -> Option<Self::Action> {
        let actions = self.legal_actions(state);
        if actions.is_empty() {
            None
        } else {
            Some(actions[rng.random_range(0..actions.len())])
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PomcpError {
    #[error("no legal action at the root belief")]
    NoLegalAction,
    #[error("belief has no particles")]
    EmptyBelief,
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
}

fn default_workers() -> usize {
    1
}

/// Planner parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PomdpConfig {
    pub gamma: f64,
    #[serde(rename = "simulations")]
    pub num_simulations: usize,
    pub uct_c: f64,
    pub max_tree_depth: usize,
    pub rollout_depth: usize,
    /// Target belief size, used by belief initialisation and refills.
    pub particles: usize,
    /// Independent root-parallel trees per planning call; 1 is strictly
    /// sequential.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl Default for PomdpConfig {
    fn default() -> Self {
        PomdpConfig {
            gamma: 0.95,
            num_simulations: 1 << 10,
            uct_c: 60.0,
            max_tree_depth: 30,
            rollout_depth: 30,
            particles: 1 << 10,
            workers: 1,
        }
    }
}

impl PomdpConfig {
    pub fn validate(&self) -> Result<(), PomcpError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(PomcpError::InvalidConfig(format!("gamma {} not in [0, 1)", self.gamma)));
        }
        if self.num_simulations == 0 {
            return Err(PomcpError::InvalidConfig("simulations must be >= 1".into()));
        }
        if !(self.uct_c >= 0.0) {
            return Err(PomcpError::InvalidConfig(format!("uct_c {} is negative", self.uct_c)));
        }
        if self.particles == 0 {
            return Err(PomcpError::InvalidConfig("particles must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(PomcpError::InvalidConfig("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Child particle count below which the belief is refilled by the
    /// domain fallback.
    pub fn particle_floor(&self) -> usize {
        (self.particles / 16).max(1)
    }
}

pub type ModelTree<M> =
    SearchTree<<M as GenerativeModel>::State, <M as GenerativeModel>::Action, <M as GenerativeModel>::Observation>;

/// Result of a planning call: the chosen action and the tree that produced it.
pub struct Plan<M: GenerativeModel> {
    pub action: M::Action,
    pub tree: ModelTree<M>,
}

/// Monte-Carlo tree search over histories, rooted at a particle belief.
pub struct Pomcp<'a, M: GenerativeModel> {
    model: &'a M,
    config: &'a PomdpConfig,
    record_trace: bool,
}

impl<'a, M: GenerativeModel> Pomcp<'a, M> {
    pub fn new(model: &'a M, config: &'a PomdpConfig) -> Self {
        Pomcp {
            model,
            config,
            record_trace: false,
        }
    }

    /// Record every backup in the tree, for auditing the value estimates.
    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    /// Runs `num_simulations` simulations sequentially from `belief`.
    pub fn search<R: Rng + ?Sized>(&self, belief: &Belief<M::State>, rng: &mut R) -> Result<ModelTree<M>, PomcpError> {
        self.search_n(belief, self.config.num_simulations, rng)
    }

    fn search_n<R: Rng + ?Sized>(
        &self,
        belief: &Belief<M::State>,
        simulations: usize,
        rng: &mut R,
    ) -> Result<ModelTree<M>, PomcpError> {
        if belief.is_empty() {
            return Err(PomcpError::EmptyBelief);
        }
        let mut tree = SearchTree::with_root(belief.particles().to_vec(), self.record_trace);
        let actions = self.model.legal_actions(&belief.particles()[0]);
        if actions.is_empty() {
            return Err(PomcpError::NoLegalAction);
        }
        tree.expand(SearchTree::<M::State, M::Action, M::Observation>::ROOT, actions);
        for _ in 0..simulations {
            let state = belief.sample(rng).clone();
            self.simulate(&mut tree, &state, 0, 0, rng);
        }
        Ok(tree)
    }

    /// One simulation from `state` at tree node `node`; returns the
    /// discounted return and updates statistics along the path.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        tree: &mut ModelTree<M>,
        state: &M::State,
        node: TreeNodeId,
        depth: usize,
        rng: &mut R,
    ) -> f64 {
        if depth >= self.config.max_tree_depth {
            return 0.0;
        }
        if !tree.nodes[node].expanded {
            let actions = self.model.legal_actions(state);
            if actions.is_empty() {
                return 0.0;
            }
            tree.expand(node, actions);
            return self.rollout(state, rng);
        }
        let n = &tree.nodes[node];
        let action_index = uct_select(&n.stats, n.visits, self.config.uct_c);
        let action = n.stats[action_index].action;

        let step = self.model.step(state, action, rng);
        let child = tree.child_or_insert(node, action_index, step.observation);
        tree.nodes[child].particles.push(step.next_state.clone());
        let total = if step.terminal {
            step.reward
        } else {
            step.reward + self.config.gamma * self.simulate(tree, &step.next_state, child, depth + 1, rng)
        };
        tree.backup(node, action_index, total);
        total
    }

    /// Discounted return of the rollout policy for up to `rollout_depth`
    /// steps. Touches no tree statistics.
    pub fn rollout<R: Rng + ?Sized>(&self, state: &M::State, rng: &mut R) -> f64 {
        let mut total = 0.0;
        let mut discount = 1.0;
        let mut current = state.clone();
        for _ in 0..self.config.rollout_depth {
            let Some(action) = self.model.sample_rollout_action(&current, rng) else {
                break;
            };
            let step = self.model.step(&current, action, rng);
            total += discount * step.reward;
            if step.terminal {
                break;
            }
            discount *= self.config.gamma;
            current = step.next_state;
        }
        total
    }

    /// Selects an action for `belief`, sequentially or with root-parallel
    /// workers depending on `config.workers`.
    pub fn plan<R: Rng + ?Sized>(&self, belief: &Belief<M::State>, rng: &mut R) -> Result<Plan<M>, PomcpError>
    where
        M: Sync,
        M::State: Send + Sync,
        M::Action: Send,
        M::Observation: Send,
    {
        let tree = if self.config.workers <= 1 {
            self.search(belief, rng)?
        } else {
            self.search_root_parallel(belief, self.config.workers, rng)?
        };
        let action = tree.best_action().ok_or(PomcpError::NoLegalAction)?;
        Ok(Plan { action, tree })
    }

    /// Grows `workers` independent trees, each on its own sub-seeded stream,
    /// and merges their root statistics. Deterministic for a given seed and
    /// worker count.
    pub fn search_root_parallel<R: Rng + ?Sized>(
        &self,
        belief: &Belief<M::State>,
        workers: usize,
        rng: &mut R,
    ) -> Result<ModelTree<M>, PomcpError>
    where
        M: Sync,
        M::State: Send + Sync,
        M::Action: Send,
        M::Observation: Send,
    {
        let total = self.config.num_simulations;
        let workers = workers.clamp(1, total);
        let jobs: Vec<(u64, usize)> = (0..workers)
            .map(|w| (rng.random::<u64>(), total / workers + usize::from(w < total % workers)))
            .collect();
        let trees = jobs
            .into_par_iter()
            .map(|(seed, sims)| {
                let mut sub = ChaCha8Rng::seed_from_u64(seed);
                self.search_n(belief, sims, &mut sub)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SearchTree::merge_roots(trees, belief.particles().to_vec()))
    }
}

/// Convenience wrapper: plan once with a fresh planner.
pub fn plan<M, R>(
    belief: &Belief<M::State>,
    model: &M,
    config: &PomdpConfig,
    rng: &mut R,
) -> Result<Plan<M>, PomcpError>
where
    M: GenerativeModel + Sync,
    M::State: Send + Sync,
    M::Action: Send,
    M::Observation: Send,
    R: Rng + ?Sized,
{
    Pomcp::new(model, config).plan(belief, rng)
}
