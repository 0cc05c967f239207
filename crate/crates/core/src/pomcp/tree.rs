use super::belief::Belief;

pub type TreeNodeId = usize;

/// Visit count and running mean return of one action at one history.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionStats<A> {
    pub action: A,
    pub visits: u64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BeliefNode<S, A, O> {
    pub(crate) visits: u64,
    pub(crate) particles: Vec<S>,
    /// Sorted by action ordinal.
    pub(crate) stats: Vec<ActionStats<A>>,
    /// `children[i]` holds the observation branches of `stats[i]`.
    pub(crate) children: Vec<Vec<(O, TreeNodeId)>>,
    pub(crate) expanded: bool,
}

impl<S, A, O> BeliefNode<S, A, O> {
    fn new(particles: Vec<S>) -> Self {
        BeliefNode {
            visits: 0,
            particles,
            stats: Vec::new(),
            children: Vec::new(),
            expanded: false,
        }
    }

    fn action_index(&self, action: &A) -> Option<usize>
    where
        A: Eq,
    {
        self.stats.iter().position(|s| s.action == *action)
    }
}

/// One backup event: the return added to `(node, action)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backup {
    pub node: TreeNodeId,
    pub action_index: usize,
    pub value: f64,
}

/// UCT action choice over the action nodes of one history.
///
/// Unvisited actions win before any visited one; within each group the
/// lowest index wins ties. Callers keep `stats` sorted by action ordinal.
pub fn uct_select<A>(stats: &[ActionStats<A>], parent_visits: u64, uct_c: f64) -> usize {
    if let Some(first_unvisited) = stats.iter().position(|s| s.visits == 0) {
        return first_unvisited;
    }
    let log_n = (parent_visits.max(1) as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in stats.iter().enumerate() {
        let score = if uct_c == 0.0 {
            s.value
        } else {
            s.value + uct_c * (log_n / s.visits as f64).sqrt()
        };
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    best
}

/// Search tree of one planning call. Node 0 is the root history.
#[derive(Debug, Clone)]
pub struct SearchTree<S, A, O> {
    pub(crate) nodes: Vec<BeliefNode<S, A, O>>,
    pub(crate) trace: Option<Vec<Backup>>,
}

impl<S: Clone, A: Copy + Ord, O: Copy + Eq> SearchTree<S, A, O> {
    pub(crate) fn with_root(particles: Vec<S>, record_trace: bool) -> Self {
        SearchTree {
            nodes: vec![BeliefNode::new(particles)],
            trace: record_trace.then(Vec::new),
        }
    }

    pub const ROOT: TreeNodeId = 0;

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn visits(&self, node: TreeNodeId) -> u64 {
        self.nodes[node].visits
    }

    pub fn particles(&self, node: TreeNodeId) -> &[S] {
        &self.nodes[node].particles
    }

    pub fn action_stats(&self, node: TreeNodeId) -> impl Iterator<Item = &ActionStats<A>> + '_ {
        self.nodes[node].stats.iter()
    }

    pub fn root_stats(&self) -> Vec<ActionStats<A>> {
        self.action_stats(Self::ROOT).cloned().collect()
    }

    pub fn child(&self, node: TreeNodeId, action: A, observation: O) -> Option<TreeNodeId> {
        let n = &self.nodes[node];
        n.children[n.action_index(&action)?]
            .iter()
            .find(|(o, _)| *o == observation)
            .map(|(_, id)| *id)
    }

    /// Children of `node` under every action and observation.
    pub fn children(&self, node: TreeNodeId) -> impl Iterator<Item = (A, O, TreeNodeId)> + '_ {
        let n = &self.nodes[node];
        n.stats
            .iter()
            .zip(&n.children)
            .flat_map(|(s, branches)| branches.iter().map(move |(o, id)| (s.action, *o, *id)))
    }

    /// Backups recorded while searching, when tracing was on.
    pub fn trace(&self) -> Option<&[Backup]> {
        self.trace.as_deref()
    }

    /// Root action with the highest value among visited actions. Ties go to
    /// the lowest ordinal.
    pub fn best_action(&self) -> Option<A> {
        let root = &self.nodes[Self::ROOT];
        let mut best: Option<&ActionStats<A>> = None;
        for a in root.stats.iter().filter(|s| s.visits > 0) {
            if best.is_none_or(|b| a.value > b.value) {
                best = Some(a);
            }
        }
        best.or_else(|| root.stats.first()).map(|s| s.action)
    }

    pub(crate) fn expand(&mut self, node: TreeNodeId, mut actions: Vec<A>) {
        actions.sort_unstable();
        actions.dedup();
        let n = &mut self.nodes[node];
        n.children = vec![Vec::new(); actions.len()];
        n.stats = actions
            .into_iter()
            .map(|action| ActionStats {
                action,
                visits: 0,
                value: 0.0,
            })
            .collect();
        n.expanded = true;
    }

    pub(crate) fn child_or_insert(&mut self, node: TreeNodeId, action_index: usize, obs: O) -> TreeNodeId {
        if let Some((_, id)) = self.nodes[node].children[action_index].iter().find(|(o, _)| *o == obs) {
            return *id;
        }
        let id = self.nodes.len();
        self.nodes.push(BeliefNode::new(Vec::new()));
        self.nodes[node].children[action_index].push((obs, id));
        id
    }

    pub(crate) fn backup(&mut self, node: TreeNodeId, action_index: usize, value: f64) {
        let n = &mut self.nodes[node];
        n.visits += 1;
        let stats = &mut n.stats[action_index];
        stats.visits += 1;
        stats.value += (value - stats.value) / stats.visits as f64;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(Backup {
                node,
                action_index,
                value,
            });
        }
    }

    /// Folds the root statistics and depth-one particle sets of independently
    /// grown trees into one. Deeper levels are dropped.
    pub(crate) fn merge_roots(trees: Vec<SearchTree<S, A, O>>, root_particles: Vec<S>) -> Self {
        let mut merged = SearchTree::with_root(root_particles, false);
        let mut actions: Vec<A> = trees
            .iter()
            .flat_map(|t| t.nodes[Self::ROOT].stats.iter().map(|s| s.action))
            .collect();
        actions.sort_unstable();
        actions.dedup();
        merged.expand(Self::ROOT, actions);
        for tree in trees {
            let root = &tree.nodes[Self::ROOT];
            merged.nodes[Self::ROOT].visits += root.visits;
            for (stats, branches) in root.stats.iter().zip(&root.children) {
                let idx = merged.nodes[Self::ROOT]
                    .action_index(&stats.action)
                    .expect("action collected above");
                let m = &mut merged.nodes[Self::ROOT].stats[idx];
                let total = m.visits + stats.visits;
                if total > 0 {
                    m.value = (m.value * m.visits as f64 + stats.value * stats.visits as f64) / total as f64;
                }
                m.visits = total;
                for (obs, child) in branches {
                    let id = merged.child_or_insert(Self::ROOT, idx, *obs);
                    let src = &tree.nodes[*child];
                    merged.nodes[id].visits += src.visits;
                    merged.nodes[id].particles.extend(src.particles.iter().cloned());
                }
            }
        }
        merged
    }

    /// Belief after executing `action` and receiving `observation`.
    ///
    /// Returns the particles of the matching child when it holds at least
    /// `floor` of them; otherwise the fallback refills the belief. The tree
    /// is consumed.
    pub fn advance<F>(mut self, action: A, observation: O, floor: usize, fallback: F) -> Belief<S>
    where
        F: FnOnce() -> Belief<S>,
    {
        match self.child(Self::ROOT, action, observation) {
            Some(id) if self.nodes[id].particles.len() >= floor.max(1) => {
                Belief::new(std::mem::take(&mut self.nodes[id].particles))
            }
            _ => fallback(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(v: &[(f64, u64)]) -> Vec<ActionStats<usize>> {
        v.iter()
            .enumerate()
            .map(|(i, &(value, visits))| ActionStats {
                action: i,
                visits,
                value,
            })
            .collect()
    }

    #[test]
    fn unvisited_first_lowest_ordinal() {
        assert_eq!(uct_select(&stats(&[(0.0, 0), (0.0, 0), (0.0, 0)]), 0, 1.0), 0);
        assert_eq!(uct_select(&stats(&[(5.0, 3), (0.0, 0), (0.0, 0)]), 3, 1.0), 1);
    }

    #[test]
    fn exploration_bonus_hand_evaluated() {
        // 1.0 + 2*sqrt(ln 11 / 10) = 1.98, 0.5 + 2*sqrt(ln 11) = 3.60
        let s = stats(&[(1.0, 10), (0.5, 1)]);
        assert_eq!(uct_select(&s, 11, 2.0), 1);
        let a1 = 1.0 + 2.0 * (11f64.ln() / 10.0).sqrt();
        let a2 = 0.5 + 2.0 * 11f64.ln().sqrt();
        assert!((a1 - 1.9795).abs() < 1e-3 && (a2 - 3.5970).abs() < 1e-3);
    }

    #[test]
    fn zero_constant_is_greedy() {
        let s = stats(&[(1.0, 10), (0.5, 1), (1.0, 4)]);
        assert_eq!(uct_select(&s, 15, 0.0), 0);
    }

    #[test]
    fn advance_keeps_child_or_falls_back() {
        let mut tree: SearchTree<u32, usize, bool> = SearchTree::with_root(vec![0], false);
        tree.expand(0, vec![0, 1]);
        let child = tree.child_or_insert(0, 0, false);
        tree.nodes[child].particles = (0..500).collect();
        let b = tree.clone().advance(0, false, 100, || Belief::new(vec![9; 7]));
        assert_eq!(b.particles(), &(0..500).collect::<Vec<_>>()[..]);

        let b = tree.clone().advance(1, false, 100, || Belief::new(vec![9; 7]));
        assert_eq!(b.len(), 7);

        let b = tree.advance(0, false, 501, || Belief::new(vec![9; 7]));
        assert_eq!(b.len(), 7);
    }
}
