//! Online POMDP planning: Monte-Carlo tree search with UCT over an
//! unweighted particle belief and a black-box generative model.

mod belief;
mod planner;
mod tree;

pub use belief::Belief;
pub use planner::{plan, GenerativeModel, ModelTree, Plan, Pomcp, PomcpError, PomdpConfig, Step};
pub use tree::{uct_select, ActionStats, Backup, SearchTree, TreeNodeId};
