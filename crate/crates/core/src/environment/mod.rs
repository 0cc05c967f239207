//! World model: grid map, pose graph, field of view and observability.

mod fov;
mod graph;
mod map;
mod pose;

pub use fov::{line_of_sight, supercover_line, visible_locations, FovError, FovParams, VisibilityMatrix};
pub use graph::{Blocked, GraphError, NodeId, PoseGraph};
pub use map::{Cell, GridMap, ParseError};
pub use pose::{Action, Pose};

/// Map, pose graph, sensor cone and the derived observability matrix,
/// built once and shared read-only.
#[derive(Debug, Clone)]
pub struct World {
    pub map: GridMap,
    pub graph: PoseGraph,
    pub fov: FovParams,
    pub visibility: VisibilityMatrix,
}

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Fov(#[from] FovError),
}

impl World {
    pub fn build(map: GridMap, delta_theta: u16, fov: FovParams) -> Result<Self, WorldError> {
        fov.validate()?;
        let graph = PoseGraph::build(&map, delta_theta)?;
        let visibility = VisibilityMatrix::compute(&map, &graph, &fov);
        Ok(World {
            map,
            graph,
            fov,
            visibility,
        })
    }

    pub fn num_locations(&self) -> usize {
        self.map.num_candidates()
    }
}
