//! Three-tier CLOS cluster model: core switches above minipods (one spine
//! each), racks (one leaf each) below, nodes in racks.
//!
//! The topology is immutable once built. Per-node allocation status lives in
//! [`AllocationState`], which callers mutate through [`AllocationState::apply`].

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// GPUs per node when a topology file does not say otherwise.
pub const DEFAULT_GPUS_PER_NODE: u32 = 8;

/// Dense, globally unique node index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Identifier of a job owning or reserving nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u64);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "job-{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("topology has no minipods")]
    NoMinipods,
    #[error("minipod {0} has no nodes")]
    EmptyMinipod(usize),
    #[error("rack {rack} of minipod {minipod} has zero nodes")]
    EmptyRack { minipod: usize, rack: usize },
    #[error("duplicate minipod id {0}")]
    DuplicateMinipodId(usize),
    #[error("minipod ids must be dense 0..{count}, found {id}")]
    SparseMinipodId { id: usize, count: usize },
    #[error("gpus_per_node must be positive")]
    ZeroGpusPerNode,
    #[error("minipod index {index} out of range (cluster has {count})")]
    InvalidMinipod { index: usize, count: usize },
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("illegal transition on {node}: {from} -> {to}")]
    IllegalTransition {
        node: NodeId,
        from: NodeStatus,
        to: NodeStatus,
    },
    #[error("reading topology file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing topology file: {0}")]
    Json(#[from] serde_json::Error),
}

/// On-disk topology description.
///
/// ```json
/// {"name": "pod-a", "gpus_per_node": 8,
///  "minipods": [{"racks": [{"nodes": 4}, {"nodes": 2}]}]}
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySpec {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_gpus_per_node")]
    pub gpus_per_node: u32,
    pub minipods: Vec<MinipodSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinipodSpec {
    /// Optional explicit id; when present on any minipod it must be present
    /// on all of them and form a permutation of `0..k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
    pub racks: Vec<RackSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RackSpec {
    pub nodes: usize,
}

fn default_gpus_per_node() -> u32 {
    DEFAULT_GPUS_PER_NODE
}

impl TopologySpec {
    /// Minipods with the given node counts, each split into racks of at most
    /// `rack_size` nodes.
    pub fn from_minipod_sizes(name: impl Into<String>, sizes: &[usize], rack_size: usize) -> Self {
        let rack_size = rack_size.max(1);
        let minipods = sizes
            .iter()
            .map(|&size| {
                let mut racks = Vec::new();
                let mut left = size;
                while left > 0 {
                    let n = left.min(rack_size);
                    racks.push(RackSpec { nodes: n });
                    left -= n;
                }
                MinipodSpec { id: None, racks }
            })
            .collect();
        TopologySpec {
            name: name.into(),
            gpus_per_node: DEFAULT_GPUS_PER_NODE,
            minipods,
        }
    }

    /// `count` minipods of `nodes` nodes each, one rack per minipod.
    pub fn uniform(name: impl Into<String>, count: usize, nodes: usize) -> Self {
        Self::from_minipod_sizes(name, &vec![nodes; count], nodes)
    }

    /// Spread `total` nodes over `count` minipods as evenly as possible; the
    /// first `total % count` minipods get one extra node.
    pub fn balanced(name: impl Into<String>, count: usize, total: usize, rack_size: usize) -> Self {
        let count = count.max(1);
        let sizes: Vec<usize> = (0..count)
            .map(|i| total / count + usize::from(i < total % count))
            .collect();
        Self::from_minipod_sizes(name, &sizes, rack_size)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TopologyError> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rack {
    pub id: usize,
    pub nodes: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Minipod {
    pub id: usize,
    pub racks: Vec<Rack>,
    pub capacity: usize,
}

impl Minipod {
    /// Nodes in (rack, position) order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.racks.iter().flat_map(|r| r.nodes.iter().copied())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NodeHome {
    pub minipod: usize,
    pub rack: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterTopology {
    pub name: String,
    pub gpus_per_node: u32,
    minipods: Vec<Minipod>,
    homes: Vec<NodeHome>,
}

impl ClusterTopology {
    /// Validate a spec and assign node ids in (minipod, rack, position) order.
    pub fn build(spec: &TopologySpec) -> Result<Self, TopologyError> {
        if spec.minipods.is_empty() {
            return Err(TopologyError::NoMinipods);
        }
        if spec.gpus_per_node == 0 {
            return Err(TopologyError::ZeroGpusPerNode);
        }

        let count = spec.minipods.len();
        let order = minipod_order(&spec.minipods)?;

        let mut minipods = Vec::with_capacity(count);
        let mut homes = Vec::new();
        for (pod_id, &spec_index) in order.iter().enumerate() {
            let pod_spec = &spec.minipods[spec_index];
            let mut racks = Vec::with_capacity(pod_spec.racks.len());
            for (rack_id, rack) in pod_spec.racks.iter().enumerate() {
                if rack.nodes == 0 {
                    return Err(TopologyError::EmptyRack {
                        minipod: pod_id,
                        rack: rack_id,
                    });
                }
                let nodes = (0..rack.nodes)
                    .map(|_| {
                        let id = NodeId(homes.len());
                        homes.push(NodeHome {
                            minipod: pod_id,
                            rack: rack_id,
                        });
                        id
                    })
                    .collect();
                racks.push(Rack { id: rack_id, nodes });
            }
            let capacity: usize = racks.iter().map(|r| r.nodes.len()).sum();
            if capacity == 0 {
                return Err(TopologyError::EmptyMinipod(pod_id));
            }
            minipods.push(Minipod {
                id: pod_id,
                racks,
                capacity,
            });
        }

        Ok(ClusterTopology {
            name: spec.name.clone(),
            gpus_per_node: spec.gpus_per_node,
            minipods,
            homes,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TopologyError> {
        Self::build(&TopologySpec::from_path(path)?)
    }

    /// Number of minipods (`k`).
    pub fn minipod_count(&self) -> usize {
        self.minipods.len()
    }

    pub fn node_count(&self) -> usize {
        self.homes.len()
    }

    pub fn minipods(&self) -> &[Minipod] {
        &self.minipods
    }

    pub fn minipod(&self, index: usize) -> Result<&Minipod, TopologyError> {
        self.minipods
            .get(index)
            .ok_or(TopologyError::InvalidMinipod {
                index,
                count: self.minipods.len(),
            })
    }

    pub fn home(&self, node: NodeId) -> Result<NodeHome, TopologyError> {
        self.homes
            .get(node.index())
            .copied()
            .ok_or(TopologyError::UnknownNode(node))
    }

    pub fn minipod_of(&self, node: NodeId) -> Result<usize, TopologyError> {
        self.home(node).map(|h| h.minipod)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.homes.len()).map(NodeId)
    }
}

fn minipod_order(pods: &[MinipodSpec]) -> Result<Vec<usize>, TopologyError> {
    let count = pods.len();
    if pods.iter().all(|p| p.id.is_none()) {
        return Ok((0..count).collect());
    }
    let mut order = vec![usize::MAX; count];
    for (index, pod) in pods.iter().enumerate() {
        // Mixed explicit/implicit ids are treated as a density violation.
        let id = pod
            .id
            .ok_or(TopologyError::SparseMinipodId { id: index, count })?;
        if id >= count {
            return Err(TopologyError::SparseMinipodId { id, count });
        }
        if order[id] != usize::MAX {
            return Err(TopologyError::DuplicateMinipodId(id));
        }
        order[id] = index;
    }
    Ok(order)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", content = "job", rename_all = "snake_case")]
pub enum NodeStatus {
    Free,
    Reserved(JobId),
    Occupied(JobId),
}

impl NodeStatus {
    pub fn is_free(self) -> bool {
        matches!(self, NodeStatus::Free)
    }

    pub fn owner(self) -> Option<JobId> {
        match self {
            NodeStatus::Free => None,
            NodeStatus::Reserved(j) | NodeStatus::Occupied(j) => Some(j),
        }
    }

    fn can_become(self, next: NodeStatus) -> bool {
        use NodeStatus::*;
        match (self, next) {
            (Free, Reserved(_) | Occupied(_)) => true,
            (Reserved(owner), Occupied(job)) => owner == job,
            (Reserved(_), Free) => true,
            (Occupied(_), Free) => true,
            _ => false,
        }
    }
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeStatus::Free => write!(f, "free"),
            NodeStatus::Reserved(j) => write!(f, "reserved({j})"),
            NodeStatus::Occupied(j) => write!(f, "occupied({j})"),
        }
    }
}

/// Per-node status. Single writer; callers serialize mutations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AllocationState {
    status: Vec<NodeStatus>,
}

impl AllocationState {
    /// Every node free.
    pub fn new(topo: &ClusterTopology) -> Self {
        AllocationState {
            status: vec![NodeStatus::Free; topo.node_count()],
        }
    }

    pub fn status(&self, node: NodeId) -> Result<NodeStatus, TopologyError> {
        self.status
            .get(node.index())
            .copied()
            .ok_or(TopologyError::UnknownNode(node))
    }

    pub fn statuses(&self) -> &[NodeStatus] {
        &self.status
    }

    /// Apply transitions in order. Either every transition is legal and the
    /// whole batch commits, or the state is left untouched.
    pub fn apply(&mut self, transitions: &[(NodeId, NodeStatus)]) -> Result<(), TopologyError> {
        let mut next = self.status.clone();
        for &(node, to) in transitions {
            let slot = next
                .get_mut(node.index())
                .ok_or(TopologyError::UnknownNode(node))?;
            if !slot.can_become(to) {
                return Err(TopologyError::IllegalTransition {
                    node,
                    from: *slot,
                    to,
                });
            }
            *slot = to;
        }
        self.status = next;
        Ok(())
    }

    pub fn count_where(&self, pred: impl Fn(NodeStatus) -> bool) -> usize {
        self.status.iter().filter(|s| pred(**s)).count()
    }

    pub fn occupied_count(&self) -> usize {
        self.count_where(|s| matches!(s, NodeStatus::Occupied(_)))
    }

    pub fn reserved_count(&self) -> usize {
        self.count_where(|s| matches!(s, NodeStatus::Reserved(_)))
    }

    pub fn free_count(&self) -> usize {
        self.count_where(NodeStatus::is_free)
    }

    /// Nodes of one minipod usable by `job`: free ones plus those reserved
    /// for `job`, in (rack, node id) order.
    pub fn usable_nodes<'a>(
        &'a self,
        topo: &'a ClusterTopology,
        minipod: usize,
        include_reserved_for: Option<JobId>,
    ) -> Result<impl Iterator<Item = NodeId> + 'a, TopologyError> {
        let pod = topo.minipod(minipod)?;
        Ok(pod.nodes().filter(move |n| match self.status[n.index()] {
            NodeStatus::Free => true,
            NodeStatus::Reserved(j) => Some(j) == include_reserved_for,
            NodeStatus::Occupied(_) => false,
        }))
    }
}

/// Free nodes in `minipod`, plus nodes reserved for `include_reserved_for`.
pub fn available_capacity(
    topo: &ClusterTopology,
    state: &AllocationState,
    minipod: usize,
    include_reserved_for: Option<JobId>,
) -> Result<usize, TopologyError> {
    Ok(state
        .usable_nodes(topo, minipod, include_reserved_for)?
        .count())
}

/// [`available_capacity`] for every minipod, in minipod order.
pub fn available_capacities(
    topo: &ClusterTopology,
    state: &AllocationState,
    include_reserved_for: Option<JobId>,
) -> Vec<usize> {
    (0..topo.minipod_count())
        .map(|m| {
            available_capacity(topo, state, m, include_reserved_for)
                .expect("minipod index in range")
        })
        .collect()
}
