//! Placement scoring: the spread distance of a communication group and the
//! weighted max-spread score used to compare placement algorithms.
//!
//! A group's spread is the number of distinct minipods it touches, except
//! that a group confined to one minipod scores zero. This equals the count
//! of positions where the group's one-hot minipod vectors disagree.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{AllocationState, ClusterTopology, JobId, NodeId, NodeStatus};
use crate::workload::CommMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("communication group is empty")]
    EmptyGroup,
    #[error("placement is {got_rows}x{got_cols}, matrix is {rows}x{cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("affinity weights must be non-negative and sum to 1 (alpha={alpha}, beta={beta})")]
    BadWeights { alpha: f64, beta: f64 },
}

/// One matrix cell's destination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellAssignment {
    pub minipod: usize,
    pub node: NodeId,
}

/// Cell → minipod → node mapping plus rank indices.
///
/// Serializes as three JSON objects keyed `"row,col"` (cells, row-major) and
/// node id (ranks, ascending), so dumps diff cleanly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placement {
    rows: usize,
    cols: usize,
    cells: Vec<CellAssignment>,
    rank_of_node: BTreeMap<NodeId, usize>,
}

impl Placement {
    /// Cells in row-major order; node ranks follow the same order.
    pub fn from_cells(rows: usize, cols: usize, cells: Vec<CellAssignment>) -> Self {
        assert_eq!(cells.len(), rows * cols, "placement must cover every cell");
        let rank_of_node = cells
            .iter()
            .enumerate()
            .map(|(slot, c)| (c.node, slot))
            .collect();
        Placement {
            rows,
            cols,
            cells,
            rank_of_node,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell(&self, row: usize, col: usize) -> CellAssignment {
        self.cells[row * self.cols + col]
    }

    /// Row-major.
    pub fn cells(&self) -> &[CellAssignment] {
        &self.cells
    }

    pub fn minipod_of(&self, row: usize, col: usize) -> usize {
        self.cell(row, col).minipod
    }

    pub fn rank_of_node(&self) -> &BTreeMap<NodeId, usize> {
        &self.rank_of_node
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.cells.iter().map(|c| c.node)
    }

    /// Minipods of row `row` (a PP group).
    pub fn row_minipods(&self, row: usize) -> Vec<usize> {
        (0..self.cols).map(|c| self.minipod_of(row, c)).collect()
    }

    /// Minipods of column `col` (a DP group).
    pub fn col_minipods(&self, col: usize) -> Vec<usize> {
        (0..self.rows).map(|r| self.minipod_of(r, col)).collect()
    }

    pub fn minipods_used(&self) -> usize {
        self.cells
            .iter()
            .map(|c| c.minipod)
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("placement serializes")
    }
}

struct CellMap<'a, F: Fn(&CellAssignment) -> usize>(&'a Placement, F);

impl<F: Fn(&CellAssignment) -> usize> Serialize for CellMap<'_, F> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let p = self.0;
        let mut map = s.serialize_map(Some(p.cells.len()))?;
        for r in 0..p.rows {
            for c in 0..p.cols {
                map.serialize_entry(&format!("{r},{c}"), &(self.1)(&p.cell(r, c)))?;
            }
        }
        map.end()
    }
}

struct RankMap<'a>(&'a BTreeMap<NodeId, usize>);

impl Serialize for RankMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (node, rank) in self.0 {
            map.serialize_entry(&node.index().to_string(), rank)?;
        }
        map.end()
    }
}

impl Serialize for Placement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(5))?;
        map.serialize_entry("rows", &self.rows)?;
        map.serialize_entry("cols", &self.cols)?;
        map.serialize_entry("cell_to_minipod", &CellMap(self, |c| c.minipod))?;
        map.serialize_entry("cell_to_node", &CellMap(self, |c| c.node.index()))?;
        map.serialize_entry("rank_of_node", &RankMap(&self.rank_of_node))?;
        map.end()
    }
}

#[derive(Deserialize)]
struct RawPlacement {
    rows: usize,
    cols: usize,
    cell_to_minipod: BTreeMap<String, usize>,
    cell_to_node: BTreeMap<String, usize>,
    rank_of_node: BTreeMap<String, usize>,
}

fn parse_cell_key(key: &str) -> Option<(usize, usize)> {
    let (r, c) = key.split_once(',')?;
    Some((r.trim().parse().ok()?, c.trim().parse().ok()?))
}

impl<'de> Deserialize<'de> for Placement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawPlacement::deserialize(d)?;
        let n = raw.rows * raw.cols;
        let mut pods = vec![None; n];
        let mut nodes = vec![None; n];
        let slot = |key: &str| -> Result<usize, D::Error> {
            let (r, c) = parse_cell_key(key)
                .ok_or_else(|| de::Error::custom(format!("bad cell key {key:?}")))?;
            if r >= raw.rows || c >= raw.cols {
                return Err(de::Error::custom(format!("cell {key} outside matrix")));
            }
            Ok(r * raw.cols + c)
        };
        for (k, &m) in &raw.cell_to_minipod {
            pods[slot(k)?] = Some(m);
        }
        for (k, &node) in &raw.cell_to_node {
            nodes[slot(k)?] = Some(NodeId(node));
        }
        let cells = pods
            .into_iter()
            .zip(nodes)
            .map(|(m, node)| match (m, node) {
                (Some(minipod), Some(node)) => Ok(CellAssignment { minipod, node }),
                _ => Err(de::Error::custom("placement does not cover every cell")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut rank_of_node = BTreeMap::new();
        for (k, &rank) in &raw.rank_of_node {
            let node: usize = k
                .parse()
                .map_err(|_| de::Error::custom(format!("bad node key {k:?}")))?;
            rank_of_node.insert(NodeId(node), rank);
        }
        Ok(Placement {
            rows: raw.rows,
            cols: raw.cols,
            cells,
            rank_of_node,
        })
    }
}

/// Spread of one communication group given each member's minipod.
pub fn group_distance(minipods: &[usize]) -> Result<usize, MetricsError> {
    if minipods.is_empty() {
        return Err(MetricsError::EmptyGroup);
    }
    let distinct = minipods.iter().collect::<BTreeSet<_>>().len();
    Ok(spread_of_count(distinct))
}

/// Distance for a group touching `distinct` minipods.
pub fn spread_of_count(distinct: usize) -> usize {
    if distinct <= 1 {
        0
    } else {
        distinct
    }
}

/// Maximum spreads over DP groups (columns) and PP groups (rows).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SpreadSummary {
    pub max_dp_spread: usize,
    pub max_pp_spread: usize,
    pub minipods_used: usize,
}

impl SpreadSummary {
    pub fn score(&self, alpha: f64, beta: f64) -> f64 {
        alpha * self.max_dp_spread as f64 + beta * self.max_pp_spread as f64
    }
}

pub fn spread_summary(placement: &Placement) -> SpreadSummary {
    let max_of = |groups: usize, members: &dyn Fn(usize) -> Vec<usize>| {
        (0..groups)
            .map(|g| group_distance(&members(g)).unwrap_or(0))
            .max()
            .unwrap_or(0)
    };
    SpreadSummary {
        max_dp_spread: max_of(placement.cols, &|c| placement.col_minipods(c)),
        max_pp_spread: max_of(placement.rows, &|r| placement.row_minipods(r)),
        minipods_used: placement.minipods_used(),
    }
}

pub fn check_weights(alpha: f64, beta: f64) -> Result<(), MetricsError> {
    let ok = alpha >= 0.0 && beta >= 0.0 && ((alpha + beta) - 1.0).abs() <= 1e-9;
    if ok {
        Ok(())
    } else {
        Err(MetricsError::BadWeights { alpha, beta })
    }
}

/// `alpha · max DP-group spread + beta · max PP-group spread`.
pub fn weighted_spread(
    placement: &Placement,
    matrix: &CommMatrix,
    alpha: f64,
    beta: f64,
) -> Result<f64, MetricsError> {
    if placement.rows != matrix.rows || placement.cols != matrix.cols {
        return Err(MetricsError::ShapeMismatch {
            rows: matrix.rows,
            cols: matrix.cols,
            got_rows: placement.rows,
            got_cols: placement.cols,
        });
    }
    check_weights(alpha, beta)?;
    Ok(spread_summary(placement).score(alpha, beta))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlacementViolation {
    #[error("placement shape {got:?} does not match matrix {want:?}")]
    Shape {
        want: (usize, usize),
        got: (usize, usize),
    },
    #[error("node {0} used by more than one cell")]
    DuplicateNode(NodeId),
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("cell ({row},{col}) says minipod {claimed} but node {node} is in minipod {actual}")]
    WrongMinipod {
        row: usize,
        col: usize,
        node: NodeId,
        claimed: usize,
        actual: usize,
    },
    #[error("rank map is not a bijection onto 0..{0}")]
    Ranks(usize),
    #[error("node {node} was not available ({status})")]
    Unavailable { node: NodeId, status: NodeStatus },
}

/// Independent audit of a placement against the topology and, when given,
/// the allocation state it was computed from.
pub fn validate_placement(
    placement: &Placement,
    matrix: &CommMatrix,
    topo: &ClusterTopology,
    state: Option<(&AllocationState, Option<JobId>)>,
) -> Result<(), PlacementViolation> {
    if (placement.rows, placement.cols) != (matrix.rows, matrix.cols) {
        return Err(PlacementViolation::Shape {
            want: (matrix.rows, matrix.cols),
            got: (placement.rows, placement.cols),
        });
    }
    let mut seen = BTreeSet::new();
    for (slot, cell) in placement.cells.iter().enumerate() {
        if !seen.insert(cell.node) {
            return Err(PlacementViolation::DuplicateNode(cell.node));
        }
        let actual = topo
            .minipod_of(cell.node)
            .map_err(|_| PlacementViolation::UnknownNode(cell.node))?;
        if actual != cell.minipod {
            return Err(PlacementViolation::WrongMinipod {
                row: slot / placement.cols,
                col: slot % placement.cols,
                node: cell.node,
                claimed: cell.minipod,
                actual,
            });
        }
        if let Some((state, job)) = state {
            let status = state
                .status(cell.node)
                .map_err(|_| PlacementViolation::UnknownNode(cell.node))?;
            let usable = match status {
                NodeStatus::Free => true,
                NodeStatus::Reserved(owner) => Some(owner) == job,
                NodeStatus::Occupied(_) => false,
            };
            if !usable {
                return Err(PlacementViolation::Unavailable {
                    node: cell.node,
                    status,
                });
            }
        }
    }
    let n = placement.cells.len();
    let ranks: BTreeSet<usize> = placement.rank_of_node.values().copied().collect();
    let keys_match = placement.rank_of_node.keys().all(|k| seen.contains(k));
    if placement.rank_of_node.len() != n
        || ranks.len() != n
        || !keys_match
        || ranks.iter().next_back().is_some_and(|&r| r + 1 != n)
    {
        return Err(PlacementViolation::Ranks(n));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TopologySpec;

    /// Place a grid of minipod ids, picking nodes in order within each pod.
    fn layout(topo: &ClusterTopology, pods: &[&[usize]]) -> Placement {
        let rows = pods.len();
        let cols = pods[0].len();
        let mut next: Vec<_> = topo.minipods().iter().map(|m| m.nodes()).collect();
        let cells = pods
            .iter()
            .flat_map(|row| row.iter())
            .map(|&m| CellAssignment {
                minipod: m,
                node: next[m].next().unwrap(),
            })
            .collect();
        Placement::from_cells(rows, cols, cells)
    }

    fn topo(pods: usize, nodes: usize) -> ClusterTopology {
        ClusterTopology::build(&TopologySpec::uniform("t", pods, nodes)).unwrap()
    }

    #[test]
    fn distances() {
        assert_eq!(group_distance(&[0, 0, 0, 0]).unwrap(), 0);
        assert_eq!(group_distance(&[0, 1]).unwrap(), 2);
        assert_eq!(group_distance(&[0, 1, 2]).unwrap(), 3);
        assert_eq!(group_distance(&[]), Err(MetricsError::EmptyGroup));
    }

    /// One-hot definition: count positions where any two vectors differ.
    fn one_hot_distance(pods: &[usize], k: usize) -> usize {
        (0..k)
            .filter(|&pos| {
                let bits: BTreeSet<bool> = pods.iter().map(|&m| m == pos).collect();
                bits.len() > 1
            })
            .count()
    }

    #[test]
    fn distinct_count_matches_one_hot_comparison() {
        let groups: [&[usize]; 6] = [
            &[0],
            &[1, 1],
            &[0, 2],
            &[3, 1, 3],
            &[0, 1, 2, 3],
            &[2, 2, 0],
        ];
        for g in groups {
            assert_eq!(group_distance(g).unwrap(), one_hot_distance(g, 4), "{g:?}");
        }
    }

    #[test]
    fn dp_aligned_layout_scores_one() {
        // 6x2, each column (DP group) in its own minipod, every row spans 2.
        let t = topo(2, 6);
        let grid: Vec<&[usize]> = vec![&[0, 1]; 6];
        let p = layout(&t, &grid);
        let m = CommMatrix::shape(6, 2);
        assert_eq!(weighted_spread(&p, &m, 0.5, 0.5).unwrap(), 1.0);
        assert_eq!(weighted_spread(&p, &m, 1.0, 0.0).unwrap(), 0.0);
        validate_placement(&p, &m, &t, None).unwrap();
    }

    #[test]
    fn single_minipod_scores_zero() {
        let t = topo(1, 12);
        let grid: Vec<&[usize]> = vec![&[0, 0]; 6];
        let p = layout(&t, &grid);
        let m = CommMatrix::shape(6, 2);
        for a in [0.0, 0.3, 1.0] {
            assert_eq!(weighted_spread(&p, &m, a, 1.0 - a).unwrap(), 0.0);
        }
    }

    #[test]
    fn weight_and_shape_errors() {
        let t = topo(1, 2);
        let p = layout(&t, &[&[0, 0]]);
        assert!(weighted_spread(&p, &CommMatrix::shape(2, 1), 0.5, 0.5).is_err());
        assert!(weighted_spread(&p, &CommMatrix::shape(1, 2), 0.6, 0.6).is_err());
        assert!(weighted_spread(&p, &CommMatrix::shape(1, 2), -0.1, 1.1).is_err());
    }

    #[test]
    fn validator_catches_violations() {
        let t = topo(2, 2);
        let m = CommMatrix::shape(1, 2);
        let dup = Placement::from_cells(
            1,
            2,
            vec![
                CellAssignment {
                    minipod: 0,
                    node: NodeId(0),
                },
                CellAssignment {
                    minipod: 0,
                    node: NodeId(0),
                },
            ],
        );
        assert!(matches!(
            validate_placement(&dup, &m, &t, None),
            Err(PlacementViolation::DuplicateNode(_))
        ));
        let wrong = Placement::from_cells(
            1,
            2,
            vec![
                CellAssignment {
                    minipod: 0,
                    node: NodeId(0),
                },
                CellAssignment {
                    minipod: 0,
                    node: NodeId(2),
                },
            ],
        );
        assert!(matches!(
            validate_placement(&wrong, &m, &t, None),
            Err(PlacementViolation::WrongMinipod { .. })
        ));
        let mut state = AllocationState::new(&t);
        state
            .apply(&[(NodeId(1), NodeStatus::Occupied(JobId(3)))])
            .unwrap();
        let busy = layout(&t, &[&[0, 0]]);
        assert!(matches!(
            validate_placement(&busy, &m, &t, Some((&state, None))),
            Err(PlacementViolation::Unavailable { .. })
        ));
    }

    #[test]
    fn json_is_stable_and_parses() {
        let t = topo(2, 6);
        let grid: Vec<&[usize]> = vec![&[0, 1]; 6];
        let p = layout(&t, &grid);
        let text = p.to_json();
        assert!(text.find("\"0,0\"").unwrap() < text.find("\"5,1\"").unwrap());
        let back: Placement = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(text, back.to_json());
    }
}
