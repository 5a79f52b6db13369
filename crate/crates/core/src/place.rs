//! Tile placement against a grid target model: per-target feasibility of
//! co-location groups, greedy first-fit block assignment, and the pairwise
//! clique relaxation used to demonstrate that binary edges are strictly
//! weaker than one k-ary co-location hyperedge.
//!
//! "Same tile block" means a contiguous axis-aligned rectangle of exactly
//! one tile per member. Routes assume a routed fabric: members must land on
//! distinct tiles of the block, adjacency is not required. The pairwise
//! relaxation check is deliberately weaker: same tile or 8-neighbour
//! adjacency per pair.

use std::collections::BTreeMap;
use std::fmt;

use crate::phg::{EdgeId, EdgeKind, NodeId, Phg};

/// A grid accelerator model: rows x cols tiles, per-tile memory and DMA
/// channel budgets.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TargetModel {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub tile_kb: u32,
    pub dma_channels: u32,
}

impl TargetModel {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, tile_kb: u32, dma_channels: u32) -> Self {
        TargetModel {
            name: name.into(),
            rows,
            cols,
            tile_kb,
            dma_channels,
        }
    }

    pub fn tile_count(&self) -> usize {
        self.rows * self.cols
    }
}

/// Payload of a co-location hyperedge: the member set plus its route
/// topology, DMA channel sharing, synchronization barriers, and per-member
/// memory footprints.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoLocationAnnotation {
    pub members: Vec<NodeId>,
    pub routes: Vec<(NodeId, NodeId)>,
    pub dma_pairs: Vec<(NodeId, NodeId)>,
    pub sync_barriers: Vec<NodeId>,
    pub footprints_kb: BTreeMap<NodeId, u32>,
}

impl CoLocationAnnotation {
    pub fn new(members: Vec<NodeId>) -> Self {
        CoLocationAnnotation {
            members,
            routes: Vec::new(),
            dma_pairs: Vec::new(),
            sync_barriers: Vec::new(),
            footprints_kb: BTreeMap::new(),
        }
    }

    /// Structural validation against the owning hyperedge's source list:
    /// members distinct and equal to the sources, route/DMA endpoints are
    /// members, the route relation is acyclic within the group.
    pub fn validate(&self, sources: &[NodeId]) -> Result<(), String> {
        let mut sorted = self.members.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.members.len() {
            return Err("duplicate members".to_string());
        }
        let mut src = sources.to_vec();
        src.sort_unstable();
        if sorted != src {
            return Err("members must equal the hyperedge source set".to_string());
        }
        for (a, b) in self.routes.iter().chain(&self.dma_pairs) {
            if !self.members.contains(a) || !self.members.contains(b) {
                return Err(format!("pair ({a}, {b}) references a non-member"));
            }
        }
        for s in &self.sync_barriers {
            if !self.members.contains(s) {
                return Err(format!("sync barrier {s} is not a member"));
            }
        }
        if self.topological_order().is_none() {
            return Err("route relation has a cycle".to_string());
        }
        Ok(())
    }

    pub fn footprint(&self, member: NodeId) -> u32 {
        self.footprints_kb.get(&member).copied().unwrap_or(0)
    }

    /// Members in route topological order (member-list order among
    /// independents); `None` when the route relation is cyclic.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let mut indeg: BTreeMap<NodeId, usize> = self.members.iter().map(|m| (*m, 0)).collect();
        for (_, b) in &self.routes {
            *indeg.get_mut(b)? += 1;
        }
        let mut order = Vec::with_capacity(self.members.len());
        let mut ready: Vec<NodeId> = self
            .members
            .iter()
            .copied()
            .filter(|m| indeg[m] == 0)
            .collect();
        while let Some(m) = ready.first().copied() {
            ready.remove(0);
            order.push(m);
            for (a, b) in &self.routes {
                if *a == m {
                    let d = indeg.get_mut(b).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        // keep member-list order among newly ready nodes
                        let pos = self.members.iter().position(|x| x == b).unwrap();
                        let insert_at = ready
                            .iter()
                            .position(|r| self.members.iter().position(|x| x == r).unwrap() > pos)
                            .unwrap_or(ready.len());
                        ready.insert(insert_at, *b);
                    }
                }
            }
        }
        (order.len() == self.members.len()).then_some(order)
    }
}

/// Why a group does not fit a target.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum InfeasibleReason {
    BlockTooLarge,
    MemoryExceeded { member: NodeId, need_kb: u32, budget_kb: u32 },
    ChannelsExceeded { member: NodeId, need: u32, budget: u32 },
    RouteUnroutable { from: NodeId, to: NodeId },
    MixedReachability,
}

impl fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfeasibleReason::BlockTooLarge => write!(f, "no rectangular tile block fits the group"),
            InfeasibleReason::MemoryExceeded { member, need_kb, budget_kb } => {
                write!(f, "member {member} needs {need_kb} KB > tile budget {budget_kb} KB")
            }
            InfeasibleReason::ChannelsExceeded { member, need, budget } => {
                write!(f, "member {member} needs {need} DMA channels > budget {budget}")
            }
            InfeasibleReason::RouteUnroutable { from, to } => {
                write!(f, "route {from} -> {to} cannot map to distinct tiles")
            }
            InfeasibleReason::MixedReachability => {
                write!(f, "group members span mixed target reachability")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Feasibility {
    Feasible,
    Infeasible(InfeasibleReason),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

/// Per (co-location hyperedge x configured target) feasibility.
#[derive(Clone, Debug, serde::Serialize)]
pub struct FeasibilityMatrix {
    pub groups: Vec<EdgeId>,
    pub targets: Vec<String>,
    /// cells[g][t] for group g on target t.
    pub cells: Vec<Vec<Feasibility>>,
}

impl FeasibilityMatrix {
    pub fn cell(&self, group: usize, target: usize) -> &Feasibility {
        &self.cells[group][target]
    }

    pub fn all_feasible(&self) -> bool {
        self.cells.iter().flatten().all(Feasibility::is_feasible)
    }
}

/// Rectangle of tiles: anchor row/col plus extent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BlockRect {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

impl BlockRect {
    pub fn tiles(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (r0, c0, nr, nc) = (self.row, self.col, self.rows, self.cols);
        (0..nr).flat_map(move |r| (0..nc).map(move |c| (r0 + r, c0 + c)))
    }
}

/// A complete placement: member tile assignments, per-group blocks, DMA
/// channel indices, and the barrier schedule (route topological order).
#[derive(Clone, Debug, serde::Serialize)]
pub struct TilePlan {
    pub target: String,
    pub assignments: BTreeMap<NodeId, (usize, usize)>,
    pub blocks: Vec<(EdgeId, BlockRect)>,
    pub dma_channels: Vec<(NodeId, NodeId, u32)>,
    pub barrier_schedule: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlaceError {
    PlacementFailed { group: EdgeId, reason: String },
    NotFeasible { group: EdgeId, reason: InfeasibleReason },
}

impl fmt::Display for PlaceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlaceError::PlacementFailed { group, reason } => {
                write!(f, "placement failed for group {group}: {reason}")
            }
            PlaceError::NotFeasible { group, reason } => {
                write!(f, "group {group} infeasible: {reason}")
            }
        }
    }
}

impl std::error::Error for PlaceError {}

/// Co-location hyperedges of a graph, in declaration order.
pub fn colocation_groups(phg: &Phg) -> Vec<(EdgeId, &CoLocationAnnotation)> {
    phg.edges()
        .iter()
        .filter_map(|e| match &e.kind {
            EdgeKind::CoLocation(g) => Some((e.id, g)),
            _ => None,
        })
        .collect()
}

/// Candidate block shapes for n members: r x c with r*c = n, most-square
/// first, wider-than-tall preferred on ties.
fn block_shapes(n: usize) -> Vec<(usize, usize)> {
    let mut shapes: Vec<(usize, usize)> = (1..=n)
        .filter(|r| n % r == 0)
        .map(|r| (r, n / r))
        .collect();
    shapes.sort_by_key(|(r, c)| (r.abs_diff(*c), *r));
    shapes
}

/// Feasibility of one group on one target, checked in a fixed order:
/// reachability, block geometry, memory, DMA channels, routes.
pub fn group_feasibility(
    phg: &Phg,
    edge: EdgeId,
    group: &CoLocationAnnotation,
    target_index: usize,
    target: &TargetModel,
) -> Feasibility {
    // reachability: the group edge must be active on this target, and every
    // member's producing edges must agree; a mix is reported, not split
    let width = phg.targets.len();
    if width > 0 {
        let bit = 1u64 << target_index;
        let mut any_on = phg.edge(edge).reachability & bit != 0;
        let mut any_off = phg.edge(edge).reachability & bit == 0;
        for m in &group.members {
            for e in phg.producers(*m) {
                if e.reachability & bit != 0 {
                    any_on = true;
                } else {
                    any_off = true;
                }
            }
        }
        if any_on && any_off {
            return Feasibility::Infeasible(InfeasibleReason::MixedReachability);
        }
        if !any_on {
            return Feasibility::Infeasible(InfeasibleReason::MixedReachability);
        }
    }
    let n = group.members.len();
    if !block_shapes(n)
        .iter()
        .any(|(r, c)| *r <= target.rows && *c <= target.cols)
    {
        return Feasibility::Infeasible(InfeasibleReason::BlockTooLarge);
    }
    for m in &group.members {
        let need = group.footprint(*m);
        if need > target.tile_kb {
            return Feasibility::Infeasible(InfeasibleReason::MemoryExceeded {
                member: *m,
                need_kb: need,
                budget_kb: target.tile_kb,
            });
        }
    }
    for m in &group.members {
        let need = group
            .dma_pairs
            .iter()
            .filter(|(a, b)| a == m || b == m)
            .count() as u32;
        if need > target.dma_channels {
            return Feasibility::Infeasible(InfeasibleReason::ChannelsExceeded {
                member: *m,
                need,
                budget: target.dma_channels,
            });
        }
    }
    // one member per block tile, so distinct-tile routing only fails on
    // self-routes, which validation already rejects; kept for completeness
    for (a, b) in &group.routes {
        if a == b {
            return Feasibility::Infeasible(InfeasibleReason::RouteUnroutable { from: *a, to: *b });
        }
    }
    Feasibility::Feasible
}

/// The full feasibility matrix: one cell per (group, target).
pub fn check_feasibility(phg: &Phg, targets: &[TargetModel]) -> FeasibilityMatrix {
    let groups = colocation_groups(phg);
    let cells = groups
        .iter()
        .map(|(id, g)| {
            targets
                .iter()
                .enumerate()
                .map(|(ti, t)| group_feasibility(phg, *id, g, ti, t))
                .collect()
        })
        .collect();
    FeasibilityMatrix {
        groups: groups.iter().map(|(id, _)| *id).collect(),
        targets: targets.iter().map(|t| t.name.clone()).collect(),
        cells,
    }
}

/// Greedy first-fit placement of every co-location group onto one target:
/// groups in declaration order, block shapes most-square first, anchors
/// scanned row-major. Deterministic. Fails (rather than silently relaxing)
/// when groups compete for space.
pub fn assign(phg: &Phg, target: &TargetModel) -> Result<TilePlan, PlaceError> {
    let target_index = phg
        .targets
        .iter()
        .position(|t| *t == target.name)
        .unwrap_or(0);
    let mut occupied = vec![vec![false; target.cols]; target.rows];
    let mut plan = TilePlan {
        target: target.name.clone(),
        assignments: BTreeMap::new(),
        blocks: Vec::new(),
        dma_channels: Vec::new(),
        barrier_schedule: Vec::new(),
    };
    let mut channel_next: BTreeMap<(usize, usize), u32> = BTreeMap::new();

    for (edge, group) in colocation_groups(phg) {
        match group_feasibility(phg, edge, group, target_index, target) {
            Feasibility::Feasible => {}
            Feasibility::Infeasible(reason) => {
                return Err(PlaceError::NotFeasible { group: edge, reason })
            }
        }
        let n = group.members.len();
        let mut placed = None;
        'shapes: for (br, bc) in block_shapes(n) {
            if br > target.rows || bc > target.cols {
                continue;
            }
            for r in 0..=(target.rows - br) {
                for c in 0..=(target.cols - bc) {
                    let rect = BlockRect { row: r, col: c, rows: br, cols: bc };
                    if rect.tiles().all(|(tr, tc)| !occupied[tr][tc]) {
                        placed = Some(rect);
                        break 'shapes;
                    }
                }
            }
        }
        let Some(rect) = placed else {
            return Err(PlaceError::PlacementFailed {
                group: edge,
                reason: format!("no free {n}-tile rectangular block remains"),
            });
        };
        for (tr, tc) in rect.tiles() {
            occupied[tr][tc] = true;
        }
        // members fill the block row-major in member-list order
        for (m, tile) in group.members.iter().zip(rect.tiles()) {
            plan.assignments.insert(*m, tile);
        }
        for (a, b) in &group.dma_pairs {
            let ta = plan.assignments[a];
            let tb = plan.assignments[b];
            let ch = channel_next
                .get(&ta)
                .copied()
                .unwrap_or(0)
                .max(channel_next.get(&tb).copied().unwrap_or(0));
            if ch >= target.dma_channels {
                return Err(PlaceError::PlacementFailed {
                    group: edge,
                    reason: format!("DMA channels exhausted on tile {ta:?}"),
                });
            }
            channel_next.insert(ta, ch + 1);
            channel_next.insert(tb, ch + 1);
            plan.dma_channels.push((*a, *b, ch));
        }
        plan.barrier_schedule
            .extend(group.topological_order().expect("validated at insertion"));
        plan.blocks.push((edge, rect));
    }
    Ok(plan)
}

/// Re-validate an emitted plan against the target budgets: every member
/// assigned, blocks disjoint and in bounds, per-tile memory within budget,
/// channel indices within budget, barriers after their route predecessors.
pub fn validate_plan(phg: &Phg, target: &TargetModel, plan: &TilePlan) -> Result<(), String> {
    let mut tile_mem: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    let mut seen_tiles: Vec<(usize, usize)> = Vec::new();
    for (edge, group) in colocation_groups(phg) {
        let rect = plan
            .blocks
            .iter()
            .find(|(e, _)| *e == edge)
            .map(|(_, r)| r)
            .ok_or_else(|| format!("group {edge} missing from plan"))?;
        if rect.row + rect.rows > target.rows || rect.col + rect.cols > target.cols {
            return Err(format!("block for {edge} out of bounds"));
        }
        for t in rect.tiles() {
            if seen_tiles.contains(&t) {
                return Err(format!("tile {t:?} double-booked"));
            }
            seen_tiles.push(t);
        }
        for m in &group.members {
            let tile = plan
                .assignments
                .get(m)
                .ok_or_else(|| format!("member {m} unassigned"))?;
            if !rect.tiles().any(|t| t == *tile) {
                return Err(format!("member {m} assigned outside its block"));
            }
            *tile_mem.entry(*tile).or_insert(0) += group.footprint(*m);
        }
        for (a, b) in &group.routes {
            if plan.assignments[a] == plan.assignments[b] {
                return Err(format!("route {a} -> {b} collapsed onto one tile"));
            }
            let pa = plan.barrier_schedule.iter().position(|x| x == a).unwrap();
            let pb = plan.barrier_schedule.iter().position(|x| x == b).unwrap();
            if pa >= pb {
                return Err(format!("barrier schedule violates route {a} -> {b}"));
            }
        }
    }
    for (tile, kb) in tile_mem {
        if kb > target.tile_kb {
            return Err(format!("tile {tile:?} holds {kb} KB > {} KB", target.tile_kb));
        }
    }
    for (_, _, ch) in &plan.dma_channels {
        if *ch >= target.dma_channels {
            return Err(format!("channel index {ch} exceeds budget"));
        }
    }
    Ok(())
}

/// All unordered member pairs: the binary-clique approximation of the
/// group constraint. Each pair demands only the weaker same-or-adjacent
/// check; used for the strictness demonstration.
pub fn clique_relaxation(group: &CoLocationAnnotation) -> Vec<(NodeId, NodeId)> {
    let mut pairs = Vec::new();
    for i in 0..group.members.len() {
        for j in (i + 1)..group.members.len() {
            pairs.push((group.members[i], group.members[j]));
        }
    }
    pairs
}

/// The k-ary group check on an explicit assignment: members occupy pairwise
/// distinct tiles forming a contiguous rectangle of exactly |members| tiles.
pub fn group_check(assignment: &BTreeMap<NodeId, (usize, usize)>, members: &[NodeId]) -> bool {
    let tiles: Vec<(usize, usize)> = members
        .iter()
        .filter_map(|m| assignment.get(m).copied())
        .collect();
    if tiles.len() != members.len() {
        return false;
    }
    let mut distinct = tiles.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != tiles.len() {
        return false;
    }
    let r0 = tiles.iter().map(|t| t.0).min().unwrap();
    let r1 = tiles.iter().map(|t| t.0).max().unwrap();
    let c0 = tiles.iter().map(|t| t.1).min().unwrap();
    let c1 = tiles.iter().map(|t| t.1).max().unwrap();
    (r1 - r0 + 1) * (c1 - c0 + 1) == tiles.len()
}

/// The weaker pairwise check: same tile, or 8-neighbour adjacency.
pub fn pairwise_check(
    assignment: &BTreeMap<NodeId, (usize, usize)>,
    pair: (NodeId, NodeId),
) -> bool {
    let (Some(a), Some(b)) = (assignment.get(&pair.0), assignment.get(&pair.1)) else {
        return false;
    };
    a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phg::{EdgeSpec, NodeSpec};

    /// The four-stage pipeline: load A feeds computes B and C, reduce D
    /// joins them; A and D share a DMA channel; D waits on both computes.
    pub(crate) fn pipeline_phg() -> (Phg, EdgeId, [NodeId; 4]) {
        let mut phg = Phg::new();
        phg.targets = vec!["npu".to_string()];
        let a = phg.add_node(NodeSpec::scalar("load_a")).unwrap();
        let b = phg.add_node(NodeSpec::scalar("compute_b")).unwrap();
        let c = phg.add_node(NodeSpec::scalar("compute_c")).unwrap();
        let d = phg.add_node(NodeSpec::scalar("reduce_d")).unwrap();
        let out = phg.add_node(NodeSpec::scalar("output")).unwrap();
        let mut group = CoLocationAnnotation::new(vec![a, b, c, d]);
        group.routes = vec![(a, b), (a, c), (b, d), (c, d)];
        group.dma_pairs = vec![(a, d)];
        group.sync_barriers = vec![d];
        for m in [a, b, c, d] {
            group.footprints_kb.insert(m, 8);
        }
        let edge = phg
            .add_hyperedge(EdgeSpec::new(EdgeKind::CoLocation(group), vec![a, b, c, d], out))
            .unwrap();
        (phg, edge, [a, b, c, d])
    }

    #[test]
    fn pipeline_feasible_on_2x2() {
        let (phg, _, _) = pipeline_phg();
        let t = TargetModel::new("npu", 2, 2, 32, 2);
        let m = check_feasibility(&phg, &[t]);
        assert!(m.all_feasible());
    }

    #[test]
    fn no_four_tile_rectangle_on_1x3() {
        let (phg, _, _) = pipeline_phg();
        let t = TargetModel::new("npu", 1, 3, 32, 2);
        let m = check_feasibility(&phg, &[t]);
        assert_eq!(
            m.cell(0, 0),
            &Feasibility::Infeasible(InfeasibleReason::BlockTooLarge)
        );
    }

    #[test]
    fn footprint_over_budget() {
        let mut phg = Phg::new();
        let ids: Vec<NodeId> = (0..4)
            .map(|i| phg.add_node(NodeSpec::scalar(format!("m{i}"))).unwrap())
            .collect();
        let out = phg.add_node(NodeSpec::scalar("out")).unwrap();
        let mut group = CoLocationAnnotation::new(ids.clone());
        group.footprints_kb.insert(ids[1], 40);
        phg.add_hyperedge(EdgeSpec::new(EdgeKind::CoLocation(group), ids, out))
            .unwrap();
        let m = check_feasibility(&phg, &[TargetModel::new("npu", 2, 2, 32, 2)]);
        assert!(matches!(
            m.cell(0, 0),
            Feasibility::Infeasible(InfeasibleReason::MemoryExceeded { need_kb: 40, .. })
        ));
    }

    #[test]
    fn pipeline_places_as_2x2_block_with_reduction_tree() {
        let (phg, _, [a, b, c, d]) = pipeline_phg();
        let t = TargetModel::new("npu", 2, 2, 32, 2);
        let plan = assign(&phg, &t).unwrap();
        assert_eq!(plan.assignments[&a], (0, 0));
        assert_eq!(plan.assignments[&b], (0, 1));
        assert_eq!(plan.assignments[&c], (1, 0));
        assert_eq!(plan.assignments[&d], (1, 1));
        // reduce_d scheduled after both computes
        let pos = |n: NodeId| plan.barrier_schedule.iter().position(|x| *x == n).unwrap();
        assert!(pos(d) > pos(b) && pos(d) > pos(c));
        assert_eq!(plan.dma_channels, vec![(a, d, 0)]);
        validate_plan(&phg, &t, &plan).unwrap();
    }

    #[test]
    fn two_groups_side_by_side_then_area_exhausted() {
        let mut phg = Phg::new();
        let make_group = |phg: &mut Phg, tag: &str| {
            let ids: Vec<NodeId> = (0..4)
                .map(|i| phg.add_node(NodeSpec::scalar(format!("{tag}{i}"))).unwrap())
                .collect();
            let out = phg.add_node(NodeSpec::scalar(format!("{tag}out"))).unwrap();
            let group = CoLocationAnnotation::new(ids.clone());
            phg.add_hyperedge(EdgeSpec::new(EdgeKind::CoLocation(group), ids, out))
                .unwrap()
        };
        make_group(&mut phg, "g");
        make_group(&mut phg, "h");
        let wide = TargetModel::new("wide", 2, 4, 32, 2);
        let plan = assign(&phg, &wide).unwrap();
        let rects: Vec<BlockRect> = plan.blocks.iter().map(|(_, r)| *r).collect();
        assert_eq!(rects[0], BlockRect { row: 0, col: 0, rows: 2, cols: 2 });
        assert_eq!(rects[1], BlockRect { row: 0, col: 2, rows: 2, cols: 2 });

        // five 2x2 groups cannot fit a 4x4 grid
        let mut phg5 = Phg::new();
        for i in 0..5 {
            make_group(&mut phg5, &format!("q{i}"));
        }
        let grid = TargetModel::new("grid", 4, 4, 32, 2);
        match assign(&phg5, &grid) {
            Err(PlaceError::PlacementFailed { group, .. }) => {
                assert_eq!(group, colocation_groups(&phg5)[4].0);
            }
            other => panic!("expected failure on the fifth group, got {other:?}"),
        }
    }

    #[test]
    fn clique_pair_counts() {
        let g4 = CoLocationAnnotation::new((0..4).map(NodeId).collect());
        assert_eq!(clique_relaxation(&g4).len(), 6);
        let g3 = CoLocationAnnotation::new((0..3).map(NodeId).collect());
        assert_eq!(clique_relaxation(&g3).len(), 3);
    }

    #[test]
    fn group_check_requires_full_rectangle() {
        let members: Vec<NodeId> = (0..4).map(NodeId).collect();
        let mut asg = BTreeMap::new();
        asg.insert(members[0], (0, 0));
        asg.insert(members[1], (0, 1));
        asg.insert(members[2], (1, 0));
        asg.insert(members[3], (1, 1));
        assert!(group_check(&asg, &members));
        // L-shape with a shared tile passes every pairwise check but not
        // the group check
        asg.insert(members[3], (0, 0));
        assert!(!group_check(&asg, &members));
        let g = CoLocationAnnotation::new(members.clone());
        for pair in clique_relaxation(&g) {
            assert!(pairwise_check(&asg, pair));
        }
    }

    #[test]
    fn annotation_validation() {
        let members: Vec<NodeId> = (0..3).map(NodeId).collect();
        let mut g = CoLocationAnnotation::new(members.clone());
        assert!(g.validate(&members).is_ok());
        g.routes = vec![(members[0], members[1]), (members[1], members[0])];
        assert!(g.validate(&members).unwrap_err().contains("cycle"));
        g.routes = vec![(members[0], NodeId(9))];
        assert!(g.validate(&members).unwrap_err().contains("non-member"));
    }
}
