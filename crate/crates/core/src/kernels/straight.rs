//! Straight-line movement on unoriented grids.
//!
//! A group at internal node `v` that entered through port `b` leaves some
//! members behind as landmarks while scouts enumerate every non-backtracking
//! walk of length four starting with the smallest port other than `b`. Walks
//! that end back at `v` (recognised by a landmark) trace the two unit
//! squares through the first edge; their entry ports pin down the port
//! opposite `b`.

use thiserror::Error;

use super::{HopPeer, PortSet, Step, R_HOP};
use crate::engine::{LocalView, MoveKind, RobotId};
use crate::grid::{Grid, NodeId, Port};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProbeFailure {
    #[error("return set has {0} entries, expected 2")]
    ReturnSet(u32),
    #[error("straight movement needs a degree-4 node, found degree {0}")]
    NotInternal(u8),
}

/// Port opposite the backward port `back`, from the return-entry set.
pub fn resolve_straight_port(degree: u8, back: Port, returns: PortSet) -> Result<Port, ProbeFailure> {
    if degree != 4 {
        return Err(ProbeFailure::NotInternal(degree));
    }
    if returns.len() != 2 {
        return Err(ProbeFailure::ReturnSet(returns.len()));
    }
    if returns.contains(back) {
        Ok(returns.iter().find(|&p| p != back).expect("two entries"))
    } else {
        Ok((1..=4).find(|&p| p != back && !returns.contains(p)).expect("one port left"))
    }
}

/// The return-entry set a crash-free probe from `v` would collect, computed
/// directly on the grid (same enumeration order as [`Probe`]).
pub fn return_set(grid: &Grid, v: NodeId, back: Port) -> PortSet {
    fn walk(grid: &Grid, v: NodeId, at: NodeId, entry: Port, depth: u8, out: &mut PortSet) {
        if depth == 4 {
            if at == v {
                out.insert(entry);
            }
            return;
        }
        for q in (1..=grid.degree(at)).filter(|&q| q != entry) {
            let (to, e) = grid.traverse(at, q).expect("port in range");
            walk(grid, v, to, e, depth + 1, out);
        }
    }
    let mut out = PortSet::new();
    if let Some(p) = (1..=grid.degree(v)).find(|&p| p != back) {
        let (u, e) = grid.traverse(v, p).expect("port in range");
        walk(grid, v, u, e, 1, &mut out);
    }
    out
}

/// What scouts look for to recognise the start node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Landmark {
    /// Any waiting member of this group.
    Group(RobotId),
    /// A specific settled robot.
    Robot(RobotId),
}

impl Landmark {
    pub fn present<S: HopPeer>(self, view: &LocalView<'_, S>) -> bool {
        view.peers.iter().any(|p| match self {
            Landmark::Robot(id) => p.id == id,
            Landmark::Group(key) => !p.settled && matches!(p.state.hop(), Some(h) if h.key == key && matches!(h.stage, HopStage::Wait { .. })),
        })
    }
}

/// Depth-first enumeration of the length-4 walks out of the start node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    pub landmark: Landmark,
    pub back: Port,
    pub found: PortSet,
    pub done: bool,
    early_stop: bool,
    depth: u8,
    descending: bool,
    /// `entry[d]`: port at the depth-`d` node leading back up.
    entry: [Port; 5],
    /// `tried[d]`: last port tried downward from the depth-`d` node.
    tried: [Port; 5],
}

impl Probe {
    pub fn new(landmark: Landmark, back: Port, early_stop: bool) -> Self {
        Probe {
            landmark,
            back,
            found: PortSet::new(),
            done: false,
            early_stop,
            depth: 0,
            descending: false,
            entry: [0; 5],
            tried: [0; 5],
        }
    }

    /// Next move; the probe is `done` once the move returning to the start is issued.
    pub fn next<S: HopPeer>(&mut self, view: &LocalView<'_, S>) -> Port {
        debug_assert!(!self.done);
        let d = usize::from(self.depth);
        if self.descending {
            self.descending = false;
            self.entry[d] = view.arrived_via.expect("probe moved last round");
            self.tried[d] = 0;
            if d == 4 && self.landmark.present(view) {
                self.found.insert(self.entry[4]);
            }
        }
        if d == 0 {
            let p = (1..=view.degree()).find(|&p| p != self.back).expect("degree >= 2");
            self.tried[0] = p;
            return self.down(p);
        }
        let stop = self.early_stop && self.found.len() >= 2;
        if d < 4 && !stop {
            let from = self.tried[d] + 1;
            if let Some(q) = (from..=view.degree()).find(|&q| q != self.entry[d]) {
                self.tried[d] = q;
                return self.down(q);
            }
        }
        self.depth -= 1;
        if self.depth == 0 {
            self.done = true;
        }
        self.entry[d]
    }

    fn down(&mut self, p: Port) -> Port {
        self.depth += 1;
        self.descending = true;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HopStage {
    /// At a node, about to start (or just finished) a hop.
    Ready,
    Scout(Probe),
    Wait {
        deadline: u64,
    },
}

/// One group's progress along a straight line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    /// Minimum id of the group when it last (re)formed.
    pub key: RobotId,
    pub back: Port,
    pub stage: HopStage,
    /// Scouts are the upper half instead of the single largest id.
    pub halving: bool,
    pub early_stop: bool,
    /// Failed attempts over the whole journey.
    pub failures: u32,
    pub hops: u32,
}

impl Hop {
    pub fn new(key: RobotId, back: Port, halving: bool, early_stop: bool) -> Self {
        Hop {
            key,
            back,
            stage: HopStage::Ready,
            halving,
            early_stop,
            failures: 0,
            hops: 0,
        }
    }

    pub fn is_scout(&self) -> bool {
        matches!(self.stage, HopStage::Scout(_))
    }

    /// Bits held by a hop in progress: key, backward port, stage and
    /// deadline, counters, and the probe's found set and port stacks.
    pub fn memory_bits(&self, id_bits: u64, side: u64) -> u64 {
        let counters = super::bits(u64::from(self.failures)) + super::bits(side);
        let probe = match &self.stage {
            HopStage::Scout(_) => 4 + 1 + 3 + 5 * 2 + 5 * 3,
            _ => 0,
        };
        id_bits + 2 + 2 + super::bits(R_HOP) + counters + probe
    }

    fn returned(&self) -> Option<PortSet> {
        match &self.stage {
            HopStage::Scout(p) if p.done => Some(p.found),
            _ => None,
        }
    }

    /// Advance one round. `members` are the ready robots of this group at the
    /// node (ascending, including the caller) and `anchor` a settled robot
    /// that may serve as landmark for a lone robot. A [`Step::Settle`]
    /// result means the robot is alone with nothing to navigate by.
    pub fn step<S: HopPeer>(&mut self, me: RobotId, view: &LocalView<'_, S>, members: &[RobotId], anchor: Option<RobotId>) -> Step {
        match &mut self.stage {
            HopStage::Ready => {
                if let Some(e) = view.arrived_via {
                    self.back = e;
                }
                self.begin(me, view, members, anchor)
            }
            HopStage::Scout(probe) if !probe.done => {
                let p = probe.next(view);
                Step::Move(p, MoveKind::Probe)
            }
            HopStage::Scout(probe) => {
                let (landmark, found) = (probe.landmark, probe.found);
                if landmark.present(view) {
                    if let Ok(s) = resolve_straight_port(view.degree(), self.back, found) {
                        return self.commit(s);
                    }
                }
                let key = self.key;
                let peers = group_where(view, key, |h| h.returned().is_some());
                self.fail(me, view, &peers)
            }
            HopStage::Wait { deadline } => {
                let deadline = *deadline;
                let key = self.key;
                let back_scout = view
                    .peers
                    .iter()
                    .filter(|p| !p.settled)
                    .filter_map(|p| p.state.hop())
                    .filter(|h| h.key == key)
                    .find_map(|h| h.returned());
                match back_scout {
                    Some(found) => match resolve_straight_port(view.degree(), self.back, found) {
                        Ok(s) => self.commit(s),
                        Err(_) => {
                            let peers = group_where(view, key, |h| matches!(h.stage, HopStage::Wait { .. }));
                            self.fail(me, view, &peers)
                        }
                    },
                    None if view.round >= deadline => {
                        let peers = group_where(view, key, |h| matches!(h.stage, HopStage::Wait { .. }));
                        self.fail(me, view, &peers)
                    }
                    None => Step::Stay,
                }
            }
        }
    }

    fn commit(&mut self, s: Port) -> Step {
        self.stage = HopStage::Ready;
        self.hops += 1;
        Step::Move(s, MoveKind::Straight)
    }

    fn fail<S: HopPeer>(&mut self, me: RobotId, view: &LocalView<'_, S>, survivors: &[RobotId]) -> Step {
        self.failures += 1;
        self.stage = HopStage::Ready;
        let anchor = super::settled_here(view);
        self.begin(me, view, survivors, anchor)
    }

    fn begin<S: HopPeer>(&mut self, me: RobotId, view: &LocalView<'_, S>, members: &[RobotId], anchor: Option<RobotId>) -> Step {
        debug_assert!(members.contains(&me));
        let t = members.len();
        if t == 1 {
            return match anchor {
                Some(l) => {
                    self.stage = HopStage::Scout(Probe::new(Landmark::Robot(l), self.back, self.early_stop));
                    self.step(me, view, members, anchor)
                }
                None => Step::Settle,
            };
        }
        self.key = members[0];
        let scouts = if self.halving { t.div_ceil(2) } else { 1 };
        if members[t - scouts..].contains(&me) {
            self.stage = HopStage::Scout(Probe::new(Landmark::Group(self.key), self.back, self.early_stop));
            self.step(me, view, members, anchor)
        } else {
            self.stage = HopStage::Wait { deadline: view.round + R_HOP };
            Step::Stay
        }
    }
}

fn group_where<S: HopPeer>(view: &LocalView<'_, S>, key: RobotId, pred: impl Fn(&Hop) -> bool) -> Vec<RobotId> {
    view.peers
        .iter()
        .filter(|p| !p.settled)
        .filter(|p| matches!(p.state.hop(), Some(h) if h.key == key && pred(h)))
        .map(|p| p.id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Orientation};

    #[test]
    fn resolves_both_cases() {
        assert_eq!(resolve_straight_port(4, 2, PortSet::of(&[2, 4])), Ok(4));
        assert_eq!(resolve_straight_port(4, 2, PortSet::of(&[1, 3])), Ok(4));
        assert_eq!(resolve_straight_port(4, 3, PortSet::of(&[1, 2])), Ok(4));
        assert_eq!(resolve_straight_port(4, 1, PortSet::of(&[2])), Err(ProbeFailure::ReturnSet(1)));
        assert_eq!(resolve_straight_port(3, 1, PortSet::of(&[2, 3])), Err(ProbeFailure::NotInternal(3)));
    }

    #[test]
    fn straight_port_is_opposite_backward_port_everywhere() {
        let g = Grid::build(&GridSpec::square(5, Orientation::Unoriented, 11)).unwrap();
        let mut checked = 0;
        for v in (0..g.node_count()).filter(|&v| g.degree(v) == 4) {
            for b in 1..=4 {
                let r = return_set(&g, v, b);
                let s = resolve_straight_port(4, b, r).unwrap();
                assert_eq!(g.oracle_direction(v, s), g.oracle_direction(v, b).opposite());
                checked += 1;
            }
        }
        assert_eq!(checked, 9 * 4);
    }
}
