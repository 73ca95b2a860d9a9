//! Movement building blocks shared by the unoriented protocols.
//!
//! Kernels are plain state machines embedded in a protocol's robot state.
//! Group members run identical copies; since co-located robots observe the
//! same view, the copies stay in lockstep without any messages.

mod boundary;
mod journey;
mod straight;

pub use boundary::{Enter, EnterStep, Walk, WalkObs};
pub use journey::{JourneyState, LineJourney};
pub use straight::{resolve_straight_port, return_set, Hop, HopStage, Landmark, Probe, ProbeFailure};

use crate::engine::{Decision, LocalView, MoveKind, RobotId};
use crate::grid::Port;

/// Per-hop round budget of a straight hop: one move out, a depth-3
/// enumeration of 39 edges each walked twice, one move back.
pub const R_HOP: u64 = 80;

/// A small set of ports in `1..=4`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct PortSet(u8);

impl PortSet {
    pub fn new() -> Self {
        PortSet(0)
    }

    pub fn of(ports: &[Port]) -> Self {
        let mut s = PortSet::new();
        for &p in ports {
            s.insert(p);
        }
        s
    }

    pub fn insert(&mut self, p: Port) {
        debug_assert!((1..=8).contains(&p));
        self.0 |= 1 << (p - 1);
    }

    pub fn contains(self, p: Port) -> bool {
        (1..=8).contains(&p) && self.0 & (1 << (p - 1)) != 0
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Port> {
        (1..=8u8).filter(move |&p| self.contains(p))
    }
}

/// What a kernel wants the robot to do this round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Stay,
    Move(Port, MoveKind),
    Settle,
}

impl Step {
    pub fn decide<S>(self, state: S) -> Decision<S> {
        match self {
            Step::Stay => Decision::stay(state),
            Step::Move(p, k) => Decision::go(state, p, k),
            Step::Settle => Decision::settle(state),
        }
    }
}

/// Access to the straight-hop state of a co-located robot.
pub trait HopPeer {
    fn hop(&self) -> Option<&Hop>;
}

/// Smallest settled robot on this node.
pub fn settled_here<S>(view: &LocalView<'_, S>) -> Option<RobotId> {
    view.peers.iter().find(|p| p.settled).map(|p| p.id)
}

/// Ids of the unsettled robots of group `key` that are ready to start a hop here.
pub fn ready_members<S: HopPeer>(view: &LocalView<'_, S>, key: RobotId) -> Vec<RobotId> {
    view.peers
        .iter()
        .filter(|p| !p.settled)
        .filter(|p| matches!(p.state.hop(), Some(h) if h.key == key && h.stage == HopStage::Ready))
        .map(|p| p.id)
        .collect()
}

/// Bits needed to store any value in `0..=max`.
pub fn bits(max: u64) -> u64 {
    u64::from(64 - max.leading_zeros()).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_set_ops() {
        let mut s = PortSet::of(&[2, 4]);
        assert!(s.contains(2) && s.contains(4) && !s.contains(1));
        assert_eq!(s.len(), 2);
        s.insert(2);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![2, 4]);
        assert!(!s.contains(0));
    }

    #[test]
    fn bit_widths() {
        assert_eq!(bits(0), 1);
        assert_eq!(bits(1), 1);
        assert_eq!(bits(15), 4);
        assert_eq!(bits(16), 5);
    }
}
