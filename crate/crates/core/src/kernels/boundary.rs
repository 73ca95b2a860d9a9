//! Walking along the grid boundary, and stepping from it into a column.

use super::PortSet;
use crate::engine::MoveKind;
use crate::grid::Port;

/// Outcome of observing the node reached by the previous move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkObs {
    /// Nothing happened since the last observation.
    Idle,
    /// A boundary hop was completed.
    Hop,
    /// The last move went inward; go back through this port.
    Return(Port),
}

/// Boundary walker. Direction is fixed by the first committed hop and never
/// reverses, because the arrival port is never taken again.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Walk {
    back: Option<Port>,
    tried: PortSet,
    first: Option<Port>,
    out: bool,
    returning: bool,
    pub hops: u32,
    pub corners: u8,
}

impl Walk {
    pub fn fresh() -> Self {
        Walk::default()
    }

    /// Continue away from the port just arrived through.
    pub fn from_entry(entry: Port) -> Self {
        Walk {
            back: Some(entry),
            ..Walk::default()
        }
    }

    /// Force the first tentative port.
    pub fn with_first(port: Port) -> Self {
        Walk {
            first: Some(port),
            ..Walk::default()
        }
    }

    pub fn back(&self) -> Option<Port> {
        self.back
    }

    /// True while standing on an interior node after a wrong try.
    pub fn is_off_boundary(&self) -> bool {
        self.returning
    }

    pub fn observe(&mut self, degree: u8, arrived_via: Option<Port>) -> WalkObs {
        if self.out {
            self.out = false;
            let e = arrived_via.expect("walker moved last round");
            if degree == 4 {
                self.returning = true;
                return WalkObs::Return(e);
            }
            self.back = Some(e);
            self.tried = PortSet::new();
            self.hops += 1;
            if degree == 2 {
                self.corners += 1;
            }
            return WalkObs::Hop;
        }
        if self.returning {
            self.returning = false;
            if let Some(e) = arrived_via {
                self.tried.insert(e);
            }
        }
        WalkObs::Idle
    }

    /// Port for the next tentative hop from the current boundary node.
    pub fn next_port(&mut self, degree: u8) -> Port {
        let p = self.first.take().unwrap_or_else(|| {
            (1..=degree)
                .find(|&p| Some(p) != self.back && !self.tried.contains(p))
                .expect("a boundary node always has an untried forward port")
        });
        self.out = true;
        p
    }

    /// Observe and pick the move for this round; `None` right after a hop,
    /// so the caller can check its stop condition first.
    pub fn advance(&mut self, degree: u8, arrived_via: Option<Port>) -> Option<(Port, MoveKind)> {
        match self.observe(degree, arrived_via) {
            WalkObs::Return(p) => Some((p, MoveKind::Probe)),
            WalkObs::Hop => None,
            WalkObs::Idle => Some((self.next_port(degree), MoveKind::Walk)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnterStep {
    Move(Port, MoveKind),
    /// Standing on the first interior node of the column, entered through this port.
    Entered(Port),
}

/// From a boundary node, find the port into the interior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enter {
    back: Option<Port>,
    tried: PortSet,
    out: bool,
    returning: bool,
}

impl Enter {
    pub fn new(back: Option<Port>) -> Self {
        Enter {
            back,
            tried: PortSet::new(),
            out: false,
            returning: false,
        }
    }

    pub fn step(&mut self, degree: u8, arrived_via: Option<Port>) -> EnterStep {
        if self.out {
            self.out = false;
            let e = arrived_via.expect("moved last round");
            if degree == 4 {
                return EnterStep::Entered(e);
            }
            self.returning = true;
            return EnterStep::Move(e, MoveKind::Probe);
        }
        if self.returning {
            self.returning = false;
            if let Some(e) = arrived_via {
                self.tried.insert(e);
            }
        }
        let p = (1..=degree)
            .find(|&p| Some(p) != self.back && !self.tried.contains(p))
            .expect("an inward port exists");
        self.out = true;
        EnterStep::Move(p, MoveKind::Walk)
    }
}
