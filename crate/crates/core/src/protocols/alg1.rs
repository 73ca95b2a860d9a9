//! Fault-tolerant dispersion on oriented grids.
//!
//! Orientation makes straight movement free (one round per hop), so the whole
//! protocol is a fixed schedule in units of the side `S`:
//!
//! * `[0, S)` interior robots head west to the boundary;
//! * `[S, 2S)` boundary robots walk to a corner;
//! * even branch: corners keep up to their quadrant's size, the surplus walks
//!   clockwise to the first corner with room (`[2S, 6S)`), then each corner
//!   fills its quadrant column by column (`[6S, 8S)`);
//! * odd branch (both dimensions odd): corners meet at the centre, move to
//!   the north-west corner and spread over all columns (`[2S, 6S)`).

use crate::engine::{Decision, LocalView, MoveKind, RobotId, RobotProgram};
use crate::grid::{Direction, NodeProfile};
use crate::kernels::bits;

use super::common::{corner_identity, rank_of, Corner, Params};

#[derive(Debug, Clone)]
pub struct Oriented {
    pub params: Params,
}

impl Oriented {
    pub fn new(params: Params) -> Self {
        Oriented { params }
    }

    fn s(&self) -> u64 {
        self.params.side()
    }

    pub fn odd_branch(&self) -> bool {
        self.params.length % 2 == 1 && self.params.width % 2 == 1
    }

    pub fn bound(&self) -> u64 {
        crate::constants::alg1_bound(self.s(), self.odd_branch())
    }

    fn quadrant(&self, c: Corner) -> (u32, u32) {
        let (l, w) = (self.params.length as u32, self.params.width as u32);
        let (top, left) = (w / 2, l / 2);
        let height = match c {
            Corner::NW | Corner::NE => top,
            Corner::SE | Corner::SW => w - top,
        };
        let width = match c {
            Corner::NW | Corner::SW => left,
            Corner::NE | Corner::SE => l - left,
        };
        (height, width)
    }

    fn capacity(&self, c: Corner) -> usize {
        let (h, w) = self.quadrant(c);
        (h * w) as usize
    }

    /// Hops of an axis-parallel leg from a side to the middle line.
    fn half_leg(&self, d: Direction) -> u32 {
        if d.is_vertical() {
            (self.params.width as u32 - 1) / 2
        } else {
            (self.params.length as u32 - 1) / 2
        }
    }
}

/// Heading along the side and heading into the quadrant, per corner.
fn caravan_headings(c: Corner) -> (Direction, Direction) {
    match c {
        Corner::NW => (Direction::E, Direction::S),
        Corner::NE => (Direction::W, Direction::S),
        Corner::SE => (Direction::W, Direction::N),
        Corner::SW => (Direction::E, Direction::N),
    }
}

fn clockwise_from(c: Corner) -> Direction {
    match c {
        Corner::NW => Direction::E,
        Corner::NE => Direction::S,
        Corner::SE => Direction::W,
        Corner::SW => Direction::N,
    }
}

/// First leg of the odd branch, along the corner's lowest port.
fn odd_first_leg(c: Corner) -> (Direction, Direction) {
    match c {
        Corner::NW => (Direction::S, Direction::E),
        Corner::NE => (Direction::W, Direction::S),
        Corner::SE => (Direction::W, Direction::N),
        Corner::SW => (Direction::E, Direction::N),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A1Phase {
    Inward,
    Boundary,
    Corner,
    Kept,
    Roam,
    ToCenter,
    Center,
    ToNorthWest,
    NorthWest,
    Caravan,
    Column,
    Stray,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct A1State {
    pub phase: A1Phase,
    heading: Direction,
    left: u32,
    next_leg: Option<(Direction, u32)>,
    /// Heading down the column once the caravan leg is over.
    down: Direction,
    corner: Option<Corner>,
    column: u32,
}

impl A1State {
    fn with(&self, phase: A1Phase) -> Self {
        A1State { phase, ..self.clone() }
    }
}

fn port(profile: &NodeProfile<'_>, d: Direction) -> Option<u8> {
    profile.port_toward(d)
}

impl Oriented {
    fn go(&self, s: A1State, profile: &NodeProfile<'_>, d: Direction, kind: MoveKind) -> Decision<A1State> {
        match port(profile, d) {
            Some(p) => Decision::go(s, p, kind),
            // running off the grid would be a protocol bug; stop safely instead
            None => Decision::stay(s.with(A1Phase::Stray)),
        }
    }

    /// Run the remaining legs, then switch to `then`.
    fn legs(&self, mut s: A1State, profile: &NodeProfile<'_>, then: A1Phase) -> Decision<A1State> {
        if s.left == 0 {
            if let Some((d, h)) = s.next_leg.take() {
                s.heading = d;
                s.left = h;
            }
        }
        if s.left == 0 {
            return Decision::stay(s.with(then));
        }
        s.left -= 1;
        let d = s.heading;
        self.go(s, profile, d, MoveKind::Walk)
    }

    fn column(&self, id: RobotId, s: A1State, view: &LocalView<'_, A1State>) -> Decision<A1State> {
        let occupied = view.has_settled();
        if !occupied {
            let first = view
                .peers
                .iter()
                .filter(|p| !p.settled && matches!(p.state.phase, A1Phase::Caravan | A1Phase::Column))
                .filter(|p| p.state.corner == s.corner && p.state.column == s.column)
                .map(|p| p.id)
                .min();
            if first == Some(id) {
                return Decision::settle(s.with(A1Phase::Done));
            }
        }
        let d = s.down;
        self.go(s, &view.profile, d, MoveKind::Straight)
    }

    fn stray(&self, id: RobotId, s: A1State, view: &LocalView<'_, A1State>) -> Decision<A1State> {
        if !view.has_settled() {
            let first = view.peers.iter().filter(|p| !p.settled && p.state.phase == A1Phase::Stray).map(|p| p.id).min();
            if first == Some(id) {
                return Decision::settle(s.with(A1Phase::Done));
            }
        }
        // keep circling the boundary clockwise
        let mut s = s;
        if view.degree() == 2 {
            if let Some(c) = corner_identity(&view.profile) {
                s.heading = clockwise_from(c);
            }
        }
        let d = s.heading;
        match port(&view.profile, d) {
            Some(p) => Decision::go(s, p, MoveKind::Walk),
            None => Decision::settle(s.with(A1Phase::Done)),
        }
    }

    fn start_caravan(&self, id: RobotId, mut s: A1State, view: &LocalView<'_, A1State>, from: A1Phase, corner: Corner, group: usize) -> Decision<A1State> {
        let ids: Vec<RobotId> = view.peers.iter().filter(|p| !p.settled && p.state.phase == from).map(|p| p.id).collect();
        let (along, down) = if self.odd_branch() {
            (Direction::E, Direction::S)
        } else {
            caravan_headings(corner)
        };
        let col = (rank_of(&ids, id) / group.max(1)) as u32;
        s.corner = Some(corner);
        s.column = col;
        s.heading = along;
        s.down = down;
        s.left = col;
        if col == 0 {
            // peers still carry their pre-caravan phase this round
            if !view.has_settled() && ids.first() == Some(&id) {
                return Decision::settle(s.with(A1Phase::Done));
            }
            return self.go(s.with(A1Phase::Column), &view.profile, down, MoveKind::Straight);
        }
        s.left -= 1;
        self.go(s.with(A1Phase::Caravan), &view.profile, along, MoveKind::Walk)
    }
}

impl RobotProgram for Oriented {
    type State = A1State;

    fn name(&self) -> &'static str {
        "alg1"
    }

    fn init(&self, _id: RobotId) -> A1State {
        A1State {
            phase: A1Phase::Inward,
            heading: Direction::W,
            left: 0,
            next_leg: None,
            down: Direction::S,
            corner: None,
            column: 0,
        }
    }

    fn step(&self, id: RobotId, s: &A1State, view: &LocalView<'_, A1State>) -> Decision<A1State> {
        let s = s.clone();
        let r = view.round;
        let side = self.s();
        let profile = view.profile;
        if self.params.k == 1 {
            return Decision::settle(s.with(A1Phase::Done));
        }
        match s.phase {
            A1Phase::Inward | A1Phase::Boundary | A1Phase::Corner if r < side => {
                if view.degree() == 4 {
                    self.go(s.with(A1Phase::Inward), &profile, Direction::W, MoveKind::Straight)
                } else {
                    Decision::stay(s.with(if view.degree() == 2 { A1Phase::Corner } else { A1Phase::Boundary }))
                }
            }
            A1Phase::Inward | A1Phase::Boundary | A1Phase::Corner if r < 2 * side => {
                if view.degree() == 2 {
                    return Decision::stay(s.with(A1Phase::Corner));
                }
                let dirs = profile.directions.expect("oriented grid");
                let missing = [Direction::N, Direction::E, Direction::S, Direction::W]
                    .into_iter()
                    .find(|d| !dirs.contains(d))
                    .expect("boundary node");
                let inward = missing.opposite();
                let along = (1..=view.degree())
                    .find(|&p| profile.direction_of(p) != Some(inward))
                    .expect("boundary node has side ports");
                Decision::go(s.with(A1Phase::Boundary), along, MoveKind::Walk)
            }
            A1Phase::Inward | A1Phase::Boundary | A1Phase::Corner => {
                let Some(corner) = corner_identity(&profile) else {
                    return self.stray(id, s.with(A1Phase::Stray), view);
                };
                let mut s = s;
                s.corner = Some(corner);
                if self.odd_branch() {
                    let (first, second) = odd_first_leg(corner);
                    s.heading = first;
                    s.left = self.half_leg(first);
                    s.next_leg = Some((second, self.half_leg(second)));
                    return self.legs(s.with(A1Phase::ToCenter), &profile, A1Phase::Center);
                }
                let here: Vec<RobotId> = view
                    .peers
                    .iter()
                    .filter(|p| !p.settled && matches!(p.state.phase, A1Phase::Inward | A1Phase::Boundary | A1Phase::Corner))
                    .map(|p| p.id)
                    .collect();
                if rank_of(&here, id) < self.capacity(corner) {
                    Decision::stay(s.with(A1Phase::Kept))
                } else {
                    s.heading = clockwise_from(corner);
                    let d = s.heading;
                    self.go(s.with(A1Phase::Roam), &profile, d, MoveKind::Walk)
                }
            }
            A1Phase::Roam if r >= 6 * side => self.stray(id, s.with(A1Phase::Stray), view),
            A1Phase::Roam => {
                let mut s = s;
                if let Some(corner) = corner_identity(&profile) {
                    s.heading = clockwise_from(corner);
                    let kept = view.peers.iter().filter(|p| p.state.phase == A1Phase::Kept).count();
                    let spare = self.capacity(corner).saturating_sub(kept);
                    let arrivals: Vec<RobotId> = view.peers.iter().filter(|p| p.state.phase == A1Phase::Roam).map(|p| p.id).collect();
                    if rank_of(&arrivals, id) < spare {
                        s.corner = Some(corner);
                        return Decision::stay(s.with(A1Phase::Kept));
                    }
                }
                let d = s.heading;
                self.go(s, &profile, d, MoveKind::Walk)
            }
            A1Phase::Kept if r >= 6 * side => {
                let corner = s.corner.expect("kept at a corner");
                let (height, _) = self.quadrant(corner);
                self.start_caravan(id, s, view, A1Phase::Kept, corner, height as usize)
            }
            A1Phase::Center if r >= 3 * side => {
                let mut s = s;
                s.heading = Direction::N;
                s.left = self.half_leg(Direction::N);
                s.next_leg = Some((Direction::W, self.half_leg(Direction::W)));
                self.legs(s.with(A1Phase::ToNorthWest), &profile, A1Phase::NorthWest)
            }
            A1Phase::NorthWest if r >= 4 * side => {
                let arrived = view.peers.iter().filter(|p| !p.settled && p.state.phase == A1Phase::NorthWest).count();
                let per_column = arrived.div_ceil(self.params.length);
                self.start_caravan(id, s, view, A1Phase::NorthWest, Corner::NW, per_column)
            }
            A1Phase::Kept | A1Phase::Center | A1Phase::NorthWest => Decision::stay(s),
            A1Phase::ToCenter => self.legs(s, &profile, A1Phase::Center),
            A1Phase::ToNorthWest => self.legs(s, &profile, A1Phase::NorthWest),
            A1Phase::Caravan => {
                if s.left == 0 {
                    return self.column(id, s.with(A1Phase::Column), view);
                }
                let mut s = s;
                s.left -= 1;
                let d = s.heading;
                self.go(s, &profile, d, MoveKind::Walk)
            }
            A1Phase::Column => self.column(id, s, view),
            A1Phase::Stray => self.stray(id, s, view),
            A1Phase::Done => Decision::stay(s),
        }
    }

    fn phase(&self, s: &A1State) -> &'static str {
        match s.phase {
            A1Phase::Inward => "a1.inward",
            A1Phase::Boundary => "a1.boundary",
            A1Phase::Corner => "a1.corner",
            A1Phase::Kept => "a1.kept",
            A1Phase::Roam => "a1.roam",
            A1Phase::ToCenter => "a1.to_center",
            A1Phase::Center => "a1.center",
            A1Phase::ToNorthWest => "a1.to_nw",
            A1Phase::NorthWest => "a1.nw",
            A1Phase::Caravan => "a1.caravan",
            A1Phase::Column => "a1.column",
            A1Phase::Stray => "a1.stray",
            A1Phase::Done => "a1.done",
        }
    }

    fn memory_bits(&self, s: &A1State) -> u64 {
        let p = &self.params;
        let round = bits(8 * self.s());
        let base = p.id_bits() + 4 + round;
        let extra = match s.phase {
            A1Phase::Inward | A1Phase::Boundary | A1Phase::Corner | A1Phase::Done => 0,
            // heading + corner
            A1Phase::Kept | A1Phase::Roam | A1Phase::Stray => 2 + 2,
            // heading, hops left, queued leg
            A1Phase::ToCenter | A1Phase::ToNorthWest | A1Phase::Center | A1Phase::NorthWest => 2 + 2 * bits(p.length as u64) + 2,
            // rank among the corner robots, column, headings, hops left
            A1Phase::Caravan | A1Phase::Column => p.count_bits() + 2 * bits(p.length as u64) + 2 + 2 + 2,
        };
        base + extra
    }
}
