//! Crash-tolerant dispersion on unoriented grids.
//!
//! Same three-stage shape as the fault-free protocol, with every group
//! operation replaced by one that survives losing members:
//!
//! * `[0, T1)`: interior groups move straight with the halving hop, boundary
//!   robots walk to a corner;
//! * `[T1, T2)`: in fixed trip windows every crowded corner sends its upper
//!   half around the boundary; a corner commits to a target once a returned
//!   seeker and a stay-at-home member agree on (smallest id, corner offset).
//!   After the last window every group walks to its target;
//! * from `T2`: iterations from the gathering corner either spread along the
//!   boundary or send equal groups into the columns not yet known to be
//!   full. A column group fills empty nodes on the way down, turns at the
//!   far side, fills on the way up and reports the column full.

use crate::constants::{self, ceil_log2};
use crate::engine::{Decision, LocalView, MoveKind, RobotId, RobotProgram};
use crate::grid::Port;
use crate::kernels::{bits, ready_members, settled_here, Enter, EnterStep, Hop, HopPeer, HopStage, Step, Walk, WalkObs};

use super::common::{rank_of, Params};

#[derive(Debug, Clone)]
pub struct UnorientedFt {
    pub params: Params,
    pub early_stop: bool,
}

/// Smallest corner id heard of, and the corner holding it counted in
/// port-1 direction from the holder's home corner (0 = home).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Knowledge {
    pub id: RobotId,
    pub offset: u8,
}

impl Default for Knowledge {
    fn default() -> Self {
        Knowledge { id: RobotId::MAX, offset: 0 }
    }
}

impl Knowledge {
    pub fn min(self, other: Knowledge) -> Knowledge {
        if other.id < self.id {
            other
        } else {
            self
        }
    }

    /// Knowledge of a robot at the corner `corner` steps along a traveler's
    /// loop, rewritten in the traveler's frame. `same` tells whether the
    /// resident corner's port-1 direction agrees with the traveler's.
    pub fn to_traveler(self, corner: u8, same: bool) -> Knowledge {
        let c = corner % 4;
        let offset = if same { (c + self.offset) % 4 } else { (c + 4 - self.offset) % 4 };
        Knowledge { offset, ..self }
    }

    /// Inverse of [`Knowledge::to_traveler`].
    pub fn to_resident(self, corner: u8, same: bool) -> Knowledge {
        let c = corner % 4;
        let offset = if same { (self.offset + 4 - c) % 4 } else { (c + 4 - self.offset) % 4 };
        Knowledge { offset, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum A3Phase {
    Start,
    Interior(Hop),
    ToCorner(Walk),
    Corner,
    Seeker(Walk),
    /// One-round stop at a foreign corner so residents can read the seeker.
    Paused {
        walk: Walk,
        corner: u8,
        same: bool,
    },
    SeekerHome,
    Waiting,
    Committed,
    Relocate(Walk),
    Gathered,
    Measure {
        walk: Walk,
        back: bool,
    },
    Boundary(Walk),
    ColumnOut(Walk),
    ColumnEnter(Enter),
    ColumnDown(Hop),
    ColumnUp(Hop),
    ColumnHome(Walk),
    Returned,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct A3State {
    pub phase: A3Phase,
    pub know: Knowledge,
    /// Hops of the home corner's port-1 side.
    pub first_side: Option<u32>,
    /// Corners seen holding a settled robot.
    pub lone: u8,
    target: u8,
    last_side: Option<u32>,
    /// Hops of the gathering corner's port-1 side.
    pub side_hops: Option<u32>,
    /// Columns known to be full, index `column - 1`.
    pub saturated: Vec<bool>,
    pub boundary_done: bool,
    pub column: u32,
    side_back: Port,
    pub trips: u32,
    pub iterations: u32,
}

impl HopPeer for A3State {
    fn hop(&self) -> Option<&Hop> {
        match &self.phase {
            A3Phase::Interior(h) | A3Phase::ColumnDown(h) | A3Phase::ColumnUp(h) => Some(h),
            _ => None,
        }
    }
}

type View<'a> = LocalView<'a, A3State>;

fn with(s: &A3State, phase: A3Phase) -> A3State {
    A3State { phase, ..s.clone() }
}

fn unsettled<'a, 'b>(view: &'a View<'b>, pred: impl Fn(&A3Phase) -> bool + 'a) -> impl Iterator<Item = &'a crate::engine::Peer<'b, A3State>> + 'a {
    view.peers.iter().filter(move |p| !p.settled && pred(&p.state.phase))
}

fn ids_where(view: &View<'_>, pred: impl Fn(&A3Phase) -> bool) -> Vec<RobotId> {
    unsettled(view, pred).map(|p| p.id).collect()
}

fn resident(p: &A3Phase) -> bool {
    matches!(p, A3Phase::Corner | A3Phase::Waiting | A3Phase::SeekerHome)
}

fn at_gathering(p: &A3Phase) -> bool {
    matches!(p, A3Phase::Gathered | A3Phase::Returned)
}

/// Column robots that are about to decide on this node: fresh entries and
/// groups between hops.
fn filling(p: &A3Phase) -> bool {
    match p {
        A3Phase::ColumnEnter(_) => true,
        A3Phase::ColumnDown(h) | A3Phase::ColumnUp(h) => h.stage == HopStage::Ready,
        _ => false,
    }
}

/// Turn a lone robot's settle into a one-round wait when a smaller robot
/// from another straight-moving group shares the node; that one settles
/// first and becomes the landmark.
fn guard(id: RobotId, step: Step, hop: &mut Hop, view: &View<'_>) -> Step {
    if step == Step::Settle && view.peers.iter().any(|p| !p.settled && p.id < id && p.state.hop().is_some()) {
        hop.stage = HopStage::Ready;
        return Step::Stay;
    }
    step
}

impl UnorientedFt {
    pub fn new(params: Params, early_stop: bool) -> Self {
        UnorientedFt { params, early_stop }
    }

    fn s(&self) -> u64 {
        self.params.side()
    }

    fn logn(&self) -> u64 {
        ceil_log2(self.params.n())
    }

    fn t1(&self) -> u64 {
        constants::alg3_t1(self.s(), self.params.n())
    }

    pub fn t2(&self) -> u64 {
        constants::alg3_t2(self.s(), self.params.n())
    }

    /// Round at which the last trip window closes and groups relocate.
    pub fn relocation_round(&self) -> u64 {
        self.t1() + constants::alg3_trip_len(self.s()) * self.logn()
    }

    fn half_loop(&self) -> u32 {
        (self.params.length + self.params.width - 2) as u32
    }

    /// Index of the trip window starting this round; the value one past the
    /// last window marks relocation.
    fn window(&self, round: u64) -> Option<u64> {
        let t1 = self.t1();
        let trip = constants::alg3_trip_len(self.s());
        (round >= t1 && (round - t1).is_multiple_of(trip) && (round - t1) / trip <= self.logn()).then(|| (round - t1) / trip)
    }

    fn iteration(&self, round: u64) -> bool {
        let t2 = self.t2();
        round >= t2 && (round - t2).is_multiple_of(constants::alg3_iter_len(self.s()))
    }

    // ---- stage 1

    fn start(&self, id: RobotId, s: A3State, view: &View<'_>) -> Decision<A3State> {
        match view.degree() {
            4 if view.peers.len() == 1 => Decision::settle(with(&s, A3Phase::Done)),
            4 => {
                let hop = Hop::new(view.peers[0].id, 0, true, self.early_stop);
                Decision::go(with(&s, A3Phase::Interior(hop)), 1, MoveKind::Straight)
            }
            2 => Decision::stay(with(&s, A3Phase::Corner)),
            _ => self.to_corner(id, s, Walk::fresh(), view),
        }
    }

    fn interior(&self, id: RobotId, s: A3State, mut hop: Hop, view: &View<'_>) -> Decision<A3State> {
        if hop.stage == HopStage::Ready && view.degree() != 4 {
            let entry = view.arrived_via.expect("arrived by a straight hop");
            return self.to_corner(id, s, Walk::from_entry(entry), view);
        }
        let members = ready_members(view, hop.key);
        let step = hop.step(id, view, &members, settled_here(view));
        let step = guard(id, step, &mut hop, view);
        let phase = if step == Step::Settle { A3Phase::Done } else { A3Phase::Interior(hop) };
        step.decide(with(&s, phase))
    }

    fn to_corner(&self, _id: RobotId, s: A3State, mut walk: Walk, view: &View<'_>) -> Decision<A3State> {
        match walk.advance(view.degree(), view.arrived_via) {
            Some((p, k)) => Decision::go(with(&s, A3Phase::ToCorner(walk)), p, k),
            None if view.degree() == 2 => Decision::stay(with(&s, A3Phase::Corner)),
            None => {
                let p = walk.next_port(view.degree());
                Decision::go(with(&s, A3Phase::ToCorner(walk)), p, MoveKind::Walk)
            }
        }
    }

    // ---- stage 2

    /// Residents read every seeker pausing here.
    fn learn(&self, mut s: A3State, view: &View<'_>) -> A3State {
        for p in unsettled(view, |p| matches!(p, A3Phase::Paused { .. })) {
            if let A3Phase::Paused { corner, same, .. } = p.state.phase {
                s.know = s.know.min(p.state.know.to_resident(corner, same));
            }
        }
        s
    }

    /// Start of trip window `w` (or relocation when `w` is the last).
    fn evaluate(&self, id: RobotId, mut s: A3State, view: &View<'_>, w: u64) -> Decision<A3State> {
        let last = w == self.logn();
        if let Some(c) = unsettled(view, |p| *p == A3Phase::Committed).next() {
            s.know = c.state.know;
            s.first_side = s.first_side.or(c.state.first_side);
            return if last {
                self.depart(id, s, view)
            } else {
                Decision::stay(with(&s, A3Phase::Committed))
            };
        }
        let residents: Vec<_> = unsettled(view, resident).collect();
        let mut committed = false;
        if w == 0 {
            s.know = Knowledge {
                id: residents[0].id,
                offset: 0,
            };
        } else {
            let stayers: Vec<Knowledge> = residents
                .iter()
                .filter(|p| p.state.phase != A3Phase::SeekerHome)
                .map(|p| p.state.know)
                .collect();
            let back: Vec<&A3State> = residents.iter().filter(|p| p.state.phase == A3Phase::SeekerHome).map(|p| p.state).collect();
            for b in &back {
                s.first_side = s.first_side.or(b.first_side);
            }
            s.lone = residents.iter().map(|p| p.state.lone).max().unwrap_or(0);
            let agreed = back.iter().map(|b| b.know).filter(|k| stayers.contains(k)).min_by_key(|k| k.id);
            match agreed {
                Some(k) => {
                    s.know = k;
                    committed = true;
                }
                None => s.know = residents.iter().map(|p| p.state.know).fold(s.know, Knowledge::min),
            }
        }
        if residents.len() == 1 {
            return Decision::settle(with(&s, A3Phase::Done));
        }
        if last {
            return self.depart(id, s, view);
        }
        if committed {
            return Decision::stay(with(&s, A3Phase::Committed));
        }
        let ids: Vec<RobotId> = residents.iter().map(|p| p.id).collect();
        let c = ids.len();
        s.trips += 1;
        if rank_of(&ids, id) >= c - c.div_ceil(2) {
            s.lone = 0;
            let mut walk = Walk::with_first(1);
            let p = walk.next_port(view.degree());
            return Decision::go(with(&s, A3Phase::Seeker(walk)), p, MoveKind::Walk);
        }
        Decision::stay(with(&s, A3Phase::Waiting))
    }

    fn seek(&self, _id: RobotId, mut s: A3State, mut walk: Walk, view: &View<'_>) -> Decision<A3State> {
        if let Some((p, k)) = walk.advance(view.degree(), view.arrived_via) {
            return Decision::go(with(&s, A3Phase::Seeker(walk)), p, k);
        }
        if view.degree() == 2 {
            let c = walk.corners;
            if c == 1 {
                s.first_side = Some(walk.hops);
            }
            if c >= 4 {
                return Decision::stay(with(&s, A3Phase::SeekerHome));
            }
            let same = view.arrived_via == Some(2);
            let mut any = false;
            for p in unsettled(view, |p| resident(p) || *p == A3Phase::Committed) {
                any = true;
                s.know = s.know.min(p.state.know.to_traveler(c, same));
            }
            if !any && view.has_settled() {
                s.lone += 1;
            }
            return Decision::stay(with(&s, A3Phase::Paused { walk, corner: c, same }));
        }
        let p = walk.next_port(view.degree());
        Decision::go(with(&s, A3Phase::Seeker(walk)), p, MoveKind::Walk)
    }

    fn resume(&self, s: A3State, mut walk: Walk, view: &View<'_>) -> Decision<A3State> {
        let p = walk.next_port(view.degree());
        Decision::go(with(&s, A3Phase::Seeker(walk)), p, MoveKind::Walk)
    }

    fn depart(&self, id: RobotId, mut s: A3State, view: &View<'_>) -> Decision<A3State> {
        let half = self.half_loop();
        let fs = s.first_side;
        let (first, target, last) = match s.know.offset {
            1 => (1, 1, fs),
            2 => (1, 2, fs.map(|x| half - x)),
            3 => (2, 1, fs.map(|x| half - x)),
            _ => {
                s.side_hops = fs;
                return Decision::stay(with(&s, A3Phase::Gathered));
            }
        };
        s.target = target;
        s.last_side = last;
        self.relocate(id, s, Walk::with_first(first), view)
    }

    fn relocate(&self, _id: RobotId, mut s: A3State, mut walk: Walk, view: &View<'_>) -> Decision<A3State> {
        if let Some((p, k)) = walk.advance(view.degree(), view.arrived_via) {
            return Decision::go(with(&s, A3Phase::Relocate(walk)), p, k);
        }
        if view.degree() == 2 && walk.corners >= s.target {
            let half = self.half_loop();
            s.side_hops = s.last_side.map(|x| if view.arrived_via == Some(1) { x } else { half - x });
            return Decision::stay(with(&s, A3Phase::Gathered));
        }
        let p = walk.next_port(view.degree());
        Decision::go(with(&s, A3Phase::Relocate(walk)), p, MoveKind::Walk)
    }

    // ---- stage 3

    fn dispatch(&self, id: RobotId, mut s: A3State, view: &View<'_>) -> Decision<A3State> {
        let here: Vec<_> = unsettled(view, at_gathering).collect();
        for p in &here {
            s.side_hops = s.side_hops.or(p.state.side_hops);
            s.boundary_done |= p.state.boundary_done;
            s.lone = s.lone.max(p.state.lone);
        }
        let Some(side) = s.side_hops else {
            return self.measure(id, s, Walk::with_first(1), false, view);
        };
        let m = side.saturating_sub(1) as usize;
        s.saturated.resize(m, false);
        for p in &here {
            for (j, &full) in p.state.saturated.iter().enumerate().take(m) {
                s.saturated[j] |= full;
            }
        }
        s.iterations += 1;
        let c = here.len();
        let free = self.params.perimeter().saturating_sub(usize::from(s.lone));
        if !s.boundary_done && c <= free {
            return self.boundary(id, s, Walk::with_first(1), view, true);
        }
        let mut needy: Vec<u32> = (1..=m as u32).filter(|&j| !s.saturated[j as usize - 1]).collect();
        if needy.is_empty() {
            // crashes may have emptied nodes anywhere
            s.saturated.iter_mut().for_each(|x| *x = false);
            s.boundary_done = false;
            needy = (1..=m as u32).collect();
        }
        let ids: Vec<RobotId> = here.iter().map(|p| p.id).collect();
        let g = (c / needy.len()).max(1);
        let q = rank_of(&ids, id) / g;
        match needy.get(q) {
            Some(&j) => {
                s.column = j;
                self.column_out(id, s, Walk::with_first(1), view)
            }
            None => Decision::stay(with(&s, A3Phase::Returned)),
        }
    }

    /// Fallback when nobody at the gathering corner knows its port-1 side:
    /// walk it out and back.
    fn measure(&self, _id: RobotId, mut s: A3State, mut walk: Walk, back: bool, view: &View<'_>) -> Decision<A3State> {
        if let Some((p, k)) = walk.advance(view.degree(), view.arrived_via) {
            return Decision::go(with(&s, A3Phase::Measure { walk, back }), p, k);
        }
        if view.degree() == 2 && walk.corners >= 1 {
            if back {
                return Decision::stay(with(&s, A3Phase::Returned));
            }
            s.side_hops = Some(walk.hops);
            let e = view.arrived_via.expect("walked here");
            let mut walk = Walk::with_first(e);
            let p = walk.next_port(view.degree());
            return Decision::go(with(&s, A3Phase::Measure { walk, back: true }), p, MoveKind::Walk);
        }
        let p = walk.next_port(view.degree());
        Decision::go(with(&s, A3Phase::Measure { walk, back }), p, MoveKind::Walk)
    }

    /// Greedy boundary loop; robots that come all the way round without
    /// settling wait at the gathering corner again.
    fn boundary(&self, id: RobotId, mut s: A3State, mut walk: Walk, view: &View<'_>, joining: bool) -> Decision<A3State> {
        let first = if joining {
            None
        } else {
            unsettled(view, |p| matches!(p, A3Phase::Boundary(_))).map(|p| p.id).min()
        };
        match walk.observe(view.degree(), view.arrived_via) {
            WalkObs::Return(p) => Decision::go(with(&s, A3Phase::Boundary(walk)), p, MoveKind::Probe),
            WalkObs::Hop | WalkObs::Idle => {
                if !view.has_settled() && first == Some(id) {
                    return Decision::settle(with(&s, A3Phase::Done));
                }
                if walk.corners >= 4 && view.degree() == 2 {
                    s.boundary_done = true;
                    return Decision::stay(with(&s, A3Phase::Returned));
                }
                let p = walk.next_port(view.degree());
                Decision::go(with(&s, A3Phase::Boundary(walk)), p, MoveKind::Walk)
            }
        }
    }

    fn column_out(&self, id: RobotId, mut s: A3State, mut walk: Walk, view: &View<'_>) -> Decision<A3State> {
        if let Some((p, k)) = walk.advance(view.degree(), view.arrived_via) {
            return Decision::go(with(&s, A3Phase::ColumnOut(walk)), p, k);
        }
        if walk.hops >= s.column {
            s.side_back = walk.back().unwrap_or(1);
            return self.enter(id, s, Enter::new(walk.back()), view);
        }
        let p = walk.next_port(view.degree());
        Decision::go(with(&s, A3Phase::ColumnOut(walk)), p, MoveKind::Walk)
    }

    fn enter(&self, id: RobotId, s: A3State, mut enter: Enter, view: &View<'_>) -> Decision<A3State> {
        let entry = match enter.step(view.degree(), view.arrived_via) {
            EnterStep::Move(p, k) => return Decision::go(with(&s, A3Phase::ColumnEnter(enter)), p, k),
            EnterStep::Entered(e) => e,
        };
        let column = s.column;
        let members: Vec<RobotId> = unsettled(view, |p| matches!(p, A3Phase::ColumnEnter(_)))
            .filter(|p| p.state.column == column)
            .map(|p| p.id)
            .collect();
        let hop = Hop::new(members[0], entry, true, self.early_stop);
        self.fill(id, s, hop, members, false, view)
    }

    /// One interior node of a column trip. On an empty node the smallest
    /// robot about to decide here settles, whichever group it belongs to.
    fn fill(&self, id: RobotId, s: A3State, mut hop: Hop, mut members: Vec<RobotId>, up: bool, view: &View<'_>) -> Decision<A3State> {
        let mut anchor = settled_here(view);
        if anchor.is_none() {
            let winner = ids_where(view, filling).into_iter().min().expect("caller is filling");
            if winner == id {
                return Decision::settle(with(&s, A3Phase::Done));
            }
            members.retain(|&m| m != winner);
            anchor = Some(winner);
        }
        let step = hop.step(id, view, &members, anchor);
        let step = guard(id, step, &mut hop, view);
        let phase = match step {
            Step::Settle => A3Phase::Done,
            _ if up => A3Phase::ColumnUp(hop),
            _ => A3Phase::ColumnDown(hop),
        };
        step.decide(with(&s, phase))
    }

    fn column_down(&self, id: RobotId, s: A3State, mut hop: Hop, view: &View<'_>) -> Decision<A3State> {
        let members = ready_members(view, hop.key);
        if hop.stage != HopStage::Ready {
            let step = hop.step(id, view, &members, settled_here(view));
            let step = guard(id, step, &mut hop, view);
            let phase = if step == Step::Settle { A3Phase::Done } else { A3Phase::ColumnDown(hop) };
            return step.decide(with(&s, phase));
        }
        if view.degree() != 4 {
            // far side: turn around as one group
            let entry = view.arrived_via.expect("arrived by a straight hop");
            let up = Hop::new(members[0], 0, true, self.early_stop);
            return Decision::go(with(&s, A3Phase::ColumnUp(up)), entry, MoveKind::Straight);
        }
        self.fill(id, s, hop, members, false, view)
    }

    fn column_up(&self, id: RobotId, s: A3State, mut hop: Hop, view: &View<'_>) -> Decision<A3State> {
        let members = ready_members(view, hop.key);
        if hop.stage != HopStage::Ready {
            let step = hop.step(id, view, &members, settled_here(view));
            let step = guard(id, step, &mut hop, view);
            let phase = if step == Step::Settle { A3Phase::Done } else { A3Phase::ColumnUp(hop) };
            return step.decide(with(&s, phase));
        }
        if view.degree() != 4 {
            let back = s.side_back;
            return self.column_home(id, s, Walk::with_first(back), view);
        }
        self.fill(id, s, hop, members, true, view)
    }

    fn column_home(&self, _id: RobotId, mut s: A3State, mut walk: Walk, view: &View<'_>) -> Decision<A3State> {
        if let Some((p, k)) = walk.advance(view.degree(), view.arrived_via) {
            return Decision::go(with(&s, A3Phase::ColumnHome(walk)), p, k);
        }
        if view.degree() == 2 && walk.corners >= 1 {
            if let Some(x) = s.saturated.get_mut(s.column as usize - 1) {
                *x = true;
            }
            return Decision::stay(with(&s, A3Phase::Returned));
        }
        let p = walk.next_port(view.degree());
        Decision::go(with(&s, A3Phase::ColumnHome(walk)), p, MoveKind::Walk)
    }
}

impl RobotProgram for UnorientedFt {
    type State = A3State;

    fn name(&self) -> &'static str {
        "alg3"
    }

    fn init(&self, _id: RobotId) -> A3State {
        let p = &self.params;
        A3State {
            phase: A3Phase::Start,
            know: Knowledge::default(),
            // every side of a square has the same length
            first_side: (p.length == p.width).then(|| p.length as u32 - 1),
            lone: 0,
            target: 0,
            last_side: None,
            side_hops: None,
            saturated: Vec::new(),
            boundary_done: false,
            column: 0,
            side_back: 1,
            trips: 0,
            iterations: 0,
        }
    }

    fn step(&self, id: RobotId, s: &A3State, view: &View<'_>) -> Decision<A3State> {
        if self.params.k == 1 {
            return Decision::settle(with(s, A3Phase::Done));
        }
        let r = view.round;
        let st = s.clone();
        match s.phase.clone() {
            A3Phase::Start => self.start(id, st, view),
            A3Phase::Interior(h) => self.interior(id, st, h, view),
            A3Phase::ToCorner(w) => self.to_corner(id, st, w, view),
            A3Phase::Corner | A3Phase::Waiting | A3Phase::SeekerHome | A3Phase::Committed => match self.window(r) {
                Some(w) if s.phase == A3Phase::Committed && w < self.logn() => Decision::stay(self.learn(st, view)),
                Some(w) => self.evaluate(id, st, view, w),
                None if matches!(s.phase, A3Phase::Waiting | A3Phase::Committed) => Decision::stay(self.learn(st, view)),
                None => Decision::stay(st),
            },
            A3Phase::Seeker(w) => self.seek(id, st, w, view),
            A3Phase::Paused { walk, .. } => self.resume(st, walk, view),
            A3Phase::Relocate(w) => self.relocate(id, st, w, view),
            A3Phase::Gathered | A3Phase::Returned if self.iteration(r) => self.dispatch(id, st, view),
            A3Phase::Gathered | A3Phase::Returned => Decision::stay(st),
            A3Phase::Measure { walk, back } => self.measure(id, st, walk, back, view),
            A3Phase::Boundary(w) => self.boundary(id, st, w, view, false),
            A3Phase::ColumnOut(w) => self.column_out(id, st, w, view),
            A3Phase::ColumnEnter(e) => self.enter(id, st, e, view),
            A3Phase::ColumnDown(h) => self.column_down(id, st, h, view),
            A3Phase::ColumnUp(h) => self.column_up(id, st, h, view),
            A3Phase::ColumnHome(w) => self.column_home(id, st, w, view),
            A3Phase::Done => Decision::stay(st),
        }
    }

    fn phase(&self, s: &A3State) -> &'static str {
        match s.phase {
            A3Phase::Start => "a3.start",
            A3Phase::Interior(_) => "a3.s1.interior",
            A3Phase::ToCorner(_) => "a3.s1.walk",
            A3Phase::Corner => "a3.s1.corner",
            A3Phase::Seeker(_) => "a3.s2.seeker",
            A3Phase::Paused { .. } => "a3.s2.paused",
            A3Phase::SeekerHome => "a3.s2.home",
            A3Phase::Waiting => "a3.s2.waiting",
            A3Phase::Committed => "a3.s2.committed",
            A3Phase::Relocate(_) => "a3.s2.relocate",
            A3Phase::Gathered => "a3.s2.gathered",
            A3Phase::Measure { .. } => "a3.s3.measure",
            A3Phase::Boundary(_) => "a3.s3.boundary",
            A3Phase::ColumnOut(_) => "a3.s3.column_out",
            A3Phase::ColumnEnter(_) => "a3.s3.column_enter",
            A3Phase::ColumnDown(_) => "a3.s3.column_down",
            A3Phase::ColumnUp(_) => "a3.s3.column_up",
            A3Phase::ColumnHome(_) => "a3.s3.column_home",
            A3Phase::Returned => "a3.s3.returned",
            A3Phase::Done => "a3.done",
        }
    }

    fn memory_bits(&self, s: &A3State) -> u64 {
        let p = &self.params;
        let side = bits(p.length as u64);
        let base = 5 + bits(constants::alg3_t3(self.s(), p.n()));
        // knowledge, first side, lone corners, relocation, side hops
        let stage2 = p.id_bits() + 2 + side + 3 + 2 + side + side;
        // one count-sized entry per interior column, flags, column, side port, counters
        let table = (p.length as u64 - 2) * side;
        let stage3 = table + 1 + side + 2 + 2 * bits(2 * self.logn());
        let walk = 2 + 4 + 3 + 2 + bits(p.perimeter() as u64) + 3;
        let kernel = match &s.phase {
            A3Phase::Interior(h) | A3Phase::ColumnDown(h) | A3Phase::ColumnUp(h) => h.memory_bits(p.id_bits(), self.s()),
            A3Phase::ColumnEnter(_) => 2 + 4 + 2,
            A3Phase::ToCorner(_)
            | A3Phase::Seeker(_)
            | A3Phase::Paused { .. }
            | A3Phase::Relocate(_)
            | A3Phase::Measure { .. }
            | A3Phase::Boundary(_)
            | A3Phase::ColumnOut(_)
            | A3Phase::ColumnHome(_) => walk,
            _ => 0,
        };
        base + stage2 + stage3 + kernel
    }

    fn is_scout(&self, s: &A3State) -> bool {
        matches!(s.phase, A3Phase::Seeker(_) | A3Phase::Paused { .. }) || s.hop().is_some_and(Hop::is_scout)
    }

    fn group(&self, s: &A3State) -> Option<RobotId> {
        s.hop().map(|h| h.key)
    }

    fn counters(&self, s: &A3State) -> Vec<(&'static str, u64)> {
        vec![
            ("retries", s.hop().map_or(0, |h| u64::from(h.failures))),
            ("trips", u64::from(s.trips)),
            ("iterations", u64::from(s.iterations)),
        ]
    }
}
