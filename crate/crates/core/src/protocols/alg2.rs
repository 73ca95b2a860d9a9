//! Dispersion on unoriented grids without faults.
//!
//! Fixed global schedule, `S` being the longer side:
//!
//! * `[0, T1)`: interior singletons settle, interior groups move straight to
//!   the boundary and everything on the boundary walks to a corner;
//! * `[T1, T2)`: every crowded corner sends its largest id once around the
//!   boundary to learn the smallest corner id, then all corner groups walk
//!   to that corner;
//! * from `T2`: the gathered group either spreads along the boundary or
//!   measures every column with a pair of robots and then sends a group of
//!   exactly the measured size into each column.

use crate::constants;
use crate::engine::{Decision, LocalView, MoveKind, RobotId, RobotProgram};
use crate::kernels::{bits, ready_members, settled_here, Enter, EnterStep, Hop, HopPeer, HopStage, Step, Walk, WalkObs};

use super::common::{rank_of, Params};

#[derive(Debug, Clone)]
pub struct Unoriented {
    pub params: Params,
    pub early_stop: bool,
}

impl Unoriented {
    pub fn new(params: Params, early_stop: bool) -> Self {
        Unoriented { params, early_stop }
    }

    fn s(&self) -> u64 {
        self.params.side()
    }

    fn t1(&self) -> u64 {
        constants::alg2_t1(self.s())
    }

    fn t2(&self) -> u64 {
        constants::alg2_t2(self.s())
    }

    /// Hops of two adjacent sides.
    fn half_loop(&self) -> u32 {
        (self.params.length + self.params.width - 2) as u32
    }
}

/// What a traveler learns on its loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CornerRecord {
    pub min_id: RobotId,
    /// Corners passed before reaching the minimum (4 = home).
    pub offset: u8,
    /// Corners holding a single settled robot.
    pub lone: u8,
    /// Hops of the first side walked from home.
    pub first_side: u32,
}

impl Default for CornerRecord {
    fn default() -> Self {
        CornerRecord {
            min_id: RobotId::MAX,
            offset: 0,
            lone: 0,
            first_side: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum A2Phase {
    Start,
    Interior(Hop),
    ToCorner(Walk),
    Corner,
    Traveler(Walk),
    Home,
    Waiting,
    Relocate(Walk),
    Gathered,
    PairOut(Walk),
    PairEnter(Enter),
    PairDown(Hop),
    PairBack(Walk),
    Reported,
    ColumnOut(Walk),
    ColumnEnter(Enter),
    ColumnDown(Hop),
    Boundary(Walk),
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct A2State {
    pub phase: A2Phase,
    pub record: CornerRecord,
    /// Corners to pass while relocating.
    target: u8,
    /// Hops of the side walked last while relocating.
    last_side: u32,
    /// Hops of the gathering corner's port-1 side.
    pub side_hops: u32,
    /// Robots at the gathering corner when the last stage began.
    pub count: u32,
    pub column: u32,
    /// Empty interior nodes of the column.
    pub demand: u32,
}

impl HopPeer for A2State {
    fn hop(&self) -> Option<&Hop> {
        match &self.phase {
            A2Phase::Interior(h) | A2Phase::PairDown(h) | A2Phase::ColumnDown(h) => Some(h),
            _ => None,
        }
    }
}

type View<'a> = LocalView<'a, A2State>;

fn with(s: &A2State, phase: A2Phase) -> A2State {
    A2State { phase, ..s.clone() }
}

fn unsettled<'a>(view: &'a View<'_>, pred: impl Fn(&A2Phase) -> bool + 'a) -> impl Iterator<Item = RobotId> + 'a {
    view.peers.iter().filter(move |p| !p.settled && pred(&p.state.phase)).map(|p| p.id)
}

fn ids_where(view: &View<'_>, pred: impl Fn(&A2Phase) -> bool) -> Vec<RobotId> {
    unsettled(view, pred).collect()
}

fn at_gathering(p: &A2Phase) -> bool {
    matches!(p, A2Phase::Gathered | A2Phase::Reported)
}

/// Walk the boundary, dropping the smallest id of `pred` on every empty node.
pub(crate) fn greedy_boundary(id: RobotId, walk: &mut Walk, degree: u8, arrived: Option<u8>, occupied: bool, first_here: Option<RobotId>) -> Step {
    match walk.observe(degree, arrived) {
        WalkObs::Return(p) => Step::Move(p, MoveKind::Probe),
        WalkObs::Hop | WalkObs::Idle => {
            if !occupied && first_here == Some(id) {
                Step::Settle
            } else {
                Step::Move(walk.next_port(degree), MoveKind::Walk)
            }
        }
    }
}

impl Unoriented {
    fn start(&self, id: RobotId, s: A2State, view: &View<'_>) -> Decision<A2State> {
        match view.degree() {
            4 if view.peers.len() == 1 => Decision::settle(with(&s, A2Phase::Done)),
            4 => {
                let key = view.peers[0].id;
                let hop = Hop::new(key, 0, false, self.early_stop);
                Decision::go(with(&s, A2Phase::Interior(hop)), 1, MoveKind::Straight)
            }
            2 => Decision::stay(with(&s, A2Phase::Corner)),
            _ => self.to_corner(id, s, Walk::fresh(), view),
        }
    }

    fn interior(&self, id: RobotId, s: A2State, mut hop: Hop, view: &View<'_>) -> Decision<A2State> {
        if hop.stage == HopStage::Ready && view.degree() != 4 {
            let entry = view.arrived_via.expect("arrived by a straight hop");
            return self.to_corner(id, s, Walk::from_entry(entry), view);
        }
        let members = ready_members(view, hop.key);
        let step = hop.step(id, view, &members, settled_here(view));
        let phase = if step == Step::Settle { A2Phase::Done } else { A2Phase::Interior(hop) };
        step.decide(with(&s, phase))
    }

    fn to_corner(&self, _id: RobotId, s: A2State, mut walk: Walk, view: &View<'_>) -> Decision<A2State> {
        match walk.advance(view.degree(), view.arrived_via) {
            Some((p, k)) => Decision::go(with(&s, A2Phase::ToCorner(walk)), p, k),
            None if view.degree() == 2 => Decision::stay(with(&s, A2Phase::Corner)),
            None => {
                let p = walk.next_port(view.degree());
                Decision::go(with(&s, A2Phase::ToCorner(walk)), p, MoveKind::Walk)
            }
        }
    }

    fn corner(&self, id: RobotId, s: A2State, view: &View<'_>) -> Decision<A2State> {
        if view.round < self.t1() {
            return Decision::stay(s);
        }
        let here = ids_where(view, |p| matches!(p, A2Phase::Corner));
        if here.len() == 1 {
            return Decision::settle(with(&s, A2Phase::Done));
        }
        if here.last() == Some(&id) {
            let mut s = s;
            s.record = CornerRecord::default();
            return self.travel(id, s, Walk::with_first(1), view);
        }
        Decision::stay(with(&s, A2Phase::Waiting))
    }

    fn travel(&self, _id: RobotId, mut s: A2State, mut walk: Walk, view: &View<'_>) -> Decision<A2State> {
        if let Some((p, k)) = walk.advance(view.degree(), view.arrived_via) {
            return Decision::go(with(&s, A2Phase::Traveler(walk)), p, k);
        }
        if view.degree() == 2 {
            let c = walk.corners;
            if c == 1 {
                s.record.first_side = walk.hops;
            }
            if let Some(m) = unsettled(view, |p| matches!(p, A2Phase::Waiting)).min() {
                if m < s.record.min_id {
                    s.record.min_id = m;
                    s.record.offset = c;
                }
            }
            if settled_here(view).is_some() {
                s.record.lone += 1;
            }
            if c >= 4 {
                return Decision::stay(with(&s, A2Phase::Home));
            }
        }
        let p = walk.next_port(view.degree());
        Decision::go(with(&s, A2Phase::Traveler(walk)), p, MoveKind::Walk)
    }

    /// Home or waiting robots at `T1 + 12S`: adopt the traveler's record and head out.
    fn depart(&self, id: RobotId, mut s: A2State, view: &View<'_>) -> Decision<A2State> {
        if s.phase == A2Phase::Waiting {
            match view.peers.iter().find(|p| !p.settled && p.state.phase == A2Phase::Home) {
                Some(t) => s.record = t.state.record,
                // only possible if the traveler never came back
                None => return Decision::settle(with(&s, A2Phase::Done)),
            }
        }
        let rec = s.record;
        let half = self.half_loop();
        let (first, target, last) = match rec.offset {
            1 => (1, 1, rec.first_side),
            2 => (1, 2, half - rec.first_side),
            3 => (2, 1, half - rec.first_side),
            _ => {
                s.side_hops = rec.first_side;
                return Decision::stay(with(&s, A2Phase::Gathered));
            }
        };
        s.target = target;
        s.last_side = last;
        self.relocate(id, s, Walk::with_first(first), view)
    }

    fn relocate(&self, _id: RobotId, mut s: A2State, mut walk: Walk, view: &View<'_>) -> Decision<A2State> {
        if let Some((p, k)) = walk.advance(view.degree(), view.arrived_via) {
            return Decision::go(with(&s, A2Phase::Relocate(walk)), p, k);
        }
        if view.degree() == 2 && walk.corners >= s.target {
            s.side_hops = if view.arrived_via == Some(1) {
                s.last_side
            } else {
                self.half_loop() - s.last_side
            };
            return Decision::stay(with(&s, A2Phase::Gathered));
        }
        let p = walk.next_port(view.degree());
        Decision::go(with(&s, A2Phase::Relocate(walk)), p, MoveKind::Walk)
    }

    /// First round of the last stage at the gathering corner.
    fn spread(&self, id: RobotId, mut s: A2State, view: &View<'_>) -> Decision<A2State> {
        let here = ids_where(view, at_gathering);
        s.count = here.len() as u32;
        let free = self.params.perimeter() - usize::from(s.record.lone);
        if here.len() <= free {
            return self.boundary(id, s, Walk::with_first(1), view, true);
        }
        let columns = s.side_hops.saturating_sub(1) as usize;
        let rank = rank_of(&here, id);
        if rank < 2 * columns {
            s.column = (rank / 2 + 1) as u32;
            s.demand = 0;
            return self.walk_out(id, s, Walk::with_first(1), view, true);
        }
        Decision::stay(s)
    }

    /// Waiting at the gathering corner for every pair to report.
    fn collect(&self, id: RobotId, mut s: A2State, view: &View<'_>) -> Decision<A2State> {
        let here = ids_where(view, at_gathering);
        if here.len() < s.count as usize {
            return Decision::stay(s);
        }
        let columns = s.side_hops.saturating_sub(1);
        let mut start = 0u32;
        let rank = rank_of(&here, id) as u32;
        for j in 1..=columns {
            let d = view
                .peers
                .iter()
                .find(|p| p.state.phase == A2Phase::Reported && p.state.column == j)
                .map_or(0, |p| p.state.demand);
            if rank < start + d {
                s.column = j;
                s.demand = d;
                return self.walk_out(id, s, Walk::with_first(1), view, false);
            }
            start += d;
        }
        s.column = 0;
        self.boundary(id, s, Walk::with_first(1), view, true)
    }

    fn walk_out(&self, id: RobotId, s: A2State, mut walk: Walk, view: &View<'_>, pair: bool) -> Decision<A2State> {
        let wrap = |w: Walk| if pair { A2Phase::PairOut(w) } else { A2Phase::ColumnOut(w) };
        if let Some((p, k)) = walk.advance(view.degree(), view.arrived_via) {
            return Decision::go(with(&s, wrap(walk)), p, k);
        }
        if walk.hops >= s.column {
            return self.enter(id, s, Enter::new(walk.back()), view, pair);
        }
        let p = walk.next_port(view.degree());
        Decision::go(with(&s, wrap(walk)), p, MoveKind::Walk)
    }

    fn enter(&self, id: RobotId, mut s: A2State, mut enter: Enter, view: &View<'_>, pair: bool) -> Decision<A2State> {
        let entry = match enter.step(view.degree(), view.arrived_via) {
            EnterStep::Move(p, k) => {
                let phase = if pair { A2Phase::PairEnter(enter) } else { A2Phase::ColumnEnter(enter) };
                return Decision::go(with(&s, phase), p, k);
            }
            EnterStep::Entered(e) => e,
        };
        let column = s.column;
        let mut members = ids_where(view, |p| match p {
            A2Phase::PairEnter(_) => pair,
            A2Phase::ColumnEnter(_) => !pair,
            _ => false,
        });
        members.retain(|&m| view.peers.iter().any(|p| p.id == m && p.state.column == column));
        let hop = Hop::new(members[0], entry, false, self.early_stop);
        if pair {
            if !view.has_settled() {
                s.demand += 1;
            }
            let mut hop = hop;
            let step = hop.step(id, view, &members, settled_here(view));
            return step.decide(with(&s, A2Phase::PairDown(hop)));
        }
        self.fill(id, s, hop, members, view)
    }

    /// One node of a column group's descent: the smallest id settles on an
    /// empty node, the rest hop on.
    fn fill(&self, id: RobotId, s: A2State, mut hop: Hop, mut members: Vec<RobotId>, view: &View<'_>) -> Decision<A2State> {
        let mut anchor = settled_here(view);
        if anchor.is_none() {
            let first = members.remove(0);
            if first == id {
                return Decision::settle(with(&s, A2Phase::Done));
            }
            anchor = Some(first);
        }
        let step = hop.step(id, view, &members, anchor);
        let phase = if step == Step::Settle { A2Phase::Done } else { A2Phase::ColumnDown(hop) };
        step.decide(with(&s, phase))
    }

    fn pair_down(&self, id: RobotId, mut s: A2State, mut hop: Hop, view: &View<'_>) -> Decision<A2State> {
        if hop.stage == HopStage::Ready {
            if view.degree() != 4 {
                let entry = view.arrived_via.expect("arrived by a straight hop");
                return self.pair_back(id, s, Walk::from_entry(entry), view);
            }
            if !view.has_settled() {
                s.demand += 1;
            }
        }
        let members = ready_members(view, hop.key);
        let step = hop.step(id, view, &members, settled_here(view));
        step.decide(with(&s, A2Phase::PairDown(hop)))
    }

    fn pair_back(&self, _id: RobotId, s: A2State, mut walk: Walk, view: &View<'_>) -> Decision<A2State> {
        if let Some((p, k)) = walk.advance(view.degree(), view.arrived_via) {
            return Decision::go(with(&s, A2Phase::PairBack(walk)), p, k);
        }
        if view.degree() == 2 && unsettled(view, |p| matches!(p, A2Phase::Gathered)).next().is_some() {
            return Decision::stay(with(&s, A2Phase::Reported));
        }
        let p = walk.next_port(view.degree());
        Decision::go(with(&s, A2Phase::PairBack(walk)), p, MoveKind::Walk)
    }

    fn column_down(&self, id: RobotId, s: A2State, mut hop: Hop, view: &View<'_>) -> Decision<A2State> {
        if hop.stage != HopStage::Ready {
            let members = ready_members(view, hop.key);
            let step = hop.step(id, view, &members, settled_here(view));
            return step.decide(with(&s, A2Phase::ColumnDown(hop)));
        }
        if view.degree() != 4 {
            // demand was measured on the same column, so this only happens
            // if the column changed since; settle on the boundary instead
            let entry = view.arrived_via.expect("arrived by a straight hop");
            return self.boundary(id, s, Walk::from_entry(entry), view, true);
        }
        let members = ready_members(view, hop.key);
        self.fill(id, s, hop, members, view)
    }

    /// Greedy boundary walk. Robots joining this round only move, so the
    /// walkers deciding who settles all see each other.
    fn boundary(&self, id: RobotId, s: A2State, mut walk: Walk, view: &View<'_>, joining: bool) -> Decision<A2State> {
        let first = if joining {
            None
        } else {
            unsettled(view, |p| matches!(p, A2Phase::Boundary(_))).min()
        };
        let step = greedy_boundary(id, &mut walk, view.degree(), view.arrived_via, view.has_settled(), first);
        let phase = if step == Step::Settle { A2Phase::Done } else { A2Phase::Boundary(walk) };
        step.decide(with(&s, phase))
    }
}

impl RobotProgram for Unoriented {
    type State = A2State;

    fn name(&self) -> &'static str {
        "alg2"
    }

    fn init(&self, _id: RobotId) -> A2State {
        A2State {
            phase: A2Phase::Start,
            record: CornerRecord::default(),
            target: 0,
            last_side: 0,
            side_hops: 0,
            count: 0,
            column: 0,
            demand: 0,
        }
    }

    fn step(&self, id: RobotId, s: &A2State, view: &View<'_>) -> Decision<A2State> {
        if self.params.k == 1 {
            return Decision::settle(with(s, A2Phase::Done));
        }
        let r = view.round;
        let st = s.clone();
        match s.phase.clone() {
            A2Phase::Start => self.start(id, st, view),
            A2Phase::Interior(h) => self.interior(id, st, h, view),
            A2Phase::ToCorner(w) => self.to_corner(id, st, w, view),
            A2Phase::Corner => self.corner(id, st, view),
            A2Phase::Traveler(w) => self.travel(id, st, w, view),
            A2Phase::Home | A2Phase::Waiting if r >= self.t1() + 12 * self.s() => self.depart(id, st, view),
            A2Phase::Home | A2Phase::Waiting => Decision::stay(st),
            A2Phase::Relocate(w) => self.relocate(id, st, w, view),
            A2Phase::Gathered | A2Phase::Reported if st.count > 0 => self.collect(id, st, view),
            A2Phase::Gathered if r >= self.t2() => self.spread(id, st, view),
            A2Phase::Gathered | A2Phase::Reported => Decision::stay(st),
            A2Phase::PairOut(w) => self.walk_out(id, st, w, view, true),
            A2Phase::PairEnter(e) => self.enter(id, st, e, view, true),
            A2Phase::PairDown(h) => self.pair_down(id, st, h, view),
            A2Phase::PairBack(w) => self.pair_back(id, st, w, view),
            A2Phase::ColumnOut(w) => self.walk_out(id, st, w, view, false),
            A2Phase::ColumnEnter(e) => self.enter(id, st, e, view, false),
            A2Phase::ColumnDown(h) => self.column_down(id, st, h, view),
            A2Phase::Boundary(w) => self.boundary(id, st, w, view, false),
            A2Phase::Done => Decision::stay(st),
        }
    }

    fn phase(&self, s: &A2State) -> &'static str {
        match s.phase {
            A2Phase::Start => "a2.start",
            A2Phase::Interior(_) => "a2.s1.interior",
            A2Phase::ToCorner(_) => "a2.s1.walk",
            A2Phase::Corner => "a2.s1.corner",
            A2Phase::Traveler(_) => "a2.s2.traveler",
            A2Phase::Home => "a2.s2.home",
            A2Phase::Waiting => "a2.s2.waiting",
            A2Phase::Relocate(_) => "a2.s2.relocate",
            A2Phase::Gathered => "a2.s2.gathered",
            A2Phase::PairOut(_) => "a2.s3.pair_out",
            A2Phase::PairEnter(_) => "a2.s3.pair_enter",
            A2Phase::PairDown(_) => "a2.s3.pair_down",
            A2Phase::PairBack(_) => "a2.s3.pair_back",
            A2Phase::Reported => "a2.s3.reported",
            A2Phase::ColumnOut(_) => "a2.s3.column_out",
            A2Phase::ColumnEnter(_) => "a2.s3.column_enter",
            A2Phase::ColumnDown(_) => "a2.s3.column_down",
            A2Phase::Boundary(_) => "a2.s3.boundary",
            A2Phase::Done => "a2.done",
        }
    }

    fn memory_bits(&self, s: &A2State) -> u64 {
        let p = &self.params;
        let side = bits(p.length as u64);
        // phase tag and round counter
        let base = 5 + bits(constants::alg2_t_end(self.s()));
        // min id, offset, lone corners, first side
        let record = p.id_bits() + 3 + 3 + side;
        // target, last side, side hops, count, column, demand
        let stage3 = 2 + 2 * side + p.count_bits() + 2 * side;
        let walk = 2 + 4 + 3 + 2 + bits(p.perimeter() as u64) + 3;
        let kernel = match &s.phase {
            A2Phase::Interior(h) | A2Phase::PairDown(h) | A2Phase::ColumnDown(h) => h.memory_bits(p.id_bits(), self.s()),
            A2Phase::ToCorner(_)
            | A2Phase::Traveler(_)
            | A2Phase::Relocate(_)
            | A2Phase::PairOut(_)
            | A2Phase::PairBack(_)
            | A2Phase::ColumnOut(_)
            | A2Phase::Boundary(_) => walk,
            A2Phase::PairEnter(_) | A2Phase::ColumnEnter(_) => 2 + 4 + 2,
            _ => 0,
        };
        base + record + stage3 + kernel
    }

    fn is_scout(&self, s: &A2State) -> bool {
        s.hop().is_some_and(Hop::is_scout)
    }

    fn group(&self, s: &A2State) -> Option<RobotId> {
        s.hop().map(|h| h.key)
    }

    fn counters(&self, s: &A2State) -> Vec<(&'static str, u64)> {
        vec![("retries", s.hop().map_or(0, |h| u64::from(h.failures)))]
    }
}
