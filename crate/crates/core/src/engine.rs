//! Synchronous Communicate-Compute-Move execution.
//!
//! Each round runs, in order: adversary crashes, then every live unsettled
//! robot computes a [`Decision`] from its own state, the states of the robots
//! sharing its node and the [`NodeProfile`] of that node, then all moves are
//! applied at once. Settled robots are halted and never stepped again, but
//! stay visible to co-located robots.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{Adversary, AdversaryView, CrashPolicy, RobotInfo};
use crate::grid::{Grid, GridError, GridSpec, NodeId, NodeProfile, Port};
use crate::trace::{EventKind, Trace};

pub type RobotId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    /// A committed hop of a straight-line journey.
    Straight,
    /// Exploration that returns to where it started (probes, wrong boundary tries).
    Probe,
    /// Any other movement (boundary walks, caravans).
    Walk,
}

impl MoveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MoveKind::Straight => "straight",
            MoveKind::Probe => "probe",
            MoveKind::Walk => "walk",
        }
    }

    pub fn parse(s: &str) -> Option<MoveKind> {
        match s {
            "straight" => Some(MoveKind::Straight),
            "probe" => Some(MoveKind::Probe),
            "walk" => Some(MoveKind::Walk),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Stay,
    Move { port: Port, kind: MoveKind },
    Settle,
}

#[derive(Debug, Clone)]
pub struct Decision<S> {
    pub state: S,
    pub action: Action,
}

impl<S> Decision<S> {
    pub fn stay(state: S) -> Self {
        Decision { state, action: Action::Stay }
    }

    pub fn settle(state: S) -> Self {
        Decision { state, action: Action::Settle }
    }

    pub fn go(state: S, port: Port, kind: MoveKind) -> Self {
        Decision {
            state,
            action: Action::Move { port, kind },
        }
    }
}

/// A live robot on the same node, as seen during Communicate.
#[derive(Debug)]
pub struct Peer<'a, S> {
    pub id: RobotId,
    pub settled: bool,
    pub state: &'a S,
}

/// Everything a robot program may read in one round.
#[derive(Debug)]
pub struct LocalView<'a, S> {
    pub round: u64,
    pub profile: NodeProfile<'a>,
    /// Port through which this robot entered the node, if it moved last round.
    pub arrived_via: Option<Port>,
    /// All live robots on this node, ascending id, including the caller.
    pub peers: &'a [Peer<'a, S>],
}

impl<S> LocalView<'_, S> {
    pub fn others(&self, me: RobotId) -> impl Iterator<Item = &Peer<'_, S>> {
        self.peers.iter().filter(move |p| p.id != me)
    }

    pub fn has_settled(&self) -> bool {
        self.peers.iter().any(|p| p.settled)
    }

    pub fn degree(&self) -> u8 {
        self.profile.degree
    }
}

/// A robot algorithm, executed identically by every robot.
pub trait RobotProgram: Sync {
    type State: Clone + fmt::Debug + Send + Sync;

    fn name(&self) -> &'static str;
    fn init(&self, id: RobotId) -> Self::State;
    fn step(&self, id: RobotId, state: &Self::State, view: &LocalView<'_, Self::State>) -> Decision<Self::State>;
    /// Phase tag recorded in the trace whenever it changes.
    fn phase(&self, state: &Self::State) -> &'static str;
    /// Sum of the declared bit widths of the fields live in `state`.
    fn memory_bits(&self, state: &Self::State) -> u64;
    /// True while the robot is away on an exploration or seeker trip.
    fn is_scout(&self, _state: &Self::State) -> bool {
        false
    }
    fn group(&self, _state: &Self::State) -> Option<RobotId> {
        None
    }
    /// Named statistics (retries, trips, ...); the result keeps the maximum over robots.
    fn counters(&self, _state: &Self::State) -> Vec<(&'static str, u64)> {
        Vec::new()
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{k} robots exceed the {n} nodes of the grid")]
    TooManyRobots { k: usize, n: usize },
    #[error("placement puts robot {robot} on missing node {node}")]
    BadPlacement { robot: RobotId, node: NodeId },
    #[error("placement lists {got} robots, expected {k}")]
    PlacementSize { got: usize, k: usize },
    #[error("round {round}: robot {robot} chose port {port} at a degree-{degree} node")]
    InvalidPort { round: u64, robot: RobotId, port: Port, degree: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Placement {
    Explicit {
        nodes: Vec<NodeId>,
    },
    /// Every robot on a uniformly random node.
    Seeded {
        seed: u64,
    },
    /// Every robot on one of `clusters` random nodes.
    Clustered {
        seed: u64,
        clusters: usize,
    },
    Single {
        node: NodeId,
    },
}

impl Placement {
    pub fn resolve(&self, k: usize, n: usize) -> Result<Vec<NodeId>, SimError> {
        let nodes = match self {
            Placement::Explicit { nodes } => {
                if nodes.len() != k {
                    return Err(SimError::PlacementSize { got: nodes.len(), k });
                }
                nodes.clone()
            }
            Placement::Seeded { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..k).map(|_| rng.gen_range(0..n)).collect()
            }
            Placement::Clustered { seed, clusters } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let centers: Vec<NodeId> = (0..(*clusters).max(1)).map(|_| rng.gen_range(0..n)).collect();
                (0..k).map(|_| centers[rng.gen_range(0..centers.len())]).collect()
            }
            Placement::Single { node } => vec![*node; k],
        };
        for (i, &node) in nodes.iter().enumerate() {
            if node >= n {
                return Err(SimError::BadPlacement { robot: i as RobotId + 1, node });
            }
        }
        Ok(nodes)
    }
}

#[derive(Debug, Clone)]
pub struct RobotSlot<S> {
    pub id: RobotId,
    pub node: NodeId,
    pub state: S,
    pub settled: bool,
    pub crashed: bool,
    pub arrived_via: Option<Port>,
    pub peak_bits: u64,
}

impl<S> RobotSlot<S> {
    pub fn live(&self) -> bool {
        !self.crashed
    }
}

#[derive(Debug, Clone)]
pub struct WorldState<S> {
    pub grid: Arc<Grid>,
    pub round: u64,
    /// Indexed by `id - 1`.
    pub robots: Vec<RobotSlot<S>>,
}

impl<S> WorldState<S> {
    /// Live robots per node, ascending id.
    pub fn occupancy(&self) -> BTreeMap<NodeId, Vec<RobotId>> {
        let mut occ: BTreeMap<NodeId, Vec<RobotId>> = BTreeMap::new();
        for r in self.robots.iter().filter(|r| r.live()) {
            occ.entry(r.node).or_default().push(r.id);
        }
        occ
    }

    pub fn live(&self) -> impl Iterator<Item = &RobotSlot<S>> {
        self.robots.iter().filter(|r| r.live())
    }

    pub fn all_halted(&self) -> bool {
        self.live().all(|r| r.settled)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub first: u64,
    pub last: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub protocol: String,
    pub n: usize,
    pub k: usize,
    /// Every live robot halted and no node hosts two live robots.
    pub dispersed: bool,
    pub terminated: bool,
    pub budget_exhausted: bool,
    pub rounds_used: u64,
    pub rounds_executed: u64,
    pub peak_memory_bits: Vec<u64>,
    pub max_memory_bits: u64,
    pub crashes: usize,
    pub phases: BTreeMap<String, PhaseSpan>,
    pub counters: BTreeMap<String, u64>,
    pub trace_digest: String,
}

#[derive(Debug)]
pub struct SimOutcome<S> {
    pub result: SimulationResult,
    pub trace: Trace,
    pub world: WorldState<S>,
}

/// Build the world, run rounds until every live robot halts or
/// `round_budget` rounds have executed.
pub fn run_simulation<P: RobotProgram>(
    spec: &GridSpec,
    placement: &Placement,
    k: usize,
    program: &P,
    policy: &CrashPolicy,
    round_budget: u64,
) -> Result<SimOutcome<P::State>, SimError> {
    let grid = Arc::new(Grid::build(spec)?);
    let n = grid.node_count();
    if k > n {
        return Err(SimError::TooManyRobots { k, n });
    }
    let nodes = placement.resolve(k, n)?;
    let mut trace = Trace::default();
    let robots = nodes
        .iter()
        .enumerate()
        .map(|(i, &node)| {
            let id = i as RobotId + 1;
            let state = program.init(id);
            trace.push(0, id, EventKind::Placed { node });
            RobotSlot {
                id,
                node,
                peak_bits: program.memory_bits(&state),
                state,
                settled: false,
                crashed: false,
                arrived_via: None,
            }
        })
        .collect();
    let mut world = WorldState { grid, round: 0, robots };
    let mut adversary = policy.start();
    let mut terminated = world.all_halted();
    while !terminated && world.round < round_budget {
        execute_round(&mut world, program, &mut adversary, &mut trace)?;
        terminated = world.all_halted();
    }
    let result = summarize(&world, program, &trace, terminated, adversary.crashes_so_far());
    Ok(SimOutcome { result, trace, world })
}

/// One Communicate-Compute-Move round.
pub fn execute_round<P: RobotProgram>(world: &mut WorldState<P::State>, program: &P, adversary: &mut Adversary, trace: &mut Trace) -> Result<(), SimError> {
    let round = world.round;

    let view = AdversaryView {
        round,
        robots: world
            .live()
            .map(|r| RobotInfo {
                id: r.id,
                node: r.node,
                settled: r.settled,
                scout: !r.settled && program.is_scout(&r.state),
                phase: program.phase(&r.state),
            })
            .collect(),
    };
    for id in adversary.plan_crashes(&view) {
        let slot = &mut world.robots[id as usize - 1];
        debug_assert!(!slot.crashed);
        slot.crashed = true;
        trace.push(round, id, EventKind::Crashed);
    }

    // Communicate: group live robots by node.
    let mut by_node: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, r) in world.robots.iter().enumerate() {
        if r.live() {
            by_node.entry(r.node).or_default().push(i);
        }
    }

    // Compute
    let mut decisions: Vec<(usize, Decision<P::State>)> = Vec::new();
    for (&node, members) in &by_node {
        if members.iter().all(|&i| world.robots[i].settled) {
            continue;
        }
        let peers: Vec<Peer<'_, P::State>> = members
            .iter()
            .map(|&i| {
                let r = &world.robots[i];
                Peer {
                    id: r.id,
                    settled: r.settled,
                    state: &r.state,
                }
            })
            .collect();
        let profile = world.grid.node_profile(node);
        for &i in members {
            let r = &world.robots[i];
            if r.settled {
                continue;
            }
            let view = LocalView {
                round,
                profile,
                arrived_via: r.arrived_via,
                peers: &peers,
            };
            decisions.push((i, program.step(r.id, &r.state, &view)));
        }
    }

    // Move
    let grid = Arc::clone(&world.grid);
    for (i, decision) in decisions {
        let slot = &mut world.robots[i];
        let id = slot.id;
        let old_phase = program.phase(&slot.state);
        let new_phase = program.phase(&decision.state);
        if old_phase != new_phase {
            trace.push(round, id, EventKind::Phase { tag: new_phase.to_string() });
        }
        let new_group = program.group(&decision.state);
        if new_group.is_some() && new_group != program.group(&slot.state) {
            trace.push(
                round,
                id,
                EventKind::Merged {
                    group: new_group.unwrap_or_default(),
                },
            );
        }
        slot.peak_bits = slot.peak_bits.max(program.memory_bits(&decision.state));
        slot.state = decision.state;
        slot.arrived_via = None;
        match decision.action {
            Action::Stay => {}
            Action::Settle => {
                slot.settled = true;
                trace.push(round, id, EventKind::Settled);
            }
            Action::Move { port, kind } => {
                let (to, entry) = grid.traverse(slot.node, port).map_err(|_| SimError::InvalidPort {
                    round,
                    robot: id,
                    port,
                    degree: grid.degree(slot.node),
                })?;
                slot.node = to;
                slot.arrived_via = Some(entry);
                trace.push(round, id, EventKind::Moved { port, kind });
            }
        }
    }
    world.round += 1;
    Ok(())
}

/// Rounds until the last settlement: a move in round `r` costs `r + 1`
/// rounds, a settlement during round `r` (compute only) costs `r`.
pub fn rounds_used(trace: &Trace) -> u64 {
    trace
        .events
        .iter()
        .map(|e| match e.kind {
            EventKind::Moved { .. } => e.round + 1,
            EventKind::Settled => e.round,
            _ => 0,
        })
        .max()
        .unwrap_or(0)
}

fn summarize<P: RobotProgram>(world: &WorldState<P::State>, program: &P, trace: &Trace, terminated: bool, crashes: usize) -> SimulationResult {
    let no_stacking = world.occupancy().values().all(|ids| ids.len() <= 1);
    let mut phases: BTreeMap<String, PhaseSpan> = BTreeMap::new();
    for e in &trace.events {
        if let EventKind::Phase { tag } = &e.kind {
            phases
                .entry(tag.clone())
                .and_modify(|s| {
                    s.first = s.first.min(e.round);
                    s.last = s.last.max(e.round);
                })
                .or_insert(PhaseSpan { first: e.round, last: e.round });
        }
    }
    let peak: Vec<u64> = world.robots.iter().map(|r| r.peak_bits).collect();
    let mut counters: BTreeMap<String, u64> = BTreeMap::new();
    for r in &world.robots {
        for (name, v) in program.counters(&r.state) {
            let slot = counters.entry(name.to_string()).or_default();
            *slot = (*slot).max(v);
        }
    }
    SimulationResult {
        protocol: program.name().to_string(),
        n: world.grid.node_count(),
        k: world.robots.len(),
        dispersed: terminated && no_stacking,
        terminated,
        budget_exhausted: !terminated,
        rounds_used: rounds_used(trace),
        rounds_executed: world.round,
        max_memory_bits: peak.iter().copied().max().unwrap_or(0),
        peak_memory_bits: peak,
        crashes,
        phases,
        counters,
        trace_digest: trace.digest_hex(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Orientation;

    /// Walks out of port 1 once, then settles; records who it saw.
    struct Sentinel;

    #[derive(Debug, Clone, Default)]
    struct SentinelState {
        moved: bool,
        seen: Vec<RobotId>,
    }

    impl RobotProgram for Sentinel {
        type State = SentinelState;
        fn name(&self) -> &'static str {
            "sentinel"
        }
        fn init(&self, _id: RobotId) -> SentinelState {
            SentinelState::default()
        }
        fn step(&self, id: RobotId, s: &SentinelState, view: &LocalView<'_, SentinelState>) -> Decision<SentinelState> {
            let mut next = s.clone();
            next.seen.extend(view.others(id).map(|p| p.id));
            if s.moved {
                Decision::settle(next)
            } else {
                next.moved = true;
                Decision::go(next, 1, MoveKind::Walk)
            }
        }
        fn phase(&self, s: &SentinelState) -> &'static str {
            if s.moved {
                "moved"
            } else {
                "start"
            }
        }
        fn memory_bits(&self, s: &SentinelState) -> u64 {
            1 + 4 * s.seen.len() as u64
        }
    }

    fn spec() -> GridSpec {
        GridSpec::square(4, Orientation::Oriented, 0)
    }

    #[test]
    fn colocated_robots_see_each_other() {
        let out = run_simulation(&spec(), &Placement::Single { node: 5 }, 2, &Sentinel, &CrashPolicy::None, 10).unwrap();
        assert_eq!(out.world.robots[0].state.seen[0], 2);
        assert_eq!(out.world.robots[1].state.seen[0], 1);
        assert!(out.result.terminated);
        assert!(!out.result.dispersed, "both follow port 1 and settle together");
    }

    #[test]
    fn crossing_robots_do_not_meet() {
        // (1,1) port 3 is east; (1,2) port 1 is west on an oriented grid
        struct Swap;
        impl RobotProgram for Swap {
            type State = SentinelState;
            fn name(&self) -> &'static str {
                "swap"
            }
            fn init(&self, _id: RobotId) -> SentinelState {
                SentinelState::default()
            }
            fn step(&self, id: RobotId, s: &SentinelState, view: &LocalView<'_, SentinelState>) -> Decision<SentinelState> {
                let mut next = s.clone();
                next.seen.extend(view.others(id).map(|p| p.id));
                if s.moved {
                    return Decision::settle(next);
                }
                next.moved = true;
                Decision::go(next, if id == 1 { 3 } else { 1 }, MoveKind::Walk)
            }
            fn phase(&self, _: &SentinelState) -> &'static str {
                "x"
            }
            fn memory_bits(&self, _: &SentinelState) -> u64 {
                0
            }
        }
        let g = Grid::build(&spec()).unwrap();
        let place = Placement::Explicit {
            nodes: vec![g.node_at(1, 1), g.node_at(1, 2)],
        };
        let out = run_simulation(&spec(), &place, 2, &Swap, &CrashPolicy::None, 10).unwrap();
        assert!(out.world.robots.iter().all(|r| r.state.seen.is_empty()));
        assert!(out.result.dispersed);
    }

    #[test]
    fn crashed_robot_vanishes_from_views() {
        let policy = CrashPolicy::Fixed { schedule: vec![(0, 2)] };
        let out = run_simulation(&spec(), &Placement::Single { node: 5 }, 2, &Sentinel, &policy, 10).unwrap();
        assert!(out.world.robots[0].state.seen.is_empty());
        assert!(out.result.dispersed);
        assert_eq!(out.result.crashes, 1);
        let crash = &out.trace.events[2];
        assert_eq!((crash.round, crash.robot, &crash.kind), (0, 2, &EventKind::Crashed));
    }

    #[test]
    fn invalid_port_names_robot_and_round() {
        struct Bad;
        impl RobotProgram for Bad {
            type State = ();
            fn name(&self) -> &'static str {
                "bad"
            }
            fn init(&self, _: RobotId) {}
            fn step(&self, _: RobotId, _: &(), _: &LocalView<'_, ()>) -> Decision<()> {
                Decision::go((), 4, MoveKind::Walk)
            }
            fn phase(&self, _: &()) -> &'static str {
                "x"
            }
            fn memory_bits(&self, _: &()) -> u64 {
                0
            }
        }
        let err = run_simulation(&spec(), &Placement::Single { node: 0 }, 1, &Bad, &CrashPolicy::None, 5).unwrap_err();
        assert!(matches!(
            err,
            SimError::InvalidPort {
                round: 0,
                robot: 1,
                port: 4,
                degree: 2
            }
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            run_simulation(&spec(), &Placement::Seeded { seed: 1 }, 17, &Sentinel, &CrashPolicy::None, 5),
            Err(SimError::TooManyRobots { k: 17, n: 16 })
        ));
        assert!(matches!(
            run_simulation(&spec(), &Placement::Single { node: 16 }, 1, &Sentinel, &CrashPolicy::None, 5),
            Err(SimError::BadPlacement { .. })
        ));
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        struct Idle;
        impl RobotProgram for Idle {
            type State = ();
            fn name(&self) -> &'static str {
                "idle"
            }
            fn init(&self, _: RobotId) {}
            fn step(&self, _: RobotId, _: &(), _: &LocalView<'_, ()>) -> Decision<()> {
                Decision::stay(())
            }
            fn phase(&self, _: &()) -> &'static str {
                "x"
            }
            fn memory_bits(&self, _: &()) -> u64 {
                0
            }
        }
        let out = run_simulation(&spec(), &Placement::Single { node: 0 }, 1, &Idle, &CrashPolicy::None, 7).unwrap();
        assert!(out.result.budget_exhausted && !out.result.terminated && !out.result.dispersed);
        assert_eq!(out.result.rounds_executed, 7);
    }

    #[test]
    fn peak_memory_tracks_declared_widths() {
        let out = run_simulation(&spec(), &Placement::Single { node: 5 }, 3, &Sentinel, &CrashPolicy::None, 10).unwrap();
        // two peers seen in round 0, none after moving together... they move together so 4 seen
        assert_eq!(out.result.max_memory_bits, 1 + 4 * 4);
    }
}
