//! Ground-truth checkers. Everything here works from the trace and the grid
//! oracle, so stored runs can be re-checked without re-simulating.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constants::{self, ceil_log2};
use crate::engine::{MoveKind, RobotId, SimulationResult};
use crate::grid::{Grid, NodeId};
use crate::protocols::{Params, ProtocolId};
use crate::trace::{EventKind, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// No robot may have crashed.
    NonFaulty,
    /// Crashed robots are ignored.
    Faulty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FinalRobot {
    pub id: RobotId,
    pub node: NodeId,
    pub settled: bool,
    pub crashed: bool,
}

/// Final robot positions obtained by replaying the trace on the grid.
pub fn replay_positions(trace: &Trace, grid: &Grid) -> Vec<FinalRobot> {
    let mut robots: BTreeMap<RobotId, FinalRobot> = BTreeMap::new();
    for e in &trace.events {
        match e.kind {
            EventKind::Placed { node } => {
                robots.insert(
                    e.robot,
                    FinalRobot {
                        id: e.robot,
                        node,
                        settled: false,
                        crashed: false,
                    },
                );
            }
            EventKind::Moved { port, .. } => {
                if let Some(r) = robots.get_mut(&e.robot) {
                    if let Ok((to, _)) = grid.traverse(r.node, port) {
                        r.node = to;
                    }
                }
            }
            EventKind::Settled => {
                if let Some(r) = robots.get_mut(&e.robot) {
                    r.settled = true;
                }
            }
            EventKind::Crashed => {
                if let Some(r) = robots.get_mut(&e.robot) {
                    r.crashed = true;
                }
            }
            _ => {}
        }
    }
    robots.into_values().collect()
}

/// Nodes holding at least two unsettled live robots at the start of `round`.
pub fn crowded_nodes_at(trace: &Trace, grid: &Grid, round: u64) -> usize {
    let mut at: BTreeMap<RobotId, (NodeId, bool)> = BTreeMap::new();
    for e in trace.events.iter().take_while(|e| e.round < round) {
        match e.kind {
            EventKind::Placed { node } => {
                at.insert(e.robot, (node, true));
            }
            EventKind::Moved { port, .. } => {
                if let Some((v, _)) = at.get_mut(&e.robot) {
                    if let Ok((to, _)) = grid.traverse(*v, port) {
                        *v = to;
                    }
                }
            }
            EventKind::Settled | EventKind::Crashed => {
                if let Some((_, live)) = at.get_mut(&e.robot) {
                    *live = false;
                }
            }
            _ => {}
        }
    }
    let mut count: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (v, _) in at.values().filter(|(_, live)| *live) {
        *count.entry(*v).or_default() += 1;
    }
    count.values().filter(|&&c| c >= 2).count()
}

/// Every live robot has settled and no node hosts two live robots.
pub fn check_dispersion(robots: &[FinalRobot], mode: Mode) -> bool {
    if mode == Mode::NonFaulty && robots.iter().any(|r| r.crashed) {
        return false;
    }
    let mut seen = std::collections::BTreeSet::new();
    robots.iter().filter(|r| !r.crashed).all(|r| r.settled && seen.insert(r.node))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub check: String,
    pub bound: u64,
    pub observed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollinearityViolation {
    pub robot: RobotId,
    pub round: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub dispersed: bool,
    pub violations: Vec<BoundViolation>,
    pub collinearity: Vec<CollinearityViolation>,
    pub memory: Vec<BoundViolation>,
    /// Observed value next to the published reference constant, per check.
    pub reference: BTreeMap<String, String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.dispersed && self.violations.is_empty() && self.collinearity.is_empty() && self.memory.is_empty()
    }
}

fn over(out: &mut Vec<BoundViolation>, check: &str, bound: u64, observed: u64) {
    if observed > bound {
        out.push(BoundViolation {
            check: check.to_string(),
            bound,
            observed,
        });
    }
}

/// Rounds of each robot's phase-change events, in order.
fn phase_events(trace: &Trace) -> BTreeMap<RobotId, Vec<(u64, &str)>> {
    let mut out: BTreeMap<RobotId, Vec<(u64, &str)>> = BTreeMap::new();
    for e in &trace.events {
        if let EventKind::Phase { tag } = &e.kind {
            out.entry(e.robot).or_default().push((e.round, tag.as_str()));
        }
    }
    out
}

/// Longest per-robot span from entering `from` to entering `to`.
fn longest_span(trace: &Trace, from: &str, to: &str) -> u64 {
    let mut worst = 0;
    for events in phase_events(trace).values() {
        let mut start = None;
        for &(r, tag) in events {
            if tag == from {
                start = Some(r);
            } else if tag == to {
                if let Some(s) = start.take() {
                    worst = worst.max(r - s);
                }
            }
        }
    }
    worst
}

/// Latest round at which any robot enters a phase whose tag starts with `prefix`.
fn last_entry(trace: &Trace, prefix: &str) -> Option<u64> {
    trace
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Phase { tag } if tag.starts_with(prefix) => Some(e.round),
            _ => None,
        })
        .max()
}

/// Per dispatch iteration of the fault-tolerant protocol: the robots sent
/// out at the iteration start that survived it, how many of them settled
/// within the iteration, and how many came back because their column or
/// the boundary was found full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationProgress {
    pub start: u64,
    pub dispatched: u64,
    pub settled: u64,
    pub reported_full: u64,
}

impl IterationProgress {
    pub fn made_progress(&self) -> bool {
        self.dispatched == 0 || 2 * self.settled >= self.dispatched || self.reported_full > 0
    }
}

pub fn alg3_iterations(trace: &Trace, params: &Params) -> Vec<IterationProgress> {
    let s = params.side();
    let t2 = constants::alg3_t2(s, params.n());
    let len = constants::alg3_iter_len(s);
    let mut out: BTreeMap<u64, (std::collections::BTreeSet<RobotId>, IterationProgress)> = BTreeMap::new();
    for e in trace.events.iter().filter(|e| e.round >= t2) {
        let i = (e.round - t2) / len;
        let start = t2 + i * len;
        let (sent, it) = out.entry(i).or_insert_with(|| {
            (
                Default::default(),
                IterationProgress {
                    start,
                    dispatched: 0,
                    settled: 0,
                    reported_full: 0,
                },
            )
        });
        match &e.kind {
            EventKind::Phase { tag } if e.round == start && (tag == "a3.s3.column_out" || tag == "a3.s3.boundary") => {
                sent.insert(e.robot);
                it.dispatched += 1;
            }
            EventKind::Settled if sent.remove(&e.robot) => it.settled += 1,
            EventKind::Crashed if sent.remove(&e.robot) => it.dispatched -= 1,
            EventKind::Phase { tag } if tag == "a3.s3.returned" && sent.contains(&e.robot) => it.reported_full += 1,
            _ => {}
        }
    }
    out.into_values().map(|(_, it)| it).filter(|it| it.dispatched > 0).collect()
}

/// Round-bound checks against the implementation constants.
pub fn check_bounds(result: &SimulationResult, trace: &Trace, protocol: ProtocolId, params: &Params) -> Vec<BoundViolation> {
    let s = params.side();
    let n = params.n();
    let l = ceil_log2(n);
    let mut v = Vec::new();
    let rounds = result.rounds_used;
    match protocol {
        ProtocolId::Alg1 => {
            let odd = params.length % 2 == 1 && params.width % 2 == 1;
            over(&mut v, "alg1 rounds", constants::alg1_bound(s, odd), rounds);
        }
        ProtocolId::Alg2 => {
            over(&mut v, "alg2 rounds", constants::K_ALG2 * s, rounds);
            over(&mut v, "alg2 corner walk", 3 * s, longest_span(trace, "a2.s1.walk", "a2.s1.corner"));
            let t1 = constants::alg2_t1(s);
            if let Some(last) = last_entry(trace, "a2.s2") {
                over(&mut v, "alg2 gathering", constants::alg2_stage2_len(s), last.saturating_sub(t1));
            }
        }
        ProtocolId::Alg3 => {
            over(&mut v, "alg3 rounds", constants::K_ALG3 * s * l, rounds);
            let t1 = constants::alg3_t1(s, n);
            if let Some(last) = last_entry(trace, "a3.s2") {
                over(&mut v, "alg3 gathering", constants::alg3_stage2_len(s, n), last.saturating_sub(t1));
            }
            let k = params.k as u64;
            over(&mut v, "alg3 trips", ceil_log2(k) + 1, result.counters.get("trips").copied().unwrap_or(0));
            over(&mut v, "alg3 iterations", 2 * l, result.counters.get("iterations").copied().unwrap_or(0));
            for it in alg3_iterations(trace, params).iter().filter(|it| !it.made_progress()) {
                v.push(BoundViolation {
                    check: format!("alg3 iteration progress at {}", it.start),
                    bound: it.dispatched.div_ceil(2),
                    observed: it.settled,
                });
            }
        }
    }
    v
}

pub fn check_memory(result: &SimulationResult, protocol: ProtocolId, params: &Params) -> Vec<BoundViolation> {
    let ceiling = match protocol {
        ProtocolId::Alg1 | ProtocolId::Alg2 => constants::log_memory_ceiling(params.n()),
        ProtocolId::Alg3 => constants::alg3_memory_ceiling(params.side(), params.n()),
    };
    let mut v = Vec::new();
    over(&mut v, "peak memory bits", ceiling, result.max_memory_bits);
    v
}

/// Committed straight moves of one robot must stay on one grid line until
/// the robot changes phase or makes a boundary move. Probe excursions are
/// skipped (they return to where they started).
pub fn check_collinearity(trace: &Trace, grid: &Grid) -> Vec<CollinearityViolation> {
    let mut at: BTreeMap<RobotId, NodeId> = BTreeMap::new();
    let mut segment: BTreeMap<RobotId, Vec<(usize, usize)>> = BTreeMap::new();
    let mut out = Vec::new();
    for e in &trace.events {
        match &e.kind {
            EventKind::Placed { node } => {
                at.insert(e.robot, *node);
            }
            EventKind::Phase { .. } => {
                segment.remove(&e.robot);
            }
            EventKind::Moved { port, kind } => {
                let Some(node) = at.get_mut(&e.robot) else { continue };
                let from = *node;
                if let Ok((to, _)) = grid.traverse(from, *port) {
                    *node = to;
                }
                match kind {
                    MoveKind::Walk => {
                        segment.remove(&e.robot);
                    }
                    MoveKind::Probe => {}
                    MoveKind::Straight => {
                        let seg = segment.entry(e.robot).or_default();
                        if seg.is_empty() {
                            seg.push(grid.oracle_position(from));
                        }
                        seg.push(grid.oracle_position(*node));
                        let same_row = seg.iter().all(|p| p.0 == seg[0].0);
                        let same_col = seg.iter().all(|p| p.1 == seg[0].1);
                        if !same_row && !same_col {
                            out.push(CollinearityViolation {
                                robot: e.robot,
                                round: e.round,
                            });
                            // restart so one bad turn is reported once
                            let last = *seg.last().expect("non-empty");
                            seg.clear();
                            seg.push(last);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Run every checker on one finished run.
pub fn check_run(result: &SimulationResult, trace: &Trace, grid: &Grid, protocol: ProtocolId, params: &Params, mode: Mode) -> CheckReport {
    let robots = replay_positions(trace, grid);
    let mut reference = BTreeMap::new();
    for row in constants::table() {
        reference.insert(row.name.to_string(), format!("{} (reference {})", row.implementation, row.reference));
    }
    CheckReport {
        dispersed: check_dispersion(&robots, mode),
        violations: check_bounds(result, trace, protocol, params),
        collinearity: check_collinearity(trace, grid),
        memory: check_memory(result, protocol, params),
        reference,
    }
}
