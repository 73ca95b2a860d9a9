//! Crash-fault adversaries.
//!
//! Crashes are decided at the start of a round, before robots communicate.
//! Adaptive policies get the full world state (see [`AdversaryView`]).

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::RobotId;
use crate::grid::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum CrashPolicy {
    #[default]
    None,
    Fixed {
        /// `(round, robot)` pairs.
        schedule: Vec<(u64, RobotId)>,
    },
    Random {
        p: f64,
        seed: u64,
        f: usize,
    },
    TargetScouts {
        seed: u64,
        f: usize,
        #[serde(default = "one")]
        q: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl CrashPolicy {
    pub fn is_none(&self) -> bool {
        matches!(self, CrashPolicy::None)
    }

    pub fn budget(&self) -> usize {
        match self {
            CrashPolicy::None => 0,
            CrashPolicy::Fixed { schedule } => schedule.len(),
            CrashPolicy::Random { f, .. } | CrashPolicy::TargetScouts { f, .. } => *f,
        }
    }

    pub fn label(&self) -> String {
        match self {
            CrashPolicy::None => "none".into(),
            CrashPolicy::Fixed { schedule } => format!("fixed[{}]", schedule.len()),
            CrashPolicy::Random { p, seed, f } => format!("random(p={p},seed={seed},f={f})"),
            CrashPolicy::TargetScouts { seed, f, q } => format!("target_scouts(seed={seed},f={f},q={q})"),
        }
    }

    pub fn start(&self) -> Adversary {
        Adversary {
            policy: self.clone(),
            used: 0,
            prev_scouts: BTreeSet::new(),
        }
    }
}

/// One live robot as the adversary sees it.
#[derive(Debug, Clone)]
pub struct RobotInfo {
    pub id: RobotId,
    pub node: NodeId,
    pub settled: bool,
    pub scout: bool,
    pub phase: &'static str,
}

#[derive(Debug, Clone)]
pub struct AdversaryView {
    pub round: u64,
    /// Live robots only, ascending id.
    pub robots: Vec<RobotInfo>,
}

/// A policy bound to one run.
#[derive(Debug)]
pub struct Adversary {
    policy: CrashPolicy,
    used: usize,
    prev_scouts: BTreeSet<RobotId>,
}

impl Adversary {
    pub fn crashes_so_far(&self) -> usize {
        self.used
    }

    /// Robots to crash at the start of `view.round`; always a subset of the
    /// live robots and never more than the remaining budget.
    pub fn plan_crashes(&mut self, view: &AdversaryView) -> Vec<RobotId> {
        let budget = self.policy.budget().saturating_sub(self.used);
        let mut out = match &self.policy {
            CrashPolicy::None => Vec::new(),
            CrashPolicy::Fixed { schedule } => {
                let live: BTreeSet<RobotId> = view.robots.iter().map(|r| r.id).collect();
                let mut ids: Vec<RobotId> = schedule
                    .iter()
                    .filter(|(r, id)| *r == view.round && live.contains(id))
                    .map(|&(_, id)| id)
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                ids
            }
            CrashPolicy::Random { p, seed, .. } => {
                let mut rng = round_rng(*seed, view.round);
                view.robots.iter().filter(|_| rng.gen_bool(p.clamp(0.0, 1.0))).map(|r| r.id).collect()
            }
            CrashPolicy::TargetScouts { seed, q, .. } => {
                let mut rng = round_rng(*seed, view.round);
                // scouts that were not scouts last round just left their group
                let mut departed: BTreeMap<NodeId, Vec<RobotId>> = BTreeMap::new();
                for r in view.robots.iter().filter(|r| r.scout && !self.prev_scouts.contains(&r.id)) {
                    departed.entry(r.node).or_default().push(r.id);
                }
                self.prev_scouts = view.robots.iter().filter(|r| r.scout).map(|r| r.id).collect();
                let mut ids = Vec::new();
                for group in departed.values() {
                    if rng.gen_bool(q.clamp(0.0, 1.0)) {
                        ids.extend_from_slice(group);
                    }
                }
                ids
            }
        };
        out.truncate(budget);
        self.used += out.len();
        if matches!(self.policy, CrashPolicy::TargetScouts { .. }) {
            for id in &out {
                self.prev_scouts.remove(id);
            }
        }
        out
    }
}

fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}
