//! A minimal program exercising the straight-line kernel on its own: every
//! co-located group leaves through port 1 and keeps going straight until it
//! reaches the boundary, where the whole group halts.

use super::{ready_members, settled_here, Hop, HopPeer, HopStage, Step};
use crate::engine::{Decision, LocalView, MoveKind, RobotId, RobotProgram};

#[derive(Debug, Clone, Copy)]
pub struct LineJourney {
    pub halving: bool,
    pub early_stop: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JourneyState {
    Start,
    Going(Hop),
    Done { hops: u32, failures: u32 },
}

impl HopPeer for JourneyState {
    fn hop(&self) -> Option<&Hop> {
        match self {
            JourneyState::Going(h) => Some(h),
            _ => None,
        }
    }
}

impl RobotProgram for LineJourney {
    type State = JourneyState;

    fn name(&self) -> &'static str {
        "line"
    }

    fn init(&self, _id: RobotId) -> JourneyState {
        JourneyState::Start
    }

    fn step(&self, id: RobotId, s: &JourneyState, view: &LocalView<'_, JourneyState>) -> Decision<JourneyState> {
        match s {
            JourneyState::Start => {
                let key = view.peers.iter().map(|p| p.id).min().unwrap_or(id);
                if view.degree() < 4 {
                    return Decision::settle(JourneyState::Done { hops: 0, failures: 0 });
                }
                Decision::go(JourneyState::Going(Hop::new(key, 1, self.halving, self.early_stop)), 1, MoveKind::Straight)
            }
            JourneyState::Going(hop) => {
                let mut hop = hop.clone();
                let done = |h: &Hop| JourneyState::Done {
                    hops: h.hops,
                    failures: h.failures,
                };
                if hop.stage == HopStage::Ready && view.degree() < 4 {
                    return Decision::settle(done(&hop));
                }
                let members = ready_members(view, hop.key);
                let step = hop.step(id, view, &members, settled_here(view));
                match step {
                    Step::Settle => Decision::settle(done(&hop)),
                    other => other.decide(JourneyState::Going(hop)),
                }
            }
            JourneyState::Done { .. } => Decision::stay(s.clone()),
        }
    }

    fn phase(&self, s: &JourneyState) -> &'static str {
        match s {
            JourneyState::Start => "start",
            JourneyState::Going(_) => "line",
            JourneyState::Done { .. } => "done",
        }
    }

    fn memory_bits(&self, _s: &JourneyState) -> u64 {
        0
    }

    fn is_scout(&self, s: &JourneyState) -> bool {
        matches!(s, JourneyState::Going(h) if h.is_scout())
    }

    fn group(&self, s: &JourneyState) -> Option<RobotId> {
        s.hop().map(|h| h.key)
    }

    fn counters(&self, s: &JourneyState) -> Vec<(&'static str, u64)> {
        match s {
            JourneyState::Going(h) => vec![("retries", u64::from(h.failures)), ("hops", u64::from(h.hops))],
            JourneyState::Done { hops, failures } => vec![("retries", u64::from(*failures)), ("hops", u64::from(*hops))],
            JourneyState::Start => Vec::new(),
        }
    }
}
