//! One configured run end to end: protocol dispatch, simulation, checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::CrashPolicy;
use crate::config::{ConfigError, RunConfig};
use crate::constants;
use crate::engine::{run_simulation, Placement, RobotProgram, SimError, SimulationResult};
use crate::grid::{Grid, GridSpec};
use crate::protocols::{Oriented, Params, ProtocolId, Unoriented, UnorientedFt};
use crate::trace::{EventKind, Trace};
use crate::verify::{self, CheckReport, Mode};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// What a run writes as its result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub result: SimulationResult,
    pub report: CheckReport,
    /// Nodes holding two or more unsettled live robots when the
    /// fault-tolerant protocol's relocation ends (one means a single
    /// gathering corner).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gathering_groups: Option<usize>,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.report.passed() && !self.result.budget_exhausted && self.gathering_groups.is_none_or(|g| g <= 1)
    }
}

#[derive(Debug)]
pub struct Executed {
    pub record: RunRecord,
    pub trace: Trace,
}

/// Round budget used when the config does not set one: comfortably past
/// each protocol's schedule so an overrun shows up as a bound violation
/// rather than a cut-off run.
pub fn default_budget(protocol: ProtocolId, params: &Params) -> u64 {
    let s = params.side();
    let n = params.n();
    match protocol {
        ProtocolId::Alg1 => 4 * constants::alg1_bound(s, false),
        ProtocolId::Alg2 => constants::alg2_t_end(s) + constants::K_ALG2 * s,
        ProtocolId::Alg3 => constants::alg3_t3(s, n) + constants::alg3_iter_len(s) * constants::ceil_log2(n),
    }
}

fn fault_mode(policy: &CrashPolicy) -> Mode {
    if policy.is_none() {
        Mode::NonFaulty
    } else {
        Mode::Faulty
    }
}

struct Raw {
    result: SimulationResult,
    trace: Trace,
}

fn simulate<P: RobotProgram>(cfg: &RunConfig, program: &P, budget: u64) -> Result<Raw, SimError> {
    let out = run_simulation(&cfg.grid, &cfg.robots.placement, cfg.robots.k, program, &cfg.adversary, budget)?;
    Ok(Raw {
        result: out.result,
        trace: out.trace,
    })
}

fn dispatch(cfg: &RunConfig, params: Params, budget: u64) -> Result<Raw, SimError> {
    match cfg.protocol {
        ProtocolId::Alg1 => simulate(cfg, &Oriented::new(params), budget),
        ProtocolId::Alg2 => simulate(cfg, &Unoriented::new(params, cfg.early_stop), budget),
        ProtocolId::Alg3 => simulate(cfg, &UnorientedFt::new(params, cfg.early_stop), budget),
    }
}

/// Validate, simulate and check one configured run.
pub fn execute(cfg: &RunConfig) -> Result<Executed, RunError> {
    cfg.validate()?;
    let params = Params::new(&cfg.grid, cfg.robots.k);
    let budget = cfg.round_budget.unwrap_or_else(|| default_budget(cfg.protocol, &params));
    let raw = dispatch(cfg, params, budget)?;
    let grid = Grid::build(&cfg.grid).map_err(SimError::from)?;
    let report = verify::check_run(&raw.result, &raw.trace, &grid, cfg.protocol, &params, fault_mode(&cfg.adversary));
    let gathering_groups = (cfg.protocol == ProtocolId::Alg3).then(|| {
        let t2 = constants::alg3_t2(params.side(), params.n());
        verify::crowded_nodes_at(&raw.trace, &grid, t2)
    });
    Ok(Executed {
        record: RunRecord {
            config: cfg.clone(),
            result: raw.result,
            report,
            gathering_groups,
        },
        trace: raw.trace,
    })
}

/// Re-run the checkers on a stored trace. The stored result supplies the
/// quantities a trace does not carry (memory peaks, counters).
pub fn recheck(cfg: &RunConfig, stored: &SimulationResult, trace: &Trace) -> Result<CheckReport, RunError> {
    let params = Params::new(&cfg.grid, cfg.robots.k);
    let grid = Grid::build(&cfg.grid).map_err(SimError::from)?;
    Ok(verify::check_run(stored, trace, &grid, cfg.protocol, &params, fault_mode(&cfg.adversary)))
}

/// Robots that enter phase `tag` at the earliest round anyone does.
fn first_entrants(trace: &Trace, tag: &str) -> Option<(u64, Vec<u32>)> {
    let round = trace.events.iter().find(|e| matches!(&e.kind, EventKind::Phase { tag: t } if t == tag))?.round;
    let ids = trace
        .events
        .iter()
        .filter(|e| e.round == round && matches!(&e.kind, EventKind::Phase { tag: t } if t == tag))
        .map(|e| e.robot)
        .collect();
    Some((round, ids))
}

/// Scripted crashes aimed at the step each protocol relies on most: the
/// first caravan of surplus robots (oriented), or every seeker of the
/// first trip window, one round after they leave (fault-tolerant). At most
/// half the robots are crashed.
pub fn worst_case_schedule(protocol: ProtocolId, spec: &GridSpec, placement: &Placement, k: usize, early_stop: bool) -> Result<CrashPolicy, RunError> {
    let params = Params::new(spec, k);
    let (tags, budget): (&[&str], u64) = match protocol {
        ProtocolId::Alg1 => (&["a1.caravan", "a1.column"], constants::alg1_bound(params.side(), false)),
        ProtocolId::Alg2 => return Ok(CrashPolicy::None),
        ProtocolId::Alg3 => (&["a3.s2.seeker"], constants::alg3_t1(params.side(), params.n()) + 1),
    };
    let cfg = RunConfig {
        grid: spec.clone(),
        robots: crate::config::RobotsConfig {
            k,
            placement: placement.clone(),
        },
        protocol,
        adversary: CrashPolicy::None,
        round_budget: Some(budget),
        early_stop,
        outputs: Default::default(),
    };
    let dry = dispatch(&cfg, params, budget)?;
    let mut schedule = Vec::new();
    if let Some((round, ids)) = tags.iter().find_map(|t| first_entrants(&dry.trace, t)) {
        schedule = ids.into_iter().take(k / 2).map(|id| (round + 1, id)).collect();
    }
    Ok(CrashPolicy::Fixed { schedule })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RobotsConfig;
    use crate::grid::Orientation;

    fn config(protocol: ProtocolId, side: usize, k: usize, adversary: CrashPolicy) -> RunConfig {
        let orientation = if protocol == ProtocolId::Alg1 {
            Orientation::Oriented
        } else {
            Orientation::Unoriented
        };
        RunConfig {
            grid: GridSpec::square(side, orientation, 1),
            robots: RobotsConfig {
                k,
                placement: Placement::Seeded { seed: 1 },
            },
            protocol,
            adversary,
            round_budget: None,
            early_stop: true,
            outputs: Default::default(),
        }
    }

    #[test]
    fn every_protocol_runs_and_passes() {
        for p in [ProtocolId::Alg1, ProtocolId::Alg2, ProtocolId::Alg3] {
            let ex = execute(&config(p, 4, 8, CrashPolicy::None)).unwrap();
            assert!(ex.record.passed(), "{p:?}: {:?}", ex.record.report);
            assert_eq!(ex.record.result.trace_digest, ex.trace.digest_hex());
        }
    }

    #[test]
    fn target_scouts_run_reports_trips() {
        let adv = CrashPolicy::TargetScouts { seed: 3, f: 18, q: 1.0 };
        let ex = execute(&config(ProtocolId::Alg3, 6, 36, adv)).unwrap();
        assert!(ex.record.passed(), "{:?}", ex.record.report);
        assert!(ex.record.result.counters.contains_key("trips"));
        assert_eq!(ex.record.gathering_groups.map(|g| g <= 1), Some(true));
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let adv = CrashPolicy::Random { p: 0.1, seed: 1, f: 1 };
        assert!(matches!(
            execute(&config(ProtocolId::Alg2, 4, 8, adv)),
            Err(RunError::Config(ConfigError::NotFaultTolerant(_)))
        ));
    }

    #[test]
    fn worst_case_scripts_target_the_right_robots() {
        let spec = GridSpec::square(6, Orientation::Unoriented, 2);
        let placement = Placement::Seeded { seed: 2 };
        let CrashPolicy::Fixed { schedule } = worst_case_schedule(ProtocolId::Alg3, &spec, &placement, 36, true).unwrap() else {
            panic!("fixed script expected");
        };
        let t1 = constants::alg3_t1(6, 36);
        assert!(!schedule.is_empty() && schedule.len() <= 18);
        assert!(schedule.iter().all(|&(r, _)| r == t1 + 1));
        let mut cfg = config(ProtocolId::Alg3, 6, 36, CrashPolicy::Fixed { schedule: schedule.clone() });
        cfg.grid = spec;
        cfg.robots.placement = placement;
        let ex = execute(&cfg).unwrap();
        assert_eq!(ex.record.result.crashes, schedule.len());
        assert!(ex.record.passed(), "{:?}", ex.record.report);
    }

    #[test]
    fn recheck_matches_the_live_report() {
        let ex = execute(&config(ProtocolId::Alg2, 5, 12, CrashPolicy::None)).unwrap();
        let again = recheck(&ex.record.config, &ex.record.result, &ex.trace).unwrap();
        assert_eq!(again, ex.record.report);
    }
}
