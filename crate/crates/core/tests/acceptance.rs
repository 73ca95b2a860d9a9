//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances are
//! written out here rather than read from the library constants, so a
//! drifting constant cannot move its own goalposts.
//!
//! Run with `cargo test --test acceptance`. Set `ACCEPTANCE_QUICK=1` for a
//! reduced seed count while iterating.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use dispersion::adversary::CrashPolicy;
use dispersion::config::{RobotsConfig, RunConfig};
use dispersion::engine::{run_simulation, MoveKind, Placement};
use dispersion::grid::{Grid, GridSpec, Orientation};
use dispersion::kernels::{resolve_straight_port, return_set, LineJourney};
use dispersion::protocols::ProtocolId;
use dispersion::runner::{self, Executed};
use dispersion::sweep::{self, SweepSpec};
use dispersion::trace::EventKind;
use dispersion::verify::check_collinearity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Individual checks allowed to fail, each with its analysis in the project
/// notes. A criterion whose only failures are listed here prints FAIL but
/// does not fail the build; any other failure does.
const KNOWN_RED: &[&str] = &["alg2 rounds"];

fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros() as u64
    }
}

fn quick() -> bool {
    std::env::var_os("ACCEPTANCE_QUICK").is_some()
}

#[derive(Clone)]
struct Job {
    label: String,
    cfg: RunConfig,
}

struct Outcome {
    label: String,
    ex: Executed,
}

impl Outcome {
    fn rounds(&self) -> u64 {
        self.ex.record.result.rounds_used
    }
    fn mem(&self) -> u64 {
        self.ex.record.result.max_memory_bits
    }
    fn counter(&self, name: &str) -> u64 {
        self.ex.record.result.counters.get(name).copied().unwrap_or(0)
    }
    fn spec(&self) -> &GridSpec {
        &self.ex.record.config.grid
    }
    fn n(&self) -> u64 {
        self.spec().node_count() as u64
    }
    /// The side length standing in for the square root of n.
    fn side(&self) -> u64 {
        self.spec().length() as u64
    }
    fn k(&self) -> u64 {
        self.ex.record.config.robots.k as u64
    }
}

fn config(protocol: ProtocolId, length: usize, width: usize, k: usize, place_seed: u64, port_seed: u64, adversary: CrashPolicy) -> RunConfig {
    let orientation = if protocol == ProtocolId::Alg1 {
        Orientation::Oriented
    } else {
        Orientation::Unoriented
    };
    let grid = if length == width {
        GridSpec::square(length, orientation, port_seed)
    } else {
        GridSpec::rectangle(length, width, orientation, port_seed)
    };
    RunConfig {
        grid,
        robots: RobotsConfig {
            k,
            placement: Placement::Seeded { seed: place_seed },
        },
        protocol,
        adversary,
        round_budget: None,
        early_stop: true,
        outputs: Default::default(),
    }
}

fn worst_case(cfg: &RunConfig) -> CrashPolicy {
    runner::worst_case_schedule(cfg.protocol, &cfg.grid, &cfg.robots.placement, cfg.robots.k, cfg.early_stop).expect("dry run")
}

fn execute_all(jobs: Vec<Job>) -> Vec<Outcome> {
    jobs.into_par_iter()
        .map(|j| Outcome {
            ex: runner::execute(&j.cfg).unwrap_or_else(|e| panic!("{}: {e}", j.label)),
            label: j.label,
        })
        .collect()
}

fn ks(n: usize) -> Vec<usize> {
    let mut v = vec![1, n / 2, n];
    v.dedup();
    v
}

/// Collects failures for one criterion, keeping the first few for display.
#[derive(Default)]
struct Tally {
    checked: usize,
    failures: Vec<String>,
    known: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Pass,
    KnownRed,
    Fail,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(what());
        }
    }
    /// A check listed in [`KNOWN_RED`] under `kind`.
    fn check_known(&mut self, kind: &str, ok: bool, what: impl FnOnce() -> String) {
        assert!(KNOWN_RED.contains(&kind), "{kind} is not a known red check");
        self.checked += 1;
        if !ok {
            self.known += 1;
            self.failures.push(format!("[known red: {kind}] {}", what()));
        }
    }
    fn verdict(&self) -> Verdict {
        if self.failures.is_empty() {
            Verdict::Pass
        } else if self.failures.len() == self.known {
            Verdict::KnownRed
        } else {
            Verdict::Fail
        }
    }
    fn detail(&self, extra: &str) -> String {
        let mut s = format!("{} checks, {} failed", self.checked, self.failures.len());
        if !extra.is_empty() {
            let _ = write!(s, "; {extra}");
        }
        // unknown failures first
        let mut shown: Vec<&String> = self.failures.iter().filter(|f| !f.starts_with("[known")).collect();
        shown.extend(self.failures.iter().filter(|f| f.starts_with("[known")));
        for f in shown.into_iter().take(5) {
            let _ = write!(s, "\n      - {f}");
        }
        if self.failures.len() > 5 {
            let _ = write!(s, "\n      - ... {} more", self.failures.len() - 5);
        }
        s
    }
}

// ---- criterion 1 ----------------------------------------------------------

fn alg1_jobs(length: usize, width: usize, random_seeds: u64) -> Vec<Job> {
    let n = length * width;
    let mut jobs = Vec::new();
    for k in ks(n) {
        let base = config(ProtocolId::Alg1, length, width, k, 7, 0, CrashPolicy::None);
        jobs.push(Job {
            label: format!("alg1 {length}x{width} k={k} none"),
            cfg: base.clone(),
        });
        for seed in 0..random_seeds {
            let mut cfg = config(ProtocolId::Alg1, length, width, k, seed, 0, CrashPolicy::Random { p: 0.02, seed, f: k });
            cfg.robots.placement = Placement::Seeded { seed };
            jobs.push(Job {
                label: format!("alg1 {length}x{width} k={k} random p=0.02 seed={seed}"),
                cfg,
            });
        }
        let mut wc = base.clone();
        wc.adversary = worst_case(&base);
        jobs.push(Job {
            label: format!("alg1 {length}x{width} k={k} worst_case"),
            cfg: wc,
        });
    }
    jobs
}

fn check_alg1(t: &mut Tally, o: &Outcome) {
    let s = o.side();
    let odd = o.spec().length() % 2 == 1 && o.spec().width() % 2 == 1;
    let bound = if odd { 6 * s } else { 8 * s };
    let mem = 32 * ceil_log2(o.n());
    let r = &o.ex.record;
    t.check(r.report.dispersed, || format!("{}: not dispersed", o.label));
    t.check(o.rounds() <= bound, || format!("{}: rounds {} > {bound}", o.label, o.rounds()));
    t.check(o.mem() <= mem, || format!("{}: memory {} > {mem} bits", o.label, o.mem()));
    t.check(r.report.collinearity.is_empty(), || {
        format!("{}: {} collinearity violations", o.label, r.report.collinearity.len())
    });
}

fn criterion1() -> (Verdict, String, Vec<Outcome>) {
    let seeds = if quick() { 2 } else { 5 };
    let jobs: Vec<Job> = (4..=16).flat_map(|s| alg1_jobs(s, s, seeds)).collect();
    let out = execute_all(jobs);
    let mut t = Tally::default();
    for o in &out {
        check_alg1(&mut t, o);
    }
    let worst = out.iter().map(|o| o.rounds() as f64 / o.side() as f64).fold(0.0, f64::max);
    (t.verdict(), t.detail(&format!("{} runs, max rounds/side {worst:.2}", out.len())), out)
}

// ---- criterion 2 ----------------------------------------------------------

fn check_alg2(t: &mut Tally, o: &Outcome) {
    let s = o.side();
    let bound = 200 * s;
    let mem = 32 * ceil_log2(o.n());
    let r = &o.ex.record;
    t.check(r.report.dispersed, || format!("{}: not dispersed", o.label));
    t.check_known("alg2 rounds", o.rounds() <= bound, || format!("{}: rounds {} > {bound}", o.label, o.rounds()));
    t.check(o.mem() <= mem, || format!("{}: memory {} > {mem} bits", o.label, o.mem()));
    // per-trace stage spans, bounded at 3s and 18s by the checkers
    for name in ["alg2 corner walk", "alg2 gathering"] {
        let v = r.report.violations.iter().find(|v| v.check == name);
        t.check(v.is_none(), || format!("{}: {name} {} > {}", o.label, v.unwrap().observed, v.unwrap().bound));
    }
    for v in &r.report.violations {
        if let Some(bound) = match v.check.as_str() {
            "alg2 corner walk" => Some(3 * s),
            "alg2 gathering" => Some(18 * s),
            _ => None,
        } {
            t.check(v.bound == bound, || {
                format!("{}: {} checked against {} instead of {bound}", o.label, v.check, v.bound)
            });
        }
    }
    let others: Vec<_> = r.report.violations.iter().filter(|v| !v.check.starts_with("alg2 ")).collect();
    t.check(others.is_empty(), || format!("{}: {others:?}", o.label));
    t.check(!r.result.budget_exhausted, || format!("{}: budget exhausted", o.label));
}

fn alg2_jobs(length: usize, width: usize, placements: u64, ports: u64) -> Vec<Job> {
    let n = length * width;
    let mut jobs = Vec::new();
    for k in ks(n) {
        for p in 0..placements {
            for q in 0..ports {
                jobs.push(Job {
                    label: format!("alg2 {length}x{width} k={k} placement={p} ports={q}"),
                    cfg: config(ProtocolId::Alg2, length, width, k, p, q, CrashPolicy::None),
                });
            }
        }
    }
    jobs
}

fn criterion2() -> (Verdict, String, Vec<Outcome>) {
    let (placements, ports) = if quick() { (4, 2) } else { (20, 5) };
    let jobs: Vec<Job> = (4..=14).flat_map(|s| alg2_jobs(s, s, placements, ports)).collect();
    let out = execute_all(jobs);
    let mut t = Tally::default();
    for o in &out {
        check_alg2(&mut t, o);
    }
    let mut per_side: BTreeMap<u64, f64> = BTreeMap::new();
    for o in &out {
        let e = per_side.entry(o.side()).or_default();
        *e = e.max(o.rounds() as f64 / o.side() as f64);
    }
    let ratios: Vec<String> = per_side.iter().map(|(s, r)| format!("{s}:{r:.0}")).collect();
    (
        t.verdict(),
        t.detail(&format!("{} runs, max rounds/side by side [{}] vs 200", out.len(), ratios.join(" "))),
        out,
    )
}

// ---- criteria 3 and 5 -----------------------------------------------------

fn alg3_jobs(length: usize, width: usize, seeds: u64) -> Vec<Job> {
    let n = length * width;
    let mut jobs = Vec::new();
    for k in ks(n) {
        for seed in 0..seeds {
            let base = config(ProtocolId::Alg3, length, width, k, seed, seed + 11, CrashPolicy::None);
            let mut advs = vec![
                ("none".to_string(), CrashPolicy::None),
                ("random p=0.01".to_string(), CrashPolicy::Random { p: 0.01, seed, f: k }),
                ("random p=0.05".to_string(), CrashPolicy::Random { p: 0.05, seed, f: k }),
                ("target_scouts".to_string(), CrashPolicy::TargetScouts { seed, f: k / 2, q: 1.0 }),
            ];
            advs.push(("worst_case".to_string(), worst_case(&base)));
            for (name, adversary) in advs {
                let mut cfg = base.clone();
                cfg.adversary = adversary;
                jobs.push(Job {
                    label: format!("alg3 {length}x{width} k={k} {name} seed={seed}"),
                    cfg,
                });
            }
        }
    }
    jobs
}

fn check_alg3(t: &mut Tally, o: &Outcome) {
    let s = o.side();
    let l = ceil_log2(o.n());
    let bound = 220 * s * l;
    let trips = ceil_log2(o.k()) + 1;
    let iterations = 2 * l;
    let mem = 8 * s * l;
    let r = &o.ex.record;
    t.check(r.report.dispersed, || format!("{}: not dispersed", o.label));
    t.check(o.rounds() <= bound, || format!("{}: rounds {} > {bound}", o.label, o.rounds()));
    t.check(o.counter("trips") <= trips, || format!("{}: trips {} > {trips}", o.label, o.counter("trips")));
    t.check(o.counter("iterations") <= iterations, || {
        format!("{}: iterations {} > {iterations}", o.label, o.counter("iterations"))
    });
    t.check(o.mem() <= mem, || format!("{}: memory {} > {mem} bits", o.label, o.mem()));
    t.check(r.report.violations.is_empty(), || format!("{}: {:?}", o.label, r.report.violations));
    t.check(!r.result.budget_exhausted, || format!("{}: budget exhausted", o.label));
}

fn criterion3() -> (Verdict, String, Vec<Outcome>) {
    let seeds = if quick() { 1 } else { 3 };
    let jobs: Vec<Job> = (4..=12).flat_map(|s| alg3_jobs(s, s, seeds)).collect();
    let out = execute_all(jobs);
    let mut t = Tally::default();
    for o in &out {
        check_alg3(&mut t, o);
    }
    let worst = out.iter().map(|o| o.rounds() as f64 / (o.side() * ceil_log2(o.n())) as f64).fold(0.0, f64::max);
    let trips = out.iter().map(|o| o.counter("trips")).max().unwrap_or(0);
    (
        t.verdict(),
        t.detail(&format!("{} runs, max rounds/(side*log n) {worst:.1} vs 220, max trips {trips}", out.len())),
        out,
    )
}

fn archive(o: &Outcome) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("gathering-counterexamples");
    std::fs::create_dir_all(&dir).expect("archive dir");
    let stem: String = o.label.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    let path = dir.join(format!("{stem}.jsonl"));
    std::fs::write(&path, o.ex.trace.to_jsonl()).expect("archive trace");
    std::fs::write(
        dir.join(format!("{stem}.config.json")),
        serde_json::to_string_pretty(&o.ex.record.config).unwrap(),
    )
    .expect("archive config");
    path
}

fn criterion5(alg3: &[Outcome]) -> (Verdict, String) {
    let mut t = Tally::default();
    for o in alg3 {
        let groups = o.ex.record.gathering_groups.expect("recorded for alg3");
        t.check(groups <= 1, || {
            format!("{}: {groups} groups at the end of gathering, trace at {}", o.label, archive(o).display())
        });
    }
    (t.verdict(), t.detail(&format!("{} alg3 runs", alg3.len())))
}

// ---- criterion 4 ----------------------------------------------------------

fn criterion4() -> (Verdict, String) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut probes = 0;
    while probes < 600 {
        let length = rng.gen_range(3..=14);
        let width = rng.gen_range(3..=length);
        let g = Grid::build(&GridSpec::rectangle(length, width, Orientation::Unoriented, rng.gen())).unwrap();
        let internal: Vec<usize> = (0..g.node_count()).filter(|&v| g.degree(v) == 4).collect();
        if internal.is_empty() {
            continue;
        }
        let v = internal[rng.gen_range(0..internal.len())];
        let back = rng.gen_range(1..=4);
        let chosen = resolve_straight_port(4, back, return_set(&g, v, back));
        let expect = g.oracle_direction(v, back).opposite();
        t.check(chosen.map(|p| g.oracle_direction(v, p)) == Ok(expect), || {
            format!("{length}x{width} node {v} back {back}: {chosen:?}")
        });
        probes += 1;
    }
    let mut journeys = 0;
    let mut straight_moves = 0;
    for seed in 0..40u64 {
        let side = 5 + (seed % 8) as usize;
        let spec = GridSpec::square(side, Orientation::Unoriented, seed);
        let prog = LineJourney {
            halving: seed % 2 == 0,
            early_stop: seed % 3 != 0,
        };
        let out = run_simulation(&spec, &Placement::Seeded { seed }, side, &prog, &CrashPolicy::None, 100_000).unwrap();
        let bad = check_collinearity(&out.trace, &out.world.grid);
        straight_moves += out
            .trace
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Moved { kind: MoveKind::Straight, .. }))
            .count();
        t.check(bad.is_empty(), || format!("journey side {side} seed {seed}: {} violations", bad.len()));
        journeys += 1;
    }
    (
        t.verdict(),
        t.detail(&format!(
            "{probes} probes at internal nodes, {journeys} journeys with {straight_moves} straight moves"
        )),
    )
}

// ---- criterion 6 ----------------------------------------------------------

/// Fit rounds = c * x through the origin and report the relative residual
/// at the largest side.
fn fit(points: &[(u64, f64, f64)]) -> (f64, f64) {
    let sxy: f64 = points.iter().map(|&(_, x, y)| x * y).sum();
    let sxx: f64 = points.iter().map(|&(_, x, _)| x * x).sum();
    let c = sxy / sxx;
    let &(_, x, y) = points.iter().max_by_key(|p| p.0).expect("points");
    (c, (y - c * x).abs() / y)
}

/// Mean crash-free rounds per side with k = n.
fn scaling_points(runs: &[Outcome], with_log: bool) -> Vec<(u64, f64, f64)> {
    let mut acc: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for o in runs.iter().filter(|o| o.ex.record.config.adversary.is_none() && o.k() == o.n()) {
        let s = o.side();
        let x = if with_log { (s * ceil_log2(o.n())) as f64 } else { s as f64 };
        let e = acc.entry(s).or_insert((x, 0.0, 0));
        e.1 += o.rounds() as f64;
        e.2 += 1;
    }
    acc.into_iter().map(|(s, (x, sum, count))| (s, x, sum / count as f64)).collect()
}

fn criterion6(alg1: &[Outcome], alg2: &[Outcome], alg3: &[Outcome]) -> (Verdict, String) {
    let mut t = Tally::default();
    let mut parts = Vec::new();
    for (name, runs, with_log) in [("alg1", alg1, false), ("alg2", alg2, false), ("alg3", alg3, true)] {
        let pts = scaling_points(runs, with_log);
        let (c, resid) = fit(&pts);
        t.check(resid <= 0.25, || format!("{name} residual {:.1}%", 100.0 * resid));
        parts.push(format!("{name}: c={c:.1} residual {:.1}% at side {}", 100.0 * resid, pts.last().unwrap().0));
    }
    (t.verdict(), format!("{} (limit 25%)", parts.join(", ")))
}

// ---- criterion 7 ----------------------------------------------------------

fn criterion7(samples: &[&Outcome]) -> (Verdict, String) {
    let mut t = Tally::default();
    for o in samples {
        let again = runner::execute(&o.ex.record.config).unwrap();
        t.check(again.record.result.trace_digest == o.ex.record.result.trace_digest, || {
            format!("{}: digest changed", o.label)
        });
        t.check(again.trace.to_jsonl() == o.ex.trace.to_jsonl(), || format!("{}: trace bytes changed", o.label));
    }
    let spec: SweepSpec = serde_json::from_str(
        r#"{"sides": [4, 7], "rectangles": [[6, 3]], "protocols": ["alg1", "alg2", "alg3"],
            "adversaries": [{"policy": "none"}, {"policy": "random", "p": 0.05}, {"policy": "target_scouts"}, {"policy": "worst_case"}],
            "seeds": 3}"#,
    )
    .unwrap();
    let a = sweep::to_csv(&sweep::run_sweep(&spec, 1).unwrap());
    let b = sweep::to_csv(&sweep::run_sweep(&spec, 0).unwrap());
    let c = sweep::to_csv(&sweep::run_sweep(&spec, 3).unwrap());
    t.check(a == b && b == c, || "sweep CSV differs across job counts".into());
    (
        t.verdict(),
        t.detail(&format!(
            "{} repeated runs, sweep of {} rows repeated 3 times",
            samples.len(),
            a.lines().count() - 1
        )),
    )
}

// ---- criterion 8 ----------------------------------------------------------

fn criterion8() -> (Verdict, String) {
    let shapes = [(6, 3), (8, 4), (10, 5)];
    let seeds = if quick() { 1 } else { 3 };
    let mut jobs = Vec::new();
    for &(l, w) in &shapes {
        jobs.extend(alg1_jobs(l, w, seeds));
        jobs.extend(alg2_jobs(l, w, seeds, 2));
        jobs.extend(alg3_jobs(l, w, seeds));
    }
    let out = execute_all(jobs);
    let mut t = Tally::default();
    for o in &out {
        match o.ex.record.config.protocol {
            ProtocolId::Alg1 => check_alg1(&mut t, o),
            ProtocolId::Alg2 => check_alg2(&mut t, o),
            ProtocolId::Alg3 => {
                check_alg3(&mut t, o);
                let g = o.ex.record.gathering_groups.unwrap_or(0);
                t.check(g <= 1, || format!("{}: {g} groups at the end of gathering", o.label));
            }
        }
    }
    (t.verdict(), t.detail(&format!("{} runs over {:?}", out.len(), shapes)))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let mut lines: Vec<(u32, Verdict)> = Vec::new();
    let mut timed = |id: u32, f: &mut dyn FnMut() -> (Verdict, String)| {
        let start = Instant::now();
        let (verdict, detail) = f();
        let secs = start.elapsed().as_secs_f64();
        let word = if verdict == Verdict::Pass { "PASS" } else { "FAIL" };
        println!("criterion {id}: {word} ({secs:.1}s) {detail}");
        lines.push((id, verdict));
    };
    let mut alg1 = Vec::new();
    let mut alg2 = Vec::new();
    let mut alg3 = Vec::new();
    timed(1, &mut || {
        let (v, d, out) = criterion1();
        alg1 = out;
        (v, d)
    });
    timed(2, &mut || {
        let (v, d, out) = criterion2();
        alg2 = out;
        (v, d)
    });
    timed(3, &mut || {
        let (v, d, out) = criterion3();
        alg3 = out;
        (v, d)
    });
    timed(4, &mut criterion4);
    timed(5, &mut || criterion5(&alg3));
    timed(6, &mut || criterion6(&alg1, &alg2, &alg3));
    let samples: Vec<&Outcome> = alg1.iter().step_by(37).chain(alg2.iter().step_by(211)).chain(alg3.iter().step_by(29)).collect();
    timed(7, &mut || criterion7(&samples));
    timed(8, &mut criterion8);

    let ids = |v: Verdict| lines.iter().filter(|l| l.1 == v).map(|l| l.0).collect::<Vec<_>>();
    let (pass, known, fail) = (ids(Verdict::Pass), ids(Verdict::KnownRed), ids(Verdict::Fail));
    println!();
    println!(
        "acceptance: {} of {} criteria pass; red only on known checks {KNOWN_RED:?}: {known:?}; failing: {fail:?}",
        pass.len(),
        lines.len()
    );
    if !fail.is_empty() {
        std::process::exit(1);
    }
}
